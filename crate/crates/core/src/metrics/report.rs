use serde::{Deserialize, Serialize};

use super::{MetricError, Result};

/// Raw sub-metrics, each in [0, 1]. Absent when undefined for the data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SubMetrics {
    pub ece: Option<f64>,
    pub brier: Option<f64>,
    pub auroc: Option<f64>,
    pub ndcg: Option<f64>,
    pub map: Option<f64>,
    pub f1: Option<f64>,
    pub ap: Option<f64>,
}

/// The four-dimension score table, percentages at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub unc: f64,
    pub bin: f64,
    pub cal: f64,
    pub info: f64,
    pub avg: f64,
    pub ece: f64,
    pub brier: f64,
    pub auroc: f64,
    pub ndcg: f64,
    pub map: f64,
    pub f1: f64,
    pub ap: f64,
}

impl MetricReport {
    /// One table row: `Unc. Bin. Cal. Info. Avg.` rounded to two decimals.
    pub fn table_row(&self) -> String {
        format!(
            "{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
            self.unc, self.bin, self.cal, self.info, self.avg
        )
    }
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or(MetricError::MissingSubMetric(name))
}

/// Combines sub-metrics into dimension scores. Calibration averages
/// AUROC with `1 - ECE` and `1 - Brier` so that higher is better for all
/// three.
pub fn aggregate_report(sub: &SubMetrics) -> Result<MetricReport> {
    let ece = need(sub.ece, "ece")?;
    let brier = need(sub.brier, "brier")?;
    let auroc = need(sub.auroc, "auroc")?;
    let ndcg = need(sub.ndcg, "ndcg")?;
    let map = need(sub.map, "map")?;
    let f1 = need(sub.f1, "f1")?;
    let ap = need(sub.ap, "ap")?;

    let cal = 100.0 * (auroc + (1.0 - ece) + (1.0 - brier)) / 3.0;
    let info = 100.0 * (ndcg + map) / 2.0;
    let unc = 100.0 * ap;
    let bin = 100.0 * f1;
    Ok(MetricReport {
        unc,
        bin,
        cal,
        info,
        avg: average_dimensions(unc, bin, cal, info),
        ece,
        brier,
        auroc,
        ndcg,
        map,
        f1,
        ap,
    })
}

/// Mean of the four dimension scores.
pub(crate) fn average_dimensions(unc: f64, bin: f64, cal: f64, info: f64) -> f64 {
    (unc + bin + cal + info) / 4.0
}
