//! Layered settings: built-in defaults, then a TOML file, then `DIRAS_*`
//! environment variables, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::annotator::CalibrationMode;
use crate::metrics::{LabelScheme, PartialPolicy};
use crate::prompting::PromptVariant;
use crate::sampler::FillPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub teacher_base_url: String,
    pub teacher_model: String,
    pub teacher_api_key_env: String,
    pub student_base_url: String,
    pub student_model: String,
    pub student_api_key_env: String,
    pub embedding_base_url: String,
    pub embedding_model: String,
    pub embedding_api_key_env: String,
    pub cache_dir: PathBuf,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub parallelism: usize,
    pub variant: PromptVariant,
    pub calibration: CalibrationMode,
    pub seed: u64,
    pub k: usize,
    pub per_side: usize,
    pub fill_policy: FillPolicy,
    pub min_tokens: usize,
    pub query_test_fraction: f64,
    pub report_test_fraction: f64,
    pub ece_bins: usize,
    pub scheme: LabelScheme,
    pub partial_policy: PartialPolicy,
    pub per_bin: usize,
    pub cutoff: f64,
    pub band_low: f64,
    pub band_high: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            teacher_base_url: "https://api.openai.com/v1".into(),
            teacher_model: "gpt-4".into(),
            teacher_api_key_env: "OPENAI_API_KEY".into(),
            student_base_url: "http://127.0.0.1:8000/v1".into(),
            student_model: "student".into(),
            student_api_key_env: "STUDENT_API_KEY".into(),
            embedding_base_url: "https://api.openai.com/v1".into(),
            embedding_model: "text-embedding-3-small".into(),
            embedding_api_key_env: "OPENAI_API_KEY".into(),
            cache_dir: PathBuf::from(".diras-cache"),
            max_in_flight: 8,
            max_attempts: 4,
            parallelism: 8,
            variant: PromptVariant::default(),
            calibration: CalibrationMode::Both,
            seed: 13,
            k: 10,
            per_side: 10,
            fill_policy: FillPolicy::Strict,
            min_tokens: 20,
            query_test_fraction: 0.3,
            report_test_fraction: 0.3,
            ece_bins: 10,
            scheme: LabelScheme::ThreeWay,
            partial_policy: PartialPolicy::AsRelevant,
            per_bin: 50,
            cutoff: 0.95,
            band_low: 0.25,
            band_high: 0.75,
        }
    }
}

/// One flag per config key. Values are parsed with the key's type when
/// the layers are merged.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ConfigFlags {
    /// TOML config file
    #[arg(long, global = true, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub teacher_base_url: Option<String>,
    #[arg(long, global = true)]
    pub teacher_model: Option<String>,
    /// Environment variable holding the teacher API key
    #[arg(long, global = true)]
    pub teacher_api_key_env: Option<String>,
    #[arg(long, global = true)]
    pub student_base_url: Option<String>,
    #[arg(long, global = true)]
    pub student_model: Option<String>,
    #[arg(long, global = true)]
    pub student_api_key_env: Option<String>,
    #[arg(long, global = true)]
    pub embedding_base_url: Option<String>,
    #[arg(long, global = true)]
    pub embedding_model: Option<String>,
    #[arg(long, global = true)]
    pub embedding_api_key_env: Option<String>,
    /// Response cache directory
    #[arg(long, global = true)]
    pub cache_dir: Option<String>,
    /// Concurrent requests per endpoint
    #[arg(long, global = true)]
    pub max_in_flight: Option<String>,
    #[arg(long, global = true)]
    pub max_attempts: Option<String>,
    /// Annotation worker threads
    #[arg(long, global = true)]
    pub parallelism: Option<String>,
    /// Prompt variant, e.g. point-ask-d, point-cot-ask-d, list-d
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// ask, tok or both
    #[arg(long, global = true)]
    pub calibration: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Retrieval cutoff for balanced sampling
    #[arg(long, global = true)]
    pub k: Option<String>,
    #[arg(long, global = true)]
    pub per_side: Option<String>,
    /// strict or fill
    #[arg(long, global = true)]
    pub fill_policy: Option<String>,
    /// Chunks shorter than this are merged with their successor
    #[arg(long, global = true)]
    pub min_tokens: Option<String>,
    #[arg(long, global = true)]
    pub query_test_fraction: Option<String>,
    #[arg(long, global = true)]
    pub report_test_fraction: Option<String>,
    #[arg(long, global = true)]
    pub ece_bins: Option<String>,
    /// three_way, graded_1_3 or binary
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// as_relevant or as_irrelevant
    #[arg(long, global = true)]
    pub partial_policy: Option<String>,
    /// Disagreements sampled per confidence bin
    #[arg(long, global = true)]
    pub per_bin: Option<String>,
    /// Confidence cutoff for the audit table
    #[arg(long, global = true)]
    pub cutoff: Option<String>,
    /// Lowest acceptable Yes fraction
    #[arg(long, global = true)]
    pub band_low: Option<String>,
    /// Highest acceptable Yes fraction
    #[arg(long, global = true)]
    pub band_high: Option<String>,
}

type Table = BTreeMap<String, toml::Value>;

fn to_table(cfg: &Config) -> Table {
    let value = toml::Value::try_from(cfg).expect("config serializes to toml");
    match value {
        toml::Value::Table(t) => t.into_iter().collect(),
        _ => unreachable!("config is a table"),
    }
}

/// Parses `raw` with the type of the existing value for `key`.
fn coerce(table: &Table, key: &str, raw: &str, origin: &str) -> anyhow::Result<toml::Value> {
    let Some(current) = table.get(key) else {
        bail!("{origin}: unknown config key `{key}`");
    };
    let v = match current {
        toml::Value::Integer(_) => toml::Value::Integer(
            raw.trim()
                .parse()
                .with_context(|| format!("{origin}: `{key}` expects an integer, got `{raw}`"))?,
        ),
        toml::Value::Float(_) => toml::Value::Float(
            raw.trim()
                .parse()
                .with_context(|| format!("{origin}: `{key}` expects a number, got `{raw}`"))?,
        ),
        toml::Value::Boolean(_) => toml::Value::Boolean(
            raw.trim()
                .parse()
                .with_context(|| format!("{origin}: `{key}` expects true or false, got `{raw}`"))?,
        ),
        _ => toml::Value::String(raw.to_string()),
    };
    Ok(v)
}

impl Config {
    /// Merges every layer. `env` is passed in so tests can supply their own.
    pub fn resolve(
        file: Option<&Path>,
        env: &BTreeMap<String, String>,
        flags: &ConfigFlags,
    ) -> anyhow::Result<Config> {
        let mut table = to_table(&Config::default());

        if let Some(path) = file {
            let body = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            let parsed: toml::Table =
                toml::from_str(&body).with_context(|| format!("parsing config file {}", path.display()))?;
            for (k, v) in parsed {
                if k == "temperature" {
                    if v.as_float() == Some(0.0) || v.as_integer() == Some(0) {
                        continue;
                    }
                    bail!("{}: temperature is pinned to 0", path.display());
                }
                if !table.contains_key(&k) {
                    bail!("{}: unknown config key `{k}`", path.display());
                }
                // integers are accepted where floats are expected
                let v = match (&table[&k], v) {
                    (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                    (_, v) => v,
                };
                table.insert(k, v);
            }
        }

        let keys: Vec<String> = table.keys().cloned().collect();
        for key in &keys {
            let var = format!("DIRAS_{}", key.to_ascii_uppercase());
            if let Some(raw) = env.get(&var) {
                let v = coerce(&table, key, raw, &var)?;
                table.insert(key.clone(), v);
            }
        }

        let flag_values = serde_json::to_value(flags).expect("flags serialize");
        for (key, v) in flag_values.as_object().expect("flags are an object") {
            if let Some(raw) = v.as_str() {
                let v = coerce(&table, key, raw, &format!("--{}", key.replace('_', "-")))?;
                table.insert(key.clone(), v);
            }
        }

        let merged: toml::Table = table.into_iter().collect();
        let cfg: Config = toml::Value::Table(merged)
            .try_into()
            .context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.max_in_flight == 0 || self.parallelism == 0 || self.max_attempts == 0 {
            bail!("max_in_flight, parallelism and max_attempts must be at least 1");
        }
        if self.k == 0 || self.per_side == 0 || self.per_bin == 0 || self.ece_bins == 0 {
            bail!("k, per_side, per_bin and ece_bins must be at least 1");
        }
        for (name, f) in [
            ("query_test_fraction", self.query_test_fraction),
            ("report_test_fraction", self.report_test_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                bail!("{name} must lie in (0, 1), got {f}");
            }
        }
        if !(0.0..=1.0).contains(&self.cutoff) {
            bail!("cutoff must lie in [0, 1]");
        }
        if !(0.0 <= self.band_low && self.band_low <= self.band_high && self.band_high <= 1.0) {
            bail!("need 0 <= band_low <= band_high <= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("diras.toml");
        std::fs::write(&file, "k = 5\nper_side = 7\nseed = 1\ncutoff = 1\n").unwrap();
        let env: BTreeMap<String, String> = [
            ("DIRAS_PER_SIDE".to_string(), "8".to_string()),
            ("DIRAS_SEED".to_string(), "2".to_string()),
        ]
        .into();
        let flags = ConfigFlags {
            seed: Some("3".into()),
            variant: Some("point-cot-ask-d".into()),
            ..Default::default()
        };
        let cfg = Config::resolve(Some(&file), &env, &flags).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.per_side, 8);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.cutoff, 1.0);
        assert!(cfg.variant.cot);
        assert_eq!(cfg.ece_bins, 10);
    }

    #[test]
    fn bad_inputs_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.toml");
        std::fs::write(&file, "nonsense = 1\n").unwrap();
        let err = Config::resolve(Some(&file), &BTreeMap::new(), &ConfigFlags::default()).unwrap_err();
        assert!(err.to_string().contains("nonsense"));

        std::fs::write(&file, "temperature = 0.7\n").unwrap();
        let err = Config::resolve(Some(&file), &BTreeMap::new(), &ConfigFlags::default()).unwrap_err();
        assert!(err.to_string().contains("temperature"));

        let flags = ConfigFlags {
            k: Some("many".into()),
            ..Default::default()
        };
        let err = Config::resolve(None, &BTreeMap::new(), &flags).unwrap_err();
        assert!(format!("{err:#}").contains("--k"));

        let flags = ConfigFlags {
            calibration: Some("vibes".into()),
            ..Default::default()
        };
        assert!(Config::resolve(None, &BTreeMap::new(), &flags).is_err());
    }

    #[test]
    fn every_key_has_a_flag() {
        let keys: Vec<String> = to_table(&Config::default()).into_keys().collect();
        let flags = serde_json::to_value(ConfigFlags::default()).unwrap();
        let flag_keys: Vec<String> = flags.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, flag_keys);
    }
}
