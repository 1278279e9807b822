use super::{check_finite, MetricError, Result};

/// Confidences paired with whether the prediction they back was correct.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationInput {
    confidences: Vec<f64>,
    correct: Vec<bool>,
}

impl CalibrationInput {
    pub fn new(confidences: Vec<f64>, correct: Vec<bool>) -> Result<Self> {
        if confidences.len() != correct.len() {
            return Err(MetricError::LengthMismatch {
                left: confidences.len(),
                right: correct.len(),
            });
        }
        if confidences.is_empty() {
            return Err(MetricError::InvalidInput("empty calibration input".into()));
        }
        check_finite(&confidences, "confidence")?;
        if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(MetricError::InvalidInput(format!(
                "confidence {c} outside [0, 1]"
            )));
        }
        Ok(CalibrationInput {
            confidences,
            correct,
        })
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn correct(&self) -> &[bool] {
        &self.correct
    }

    pub fn len(&self) -> usize {
        self.confidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confidences.is_empty()
    }
}

/// Expected calibration error over `bins` equal-width bins on [0, 1].
/// Bin `b` holds `[b/bins, (b+1)/bins)`; the last bin is closed at 1.
pub fn ece(input: &CalibrationInput, bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(MetricError::InvalidInput("bins must be >= 1".into()));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut hit_sum = vec![0.0f64; bins];
    for (&c, &ok) in input.confidences.iter().zip(&input.correct) {
        let b = ((c * bins as f64).floor() as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += c;
        hit_sum[b] += if ok { 1.0 } else { 0.0 };
    }
    let n = input.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let nb = count[b] as f64;
            (nb / n) * (hit_sum[b] / nb - conf_sum[b] / nb).abs()
        })
        .sum())
}

/// Mean squared gap between confidence and the correctness indicator.
pub fn brier(input: &CalibrationInput) -> f64 {
    let sum: f64 = input
        .confidences
        .iter()
        .zip(&input.correct)
        .map(|(&c, &ok)| {
            let y = if ok { 1.0 } else { 0.0 };
            (c - y) * (c - y)
        })
        .sum();
    sum / input.len() as f64
}

/// Area under the ROC curve of confidence as a detector of correct
/// predictions, computed from the Mann-Whitney U statistic with
/// average ranks for ties.
pub fn auroc(input: &CalibrationInput) -> Result<f64> {
    let n_pos = input.correct.iter().filter(|&&c| c).count();
    let n_neg = input.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::Undefined(
            "AUROC needs both correct and incorrect predictions".into(),
        ));
    }
    let mut order: Vec<usize> = (0..input.len()).collect();
    order.sort_by(|&a, &b| input.confidences[a].total_cmp(&input.confidences[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len()
            && input.confidences[order[j + 1]] == input.confidences[order[i]]
        {
            j += 1;
        }
        // ranks are 1-based; a tie group [i, j] shares the mean rank
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| input.correct[k]).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(conf: &[f64], ok: &[bool]) -> CalibrationInput {
        CalibrationInput::new(conf.to_vec(), ok.to_vec()).unwrap()
    }

    #[test]
    fn ece_examples() {
        assert_eq!(ece(&input(&[1.0, 1.0], &[true, true]), 10).unwrap(), 0.0);
        assert_eq!(ece(&input(&[1.0, 1.0], &[false, false]), 10).unwrap(), 1.0);
        let single_bin = input(&[0.8; 4], &[true, true, true, false]);
        assert!((ece(&single_bin, 1).unwrap() - 0.05).abs() < 1e-12);
        assert!((ece(&single_bin, 10).unwrap() - 0.05).abs() < 1e-12);
        assert!(ece(&single_bin, 0).is_err());
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&input(&[1.0], &[true])), 0.0);
        assert_eq!(brier(&input(&[1.0], &[false])), 1.0);
        assert!((brier(&input(&[0.8, 0.6], &[true, false])) - 0.20).abs() < 1e-12);
    }

    #[test]
    fn brier_matches_constant_confidence_identity() {
        // constant confidence c with accuracy a: brier = c^2 - 2ca + a
        let c = 0.7;
        let ok = [true, true, true, false, false];
        let a = 3.0 / 5.0;
        let got = brier(&input(&[c; 5], &ok));
        assert!((got - (c * c - 2.0 * c * a + a)).abs() < 1e-12);
    }

    #[test]
    fn auroc_examples() {
        let sep = input(&[0.9, 0.9, 0.1, 0.1], &[true, true, false, false]);
        assert_eq!(auroc(&sep).unwrap(), 1.0);
        let ties = input(&[0.5; 4], &[true, false, true, false]);
        assert_eq!(auroc(&ties).unwrap(), 0.5);
        let mixed = input(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]);
        assert!((auroc(&mixed).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(
            auroc(&input(&[0.3, 0.4], &[true, true])),
            Err(MetricError::Undefined(_))
        ));
    }

    #[test]
    fn input_validation() {
        assert!(CalibrationInput::new(vec![0.5], vec![]).is_err());
        assert!(CalibrationInput::new(vec![], vec![]).is_err());
        assert!(CalibrationInput::new(vec![1.2], vec![true]).is_err());
        assert!(CalibrationInput::new(vec![f64::NAN], vec![true]).is_err());
    }
}
