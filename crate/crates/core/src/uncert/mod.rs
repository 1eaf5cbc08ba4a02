//! Aleatoric uncertainty from normalized softmax entropy, calibration
//! metrics, certainty-conditioned evaluation and annotator agreement.

mod agreement;
mod calibration;
mod conditioning;
mod records;

pub use agreement::{
    agreement_entropy, certainty_by_signal_count, write_count_csv, AgreementReport, AnnotationEntry,
    AnnotationSet, AnnotatorAccuracy, CountRow, ImageAgreement,
};
pub use calibration::{ece, BinStats, CalibrationReport, DEFAULT_BINS};
pub use conditioning::{
    condition_on_certainty, parse_retain_list, ConditionRow, ConditionTable, RETAIN_GRID,
};
pub use records::{format_sig, read_predictions, write_predictions, PredictionRecord};

use crate::error::{Error, Result};
use crate::lossmath::smoothed_targets;

/// Tolerance on `sum(p) == 1`.
pub const NORM_TOL: f64 = 1e-9;

fn check_distribution(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::Domain(format!("probabilities must be finite and >= 0: {p:?}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::Domain(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats with `0 log 0 = 0`.
///
/// Terms are summed in ascending order of probability, which makes the
/// result exactly invariant under permutation of `p`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p, NORM_TOL)?;
    Ok(entropy_unchecked(p))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    -sorted
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Entropy of the label-smoothed one-hot vector `[1-α, α/(C-1), ...]`.
pub fn min_entropy(alpha: f64, classes: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} outside [0, 1)")));
    }
    if classes < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {classes}")));
    }
    Ok(entropy_unchecked(&smoothed_targets(0, alpha, classes)?))
}

/// Raw and clamped normalized entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedEntropy {
    /// `(H(p) - H_min(α, C)) / log C`, may be negative.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
}

impl NormalizedEntropy {
    pub fn certainty(&self) -> f64 {
        1.0 - self.clamped
    }
}

pub fn normalized_entropy(p: &[f64], alpha: f64) -> Result<NormalizedEntropy> {
    let h = entropy(p)?;
    let c = p.len();
    let raw = (h - min_entropy(alpha, c)?) / (c as f64).ln();
    Ok(NormalizedEntropy {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    })
}

/// `1 - clamp(H_norm, 0, 1)`.
pub fn certainty(p: &[f64], alpha: f64) -> Result<f64> {
    Ok(normalized_entropy(p, alpha)?.certainty())
}

/// Index of the largest entry, ties resolved to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN3: f64 = 1.098_612_288_668_109_8;

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[1.0 / 3.0; 3]).unwrap() - LN3).abs() < 1e-12);
        assert!((entropy(&[0.5, 0.5, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_bad_input() {
        assert!(entropy(&[0.5, 0.4]).is_err());
        assert!(entropy(&[1.2, -0.2]).is_err());
        assert!(entropy(&[f64::NAN, 1.0]).is_err());
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn min_entropy_examples() {
        assert_eq!(min_entropy(0.0, 3).unwrap(), 0.0);
        let h = min_entropy(0.01, 3).unwrap();
        assert!((h - 0.0629).abs() < 1e-4, "{h}");
        assert!((min_entropy(2.0 / 3.0, 3).unwrap() - LN3).abs() < 1e-12);
        assert!(min_entropy(1.0, 3).is_err());
    }

    #[test]
    fn normalized_entropy_examples() {
        let u = normalized_entropy(&[1.0 / 3.0; 3], 0.01).unwrap();
        assert!((u.raw - 0.9427).abs() < 1e-4);
        for label in 0..3 {
            let t = smoothed_targets(label, 0.01, 3).unwrap();
            assert_eq!(normalized_entropy(&t, 0.01).unwrap().raw, 0.0);
        }
        let one_hot = normalized_entropy(&[1.0, 0.0, 0.0], 0.01).unwrap();
        assert!((one_hot.raw + 0.0573).abs() < 1e-4);
        assert_eq!(one_hot.clamped, 0.0);
        assert_eq!(one_hot.certainty(), 1.0);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0 / 3.0; 3]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    fn distribution(c: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, c).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn normalized_entropy_monotone(p in distribution(3), q in distribution(3)) {
            let (hp, hq) = (entropy(&p).unwrap(), entropy(&q).unwrap());
            let (np, nq) = (
                normalized_entropy(&p, 0.01).unwrap().raw,
                normalized_entropy(&q, 0.01).unwrap().raw,
            );
            if hp <= hq {
                prop_assert!(np <= nq);
            } else {
                prop_assert!(np >= nq);
            }
        }

        #[test]
        fn certainty_in_unit_interval(p in distribution(4), alpha in 0.0f64..0.5) {
            let c = certainty(&p, alpha).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }

        #[test]
        fn entropy_permutation_exact(p in distribution(5), rot in 0usize..5) {
            let mut q = p.clone();
            q.rotate_left(rot);
            prop_assert_eq!(entropy(&p).unwrap(), entropy(&q).unwrap());
        }
    }
}
