use std::path::Path;

use serde::Serialize;

use super::PredictionRecord;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinStats {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_certainty: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub records: usize,
    pub bins: Vec<BinStats>,
    pub ece: f64,
    /// Overconfidence part: bins where certainty exceeds accuracy.
    pub pos_ece: f64,
    /// Underconfidence part.
    pub neg_ece: f64,
}

/// Equal-width binning on certainty; bin confidence is the mean certainty
/// of its members. Certainty 1.0 falls into the last bin.
pub fn ece(records: &[PredictionRecord], bins: usize) -> Result<CalibrationReport> {
    if records.is_empty() {
        return Err(Error::Domain("calibration needs at least one record".into()));
    }
    if bins == 0 {
        return Err(Error::Config("number of bins must be >= 1".into()));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut correct = vec![0usize; bins];
    for r in records {
        if !(0.0..=1.0).contains(&r.certainty) {
            return Err(Error::Domain(format!("record {} certainty {}", r.id, r.certainty)));
        }
        let k = ((r.certainty * bins as f64) as usize).min(bins - 1);
        count[k] += 1;
        conf_sum[k] += r.certainty;
        correct[k] += usize::from(r.correct());
    }
    let n = records.len() as f64;
    let (mut total, mut pos, mut neg) = (0.0, 0.0, 0.0);
    let mut stats = Vec::with_capacity(bins);
    for k in 0..bins {
        let (lower, upper) = (k as f64 / bins as f64, (k + 1) as f64 / bins as f64);
        if count[k] == 0 {
            stats.push(BinStats { lower, upper, count: 0, mean_certainty: None, accuracy: None });
            continue;
        }
        let conf = conf_sum[k] / count[k] as f64;
        let acc = correct[k] as f64 / count[k] as f64;
        let w = count[k] as f64 / n;
        let gap = conf - acc;
        total += w * gap.abs();
        pos += w * gap.max(0.0);
        neg += w * (-gap).max(0.0);
        stats.push(BinStats {
            lower,
            upper,
            count: count[k],
            mean_certainty: Some(conf),
            accuracy: Some(acc),
        });
    }
    Ok(CalibrationReport {
        records: records.len(),
        bins: stats,
        ece: total,
        pos_ece: pos,
        neg_ece: neg,
    })
}

impl CalibrationReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Per-bin table. The ECE summary is only in the JSON form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["lower", "upper", "count", "mean_certainty", "accuracy"])
            .map_err(|e| Error::csv(path, e))?;
        let opt = |v: Option<f64>| v.map(|x| super::format_sig(x, 9)).unwrap_or_default();
        for b in &self.bins {
            w.write_record([
                super::format_sig(b.lower, 9),
                super::format_sig(b.upper, 9),
                b.count.to_string(),
                opt(b.mean_certainty),
                opt(b.accuracy),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(i: usize, certainty: f64, correct: bool) -> PredictionRecord {
        PredictionRecord {
            id: format!("r{i}"),
            true_label: if correct { 0 } else { 1 },
            probs: vec![0.6, 0.3, 0.1],
            certainty,
        }
    }

    #[test]
    fn perfect_records_have_zero_ece() {
        let rs: Vec<_> = (0..5).map(|i| rec(i, 1.0, true)).collect();
        let r = ece(&rs, 10).unwrap();
        assert_eq!((r.ece, r.pos_ece, r.neg_ece), (0.0, 0.0, 0.0));
        assert_eq!(r.bins[9].count, 5);
    }

    #[test]
    fn four_record_single_bin() {
        let rs = vec![rec(0, 0.8, true), rec(1, 0.8, true), rec(2, 0.8, false), rec(3, 0.8, false)];
        let r = ece(&rs, 10).unwrap();
        assert!((r.ece - 0.3).abs() < 1e-15);
        assert!((r.pos_ece - 0.3).abs() < 1e-15);
        assert_eq!(r.neg_ece, 0.0);
        assert_eq!(r.bins.iter().filter(|b| b.count > 0).count(), 1);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(ece(&[], 10).is_err());
        assert!(ece(&[rec(0, 0.5, true)], 0).is_err());
    }

    proptest! {
        #[test]
        fn identity_and_counts(
            items in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..200),
            bins in 1usize..20,
        ) {
            let rs: Vec<_> = items.iter().enumerate().map(|(i, &(c, ok))| rec(i, c, ok)).collect();
            let r = ece(&rs, bins).unwrap();
            prop_assert!((r.ece - (r.pos_ece + r.neg_ece)).abs() < 1e-12);
            prop_assert_eq!(r.bins.iter().map(|b| b.count).sum::<usize>(), rs.len());
        }
    }
}
