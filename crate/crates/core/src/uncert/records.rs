use std::path::Path;

use serde::Serialize;

use super::{argmax, check_distribution, certainty};
use crate::error::{Error, Result};

/// Sum-to-one tolerance for probabilities read back from text.
const READ_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub id: String,
    pub true_label: usize,
    pub probs: Vec<f64>,
    pub certainty: f64,
}

impl PredictionRecord {
    /// Builds a record, deriving certainty with smoothing floor `alpha`.
    pub fn new(id: impl Into<String>, true_label: usize, probs: Vec<f64>, alpha: f64) -> Result<Self> {
        let certainty = certainty(&probs, alpha)?;
        Ok(Self {
            id: id.into(),
            true_label,
            probs,
            certainty,
        })
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn correct(&self) -> bool {
        self.predicted() == self.true_label
    }
}

/// `%.{digits}g`-style formatting.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let classes = records.first().map_or(3, |r| r.probs.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["id".to_string(), "true_label".to_string()];
    header.extend((0..classes).map(|c| format!("p{c}")));
    header.push("certainty".into());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in records {
        if r.probs.len() != classes {
            return Err(Error::Shape(format!("record {} has {} classes", r.id, r.probs.len())));
        }
        let mut row = vec![r.id.clone(), r.true_label.to_string()];
        row.extend(r.probs.iter().map(|&p| format_sig(p, 9)));
        row.push(format_sig(r.certainty, 9));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let n = header.len();
    let classes = n.saturating_sub(3);
    let expected: Vec<String> = ["id".to_string(), "true_label".to_string()]
        .into_iter()
        .chain((0..classes).map(|c| format!("p{c}")))
        .chain(["certainty".to_string()])
        .collect();
    if classes < 2 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Config(format!(
            "{}: unexpected predictions header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    let bad = |line: u64, what: &str| {
        Error::Config(format!("{}: line {line}: {what}", path.display()))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| bad(line, &format!("bad number {:?}", &rec[i])))
        };
        let true_label: usize = rec[1].parse().map_err(|_| bad(line, "bad true_label"))?;
        if true_label >= classes {
            return Err(bad(line, &format!("true_label {true_label} >= {classes}")));
        }
        let probs = (0..classes).map(|c| num(2 + c)).collect::<Result<Vec<_>>>()?;
        check_distribution(&probs, READ_TOL).map_err(|e| bad(line, &e.to_string()))?;
        let certainty = num(n - 1)?;
        if !(0.0..=1.0).contains(&certainty) {
            return Err(bad(line, "certainty outside [0, 1]"));
        }
        out.push(PredictionRecord {
            id: rec[0].to_string(),
            true_label,
            probs,
            certainty,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(0.123456789123, 9), "0.123456789");
        assert_eq!(format_sig(2.5e-7, 9), "2.5e-7");
        assert_eq!(format_sig(0.99999999999, 9), "1");
        assert_eq!(format_sig(123.456, 9), "123.456");
    }

    #[test]
    fn uniform_predicts_class_zero_with_zero_certainty() {
        let r = PredictionRecord::new("a", 2, vec![1.0 / 3.0; 3], 0.0).unwrap();
        assert_eq!(r.predicted(), 0);
        assert!(r.certainty.abs() < 1e-12);
        // With a smoothing floor the uniform vector sits below H_norm = 1.
        let r = PredictionRecord::new("a", 2, vec![1.0 / 3.0; 3], 0.01).unwrap();
        assert!((r.certainty - (1.0 - 0.94272)).abs() < 1e-4);
        let sharp = PredictionRecord::new("b", 1, vec![1e-9, 1.0 - 2e-9, 1e-9], 0.01).unwrap();
        assert!(sharp.certainty > 0.999);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let recs = vec![
            PredictionRecord::new("x1", 0, vec![0.7, 0.2, 0.1], 0.01).unwrap(),
            PredictionRecord::new("x2", 2, vec![0.1, 0.1, 0.8], 0.01).unwrap(),
        ];
        write_predictions(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,true_label,p0,p1,p2,certainty\n"));
        let back = read_predictions(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert!((a.certainty - b.certainty).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_unnormalized_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "id,true_label,p0,p1,p2,certainty\na,0,0.5,0.5,0.5,0.1\n").unwrap();
        assert!(matches!(read_predictions(&path), Err(Error::Config(_))));
    }
}
