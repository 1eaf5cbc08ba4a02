use std::path::Path;

use serde::Serialize;

use super::{format_sig, PredictionRecord};
use crate::error::{Error, Result};

/// Retain fractions reported by default.
pub const RETAIN_GRID: [f64; 11] = [1.0, 0.95, 0.90, 0.75, 0.50, 0.40, 0.30, 0.20, 0.15, 0.10, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub retain: f64,
    pub kept: usize,
    pub accuracy: f64,
    /// Share of each true class among the kept records.
    pub class_share: Vec<f64>,
    /// Lowest certainty among the kept records.
    pub certainty_threshold: f64,
    pub retained_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionTable {
    pub records: usize,
    pub classes: usize,
    pub rows: Vec<ConditionRow>,
}

/// Keeps the `ceil(p n)` most certain records for each fraction `p`.
/// Ordering is by certainty descending, then id, so retained sets are
/// nested across fractions.
pub fn condition_on_certainty(records: &[PredictionRecord], retain: &[f64]) -> Result<ConditionTable> {
    if records.is_empty() {
        return Err(Error::Domain("conditioning needs at least one record".into()));
    }
    if let Some(p) = retain.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::Config(format!("retain fraction {p} outside (0, 1]")));
    }
    let classes = records.iter().map(|r| r.probs.len().max(r.true_label + 1)).max().unwrap_or(0);
    let mut order: Vec<&PredictionRecord> = records.iter().collect();
    order.sort_by(|a, b| b.certainty.total_cmp(&a.certainty).then_with(|| a.id.cmp(&b.id)));
    let n = records.len();
    let rows = retain
        .iter()
        .map(|&p| {
            // Guard against p*n landing a hair above an integer.
            let kept = ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
            let top = &order[..kept];
            let mut share = vec![0.0; classes];
            for r in top {
                share[r.true_label] += 1.0;
            }
            share.iter_mut().for_each(|s| *s /= kept as f64);
            ConditionRow {
                retain: p,
                kept,
                accuracy: top.iter().filter(|r| r.correct()).count() as f64 / kept as f64,
                class_share: share,
                certainty_threshold: top[kept - 1].certainty,
                retained_ids: top.iter().map(|r| r.id.clone()).collect(),
            }
        })
        .collect();
    Ok(ConditionTable { records: n, classes, rows })
}

/// Parses `"100,95,50"` or `"1,0.95,0.5"`. A list containing any value
/// above 1 (or a `%` suffix) is read as percentages.
pub fn parse_retain_list(text: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config("empty retain list".into()));
    }
    let mut percent = false;
    let mut values = Vec::with_capacity(items.len());
    for item in items {
        let (num, pct) = match item.strip_suffix('%') {
            Some(n) => (n, true),
            None => (item, false),
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad retain value {item:?}")))?;
        percent |= pct || v > 1.0;
        values.push(v);
    }
    if percent {
        values.iter_mut().for_each(|v| *v /= 100.0);
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::Config(format!("retain fraction {v} outside (0, 1]")));
    }
    Ok(values)
}

impl ConditionTable {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header = vec!["retain_percent".to_string(), "kept".into(), "accuracy".into()];
        header.extend((0..self.classes).map(|c| format!("share{c}")));
        header.push("certainty_threshold".into());
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for r in &self.rows {
            let mut row = vec![format_sig(r.retain * 100.0, 9), r.kept.to_string(), format_sig(r.accuracy, 9)];
            row.extend(r.class_share.iter().map(|&s| format_sig(s, 9)));
            row.push(format_sig(r.certainty_threshold, 9));
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, certainty: f64, correct: bool) -> PredictionRecord {
        PredictionRecord {
            id: id.into(),
            true_label: if correct { 0 } else { 2 },
            probs: vec![0.5, 0.3, 0.2],
            certainty,
        }
    }

    #[test]
    fn four_record_example() {
        let rs = vec![rec("a", 0.9, true), rec("b", 0.8, false), rec("c", 0.7, true), rec("d", 0.1, false)];
        let t = condition_on_certainty(&rs, &[1.0, 0.5]).unwrap();
        assert_eq!(t.rows[0].accuracy, 0.5);
        assert_eq!(t.rows[1].kept, 2);
        assert_eq!(t.rows[1].accuracy, 0.5);
        assert_eq!(t.rows[1].retained_ids, vec!["a", "b"]);
        assert_eq!(t.rows[0].class_share, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn ceil_with_guard() {
        let rs: Vec<_> = (0..20).map(|i| rec(&format!("{i:02}"), i as f64 / 20.0, true)).collect();
        let t = condition_on_certainty(&rs, &RETAIN_GRID).unwrap();
        let kept: Vec<_> = t.rows.iter().map(|r| r.kept).collect();
        assert_eq!(kept, vec![20, 19, 18, 15, 10, 8, 6, 4, 3, 2, 1]);
    }

    #[test]
    fn ties_broken_by_id() {
        let rs = vec![rec("b", 0.5, true), rec("a", 0.5, false)];
        let t = condition_on_certainty(&rs, &[0.5]).unwrap();
        assert_eq!(t.rows[0].retained_ids, vec!["a"]);
    }

    #[test]
    fn retain_parsing() {
        assert_eq!(parse_retain_list("100,50,5").unwrap(), vec![1.0, 0.5, 0.05]);
        assert_eq!(parse_retain_list("1, 0.5").unwrap(), vec![1.0, 0.5]);
        assert_eq!(parse_retain_list("1%,100%").unwrap(), vec![0.01, 1.0]);
        assert!(parse_retain_list("").is_err());
        assert!(parse_retain_list("0").is_err());
        assert!(parse_retain_list("x").is_err());
    }

    proptest! {
        #[test]
        fn nested_and_full_accuracy(
            items in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..100),
        ) {
            let rs: Vec<_> = items
                .iter()
                .enumerate()
                .map(|(i, &(c, ok))| rec(&format!("{i:03}"), c, ok))
                .collect();
            let t = condition_on_certainty(&rs, &RETAIN_GRID).unwrap();
            let overall = rs.iter().filter(|r| r.correct()).count() as f64 / rs.len() as f64;
            prop_assert_eq!(t.rows[0].accuracy, overall);
            for w in t.rows.windows(2) {
                let big: std::collections::HashSet<_> = w[0].retained_ids.iter().collect();
                prop_assert!(w[1].retained_ids.iter().all(|id| big.contains(id)));
            }
        }
    }
}
