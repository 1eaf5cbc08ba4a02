use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{entropy, format_sig, PredictionRecord};
use crate::error::{Error, Result};
use crate::synthgen::ManifestEntry;

/// One exported annotation session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationSet {
    pub annotator_id: String,
    pub annotations: Vec<AnnotationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationEntry {
    pub image_id: String,
    pub label: usize,
    pub timestamp_iso8601: String,
}

impl AnnotationSet {
    /// Parses an annotation file; syntax errors carry line and column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageAgreement {
    pub image_id: String,
    pub true_label: usize,
    pub n_green: u32,
    /// Votes per class.
    pub votes: Vec<usize>,
    /// `H(votes / n) / log C`, no smoothing floor.
    pub normalized_entropy: f64,
    pub certainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatorAccuracy {
    pub annotator_id: String,
    pub labeled: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub classes: usize,
    /// Sorted by image id.
    pub images: Vec<ImageAgreement>,
    /// Sorted by annotator id.
    pub annotators: Vec<AnnotatorAccuracy>,
    pub mean_accuracy: f64,
    /// Population standard deviation over annotators.
    pub std_accuracy: f64,
}

/// Per-image human certainty from the spread of annotator votes.
///
/// Every annotator must label every annotated image exactly once, and every
/// image must exist in the manifest.
pub fn agreement_entropy(
    sets: &[AnnotationSet],
    manifest: &[ManifestEntry],
    classes: usize,
) -> Result<AgreementReport> {
    if sets.len() < 2 {
        return Err(Error::Config(format!("need at least 2 annotators, got {}", sets.len())));
    }
    if classes < 2 {
        return Err(Error::Config("need at least 2 classes".into()));
    }
    let truth: HashMap<&str, &ManifestEntry> = manifest.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut ids = BTreeMap::<&str, ()>::new();
    let mut per_annotator = Vec::with_capacity(sets.len());
    let mut seen_annotators = HashMap::new();
    for set in sets {
        if seen_annotators.insert(set.annotator_id.as_str(), ()).is_some() {
            return Err(Error::Config(format!("annotator {:?} appears twice", set.annotator_id)));
        }
        let mut labels = HashMap::with_capacity(set.annotations.len());
        for a in &set.annotations {
            if a.label >= classes {
                return Err(Error::Config(format!(
                    "annotator {:?}: label {} for {} not in [0, {classes})",
                    set.annotator_id, a.label, a.image_id
                )));
            }
            if !truth.contains_key(a.image_id.as_str()) {
                return Err(Error::Config(format!(
                    "annotator {:?}: image {:?} not in manifest",
                    set.annotator_id, a.image_id
                )));
            }
            if labels.insert(a.image_id.as_str(), a.label).is_some() {
                return Err(Error::Config(format!(
                    "annotator {:?} labels {:?} more than once",
                    set.annotator_id, a.image_id
                )));
            }
            ids.insert(a.image_id.as_str(), ());
        }
        per_annotator.push((set.annotator_id.as_str(), labels));
    }
    for (annotator, labels) in &per_annotator {
        let missing: Vec<&str> = ids.keys().filter(|id| !labels.contains_key(*id)).copied().collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "annotator {annotator:?} is missing {} image(s), first {:?}",
                missing.len(),
                missing[0]
            )));
        }
    }

    let log_c = (classes as f64).ln();
    let n = sets.len() as f64;
    let images = ids
        .keys()
        .map(|&id| {
            let mut votes = vec![0usize; classes];
            for (_, labels) in &per_annotator {
                votes[labels[id]] += 1;
            }
            let p: Vec<f64> = votes.iter().map(|&v| v as f64 / n).collect();
            let h = (entropy(&p)? / log_c).clamp(0.0, 1.0);
            let e = truth[id];
            Ok(ImageAgreement {
                image_id: id.to_string(),
                true_label: e.class_id.index(),
                n_green: e.n_green,
                votes,
                normalized_entropy: h,
                certainty: 1.0 - h,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut annotators: Vec<AnnotatorAccuracy> = per_annotator
        .iter()
        .map(|(annotator, labels)| {
            let hits = labels
                .iter()
                .filter(|(id, &l)| truth[**id].class_id.index() == l)
                .count();
            AnnotatorAccuracy {
                annotator_id: annotator.to_string(),
                labeled: labels.len(),
                accuracy: if labels.is_empty() { 0.0 } else { hits as f64 / labels.len() as f64 },
            }
        })
        .collect();
    annotators.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
    let (mean, std) = mean_std(annotators.iter().map(|a| a.accuracy));
    Ok(AgreementReport {
        classes,
        images,
        annotators,
        mean_accuracy: mean,
        std_accuracy: std,
    })
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl AgreementReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Per-image table.
    pub fn write_images_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header = vec!["image_id".to_string(), "true_label".into(), "n_green".into()];
        header.extend((0..self.classes).map(|c| format!("votes{c}")));
        header.extend(["normalized_entropy".to_string(), "certainty".into()]);
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for img in &self.images {
            let mut row = vec![img.image_id.clone(), img.true_label.to_string(), img.n_green.to_string()];
            row.extend(img.votes.iter().map(usize::to_string));
            row.push(format_sig(img.normalized_entropy, 9));
            row.push(format_sig(img.certainty, 9));
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Annotator accuracy table with a closing `mean ± std` row.
    pub fn write_annotators_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["annotator_id", "labeled", "accuracy"]).map_err(|e| Error::csv(path, e))?;
        for a in &self.annotators {
            w.write_record([a.annotator_id.clone(), a.labeled.to_string(), format_sig(a.accuracy, 9)])
                .map_err(|e| Error::csv(path, e))?;
        }
        w.write_record([
            "mean ± std".to_string(),
            String::new(),
            format!("{} ± {}", format_sig(self.mean_accuracy, 9), format_sig(self.std_accuracy, 9)),
        ])
        .map_err(|e| Error::csv(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub n_green: u32,
    pub n: usize,
    pub mean_certainty: f64,
    pub std_certainty: f64,
    pub accuracy: f64,
    pub human_n: usize,
    pub human_mean_certainty: Option<f64>,
    pub human_std_certainty: Option<f64>,
}

/// Groups model (and optionally human) certainty by green signal count.
pub fn certainty_by_signal_count(
    records: &[PredictionRecord],
    manifest: &[ManifestEntry],
    human: Option<&AgreementReport>,
) -> Result<Vec<CountRow>> {
    let counts: HashMap<&str, u32> = manifest.iter().map(|e| (e.id.as_str(), e.n_green)).collect();
    let mut model: BTreeMap<u32, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        let &g = counts
            .get(r.id.as_str())
            .ok_or_else(|| Error::Config(format!("prediction id {:?} not in manifest", r.id)))?;
        model.entry(g).or_default().push(r);
    }
    let mut humans: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    if let Some(h) = human {
        for img in &h.images {
            humans.entry(img.n_green).or_default().push(img.certainty);
        }
    }
    let mut keys: Vec<u32> = model.keys().chain(humans.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    Ok(keys
        .into_iter()
        .map(|g| {
            let rs = model.get(&g).map(Vec::as_slice).unwrap_or(&[]);
            let (mean, std) = mean_std(rs.iter().map(|r| r.certainty));
            let hs = humans.get(&g).map(Vec::as_slice).unwrap_or(&[]);
            let (hm, hsd) = mean_std(hs.iter().copied());
            CountRow {
                n_green: g,
                n: rs.len(),
                mean_certainty: mean,
                std_certainty: std,
                accuracy: if rs.is_empty() {
                    f64::NAN
                } else {
                    rs.iter().filter(|r| r.correct()).count() as f64 / rs.len() as f64
                },
                human_n: hs.len(),
                human_mean_certainty: (!hs.is_empty()).then_some(hm),
                human_std_certainty: (!hs.is_empty()).then_some(hsd),
            }
        })
        .collect())
}

pub fn write_count_csv(path: &Path, rows: &[CountRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "n_green",
        "n",
        "mean_certainty",
        "std_certainty",
        "accuracy",
        "human_n",
        "human_mean_certainty",
        "human_std_certainty",
    ])
    .map_err(|e| Error::csv(path, e))?;
    let f = |v: f64| if v.is_nan() { String::new() } else { format_sig(v, 9) };
    for r in rows {
        w.write_record([
            r.n_green.to_string(),
            r.n.to_string(),
            f(r.mean_certainty),
            f(r.std_certainty),
            f(r.accuracy),
            r.human_n.to_string(),
            r.human_mean_certainty.map(f).unwrap_or_default(),
            r.human_std_certainty.map(f).unwrap_or_default(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
