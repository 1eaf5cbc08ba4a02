//! The joint training objective: NT-Xent over projected pairs plus a
//! label-smoothed cross entropy on every view, with analytic gradients.
//!
//! Batches hold `2N` rows where rows `2k` and `2k + 1` are the two views of
//! sample `k`. Logarithms are natural throughout.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp applied to probabilities inside `log`.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Temperature of the contrastive term.
    pub tau: f64,
    /// Weight of the classification term.
    pub lambda: f64,
    /// Label smoothing.
    pub alpha: f64,
    pub classes: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            lambda: 0.5,
            alpha: 0.01,
            classes: 3,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must be in [0, 1), got {}", self.alpha)));
        }
        if self.classes < 2 {
            return Err(Error::Config("at least 2 classes are required".into()));
        }
        Ok(())
    }
}

pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", u.len(), v.len())));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Index of the positive partner of row `i`.
#[inline]
pub fn partner(i: usize) -> usize {
    i ^ 1
}

#[derive(Debug, Clone)]
pub struct NtXent {
    /// Mean over all anchors.
    pub loss: f64,
    pub per_anchor: Vec<f64>,
    /// Gradient of `loss` with respect to the input rows.
    pub grad: Array2<f64>,
}

/// NT-Xent over `2N` rows with cosine similarity and temperature `tau`.
pub fn nt_xent(z: ArrayView2<f64>, tau: f64) -> Result<NtXent> {
    let rows = z.nrows();
    if rows < 2 || rows % 2 != 0 {
        return Err(Error::Shape(format!("contrastive batch needs 2N >= 2 rows, got {rows}")));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::Domain(format!("temperature must be positive, got {tau}")));
    }
    let norms: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::Domain(format!("row {i} has zero or non-finite norm")));
    }
    let mut unit = z.to_owned();
    for (mut row, &n) in unit.rows_mut().into_iter().zip(&norms) {
        row /= n;
    }
    let sim = unit.dot(&unit.t());

    // m[a][b] = dL/dsim(a, b) through anchor a only.
    let scale = 1.0 / (rows as f64 * tau);
    let mut m = Array2::<f64>::zeros((rows, rows));
    let mut per_anchor = Vec::with_capacity(rows);
    for a in 0..rows {
        let logits = sim.row(a).mapv(|s| s / tau);
        let max = logits
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != a)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for (k, &v) in logits.iter().enumerate() {
            if k != a {
                denom += (v - max).exp();
            }
        }
        let lse = max + denom.ln();
        let p = partner(a);
        per_anchor.push(lse - logits[p]);
        for k in 0..rows {
            if k != a {
                let prob = (logits[k] - lse).exp();
                m[[a, k]] = scale * (prob - if k == p { 1.0 } else { 0.0 });
            }
        }
    }
    let loss = per_anchor.iter().sum::<f64>() / rows as f64;

    let sym = &m + &m.t();
    let grad_unit = sym.dot(&unit);
    let mut grad = Array2::<f64>::zeros(z.raw_dim());
    for (a, &norm) in norms.iter().enumerate() {
        let u = unit.row(a);
        let g = grad_unit.row(a);
        let radial = g.dot(&u);
        grad.row_mut(a).assign(&((&g - &(&u * radial)) / norm));
    }
    Ok(NtXent {
        loss,
        per_anchor,
        grad,
    })
}

/// `1 - alpha` on `label`, `alpha / (C - 1)` elsewhere.
pub fn smoothed_targets(label: usize, alpha: f64, classes: usize) -> Result<Vec<f64>> {
    if classes < 2 {
        return Err(Error::Config("at least 2 classes are required".into()));
    }
    if label >= classes {
        return Err(Error::Domain(format!("label {label} out of range for {classes} classes")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must be in [0, 1), got {alpha}")));
    }
    let off = alpha / (classes - 1) as f64;
    Ok((0..classes)
        .map(|c| if c == label { 1.0 - alpha } else { off })
        .collect())
}

/// Numerically stable softmax of one row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-sum_c y_c log p_c` and its gradient with respect to the pre-softmax
/// logits, `p - y`.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if probs.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} probabilities vs {} targets",
            probs.len(),
            target.len()
        )));
    }
    let total: f64 = target.iter().sum();
    if (total - 1.0).abs() > 1e-9 || target.iter().any(|&t| t < 0.0) {
        return Err(Error::Domain(format!("target is not a distribution (sums to {total})")));
    }
    let loss = -probs
        .iter()
        .zip(target)
        .map(|(&p, &y)| y * p.max(LOG_EPS).ln())
        .sum::<f64>();
    let grad = probs.iter().zip(target).map(|(&p, &y)| p - y).collect();
    Ok((loss, grad))
}

#[derive(Debug, Clone)]
pub struct Classification {
    /// Mean cross entropy over rows.
    pub loss: f64,
    pub probs: Array2<f64>,
    /// Gradient of `loss` with respect to the logits.
    pub grad: Array2<f64>,
}

/// Mean label-smoothed cross entropy over a batch of logits.
pub fn classification_loss(
    logits: ArrayView2<f64>,
    labels: &[usize],
    alpha: f64,
) -> Result<Classification> {
    let (rows, classes) = logits.dim();
    if rows != labels.len() {
        return Err(Error::Shape(format!("{rows} logit rows vs {} labels", labels.len())));
    }
    if rows == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let mut probs = Array2::<f64>::zeros((rows, classes));
    let mut grad = Array2::<f64>::zeros((rows, classes));
    let mut loss = 0.0;
    for (i, row) in logits.axis_iter(Axis(0)).enumerate() {
        let p = softmax(row.as_slice().unwrap_or(&row.to_vec()));
        let y = smoothed_targets(labels[i], alpha, classes)?;
        let (l, g) = cross_entropy(&p, &y)?;
        loss += l;
        for c in 0..classes {
            probs[[i, c]] = p[c];
            grad[[i, c]] = g[c] / rows as f64;
        }
    }
    Ok(Classification {
        loss: loss / rows as f64,
        probs,
        grad,
    })
}

#[derive(Debug, Clone)]
pub struct JointLoss {
    pub total: f64,
    pub contrastive: f64,
    pub classification: f64,
    pub probs: Array2<f64>,
    pub grad_z: Array2<f64>,
    pub grad_logits: Array2<f64>,
}

/// `nt_xent(z) + lambda * mean CE(logits, labels)` over all `2N` views.
pub fn joint_loss(
    z: ArrayView2<f64>,
    logits: ArrayView2<f64>,
    labels: &[usize],
    cfg: &LossConfig,
) -> Result<JointLoss> {
    if z.nrows() != logits.nrows() {
        return Err(Error::Shape(format!(
            "{} projection rows vs {} logit rows",
            z.nrows(),
            logits.nrows()
        )));
    }
    if logits.ncols() != cfg.classes {
        return Err(Error::Shape(format!(
            "{} logit columns vs {} classes",
            logits.ncols(),
            cfg.classes
        )));
    }
    let con = nt_xent(z, cfg.tau)?;
    let cls = classification_loss(logits, labels, cfg.alpha)?;
    Ok(JointLoss {
        total: con.loss + cfg.lambda * cls.loss,
        contrastive: con.loss,
        classification: cls.loss,
        probs: cls.probs,
        grad_z: con.grad,
        grad_logits: cls.grad * cfg.lambda,
    })
}
