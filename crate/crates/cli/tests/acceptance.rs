//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.
//!
//! `cargo test -p fishforge-cli --test acceptance`

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fishforge::lossmath::{joint_loss, nt_xent, smoothed_targets, LossConfig};
use fishforge::seed::{rng, sub_seed, Rng};
use fishforge::synthgen::{
    generate_patch_with_nucleus, ClassId, DatasetManifest, GenerationSpec, TemplateSource,
};
use fishforge::tinynet::{Architecture, Heads, Network};
use fishforge::uncert::{ece, min_entropy, normalized_entropy, PredictionRecord};
use ndarray::Array2;
use rand::Rng as _;
use serde_json::Value;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- entropy

/// Direct evaluation of the smoothed-target entropy and Eq. 2 normalization.
fn oracle_h_min(alpha: f64, c: usize) -> f64 {
    let off = alpha / (c - 1) as f64;
    -((1.0 - alpha) * (1.0 - alpha).ln() + (c - 1) as f64 * off * off.ln())
}

fn entropy_math() -> Outcome {
    let (alpha, c) = (0.01, 3);
    let h_min = min_entropy(alpha, c).map_err(|e| e.to_string())?;
    let oracle_min = oracle_h_min(alpha, c);
    check((h_min - oracle_min).abs() < 1e-12, format!("H_min {h_min} vs oracle {oracle_min}"))?;
    check((h_min - 0.06293).abs() <= 1e-5, format!("H_min = {h_min}, expected 0.06293 ± 1e-5"))?;

    let uniform = normalized_entropy(&[1.0 / 3.0; 3], alpha).map_err(|e| e.to_string())?.raw;
    let oracle_u = (3f64.ln() - oracle_min) / 3f64.ln();
    check((uniform - oracle_u).abs() < 1e-12, format!("H_norm(uniform) {uniform} vs oracle {oracle_u}"))?;
    check((uniform - 0.94272).abs() <= 1e-4, format!("H_norm(uniform) = {uniform}, expected 0.94272 ± 1e-4"))?;

    for label in 0..c {
        let t = smoothed_targets(label, alpha, c).map_err(|e| e.to_string())?;
        let h = normalized_entropy(&t, alpha).map_err(|e| e.to_string())?.raw;
        check(h == 0.0, format!("H_norm(smoothed target {label}) = {h:e}, expected exactly 0"))?;
    }
    Ok(format!("H_min={h_min:.6} H_norm(uniform)={uniform:.6}"))
}

// ---------------------------------------------------------------- NT-Xent

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Eq. 1 written as plain loops: rows 2k and 2k+1 are the two views of
/// sample k.
fn naive_nt_xent(z: &[Vec<f64>], tau: f64) -> f64 {
    let m = z.len();
    let mut total = 0.0;
    for i in 0..m {
        let j = if i % 2 == 0 { i + 1 } else { i - 1 };
        let num = (cos(&z[i], &z[j]) / tau).exp();
        let mut den = 0.0;
        for k in 0..m {
            if k != i {
                den += (cos(&z[i], &z[k]) / tau).exp();
            }
        }
        total += -(num / den).ln();
    }
    total / m as f64
}

fn to_array(rows: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), rows[0].len()), |(i, j)| rows[i][j])
}

fn random_rows(r: &mut Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

fn nt_xent_correctness() -> Outcome {
    let tau = 0.05;
    let single = to_array(&[vec![0.3, -1.2, 0.5], vec![-0.7, 0.1, 2.0]]);
    let l1 = nt_xent(single.view(), tau).map_err(|e| e.to_string())?.loss;
    check(l1.abs() <= 1e-12, format!("N=1 loss {l1:e}"))?;
    let same = to_array(&vec![vec![0.4, -0.2, 1.1]; 4]);
    let l2 = nt_xent(same.view(), tau).map_err(|e| e.to_string())?.loss;
    check((l2 - 3f64.ln()).abs() <= 1e-12, format!("identical rows loss {l2} vs log 3"))?;

    let mut worst = 0.0f64;
    for inst in 0..100u64 {
        let mut r = rng(sub_seed(0x17, inst));
        let n = r.random_range(1..=8);
        let d = r.random_range(2..=16);
        let rows = random_rows(&mut r, 2 * n, d);
        let fast = nt_xent(to_array(&rows).view(), tau).map_err(|e| e.to_string())?.loss;
        let slow = naive_nt_xent(&rows, tau);
        worst = worst.max((fast - slow).abs());
    }
    check(worst <= 1e-10, format!("max |optimized - naive| = {worst:e}"))?;
    Ok(format!("N=1 {l1:.1e}, identical |L-log3|={:.1e}, oracle max diff {worst:.1e}", (l2 - 3f64.ln()).abs()))
}

// ---------------------------------------------------------------- gradients

/// `||a - n|| / max(||a||, ||n||)` in the Euclidean norm.
fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-300)
}

const H: f64 = 1e-6;

fn joint_gradients() -> Result<f64, String> {
    let cfg = LossConfig::default();
    let mut worst = 0.0f64;
    for inst in 0..100u64 {
        let mut r = rng(sub_seed(0x6a, inst));
        let n = r.random_range(1..=8);
        let d = r.random_range(2..=16);
        let z = to_array(&random_rows(&mut r, 2 * n, d));
        let logits = to_array(&random_rows(&mut r, 2 * n, cfg.classes)) * 3.0;
        let labels: Vec<usize> = (0..2 * n).map(|i| (i / 2 + inst as usize) % cfg.classes).collect();
        let f = |z: &Array2<f64>, l: &Array2<f64>| joint_loss(z.view(), l.view(), &labels, &cfg).unwrap().total;
        let j = joint_loss(z.view(), logits.view(), &labels, &cfg).map_err(|e| e.to_string())?;

        let mut num_z = Vec::new();
        for idx in 0..z.len() {
            let (mut p, mut m) = (z.clone(), z.clone());
            p.as_slice_mut().unwrap()[idx] += H;
            m.as_slice_mut().unwrap()[idx] -= H;
            num_z.push((f(&p, &logits) - f(&m, &logits)) / (2.0 * H));
        }
        let mut num_l = Vec::new();
        for idx in 0..logits.len() {
            let (mut p, mut m) = (logits.clone(), logits.clone());
            p.as_slice_mut().unwrap()[idx] += H;
            m.as_slice_mut().unwrap()[idx] -= H;
            num_l.push((f(&z, &p) - f(&z, &m)) / (2.0 * H));
        }
        let analytic: Vec<f64> = j.grad_z.iter().chain(j.grad_logits.iter()).copied().collect();
        let numeric: Vec<f64> = num_z.into_iter().chain(num_l).collect();
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn mini_arch() -> Architecture {
    Architecture {
        input_side: 2,
        channels: 3,
        encoder: vec![12, 8, 8],
        projector: vec![8, 8, 8],
        classifier: vec![8, 8, 8, 3],
        dropout: 0.25,
    }
}

fn network_gradients() -> Result<f64, String> {
    let cfg = LossConfig::default();
    let heads = Heads { projector: true, classifier: true };
    let mut worst = 0.0f64;
    for inst in 0..10u64 {
        let mut r = rng(sub_seed(0x4e, inst));
        let mut net = Network::new(mini_arch(), sub_seed(0x4f, inst)).map_err(|e| e.to_string())?;
        // Zero biases put pre-activations exactly on the ReLU kink whenever a
        // row of the previous layer is all zero; move off it.
        let biases: Vec<bool> = net.named_tensors().iter().map(|(n, _, _)| n.ends_with(".bias")).collect();
        for (t, is_bias) in net.tensors_mut().into_iter().zip(biases) {
            if is_bias {
                t.iter_mut().for_each(|v| *v = r.random_range(-0.1..0.1));
            }
        }
        // N = 2 samples, two views each.
        let x = Array2::from_shape_simple_fn((4, 12), || r.random_range(0.0..1.0));
        let labels = vec![inst as usize % 3, inst as usize % 3, (inst as usize + 1) % 3, (inst as usize + 1) % 3];
        let drop_seed = sub_seed(0x50, inst);
        let loss = |net: &Network| {
            let pass = net.forward_train(x.view(), heads, true, drop_seed).unwrap();
            joint_loss(pass.z.as_ref().unwrap().view(), pass.logits.as_ref().unwrap().view(), &labels, &cfg)
                .unwrap()
                .total
        };
        let pass = net.forward_train(x.view(), heads, true, drop_seed).map_err(|e| e.to_string())?;
        let j = joint_loss(pass.z.as_ref().unwrap().view(), pass.logits.as_ref().unwrap().view(), &labels, &cfg)
            .map_err(|e| e.to_string())?;
        let grads = net
            .backward(&pass, Some(j.grad_z), Some(j.grad_logits))
            .map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = grads
            .aligned(&net)
            .into_iter()
            .flat_map(|g| g.expect("all heads trained").to_vec())
            .collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        let sizes: Vec<usize> = net.named_tensors().iter().map(|(_, _, t)| t.len()).collect();
        for (t, &len) in sizes.iter().enumerate() {
            for k in 0..len {
                let (mut p, mut m) = (net.clone(), net.clone());
                p.tensors_mut()[t][k] += H;
                m.tensors_mut()[t][k] -= H;
                numeric.push((loss(&p) - loss(&m)) / (2.0 * H));
            }
        }
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn gradient_checks() -> Outcome {
    let joint = joint_gradients()?;
    let net = network_gradients()?;
    check(joint < 1e-6, format!("joint_loss relative error {joint:e}"))?;
    check(net < 1e-5, format!("network relative error {net:e}"))?;
    Ok(format!("joint_loss max rel err {joint:.1e} (100 instances), network {net:.1e} (10 instances)"))
}

// ---------------------------------------------------------------- generator

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fishforge"))
}

fn run(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{:?} failed with {}: {}",
            cmd,
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn digest_dir(dir: &Path) -> Result<String, String> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.retain(|p| p.file_name().is_some_and(|n| n != "run_config.json"));
    names.sort();
    let mut h = Sha256::new();
    for p in &names {
        h.update(p.file_name().unwrap().to_string_lossy().as_bytes());
        h.update(std::fs::read(p).map_err(|e| e.to_string())?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn class_of(n_green: u32) -> ClassId {
    match n_green {
        0..=2 => ClassId::Normal,
        3..=7 => ClassId::Gain,
        _ => ClassId::Amplified,
    }
}

fn generator_contract(tmp: &Path) -> Outcome {
    const PER_CLASS: usize = 10_000;
    const SEED: u64 = 20_240_601;
    let (a, b) = (tmp.join("gen_a"), tmp.join("gen_b"));
    for dir in [&a, &b] {
        run(cli()
            .args(["generate", "--per-class", &PER_CLASS.to_string(), "--seed", &SEED.to_string(), "--out"])
            .arg(dir))?;
    }
    let (da, db) = (digest_dir(&a)?, digest_dir(&b)?);
    check(da == db, format!("regeneration digests differ: {da} vs {db}"))?;

    let manifest = DatasetManifest::load(&a).map_err(|e| e.to_string())?;
    check(manifest.len() == 3 * PER_CLASS, format!("{} manifest entries", manifest.len()))?;
    let spec = GenerationSpec::demo(PER_CLASS, SEED);
    let source = TemplateSource::Procedural;
    let mut index = 0usize;
    let mut checked_centers = 0usize;
    for class in ClassId::ALL {
        let configs = spec.configs_for(class);
        for k in 0..PER_CLASS {
            let entry = &manifest.entries[index];
            check(entry.class_id == class, format!("{} out of order", entry.id))?;
            check(
                class_of(entry.n_green) == class && entry.n_red == 2,
                format!("{}: class {} with {} green / {} red", entry.id, class, entry.n_green, entry.n_red),
            )?;
            check(
                entry.centers.iter().filter(|c| c.2 == 1).count() == entry.n_green as usize,
                format!("{}: center list disagrees with n_green", entry.id),
            )?;
            let (_, label, nucleus) = generate_patch_with_nucleus(
                configs[k % configs.len()],
                &source,
                spec.patch_size,
                &spec.warp,
                sub_seed(SEED, index as u64),
            )
            .map_err(|e| e.to_string())?;
            check(label.n_green == entry.n_green && label.seed == entry.seed, format!("{}: regenerated label differs", entry.id))?;
            for c in &entry.centers {
                check(nucleus.contains_point(c.0, c.1), format!("{}: center ({}, {}) outside nucleus", entry.id, c.0, c.1))?;
                checked_centers += 1;
            }
            index += 1;
        }
    }
    Ok(format!("{} patches, {checked_centers} centers inside, digest {}", manifest.len(), &da[..16]))
}

// ---------------------------------------------------------------- ECE

fn record(i: usize, certainty: f64, correct: bool) -> PredictionRecord {
    PredictionRecord {
        id: format!("r{i:04}"),
        true_label: if correct { 0 } else { 1 },
        probs: vec![0.5, 0.3, 0.2],
        certainty,
    }
}

fn ece_oracle() -> Outcome {
    let four = [record(0, 0.8, true), record(1, 0.8, true), record(2, 0.8, false), record(3, 0.8, false)];
    let r = ece(&four, 10).map_err(|e| e.to_string())?;
    check((r.ece - 0.3).abs() < 1e-15 && (r.pos_ece - 0.3).abs() < 1e-15 && r.neg_ece == 0.0,
        format!("ECE {} posECE {} negECE {}", r.ece, r.pos_ece, r.neg_ece))?;
    let mut worst = 0.0f64;
    for set in 0..1000u64 {
        let mut g = rng(sub_seed(0xec, set));
        let n = g.random_range(1..=300);
        let recs: Vec<_> = (0..n)
            .map(|i| record(i, g.random_range(0.0..=1.0), g.random_bool(0.6)))
            .collect();
        let bins = g.random_range(1..=20);
        let r = ece(&recs, bins).map_err(|e| e.to_string())?;
        worst = worst.max((r.ece - (r.pos_ece + r.neg_ece)).abs());
    }
    check(worst <= 1e-12, format!("max |ECE - (pos + neg)| = {worst:e}"))?;
    Ok(format!("example 0.3/0.3/0, identity max gap {worst:.1e} over 1000 sets"))
}

// ---------------------------------------------------------------- training

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

struct ToyRun {
    dir: PathBuf,
    train_time: Duration,
}

fn toy_pipeline(tmp: &Path) -> Result<ToyRun, String> {
    let dir = tmp.join("toy");
    let data = dir.join("data");
    run(cli().args(["generate", "--per-class", "600", "--seed", "7", "--out"]).arg(&data))?;
    let t = Instant::now();
    run(cli()
        .args(["train", "--mode", "joint", "--preset", "heavy", "--epochs", "50", "--seed", "1", "--split-seed", "2"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.join("run")))?;
    let train_time = t.elapsed();
    run(cli()
        .args(["eval", "--split", "test", "--model"])
        .arg(dir.join("run/model.ffm"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.join("eval")))?;
    let preds = dir.join("eval/predictions.csv");
    run(cli().arg("condition").arg("--predictions").arg(&preds).arg("--out").arg(dir.join("condition")))?;
    run(cli()
        .arg("by-count")
        .arg("--predictions")
        .arg(&preds)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.join("by_count")))?;
    Ok(ToyRun { dir, train_time })
}

fn toy_training(toy: &Result<ToyRun, String>) -> Outcome {
    let toy = toy.as_ref().map_err(Clone::clone)?;
    let cond = read_json(&toy.dir.join("condition/condition.json"))?;
    let rows = cond["rows"].as_array().ok_or("condition rows missing")?;
    let acc_at = |p: f64| {
        rows.iter()
            .find(|r| (r["retain"].as_f64().unwrap_or(-1.0) - p).abs() < 1e-12)
            .and_then(|r| r["accuracy"].as_f64())
    };
    let overall = acc_at(1.0).ok_or("no 100% row")?;
    let top_half = acc_at(0.5).ok_or("no 50% row")?;
    let counts = read_json(&toy.dir.join("by_count/certainty_by_count.json"))?;
    let cert = |g: u64| {
        counts
            .as_array()
            .and_then(|a| a.iter().find(|r| r["n_green"].as_u64() == Some(g)))
            .and_then(|r| r["mean_certainty"].as_f64())
            .ok_or(format!("no test records with n_green={g}"))
    };
    let (c2, c8, c20) = (cert(2)?, cert(8)?, cert(20)?);
    let minutes = toy.train_time.as_secs_f64() / 60.0;
    let summary = format!(
        "test acc {overall:.4}, top-50% acc {top_half:.4}, certainty n2={c2:.3} n8={c8:.3} n20={c20:.3}, train {minutes:.1} min"
    );
    check(overall >= 0.85, format!("test accuracy {overall:.4} < 0.85 ({summary})"))?;
    check(top_half >= overall, format!("top-50% accuracy below overall ({summary})"))?;
    check(c8 < c2 && c8 < c20, format!("no certainty dip at n_green=8 ({summary})"))?;
    check(minutes <= 10.0, format!("training took {minutes:.1} min ({summary})"))?;
    Ok(summary)
}

fn conditioning_format(toy: &Result<ToyRun, String>) -> Outcome {
    let toy = toy.as_ref().map_err(Clone::clone)?;
    let cond = read_json(&toy.dir.join("condition/condition.json"))?;
    let rows = cond["rows"].as_array().ok_or("condition rows missing")?;
    let grid = [100.0, 95.0, 90.0, 75.0, 50.0, 40.0, 30.0, 20.0, 15.0, 10.0, 5.0];
    let got: Vec<f64> = rows.iter().map(|r| 100.0 * r["retain"].as_f64().unwrap_or(f64::NAN)).collect();
    check(
        got.len() == grid.len() && got.iter().zip(grid).all(|(a, b)| (a - b).abs() < 1e-9),
        format!("retain grid {got:?}"),
    )?;
    let sets: Vec<HashSet<&str>> = rows
        .iter()
        .map(|r| {
            r["retained_ids"]
                .as_array()
                .map(|ids| ids.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default()
        })
        .collect();
    for w in sets.windows(2) {
        check(w[1].is_subset(&w[0]), "retained sets are not nested")?;
    }
    let csv = std::fs::read_to_string(toy.dir.join("condition/condition.csv")).map_err(|e| e.to_string())?;
    let csv_grid: Vec<&str> = csv.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
    check(
        csv_grid == ["100", "95", "90", "75", "50", "40", "30", "20", "15", "10", "5"],
        format!("CSV retain column {csv_grid:?}"),
    )?;
    let kept: Vec<usize> = sets.iter().map(HashSet::len).collect();
    Ok(format!("11 fractions, nested, kept {kept:?}"))
}

// ---------------------------------------------------------------- driver

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(&str, Outcome, Duration)> = Vec::new();
    let mut timed = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let dt = t.elapsed();
        let status = if out.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &out {
            Ok(s) | Err(s) => s.clone(),
        };
        println!("{status}  {name:<28} {detail}  [{:.1}s]", dt.as_secs_f64());
        results.push((name, out, dt));
    };

    timed("entropy math", &mut entropy_math);
    timed("nt-xent correctness", &mut nt_xent_correctness);
    timed("gradient checks", &mut gradient_checks);
    timed("ece oracle", &mut ece_oracle);
    timed("generator contract", &mut || generator_contract(tmp.path()));
    let toy = toy_pipeline(tmp.path());
    timed("toy training run", &mut || toy_training(&toy));
    timed("conditioning format", &mut || conditioning_format(&toy));

    let failed = results.iter().filter(|r| r.1.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
