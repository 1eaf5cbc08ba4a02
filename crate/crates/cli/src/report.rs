use std::path::PathBuf;

use fishforge::synthgen::DatasetManifest;
use fishforge::uncert::{
    agreement_entropy, certainty_by_signal_count, condition_on_certainty, ece, parse_retain_list,
    read_predictions, write_count_csv, AgreementReport, AnnotationSet,
};

use crate::args::{AgreementArgs, ByCountArgs, CalibrateArgs, ConditionArgs};
use crate::output::{prepare_out, write_run_config};

pub fn calibrate(args: CalibrateArgs) -> anyhow::Result<()> {
    prepare_out(&args.out, &["calibration.json", "calibration.csv"], args.force)?;
    let records = read_predictions(&args.predictions)?;
    let report = ece(&records, args.bins)?;
    report.write_json(&args.out.join("calibration.json"))?;
    report.write_csv(&args.out.join("calibration.csv"))?;
    println!("records {}", report.records);
    println!("ECE     {:.6}", report.ece);
    println!("posECE  {:.6}", report.pos_ece);
    println!("negECE  {:.6}", report.neg_ece);
    write_run_config(&args.out, "calibrate", &args, &serde_json::json!({ "bins": args.bins }))?;
    Ok(())
}

pub fn condition(args: ConditionArgs) -> anyhow::Result<()> {
    let retain = parse_retain_list(&args.retain)?;
    prepare_out(&args.out, &["condition.json", "condition.csv"], args.force)?;
    let records = read_predictions(&args.predictions)?;
    let table = condition_on_certainty(&records, &retain)?;
    table.write_json(&args.out.join("condition.json"))?;
    table.write_csv(&args.out.join("condition.csv"))?;
    println!("{:>8} {:>6} {:>9}", "retain%", "kept", "accuracy");
    for r in &table.rows {
        println!("{:>8.1} {:>6} {:>9.4}", 100.0 * r.retain, r.kept, r.accuracy);
    }
    write_run_config(&args.out, "condition", &args, &serde_json::json!({ "retain": retain }))?;
    Ok(())
}

fn load_annotations(paths: &[PathBuf]) -> anyhow::Result<Vec<AnnotationSet>> {
    Ok(paths.iter().map(|p| AnnotationSet::load(p)).collect::<Result<Vec<_>, _>>()?)
}

pub fn agreement(args: AgreementArgs) -> anyhow::Result<()> {
    let files = ["agreement.json", "agreement_images.csv", "annotators.csv"];
    prepare_out(&args.out, &files, args.force)?;
    let manifest = DatasetManifest::load(&args.data)?;
    let sets = load_annotations(&args.annotations)?;
    let report = agreement_entropy(&sets, &manifest.entries, args.classes)?;
    report.write_json(&args.out.join(files[0]))?;
    report.write_images_csv(&args.out.join(files[1]))?;
    report.write_annotators_csv(&args.out.join(files[2]))?;
    for a in &report.annotators {
        println!("{:<16} {:.4}", a.annotator_id, a.accuracy);
    }
    println!("{:<16} {:.4} ± {:.4}", "mean ± std", report.mean_accuracy, report.std_accuracy);
    let mean_certainty =
        report.images.iter().map(|i| i.certainty).sum::<f64>() / report.images.len().max(1) as f64;
    println!("images {}  mean human certainty {:.4}", report.images.len(), mean_certainty);
    write_run_config(&args.out, "agreement", &args, &serde_json::json!({ "classes": args.classes }))?;
    Ok(())
}

pub fn by_count(args: ByCountArgs) -> anyhow::Result<()> {
    prepare_out(&args.out, &["certainty_by_count.csv", "certainty_by_count.json"], args.force)?;
    let manifest = DatasetManifest::load(&args.data)?;
    let records = read_predictions(&args.predictions)?;
    let human: Option<AgreementReport> = if args.annotations.is_empty() {
        None
    } else {
        Some(agreement_entropy(&load_annotations(&args.annotations)?, &manifest.entries, args.classes)?)
    };
    let rows = certainty_by_signal_count(&records, &manifest.entries, human.as_ref())?;
    write_count_csv(&args.out.join("certainty_by_count.csv"), &rows)?;
    let json = args.out.join("certainty_by_count.json");
    std::fs::write(&json, serde_json::to_string_pretty(&rows)? + "\n")?;
    println!("{:>7} {:>5} {:>10}", "n_green", "n", "certainty");
    for r in &rows {
        println!("{:>7} {:>5} {:>10.4}", r.n_green, r.n, r.mean_certainty);
    }
    write_run_config(&args.out, "by-count", &args, &serde_json::json!({ "classes": args.classes }))?;
    Ok(())
}
