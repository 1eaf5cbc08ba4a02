use anyhow::Context;
use fishforge::augment::{apply, sample_transform, AugmentPreset, PresetName, TransformSpec};
use fishforge::seed::{rng, sub_seed};
use fishforge::synthgen::{
    generate_dataset, DatasetManifest, GenerateOptions, GenerationSpec, MANIFEST_FILE,
};
use fishforge::ClassId;
use image::{Rgb, RgbImage};

use crate::args::{GenerateArgs, PresetArg, PreviewArgs};
use crate::output::{prepare_out, usage, write_run_config};

pub const THREADS_ENV: &str = "FISHFORGE_THREADS";

fn thread_cap() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        _ => Ok(None),
    }
}

pub fn preset(arg: PresetArg) -> AugmentPreset {
    AugmentPreset::named(match arg {
        PresetArg::Heavy => PresetName::Heavy,
        PresetArg::Light => PresetName::Light,
        PresetArg::None => PresetName::None,
    })
}

pub fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let mut spec = match &args.spec {
        Some(path) => GenerationSpec::load(path)?,
        None => GenerationSpec::demo(args.per_class, 0),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let threads = thread_cap()?;
    let manifest = generate_dataset(
        &spec,
        &args.out,
        &GenerateOptions {
            force: args.force,
            threads,
        },
    )?;
    let counts = manifest.class_counts();
    for class in ClassId::ALL {
        println!("{:<10} {}", class.name(), counts.get(class));
    }
    println!("manifest   {}", args.out.join(MANIFEST_FILE).display());
    write_run_config(&args.out, "generate", &args, &spec)?;
    Ok(())
}

const GAP: u32 = 2;

pub fn preview_augment(args: PreviewArgs) -> anyhow::Result<()> {
    if args.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let file = "preview_augment.png";
    prepare_out(&args.out, &[file], args.force)?;
    let manifest = DatasetManifest::load(&args.data)?;
    if manifest.is_empty() {
        return Err(usage("dataset is empty"));
    }
    let preset = preset(args.preset);
    let rows = args.count.min(manifest.len());
    let picks: Vec<usize> = (0..rows).map(|i| i * manifest.len() / rows).collect();
    let first = manifest.load_patch(&manifest.entries[picks[0]])?;
    let side = first.width() as u32;
    let cols = args.views as u32 + 1;
    let mut grid = RgbImage::from_pixel(
        cols * side + (cols - 1) * GAP,
        rows as u32 * side + (rows as u32 - 1) * GAP,
        Rgb([255, 255, 255]),
    );
    let mut transforms: Vec<(String, Vec<TransformSpec>)> = Vec::new();
    for (row, &idx) in picks.iter().enumerate() {
        let entry = &manifest.entries[idx];
        let patch = manifest.load_patch(entry)?;
        let mut r = rng(sub_seed(args.seed, idx as u64));
        let mut tiles = vec![patch.to_rgb8()];
        let mut specs = Vec::new();
        for _ in 0..args.views {
            let t = sample_transform(&preset, &mut r);
            tiles.push(apply(&t, &patch, &mut r).to_rgb8());
            specs.push(t);
        }
        for (col, tile) in tiles.iter().enumerate() {
            image::imageops::replace(
                &mut grid,
                tile,
                (col as u32 * (side + GAP)) as i64,
                (row as u32 * (side + GAP)) as i64,
            );
        }
        transforms.push((entry.id.clone(), specs));
    }
    let path = args.out.join(file);
    grid.save(&path).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    write_run_config(&args.out, "preview-augment", &args, &serde_json::json!({
        "preset": preset,
        "transforms": transforms,
    }))?;
    Ok(())
}
