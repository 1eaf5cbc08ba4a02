//! Whole-dataset generation: PNG files plus a JSON Lines manifest.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ClassCounts, ClassId, GenerationSpec};
use super::{generate_patch, PatchLabel, TemplateSource};
use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::seed::sub_seed;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SPEC_FILE: &str = "generation.json";

/// Patches rendered in parallel per write batch.
const CHUNK: usize = 512;

/// One manifest line. Field order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub class_id: ClassId,
    pub n_green: u32,
    pub n_red: u32,
    /// `[x, y, channel]`, channel 0 = red, 1 = green.
    pub centers: Vec<(f64, f64, u8)>,
    pub seed: u64,
}

impl ManifestEntry {
    fn new(index: usize, label: &PatchLabel) -> Self {
        let file = patch_file_name(label.class_id, index);
        Self {
            id: file.trim_end_matches(".png").to_string(),
            file,
            class_id: label.class_id,
            n_green: label.n_green,
            n_red: label.n_red,
            centers: label
                .signal_centers
                .iter()
                .map(|c| (c.x, c.y, c.channel as u8))
                .collect(),
            seed: label.seed,
        }
    }
}

pub fn patch_file_name(class: ClassId, index: usize) -> String {
    format!("{}_{index:06}.png", class.name())
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    /// Overwrite an existing dataset in the output directory.
    pub force: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| {
                Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::Config(format!("{}: manifest is empty", path.display())));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut c = ClassCounts::uniform(0);
        for e in &self.entries {
            match e.class_id {
                ClassId::Normal => c.normal += 1,
                ClassId::Gain => c.gain += 1,
                ClassId::Amplified => c.amplified += 1,
            }
        }
        c
    }

    pub fn by_id(&self) -> HashMap<&str, &ManifestEntry> {
        self.entries.iter().map(|e| (e.id.as_str(), e)).collect()
    }

    pub fn patch_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.dir.join(&entry.file)
    }

    pub fn load_patch(&self, entry: &ManifestEntry) -> Result<Patch> {
        Patch::load_png(&self.patch_path(entry))
    }
}

/// Class and config assignment of every patch index: classes in order
/// normal, gain, amplified; configs of one class alternate round-robin.
fn plan(spec: &GenerationSpec) -> Vec<(ClassId, usize)> {
    let mut out = Vec::with_capacity(spec.counts.total());
    for class in ClassId::ALL {
        let configs: Vec<usize> = spec
            .classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.class_id == class)
            .map(|(i, _)| i)
            .collect();
        for k in 0..spec.counts.get(class) {
            out.push((class, configs[k % configs.len()]));
        }
    }
    out
}

/// Writes every patch of `spec` and its manifest into `out_dir`.
///
/// Patch `i` is generated from `sub_seed(spec.seed, i)` alone, so output is
/// identical regardless of thread count.
pub fn generate_dataset(
    spec: &GenerationSpec,
    out_dir: &Path,
    opts: &GenerateOptions,
) -> Result<DatasetManifest> {
    spec.validate()?;
    prepare_dir(out_dir, opts.force)?;
    let source = TemplateSource::resolve(&spec.nucleus)?;
    let plan = plan(spec);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let spec_path = out_dir.join(SPEC_FILE);
    let spec_json = serde_json::to_string_pretty(spec).expect("spec serializes");
    fs::write(&spec_path, spec_json + "\n").map_err(|e| Error::io(&spec_path, e))?;

    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut manifest = BufWriter::new(
        fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?,
    );
    let mut entries = Vec::with_capacity(plan.len());
    for (chunk_idx, chunk) in plan.chunks(CHUNK).enumerate() {
        let base = chunk_idx * CHUNK;
        let rendered: Vec<Result<(ManifestEntry, Vec<u8>)>> = pool.install(|| {
            chunk
                .par_iter()
                .enumerate()
                .map(|(k, &(_, cfg))| {
                    let index = base + k;
                    let seed = sub_seed(spec.seed, index as u64);
                    let (patch, label) = generate_patch(
                        &spec.classes[cfg],
                        &source,
                        spec.patch_size,
                        &spec.warp,
                        seed,
                    )?;
                    Ok((ManifestEntry::new(index, &label), encode_png(&patch)))
                })
                .collect()
        });
        for item in rendered {
            let (entry, png) = item?;
            let path = out_dir.join(&entry.file);
            fs::write(&path, png).map_err(|e| Error::io(&path, e))?;
            let line = serde_json::to_string(&entry).expect("entry serializes");
            writeln!(manifest, "{line}").map_err(|e| Error::io(&manifest_path, e))?;
            entries.push(entry);
        }
    }
    manifest.flush().map_err(|e| Error::io(&manifest_path, e))?;
    Ok(DatasetManifest {
        dir: out_dir.to_path_buf(),
        entries,
    })
}

fn encode_png(patch: &Patch) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    patch
        .to_rgb8()
        .write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory PNG encoding");
    buf.into_inner()
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.join(MANIFEST_FILE).exists() {
        if !force {
            return Err(Error::Config(format!(
                "{} already contains a dataset; pass --force to overwrite",
                dir.display()
            )));
        }
        // Only remove files this generator writes.
        let read = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for item in read {
            let path = item.map_err(|e| Error::io(dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let ours = name == MANIFEST_FILE
                || name == SPEC_FILE
                || (name.ends_with(".png")
                    && ClassId::ALL
                        .iter()
                        .any(|c| name.starts_with(&format!("{}_", c.name()))));
            if ours {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_dataset_layout() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenerationSpec::demo(4, 7);
        let m = generate_dataset(&spec, dir.path(), &GenerateOptions::default()).unwrap();
        assert_eq!(m.len(), 12);
        assert_eq!(m.class_counts(), ClassCounts::uniform(4));
        assert_eq!(m.entries[0].file, "normal_000000.png");
        assert_eq!(m.entries[4].id, "gain_000004");
        assert!(dir.path().join("amplified_000011.png").exists());
        let loaded = DatasetManifest::load(dir.path()).unwrap();
        assert_eq!(loaded, m);
        let p = loaded.load_patch(&loaded.entries[0]).unwrap();
        assert_eq!((p.width(), p.height()), (64, 64));
    }

    #[test]
    fn refuses_overwrite_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenerationSpec::demo(1, 0);
        generate_dataset(&spec, dir.path(), &GenerateOptions::default()).unwrap();
        let err = generate_dataset(&spec, dir.path(), &GenerateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let opts = GenerateOptions {
            force: true,
            ..Default::default()
        };
        generate_dataset(&spec, dir.path(), &opts).unwrap();
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let spec = GenerationSpec::demo(3, 11);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let one = GenerateOptions {
            threads: Some(1),
            ..Default::default()
        };
        let four = GenerateOptions {
            threads: Some(4),
            ..Default::default()
        };
        generate_dataset(&spec, a.path(), &one).unwrap();
        generate_dataset(&spec, b.path(), &four).unwrap();
        for name in [MANIFEST_FILE, "gain_000004.png", "amplified_000008.png"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
    }

    #[test]
    fn manifest_field_order() {
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&GenerationSpec::demo(1, 0), dir.path(), &GenerateOptions::default())
            .unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let first = text.lines().next().unwrap();
        let keys = ["\"id\"", "\"file\"", "\"class_id\"", "\"n_green\"", "\"n_red\"", "\"centers\"", "\"seed\""];
        let pos: Vec<usize> = keys.iter().map(|k| first.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{first}");
    }
}
