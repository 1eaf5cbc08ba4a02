//! Config-driven synthesis of labeled FISH patches.
//!
//! A patch is painted in three steps: a nucleus background goes into the
//! blue channel, target (green) and reference (red) signals are placed
//! inside it as Gaussians, and each signal channel is elastically warped.

mod config;
mod dataset;
mod nucleus;
mod signals;
mod warp;

pub use config::{
    AmplifiedVariant, ClassConfig, ClassCounts, ClassId, GenerationSpec, NucleusSource,
    SignalGroup, SignalKind, SignalSpec, WarpConfig, AMPLITUDE, CLUSTER_SPREAD_PX, SIGMA_PX,
};
pub use dataset::{
    generate_dataset, patch_file_name, DatasetManifest, GenerateOptions, ManifestEntry,
    MANIFEST_FILE, SPEC_FILE,
};
pub use nucleus::{
    list_masks, make_nucleus, nucleus_from_mask, NucleusTemplate, TemplateOrigin, MIN_SIZE,
};
pub use signals::{place_cluster, place_signals, render_gaussians, support_radius, Point, Spot};
pub use warp::warp_signals;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::patch::{Channel, Grid, Patch};
use crate::seed::{self, Rng};

/// Attempts (fresh nucleus each time) before a patch is declared failed.
pub const MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalCenter {
    pub x: f64,
    pub y: f64,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchLabel {
    pub class_id: ClassId,
    pub n_green: u32,
    pub n_red: u32,
    /// Pre-warp centers, red first then green.
    pub signal_centers: Vec<SignalCenter>,
    pub seed: u64,
}

/// Nucleus provider resolved from a [`NucleusSource`].
#[derive(Debug, Clone)]
pub enum TemplateSource {
    Procedural,
    Library(Vec<std::path::PathBuf>),
}

impl TemplateSource {
    pub fn resolve(source: &NucleusSource) -> Result<Self> {
        match source {
            NucleusSource::Procedural => Ok(TemplateSource::Procedural),
            NucleusSource::Directory { path } => Ok(TemplateSource::Library(list_masks(path)?)),
        }
    }

    pub fn draw(&self, rng: &mut Rng, size: usize) -> Result<NucleusTemplate> {
        match self {
            TemplateSource::Procedural => make_nucleus(rng, size),
            TemplateSource::Library(files) => {
                let path = &files[rng.random_range(0..files.len())];
                nucleus_from_mask(rng, path, size)
            }
        }
    }
}

/// Paints one patch for `config` from the per-patch `seed`.
pub fn generate_patch(
    config: &ClassConfig,
    source: &TemplateSource,
    size: usize,
    warp: &WarpConfig,
    seed: u64,
) -> Result<(Patch, PatchLabel)> {
    generate_patch_with_nucleus(config, source, size, warp, seed).map(|(p, l, _)| (p, l))
}

/// Like [`generate_patch`], also returning the nucleus the signals were
/// placed in.
pub fn generate_patch_with_nucleus(
    config: &ClassConfig,
    source: &TemplateSource,
    size: usize,
    warp: &WarpConfig,
    seed: u64,
) -> Result<(Patch, PatchLabel, NucleusTemplate)> {
    let mut rng = seed::rng(seed);
    let mut last_err = None;
    for _ in 0..MAX_ATTEMPTS {
        match paint(config, source, size, warp, &mut rng) {
            Ok((patch, mut label, nucleus)) => {
                label.seed = seed;
                return Ok((patch, label, nucleus));
            }
            Err(e @ Error::Generation(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "{} patch (seed {seed}) failed after {MAX_ATTEMPTS} attempts: {}",
        config.class_id,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn paint(
    config: &ClassConfig,
    source: &TemplateSource,
    size: usize,
    warp: &WarpConfig,
    rng: &mut Rng,
) -> Result<(Patch, PatchLabel, NucleusTemplate)> {
    let nucleus = source.draw(rng, size)?;

    let mut green_spots = Vec::new();
    for group in &config.green {
        if let Some(spec) = group.draw(rng) {
            green_spots.extend(spots_for(&nucleus, &spec, rng)?);
        }
    }
    let red_spots = spots_for(&nucleus, &config.red, rng)?;

    let canvas = Grid::zeros(size, size);
    let red = warp_signals(
        &render_gaussians(&canvas, &red_spots),
        rng,
        warp.max_disp_px,
        warp.grid_step_px,
    );
    let green = warp_signals(
        &render_gaussians(&canvas, &green_spots),
        rng,
        warp.max_disp_px,
        warp.grid_step_px,
    );
    let patch = Patch::from_grids(&red, &green, nucleus.intensity())?;

    let label = PatchLabel {
        class_id: config.class_id,
        n_green: green_spots.len() as u32,
        n_red: red_spots.len() as u32,
        signal_centers: centers(&red_spots, Channel::Red)
            .chain(centers(&green_spots, Channel::Green))
            .collect(),
        seed: 0,
    };
    Ok((patch, label, nucleus))
}

fn centers(spots: &[Spot], channel: Channel) -> impl Iterator<Item = SignalCenter> + '_ {
    spots.iter().map(move |s| SignalCenter {
        x: s.center.x,
        y: s.center.y,
        channel,
    })
}

fn spots_for(nucleus: &NucleusTemplate, spec: &SignalSpec, rng: &mut Rng) -> Result<Vec<Spot>> {
    let centers = place_signals(nucleus, spec, rng)?;
    let [lo, hi] = spec.amplitude_range;
    Ok(centers
        .into_iter()
        .map(|center| Spot {
            center,
            sigma: spec.sigma_px,
            amplitude: if lo < hi { rng.random_range(lo..=hi) } else { lo },
        })
        .collect())
}
