//! The augmentation set: random geometric and photometric transforms with
//! heavy/light presets and per-transform ablation.

mod ops;

pub use ops::{apply, gaussian_blur, rotate, scale_about_center};

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::seed::Rng;

/// Transform families that can be switched on or off as a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// Rotation and scaling.
    Affine,
    Blur,
    Flip,
    Gradient,
    Noise,
    Intensity,
}

impl TransformKind {
    pub const ALL: [TransformKind; 6] = [
        TransformKind::Affine,
        TransformKind::Blur,
        TransformKind::Flip,
        TransformKind::Gradient,
        TransformKind::Noise,
        TransformKind::Intensity,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Heavy,
    Light,
    None,
}

impl PresetName {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heavy" => Some(PresetName::Heavy),
            "light" => Some(PresetName::Light),
            "none" => Some(PresetName::None),
            _ => None,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetName::Heavy => "heavy",
            PresetName::Light => "light",
            PresetName::None => "none",
        })
    }
}

/// Sampling ranges; intervals are `[lo, hi]` (rotation is `[lo, hi)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRanges {
    pub rotation_deg: [f64; 2],
    pub flip_prob: f64,
    pub scale: [f64; 2],
    pub blur_sigma_px: [f64; 2],
    pub intensity: [f64; 2],
    pub noise_sigma: [f64; 2],
    pub gradient_amplitude: [f64; 2],
}

impl TransformRanges {
    pub fn heavy() -> Self {
        Self {
            rotation_deg: [0.0, 360.0],
            flip_prob: 0.5,
            scale: [0.8, 1.2],
            blur_sigma_px: [0.0, 1.5],
            intensity: [0.5, 1.5],
            noise_sigma: [0.0, 0.08],
            gradient_amplitude: [0.0, 0.3],
        }
    }

    pub fn light() -> Self {
        Self {
            rotation_deg: [0.0, 360.0],
            flip_prob: 0.5,
            scale: [0.9, 1.1],
            blur_sigma_px: [0.0, 0.8],
            intensity: [0.8, 1.2],
            noise_sigma: [0.0, 0.03],
            gradient_amplitude: [0.0, 0.15],
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &str, [lo, hi]: [f64; 2], min: f64, strict: bool| {
            let ok_lo = if strict { lo > min } else { lo >= min };
            if !(ok_lo && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!("augmentation range {name} = [{lo}, {hi}] is invalid")));
            }
            Ok(())
        };
        check("rotation_deg", self.rotation_deg, f64::NEG_INFINITY, false)?;
        check("scale", self.scale, 0.0, true)?;
        check("blur_sigma_px", self.blur_sigma_px, 0.0, false)?;
        check("intensity", self.intensity, 0.0, true)?;
        check("noise_sigma", self.noise_sigma, 0.0, false)?;
        check("gradient_amplitude", self.gradient_amplitude, 0.0, false)?;
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config(format!("flip_prob {} not in [0, 1]", self.flip_prob)));
        }
        Ok(())
    }
}

/// A distribution over transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPreset {
    pub name: PresetName,
    pub ranges: TransformRanges,
    pub enabled: BTreeSet<TransformKind>,
}

impl AugmentPreset {
    pub fn heavy() -> Self {
        Self {
            name: PresetName::Heavy,
            ranges: TransformRanges::heavy(),
            enabled: TransformKind::ALL.into_iter().collect(),
        }
    }

    pub fn light() -> Self {
        Self {
            name: PresetName::Light,
            ranges: TransformRanges::light(),
            enabled: TransformKind::ALL.into_iter().collect(),
        }
    }

    pub fn none() -> Self {
        Self {
            name: PresetName::None,
            ranges: TransformRanges::heavy(),
            enabled: BTreeSet::new(),
        }
    }

    pub fn named(name: PresetName) -> Self {
        match name {
            PresetName::Heavy => Self::heavy(),
            PresetName::Light => Self::light(),
            PresetName::None => Self::none(),
        }
    }

    /// Same preset with the given transform families fixed to identity.
    pub fn without(mut self, kinds: &[TransformKind]) -> Self {
        for k in kinds {
            self.enabled.remove(k);
        }
        self
    }

    pub fn is_enabled(&self, kind: TransformKind) -> bool {
        self.enabled.contains(&kind)
    }

    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("preset: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

/// Columns of the leave-one-out augmentation ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationColumn {
    None,
    All,
    Omit(TransformKind),
    OmitGradientAndNoise,
}

impl AblationColumn {
    pub const ALL: [AblationColumn; 9] = [
        AblationColumn::None,
        AblationColumn::All,
        AblationColumn::Omit(TransformKind::Affine),
        AblationColumn::Omit(TransformKind::Blur),
        AblationColumn::Omit(TransformKind::Flip),
        AblationColumn::Omit(TransformKind::Gradient),
        AblationColumn::Omit(TransformKind::Noise),
        AblationColumn::Omit(TransformKind::Intensity),
        AblationColumn::OmitGradientAndNoise,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationColumn::None => "None",
            AblationColumn::All => "All",
            AblationColumn::Omit(TransformKind::Affine) => "Affine",
            AblationColumn::Omit(TransformKind::Blur) => "Blur",
            AblationColumn::Omit(TransformKind::Flip) => "Flip",
            AblationColumn::Omit(TransformKind::Gradient) => "Grad.",
            AblationColumn::Omit(TransformKind::Noise) => "Noise",
            AblationColumn::Omit(TransformKind::Intensity) => "Int.",
            AblationColumn::OmitGradientAndNoise => "Grad&Noise",
        }
    }

    /// Preset for this column derived from `base` (normally heavy).
    pub fn preset(self, base: &AugmentPreset) -> AugmentPreset {
        match self {
            AblationColumn::None => AugmentPreset {
                enabled: BTreeSet::new(),
                ..base.clone()
            },
            AblationColumn::All => base.clone(),
            AblationColumn::Omit(k) => base.clone().without(&[k]),
            AblationColumn::OmitGradientAndNoise => base
                .clone()
                .without(&[TransformKind::Gradient, TransformKind::Noise]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGradient {
    pub direction_deg: f64,
    pub amplitude: f64,
}

/// One concrete draw from a preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub rotation_deg: f64,
    pub flip_h: bool,
    pub flip_v: bool,
    pub scale: f64,
    pub blur_sigma_px: f64,
    pub intensity_scale: [f64; 3],
    pub noise_sigma: f64,
    pub gradient: LinearGradient,
}

impl TransformSpec {
    pub const IDENTITY: TransformSpec = TransformSpec {
        rotation_deg: 0.0,
        flip_h: false,
        flip_v: false,
        scale: 1.0,
        blur_sigma_px: 0.0,
        intensity_scale: [1.0; 3],
        noise_sigma: 0.0,
        gradient: LinearGradient {
            direction_deg: 0.0,
            amplitude: 0.0,
        },
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self::IDENTITY
    }
}

fn uniform(rng: &mut Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a transform. Every field is sampled (keeping the stream aligned
/// across ablations) and disabled families are then reset to identity.
pub fn sample_transform(preset: &AugmentPreset, rng: &mut Rng) -> TransformSpec {
    let r = &preset.ranges;
    let mut t = TransformSpec {
        rotation_deg: uniform(rng, r.rotation_deg),
        flip_h: rng.random_bool(r.flip_prob),
        flip_v: rng.random_bool(r.flip_prob),
        scale: uniform(rng, r.scale),
        blur_sigma_px: uniform(rng, r.blur_sigma_px),
        intensity_scale: [
            uniform(rng, r.intensity),
            uniform(rng, r.intensity),
            uniform(rng, r.intensity),
        ],
        noise_sigma: uniform(rng, r.noise_sigma),
        gradient: LinearGradient {
            direction_deg: rng.random_range(0.0..360.0),
            amplitude: uniform(rng, r.gradient_amplitude),
        },
    };
    let id = TransformSpec::IDENTITY;
    if !preset.is_enabled(TransformKind::Affine) {
        t.rotation_deg = id.rotation_deg;
        t.scale = id.scale;
    }
    if !preset.is_enabled(TransformKind::Flip) {
        t.flip_h = false;
        t.flip_v = false;
    }
    if !preset.is_enabled(TransformKind::Blur) {
        t.blur_sigma_px = id.blur_sigma_px;
    }
    if !preset.is_enabled(TransformKind::Intensity) {
        t.intensity_scale = id.intensity_scale;
    }
    if !preset.is_enabled(TransformKind::Noise) {
        t.noise_sigma = id.noise_sigma;
    }
    if !preset.is_enabled(TransformKind::Gradient) {
        t.gradient = id.gradient;
    }
    t
}

/// Two independent views of the same patch.
pub fn augment_pair(patch: &Patch, preset: &AugmentPreset, rng: &mut Rng) -> (Patch, Patch) {
    let t1 = sample_transform(preset, rng);
    let v1 = apply(&t1, patch, rng);
    let t2 = sample_transform(preset, rng);
    let v2 = apply(&t2, patch, rng);
    (v1, v2)
}
