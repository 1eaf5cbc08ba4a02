//! Signal configuration: what a class looks like in terms of spot counts,
//! clusters and sizes.

use std::fmt;
use std::path::PathBuf;

use rand::Rng as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// Diagnostic class, ordered by target copy number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassId {
    Normal = 0,
    Gain = 1,
    Amplified = 2,
}

impl ClassId {
    pub const ALL: [ClassId; 3] = [ClassId::Normal, ClassId::Gain, ClassId::Amplified];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Normal => "normal",
            ClassId::Gain => "gain",
            ClassId::Amplified => "amplified",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
    }

    /// Class implied by a target signal count: 2 normal, 3..=7 gain,
    /// 8 or more amplified. Counts below 2 belong to no class.
    pub fn from_green_count(n: u32) -> Option<Self> {
        match n {
            2 => Some(ClassId::Normal),
            3..=7 => Some(ClassId::Gain),
            n if n >= 8 => Some(ClassId::Amplified),
            _ => None,
        }
    }

    /// Inclusive green-count bounds of the class (`u32::MAX` = unbounded).
    pub fn green_bounds(self) -> (u32, u32) {
        match self {
            ClassId::Normal => (2, 2),
            ClassId::Gain => (3, 7),
            ClassId::Amplified => (8, u32::MAX),
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// Serialized as the class index; the name is accepted on input as well.
impl Serialize for ClassId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for ClassId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Index(u64),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Index(i) => ClassId::from_index(i as usize)
                .ok_or_else(|| serde::de::Error::custom(format!("class index {i} out of range"))),
            Repr::Name(s) => ClassId::from_name(&s)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown class '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Discrete,
    Cluster,
}

/// A concrete set of signals to place: fixed count, size and brightness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub count: u32,
    pub sigma_px: f64,
    #[serde(default)]
    pub cluster_spread_px: f64,
    pub amplitude_range: [f64; 2],
}

impl SignalSpec {
    pub fn discrete(count: u32, sigma_px: f64, amplitude_range: [f64; 2]) -> Self {
        Self {
            kind: SignalKind::Discrete,
            count,
            sigma_px,
            cluster_spread_px: 0.0,
            amplitude_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("signal count must be positive".into()));
        }
        validate_shape(self.kind, self.count, self.sigma_px, self.cluster_spread_px)?;
        validate_amplitude(self.amplitude_range)
    }

    /// Pixels kept clear between a discrete center and the nucleus edge.
    pub fn erosion_margin(&self) -> usize {
        (2.0 * self.sigma_px).ceil() as usize
    }
}

/// A signal group with a count range; drawing fixes the count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalGroup {
    pub kind: SignalKind,
    /// Inclusive `[min, max]`. A zero minimum makes the group optional.
    pub count: [u32; 2],
    pub sigma_px: f64,
    #[serde(default)]
    pub cluster_spread_px: f64,
    pub amplitude_range: [f64; 2],
}

impl SignalGroup {
    pub fn discrete(count: [u32; 2], sigma_px: f64, amplitude_range: [f64; 2]) -> Self {
        Self {
            kind: SignalKind::Discrete,
            count,
            sigma_px,
            cluster_spread_px: 0.0,
            amplitude_range,
        }
    }

    pub fn cluster(
        count: [u32; 2],
        sigma_px: f64,
        spread_px: f64,
        amplitude_range: [f64; 2],
    ) -> Self {
        Self {
            kind: SignalKind::Cluster,
            count,
            sigma_px,
            cluster_spread_px: spread_px,
            amplitude_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.count;
        if lo > hi {
            return Err(Error::Config(format!("count range [{lo}, {hi}] is reversed")));
        }
        if hi == 0 {
            return Err(Error::Config("signal group never draws a signal".into()));
        }
        if self.kind == SignalKind::Cluster && lo < 2 {
            return Err(Error::Config("cluster groups need at least 2 members".into()));
        }
        validate_shape(self.kind, hi, self.sigma_px, self.cluster_spread_px)?;
        validate_amplitude(self.amplitude_range)
    }

    /// Draws a count uniformly from the range; `None` when it comes out 0.
    pub fn draw(&self, rng: &mut Rng) -> Option<SignalSpec> {
        let count = rng.random_range(self.count[0]..=self.count[1]);
        (count > 0).then_some(SignalSpec {
            kind: self.kind,
            count,
            sigma_px: self.sigma_px,
            cluster_spread_px: self.cluster_spread_px,
            amplitude_range: self.amplitude_range,
        })
    }
}

fn validate_shape(kind: SignalKind, count: u32, sigma: f64, spread: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma_px must be positive, got {sigma}")));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Config(format!(
            "cluster_spread_px must be nonnegative, got {spread}"
        )));
    }
    if kind == SignalKind::Cluster && count < 2 {
        return Err(Error::Config("cluster signals need count >= 2".into()));
    }
    Ok(())
}

fn validate_amplitude([lo, hi]: [f64; 2]) -> Result<()> {
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::Config(format!(
            "amplitude_range [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1"
        )));
    }
    Ok(())
}

/// Sub-type of the amplified class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplifiedVariant {
    Signals,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfig {
    pub class_id: ClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<AmplifiedVariant>,
    pub green: Vec<SignalGroup>,
    pub red: SignalSpec,
}

impl ClassConfig {
    /// Two green and two red signals.
    pub fn normal() -> Self {
        Self {
            class_id: ClassId::Normal,
            variant: None,
            green: vec![SignalGroup::discrete([2, 2], SIGMA_PX, AMPLITUDE)],
            red: reference_spec(),
        }
    }

    /// Three to seven green signals.
    pub fn gain() -> Self {
        Self {
            class_id: ClassId::Gain,
            variant: None,
            green: vec![SignalGroup::discrete([3, 7], SIGMA_PX, AMPLITUDE)],
            red: reference_spec(),
        }
    }

    /// 8 to 20 separate green signals.
    pub fn amplified_signals() -> Self {
        Self {
            class_id: ClassId::Amplified,
            variant: Some(AmplifiedVariant::Signals),
            green: vec![SignalGroup::discrete([8, 20], SIGMA_PX, AMPLITUDE)],
            red: reference_spec(),
        }
    }

    /// One cluster of 8 to 30 members plus up to two separate signals.
    pub fn amplified_cluster() -> Self {
        Self {
            class_id: ClassId::Amplified,
            variant: Some(AmplifiedVariant::Cluster),
            green: vec![
                SignalGroup::cluster([8, 30], SIGMA_PX, CLUSTER_SPREAD_PX, AMPLITUDE),
                SignalGroup::discrete([0, 2], SIGMA_PX, AMPLITUDE),
            ],
            red: reference_spec(),
        }
    }

    /// Smallest and largest total green count this config can draw.
    pub fn green_count_range(&self) -> (u32, u32) {
        self.green.iter().fold((0, 0), |(lo, hi), g| {
            (lo + g.count[0], hi.saturating_add(g.count[1]))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.green.is_empty() {
            return Err(Error::Config(format!("{}: no green signal groups", self.class_id)));
        }
        for g in &self.green {
            g.validate()?;
        }
        self.red.validate()?;
        if self.red.count != 2 {
            return Err(Error::Config(format!(
                "{}: reference channel must carry 2 signals, got {}",
                self.class_id, self.red.count
            )));
        }
        let (lo, hi) = self.green_count_range();
        let (blo, bhi) = self.class_id.green_bounds();
        if lo < blo || hi > bhi {
            return Err(Error::Config(format!(
                "{}: green count range [{lo}, {hi}] leaves the class bounds [{blo}, {}]",
                self.class_id,
                if bhi == u32::MAX { "inf".to_string() } else { bhi.to_string() }
            )));
        }
        if self.variant.is_some() && self.class_id != ClassId::Amplified {
            return Err(Error::Config(format!(
                "{}: variants only apply to the amplified class",
                self.class_id
            )));
        }
        Ok(())
    }
}

pub const SIGMA_PX: f64 = 1.5;
pub const CLUSTER_SPREAD_PX: f64 = 3.0;
pub const AMPLITUDE: [f64; 2] = [0.6, 1.0];

fn reference_spec() -> SignalSpec {
    SignalSpec::discrete(2, SIGMA_PX, AMPLITUDE)
}

/// Elastic warp settings applied to both signal channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpConfig {
    pub max_disp_px: f64,
    pub grid_step_px: usize,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self {
            max_disp_px: 1.5,
            grid_step_px: 16,
        }
    }
}

/// Where nucleus backgrounds come from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NucleusSource {
    #[default]
    Procedural,
    /// Directory of grayscale PNG masks (nonzero = nucleus), patch-sized.
    Directory { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub normal: usize,
    pub gain: usize,
    pub amplified: usize,
}

impl ClassCounts {
    pub fn uniform(n: usize) -> Self {
        Self {
            normal: n,
            gain: n,
            amplified: n,
        }
    }

    pub fn get(&self, c: ClassId) -> usize {
        match c {
            ClassId::Normal => self.normal,
            ClassId::Gain => self.gain,
            ClassId::Amplified => self.amplified,
        }
    }

    pub fn total(&self) -> usize {
        self.normal + self.gain + self.amplified
    }
}

/// Full description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    #[serde(default = "default_patch_size")]
    pub patch_size: usize,
    pub counts: ClassCounts,
    #[serde(default)]
    pub seed: u64,
    pub classes: Vec<ClassConfig>,
    #[serde(default)]
    pub warp: WarpConfig,
    #[serde(default)]
    pub nucleus: NucleusSource,
}

fn default_patch_size() -> usize {
    64
}

impl GenerationSpec {
    /// The default three-class setup with `per_class` patches each.
    pub fn demo(per_class: usize, seed: u64) -> Self {
        Self {
            patch_size: default_patch_size(),
            counts: ClassCounts::uniform(per_class),
            seed,
            classes: vec![
                ClassConfig::normal(),
                ClassConfig::gain(),
                ClassConfig::amplified_signals(),
                ClassConfig::amplified_cluster(),
            ],
            warp: WarpConfig::default(),
            nucleus: NucleusSource::Procedural,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < super::nucleus::MIN_SIZE {
            return Err(Error::Config(format!(
                "patch_size must be at least {}, got {}",
                super::nucleus::MIN_SIZE,
                self.patch_size
            )));
        }
        if !(self.warp.max_disp_px >= 0.0 && self.warp.max_disp_px.is_finite()) {
            return Err(Error::Config("warp.max_disp_px must be nonnegative".into()));
        }
        if self.warp.grid_step_px == 0 {
            return Err(Error::Config("warp.grid_step_px must be positive".into()));
        }
        for c in &self.classes {
            c.validate()?;
        }
        for class in ClassId::ALL {
            if self.counts.get(class) == 0 {
                return Err(Error::Config(format!("count for {class} must be at least 1")));
            }
            if !self.classes.iter().any(|c| c.class_id == class) {
                return Err(Error::Config(format!("no configuration for class {class}")));
            }
        }
        Ok(())
    }

    /// Reads and validates a spec file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Configs for one class in declaration order.
    pub fn configs_for(&self, class: ClassId) -> Vec<&ClassConfig> {
        self.classes.iter().filter(|c| c.class_id == class).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_boundaries() {
        assert_eq!(ClassId::from_green_count(1), None);
        assert_eq!(ClassId::from_green_count(2), Some(ClassId::Normal));
        assert_eq!(ClassId::from_green_count(3), Some(ClassId::Gain));
        assert_eq!(ClassId::from_green_count(7), Some(ClassId::Gain));
        assert_eq!(ClassId::from_green_count(8), Some(ClassId::Amplified));
        assert_eq!(ClassId::from_green_count(40), Some(ClassId::Amplified));
    }

    #[test]
    fn default_configs_validate() {
        GenerationSpec::demo(1, 0).validate().unwrap();
    }

    #[test]
    fn inconsistent_configs_rejected() {
        let mut c = ClassConfig::gain();
        c.green[0].count = [2, 7];
        assert!(c.validate().is_err());

        let mut c = ClassConfig::amplified_cluster();
        c.green[0].count = [1, 30];
        assert!(c.validate().is_err());

        let mut c = ClassConfig::normal();
        c.red.amplitude_range = [0.9, 0.5];
        assert!(c.validate().is_err());

        let mut s = GenerationSpec::demo(1, 0);
        s.classes.retain(|c| c.class_id != ClassId::Gain);
        assert!(s.validate().is_err());

        let mut s = GenerationSpec::demo(1, 0);
        s.counts.gain = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn class_id_serde() {
        assert_eq!(serde_json::to_string(&ClassId::Gain).unwrap(), "1");
        let c: ClassId = serde_json::from_str("\"Amplified\"").unwrap();
        assert_eq!(c, ClassId::Amplified);
        let c: ClassId = serde_json::from_str("0").unwrap();
        assert_eq!(c, ClassId::Normal);
        assert!(serde_json::from_str::<ClassId>("3").is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = GenerationSpec::demo(5, 9);
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: GenerationSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
