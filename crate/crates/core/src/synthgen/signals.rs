//! Placement of probe signals inside a nucleus and their rendering as
//! isotropic 2D Gaussians.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::config::{SignalKind, SignalSpec};
use super::nucleus::NucleusTemplate;
use crate::error::{Error, Result};
use crate::patch::Grid;
use crate::seed::Rng;

/// Rejection attempts per cluster member before giving up.
const MAX_MEMBER_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One Gaussian to paint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spot {
    pub center: Point,
    pub sigma: f64,
    pub amplitude: f64,
}

/// Centers for `spec.count` signals.
///
/// Discrete signals are uniform over the mask eroded by
/// `ceil(2 * sigma_px)`. A cluster draws one anchor the same way and scatters
/// its members around it with an isotropic Gaussian, resampling any member
/// that falls outside the mask.
pub fn place_signals(
    template: &NucleusTemplate,
    spec: &SignalSpec,
    rng: &mut Rng,
) -> Result<Vec<Point>> {
    match spec.kind {
        SignalKind::Discrete => {
            let interior = interior(template, spec)?;
            Ok((0..spec.count)
                .map(|_| {
                    let (x, y) = interior[rng.random_range(0..interior.len())];
                    Point::new(x as f64, y as f64)
                })
                .collect())
        }
        SignalKind::Cluster => place_cluster(template, spec, rng).map(|(_, members)| members),
    }
}

/// Cluster placement returning `(anchor, members)`.
pub fn place_cluster(
    template: &NucleusTemplate,
    spec: &SignalSpec,
    rng: &mut Rng,
) -> Result<(Point, Vec<Point>)> {
    let interior = interior(template, spec)?;
    let (ax, ay) = interior[rng.random_range(0..interior.len())];
    let anchor = Point::new(ax as f64, ay as f64);
    if spec.cluster_spread_px == 0.0 {
        return Ok((anchor, vec![anchor; spec.count as usize]));
    }
    let offset = Normal::new(0.0, spec.cluster_spread_px)
        .map_err(|e| Error::Config(format!("cluster spread: {e}")))?;
    let mut members = Vec::with_capacity(spec.count as usize);
    for _ in 0..spec.count {
        let member = (0..MAX_MEMBER_ATTEMPTS)
            .map(|_| {
                Point::new(
                    anchor.x + offset.sample(rng),
                    anchor.y + offset.sample(rng),
                )
            })
            .find(|p| template.contains_point(p.x, p.y))
            .ok_or_else(|| {
                Error::Generation(format!(
                    "cluster member could not be placed inside the nucleus after \
                     {MAX_MEMBER_ATTEMPTS} attempts; reduce cluster_spread_px"
                ))
            })?;
        members.push(member);
    }
    Ok((anchor, members))
}

fn interior(template: &NucleusTemplate, spec: &SignalSpec) -> Result<Vec<(usize, usize)>> {
    if template.area() == 0 {
        return Err(Error::Generation("nucleus mask is empty".into()));
    }
    let interior = template.eroded(spec.erosion_margin());
    if interior.is_empty() {
        return Err(Error::Generation(format!(
            "nucleus interior is empty after eroding by {} px; retry with another \
             nucleus or reduce sigma_px",
            spec.erosion_margin()
        )));
    }
    Ok(interior)
}

/// Support radius of a rendered Gaussian.
///
/// `4 * sigma` shortened by one pixel diagonal, so that after bilinear
/// resampling with displacement `d` nothing lands farther than
/// `4 * sigma + d` from the center.
pub fn support_radius(sigma: f64) -> f64 {
    (4.0 * sigma - std::f64::consts::SQRT_2).max(0.0)
}

/// Adds the Gaussians onto a copy of `canvas` and clamps to `[0, 1]`.
///
/// Pixel `(x, y)` samples the Gaussian at its integer coordinates, so a spot
/// centered on a pixel reaches exactly its amplitude there.
pub fn render_gaussians(canvas: &Grid, spots: &[Spot]) -> Grid {
    let mut out = canvas.clone();
    let (w, h) = (out.width(), out.height());
    for spot in spots {
        let r = support_radius(spot.sigma);
        let inv = 1.0 / (2.0 * spot.sigma * spot.sigma);
        let x0 = (spot.center.x - r).floor().max(0.0) as usize;
        let y0 = (spot.center.y - r).floor().max(0.0) as usize;
        let x1 = ((spot.center.x + r).ceil().max(-1.0) as i64).min(w as i64 - 1);
        let y1 = ((spot.center.y + r).ceil().max(-1.0) as i64).min(h as i64 - 1);
        for y in y0 as i64..=y1 {
            for x in x0 as i64..=x1 {
                let dx = x as f64 - spot.center.x;
                let dy = y as f64 - spot.center.y;
                let d2 = dx * dx + dy * dy;
                if d2 > r * r {
                    continue;
                }
                let (xu, yu) = (x as usize, y as usize);
                let v = out.get(xu, yu) + spot.amplitude * (-d2 * inv).exp();
                out.set(xu, yu, v);
            }
        }
    }
    for v in out.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    out
}
