//! Nucleus backgrounds for the blue channel.
//!
//! The procedural template is an ellipse whose boundary radius is modulated
//! by a few low-frequency harmonics, filled with a smooth sinusoidal texture
//! that falls off softly towards the edge.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::patch::Grid;
use crate::seed::Rng;

pub const MIN_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateOrigin {
    Procedural,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NucleusTemplate {
    size: usize,
    mask: Vec<bool>,
    intensity: Grid,
    origin: TemplateOrigin,
}

impl NucleusTemplate {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn origin(&self) -> &TemplateOrigin {
        &self.origin
    }

    pub fn intensity(&self) -> &Grid {
        &self.intensity
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.size && y < self.size && self.mask[y * self.size + x]
    }

    /// Whether the pixel nearest to `(x, y)` is inside the nucleus.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let (rx, ry) = (x.round(), y.round());
        rx >= 0.0 && ry >= 0.0 && self.contains(rx as usize, ry as usize)
    }

    pub fn area(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Pixels whose whole disk of radius `margin` lies inside the mask.
    pub fn eroded(&self, margin: usize) -> Vec<(usize, usize)> {
        let n = self.size;
        let m = margin as i64;
        let offsets: Vec<(i64, i64)> = (-m..=m)
            .flat_map(|dy| (-m..=m).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx * dx + dy * dy <= m * m)
            .collect();
        let mut out = Vec::new();
        for y in 0..n {
            for x in 0..n {
                if !self.mask[y * n + x] {
                    continue;
                }
                let inside = offsets.iter().all(|&(dx, dy)| {
                    let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                    xx >= 0
                        && yy >= 0
                        && (xx as usize) < n
                        && (yy as usize) < n
                        && self.mask[yy as usize * n + xx as usize]
                });
                if inside {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Number of 4-connected components in the mask.
    pub fn components(&self) -> usize {
        let n = self.size;
        let mut seen = vec![false; n * n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n * n {
            if !self.mask[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % n, i / n);
                let mut visit = |j: usize| {
                    if self.mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < n {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - n);
                }
                if y + 1 < n {
                    visit(i + n);
                }
            }
        }
        count
    }
}

struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: f64,
}

/// Procedural nucleus of `size`×`size` pixels.
pub fn make_nucleus(rng: &mut Rng, size: usize) -> Result<NucleusTemplate> {
    if size < MIN_SIZE {
        return Err(Error::Config(format!(
            "nucleus size must be at least {MIN_SIZE}, got {size}"
        )));
    }
    let s = size as f64;
    let semi_a = s * rng.random_range(0.31..0.40);
    let semi_b = semi_a * rng.random_range(0.8..1.0);
    let tilt = rng.random_range(0.0..PI);
    // Boundary harmonics k = 2..4, total relative amplitude at most 0.06.
    let harmonics: Vec<(f64, f64, f64)> = (2..=4)
        .map(|k| (k as f64, rng.random_range(0.0..0.02), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let level = rng.random_range(0.35..0.6);
    let waves: Vec<Wave> = (0..4)
        .map(|_| {
            let wavelength = rng.random_range(8.0..20.0);
            let dir = rng.random_range(0.0..2.0 * PI);
            let k = 2.0 * PI / wavelength;
            Wave {
                kx: k * dir.cos(),
                ky: k * dir.sin(),
                phase: rng.random_range(0.0..2.0 * PI),
                amp: rng.random_range(0.0..0.08),
            }
        })
        .collect();

    let c = (s - 1.0) / 2.0;
    let (sin_t, cos_t) = tilt.sin_cos();
    let mut mask = vec![false; size * size];
    let mut intensity = Grid::zeros(size, size);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            let u = (dx * cos_t + dy * sin_t) / semi_a;
            let v = (-dx * sin_t + dy * cos_t) / semi_b;
            let rho = u.hypot(v);
            let theta = v.atan2(u);
            let boundary = 1.0
                + harmonics
                    .iter()
                    .map(|&(k, a, p)| a * (k * theta + p).cos())
                    .sum::<f64>();
            let rel = rho / boundary;
            if rel > 1.0 {
                continue;
            }
            mask[y * size + x] = true;
            let texture: f64 = waves
                .iter()
                .map(|w| w.amp * (w.kx * x as f64 + w.ky * y as f64 + w.phase).sin())
                .sum();
            let edge = smoothstep(((1.0 - rel) / 0.15).clamp(0.0, 1.0));
            let value = level * (1.0 + texture) * (0.3 + 0.7 * edge);
            intensity.set(x, y, value.clamp(0.0, 1.0));
        }
    }
    Ok(NucleusTemplate {
        size,
        mask,
        intensity,
        origin: TemplateOrigin::Procedural,
    })
}

/// Template from a user mask: the mask is taken from the file, the texture
/// is synthesized as for procedural nuclei.
pub fn nucleus_from_mask(rng: &mut Rng, path: &Path, size: usize) -> Result<NucleusTemplate> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_luma8();
    if img.width() as usize != size || img.height() as usize != size {
        return Err(Error::Config(format!(
            "{}: mask is {}x{}, expected {size}x{size}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    let mask: Vec<bool> = img.pixels().map(|p| p.0[0] > 127).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::Config(format!("{}: mask is empty", path.display())));
    }
    // Reuse the procedural texture, restricted to the file's mask.
    let procedural = make_nucleus(rng, size)?;
    let level = rng.random_range(0.35..0.6);
    let mut intensity = Grid::zeros(size, size);
    for (i, &m) in mask.iter().enumerate() {
        if m {
            let base = procedural.intensity.as_slice()[i];
            let v = if base > 0.0 { base } else { level * 0.5 };
            intensity.as_mut_slice()[i] = v.clamp(0.0, 1.0);
        }
    }
    Ok(NucleusTemplate {
        size,
        mask,
        intensity,
        origin: TemplateOrigin::File(path.to_path_buf()),
    })
}

/// Sorted PNG files of a mask library directory.
pub fn list_masks(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("{}: no PNG masks found", dir.display())));
    }
    Ok(files)
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    #[test]
    fn deterministic_per_seed() {
        let a = make_nucleus(&mut rng(1), 64).unwrap();
        let b = make_nucleus(&mut rng(1), 64).unwrap();
        assert_eq!(a, b);
        let c = make_nucleus(&mut rng(2), 64).unwrap();
        assert_ne!(a.mask(), c.mask());
    }

    #[test]
    fn rejects_small_sizes() {
        assert!(matches!(make_nucleus(&mut rng(0), 31), Err(Error::Config(_))));
        assert!(make_nucleus(&mut rng(0), 32).is_ok());
    }

    #[test]
    fn template_contract_over_many_seeds() {
        for seed in 0..1000 {
            let t = make_nucleus(&mut rng(seed), 64).unwrap();
            let frac = t.area() as f64 / (64.0 * 64.0);
            assert!((0.2..=0.8).contains(&frac), "seed {seed}: area fraction {frac}");
            assert_eq!(t.components(), 1, "seed {seed}");
            for (i, &v) in t.intensity().as_slice().iter().enumerate() {
                assert!((0.0..=1.0).contains(&v));
                if !t.mask()[i] {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn erosion_shrinks_mask() {
        let t = make_nucleus(&mut rng(5), 64).unwrap();
        let e0 = t.eroded(0).len();
        let e3 = t.eroded(3).len();
        assert_eq!(e0, t.area());
        assert!(e3 < e0 && e3 > 0);
        for (x, y) in t.eroded(3) {
            assert!(t.contains(x, y));
        }
    }

    #[test]
    fn file_masks_are_used_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let img = image::GrayImage::from_fn(32, 32, |x, y| {
            let inside = (8..24).contains(&x) && (10..22).contains(&y);
            image::Luma([if inside { 255 } else { 0 }])
        });
        img.save(&path).unwrap();
        let t = nucleus_from_mask(&mut rng(1), &path, 32).unwrap();
        assert_eq!(t.area(), 16 * 12);
        assert_eq!(t.origin(), &TemplateOrigin::File(path.clone()));
        assert!(nucleus_from_mask(&mut rng(1), &path, 64).is_err());
        assert_eq!(list_masks(dir.path()).unwrap(), vec![path]);
    }
}
