use rand_distr::{Distribution, Normal};

use super::TransformSpec;
use crate::patch::{sample_bilinear, Channel, Patch};
use crate::seed::Rng;

/// Applies `t` in the fixed order rotation, flips, scale, blur, intensity,
/// noise, gradient, then clamps to `[0, 1]`.
pub fn apply(t: &TransformSpec, patch: &Patch, rng: &mut Rng) -> Patch {
    let mut out = patch.clone();
    if t.rotation_deg != 0.0 {
        out = rotate(&out, t.rotation_deg);
    }
    if t.flip_h {
        flip_h(&mut out);
    }
    if t.flip_v {
        flip_v(&mut out);
    }
    if t.scale != 1.0 {
        out = scale_about_center(&out, t.scale);
    }
    if t.blur_sigma_px > 0.0 {
        out = gaussian_blur(&out, t.blur_sigma_px);
    }
    if t.intensity_scale != [1.0; 3] {
        for ch in Channel::ALL {
            let s = t.intensity_scale[ch.index()] as f32;
            out.channel_mut(ch).iter_mut().for_each(|v| *v *= s);
        }
    }
    if t.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, t.noise_sigma).expect("noise sigma is finite");
        for v in out.as_mut_slice() {
            *v += noise.sample(rng) as f32;
        }
    }
    if t.gradient.amplitude > 0.0 {
        add_gradient(&mut out, t.gradient.direction_deg, t.gradient.amplitude);
    }
    out.clamp_unit();
    out
}

/// Resamples every channel at `src(x, y)` with bilinear interpolation.
fn resample(patch: &Patch, src: impl Fn(f64, f64) -> (f64, f64)) -> Patch {
    let (w, h) = (patch.width(), patch.height());
    let mut out = Patch::zeros(w, h);
    let coords: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x as f64, y as f64)))
        .map(|(x, y)| src(x, y))
        .collect();
    for ch in Channel::ALL {
        let plane = patch.channel(ch);
        for (dst, &(sx, sy)) in out.channel_mut(ch).iter_mut().zip(&coords) {
            *dst = sample_bilinear(plane, w, h, sx, sy) as f32;
        }
    }
    out
}

/// Rotation about the patch center, counter-clockwise in image coordinates.
pub fn rotate(patch: &Patch, degrees: f64) -> Patch {
    let (cx, cy) = center(patch);
    let (s, c) = degrees.to_radians().sin_cos();
    resample(patch, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (c * dx + s * dy + cx, -s * dx + c * dy + cy)
    })
}

/// Center-anchored zoom; `factor > 1` crops, `factor < 1` pads with zeros.
pub fn scale_about_center(patch: &Patch, factor: f64) -> Patch {
    let (cx, cy) = center(patch);
    resample(patch, |x, y| ((x - cx) / factor + cx, (y - cy) / factor + cy))
}

fn center(patch: &Patch) -> (f64, f64) {
    (
        (patch.width() as f64 - 1.0) / 2.0,
        (patch.height() as f64 - 1.0) / 2.0,
    )
}

fn flip_h(patch: &mut Patch) {
    let w = patch.width();
    for ch in Channel::ALL {
        for row in patch.channel_mut(ch).chunks_mut(w) {
            row.reverse();
        }
    }
}

fn flip_v(patch: &mut Patch) {
    let (w, h) = (patch.width(), patch.height());
    for ch in Channel::ALL {
        let plane = patch.channel_mut(ch);
        for y in 0..h / 2 {
            let (top, bottom) = plane.split_at_mut((h - 1 - y) * w);
            top[y * w..(y + 1) * w].swap_with_slice(&mut bottom[..w]);
        }
    }
}

/// Separable Gaussian blur, radius `ceil(3 sigma)`, edges replicated.
pub fn gaussian_blur(patch: &Patch, sigma: f64) -> Patch {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let (w, h) = (patch.width() as i64, patch.height() as i64);
    let mut out = patch.clone();
    let mut tmp = vec![0.0f64; (w * h) as usize];
    for ch in Channel::ALL {
        let src = patch.channel(ch);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let xx = (x + k as i64 - radius).clamp(0, w - 1);
                    acc += kv * src[(y * w + xx) as usize] as f64;
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let dst = out.channel_mut(ch);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let yy = (y + k as i64 - radius).clamp(0, h - 1);
                    acc += kv * tmp[(yy * w + x) as usize];
                }
                dst[(y * w + x) as usize] = acc as f32;
            }
        }
    }
    out
}

/// Adds a linear ramp rising from 0 to `amplitude` along `direction_deg`,
/// identically to every channel.
fn add_gradient(patch: &mut Patch, direction_deg: f64, amplitude: f64) {
    let (w, h) = (patch.width(), patch.height());
    let (cx, cy) = center(patch);
    let (s, c) = direction_deg.to_radians().sin_cos();
    let half = c.abs() * cx + s.abs() * cy;
    if half == 0.0 {
        return;
    }
    let ramp: Vec<f32> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x as f64, y as f64)))
        .map(|(x, y)| {
            let proj = (x - cx) * c + (y - cy) * s;
            (amplitude * (proj + half) / (2.0 * half)) as f32
        })
        .collect();
    for ch in Channel::ALL {
        for (v, r) in patch.channel_mut(ch).iter_mut().zip(&ramp) {
            *v += r;
        }
    }
}
