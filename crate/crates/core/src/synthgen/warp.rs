//! Non-affine elastic warp of a signal channel.

use rand::Rng as _;

use crate::patch::Grid;
use crate::seed::Rng;

/// Elastic warp by a random smooth displacement field.
///
/// Control points every `grid_step_px` pixels carry displacements drawn
/// uniformly from `[-max_disp_px, max_disp_px]` per axis. The field is
/// interpolated with smoothstep weights (C1 across cells), its length capped
/// at `max_disp_px`, and the output samples the input at `p + d(p)` with
/// bilinear interpolation. `max_disp_px == 0` returns the input unchanged.
pub fn warp_signals(channel: &Grid, rng: &mut Rng, max_disp_px: f64, grid_step_px: usize) -> Grid {
    if max_disp_px <= 0.0 {
        return channel.clone();
    }
    let step = grid_step_px.max(1);
    let (w, h) = (channel.width(), channel.height());
    let nx = (w.saturating_sub(1)).div_ceil(step) + 1;
    let ny = (h.saturating_sub(1)).div_ceil(step) + 1;
    let nodes: Vec<(f64, f64)> = (0..nx * ny)
        .map(|_| {
            (
                rng.random_range(-max_disp_px..=max_disp_px),
                rng.random_range(-max_disp_px..=max_disp_px),
            )
        })
        .collect();
    let node = |i: usize, j: usize| nodes[j.min(ny - 1) * nx + i.min(nx - 1)];

    let mut out = Grid::zeros(w, h);
    for y in 0..h {
        let gy = y as f64 / step as f64;
        let j = gy.floor() as usize;
        let ty = smoothstep(gy - j as f64);
        for x in 0..w {
            let gx = x as f64 / step as f64;
            let i = gx.floor() as usize;
            let tx = smoothstep(gx - i as f64);
            let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1));
            let mut dx = lerp(lerp(a.0, b.0, tx), lerp(c.0, d.0, tx), ty);
            let mut dy = lerp(lerp(a.1, b.1, tx), lerp(c.1, d.1, tx), ty);
            let len = dx.hypot(dy);
            if len > max_disp_px {
                let s = max_disp_px / len;
                dx *= s;
                dy *= s;
            }
            out.set(x, y, channel.sample_bilinear(x as f64 + dx, y as f64 + dy));
        }
    }
    out
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}
