//! Image containers: a single-channel [`Grid`] used while painting and the
//! three-channel [`Patch`] that leaves the generator.

use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};

use crate::error::{Error, Result};

/// RGB channel index. Red carries the reference probe, green the target
/// probe and blue the nucleus stain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Channel {
    Red = 0,
    Green = 1,
    Blue = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Red, Channel::Green, Channel::Blue];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Row-major 2D grid of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Bilinear sample at continuous pixel coordinates; zero outside.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        sample_bilinear(&self.data, self.width, self.height, x, y)
    }
}

/// Bilinear sample of a row-major plane with zero padding outside.
#[inline]
pub(crate) fn sample_bilinear<T>(plane: &[T], width: usize, height: usize, x: f64, y: f64) -> f64
where
    T: Copy + Into<f64>,
{
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let at = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= width as i64 || yi >= height as i64 {
            0.0
        } else {
            plane[yi as usize * width + xi as usize].into()
        }
    };
    // Skip zero-weight taps so integer coordinates reproduce the source
    // value exactly.
    let mut v = 0.0;
    let w00 = (1.0 - fx) * (1.0 - fy);
    if w00 != 0.0 {
        v += w00 * at(x0, y0);
    }
    let w10 = fx * (1.0 - fy);
    if w10 != 0.0 {
        v += w10 * at(x0 + 1, y0);
    }
    let w01 = (1.0 - fx) * fy;
    if w01 != 0.0 {
        v += w01 * at(x0, y0 + 1);
    }
    let w11 = fx * fy;
    if w11 != 0.0 {
        v += w11 * at(x0 + 1, y0 + 1);
    }
    v
}

/// Three-channel image with planar storage (`[channel][y][x]`), values in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Patch {
    pub const CHANNELS: usize = 3;

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * Self::CHANNELS],
        }
    }

    /// Builds a patch from three grids, clamping every value to `[0, 1]`.
    pub fn from_grids(red: &Grid, green: &Grid, blue: &Grid) -> Result<Self> {
        let (w, h) = (blue.width(), blue.height());
        for g in [red, green] {
            if g.width() != w || g.height() != h {
                return Err(Error::Shape("channel grids differ in size".into()));
            }
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for g in [red, green, blue] {
            data.extend(g.as_slice().iter().map(|&v| v.clamp(0.0, 1.0) as f32));
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    pub fn from_planar(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * Self::CHANNELS {
            return Err(Error::Shape(format!(
                "patch {width}x{height}x3 needs {} values, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, ch: Channel, x: usize, y: usize) -> f32 {
        self.data[ch.index() * self.plane_len() + y * self.width + x]
    }

    pub fn channel(&self, ch: Channel) -> &[f32] {
        let n = self.plane_len();
        &self.data[ch.index() * n..(ch.index() + 1) * n]
    }

    pub fn channel_mut(&mut self, ch: Channel) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[ch.index() * n..(ch.index() + 1) * n]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Round-trips every value through 8-bit quantization.
    pub fn quantized(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = quantize(*v) as f32 / 255.0;
        }
        out
    }

    pub fn to_rgb8(&self) -> RgbImage {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            Rgb([
                quantize(self.get(Channel::Red, x, y)),
                quantize(self.get(Channel::Green, x, y)),
                quantize(self.get(Channel::Blue, x, y)),
            ])
        })
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut p = Self::zeros(w, h);
        let n = w * h;
        for (x, y, px) in img.enumerate_pixels() {
            let i = y as usize * w + x as usize;
            for c in 0..3 {
                p.data[c * n + i] = px.0[c] as f32 / 255.0;
            }
        }
        p
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb8().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    /// Area-average downsampling by an integer factor, flattened channel
    /// major. This is the network input layout.
    pub fn downsample_flat(&self, factor: usize) -> Result<Vec<f64>> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::Shape(format!(
                "cannot downsample {}x{} by {factor}",
                self.width, self.height
            )));
        }
        let (ow, oh) = (self.width / factor, self.height / factor);
        let norm = 1.0 / (factor * factor) as f64;
        let mut out = Vec::with_capacity(ow * oh * 3);
        for ch in Channel::ALL {
            let plane = self.channel(ch);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0f64;
                    for dy in 0..factor {
                        let row = (oy * factor + dy) * self.width + ox * factor;
                        for &v in &plane[row..row + factor] {
                            acc += v as f64;
                        }
                    }
                    out.push(acc * norm);
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
