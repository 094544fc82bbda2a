//! Raster types shared by every stage of the pipeline.
//!
//! [`GrayImage`] is the universal M×N real grid: it carries source images,
//! phase fields, operator outputs and fitting coefficients alike. Storage is
//! row-major, row index first, with unit mesh size.

mod io;
mod synth;

pub use io::{load_image, load_mask, save_image, save_mask};
pub use synth::{
    add_gaussian_noise, gaussian_samples, profile_i1, synth_two_phase, ShapeSpec,
    PROFILE_I1, PROFILE_I1_DEFAULT_HEIGHT,
};

use crate::error::{ensure_arg, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        ensure_arg!(
            width >= 1 && height >= 1,
            "image dimensions must be positive, got {width}x{height}"
        );
        ensure_arg!(
            data.len() == width * height,
            "data length {} does not match {width}x{height}",
            data.len()
        );
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width >= 1 && height >= 1, "empty image");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image from `f(row, col)`.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width >= 1 && height >= 1, "empty image");
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two images of equal size.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        ensure_arg!(
            self.dims() == other.dims(),
            "dimension mismatch: {}x{} vs {}x{}",
            self.width,
            self.height,
            other.width,
            other.height
        );
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest pointwise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Affinely rescales to [0,1]. A constant image is clamped instead.
    pub fn normalize(&self) -> Self {
        let (lo, hi) = (self.min(), self.max());
        if hi > lo {
            self.map(|v| (v - lo) / (hi - lo))
        } else {
            self.map(|v| v.clamp(0.0, 1.0))
        }
    }

    /// Clamps into [0,1], returning how many pixels were changed.
    pub fn clamp_unit(&self) -> (Self, usize) {
        let mut clamped = 0;
        let data = self
            .data
            .iter()
            .map(|&v| {
                let c = v.clamp(0.0, 1.0);
                if c != v {
                    clamped += 1;
                }
                c
            })
            .collect();
        (
            Self {
                width: self.width,
                height: self.height,
                data,
            },
            clamped,
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self.get(c, r))
    }

    /// Binary mask of pixels with value `>= level`.
    pub fn threshold(&self, level: f64) -> EdgeMap {
        EdgeMap {
            width: self.width,
            height: self.height,
            mask: self.data.iter().map(|&v| u8::from(v >= level)).collect(),
        }
    }
}

/// Binary per-pixel mask; values are 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    mask: Vec<u8>,
}

impl EdgeMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                mask.push(u8::from(f(r, c)));
            }
        }
        Self {
            width,
            height,
            mask,
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        ensure_arg!(
            bits.len() == width * height,
            "mask length {} does not match {width}x{height}",
            bits.len()
        );
        ensure_arg!(bits.iter().all(|&b| b <= 1), "mask values must be 0 or 1");
        Ok(Self {
            width,
            height,
            mask: bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[u8] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.mask[row * self.width + col] = u8::from(on);
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.mask.iter().map(|&b| b as usize).sum()
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.mask.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.mask.iter().zip(&other.mask).all(|(&a, &b)| a <= b)
    }

    /// Number of 8-connected components of set pixels.
    pub fn connected_components(&self) -> usize {
        let mut seen = vec![false; self.mask.len()];
        let mut stack = Vec::new();
        let mut components = 0;
        for start in 0..self.mask.len() {
            if self.mask[start] == 0 || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                let (r, c) = ((idx / self.width) as isize, (idx % self.width) as isize);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0
                            || nc < 0
                            || nr >= self.height as isize
                            || nc >= self.width as isize
                        {
                            continue;
                        }
                        let n = nr as usize * self.width + nc as usize;
                        if self.mask[n] != 0 && !seen[n] {
                            seen[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
        components
    }
}

/// Index into `0..len` of position `k` under mirror reflection about the
/// outer pixel edges (`-1 -> 0`, `len -> len - 1`). Repeats periodically with
/// period `2 * len`, so any offset is valid.
#[inline]
pub fn mirror_index(k: isize, len: usize) -> usize {
    let n = len as isize;
    let m = k.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// An image extended by a mirrored halo of `halo` pixels on every side.
#[derive(Clone, Debug)]
pub struct PaddedImage {
    core: GrayImage,
    halo: usize,
    stride: usize,
    data: Vec<f64>,
}

impl PaddedImage {
    pub fn core(&self) -> &GrayImage {
        &self.core
    }

    pub fn halo(&self) -> usize {
        self.halo
    }

    pub fn padded_width(&self) -> usize {
        self.stride
    }

    pub fn padded_height(&self) -> usize {
        self.core.height + 2 * self.halo
    }

    /// Value at core coordinates, which may lie up to `halo` outside the core.
    #[inline]
    pub fn get(&self, row: isize, col: isize) -> f64 {
        let h = self.halo as isize;
        self.data[((row + h) as usize) * self.stride + (col + h) as usize]
    }

    /// Row `row` of the padded buffer (core coordinates), halo included.
    #[inline]
    pub fn padded_row(&self, row: isize) -> &[f64] {
        let start = ((row + self.halo as isize) as usize) * self.stride;
        &self.data[start..start + self.stride]
    }

    pub(crate) fn build(img: &GrayImage, halo: usize) -> Self {
        let (w, h) = img.dims();
        let stride = w + 2 * halo;
        let mut data = Vec::with_capacity(stride * (h + 2 * halo));
        for pr in 0..h + 2 * halo {
            let r = mirror_index(pr as isize - halo as isize, h);
            for pc in 0..stride {
                let c = mirror_index(pc as isize - halo as isize, w);
                data.push(img.get(r, c));
            }
        }
        Self {
            core: img.clone(),
            halo,
            stride,
            data,
        }
    }
}

/// Pads with a mirrored (zero normal difference) halo of `width` pixels.
pub fn pad_neumann(img: &GrayImage, width: usize) -> Result<PaddedImage> {
    ensure_arg!(
        width <= img.width.min(img.height),
        "pad width {width} exceeds the smaller image dimension {}",
        img.width.min(img.height)
    );
    Ok(PaddedImage::build(img, width))
}
