//! Classical gradient and second-derivative edge detectors used as
//! comparison baselines: Roberts, Prewitt, Sobel, Laplacian of Gaussian and
//! Canny. All stencils see a mirrored boundary.

use std::f64::consts::PI;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{ensure_arg, Error, Result};
use crate::raster::{EdgeMap, GrayImage, PaddedImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientOperator {
    Roberts,
    Prewitt,
    Sobel,
}

impl FromStr for GradientOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "roberts" => Ok(Self::Roberts),
            "prewitt" => Ok(Self::Prewitt),
            "sobel" => Ok(Self::Sobel),
            other => Err(Error::Argument(format!("unknown gradient operator '{other}'"))),
        }
    }
}

/// Baseline detector and its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaselineSpec {
    Gradient { operator: GradientOperator, threshold: f64 },
    LaplacianOfGaussian { varsigma: f64, zero_tol: f64 },
    Canny { low: f64, high: f64, varsigma: f64 },
}

impl BaselineSpec {
    pub fn detect(&self, img: &GrayImage) -> Result<EdgeMap> {
        match *self {
            BaselineSpec::Gradient {
                operator,
                threshold,
            } => gradient_detect(img, operator, threshold),
            BaselineSpec::LaplacianOfGaussian { varsigma, zero_tol } => {
                log_detect(img, varsigma, zero_tol)
            }
            BaselineSpec::Canny {
                low,
                high,
                varsigma,
            } => canny_detect(img, low, high, varsigma),
        }
    }
}

/// Row-parallel evaluation of `f(padded, row, col)` over the image.
fn map_pixels<F>(padded: &PaddedImage, f: F) -> GrayImage
where
    F: Fn(&PaddedImage, isize, isize) -> f64 + Sync,
{
    let (w, h) = padded.core().dims();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = f(padded, r as isize, c as isize);
        }
    });
    GrayImage::new(w, h, out).expect("dimensions preserved")
}

fn gradient_components(img: &GrayImage, op: GradientOperator) -> (GrayImage, GrayImage) {
    let p = PaddedImage::build(img, 1);
    match op {
        GradientOperator::Roberts => (
            map_pixels(&p, |p, r, c| p.get(r, c) - p.get(r + 1, c + 1)),
            map_pixels(&p, |p, r, c| p.get(r + 1, c) - p.get(r, c + 1)),
        ),
        GradientOperator::Prewitt | GradientOperator::Sobel => {
            let mid = if op == GradientOperator::Sobel { 2.0 } else { 1.0 };
            let gx = map_pixels(&p, |p, r, c| {
                (p.get(r - 1, c + 1) - p.get(r - 1, c - 1))
                    + mid * (p.get(r, c + 1) - p.get(r, c - 1))
                    + (p.get(r + 1, c + 1) - p.get(r + 1, c - 1))
            });
            let gy = map_pixels(&p, |p, r, c| {
                (p.get(r + 1, c - 1) - p.get(r - 1, c - 1))
                    + mid * (p.get(r + 1, c) - p.get(r - 1, c))
                    + (p.get(r + 1, c + 1) - p.get(r - 1, c + 1))
            });
            (gx, gy)
        }
    }
}

/// Euclidean norm of the two directional responses.
pub fn gradient_magnitude(img: &GrayImage, op: GradientOperator) -> GrayImage {
    let (gx, gy) = gradient_components(img, op);
    gx.zip_map(&gy, f64::hypot).expect("same dims")
}

pub fn gradient_detect(img: &GrayImage, op: GradientOperator, threshold: f64) -> Result<EdgeMap> {
    ensure_arg!(threshold >= 0.0, "threshold must be >= 0, got {threshold}");
    Ok(gradient_magnitude(img, op).threshold(threshold))
}

/// The Laplacian of a Gaussian of width `varsigma`, evaluated at `(x, y)`.
pub fn log_value(x: f64, y: f64, varsigma: f64) -> f64 {
    let s2 = varsigma * varsigma;
    let q = (x * x + y * y) / (2.0 * s2);
    -1.0 / (PI * s2 * s2) * (1.0 - q) * (-q).exp()
}

/// Sampled LoG kernel truncated at radius `ceil(4 varsigma)`, shifted to zero
/// mean so that flat regions give no response.
pub fn log_kernel(varsigma: f64) -> (usize, Vec<f64>) {
    let radius = (4.0 * varsigma).ceil() as usize;
    let n = 2 * radius + 1;
    let mut k: Vec<f64> = (0..n * n)
        .map(|i| {
            let (dy, dx) = ((i / n) as f64 - radius as f64, (i % n) as f64 - radius as f64);
            log_value(dx, dy, varsigma)
        })
        .collect();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    (radius, k)
}

/// Convolution with the LoG kernel, evaluated in difference form
/// `sum k_s (I[x+s] - I[x])` so constant regions give exactly zero.
pub fn log_response(img: &GrayImage, varsigma: f64) -> GrayImage {
    let (radius, kernel) = log_kernel(varsigma);
    let p = PaddedImage::build(img, radius);
    let n = 2 * radius + 1;
    let rad = radius as isize;
    map_pixels(&p, |p, r, c| {
        let v = p.get(r, c);
        let mut acc = 0.0;
        for (i, &k) in kernel.iter().enumerate() {
            let (dy, dx) = ((i / n) as isize - rad, (i % n) as isize - rad);
            acc += k * (p.get(r + dy, c + dx) - v);
        }
        acc
    })
}

/// LoG zero crossings: a pixel is marked when its response changes sign
/// against its right or lower neighbour with a jump of at least `zero_tol`;
/// the member of the pair closer to zero is marked.
pub fn log_detect(img: &GrayImage, varsigma: f64, zero_tol: f64) -> Result<EdgeMap> {
    ensure_arg!(varsigma > 0.0, "Gaussian width must be positive");
    ensure_arg!(zero_tol >= 0.0, "zero-crossing tolerance must be >= 0");
    let resp = log_response(img, varsigma);
    let (w, h) = img.dims();
    let mut mask = EdgeMap::zeros(w, h);
    for r in 0..h {
        for c in 0..w {
            let a = resp.get(r, c);
            for (nr, nc) in [(r, c + 1), (r + 1, c)] {
                if nr >= h || nc >= w {
                    continue;
                }
                let b = resp.get(nr, nc);
                if a * b < 0.0 && (a - b).abs() >= zero_tol {
                    if a.abs() <= b.abs() {
                        mask.set(r, c, true);
                    } else {
                        mask.set(nr, nc, true);
                    }
                }
            }
        }
    }
    Ok(mask)
}

/// Separable Gaussian blur, kernel radius `ceil(4 varsigma)`, normalized.
pub fn gaussian_blur(img: &GrayImage, varsigma: f64) -> GrayImage {
    let radius = (4.0 * varsigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * varsigma * varsigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);

    let p = PaddedImage::build(img, radius as usize);
    let horizontal = map_pixels(&p, |p, r, c| {
        k.iter()
            .zip(-radius..=radius)
            .map(|(&w, d)| w * p.get(r, c + d))
            .sum()
    });
    let p = PaddedImage::build(&horizontal, radius as usize);
    map_pixels(&p, |p, r, c| {
        k.iter()
            .zip(-radius..=radius)
            .map(|(&w, d)| w * p.get(r + d, c))
            .sum()
    })
}

/// Gradient magnitude after Gaussian smoothing and non-maximum suppression
/// along the gradient direction quantized to 4 directions; suppressed pixels
/// are 0.
pub fn canny_suppressed(img: &GrayImage, varsigma: f64) -> Result<GrayImage> {
    ensure_arg!(varsigma > 0.0, "Gaussian width must be positive");
    let smooth = gaussian_blur(img, varsigma);
    let (gx, gy) = gradient_components(&smooth, GradientOperator::Sobel);
    let mag = gx.zip_map(&gy, f64::hypot)?;
    let (w, h) = img.dims();

    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            0.0
        } else {
            mag.get(r as usize, c as usize)
        }
    };
    // Thin: keep local maxima across the edge. The asymmetric comparison
    // (>= one side, > the other) keeps exactly one pixel of a tied pair.
    let mut thin = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let m = mag.get(r, c);
            if m == 0.0 {
                continue;
            }
            let angle = gy.get(r, c).atan2(gx.get(r, c)).to_degrees().rem_euclid(180.0);
            let (dr, dc) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let (ri, ci) = (r as isize, c as isize);
            if m >= at(ri - dr, ci - dc) && m > at(ri + dr, ci + dc) {
                thin[r * w + c] = m;
            }
        }
    }
    GrayImage::new(w, h, thin)
}

/// Canny detector: [`canny_suppressed`] followed by hysteresis (pixels
/// `>= high` seed, pixels `>= low` 8-connected to a seed are kept).
pub fn canny_detect(img: &GrayImage, low: f64, high: f64, varsigma: f64) -> Result<EdgeMap> {
    ensure_arg!(0.0 <= low && low <= high, "need 0 <= low <= high, got {low}, {high}");
    let thin = canny_suppressed(img, varsigma)?;
    let (w, h) = thin.dims();
    let thin = thin.data();
    let mut mask = EdgeMap::zeros(w, h);
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] >= high && thin[i] > 0.0).collect();
    for &i in &stack {
        mask.set(i / w, i % w, true);
    }
    while let Some(i) = stack.pop() {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                let v = thin[nr * w + nc];
                if v > 0.0 && v >= low && !mask.get(nr, nc) {
                    mask.set(nr, nc, true);
                    stack.push(nr * w + nc);
                }
            }
        }
    }
    Ok(mask)
}
