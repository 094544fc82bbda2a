use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EdgeMap, GrayImage};
use crate::error::{ensure_arg, Error, Result};

/// Row profile with a weak edge, a noise point, a jump edge and a stair edge.
pub const PROFILE_I1: [f64; 24] = [
    0.5, 0.5, 0.45, 0.45, // weak edge
    0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, 0.0, // noise point
    0.2, 0.5, 0.2, 0.2, // jump edge
    0.0, 0.0, 0.0, 0.0, 0.7, 0.7, 0.7, 0.7, // stair edge
];

pub const PROFILE_I1_DEFAULT_HEIGHT: usize = 32;

/// [`PROFILE_I1`] replicated over `height` identical rows.
pub fn profile_i1(height: usize) -> GrayImage {
    GrayImage::from_fn(PROFILE_I1.len(), height.max(1), |_, c| PROFILE_I1[c])
}

/// Draws `len` Gaussian samples from a ChaCha8 stream seeded with `seed`.
/// This is the exact stream [`add_gaussian_noise`] adds, pixel by pixel.
pub fn gaussian_samples(len: usize, mean: f64, std: f64, seed: u64) -> Result<Vec<f64>> {
    ensure_arg!(std >= 0.0 && std.is_finite(), "noise std must be >= 0, got {std}");
    let normal = Normal::new(mean, std).map_err(|e| Error::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..len).map(|_| normal.sample(&mut rng)).collect())
}

/// Adds seeded i.i.d. Gaussian noise and clamps the result to [0,1].
pub fn add_gaussian_noise(img: &GrayImage, mean: f64, std: f64, seed: u64) -> Result<GrayImage> {
    let noise = gaussian_samples(img.len(), mean, std, seed)?;
    let data = img
        .data()
        .iter()
        .zip(noise)
        .map(|(&v, n)| (v + n).clamp(0.0, 1.0))
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// Foreground geometry for [`synth_two_phase`]. Coordinates are pixel
/// centres: `x` is the column, `y` the row.
#[derive(Clone, Debug, PartialEq)]
pub enum ShapeSpec {
    Disk { cx: f64, cy: f64, radius: f64 },
    Rectangle { top: usize, left: usize, height: usize, width: usize },
    MultiBlob(Vec<(f64, f64, f64)>),
}

impl ShapeSpec {
    pub fn centered_disk(width: usize, height: usize, radius: f64) -> Self {
        ShapeSpec::Disk {
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            radius,
        }
    }

    fn check_disk(cx: f64, cy: f64, radius: f64, width: usize, height: usize) -> Result<()> {
        ensure_arg!(radius >= 0.0, "disk radius must be >= 0, got {radius}");
        let (w, h) = (width as f64 - 1.0, height as f64 - 1.0);
        ensure_arg!(
            cx - radius >= 0.0 && cx + radius <= w && cy - radius >= 0.0 && cy + radius <= h,
            "disk at ({cx}, {cy}) with radius {radius} exceeds the {width}x{height} canvas"
        );
        Ok(())
    }

    fn validate(&self, width: usize, height: usize) -> Result<()> {
        match self {
            ShapeSpec::Disk { cx, cy, radius } => Self::check_disk(*cx, *cy, *radius, width, height),
            ShapeSpec::Rectangle {
                top,
                left,
                height: rh,
                width: rw,
            } => {
                ensure_arg!(
                    top + rh <= height && left + rw <= width,
                    "rectangle exceeds the {width}x{height} canvas"
                );
                Ok(())
            }
            ShapeSpec::MultiBlob(blobs) => blobs
                .iter()
                .try_for_each(|&(cx, cy, r)| Self::check_disk(cx, cy, r, width, height)),
        }
    }

    fn contains(&self, row: usize, col: usize) -> bool {
        let in_disk = |cx: f64, cy: f64, r: f64| {
            let (dx, dy) = (col as f64 - cx, row as f64 - cy);
            dx * dx + dy * dy < r * r
        };
        match self {
            ShapeSpec::Disk { cx, cy, radius } => in_disk(*cx, *cy, *radius),
            ShapeSpec::Rectangle {
                top,
                left,
                height,
                width,
            } => (*top..top + height).contains(&row) && (*left..left + width).contains(&col),
            ShapeSpec::MultiBlob(blobs) => blobs.iter().any(|&(cx, cy, r)| in_disk(cx, cy, r)),
        }
    }
}

/// Binary two-phase test image (1 inside the shape) and its exact mask.
pub fn synth_two_phase(width: usize, height: usize, shape: &ShapeSpec) -> Result<(GrayImage, EdgeMap)> {
    ensure_arg!(width >= 1 && height >= 1, "canvas must be non-empty");
    shape.validate(width, height)?;
    let mask = EdgeMap::from_fn(width, height, |r, c| shape.contains(r, c));
    Ok((mask.to_image(), mask))
}
