use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustdct::{DctPlanner, TransformType2And3};

use super::phi::{phi0, phi1, phi2};
use super::SolverParams;
use crate::error::{ensure_arg, Result};
use crate::raster::GrayImage;

/// Diagonalization of `L_h = -2 eps D_h + S` by the 2D even cosine transform.
///
/// `D_h` is the five-point Laplacian with mirrored ghost cells, whose
/// eigenvalues along an axis of length `n` are `-4 sin^2(k pi / 2n)`,
/// `k = 0..n`. Spectral arrays are row-major with the row frequency first,
/// like the images they come from. The plan also caches the phi-function
/// weights for its time step.
pub struct SpectralPlan {
    width: usize,
    height: usize,
    epsilon: f64,
    stabilizer: f64,
    dt: f64,
    eigenvalues: Vec<f64>,
    phi0: Vec<f64>,
    dt_phi1: Vec<f64>,
    dt_phi2: Vec<f64>,
    row_dct: Arc<dyn TransformType2And3<f64>>,
    col_dct: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("epsilon", &self.epsilon)
            .field("stabilizer", &self.stabilizer)
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut dst = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
    dst
}

enum Kind {
    Forward,
    Inverse,
}

fn lines(buf: &mut [f64], len: usize, dct: &Arc<dyn TransformType2And3<f64>>, kind: &Kind) {
    let scratch_len = dct.get_scratch_len();
    buf.par_chunks_mut(len)
        .for_each_init(|| vec![0.0; scratch_len], |scratch, line| match kind {
            Kind::Forward => dct.process_dct2_with_scratch(line, scratch),
            Kind::Inverse => dct.process_dct3_with_scratch(line, scratch),
        });
}

impl SpectralPlan {
    pub fn new(width: usize, height: usize, params: &SolverParams) -> Result<Self> {
        ensure_arg!(width >= 1 && height >= 1, "plan dimensions must be positive");
        params.validate()?;
        let mut planner = DctPlanner::new();
        let row_dct = planner.plan_dct2(width);
        let col_dct = planner.plan_dct2(height);

        let axis = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let s = (k as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin();
                    8.0 * params.epsilon * s * s
                })
                .collect()
        };
        let (ax, ay) = (axis(width), axis(height));
        let mut eigenvalues = Vec::with_capacity(width * height);
        for y in &ay {
            eigenvalues.extend(ax.iter().map(|x| x + y + params.stabilizer));
        }
        let dt = params.dt;
        Ok(Self {
            width,
            height,
            epsilon: params.epsilon,
            stabilizer: params.stabilizer,
            dt,
            phi0: eigenvalues.iter().map(|&l| phi0(l * dt)).collect(),
            dt_phi1: eigenvalues.iter().map(|&l| dt * phi1(l * dt)).collect(),
            dt_phi2: eigenvalues.iter().map(|&l| dt * phi2(l * dt)).collect(),
            eigenvalues,
            row_dct,
            col_dct,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stabilizer(&self) -> f64 {
        self.stabilizer
    }

    /// Eigenvalue of mode `(row frequency l, column frequency k)`.
    pub fn eigenvalue(&self, l: usize, k: usize) -> f64 {
        self.eigenvalues[l * self.width + k]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub(crate) fn phi0_weights(&self) -> &[f64] {
        &self.phi0
    }

    pub(crate) fn dt_phi1_weights(&self) -> &[f64] {
        &self.dt_phi1
    }

    pub(crate) fn dt_phi2_weights(&self) -> &[f64] {
        &self.dt_phi2
    }

    /// True if the plan was built for these dimensions and parameters.
    pub fn matches(&self, width: usize, height: usize, params: &SolverParams) -> bool {
        self.width == width
            && self.height == height
            && self.epsilon == params.epsilon
            && self.stabilizer == params.stabilizer
            && self.dt == params.dt
    }

    pub(crate) fn check(&self, field: &GrayImage, params: &SolverParams) -> Result<()> {
        ensure_arg!(
            self.matches(field.width(), field.height(), params),
            "spectral plan {self:?} does not match a {}x{} field with the given parameters",
            field.width(),
            field.height()
        );
        Ok(())
    }

    /// Unnormalized 2D DCT-II.
    pub fn forward(&self, data: &[f64]) -> Vec<f64> {
        assert_eq!(data.len(), self.width * self.height);
        let mut buf = data.to_vec();
        lines(&mut buf, self.width, &self.row_dct, &Kind::Forward);
        let mut t = transpose(&buf, self.height, self.width);
        lines(&mut t, self.height, &self.col_dct, &Kind::Forward);
        transpose(&t, self.width, self.height)
    }

    /// Exact inverse of [`SpectralPlan::forward`] (scaled DCT-III).
    pub fn inverse(&self, spectrum: &[f64]) -> Vec<f64> {
        assert_eq!(spectrum.len(), self.width * self.height);
        let mut t = transpose(spectrum, self.height, self.width);
        lines(&mut t, self.height, &self.col_dct, &Kind::Inverse);
        let mut buf = transpose(&t, self.width, self.height);
        lines(&mut buf, self.width, &self.row_dct, &Kind::Inverse);
        let scale = 4.0 / (self.width * self.height) as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    /// Applies `g(eigenvalue)` as a spectral multiplier.
    pub fn apply_function(&self, field: &GrayImage, g: impl Fn(f64) -> f64 + Sync) -> Result<GrayImage> {
        ensure_arg!(
            field.dims() == (self.width, self.height),
            "field is {}x{}, plan is {}x{}",
            field.width(),
            field.height(),
            self.width,
            self.height
        );
        let mut spec = self.forward(field.data());
        spec.par_iter_mut()
            .zip(self.eigenvalues.par_iter())
            .for_each(|(v, &l)| *v *= g(l));
        GrayImage::new(self.width, self.height, self.inverse(&spec))
    }

    /// `L_h` applied through the transform.
    pub fn apply_linear(&self, field: &GrayImage) -> Result<GrayImage> {
        self.apply_function(field, |l| l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SolverParams {
        let mut p = SolverParams::new(0.3, 1.0, 1.0);
        p.stabilizer = 2.5;
        p
    }

    #[test]
    fn constant_mode_is_stabilizer() {
        let plan = SpectralPlan::new(7, 5, &params()).unwrap();
        assert_eq!(plan.eigenvalue(0, 0), 2.5);
        assert!(plan.eigenvalues().iter().all(|&l| l >= 2.5));
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (w, h) in [(8, 8), (13, 9), (1, 6), (64, 33)] {
            let plan = SpectralPlan::new(w, h, &params()).unwrap();
            let data: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
            let back = plan.inverse(&plan.forward(&data));
            let err = data.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{w}x{h}: {err}");
        }
    }

    #[test]
    fn plan_mismatch_is_rejected() {
        let p = params();
        let plan = SpectralPlan::new(4, 4, &p).unwrap();
        assert!(plan.check(&GrayImage::filled(4, 5, 0.0), &p).is_err());
        let mut q = p;
        q.dt *= 2.0;
        assert!(plan.check(&GrayImage::filled(4, 4, 0.0), &q).is_err());
        assert!(plan.check(&GrayImage::filled(4, 4, 0.0), &p).is_ok());
    }
}
