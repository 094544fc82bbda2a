//! Nonlocal Laplacian edge detection.
//!
//! The operator averages symmetric second differences over a disk of radius
//! `delta` pixels, weighted by a fractional power kernel. Its pixel stencil
//! is a table of quadrature weights `c[p][q]` (see [`CoeffTable`]); edges
//! are the pixels where the operator response reaches a small positive
//! threshold.

mod coefficients;
mod operator;

pub use coefficients::{compute_coefficients, CoeffCache, CoeffTable, COEFF_TOLERANCE, DEFAULT_QUAD_LEVEL};
pub use operator::{apply_nonlocal_laplacian, detect_edges, detect_edges_with_table};

use std::f64::consts::PI;

use crate::error::{ensure_arg, Error, Result};
use crate::quadrature::{gauss_legendre_8, NeumaierSum};

/// Interaction radius and exponent of the fractional power kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    delta: usize,
    alpha: f64,
}

impl KernelSpec {
    pub fn new(delta: usize, alpha: f64) -> Result<Self> {
        ensure_arg!(delta >= 1, "interaction radius must be >= 1");
        ensure_arg!(
            (0.0..4.0).contains(&alpha),
            "kernel exponent must lie in [0, 4), got {alpha}"
        );
        if !(3..=8).contains(&delta) {
            log::debug!("interaction radius {delta} is outside the usual 3..=8 range");
        }
        Ok(Self { delta, alpha })
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Normalization constant: rho(r) = scale * r^-alpha on (0, delta].
    pub(crate) fn scale(&self) -> f64 {
        2.0 * (4.0 - self.alpha) / (PI * (self.delta as f64).powf(4.0 - self.alpha))
    }
}

/// Fractional power kernel `2(4-a) / (pi d^(4-a) r^a)` on `(0, d]`, zero beyond.
///
/// `r == 0` is the singular point and is refused.
pub fn kernel_rho(r: f64, spec: &KernelSpec) -> Result<f64> {
    if r == 0.0 {
        return Err(Error::Argument(
            "kernel evaluated at the singular point r = 0".into(),
        ));
    }
    if r < 0.0 || r > spec.delta as f64 {
        return Ok(0.0);
    }
    Ok(spec.scale() * r.powf(-spec.alpha))
}

/// Second moment of the kernel over the full disk, by graded radial
/// Gauss-Legendre quadrature. Equals 4 for every admissible kernel.
pub fn second_moment(spec: &KernelSpec) -> f64 {
    // Angular symmetry reduces the disk integral to 2*pi * int r^3 rho dr.
    // Panels halve towards the origin to resolve r^(3 - alpha).
    let delta = spec.delta as f64;
    let mut acc = NeumaierSum::default();
    let mut hi = delta;
    for _ in 0..64 {
        let lo = 0.5 * hi;
        gauss_legendre_8(lo, hi, |r, w| {
            acc.add(w * r.powi(3) * spec.scale() * r.powf(-spec.alpha))
        });
        hi = lo;
    }
    // closed-form remainder on [0, hi]
    acc.add(spec.scale() * hi.powf(4.0 - spec.alpha) / (4.0 - spec.alpha));
    2.0 * PI * acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::new(0, 1.0).is_err());
        assert!(KernelSpec::new(3, 4.0).is_err());
        assert!(KernelSpec::new(3, -0.1).is_err());
        assert!(KernelSpec::new(3, 3.99).is_ok());
    }

    #[test]
    fn rho_values() {
        let s = KernelSpec::new(1, 0.0).unwrap();
        assert!((kernel_rho(0.5, &s).unwrap() - 8.0 / PI).abs() < 1e-15);
        assert_eq!(kernel_rho(1.5, &s).unwrap(), 0.0);
        assert!(kernel_rho(0.0, &s).unwrap_err().is_argument());
        let s = KernelSpec::new(4, 1.0).unwrap();
        assert_eq!(kernel_rho(4.0001, &s).unwrap(), 0.0);
        assert!(kernel_rho(4.0, &s).unwrap() > 0.0);
    }

    #[test]
    fn moment_is_four() {
        for delta in 1..=8 {
            for alpha in [0.0, 0.5, 1.0, 2.0, 3.0, 3.5] {
                let m = second_moment(&KernelSpec::new(delta, alpha).unwrap());
                assert!((m - 4.0).abs() < 1e-10, "delta={delta} alpha={alpha}: {m}");
            }
        }
    }
}
