//! Stabilized Allen-Cahn evolution by exponential time differencing.
//!
//! The semi-discrete system is `U_t + L_h U = N(U)` with
//! `L_h = -2 eps D_h + S` (five-point Laplacian, mirrored boundary) and
//! `N(U) = S U - w(U)/eps - f dirac(U - 1/2)`. `L_h` is diagonal in the
//! cosine basis, so both steppers are exact on the linear part.

mod energy;
mod phi;
mod spectral;
mod stepper;
mod transformed;

pub use energy::{dirichlet_form, discrete_energy, energy_with_fitting};
pub use phi::{phi, phi0, phi1, phi2, SERIES_SWITCH};
pub use spectral::SpectralPlan;
pub use stepper::{etd1_step, etdrk2_step, evolve_to_steady, step, ENERGY_SLACK, Evolution, RunDiagnostics, StepRecord};
pub use transformed::{transformed_equivalence_check, transformed_nonlinear_term};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{ensure_arg, Error, Result};
use crate::raster::GrayImage;

/// Time integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    Etd1,
    Etdrk2,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "etd1" => Ok(Scheme::Etd1),
            "etdrk2" => Ok(Scheme::Etdrk2),
            other => Err(Error::Argument(format!(
                "unknown scheme '{other}' (expected etd1 or etdrk2)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Etd1 => "etd1",
            Scheme::Etdrk2 => "etdrk2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub epsilon: f64,
    /// Width of the regularized Heaviside/Dirac pair, in (0, 1/2].
    pub epsilon1: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub stabilizer: f64,
    pub dt: f64,
    pub steady_tol: f64,
    pub max_steps: usize,
    /// Fail with [`Error::EnergyIncrease`] instead of only recording it.
    pub strict_energy: bool,
}

impl SolverParams {
    pub const DEFAULT_EPSILON1: f64 = 0.5;
    pub const DEFAULT_DT: f64 = 0.1;
    pub const DEFAULT_STEADY_TOL: f64 = 1e-6;
    pub const DEFAULT_MAX_STEPS: usize = 10_000;

    /// Defaults with the stabilizer set to the bound-preserving minimum.
    pub fn new(epsilon: f64, lambda1: f64, lambda2: f64) -> Self {
        let epsilon1 = Self::DEFAULT_EPSILON1;
        Self {
            epsilon,
            epsilon1,
            lambda1,
            lambda2,
            stabilizer: stabilizer_bound(epsilon, epsilon1, lambda1, lambda2),
            dt: Self::DEFAULT_DT,
            steady_tol: Self::DEFAULT_STEADY_TOL,
            max_steps: Self::DEFAULT_MAX_STEPS,
            strict_energy: false,
        }
    }

    pub fn bound(&self) -> f64 {
        stabilizer_bound(self.epsilon, self.epsilon1, self.lambda1, self.lambda2)
    }

    /// Resets the stabilizer to [`SolverParams::bound`], e.g. after changing epsilon.
    pub fn with_bound_stabilizer(mut self) -> Self {
        self.stabilizer = self.bound();
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_arg!(
            self.epsilon > 0.0 && self.epsilon.is_finite(),
            "epsilon must be positive, got {}",
            self.epsilon
        );
        ensure_arg!(
            self.epsilon1 > 0.0 && self.epsilon1 <= 0.5,
            "epsilon1 must lie in (0, 1/2], got {}",
            self.epsilon1
        );
        ensure_arg!(
            self.lambda1 >= 0.0 && self.lambda2 >= 0.0,
            "fitting weights must be nonnegative"
        );
        ensure_arg!(
            self.stabilizer >= 0.0 && self.stabilizer.is_finite(),
            "stabilizer must be finite and nonnegative, got {}",
            self.stabilizer
        );
        ensure_arg!(
            self.dt > 0.0 && self.dt.is_finite(),
            "time step must be positive, got {}",
            self.dt
        );
        ensure_arg!(self.steady_tol >= 0.0, "steady_tol must be nonnegative");
        ensure_arg!(self.max_steps >= 1, "max_steps must be at least 1");
        Ok(())
    }
}

/// Smallest stabilizer for which the schemes keep iterates in [0, 1]:
/// `2 pi^2 / eps + 2 lambda pi / eps1^2`, `lambda = max(lambda1, lambda2)`.
pub fn stabilizer_bound(epsilon: f64, epsilon1: f64, lambda1: f64, lambda2: f64) -> f64 {
    let lambda = lambda1.max(lambda2);
    2.0 * PI * PI / epsilon + 2.0 * lambda * PI / (epsilon1 * epsilon1)
}

/// Regularized Heaviside; 0 below `-eps1`, 1 above `eps1`.
pub fn heaviside_reg(u: f64, eps1: f64) -> f64 {
    if u <= -eps1 {
        0.0
    } else if u >= eps1 {
        1.0
    } else {
        (u + eps1 / PI * (PI * u / eps1).sin()) / (2.0 * eps1) + 0.5
    }
}

/// Regularized Dirac, the derivative of [`heaviside_reg`].
pub fn dirac_reg(u: f64, eps1: f64) -> f64 {
    if u.abs() > eps1 {
        0.0
    } else {
        (1.0 + (PI * u / eps1).cos()) / (2.0 * eps1)
    }
}

/// Periodic double well `W(u) = sin^2(pi u)`.
pub fn potential(u: f64) -> f64 {
    let s = (PI * u).sin();
    s * s
}

/// `w(u) = W'(u) = pi sin(2 pi u)`.
pub fn potential_derivative(u: f64) -> f64 {
    PI * (2.0 * PI * u).sin()
}

/// Chan-Vese fitting coefficient `f = lambda1 (C1 - I)^2 - lambda2 (C2 - I)^2`.
///
/// Also carries `sum lambda2 (C2 - I)^2`, which is all the energy needs
/// beyond `f` itself.
#[derive(Clone, Debug, PartialEq)]
pub struct FittingField {
    coefficient: GrayImage,
    offset: f64,
}

impl FittingField {
    pub fn new(image: &GrayImage, c1: f64, c2: f64, lambda1: f64, lambda2: f64) -> Self {
        let coefficient =
            image.map(|i| lambda1 * (c1 - i) * (c1 - i) - lambda2 * (c2 - i) * (c2 - i));
        let offset = crate::quadrature::compensated_sum(
            image.data().iter().map(|&i| lambda2 * (c2 - i) * (c2 - i)),
        );
        Self {
            coefficient,
            offset,
        }
    }

    /// Field given directly; the energy offset is taken as zero.
    pub fn from_coefficient(coefficient: GrayImage) -> Self {
        Self {
            coefficient,
            offset: 0.0,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::from_coefficient(GrayImage::filled(width, height, 0.0))
    }

    pub fn coefficient(&self) -> &GrayImage {
        &self.coefficient
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coefficient.dims()
    }
}

#[inline]
pub(crate) fn nonlinear_point(u: f64, f: f64, params: &SolverParams) -> f64 {
    params.stabilizer * u
        - potential_derivative(u) / params.epsilon
        - f * dirac_reg(u - 0.5, params.epsilon1)
}

/// `N(U) = S U - w(U)/eps - f dirac(U - 1/2)`, pointwise.
pub fn nonlinear_term(u: &GrayImage, f: &FittingField, params: &SolverParams) -> Result<GrayImage> {
    ensure_arg!(
        u.dims() == f.dims(),
        "field is {}x{} but fitting field is {}x{}",
        u.width(),
        u.height(),
        f.dims().0,
        f.dims().1
    );
    let data = u
        .data()
        .par_iter()
        .zip(f.coefficient().data().par_iter())
        .map(|(&u, &f)| nonlinear_point(u, f, params))
        .collect();
    GrayImage::new(u.width(), u.height(), data)
}
