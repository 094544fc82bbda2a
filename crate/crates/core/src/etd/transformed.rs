//! The same flow written for `v = 2u - 1` in [-1, 1].
//!
//! With `I~ = 2I - 1`, `C~ = 2C - 1` the fitting coefficient becomes
//! `f~ = 4f` and the nonlinearity
//! `N~(v) = S v - (2/eps) pi sin(pi (v + 1)) - f~/2 dirac(v/2)`,
//! which equals `2 N(u) - S`. Since `L_h 1 = S 1`, ETD1 in either variable
//! produces the same iterates up to the affine map.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{dirac_reg, etd1_step, FittingField, SolverParams, SpectralPlan};
use crate::error::{ensure_arg, Result};
use crate::raster::GrayImage;

/// `N~(v)` for a fitting field already expressed in the [-1, 1] variables.
pub fn transformed_nonlinear_term(
    v: &GrayImage,
    f_tilde: &FittingField,
    params: &SolverParams,
) -> Result<GrayImage> {
    ensure_arg!(v.dims() == f_tilde.dims(), "field and fitting field dimensions differ");
    let data = v
        .data()
        .par_iter()
        .zip(f_tilde.coefficient().data().par_iter())
        .map(|(&v, &f)| {
            params.stabilizer * v
                - 2.0 / params.epsilon * PI * (PI * (v + 1.0)).sin()
                - 0.5 * f * dirac_reg(0.5 * v, params.epsilon1)
        })
        .collect();
    GrayImage::new(v.width(), v.height(), data)
}

fn transformed_etd1_step(
    v: &GrayImage,
    f_tilde: &FittingField,
    plan: &SpectralPlan,
    params: &SolverParams,
) -> Result<GrayImage> {
    let n = transformed_nonlinear_term(v, f_tilde, params)?;
    let (v_hat, n_hat) = (plan.forward(v.data()), plan.forward(n.data()));
    let next: Vec<f64> = v_hat
        .iter()
        .zip(&n_hat)
        .zip(plan.phi0_weights().iter().zip(plan.dt_phi1_weights()))
        .map(|((&v, &n), (&p0, &p1))| p0 * v + p1 * n)
        .collect();
    GrayImage::new(plan.width(), plan.height(), plan.inverse(&next))
}

/// Runs `steps` ETD1 steps in both variable sets and returns
/// `max_n |V^n - (2 U^n - 1)|_inf`.
pub fn transformed_equivalence_check(
    u0: &GrayImage,
    image: &GrayImage,
    c1: f64,
    c2: f64,
    plan: &SpectralPlan,
    params: &SolverParams,
    steps: usize,
) -> Result<f64> {
    u0.check_same_dims(image)?;
    plan.check(u0, params)?;
    let affine = |x: f64| 2.0 * x - 1.0;
    let f = FittingField::new(image, c1, c2, params.lambda1, params.lambda2);
    let f_tilde = FittingField::new(
        &image.map(affine),
        affine(c1),
        affine(c2),
        params.lambda1,
        params.lambda2,
    );
    let mut u = u0.clone();
    let mut v = u0.map(affine);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        u = etd1_step(&u, &f, plan, params)?;
        v = transformed_etd1_step(&v, &f_tilde, plan, params)?;
        worst = worst.max(v.max_abs_diff(&u.map(affine))?);
    }
    Ok(worst)
}
