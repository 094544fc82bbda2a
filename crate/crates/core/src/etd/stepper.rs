use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{energy_with_fitting, nonlinear_term, FittingField, Scheme, SolverParams, SpectralPlan};
use crate::error::{ensure_arg, Error, Result};
use crate::raster::GrayImage;

/// Slack allowed on energy increases before strict mode fails.
pub const ENERGY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub energy: f64,
    pub min_u: f64,
    pub max_u: f64,
    /// Max-norm change from the previous iterate (0 for the initial state).
    pub linf_change: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunDiagnostics {
    /// One record per iterate, starting with the initial state as step 0.
    pub records: Vec<StepRecord>,
    pub steps: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

impl RunDiagnostics {
    pub const CSV_HEADER: &'static str = "step,energy,min_u,max_u,linf_change";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                r.step, r.energy, r.min_u, r.max_u, r.linf_change
            );
        }
        out
    }

    pub fn min_u(&self) -> f64 {
        self.records.iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.records.iter().map(|r| r.max_u).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest step-to-step energy increase (0 if the energy never rose).
    pub fn max_energy_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(0.0, f64::max)
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.records.last().map(|r| r.energy)
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub field: GrayImage,
    pub steps: usize,
    pub converged: bool,
    pub diagnostics: RunDiagnostics,
}

fn check_inputs(u: &GrayImage, f: &FittingField, plan: &SpectralPlan, params: &SolverParams) -> Result<()> {
    plan.check(u, params)?;
    ensure_arg!(u.dims() == f.dims(), "field and fitting field dimensions differ");
    Ok(())
}

fn etd1_spectral(u_hat: &[f64], n_hat: &[f64], plan: &SpectralPlan) -> Vec<f64> {
    u_hat
        .par_iter()
        .zip(n_hat.par_iter())
        .zip(plan.phi0_weights().par_iter().zip(plan.dt_phi1_weights().par_iter()))
        .map(|((&u, &n), (&p0, &p1))| p0 * u + p1 * n)
        .collect()
}

fn to_image(plan: &SpectralPlan, spectrum: &[f64]) -> GrayImage {
    GrayImage::new(plan.width(), plan.height(), plan.inverse(spectrum))
        .expect("plan dimensions are consistent")
}

/// `U+ = phi0(L dt) U + dt phi1(L dt) N(U)`.
pub fn etd1_step(
    u: &GrayImage,
    f: &FittingField,
    plan: &SpectralPlan,
    params: &SolverParams,
) -> Result<GrayImage> {
    check_inputs(u, f, plan, params)?;
    let n = nonlinear_term(u, f, params)?;
    let next = etd1_spectral(&plan.forward(u.data()), &plan.forward(n.data()), plan);
    Ok(to_image(plan, &next))
}

/// Predictor `V` by ETD1, then `U+ = V + dt phi2(L dt) (N(V) - N(U))`.
pub fn etdrk2_step(
    u: &GrayImage,
    f: &FittingField,
    plan: &SpectralPlan,
    params: &SolverParams,
) -> Result<GrayImage> {
    check_inputs(u, f, plan, params)?;
    let n = nonlinear_term(u, f, params)?;
    let predictor_hat = etd1_spectral(&plan.forward(u.data()), &plan.forward(n.data()), plan);
    let predictor = to_image(plan, &predictor_hat);
    let dn = nonlinear_term(&predictor, f, params)?.zip_map(&n, |a, b| a - b)?;
    let dn_hat = plan.forward(dn.data());
    let next: Vec<f64> = predictor_hat
        .par_iter()
        .zip(dn_hat.par_iter())
        .zip(plan.dt_phi2_weights().par_iter())
        .map(|((&v, &d), &p2)| v + p2 * d)
        .collect();
    Ok(to_image(plan, &next))
}

pub fn step(
    scheme: Scheme,
    u: &GrayImage,
    f: &FittingField,
    plan: &SpectralPlan,
    params: &SolverParams,
) -> Result<GrayImage> {
    match scheme {
        Scheme::Etd1 => etd1_step(u, f, plan, params),
        Scheme::Etdrk2 => etdrk2_step(u, f, plan, params),
    }
}

/// Steps until `|U+ - U|_inf < steady_tol` or `max_steps`, with frozen `f`.
///
/// Running out of steps is reported through `converged`, not as an error.
/// In strict mode an energy increase beyond [`ENERGY_SLACK`] is an error.
pub fn evolve_to_steady(
    u0: &GrayImage,
    f: &FittingField,
    plan: &SpectralPlan,
    params: &SolverParams,
    scheme: Scheme,
) -> Result<Evolution> {
    params.validate()?;
    check_inputs(u0, f, plan, params)?;
    if params.stabilizer < params.bound() {
        log::warn!(
            "stabilizer {} is below the bound {}; iterates may leave [0, 1]",
            params.stabilizer,
            params.bound()
        );
    }
    let start = Instant::now();
    let mut u = u0.clone();
    let mut energy = energy_with_fitting(&u, f, params)?;
    let mut records = vec![StepRecord {
        step: 0,
        energy,
        min_u: u.min(),
        max_u: u.max(),
        linf_change: 0.0,
    }];
    let mut converged = false;
    let mut steps = 0;
    while steps < params.max_steps {
        let next = step(scheme, &u, f, plan, params)?;
        steps += 1;
        let change = next.max_abs_diff(&u)?;
        if !change.is_finite() {
            return Err(Error::InvalidState(format!(
                "non-finite values after step {steps}"
            )));
        }
        let next_energy = energy_with_fitting(&next, f, params)?;
        if params.strict_energy && next_energy > energy + ENERGY_SLACK {
            return Err(Error::EnergyIncrease {
                step: steps,
                before: energy,
                after: next_energy,
            });
        }
        records.push(StepRecord {
            step: steps,
            energy: next_energy,
            min_u: next.min(),
            max_u: next.max(),
            linf_change: change,
        });
        u = next;
        energy = next_energy;
        if change < params.steady_tol {
            converged = true;
            break;
        }
    }
    log::debug!("{scheme} evolution: {steps} steps, converged = {converged}");
    Ok(Evolution {
        field: u,
        steps,
        converged,
        diagnostics: RunDiagnostics {
            records,
            steps,
            converged,
            wall_time: start.elapsed(),
        },
    })
}
