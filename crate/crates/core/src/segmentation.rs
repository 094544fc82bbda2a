//! Two-stage alternating minimization of the phase-field Chan-Vese energy.
//!
//! Stage 1 runs one large-`epsilon` Allen-Cahn solve from the initial
//! indicator to wipe out isolated clutter, then updates the region means.
//! Stage 2 alternates small-`epsilon` solves and mean updates until the
//! phase field stops moving. The boundary is the level set `u = 1/2`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::error::{ensure_arg, Error, Result};
use crate::etd::{
    energy_with_fitting, evolve_to_steady, heaviside_reg, FittingField, RunDiagnostics, Scheme,
    SolverParams, SpectralPlan,
};
use crate::nonlocal::{detect_edges, detect_edges_with_table, CoeffCache, KernelSpec, DEFAULT_QUAD_LEVEL};
use crate::quadrature::compensated_sum;
use crate::raster::{load_mask, save_image, save_mask, EdgeMap, GrayImage};

/// Weight sums below this count as an empty phase in [`update_means`].
pub const EMPTY_PHASE: f64 = 1e-12;

/// Source of the initial indicator `u0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// Nonlocal edge map used directly as a {0, 1} field.
    Nonlocal { spec: KernelSpec, sigma: f64 },
    /// `1` where `I >= i0`.
    Threshold(f64),
    Mask(EdgeMap),
    MaskFile(PathBuf),
}

/// How Stage 2 decides the outer loop has converged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OuterCriterion {
    /// `|u_new - u_old|_inf < outer_tol`.
    #[default]
    Field,
    /// The thresholded masks agree exactly.
    Mask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegConfig {
    pub stage1_epsilon: f64,
    pub stage2_epsilon: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub epsilon1: f64,
    pub dt: f64,
    pub steady_tol: f64,
    pub max_steps: usize,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub scheme: Scheme,
    pub init: Init,
    /// Fixed stabilizer for both stages; `None` uses each stage's bound.
    pub stabilizer: Option<f64>,
    pub outer_criterion: OuterCriterion,
    pub strict_energy: bool,
    /// Directory for cached nonlocal coefficient tables.
    pub coeff_cache: Option<PathBuf>,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            stage1_epsilon: 5.0,
            stage2_epsilon: 0.1,
            lambda1: 1.0,
            lambda2: 1.0,
            epsilon1: SolverParams::DEFAULT_EPSILON1,
            dt: SolverParams::DEFAULT_DT,
            steady_tol: SolverParams::DEFAULT_STEADY_TOL,
            max_steps: SolverParams::DEFAULT_MAX_STEPS,
            outer_tol: 1e-4,
            max_outer: 50,
            scheme: Scheme::Etd1,
            init: Init::Threshold(0.5),
            stabilizer: None,
            outer_criterion: OuterCriterion::Field,
            strict_energy: false,
            coeff_cache: None,
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(
            self.stage2_epsilon > 0.0 && self.stage1_epsilon >= self.stage2_epsilon,
            "need stage1_epsilon >= stage2_epsilon > 0, got {} and {}",
            self.stage1_epsilon,
            self.stage2_epsilon
        );
        ensure_arg!(self.outer_tol >= 0.0, "outer_tol must be nonnegative");
        ensure_arg!(self.max_outer >= 1, "max_outer must be at least 1");
        if let Init::Threshold(i0) = self.init {
            ensure_arg!(i0.is_finite(), "threshold must be finite");
        }
        self.stage_params(self.stage1_epsilon).validate()?;
        self.stage_params(self.stage2_epsilon).validate()
    }

    /// Solver parameters for one stage; the stabilizer follows that stage's bound.
    pub fn stage_params(&self, epsilon: f64) -> SolverParams {
        let mut p = SolverParams::new(epsilon, self.lambda1, self.lambda2);
        p.epsilon1 = self.epsilon1;
        p.stabilizer = self.stabilizer.unwrap_or_else(|| p.bound());
        p.dt = self.dt;
        p.steady_tol = self.steady_tol;
        p.max_steps = self.max_steps;
        p.strict_energy = self.strict_energy;
        p
    }
}

/// A pair of 4-adjacent pixels `(row, col)` whose values straddle 1/2;
/// the first member is the one `>= 1/2`.
pub type ContourPair = ((usize, usize), (usize, usize));

#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub phase: GrayImage,
    pub mask: EdgeMap,
    pub contour: Vec<ContourPair>,
    pub c1: f64,
    pub c2: f64,
    /// One entry per solve: Stage 1 first, then each Stage-2 loop.
    pub diagnostics: Vec<RunDiagnostics>,
    /// Number of solves `m` (Stage 1 included).
    pub outer_loops: usize,
    /// Steps per solve, `k_1..k_m`.
    pub inner_steps: Vec<usize>,
    /// Stage-2 energy after the Stage-1 update and after each Stage-2 loop.
    pub outer_energies: Vec<f64>,
    pub stage1_phase: GrayImage,
    pub converged: bool,
    pub elapsed: Duration,
}

impl SegmentationResult {
    /// Smallest value seen across every iterate of every solve.
    pub fn min_u(&self) -> f64 {
        self.diagnostics.iter().map(RunDiagnostics::min_u).fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(RunDiagnostics::max_u)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(min u, 1 - max u)` over the whole run; both >= 0 when the bound held.
    pub fn bound_deviation(&self) -> (f64, f64) {
        (self.min_u(), 1.0 - self.max_u())
    }

    pub fn total_inner_steps(&self) -> usize {
        self.inner_steps.iter().sum()
    }

    /// Per-solve diagnostics with a leading `loop` column (1-based).
    pub fn diagnostics_csv(&self) -> String {
        let mut out = format!("loop,{}\n", RunDiagnostics::CSV_HEADER);
        for (i, d) in self.diagnostics.iter().enumerate() {
            for line in d.to_csv().lines().skip(1) {
                let _ = writeln!(out, "{},{line}", i + 1);
            }
        }
        out
    }

    /// `key=value` lines: convergence, m, k_i, means, bound deviations, time.
    pub fn summary(&self) -> String {
        let (min, one_minus_max) = self.bound_deviation();
        let ks: Vec<String> = self.inner_steps.iter().map(usize::to_string).collect();
        format!(
            "converged={}\nouter_loops={}\ninner_steps={}\nc1={}\nc2={}\nmin={:e}\none_minus_max={:e}\ncpu_seconds={:.6}\n",
            self.converged,
            self.outer_loops,
            ks.join(","),
            self.c1,
            self.c2,
            min,
            one_minus_max,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Closed-form region means for fixed `u`:
/// `C1 = sum H I / sum H`, `C2 = sum (1 - H) I / sum (1 - H)` with
/// `H = H_eps1(u - 1/2)`. An empty phase keeps its previous mean.
pub fn update_means(u: &GrayImage, image: &GrayImage, eps1: f64, previous: (f64, f64)) -> Result<(f64, f64)> {
    u.check_same_dims(image)?;
    ensure_arg!(eps1 > 0.0, "epsilon1 must be positive");
    let h: Vec<f64> = u.data().iter().map(|&v| heaviside_reg(v - 0.5, eps1)).collect();
    let w1 = compensated_sum(h.iter().copied());
    let w2 = compensated_sum(h.iter().map(|&h| 1.0 - h));
    if !(w1.is_finite() && w2.is_finite()) || (w1 < EMPTY_PHASE && w2 < EMPTY_PHASE) {
        return Err(Error::InvalidState(format!(
            "degenerate phase weights {w1:e}, {w2:e}"
        )));
    }
    let c1 = if w1 < EMPTY_PHASE {
        previous.0
    } else {
        compensated_sum(h.iter().zip(image.data()).map(|(h, i)| h * i)) / w1
    };
    let c2 = if w2 < EMPTY_PHASE {
        previous.1
    } else {
        compensated_sum(h.iter().zip(image.data()).map(|(h, i)| (1.0 - h) * i)) / w2
    };
    Ok((c1, c2))
}

/// Initial indicator `u0` for the configured [`Init`].
pub fn initialize(image: &GrayImage, config: &SegConfig) -> Result<GrayImage> {
    let mask = match &config.init {
        Init::Nonlocal { spec, sigma } => match &config.coeff_cache {
            Some(dir) => {
                let table = CoeffCache::new(dir).table(spec, DEFAULT_QUAD_LEVEL)?;
                detect_edges_with_table(image, &table, *sigma)
            }
            None => detect_edges(image, spec, *sigma)?,
        },
        Init::Threshold(i0) => image.threshold(*i0),
        Init::Mask(mask) => mask.clone(),
        Init::MaskFile(path) => load_mask(path)?,
    };
    ensure_arg!(
        mask.dims() == image.dims(),
        "initial mask is {:?} but the image is {:?}",
        mask.dims(),
        image.dims()
    );
    Ok(mask.to_image())
}

/// Runs the two-stage schedule. Non-convergence is reported in the result.
pub fn segment(image: &GrayImage, config: &SegConfig) -> Result<SegmentationResult> {
    config.validate()?;
    ensure_arg!(
        image.min() >= 0.0 && image.max() <= 1.0,
        "image intensities must lie in [0, 1]"
    );
    let start = Instant::now();
    let (w, h) = image.dims();
    let u0 = initialize(image, config)?;

    let p1 = config.stage_params(config.stage1_epsilon);
    let plan1 = SpectralPlan::new(w, h, &p1)?;
    let mut means = (1.0, 0.0);
    let f = FittingField::new(image, means.0, means.1, p1.lambda1, p1.lambda2);
    let stage1 = evolve_to_steady(&u0, &f, &plan1, &p1, config.scheme)?;
    means = update_means(&stage1.field, image, config.epsilon1, means)?;
    log::info!(
        "stage 1: {} steps, C1 = {:.6}, C2 = {:.6}",
        stage1.steps,
        means.0,
        means.1
    );

    let mut diagnostics = vec![stage1.diagnostics];
    let mut inner_steps = vec![stage1.steps];
    let stage1_phase = stage1.field;
    let mut u = stage1_phase.clone();

    let p2 = config.stage_params(config.stage2_epsilon);
    // The stage-1 plan is only reusable if nothing it depends on changed.
    let plan2 = if plan1.matches(w, h, &p2) {
        plan1
    } else {
        SpectralPlan::new(w, h, &p2)?
    };
    let energy_at = |u: &GrayImage, (c1, c2): (f64, f64)| {
        energy_with_fitting(u, &FittingField::new(image, c1, c2, p2.lambda1, p2.lambda2), &p2)
    };
    let mut outer_energies = vec![energy_at(&u, means)?];
    let mut converged = false;
    for loop_index in 0..config.max_outer {
        let f = FittingField::new(image, means.0, means.1, p2.lambda1, p2.lambda2);
        let ev = evolve_to_steady(&u, &f, &plan2, &p2, config.scheme)?;
        means = update_means(&ev.field, image, config.epsilon1, means)?;
        let done = match config.outer_criterion {
            OuterCriterion::Field => ev.field.max_abs_diff(&u)? < config.outer_tol,
            OuterCriterion::Mask => ev.field.threshold(0.5) == u.threshold(0.5),
        };
        u = ev.field;
        outer_energies.push(energy_at(&u, means)?);
        inner_steps.push(ev.steps);
        diagnostics.push(ev.diagnostics);
        log::debug!(
            "stage 2 loop {}: {} steps, C1 = {:.6}, C2 = {:.6}",
            loop_index + 1,
            ev.steps,
            means.0,
            means.1
        );
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("outer loop stopped after {} iterations without converging", config.max_outer);
    }

    let mask = u.threshold(0.5);
    let contour = extract_contour(&u);
    Ok(SegmentationResult {
        outer_loops: inner_steps.len(),
        phase: u,
        mask,
        contour,
        c1: means.0,
        c2: means.1,
        diagnostics,
        inner_steps,
        outer_energies,
        stage1_phase,
        converged,
        elapsed: start.elapsed(),
    })
}

/// All 4-adjacent pixel pairs with one value `>= 1/2` and the other `< 1/2`.
pub fn extract_contour(u: &GrayImage) -> Vec<ContourPair> {
    let (w, h) = u.dims();
    let mut pairs = Vec::new();
    let mut visit = |a: (usize, usize), b: (usize, usize)| {
        let (va, vb) = (u.get(a.0, a.1) >= 0.5, u.get(b.0, b.1) >= 0.5);
        if va != vb {
            pairs.push(if va { (a, b) } else { (b, a) });
        }
    };
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w {
                visit((r, c), (r, c + 1));
            }
            if r + 1 < h {
                visit((r, c), (r + 1, c));
            }
        }
    }
    pairs
}

/// The image with the inner member of every contour pair set to 1.
pub fn contour_overlay(image: &GrayImage, contour: &[ContourPair]) -> GrayImage {
    let mut out = image.clone();
    for &((r, c), _) in contour {
        out.set(r, c, 1.0);
    }
    out
}

/// Writes `{prefix}_mask.pgm`, `{prefix}_overlay.png`,
/// `{prefix}_diagnostics.csv` and `{prefix}_summary.txt`.
pub fn write_artifacts(result: &SegmentationResult, image: &GrayImage, prefix: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let prefix = prefix.as_ref().to_string_lossy().into_owned();
    let path = |suffix: &str| PathBuf::from(format!("{prefix}_{suffix}"));
    let mask = path("mask.pgm");
    save_mask(&result.mask, &mask)?;
    let overlay = path("overlay.png");
    save_image(&contour_overlay(image, &result.contour), &overlay)?;
    let csv = path("diagnostics.csv");
    std::fs::write(&csv, result.diagnostics_csv()).map_err(|e| Error::io(&csv, e))?;
    let summary = path("summary.txt");
    std::fs::write(&summary, result.summary()).map_err(|e| Error::io(&summary, e))?;
    Ok(vec![mask, overlay, csv, summary])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_of_exact_indicator() {
        let image = GrayImage::from_fn(4, 3, |r, c| (r * 4 + c) as f64 / 11.0);
        let u = GrayImage::from_fn(4, 3, |_, c| if c < 2 { 1.0 } else { 0.0 });
        let (c1, c2) = update_means(&u, &image, 0.5, (9.0, 9.0)).unwrap();
        let inside: Vec<f64> = (0..3).flat_map(|r| (0..2).map(move |c| (r * 4 + c) as f64 / 11.0)).collect();
        let outside: Vec<f64> = (0..3).flat_map(|r| (2..4).map(move |c| (r * 4 + c) as f64 / 11.0)).collect();
        assert!((c1 - inside.iter().sum::<f64>() / 6.0).abs() < 1e-15);
        assert!((c2 - outside.iter().sum::<f64>() / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_phase_keeps_previous() {
        let image = GrayImage::filled(3, 3, 0.3);
        let (c1, c2) = update_means(&GrayImage::filled(3, 3, 1.0), &image, 0.5, (0.9, 0.1)).unwrap();
        assert!((c1 - 0.3).abs() < 1e-15);
        assert_eq!(c2, 0.1);
        let u = GrayImage::from_fn(3, 3, |r, _| r as f64 / 2.0);
        let (c1, c2) = update_means(&u, &image, 0.5, (0.0, 0.0)).unwrap();
        assert!((c1 - 0.3).abs() < 1e-15 && (c2 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn non_finite_field_is_invalid_state() {
        let image = GrayImage::filled(2, 2, 0.5);
        let mut u = GrayImage::filled(2, 2, 0.2);
        u.set(1, 1, f64::NAN);
        let err = update_means(&u, &image, 0.5, (1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)));
    }

    #[test]
    fn threshold_init() {
        let image = GrayImage::from_fn(4, 4, |r, c| ((r + c) % 2) as f64);
        let mut cfg = SegConfig::default();
        assert_eq!(initialize(&image, &cfg).unwrap(), image);
        cfg.init = Init::Threshold(0.0);
        assert!(initialize(&image, &cfg).unwrap().data().iter().all(|&v| v == 1.0));
        cfg.init = Init::Mask(EdgeMap::zeros(3, 4));
        assert!(initialize(&image, &cfg).unwrap_err().is_argument());
    }

    #[test]
    fn contour_of_half_planes() {
        assert!(extract_contour(&GrayImage::filled(5, 4, 0.0)).is_empty());
        let u = GrayImage::from_fn(6, 4, |_, c| if c >= 3 { 1.0 } else { 0.0 });
        let pairs = extract_contour(&u);
        assert_eq!(pairs.len(), 4);
        assert!(pairs.iter().all(|&((r1, c1), (r2, c2))| r1 == r2 && c1 == 3 && c2 == 2));
        let overlay = contour_overlay(&GrayImage::filled(6, 4, 0.2), &pairs);
        assert_eq!(overlay.get(1, 3), 1.0);
        assert_eq!(overlay.get(1, 2), 0.2);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SegConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.stage1_epsilon = 0.05;
        assert!(cfg.validate().unwrap_err().is_argument());
        let cfg = SegConfig {
            epsilon1: 0.7,
            ..SegConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stage_stabilizer_follows_epsilon() {
        let cfg = SegConfig::default();
        let (p1, p2) = (cfg.stage_params(5.0), cfg.stage_params(0.1));
        assert_eq!(p1.stabilizer, p1.bound());
        assert_eq!(p2.stabilizer, p2.bound());
        assert!(p2.stabilizer > p1.stabilizer);
    }

    #[test]
    fn constant_image_gives_constant_mask() {
        let image = GrayImage::filled(16, 12, 0.3);
        let cfg = SegConfig {
            init: Init::Mask(EdgeMap::from_fn(16, 12, |r, c| r > 3 && c > 5)),
            ..SegConfig::default()
        };
        let res = segment(&image, &cfg).unwrap();
        let n = res.mask.count();
        assert!(n == 0 || n == 16 * 12, "{n}");
        assert!(res.contour.is_empty());
    }
}
