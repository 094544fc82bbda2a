//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p acseg --test acceptance`. Exits nonzero when any
//! criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use acseg::etd::*;
use acseg::metrics::{mask_metrics, seg_error};
use acseg::nonlocal::*;
use acseg::raster::{add_gaussian_noise, profile_i1, synth_two_phase, EdgeMap, GrayImage, ShapeSpec};
use acseg::segmentation::{segment, update_means, Init, SegConfig, SegmentationResult};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Check = Result<String, String>;

macro_rules! require {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- 1

/// Composite Simpson in polar coordinates over the whole disk; deliberately
/// unrelated to the Gauss-Legendre rule the library uses.
fn polar_simpson_moment(spec: &KernelSpec) -> f64 {
    let delta = spec.delta() as f64;
    let (nr, nt) = (20_000, 64);
    let simpson = |n: usize, i: usize| match i {
        0 => 1.0,
        _ if i == n => 1.0,
        _ if i % 2 == 1 => 4.0,
        _ => 2.0,
    };
    let (hr, ht) = (delta / nr as f64, 2.0 * PI / nt as f64);
    let mut total = 0.0;
    for i in 0..=nr {
        let r = i as f64 * hr;
        // |s|^2 rho r dr dtheta; the integrand vanishes at r = 0 for alpha <= 2
        let radial = if r == 0.0 { 0.0 } else { r * r * kernel_rho(r, spec).unwrap() * r };
        let mut angular = 0.0;
        for j in 0..=nt {
            angular += simpson(nt, j);
        }
        total += simpson(nr, i) * radial * angular * ht / 3.0;
    }
    total * hr / 3.0
}

fn kernel_moment() -> Check {
    let mut worst: f64 = 0.0;
    for delta in 3..=8 {
        for alpha in [0.0, 1.0, 2.0] {
            let spec = KernelSpec::new(delta, alpha).unwrap();
            for m in [second_moment(&spec), polar_simpson_moment(&spec)] {
                require!((m - 4.0).abs() <= 1e-6, "delta={delta} alpha={alpha}: moment {m}");
                worst = worst.max((m - 4.0).abs());
            }
        }
    }
    Ok(format!("max |moment - 4| = {worst:.2e}"))
}

// ---------------------------------------------------------------- 2

fn operator_consistency() -> Check {
    let table = compute_coefficients(&KernelSpec::new(4, 1.0).unwrap(), DEFAULT_QUAD_LEVEL).unwrap();
    let img = GrayImage::from_fn(64, 64, |r, c| ((r * r + c * c) as f64) / 2.0);
    let out = apply_nonlocal_laplacian(&img, &table);
    let mut worst: f64 = 0.0;
    for r in 4..60 {
        for c in 4..60 {
            worst = worst.max((out.get(r, c) - 2.0).abs());
        }
    }
    require!(worst <= 1e-2, "max interior deviation {worst}");
    Ok(format!("max interior |L I - 2| = {worst:.2e}"))
}

// ---------------------------------------------------------------- 3

/// `-2 eps D_h + S` with reflecting ghost cells, assembled entry by entry.
fn dense_neumann(w: usize, h: usize, eps: f64, s: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(w * h, w * h);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            m[(i, i)] += s;
            let mut link = |j: usize| {
                m[(i, j)] -= 2.0 * eps;
                m[(i, i)] += 2.0 * eps;
            };
            if r > 0 {
                link(i - w);
            }
            if r + 1 < h {
                link(i + w);
            }
            if c > 0 {
                link(i - 1);
            }
            if c + 1 < w {
                link(i + 1);
            }
        }
    }
    m
}

fn spectral_correctness() -> Check {
    let mut worst: f64 = 0.0;
    for (w, h) in [(8, 8), (13, 9)] {
        let p = SolverParams::new(0.1, 1.0, 1.0);
        let plan = SpectralPlan::new(w, h, &p).unwrap();
        let u = GrayImage::from_fn(w, h, |r, c| ((r * 7 + c * 3) as f64 * 0.37).sin() * 0.5 + 0.5);
        let dense = dense_neumann(w, h, p.epsilon, p.stabilizer) * DVector::from_column_slice(u.data());
        let fast = plan.apply_linear(&u).unwrap();
        let err = fast.data().iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        require!(err <= 1e-10, "{w}x{h}: max-abs {err:e}");
        worst = worst.max(err);
    }
    Ok(format!("max-abs = {worst:.2e}"))
}

// ---------------------------------------------------------------- 4, 5, 6

struct Runs {
    results: Vec<(Scheme, &'static str, SegmentationResult)>,
    exact: EdgeMap,
    image: GrayImage,
    elapsed: Duration,
}

fn segmentation_runs() -> Runs {
    let start = Instant::now();
    let (clean, exact) = synth_two_phase(128, 128, &ShapeSpec::centered_disk(128, 128, 40.0)).unwrap();
    let image = add_gaussian_noise(&clean, 0.0, 0.2, 2024).unwrap();
    let inits = [
        ("threshold", Init::Threshold(0.5)),
        (
            "nonlocal",
            Init::Nonlocal {
                spec: KernelSpec::new(4, 1.0).unwrap(),
                sigma: 0.05,
            },
        ),
    ];
    let mut results = Vec::new();
    for scheme in [Scheme::Etd1, Scheme::Etdrk2] {
        for (name, init) in &inits {
            let cfg = SegConfig {
                scheme,
                init: init.clone(),
                ..SegConfig::default()
            };
            results.push((scheme, *name, segment(&image, &cfg).unwrap()));
        }
    }
    Runs {
        results,
        exact,
        image,
        elapsed: start.elapsed(),
    }
}

fn maximum_bound(runs: &Runs) -> Check {
    let mut lo: f64 = f64::INFINITY;
    let mut hi: f64 = f64::NEG_INFINITY;
    for (scheme, init, res) in &runs.results {
        let (min, max) = (res.min_u(), res.max_u());
        require!(min >= -1e-10 && max <= 1.0 + 1e-10, "{scheme}/{init}: range [{min:e}, {max}]");
        lo = lo.min(min);
        hi = hi.max(max);
    }
    require!(runs.image.width() == 128, "unexpected image size");
    Ok(format!("min u = {lo:.2e}, 1 - max u = {:.2e}", 1.0 - hi))
}

fn energy_decay(runs: &Runs) -> Check {
    let mut rise = [f64::NEG_INFINITY; 2];
    for (scheme, init, res) in &runs.results {
        let (slot, tol) = match scheme {
            Scheme::Etd1 => (0, 1e-9),
            Scheme::Etdrk2 => (1, 1e-6),
        };
        for (k, d) in res.diagnostics.iter().enumerate() {
            let inc = d.max_energy_increase();
            require!(inc <= tol, "{scheme}/{init}: solve {k} energy rose by {inc:e}");
            rise[slot] = rise[slot].max(inc);
        }
        for pair in res.outer_energies.windows(2) {
            let inc = pair[1] - pair[0];
            require!(inc <= tol, "{scheme}/{init}: outer energy rose by {inc:e}");
            rise[slot] = rise[slot].max(inc);
        }
    }
    Ok(format!("largest energy rise etd1 {:.2e}, etdrk2 {:.2e}", rise[0], rise[1]))
}

fn segmentation_accuracy(runs: &Runs) -> Check {
    require!(runs.elapsed < Duration::from_secs(60), "runs took {:?}", runs.elapsed);
    let mut parts = Vec::new();
    let mut totals = std::collections::HashMap::new();
    for (scheme, init, res) in &runs.results {
        let err = seg_error(&res.phase, &runs.exact).unwrap();
        require!(err <= 5e-3, "{scheme}/{init}: error {err:e}");
        totals.insert((scheme.to_string(), *init), res.total_inner_steps());
        parts.push(format!("{scheme}/{init} E={err:.2e} k={:?}", res.inner_steps));
    }
    for init in ["threshold", "nonlocal"] {
        let (k1, k2) = (totals[&("etd1".to_string(), init)], totals[&("etdrk2".to_string(), init)]);
        require!(k2 <= k1, "{init}: etdrk2 took {k2} inner steps, etd1 {k1}");
    }
    Ok(format!("{} (4 runs in {:.2?})", parts.join("; "), runs.elapsed))
}

// ---------------------------------------------------------------- 7

fn order_run(scheme: Scheme, dt: f64) -> GrayImage {
    let (w, h) = (64, 64);
    let mut p = SolverParams::new(100.0, 0.01, 0.01);
    p.dt = dt;
    let plan = SpectralPlan::new(w, h, &p).unwrap();
    let smooth = GrayImage::from_fn(w, h, |r, c| {
        0.5 + 0.45 * ((r as f64 - 31.5) / 12.0).tanh() * ((c as f64 - 20.0) / 15.0).cos()
    });
    let f = FittingField::new(&smooth, 0.9, 0.1, p.lambda1, p.lambda2);
    let mut u = GrayImage::from_fn(w, h, |r, c| 0.5 + 0.4 * (r as f64 / 10.0).sin() * (c as f64 / 13.0).cos());
    let n = (1.0 / dt).round() as usize;
    for _ in 0..n {
        u = step(scheme, &u, &f, &plan, &p).unwrap();
    }
    u
}

fn richardson_rate(scheme: Scheme) -> f64 {
    let [a, b, c] = [0.2, 0.1, 0.05].map(|dt| order_run(scheme, dt));
    (a.max_abs_diff(&b).unwrap() / b.max_abs_diff(&c).unwrap()).log2()
}

fn temporal_order() -> Check {
    let (r1, r2) = (richardson_rate(Scheme::Etd1), richardson_rate(Scheme::Etdrk2));
    require!(r2 >= 1.9, "etdrk2 rate {r2:.3}");
    require!(r1 >= 0.9, "etd1 rate {r1:.3}");
    Ok(format!("rates etd1 {r1:.3}, etdrk2 {r2:.3}"))
}

// ---------------------------------------------------------------- 8

fn transformation_equivalence() -> Check {
    let (clean, _) = synth_two_phase(32, 32, &ShapeSpec::centered_disk(32, 32, 10.0)).unwrap();
    let image = add_gaussian_noise(&clean, 0.0, 0.2, 8).unwrap();
    let (u0, _) = image.clamp_unit();
    let p = SolverParams::new(0.1, 1.0, 1.0);
    let plan = SpectralPlan::new(32, 32, &p).unwrap();
    let diff = transformed_equivalence_check(&u0, &image, 0.9, 0.1, &plan, &p, 100).unwrap();
    require!(diff <= 1e-8, "max difference {diff:e}");
    Ok(format!("max difference after 100 steps = {diff:.2e}"))
}

// ---------------------------------------------------------------- 9

fn profile_behaviour() -> Check {
    let img = profile_i1(32);
    let edges = detect_edges(&img, &KernelSpec::new(8, 1.0).unwrap(), 0.02).unwrap();
    let fired: Vec<usize> = (0..img.width()).filter(|&c| edges.get(16, c)).collect();
    for r in 0..img.height() {
        require!((0..=3).all(|c| !edges.get(r, c)), "row {r} fires on the weak edge: {fired:?}");
        require!((9..=15).any(|c| edges.get(r, c)), "row {r} misses the jump edge: {fired:?}");
        require!((16..=23).any(|c| edges.get(r, c)), "row {r} misses the stair edge: {fired:?}");
    }
    Ok(format!("edge columns {fired:?}"))
}

// ---------------------------------------------------------------- 10

fn metrics_oracle() -> Check {
    let s1 = EdgeMap::from_bits(2, 2, vec![1, 1, 0, 0]).unwrap();
    let s2 = EdgeMap::from_bits(2, 2, vec![1, 0, 0, 0]).unwrap();
    let r = mask_metrics(&s1, &s2).unwrap();
    require!((r.fpr, r.fnr, r.rse) == (0.5, 1.0, 1.0 / 3.0), "got {r:?}");
    Ok(format!("(FPR, FNR, RSE) = ({}, {}, {:.6})", r.fpr, r.fnr, r.rse))
}

// ---------------------------------------------------------------- 11

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn field(w: usize, h: usize) -> impl Strategy<Value = GrayImage> {
    prop::collection::vec(0.0f64..1.0, w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
}

fn fail<T: std::fmt::Debug>(name: &str, e: proptest::test_runner::TestError<T>) -> String {
    format!("{name}: {e}")
}

fn property_suites() -> Check {
    let table = compute_coefficients(&KernelSpec::new(3, 1.0).unwrap(), DEFAULT_QUAD_LEVEL).unwrap();
    let mut done = Vec::new();

    runner(64)
        .run(&(field(12, 10), field(12, 10), -2.0f64..2.0, -2.0f64..2.0), |(x, y, a, b)| {
            let combo = x.zip_map(&y, |p, q| a * p + b * q).unwrap();
            let lhs = apply_nonlocal_laplacian(&combo, &table);
            let rhs = apply_nonlocal_laplacian(&x, &table)
                .zip_map(&apply_nonlocal_laplacian(&y, &table), |p, q| a * p + b * q)
                .unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
            Ok(())
        })
        .map_err(|e| fail("linearity", e))?;
    done.push("linearity");

    runner(64)
        .run(&(field(12, 10), 0.0f64..0.3, 0.0f64..0.3), |(x, s, ds)| {
            let low = detect_edges_with_table(&x, &table, s);
            let high = detect_edges_with_table(&x, &table, s + ds);
            prop_assert!(high.is_subset_of(&low));
            Ok(())
        })
        .map_err(|e| fail("monotone thresholding", e))?;
    done.push("thresholding");

    runner(512)
        .run(&prop_oneof![-1e-3f64..1e-3, 0.0f64..50.0], |a| {
            // phi_0 = 1 - a phi_1 and phi_1 = 1 - a phi_2
            prop_assert!((phi0(a) - (1.0 - a * phi1(a))).abs() <= 1e-13);
            prop_assert!((phi1(a) - (1.0 - a * phi2(a))).abs() <= 1e-13);
            prop_assert!(phi1(a) > 0.0 && phi2(a) > 0.0);
            if a >= 0.0 {
                prop_assert!(phi1(a) <= 1.0 && phi2(a) <= 0.5 + 1e-15);
            }
            Ok(())
        })
        .map_err(|e| fail("phi identities", e))?;
    done.push("phi");

    runner(32)
        .run(&(field(9, 7), 0.0f64..1.0, 0.0f64..1.0, 0.05f64..5.0, 0.01f64..2.0), |(image, c1, c2, eps, dt)| {
            let mut p = SolverParams::new(eps, 1.0, 1.0);
            p.dt = dt;
            let plan = SpectralPlan::new(9, 7, &p).unwrap();
            let f = FittingField::new(&image, c1, c2, 1.0, 1.0);
            for level in [0.0, 1.0] {
                let u = GrayImage::filled(9, 7, level);
                for scheme in [Scheme::Etd1, Scheme::Etdrk2] {
                    let next = step(scheme, &u, &f, &plan, &p).unwrap();
                    prop_assert!(next.max_abs_diff(&u).unwrap() < 1e-12, "{scheme} moved {level}");
                }
            }
            Ok(())
        })
        .map_err(|e| fail("fixed points", e))?;
    done.push("fixed points");

    runner(16)
        .run(&(0.01f64..10.0, 0.05f64..0.5, 0.0f64..3.0, 0.0f64..3.0), |(eps, eps1, l1, l2)| {
            let mut p = SolverParams::new(eps, l1, l2);
            p.epsilon1 = eps1;
            p = p.with_bound_stabilizer();
            // 100 x 100 grid over u in [0, 1] and the admissible fitting range
            let u = GrayImage::from_fn(100, 100, |_, c| c as f64 / 99.0);
            let coeff = GrayImage::from_fn(100, 100, |r, _| -l2 + (l1 + l2) * r as f64 / 99.0);
            let n = nonlinear_term(&u, &FittingField::from_coefficient(coeff), &p).unwrap();
            let slack = 1e-12 * p.stabilizer.max(1.0);
            prop_assert!(n.data().iter().all(|&v| v.abs() <= p.stabilizer + slack));
            prop_assert!(n.min() >= -slack);
            Ok(())
        })
        .map_err(|e| fail("|N| <= S", e))?;
    done.push("|N|<=S");

    runner(32)
        .run(&(field(10, 9), field(10, 9)), |(image, u)| {
            let p = SegConfig::default().stage_params(0.1);
            let (c1, c2) = update_means(&u, &image, p.epsilon1, (1.0, 0.0)).unwrap();
            let e = discrete_energy(&u, c1, c2, &image, &p).unwrap();
            for d in [-1e-3, 1e-3] {
                prop_assert!(discrete_energy(&u, c1 + d, c2, &image, &p).unwrap() >= e);
                prop_assert!(discrete_energy(&u, c1, c2 + d, &image, &p).unwrap() >= e);
            }
            Ok(())
        })
        .map_err(|e| fail("mean optimality", e))?;
    done.push("mean optimality");

    Ok(done.join(", "))
}

// ----------------------------------------------------------------

fn run(label: &str, limit: Duration, check: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(check))
        .unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        })
        .and_then(|detail| {
            let t = start.elapsed();
            if t > limit {
                Err(format!("{detail}; took {t:.2?}, limit {limit:?}"))
            } else {
                Ok(detail)
            }
        });
    let t = start.elapsed();
    match outcome {
        Ok(detail) => {
            println!("PASS {label} ({t:.2?}): {detail}");
            true
        }
        Err(why) => {
            println!("FAIL {label} ({t:.2?}): {why}");
            false
        }
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= run("1 kernel moment", secs(1), kernel_moment);
    ok &= run("2 operator consistency", secs(1), operator_consistency);
    ok &= run("3 spectral correctness", secs(1), spectral_correctness);

    let runs = panic::catch_unwind(segmentation_runs);
    let shared = |f: fn(&Runs) -> Check| {
        let runs = &runs;
        move || match runs {
            Ok(r) => f(r),
            Err(_) => Err("segmentation runs panicked".into()),
        }
    };
    // the four runs are shared; their cost is charged to each criterion's limit
    let cost = runs.as_ref().map(|r| r.elapsed).unwrap_or_default();
    ok &= run("4 maximum bound", secs(30).saturating_sub(cost), shared(maximum_bound));
    ok &= run("5 energy decay", secs(30).saturating_sub(cost), shared(energy_decay));
    ok &= run("6 segmentation accuracy", secs(60).saturating_sub(cost), shared(segmentation_accuracy));

    ok &= run("7 temporal order", secs(20), temporal_order);
    ok &= run("8 transformation equivalence", secs(5), transformation_equivalence);
    ok &= run("9 profile behaviour", secs(1), profile_behaviour);
    ok &= run("10 metrics oracle", secs(1), metrics_oracle);
    ok &= run("11 property suites", secs(60), property_suites);

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
