//! Python bindings. Images are 2-D float64 arrays indexed `[row, col]`;
//! masks come back as boolean arrays of the same shape.

use acseg::baseline::{BaselineSpec, GradientOperator};
use acseg::etd::{self, FittingField, Scheme, SolverParams, SpectralPlan};
use acseg::metrics::{mask_metrics, seg_error as core_seg_error};
use acseg::nonlocal::{self, compute_coefficients, KernelSpec, DEFAULT_QUAD_LEVEL};
use acseg::raster::{add_gaussian_noise, synth_two_phase, EdgeMap, GrayImage, ShapeSpec};
use acseg::segmentation::{self, Init, OuterCriterion, SegConfig};
use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: acseg::Error) -> PyErr {
    match e {
        acseg::Error::Argument(_) => PyValueError::new_err(e.to_string()),
        acseg::Error::Io { .. } | acseg::Error::Format(_) => PyIOError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn gray(a: &PyReadonlyArray2<'_, f64>) -> PyResult<GrayImage> {
    let view = a.as_array();
    let (h, w) = view.dim();
    GrayImage::new(w, h, view.iter().copied().collect()).map_err(to_py)
}

fn mask_in(a: &PyReadonlyArray2<'_, bool>) -> PyResult<EdgeMap> {
    let view = a.as_array();
    let (h, w) = view.dim();
    EdgeMap::from_bits(w, h, view.iter().map(|&b| b as u8).collect()).map_err(to_py)
}

fn image_out<'py>(py: Python<'py>, img: &GrayImage) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_vec((img.height(), img.width()), img.data().to_vec())
        .expect("shape matches")
        .into_pyarray(py)
}

fn mask_out<'py>(py: Python<'py>, m: &EdgeMap) -> Bound<'py, PyArray2<bool>> {
    Array2::from_shape_vec((m.height(), m.width()), m.bits().iter().map(|&b| b != 0).collect())
        .expect("shape matches")
        .into_pyarray(py)
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(to_py)
}

/// Nonlocal Laplacian of `image` with interaction radius `delta`.
#[pyfunction]
#[pyo3(signature = (image, delta = 4, alpha = 1.0))]
fn nonlocal_laplacian<'py>(
    py: Python<'py>,
    image: PyReadonlyArray2<'py, f64>,
    delta: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let img = gray(&image)?;
    let table = KernelSpec::new(delta, alpha)
        .and_then(|s| compute_coefficients(&s, DEFAULT_QUAD_LEVEL))
        .map_err(to_py)?;
    Ok(image_out(py, &nonlocal::apply_nonlocal_laplacian(&img, &table)))
}

/// Pixels where the nonlocal response is at least `sigma`.
#[pyfunction]
#[pyo3(signature = (image, delta = 4, alpha = 1.0, sigma = 0.05))]
fn detect_edges<'py>(
    py: Python<'py>,
    image: PyReadonlyArray2<'py, f64>,
    delta: usize,
    alpha: f64,
    sigma: f64,
) -> PyResult<Bound<'py, PyArray2<bool>>> {
    let img = gray(&image)?;
    let spec = KernelSpec::new(delta, alpha).map_err(to_py)?;
    let edges = nonlocal::detect_edges(&img, &spec, sigma).map_err(to_py)?;
    Ok(mask_out(py, &edges))
}

/// Classical detectors: roberts, prewitt, sobel, log or canny.
#[pyfunction]
#[pyo3(signature = (image, method, threshold = 0.2, varsigma = 1.0, zero_tol = 1e-3, low = 0.05, high = 0.15))]
#[allow(clippy::too_many_arguments)]
fn baseline_edges<'py>(
    py: Python<'py>,
    image: PyReadonlyArray2<'py, f64>,
    method: &str,
    threshold: f64,
    varsigma: f64,
    zero_tol: f64,
    low: f64,
    high: f64,
) -> PyResult<Bound<'py, PyArray2<bool>>> {
    let img = gray(&image)?;
    let spec = match method.to_ascii_lowercase().as_str() {
        "log" => BaselineSpec::LaplacianOfGaussian { varsigma, zero_tol },
        "canny" => BaselineSpec::Canny { low, high, varsigma },
        other => BaselineSpec::Gradient {
            operator: other.parse::<GradientOperator>().map_err(to_py)?,
            threshold,
        },
    };
    Ok(mask_out(py, &spec.detect(&img).map_err(to_py)?))
}

/// Smallest stabilizer that keeps the schemes inside [0, 1].
#[pyfunction]
#[pyo3(signature = (epsilon, lambda1 = 1.0, lambda2 = 1.0, epsilon1 = 0.5))]
fn stabilizer_bound(epsilon: f64, lambda1: f64, lambda2: f64, epsilon1: f64) -> f64 {
    etd::stabilizer_bound(epsilon, epsilon1, lambda1, lambda2)
}

#[pyfunction]
fn phi(k: usize, a: f64) -> f64 {
    etd::phi(k, a)
}

/// `steps` time steps of the phase-field equation with frozen means.
#[pyfunction]
#[pyo3(signature = (u, image, c1, c2, epsilon = 0.1, lambda1 = 1.0, lambda2 = 1.0, dt = 0.1, steps = 1, scheme = "etd1", stabilizer = None))]
#[allow(clippy::too_many_arguments)]
fn evolve<'py>(
    py: Python<'py>,
    u: PyReadonlyArray2<'py, f64>,
    image: PyReadonlyArray2<'py, f64>,
    c1: f64,
    c2: f64,
    epsilon: f64,
    lambda1: f64,
    lambda2: f64,
    dt: f64,
    steps: usize,
    scheme: &str,
    stabilizer: Option<f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let (mut field, img) = (gray(&u)?, gray(&image)?);
    let scheme = self::scheme(scheme)?;
    let mut p = SolverParams::new(epsilon, lambda1, lambda2);
    p.dt = dt;
    if let Some(s) = stabilizer {
        p.stabilizer = s;
    }
    let out = py
        .detach(|| -> acseg::Result<GrayImage> {
            let plan = SpectralPlan::new(field.width(), field.height(), &p)?;
            img.check_same_dims(&field)?;
            let f = FittingField::new(&img, c1, c2, lambda1, lambda2);
            for _ in 0..steps {
                field = etd::step(scheme, &field, &f, &plan, &p)?;
            }
            Ok(field)
        })
        .map_err(to_py)?;
    Ok(image_out(py, &out))
}

/// Discrete segmentation energy of `u` for the given means.
#[pyfunction]
#[pyo3(signature = (u, image, c1, c2, epsilon = 0.1, lambda1 = 1.0, lambda2 = 1.0))]
fn energy(
    u: PyReadonlyArray2<'_, f64>,
    image: PyReadonlyArray2<'_, f64>,
    c1: f64,
    c2: f64,
    epsilon: f64,
    lambda1: f64,
    lambda2: f64,
) -> PyResult<f64> {
    let p = SolverParams::new(epsilon, lambda1, lambda2);
    etd::discrete_energy(&gray(&u)?, c1, c2, &gray(&image)?, &p).map_err(to_py)
}

/// Outcome of [`segment`].
#[pyclass(frozen)]
struct SegmentationResult {
    inner: segmentation::SegmentationResult,
}

#[pymethods]
impl SegmentationResult {
    #[getter]
    fn phase<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        image_out(py, &self.inner.phase)
    }

    #[getter]
    fn mask<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<bool>> {
        mask_out(py, &self.inner.mask)
    }

    #[getter]
    fn c1(&self) -> f64 {
        self.inner.c1
    }

    #[getter]
    fn c2(&self) -> f64 {
        self.inner.c2
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn outer_loops(&self) -> usize {
        self.inner.outer_loops
    }

    #[getter]
    fn inner_steps(&self) -> Vec<usize> {
        self.inner.inner_steps.clone()
    }

    #[getter]
    fn min_u(&self) -> f64 {
        self.inner.min_u()
    }

    #[getter]
    fn max_u(&self) -> f64 {
        self.inner.max_u()
    }

    #[getter]
    fn seconds(&self) -> f64 {
        self.inner.elapsed.as_secs_f64()
    }

    fn summary(&self) -> String {
        self.inner.summary()
    }

    fn diagnostics_csv(&self) -> String {
        self.inner.diagnostics_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "SegmentationResult(converged={}, outer_loops={}, c1={:.6}, c2={:.6})",
            self.inner.converged, self.inner.outer_loops, self.inner.c1, self.inner.c2
        )
    }
}

/// Two-stage segmentation. `init` is "threshold", "nonlocal" or "mask"
/// (the latter needs `init_mask`).
#[pyfunction]
#[pyo3(signature = (
    image, scheme = "etd1", init = "threshold", i0 = 0.5, init_mask = None,
    delta = 4, alpha = 1.0, sigma = 0.05,
    lambda1 = 1.0, lambda2 = 1.0, stage1_epsilon = 5.0, stage2_epsilon = 0.1,
    epsilon1 = 0.5, dt = 0.1, steady_tol = 1e-6, max_steps = 10_000,
    outer_tol = 1e-4, max_outer = 50, outer_criterion = "field", stabilizer = None
))]
#[allow(clippy::too_many_arguments)]
fn segment(
    py: Python<'_>,
    image: PyReadonlyArray2<'_, f64>,
    scheme: &str,
    init: &str,
    i0: f64,
    init_mask: Option<PyReadonlyArray2<'_, bool>>,
    delta: usize,
    alpha: f64,
    sigma: f64,
    lambda1: f64,
    lambda2: f64,
    stage1_epsilon: f64,
    stage2_epsilon: f64,
    epsilon1: f64,
    dt: f64,
    steady_tol: f64,
    max_steps: usize,
    outer_tol: f64,
    max_outer: usize,
    outer_criterion: &str,
    stabilizer: Option<f64>,
) -> PyResult<SegmentationResult> {
    let img = gray(&image)?;
    let init = match init {
        "threshold" => Init::Threshold(i0),
        "nonlocal" => Init::Nonlocal {
            spec: KernelSpec::new(delta, alpha).map_err(to_py)?,
            sigma,
        },
        "mask" => Init::Mask(mask_in(
            init_mask
                .as_ref()
                .ok_or_else(|| PyValueError::new_err("init='mask' needs init_mask"))?,
        )?),
        other => return Err(PyValueError::new_err(format!("unknown init '{other}'"))),
    };
    let outer_criterion = match outer_criterion {
        "field" => OuterCriterion::Field,
        "mask" => OuterCriterion::Mask,
        other => return Err(PyValueError::new_err(format!("unknown outer criterion '{other}'"))),
    };
    let cfg = SegConfig {
        stage1_epsilon,
        stage2_epsilon,
        lambda1,
        lambda2,
        epsilon1,
        dt,
        steady_tol,
        max_steps,
        outer_tol,
        max_outer,
        scheme: self::scheme(scheme)?,
        init,
        stabilizer,
        outer_criterion,
        ..SegConfig::default()
    };
    let inner = py.detach(|| segmentation::segment(&img, &cfg)).map_err(to_py)?;
    Ok(SegmentationResult { inner })
}

/// `(fpr, fnr, rse)` of mask `s1` against mask `s2`.
#[pyfunction]
fn mask_scores(s1: PyReadonlyArray2<'_, bool>, s2: PyReadonlyArray2<'_, bool>) -> PyResult<(f64, f64, f64)> {
    let r = mask_metrics(&mask_in(&s1)?, &mask_in(&s2)?).map_err(to_py)?;
    Ok((r.fpr, r.fnr, r.rse))
}

/// Relative L1 error of a phase field against the exact mask.
#[pyfunction]
fn seg_error(u: PyReadonlyArray2<'_, f64>, exact: PyReadonlyArray2<'_, bool>) -> PyResult<f64> {
    core_seg_error(&gray(&u)?, &mask_in(&exact)?).map_err(to_py)
}

type ImageAndMask<'py> = (Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<bool>>);

/// Centered disk test image and its truth mask, with seeded Gaussian noise.
#[pyfunction]
#[pyo3(signature = (width, height, radius, noise_std = 0.0, seed = 0))]
fn synth_disk<'py>(
    py: Python<'py>,
    width: usize,
    height: usize,
    radius: f64,
    noise_std: f64,
    seed: u64,
) -> PyResult<ImageAndMask<'py>> {
    let (clean, truth) =
        synth_two_phase(width, height, &ShapeSpec::centered_disk(width, height, radius)).map_err(to_py)?;
    let img = if noise_std > 0.0 {
        add_gaussian_noise(&clean, 0.0, noise_std, seed).map_err(to_py)?
    } else {
        clean
    };
    Ok((image_out(py, &img), mask_out(py, &truth)))
}

#[pymodule]
fn acseg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SegmentationResult>()?;
    m.add_function(wrap_pyfunction!(nonlocal_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(detect_edges, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_edges, m)?)?;
    m.add_function(wrap_pyfunction!(stabilizer_bound, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(mask_scores, m)?)?;
    m.add_function(wrap_pyfunction!(seg_error, m)?)?;
    m.add_function(wrap_pyfunction!(synth_disk, m)?)?;
    Ok(())
}
