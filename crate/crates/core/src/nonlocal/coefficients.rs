use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::KernelSpec;
use crate::error::{ensure_arg, Error, Result};
use crate::quadrature::gauss_legendre_8;

/// Maximum change of any weight allowed when the quadrature level doubles.
pub const COEFF_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_QUAD_LEVEL: usize = 4;

const FORMAT_TAG: &str = "acseg-coeff-table";
const FORMAT_VERSION: u32 = 1;

/// Stencil weights `c[p][q]`, `0 <= p, q <= delta`, of the nonlocal Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffTable {
    spec: KernelSpec,
    quad_level: usize,
    weights: Vec<f64>,
}

impl CoeffTable {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn delta(&self) -> usize {
        self.spec.delta()
    }

    pub fn quad_level(&self) -> usize {
        self.quad_level
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.weights[p * (self.delta() + 1) + q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nonzero entries as `(p, q, c)`, in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.delta() + 1;
        (0..n)
            .flat_map(|p| (0..n).map(move |q| (p, q)))
            .map(|(p, q)| (p, q, self.get(p, q)))
            .filter(|&(_, _, c)| c != 0.0)
            .collect()
    }

    /// Serializes to the versioned text format read by [`CoeffTable::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_TAG} v{FORMAT_VERSION}");
        let _ = writeln!(out, "delta {}", self.delta());
        let _ = writeln!(out, "alpha {:e}", self.spec.alpha());
        let _ = writeln!(out, "quad_level {}", self.quad_level);
        let _ = writeln!(out, "tolerance {COEFF_TOLERANCE:e}");
        let n = self.delta() + 1;
        for p in 0..n {
            let row: Vec<String> = (0..n).map(|q| format!("{:e}", self.get(p, q))).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Format(format!("coefficient table: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        if header.trim() != format!("{FORMAT_TAG} v{FORMAT_VERSION}") {
            return Err(bad(&format!("unsupported header '{header}'")));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (k, v) = line.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
            if k != key {
                return Err(bad(&format!("expected '{key}', found '{k}'")));
            }
            Ok(v.trim().to_string())
        };
        let delta: usize = field("delta")?.parse().map_err(|_| bad("delta"))?;
        let alpha: f64 = field("alpha")?.parse().map_err(|_| bad("alpha"))?;
        let quad_level: usize = field("quad_level")?.parse().map_err(|_| bad("quad_level"))?;
        let _tolerance: f64 = field("tolerance")?.parse().map_err(|_| bad("tolerance"))?;
        let spec = KernelSpec::new(delta, alpha)?;

        let n = delta + 1;
        let mut weights = Vec::with_capacity(n * n);
        for line in lines {
            for tok in line.split_whitespace() {
                weights.push(tok.parse::<f64>().map_err(|_| bad("weight"))?);
            }
        }
        if weights.len() != n * n {
            return Err(bad(&format!("expected {} weights, found {}", n * n, weights.len())));
        }
        let table = Self {
            spec,
            quad_level,
            weights,
        };
        table.check_invariants().map_err(|e| bad(&e.to_string()))?;
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn check_invariants(&self) -> Result<()> {
        let n = self.delta() + 1;
        ensure_arg!(self.get(0, 0) == 0.0, "c[0][0] must vanish");
        for p in 0..n {
            for q in 0..n {
                let c = self.get(p, q);
                ensure_arg!(c.is_finite() && c >= 0.0, "weight c[{p}][{q}] = {c} is invalid");
                ensure_arg!(c == self.get(q, p), "table is not symmetric at ({p}, {q})");
            }
        }
        Ok(())
    }
}

/// Directory-backed store of coefficient tables keyed by
/// (delta, alpha, quadrature level).
#[derive(Clone, Debug)]
pub struct CoeffCache {
    dir: PathBuf,
}

impl CoeffCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, spec: &KernelSpec, quad_level: usize) -> PathBuf {
        self.dir.join(format!(
            "coeff_d{}_a{:016x}_q{}.txt",
            spec.delta(),
            spec.alpha().to_bits(),
            quad_level
        ))
    }

    /// Loads the cached table, computing and storing it on a miss. A corrupt
    /// cache entry is recomputed and overwritten.
    pub fn table(&self, spec: &KernelSpec, quad_level: usize) -> Result<CoeffTable> {
        let path = self.path_for(spec, quad_level);
        if path.exists() {
            match CoeffTable::load(&path) {
                Ok(t) if t.spec == *spec && t.quad_level == quad_level => return Ok(t),
                Ok(_) | Err(Error::Format(_)) => {
                    log::warn!("ignoring stale coefficient cache {}", path.display())
                }
                Err(e) => return Err(e),
            }
        }
        let table = compute_coefficients(spec, quad_level)?;
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        table.save(&path)?;
        Ok(table)
    }
}

/// Quadrature weights of the nonlocal Laplacian stencil.
///
/// `c[p][q] = (p+q)/(p^2+q^2) * integral over the quarter disk of
/// phi_pq(x,y) rho(r) r^2/(x+y)`, with `phi_pq` the bilinear hat function
/// at node `(p,q)` and unit mesh size. Along a ray at angle `t` each hat
/// function is a quadratic in `r` on every cell it crosses, so the radial
/// integral is exact; the angular integral uses composite Gauss-Legendre
/// panels between every angle where the cell pattern along the ray changes.
/// `quad_level` is the number of panels per such angular interval.
///
/// The table is computed at `quad_level` and `2 * quad_level`; if any weight
/// moves by more than [`COEFF_TOLERANCE`] a convergence error is returned.
pub fn compute_coefficients(spec: &KernelSpec, quad_level: usize) -> Result<CoeffTable> {
    ensure_arg!(quad_level >= 1, "quadrature level must be >= 1");
    let coarse = weights_at_level(spec, quad_level);
    let fine = weights_at_level(spec, 2 * quad_level);
    let worst = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(worst <= COEFF_TOLERANCE) {
        return Err(Error::Convergence(format!(
            "weights moved by {worst:e} between quadrature levels {quad_level} and {}",
            2 * quad_level
        )));
    }
    let table = CoeffTable {
        spec: *spec,
        quad_level,
        weights: fine,
    };
    table.check_invariants()?;
    Ok(table)
}

/// Angles in [0, pi/4] where the sequence of cells met along a ray changes:
/// directions of grid nodes inside the disk and the angles at which grid
/// lines leave the disk.
fn angular_breaks(delta: usize) -> Vec<f64> {
    let d = delta as f64;
    let mut breaks = vec![0.0, FRAC_PI_4];
    for p in 1..=delta {
        for q in 0..=p {
            if p * p + q * q <= delta * delta {
                breaks.push((q as f64).atan2(p as f64));
            }
        }
    }
    for k in 1..delta {
        let k = k as f64;
        breaks.push((k / d).acos());
        breaks.push((k / d).asin());
    }
    breaks.retain(|t| (0.0..=FRAC_PI_4).contains(t));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    breaks
}

/// Integral of r^(n + 2 - alpha) over [ra, rb].
#[inline]
fn radial_power(n: i32, alpha: f64, ra: f64, rb: f64) -> f64 {
    let e = f64::from(n) + 3.0 - alpha;
    if e == 0.0 {
        (rb / ra).ln()
    } else {
        (rb.powf(e) - if ra == 0.0 { 0.0 } else { ra.powf(e) }) / e
    }
}

fn weights_at_level(spec: &KernelSpec, panels: usize) -> Vec<f64> {
    let delta = spec.delta();
    let d = delta as f64;
    let n = delta + 1;
    let alpha = spec.alpha();
    let scale = spec.scale();

    // Octant integrals J[p][q] over t in [0, pi/4]; the other octant follows
    // from the x <-> y reflection, which makes the table symmetric exactly.
    let mut octant = vec![0.0; n * n];
    let breaks = angular_breaks(delta);
    let mut radii = Vec::with_capacity(2 * delta + 2);

    for pair in breaks.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        let step = (t1 - t0) / panels as f64;
        for k in 0..panels {
            let lo = t0 + step * k as f64;
            gauss_legendre_8(lo, lo + step, |t, wt| {
                let (s, c) = t.sin_cos();
                radii.clear();
                radii.push(0.0);
                for k in 1..=delta {
                    let k = k as f64;
                    let rx = k / c;
                    if rx < d {
                        radii.push(rx);
                    }
                    if s > 0.0 {
                        let ry = k / s;
                        if ry < d {
                            radii.push(ry);
                        }
                    }
                }
                radii.push(d);
                radii.sort_by(f64::total_cmp);

                let angular = wt * scale / (c + s);
                for seg in radii.windows(2) {
                    let (ra, rb) = (seg[0], seg[1]);
                    if rb <= ra {
                        continue;
                    }
                    let rm = 0.5 * (ra + rb);
                    let a = ((rm * c).floor() as usize).min(delta - 1);
                    let b = ((rm * s).floor() as usize).min(delta - 1);
                    let m0 = radial_power(0, alpha, ra, rb);
                    let m1 = radial_power(1, alpha, ra, rb);
                    let m2 = radial_power(2, alpha, ra, rb);
                    for (p, sx, tx) in [(a, -1.0, 1.0 + a as f64), (a + 1, 1.0, -(a as f64))] {
                        for (q, sy, ty) in [(b, -1.0, 1.0 + b as f64), (b + 1, 1.0, -(b as f64))] {
                            if p == 0 && q == 0 {
                                continue;
                            }
                            // hat(x, y) = (sx x + tx)(sy y + ty) with x = r c, y = r s
                            let c0 = tx * ty;
                            let c1 = sx * c * ty + tx * sy * s;
                            let c2 = sx * sy * c * s;
                            let mut v = c1 * m1 + c2 * m2;
                            if c0 != 0.0 {
                                v += c0 * m0;
                            }
                            octant[p * n + q] += angular * v;
                        }
                    }
                }
            });
        }
    }

    let mut weights = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            if p == 0 && q == 0 {
                continue;
            }
            let integral = octant[p * n + q] + octant[q * n + p];
            let (pf, qf) = (p as f64, q as f64);
            weights[p * n + q] = (pf + qf) / (pf * pf + qf * qf) * integral;
        }
    }
    weights
}
