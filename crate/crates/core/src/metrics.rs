//! L1 discrepancy ratios between a reference segmentation and a candidate.
//!
//! Degenerate denominators give `+inf` instead of an error so batch
//! comparisons always complete; `0 / 0` is taken as a perfect match (0).

use std::fmt::Write as _;

use crate::error::{ensure_arg, Result};
use crate::quadrature::compensated_sum;
use crate::raster::{EdgeMap, GrayImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub fpr: f64,
    pub fnr: f64,
    pub rse: f64,
    /// `|U - I_ex|_1 / |U|_1`; `NaN` when no phase field was supplied.
    pub err: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "method,fpr,fnr,rse,err,cpu_seconds";

    /// True if any ratio hit a zero denominator.
    pub fn is_degenerate(&self) -> bool {
        [self.fpr, self.fnr, self.rse, self.err]
            .iter()
            .any(|v| v.is_infinite())
    }

    pub fn csv_row(&self, method: &str, cpu_seconds: f64) -> String {
        let mut row = String::new();
        let _ = write!(
            row,
            "{method},{},{},{},{},{cpu_seconds:.6}",
            self.fpr, self.fnr, self.rse, self.err
        );
        row
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn l1(values: impl Iterator<Item = f64>) -> f64 {
    compensated_sum(values.map(f64::abs))
}

/// FPR, FNR and RSE of real-valued fields, applied verbatim.
pub fn field_metrics(s1: &GrayImage, s2: &GrayImage) -> Result<MetricReport> {
    s1.check_same_dims(s2)?;
    let diff = l1(s1.data().iter().zip(s2.data()).map(|(a, b)| a - b));
    let (n1, n2) = (l1(s1.data().iter().copied()), l1(s2.data().iter().copied()));
    Ok(MetricReport {
        fpr: ratio(diff, n1),
        fnr: ratio(diff, n2),
        rse: ratio(diff, n1 + n2),
        err: f64::NAN,
    })
}

/// FPR = |S1 - S2|/|S1|, FNR = |S1 - S2|/|S2|, RSE = |S1 - S2|/(|S1| + |S2|),
/// with `S1` the exact mask.
pub fn mask_metrics(s1: &EdgeMap, s2: &EdgeMap) -> Result<MetricReport> {
    ensure_arg!(
        s1.dims() == s2.dims(),
        "mask dimensions differ: {:?} vs {:?}",
        s1.dims(),
        s2.dims()
    );
    let diff = s1.bits().iter().zip(s2.bits()).filter(|(a, b)| a != b).count() as f64;
    let (n1, n2) = (s1.count() as f64, s2.count() as f64);
    Ok(MetricReport {
        fpr: ratio(diff, n1),
        fnr: ratio(diff, n2),
        rse: ratio(diff, n1 + n2),
        err: f64::NAN,
    })
}

/// Segmentation error `|U - I_ex|_1 / |U|_1`; `+inf` when `U` vanishes
/// but the exact mask does not.
pub fn seg_error(u: &GrayImage, exact: &EdgeMap) -> Result<f64> {
    ensure_arg!(
        u.dims() == exact.dims(),
        "field is {:?}, mask is {:?}",
        u.dims(),
        exact.dims()
    );
    let num = l1(
        u.data()
            .iter()
            .zip(exact.bits())
            .map(|(&v, &m)| v - f64::from(m)),
    );
    Ok(ratio(num, l1(u.data().iter().copied())))
}

/// Mask metrics plus the field error, for a phase field thresholded at 1/2.
pub fn full_report(phase: &GrayImage, exact: &EdgeMap) -> Result<MetricReport> {
    let mut report = mask_metrics(exact, &phase.threshold(0.5))?;
    report.err = seg_error(phase, exact)?;
    Ok(report)
}
