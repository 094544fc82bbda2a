//! Small numeric helpers: Gauss-Legendre panels and compensated summation.

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Calls `f(x, w)` for each of the 8 Gauss-Legendre nodes mapped onto `[a, b]`.
pub(crate) fn gauss_legendre_8(a: f64, b: f64, mut f: impl FnMut(f64, f64)) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (&x, &w) in GL8_NODES.iter().zip(&GL8_WEIGHTS) {
        f(mid - half * x, half * w);
        f(mid + half * x, half * w);
    }
}

/// Composite 8-point Gauss-Legendre rule with `panels` equal panels.
pub fn integrate(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let panels = panels.max(1);
    let step = (b - a) / panels as f64;
    let mut acc = NeumaierSum::default();
    for k in 0..panels {
        let lo = a + step * k as f64;
        gauss_legendre_8(lo, lo + step, |x, w| acc.add(w * f(x)));
    }
    acc.value()
}

/// Neumaier's improved Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = NeumaierSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
