//! Exponential-integrator weight functions
//! `phi0(a) = e^-a`, `phi1(a) = (1 - e^-a)/a`, `phi2(a) = (e^-a - 1 + a)/a^2`.

/// Below this argument the closed forms lose digits to cancellation and the
/// Taylor series is used instead.
pub const SERIES_SWITCH: f64 = 0.1;

// phi_k(a) = sum_j (-a)^j / (j + k)!; 12 terms leave a tail below 3e-21 at the switch.
const SERIES_TERMS: usize = 12;

#[inline]
fn series(k: usize, a: f64) -> f64 {
    // Horner on the coefficients 1/(j+k)!
    let mut coeffs = [0.0; SERIES_TERMS];
    let mut fact = (1..=k).map(|i| i as f64).product::<f64>();
    for (j, c) in coeffs.iter_mut().enumerate() {
        if j > 0 {
            fact *= (j + k) as f64;
        }
        *c = 1.0 / fact;
    }
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * -a + c)
}

#[inline]
pub fn phi0(a: f64) -> f64 {
    (-a).exp()
}

#[inline]
pub fn phi1(a: f64) -> f64 {
    if a.abs() < SERIES_SWITCH {
        series(1, a)
    } else {
        -(-a).exp_m1() / a
    }
}

#[inline]
pub fn phi2(a: f64) -> f64 {
    if a.abs() < SERIES_SWITCH {
        series(2, a)
    } else {
        ((-a).exp_m1() + a) / (a * a)
    }
}

/// `phi_k(a)` for `k` in {0, 1, 2}.
///
/// # Panics
/// For any other `k`.
pub fn phi(k: usize, a: f64) -> f64 {
    match k {
        0 => phi0(a),
        1 => phi1(a),
        2 => phi2(a),
        _ => panic!("phi_{k} is not provided"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_at_zero() {
        assert_eq!(phi(0, 0.0), 1.0);
        assert_eq!(phi(1, 0.0), 1.0);
        assert_eq!(phi(2, 0.0), 0.5);
    }

    #[test]
    fn tiny_argument_matches_taylor() {
        let a = 1e-12;
        let oracle = 1.0 - a / 2.0 + a * a / 6.0;
        assert!((phi1(a) - oracle).abs() <= 1e-15);
        assert!((phi1(a) - (1.0 - 5e-13)).abs() <= 1e-15);
    }

    #[test]
    fn continuous_across_switch() {
        let a = SERIES_SWITCH;
        let closed1 = -(-a).exp_m1() / a;
        let closed2 = ((-a).exp_m1() + a) / (a * a);
        assert!((series(1, a) - closed1).abs() < 1e-15);
        assert!((series(2, a) - closed2).abs() < 1e-14);
    }

    #[test]
    fn algebraic_identities() {
        for a in [1e-14, 1e-8, 1e-3, 0.05, 0.1, 0.3, 1.0, 7.5, 50.0, 1e3] {
            assert!((a * phi1(a) + phi0(a) - 1.0).abs() < 1e-15, "a={a}");
            assert!((a * phi2(a) - (1.0 - phi1(a))).abs() < 1e-15, "a={a}");
        }
    }

    #[test]
    fn relative_accuracy_against_high_precision_sums() {
        // Reference values from the alternating series summed to convergence
        // in extended form: compare series and closed form where both are
        // accurate (a between 1e-2 and 1).
        for a in [0.02f64, 0.05, 0.09, 0.11, 0.5] {
            let reference1: f64 = (0..40)
                .map(|j| (-a).powi(j) / (1..=j + 1).map(f64::from).product::<f64>())
                .sum();
            let reference2: f64 = (0..40)
                .map(|j| (-a).powi(j) / (1..=j + 2).map(f64::from).product::<f64>())
                .sum();
            assert!(((phi1(a) - reference1) / reference1).abs() < 1e-14);
            assert!(((phi2(a) - reference2) / reference2).abs() < 1e-14);
        }
    }
}
