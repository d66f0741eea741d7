//! Closed-form series for the continuous-time simple random walk.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lattice::Site;

/// Per-coordinate jump rate of the walk generated by the discrete Laplacian
/// (rate 1 to each of the two neighbours along an axis).
pub const LAPLACIAN_AXIS_RATE: f64 = 2.0;

fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// `P_0(ξ_t = x)` for the 1-d walk that jumps at total rate `rate`, half
/// the jumps to each side:
///
/// ```text
/// p = e^{-rate·t} (rate·t/2)^{|x|} Σ_n (rate·t/2)^{2n} / (n! (n+|x|)!)
/// ```
///
/// Returns `(value, omitted)` where `omitted` bounds the truncated tail
/// (`omitted < tol`). Consecutive term ratios `a²/((n+1)(n+|x|+1))` are
/// decreasing, so once a ratio drops below one the remaining tail is
/// dominated by a geometric series.
pub fn rw_kernel_1d_with_error(rate: f64, t: f64, x: i64, tol: f64) -> Result<(f64, f64)> {
    check_series_args(rate, t, tol)?;
    let k = x.unsigned_abs();
    if t == 0.0 {
        return Ok((if k == 0 { 1.0 } else { 0.0 }, 0.0));
    }
    let a = 0.5 * rate * t;
    let lead = (-rate * t + k as f64 * a.ln() - ln_factorial(k)).exp();
    if lead == 0.0 {
        return Ok((0.0, 0.0));
    }
    let kf = k as f64;
    let a2 = a * a;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut n = 0.0;
    loop {
        let next = term * a2 / ((n + 1.0) * (n + kf + 1.0));
        let ratio_after = a2 / ((n + 2.0) * (n + kf + 2.0));
        if ratio_after < 1.0 {
            let tail = lead * next / (1.0 - ratio_after);
            if tail < tol {
                return Ok((lead * sum, tail));
            }
        }
        sum += next;
        term = next;
        n += 1.0;
    }
}

/// Value part of [`rw_kernel_1d_with_error`].
pub fn rw_kernel_1d(rate: f64, t: f64, x: i64, tol: f64) -> Result<f64> {
    rw_kernel_1d_with_error(rate, t, x, tol).map(|(v, _)| v)
}

/// `P_0(ξ_t = x)` for the walk generated by the discrete Laplacian on Z^d,
/// i.e. the product of `d` independent 1-d walks of rate 2. Each factor is
/// evaluated to `tol / d`, so the product is within `tol`.
pub fn rw_kernel(t: f64, x: &Site, tol: f64) -> Result<f64> {
    let d = x.dim() as f64;
    x.coords().iter().try_fold(1.0, |acc, &xi| {
        Ok(acc * rw_kernel_1d(LAPLACIAN_AXIS_RATE, t, xi as i64, tol / d)?)
    })
}

/// Two-sided bound for the 1-d series:
/// `e^{-rate·t} (rate·t/2)^{|x|}/|x|! <= p <= (rate·t/2)^{|x|}/|x|!`.
pub fn series_sandwich_1d(rate: f64, t: f64, x: i64) -> (f64, f64) {
    let k = x.unsigned_abs();
    if t == 0.0 {
        let v = if k == 0 { 1.0 } else { 0.0 };
        return (v, v);
    }
    let ln_upper = k as f64 * (0.5 * rate * t).ln() - ln_factorial(k);
    ((ln_upper - rate * t).exp(), ln_upper.exp())
}

/// Two-sided bound for the Laplacian walk on Z^d:
/// `e^{-2dt} t^{|x|}/Π|x_i|! <= P_0(ξ_t = x) <= t^{|x|}/Π|x_i|!`.
pub fn laplacian_sandwich(t: f64, x: &Site) -> (f64, f64) {
    if t == 0.0 {
        let v = if x.norm() == 0 { 1.0 } else { 0.0 };
        return (v, v);
    }
    let d = x.dim() as f64;
    let ln_upper: f64 = x
        .coords()
        .iter()
        .map(|&c| {
            let k = c.unsigned_abs() as u64;
            k as f64 * t.ln() - ln_factorial(k)
        })
        .sum();
    ((ln_upper - 2.0 * d * t).exp(), ln_upper.exp())
}

fn check_series_args(rate: f64, t: f64, tol: f64) -> Result<()> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::param("rate", format!("must be positive, got {rate}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn site(c: &[i32]) -> Site {
        Site::new(c).unwrap()
    }

    #[test]
    fn time_zero_is_a_point_mass() {
        assert_eq!(rw_kernel_1d(1.0, 0.0, 0, TOL).unwrap(), 1.0);
        assert_eq!(rw_kernel_1d(1.0, 0.0, 3, TOL).unwrap(), 0.0);
        assert_eq!(rw_kernel(0.0, &site(&[0, 0, 0]), TOL).unwrap(), 1.0);
        assert_eq!(rw_kernel(0.0, &site(&[0, 1]), TOL).unwrap(), 0.0);
    }

    #[test]
    fn unit_rate_origin_value() {
        // e^{-1} I_0(1), 30-digit reference
        let p = rw_kernel_1d(1.0, 1.0, 0, TOL).unwrap();
        assert!((p - 0.465_759_607_593_640_4).abs() < 1e-12);
        assert!(p >= (-1f64).exp() && p <= 1.0);
    }

    #[test]
    fn unit_rate_x2_sandwich() {
        let p = rw_kernel_1d(1.0, 1.0, 2, TOL).unwrap();
        assert!((p - 0.049_938_776_894_223_54).abs() < 1e-12);
        let (lo, hi) = series_sandwich_1d(1.0, 1.0, 2);
        assert!((lo - (-1f64).exp() / 8.0).abs() < 1e-15);
        assert!((hi - 0.125).abs() < 1e-15);
        assert!(lo <= p && p <= hi);
    }

    #[test]
    fn symmetric_in_x() {
        for x in 0..10 {
            assert_eq!(
                rw_kernel_1d(1.7, 0.9, x, TOL).unwrap(),
                rw_kernel_1d(1.7, 0.9, -x, TOL).unwrap()
            );
        }
    }

    #[test]
    fn laplacian_values() {
        // e^{-2} I_0(2) and its square
        let p1 = rw_kernel(1.0, &site(&[0]), TOL).unwrap();
        assert!((p1 - 0.308_508_322_553_671_04).abs() < 1e-12);
        let p2 = rw_kernel(1.0, &site(&[0, 0]), TOL).unwrap();
        assert!((p2 - 0.095_177_385_084_879_93).abs() < 1e-12);
        let (lo, hi) = laplacian_sandwich(1.0, &site(&[0, 0]));
        assert!((lo - (-4f64).exp()).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        assert!(lo <= p2 && p2 <= hi);
        // e^{-2} I_5(2)
        let p5 = rw_kernel(1.0, &site(&[5]), 1e-16).unwrap();
        assert!((p5 - 1.329_761_094_188_157_8e-3).abs() < 1e-16);
        let (lo, hi) = laplacian_sandwich(1.0, &site(&[5]));
        assert!((lo - (-2f64).exp() / 120.0).abs() < 1e-16);
        assert!((hi - 1.0 / 120.0).abs() < 1e-16);
        assert!(lo <= p5 && p5 <= hi);
    }

    #[test]
    fn single_exponent_lower_bound_fails_for_laplacian_walk() {
        // The variant e^{-dt} t^{|x|}/Π|x_i|! is not a valid lower bound for
        // the rate-2d walk: at d = 1, t = 1 it exceeds the kernel at x = 0 and x = 5.
        for (x, p) in [(0, 0.308_508_322_553_671_04), (5, 1.329_761_094_188_157_8e-3)] {
            let (_, upper) = laplacian_sandwich(1.0, &site(&[x]));
            let wrong_lower = (-1f64).exp() * upper;
            assert!(wrong_lower > p);
            assert!((rw_kernel(1.0, &site(&[x]), TOL).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn omitted_tail_is_below_tolerance() {
        for tol in [1e-4, 1e-8, 1e-12] {
            let (v, omitted) = rw_kernel_1d_with_error(3.0, 2.0, 1, tol).unwrap();
            assert!(omitted < tol);
            let reference = rw_kernel_1d(3.0, 2.0, 1, 1e-15).unwrap();
            assert!(reference - v <= tol && reference >= v);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(rw_kernel_1d(0.0, 1.0, 0, TOL).is_err());
        assert!(rw_kernel_1d(1.0, -1.0, 0, TOL).is_err());
        assert!(rw_kernel_1d(1.0, 1.0, 0, 0.0).is_err());
    }
}
