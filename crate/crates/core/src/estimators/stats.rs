use serde::{Deserialize, Serialize};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Width of the acceptance bands for sample means, in standard errors.
pub const SE_BAND: f64 = 4.0;

/// A binomial proportion with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub n: u64,
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Proportion {
    pub fn wilson(successes: u64, n: u64) -> Self {
        assert!(n > 0 && successes <= n);
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        Proportion {
            successes,
            n,
            p_hat: p,
            lower: (center - half).max(0.0),
            upper: (center + half).min(1.0),
        }
    }

    /// A proportion known without sampling error.
    pub fn exact(successes: u64, n: u64) -> Self {
        let p = successes as f64 / n as f64;
        Proportion {
            successes,
            n,
            p_hat: p,
            lower: p,
            upper: p,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Sample moments of a list of observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    /// Fourth central moment (biased).
    pub m4: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "need at least two observations");
        let nf = n as f64;
        if xs.iter().all(|x| *x == xs[0]) {
            return Moments {
                n,
                mean: xs[0],
                var: 0.0,
                m4: 0.0,
            };
        }
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut s2, mut s4) = (0.0, 0.0);
        for x in xs {
            let d = x - mean;
            s2 += d * d;
            s4 += d * d * d * d;
        }
        Moments {
            n,
            mean,
            var: s2 / (nf - 1.0),
            m4: s4 / nf,
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        (self.var / self.n as f64).sqrt()
    }

    /// Relative standard error of the sample variance,
    /// `sqrt((m4/σ⁴ - 1)/n)`; zero for constant samples.
    pub fn var_rel_se(&self) -> f64 {
        if self.var == 0.0 {
            return 0.0;
        }
        let kurt = self.m4 / (self.var * self.var);
        ((kurt - 1.0).max(0.0) / self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // statsmodels proportion_confint(method="wilson")
        let p = Proportion::wilson(37, 100);
        assert!((p.lower - 0.281_823_605_343_245_3).abs() < 1e-12);
        assert!((p.upper - 0.467_794_704_190_571).abs() < 1e-12);
        let p = Proportion::wilson(0, 200);
        assert_eq!(p.lower, 0.0);
        assert!((p.upper - 0.018_845_326_377_266_58).abs() < 1e-12);
        let p = Proportion::exact(5, 5);
        assert_eq!(p.half_width(), 0.0);
    }

    #[test]
    fn moments_of_small_sample() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.var - 5.0 / 3.0).abs() < 1e-15);
        assert!((m.m4 - (2.0 * 5.0625 + 2.0 * 0.0625) / 4.0).abs() < 1e-15);
        assert_eq!(Moments::of(&[2.0, 2.0]).var_rel_se(), 0.0);
    }
}
