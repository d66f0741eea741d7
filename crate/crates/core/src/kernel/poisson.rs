use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Tail of a Poisson(λ) variable at `H`, with the constant-free bound
/// `λ^H / H!` and the Stirling form of that bound (constant set to 1,
/// reported for information only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub lam: f64,
    pub h: u64,
    pub exact_tail: f64,
    pub simple_bound: f64,
    pub stirling_form: Option<f64>,
}

fn ln_pmf(lam: f64, k: u64) -> f64 {
    -lam + k as f64 * lam.ln() - ln_gamma(k as f64 + 1.0)
}

/// `P(Y >= h)` for `Y ~ Poisson(lam)`, `lam >= 0`.
pub fn poisson_tail(lam: f64, h: u64) -> TailBound {
    let simple_bound = if h == 0 {
        1.0
    } else if lam == 0.0 {
        0.0
    } else {
        (h as f64 * lam.ln() - ln_gamma(h as f64 + 1.0)).exp()
    };
    let stirling_form = (h > 0 && lam > 0.0).then(|| {
        let hf = h as f64;
        (hf * lam.ln() - 0.5 * hf.ln() - hf * hf.ln() + hf).exp()
    });
    TailBound {
        lam,
        h,
        exact_tail: exact_tail(lam, h),
        simple_bound,
        stirling_form,
    }
}

fn exact_tail(lam: f64, h: u64) -> f64 {
    if h == 0 {
        return 1.0;
    }
    if lam == 0.0 {
        return 0.0;
    }
    if (h as f64) <= lam {
        // The tail is at least about one half here; the complement is stable.
        let head: f64 = (0..h).map(|k| ln_pmf(lam, k).exp()).sum();
        return (1.0 - head).clamp(0.0, 1.0);
    }
    // Forward sum; terms decrease geometrically with ratio lam/(k+1) < 1.
    let mut pmf = ln_pmf(lam, h).exp();
    let mut sum = 0.0;
    let mut k = h as f64;
    while pmf > 0.0 {
        sum += pmf;
        let ratio = lam / (k + 1.0);
        if pmf * ratio / (1.0 - ratio) < sum * 1e-17 {
            break;
        }
        pmf *= ratio;
        k += 1.0;
    }
    sum.min(1.0)
}

/// Upper bound on the probability that the Laplacian walk started at
/// ℓ¹-norm `start_norm` has left `D_N` by time `t`: the walk needs at
/// least `N - start_norm` jumps, and its jump count is Poisson(2d·t).
pub fn exit_prob_bound(n: u32, t: f64, start_norm: u64, dim: usize) -> Result<f64> {
    if n as u64 <= start_norm {
        return Err(Error::Precondition(format!(
            "box radius {n} must exceed the start norm {start_norm}"
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    Ok(poisson_tail(2.0 * dim as f64 * t, n as u64 - start_norm).exact_tail)
}
