//! Exact transition sampler for the driftless power-law diffusion
//! `dX = X^γ dB`, `γ ∈ [1/2, 1]`, absorbed at zero.
//!
//! For `γ < 1` put `q = 1 - γ`. Then `Y = X^{2q} / q²` is a squared Bessel
//! process of dimension `δ = (1 - 2γ) / q <= 0`, killed at zero. Its law at
//! time `τ` from `y` is a Poisson–Gamma mixture: with `μ = y / (2τ)` and
//! `s = 1 / (2q)`, draw `J` from
//!
//! ```text
//! P(J = n) = e^{-μ} μ^{n+s} / Γ(n+s+1),   n = 0, 1, ...
//! ```
//!
//! (the remaining probability `Q(s, μ)` is absorption), and given `J = n`
//! set `Y_τ ~ Gamma(n + 1, scale 2τ)`. For `γ = 1/2` this is the familiar
//! compound Poisson–exponential law of the Feller diffusion, with
//! `P(X_τ = 0) = e^{-2x/τ}`. For `γ = 1` the process is a geometric
//! Brownian motion.

use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::noise::{SplitMix64, StreamKey};

/// Beyond this Poisson mean absorption has probability below `e^{-10^12}`
/// and the Gaussian limit of the transition is used.
const GAUSSIAN_LIMIT: f64 = 1e12;
/// Below this mean the mixture index is found by a forward CDF walk.
const FORWARD_WALK_LIMIT: f64 = 30.0;

/// Largest Gamma shape drawn as a sum of exponentials.
const EXPONENTIAL_SUM_LIMIT: f64 = 16.0;

const LANE_INDEX: u64 = 1;
const LANE_GAMMA: u64 = 2;

/// Sample `X_τ` given `X_0 = x` for `dX = X^γ dB`.
pub fn cev_transition(x: f64, gamma: f64, tau: f64, key: StreamKey) -> f64 {
    transition(x, gamma, tau, key, false)
}

/// [`cev_transition`] with the mixture index drawn by inverse CDF at every
/// mean. For a fixed key the result is then non-decreasing in `x` up to
/// rare rejections in the Gamma sampler, which is what a pathwise
/// comparison of two systems needs. Slower for large `x / τ`.
pub fn cev_transition_monotone(x: f64, gamma: f64, tau: f64, key: StreamKey) -> f64 {
    transition(x, gamma, tau, key, true)
}

fn transition(x: f64, gamma: f64, tau: f64, key: StreamKey, monotone: bool) -> f64 {
    debug_assert!((0.5..=1.0).contains(&gamma));
    if x <= 0.0 || tau <= 0.0 {
        return x.max(0.0);
    }
    if gamma >= 1.0 {
        return x * (tau.sqrt() * key.gaussian() - 0.5 * tau).exp();
    }
    let q = 1.0 - gamma;
    let s = 0.5 / q;
    let feller = gamma == 0.5;
    let y0 = if feller {
        4.0 * x
    } else {
        x.powf(2.0 * q) / (q * q)
    };
    let mu = y0 / (2.0 * tau);
    if mu > GAUSSIAN_LIMIT {
        return (x + x.powf(gamma) * tau.sqrt() * key.gaussian()).max(0.0);
    }
    let Some(n) = mixture_index(mu, s, monotone, &mut key.lane(LANE_INDEX)) else {
        return 0.0;
    };
    let y = gamma_draw(n + 1.0, &mut key.lane(LANE_GAMMA)) * 2.0 * tau;
    if feller {
        0.25 * y
    } else {
        (q * q * y).powf(s)
    }
}

/// Unit-scale Gamma variate. Small integer shapes use a sum of
/// exponentials, which is monotone in the shape for a fixed stream.
fn gamma_draw(shape: f64, rng: &mut SplitMix64) -> f64 {
    if shape <= EXPONENTIAL_SUM_LIMIT {
        return (0..shape as u32).map(|_| -rng.open01().ln()).sum();
    }
    Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
}

/// Probability that `dX = X^γ dB` started at `x` is absorbed by time `τ`.
pub fn cev_absorption_probability(x: f64, gamma: f64, tau: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if tau <= 0.0 || gamma >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - gamma;
    let mu = x.powf(2.0 * q) / (q * q) / (2.0 * tau);
    gamma_ur(0.5 / q, mu)
}

/// Draws `J` (as f64), or `None` for absorption. The draw is an inverse-CDF
/// lookup except for integer `s` and large `μ` outside `monotone` mode,
/// where a Poisson sampler is faster.
fn mixture_index(mu: f64, s: f64, monotone: bool, rng: &mut SplitMix64) -> Option<f64> {
    if !monotone && mu >= FORWARD_WALK_LIMIT && s.fract() == 0.0 {
        // J = K - s with K ~ Poisson(μ), absorbed when K < s.
        let k: f64 = Poisson::new(mu).expect("finite positive mean").sample(rng);
        return if k < s { None } else { Some(k - s) };
    }
    let u = rng.open01();
    let ln_pmf = |n: f64| -mu + (n + s) * mu.ln() - ln_gamma(n + s + 1.0);
    if mu < FORWARD_WALK_LIMIT {
        let absorbed = gamma_ur(s, mu);
        if u <= absorbed {
            return None;
        }
        let mut cdf = absorbed;
        let mut pmf = ln_pmf(0.0).exp();
        let mut n = 0.0;
        loop {
            cdf += pmf;
            if u <= cdf || pmf == 0.0 && n > mu {
                return Some(n);
            }
            pmf *= mu / (n + s + 1.0);
            n += 1.0;
        }
    }
    // Start from the mode and walk towards u.
    let n0 = (mu - s).floor().max(0.0);
    let mut cdf = gamma_ur(n0 + 1.0 + s, mu);
    let mut pmf = ln_pmf(n0).exp();
    let mut n = n0;
    if u <= cdf {
        loop {
            let below = cdf - pmf;
            if u > below {
                return Some(n);
            }
            if n == 0.0 {
                return None;
            }
            cdf = below;
            pmf *= (n + s) / mu;
            n -= 1.0;
        }
    }
    loop {
        n += 1.0;
        pmf *= mu / (n + s);
        cdf += pmf;
        if u <= cdf || pmf == 0.0 {
            return Some(n);
        }
    }
}
