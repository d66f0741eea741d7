//! Invariant suites with fixed seeds. Every check reports a measured
//! quantity against the bound it must respect.

use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::engine::{coupled_run, run_trajectory_with, split_weights, TrajectoryConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    check_mass_martingale, clump_floor, estimate_extinction_curve, holder_bound_check, occupancy_stats,
    thm13_params, Scenario,
};
use crate::generator::GeneratorSpec;
use crate::kernel::{dirichlet_kernel, laplacian_sandwich, poisson_tail, rw_kernel, uniformized_kernel};
use crate::lattice::{LatticeState, Site};
use crate::params::ModelParams;
use crate::region::BoxRegion;

/// Default truncation tolerance of every kernel evaluated by the suites.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kernel,
    Engine,
    Estimators,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(Suite::Kernel),
            "engine" => Ok(Suite::Engine),
            "estimators" => Ok(Suite::Estimators),
            "all" => Ok(Suite::All),
            _ => Err(Error::param(
                "suite",
                format!("unknown suite '{s}' (kernel, engine, estimators, all)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One invariant: `measured <= bound` or `measured >= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            relation: Relation::AtMost,
            bound,
            passed: measured <= bound,
        }
    }

    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            relation: Relation::AtLeast,
            bound,
            passed: measured >= bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        write!(
            f,
            "{} {} measured={:e} {rel} bound={:e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.bound
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub kernel_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 20_240_601,
            kernel_tol: DEFAULT_KERNEL_TOL,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Kernel => kernel_suite(opts)?,
        Suite::Engine => engine_suite(opts)?,
        Suite::Estimators => estimators_suite(opts)?,
        Suite::All => {
            let mut all = kernel_suite(opts)?;
            all.extend(engine_suite(opts)?);
            all.extend(estimators_suite(opts)?);
            all
        }
    })
}

fn sites(dim: usize, radius: i32) -> Vec<Site> {
    BoxRegion::new(radius as u32, dim)
        .map(|b| b.sites())
        .unwrap_or_default()
}

/// Largest relative violation of `lower <= p <= upper` over `d ∈ {1,2}`,
/// `t ∈ {1/4, 1/2, 1, 2}`, `|x| <= 8`.
pub fn sandwich_violation(tol: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for d in 1..=2 {
        for t in [0.25, 0.5, 1.0, 2.0] {
            for x in sites(d, 8).into_iter().filter(|x| x.norm() <= 8) {
                let p = rw_kernel(t, &x, tol)?;
                let (lo, hi) = laplacian_sandwich(t, &x);
                worst = worst.max((lo - p) / lo).max((p - hi) / hi);
            }
        }
    }
    Ok(worst)
}

/// Largest entrywise gap between the uniformized table and the series
/// product on `d ∈ {1,2}`, `t ∈ {1/4, 1/2, 1, 2}`, `|x|_∞ <= 8`.
pub fn uniformized_series_gap(tol: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for d in 1..=2 {
        let g = GeneratorSpec::laplacian(d)?;
        for t in [0.25, 0.5, 1.0, 2.0] {
            let table = uniformized_kernel(&g, t, tol)?;
            let o = Site::origin(d)?;
            for x in sites(d, 8) {
                worst = worst.max((table.get(&o, &x) - rw_kernel(t, &x, tol)?).abs());
            }
        }
    }
    Ok(worst)
}

/// `exp(t·A)` for `A = tridiag(1, -2, 1)` on three sites, by its eigenbasis.
pub fn three_state_expm(t: f64) -> [[f64; 3]; 3] {
    let r2 = std::f64::consts::SQRT_2;
    let (a, b, c) = (((r2 - 2.0) * t).exp(), (-2.0 * t).exp(), ((-2.0 - r2) * t).exp());
    let corner = 0.25 * a + 0.5 * b + 0.25 * c;
    let far = 0.25 * a - 0.5 * b + 0.25 * c;
    let edge = 0.25 * r2 * (a - c);
    let mid = 0.5 * (a + c);
    [[corner, edge, far], [edge, mid, edge], [far, edge, corner]]
}

/// Largest gap between the killed kernel on `{-1, 0, 1}` and [`three_state_expm`].
pub fn dirichlet_three_state_gap(tol: f64) -> Result<f64> {
    let g = GeneratorSpec::laplacian(1)?;
    let region = BoxRegion::new(1, 1)?;
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5, 1.0, 2.0] {
        let k = dirichlet_kernel(&g, &region, t, tol)?;
        let m = three_state_expm(t);
        for x in -1..=1 {
            for y in -1..=1 {
                let p = k.get(&Site::new(&[x])?, &Site::new(&[y])?);
                worst = worst.max((p - m[(x + 1) as usize][(y + 1) as usize]).abs());
            }
        }
    }
    Ok(worst)
}

/// `P(N >= h)`, `N ~ Poisson(λ)`, by summing the pmf upward from `h`.
fn direct_tail(lam: f64, h: u64) -> f64 {
    let mut term = (-lam + h as f64 * lam.ln() - statrs::function::gamma::ln_gamma(h as f64 + 1.0)).exp();
    let mut sum = 0.0;
    let mut k = h as f64;
    while term > 0.0 && (term > 1e-20 * sum || k < lam) {
        sum += term;
        k += 1.0;
        term *= lam / k;
    }
    sum
}

/// `(max(exact - λ^H/H!), max |exact - direct|)` over `n` random `(λ, H)`.
pub fn poisson_tail_checks(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut excess, mut gap): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for _ in 0..n {
        let lam = rng.random_range(0.01..50.0);
        let h = rng.random_range(1..=120u64);
        let b = poisson_tail(lam, h);
        excess = excess.max(b.exact_tail - b.simple_bound);
        gap = gap.max((b.exact_tail - direct_tail(lam, h)).abs());
    }
    (excess, gap)
}

fn kernel_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let tol = opts.kernel_tol;
    let (excess, gap) = poisson_tail_checks(200, opts.seed);
    let g = GeneratorSpec::laplacian(2)?;
    let o = Site::origin(2)?;
    let (s, t) = (0.4, 0.7);
    let ps = uniformized_kernel(&g, s, tol)?;
    let pt = uniformized_kernel(&g, t, tol)?;
    let pst = uniformized_kernel(&g, s + t, tol)?;
    let mut ck: f64 = 0.0;
    for x in sites(2, 3) {
        let composed: f64 = ps.offsets().iter().map(|(y, p)| p * pt.get(y, &x)).sum();
        ck = ck.max((composed - pst.get(&o, &x)).abs());
    }
    Ok(vec![
        Check::at_most(
            "kernel.sandwich.max_rel_violation",
            sandwich_violation(tol)?,
            1e-12,
        ),
        Check::at_most(
            "kernel.uniformized_vs_series.max_abs_gap",
            uniformized_series_gap(tol)?,
            2e-10,
        ),
        Check::at_most(
            "kernel.dirichlet_three_state.max_abs_gap",
            dirichlet_three_state_gap(tol)?,
            1e-10,
        ),
        Check::at_most("kernel.chapman_kolmogorov.max_abs_gap", ck, 1e-10),
        Check::at_most("kernel.row_sum.abs_defect", (pst.row_sum(&o) - 1.0).abs(), 1e-10),
        Check::at_most("kernel.poisson_tail.excess_over_simple_bound", excess, 0.0),
        Check::at_most("kernel.poisson_tail.gap_to_direct_sum", gap, 1e-12),
    ])
}

/// Largest relative error of `Σ h² = (Σ w)^{2γ}` and largest relative
/// shortfall of `h_i >= w_i^γ` over `n` random inputs.
pub fn split_identity_errors(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut sq, mut floor): (f64, f64) = (0.0, 0.0);
    for _ in 0..n {
        let len = rng.random_range(1..=16);
        let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..10.0)).collect();
        let gamma = rng.random_range(0.5..1.0);
        let h = split_weights(&w, gamma);
        let total: f64 = w.iter().sum();
        let target = total.powf(2.0 * gamma);
        sq = sq.max((h.sum_of_squares() - target).abs() / target);
        for (hi, wi) in h.weights.iter().zip(&w) {
            let lo = wi.powf(gamma);
            if lo > 0.0 {
                floor = floor.max((lo - hi) / lo);
            }
        }
    }
    (sq, floor)
}

fn engine_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let (sq, fl) = split_identity_errors(1000, opts.seed);
    let delta = |d: usize| LatticeState::delta(Site::origin(d)?, 1.0);
    // Non-negativity and the noise floor on a cutoff run.
    let gamma = 0.75;
    let n = 3;
    let p = ModelParams::laplacian(gamma, 2)?;
    let mut cfg = TrajectoryConfig::new(1e-3, 0.5, opts.seed);
    cfg.region = Some(BoxRegion::new(n, 2)?);
    let c = (3.0 * n as f64).powf(-(2.0 * gamma - 1.0));
    let mut min_value = f64::INFINITY;
    let mut floor_ratio = f64::INFINITY;
    for r in 0..5 {
        run_trajectory_with(&delta(2)?, &p, &cfg.replica(r), |o| {
            min_value = min_value.min(o.state.min_value());
            if !o.state.is_zero() {
                let h = o.state.power_sum(2.0 * gamma).sqrt();
                floor_ratio = floor_ratio.min(h / (c * o.state.total_mass().powf(gamma)));
            }
        })?;
    }
    // Zero stays zero.
    let zero = LatticeState::new(1)?;
    let mut zero_mass: f64 = 0.0;
    let p1 = ModelParams::laplacian(0.5, 1)?;
    run_trajectory_with(&zero, &p1, &TrajectoryConfig::new(1e-3, 0.1, opts.seed), |o| {
        zero_mass = zero_mass.max(o.state.total_mass())
    })?;
    // Coupling of the free and the cutoff system.
    let region = BoxRegion::new(3, 1)?;
    let cfg = TrajectoryConfig::new(1e-3, 1.0, opts.seed);
    let p75 = ModelParams::laplacian(0.75, 1)?;
    let (mut viol, mut total) = (0u64, 0u64);
    for r in 0..20 {
        let (_, _, s) = coupled_run(&delta(1)?, &delta(1)?, &region, &p75, &cfg.replica(r))?;
        viol += s.violations;
        total += s.site_steps;
    }
    // Replay.
    let s = Scenario::Single {
        params: p75,
        u0: delta(1)?,
    };
    let a = s.run_replica(&cfg.replica(3))?;
    let b = s.run_replica(&cfg.replica(3))?;
    Ok(vec![
        Check::at_most("engine.split_weights.sum_of_squares_rel_error", sq, 1e-12),
        Check::at_most("engine.split_weights.floor_rel_shortfall", fl, 1e-12),
        Check::at_least("engine.cutoff.min_site_value", min_value, 0.0),
        Check::at_least("engine.cutoff.noise_floor_ratio", floor_ratio, 1.0 - 1e-12),
        Check::at_most("engine.zero_absorption.max_mass", zero_mass, 0.0),
        Check::at_most(
            "engine.coupling.violation_fraction",
            viol as f64 / total.max(1) as f64,
            0.01,
        ),
        Check::at_most("engine.replay.mismatches", if a == b { 0.0 } else { 1.0 }, 0.0),
    ])
}

fn random_state(rng: &mut StdRng) -> Result<LatticeState> {
    let m = rng.random_range(1..=30);
    LatticeState::from_pairs(
        1,
        (0..m).map(|i| (Site::from_array([i, 0, 0, 0], 1), rng.random_range(1e-6..10.0))),
    )
}

/// Smallest `value / floor` (minus one) of the Jensen power-sum floor
/// `Σ u^p >= M^{1-p} (Σ u)^p`, the clump-ratio floor and the Hölder bound
/// (as `rhs / lhs`), over `n` random inputs each.
pub fn floor_margins(n: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut jensen, mut clump, mut holder) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..n {
        let u = random_state(&mut rng)?;
        let p = rng.random_range(1.0..=2.0);
        let m = u.support_size() as f64;
        jensen = jensen.min(u.power_sum(p) / (m.powf(1.0 - p) * u.total_mass().powf(p)) - 1.0);
        let gamma = rng.random_range(0.5..=1.0);
        let (k, r) = occupancy_stats(&u, gamma)?;
        clump = clump.min(r / clump_floor(k, gamma) - 1.0);
        let len = rng.random_range(1..=20);
        let f: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..10.0)).collect();
        let g: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..10.0)).collect();
        let rep = holder_bound_check(&f, &g, gamma)?;
        if rep.witness["lhs"] > 0.0 {
            holder = holder.min(rep.witness["rhs"] / rep.witness["lhs"] - 1.0);
        }
    }
    Ok((jensen, clump, holder))
}

fn estimators_suite(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let (jensen, clump, holder) = floor_margins(1000, opts.seed)?;
    // Window consistency.
    let mut rng = StdRng::seed_from_u64(opts.seed ^ 1);
    let mut window_errors = 0u64;
    for _ in 0..1000 {
        let l2 = rng.random_range(0.01..5.0);
        let l1 = l2 + rng.random_range(0.0..3.0);
        let l0 = rng.random_range(0.01..20.0);
        let r = thm13_params(l0, l1, l2)?;
        let ok = if r.verdict {
            let w = &r.witness;
            w["beta_lo"] < w["beta_hi"]
                && w["alpha_lo"] < w["alpha_hi"]
                && w["beta_lo"] < w["beta"]
                && w["beta"] < w["beta_hi"]
        } else {
            2.0 * l1 - (l0 + l2) / 2.0 >= l2
        };
        window_errors += u64::from(!ok);
    }
    // Extinction curve of the scalar diffusion and the mass martingale.
    let feller = Scenario::Feller {
        z0: 1.0,
        a: 1.0,
        gamma: 0.5,
    };
    let cfg = TrajectoryConfig::new(1e-3, 2.0, opts.seed);
    let grid = [0.25, 0.5, 1.0, 1.5, 2.0];
    let curve = estimate_extinction_curve(&feller, &grid, 2000, &cfg, None)?;
    let drops = curve.p_hat.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let again = estimate_extinction_curve(&feller, &grid, 2000, &cfg, Some(2))?;
    let single = Scenario::Single {
        params: ModelParams::laplacian(0.75, 1)?,
        u0: LatticeState::delta(Site::origin(1)?, 1.0)?,
    };
    let reps = check_mass_martingale(
        &single,
        &[0.5],
        2000,
        &TrajectoryConfig::new(1e-3, 0.5, opts.seed),
        None,
    )?;
    let z = (reps[0].sample_mean - reps[0].oracle_mean).abs() / reps[0].standard_error.max(f64::MIN_POSITIVE);
    Ok(vec![
        Check::at_least("estimators.jensen_floor.min_rel_margin", jensen, -1e-12),
        Check::at_least("estimators.clump_floor.min_rel_margin", clump, -1e-12),
        Check::at_least("estimators.holder.min_rel_margin", holder, -1e-12),
        Check::at_most("estimators.rate_windows.inconsistent", window_errors as f64, 0.0),
        Check::at_most("estimators.curve.max_decrease", drops, 0.0),
        Check::at_most(
            "estimators.curve.parallel_mismatch",
            if curve == again { 0.0 } else { 1.0 },
            0.0,
        ),
        Check::at_most("estimators.mass_martingale.z_score", z, 4.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_state_oracle_matches_frozen_values() {
        let m = three_state_expm(0.5);
        assert!((m[0][0] - 0.415_812_630_768_100_5).abs() < 1e-15);
        assert!((m[1][1] - 0.463_745_820_364_758_7).abs() < 1e-15);
        assert!((m[0][1] - 0.199_655_832_207_789_9).abs() < 1e-15);
        assert!((m[0][2] - 0.047_933_189_596_658_17).abs() < 1e-15);
    }

    #[test]
    fn kernel_suite_passes() {
        let checks = run_suite(Suite::Kernel, &VerifyOptions::default()).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:#?}");
    }

    #[test]
    fn corrupted_kernel_tolerance_is_caught() {
        let opts = VerifyOptions {
            kernel_tol: 1e-3,
            ..VerifyOptions::default()
        };
        let failed: Vec<String> = run_suite(Suite::Kernel, &opts)
            .unwrap()
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        assert!(
            failed
                .iter()
                .any(|n| n == "kernel.uniformized_vs_series.max_abs_gap"),
            "{failed:?}"
        );
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("kernels".parse::<Suite>().is_err());
    }

    #[test]
    fn check_lines_name_the_invariant() {
        let c = Check::at_most("kernel.x", 2.0, 1.0);
        assert_eq!(c.to_string(), "FAIL kernel.x measured=2e0 <= bound=1e0");
    }
}
