use serde::{Deserialize, Serialize};

use super::curve::Scenario;
use super::stats::{Moments, SE_BAND};
use crate::engine::{
    run_catalytic_with, run_feller_with, run_trajectory_with, ExtinctionTarget, TrajectoryConfig,
};
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::kernel::heat_flow_at;
use crate::lattice::{LatticeState, Site};
use crate::replicas::run_replicas;

/// Largest truncated catalytic mass tolerated by the moment checks.
pub const MAX_TRUNCATED_MASS: f64 = 1e-6;

/// How a sample mean is compared with its oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanTest {
    /// `|mean - oracle| <= 4 SE`.
    Equal,
    /// `mean <= oracle + 4 SE`.
    AtMost,
}

/// Sample mean and variance of an observable against their oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub label: String,
    pub site: Option<Site>,
    pub time: f64,
    pub n: usize,
    pub test: MeanTest,
    pub sample_mean: f64,
    pub oracle_mean: f64,
    pub standard_error: f64,
    pub sample_var: f64,
    pub var_bound: Option<f64>,
    pub var_rel_se: f64,
    pub pass_mean: bool,
    pub pass_var: Option<bool>,
}

impl MomentReport {
    pub fn new(
        label: impl Into<String>,
        site: Option<Site>,
        time: f64,
        samples: &[f64],
        oracle_mean: f64,
        test: MeanTest,
        var_bound: Option<f64>,
    ) -> Self {
        let m = Moments::of(samples);
        let se = m.se();
        // Constant samples: compare up to rounding.
        let slack = (SE_BAND * se).max(1e-12 * oracle_mean.abs().max(1.0));
        let pass_mean = match test {
            MeanTest::Equal => (m.mean - oracle_mean).abs() <= slack,
            MeanTest::AtMost => m.mean <= oracle_mean + slack,
        };
        let var_rel_se = m.var_rel_se();
        let pass_var = var_bound.map(|b| m.var <= b * (1.0 + SE_BAND * var_rel_se) + 1e-300);
        MomentReport {
            label: label.into(),
            site,
            time,
            n: m.n,
            test,
            sample_mean: m.mean,
            oracle_mean,
            standard_error: se,
            sample_var: m.var,
            var_bound,
            var_rel_se,
            pass_mean,
            pass_var,
        }
    }

    pub fn passed(&self) -> bool {
        self.pass_mean && self.pass_var.unwrap_or(true)
    }
}

fn step_of(t: f64, dt: f64) -> u64 {
    (t / dt).round() as u64
}

fn check_times(times: &[f64]) -> Result<f64> {
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::param("times", "need at least one non-negative time"));
    }
    Ok(times.iter().copied().fold(0.0, f64::max))
}

/// Total mass of every type of `scenario` at each of `times`, per replica.
/// Returns `samples[type][time][replica]` and the largest truncated mass.
fn mass_samples(
    scenario: &Scenario,
    times: &[f64],
    n: u64,
    cfg: &TrajectoryConfig,
    threads: Option<usize>,
) -> Result<(Vec<Vec<Vec<f64>>>, f64)> {
    let t_max = check_times(times)?;
    let cfg = TrajectoryConfig {
        t_end: t_max,
        ..cfg.clone()
    };
    scenario.validate(&cfg)?;
    let steps: Vec<u64> = times.iter().map(|t| step_of(*t, cfg.dt)).collect();
    let types = if matches!(scenario, Scenario::Catalytic { .. }) {
        2
    } else {
        1
    };
    let per_replica = run_replicas(n, threads, |r| {
        let cfg = cfg.replica(r);
        // Unobserved entries stay zero: runs stop once extinct.
        let mut out = vec![vec![0.0; steps.len()]; types];
        let mut truncated = 0.0;
        let mut put = |step: u64, values: &[f64]| {
            for (i, s) in steps.iter().enumerate() {
                if *s == step {
                    for (k, v) in values.iter().enumerate() {
                        out[k][i] = *v;
                    }
                }
            }
        };
        match scenario {
            Scenario::Single { params, u0 } => {
                let cfg = TrajectoryConfig { region: None, ..cfg };
                run_trajectory_with(u0, params, &cfg, |o| put(o.step, &[o.state.total_mass()]))?;
            }
            Scenario::Cutoff { params, u0, region } => {
                let cfg = TrajectoryConfig {
                    region: Some(*region),
                    ..cfg
                };
                run_trajectory_with(u0, params, &cfg, |o| put(o.step, &[o.state.total_mass()]))?;
            }
            Scenario::Catalytic {
                generator,
                u0,
                v0,
                target,
            } => {
                let s = run_catalytic_with(u0, v0, generator, &cfg, *target, |o| {
                    put(o.step, &[o.u.total_mass(), o.v.total_mass()])
                })?;
                truncated = s.truncated_mass.0.max(s.truncated_mass.1);
            }
            Scenario::Feller { z0, a, gamma } => {
                run_feller_with(*z0, *a, *gamma, &cfg, |step, _, z| put(step, &[z]))?;
            }
        }
        Ok((out, truncated))
    })?;
    let truncated = per_replica.iter().map(|(_, t)| *t).fold(0.0, f64::max);
    let samples = (0..types)
        .map(|k| {
            (0..times.len())
                .map(|i| per_replica.iter().map(|(o, _)| o[k][i]).collect())
                .collect()
        })
        .collect();
    Ok((samples, truncated))
}

fn initial_masses(scenario: &Scenario) -> Vec<f64> {
    match scenario {
        Scenario::Single { u0, .. } | Scenario::Cutoff { u0, .. } => vec![u0.total_mass()],
        Scenario::Catalytic { u0, v0, .. } => vec![u0.total_mass(), v0.total_mass()],
        Scenario::Feller { z0, .. } => vec![*z0],
    }
}

/// Total-mass martingale check at each of `times`: equality for the free,
/// catalytic (one report per type) and scalar systems, and the
/// supermartingale inequality for the cutoff system.
pub fn check_mass_martingale(
    scenario: &Scenario,
    times: &[f64],
    n_replicas: u64,
    cfg: &TrajectoryConfig,
    threads: Option<usize>,
) -> Result<Vec<MomentReport>> {
    if n_replicas < 2 {
        return Err(Error::param("n_replicas", "need at least two replicas"));
    }
    let (samples, _) = mass_samples(scenario, times, n_replicas, cfg, threads)?;
    let initial = initial_masses(scenario);
    let test = if matches!(scenario, Scenario::Cutoff { .. }) {
        MeanTest::AtMost
    } else {
        MeanTest::Equal
    };
    let names = if samples.len() == 2 {
        vec!["mass U", "mass V"]
    } else {
        vec!["mass"]
    };
    let mut reports = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        for (k, name) in names.iter().enumerate() {
            reports.push(MomentReport::new(
                *name,
                None,
                t,
                &samples[k][i],
                initial[k],
                test,
                None,
            ));
        }
    }
    Ok(reports)
}

/// Mean and variance of `U_t(x)` and `V_t(x)` in the catalytic system
/// against `U_0P_t(x)` (resp. `V_0P_t(x)`) and `t·U_0P_t(x)·V_0P_t(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalyticMoments {
    pub u: MomentReport,
    pub v: MomentReport,
    pub truncated_mass: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn check_catalytic_moments(
    u0: &LatticeState,
    v0: &LatticeState,
    g: &GeneratorSpec,
    t: f64,
    x: &Site,
    n_replicas: u64,
    cfg: &TrajectoryConfig,
    threads: Option<usize>,
) -> Result<CatalyticMoments> {
    x.check_dim(g.dim())?;
    if n_replicas < 2 {
        return Err(Error::param("n_replicas", "need at least two replicas"));
    }
    let cfg = TrajectoryConfig {
        t_end: t,
        ..cfg.clone()
    };
    cfg.validate(g.qnorm())?;
    let step = step_of(t, cfg.dt);
    let per_replica = run_replicas(n_replicas, threads, |r| {
        let mut at = (0.0, 0.0);
        let s = run_catalytic_with(u0, v0, g, &cfg.replica(r), ExtinctionTarget::Both, |o| {
            if o.step == step {
                at = (o.u.get(x), o.v.get(x));
            }
        })?;
        Ok((at, s.truncated_mass.0.max(s.truncated_mass.1)))
    })?;
    let truncated = per_replica.iter().map(|(_, m)| *m).fold(0.0, f64::max);
    if truncated >= MAX_TRUNCATED_MASS {
        return Err(Error::Precondition(format!(
            "truncated mass {truncated:e} exceeds {MAX_TRUNCATED_MASS:e}; increase r_max"
        )));
    }
    const KERNEL_TOL: f64 = 1e-12;
    let mu = heat_flow_at(g, u0, t, x, KERNEL_TOL)?;
    let mv = heat_flow_at(g, v0, t, x, KERNEL_TOL)?;
    let bound = t * (mu * mv);
    let us: Vec<f64> = per_replica.iter().map(|(a, _)| a.0).collect();
    let vs: Vec<f64> = per_replica.iter().map(|(a, _)| a.1).collect();
    Ok(CatalyticMoments {
        u: MomentReport::new("U", Some(*x), t, &us, mu, MeanTest::Equal, Some(bound)),
        v: MomentReport::new("V", Some(*x), t, &vs, mv, MeanTest::Equal, Some(bound)),
        truncated_mass: truncated,
    })
}
