use serde::{Deserialize, Serialize};

use super::stats::Proportion;
use crate::engine::{
    run_catalytic, run_feller, run_trajectory, CatalyticSummary, ExtinctionTarget, ScalarSummary,
    TrajectoryConfig, TrajectorySummary,
};
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::LatticeState;
use crate::params::{check_gamma, ModelParams};
use crate::region::BoxRegion;
use crate::replicas::run_replicas;

/// Minimum number of replicas for an extinction curve.
pub const MIN_CURVE_REPLICAS: u64 = 100;

/// A model together with its initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Scenario {
    Single {
        params: ModelParams,
        u0: LatticeState,
    },
    Cutoff {
        params: ModelParams,
        u0: LatticeState,
        region: BoxRegion,
    },
    Catalytic {
        generator: GeneratorSpec,
        u0: LatticeState,
        v0: LatticeState,
        #[serde(default)]
        target: ExtinctionTarget,
    },
    Feller {
        z0: f64,
        a: f64,
        gamma: f64,
    },
}

/// Summary of one replica of any scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReplicaSummary {
    Lattice(TrajectorySummary),
    Catalytic(CatalyticSummary),
    Scalar(ScalarSummary),
}

impl ReplicaSummary {
    pub fn extinction_time(&self) -> Option<f64> {
        match self {
            ReplicaSummary::Lattice(s) => s.extinction_time,
            ReplicaSummary::Catalytic(s) => s.extinction_time,
            ReplicaSummary::Scalar(s) => s.extinction_time,
        }
    }
}

impl Scenario {
    /// Norm of the generator driving the scenario (`A²` for the scalar diffusion).
    pub fn rate_scale(&self) -> f64 {
        match self {
            Scenario::Single { params, .. } | Scenario::Cutoff { params, .. } => params.generator.qnorm(),
            Scenario::Catalytic { generator, .. } => generator.qnorm(),
            Scenario::Feller { a, .. } => a * a,
        }
    }

    /// Checks every precondition of a run with `cfg` without running it.
    pub fn validate(&self, cfg: &TrajectoryConfig) -> Result<()> {
        match self {
            Scenario::Single { params, u0 } => {
                params.validate()?;
                u0.check_dim(params.dim())?;
            }
            Scenario::Cutoff { params, u0, region } => {
                params.validate()?;
                u0.check_dim(params.dim())?;
                if region.dim() != params.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: params.dim(),
                        found: region.dim(),
                    });
                }
                if let Some(x) = u0.support().find(|x| !region.contains(x)) {
                    return Err(Error::Precondition(format!(
                        "initial support site {x} lies outside the box of radius {}",
                        region.radius()
                    )));
                }
            }
            Scenario::Catalytic {
                generator, u0, v0, ..
            } => {
                generator.validate()?;
                u0.check_dim(generator.dim())?;
                v0.check_dim(generator.dim())?;
            }
            Scenario::Feller { z0, a, gamma } => {
                check_gamma(*gamma)?;
                if !(z0.is_finite() && *z0 >= 0.0) {
                    return Err(Error::param("z0", format!("must be non-negative, got {z0}")));
                }
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::param("a", format!("must be positive, got {a}")));
                }
            }
        }
        cfg.validate(self.rate_scale())
    }

    /// True when the initial data is already extinct, so every replica is.
    pub fn is_trivially_extinct(&self) -> bool {
        match self {
            Scenario::Single { u0, .. } | Scenario::Cutoff { u0, .. } => u0.is_zero(),
            Scenario::Catalytic { u0, v0, target, .. } => match target {
                ExtinctionTarget::U => u0.is_zero(),
                ExtinctionTarget::V => v0.is_zero(),
                ExtinctionTarget::Either => u0.is_zero() || v0.is_zero(),
                ExtinctionTarget::Both => u0.is_zero() && v0.is_zero(),
            },
            Scenario::Feller { z0, .. } => *z0 == 0.0,
        }
    }

    /// Runs the replica `cfg.replica_index`.
    pub fn run_replica(&self, cfg: &TrajectoryConfig) -> Result<ReplicaSummary> {
        Ok(match self {
            Scenario::Single { params, u0 } => {
                let cfg = TrajectoryConfig {
                    region: None,
                    ..cfg.clone()
                };
                ReplicaSummary::Lattice(run_trajectory(u0, params, &cfg)?)
            }
            Scenario::Cutoff { params, u0, region } => {
                let cfg = TrajectoryConfig {
                    region: Some(*region),
                    ..cfg.clone()
                };
                ReplicaSummary::Lattice(run_trajectory(u0, params, &cfg)?)
            }
            Scenario::Catalytic {
                generator,
                u0,
                v0,
                target,
            } => ReplicaSummary::Catalytic(run_catalytic(u0, v0, generator, cfg, *target)?),
            Scenario::Feller { z0, a, gamma } => ReplicaSummary::Scalar(run_feller(*z0, *a, *gamma, cfg)?),
        })
    }
}

/// Runs replicas `0..n` of `scenario`.
pub fn simulate(
    scenario: &Scenario,
    cfg: &TrajectoryConfig,
    n: u64,
    threads: Option<usize>,
) -> Result<Vec<ReplicaSummary>> {
    scenario.validate(cfg)?;
    run_replicas(n, threads, |r| scenario.run_replica(&cfg.replica(r)))
}

/// Empirical extinction probabilities on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionCurve {
    pub t_grid: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub ci_half_width: Vec<f64>,
    pub n_replicas: u64,
    /// Replicas still alive at the end of the run.
    pub censored_count: u64,
}

impl ExtinctionCurve {
    /// Curve from per-replica extinction times. `exact` marks a curve
    /// known without sampling error (zero-width intervals).
    pub fn from_times(t_grid: &[f64], times: &[Option<f64>], exact: bool) -> Self {
        let n = times.len() as u64;
        let props: Vec<Proportion> = t_grid
            .iter()
            .map(|&t| {
                let k = times.iter().filter(|e| e.is_some_and(|e| e <= t + 1e-12)).count() as u64;
                if exact {
                    Proportion::exact(k, n)
                } else {
                    Proportion::wilson(k, n)
                }
            })
            .collect();
        ExtinctionCurve {
            t_grid: t_grid.to_vec(),
            p_hat: props.iter().map(|p| p.p_hat).collect(),
            ci_lower: props.iter().map(|p| p.lower).collect(),
            ci_upper: props.iter().map(|p| p.upper).collect(),
            ci_half_width: props.iter().map(|p| p.half_width()).collect(),
            n_replicas: n,
            censored_count: times.iter().filter(|e| e.is_none()).count() as u64,
        }
    }

    /// Point of the grid closest to `t`.
    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        let i = self
            .t_grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some((self.p_hat[i], self.ci_half_width[i]))
    }
}

pub(crate) fn check_grid(t_grid: &[f64], t_end: f64) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::param("t_grid", "must not be empty"));
    }
    if t_grid
        .iter()
        .any(|t| !(t.is_finite() && *t >= 0.0 && *t <= t_end + 1e-12))
    {
        return Err(Error::param(
            "t_grid",
            format!("times must lie in [0, t_end = {t_end}]"),
        ));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("t_grid", "times must be non-decreasing"));
    }
    Ok(())
}

/// Extinction curve of `scenario` from `n_replicas` replicas run to `cfg.t_end`.
pub fn estimate_extinction_curve(
    scenario: &Scenario,
    t_grid: &[f64],
    n_replicas: u64,
    cfg: &TrajectoryConfig,
    threads: Option<usize>,
) -> Result<ExtinctionCurve> {
    if n_replicas < MIN_CURVE_REPLICAS {
        return Err(Error::param(
            "n_replicas",
            format!("must be at least {MIN_CURVE_REPLICAS}, got {n_replicas}"),
        ));
    }
    check_grid(t_grid, cfg.t_end)?;
    let times: Vec<Option<f64>> = simulate(scenario, cfg, n_replicas, threads)?
        .iter()
        .map(ReplicaSummary::extinction_time)
        .collect();
    Ok(ExtinctionCurve::from_times(
        t_grid,
        &times,
        scenario.is_trivially_extinct(),
    ))
}

/// `P(Z_t = 0)` for `dZ = √Z dB` started at `z0`: `exp(-2 z0 / t)`.
pub fn feller_extinction_oracle(z0: f64, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    if !(z0.is_finite() && z0 >= 0.0) {
        return Err(Error::param("z0", format!("must be non-negative, got {z0}")));
    }
    Ok((-2.0 * z0 / t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;

    fn single(gamma: f64, u0: LatticeState) -> Scenario {
        Scenario::Single {
            params: ModelParams::laplacian(gamma, 1).unwrap(),
            u0,
        }
    }

    #[test]
    fn oracle_values() {
        assert_eq!(feller_extinction_oracle(0.0, 1.0).unwrap(), 1.0);
        assert!((feller_extinction_oracle(1.0, 2.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        let mut prev = 0.0;
        for t in [0.5, 1.0, 4.0, 100.0, 1e6] {
            let p = feller_extinction_oracle(1.0, t).unwrap();
            assert!(p > prev);
            prev = p;
        }
        assert!(prev > 0.9999);
        assert!(feller_extinction_oracle(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_state_curve_is_exact() {
        let s = single(0.5, LatticeState::new(1).unwrap());
        let cfg = TrajectoryConfig::new(1e-3, 1.0, 1);
        let c = estimate_extinction_curve(&s, &[0.0, 0.5, 1.0], 100, &cfg, None).unwrap();
        assert_eq!(c.p_hat, vec![1.0; 3]);
        assert_eq!(c.ci_half_width, vec![0.0; 3]);
        assert_eq!(c.censored_count, 0);
    }

    #[test]
    fn curve_is_monotone_and_reproducible() {
        let s = single(0.5, LatticeState::delta(Site::new(&[0]).unwrap(), 1.0).unwrap());
        let cfg = TrajectoryConfig::new(1e-3, 1.0, 17);
        let grid = [0.1, 0.25, 0.5, 0.75, 1.0];
        let a = estimate_extinction_curve(&s, &grid, 100, &cfg, Some(2)).unwrap();
        let b = estimate_extinction_curve(&s, &grid, 100, &cfg, Some(1)).unwrap();
        assert_eq!(a, b);
        assert!(a.p_hat.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.p_hat.iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(a.censored_count, 100 - (a.p_hat[4] * 100.0).round() as u64);
    }

    #[test]
    fn curve_preconditions() {
        let s = single(0.5, LatticeState::delta(Site::new(&[0]).unwrap(), 1.0).unwrap());
        let cfg = TrajectoryConfig::new(1e-3, 1.0, 17);
        assert!(estimate_extinction_curve(&s, &[1.0], 99, &cfg, None).is_err());
        assert!(estimate_extinction_curve(&s, &[2.0], 100, &cfg, None).is_err());
        assert!(estimate_extinction_curve(&s, &[0.5, 0.2], 100, &cfg, None).is_err());
    }
}
