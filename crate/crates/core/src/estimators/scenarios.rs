use serde::{Deserialize, Serialize};

use super::conditions::{thm13_params, ConditionReport};
use super::stats::Proportion;
use crate::engine::{run_catalytic, ExtinctionTarget, TrajectoryConfig};
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::LatticeState;
use crate::params::CatalyticParams;
use crate::replicas::run_replicas;

/// Extinction frequency of one target event in the catalytic system,
/// with the largest mass removed by truncation over all replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEstimate {
    pub target: ExtinctionTarget,
    pub t: f64,
    pub proportion: Proportion,
    pub truncated_mass: f64,
}

/// Fraction of replicas in which `target` has occurred by `cfg.t_end`.
pub fn catalytic_extinction_frequency(
    u0: &LatticeState,
    v0: &LatticeState,
    g: &GeneratorSpec,
    target: ExtinctionTarget,
    n_replicas: u64,
    cfg: &TrajectoryConfig,
    threads: Option<usize>,
) -> Result<FrequencyEstimate> {
    if n_replicas == 0 {
        return Err(Error::param("n_replicas", "must be positive"));
    }
    g.validate()?;
    cfg.validate(g.qnorm())?;
    let runs = run_replicas(n_replicas, threads, |r| {
        let s = run_catalytic(u0, v0, g, &cfg.replica(r), target)?;
        Ok((
            s.extinction_time.is_some(),
            s.truncated_mass.0.max(s.truncated_mass.1),
        ))
    })?;
    let k = runs.iter().filter(|r| r.0).count() as u64;
    let trivially = match target {
        ExtinctionTarget::U => u0.is_zero(),
        ExtinctionTarget::V => v0.is_zero(),
        ExtinctionTarget::Either => u0.is_zero() || v0.is_zero(),
        ExtinctionTarget::Both => u0.is_zero() && v0.is_zero(),
    };
    Ok(FrequencyEstimate {
        target,
        t: cfg.t_end,
        proportion: if trivially {
            Proportion::exact(k, n_replicas)
        } else {
            Proportion::wilson(k, n_replicas)
        },
        truncated_mass: runs.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

/// One row of the η table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub eta: f64,
    pub extinct: u64,
    pub n: u64,
    pub freq: f64,
    pub ci_half_width: f64,
    pub truncated_mass: f64,
}

/// U-extinction frequencies for exponentially decaying data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm13Table {
    pub params: CatalyticParams,
    pub t1: f64,
    pub rows: Vec<EtaRow>,
    /// Frequencies are non-increasing in η up to the summed CI half-widths
    /// of each pair of rows.
    pub monotone: bool,
    pub conditions: ConditionReport,
    /// `V_0` is the lower envelope `c1 e^{-λ1|x|}`; admissible data lie
    /// between it and `c2 e^{-λ2|x|}`.
    pub v0_envelope: (f64, f64, f64, f64),
}

/// For each `η`, the frequency with which `U` started from
/// `η e^{-λ0|x|}` is identically zero by `t1`, with `V_0 = c1 e^{-λ1|x|}`.
/// Both are cut at `cfg.r_max`. Zero is absorbing for `U`, so extinction by
/// `t1` means `U ≡ 0` on all of `[t1, ∞)`.
pub fn thm13_scenario(
    params: &CatalyticParams,
    dim: usize,
    eta_list: &[f64],
    t1: f64,
    n_replicas: u64,
    cfg: &TrajectoryConfig,
    threads: Option<usize>,
) -> Result<Thm13Table> {
    params.validate()?;
    let conditions = thm13_params(params.lambda0, params.lambda1, params.lambda2)?;
    if !conditions.verdict {
        return Err(Error::Precondition(format!(
            "rates ({}, {}, {}) violate lambda0 > 4 lambda1 - 3 lambda2",
            params.lambda0, params.lambda1, params.lambda2
        )));
    }
    if eta_list.is_empty() {
        return Err(Error::param("eta_list", "must not be empty"));
    }
    if let Some(e) = eta_list.iter().find(|e| !(**e >= 0.0 && **e <= 1.0)) {
        return Err(Error::param("eta", format!("must lie in [0, 1], got {e}")));
    }
    let g = GeneratorSpec::laplacian(dim)?;
    let cfg = TrajectoryConfig {
        t_end: t1,
        ..cfg.clone()
    };
    let v0 = LatticeState::exponential(dim, params.c1, params.lambda1, cfg.r_max)?;
    let mut rows = Vec::with_capacity(eta_list.len());
    for &eta in eta_list {
        let u0 = LatticeState::exponential(dim, eta, params.lambda0, cfg.r_max)?;
        let f = catalytic_extinction_frequency(&u0, &v0, &g, ExtinctionTarget::U, n_replicas, &cfg, threads)?;
        rows.push(EtaRow {
            eta,
            extinct: f.proportion.successes,
            n: n_replicas,
            freq: f.proportion.p_hat,
            ci_half_width: f.proportion.half_width(),
            truncated_mass: f.truncated_mass,
        });
    }
    let monotone = rows.iter().enumerate().all(|(i, a)| {
        rows[i + 1..].iter().all(|b| {
            let (small, large) = if a.eta <= b.eta { (a, b) } else { (b, a) };
            small.freq >= large.freq - (small.ci_half_width + large.ci_half_width)
        })
    });
    Ok(Thm13Table {
        params: CatalyticParams {
            eta: eta_list.iter().copied().fold(0.0, f64::max),
            ..*params
        },
        t1,
        rows,
        monotone,
        conditions,
        v0_envelope: (params.c1, params.lambda1, params.c2, params.lambda2),
    })
}
