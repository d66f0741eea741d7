//! Time stepping of the single-type, cutoff, mutually catalytic and scalar
//! systems.

pub mod cev;
mod field;
mod split;
mod step;

use serde::{Deserialize, Serialize};

pub use cev::{cev_absorption_probability, cev_transition, cev_transition_monotone};
pub use split::{split_weights, SplitWeights};
pub use step::Scheme;

use field::{Field, Jumps};
use step::{catalytic_step, scalar_step, single_step};

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::{LatticeState, Site};
use crate::noise::{
    CounterNoise, NoiseSource, StreamKey, CHANNEL_SCALAR, CHANNEL_SINGLE, CHANNEL_U, CHANNEL_V,
};
use crate::params::{check_gamma, ModelParams};
use crate::region::BoxRegion;

/// Largest admissible `dt·||Q||` (and `dt·A²` for the scalar diffusion).
pub const STABILITY_LIMIT: f64 = 0.1;

/// Default ℓ¹ truncation radius of catalytic states.
pub const DEFAULT_R_MAX: u32 = 200;

/// Tolerance used when comparing coupled solutions.
pub const COUPLING_TOL: f64 = 1e-9;

/// Largest `dt` the stability guard admits for a generator.
pub fn max_stable_dt(g: &GeneratorSpec) -> f64 {
    STABILITY_LIMIT / g.qnorm()
}

fn check_dt(dt: f64, qnorm: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if dt * qnorm > STABILITY_LIMIT {
        return Err(Error::StabilityGuard {
            dt,
            limit: STABILITY_LIMIT / qnorm,
        });
    }
    Ok(())
}

/// Time-stepping configuration of one replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub replica_index: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Dirichlet cutoff box; `None` runs on all of Z^d.
    #[serde(default)]
    pub region: Option<BoxRegion>,
    /// Record mass and occupancy every this many steps (0: endpoints only).
    #[serde(default)]
    pub record_every: u64,
    /// ℓ¹ truncation radius for catalytic states.
    #[serde(default = "default_r_max")]
    pub r_max: u32,
}

fn default_r_max() -> u32 {
    DEFAULT_R_MAX
}

impl TrajectoryConfig {
    pub fn new(dt: f64, t_end: f64, seed: u64) -> Self {
        TrajectoryConfig {
            dt,
            t_end,
            seed,
            replica_index: 0,
            scheme: Scheme::default(),
            region: None,
            record_every: 0,
            r_max: DEFAULT_R_MAX,
        }
    }

    pub fn replica(&self, index: u64) -> Self {
        TrajectoryConfig {
            replica_index: index,
            ..self.clone()
        }
    }

    /// Number of steps to reach `t_end`.
    pub fn steps(&self) -> u64 {
        ((self.t_end / self.dt) - 1e-9).ceil().max(0.0) as u64
    }

    /// Grid time of step `k`.
    pub fn time(&self, k: u64) -> f64 {
        k as f64 * self.dt
    }

    pub fn noise(&self) -> CounterNoise {
        CounterNoise::new(self.seed, self.replica_index)
    }

    /// Checks `dt`, `t_end` and the stability guard for a generator of norm `qnorm`.
    pub fn validate(&self, qnorm: f64) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::param(
                "t_end",
                format!("must be non-negative, got {}", self.t_end),
            ));
        }
        check_dt(self.dt, qnorm)
    }

    fn records(&self, k: u64) -> bool {
        self.record_every > 0 && k.is_multiple_of(self.record_every)
    }
}

/// Outcome of one single-type (or cutoff) replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub replica: u64,
    /// First grid time at which the state is identically zero.
    pub extinction_time: Option<f64>,
    pub mass_path: Vec<(f64, f64)>,
    pub occupancy_path: Vec<(f64, usize)>,
    #[serde(skip)]
    pub final_state: LatticeState,
}

/// Read-only view of a state visited during a run.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    field: &'a Field,
}

impl Snapshot<'_> {
    pub fn total_mass(&self) -> f64 {
        self.field.mass()
    }

    pub fn support_size(&self) -> usize {
        self.field.support_size()
    }

    /// `Σ_x u(x)^p` over the support.
    pub fn power_sum(&self, p: f64) -> f64 {
        self.field.power_sum(p)
    }

    pub fn get(&self, x: &Site) -> f64 {
        self.field.get(x.raw())
    }

    pub fn is_zero(&self) -> bool {
        self.field.is_zero()
    }

    pub fn min_value(&self) -> f64 {
        self.field.values().iter().copied().fold(0.0, f64::min)
    }

    pub fn to_state(&self) -> LatticeState {
        self.field.to_state()
    }
}

/// State after step `step` (step 0 is the initial state).
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub step: u64,
    pub t: f64,
    pub state: Snapshot<'a>,
}

/// One step of `du = Qu dt + u^γ dB_x` on Z^d.
pub fn step_single_type(
    u: &LatticeState,
    p: &ModelParams,
    dt: f64,
    scheme: Scheme,
    noise: &dyn NoiseSource,
    step: u64,
) -> Result<LatticeState> {
    p.validate()?;
    u.check_dim(p.dim())?;
    check_dt(dt, p.generator.qnorm())?;
    let jumps = Jumps::new(&p.generator);
    let f = Field::from_state(u);
    Ok(single_step(
        &f,
        p.gamma,
        &jumps,
        dt,
        scheme,
        noise,
        step,
        CHANNEL_SINGLE,
        false,
    )
    .to_state())
}

/// One step of the system killed outside `region`.
pub fn step_cutoff(
    v: &LatticeState,
    region: &BoxRegion,
    p: &ModelParams,
    dt: f64,
    scheme: Scheme,
    noise: &dyn NoiseSource,
    step: u64,
) -> Result<LatticeState> {
    p.validate()?;
    check_region(v, region, p.dim())?;
    check_dt(dt, p.generator.qnorm())?;
    let jumps = Jumps::new(&p.generator);
    let mut out = single_step(
        &Field::from_state(v),
        p.gamma,
        &jumps,
        dt,
        scheme,
        noise,
        step,
        CHANNEL_SINGLE,
        false,
    );
    out.retain(|c| region.contains(&Site::from_array(*c, region.dim())));
    Ok(out.to_state())
}

/// One step of the mutually catalytic system.
pub fn step_catalytic(
    u: &LatticeState,
    v: &LatticeState,
    g: &GeneratorSpec,
    dt: f64,
    scheme: Scheme,
    noise: &dyn NoiseSource,
    step: u64,
) -> Result<(LatticeState, LatticeState)> {
    g.validate()?;
    u.check_dim(g.dim())?;
    v.check_dim(g.dim())?;
    check_dt(dt, g.qnorm())?;
    let jumps = Jumps::new(g);
    let (a, b) = catalytic_step(
        &Field::from_state(u),
        &Field::from_state(v),
        &jumps,
        dt,
        scheme,
        noise,
        step,
        (CHANNEL_U, CHANNEL_V),
    );
    Ok((a.to_state(), b.to_state()))
}

/// One step of `dZ = A Z^γ dB`; `key = None` switches the noise off.
pub fn step_feller(
    z: f64,
    a: f64,
    gamma: f64,
    dt: f64,
    scheme: Scheme,
    key: Option<StreamKey>,
) -> Result<f64> {
    check_scalar(z, a, gamma)?;
    check_dt(dt, a * a)?;
    Ok(scalar_step(z, a, gamma, dt, scheme, key))
}

fn check_scalar(z: f64, a: f64, gamma: f64) -> Result<()> {
    check_gamma(gamma)?;
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::param("z", format!("must be non-negative, got {z}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    Ok(())
}

fn check_region(v: &LatticeState, region: &BoxRegion, dim: usize) -> Result<()> {
    v.check_dim(dim)?;
    if region.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: region.dim(),
        });
    }
    if let Some(x) = v.support().find(|x| !region.contains(x)) {
        return Err(Error::Precondition(format!(
            "initial support site {x} lies outside the box of radius {}",
            region.radius()
        )));
    }
    Ok(())
}

struct Recorder {
    mass_path: Vec<(f64, f64)>,
    occupancy_path: Vec<(f64, usize)>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            mass_path: Vec::new(),
            occupancy_path: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, f: &Field) {
        self.mass_path.push((t, f.mass()));
        self.occupancy_path.push((t, f.support_size()));
    }
}

/// Runs the single-type system (or the cutoff system when `cfg.region` is
/// set) to `t_end` or extinction.
pub fn run_trajectory(
    u0: &LatticeState,
    p: &ModelParams,
    cfg: &TrajectoryConfig,
) -> Result<TrajectorySummary> {
    run_trajectory_with(u0, p, cfg, |_| {})
}

/// [`run_trajectory`] calling `observe` on the initial state and after
/// every step.
pub fn run_trajectory_with(
    u0: &LatticeState,
    p: &ModelParams,
    cfg: &TrajectoryConfig,
    mut observe: impl FnMut(&Observation),
) -> Result<TrajectorySummary> {
    p.validate()?;
    cfg.validate(p.generator.qnorm())?;
    match &cfg.region {
        Some(r) => check_region(u0, r, p.dim())?,
        None => u0.check_dim(p.dim())?,
    }
    let noise = cfg.noise();
    let jumps = Jumps::new(&p.generator);
    let mut f = Field::from_state(u0);
    let mut rec = Recorder::new();
    rec.push(0.0, &f);
    observe(&Observation {
        step: 0,
        t: 0.0,
        state: Snapshot { field: &f },
    });
    let mut extinction_time = f.is_zero().then_some(0.0);
    let steps = cfg.steps();
    let mut k = 0;
    while extinction_time.is_none() && k < steps {
        let mut next = single_step(
            &f,
            p.gamma,
            &jumps,
            cfg.dt,
            cfg.scheme,
            &noise,
            k,
            CHANNEL_SINGLE,
            false,
        );
        if let Some(r) = &cfg.region {
            next.retain(|c| r.contains(&Site::from_array(*c, r.dim())));
        }
        f = next;
        k += 1;
        let t = cfg.time(k);
        observe(&Observation {
            step: k,
            t,
            state: Snapshot { field: &f },
        });
        if f.is_zero() {
            extinction_time = Some(t);
        }
        if extinction_time.is_some() || k == steps || cfg.records(k) {
            rec.push(t, &f);
        }
    }
    Ok(TrajectorySummary {
        replica: cfg.replica_index,
        extinction_time,
        mass_path: rec.mass_path,
        occupancy_path: rec.occupancy_path,
        final_state: f.to_state(),
    })
}

/// Pathwise comparison of the free and the cutoff system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingStats {
    /// `(site, step)` pairs with `v > u + COUPLING_TOL`.
    pub violations: u64,
    /// `(site, step)` pairs at which `v` was compared.
    pub site_steps: u64,
}

/// Evolves `u` on Z^d and `v` killed outside `region` with the same noise
/// at every `(site, step)`, and counts ordering violations `v > u`. Both
/// systems use the order-preserving noise sampler, so their paths differ
/// from [`run_trajectory`] with the same seed.
pub fn coupled_run(
    u0: &LatticeState,
    v0: &LatticeState,
    region: &BoxRegion,
    p: &ModelParams,
    cfg: &TrajectoryConfig,
) -> Result<(TrajectorySummary, TrajectorySummary, CouplingStats)> {
    p.validate()?;
    cfg.validate(p.generator.qnorm())?;
    u0.check_dim(p.dim())?;
    check_region(v0, region, p.dim())?;
    if let Some((x, a)) = v0.iter().find(|(x, a)| *a > u0.get(x)) {
        return Err(Error::Precondition(format!(
            "v0({x}) = {a} exceeds u0({x}) = {}",
            u0.get(x)
        )));
    }
    let noise = cfg.noise();
    let jumps = Jumps::new(&p.generator);
    let mut fu = Field::from_state(u0);
    let mut fv = Field::from_state(v0);
    let (mut ru, mut rv) = (Recorder::new(), Recorder::new());
    ru.push(0.0, &fu);
    rv.push(0.0, &fv);
    let mut ext_u = fu.is_zero().then_some(0.0);
    let mut ext_v = fv.is_zero().then_some(0.0);
    let mut stats = CouplingStats {
        violations: 0,
        site_steps: 0,
    };
    let steps = cfg.steps();
    let mut k = 0;
    while (ext_u.is_none() || ext_v.is_none()) && k < steps {
        fu = single_step(
            &fu,
            p.gamma,
            &jumps,
            cfg.dt,
            cfg.scheme,
            &noise,
            k,
            CHANNEL_SINGLE,
            true,
        );
        fv = single_step(
            &fv,
            p.gamma,
            &jumps,
            cfg.dt,
            cfg.scheme,
            &noise,
            k,
            CHANNEL_SINGLE,
            true,
        );
        fv.retain(|c| region.contains(&Site::from_array(*c, region.dim())));
        k += 1;
        let t = cfg.time(k);
        for (i, &b) in fv.values().iter().enumerate() {
            if b > 0.0 {
                stats.site_steps += 1;
                if b > fu.get(&fv.coords(i)) + COUPLING_TOL {
                    stats.violations += 1;
                }
            }
        }
        if ext_u.is_none() && fu.is_zero() {
            ext_u = Some(t);
        }
        if ext_v.is_none() && fv.is_zero() {
            ext_v = Some(t);
        }
        let done = (ext_u.is_some() && ext_v.is_some()) || k == steps;
        if done || cfg.records(k) {
            ru.push(t, &fu);
            rv.push(t, &fv);
        }
    }
    let summary = |ext, rec: Recorder, f: &Field| TrajectorySummary {
        replica: cfg.replica_index,
        extinction_time: ext,
        mass_path: rec.mass_path,
        occupancy_path: rec.occupancy_path,
        final_state: f.to_state(),
    };
    Ok((summary(ext_u, ru, &fu), summary(ext_v, rv, &fv), stats))
}

/// Which catalytic extinction event a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtinctionTarget {
    U,
    V,
    #[default]
    Either,
    Both,
}

/// Outcome of one catalytic replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalyticSummary {
    pub replica: u64,
    /// Extinction time of the requested target event.
    pub extinction_time: Option<f64>,
    pub u_extinction_time: Option<f64>,
    pub v_extinction_time: Option<f64>,
    /// `(t, <U_t,1>, <V_t,1>)`.
    pub mass_path: Vec<(f64, f64, f64)>,
    /// Mass removed outside the truncation radius, per type.
    pub truncated_mass: (f64, f64),
    #[serde(skip)]
    pub final_u: LatticeState,
    #[serde(skip)]
    pub final_v: LatticeState,
}

/// State pair after step `step` of a catalytic run.
#[derive(Debug, Clone, Copy)]
pub struct CatalyticObservation<'a> {
    pub step: u64,
    pub t: f64,
    pub u: Snapshot<'a>,
    pub v: Snapshot<'a>,
}

/// Runs the mutually catalytic system to `t_end`, truncating both types
/// outside the ℓ¹ ball of radius `cfg.r_max`. The run stops early once
/// both types are extinct.
pub fn run_catalytic(
    u0: &LatticeState,
    v0: &LatticeState,
    g: &GeneratorSpec,
    cfg: &TrajectoryConfig,
    target: ExtinctionTarget,
) -> Result<CatalyticSummary> {
    run_catalytic_with(u0, v0, g, cfg, target, |_| {})
}

/// [`run_catalytic`] with an observer.
pub fn run_catalytic_with(
    u0: &LatticeState,
    v0: &LatticeState,
    g: &GeneratorSpec,
    cfg: &TrajectoryConfig,
    target: ExtinctionTarget,
    mut observe: impl FnMut(&CatalyticObservation),
) -> Result<CatalyticSummary> {
    g.validate()?;
    cfg.validate(g.qnorm())?;
    u0.check_dim(g.dim())?;
    v0.check_dim(g.dim())?;
    let r_max = cfg.r_max as u64;
    let inside = |c: &field::Coords| c.iter().map(|x| x.unsigned_abs() as u64).sum::<u64>() <= r_max;
    let noise = cfg.noise();
    let jumps = Jumps::new(g);
    let mut fu = Field::from_state(u0);
    let mut fv = Field::from_state(v0);
    let mut truncated = (fu.retain(inside), fv.retain(inside));
    let mut mass_path = vec![(0.0, fu.mass(), fv.mass())];
    observe(&CatalyticObservation {
        step: 0,
        t: 0.0,
        u: Snapshot { field: &fu },
        v: Snapshot { field: &fv },
    });
    let mut ext_u = fu.is_zero().then_some(0.0);
    let mut ext_v = fv.is_zero().then_some(0.0);
    let steps = cfg.steps();
    let mut k = 0;
    while (ext_u.is_none() || ext_v.is_none()) && k < steps {
        let (a, b) = catalytic_step(
            &fu,
            &fv,
            &jumps,
            cfg.dt,
            cfg.scheme,
            &noise,
            k,
            (CHANNEL_U, CHANNEL_V),
        );
        fu = a;
        fv = b;
        truncated.0 += fu.retain(inside);
        truncated.1 += fv.retain(inside);
        k += 1;
        let t = cfg.time(k);
        observe(&CatalyticObservation {
            step: k,
            t,
            u: Snapshot { field: &fu },
            v: Snapshot { field: &fv },
        });
        if ext_u.is_none() && fu.is_zero() {
            ext_u = Some(t);
        }
        if ext_v.is_none() && fv.is_zero() {
            ext_v = Some(t);
        }
        let done = (ext_u.is_some() && ext_v.is_some()) || k == steps;
        if done || cfg.records(k) {
            mass_path.push((t, fu.mass(), fv.mass()));
        }
    }
    let extinction_time = match target {
        ExtinctionTarget::U => ext_u,
        ExtinctionTarget::V => ext_v,
        ExtinctionTarget::Either => match (ext_u, ext_v) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        },
        ExtinctionTarget::Both => ext_u.zip(ext_v).map(|(a, b)| a.max(b)),
    };
    Ok(CatalyticSummary {
        replica: cfg.replica_index,
        extinction_time,
        u_extinction_time: ext_u,
        v_extinction_time: ext_v,
        mass_path,
        truncated_mass: truncated,
        final_u: fu.to_state(),
        final_v: fv.to_state(),
    })
}

/// Outcome of one scalar replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarSummary {
    pub replica: u64,
    pub extinction_time: Option<f64>,
    #[serde(rename = "mass_path")]
    pub path: Vec<(f64, f64)>,
    pub final_value: f64,
}

/// Runs `dZ = A Z^γ dB` from `z0` to `t_end` or absorption at zero. The
/// stability guard requires `dt·A² <= STABILITY_LIMIT`.
pub fn run_feller(z0: f64, a: f64, gamma: f64, cfg: &TrajectoryConfig) -> Result<ScalarSummary> {
    run_feller_with(z0, a, gamma, cfg, |_, _, _| {})
}

/// [`run_feller`] calling `observe(step, t, z)` on the initial value and
/// after every step.
pub fn run_feller_with(
    z0: f64,
    a: f64,
    gamma: f64,
    cfg: &TrajectoryConfig,
    mut observe: impl FnMut(u64, f64, f64),
) -> Result<ScalarSummary> {
    check_scalar(z0, a, gamma)?;
    cfg.validate(a * a)?;
    let noise = cfg.noise();
    let mut z = z0;
    let mut path = vec![(0.0, z)];
    observe(0, 0.0, z);
    let mut extinction_time = (z == 0.0).then_some(0.0);
    let steps = cfg.steps();
    let mut k = 0;
    while extinction_time.is_none() && k < steps {
        z = scalar_step(
            z,
            a,
            gamma,
            cfg.dt,
            cfg.scheme,
            Some(noise.stream(&[], k, CHANNEL_SCALAR)),
        );
        k += 1;
        let t = cfg.time(k);
        observe(k, t, z);
        if z == 0.0 {
            extinction_time = Some(t);
        }
        if extinction_time.is_some() || k == steps || cfg.records(k) {
            path.push((t, z));
        }
    }
    Ok(ScalarSummary {
        replica: cfg.replica_index,
        extinction_time,
        path,
        final_value: z,
    })
}
