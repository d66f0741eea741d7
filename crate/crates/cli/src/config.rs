//! Run configuration. One TOML file describes an experiment; the schema
//! is documented in `docs/config.md`.

use serde::{Deserialize, Serialize};

use lattice_extinction::engine::{ExtinctionTarget, Scheme, TrajectoryConfig, DEFAULT_R_MAX};
use lattice_extinction::estimators::Scenario;
use lattice_extinction::{BoxRegion, Error, GeneratorSpec, LatticeState, ModelParams, Site};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory, relative to the working directory.
    pub dir: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Single {
        gamma: f64,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator: Option<GeneratorSpec>,
        u0: InitialData,
    },
    Cutoff {
        gamma: f64,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator: Option<GeneratorSpec>,
        /// Half-width `N` of the box `D_N`.
        radius: u32,
        u0: InitialData,
    },
    Catalytic {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator: Option<GeneratorSpec>,
        u0: InitialData,
        v0: InitialData,
        #[serde(default)]
        target: ExtinctionTarget,
    },
    Feller {
        z0: f64,
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "half")]
        gamma: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub site: Vec<i32>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Delta {
        points: Vec<Point>,
    },
    /// `c·e^{-λ|x|}` on the ℓ¹ ball of radius `radius`.
    Exponential {
        c: f64,
        lambda: f64,
        radius: u32,
    },
}

impl InitialData {
    pub fn build(&self, dim: usize) -> Result<LatticeState, Error> {
        match self {
            InitialData::Zero => LatticeState::new(dim),
            InitialData::Delta { points } => {
                let mut pairs = Vec::with_capacity(points.len());
                for p in points {
                    pairs.push((Site::new(&p.site)?, p.mass));
                }
                LatticeState::from_pairs(dim, pairs)
            }
            InitialData::Exponential { c, lambda, radius } => {
                LatticeState::exponential(dim, *c, *lambda, *radius)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub dt: f64,
    pub t_end: f64,
    /// Extinction-curve grid; defaults to ten equal steps up to `t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    pub n_replicas: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_r_max")]
    pub r_max: u32,
    /// Mass and occupancy are recorded every this many steps (0: endpoints).
    #[serde(default)]
    pub record_every: u64,
}

fn default_r_max() -> u32 {
    DEFAULT_R_MAX
}

/// Inputs of the `moments` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSpec {
    /// Times of the total-mass martingale check.
    pub times: Vec<f64>,
    /// Site of the catalytic mean/variance check (catalytic models only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<Vec<i32>>,
    /// Time of the catalytic mean/variance check; defaults to `run.t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_time: Option<f64>,
}

impl RunConfig {
    /// Parses `text`; errors carry the offending line.
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            CliError::Config {
                path: path.into(),
                line,
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scenario(&self) -> Result<Scenario, Error> {
        let generator = |d: usize, g: &Option<GeneratorSpec>| match g {
            Some(g) if g.dim() != d => Err(Error::DimensionMismatch {
                expected: d,
                found: g.dim(),
            }),
            Some(g) => Ok(g.clone()),
            None => GeneratorSpec::laplacian(d),
        };
        Ok(match &self.model {
            ModelSpec::Single {
                gamma,
                d,
                generator: g,
                u0,
            } => Scenario::Single {
                params: ModelParams::new(*gamma, generator(*d, g)?)?,
                u0: u0.build(*d)?,
            },
            ModelSpec::Cutoff {
                gamma,
                d,
                generator: g,
                radius,
                u0,
            } => Scenario::Cutoff {
                params: ModelParams::new(*gamma, generator(*d, g)?)?,
                u0: u0.build(*d)?,
                region: BoxRegion::new(*radius, *d)?,
            },
            ModelSpec::Catalytic {
                d,
                generator: g,
                u0,
                v0,
                target,
            } => Scenario::Catalytic {
                generator: generator(*d, g)?,
                u0: u0.build(*d)?,
                v0: v0.build(*d)?,
                target: *target,
            },
            ModelSpec::Feller { z0, a, gamma } => Scenario::Feller {
                z0: *z0,
                a: *a,
                gamma: *gamma,
            },
        })
    }

    pub fn trajectory(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            scheme: self.run.scheme,
            r_max: self.run.r_max,
            record_every: self.run.record_every,
            ..TrajectoryConfig::new(self.run.dt, self.run.t_end, self.run.master_seed)
        }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        match &self.run.t_grid {
            Some(g) => g.clone(),
            None => (1..=10).map(|k| self.run.t_end * k as f64 / 10.0).collect(),
        }
    }

    /// Runs every check that does not need a simulation.
    pub fn validate(&self) -> Result<Scenario, Error> {
        let scenario = self.scenario()?;
        if self.run.n_replicas == 0 {
            return Err(Error::InvalidParameter {
                name: "n_replicas",
                reason: "must be positive".into(),
            });
        }
        let grid = self.t_grid();
        if grid.is_empty()
            || grid
                .iter()
                .any(|t| !(t.is_finite() && *t >= 0.0 && *t <= self.run.t_end + 1e-12))
            || grid.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::InvalidParameter {
                name: "t_grid",
                reason: format!("must be non-decreasing times in [0, t_end = {}]", self.run.t_end),
            });
        }
        scenario.validate(&self.trajectory())?;
        Ok(scenario)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|b| *b == b'\n')
        .count()
        + 1
}

/// Line of the first `key = ...` assignment in `text`.
pub fn find_key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}
