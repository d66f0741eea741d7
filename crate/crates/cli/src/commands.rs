use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use lattice_extinction::estimators::{
    check_catalytic_moments, check_mass_martingale, estimate_extinction_curve, feller_extinction_oracle,
    simulate, CatalyticMoments, ExtinctionCurve, MeanTest, MomentReport, ReplicaSummary, Scenario,
};
use lattice_extinction::kernel::{rw_kernel_1d, series_sandwich_1d};
use lattice_extinction::verify::{run_suite, Check, Suite, VerifyOptions};
use lattice_extinction::{Error, Site, MAX_DIM};

use crate::config::{find_key_line, RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{fmt_g, json_line, json_pretty, Bundle, Csv};

/// Environment variable holding the number of worker threads.
pub const THREADS_ENV: &str = "LATTICE_SIM_THREADS";

/// Largest number of rows the `kernel` command will tabulate.
const MAX_KERNEL_ROWS: u64 = 1 << 20;

/// What a command prints and whether its assertions held.
#[derive(Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub failed: bool,
}

pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(CliError::Config {
                path: THREADS_ENV.into(),
                line: None,
                message: format!("expected a positive integer, got `{v}`"),
            }),
        },
    }
}

/// A parsed config together with its source text, for line-referenced errors.
pub struct Loaded {
    pub config: RunConfig,
    text: String,
    path: String,
}

impl Loaded {
    pub fn read(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Self, CliError> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| CliError::Config {
            path: display.clone(),
            line: None,
            message: e.to_string(),
        })?;
        let mut config = RunConfig::parse(&text, &display)?;
        if let Some(s) = seed {
            config.run.master_seed = s;
        }
        if let Some(o) = out {
            config.output.dir = o.display().to_string();
        }
        Ok(Loaded {
            config,
            text,
            path: display,
        })
    }

    /// Validates everything that can be checked before the first replica.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.config.validate().map_err(|e| self.locate(e))
    }

    /// Numeric guards keep their own exit code; every other engine error
    /// is reported against the config line that set the offending key.
    fn locate(&self, e: Error) -> CliError {
        if e.is_numeric_guard() {
            return CliError::Engine(e);
        }
        let line = match &e {
            Error::InvalidParameter { name, .. } => find_key_line(&self.text, name),
            Error::StabilityGuard { .. } => find_key_line(&self.text, "dt"),
            _ => None,
        };
        CliError::Config {
            path: self.path.clone(),
            line,
            message: e.to_string(),
        }
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.config.output.dir)
    }

    /// Output bundle seeded with the effective config, overrides applied.
    fn bundle(&self) -> Bundle {
        let mut b = Bundle::default();
        b.add(self.out_dir().join("config.toml"), self.config.emit());
        b
    }
}

#[derive(Serialize)]
struct Header<'a> {
    schema: &'a str,
    version: u32,
    master_seed: u64,
    n_replicas: u64,
}

fn curve_csv(curve: &ExtinctionCurve, oracle: Option<&[f64]>, seed: u64) -> String {
    let mut header = vec!["t", "p_hat", "ci_lower", "ci_upper", "ci_half_width"];
    if oracle.is_some() {
        header.push("oracle");
    }
    let mut csv = Csv::new(
        &format!(
            "lattice-sim extinction_curve v{SCHEMA_VERSION} master_seed={seed} n_replicas={} censored={}",
            curve.n_replicas, curve.censored_count
        ),
        &header,
    );
    for i in 0..curve.t_grid.len() {
        let mut cells = vec![
            fmt_g(curve.t_grid[i]),
            fmt_g(curve.p_hat[i]),
            fmt_g(curve.ci_lower[i]),
            fmt_g(curve.ci_upper[i]),
            fmt_g(curve.ci_half_width[i]),
        ];
        if let Some(o) = oracle {
            cells.push(fmt_g(o[i]));
        }
        csv.row(&cells);
    }
    csv.finish()
}

/// Extinction probability of the unit-rate square-root diffusion, which is
/// the total mass of the γ = 1/2 lattice system.
fn oracle(scenario: &Scenario, t_grid: &[f64]) -> Option<Vec<f64>> {
    let z0 = match scenario {
        Scenario::Feller { z0, a, gamma } if *a == 1.0 && *gamma == 0.5 => *z0,
        Scenario::Single { params, u0 } if params.gamma == 0.5 => u0.total_mass(),
        _ => return None,
    };
    t_grid
        .iter()
        .map(|&t| {
            if t == 0.0 {
                Some(if z0 == 0.0 { 1.0 } else { 0.0 })
            } else {
                feller_extinction_oracle(z0, t).ok()
            }
        })
        .collect()
}

pub fn simulate_cmd(loaded: &Loaded, threads: Option<usize>) -> Result<Outcome, CliError> {
    let scenario = loaded.scenario()?;
    let c = &loaded.config;
    let cfg = c.trajectory();
    let runs = simulate(&scenario, &cfg, c.run.n_replicas, threads).map_err(|e| loaded.locate(e))?;
    let times: Vec<Option<f64>> = runs.iter().map(ReplicaSummary::extinction_time).collect();
    let grid = c.t_grid();
    let curve = ExtinctionCurve::from_times(&grid, &times, scenario.is_trivially_extinct());

    let mut jsonl = json_line(&Header {
        schema: "lattice-sim.trajectories",
        version: SCHEMA_VERSION,
        master_seed: c.run.master_seed,
        n_replicas: c.run.n_replicas,
    });
    jsonl.push('\n');
    for r in &runs {
        jsonl.push_str(&json_line(r));
        jsonl.push('\n');
    }
    let dir = loaded.out_dir();
    let mut bundle = loaded.bundle();
    bundle.add(dir.join("trajectories.jsonl"), jsonl);
    bundle.add(
        dir.join("extinction_curve.csv"),
        curve_csv(&curve, None, c.run.master_seed),
    );
    let written = bundle.write()?;
    Ok(Outcome {
        lines: written.iter().map(|p| format!("wrote {}", p.display())).collect(),
        failed: false,
    })
}

#[derive(Serialize)]
struct CurveReport<'a> {
    schema: &'a str,
    version: u32,
    master_seed: u64,
    config: &'a RunConfig,
    curve: &'a ExtinctionCurve,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<&'a [f64]>,
}

pub fn curve_cmd(loaded: &Loaded, threads: Option<usize>) -> Result<Outcome, CliError> {
    let scenario = loaded.scenario()?;
    let c = &loaded.config;
    let grid = c.t_grid();
    let curve = estimate_extinction_curve(&scenario, &grid, c.run.n_replicas, &c.trajectory(), threads)
        .map_err(|e| loaded.locate(e))?;
    let oracle = oracle(&scenario, &grid);
    let report = CurveReport {
        schema: "lattice-sim.curve",
        version: SCHEMA_VERSION,
        master_seed: c.run.master_seed,
        config: c,
        curve: &curve,
        oracle: oracle.as_deref(),
    };
    let dir = loaded.out_dir();
    let mut bundle = loaded.bundle();
    bundle.add(
        dir.join("extinction_curve.csv"),
        curve_csv(&curve, oracle.as_deref(), c.run.master_seed),
    );
    bundle.add(dir.join("curve.json"), json_pretty(&report));
    let written = bundle.write()?;
    Ok(Outcome {
        lines: written.iter().map(|p| format!("wrote {}", p.display())).collect(),
        failed: false,
    })
}

#[derive(Serialize)]
struct MomentsFile<'a> {
    schema: &'a str,
    version: u32,
    master_seed: u64,
    config: &'a RunConfig,
    passed: bool,
    mass: &'a [MomentReport],
    #[serde(skip_serializing_if = "Option::is_none")]
    catalytic: Option<&'a CatalyticMoments>,
}

fn moment_line(r: &MomentReport) -> String {
    let at = r.site.map(|x| format!(" x={x}")).unwrap_or_default();
    let rel = match r.test {
        MeanTest::Equal => "~",
        MeanTest::AtMost => "<=",
    };
    let mut s = format!(
        "{} {} t={}{at} mean={:e} {rel} oracle={:e} se={:e}",
        if r.passed() { "PASS" } else { "FAIL" },
        r.label,
        r.time,
        r.sample_mean,
        r.oracle_mean,
        r.standard_error
    );
    if let Some(b) = r.var_bound {
        s.push_str(&format!(
            " var={:e} <= bound={b:e} rel_se={:e}",
            r.sample_var, r.var_rel_se
        ));
    }
    s
}

pub fn moments_cmd(loaded: &Loaded, threads: Option<usize>) -> Result<Outcome, CliError> {
    let scenario = loaded.scenario()?;
    let c = &loaded.config;
    let spec = c.moments.as_ref().ok_or_else(|| CliError::Config {
        path: loaded.path.clone(),
        line: None,
        message: "the moments command needs a [moments] section".into(),
    })?;
    let cfg = c.trajectory();
    let mass = check_mass_martingale(&scenario, &spec.times, c.run.n_replicas, &cfg, threads)
        .map_err(|e| loaded.locate(e))?;
    let catalytic = match (&scenario, &spec.site) {
        (
            Scenario::Catalytic {
                generator, u0, v0, ..
            },
            Some(site),
        ) => {
            let x = Site::new(site).map_err(|e| loaded.locate(e))?;
            let t = spec.site_time.unwrap_or(c.run.t_end);
            Some(
                check_catalytic_moments(u0, v0, generator, t, &x, c.run.n_replicas, &cfg, threads)
                    .map_err(|e| loaded.locate(e))?,
            )
        }
        (_, Some(_)) => {
            return Err(CliError::Config {
                path: loaded.path.clone(),
                line: find_key_line(&loaded.text, "site"),
                message: "moments.site applies to catalytic models only".into(),
            })
        }
        _ => None,
    };
    let mut reports: Vec<&MomentReport> = mass.iter().collect();
    if let Some(m) = &catalytic {
        reports.push(&m.u);
        reports.push(&m.v);
    }
    let passed = reports.iter().all(|r| r.passed());
    let file = MomentsFile {
        schema: "lattice-sim.moments",
        version: SCHEMA_VERSION,
        master_seed: c.run.master_seed,
        config: c,
        passed,
        mass: &mass,
        catalytic: catalytic.as_ref(),
    };
    let mut bundle = loaded.bundle();
    bundle.add(loaded.out_dir().join("moments.json"), json_pretty(&file));
    let written = bundle.write()?;
    let mut lines: Vec<String> = reports.iter().map(|r| moment_line(r)).collect();
    lines.extend(written.iter().map(|p| format!("wrote {}", p.display())));
    Ok(Outcome {
        lines,
        failed: !passed,
    })
}

#[derive(Serialize)]
struct VerifyFile<'a> {
    schema: &'a str,
    version: u32,
    suite: String,
    seed: u64,
    kernel_tol: f64,
    passed: bool,
    checks: &'a [Check],
}

pub fn verify_cmd(suite: &str, opts: &VerifyOptions, out: Option<&Path>) -> Result<Outcome, CliError> {
    let parsed: Suite = suite.parse().map_err(|e: Error| CliError::Config {
        path: "verify".into(),
        line: None,
        message: e.to_string(),
    })?;
    let checks = run_suite(parsed, opts)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut lines: Vec<String> = checks.iter().map(|c| c.to_string()).collect();
    lines.push(format!(
        "summary: {} passed, {failed} failed",
        checks.len() - failed
    ));
    if let Some(path) = out {
        let file = VerifyFile {
            schema: "lattice-sim.verify",
            version: SCHEMA_VERSION,
            suite: suite.to_string(),
            seed: opts.seed,
            kernel_tol: opts.kernel_tol,
            passed: failed == 0,
            checks: &checks,
        };
        let mut bundle = Bundle::default();
        bundle.add(path.to_path_buf(), json_pretty(&file));
        bundle.write()?;
        lines.push(format!("wrote {}", path.display()));
    }
    Ok(Outcome {
        lines,
        failed: failed > 0,
    })
}

/// Arguments of the `kernel` command.
#[derive(Debug, Clone)]
pub struct KernelArgs {
    pub d: usize,
    pub t: Vec<f64>,
    pub x: (i32, i32),
    pub tol: f64,
    /// Jump rate of each coordinate; 2 for the discrete Laplacian.
    pub axis_rate: f64,
}

fn arg_error(message: String) -> CliError {
    CliError::Config {
        path: "kernel".into(),
        line: None,
        message,
    }
}

/// CSV of `(t, x, p, lower, upper)` for the product walk. `x` holds the
/// coordinates separated by spaces.
pub fn kernel_table(a: &KernelArgs) -> Result<(String, bool), CliError> {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(arg_error(format!("tol must be positive, got {}", a.tol)));
    }
    if !(1..=MAX_DIM).contains(&a.d) {
        return Err(arg_error(format!("d must lie in 1..={MAX_DIM}, got {}", a.d)));
    }
    if !(a.axis_rate > 0.0 && a.axis_rate.is_finite()) {
        return Err(arg_error(format!(
            "axis rate must be positive, got {}",
            a.axis_rate
        )));
    }
    if let Some(t) = a.t.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(arg_error(format!("times must be non-negative, got {t}")));
    }
    let (lo, hi) = a.x;
    if lo > hi {
        return Err(arg_error(format!("empty x range {lo}:{hi}")));
    }
    let side = (hi as i64 - lo as i64 + 1) as u64;
    let rows = side
        .checked_pow(a.d as u32)
        .and_then(|n| n.checked_mul(a.t.len() as u64));
    if rows.is_none_or(|n| n > MAX_KERNEL_ROWS) {
        return Err(arg_error(format!("table would exceed {MAX_KERNEL_ROWS} rows")));
    }
    let mut csv = Csv::new(
        &format!(
            "lattice-sim kernel v{SCHEMA_VERSION} d={} axis_rate={} tol={:e}",
            a.d,
            fmt_g(a.axis_rate),
            a.tol
        ),
        &["t", "x", "p", "lower", "upper"],
    );
    let mut sandwich_ok = true;
    let per_axis = a.tol / a.d as f64;
    for &t in &a.t {
        let mut x = vec![lo; a.d];
        loop {
            let (mut p, mut lower, mut upper) = (1.0, 1.0, 1.0);
            for &xi in &x {
                p *= rw_kernel_1d(a.axis_rate, t, xi as i64, per_axis)?;
                let (l, u) = series_sandwich_1d(a.axis_rate, t, xi as i64);
                lower *= l;
                upper *= u;
            }
            sandwich_ok &= lower <= p + a.tol && p <= upper + a.tol;
            let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            csv.row(&[fmt_g(t), coords.join(" "), fmt_g(p), fmt_g(lower), fmt_g(upper)]);
            // Odometer over the box, last coordinate fastest.
            match (0..a.d).rev().find(|&k| x[k] < hi) {
                Some(k) => {
                    x[k] += 1;
                    x[k + 1..].fill(lo);
                }
                None => break,
            }
        }
    }
    Ok((csv.finish(), sandwich_ok))
}

pub fn kernel_cmd(a: &KernelArgs, out: Option<&Path>) -> Result<Outcome, CliError> {
    let (csv, ok) = kernel_table(a)?;
    let mut lines = Vec::new();
    match out {
        Some(path) => {
            let mut bundle = Bundle::default();
            bundle.add(path.to_path_buf(), csv);
            bundle.write()?;
            lines.push(format!("wrote {}", path.display()));
        }
        None => lines.extend(csv.lines().map(String::from)),
    }
    if !ok {
        lines.push("FAIL kernel sandwich violated".into());
    }
    Ok(Outcome { lines, failed: !ok })
}
