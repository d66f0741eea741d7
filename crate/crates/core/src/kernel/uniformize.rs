//! Transition kernels of general finite-range generators by uniformization:
//! with `Λ = ||Q||` and `K = I + Q/Λ`,
//! `P_t = Σ_k e^{-Λt} (Λt)^k / k! · K^k`, truncated once the Poisson tail
//! drops below the tolerance.

use statrs::function::gamma::ln_gamma;

use super::poisson::poisson_tail;
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::{Site, MAX_DIM};
use crate::region::BoxRegion;

/// Largest dense table (number of cells) a kernel computation may allocate.
pub const MAX_TABLE_CELLS: usize = 1 << 22;

/// `p_t(x, y)` for all pairs, either on all of Z^d (stored by offset) or
/// for the walk killed on leaving a box (stored as a dense matrix).
#[derive(Debug, Clone)]
pub struct KernelTable {
    time: f64,
    truncation_error: f64,
    terms: usize,
    kind: TableKind,
}

#[derive(Debug, Clone)]
enum TableKind {
    Free {
        grid: Grid,
        values: Vec<f64>,
    },
    Killed {
        region: BoxRegion,
        sites: Vec<Site>,
        matrix: Vec<f64>,
    },
}

impl KernelTable {
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Upper bound on `Σ_y |p_t(x,y) - table(x,y)|` for every `x`.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    /// Number of uniformization terms kept.
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// The killing region, for tables of the walk killed outside a box.
    pub fn region(&self) -> Option<&BoxRegion> {
        match &self.kind {
            TableKind::Free { .. } => None,
            TableKind::Killed { region, .. } => Some(region),
        }
    }

    /// `p_t(x, y)`.
    pub fn get(&self, x: &Site, y: &Site) -> f64 {
        match &self.kind {
            TableKind::Free { grid, values } => grid.index(&y.sub(x)).map_or(0.0, |i| values[i]),
            TableKind::Killed {
                region,
                matrix,
                sites,
                ..
            } => match (region.index_of(x), region.index_of(y)) {
                (Some(i), Some(j)) => matrix[i * sites.len() + j],
                _ => 0.0,
            },
        }
    }

    /// Nonzero entries `(y - x, p_t(x, y))` of a free-space table.
    pub fn offsets(&self) -> Vec<(Site, f64)> {
        match &self.kind {
            TableKind::Free { grid, values } => values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > 0.0)
                .map(|(i, v)| (grid.site(i), *v))
                .collect(),
            TableKind::Killed { .. } => Vec::new(),
        }
    }

    /// `Σ_y p_t(x, y)`.
    pub fn row_sum(&self, x: &Site) -> f64 {
        match &self.kind {
            TableKind::Free { values, .. } => values.iter().sum(),
            TableKind::Killed {
                region,
                sites,
                matrix,
            } => region.index_of(x).map_or(0.0, |i| {
                matrix[i * sites.len()..(i + 1) * sites.len()].iter().sum()
            }),
        }
    }
}

/// Dense cube `[-r, r]^d` of offsets.
#[derive(Debug, Clone)]
struct Grid {
    dim: usize,
    radius: i32,
    side: usize,
}

impl Grid {
    fn new(dim: usize, radius: u32) -> Result<Self> {
        let side = 2 * radius as usize + 1;
        let cells = side.checked_pow(dim as u32).filter(|c| *c <= MAX_TABLE_CELLS);
        if cells.is_none() {
            return Err(Error::Precondition(format!(
                "kernel table of radius {radius} in dimension {dim} exceeds {MAX_TABLE_CELLS} cells"
            )));
        }
        Ok(Grid {
            dim,
            radius: radius as i32,
            side,
        })
    }

    fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn index(&self, x: &Site) -> Option<usize> {
        let mut idx = 0;
        for &c in x.coords().iter().rev() {
            if c.abs() > self.radius {
                return None;
            }
            idx = idx * self.side + (c + self.radius) as usize;
        }
        Some(idx)
    }

    fn stride(&self, x: &Site) -> isize {
        x.coords()
            .iter()
            .rev()
            .fold(0isize, |acc, &c| acc * self.side as isize + c as isize)
    }

    fn site(&self, mut idx: usize) -> Site {
        let mut c = [0i32; MAX_DIM];
        for ci in c.iter_mut().take(self.dim) {
            *ci = (idx % self.side) as i32 - self.radius;
            idx /= self.side;
        }
        Site::from_array(c, self.dim)
    }
}

fn check_time(t: f64, tol: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::param("tol", format!("must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

/// Uniformization weights `e^{-Λt}(Λt)^k/k!`, `k = 0..=K`, and the dropped tail.
fn uniformization_weights(lam_t: f64, tol: f64) -> (Vec<f64>, f64) {
    if lam_t == 0.0 {
        return (vec![1.0], 0.0);
    }
    let mut k = lam_t.floor() as u64;
    while poisson_tail(lam_t, k + 1).exact_tail > tol {
        k += 1;
    }
    while k > 0 && poisson_tail(lam_t, k).exact_tail <= tol {
        k -= 1;
    }
    let weights = (0..=k)
        .map(|j| (-lam_t + j as f64 * lam_t.ln() - ln_gamma(j as f64 + 1.0)).exp())
        .collect();
    (weights, poisson_tail(lam_t, k + 1).exact_tail)
}

/// `p_t(0, ·)` on Z^d, accurate to `tol` in total variation.
pub fn uniformized_kernel(g: &GeneratorSpec, t: f64, tol: f64) -> Result<KernelTable> {
    g.validate()?;
    check_time(t, tol)?;
    let lam = g.qnorm();
    let (weights, truncation_error) = uniformization_weights(lam * t, tol);
    let steps = weights.len() - 1;
    let reach = (steps as u64 * g.range() as u64).max(1);
    let grid = Grid::new(g.dim(), u32::try_from(reach).unwrap_or(u32::MAX))?;
    let jumps: Vec<(isize, f64)> = g.jumps().iter().map(|(o, r)| (grid.stride(o), r / lam)).collect();
    let origin = grid.index(&Site::origin(g.dim())?).expect("origin in grid");

    let mut cur = vec![0.0; grid.len()];
    let mut next = vec![0.0; grid.len()];
    let mut table = vec![0.0; grid.len()];
    cur[origin] = 1.0;
    for (k, w) in weights.iter().enumerate() {
        for (acc, c) in table.iter_mut().zip(&cur) {
            *acc += w * c;
        }
        if k == steps {
            break;
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        // After k steps the walk is within ℓ∞ distance k·range of the
        // origin, so one more jump stays inside the grid.
        for (i, &c) in cur.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for &(s, p) in &jumps {
                next[(i as isize + s) as usize] += c * p;
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(KernelTable {
        time: t,
        truncation_error,
        terms: weights.len(),
        kind: TableKind::Free { grid, values: table },
    })
}

/// `p^N_t(x, y)` for the walk killed on leaving `region`.
pub fn dirichlet_kernel(g: &GeneratorSpec, region: &BoxRegion, t: f64, tol: f64) -> Result<KernelTable> {
    g.validate()?;
    check_time(t, tol)?;
    if region.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: region.dim(),
        });
    }
    let sites = region.sites();
    let m = sites.len();
    if m.checked_mul(m).is_none_or(|c| c > MAX_TABLE_CELLS) {
        return Err(Error::Precondition(format!(
            "killed kernel on {m} sites exceeds {MAX_TABLE_CELLS} cells"
        )));
    }
    let lam = g.qnorm();
    let (weights, truncation_error) = uniformization_weights(lam * t, tol);
    let jumps = g.jumps();
    // Sparse sub-stochastic step matrix: row i lists (j, rate/Λ) for
    // jumps landing inside the region.
    let step: Vec<Vec<(usize, f64)>> = sites
        .iter()
        .map(|x| {
            jumps
                .iter()
                .filter_map(|(o, r)| region.index_of(&x.add(o)).map(|j| (j, r / lam)))
                .collect()
        })
        .collect();

    let mut cur = vec![0.0; m * m];
    let mut next = vec![0.0; m * m];
    let mut matrix = vec![0.0; m * m];
    for i in 0..m {
        cur[i * m + i] = 1.0;
    }
    for (k, w) in weights.iter().enumerate() {
        for (acc, c) in matrix.iter_mut().zip(&cur) {
            *acc += w * c;
        }
        if k + 1 == weights.len() {
            break;
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..m {
            let row = &cur[a * m..(a + 1) * m];
            let out = &mut next[a * m..(a + 1) * m];
            for (i, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for &(j, p) in &step[i] {
                    out[j] += c * p;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(KernelTable {
        time: t,
        truncation_error,
        terms: weights.len(),
        kind: TableKind::Killed {
            region: *region,
            sites,
            matrix,
        },
    })
}
