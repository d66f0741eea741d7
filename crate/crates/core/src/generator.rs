//! Symmetric, translation-invariant Q-matrices on Z^d.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeState, Site, MAX_DIM};

/// Relative tolerance for the symmetry check `q(o) = q(-o)`.
const SYMMETRY_TOL: f64 = 1e-12;

/// A jump-rate description of a symmetric random walk generator.
///
/// Rates are keyed by the jump offset `y - x`, so the chain is spatially
/// homogeneous. The diagonal is implied: `q_xx = -Σ_o q(o)`, which makes the
/// row sums zero and `qnorm = sup_x |q_xx|` finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// The discrete Laplacian: rate 1 to each of the 2d neighbours.
    NearestNeighbor { dim: usize },
    /// Explicit offset rates. `strong_h3` records whether the exponential
    /// moment hypothesis is known to hold with `λ'(λ) = λ`; it is metadata
    /// only and is never verified.
    Rates {
        dim: usize,
        rates: Vec<(Site, f64)>,
        #[serde(default)]
        strong_h3: bool,
    },
}

impl GeneratorSpec {
    pub fn laplacian(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(GeneratorSpec::NearestNeighbor { dim })
    }

    /// Builds an explicit-rate generator; rejects zero offsets, negative
    /// rates and asymmetric tables.
    pub fn from_rates<I>(dim: usize, rates: I, strong_h3: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (Site, f64)>,
    {
        let mut table: BTreeMap<Site, f64> = BTreeMap::new();
        for (o, r) in rates {
            o.check_dim(dim)?;
            if o.norm() == 0 {
                return Err(Error::param("rates", "the zero offset is implied by the row sum"));
            }
            if !r.is_finite() || r < 0.0 {
                return Err(Error::param(
                    "rates",
                    format!("rate {r} at offset {o} is not a finite non-negative number"),
                ));
            }
            if r > 0.0 {
                *table.entry(o).or_insert(0.0) += r;
            }
        }
        let g = GeneratorSpec::Rates {
            dim,
            rates: table.into_iter().collect(),
            strong_h3,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks the structural invariants (dimension, symmetry, finite norm).
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        if let GeneratorSpec::Rates { rates, .. } = self {
            let table: BTreeMap<Site, f64> = rates.iter().copied().collect();
            for (o, r) in &table {
                o.check_dim(dim)?;
                if !r.is_finite() || *r < 0.0 || o.norm() == 0 {
                    return Err(Error::param("rates", format!("invalid entry {r} at offset {o}")));
                }
                let mirror = table.get(&o.neg()).copied().unwrap_or(0.0);
                if (mirror - r).abs() > SYMMETRY_TOL * r.abs().max(mirror.abs()) {
                    return Err(Error::param(
                        "rates",
                        format!("asymmetric rates: q({o}) = {r} but q(-{o}) = {mirror}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            GeneratorSpec::NearestNeighbor { dim } | GeneratorSpec::Rates { dim, .. } => *dim,
        }
    }

    /// `sup_x |q_xx|`, the total jump rate.
    pub fn qnorm(&self) -> f64 {
        match self {
            GeneratorSpec::NearestNeighbor { dim } => 2.0 * *dim as f64,
            GeneratorSpec::Rates { rates, .. } => rates.iter().map(|(_, r)| r).sum(),
        }
    }

    pub fn is_laplacian(&self) -> bool {
        matches!(self, GeneratorSpec::NearestNeighbor { .. })
    }

    pub fn strong_h3(&self) -> bool {
        match self {
            GeneratorSpec::NearestNeighbor { .. } => true,
            GeneratorSpec::Rates { strong_h3, .. } => *strong_h3,
        }
    }

    /// Off-diagonal jumps `(offset, rate)`, positive rates only.
    pub fn jumps(&self) -> Vec<(Site, f64)> {
        match self {
            GeneratorSpec::NearestNeighbor { dim } => {
                let origin = Site::origin(*dim).expect("validated dimension");
                crate::lattice::neighbors(&origin)
                    .into_iter()
                    .map(|o| (o, 1.0))
                    .collect()
            }
            GeneratorSpec::Rates { rates, .. } => rates.iter().filter(|(_, r)| *r > 0.0).copied().collect(),
        }
    }

    /// Largest coordinate displacement of a single jump.
    pub fn range(&self) -> u32 {
        self.jumps().iter().map(|(o, _)| o.sup_norm()).max().unwrap_or(0)
    }

    /// `q(x, y)` for arbitrary sites.
    pub fn rate(&self, x: &Site, y: &Site) -> f64 {
        let o = y.sub(x);
        if o.norm() == 0 {
            return -self.qnorm();
        }
        match self {
            GeneratorSpec::NearestNeighbor { .. } => {
                if o.norm() == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            GeneratorSpec::Rates { rates, .. } => rates
                .iter()
                .find(|(k, _)| *k == o)
                .map(|(_, r)| *r)
                .unwrap_or(0.0),
        }
    }
}

/// `(Q u)(x) = Σ_y q_xy u(y)`.
pub fn apply_generator(g: &GeneratorSpec, u: &LatticeState, x: &Site) -> Result<f64> {
    let d = g.dim();
    u.check_dim(d)?;
    x.check_dim(d)?;
    let off: f64 = g.jumps().iter().map(|(o, r)| r * u.get(&x.add(o))).sum();
    Ok(off - g.qnorm() * u.get(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn site(c: &[i32]) -> Site {
        Site::new(c).unwrap()
    }

    #[test]
    fn laplacian_at_delta() {
        let g = GeneratorSpec::laplacian(2).unwrap();
        let u = LatticeState::delta(site(&[0, 0]), 1.0).unwrap();
        assert_eq!(apply_generator(&g, &u, &site(&[0, 0])).unwrap(), -4.0);
        assert_eq!(apply_generator(&g, &u, &site(&[1, 0])).unwrap(), 1.0);
        assert_eq!(apply_generator(&g, &u, &site(&[1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn harmonic_on_constant_segment() {
        let g = GeneratorSpec::laplacian(1).unwrap();
        let u = LatticeState::from_pairs(1, (-5..=5).map(|i| (site(&[i]), 2.5))).unwrap();
        for x in -4..=4 {
            assert_eq!(apply_generator(&g, &u, &site(&[x])).unwrap(), 0.0);
        }
    }

    #[test]
    fn explicit_rates_row() {
        let g = GeneratorSpec::from_rates(1, [(site(&[1]), 2.0), (site(&[-1]), 2.0)], false).unwrap();
        assert_eq!(g.qnorm(), 4.0);
        let u = LatticeState::delta(site(&[0]), 1.0).unwrap();
        assert_eq!(apply_generator(&g, &u, &site(&[0])).unwrap(), -4.0);
        assert_eq!(apply_generator(&g, &u, &site(&[1])).unwrap(), 2.0);
    }

    #[test]
    fn rejects_asymmetric_and_mismatched() {
        assert!(GeneratorSpec::from_rates(1, [(site(&[1]), 1.0)], false).is_err());
        assert!(GeneratorSpec::from_rates(1, [(site(&[0]), 1.0)], false).is_err());
        let g = GeneratorSpec::laplacian(1).unwrap();
        let u = LatticeState::delta(site(&[0, 0]), 1.0).unwrap();
        assert!(matches!(
            apply_generator(&g, &u, &site(&[0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn laplacian_entries() {
        let g = GeneratorSpec::laplacian(3).unwrap();
        assert_eq!(g.qnorm(), 6.0);
        assert_eq!(g.rate(&site(&[0, 0, 0]), &site(&[0, 1, 0])), 1.0);
        assert_eq!(g.rate(&site(&[0, 0, 0]), &site(&[0, 0, 0])), -6.0);
        assert_eq!(g.rate(&site(&[0, 0, 0]), &site(&[1, 1, 0])), 0.0);
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = LatticeState> {
        prop::collection::vec((prop::collection::vec(-4i32..=4, dim), 0.0f64..5.0), 0..12).prop_map(
            move |pairs| {
                LatticeState::from_pairs(dim, pairs.into_iter().map(|(c, v)| (Site::new(&c).unwrap(), v)))
                    .unwrap()
            },
        )
    }

    fn pairing(g: &GeneratorSpec, f: &LatticeState, h: &LatticeState) -> f64 {
        // Σ_x f(x) (Q h)(x) over the support of f
        f.iter().map(|(x, v)| v * apply_generator(g, h, x).unwrap()).sum()
    }

    fn generators(dim: usize) -> Vec<GeneratorSpec> {
        let o = |c: &[i32]| Site::new(c).unwrap();
        let mut gs = vec![GeneratorSpec::laplacian(dim).unwrap()];
        if dim == 2 {
            gs.push(
                GeneratorSpec::from_rates(
                    2,
                    [
                        (o(&[1, 1]), 0.5),
                        (o(&[-1, -1]), 0.5),
                        (o(&[0, 2]), 1.5),
                        (o(&[0, -2]), 1.5),
                    ],
                    false,
                )
                .unwrap(),
            );
        }
        gs
    }

    proptest! {
        #[test]
        fn generator_is_symmetric(f in arb_state(2), h in arb_state(2)) {
            for g in generators(2) {
                let a = pairing(&g, &f, &h);
                let b = pairing(&g, &h, &f);
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn generator_is_mass_neutral(u in arb_state(2)) {
            for g in generators(2) {
                // sum over support ∪ every site reachable by one jump
                let mut sites: Vec<Site> = u.support().copied().collect();
                for s in u.support() {
                    for (o, _) in g.jumps() {
                        sites.push(s.add(&o));
                        sites.push(s.sub(&o));
                    }
                }
                sites.sort();
                sites.dedup();
                let total: f64 = sites.iter().map(|x| apply_generator(&g, &u, x).unwrap()).sum();
                prop_assert!(total.abs() <= 1e-9 * (1.0 + u.total_mass()));
            }
        }
    }
}
