//! Lattice sites and finitely supported non-negative states on Z^d.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest lattice dimension supported by the fixed-size [`Site`] layout.
pub const MAX_DIM: usize = 4;

/// Exponent above which `weighted_mass` switches to log-space accumulation.
const LOG_SPACE_THRESHOLD: f64 = 500.0;

/// A point of Z^d. Coordinates beyond `dim` are always zero, so the derived
/// ordering is lexicographic in the active coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl Site {
    pub fn new(coords: &[i32]) -> Result<Self> {
        let dim = coords.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut c = [0; MAX_DIM];
        c[..dim].copy_from_slice(coords);
        Ok(Site {
            coords: c,
            dim: dim as u8,
        })
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Site::new(&vec![0; dim])
    }

    /// Site on the first axis, `(x, 0, ..., 0)`.
    pub fn on_axis(dim: usize, x: i32) -> Result<Self> {
        let mut c = vec![0; dim];
        if dim > 0 {
            c[0] = x;
        }
        Site::new(&c)
    }

    pub(crate) fn from_array(coords: [i32; MAX_DIM], dim: usize) -> Self {
        debug_assert!(coords[dim..].iter().all(|&c| c == 0));
        Site {
            coords,
            dim: dim as u8,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub(crate) fn raw(&self) -> &[i32; MAX_DIM] {
        &self.coords
    }

    /// ℓ¹ norm `|x| = Σ|x_i|`.
    pub fn norm(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    /// Sup norm, used for box membership.
    pub fn sup_norm(&self) -> u32 {
        self.coords().iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Site) -> Site {
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(other.coords.iter()) {
            *a += b;
        }
        Site {
            coords: c,
            dim: self.dim,
        }
    }

    pub fn sub(&self, other: &Site) -> Site {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Site {
        let mut c = self.coords;
        for a in c.iter_mut() {
            *a = -*a;
        }
        Site {
            coords: c,
            dim: self.dim,
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Site {
    /// Coordinates joined by `:`, e.g. `1:-2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl Serialize for Site {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.dim()))?;
        for c in self.coords() {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        Site::new(&v).map_err(de::Error::custom)
    }
}

/// The 2d nearest neighbours of `x`.
pub fn neighbors(x: &Site) -> Vec<Site> {
    let d = x.dim();
    let mut out = Vec::with_capacity(2 * d);
    for i in 0..d {
        for step in [-1, 1] {
            let mut c = *x.raw();
            c[i] += step;
            out.push(Site::from_array(c, d));
        }
    }
    out
}

/// Finitely supported non-negative function on Z^d. Only strictly positive
/// values are stored.
#[derive(Clone, PartialEq, Default)]
pub struct LatticeState {
    dim: usize,
    values: BTreeMap<Site, f64>,
}

impl LatticeState {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(LatticeState {
            dim,
            values: BTreeMap::new(),
        })
    }

    /// Single site carrying `mass`.
    pub fn delta(site: Site, mass: f64) -> Result<Self> {
        let mut s = LatticeState::new(site.dim())?;
        s.set(site, mass)?;
        Ok(s)
    }

    /// `c·e^{-λ|x|}` on the ℓ¹ ball `|x| <= radius`; entries that underflow
    /// to zero are left out.
    pub fn exponential(dim: usize, c: f64, lambda: f64, radius: u32) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::param("c", format!("must be non-negative, got {c}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::param(
                "lambda",
                format!("must be non-negative, got {lambda}"),
            ));
        }
        let mut s = LatticeState::new(dim)?;
        if c == 0.0 {
            return Ok(s);
        }
        let r = radius as i32;
        let mut coords = [0; MAX_DIM];
        coords[..dim].fill(-r);
        loop {
            let x = Site::from_array(coords, dim);
            let n = x.norm();
            if n <= radius as u64 {
                let v = c * (-lambda * n as f64).exp();
                if v > 0.0 {
                    s.values.insert(x, v);
                }
            }
            let mut k = 0;
            while k < dim {
                if coords[k] < r {
                    coords[k] += 1;
                    break;
                }
                coords[k] = -r;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
        Ok(s)
    }

    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Site, f64)>,
    {
        let mut s = LatticeState::new(dim)?;
        for (site, v) in pairs {
            let cur = s.get(&site);
            s.set(site, cur + v)?;
        }
        Ok(s)
    }

    /// Sets `u(site) = value`; zero evicts the site.
    pub fn set(&mut self, site: Site, value: f64) -> Result<()> {
        site.check_dim(self.dim)?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::param(
                "value",
                format!("state values must be finite and non-negative, got {value} at {site}"),
            ));
        }
        if value == 0.0 {
            self.values.remove(&site);
        } else {
            self.values.insert(site, value);
        }
        Ok(())
    }

    pub(crate) fn insert_positive(&mut self, site: Site, value: f64) {
        debug_assert!(value > 0.0 && value.is_finite());
        self.values.insert(site, value);
    }

    #[inline]
    pub fn get(&self, site: &Site) -> f64 {
        self.values.get(site).copied().unwrap_or(0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.values.len()
    }

    /// Sites and values in lexicographic order of coordinates.
    pub fn iter(&self) -> impl Iterator<Item = (&Site, f64)> + '_ {
        self.values.iter().map(|(s, v)| (s, *v))
    }

    pub fn support(&self) -> impl Iterator<Item = &Site> + '_ {
        self.values.keys()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        LatticeState::from_pairs(self.dim, self.iter().map(|(s, v)| (*s, v * factor)))
    }

    pub fn total_mass(&self) -> f64 {
        self.values.values().sum()
    }

    /// `Σ_x e^{λ|x|} u(x)`. Large exponents are accumulated in log space;
    /// a result outside the f64 range is an error rather than infinity.
    pub fn weighted_mass(&self, lambda: f64) -> Result<f64> {
        if self.values.is_empty() {
            return Ok(0.0);
        }
        let largest_arg = self
            .support()
            .map(|s| lambda * s.norm() as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        if largest_arg <= LOG_SPACE_THRESHOLD {
            return Ok(self
                .iter()
                .map(|(s, v)| (lambda * s.norm() as f64).exp() * v)
                .sum());
        }
        let exps: Vec<f64> = self
            .iter()
            .map(|(s, v)| lambda * s.norm() as f64 + v.ln())
            .collect();
        let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: f64 = exps.iter().map(|e| (e - max).exp()).sum();
        let log_total = max + scaled.ln();
        let total = log_total.exp();
        if !total.is_finite() {
            return Err(Error::Overflow(format!(
                "weighted mass with lambda = {lambda} has log value {log_total:.3}"
            )));
        }
        Ok(total)
    }

    /// `Σ_x u(x)^p`.
    pub fn power_sum(&self, p: f64) -> f64 {
        self.values.values().map(|v| v.powf(p)).sum()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for LatticeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.values.iter()).finish()
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    dim: usize,
    sites: Vec<(Site, f64)>,
}

impl Serialize for LatticeState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateRepr {
            dim: self.dim,
            sites: self.iter().map(|(k, v)| (*k, v)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = StateRepr::deserialize(d)?;
        LatticeState::from_pairs(repr.dim, repr.sites).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn site(c: &[i32]) -> Site {
        Site::new(c).unwrap()
    }

    #[test]
    fn exponential_envelope() {
        let s = LatticeState::exponential(2, 0.5, 1.0, 3).unwrap();
        assert_eq!(s.support_size(), 25);
        assert_eq!(s.get(&Site::new(&[0, 0]).unwrap()), 0.5);
        assert_eq!(s.get(&Site::new(&[2, -1]).unwrap()), 0.5 * (-3f64).exp());
        assert_eq!(s.get(&Site::new(&[2, -2]).unwrap()), 0.0);
        assert!(LatticeState::exponential(1, 0.0, 1.0, 3).unwrap().is_zero());
    }

    #[test]
    fn neighbor_counts() {
        let n1 = neighbors(&site(&[0]));
        assert_eq!(n1, vec![site(&[-1]), site(&[1])]);
        let n2 = neighbors(&site(&[0, 0]));
        assert_eq!(n2.len(), 4);
        for s in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            assert!(n2.contains(&site(&s)));
        }
        assert_eq!(neighbors(&site(&[3, -7, 2])).len(), 6);
        for n in neighbors(&site(&[3, -7, 2])) {
            assert_eq!(n.sub(&site(&[3, -7, 2])).norm(), 1);
        }
    }

    #[test]
    fn norm_is_l1() {
        assert_eq!(site(&[3, -4]).norm(), 7);
        assert_eq!(site(&[3, -4]).sup_norm(), 4);
    }

    #[test]
    fn rejects_bad_dimensions_and_values() {
        assert!(Site::new(&[]).is_err());
        assert!(Site::new(&[0; 5]).is_err());
        let mut s = LatticeState::new(1).unwrap();
        assert!(s.set(site(&[0]), -1.0).is_err());
        assert!(s.set(site(&[0]), f64::NAN).is_err());
        assert!(s.set(site(&[0, 0]), 1.0).is_err());
    }

    #[test]
    fn zeros_are_evicted() {
        let mut s = LatticeState::delta(site(&[2]), 1.5).unwrap();
        assert_eq!(s.support_size(), 1);
        s.set(site(&[2]), 0.0).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn total_mass_examples() {
        assert_eq!(LatticeState::new(1).unwrap().total_mass(), 0.0);
        assert_eq!(LatticeState::delta(site(&[0]), 3.5).unwrap().total_mass(), 3.5);
        let s = LatticeState::from_pairs(1, [(site(&[0]), 1.0), (site(&[4]), 2.0)]).unwrap();
        assert_eq!(s.total_mass(), 3.0);
    }

    #[test]
    fn weighted_mass_examples() {
        let s = LatticeState::from_pairs(2, [(site(&[1, 1]), 1.0), (site(&[0, -3]), 2.0)]).unwrap();
        assert_eq!(s.weighted_mass(0.0).unwrap(), s.total_mass());
        let d = LatticeState::delta(site(&[2, 0]), 1.0).unwrap();
        assert!((d.weighted_mass(-1.0).unwrap() - 0.1353352832366127).abs() < 1e-15);
        let o = LatticeState::delta(site(&[0, 0]), 0.7).unwrap();
        assert_eq!(o.weighted_mass(123.0).unwrap(), 0.7);
    }

    #[test]
    fn weighted_mass_log_space_and_overflow() {
        let far = LatticeState::delta(site(&[600]), 1e-200).unwrap();
        // e^{600} * 1e-200 = e^{600 - 460.517} ≈ e^{139.48}
        let expected = (600.0 - 200.0 * std::f64::consts::LN_10).exp();
        let got = far.weighted_mass(1.0).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-12);
        let huge = LatticeState::delta(site(&[800]), 1.0).unwrap();
        assert!(matches!(huge.weighted_mass(1.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn power_sum_examples() {
        let s = LatticeState::from_pairs(1, [(site(&[0]), 1.0), (site(&[1]), 3.0)]).unwrap();
        let v = s.power_sum(1.5);
        assert!((v - 6.196152422706632).abs() < 1e-12);
        let floor = 2f64.powf(-0.5) * 4f64.powf(1.5);
        assert!((floor - 5.656854249492381).abs() < 1e-12);
        assert!(floor <= v);
        let e = LatticeState::from_pairs(1, [(site(&[0]), 1.0), (site(&[1]), 1.0)]).unwrap();
        assert_eq!(e.power_sum(2.0), 2.0);
        assert_eq!(e.power_sum(2.0), 2f64.powf(-1.0) * 2f64.powi(2));
        assert_eq!(s.power_sum(1.0), s.total_mass());
    }

    #[test]
    fn serializes_sorted_pairs() {
        let s = LatticeState::from_pairs(2, [(site(&[1, 0]), 2.0), (site(&[-1, 5]), 1.0)]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"dim":2,"sites":[[[-1,5],1.0],[[1,0],2.0]]}"#);
        let back: LatticeState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn jensen_floor(values in prop::collection::vec(1e-6f64..10.0, 1..20), p in 1.0f64..2.0) {
            let s = LatticeState::from_pairs(
                1,
                values.iter().enumerate().map(|(i, v)| (site(&[i as i32]), *v)),
            ).unwrap();
            let m = s.support_size() as f64;
            let floor = m.powf(1.0 - p) * s.total_mass().powf(p);
            prop_assert!(s.power_sum(p) >= floor * (1.0 - 1e-12));
        }

        #[test]
        fn superadditivity(a in 0.0f64..100.0, b in 0.0f64..100.0, gamma in 0.5001f64..1.0) {
            let lhs = (a + b).powf(2.0 * gamma);
            let rhs = a.powf(2.0 * gamma) + b.powf(2.0 * gamma);
            prop_assert!(lhs >= rhs * (1.0 - 1e-12));
        }
    }
}
