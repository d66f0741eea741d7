use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{neighbors, Site, MAX_DIM};

/// The box `D_N = {x : |x_i| <= N for all i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoxRegion {
    radius: u32,
    dim: usize,
}

#[derive(Deserialize)]
struct RawBox {
    radius: u32,
    dim: usize,
}

impl TryFrom<RawBox> for BoxRegion {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoxRegion::new(raw.radius, raw.dim)
    }
}

impl BoxRegion {
    pub fn new(radius: u32, dim: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::param("radius", "box radius must be positive"));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(BoxRegion { radius, dim })
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn contains(&self, x: &Site) -> bool {
        x.dim() == self.dim && x.sup_norm() <= self.radius
    }

    /// `(2N+1)^d`.
    pub fn len(&self) -> usize {
        (2 * self.radius as usize + 1).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `(3N)^d` capacity bound.
    pub fn capacity_bound(&self) -> f64 {
        (3.0 * self.radius as f64).powi(self.dim as i32)
    }

    /// All sites of the box in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let n = self.radius as i32;
        let mut out = Vec::with_capacity(self.len());
        let mut c = [0i32; MAX_DIM];
        for v in c.iter_mut().take(self.dim) {
            *v = -n;
        }
        loop {
            out.push(Site::from_array(c, self.dim));
            let mut i = self.dim;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if c[i] < n {
                    c[i] += 1;
                    break;
                }
                c[i] = -n;
            }
        }
    }

    /// Position of `x` in [`BoxRegion::sites`] order.
    pub fn index_of(&self, x: &Site) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let side = 2 * self.radius as usize + 1;
        let mut idx = 0usize;
        for &c in x.coords() {
            idx = idx * side + (c + self.radius as i32) as usize;
        }
        Some(idx)
    }

    /// `∂D_N`: sites outside the box with a nearest neighbour inside it.
    pub fn boundary(&self) -> Vec<Site> {
        let mut out: Vec<Site> = self
            .sites()
            .iter()
            .flat_map(neighbors)
            .filter(|y| !self.contains(y))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// `∂⁻D_N`: sites inside the box with a neighbour outside it.
    pub fn inner_boundary(&self) -> Vec<Site> {
        self.sites()
            .into_iter()
            .filter(|x| x.sup_norm() == self.radius)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_capacity() {
        for d in 1..=3 {
            for n in 1..=4 {
                let b = BoxRegion::new(n, d).unwrap();
                assert_eq!(b.sites().len(), b.len());
                assert_eq!(b.len(), (2 * n as usize + 1).pow(d as u32));
                assert!(b.len() as f64 <= b.capacity_bound());
            }
        }
    }

    #[test]
    fn index_matches_enumeration() {
        let b = BoxRegion::new(2, 2).unwrap();
        for (i, s) in b.sites().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(&Site::new(&[3, 0]).unwrap()), None);
    }

    #[test]
    fn boundary_sites_are_outside_and_adjacent() {
        let b = BoxRegion::new(2, 2).unwrap();
        let boundary = b.boundary();
        // 4 faces of 5 sites each; corners of the outer ring are not adjacent.
        assert_eq!(boundary.len(), 20);
        for y in &boundary {
            assert!(!b.contains(y));
            assert!(neighbors(y).iter().any(|z| b.contains(z)));
        }
        let b1 = BoxRegion::new(1, 1).unwrap();
        assert_eq!(
            b1.boundary(),
            vec![Site::new(&[-2]).unwrap(), Site::new(&[2]).unwrap()]
        );
    }

    #[test]
    fn zero_radius_rejected() {
        assert!(BoxRegion::new(0, 1).is_err());
    }
}
