//! Dense working representation of a state inside the stepping loops.

use crate::generator::GeneratorSpec;
use crate::lattice::{LatticeState, Site, MAX_DIM};

pub(crate) type Coords = [i32; MAX_DIM];

/// Jump table of a generator in the form the heat step consumes.
#[derive(Debug, Clone)]
pub(crate) struct Jumps {
    pub(crate) offsets: Vec<(Coords, f64)>,
    pub(crate) qnorm: f64,
    pub(crate) range: i32,
}

impl Jumps {
    pub(crate) fn new(g: &GeneratorSpec) -> Self {
        Jumps {
            offsets: g.jumps().iter().map(|(o, r)| (*o.raw(), *r)).collect(),
            qnorm: g.qnorm(),
            range: g.range() as i32,
        }
    }
}

/// Non-negative values on the box `lo + [0, ext)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Field {
    dim: usize,
    lo: Coords,
    ext: [usize; MAX_DIM],
    data: Vec<f64>,
}

impl Field {
    pub(crate) fn zeros(dim: usize, lo: Coords, ext: [usize; MAX_DIM]) -> Self {
        let len = ext[..dim].iter().product();
        Field {
            dim,
            lo,
            ext,
            data: vec![0.0; len],
        }
    }

    pub(crate) fn from_state(s: &LatticeState) -> Self {
        let dim = s.dim();
        let mut lo = [0; MAX_DIM];
        let mut hi = [0; MAX_DIM];
        let mut first = true;
        for x in s.support() {
            for k in 0..dim {
                let c = x.raw()[k];
                if first || c < lo[k] {
                    lo[k] = c;
                }
                if first || c > hi[k] {
                    hi[k] = c;
                }
            }
            first = false;
        }
        let mut ext = [1; MAX_DIM];
        for k in 0..dim {
            ext[k] = if first { 0 } else { (hi[k] - lo[k]) as usize + 1 };
        }
        let mut f = Field::zeros(dim, lo, ext);
        for (x, v) in s.iter() {
            let i = f.index(x.raw()).expect("inside bounding box");
            f.data[i] = v;
        }
        f
    }

    pub(crate) fn to_state(&self) -> LatticeState {
        let mut s = LatticeState::new(self.dim).expect("valid dimension");
        for (i, &v) in self.data.iter().enumerate() {
            if v > 0.0 {
                s.insert_positive(self.site(i), v);
            }
        }
        s
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[allow(clippy::needless_range_loop)]
    pub(crate) fn coords(&self, mut i: usize) -> Coords {
        let mut c = [0; MAX_DIM];
        for k in 0..self.dim {
            c[k] = self.lo[k] + (i % self.ext[k]) as i32;
            i /= self.ext[k];
        }
        c
    }

    pub(crate) fn site(&self, i: usize) -> Site {
        Site::from_array(self.coords(i), self.dim)
    }

    pub(crate) fn index(&self, c: &Coords) -> Option<usize> {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            let off = c[k] - self.lo[k];
            if off < 0 || off as usize >= self.ext[k] {
                return None;
            }
            idx = idx * self.ext[k] + off as usize;
        }
        Some(idx)
    }

    pub(crate) fn get(&self, c: &Coords) -> f64 {
        self.index(c).map_or(0.0, |i| self.data[i])
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub(crate) fn mass(&self) -> f64 {
        self.data.iter().sum()
    }

    pub(crate) fn support_size(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.0).count()
    }

    pub(crate) fn power_sum(&self, p: f64) -> f64 {
        self.data.iter().filter(|v| **v > 0.0).map(|v| v.powf(p)).sum()
    }

    /// Bounding box of the support, as `(lo, ext)`; `None` for the zero field.
    fn support_box(&self) -> Option<(Coords, [usize; MAX_DIM])> {
        let mut lo = [i32::MAX; MAX_DIM];
        let mut hi = [i32::MIN; MAX_DIM];
        let mut any = false;
        for (i, &v) in self.data.iter().enumerate() {
            if v > 0.0 {
                any = true;
                let c = self.coords(i);
                for k in 0..self.dim {
                    lo[k] = lo[k].min(c[k]);
                    hi[k] = hi[k].max(c[k]);
                }
            }
        }
        any.then(|| {
            let mut ext = [1; MAX_DIM];
            for k in 0..self.dim {
                ext[k] = (hi[k] - lo[k]) as usize + 1;
            }
            lo[self.dim..].fill(0);
            (lo, ext)
        })
    }

    #[allow(clippy::needless_range_loop)]
    fn strides(&self) -> [isize; MAX_DIM] {
        let mut s = [0isize; MAX_DIM];
        let mut acc = 1isize;
        for k in 0..self.dim {
            s[k] = acc;
            acc *= self.ext[k] as isize;
        }
        s
    }

    /// Explicit Euler step of `du = Qu dt`, evaluated on the support plus
    /// one jump range. Requires `dt·qnorm <= 1` so the result stays
    /// non-negative.
    pub(crate) fn heat(&self, jumps: &Jumps, dt: f64) -> Field {
        let Some((lo, ext)) = self.support_box() else {
            return Field::zeros(self.dim, [0; MAX_DIM], [0; MAX_DIM]);
        };
        let r = jumps.range;
        let mut new_lo = lo;
        let mut new_ext = ext;
        for k in 0..self.dim {
            new_lo[k] -= r;
            new_ext[k] += 2 * r as usize;
        }
        let mut out = Field::zeros(self.dim, new_lo, new_ext);
        let strides = out.strides();
        let shifts: Vec<(isize, f64)> = jumps
            .offsets
            .iter()
            .map(|(o, rate)| {
                let s = (0..self.dim).map(|k| o[k] as isize * strides[k]).sum();
                (s, dt * rate)
            })
            .collect();
        let stay = 1.0 - dt * jumps.qnorm;
        for (i, &v) in self.data.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let j = out.index(&self.coords(i)).expect("inside padded box") as isize;
            out.data[j as usize] += stay * v;
            for &(s, w) in &shifts {
                out.data[(j + s) as usize] += w * v;
            }
        }
        out
    }

    /// Zeroes every site rejected by `keep`; returns the removed mass.
    pub(crate) fn retain(&mut self, keep: impl Fn(&Coords) -> bool) -> f64 {
        let mut removed = 0.0;
        for i in 0..self.data.len() {
            if self.data[i] > 0.0 && !keep(&self.coords(i)) {
                removed += self.data[i];
                self.data[i] = 0.0;
            }
        }
        removed
    }

    /// Clamps negative entries to zero.
    pub(crate) fn clamp(&mut self) {
        for v in &mut self.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(c: &[i32]) -> Site {
        Site::new(c).unwrap()
    }

    #[test]
    fn round_trip_through_lattice_state() {
        let s = LatticeState::from_pairs(2, [(site(&[1, -3]), 0.5), (site(&[-2, 4]), 1.5)]).unwrap();
        let f = Field::from_state(&s);
        assert_eq!(f.to_state(), s);
        assert_eq!(f.support_size(), 2);
        assert_eq!(f.get(&[1, -3, 0, 0]), 0.5);
        assert_eq!(f.get(&[9, 9, 0, 0]), 0.0);
        let z = Field::from_state(&LatticeState::new(3).unwrap());
        assert!(z.is_zero() && z.values().is_empty());
        assert!(z
            .heat(&Jumps::new(&GeneratorSpec::laplacian(3).unwrap()), 0.01)
            .is_zero());
    }

    #[test]
    fn heat_step_matches_generator() {
        let g = GeneratorSpec::laplacian(1).unwrap();
        let s = LatticeState::delta(site(&[0]), 1.0).unwrap();
        let out = Field::from_state(&s).heat(&Jumps::new(&g), 0.01).to_state();
        assert!((out.get(&site(&[0])) - 0.98).abs() < 1e-15);
        assert_eq!(out.get(&site(&[1])), 0.01);
        assert_eq!(out.get(&site(&[-1])), 0.01);
        assert_eq!(out.support_size(), 3);
    }

    #[test]
    fn heat_step_with_long_jumps_conserves_mass() {
        let g = GeneratorSpec::from_rates(
            2,
            [
                (site(&[2, 0]), 0.3),
                (site(&[-2, 0]), 0.3),
                (site(&[1, 1]), 0.2),
                (site(&[-1, -1]), 0.2),
            ],
            false,
        )
        .unwrap();
        let s = LatticeState::from_pairs(2, [(site(&[0, 0]), 1.0), (site(&[3, 1]), 2.0)]).unwrap();
        let out = Field::from_state(&s).heat(&Jumps::new(&g), 0.05);
        assert!((out.mass() - 3.0).abs() < 1e-14);
        assert!((out.get(&[5, 1, 0, 0]) - 0.05 * 0.3 * 2.0).abs() < 1e-15);
    }
}
