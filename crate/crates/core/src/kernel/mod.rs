//! Heat kernels of the random walk generated by `Q`, their semigroup
//! action, and Poisson exit estimates.

mod poisson;
mod series;
mod uniformize;

use std::collections::BTreeMap;

pub use poisson::{exit_prob_bound, poisson_tail, TailBound};
pub use series::{
    laplacian_sandwich, rw_kernel, rw_kernel_1d, rw_kernel_1d_with_error, series_sandwich_1d,
    LAPLACIAN_AXIS_RATE,
};
pub use uniformize::{dirichlet_kernel, uniformized_kernel, KernelTable, MAX_TABLE_CELLS};

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::lattice::{LatticeState, Site};

/// `P_t u0`. Every positive entry is kept, so the only mass lost is the
/// uniformization remainder, at most `truncation_error · total_mass(u0)`.
pub fn semigroup_apply(g: &GeneratorSpec, u0: &LatticeState, t: f64, tol: f64) -> Result<LatticeState> {
    u0.check_dim(g.dim())?;
    let table = uniformized_kernel(g, t, tol)?;
    let offsets = table.offsets();
    let mut out: BTreeMap<Site, f64> = BTreeMap::new();
    for (y, v) in u0.iter() {
        for (o, p) in &offsets {
            *out.entry(y.add(o)).or_insert(0.0) += v * p;
        }
    }
    let mut state = LatticeState::new(g.dim())?;
    for (x, v) in out {
        if v > 0.0 {
            state.insert_positive(x, v);
        }
    }
    Ok(state)
}

/// `P_t u0 (x) = Σ_y p_t(x, y) u0(y)`.
pub fn heat_flow_at(g: &GeneratorSpec, u0: &LatticeState, t: f64, x: &Site, tol: f64) -> Result<f64> {
    u0.check_dim(g.dim())?;
    x.check_dim(g.dim())?;
    if g.is_laplacian() {
        return u0
            .iter()
            .try_fold(0.0, |acc, (y, v)| Ok(acc + v * rw_kernel(t, &y.sub(x), tol)?));
    }
    let table = uniformized_kernel(g, t, tol)?;
    Ok(u0.iter().map(|(y, v)| v * table.get(x, y)).sum())
}

/// `P_t φ_{-λ} (x)` with `φ_{-λ}(y) = e^{-λ|y|}`.
pub fn weighted_heat_flow(g: &GeneratorSpec, t: f64, x: &Site, lambda: f64, tol: f64) -> Result<f64> {
    x.check_dim(g.dim())?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(
            "lambda",
            format!("must be non-negative, got {lambda}"),
        ));
    }
    let table = uniformized_kernel(g, t, tol)?;
    Ok(table
        .offsets()
        .iter()
        .map(|(o, p)| p * (-lambda * x.add(o).norm() as f64).exp())
        .sum())
}

/// `inf_{0 <= s <= t_max} p_s(0, 0)`, evaluated on a grid of 64 subintervals.
/// For the Laplacian `s ↦ p_s(0,0)` is decreasing and the grid minimum is
/// the value at `t_max`.
pub fn eps0(g: &GeneratorSpec, t_max: f64, tol: f64) -> Result<f64> {
    if !(t_max.is_finite() && t_max >= 0.0) {
        return Err(Error::param(
            "t_max",
            format!("must be non-negative, got {t_max}"),
        ));
    }
    let origin = Site::origin(g.dim())?;
    let mut best = 1.0f64;
    for i in 1..=64 {
        let s = t_max * i as f64 / 64.0;
        let p = if g.is_laplacian() {
            rw_kernel(s, &origin, tol)?
        } else {
            uniformized_kernel(g, s, tol)?.get(&origin, &origin)
        };
        best = best.min(p);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn site(c: &[i32]) -> Site {
        Site::new(c).unwrap()
    }

    #[test]
    fn semigroup_at_time_zero_is_identity() {
        let g = GeneratorSpec::laplacian(2).unwrap();
        let u = LatticeState::from_pairs(2, [(site(&[0, 1]), 0.5), (site(&[3, -1]), 2.0)]).unwrap();
        assert_eq!(semigroup_apply(&g, &u, 0.0, 1e-12).unwrap(), u);
    }

    #[test]
    fn semigroup_conserves_mass_up_to_truncation() {
        let g = GeneratorSpec::laplacian(1).unwrap();
        let u = LatticeState::from_pairs(1, [(site(&[0]), 1.0), (site(&[4]), 3.0)]).unwrap();
        let out = semigroup_apply(&g, &u, 1.5, 1e-10).unwrap();
        let lost = u.total_mass() - out.total_mass();
        assert!(lost.abs() <= 1e-10 * u.total_mass() + 1e-14);
    }

    #[test]
    fn origin_return_probability_at_half() {
        let g = GeneratorSpec::laplacian(1).unwrap();
        let u = LatticeState::delta(site(&[0]), 1.0).unwrap();
        let v = heat_flow_at(&g, &u, 0.5, &site(&[0]), 1e-12).unwrap();
        assert!((v - 0.465_759_607_593_640_4).abs() < 1e-12);
    }

    #[test]
    fn weighted_flow_dominated_by_growth_factor() {
        // P_t φ_{-λ} <= 2^d e^{2d(cosh λ - 1) t} φ_{-λ}
        let g = GeneratorSpec::laplacian(2).unwrap();
        for x in [site(&[0, 0]), site(&[3, -1]), site(&[6, 2])] {
            for lambda in [0.0, 0.5, 1.0] {
                let t = 0.8;
                let v = weighted_heat_flow(&g, t, &x, lambda, 1e-12).unwrap();
                let bound =
                    4.0 * (4.0 * (f64::cosh(lambda) - 1.0) * t).exp() * (-lambda * x.norm() as f64).exp();
                assert!(v <= bound * (1.0 + 1e-10), "{x} λ {lambda}: {v} > {bound}");
            }
        }
    }

    #[test]
    fn eps0_lower_bound() {
        for d in 1..=3 {
            let g = GeneratorSpec::laplacian(d).unwrap();
            let e = eps0(&g, 1.0, 1e-12).unwrap();
            assert!(e >= (-2.0 * d as f64).exp());
            assert!((e - rw_kernel(1.0, &Site::origin(d).unwrap(), 1e-12).unwrap()).abs() < 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn chapman_kolmogorov(s in 0.05f64..1.0, t in 0.05f64..1.0, x in -4i32..=4, y in -4i32..=4) {
            let g = GeneratorSpec::laplacian(1).unwrap();
            let ps = uniformized_kernel(&g, s, 1e-13).unwrap();
            let pt = uniformized_kernel(&g, t, 1e-13).unwrap();
            let pst = rw_kernel(s + t, &site(&[y - x]), 1e-14).unwrap();
            let composed: f64 = (-60..=60)
                .map(|z| ps.get(&site(&[x]), &site(&[z])) * pt.get(&site(&[z]), &site(&[y])))
                .sum();
            prop_assert!((composed - pst).abs() < 1e-11);
        }

        #[test]
        fn series_within_sandwich(t in 0.0f64..3.0, x in -6i32..=6, y in -6i32..=6) {
            let s = site(&[x, y]);
            let p = rw_kernel(t, &s, 1e-14).unwrap();
            let (lo, hi) = laplacian_sandwich(t, &s);
            prop_assert!(lo <= p * (1.0 + 1e-12) + 1e-300);
            prop_assert!(p <= hi * (1.0 + 1e-12));
            prop_assert_eq!(p, rw_kernel(t, &s.neg(), 1e-14).unwrap());
        }

        #[test]
        fn killed_kernel_is_dominated(t in 0.05f64..1.5, n in 1u32..4, x in -3i32..=3, y in -3i32..=3) {
            let g = GeneratorSpec::laplacian(1).unwrap();
            let r = crate::region::BoxRegion::new(n, 1).unwrap();
            let k = dirichlet_kernel(&g, &r, t, 1e-13).unwrap();
            let (a, b) = (site(&[x]), site(&[y]));
            let killed = k.get(&a, &b);
            prop_assert!(killed >= 0.0);
            prop_assert!(killed <= rw_kernel(t, &b.sub(&a), 1e-14).unwrap() + 1e-12);
            prop_assert!((killed - k.get(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn return_probability_exceeds_exponential(s in 0.0f64..2.0, d in 1usize..=3) {
            let p = rw_kernel(s, &Site::origin(d).unwrap(), 1e-14).unwrap();
            prop_assert!(p >= (-2.0 * d as f64 * s).exp() * (1.0 - 1e-12));
        }

        #[test]
        fn poisson_tail_below_simple_bound(lam in 0.01f64..20.0, h in 1u64..60) {
            let b = poisson_tail(lam, h);
            prop_assert!(b.exact_tail >= 0.0 && b.exact_tail <= 1.0);
            prop_assert!(b.exact_tail <= b.simple_bound * (1.0 + 1e-10));
        }

        #[test]
        fn exit_bound_monotone(t1 in 0.0f64..2.0, dt in 0.0f64..2.0, n in 2u32..30) {
            let a = exit_prob_bound(n, t1, 1, 2).unwrap();
            let b = exit_prob_bound(n, t1 + dt, 1, 2).unwrap();
            let c = exit_prob_bound(n + 1, t1, 1, 2).unwrap();
            prop_assert!(a <= b + 1e-15);
            prop_assert!(c <= a + 1e-15);
        }
    }
}
