use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::kernel::heat_flow_at;
use crate::lattice::{LatticeState, Site};

/// Verdict of an analytic condition together with the values it rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub inputs: BTreeMap<String, f64>,
    pub verdict: bool,
    pub witness: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sequences: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ConditionReport {
    fn new(name: &str) -> Self {
        ConditionReport {
            name: name.to_string(),
            inputs: BTreeMap::new(),
            verdict: false,
            witness: BTreeMap::new(),
            sequences: BTreeMap::new(),
            note: String::new(),
        }
    }

    fn input(mut self, k: &str, v: f64) -> Self {
        self.inputs.insert(k.to_string(), v);
        self
    }

    fn witness(&mut self, k: &str, v: f64) {
        self.witness.insert(k.to_string(), v);
    }
}

/// `(support size, clump ratio)` with clump ratio `(Σu^{2γ})^{1/2} / (Σu)^γ`.
pub fn occupancy_stats(u: &LatticeState, gamma: f64) -> Result<(usize, f64)> {
    let mass = u.total_mass();
    if mass == 0.0 {
        return Err(Error::Precondition("clump ratio of the zero state".into()));
    }
    Ok((
        u.support_size(),
        u.power_sum(2.0 * gamma).sqrt() / mass.powf(gamma),
    ))
}

/// Lower bound `M^{-(2γ-1)/2}` of the clump ratio of a state with `M` occupied sites.
pub fn clump_floor(support_size: usize, gamma: f64) -> f64 {
    (support_size as f64).powf(-(2.0 * gamma - 1.0) / 2.0)
}

/// Finite-probe proxy for `liminf U_0P_t/V_0P_t = liminf V_0P_t/U_0P_t = 0`:
/// both ratios are evaluated at each probe and at its reflection through
/// the origin, and the verdict is that both minima fall below `threshold`.
/// This is evidence, not a proof, of the liminf condition.
pub fn check_thm12_condition(
    u0: &LatticeState,
    v0: &LatticeState,
    g: &GeneratorSpec,
    t: f64,
    probes: &[Site],
    threshold: f64,
) -> Result<ConditionReport> {
    const TOL: f64 = 1e-14;
    if probes.is_empty() {
        return Err(Error::param("probes", "need at least one probe site"));
    }
    let mut norms = Vec::new();
    let mut uv = Vec::new();
    let mut vu = Vec::new();
    for p in probes {
        for x in [*p, p.neg()] {
            let a = heat_flow_at(g, u0, t, &x, TOL)?;
            let b = heat_flow_at(g, v0, t, &x, TOL)?;
            if a == 0.0 || b == 0.0 {
                return Err(Error::Precondition(format!(
                    "heat flow vanishes at probe {x}; ratios undefined"
                )));
            }
            norms.push(x.coords()[0] as f64);
            uv.push(a / b);
            vu.push(b / a);
        }
    }
    let min_at = |r: &[f64]| {
        let (i, m) = r
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        (i, *m)
    };
    let (iu, mu) = min_at(&uv);
    let (iv, mv) = min_at(&vu);
    let mut rep = ConditionReport::new("liminf_ratio_proxy")
        .input("t", t)
        .input("threshold", threshold);
    rep.witness("min_u_over_v", mu);
    rep.witness("min_u_over_v_at_x1", norms[iu]);
    rep.witness("min_v_over_u", mv);
    rep.witness("min_v_over_u_at_x1", norms[iv]);
    rep.sequences.insert("x1".into(), norms);
    rep.sequences.insert("u_over_v".into(), uv);
    rep.sequences.insert("v_over_u".into(), vu);
    rep.verdict = mu < threshold && mv < threshold;
    rep.note = "finite-probe proxy for the liminf condition".into();
    Ok(rep)
}

/// Half-space separation: there are `m > n` with `U_0` vanishing on
/// `{x_k >= m}` but not `V_0`, and `V_0` vanishing on `{x_k <= n}` but not
/// `U_0` (or the same with `U_0`, `V_0` exchanged), for some axis `k`. For
/// finitely supported data along axis `k` this holds iff
/// `min U < min V` and `max U < max V`, witnessed by `n = min U`,
/// `m = max U + 1`.
pub fn check_half_space_separation(u0: &LatticeState, v0: &LatticeState) -> Result<ConditionReport> {
    if u0.dim() != v0.dim() {
        return Err(Error::DimensionMismatch {
            expected: u0.dim(),
            found: v0.dim(),
        });
    }
    let mut rep = ConditionReport::new("half_space_separation");
    let range = |s: &LatticeState, k: usize| {
        s.support()
            .map(|x| x.coords()[k] as f64)
            .fold(None, |r: Option<(f64, f64)>, v| {
                Some(r.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))))
            })
    };
    for k in 0..u0.dim() {
        let (Some((umin, umax)), Some((vmin, vmax))) = (range(u0, k), range(v0, k)) else {
            break;
        };
        for (swapped, (amin, amax, bmin, bmax)) in [
            (false, (umin, umax, vmin, vmax)),
            (true, (vmin, vmax, umin, umax)),
        ] {
            if amin < bmin && amax < bmax {
                rep.verdict = true;
                rep.witness("axis", k as f64);
                rep.witness("swapped", if swapped { 1.0 } else { 0.0 });
                rep.witness("n", amin);
                rep.witness("m", amax + 1.0);
                return Ok(rep);
            }
        }
    }
    Ok(rep)
}

/// `λ0 > 4λ1 - 3λ2`, with the window `2λ1 - (λ0+λ2)/2 < β < λ2` and, at
/// its midpoint, `2λ1 - β < α < (λ0+λ1)/2`.
pub fn thm13_params(lambda0: f64, lambda1: f64, lambda2: f64) -> Result<ConditionReport> {
    if !(lambda2 > 0.0 && lambda1 >= lambda2 && lambda0 > 0.0) || !lambda1.is_finite() || !lambda0.is_finite()
    {
        return Err(Error::param(
            "lambda",
            format!("need lambda0 > 0 and lambda1 >= lambda2 > 0, got ({lambda0}, {lambda1}, {lambda2})"),
        ));
    }
    let mut rep = ConditionReport::new("exponential_rates")
        .input("lambda0", lambda0)
        .input("lambda1", lambda1)
        .input("lambda2", lambda2);
    rep.verdict = lambda0 > 4.0 * lambda1 - 3.0 * lambda2;
    rep.witness("margin", lambda0 - (4.0 * lambda1 - 3.0 * lambda2));
    if rep.verdict {
        let b_lo = 2.0 * lambda1 - 0.5 * (lambda0 + lambda2);
        let b_hi = lambda2;
        let beta = 0.5 * (b_lo + b_hi);
        rep.witness("beta_lo", b_lo);
        rep.witness("beta_hi", b_hi);
        rep.witness("beta", beta);
        rep.witness("alpha_lo", 2.0 * lambda1 - beta);
        rep.witness("alpha_hi", 0.5 * (lambda0 + lambda1));
    }
    Ok(rep)
}

/// `Σ g^{2-2γ} f <= K^{2-2γ} M^{2γ-1}` with `M = Σ f`, `K = Σ g f`.
pub fn holder_bound_check(f: &[f64], g: &[f64], gamma: f64) -> Result<ConditionReport> {
    if f.len() != g.len() {
        return Err(Error::param("g", "f and g must have the same length"));
    }
    if f.iter().chain(g).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("f", "values must be finite and non-negative"));
    }
    if !(0.5..=1.0).contains(&gamma) {
        return Err(Error::param(
            "gamma",
            format!("must lie in [1/2, 1], got {gamma}"),
        ));
    }
    let e = 2.0 - 2.0 * gamma;
    let lhs: f64 = f
        .iter()
        .zip(g)
        .map(|(f, g)| if *f == 0.0 { 0.0 } else { g.powf(e) * f })
        .sum();
    let m: f64 = f.iter().sum();
    let k: f64 = f.iter().zip(g).map(|(f, g)| f * g).sum();
    let rhs = k.powf(e) * m.powf(2.0 * gamma - 1.0);
    let mut rep = ConditionReport::new("holder").input("gamma", gamma);
    rep.witness("lhs", lhs);
    rep.witness("rhs", rhs);
    rep.witness("M", m);
    rep.witness("K", k);
    rep.verdict = lhs <= rhs * (1.0 + 1e-12) + 1e-300;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn site(c: &[i32]) -> Site {
        Site::new(c).unwrap()
    }

    fn delta(c: &[i32], m: f64) -> LatticeState {
        LatticeState::delta(site(c), m).unwrap()
    }

    #[test]
    fn clump_ratio_examples() {
        assert_eq!(occupancy_stats(&delta(&[3], 2.5), 0.75).unwrap(), (1, 1.0));
        let two = LatticeState::from_pairs(1, [(site(&[0]), 0.3), (site(&[1]), 0.3)]).unwrap();
        let (m, r) = occupancy_stats(&two, 0.75).unwrap();
        assert_eq!(m, 2);
        assert!((r - 0.840_896_415_253_714_5).abs() < 1e-15);
        assert!((clump_floor(2, 0.75) - r).abs() < 1e-15);
        assert!(occupancy_stats(&LatticeState::new(1).unwrap(), 0.75).is_err());
    }

    #[test]
    fn separated_deltas_satisfy_ratio_condition() {
        let g = GeneratorSpec::laplacian(1).unwrap();
        let probes: Vec<Site> = (6..=12).map(|x| site(&[x])).collect();
        let u = delta(&[-5], 1.0);
        let v = delta(&[5], 1.0);
        let r = check_thm12_condition(&u, &v, &g, 1.0, &probes, 0.05).unwrap();
        assert!(r.verdict);
        let uv = &r.sequences["u_over_v"];
        // Along +x the ratio U/V decays, along -x V/U does.
        let plus: Vec<f64> = uv.iter().step_by(2).copied().collect();
        assert!(plus.windows(2).all(|w| w[1] < w[0]));
        assert!(check_half_space_separation(&u, &v).unwrap().verdict);
    }

    #[test]
    fn symmetric_and_scaled_data_fail_ratio_condition() {
        let g = GeneratorSpec::laplacian(1).unwrap();
        let probes: Vec<Site> = (6..=12).map(|x| site(&[x])).collect();
        let u = delta(&[0], 1.0);
        let r = check_thm12_condition(&u, &u, &g, 1.0, &probes, 0.05).unwrap();
        assert!(!r.verdict);
        assert!(r.sequences["u_over_v"].iter().all(|x| (x - 1.0).abs() < 1e-12));
        let r = check_thm12_condition(&u.scaled(2.0).unwrap(), &u, &g, 1.0, &probes, 0.05).unwrap();
        assert!(!r.verdict);
        assert!(r.sequences["u_over_v"].iter().all(|x| (x - 2.0).abs() < 1e-12));
        assert!(r.sequences["v_over_u"].iter().all(|x| (x - 0.5).abs() < 1e-12));
        assert!(!check_half_space_separation(&u, &u).unwrap().verdict);
    }

    #[test]
    fn half_space_separation_cases() {
        let u = LatticeState::from_pairs(2, [(site(&[-3, 0]), 1.0), (site(&[0, 4]), 1.0)]).unwrap();
        let v = LatticeState::from_pairs(2, [(site(&[-2, 9]), 1.0), (site(&[1, -7]), 1.0)]).unwrap();
        let r = check_half_space_separation(&u, &v).unwrap();
        assert!(r.verdict);
        assert_eq!((r.witness["n"], r.witness["m"]), (-3.0, 1.0));
        // V to the left of U works by symmetry.
        let r = check_half_space_separation(&v, &u).unwrap();
        assert!(r.verdict && r.witness["swapped"] == 1.0);
        // Interleaved supports along every axis.
        let w = LatticeState::from_pairs(1, [(site(&[-1]), 1.0), (site(&[3]), 1.0)]).unwrap();
        let z = LatticeState::from_pairs(1, [(site(&[0]), 1.0), (site(&[2]), 1.0)]).unwrap();
        assert!(!check_half_space_separation(&w, &z).unwrap().verdict);
        assert!(
            !check_half_space_separation(&LatticeState::new(1).unwrap(), &z)
                .unwrap()
                .verdict
        );
    }

    #[test]
    fn rate_windows() {
        let r = thm13_params(2.0, 1.0, 1.0).unwrap();
        assert!(r.verdict);
        assert_eq!((r.witness["beta_lo"], r.witness["beta_hi"]), (0.5, 1.0));
        assert_eq!(r.witness["beta"], 0.75);
        assert_eq!((r.witness["alpha_lo"], r.witness["alpha_hi"]), (1.25, 1.5));
        assert!(!thm13_params(1.0, 1.0, 1.0).unwrap().verdict);
        assert!(thm13_params(6.0, 2.0, 1.0).unwrap().verdict);
        assert!(thm13_params(6.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn holder_examples() {
        let f = [0.3, 1.7, 2.0];
        let r = holder_bound_check(&f, &[1.0; 3], 0.7).unwrap();
        assert!(r.verdict);
        assert!((r.witness["lhs"] - r.witness["rhs"]).abs() < 1e-12);
        let r = holder_bound_check(&[1.0, 1.0], &[2.0, 0.0], 0.75).unwrap();
        assert!((r.witness["lhs"] - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.witness["rhs"] - 2.0).abs() < 1e-15);
        assert!(r.verdict);
    }

    proptest! {
        #[test]
        fn windows_are_consistent(l0 in 0.01f64..10.0, l2 in 0.01f64..5.0, gap in 0.0f64..3.0) {
            let l1 = l2 + gap;
            let r = thm13_params(l0, l1, l2).unwrap();
            if r.verdict {
                let (blo, bhi) = (r.witness["beta_lo"], r.witness["beta_hi"]);
                let (alo, ahi) = (r.witness["alpha_lo"], r.witness["alpha_hi"]);
                prop_assert!(blo < bhi && alo < ahi);
                let beta = r.witness["beta"];
                prop_assert!(2.0 * l1 - (l0 + l2) / 2.0 < beta && beta < l2);
            } else {
                prop_assert!(2.0 * l1 - (l0 + l2) / 2.0 >= l2);
                prop_assert!(!r.witness.contains_key("beta"));
            }
        }

        #[test]
        fn holder_holds(v in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..20), gamma in 0.5f64..1.0) {
            let (f, g): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            prop_assert!(holder_bound_check(&f, &g, gamma).unwrap().verdict);
        }

        #[test]
        fn clump_ratio_bounds(vals in prop::collection::vec(1e-6f64..10.0, 1..30), gamma in 0.5f64..1.0) {
            let s = LatticeState::from_pairs(1, vals.iter().enumerate().map(|(i, v)| (Site::new(&[i as i32]).unwrap(), *v))).unwrap();
            let (m, r) = occupancy_stats(&s, gamma).unwrap();
            prop_assert!(r <= 1.0 + 1e-12);
            prop_assert!(r >= clump_floor(m, gamma) * (1.0 - 1e-12));
        }
    }
}
