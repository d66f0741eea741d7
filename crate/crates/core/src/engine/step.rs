//! One time step of each system.
//!
//! The default [`Scheme::Splitting`] first applies the noise exactly: over a
//! step the diffusion part `du(x) = u(x)^γ dB_x` decouples across sites
//! and is sampled from its transition law (see [`super::cev`]). The heat
//! part `du = Qu dt` is then advanced by an explicit Euler step. Zero is
//! reached with positive probability in the noise substep, so extinction
//! is an exact event of the discrete chain.
//!
//! [`Scheme::EulerClamped`] is the plain Euler–Maruyama update
//! `max(0, u + Qu·dt + u^γ·√dt·ξ)` with all coefficients frozen at the
//! pre-step state.

use serde::{Deserialize, Serialize};

use super::cev::{cev_transition, cev_transition_monotone};
use super::field::{Field, Jumps};
use crate::noise::{Channel, NoiseSource, StreamKey};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact noise transition followed by an Euler heat step.
    #[default]
    Splitting,
    /// Euler–Maruyama with projection onto `[0, ∞)`.
    EulerClamped,
}

/// Applies the noise part `dX = X^γ dB` over internal time `tau(x)` at every
/// occupied site of `f`, in place.
fn noise_in_place(
    f: &mut Field,
    gamma: f64,
    tau: impl Fn(usize) -> f64,
    noise: &dyn NoiseSource,
    step: u64,
    channel: Channel,
    monotone: bool,
) {
    let sample = if monotone {
        cev_transition_monotone
    } else {
        cev_transition
    };
    let dim = f.dim();
    for i in 0..f.values().len() {
        let v = f.values()[i];
        if v == 0.0 {
            continue;
        }
        let t = tau(i);
        if t <= 0.0 {
            continue;
        }
        let c = f.coords(i);
        if let Some(key) = noise.key(&c[..dim], step, channel) {
            f.values_mut()[i] = sample(v, gamma, t, key);
        }
    }
}

/// Adds the Euler–Maruyama noise increment `coef(x)·√dt·ξ_x` of the
/// pre-step state `pre` onto `out`.
fn add_gaussian_increment(
    out: &mut Field,
    pre: &Field,
    coef: impl Fn(usize, f64) -> f64,
    dt: f64,
    noise: &dyn NoiseSource,
    step: u64,
    channel: Channel,
) {
    let dim = pre.dim();
    let sdt = dt.sqrt();
    for (i, &v) in pre.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let c = pre.coords(i);
        let a = coef(i, v);
        if a == 0.0 {
            continue;
        }
        if let Some(key) = noise.key(&c[..dim], step, channel) {
            let j = out.index(&c).expect("heat step covers the support");
            out.values_mut()[j] += a * sdt * key.gaussian();
        }
    }
}

/// `monotone` selects the order-preserving noise sampler (see
/// [`cev_transition_monotone`]).
#[allow(clippy::too_many_arguments)]
pub(crate) fn single_step(
    u: &Field,
    gamma: f64,
    jumps: &Jumps,
    dt: f64,
    scheme: Scheme,
    noise: &dyn NoiseSource,
    step: u64,
    channel: Channel,
    monotone: bool,
) -> Field {
    match scheme {
        Scheme::Splitting => {
            let mut w = u.clone();
            noise_in_place(&mut w, gamma, |_| dt, noise, step, channel, monotone);
            w.heat(jumps, dt)
        }
        Scheme::EulerClamped => {
            let mut out = u.heat(jumps, dt);
            add_gaussian_increment(&mut out, u, |_, v| v.powf(gamma), dt, noise, step, channel);
            out.clamp();
            out
        }
    }
}

/// Mutually catalytic step: `dU = QU dt + √(UV) dB_1`, `dV = QV dt + √(UV) dB_2`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn catalytic_step(
    u: &Field,
    v: &Field,
    jumps: &Jumps,
    dt: f64,
    scheme: Scheme,
    noise: &dyn NoiseSource,
    step: u64,
    channels: (Channel, Channel),
) -> (Field, Field) {
    match scheme {
        Scheme::Splitting => {
            // Conditionally on the other type, each type is a Feller
            // diffusion run at clock rate `other(x)`.
            let mut u1 = u.clone();
            let mut v1 = v.clone();
            noise_in_place(
                &mut u1,
                0.5,
                |i| v.get(&u.coords(i)) * dt,
                noise,
                step,
                channels.0,
                false,
            );
            noise_in_place(
                &mut v1,
                0.5,
                |i| u.get(&v.coords(i)) * dt,
                noise,
                step,
                channels.1,
                false,
            );
            (u1.heat(jumps, dt), v1.heat(jumps, dt))
        }
        Scheme::EulerClamped => {
            let mut u1 = u.heat(jumps, dt);
            let mut v1 = v.heat(jumps, dt);
            let cu = |i: usize, a: f64| (a * v.get(&u.coords(i))).sqrt();
            let cv = |i: usize, b: f64| (b * u.get(&v.coords(i))).sqrt();
            add_gaussian_increment(&mut u1, u, cu, dt, noise, step, channels.0);
            add_gaussian_increment(&mut v1, v, cv, dt, noise, step, channels.1);
            u1.clamp();
            v1.clamp();
            (u1, v1)
        }
    }
}

/// One step of the scalar diffusion `dZ = A Z^γ dB`.
pub(crate) fn scalar_step(
    z: f64,
    a: f64,
    gamma: f64,
    dt: f64,
    scheme: Scheme,
    key: Option<StreamKey>,
) -> f64 {
    let Some(key) = key else { return z };
    if z <= 0.0 {
        return 0.0;
    }
    match scheme {
        Scheme::Splitting => cev_transition(z, gamma, a * a * dt, key),
        Scheme::EulerClamped => (z + a * z.powf(gamma) * dt.sqrt() * key.gaussian()).max(0.0),
    }
}
