//! Counter-based noise.
//!
//! Every random draw is a pure function of
//! `(master seed, replica index, site coordinates, step index, channel)`.
//! There is no sequential generator state shared between sites, steps or
//! replicas, so trajectories replay bit-for-bit regardless of execution
//! order and two systems can be driven by literally the same increments.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// Noise channel of a draw. Distinct channels are independent.
pub type Channel = u32;

/// Single-type systems (free and cutoff share this channel).
pub const CHANNEL_SINGLE: Channel = 0;
/// First catalytic type.
pub const CHANNEL_U: Channel = 1;
/// Second catalytic type.
pub const CHANNEL_V: Channel = 2;
/// Scalar (total-mass) diffusions.
pub const CHANNEL_SCALAR: Channel = 3;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of one `(site, step, channel)` stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    /// Independent generator for sub-stream `lane` of this key.
    #[inline]
    pub fn lane(self, lane: u64) -> SplitMix64 {
        SplitMix64::new(mix64(self.0 ^ mix64(lane.wrapping_add(1).wrapping_mul(GOLDEN))))
    }

    /// Standard Gaussian draw attached to this key (lane 0).
    #[inline]
    pub fn gaussian(self) -> f64 {
        StandardNormal.sample(&mut self.lane(0))
    }
}

/// Source of per-site, per-step random streams.
pub trait NoiseSource: Sync {
    /// `None` switches the noise off at this `(site, step, channel)`.
    fn key(&self, site: &[i32], step: u64, channel: Channel) -> Option<StreamKey>;
}

/// Deterministic dynamics: no noise anywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoNoise;

impl NoiseSource for NoNoise {
    fn key(&self, _: &[i32], _: u64, _: Channel) -> Option<StreamKey> {
        None
    }
}

/// The counter-based stream family of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterNoise {
    replica_key: u64,
}

impl CounterNoise {
    pub fn new(seed: u64, replica: u64) -> Self {
        let k = mix64(seed ^ GOLDEN);
        CounterNoise {
            replica_key: mix64(k ^ mix64(replica.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }

    #[inline]
    pub fn stream(&self, site: &[i32], step: u64, channel: Channel) -> StreamKey {
        let mut h = self.replica_key ^ mix64(step.wrapping_add((channel as u64) << 56));
        h = mix64(h);
        for (i, &c) in site.iter().enumerate() {
            h = mix64(h ^ ((c as u32 as u64) | ((i as u64 + 1) << 40)));
        }
        StreamKey(mix64(h ^ site.len() as u64))
    }
}

impl NoiseSource for CounterNoise {
    #[inline]
    fn key(&self, site: &[i32], step: u64, channel: Channel) -> Option<StreamKey> {
        Some(self.stream(site, step, channel))
    }
}

/// SplitMix64, used as the short-lived generator behind each stream key.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        SplitMix64 { state }
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}

impl RngCore for SplitMix64 {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn keys_are_deterministic() {
        let a = CounterNoise::new(7, 3);
        let b = CounterNoise::new(7, 3);
        assert_eq!(a.stream(&[1, -2], 10, 0), b.stream(&[1, -2], 10, 0));
        assert_eq!(
            a.stream(&[1, -2], 10, 0).gaussian(),
            b.stream(&[1, -2], 10, 0).gaussian()
        );
    }

    #[test]
    fn keys_separate_every_coordinate_of_the_address() {
        let n = CounterNoise::new(7, 3);
        let base = n.stream(&[1, -2], 10, 0);
        assert_ne!(base, n.stream(&[-2, 1], 10, 0));
        assert_ne!(base, n.stream(&[1, -2], 11, 0));
        assert_ne!(base, n.stream(&[1, -2], 10, 1));
        assert_ne!(base, CounterNoise::new(7, 4).stream(&[1, -2], 10, 0));
        assert_ne!(base, CounterNoise::new(8, 3).stream(&[1, -2], 10, 0));
        assert_ne!(n.stream(&[0], 0, 0), n.stream(&[0, 0], 0, 0));
    }

    #[test]
    fn gaussian_moments_across_sites_and_steps() {
        let n = CounterNoise::new(2024, 0);
        let mut xs = Vec::new();
        for step in 0..200u64 {
            for x in -50..50 {
                xs.push(n.stream(&[x], step, 0).gaussian());
            }
        }
        let (m, v) = moments(&xs);
        let se = (1.0 / xs.len() as f64).sqrt();
        assert!(m.abs() < 4.0 * se, "mean {m}");
        assert!((v - 1.0).abs() < 4.0 * (2.0 / xs.len() as f64).sqrt(), "var {v}");
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        let n = CounterNoise::new(99, 5);
        let pairs: Vec<(f64, f64)> = (0..20_000i32)
            .map(|i| {
                let a = n.stream(&[i], 0, 0).gaussian();
                let b = n.stream(&[i + 1], 0, 0).gaussian();
                (a, b)
            })
            .collect();
        let corr = pairs.iter().map(|(a, b)| a * b).sum::<f64>() / pairs.len() as f64;
        assert!(corr.abs() < 4.0 / (pairs.len() as f64).sqrt(), "corr {corr}");
        let steps: Vec<(f64, f64)> = (0..20_000u64)
            .map(|s| {
                (
                    n.stream(&[0], s, 0).gaussian(),
                    n.stream(&[0], s + 1, 0).gaussian(),
                )
            })
            .collect();
        let corr = steps.iter().map(|(a, b)| a * b).sum::<f64>() / steps.len() as f64;
        assert!(corr.abs() < 4.0 / (steps.len() as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn open_uniform_never_hits_endpoints() {
        let mut r = SplitMix64::new(0);
        for _ in 0..10_000 {
            let u = r.open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
