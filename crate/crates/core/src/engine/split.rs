use serde::{Deserialize, Serialize};

/// Weights `h_i` splitting the noise coefficient `(Σ w)^γ` over the parts
/// `w_i` so that `h_i >= w_i^γ` and `Σ h_i² = (Σ w)^{2γ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitWeights {
    pub weights: Vec<f64>,
}

impl SplitWeights {
    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|h| h * h).sum()
    }
}

/// `h_i = w_i^γ (Σ w)^γ / (Σ w^{2γ})^{1/2}`, all zero when `Σ w = 0`.
pub fn split_weights(w: &[f64], gamma: f64) -> SplitWeights {
    debug_assert!(w.iter().all(|x| *x >= 0.0));
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return SplitWeights {
            weights: vec![0.0; w.len()],
        };
    }
    let norm = w.iter().map(|x| x.powf(2.0 * gamma)).sum::<f64>().sqrt();
    let scale = total.powf(gamma) / norm;
    SplitWeights {
        weights: w.iter().map(|x| x.powf(gamma) * scale).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_part() {
        let h = split_weights(&[2.0], 0.75).weights;
        assert_eq!(h.len(), 1);
        assert!((h[0] - 2f64.powf(0.75)).abs() < 1e-15);
    }

    #[test]
    fn two_equal_parts() {
        let h = split_weights(&[1.0, 1.0], 0.75);
        for x in &h.weights {
            assert!((x - 1.189_207_115_002_721).abs() < 1e-15);
        }
        assert!((h.sum_of_squares() - 2f64.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn three_parts() {
        let w = [1.0, 2.0, 3.0];
        let h = split_weights(&w, 0.6);
        for (hi, wi) in h.weights.iter().zip(w) {
            assert!(*hi >= wi.powf(0.6));
        }
        let target = 6f64.powf(1.2);
        assert!((h.sum_of_squares() - target).abs() <= 1e-12 * target);
    }

    #[test]
    fn zero_input() {
        assert_eq!(split_weights(&[0.0, 0.0], 0.7).weights, vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn identities(w in prop::collection::vec(0.0f64..100.0, 1..=16), gamma in 0.5001f64..0.9999) {
            let h = split_weights(&w, gamma);
            let total: f64 = w.iter().sum();
            let target = total.powf(2.0 * gamma);
            prop_assert!((h.sum_of_squares() - target).abs() <= 1e-12 * target.max(f64::MIN_POSITIVE));
            for (hi, wi) in h.weights.iter().zip(&w) {
                prop_assert!(*hi >= wi.powf(gamma) * (1.0 - 1e-12));
            }
        }
    }
}
