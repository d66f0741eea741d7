use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;

/// Parameters of the single-type system `du = Qu dt + u^γ dB_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub generator: GeneratorSpec,
}

impl ModelParams {
    pub fn new(gamma: f64, generator: GeneratorSpec) -> Result<Self> {
        let p = ModelParams { gamma, generator };
        p.validate()?;
        Ok(p)
    }

    pub fn laplacian(gamma: f64, dim: usize) -> Result<Self> {
        ModelParams::new(gamma, GeneratorSpec::laplacian(dim)?)
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        self.generator.validate()
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&gamma) {
        return Err(Error::param(
            "gamma",
            format!("must lie in [1/2, 1], got {gamma}"),
        ));
    }
    Ok(())
}

/// Parameters of the catalytic extinction scenario: `U_0 <= η e^{-λ0|x|}`
/// and `c1 e^{-λ1|x|} <= V_0 <= c2 e^{-λ2|x|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalyticParams {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub c1: f64,
    pub c2: f64,
    pub eta: f64,
}

impl CatalyticParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda0", self.lambda0),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("c1", self.c1),
            ("c2", self.c2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.lambda1 < self.lambda2 {
            return Err(Error::param("lambda1", "requires lambda1 >= lambda2"));
        }
        if self.c1 > self.c2 {
            return Err(Error::param("c1", "requires c1 <= c2"));
        }
        if !(self.eta >= 0.0 && self.eta <= 1.0) {
            return Err(Error::param(
                "eta",
                format!("must lie in [0, 1], got {}", self.eta),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_range() {
        assert!(ModelParams::laplacian(0.5, 1).is_ok());
        assert!(ModelParams::laplacian(1.0, 1).is_ok());
        assert!(ModelParams::laplacian(0.49, 1).is_err());
        assert!(ModelParams::laplacian(1.01, 1).is_err());
    }

    #[test]
    fn catalytic_ordering() {
        let ok = CatalyticParams {
            lambda0: 2.0,
            lambda1: 1.0,
            lambda2: 1.0,
            c1: 1.0,
            c2: 1.0,
            eta: 0.2,
        };
        assert!(ok.validate().is_ok());
        assert!(CatalyticParams { lambda2: 1.5, ..ok }.validate().is_err());
        assert!(CatalyticParams { c1: 2.0, ..ok }.validate().is_err());
        assert!(CatalyticParams { eta: 1.5, ..ok }.validate().is_err());
    }
}
