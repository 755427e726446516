//! Built-in reaction models, addressable by name from run configurations.

use std::sync::Arc;

use crate::problem::{CBound, Convection, ProblemSpec, Reaction, ScalarField};

/// Names accepted by the model registry.
pub const MODEL_NAMES: [&str; 2] = ["gas-liquid", "linear"];

pub fn is_registered(name: &str) -> bool {
    MODEL_NAMES.contains(&name)
}

/// `f = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroReaction;

impl Reaction for ZeroReaction {
    fn eval(&self, _x: f64, _y: f64, _u: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn jacobian(&self, _x: f64, _y: f64, _u: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// Second-order gas-liquid reaction in shifted variables `u_1 = rho_1 - z_1`,
/// `u_2 = z_2`:
///
/// `f_1 = -sigma_1 (rho_1 - u_1) u_2`, `f_2 = sigma_2 (rho_1 - u_1) u_2`,
/// with `sigma_2 = k_1 sigma_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasLiquidReaction {
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho1: f64,
}

impl GasLiquidReaction {
    pub fn new(sigma1: f64, k1: f64, rho1: f64) -> Self {
        GasLiquidReaction {
            sigma1,
            sigma2: k1 * sigma1,
            rho1,
        }
    }
}

impl Reaction for GasLiquidReaction {
    fn eval(&self, _x: f64, _y: f64, u: [f64; 2]) -> [f64; 2] {
        let s = (self.rho1 - u[0]) * u[1];
        [-self.sigma1 * s, self.sigma2 * s]
    }

    fn jacobian(&self, _x: f64, _y: f64, u: [f64; 2]) -> [[f64; 2]; 2] {
        let free = self.rho1 - u[0];
        [
            [self.sigma1 * u[1], -self.sigma1 * free],
            [-self.sigma2 * u[1], self.sigma2 * free],
        ]
    }
}

/// Linear convection-diffusion problem (`f = 0`, `c = 0`).
pub fn linear_problem(
    eps: [f64; 2],
    convection: [Convection; 2],
    boundary: [ScalarField; 2],
) -> ProblemSpec {
    ProblemSpec {
        eps,
        convection,
        reaction: Arc::new(ZeroReaction),
        cbound: CBound::zero(),
        boundary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names() {
        assert!(is_registered("gas-liquid"));
        assert!(is_registered("linear"));
        assert!(!is_registered("gas_liquid"));
    }

    #[test]
    fn gas_liquid_vanishes_at_rho() {
        let r = GasLiquidReaction::new(2.0, 3.0, 1.5);
        assert_eq!(r.sigma2, 6.0);
        assert_eq!(r.eval(0.0, 0.0, [1.5, 4.0]), [0.0, 0.0]);
        assert_eq!(r.eval(0.0, 0.0, [0.3, 0.0]), [0.0, 0.0]);
        let f = r.eval(0.0, 0.0, [0.5, 1.0]);
        assert_eq!(f, [-2.0, 6.0]);
    }
}
