use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative residual allowed in algebraic identities.
    pub identity: f64,
    /// Absolute floor on singular values of invertible elements.
    pub invertible: f64,
    /// Allowed deviation from transpose symmetry in symmetric models.
    pub symmetric: f64,
    /// Distance margin below 2 required for a logarithm step.
    pub margin: f64,
    /// Minimal distance of the spectrum of u*v from -1.
    pub branch: f64,
    /// Accuracy of generator recovery from one-parameter families.
    pub stone: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            invertible: 1e-10,
            symmetric: 1e-10,
            margin: 1e-3,
            branch: 1e-6,
            stone: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn with_identity(mut self, tol: f64) -> Self {
        self.identity = tol;
        self
    }
}
