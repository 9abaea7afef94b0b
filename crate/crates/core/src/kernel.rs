//! Isotropic kernels `K(x, x') = k(‖x − x'‖²)` with `k(0) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sparse::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!(
                "kernel gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            kind: KernelKind::Gaussian,
            gamma,
        })
    }

    /// The radial profile `k(r²)`.
    #[inline]
    pub fn profile(&self, sq_dist: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-self.gamma * sq_dist).exp(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &SparseVector, x2: &SparseVector) -> f64 {
        self.profile(x.sq_dist(x2))
    }

    /// Feature-space diameter of a cell whose input-space diameter is
    /// `delta`: `sqrt(2 (1 − k(δ²)))`.
    pub fn delta_phi(&self, delta: f64) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(invalid(format!("delta must be non-negative, got {delta}")));
        }
        let one_minus_k = match self.kind {
            // -expm1 keeps precision for tiny γδ²
            KernelKind::Gaussian => -(-self.gamma * delta * delta).exp_m1(),
        };
        Ok((2.0 * one_minus_k).sqrt())
    }
}
