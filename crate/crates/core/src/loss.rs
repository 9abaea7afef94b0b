//! Convex losses whose (sub)gradient in feature space is a scalar multiple
//! of `Φ(x)`: `l'(w; x, y) = α · Φ(x)`.
//!
//! Every function here works on the raw score `f = wᵀΦ(x)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, AvmError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    Hinge,
    Logistic,
    SmoothHinge,
    L1,
    L2,
    EpsInsensitive,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Hinge,
        LossKind::Logistic,
        LossKind::SmoothHinge,
        LossKind::L1,
        LossKind::L2,
        LossKind::EpsInsensitive,
    ];

    /// The name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logit",
            LossKind::SmoothHinge => "smooth-hinge",
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
            LossKind::EpsInsensitive => "eps-insensitive",
        }
    }

    /// Hinge, logistic and smooth hinge require labels in {−1, +1}.
    pub fn is_classification(self) -> bool {
        matches!(
            self,
            LossKind::Hinge | LossKind::Logistic | LossKind::SmoothHinge
        )
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for LossKind {
    type Err = AvmError;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == s)
            .ok_or_else(|| invalid(format!("unknown loss '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Smoothness of the smooth hinge.
    pub tau: f64,
    /// Tube half-width of the ε-insensitive loss.
    pub epsilon: f64,
    /// Growth constants with ‖l'(w)‖ ≤ A‖w‖^{1/2} + B. Informational only;
    /// the update rule never reads them.
    pub growth_a: f64,
    pub growth_b: f64,
}

impl LossSpec {
    pub const DEFAULT_TAU: f64 = 0.5;
    pub const DEFAULT_EPSILON: f64 = 0.1;

    pub fn new(kind: LossKind) -> Self {
        // ℓ₂ starts at y_max = 1; see `with_l2_growth`
        let growth_b = if kind == LossKind::SmoothHinge {
            2.0
        } else {
            1.0
        };
        Self {
            kind,
            tau: Self::DEFAULT_TAU,
            epsilon: Self::DEFAULT_EPSILON,
            growth_a: 0.0,
            growth_b,
        }
    }

    pub fn hinge() -> Self {
        Self::new(LossKind::Hinge)
    }

    pub fn logistic() -> Self {
        Self::new(LossKind::Logistic)
    }

    pub fn smooth_hinge(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!(
                "smooth-hinge tau must be positive, got {tau}"
            )));
        }
        Ok(Self {
            tau,
            ..Self::new(LossKind::SmoothHinge)
        })
    }

    pub fn l1() -> Self {
        Self::new(LossKind::L1)
    }

    pub fn l2() -> Self {
        Self::new(LossKind::L2)
    }

    pub fn eps_insensitive(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            ..Self::new(LossKind::EpsInsensitive)
        })
    }

    /// ℓ₂ growth constants: B = y_max and A = y_max^{1/2} λ^{-1/4} (λ ≤ 1)
    /// or y_max^{1/2} (λ − 1)^{-1/2} (λ > 1).
    pub fn with_l2_growth(mut self, lambda: f64, y_max: f64) -> Self {
        if self.kind == LossKind::L2 {
            self.growth_b = y_max;
            self.growth_a = if lambda <= 1.0 {
                y_max.sqrt() * lambda.powf(-0.25)
            } else {
                y_max.sqrt() / (lambda - 1.0).sqrt()
            };
        }
        self
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(invalid(format!("non-finite label {y}")));
        }
        if self.kind.is_classification() && y != 1.0 && y != -1.0 {
            return Err(invalid(format!(
                "{} loss needs labels in {{-1, +1}}, got {y}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn value(&self, f: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.value_unchecked(f, y))
    }

    pub fn grad_scalar(&self, f: f64, y: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.grad_scalar_unchecked(f, y))
    }

    pub(crate) fn value_unchecked(&self, f: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Hinge => (1.0 - y * f).max(0.0),
            LossKind::Logistic => softplus(-y * f),
            LossKind::SmoothHinge => {
                let m = y * f;
                if m > 1.0 {
                    0.0
                } else if m < 1.0 - self.tau {
                    1.0 - m - self.tau / 2.0
                } else {
                    (1.0 - m) * (1.0 - m) / (2.0 * self.tau)
                }
            }
            LossKind::L1 => (y - f).abs(),
            LossKind::L2 => 0.5 * (y - f) * (y - f),
            LossKind::EpsInsensitive => ((y - f).abs() - self.epsilon).max(0.0),
        }
    }

    pub(crate) fn grad_scalar_unchecked(&self, f: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Hinge => {
                if y * f <= 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            // −y e^{−yf} / (1 + e^{−yf}) rewritten without overflow
            LossKind::Logistic => -y / (1.0 + (y * f).exp()),
            LossKind::SmoothHinge => {
                let m = y * f;
                if m < 1.0 - self.tau {
                    -y
                } else if m <= 1.0 {
                    (m - 1.0) * y / self.tau
                } else {
                    0.0
                }
            }
            LossKind::L1 => sign(f - y),
            LossKind::L2 => f - y,
            LossKind::EpsInsensitive => {
                if (y - f).abs() > self.epsilon {
                    sign(f - y)
                } else {
                    0.0
                }
            }
        }
    }
}

/// sign with sign(0) = 0.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
