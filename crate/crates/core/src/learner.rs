//! Online learners: plain kernel SGD and the approximation vector machine.
//!
//! Both run `w_{t+1} = (1 − 1/t) w_t − η_t α_t Φ(e_t)` with `η_t = 1/(λt)`.
//! They differ only in the expansion point `e_t`: SGD always uses the
//! instance itself, while the AVM, with probability `p_t`, snaps it to the
//! core point of its coverage cell.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{CellAssignment, Coverage, Geometry};
use crate::error::{invalid, AvmError, Result};
use crate::kernel::KernelSpec;
use crate::loss::{LossKind, LossSpec};
use crate::model::{AveragedModel, KernelModel};
use crate::sparse::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Avm,
}

impl FromStr for Algorithm {
    type Err = AvmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Algorithm::Sgd),
            "avm" => Ok(Algorithm::Avm),
            other => Err(invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Which model a run hands back.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputMode {
    /// The last iterate `w_{T+1}`.
    Final,
    /// `(1/T) Σ_{t=1}^{T} w_t`.
    Average,
    /// Mean of the last `α` fraction of iterates.
    Suffix(f64),
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputMode::Final => f.write_str("final"),
            OutputMode::Average => f.write_str("avg"),
            OutputMode::Suffix(a) => write!(f, "suffix={a}"),
        }
    }
}

impl FromStr for OutputMode {
    type Err = AvmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(OutputMode::Final),
            "avg" | "average" => Ok(OutputMode::Average),
            _ => {
                let a = s
                    .strip_prefix("suffix=")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| invalid(format!("unknown output mode '{s}'")))?;
                if !(a > 0.0 && a <= 1.0) {
                    return Err(invalid(format!(
                        "suffix fraction must be in (0, 1], got {a}"
                    )));
                }
                Ok(OutputMode::Suffix(a))
            }
        }
    }
}

/// Source of `y_max` for the ℓ₂ ball projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum YMax {
    Fixed(f64),
    /// Running maximum of |y| over the labels seen so far.
    Tracked,
}

/// `p_t = max(0, 1 − β / t^ρ)`; β = 0 always approximates and β = ∞ never does.
pub fn schedule_prob(beta: f64, rho: f64, t: u64) -> f64 {
    debug_assert!(t >= 1);
    if beta == 0.0 {
        1.0
    } else if beta.is_infinite() {
        0.0
    } else {
        (1.0 - beta / (t as f64).powf(rho)).max(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub loss: LossSpec,
    pub kernel: KernelSpec,
    pub geometry: Geometry,
    pub delta: f64,
    /// Feature dimensionality; sets the rect half-width δ/√d.
    pub dim: usize,
    pub beta: f64,
    pub rho: f64,
    pub output: OutputMode,
    pub seed: u64,
    pub y_max: YMax,
}

impl LearnerConfig {
    /// AVM with hinge loss, sphere coverage and β = 0.
    pub fn new(kernel: KernelSpec, lambda: f64, delta: f64) -> Self {
        Self {
            algorithm: Algorithm::Avm,
            lambda,
            loss: LossSpec::hinge(),
            kernel,
            geometry: Geometry::Sphere,
            delta,
            dim: 1,
            beta: 0.0,
            rho: 1.0,
            output: OutputMode::Final,
            seed: 0,
            y_max: YMax::Tracked,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(invalid(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if let YMax::Fixed(v) = self.y_max {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("y_max must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// The ball projection runs for ℓ₂ loss with λ ≤ 1 (AVM only).
    pub fn projects(&self) -> bool {
        self.algorithm == Algorithm::Avm && self.loss.kind == LossKind::L2 && self.lambda <= 1.0
    }
}

/// What one step saw and did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// `w_tᵀΦ(x_t)` before the update.
    pub score: f64,
    pub alpha: f64,
    /// The expansion point was a core point (`Z_t = 1`).
    pub approximated: bool,
    pub cell: Option<CellAssignment>,
}

#[derive(Clone, Debug)]
pub struct Learner {
    config: LearnerConfig,
    model: KernelModel,
    coverage: Coverage,
    avg: Option<AveragedModel>,
    t: u64,
    rng: ChaCha8Rng,
    y_max_seen: f64,
    kevals: u64,
}

impl Learner {
    /// `horizon` is the planned number of steps; suffix averaging needs it.
    pub fn new(config: LearnerConfig, horizon: Option<u64>) -> Result<Self> {
        config.validate()?;
        let avg = match config.output {
            OutputMode::Final => None,
            OutputMode::Average => Some(AveragedModel::full()),
            OutputMode::Suffix(a) => {
                let horizon = horizon
                    .ok_or_else(|| invalid("suffix averaging needs a known number of steps"))?;
                Some(AveragedModel::suffix(a, horizon)?)
            }
        };
        Ok(Self {
            model: KernelModel::new(config.kernel),
            coverage: Coverage::new(config.geometry, config.delta, config.dim.max(1))?,
            avg,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            y_max_seen: 0.0,
            kevals: 0,
            config,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn model(&self) -> &KernelModel {
        &self.model
    }

    pub fn coverage(&self) -> &Coverage {
        &self.coverage
    }

    /// Number of processed instances.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Model size S_t: stored expansion points.
    pub fn model_size(&self) -> usize {
        self.model.len()
    }

    /// Coverage cells M_t.
    pub fn cells(&self) -> usize {
        self.coverage.len()
    }

    /// Kernel evaluations spent so far.
    pub fn kevals(&self) -> u64 {
        self.kevals
    }

    pub fn predict(&self, x: &SparseVector) -> f64 {
        self.model.predict(x)
    }

    pub fn radius(&self) -> f64 {
        let y_max = match self.config.y_max {
            YMax::Fixed(v) => v,
            YMax::Tracked => self.y_max_seen,
        };
        y_max / self.config.lambda.sqrt()
    }

    pub fn step(&mut self, x: &Arc<SparseVector>, y: f64) -> Result<StepInfo> {
        self.config.loss.check_label(y)?;
        self.t += 1;
        let t = self.t;
        if let Some(avg) = self.avg.as_mut() {
            avg.accumulate(&self.model, t);
        }
        self.y_max_seen = self.y_max_seen.max(y.abs());

        self.kevals += self.model.len() as u64;
        let score = self.model.predict(x);
        let alpha = self.config.loss.grad_scalar_unchecked(score, y);
        // 1 − η_t λ = (t − 1)/t, with η_t λ = 1/t taken exactly
        let shrink = (t - 1) as f64 / t as f64;
        let step = -alpha / (self.config.lambda * t as f64);

        let approximate = match self.config.algorithm {
            Algorithm::Sgd => false,
            Algorithm::Avm => {
                let p = schedule_prob(self.config.beta, self.config.rho, t);
                if p >= 1.0 {
                    true
                } else if p <= 0.0 {
                    false
                } else {
                    self.rng.random::<f64>() < p
                }
            }
        };

        let info = if approximate {
            let cell = self.coverage.assign(x);
            let core = Arc::clone(self.coverage.core_arc(cell.cell_index)?);
            let f_core = if cell.is_new || core == *x {
                score
            } else {
                self.kevals += self.model.len() as u64;
                self.model.predict(&core)
            };
            self.model.register(&core);
            self.model.scaled_update(shrink, step, &core, f_core);
            StepInfo {
                score,
                alpha,
                approximated: true,
                cell: Some(cell),
            }
        } else {
            self.model.scaled_update(shrink, step, x, score);
            StepInfo {
                score,
                alpha,
                approximated: false,
                cell: None,
            }
        };

        if self.config.projects() {
            let r = self.radius();
            self.model.project_ball(r);
        }
        Ok(info)
    }

    /// The configured output: last iterate or (suffix) average.
    pub fn output_model(&self) -> KernelModel {
        match &self.avg {
            Some(avg) => avg.to_model(self.config.kernel),
            None => self.model.clone(),
        }
    }
}
