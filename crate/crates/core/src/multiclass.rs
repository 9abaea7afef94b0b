//! Multiclass AVM with the max-margin loss `l(a)`, where
//! `a = w_yᵀΦ(x) − max_{j≠y} w_jᵀΦ(x)`.
//!
//! All class models share one coverage, one set of expansion points and one
//! global scale, so the `(t − 1)/t` shrink is a single multiply and every
//! step's `±η l'(a)` pair lands on the same row of the coefficient table.
//! Class indices are 1-based.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{CellAssignment, Coverage};
use crate::error::{invalid, Result};
use crate::kernel::KernelSpec;
use crate::learner::{schedule_prob, Algorithm, LearnerConfig, OutputMode};
use crate::loss::LossKind;
use crate::sparse::SparseVector;

const SCALE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MulticlassModel {
    kernel: KernelSpec,
    classes: usize,
    scale: f64,
    points: Vec<Arc<SparseVector>>,
    index: HashMap<Arc<SparseVector>, usize>,
    /// Row-major: `coeffs[k * classes + j]` is point k's coefficient in w_j.
    coeffs: Vec<f64>,
}

impl MulticlassModel {
    pub fn new(kernel: KernelSpec, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(invalid(format!("need at least 2 classes, got {classes}")));
        }
        Ok(Self {
            kernel,
            classes,
            scale: 1.0,
            points: Vec::new(),
            index: HashMap::new(),
            coeffs: Vec::new(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn points(&self) -> &[Arc<SparseVector>] {
        &self.points
    }

    /// Effective coefficient of point `point` in class `class` (1-based).
    pub fn coeff(&self, point: usize, class: usize) -> f64 {
        self.scale * self.coeffs[point * self.classes + class - 1]
    }

    /// Raw (unscaled) coefficient row of point `point`.
    pub fn raw_row(&self, point: usize) -> &[f64] {
        &self.coeffs[point * self.classes..(point + 1) * self.classes]
    }

    pub fn position_of(&self, point: &SparseVector) -> Option<usize> {
        self.index.get(point).copied()
    }

    /// Per-class scores `w_jᵀΦ(x)`, index 0 for class 1.
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        let m = self.classes;
        let mut out = vec![0.0; m];
        for (k, p) in self.points.iter().enumerate() {
            let row = &self.coeffs[k * m..(k + 1) * m];
            if row.iter().all(|&c| c == 0.0) {
                continue;
            }
            let kv = self.kernel.eval(p, x);
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * kv;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
        out
    }

    /// argmax_j w_jᵀΦ(x), lowest class on ties.
    pub fn predict(&self, x: &SparseVector) -> usize {
        argmax(&self.scores(x), None) + 1
    }

    fn register(&mut self, point: &Arc<SparseVector>) -> usize {
        if let Some(&k) = self.index.get(point.as_ref()) {
            return k;
        }
        let k = self.points.len();
        self.points.push(Arc::clone(point));
        self.index.insert(Arc::clone(point), k);
        self.coeffs.extend(std::iter::repeat_n(0.0, self.classes));
        k
    }

    fn shrink(&mut self, factor: f64) {
        if factor == 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c = 0.0);
            self.scale = 1.0;
        } else {
            self.scale *= factor;
        }
    }

    /// Adds `+amount` to w_up and `−amount` to w_down at `point`. Returns
    /// the raw (unscaled) amount moved.
    fn transfer(&mut self, point: &Arc<SparseVector>, up: usize, down: usize, amount: f64) -> f64 {
        let k = self.register(point);
        let q = amount / self.scale;
        self.coeffs[k * self.classes + up - 1] += q;
        self.coeffs[k * self.classes + down - 1] -= q;
        q
    }

    fn fold_scale(&mut self) {
        let s = self.scale;
        self.coeffs.iter_mut().for_each(|c| *c *= s);
        self.scale = 1.0;
    }

    /// ‖W‖²_{2,2} from the Gram matrix.
    pub fn gram_sq_norm(&self) -> f64 {
        let m = self.classes;
        let mut acc = 0.0;
        for i in 0..self.points.len() {
            for j in 0..=i {
                let dot: f64 = (0..m)
                    .map(|c| self.coeffs[i * m + c] * self.coeffs[j * m + c])
                    .sum();
                if dot == 0.0 {
                    continue;
                }
                let k = self.kernel.eval(&self.points[i], &self.points[j]);
                acc += if i == j { dot * k } else { 2.0 * dot * k };
            }
        }
        self.scale * self.scale * acc
    }
}

fn argmax(scores: &[f64], skip: Option<usize>) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (j, &v) in scores.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        if best == usize::MAX || v > best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

/// Derivative of the multiclass loss in the margin `a`.
pub fn margin_grad(kind: LossKind, a: f64) -> Result<f64> {
    match kind {
        LossKind::Hinge => Ok(if a < 1.0 { -1.0 } else { 0.0 }),
        LossKind::Logistic => Ok(-1.0 / (1.0 + a.exp())),
        other => Err(invalid(format!(
            "multiclass supports hinge and logit losses, not {other}"
        ))),
    }
}

/// Running mean of the iterates `W_t`, aligned with one model's points.
#[derive(Clone, Debug)]
struct MulticlassAverage {
    start: u64,
    count: u64,
    means: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MulticlassStep {
    /// Class predicted before the update (1-based).
    pub predicted: usize,
    /// Margin `a` against the strongest competitor.
    pub margin: f64,
    /// The competitor `z_t` (1-based).
    pub competitor: usize,
    pub grad: f64,
    pub approximated: bool,
    pub cell: Option<CellAssignment>,
    /// Raw coefficient added to the true class and removed from the
    /// competitor at the expansion point; 0 when nothing moved.
    pub transfer: f64,
}

#[derive(Clone, Debug)]
pub struct MulticlassLearner {
    config: LearnerConfig,
    model: MulticlassModel,
    coverage: Coverage,
    avg: Option<MulticlassAverage>,
    t: u64,
    rng: ChaCha8Rng,
    kevals: u64,
}

impl MulticlassLearner {
    pub fn new(config: LearnerConfig, classes: usize, horizon: Option<u64>) -> Result<Self> {
        config.validate()?;
        margin_grad(config.loss.kind, 0.0)?;
        let start = match config.output {
            OutputMode::Final => None,
            OutputMode::Average => Some(1),
            OutputMode::Suffix(a) => {
                let horizon = horizon
                    .ok_or_else(|| invalid("suffix averaging needs a known number of steps"))?;
                Some(crate::model::AveragedModel::suffix(a, horizon)?.start_iteration())
            }
        };
        Ok(Self {
            model: MulticlassModel::new(config.kernel, classes)?,
            coverage: Coverage::new(config.geometry, config.delta, config.dim.max(1))?,
            avg: start.map(|start| MulticlassAverage {
                start,
                count: 0,
                means: Vec::new(),
            }),
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            kevals: 0,
            config,
        })
    }

    pub fn model(&self) -> &MulticlassModel {
        &self.model
    }

    pub fn coverage(&self) -> &Coverage {
        &self.coverage
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn model_size(&self) -> usize {
        self.model.len()
    }

    pub fn cells(&self) -> usize {
        self.coverage.len()
    }

    pub fn kevals(&self) -> u64 {
        self.kevals
    }

    pub fn predict(&self, x: &SparseVector) -> usize {
        self.model.predict(x)
    }

    pub fn step(&mut self, x: &Arc<SparseVector>, y: usize) -> Result<MulticlassStep> {
        let m = self.model.classes;
        if y == 0 || y > m {
            return Err(invalid(format!("class index {y} outside 1..={m}")));
        }
        self.t += 1;
        let t = self.t;
        self.accumulate_average(t);

        self.kevals += self.model.len() as u64;
        let scores = self.model.scores(x);
        let predicted = argmax(&scores, None) + 1;
        let z = argmax(&scores, Some(y - 1)) + 1;
        let margin = scores[y - 1] - scores[z - 1];
        let grad = margin_grad(self.config.loss.kind, margin)?;

        self.model.shrink((t - 1) as f64 / t as f64);

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
        let amount = -grad / (self.config.lambda * t as f64);
        let mut transfer = 0.0;
        let cell = if approximate {
            let cell = self.coverage.assign(x);
            let core = Arc::clone(self.coverage.core_arc(cell.cell_index)?);
            self.model.register(&core);
            if amount != 0.0 {
                transfer = self.model.transfer(&core, y, z, amount);
            }
            Some(cell)
        } else {
            if amount != 0.0 {
                transfer = self.model.transfer(x, y, z, amount);
            }
            None
        };
        if self.model.scale < SCALE_FLOOR {
            self.model.fold_scale();
        }
        Ok(MulticlassStep {
            predicted,
            margin,
            competitor: z,
            grad,
            approximated: approximate,
            cell,
            transfer,
        })
    }

    fn accumulate_average(&mut self, t: u64) {
        let Some(avg) = self.avg.as_mut() else {
            return;
        };
        if t < avg.start {
            return;
        }
        avg.means.resize(self.model.coeffs.len(), 0.0);
        avg.count += 1;
        let n = avg.count as f64;
        let s = self.model.scale;
        for (mean, c) in avg.means.iter_mut().zip(&self.model.coeffs) {
            *mean += (s * c - *mean) / n;
        }
    }

    /// The configured output model.
    pub fn output_model(&self) -> MulticlassModel {
        match &self.avg {
            None => self.model.clone(),
            Some(avg) => {
                let mut out = self.model.clone();
                out.scale = 1.0;
                out.coeffs.iter_mut().for_each(|c| *c = 0.0);
                out.coeffs[..avg.means.len()].copy_from_slice(&avg.means);
                out
            }
        }
    }
}
