//! Online and batch experiment protocols with JSON-lines metric traces.
//!
//! Online: every instance is predicted first (mistake or squared error is
//! recorded), then learned from. Batch: `T` instances are drawn uniformly
//! with replacement from the training set, then the output model is scored
//! on the test set.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{Dataset, Task};
use crate::error::{AvmError, Result};
use crate::learner::{Learner, LearnerConfig};
use crate::model::KernelModel;
use crate::multiclass::{MulticlassLearner, MulticlassModel};
use crate::sparse::SparseVector;

/// Mixed into the seed of the batch sampler so it never shares a stream
/// with the approximation schedule.
const SAMPLER_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Binary decision with sign(0) = +1.
pub fn sign_label(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Cumulative mistake rate (classification) or RMSE (regression).
#[derive(Clone, Debug)]
pub struct OnlineMetrics {
    task: Task,
    count: u64,
    mistakes: u64,
    sq_err: f64,
}

impl OnlineMetrics {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            count: 0,
            mistakes: 0,
            sq_err: 0.0,
        }
    }

    /// `prediction` is the raw score for binary and regression tasks and the
    /// predicted class index for multiclass.
    pub fn record(&mut self, prediction: f64, truth: f64) {
        self.count += 1;
        match self.task {
            Task::Binary => {
                if sign_label(prediction) != truth {
                    self.mistakes += 1;
                }
            }
            Task::Multiclass => {
                if prediction != truth {
                    self.mistakes += 1;
                }
            }
            Task::Regression => {
                let e = prediction - truth;
                self.sq_err += e * e;
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mistakes(&self) -> u64 {
        self.mistakes
    }

    /// 0 before any instance has been seen.
    pub fn value(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let n = self.count as f64;
        match self.task {
            Task::Regression => (self.sq_err / n).sqrt(),
            _ => self.mistakes as f64 / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub metric: f64,
    pub model_size: usize,
    pub cells: usize,
    pub elapsed_s: f64,
    pub kevals: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceHeader {
    pub header: bool,
    pub task: Task,
    pub mode: &'static str,
    pub algorithm: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    #[serde(rename = "final")]
    pub is_final: bool,
    pub t: u64,
    pub metric: f64,
    pub model_size: usize,
    pub cells: usize,
    pub elapsed_s: f64,
    pub kevals: u64,
    /// Batch mode: accuracy (classification) or RMSE (regression) on the
    /// test set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MetricsTrace {
    pub header: TraceHeader,
    pub checkpoints: Vec<Checkpoint>,
    pub summary: Summary,
}

impl MetricsTrace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: serde_json::Error| AvmError::Io(e.into());
        writeln!(w, "{}", serde_json::to_string(&self.header).map_err(io)?)?;
        for c in &self.checkpoints {
            writeln!(w, "{}", serde_json::to_string(c).map_err(io)?)?;
        }
        writeln!(w, "{}", serde_json::to_string(&self.summary).map_err(io)?)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum TrainedModel {
    Scalar(KernelModel),
    Multiclass(MulticlassModel),
}

impl TrainedModel {
    /// Raw score (scalar models) or predicted class index (multiclass).
    pub fn predict(&self, x: &SparseVector) -> f64 {
        match self {
            TrainedModel::Scalar(m) => m.predict(x),
            TrainedModel::Multiclass(m) => m.predict(x) as f64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TrainedModel::Scalar(m) => m.len(),
            TrainedModel::Multiclass(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub trace: MetricsTrace,
    pub model: TrainedModel,
    /// Coverage cells at the end of the run.
    pub cells: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Checkpoint cadence; `None` means ⌈T/100⌉.
    pub checkpoint_every: Option<u64>,
}

enum Engine {
    Scalar(Learner),
    Multi(MulticlassLearner),
}

impl Engine {
    fn new(config: &LearnerConfig, data: &Dataset, horizon: u64) -> Result<Self> {
        Ok(match data.task {
            Task::Multiclass => Engine::Multi(MulticlassLearner::new(
                config.clone(),
                data.classes(),
                Some(horizon),
            )?),
            _ => Engine::Scalar(Learner::new(config.clone(), Some(horizon))?),
        })
    }

    /// Predicts, then learns. Returns the prediction made before learning.
    fn step(&mut self, x: &Arc<SparseVector>, y: f64) -> Result<f64> {
        match self {
            Engine::Scalar(l) => Ok(l.step(x, y)?.score),
            Engine::Multi(l) => Ok(l.step(x, y as usize)?.predicted as f64),
        }
    }

    fn model_size(&self) -> usize {
        match self {
            Engine::Scalar(l) => l.model_size(),
            Engine::Multi(l) => l.model_size(),
        }
    }

    fn cells(&self) -> usize {
        match self {
            Engine::Scalar(l) => l.cells(),
            Engine::Multi(l) => l.cells(),
        }
    }

    fn kevals(&self) -> u64 {
        match self {
            Engine::Scalar(l) => l.kevals(),
            Engine::Multi(l) => l.kevals(),
        }
    }

    fn output(&self) -> TrainedModel {
        match self {
            Engine::Scalar(l) => TrainedModel::Scalar(l.output_model()),
            Engine::Multi(l) => TrainedModel::Multiclass(l.output_model()),
        }
    }
}

fn algorithm_name(config: &LearnerConfig) -> &'static str {
    match config.algorithm {
        crate::learner::Algorithm::Sgd => "sgd",
        crate::learner::Algorithm::Avm => "avm",
    }
}

/// Drives an engine over `(x, y)` pairs and records checkpoints.
fn drive(
    engine: &mut Engine,
    data: &Dataset,
    stream: impl Iterator<Item = usize>,
    horizon: u64,
    opts: RunOptions,
    metrics: &mut OnlineMetrics,
    started: Instant,
) -> Result<Vec<Checkpoint>> {
    let every = opts
        .checkpoint_every
        .unwrap_or_else(|| horizon.div_ceil(100))
        .max(1);
    let mut checkpoints = Vec::new();
    let mut t = 0u64;
    for i in stream {
        let (x, y) = (&data.features[i], data.labels[i]);
        let prediction = engine.step(x, y).map_err(|e| match e {
            AvmError::InvalidParameter(msg) => AvmError::Label {
                line: data.lines.get(i).copied().unwrap_or(i + 1),
                label: y.to_string(),
                msg,
            },
            other => other,
        })?;
        metrics.record(prediction, y);
        t += 1;
        if t.is_multiple_of(every) || t == horizon {
            checkpoints.push(Checkpoint {
                t,
                metric: metrics.value(),
                model_size: engine.model_size(),
                cells: engine.cells(),
                elapsed_s: started.elapsed().as_secs_f64(),
                kevals: engine.kevals(),
            });
        }
    }
    Ok(checkpoints)
}

fn header(config: &LearnerConfig, data: &Dataset, mode: &'static str) -> TraceHeader {
    TraceHeader {
        header: true,
        task: data.task,
        mode,
        algorithm: algorithm_name(config),
        classes: (data.task == Task::Multiclass).then(|| data.class_names.clone()),
    }
}

/// Single pass over `data` in order: predict, score, learn.
pub fn run_stream(config: &LearnerConfig, data: &Dataset, opts: RunOptions) -> Result<RunReport> {
    let started = Instant::now();
    let horizon = data.len() as u64;
    let mut engine = Engine::new(config, data, horizon.max(1))?;
    let mut metrics = OnlineMetrics::new(data.task);
    let checkpoints = drive(
        &mut engine,
        data,
        0..data.len(),
        horizon,
        opts,
        &mut metrics,
        started,
    )?;
    let summary = Summary {
        is_final: true,
        t: metrics.count(),
        metric: metrics.value(),
        model_size: engine.model_size(),
        cells: engine.cells(),
        elapsed_s: started.elapsed().as_secs_f64(),
        kevals: engine.kevals(),
        test_metric: None,
    };
    Ok(RunReport {
        trace: MetricsTrace {
            header: header(config, data, "online"),
            checkpoints,
            summary,
        },
        model: engine.output(),
        cells: engine.cells(),
    })
}

/// Trains on `iters` uniform draws from `train` and scores the output model
/// on `test`.
pub fn run_batch(
    config: &LearnerConfig,
    train: &Dataset,
    test: &Dataset,
    iters: u64,
    opts: RunOptions,
) -> Result<RunReport> {
    if train.is_empty() {
        return Err(AvmError::EmptyDataset("training set is empty"));
    }
    if test.is_empty() {
        return Err(AvmError::EmptyDataset("test set is empty"));
    }
    if iters == 0 {
        return Err(crate::error::invalid(
            "batch mode needs at least one iteration",
        ));
    }
    let started = Instant::now();
    let mut engine = Engine::new(config, train, iters)?;
    let mut metrics = OnlineMetrics::new(train.task);
    let mut sampler = ChaCha8Rng::seed_from_u64(config.seed ^ SAMPLER_SALT);
    let n = train.len();
    let draws = (0..iters).map(move |_| sampler.random_range(0..n));
    let checkpoints = drive(
        &mut engine,
        train,
        draws,
        iters,
        opts,
        &mut metrics,
        started,
    )?;
    let model = engine.output();
    let test_metric = evaluate(&model, test);
    let summary = Summary {
        is_final: true,
        t: metrics.count(),
        metric: metrics.value(),
        model_size: engine.model_size(),
        cells: engine.cells(),
        elapsed_s: started.elapsed().as_secs_f64(),
        kevals: engine.kevals(),
        test_metric: Some(test_metric),
    };
    Ok(RunReport {
        trace: MetricsTrace {
            header: header(config, train, "batch"),
            checkpoints,
            summary,
        },
        model,
        cells: engine.cells(),
    })
}

/// Accuracy for classification, RMSE for regression.
pub fn evaluate(model: &TrainedModel, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut metrics = OnlineMetrics::new(data.task);
    for (x, y) in data.iter() {
        metrics.record(model.predict(x), y);
    }
    match data.task {
        Task::Regression => metrics.value(),
        _ => 1.0 - metrics.value(),
    }
}
