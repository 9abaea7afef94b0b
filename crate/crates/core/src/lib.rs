//! Approximation Vector Machines: kernel online learning where each update
//! is snapped to the core point of a δ-coverage cell, so the model size is
//! bounded by the number of cells rather than the stream length.

pub mod cli;
pub mod coverage;
pub mod data;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod learner;
pub mod loss;
pub mod model;
pub mod multiclass;
pub mod sparse;

pub use coverage::{CellAssignment, Coverage, Geometry};
pub use data::{normalize_minmax, parse_libsvm, Dataset, MinMaxTable, Task};
pub use error::{AvmError, Result};
pub use harness::{run_batch, run_stream, MetricsTrace, OnlineMetrics, RunOptions, RunReport};
pub use kernel::{KernelKind, KernelSpec};
pub use learner::{schedule_prob, Algorithm, Learner, LearnerConfig, OutputMode, StepInfo, YMax};
pub use loss::{LossKind, LossSpec};
pub use model::{AveragedModel, KernelModel, SnapshotHeader};
pub use multiclass::{MulticlassLearner, MulticlassModel, MulticlassStep};
pub use sparse::SparseVector;
