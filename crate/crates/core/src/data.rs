//! LIBSVM text datasets.
//!
//! Each line is `<label> <idx>:<val> ...` with strictly increasing 1-based
//! indices. Blank lines and `#` comments are skipped; CRLF is accepted.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, AvmError, Result};
use crate::sparse::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Binary,
    Multiclass,
    Regression,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
            Task::Regression => "regression",
        })
    }
}

impl FromStr for Task {
    type Err = AvmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            "regression" => Ok(Task::Regression),
            other => Err(invalid(format!("unknown task '{other}'"))),
        }
    }
}

/// Parsed samples with labels mapped to their internal form:
/// ±1 for binary, 1..=m for multiclass, identity for regression.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub task: Task,
    pub features: Vec<Arc<SparseVector>>,
    pub labels: Vec<f64>,
    /// Largest feature index seen (or set by the caller).
    pub dim: usize,
    /// Multiclass raw label names in first-seen order; class k is
    /// `class_names[k - 1]`.
    pub class_names: Vec<String>,
    /// Source line of each sample, for diagnostics.
    pub lines: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Arc<SparseVector>, f64)> + '_ {
        self.features.iter().zip(self.labels.iter().copied())
    }

    pub fn load(path: impl AsRef<Path>, task: Task) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        parse_libsvm(BufReader::new(file), task)
    }

    /// Parses a second file (e.g. a test split) reusing this dataset's
    /// multiclass label mapping.
    pub fn load_companion(&self, path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        parse_with_classes(BufReader::new(file), self.task, self.class_names.clone())
    }

    /// Writes LIBSVM text using the internal labels.
    pub fn write_libsvm<W: Write>(&self, mut w: W) -> Result<()> {
        for (x, y) in self.iter() {
            match self.task {
                Task::Multiclass => write!(w, "{}", self.class_names[y as usize - 1])?,
                _ => write!(w, "{y}")?,
            }
            for (i, v) in x.iter() {
                write!(w, " {i}:{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Fisher–Yates permutation driven by a seeded generator.
    pub fn shuffle(&self, seed: u64) -> Dataset {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.select(&order)
    }

    pub fn select(&self, order: &[usize]) -> Dataset {
        Dataset {
            task: self.task,
            features: order
                .iter()
                .map(|&i| Arc::clone(&self.features[i]))
                .collect(),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            class_names: self.class_names.clone(),
            lines: order.iter().map(|&i| self.lines[i]).collect(),
        }
    }
}

pub fn parse_libsvm<R: BufRead>(reader: R, task: Task) -> Result<Dataset> {
    parse_with_classes(reader, task, Vec::new())
}

fn parse_with_classes<R: BufRead>(
    reader: R,
    task: Task,
    class_names: Vec<String>,
) -> Result<Dataset> {
    let mut classes: HashMap<String, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i + 1))
        .collect();
    let mut ds = Dataset {
        task,
        features: Vec::new(),
        labels: Vec::new(),
        dim: 0,
        class_names,
        lines: Vec::new(),
    };
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut fields = body.split_ascii_whitespace();
        let raw = fields.next().unwrap_or_default();
        let label = match task {
            Task::Binary => binary_label(raw, lineno)?,
            Task::Regression => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AvmError::Label {
                    line: lineno,
                    label: raw.to_string(),
                    msg: "not a finite number".into(),
                })?,
            Task::Multiclass => {
                let next = classes.len() + 1;
                let k = *classes.entry(raw.to_string()).or_insert_with(|| {
                    ds.class_names.push(raw.to_string());
                    next
                });
                k as f64
            }
        };
        indices.clear();
        values.clear();
        for pair in fields {
            let (i, v) = pair.split_once(':').ok_or_else(|| AvmError::Parse {
                line: lineno,
                msg: format!("expected idx:val, got '{pair}'"),
            })?;
            let i: u32 = i.parse().map_err(|_| AvmError::Parse {
                line: lineno,
                msg: format!("bad feature index '{i}'"),
            })?;
            let v: f64 = v.parse().map_err(|_| AvmError::Parse {
                line: lineno,
                msg: format!("bad feature value '{v}'"),
            })?;
            if i == 0 {
                return Err(AvmError::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if let Some(&prev) = indices.last() {
                if i <= prev {
                    return Err(AvmError::Parse {
                        line: lineno,
                        msg: format!("indices not increasing ({prev} then {i})"),
                    });
                }
            }
            indices.push(i);
            values.push(v);
        }
        let x =
            SparseVector::new(indices.clone(), values.clone()).map_err(|e| AvmError::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        ds.dim = ds.dim.max(x.max_index() as usize);
        ds.features.push(Arc::new(x));
        ds.labels.push(label);
        ds.lines.push(lineno);
    }
    Ok(ds)
}

/// `+1`/`1` → +1 and `-1`/`0` → −1.
fn binary_label(raw: &str, line: usize) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(1.0) => Ok(1.0),
        Ok(v) if v == -1.0 || v == 0.0 => Ok(-1.0),
        _ => Err(AvmError::Label {
            line,
            label: raw.to_string(),
            msg: "binary labels must be +1/1 or -1/0".into(),
        }),
    }
}

/// Per-feature `[min, max]` of explicit entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MinMaxTable {
    ranges: HashMap<u32, (f64, f64)>,
}

impl MinMaxTable {
    pub fn fit(data: &Dataset) -> Self {
        let mut ranges: HashMap<u32, (f64, f64)> = HashMap::new();
        for x in &data.features {
            for (i, v) in x.iter() {
                let r = ranges.entry(i).or_insert((v, v));
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Self { ranges }
    }

    pub fn range(&self, index: u32) -> Option<(f64, f64)> {
        self.ranges.get(&index).copied()
    }

    /// Maps explicit entries to `(v − min)/(max − min)` clipped to [0, 1];
    /// constant or unseen features map to 0. Absent entries stay absent.
    pub fn apply(&self, data: &Dataset) -> Dataset {
        let features = data
            .features
            .iter()
            .map(|x| {
                Arc::new(x.map_values(|i, v| match self.ranges.get(&i) {
                    Some(&(lo, hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
                    _ => 0.0,
                }))
            })
            .collect();
        Dataset {
            features,
            ..data.clone()
        }
    }
}

pub fn normalize_minmax(data: &Dataset) -> (Dataset, MinMaxTable) {
    let table = MinMaxTable::fit(data);
    (table.apply(data), table)
}
