//! On-the-fly δ-coverages of the input domain.
//!
//! Each incoming instance either falls inside an existing cell, or becomes
//! the core point of a new one. Cells are open balls of radius δ/2
//! (`Geometry::Sphere`) or open ∞-norm boxes of half-width δ/√d
//! (`Geometry::Rect`). Core points are append-only and their 1-based
//! indices never change.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, AvmError, Result};
use crate::sparse::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Sphere,
    Rect,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Sphere => "sphere",
            Geometry::Rect => "rect",
        })
    }
}

impl FromStr for Geometry {
    type Err = AvmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Geometry::Sphere),
            "rect" => Ok(Geometry::Rect),
            other => Err(invalid(format!("unknown coverage geometry '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellAssignment {
    /// 1-based index of the cell's core point.
    pub cell_index: usize,
    /// The instance opened this cell and is its core point.
    pub is_new: bool,
}

#[derive(Clone, Debug)]
pub struct Coverage {
    geometry: Geometry,
    delta: f64,
    dim: usize,
    half_width: f64,
    cores: Vec<Arc<SparseVector>>,
    /// Squared sphere radius (δ/2)²; unused for rect.
    sq_radius: f64,
}

impl Coverage {
    /// `dim` is only used by the rect geometry, whose half-width is δ/√dim.
    pub fn new(geometry: Geometry, delta: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!(
                "coverage delta must be positive, got {delta}"
            )));
        }
        if dim == 0 {
            return Err(invalid("coverage dimension must be positive"));
        }
        let half_width = match geometry {
            Geometry::Sphere => delta / 2.0,
            Geometry::Rect => delta / (dim as f64).sqrt(),
        };
        Ok(Self {
            geometry,
            delta,
            dim,
            half_width,
            cores: Vec::new(),
            sq_radius: (delta / 2.0) * (delta / 2.0),
        })
    }

    pub fn sphere(delta: f64, dim: usize) -> Result<Self> {
        Self::new(Geometry::Sphere, delta, dim)
    }

    pub fn rect(delta: f64, dim: usize) -> Result<Self> {
        Self::new(Geometry::Rect, delta, dim)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of cells created so far (M_t).
    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn cores(&self) -> &[Arc<SparseVector>] {
        &self.cores
    }

    pub fn core_point(&self, index: usize) -> Result<&SparseVector> {
        self.core_arc(index).map(|c| c.as_ref())
    }

    pub(crate) fn core_arc(&self, index: usize) -> Result<&Arc<SparseVector>> {
        if index == 0 || index > self.cores.len() {
            return Err(AvmError::IndexOutOfRange {
                index,
                len: self.cores.len(),
            });
        }
        Ok(&self.cores[index - 1])
    }

    pub fn assign(&mut self, x: &Arc<SparseVector>) -> CellAssignment {
        match self.geometry {
            Geometry::Sphere => self.assign_sphere(x),
            Geometry::Rect => self.assign_rect(x),
        }
    }

    /// Nearest core in ℓ₂ (lowest index on ties); a new cell is opened when
    /// that core is at distance ≥ δ/2.
    pub fn assign_sphere(&mut self, x: &Arc<SparseVector>) -> CellAssignment {
        let mut best = None;
        let mut best_d2 = f64::INFINITY;
        for (i, c) in self.cores.iter().enumerate() {
            let d2 = x.sq_dist(c);
            if d2 < best_d2 {
                best_d2 = d2;
                best = Some(i);
            }
        }
        match best {
            Some(i) if best_d2 < self.sq_radius => CellAssignment {
                cell_index: i + 1,
                is_new: false,
            },
            _ => self.push(x),
        }
    }

    /// First core in insertion order whose ∞-distance is below the
    /// half-width; otherwise a new cell.
    pub fn assign_rect(&mut self, x: &Arc<SparseVector>) -> CellAssignment {
        let a = self.half_width;
        match self.cores.iter().position(|c| x.linf_dist(c) < a) {
            Some(i) => CellAssignment {
                cell_index: i + 1,
                is_new: false,
            },
            None => self.push(x),
        }
    }

    fn push(&mut self, x: &Arc<SparseVector>) -> CellAssignment {
        self.cores.push(Arc::clone(x));
        CellAssignment {
            cell_index: self.cores.len(),
            is_new: true,
        }
    }
}
