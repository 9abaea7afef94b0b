//! Sparse feature vectors stored as parallel sorted index/value arrays.
//!
//! All pairwise operations walk both index lists in a single merge-join;
//! an index absent from one side contributes an implicit zero.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, Default)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from `(index, value)` pairs given in strictly
    /// increasing index order.
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(invalid(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "feature indices must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite feature value {v}")));
        }
        Ok(Self { indices, values })
    }

    pub fn from_pairs(pairs: &[(u32, f64)]) -> Result<Self> {
        let (indices, values) = pairs.iter().copied().unzip();
        Self::new(indices, values)
    }

    /// Dense slice to sparse, with position `i` mapped to feature `i + 1`.
    /// Zero entries are dropped.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(i as u32 + 1);
                values.push(v);
            }
        }
        Self { indices, values }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn max_index(&self) -> u32 {
        self.indices.last().copied().unwrap_or(0)
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut acc = 0.0;
        merge(self, other, |a, b| acc += a * b);
        acc
    }

    /// Squared Euclidean distance. The per-index terms are squared
    /// differences, so swapping arguments gives a bit-identical result.
    pub fn sq_dist(&self, other: &SparseVector) -> f64 {
        let mut acc = 0.0;
        merge(self, other, |a, b| {
            let d = a - b;
            acc += d * d;
        });
        acc
    }

    pub fn linf_dist(&self, other: &SparseVector) -> f64 {
        let mut acc: f64 = 0.0;
        merge(self, other, |a, b| acc = acc.max((a - b).abs()));
        acc
    }

    pub(crate) fn map_values(&self, mut f: impl FnMut(u32, f64) -> f64) -> SparseVector {
        let values = self.iter().map(|(i, v)| f(i, v)).collect();
        SparseVector {
            indices: self.indices.clone(),
            values,
        }
    }
}

/// Calls `f(a_i, b_i)` for every index present in either vector.
#[inline]
fn merge(a: &SparseVector, b: &SparseVector, mut f: impl FnMut(f64, f64)) {
    let (ai, av) = (&a.indices, &a.values);
    let (bi, bv) = (&b.indices, &b.values);
    let (mut i, mut j) = (0, 0);
    while i < ai.len() && j < bi.len() {
        match ai[i].cmp(&bi[j]) {
            Ordering::Less => {
                f(av[i], 0.0);
                i += 1;
            }
            Ordering::Greater => {
                f(0.0, bv[j]);
                j += 1;
            }
            Ordering::Equal => {
                f(av[i], bv[j]);
                i += 1;
                j += 1;
            }
        }
    }
    for &v in &av[i..] {
        f(v, 0.0);
    }
    for &v in &bv[j..] {
        f(0.0, v);
    }
}

// Equality and hashing are on exact bit patterns so that vectors can key
// the expansion-point tables.
impl PartialEq for SparseVector {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for SparseVector {}

impl Hash for SparseVector {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.indices.hash(state);
        for v in &self.values {
            v.to_bits().hash(state);
        }
    }
}

/// LIBSVM-style `idx:val idx:val` rendering.
impl fmt::Display for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (i, v)) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}:{v}")?;
        }
        Ok(())
    }
}
