//! Kernel expansions `w = s · Σᵢ βᵢ Φ(pᵢ)` with a global scale `s`.
//!
//! The `(1 − ηλ)` shrink of every SGD step only touches `s`, so an update
//! costs one coefficient write plus the O(S) prediction the caller already
//! needs. `‖w‖²` is tracked incrementally from that same prediction.
//!
//! Expansion points are keyed by content: two updates on equal vectors
//! accumulate into one coefficient, and points are never removed, so
//! positions in `points()` are stable for the life of the model.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::coverage::Geometry;
use crate::error::{invalid, AvmError, Result};
use crate::kernel::{KernelKind, KernelSpec};
use crate::loss::LossSpec;
use crate::sparse::SparseVector;

/// Below this the scale is folded into the coefficients.
const SCALE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct KernelModel {
    kernel: KernelSpec,
    scale: f64,
    points: Vec<Arc<SparseVector>>,
    coeffs: Vec<f64>,
    index: HashMap<Arc<SparseVector>, usize>,
    sq_norm: f64,
}

impl KernelModel {
    pub fn new(kernel: KernelSpec) -> Self {
        Self {
            kernel,
            scale: 1.0,
            points: Vec::new(),
            coeffs: Vec::new(),
            index: HashMap::new(),
            sq_norm: 0.0,
        }
    }

    /// Builds a model from effective coefficients; `‖w‖²` is computed from
    /// the Gram matrix.
    pub fn from_terms(
        kernel: KernelSpec,
        terms: impl IntoIterator<Item = (Arc<SparseVector>, f64)>,
    ) -> Self {
        let mut model = Self::new(kernel);
        for (p, c) in terms {
            let k = model.slot(&p);
            model.coeffs[k] += c;
        }
        model.sq_norm = model.gram_sq_norm();
        model
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Number of stored expansion points. Points whose coefficient has
    /// returned to zero still count; they occupy memory all the same.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of expansion points with a nonzero coefficient.
    pub fn support_size(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0.0).count()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    pub fn norm(&self) -> f64 {
        self.sq_norm.sqrt()
    }

    pub fn points(&self) -> &[Arc<SparseVector>] {
        &self.points
    }

    /// Effective coefficient `s · βᵢ` of the point at position `i`.
    pub fn effective_coeff(&self, i: usize) -> f64 {
        self.scale * self.coeffs[i]
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Arc<SparseVector>, f64)> + '_ {
        self.points
            .iter()
            .zip(&self.coeffs)
            .map(move |(p, c)| (p, self.scale * c))
    }

    /// Effective coefficient attached to `point`, or 0 if it is not an
    /// expansion point of this model.
    pub fn coeff_of(&self, point: &SparseVector) -> f64 {
        self.index
            .get(point)
            .map_or(0.0, |&k| self.scale * self.coeffs[k])
    }

    pub fn position_of(&self, point: &SparseVector) -> Option<usize> {
        self.index.get(point).copied()
    }

    /// `wᵀΦ(x)`; one kernel evaluation per nonzero coefficient.
    pub fn predict(&self, x: &SparseVector) -> f64 {
        let mut acc = 0.0;
        for (p, &c) in self.points.iter().zip(&self.coeffs) {
            if c != 0.0 {
                acc += c * self.kernel.eval(p, x);
            }
        }
        self.scale * acc
    }

    /// Ensures `point` is an expansion point (coefficient 0 if new) and
    /// returns its position.
    pub fn register(&mut self, point: &Arc<SparseVector>) -> usize {
        self.slot(point)
    }

    fn slot(&mut self, point: &Arc<SparseVector>) -> usize {
        if let Some(&k) = self.index.get(point.as_ref()) {
            return k;
        }
        let k = self.points.len();
        self.points.push(Arc::clone(point));
        self.coeffs.push(0.0);
        self.index.insert(Arc::clone(point), k);
        k
    }

    /// `w ← shrink · w + step · Φ(point)`.
    ///
    /// `f_point` must be `wᵀΦ(point)` before the update; it feeds the
    /// incremental norm `‖w'‖² = shrink²‖w‖² + 2·shrink·step·f_point + step²`.
    /// A zero shrink flushes every coefficient and resets the scale.
    /// No expansion point is created when `step == 0`.
    pub fn scaled_update(
        &mut self,
        shrink: f64,
        step: f64,
        point: &Arc<SparseVector>,
        f_point: f64,
    ) {
        debug_assert!(
            (0.0..=1.0).contains(&shrink),
            "shrink {shrink} outside [0, 1]"
        );
        let k_pp = self.kernel.profile(0.0);
        let sq =
            shrink * shrink * self.sq_norm + 2.0 * shrink * step * f_point + step * step * k_pp;
        if shrink == 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c = 0.0);
            self.scale = 1.0;
        } else {
            self.scale *= shrink;
        }
        if step != 0.0 {
            let k = self.slot(point);
            self.coeffs[k] += step / self.scale;
        }
        self.sq_norm = sq.max(0.0);
        if self.scale < SCALE_FLOOR {
            self.fold_scale();
        }
    }

    /// One SGD step `w ← (1 − ηλ) w − η α Φ(point)`.
    pub fn sgd_update(
        &mut self,
        eta: f64,
        lambda: f64,
        alpha: f64,
        point: &Arc<SparseVector>,
    ) -> Result<()> {
        let shrink = 1.0 - eta * lambda;
        if !(eta > 0.0 && lambda > 0.0 && (0.0..=1.0).contains(&shrink)) {
            return Err(invalid(format!(
                "sgd update needs η > 0, λ > 0 and ηλ ≤ 1 (η = {eta}, λ = {lambda})"
            )));
        }
        let f_point = self.predict(point);
        self.scaled_update(shrink, -eta * alpha, point, f_point);
        Ok(())
    }

    /// Radial projection onto the ball `‖w‖ ≤ radius`.
    pub fn project_ball(&mut self, radius: f64) {
        let norm = self.norm();
        if norm > radius {
            self.scale *= radius / norm;
            self.sq_norm = radius * radius;
            if self.scale < SCALE_FLOOR {
                self.fold_scale();
            }
        }
    }

    /// Multiplies the coefficients by the scale and resets the scale to 1.
    pub fn fold_scale(&mut self) {
        let s = self.scale;
        self.coeffs.iter_mut().for_each(|c| *c *= s);
        self.scale = 1.0;
    }

    /// `‖w‖²` from the Gram matrix, O(S²).
    pub fn gram_sq_norm(&self) -> f64 {
        let n = self.points.len();
        let mut acc = 0.0;
        for i in 0..n {
            let ci = self.coeffs[i];
            if ci == 0.0 {
                continue;
            }
            acc += ci * ci * self.kernel.profile(0.0);
            for j in 0..i {
                let cj = self.coeffs[j];
                if cj != 0.0 {
                    acc += 2.0 * ci * cj * self.kernel.eval(&self.points[i], &self.points[j]);
                }
            }
        }
        self.scale * self.scale * acc
    }

    /// Replaces the cached norm by its Gram recomputation.
    pub fn refresh_sq_norm(&mut self) {
        self.sq_norm = self.gram_sq_norm();
    }

    /// Regularized empirical risk `(λ/2)‖w‖² + mean loss`.
    pub fn objective<'a>(
        &self,
        samples: impl IntoIterator<Item = (&'a SparseVector, f64)>,
        lambda: f64,
        loss: &LossSpec,
    ) -> Result<f64> {
        let mut n = 0usize;
        let mut total = 0.0;
        for (x, y) in samples {
            total += loss.value(self.predict(x), y)?;
            n += 1;
        }
        if n == 0 {
            return Err(AvmError::EmptyDataset(
                "objective needs at least one sample",
            ));
        }
        Ok(0.5 * lambda * self.sq_norm + total / n as f64)
    }

    /// Writes the text snapshot. Coefficients are written with the scale
    /// folded in.
    pub fn write_snapshot<W: Write>(&self, mut w: W, header: &SnapshotHeader) -> Result<()> {
        writeln!(
            w,
            "avm-model v1 {} {:.16e} {} {:.16e} {}",
            self.kernel.kind.name(),
            self.kernel.gamma,
            header.geometry,
            header.delta,
            header.dim
        )?;
        for (i, p) in self.points.iter().enumerate() {
            write!(w, "core {}", i + 1)?;
            for (idx, v) in p.iter() {
                write!(w, " {idx}:{v:.16e}")?;
            }
            writeln!(w)?;
        }
        for i in 0..self.points.len() {
            writeln!(w, "coef {} {:.16e}", i + 1, self.effective_coeff(i))?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> Result<(SnapshotHeader, KernelModel)> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| AvmError::Snapshot("empty input".into()))??;
        let head: Vec<&str> = first.split_whitespace().collect();
        if head.len() != 7 || head[0] != "avm-model" || head[1] != "v1" {
            return Err(AvmError::Snapshot(format!("bad header '{first}'")));
        }
        if head[2] != KernelKind::Gaussian.name() {
            return Err(AvmError::Snapshot(format!("unknown kernel '{}'", head[2])));
        }
        let kernel = KernelSpec::gaussian(parse_num(head[3])?)?;
        let header = SnapshotHeader {
            geometry: Geometry::from_str(head[4])?,
            delta: parse_num(head[5])?,
            dim: parse_num(head[6])?,
        };

        let mut points: Vec<Arc<SparseVector>> = Vec::new();
        let mut coeffs: Vec<Option<f64>> = Vec::new();
        for line in lines {
            let line = line?;
            let mut fields = line.split_whitespace();
            let tag = match fields.next() {
                Some(t) => t,
                None => continue,
            };
            let pos: usize = parse_num(fields.next().unwrap_or(""))?;
            match tag {
                "core" => {
                    if pos != points.len() + 1 {
                        return Err(AvmError::Snapshot(format!("core {pos} out of order")));
                    }
                    let mut pairs = Vec::new();
                    for pair in fields {
                        let (i, v) = pair
                            .split_once(':')
                            .ok_or_else(|| AvmError::Snapshot(format!("bad pair '{pair}'")))?;
                        pairs.push((parse_num(i)?, parse_num(v)?));
                    }
                    points.push(Arc::new(SparseVector::from_pairs(&pairs)?));
                    coeffs.push(None);
                }
                "coef" => {
                    let slot = pos
                        .checked_sub(1)
                        .and_then(|k| coeffs.get_mut(k))
                        .ok_or_else(|| AvmError::Snapshot(format!("coef {pos} has no core")))?;
                    *slot = Some(parse_num(fields.next().unwrap_or(""))?);
                }
                other => return Err(AvmError::Snapshot(format!("unknown record '{other}'"))),
            }
        }
        let terms = points
            .into_iter()
            .zip(coeffs)
            .enumerate()
            .map(|(i, (p, c))| {
                c.map(|c| (p, c))
                    .ok_or_else(|| AvmError::Snapshot(format!("core {} has no coef", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((header, KernelModel::from_terms(kernel, terms)))
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| AvmError::Snapshot(format!("cannot parse number '{s}'")))
}

/// Coverage parameters recorded in a snapshot header.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub geometry: Geometry,
    pub delta: f64,
    pub dim: usize,
}

/// Running mean of the iterates `w_t` for `t ≥ start`.
///
/// Always feed the same `KernelModel`: positions are aligned with its
/// expansion points, and points first seen late enter with an implicit
/// historical coefficient of 0.
#[derive(Clone, Debug)]
pub struct AveragedModel {
    start: u64,
    count: u64,
    last_t: u64,
    points: Vec<Arc<SparseVector>>,
    means: Vec<f64>,
}

impl AveragedModel {
    /// Mean over all iterates.
    pub fn full() -> Self {
        Self::starting_at(1)
    }

    /// Mean over the last `alpha` fraction of `horizon` iterates, i.e.
    /// `t ≥ ⌈(1 − α)T⌉ + 1`.
    pub fn suffix(alpha: f64, horizon: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!(
                "suffix fraction must be in (0, 1], got {alpha}"
            )));
        }
        if horizon == 0 {
            return Err(invalid("suffix averaging needs a positive horizon"));
        }
        let skip = (1.0 - alpha) * horizon as f64;
        // absorb representation error such as (1 − 0.3) · 10 = 7.000000000000001
        let nearest = skip.round();
        let skip = if (skip - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            skip.ceil()
        };
        Ok(Self::starting_at(skip as u64 + 1))
    }

    pub fn starting_at(start: u64) -> Self {
        Self {
            start: start.max(1),
            count: 0,
            last_t: 0,
            points: Vec::new(),
            means: Vec::new(),
        }
    }

    pub fn start_iteration(&self) -> u64 {
        self.start
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Folds iterate `w_t` into the mean if `t ≥ start`.
    pub fn accumulate(&mut self, model: &KernelModel, t: u64) {
        debug_assert!(t > self.last_t, "iterations must be strictly increasing");
        self.last_t = t;
        if t < self.start {
            return;
        }
        for p in &model.points()[self.points.len()..] {
            self.points.push(Arc::clone(p));
            self.means.push(0.0);
        }
        self.count += 1;
        let n = self.count as f64;
        for (i, m) in self.means.iter_mut().enumerate() {
            *m += (model.effective_coeff(i) - *m) / n;
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn to_model(&self, kernel: KernelSpec) -> KernelModel {
        KernelModel::from_terms(
            kernel,
            self.points.iter().cloned().zip(self.means.iter().copied()),
        )
    }
}
