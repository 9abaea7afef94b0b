//! Acceptance criteria. Runs every criterion in sequence, prints one
//! PASS/FAIL line each, and exits non-zero if any failed.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use avm::data::{Dataset, Task};
use avm::harness::{run_batch, run_stream, RunOptions, TrainedModel};
use avm::{
    Algorithm, Coverage, Geometry, KernelSpec, Learner, LearnerConfig, LossKind, LossSpec,
    MinMaxTable, MulticlassLearner, OutputMode, SparseVector, YMax,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

type Metric = fn(&[f64], &[f64]) -> f64;
type Criterion = (u32, &'static str, fn() -> Outcome);
type Replay = Box<dyn Fn() -> avm::RunReport>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn arc(v: &[f64]) -> Arc<SparseVector> {
    Arc::new(SparseVector::from_dense(v))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn linf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn dense(v: &SparseVector, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (i, x) in v.iter() {
        out[i as usize - 1] = x;
    }
    out
}

fn gauss_kernel(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn synthetic(task: Task, rows: Vec<(Vec<f64>, f64)>) -> Dataset {
    let dim = rows.first().map_or(1, |r| r.0.len());
    let n = rows.len();
    let (features, labels) = rows.into_iter().map(|(x, y)| (arc(&x), y)).unzip();
    Dataset {
        task,
        features,
        labels,
        dim,
        class_names: if task == Task::Multiclass {
            vec!["1".into(), "2".into(), "3".into()]
        } else {
            Vec::new()
        },
        lines: (1..=n).collect(),
    }
}

// ---------------------------------------------------------------- 1

fn random_stream(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let kind = rng.random_range(0..4);
    let centers: Vec<Vec<f64>> = (0..rng.random_range(2..6))
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    (0..n)
        .map(|_| match kind {
            0 => (0..d).map(|_| rng.random::<f64>()).collect(),
            1 => (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
            2 => {
                let c = &centers[rng.random_range(0..centers.len())];
                c.iter()
                    .map(|m| m + 0.3 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            _ => (0..d)
                .map(|_| if rng.random_bool(0.15) { 1.0 } else { 0.0 })
                .collect(),
        })
        .collect()
}

fn median_pairwise(points: &[Vec<f64>], metric: Metric) -> f64 {
    let m = points.len().min(40);
    let mut ds = Vec::new();
    for i in 0..m {
        for j in 0..i {
            ds.push(metric(&points[i], &points[j]));
        }
    }
    median(&mut ds).max(1e-3)
}

fn check_coverage(points: &[Vec<f64>], geometry: Geometry, delta: f64) -> Result<usize, String> {
    let d = points[0].len();
    let mut cov = Coverage::new(geometry, delta, d).map_err(|e| e.to_string())?;
    // sphere compares squared ℓ₂ against (δ/2)²; rect compares ∞-norm against δ/√d
    let (metric, limit): (Metric, f64) = match geometry {
        Geometry::Sphere => (sq_dist, (delta / 2.0) * (delta / 2.0)),
        Geometry::Rect => (linf_dist, delta / (d as f64).sqrt()),
    };
    let mut cores: Vec<Vec<f64>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let a = cov.assign(&arc(p));
        if a.is_new {
            if a.cell_index != cores.len() + 1 {
                return Err(format!("point {i}: new cell index {}", a.cell_index));
            }
            if let Some(c) = cores.iter().position(|c| metric(p, c) < limit) {
                return Err(format!(
                    "point {i}: new cell although core {} covers it",
                    c + 1
                ));
            }
            cores.push(p.clone());
        } else {
            let c = &cores[a.cell_index - 1];
            if metric(p, c) >= limit {
                return Err(format!("point {i}: assigned outside cell {}", a.cell_index));
            }
        }
    }
    for (i, c) in cov.cores().iter().enumerate() {
        if dense(c, d) != cores[i] {
            return Err(format!("core {} differs from its founding point", i + 1));
        }
    }
    for i in 0..cores.len() {
        for j in 0..i {
            if metric(&cores[i], &cores[j]) < limit {
                return Err(format!(
                    "cores {} and {} closer than the cell radius",
                    j + 1,
                    i + 1
                ));
            }
        }
    }
    Ok(cores.len())
}

fn criterion_1() -> Outcome {
    let mut violations = Vec::new();
    let mut total_points = 0usize;
    let mut total_cells = 0usize;
    for s in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + s);
        let d = rng.random_range(1..=50);
        let n = (10f64.powf(rng.random_range(2.0..4.0))).round() as usize;
        let points = random_stream(&mut rng, n, d);
        total_points += n;
        let sphere_delta = 2.0
            * median_pairwise(&points, |a, b| sq_dist(a, b).sqrt())
            * rng.random_range(0.75..1.5);
        let rect_delta =
            (d as f64).sqrt() * median_pairwise(&points, linf_dist) * rng.random_range(0.75..1.5);
        for (g, delta) in [
            (Geometry::Sphere, sphere_delta),
            (Geometry::Rect, rect_delta),
        ] {
            match check_coverage(&points, g, delta) {
                Ok(m) => total_cells += m,
                Err(e) => violations.push(format!("stream {s} {g}: {e}")),
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "400 coverages over {total_points} points, {total_cells} cells, {} violations{}",
            violations.len(),
            violations
                .first()
                .map(|v| format!(" (first: {v})"))
                .unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Dense kernel SGD with one coefficient per step and no scale trick.
struct SgdOracle {
    gamma: f64,
    lambda: f64,
    kind: LossKind,
    tau: f64,
    epsilon: f64,
    points: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    t: u64,
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SgdOracle {
    fn predict(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.coeffs)
            .map(|(p, c)| c * gauss_kernel(self.gamma, p, x))
            .sum()
    }

    fn alpha(&self, f: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Hinge => {
                if y * f <= 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            LossKind::Logistic => -y / (1.0 + (y * f).exp()),
            LossKind::SmoothHinge => {
                let m = y * f;
                if m > 1.0 {
                    0.0
                } else if m < 1.0 - self.tau {
                    -y
                } else {
                    -y * (1.0 - m) / self.tau
                }
            }
            LossKind::L1 => sign0(f - y),
            LossKind::L2 => f - y,
            LossKind::EpsInsensitive => {
                if (y - f).abs() > self.epsilon {
                    sign0(f - y)
                } else {
                    0.0
                }
            }
        }
    }

    fn step(&mut self, x: &[f64], y: f64) {
        self.t += 1;
        let t = self.t as f64;
        let a = self.alpha(self.predict(x), y);
        let shrink = 1.0 - 1.0 / t;
        self.coeffs.iter_mut().for_each(|c| *c *= shrink);
        self.points.push(x.to_vec());
        self.coeffs.push(-a / (self.lambda * t));
    }
}

fn loss_for(kind: LossKind, tau: f64, epsilon: f64) -> LossSpec {
    match kind {
        LossKind::Hinge => LossSpec::hinge(),
        LossKind::Logistic => LossSpec::logistic(),
        LossKind::SmoothHinge => LossSpec::smooth_hinge(tau).unwrap(),
        LossKind::L1 => LossSpec::l1(),
        LossKind::L2 => LossSpec::l2(),
        LossKind::EpsInsensitive => LossSpec::eps_insensitive(epsilon).unwrap(),
    }
}

fn labelled_stream(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    kind: LossKind,
) -> Vec<(Vec<f64>, f64)> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let s = x[0].sin() + 0.3 * rng.sample::<f64, _>(StandardNormal);
            let y = if kind.is_classification() {
                if s >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                s.clamp(-1.0, 1.0)
            };
            (x, y)
        })
        .collect()
}

fn relative_discrepancy(learner: &Learner, oracle: &SgdOracle) -> f64 {
    let scale = oracle
        .coeffs
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(1e-300);
    let model = learner.model();
    let mut worst = 0.0f64;
    for (p, c) in oracle.points.iter().zip(&oracle.coeffs) {
        worst = worst.max((model.coeff_of(&SparseVector::from_dense(p)) - c).abs());
    }
    worst / scale
}

fn criterion_2() -> Outcome {
    let mut worst_rel = 0.0f64;
    let mut identical = true;
    let mut mismatch = String::new();
    for s in 0..100u64 {
        for kind in LossKind::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(2_000 + s);
            let d = rng.random_range(1..=5);
            let gamma = rng.random_range(0.1..2.0);
            // λ > 1 for ℓ₂ keeps the ball projection out of the comparison
            let lambda = if kind == LossKind::L2 {
                rng.random_range(1.5..4.0)
            } else {
                10f64.powf(rng.random_range(-2.0..0.0))
            };
            let tau = rng.random_range(0.2..1.5);
            let epsilon = rng.random_range(0.05..0.5);
            let stream = labelled_stream(&mut rng, 1_000, d, kind);
            let loss = loss_for(kind, tau, epsilon);
            let kernel = KernelSpec::gaussian(gamma).unwrap();

            let mut oracle = SgdOracle {
                gamma,
                lambda,
                kind,
                tau,
                epsilon,
                points: Vec::new(),
                coeffs: Vec::new(),
                t: 0,
            };
            let mut never = LearnerConfig::new(kernel, lambda, 1.0);
            never.loss = loss;
            never.dim = d;
            never.beta = f64::INFINITY;
            never.seed = s;
            let mut avm_never = Learner::new(never.clone(), None).unwrap();

            let min_dist = {
                let mut m = f64::INFINITY;
                for i in 0..stream.len() {
                    for j in 0..i {
                        m = m.min(sq_dist(&stream[i].0, &stream[j].0));
                    }
                }
                m.sqrt()
            };
            let mut always = never.clone();
            always.beta = 0.0;
            always.delta = 0.9 * min_dist;
            let mut avm_always = Learner::new(always, None).unwrap();
            let mut sgd_cfg = never.clone();
            sgd_cfg.algorithm = Algorithm::Sgd;
            let mut sgd = Learner::new(sgd_cfg, None).unwrap();

            for (x, y) in &stream {
                let xa = arc(x);
                oracle.step(x, *y);
                avm_never.step(&xa, *y).unwrap();
                let a = avm_always.step(&xa, *y).unwrap();
                let b = sgd.step(&xa, *y).unwrap();
                if a.score.to_bits() != b.score.to_bits() && identical {
                    identical = false;
                    mismatch = format!("stream {s} {kind}: score {} vs {}", a.score, b.score);
                }
            }
            worst_rel = worst_rel.max(relative_discrepancy(&avm_never, &oracle));
            worst_rel = worst_rel.max(relative_discrepancy(&avm_always, &oracle));
            // AVM keeps zero-coefficient cell entries that SGD never stores
            let (ma, mb) = (avm_always.model(), sgd.model());
            let same = ma
                .points()
                .iter()
                .chain(mb.points())
                .all(|p| ma.coeff_of(p).to_bits() == mb.coeff_of(p).to_bits());
            if !same && identical {
                identical = false;
                mismatch = format!("stream {s} {kind}: final models differ");
            }
        }
    }
    outcome(
        worst_rel <= 1e-12 && identical,
        format!(
            "600 runs; max relative coefficient discrepancy {worst_rel:.3e} (limit 1e-12); \
             p=1 with δ below min distance {}{}",
            if identical {
                "bit-identical to SGD"
            } else {
                "differs from SGD"
            },
            if mismatch.is_empty() {
                String::new()
            } else {
                format!(" ({mismatch})")
            }
        ),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for kind in [LossKind::Logistic, LossKind::L2, LossKind::SmoothHinge] {
        let mut n = 0;
        while n < 1_000 {
            let tau = rng.random_range(0.1..2.0);
            let loss = loss_for(kind, tau, 0.1);
            let f = rng.random_range(-5.0..5.0);
            let y: f64 = if kind.is_classification() {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.random_range(-3.0..3.0)
            };
            if kind == LossKind::SmoothHinge {
                let m = y * f;
                if (m - 1.0).abs() < 1e-3 || (m - (1.0 - tau)).abs() < 1e-3 {
                    continue;
                }
            }
            let fd = (loss.value(f + h, y).unwrap() - loss.value(f - h, y).unwrap()) / (2.0 * h);
            worst = worst.max((fd - loss.grad_scalar(f, y).unwrap()).abs());
            n += 1;
        }
        checked += n;
    }
    outcome(
        worst <= 1e-6,
        format!("{checked} points; max |finite difference − α| = {worst:.3e} (limit 1e-6)"),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let y_max = 1.0f64;
    let mut steps = 0u64;
    let mut violations = 0u64;
    let mut worst_ratio = 0.0f64;
    for (li, &lambda) in [2.0, 5.0, 0.1, 1.0].iter().enumerate() {
        let bound = if lambda > 1.0 {
            y_max / (lambda - 1.0)
        } else {
            y_max / lambda.sqrt() * (1.0 + 1e-12)
        };
        for s in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(4_000 + 100 * li as u64 + s);
            let d = rng.random_range(1..=6);
            let stream = labelled_stream(&mut rng, 2_500, d, LossKind::L2);
            let mut cfg = LearnerConfig::new(
                KernelSpec::gaussian(rng.random_range(0.1..2.0)).unwrap(),
                lambda,
                rng.random_range(0.05..2.0),
            );
            cfg.loss = LossSpec::l2();
            cfg.dim = d;
            cfg.beta = [0.0, 3.0, f64::INFINITY][s as usize % 3];
            cfg.seed = s;
            cfg.y_max = YMax::Fixed(y_max);
            let mut learner = Learner::new(cfg, None).unwrap();
            for (i, (x, y)) in stream.iter().enumerate() {
                learner.step(&arc(x), *y).unwrap();
                steps += 1;
                let mut norm = learner.model().norm();
                if i % 100 == 99 {
                    norm = norm.max(learner.model().gram_sq_norm().max(0.0).sqrt());
                }
                worst_ratio = worst_ratio.max(norm / bound);
                if norm > bound {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0 && steps >= 100_000,
        format!(
            "{steps} steps over λ ∈ {{2, 5, 0.1, 1}}; {violations} violations; max ‖w‖/bound = {worst_ratio:.6}"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let mut prefix_violations = 0u64;
    for s in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5_000 + s);
        let d = rng.random_range(1..=4);
        let kind = LossKind::ALL[s as usize % 6];
        let stream = labelled_stream(&mut rng, 2_000, d, kind);
        let mut cfg = LearnerConfig::new(
            KernelSpec::gaussian(0.5).unwrap(),
            rng.random_range(0.01..1.0),
            rng.random_range(0.2..1.5),
        );
        cfg.loss = loss_for(kind, 0.5, 0.1);
        cfg.dim = d;
        cfg.geometry = if s % 2 == 0 {
            Geometry::Sphere
        } else {
            Geometry::Rect
        };
        let mut learner = Learner::new(cfg, None).unwrap();
        for (x, y) in &stream {
            learner.step(&arc(x), *y).unwrap();
            if learner.model_size() != learner.cells() {
                prefix_violations += 1;
            }
        }
    }

    let horizon = 10_000u64;
    let beta = 5.0;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (mut sizes, mut cells) = (Vec::new(), Vec::new());
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
        let mut cfg = LearnerConfig::new(KernelSpec::gaussian(0.5).unwrap(), 1e-3, 0.5);
        cfg.dim = 2;
        cfg.beta = beta;
        cfg.rho = 1.0;
        cfg.seed = seed;
        let mut learner = Learner::new(cfg, Some(horizon)).unwrap();
        for _ in 0..horizon {
            let x = [normal.sample(&mut rng), normal.sample(&mut rng)];
            let y = if x[0] + x[1] + 0.5 * normal.sample(&mut rng) >= 0.0 {
                1.0
            } else {
                -1.0
            };
            learner.step(&arc(&x), y).unwrap();
        }
        sizes.push(learner.model_size() as f64);
        cells.push(learner.cells() as f64);
    }
    let n = sizes.len() as f64;
    let mean_s = sizes.iter().sum::<f64>() / n;
    let mean_m = cells.iter().sum::<f64>() / n;
    let var = sizes.iter().map(|s| (s - mean_s).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let limit = beta * ((horizon as f64).ln() + 1.0) + mean_m + 3.0 * stderr;
    outcome(
        prefix_violations == 0 && mean_s <= limit,
        format!(
            "β=0: {prefix_violations} prefixes with S≠M over 50 streams; β=5: mean S_T {mean_s:.2} \
             ≤ {limit:.2} (mean M_T {mean_m:.2}, stderr {stderr:.2})"
        ),
    )
}

// ---------------------------------------------------------------- 6, 7

fn a9a_config(seed: u64) -> LearnerConfig {
    let mut cfg = LearnerConfig::new(KernelSpec::gaussian(0.125).unwrap(), 1e-4, 7.0);
    cfg.dim = 123;
    cfg.seed = seed;
    cfg
}

fn load_a9a() -> Result<(Dataset, Dataset), String> {
    let dir = data_dir();
    let train = Dataset::load(dir.join("a9a"), Task::Binary).map_err(|e| format!("a9a: {e}"))?;
    let test = train
        .load_companion(dir.join("a9a.t"))
        .map_err(|e| format!("a9a.t: {e}"))?;
    Ok((train, test))
}

fn criterion_6() -> Outcome {
    let (train, _) = match load_a9a() {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("dataset unavailable: {e}")),
    };
    let started = Instant::now();
    let report = run_stream(&a9a_config(1), &train, RunOptions::default()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let s = &report.trace.summary;
    outcome(
        s.metric <= 0.195 && (90..=220).contains(&s.model_size) && secs < 60.0,
        format!(
            "mistake rate {:.2}% (≤ 19.5%), S_T {} (90..=220), {secs:.1}s (< 60s)",
            100.0 * s.metric,
            s.model_size
        ),
    )
}

fn criterion_7() -> Outcome {
    let (train, test) = match load_a9a() {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("dataset unavailable: {e}")),
    };
    let started = Instant::now();
    let iters = 5 * train.len() as u64;
    let report = run_batch(&a9a_config(1), &train, &test, iters, RunOptions::default()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let s = &report.trace.summary;
    let acc = s.test_metric.unwrap_or(0.0);
    outcome(
        acc >= 0.82 && (90..=220).contains(&s.model_size) && secs < 120.0,
        format!(
            "T={iters}, test accuracy {:.2}% (≥ 82%), S {} (90..=220), {secs:.1}s (< 120s)",
            100.0 * acc,
            s.model_size
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let dir = std::env::var_os("AVM_CODRNA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(data_dir);
    let path = dir.join("cod-rna");
    let train = match Dataset::load(&path, Task::Binary) {
        Ok(d) => d,
        Err(e) => {
            return outcome(
                false,
                format!(
                    "dataset unavailable at {} ({e}); set AVM_CODRNA_DIR",
                    path.display()
                ),
            )
        }
    };
    let train = MinMaxTable::fit(&train).apply(&train);
    let mut cfg = LearnerConfig::new(KernelSpec::gaussian(1.0).unwrap(), 1e-4, 1.0);
    cfg.dim = train.dim.max(1);
    cfg.seed = 1;
    let started = Instant::now();
    let report = run_stream(&cfg, &train, RunOptions::default()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let s = &report.trace.summary;
    outcome(
        s.metric <= 0.075 && (250..=700).contains(&s.model_size) && secs < 120.0,
        format!(
            "mistake rate {:.2}% (≤ 7.5%), S_T {} (250..=700), {secs:.1}s (< 120s)",
            100.0 * s.metric,
            s.model_size
        ),
    )
}

// ---------------------------------------------------------------- 9

fn two_clusters(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let rows = (0..n)
        .map(|_| {
            let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let x = vec![y + normal.sample(&mut rng), y + normal.sample(&mut rng)];
            (x, y)
        })
        .collect();
    synthetic(Task::Binary, rows)
}

fn averaged_objective(cfg: &LearnerConfig, data: &Dataset, iters: u64) -> f64 {
    let report = run_batch(cfg, data, data, iters, RunOptions::default()).unwrap();
    let TrainedModel::Scalar(model) = report.model else {
        unreachable!()
    };
    model
        .objective(data.iter().map(|(x, y)| (&**x, y)), cfg.lambda, &cfg.loss)
        .unwrap()
}

fn criterion_9() -> Outcome {
    let data = two_clusters(5_000, 9);
    let base = |seed: u64, delta: f64| {
        let mut cfg = LearnerConfig::new(KernelSpec::gaussian(1.0).unwrap(), 0.01, delta);
        cfg.dim = 2;
        cfg.output = OutputMode::Average;
        cfg.seed = seed;
        cfg
    };
    let seeds = 0..20u64;

    let mut short: Vec<f64> = seeds
        .clone()
        .map(|s| averaged_objective(&base(s, 0.5), &data, 100))
        .collect();
    let mut long: Vec<f64> = seeds
        .clone()
        .map(|s| averaged_objective(&base(s, 0.5), &data, 10_000))
        .collect();
    let (m_short, m_long) = (median(&mut short), median(&mut long));

    let gap_iters = 2_000;
    let sgd: Vec<f64> = seeds
        .clone()
        .map(|s| {
            let mut cfg = base(s, 0.5);
            cfg.algorithm = Algorithm::Sgd;
            averaged_objective(&cfg, &data, gap_iters)
        })
        .collect();
    let mut gaps = Vec::new();
    for delta in [0.1, 0.5, 1.0, 2.0] {
        let mut g: Vec<f64> = seeds
            .clone()
            .map(|s| averaged_objective(&base(s, delta), &data, gap_iters) - sgd[s as usize])
            .collect();
        gaps.push(median(&mut g));
    }
    let monotone = gaps.windows(2).all(|w| w[1] >= w[0]);
    outcome(
        m_long < m_short && monotone,
        format!(
            "median objective T=1e2 {m_short:.4} → T=1e4 {m_long:.4}; median gap over δ=0.1,0.5,1,2: \
             [{}]",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 10

fn three_classes(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.4).unwrap();
    let rows = (0..n)
        .map(|_| {
            let c = rng.random_range(0..3usize);
            let angle = c as f64 * 2.0 * std::f64::consts::PI / 3.0;
            let x = vec![
                3.0 * angle.cos() + normal.sample(&mut rng),
                3.0 * angle.sin() + normal.sample(&mut rng),
            ];
            (x, (c + 1) as f64)
        })
        .collect();
    synthetic(Task::Multiclass, rows)
}

fn criterion_10() -> Outcome {
    let data = three_classes(10_000, 10);
    let mut cfg = LearnerConfig::new(KernelSpec::gaussian(0.5).unwrap(), 1e-3, 0.5);
    cfg.dim = 2;
    let mut learner = MulticlassLearner::new(cfg, 3, Some(data.len() as u64)).unwrap();
    let mut mistakes = 0usize;
    let mut broken = 0usize;
    let mut moved = 0usize;
    for (x, y) in data.iter() {
        let y = y as usize;
        let before: HashMap<Arc<SparseVector>, Vec<f64>> = {
            let m = learner.model();
            (0..m.len())
                .map(|k| (Arc::clone(&m.points()[k]), m.raw_row(k).to_vec()))
                .collect()
        };
        let step = learner.step(x, y).unwrap();
        if step.predicted != y {
            mistakes += 1;
        }
        let m = learner.model();
        let mut changed_rows = 0;
        for k in 0..m.len() {
            let after = m.raw_row(k);
            let prior = before
                .get(&m.points()[k])
                .cloned()
                .unwrap_or_else(|| vec![0.0; 3]);
            if after
                .iter()
                .zip(&prior)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            {
                continue;
            }
            changed_rows += 1;
            let z = step.competitor;
            let q = step.transfer;
            let ok = after[y - 1].to_bits() == (prior[y - 1] + q).to_bits()
                && after[z - 1].to_bits() == (prior[z - 1] - q).to_bits()
                && (1..=3)
                    .filter(|&j| j != y && j != z)
                    .all(|j| after[j - 1].to_bits() == prior[j - 1].to_bits());
            if !ok {
                broken += 1;
            }
        }
        if changed_rows > 1 || (changed_rows == 0 && step.transfer != 0.0) {
            broken += 1;
        }
        if step.transfer != 0.0 {
            moved += 1;
        }
    }
    let rate = mistakes as f64 / data.len() as f64;
    outcome(
        rate <= 0.05 && broken == 0,
        format!(
            "mistake rate {:.2}% (≤ 5%); {moved} transfers, {broken} conservation violations",
            100.0 * rate
        ),
    )
}

// ---------------------------------------------------------------- 11

fn normalized_trace(report: &avm::RunReport) -> String {
    let mut buf = Vec::new();
    report.trace.write_jsonl(&mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("elapsed_s");
                o.remove("kevals");
            }
            v.to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_11() -> Outcome {
    let mut runs: Vec<(&str, Replay)> = Vec::new();
    let clusters = two_clusters(2_000, 11);
    let multi = three_classes(2_000, 11);
    runs.push((
        "binary batch β=5",
        Box::new(move || {
            let mut cfg = LearnerConfig::new(KernelSpec::gaussian(1.0).unwrap(), 0.01, 0.5);
            cfg.dim = 2;
            cfg.beta = 5.0;
            cfg.seed = 7;
            cfg.output = OutputMode::Suffix(0.5);
            run_batch(&cfg, &clusters, &clusters, 5_000, RunOptions::default()).unwrap()
        }),
    ));
    runs.push((
        "multiclass online β=3",
        Box::new(move || {
            let mut cfg = LearnerConfig::new(KernelSpec::gaussian(0.5).unwrap(), 1e-3, 0.5);
            cfg.dim = 2;
            cfg.beta = 3.0;
            cfg.seed = 7;
            run_stream(&cfg, &multi, RunOptions::default()).unwrap()
        }),
    ));
    if let Ok((train, _)) = load_a9a() {
        runs.push((
            "a9a online",
            Box::new(move || run_stream(&a9a_config(1), &train, RunOptions::default()).unwrap()),
        ));
    }
    let mut differing = Vec::new();
    for (name, run) in &runs {
        if normalized_trace(&run()) != normalized_trace(&run()) {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} configurations repeated; differing traces: {}",
            runs.len(),
            if differing.is_empty() {
                "none".to_string()
            } else {
                differing.join(", ")
            }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "coverage geometry", criterion_1),
        (2, "SGD equivalence", criterion_2),
        (3, "gradient checks", criterion_3),
        (4, "norm bounds", criterion_4),
        (5, "model-size bound", criterion_5),
        (6, "a9a online", criterion_6),
        (7, "a9a batch", criterion_7),
        (8, "cod-rna online", criterion_8),
        (9, "objective trend and gap", criterion_9),
        (10, "multiclass sanity", criterion_10),
        (11, "determinism", criterion_11),
    ];
    let filter: Vec<u32> = std::env::var("AVM_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = Vec::new();
    let mut err = std::io::stderr().lock();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let result = run();
        let secs = started.elapsed().as_secs_f64();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        writeln!(
            err,
            "criterion {id:>2} [{tag}] {name}: {} ({secs:.1}s)",
            result.detail
        )
        .unwrap();
        if !result.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        writeln!(err, "acceptance: all criteria passed").unwrap();
    } else {
        writeln!(err, "acceptance: failed criteria {failed:?}").unwrap();
        std::process::exit(1);
    }
}
