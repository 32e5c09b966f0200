//! Synthetic regression problems, Monte-Carlo L2 errors, and the
//! error-versus-sample-size curve of the trained estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    predict_many, schedule, train, validate_theorem_conditions, ConditionReport, Constants, Dataset,
    TrainOptions,
};
use crate::net::Topology;

/// Built-in regression functions, all bounded and Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFn {
    /// `m = 0`.
    Zero,
    /// `1 + mean_j x_j / 2`.
    Affine,
    /// `prod_j sin(x_j)`.
    SinProduct,
    /// `min(1, mean_j x_j^2)`.
    ClippedQuadratic,
    /// `mean_j sin(2 clamp(x_j, -2, 2))`.
    ClampedSine,
}

impl TargetFn {
    pub fn eval(self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match self {
            TargetFn::Zero => 0.0,
            TargetFn::Affine => 1.0 + x.iter().sum::<f64>() / (2.0 * d),
            TargetFn::SinProduct => x.iter().map(|v| v.sin()).product(),
            TargetFn::ClippedQuadratic => (x.iter().map(|v| v * v).sum::<f64>() / d).min(1.0),
            TargetFn::ClampedSine => x.iter().map(|v| (2.0 * v.clamp(-2.0, 2.0)).sin()).sum::<f64>() / d,
        }
    }

    /// A Lipschitz constant with respect to the Euclidean norm.
    pub fn lipschitz(self, dim: usize) -> f64 {
        let d = dim as f64;
        match self {
            TargetFn::Zero => 0.0,
            TargetFn::Affine => 0.5 / d.sqrt(),
            TargetFn::SinProduct => d.sqrt(),
            TargetFn::ClippedQuadratic => 2.0 / d.sqrt(),
            TargetFn::ClampedSine => 2.0 / d.sqrt(),
        }
    }
}

/// Distribution of the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    /// Uniform on `[-half_width, half_width]^d`.
    Uniform { half_width: f64 },
    /// Independent `N(0, sd^2)` coordinates.
    Gaussian { sd: f64 },
    /// Equal mixture of `N(-offset, sd^2 I)` and `N(offset, sd^2 I)`.
    Mixture { offset: f64, sd: f64 },
}

impl Design {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Design::Uniform { half_width } => half_width > 0.0 && half_width.is_finite(),
            Design::Gaussian { sd } => sd > 0.0 && sd.is_finite(),
            Design::Mixture { offset, sd } => offset.is_finite() && sd > 0.0 && sd.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("design", format!("invalid parameters {self:?}")))
        }
    }

    /// `count` points, row-major.
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, count: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(dim * count);
        match *self {
            Design::Uniform { half_width } => {
                for _ in 0..dim * count {
                    out.push(rng.random_range(-half_width..=half_width));
                }
            }
            Design::Gaussian { sd } => {
                let normal = Normal::new(0.0, sd).expect("validated sd");
                for _ in 0..dim * count {
                    out.push(normal.sample(rng));
                }
            }
            Design::Mixture { offset, sd } => {
                let normal = Normal::new(0.0, sd).expect("validated sd");
                for _ in 0..count {
                    let center = if rng.random_bool(0.5) { offset } else { -offset };
                    for _ in 0..dim {
                        out.push(center + normal.sample(rng));
                    }
                }
            }
        }
        out
    }
}

/// A synthetic regression problem `Y = m(X) + sigma * N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub dim: usize,
    pub target: TargetFn,
    pub design: Design,
    #[serde(default)]
    pub noise_sd: f64,
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "must be >= 1"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::param("noise_sd", format!("must be >= 0, got {}", self.noise_sd)));
        }
        self.design.validate()
    }

    pub fn regression(&self, x: &[f64]) -> f64 {
        self.target.eval(x)
    }
}

/// Draws `n` i.i.d. pairs.
pub fn generate_dataset<R: Rng + ?Sized>(spec: &DataSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    let xs = spec.design.sample(spec.dim, n, rng);
    let ys = if spec.noise_sd > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sd).expect("validated sd");
        xs.chunks_exact(spec.dim)
            .map(|x| spec.regression(x) + noise.sample(rng))
            .collect()
    } else {
        xs.chunks_exact(spec.dim).map(|x| spec.regression(x)).collect()
    };
    Dataset::new(spec.dim, xs, ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub points: usize,
}

/// `(1/N) sum_j (predict(x_j) - truth(x_j))^2` over the row-major `points`.
///
/// `predict` maps a batch of points to predictions.
pub fn l2_error_mc(
    predict: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    truth: &dyn Fn(&[f64]) -> f64,
    points: &[f64],
    dim: usize,
) -> Result<McEstimate> {
    const CHUNK: usize = 8192;
    if dim == 0 || points.is_empty() || points.len() % dim != 0 {
        return Err(Error::param("N", "need at least one point of the right dimension"));
    }
    let count = points.len() / dim;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for chunk in points.chunks(CHUNK * dim) {
        let pred = predict(chunk)?;
        if pred.len() != chunk.len() / dim {
            return Err(Error::DimensionMismatch {
                expected: chunk.len() / dim,
                got: pred.len(),
            });
        }
        for (p, x) in pred.iter().zip(chunk.chunks_exact(dim)) {
            let e = (p - truth(x)).powi(2);
            sum += e;
            sum_sq += e * e;
        }
    }
    let nf = count as f64;
    let mean = sum / nf;
    let var = if count > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        points: count,
    })
}

/// Everything needed to reproduce an error curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub topology: Topology,
    pub constants: Constants,
    pub data: DataSpec,
    /// Strictly increasing sample sizes.
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub mc_points: usize,
    pub seed: u64,
}

/// What a seed drawn by [`derive_seed`] is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedPurpose {
    Data = 1,
    Init = 2,
    MonteCarlo = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one `(n, replicate, purpose)` cell, independent of which other
/// cells are run.
pub fn derive_seed(master: u64, n: usize, replicate: usize, purpose: SeedPurpose) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ n as u64);
    s = splitmix64(s ^ replicate as u64);
    splitmix64(s ^ purpose as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub n: usize,
    pub replicate: usize,
    pub l2_error: f64,
    pub l2_std_error: f64,
    pub initial_risk: f64,
    pub final_risk: f64,
    pub steps: u64,
}

/// Trains on a fresh dataset of size `n` and measures the L2 error.
pub fn run_replicate(cfg: &CurveConfig, n: usize, replicate: usize) -> Result<ReplicateResult> {
    let wrap = |e: Error| Error::RunFailed {
        n,
        replicate,
        source: Box::new(e),
    };
    let hp = schedule(n as f64, &cfg.constants, &cfg.topology).map_err(wrap)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, n, replicate, SeedPurpose::Data));
    let data = generate_dataset(&cfg.data, n, &mut data_rng).map_err(wrap)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, n, replicate, SeedPurpose::Init));
    let out = train(&data, &cfg.topology, &hp, &mut init_rng, TrainOptions::default()).map_err(wrap)?;
    let mut mc_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, n, replicate, SeedPurpose::MonteCarlo));
    let points = cfg.data.design.sample(cfg.data.dim, cfg.mc_points, &mut mc_rng);
    let spec = cfg.data;
    let est = l2_error_mc(
        &|xs| predict_many(&out.weights, &hp, xs),
        &|x| spec.regression(x),
        &points,
        cfg.data.dim,
    )
    .map_err(wrap)?;
    Ok(ReplicateResult {
        n,
        replicate,
        l2_error: est.mean,
        l2_std_error: est.std_error,
        initial_risk: out.trace.risks[0],
        final_risk: *out.trace.risks.last().expect("trace holds t_n + 1 risks"),
        steps: hp.steps,
    })
}

/// One row of the error curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: usize,
    pub replicates: usize,
    pub median_l2: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean_final_risk: f64,
    pub conditions_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    /// Sorted by `n`.
    pub rows: Vec<CurveRow>,
    /// Condition report per row.
    pub conditions: Vec<ConditionReport>,
    pub runs: Vec<ReplicateResult>,
}

impl CurveResult {
    /// Number of consecutive `n` where the median error goes up.
    pub fn inversions(&self) -> usize {
        self.rows
            .windows(2)
            .filter(|w| w[1].median_l2 > w[0].median_l2)
            .count()
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (N - 1) p`). `sorted` must be ascending and nonempty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn validate_curve(cfg: &CurveConfig) -> Result<()> {
    cfg.data.validate()?;
    if cfg.data.dim != cfg.topology.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.topology.dim(),
            got: cfg.data.dim,
        });
    }
    if cfg.sample_sizes.is_empty() || cfg.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("sample_sizes", "must be nonempty and strictly increasing"));
    }
    if cfg.replicates == 0 {
        return Err(Error::param("replicates", "must be >= 1"));
    }
    if cfg.mc_points == 0 {
        return Err(Error::param("mc_points", "must be >= 1"));
    }
    Ok(())
}

/// Runs every `(n, replicate)` cell, in parallel, and aggregates per `n`.
/// Output depends only on the configuration.
pub fn consistency_curve(cfg: &CurveConfig) -> Result<CurveResult> {
    validate_curve(cfg)?;
    let jobs: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    // Largest jobs first keeps the thread pool busy; results are re-sorted.
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(jobs[i].0));
    let mut runs: Vec<ReplicateResult> = order
        .par_iter()
        .map(|&i| run_replicate(cfg, jobs[i].0, jobs[i].1))
        .collect::<Result<_>>()?;
    runs.sort_by_key(|r| (r.n, r.replicate));

    let mut rows = Vec::with_capacity(cfg.sample_sizes.len());
    let mut conditions = Vec::with_capacity(cfg.sample_sizes.len());
    for (&n, chunk) in cfg.sample_sizes.iter().zip(runs.chunks(cfg.replicates)) {
        let mut errors: Vec<f64> = chunk.iter().map(|r| r.l2_error).collect();
        errors.sort_by(|a, b| a.total_cmp(b));
        let hp = schedule(n as f64, &cfg.constants, &cfg.topology)?;
        let report = validate_theorem_conditions(&cfg.topology, &hp);
        rows.push(CurveRow {
            n,
            replicates: chunk.len(),
            median_l2: quantile(&errors, 0.5),
            q25: quantile(&errors, 0.25),
            q75: quantile(&errors, 0.75),
            mean_final_risk: chunk.iter().map(|r| r.final_risk).sum::<f64>() / chunk.len() as f64,
            conditions_ok: report.all_satisfied(),
        });
        conditions.push(report);
    }
    Ok(CurveResult { rows, conditions, runs })
}
