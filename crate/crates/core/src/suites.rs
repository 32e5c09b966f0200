//! Randomized verification suites over the network, the constructions and
//! the optimization bounds. Each suite is deterministic given its seed and
//! returns a [`SuiteReport`] of named checks.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constructions::{
    perturb, piecewise_constant_network, select_shift, shifted_grid_network, CubeSpec, GridSpec, SizeCheck,
};
use crate::error::{Error, Result};
use crate::estimator::{
    empirical_risk, init_weights, outer_ridge_problem, schedule, train, Constants, Dataset, RiskEvaluator,
    TrainOptions,
};
use crate::experiments::{generate_dataset, l2_error_mc, DataSpec, Design, TargetFn};
use crate::net::{self, Topology, WeightIndex, WeightVector};
use crate::theory::{
    covering_bound, descent_report, descent_report_for_trace, empirical_cover, lipschitz_estimate,
    outer_gd_convergence, pl_slack, ridge_optimum, CoveringParams, RidgeProblem,
};

/// Tolerances and slack constants shared by the suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSettings {
    /// Allowed negative slack, relative to `max(1, |F|)`.
    pub tolerance: f64,
    pub fd_step: f64,
    pub fd_rel_tol: f64,
    /// Absolute error accepted for gradient entries near zero.
    pub fd_abs_tol: f64,
    /// Slack factor of the grid approximation error bound.
    pub c_check: f64,
    pub c5: f64,
    pub c7: f64,
    pub c11: f64,
    pub c12: f64,
    pub c13: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            tolerance: crate::theory::EXACT_TOLERANCE,
            fd_step: 1e-5,
            fd_rel_tol: 1e-6,
            fd_abs_tol: 1e-8,
            c_check: 10.0,
            c5: 1.0,
            c7: 1.0,
            c11: 1.0,
            c12: 1.0,
            c13: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// NaN values fail every relation.
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
            Relation::Equal => value == bound,
        };
        Check {
            name: name.into(),
            value,
            relation,
            bound,
            passed,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, Relation::AtMost, bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, Relation::AtLeast, bound)
    }

    pub fn equal(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value, Relation::Equal, bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub instances: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Observations that are reported but not asserted.
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            instances: 0,
            seed,
            checks: Vec::new(),
            notes: Vec::new(),
            seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Human-readable summary, one line per check and note.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{}: {} ({} instances, seed {}, {:.2} s)\n",
            self.suite,
            if self.passed() { "PASS" } else { "FAIL" },
            self.instances,
            self.seed,
            self.seconds
        );
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
                Relation::Equal => "==",
            };
            out.push_str(&format!(
                "  [{}] {}: {:.6e} {rel} {:.6e}\n",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }

    fn finish(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self
    }
}

/// Central differences `(f(w + h e_i) - f(w - h e_i)) / 2h` for every coordinate.
pub fn central_difference(
    w: &WeightVector,
    h: f64,
    f: &mut dyn FnMut(&WeightVector) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut probe = w.clone();
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + h;
        let plus = f(&probe)?;
        probe.as_mut_slice()[i] = orig - h;
        let minus = f(&probe)?;
        probe.as_mut_slice()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Worst `|a - b| / max(rel * max(|a|, |b|), abs)` and worst relative error
/// over entries of magnitude at least `abs / rel`.
fn gradient_mismatch(analytic: &[f64], fd: &[f64], rel: f64, abs: f64) -> (f64, f64) {
    let mut score: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for (a, b) in analytic.iter().zip(fd) {
        let err = (a - b).abs();
        let scale = a.abs().max(b.abs());
        score = score.max(err / (rel * scale).max(abs));
        if scale >= abs / rel {
            worst_rel = worst_rel.max(err / scale);
        }
    }
    (score, worst_rel)
}

fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_weights<R: Rng + ?Sized>(topo: Topology, bound: f64, rng: &mut R) -> WeightVector {
    WeightVector::from_vec(topo, uniform_vec(rng, topo.param_count(), -bound, bound)).expect("length matches")
}

/// Analytic network and risk gradients against central differences on
/// random topologies with `d <= 2`, `L <= 3`, `2d <= r <= 4`, `K <= 8` and
/// weights in `[-3, 3]`.
pub fn gradient_suite(instances: usize, seed: u64, s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("grad", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut net_score, mut net_rel, mut risk_score, mut risk_rel) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        let d = rng.random_range(1..=2);
        let depth = rng.random_range(2..=3);
        let r = rng.random_range(2 * d..=4);
        let k = rng.random_range(1..=8);
        let topo = Topology::new(d, depth, r, k)?;
        let w = random_weights(topo, 3.0, &mut rng);

        let x = uniform_vec(&mut rng, d, -1.0, 1.0);
        let analytic = net::network_gradient(&w, &x)?;
        let fd = central_difference(&w, s.fd_step, &mut |v| net::evaluate(v, &x))?;
        let (sc, rel) = gradient_mismatch(analytic.as_slice(), &fd, s.fd_rel_tol, s.fd_abs_tol);
        net_score = net_score.max(sc);
        net_rel = net_rel.max(rel);

        // Some points fall outside [-log n, log n]^d and must not contribute.
        let n = rng.random_range(8..=16);
        let xs = uniform_vec(&mut rng, n * d, -3.0, 3.0);
        let ys = uniform_vec(&mut rng, n, -1.0, 1.0);
        let data = Dataset::new(d, xs, ys)?;
        let hp = schedule(n as f64, &Constants::desk(d), &topo)?;
        let mut eval = RiskEvaluator::new(topo, &data, &hp)?;
        let mut grad = WeightVector::zeros(topo);
        eval.value_and_gradient(&w, &mut grad);
        let fd = central_difference(&w, s.fd_step, &mut |v| empirical_risk(v, &data, &hp))?;
        let (sc, rel) = gradient_mismatch(grad.as_slice(), &fd, s.fd_rel_tol, s.fd_abs_tol);
        risk_score = risk_score.max(sc);
        risk_rel = risk_rel.max(rel);
        report.instances += 1;
    }
    report.checks.push(Check::at_most("network gradient mismatch score", net_score, 1.0));
    report.checks.push(Check::at_most("risk gradient mismatch score", risk_score, 1.0));
    report.notes.push(format!(
        "worst relative error on entries >= {:e}: network {net_rel:.3e}, risk {risk_rel:.3e}",
        s.fd_abs_tol / s.fd_rel_tol
    ));
    Ok(report.finish(start))
}

fn random_ridge<R: Rng + ?Sized>(rng: &mut R) -> Result<RidgeProblem> {
    let k = rng.random_range(1..=10);
    let n = rng.random_range(1..=50);
    let c2 = 10f64.powf(rng.random_range(-2.0..=1.0));
    let basis = DMatrix::from_fn(n, k, |_, _| rng.random_range(0.0..1.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    RidgeProblem::new(basis, y, c2)
}

/// `||grad F||^2 >= 4 c2 (F - F_opt)` on random ridge problems at random
/// points, near the optimum and at the optimum.
pub fn pl_suite(instances: usize, seed: u64, s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("lemma8", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..instances {
        let prob = random_ridge(&mut rng)?;
        let opt = ridge_optimum(&prob)?;
        let k = prob.k();
        let far = DVector::from_fn(k, |_, _| rng.random_range(-5.0..5.0));
        let near = &opt.a + DVector::from_fn(k, |_, _| rng.random_range(-1e-3..1e-3));
        for a in [far, near, opt.a.clone()] {
            let f = prob.objective(&a)?;
            worst = worst.min(pl_slack(&a, &prob, &opt)? / f.abs().max(1.0));
        }
        report.instances += 1;
    }
    report.checks.push(Check::at_least("min PL slack / max(1, F)", worst, -s.tolerance));
    Ok(report.finish(start))
}

/// Gradient descent on random ridge problems with `L_n >= lambda_max(2A)`
/// stays below the geometric bound at every step.
pub fn decay_suite(instances: usize, steps: usize, seed: u64, s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("decay", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..instances {
        let prob = random_ridge(&mut rng)?;
        let l = prob.smoothness() * (1.0 + rng.random_range(0.0..1.0));
        let a0 = DVector::from_fn(prob.k(), |_, _| rng.random_range(-5.0..5.0));
        let conv = outer_gd_convergence(&prob, &a0, l, steps)?;
        worst = worst.min(conv.worst_slack);
        report.instances += 1;
    }
    report
        .checks
        .push(Check::at_least("min (bound - gap) / max(1, F_0)", worst, -s.tolerance));
    Ok(report.finish(start))
}

/// Descent inequalities on desk-mode training runs and on outer-weight
/// gradient descent over frozen random features.
///
/// For full training runs the inequalities are asserted only when `L_n`
/// exceeds the largest gradient-difference ratio measured between
/// consecutive iterates; other runs are reported in the notes.
pub fn descent_suite(desk_runs: usize, outer_runs: usize, seed: u64, s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("lemma1", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut asserted_worst = f64::INFINITY;
    let mut asserted = 0usize;
    for run in 0..desk_runs {
        let d = rng.random_range(1..=2);
        let depth = rng.random_range(2..=3);
        let k = [4, 8, 16][rng.random_range(0..3)];
        let n = rng.random_range(20..=60);
        let topo = Topology::new(d, depth, 2 * d, k)?;
        let spec = DataSpec {
            dim: d,
            target: TargetFn::ClampedSine,
            design: Design::Uniform { half_width: 2.0 },
            noise_sd: 0.2,
        };
        let data = generate_dataset(&spec, n, &mut rng)?;
        let hp = schedule(n as f64, &Constants::desk(d), &topo)?;
        let out = train(&data, &topo, &hp, &mut rng, TrainOptions { keep_iterates: true })?;
        let desc = descent_report_for_trace(&out.trace, hp.inverse_step)?;
        let iterates = out.trace.iterates.as_ref().ok_or(Error::MissingIterates)?;
        let pairs: Vec<(WeightVector, WeightVector)> =
            iterates.windows(2).map(|p| (p[0].clone(), p[1].clone())).collect();
        let lip = lipschitz_estimate(&pairs, &data, &hp)?;
        let scale = out.trace.risks[0].abs().max(1.0);
        let slack = desc.worst_drift.min(desc.worst_step_sum).min(desc.worst_descent) / scale;
        if hp.inverse_step > lip.max_ratio {
            asserted += 1;
            asserted_worst = asserted_worst.min(slack);
        } else {
            report.notes.push(format!(
                "training run {run} (d={d}, L={depth}, K={k}, n={n}): L_n = {} <= measured ratio {:.4e}; \
                 worst slack {slack:.3e} reported only",
                hp.inverse_step, lip.max_ratio
            ));
        }
        report.instances += 1;
    }
    if desk_runs > 0 {
        report.notes.push(format!("{asserted} of {desk_runs} training runs had L_n above the measured ratio"));
        if asserted > 0 {
            report.checks.push(Check::at_least(
                "training runs: min descent slack / max(1, F_0)",
                asserted_worst,
                -s.tolerance,
            ));
        }
    }

    let mut outer_worst = f64::INFINITY;
    for _ in 0..outer_runs {
        let d = rng.random_range(1..=2);
        let k = rng.random_range(1..=16);
        let n = rng.random_range(10..=60);
        let topo = Topology::new(d, 2, 2 * d, k)?;
        let spec = DataSpec {
            dim: d,
            target: TargetFn::SinProduct,
            design: Design::Gaussian { sd: 1.0 },
            noise_sd: 0.2,
        };
        let data = generate_dataset(&spec, n, &mut rng)?;
        let hp = schedule(n as f64, &Constants::desk(d), &topo)?;
        let w = init_weights(&topo, &hp, &mut rng);
        let prob = outer_ridge_problem(&w, &data, &hp)?;
        let l = prob.smoothness() * (1.0 + rng.random_range(0.0..2.0));
        let a0 = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let conv = outer_gd_convergence(&prob, &a0, l, 200)?;
        let slices: Vec<&[f64]> = conv.iterates.iter().map(|a| a.as_slice()).collect();
        let desc = descent_report(&slices, &conv.risks, &conv.grad_norms, l, s.tolerance)?;
        let scale = conv.risks[0].abs().max(1.0);
        outer_worst = outer_worst.min(desc.worst_drift.min(desc.worst_step_sum).min(desc.worst_descent) / scale);
        report.instances += 1;
    }
    if outer_runs > 0 {
        report
            .checks
            .push(Check::at_least("outer-only runs: min descent slack / max(1, F_0)", outer_worst, -s.tolerance));
    }
    Ok(report.finish(start))
}

/// Row-major points of a regular grid with `per_axis` points on `[lo, hi]` per axis.
fn grid_points(dim: usize, per_axis: usize, lo: f64, hi: f64) -> Vec<f64> {
    let total = per_axis.pow(dim as u32);
    let step = (hi - lo) / (per_axis - 1) as f64;
    let mut out = Vec::with_capacity(total * dim);
    for idx in 0..total {
        let mut rem = idx;
        for _ in 0..dim {
            out.push(lo + (rem % per_axis) as f64 * step);
            rem /= per_axis;
        }
    }
    out
}

/// Indicator subnetworks are `>= 1 - 1/n` on the shrunk cube and `<= 1/n`
/// off the expanded cube on a dense grid over `[-log n, log n]^d`, before
/// and after random inner-weight perturbations of size `log n`.
pub fn indicator_suite(perturbations: usize, seed: u64, _s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("lemma5", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inside_worst, mut outside_worst) = (f64::INFINITY, f64::INFINITY);
    let mut min_points = usize::MAX;
    let mut relaxed = 0usize;
    for d in [1usize, 2] {
        for n in [100.0f64, 1000.0] {
            for delta in [0.05, 0.1] {
                for depth in [2usize, 3] {
                    let topo = Topology::new(d, depth, 2 * d, 1)?;
                    let check = if n >= ((2 * d + 1) as f64).exp() {
                        SizeCheck::Strict
                    } else {
                        relaxed += 1;
                        SizeCheck::Relaxed
                    };
                    let lower: Vec<f64> = (0..d).map(|j| -0.8 + 0.3 * j as f64).collect();
                    let upper: Vec<f64> = (0..d).map(|j| 0.6 + 0.2 * j as f64).collect();
                    let cube = CubeSpec::new(lower, upper, delta)?;
                    let mut w = WeightVector::zeros(topo);
                    crate::constructions::indicator_subnetwork(&mut w, 0, &cube, n, check)?;
                    w[WeightIndex::Outer { subnet: 0 }] = 1.0;
                    let log_n = n.ln();
                    let pts = grid_points(d, if d == 1 { 2001 } else { 45 }, -log_n, log_n);
                    min_points = min_points.min(pts.len() / d);
                    for p in 0..=perturbations {
                        let v = if p == 0 { w.clone() } else { perturb(&w, log_n, &mut rng)? };
                        let out = net::evaluate_many(&v, &pts)?;
                        for (x, f) in pts.chunks_exact(d).zip(&out) {
                            if cube.in_shrunk(x) {
                                inside_worst = inside_worst.min(f - (1.0 - 1.0 / n));
                            } else if cube.outside_expanded(x) {
                                outside_worst = outside_worst.min(1.0 / n - f);
                            }
                        }
                    }
                    report.instances += 1;
                }
            }
        }
    }
    report
        .checks
        .push(Check::at_least("min (f - (1 - 1/n)) on shrunk cubes", inside_worst, 0.0));
    report
        .checks
        .push(Check::at_least("min (1/n - f) off expanded cubes", outside_worst, 0.0));
    report
        .checks
        .push(Check::at_least("grid points per instance", min_points as f64, 1000.0));
    report.notes.push(format!(
        "{relaxed} instances have n < e^(r+1) and use the relaxed size check"
    ));
    Ok(report.finish(start))
}

struct GridRun {
    sup_f: f64,
    sup_bound: f64,
    error: f64,
    error_bound: f64,
}

fn grid_run(d: usize, k: usize, n: f64, sample: &[f64], inner: &[f64], s: &CheckSettings) -> Result<GridRun> {
    let target = TargetFn::ClampedSine;
    let m = |x: &[f64]| target.eval(x);
    let (lower, side) = (-1.0, 2.0);
    let delta = side / (4.0 * k as f64);
    let grid = GridSpec::new(vec![lower; d], side, k, delta)?;
    let cells = grid.cell_count().ok_or(Error::param("K", "too many cells"))?;
    let topo = Topology::new(d, 2, 2 * d, cells)?;
    let w = piecewise_constant_network(&m, &grid, n, None, &topo, SizeCheck::Strict)?;

    let mut sup_m: f64 = (0..cells).map(|i| m(&grid.center(i)).abs()).fold(0.0, f64::max);
    for x in sample.chunks_exact(d) {
        sup_m = sup_m.max(m(x).abs());
    }
    let f = net::evaluate_many(&w, sample)?;
    let sup_f = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let f_inner = net::evaluate_many(&w, inner)?;
    let mut error: f64 = 0.0;
    for (x, v) in inner.chunks_exact(d).zip(&f_inner) {
        if !grid.in_boundary_strip(x) {
            error = error.max((v - m(x)).abs());
        }
    }
    let kd = cells as f64;
    Ok(GridRun {
        sup_f,
        sup_bound: sup_m * (3f64.powi(d as i32) + kd / n),
        error,
        error_bound: s.c_check * (target.lipschitz(d) * side / k as f64 + kd / n),
    })
}

/// Piecewise-constant grid networks: sup bound everywhere, approximation
/// error off the boundary strips, and its decrease when `K` and `n` double.
pub fn grid_suite(seed: u64, s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("lemma6", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sup_margin, mut err_ratio) = (f64::INFINITY, 0.0f64);
    let mut decrease_margin = f64::INFINITY;
    for d in [1usize, 2] {
        let count = if d == 1 { 4000 } else { 20000 };
        let sample = uniform_vec(&mut rng, count * d, -3.0, 3.0);
        let inner = uniform_vec(&mut rng, count * d, -1.0, 1.0);
        let mut errors = std::collections::BTreeMap::new();
        for (k, n) in [(1, 1000.0), (2, 1000.0), (3, 1000.0), (4, 1000.0), (2, 2000.0), (4, 2000.0)] {
            let run = grid_run(d, k, n, &sample, &inner, s)?;
            sup_margin = sup_margin.min(run.sup_bound - run.sup_f);
            err_ratio = err_ratio.max(run.error / run.error_bound);
            errors.insert((k, n as u64), run.error);
            report.instances += 1;
        }
        for k in [1usize, 2] {
            let before = errors[&(k, 1000)];
            let after = errors[&(2 * k, 2000)];
            decrease_margin = decrease_margin.min(before - after);
            report.notes.push(format!(
                "d={d}: off-strip error {before:.4e} at (K={k}, n=1000) -> {after:.4e} at (K={}, n=2000)",
                2 * k
            ));
        }
    }
    report
        .checks
        .push(Check::at_least("min (||m|| (3^d + K^d/n) - sup |f|)", sup_margin, 0.0));
    report.checks.push(Check::at_most(
        "max off-strip error / (C_check (C_Lip D/K + K^d/n))",
        err_ratio,
        1.0,
    ));
    report.checks.push(Check::new(
        "min error decrease when (K, n) double",
        decrease_margin,
        Relation::AtLeast,
        f64::MIN_POSITIVE,
    ));
    Ok(report.finish(start))
}

/// Fraction of points within `delta` of a hyperplane of shift `shift`,
/// enumerating every hyperplane.
fn brute_force_mass(points: &[f64], dim: usize, axis: usize, k: usize, shift: usize, delta: f64) -> f64 {
    let kf = k as f64;
    let planes: Vec<f64> = (0..=k * k + 1)
        .map(|i| -kf - 2.0 / kf + shift as f64 * 2.0 / (kf * kf) + i as f64 * 2.0 / kf)
        .collect();
    let hits = points
        .chunks_exact(dim)
        .filter(|x| planes.iter().any(|p| (x[axis] - p).abs() < delta))
        .count();
    hits as f64 / (points.len() / dim) as f64
}

/// Shifted-grid construction: active subnetwork count, outer-weight
/// magnitudes, shift selection against exhaustive enumeration, and the
/// Monte-Carlo L2 error decrease from `K = 2` to `K = 3`.
pub fn shifted_grid_suite(mc_points: usize, seed: u64, _s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("lemma7", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = TargetFn::ClampedSine;
    let m = |x: &[f64]| target.eval(x);
    let n = 1e6;

    let (mut count_mismatch, mut outer_excess) = (0.0f64, f64::NEG_INFINITY);
    let (mut mass_mismatch, mut mass_excess, mut not_minimal) = (0usize, f64::NEG_INFINITY, 0usize);
    for (d, k) in [(1usize, 2usize), (1, 3), (2, 2)] {
        let per_axis = k * k + 1;
        let active = per_axis.pow(3 * d as u32);
        let topo = Topology::new(d, 2, 2 * d, active + 3)?;
        let kf = k as f64;
        let uniform = uniform_vec(&mut rng, 10_000 * d, -kf, kf);
        let built = shifted_grid_network(&m, k, n, &uniform, &topo, SizeCheck::Strict)?;
        let nonzero = (0..topo.subnets())
            .filter(|&j| built.weights.subnet(j).iter().any(|v| *v != 0.0))
            .count();
        count_mismatch = count_mismatch.max((nonzero as f64 - active as f64).abs());
        count_mismatch = count_mismatch.max((built.slots.len() as f64 - active as f64).abs());

        let cells = per_axis.pow(d as u32);
        let mut sup_m: f64 = (0..cells).map(|i| m(&built.grid.center(i)).abs()).fold(0.0, f64::max);
        for x in uniform.chunks_exact(d) {
            sup_m = sup_m.max(m(x).abs());
        }
        let limit = sup_m / per_axis.pow(2 * d as u32) as f64;
        let max_outer = built.weights.outer().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        outer_excess = outer_excess.max(max_outer - limit);

        let delta = 1.0 / (kf * kf);
        let gaussian = Design::Gaussian { sd: kf / 2.0 }.sample(d, 10_000, &mut rng);
        // Every point on a hyperplane of shift 0 along each axis.
        let on_planes: Vec<f64> = (0..2_000)
            .flat_map(|i| {
                let plane = i % per_axis;
                (0..d).map(move |_| -kf - 2.0 / kf + plane as f64 * 2.0 / kf)
            })
            .collect();
        for sample in [&uniform, &gaussian, &on_planes] {
            let sel = select_shift(sample, d, k, delta)?;
            for axis in 0..d {
                let brute: Vec<f64> = (0..k).map(|sh| brute_force_mass(sample, d, axis, k, sh, delta)).collect();
                if brute != sel.masses[axis] {
                    mass_mismatch += 1;
                }
                let min = brute.iter().copied().fold(f64::INFINITY, f64::min);
                if brute[sel.shifts[axis]] != min {
                    not_minimal += 1;
                }
                mass_excess = mass_excess.max(brute[sel.shifts[axis]] - 1.0 / kf);
            }
        }
        report.instances += 1;
    }
    report.checks.push(Check::equal("active subnetwork count mismatch", count_mismatch, 0.0));
    report
        .checks
        .push(Check::at_most("max |outer| - ||m|| / (K^2+1)^(2d)", outer_excess, 0.0));
    report
        .checks
        .push(Check::equal("strip masses differing from enumeration", mass_mismatch as f64, 0.0));
    report
        .checks
        .push(Check::equal("selected shifts that are not minimal", not_minimal as f64, 0.0));
    report.checks.push(Check::at_most("max selected mass - 1/K", mass_excess, 0.0));

    let design = Design::Uniform { half_width: 2.0 };
    let shift_sample = design.sample(1, 10_000, &mut rng);
    let mc = design.sample(1, mc_points, &mut rng);
    let mut errors = Vec::new();
    for k in [2usize, 3] {
        let topo = Topology::new(1, 2, 2, (k * k + 1).pow(3))?;
        let built = shifted_grid_network(&m, k, n, &shift_sample, &topo, SizeCheck::Strict)?;
        let est = l2_error_mc(&|xs| net::evaluate_many(&built.weights, xs), &m, &mc, 1)?;
        report
            .notes
            .push(format!("K={k}: Monte-Carlo L2 error {:.4e} (se {:.1e})", est.mean, est.std_error));
        errors.push(est.mean);
    }
    report.checks.push(Check::new(
        "L2 error decrease from K=2 to K=3",
        errors[0] - errors[1],
        Relation::AtLeast,
        f64::MIN_POSITIVE,
    ));
    Ok(report.finish(start))
}

/// Covering-number machinery: the closed-form bound, monotonicity of the
/// empirical cover, and empirical covers of sampled bounded networks
/// against the bound.
pub fn covering_suite(networks: usize, seed: u64, s: &CheckSettings) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport::new("covering", seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = |eps: f64, p: f64| CoveringParams {
        alpha: 1.0,
        beta: 1.0,
        eps,
        p,
        input_bound: 1.0,
        hidden_bound: 1.0,
        outer_bound: 1.0,
        dim: 1,
        smoothness: 1,
        depth: 2,
        c11: s.c11,
        c12: s.c12,
        c13: s.c13,
    };
    let unit = CoveringParams {
        c11: 1.0,
        c12: 1.0,
        c13: 1.0,
        ..params(0.5, 2.0)
    };
    report
        .checks
        .push(Check::at_most("|bound(all ones) - 64|", (covering_bound(&unit)?.value - 64.0).abs(), 1e-9));

    // Networks with sum |outer| <= C = 1 and inner weights in [-1, 1],
    // truncated at beta = 1 and evaluated on points in [-alpha, alpha].
    let topo = Topology::new(1, 2, 2, 4)?;
    let xs = uniform_vec(&mut rng, 50, -1.0, 1.0);
    let mut family = Vec::with_capacity(networks);
    for _ in 0..networks {
        let mut w = random_weights(topo, 1.0, &mut rng);
        let total: f64 = w.outer().iter().map(|v| v.abs()).sum();
        let scale = rng.random_range(0.0..1.0) / total.max(f64::MIN_POSITIVE);
        for a in w.outer_mut() {
            *a *= scale;
        }
        let values = net::evaluate_many(&w, &xs)?;
        family.push(values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect::<Vec<f64>>());
    }

    let eps_grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.0025).collect();
    let mut increases = 0usize;
    let mut excess = f64::NEG_INFINITY;
    for p in [1.0, 2.0] {
        let mut prev = usize::MAX;
        for &eps in &eps_grid {
            let cover = empirical_cover(&family, eps, p);
            if cover > prev {
                increases += 1;
            }
            prev = cover;
            let bound = covering_bound(&params(eps, p))?;
            excess = excess.max((cover as f64).ln() - bound.log_value);
        }
    }
    report.instances = networks;
    report
        .checks
        .push(Check::equal("empirical cover increases as eps grows", increases as f64, 0.0));
    let singleton = empirical_cover(&family[..1.min(family.len())], 0.01, 2.0);
    report.checks.push(Check::equal("cover of a singleton", singleton as f64, 1.0));
    report
        .checks
        .push(Check::at_most("max (log cover - log bound)", excess, 0.0));
    Ok(report.finish(start))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_relations() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_least("a", f64::NAN, 0.0).passed);
        assert!(Check::equal("a", 2.0, 2.0).passed);
        assert!(!Check::equal("a", 2.0, 2.5).passed);
    }

    #[test]
    fn central_difference_of_quadratic() {
        let topo = Topology::new(1, 2, 2, 1).unwrap();
        let w = WeightVector::from_vec(topo, (0..topo.param_count()).map(|i| i as f64).collect()).unwrap();
        let g = central_difference(&w, 1e-3, &mut |v| Ok(v.as_slice().iter().map(|x| x * x).sum())).unwrap();
        for (i, gi) in g.iter().enumerate() {
            assert!((gi - 2.0 * i as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_points_cover_corners() {
        let pts = grid_points(2, 3, -1.0, 1.0);
        assert_eq!(pts.len(), 18);
        assert_eq!(&pts[..2], &[-1.0, -1.0]);
        assert_eq!(&pts[16..], &[1.0, 1.0]);
    }

    #[test]
    fn small_suites_pass() {
        let s = CheckSettings::default();
        for r in [
            gradient_suite(5, 1, &s).unwrap(),
            pl_suite(50, 1, &s).unwrap(),
            decay_suite(5, 50, 1, &s).unwrap(),
            covering_suite(20, 1, &s).unwrap(),
        ] {
            assert!(r.passed(), "{}", r.render());
        }
    }
}
