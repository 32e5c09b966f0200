//! The learned estimate: hyperparameter schedule, random initialization,
//! regularized empirical risk, full-batch gradient descent and the truncated
//! prediction rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::batch;
use crate::net::{self, Topology, WeightVector};

/// Observations `(X_i, Y_i)`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// `xs` holds the points row by row (`ys.len() * dim` entries).
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be >= 1"));
        }
        if ys.is_empty() {
            return Err(Error::param("dataset", "needs at least one observation"));
        }
        if xs.len() != ys.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: ys.len() * dim,
                got: xs.len(),
            });
        }
        if !xs.iter().chain(&ys).all(|v| v.is_finite()) {
            return Err(Error::param("dataset", "all coordinates must be finite"));
        }
        Ok(Dataset { dim, xs, ys })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.xs.chunks_exact(self.dim)
    }

    pub fn targets(&self) -> &[f64] {
        &self.ys
    }
}

/// User-chosen constants of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Exponent of the first-level initialization range `n^tau`.
    pub tau: f64,
    /// `alpha_n = c1 log n`.
    pub c1: f64,
    /// Ridge weight on the outer weights.
    pub c2: f64,
    /// `beta_n = c3 log n`.
    pub c3: f64,
    /// `t_n = ceil(c4 L_n log n)`.
    pub c4: f64,
    /// Fixed `L_n` ("desk mode"); `None` uses the theoretical lower bound.
    pub inverse_step: Option<f64>,
    /// Exponent for the reported `K_n / n^kappa` ratio; not enforced.
    pub kappa: Option<f64>,
}

impl Constants {
    /// Desk defaults: `c1 = c3 = c4 = 1`, `c2 = 0.1`, `tau = 0.4/(d+1)`, `L_n = 1000`.
    pub fn desk(dim: usize) -> Self {
        Constants {
            tau: 0.4 / (dim as f64 + 1.0),
            c1: 1.0,
            c2: 0.1,
            c3: 1.0,
            c4: 1.0,
            inverse_step: Some(1000.0),
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// `L_n = (log n)^(10 L + 10) K_n^(3/2)`.
    Theory,
    /// `L_n` supplied by the user.
    Desk,
}

/// The resolved schedule for one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Sample size (real so that `log n` can be chosen freely in checks).
    pub n: f64,
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Half-width of the cube the risk and the estimate are restricted to.
    pub alpha: f64,
    /// Truncation level.
    pub beta: f64,
    /// `L_n`.
    pub inverse_step: f64,
    /// `lambda_n = 1 / L_n`.
    pub step: f64,
    /// `t_n`, saturating at `u64::MAX`.
    pub steps: u64,
    pub mode: ScheduleMode,
    pub kappa: Option<f64>,
}

impl Hyperparams {
    pub fn log_n(&self) -> f64 {
        self.n.ln()
    }

    /// Whether `x` lies in the closed cube `[-alpha, alpha]^d`.
    pub fn in_cube(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.alpha)
    }
}

/// Right-hand side of the step-size condition, `(log n)^(10 L + 10) K^(3/2)`.
pub fn theory_inverse_step(n: f64, topo: &Topology) -> f64 {
    let exponent = 10.0 * topo.depth() as f64 + 10.0;
    n.ln().powf(exponent) * (topo.subnets() as f64).powf(1.5)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

/// Resolves the schedule for sample size `n`.
pub fn schedule(n: f64, constants: &Constants, topo: &Topology) -> Result<Hyperparams> {
    if !(n.is_finite() && n >= 2.0) {
        return Err(Error::param("n", format!("must be >= 2, got {n}")));
    }
    positive("c1", constants.c1)?;
    positive("c2", constants.c2)?;
    positive("c3", constants.c3)?;
    positive("c4", constants.c4)?;
    let tau_max = 1.0 / (topo.dim() as f64 + 1.0);
    if !(constants.tau > 0.0 && constants.tau < tau_max) {
        return Err(Error::param(
            "tau",
            format!("must lie in (0, {tau_max}), got {}", constants.tau),
        ));
    }
    let (inverse_step, mode) = match constants.inverse_step {
        Some(l) => {
            positive("inverse_step", l)?;
            (l, ScheduleMode::Desk)
        }
        None => (theory_inverse_step(n, topo), ScheduleMode::Theory),
    };
    let log_n = n.ln();
    let steps_real = (constants.c4 * inverse_step * log_n).ceil();
    Ok(Hyperparams {
        n,
        tau: constants.tau,
        c1: constants.c1,
        c2: constants.c2,
        c3: constants.c3,
        c4: constants.c4,
        alpha: constants.c1 * log_n,
        beta: constants.c3 * log_n,
        inverse_step,
        step: 1.0 / inverse_step,
        // `as` saturates for huge or infinite values.
        steps: steps_real as u64,
        mode,
        kappa: constants.kappa,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Satisfied,
    Violated,
    NotEvaluated,
}

/// One finite-`n` reading of a consistency condition: `status` of `lhs` vs `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    pub status: ConditionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: f64,
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    /// True iff no evaluated condition is violated.
    pub fn all_satisfied(&self) -> bool {
        self.conditions
            .iter()
            .all(|c| c.status != ConditionStatus::Violated)
    }

    pub fn violated(&self) -> impl Iterator<Item = &Condition> {
        self.conditions
            .iter()
            .filter(|c| c.status == ConditionStatus::Violated)
    }

    /// Compact `name=ok|VIOLATED|n/a` summary.
    pub fn summary(&self) -> String {
        self.conditions
            .iter()
            .map(|c| {
                let s = match c.status {
                    ConditionStatus::Satisfied => "ok",
                    ConditionStatus::Violated => "VIOLATED",
                    ConditionStatus::NotEvaluated => "n/a",
                };
                format!("{}={}", c.name, s)
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn status(ok: bool) -> ConditionStatus {
    if ok {
        ConditionStatus::Satisfied
    } else {
        ConditionStatus::Violated
    }
}

/// Evaluates the consistency conditions at the given finite `n`. Never fails;
/// violated conditions are only reported.
pub fn validate_theorem_conditions(topo: &Topology, hp: &Hyperparams) -> ConditionReport {
    let n = hp.n;
    let k = topo.subnets() as f64;
    let d = topo.dim() as f64;
    let r = topo.width() as f64;
    let log_n = n.ln();
    let mut conditions = Vec::with_capacity(6);

    conditions.push(match hp.kappa {
        Some(kappa) => Condition {
            name: "subnets_subpolynomial".into(),
            statement: format!("K_n <= n^kappa (kappa = {kappa})"),
            lhs: k,
            rhs: n.powf(kappa),
            status: status(k <= n.powf(kappa)),
        },
        None => Condition {
            name: "subnets_subpolynomial".into(),
            statement: "K_n / n^kappa -> 0 (no kappa supplied)".into(),
            lhs: k,
            rhs: f64::NAN,
            status: ConditionStatus::NotEvaluated,
        },
    });

    let needed = n.powf(r) * log_n;
    conditions.push(Condition {
        name: "overparametrized".into(),
        statement: "K_n >= n^r log n".into(),
        lhs: k,
        rhs: needed,
        status: status(k >= needed),
    });

    let bound = theory_inverse_step(n, topo);
    conditions.push(Condition {
        name: "inverse_step".into(),
        statement: "L_n >= (log n)^(10L+10) K_n^(3/2)".into(),
        lhs: hp.inverse_step,
        rhs: bound,
        status: status(hp.inverse_step >= bound),
    });

    let tau_max = 1.0 / (d + 1.0);
    conditions.push(Condition {
        name: "tau_range".into(),
        statement: "0 < tau < 1/(d+1)".into(),
        lhs: hp.tau,
        rhs: tau_max,
        status: status(hp.tau > 0.0 && hp.tau < tau_max),
    });

    conditions.push(Condition {
        name: "width".into(),
        statement: "r >= 2d".into(),
        lhs: r,
        rhs: 2.0 * d,
        status: status(r >= 2.0 * d),
    });

    conditions.push(Condition {
        name: "depth".into(),
        statement: "L >= 2".into(),
        lhs: topo.depth() as f64,
        rhs: 2.0,
        status: status(topo.depth() >= 2),
    });

    ConditionReport { n, conditions }
}

/// Random starting point: outer weights zero, level-0 weights uniform on
/// `[-n^tau, n^tau]`, levels `1..L-1` uniform on `[-20 d (log n)^2, 20 d (log n)^2]`.
pub fn init_weights<R: Rng + ?Sized>(topo: &Topology, hp: &Hyperparams, rng: &mut R) -> WeightVector {
    let first = hp.n.powf(hp.tau);
    let hidden = 20.0 * topo.dim() as f64 * hp.log_n().powi(2);
    let input_len = topo.input_level_len();
    let mut w = WeightVector::zeros(*topo);
    for k in 0..topo.subnets() {
        let block = w.subnet_mut(k);
        for (i, v) in block.iter_mut().enumerate() {
            let range = if i < input_len { first } else { hidden };
            *v = rng.random_range(-range..=range);
        }
    }
    w
}

/// `F_n(w)`: in-cube mean squared residual plus `c2 * sum outer^2`.
pub fn empirical_risk(w: &WeightVector, data: &Dataset, hp: &Hyperparams) -> Result<f64> {
    check_data(w.topology(), data)?;
    let mut acts = vec![0.0; w.topology().activation_len()];
    let mut sum = 0.0;
    for (x, y) in data.points().zip(data.targets()) {
        if hp.in_cube(x) {
            let r = net::evaluate_unchecked(w, x, &mut acts) - y;
            sum += r * r;
        }
    }
    Ok(sum / data.len() as f64 + hp.c2 * w.outer().iter().map(|c| c * c).sum::<f64>())
}

/// `grad F_n(w)`, in the layout of `w`.
pub fn risk_gradient(w: &WeightVector, data: &Dataset, hp: &Hyperparams) -> Result<WeightVector> {
    let mut eval = RiskEvaluator::new(*w.topology(), data, hp)?;
    let mut grad = WeightVector::zeros(*w.topology());
    eval.value_and_gradient(w, &mut grad);
    Ok(grad)
}

fn check_data(topo: &Topology, data: &Dataset) -> Result<()> {
    if data.dim() != topo.dim() {
        return Err(Error::DimensionMismatch {
            expected: topo.dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

/// Reusable buffers for repeated risk/gradient evaluation on one dataset.
///
/// Only the in-cube points are kept; everything else contributes nothing to
/// `F_n` or its gradient.
pub struct RiskEvaluator<'a> {
    topo: Topology,
    data: &'a Dataset,
    hp: Hyperparams,
    active: Vec<usize>,
    /// In-cube points, one column per coordinate.
    cols: Vec<f64>,
    targets: Vec<f64>,
    /// Activations per subnetwork, one column per neuron.
    cache: Vec<f64>,
    fitted: Vec<f64>,
    upstream: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> RiskEvaluator<'a> {
    pub fn new(topo: Topology, data: &'a Dataset, hp: &Hyperparams) -> Result<Self> {
        check_data(&topo, data)?;
        let active: Vec<usize> = (0..data.len())
            .filter(|&i| hp.in_cube(data.point(i)))
            .collect();
        let m = active.len();
        let cols = (0..topo.dim())
            .flat_map(|j| active.iter().map(move |&i| data.point(i)[j]))
            .collect();
        Ok(RiskEvaluator {
            topo,
            cols,
            targets: active.iter().map(|&i| data.target(i)).collect(),
            cache: vec![0.0; topo.subnets() * m * topo.activation_len()],
            fitted: vec![0.0; m],
            upstream: vec![0.0; m],
            scratch: vec![0.0; (2 * topo.width() + 1) * m],
            data,
            hp: *hp,
            active,
        })
    }

    /// Returns `F_n(w)` and overwrites `grad` with its gradient.
    pub fn value_and_gradient(&mut self, w: &WeightVector, grad: &mut WeightVector) -> f64 {
        assert_eq!(w.topology(), &self.topo);
        assert_eq!(grad.topology(), &self.topo);
        #[cfg(target_arch = "x86_64")]
        {
            use std::arch::is_x86_feature_detected as has;
            if has!("avx512f") && has!("fma") {
                // SAFETY: the features were detected at runtime.
                return unsafe { self.value_and_gradient_avx512(w, grad) };
            }
            if has!("avx2") && has!("fma") {
                // SAFETY: the features were detected at runtime.
                return unsafe { self.value_and_gradient_avx2(w, grad) };
            }
        }
        self.value_and_gradient_impl(w, grad)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f,avx2,fma")]
    unsafe fn value_and_gradient_avx512(&mut self, w: &WeightVector, grad: &mut WeightVector) -> f64 {
        self.value_and_gradient_impl(w, grad)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn value_and_gradient_avx2(&mut self, w: &WeightVector, grad: &mut WeightVector) -> f64 {
        self.value_and_gradient_impl(w, grad)
    }

    #[inline(always)]
    fn value_and_gradient_impl(&mut self, w: &WeightVector, grad: &mut WeightVector) -> f64 {
        let topo = self.topo;
        let m = self.active.len();
        let alen = topo.activation_len();
        let per_subnet = m * alen;
        let out_col = (alen - 1) * m;
        let n = self.data.len() as f64;

        self.fitted.fill(0.0);
        for k in 0..topo.subnets() {
            let cache = &mut self.cache[k * per_subnet..(k + 1) * per_subnet];
            batch::forward(&topo, w.subnet(k), &self.cols, m, cache);
            let c = w.outer()[k];
            for (f, o) in self.fitted.iter_mut().zip(&cache[out_col..]) {
                *f += c * o;
            }
        }

        // fitted now holds residuals scaled by 2/n.
        let mut sum_sq = 0.0;
        for (f, y) in self.fitted.iter_mut().zip(&self.targets) {
            let r = *f - y;
            sum_sq += r * r;
            *f = 2.0 * r / n;
        }
        let ridge: f64 = w.outer().iter().map(|c| c * c).sum();
        let value = sum_sq / n + self.hp.c2 * ridge;

        grad.as_mut_slice().fill(0.0);
        for k in 0..topo.subnets() {
            let cache = &self.cache[k * per_subnet..(k + 1) * per_subnet];
            let c = w.outer()[k];
            grad.outer_mut()[k] = batch::dot(&self.fitted, &cache[out_col..]) + 2.0 * self.hp.c2 * c;
            // Every inner partial carries the factor c.
            if c != 0.0 {
                for (u, s) in self.upstream.iter_mut().zip(&self.fitted) {
                    *u = s * c;
                }
                batch::backward(
                    &topo,
                    w.subnet(k),
                    &self.cols,
                    m,
                    cache,
                    &self.upstream,
                    grad.subnet_mut(k),
                    &mut self.scratch,
                );
            }
        }
        value
    }

    /// Outputs `f_{k,1}^{(L)}(X_i)` of the last evaluation, zero for
    /// out-of-cube points: the design matrix of the outer-weight ridge problem.
    pub fn feature_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.active.len();
        let alen = self.topo.activation_len();
        let mut rows = vec![vec![0.0; self.topo.subnets()]; self.data.len()];
        for k in 0..self.topo.subnets() {
            let out = &self.cache[k * m * alen + (alen - 1) * m..][..m];
            for (&i, o) in self.active.iter().zip(out) {
                rows[i][k] = *o;
            }
        }
        rows
    }
}

/// Scalars recorded at every iterate `t = 0..=t_n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GdTrace {
    /// `F_n(w^(t))`.
    pub risks: Vec<f64>,
    /// `||grad F_n(w^(t))||`.
    pub grad_norms: Vec<f64>,
    /// `||w^(t) - w^(0)||`.
    pub drifts: Vec<f64>,
    /// `||w^(t+1) - w^(t)||`, one entry per step (so one shorter than the rest).
    pub step_lengths: Vec<f64>,
    #[serde(skip)]
    pub iterates: Option<Vec<WeightVector>>,
}

impl GdTrace {
    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainOptions {
    /// Keep every iterate in the trace (memory `t_n * param_count`).
    pub keep_iterates: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub initial: WeightVector,
    pub weights: WeightVector,
    pub trace: GdTrace,
}

/// Draws the initialization from `rng` and runs exactly `t_n` gradient steps.
pub fn train<R: Rng + ?Sized>(
    data: &Dataset,
    topo: &Topology,
    hp: &Hyperparams,
    rng: &mut R,
    opts: TrainOptions,
) -> Result<TrainOutcome> {
    let init = init_weights(topo, hp, rng);
    train_from(data, init, hp, opts)
}

/// Runs exactly `hp.steps` steps `w <- w - lambda_n grad F_n(w)` from `init`.
pub fn train_from(
    data: &Dataset,
    init: WeightVector,
    hp: &Hyperparams,
    opts: TrainOptions,
) -> Result<TrainOutcome> {
    let topo = *init.topology();
    let mut eval = RiskEvaluator::new(topo, data, hp)?;
    let mut w = init.clone();
    let mut grad = WeightVector::zeros(topo);
    let cap = usize::try_from(hp.steps.saturating_add(1)).unwrap_or(usize::MAX).min(1 << 20);
    let mut trace = GdTrace {
        risks: Vec::with_capacity(cap),
        grad_norms: Vec::with_capacity(cap),
        drifts: Vec::with_capacity(cap),
        step_lengths: Vec::with_capacity(cap),
        iterates: opts.keep_iterates.then(Vec::new),
    };

    let mut t = 0u64;
    loop {
        let risk = eval.value_and_gradient(&w, &mut grad);
        if !risk.is_finite() {
            return Err(Error::NonFinite { step: t, what: "risk" });
        }
        let grad_norm = grad.norm();
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite {
                step: t,
                what: "gradient",
            });
        }
        trace.risks.push(risk);
        trace.grad_norms.push(grad_norm);
        trace.drifts.push(w.distance(&init));
        if let Some(iterates) = trace.iterates.as_mut() {
            iterates.push(w.clone());
        }
        if t == hp.steps {
            break;
        }
        let mut step_sq = 0.0;
        for (wi, gi) in w.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            let old = *wi;
            *wi -= hp.step * gi;
            step_sq += (*wi - old) * (*wi - old);
        }
        trace.step_lengths.push(step_sq.sqrt());
        t += 1;
    }

    Ok(TrainOutcome {
        initial: init,
        weights: w,
        trace,
    })
}

/// `T_beta z = max(-beta, min(beta, z))`.
pub fn truncate(z: f64, beta: f64) -> f64 {
    z.clamp(-beta, beta)
}

/// The estimate `m_n(x) = T_beta(f_w(x)) * 1[x in [-alpha, alpha]^d]`.
pub fn predict(w: &WeightVector, hp: &Hyperparams, x: &[f64]) -> Result<f64> {
    let value = net::evaluate(w, x)?;
    if !hp.in_cube(x) {
        return Ok(0.0);
    }
    Ok(truncate(value, hp.beta))
}

/// [`predict`] at many points, given row-major with `d` values per point.
pub fn predict_many(w: &WeightVector, hp: &Hyperparams, xs: &[f64]) -> Result<Vec<f64>> {
    let mut values = net::evaluate_many(w, xs)?;
    let d = w.topology().dim();
    for (v, x) in values.iter_mut().zip(xs.chunks_exact(d)) {
        *v = if hp.in_cube(x) { truncate(*v, hp.beta) } else { 0.0 };
    }
    Ok(values)
}

/// The outer-weight ridge problem induced by freezing the inner weights of `w`.
///
/// Its objective at `a` equals `F_n` at `w` with the outer weights replaced by `a`.
pub fn outer_ridge_problem(
    w: &WeightVector,
    data: &Dataset,
    hp: &Hyperparams,
) -> Result<crate::theory::RidgeProblem> {
    let mut eval = RiskEvaluator::new(*w.topology(), data, hp)?;
    let mut grad = WeightVector::zeros(*w.topology());
    eval.value_and_gradient(w, &mut grad);
    let rows = eval.feature_matrix();
    let k = w.topology().subnets();
    let basis = nalgebra::DMatrix::from_fn(data.len(), k, |i, j| rows[i][j]);
    let y = nalgebra::DVector::from_iterator(
        data.len(),
        (0..data.len()).map(|i| {
            if hp.in_cube(data.point(i)) {
                data.target(i)
            } else {
                0.0
            }
        }),
    );
    crate::theory::RidgeProblem::new(basis, y, hp.c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn topo() -> Topology {
        Topology::new(1, 2, 2, 4).unwrap()
    }

    fn desk(l: f64) -> Constants {
        Constants {
            inverse_step: Some(l),
            ..Constants::desk(1)
        }
    }

    #[test]
    fn schedule_examples() {
        let c = Constants { c4: 1.0, ..desk(1000.0) };
        let hp = schedule(E, &c, &topo()).unwrap();
        assert_eq!(hp.step, 0.001);
        assert_eq!(hp.steps, 1000);
        assert_eq!(hp.mode, ScheduleMode::Desk);

        let hp = schedule(E * E, &desk(10.0), &topo()).unwrap();
        assert!((hp.alpha - 2.0).abs() < 1e-12);
        assert!((hp.beta - 2.0).abs() < 1e-12);

        let theory = Constants {
            inverse_step: None,
            ..Constants::desk(1)
        };
        let hp = schedule(E, &theory, &topo()).unwrap();
        assert_eq!(hp.mode, ScheduleMode::Theory);
        assert!((hp.inverse_step - 8.0).abs() < 1e-12);
        assert!((hp.step * hp.inverse_step - 1.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_bad_inputs() {
        let t = topo();
        assert!(schedule(1.5, &desk(10.0), &t).is_err());
        assert!(schedule(f64::NAN, &desk(10.0), &t).is_err());
        assert!(schedule(10.0, &Constants { c2: 0.0, ..desk(10.0) }, &t).is_err());
        assert!(schedule(10.0, &Constants { tau: 0.5, ..desk(10.0) }, &t).is_err());
        assert!(schedule(10.0, &Constants { tau: 0.0, ..desk(10.0) }, &t).is_err());
        assert!(schedule(10.0, &desk(-1.0), &t).is_err());
    }

    #[test]
    fn steps_cover_the_real_product() {
        for (n, l, c4) in [(3.0, 7.0, 0.3), (100.0, 1000.0, 1.0), (57.0, 13.5, 2.5)] {
            let hp = schedule(n, &Constants { c4, ..desk(l) }, &topo()).unwrap();
            let real = c4 * l * f64::ln(n);
            assert!(hp.steps as f64 >= real && (hp.steps as f64) < real + 1.0);
        }
    }

    #[test]
    fn condition_examples() {
        let t = Topology::new(1, 2, 2, 10_000).unwrap();
        let hp = schedule(100.0, &desk(1000.0), &t).unwrap();
        let rep = validate_theorem_conditions(&t, &hp);
        let over = &rep.conditions[1];
        assert_eq!(over.status, ConditionStatus::Violated);
        assert!((over.rhs - 46051.70185988091).abs() < 1e-6);

        let t = Topology::new(1, 2, 2, 100).unwrap();
        let hp = schedule(3.0, &desk(1000.0), &t).unwrap();
        let rep = validate_theorem_conditions(&t, &hp);
        assert_eq!(rep.conditions[1].status, ConditionStatus::Satisfied);
        assert_eq!(rep.conditions.len(), 6);
        assert_eq!(rep.conditions[0].status, ConditionStatus::NotEvaluated);

        let mut hp = hp;
        hp.tau = 0.5;
        let rep = validate_theorem_conditions(&t, &hp);
        assert_eq!(rep.conditions[3].status, ConditionStatus::Violated);
        assert!(!rep.all_satisfied());
        assert!(rep.summary().contains("tau_range=VIOLATED"));
    }

    #[test]
    fn init_respects_ranges_and_seed() {
        let t = Topology::new(1, 3, 2, 50).unwrap();
        let hp = schedule(100.0, &desk(10.0), &t).unwrap();
        let w = init_weights(&t, &hp, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(w.outer().iter().all(|c| *c == 0.0));
        let hidden = 20.0 * 100f64.ln().powi(2);
        assert!((hidden - 424.2).abs() < 0.05);
        let first = 100f64.powf(hp.tau);
        for k in 0..50 {
            let block = w.subnet(k);
            let (l0, rest) = block.split_at(t.input_level_len());
            assert!(l0.iter().all(|v| v.abs() <= first));
            assert!(rest.iter().all(|v| v.abs() <= hidden));
        }
        let again = init_weights(&t, &hp, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(w, again);
        let other = init_weights(&t, &hp, &mut ChaCha8Rng::seed_from_u64(2));
        assert_ne!(w.inner(), other.inner());
    }

    #[test]
    fn risk_at_initialization() {
        let t = topo();
        let hp = schedule(E, &desk(10.0), &t).unwrap();
        let w = init_weights(&t, &hp, &mut ChaCha8Rng::seed_from_u64(3));
        let data = Dataset::new(1, vec![0.0], vec![2.0]).unwrap();
        assert_eq!(empirical_risk(&w, &data, &hp).unwrap(), 4.0);

        // alpha = 1 here: only the first two points count.
        let data = Dataset::new(1, vec![0.5, -0.9, 1.5, -7.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((empirical_risk(&w, &data, &hp).unwrap() - 5.0 / 4.0).abs() < 1e-15);

        let data = Dataset::new(1, vec![3.0, -3.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(empirical_risk(&w, &data, &hp).unwrap(), 0.0);
    }

    #[test]
    fn gradient_at_initialization() {
        let t = topo();
        let hp = schedule(E, &desk(10.0), &t).unwrap();
        let w = init_weights(&t, &hp, &mut ChaCha8Rng::seed_from_u64(4));
        let data = Dataset::new(1, vec![0.25, -0.5], vec![1.0, -2.0]).unwrap();
        let g = risk_gradient(&w, &data, &hp).unwrap();
        assert!(g.inner().iter().all(|v| *v == 0.0));
        for k in 0..t.subnets() {
            let f0 = net::subnet_output(&w, k, &[0.25]).unwrap();
            let f1 = net::subnet_output(&w, k, &[-0.5]).unwrap();
            let expected = (2.0 / 2.0) * ((0.0 - 1.0) * f0 + (0.0 + 2.0) * f1);
            assert!((g.outer()[k] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_targets_keep_the_network_at_zero() {
        let t = topo();
        let hp = schedule(10.0, &Constants { c4: 0.1, ..desk(50.0) }, &t).unwrap();
        let data = Dataset::new(1, vec![0.1, 0.2, -0.4], vec![0.0; 3]).unwrap();
        let out = train(&data, &t, &hp, &mut ChaCha8Rng::seed_from_u64(5), TrainOptions::default()).unwrap();
        assert_eq!(out.trace.len() as u64, hp.steps + 1);
        assert!(out.trace.risks.iter().all(|r| *r == 0.0));
        assert!(out.weights.outer().iter().all(|c| *c == 0.0));
        assert_eq!(out.weights, out.initial);
    }

    #[test]
    fn zero_steps_return_the_initialization() {
        let t = topo();
        let mut hp = schedule(10.0, &desk(50.0), &t).unwrap();
        hp.steps = 0;
        let data = Dataset::new(1, vec![0.1], vec![1.0]).unwrap();
        let out = train(&data, &t, &hp, &mut ChaCha8Rng::seed_from_u64(6), TrainOptions::default()).unwrap();
        assert_eq!(out.weights, out.initial);
        assert_eq!(out.trace.len(), 1);
        assert!(out.trace.step_lengths.is_empty());
    }

    #[test]
    fn non_finite_risk_aborts() {
        let t = topo();
        let hp = schedule(10.0, &desk(50.0), &t).unwrap();
        let data = Dataset::new(1, vec![0.1], vec![1e200]).unwrap();
        let err = train(&data, &t, &hp, &mut ChaCha8Rng::seed_from_u64(7), TrainOptions::default())
            .unwrap_err();
        assert_eq!(err, Error::NonFinite { step: 0, what: "risk" });
    }

    #[test]
    fn truncation_and_prediction() {
        assert_eq!(truncate(3.0, 2.0), 2.0);
        assert_eq!(truncate(-5.0, 2.0), -2.0);
        assert_eq!(truncate(1.0, 2.0), 1.0);

        let t = topo();
        let hp = schedule(E, &desk(10.0), &t).unwrap();
        let mut w = init_weights(&t, &hp, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(predict(&w, &hp, &[0.3]).unwrap(), 0.0);
        w.outer_mut().fill(100.0);
        assert_eq!(predict(&w, &hp, &[0.3]).unwrap(), hp.beta);
        assert_eq!(predict(&w, &hp, &[1.0 + 1e-9]).unwrap(), 0.0);
        assert!(predict(&w, &hp, &[0.3, 0.1]).is_err());
    }

    #[test]
    fn vectorized_and_portable_paths_agree_bitwise() {
        let t = Topology::new(2, 3, 4, 5).unwrap();
        let hp = schedule(50.0, &desk(100.0), &t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..2 * 37).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..37).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = Dataset::new(2, xs, ys).unwrap();
        let mut w = init_weights(&t, &hp, &mut rng);
        for c in w.outer_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
        let mut eval = RiskEvaluator::new(t, &data, &hp).unwrap();
        let mut g1 = WeightVector::zeros(t);
        let mut g2 = WeightVector::zeros(t);
        let v1 = eval.value_and_gradient(&w, &mut g1);
        let v2 = eval.value_and_gradient_impl(&w, &mut g2);
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert_eq!(g1, g2);
    }

    #[test]
    fn ridge_view_matches_risk() {
        let t = topo();
        let hp = schedule(20.0, &desk(10.0), &t).unwrap();
        let mut w = init_weights(&t, &hp, &mut ChaCha8Rng::seed_from_u64(9));
        w.outer_mut().copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
        let data = Dataset::new(1, vec![0.1, -2.0, 4.0, 1.0], vec![1.0, 0.3, -2.0, 0.7]).unwrap();
        let prob = outer_ridge_problem(&w, &data, &hp).unwrap();
        let a = nalgebra::DVector::from_column_slice(w.outer());
        let direct = empirical_risk(&w, &data, &hp).unwrap();
        assert!((prob.objective(&a).unwrap() - direct).abs() < 1e-12);
    }
}
