//! Numeric verifiers for the optimization and complexity bounds behind the
//! estimate: gradient-descent descent inequalities, gradient-norm and
//! gradient-Lipschitz bound formulas, covering numbers, and the ridge
//! objective with its Polyak-Lojasiewicz inequality.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Dataset, Hyperparams, RiskEvaluator};
use crate::net::{self, WeightVector};

/// Relative slack allowed on exact inequalities for floating-point noise.
pub const EXACT_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Descent inequalities along a gradient-descent trajectory.

/// Slacks (`rhs - lhs`) of the three descent inequalities at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSlack {
    pub step: usize,
    /// `2 (k/L) (F_0 - F_k) - ||a_k - a_0||^2`.
    pub drift: f64,
    /// `(2/L)(F_0 - F_k) - sum_{j<k} ||a_{j+1} - a_j||^2`.
    pub step_sum: f64,
    /// `F_{k-1} - ||grad F(a_{k-1})||^2 / (2L) - F_k`.
    pub descent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub steps: Vec<StepSlack>,
    pub worst_drift: f64,
    pub worst_step_sum: f64,
    pub worst_descent: f64,
    /// Violations are slacks below `-tolerance * max(1, F_0)`.
    pub tolerance: f64,
    pub first_violation: Option<usize>,
    pub passed: bool,
}

/// Checks the descent inequalities on iterates `a_0..a_t` of gradient descent
/// with step `1/inverse_step`, given `F(a_k)` and `||grad F(a_k)||`.
///
/// The drift inequality is compared in squared form so that a negative
/// `F_0 - F_k` shows up as a negative slack instead of a NaN.
pub fn descent_report<V: AsRef<[f64]>>(
    iterates: &[V],
    risks: &[f64],
    grad_norms: &[f64],
    inverse_step: f64,
    tolerance: f64,
) -> Result<DescentReport> {
    if iterates.is_empty() {
        return Err(Error::MissingIterates);
    }
    if risks.len() != iterates.len() || grad_norms.len() != iterates.len() {
        return Err(Error::DimensionMismatch {
            expected: iterates.len(),
            got: risks.len().min(grad_norms.len()),
        });
    }
    if !(inverse_step > 0.0) {
        return Err(Error::param("inverse_step", "must be positive"));
    }
    let l = inverse_step;
    let a0 = iterates[0].as_ref();
    let f0 = risks[0];
    let threshold = -tolerance * f0.abs().max(1.0);

    let mut steps = Vec::with_capacity(iterates.len().saturating_sub(1));
    let mut step_sq_sum = 0.0;
    let mut first_violation = None;
    let (mut wd, mut ws, mut wdesc) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for k in 1..iterates.len() {
        let ak = iterates[k].as_ref();
        let prev = iterates[k - 1].as_ref();
        let step = net::distance(ak, prev);
        step_sq_sum += step * step;
        let drift = net::distance(ak, a0);
        let gap = f0 - risks[k];
        let slack = StepSlack {
            step: k,
            drift: 2.0 * (k as f64 / l) * gap - drift * drift,
            step_sum: 2.0 / l * gap - step_sq_sum,
            descent: risks[k - 1] - grad_norms[k - 1].powi(2) / (2.0 * l) - risks[k],
        };
        wd = wd.min(slack.drift);
        ws = ws.min(slack.step_sum);
        wdesc = wdesc.min(slack.descent);
        if first_violation.is_none()
            && (slack.drift < threshold || slack.step_sum < threshold || slack.descent < threshold)
        {
            first_violation = Some(k);
        }
        steps.push(slack);
    }
    Ok(DescentReport {
        steps,
        worst_drift: wd,
        worst_step_sum: ws,
        worst_descent: wdesc,
        tolerance,
        passed: first_violation.is_none(),
        first_violation,
    })
}

/// [`descent_report`] on a training trace that kept its iterates.
pub fn descent_report_for_trace(
    trace: &crate::estimator::GdTrace,
    inverse_step: f64,
) -> Result<DescentReport> {
    let iterates = trace.iterates.as_ref().ok_or(Error::MissingIterates)?;
    let slices: Vec<&[f64]> = iterates.iter().map(|w| w.as_slice()).collect();
    descent_report(
        &slices,
        &trace.risks,
        &trace.grad_norms,
        inverse_step,
        EXACT_TOLERANCE,
    )
}

// ---------------------------------------------------------------------------
// Gradient bound formulas.

/// Magnitude bounds for the gradient bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// `gamma_n^*`, bound on the outer weights.
    pub outer_bound: f64,
    /// `B_n`, bound on the weights of levels `1..L-1`.
    pub inner_bound: f64,
    pub alpha: f64,
    pub steps: f64,
    pub inverse_step: f64,
    pub subnets: f64,
    pub depth: u32,
}

impl BoundParams {
    fn check(&self) -> Result<()> {
        if !(self.outer_bound >= 1.0) {
            return Err(Error::Precondition("outer bound must be >= 1".into()));
        }
        if !(self.inner_bound >= 1.0) {
            return Err(Error::Precondition("inner bound must be >= 1".into()));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::Precondition("alpha must be >= 1".into()));
        }
        if !(self.inverse_step > 0.0 && self.steps >= self.inverse_step) {
            return Err(Error::Precondition("need t_n >= L_n > 0".into()));
        }
        if !(self.subnets >= 1.0) || self.depth < 2 {
            return Err(Error::Precondition("need K_n >= 1 and L >= 2".into()));
        }
        Ok(())
    }
}

/// `c5 K^(3/2) B^(2L) gamma^2 alpha^2 sqrt(t/L_n max(F_v, 1))`.
pub fn gradient_norm_bound(p: &BoundParams, risk_at_center: f64, c5: f64) -> Result<f64> {
    p.check()?;
    Ok(c5
        * p.subnets.powf(1.5)
        * p.inner_bound.powi(2 * p.depth as i32)
        * p.outer_bound.powi(2)
        * p.alpha.powi(2)
        * (p.steps / p.inverse_step * risk_at_center.max(1.0)).sqrt())
}

/// Lipschitz-constant formula for the risk gradient:
/// `c7 max(sqrt(F_v), 1) gamma^2 B^(3L) alpha^3 K^(3/2) sqrt(t/L_n)`.
pub fn gradient_lipschitz_bound(p: &BoundParams, risk_at_center: f64, c7: f64) -> Result<f64> {
    p.check()?;
    Ok(c7
        * risk_at_center.sqrt().max(1.0)
        * p.outer_bound.powi(2)
        * p.inner_bound.powi(3 * p.depth as i32)
        * p.alpha.powi(3)
        * p.subnets.powf(1.5)
        * (p.steps / p.inverse_step).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Largest `||grad F(w1) - grad F(w2)|| / ||w1 - w2||` over the pairs.
    pub max_ratio: f64,
    pub evaluated: usize,
    /// Pairs with `w1 == w2`.
    pub skipped: usize,
}

/// Empirical Lipschitz ratio of `grad F_n` over the given weight pairs.
pub fn lipschitz_estimate(
    pairs: &[(WeightVector, WeightVector)],
    data: &Dataset,
    hp: &Hyperparams,
) -> Result<LipschitzEstimate> {
    let mut out = LipschitzEstimate {
        max_ratio: 0.0,
        evaluated: 0,
        skipped: 0,
    };
    let Some((first, _)) = pairs.first() else {
        return Ok(out);
    };
    let topo = *first.topology();
    let mut eval = RiskEvaluator::new(topo, data, hp)?;
    let mut g1 = WeightVector::zeros(topo);
    let mut g2 = WeightVector::zeros(topo);
    for (w1, w2) in pairs {
        if w1.topology() != &topo || w2.topology() != &topo {
            return Err(Error::InvalidTopology("pairs must share one topology".into()));
        }
        let dist = w1.distance(w2);
        if dist == 0.0 {
            out.skipped += 1;
            continue;
        }
        eval.value_and_gradient(w1, &mut g1);
        eval.value_and_gradient(w2, &mut g2);
        let ratio = g1.distance(&g2) / dist;
        if !ratio.is_finite() {
            return Err(Error::NonFinite {
                step: out.evaluated as u64,
                what: "gradient difference ratio",
            });
        }
        out.max_ratio = out.max_ratio.max(ratio);
        out.evaluated += 1;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Covering numbers.

/// Parameters of the covering-number bound for truncated, clipped networks
/// with `sum |outer| <= C`, `|hidden| <= B`, `|level 0| <= A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub p: f64,
    pub input_bound: f64,
    pub hidden_bound: f64,
    pub outer_bound: f64,
    pub dim: u32,
    pub smoothness: u32,
    pub depth: u32,
    pub c11: f64,
    pub c12: f64,
    pub c13: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringBound {
    /// Natural log of the bound.
    pub log_value: f64,
    /// The bound itself, `+inf` when it overflows.
    pub value: f64,
}

/// `(c11 beta^p / eps^p)^(c12 alpha^d B^((L-1)d) A^d (C/eps)^(d/k) + c13)`,
/// evaluated in log space.
pub fn covering_bound(c: &CoveringParams) -> Result<CoveringBound> {
    if !(c.eps > 0.0 && c.eps < c.beta) {
        return Err(Error::Precondition(format!(
            "need 0 < eps < beta, got eps = {}, beta = {}",
            c.eps, c.beta
        )));
    }
    if !(c.alpha >= 1.0 && c.input_bound >= 1.0 && c.hidden_bound >= 1.0 && c.outer_bound >= 1.0) {
        return Err(Error::Precondition("need alpha, A, B, C >= 1".into()));
    }
    if !(c.p >= 1.0) || c.smoothness == 0 || c.dim == 0 || c.depth < 2 {
        return Err(Error::Precondition("need p >= 1, k >= 1, d >= 1, L >= 2".into()));
    }
    if !(c.c11 > 0.0 && c.c12 >= 0.0 && c.c13 >= 0.0) {
        return Err(Error::Precondition("need c11 > 0 and c12, c13 >= 0".into()));
    }
    let d = c.dim as f64;
    let exponent = c.c12
        * c.alpha.powf(d)
        * c.hidden_bound.powf((c.depth as f64 - 1.0) * d)
        * c.input_bound.powf(d)
        * (c.outer_bound / c.eps).powf(d / c.smoothness as f64)
        + c.c13;
    let log_base = c.c11.ln() + c.p * (c.beta.ln() - c.eps.ln());
    let log_value = exponent * log_base;
    Ok(CoveringBound {
        log_value,
        value: log_value.exp(),
    })
}

/// Empirical `L_p` distance `((1/n) sum |f_i - g_i|^p)^(1/p)`.
pub fn empirical_distance(f: &[f64], g: &[f64], p: f64) -> f64 {
    let n = f.len().max(1) as f64;
    (f.iter().zip(g).map(|(a, b)| (a - b).abs().powf(p)).sum::<f64>() / n).powf(1.0 / p)
}

/// Greedy cover size at radius `eps`: walk the family in order, open a new
/// center at every function not yet within distance `< eps` of one.
pub fn greedy_cover_size(functions: &[Vec<f64>], eps: f64, p: f64) -> usize {
    let dist = distance_matrix(functions, p);
    greedy_with(&dist, functions.len(), eps)
}

fn distance_matrix(functions: &[Vec<f64>], p: f64) -> Vec<f64> {
    let m = functions.len();
    let mut dist = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let v = empirical_distance(&functions[i], &functions[j], p);
            dist[i * m + j] = v;
            dist[j * m + i] = v;
        }
    }
    dist
}

fn greedy_with(dist: &[f64], m: usize, eps: f64) -> usize {
    let mut covered = vec![false; m];
    let mut centers = 0;
    for i in 0..m {
        if covered[i] {
            continue;
        }
        centers += 1;
        for j in 0..m {
            if j == i || dist[i * m + j] < eps {
                covered[j] = true;
            }
        }
    }
    centers
}

/// Upper bound on the empirical `L_p` covering number of a finite family
/// (each function given by its values on the same points).
///
/// A cover at radius `eps' <= eps` is also a cover at `eps`, so this returns
/// the smallest greedy cover over all radii up to `eps`. The result is a valid
/// cover size and non-increasing in `eps`. Costs `O(m^4)` for `m` functions.
pub fn empirical_cover(functions: &[Vec<f64>], eps: f64, p: f64) -> usize {
    let m = functions.len();
    if m == 0 {
        return 0;
    }
    let dist = distance_matrix(functions, p);
    let mut radii: Vec<f64> = dist
        .iter()
        .enumerate()
        .filter(|(idx, v)| idx / m < idx % m && **v < eps)
        .map(|(_, v)| *v)
        .collect();
    radii.sort_by(|a, b| a.total_cmp(b));
    radii.dedup();
    // Greedy only sees which pairs are strictly closer than the radius, so
    // radii just above each pairwise distance enumerate every distinct case.
    let mut best = greedy_with(&dist, m, eps);
    for r in radii {
        best = best.min(greedy_with(&dist, m, r.next_up().min(eps)));
        if best == 1 {
            break;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Ridge objective and Polyak-Lojasiewicz inequality.

/// Penalized least squares over a fixed basis:
/// `F(a) = (1/n) ||B a - y||^2 + c2 ||a||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeProblem {
    basis: DMatrix<f64>,
    targets: DVector<f64>,
    ridge: f64,
    normal: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl RidgeProblem {
    /// `basis` has one row per observation and one column per basis function.
    pub fn new(basis: DMatrix<f64>, targets: DVector<f64>, ridge: f64) -> Result<Self> {
        if basis.nrows() == 0 || basis.ncols() == 0 {
            return Err(Error::param("basis", "needs n, K >= 1"));
        }
        if basis.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.nrows(),
                got: targets.len(),
            });
        }
        if !(ridge.is_finite() && ridge > 0.0) {
            return Err(Error::param("c2", format!("must be positive, got {ridge}")));
        }
        if !basis.iter().chain(targets.iter()).all(|v| v.is_finite()) {
            return Err(Error::param("basis", "entries must be finite"));
        }
        let n = basis.nrows() as f64;
        let k = basis.ncols();
        let normal = basis.transpose() * &basis / n + DMatrix::identity(k, k) * ridge;
        let rhs = basis.transpose() * &targets / n;
        Ok(RidgeProblem {
            basis,
            targets,
            ridge,
            normal,
            rhs,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    /// `A = (1/n) B^T B + c2 I`.
    pub fn normal_matrix(&self) -> &DMatrix<f64> {
        &self.normal
    }

    fn check(&self, a: &DVector<f64>) -> Result<()> {
        if a.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                got: a.len(),
            });
        }
        Ok(())
    }

    pub fn objective(&self, a: &DVector<f64>) -> Result<f64> {
        self.check(a)?;
        let resid = &self.basis * a - &self.targets;
        Ok(resid.norm_squared() / self.n() as f64 + self.ridge * a.norm_squared())
    }

    /// `grad F(a) = 2 A a - (2/n) B^T y`.
    pub fn gradient(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(a)?;
        Ok((&self.normal * a - &self.rhs) * 2.0)
    }

    /// Largest eigenvalue of `2A`, the smoothness constant of `F`.
    pub fn smoothness(&self) -> f64 {
        let eig = self.normal.clone().symmetric_eigenvalues();
        2.0 * eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeOptimum {
    pub a: DVector<f64>,
    pub value: f64,
}

/// Minimizer of the ridge objective by a Cholesky solve of `A a = (1/n) B^T y`.
pub fn ridge_optimum(prob: &RidgeProblem) -> Result<RidgeOptimum> {
    let chol = prob
        .normal
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("normal matrix is not positive definite".into()))?;
    let a = chol.solve(&prob.rhs);
    let value = prob.objective(&a)?;
    Ok(RidgeOptimum { a, value })
}

/// `||grad F(a)||^2 - 4 c2 (F(a) - F_opt)`; non-negative up to rounding.
pub fn pl_slack(a: &DVector<f64>, prob: &RidgeProblem, opt: &RidgeOptimum) -> Result<f64> {
    let g = prob.gradient(a)?;
    let f = prob.objective(a)?;
    Ok(g.norm_squared() - 4.0 * prob.ridge * (f - opt.value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub inverse_step: f64,
    pub rate: f64,
    /// `F(a_t) - F_opt` for `t = 0..=steps`.
    pub gaps: Vec<f64>,
    /// `rate^t (F(a_0) - F_opt)`.
    pub bounds: Vec<f64>,
    pub risks: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Smallest `bound - gap` relative to `max(1, F(a_0))`.
    pub worst_slack: f64,
    pub passed: bool,
    #[serde(skip)]
    pub iterates: Vec<DVector<f64>>,
}

/// Gradient descent with step `1/inverse_step` on the ridge objective,
/// checking `F(a_t) - F_opt <= (1 - 2 c2 / L_n)^t (F(a_0) - F_opt)` at every step.
pub fn outer_gd_convergence(
    prob: &RidgeProblem,
    a0: &DVector<f64>,
    inverse_step: f64,
    steps: usize,
) -> Result<ConvergenceReport> {
    prob.check(a0)?;
    let smooth = prob.smoothness();
    if !(inverse_step >= smooth) {
        return Err(Error::Precondition(format!(
            "L_n = {inverse_step} is below the smoothness constant {smooth}"
        )));
    }
    if !(prob.ridge <= inverse_step / 2.0) {
        return Err(Error::Precondition(format!(
            "c2 = {} exceeds L_n / 2 = {}",
            prob.ridge,
            inverse_step / 2.0
        )));
    }
    let opt = ridge_optimum(prob)?;
    let rate = 1.0 - 2.0 * prob.ridge / inverse_step;
    let mut a = a0.clone();
    let f0 = prob.objective(&a)?;
    let gap0 = f0 - opt.value;
    let scale = f0.abs().max(1.0);

    let mut report = ConvergenceReport {
        inverse_step,
        rate,
        gaps: Vec::with_capacity(steps + 1),
        bounds: Vec::with_capacity(steps + 1),
        risks: Vec::with_capacity(steps + 1),
        grad_norms: Vec::with_capacity(steps + 1),
        worst_slack: f64::INFINITY,
        passed: true,
        iterates: Vec::with_capacity(steps + 1),
    };
    let mut factor = 1.0;
    for t in 0..=steps {
        let f = prob.objective(&a)?;
        let g = prob.gradient(&a)?;
        let gap = f - opt.value;
        let bound = factor * gap0;
        let slack = (bound - gap) / scale;
        report.worst_slack = report.worst_slack.min(slack);
        if slack < -EXACT_TOLERANCE {
            report.passed = false;
        }
        report.gaps.push(gap);
        report.bounds.push(bound);
        report.risks.push(f);
        report.grad_norms.push(g.norm());
        report.iterates.push(a.clone());
        if t < steps {
            a -= g / inverse_step;
            factor *= rate;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim() -> RidgeProblem {
        RidgeProblem::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0), 1.0).unwrap()
    }

    #[test]
    fn ridge_hand_values() {
        let p = one_dim();
        let one = DVector::from_element(1, 1.0);
        assert_eq!(p.objective(&one).unwrap(), 1.0);
        assert_eq!(p.objective(&DVector::zeros(1)).unwrap(), 1.0);
        let opt = ridge_optimum(&p).unwrap();
        assert!((opt.a[0] - 0.5).abs() < 1e-15);
        assert!((opt.value - 0.5).abs() < 1e-15);
        let g = p.gradient(&one).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert!((pl_slack(&one, &p, &opt).unwrap() - 2.0).abs() < 1e-14);
        assert!(pl_slack(&opt.a, &p, &opt).unwrap().abs() < 1e-14);
        assert!(p.objective(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn ridge_zero_targets() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let p = RidgeProblem::new(b, DVector::zeros(3), 0.3).unwrap();
        let opt = ridge_optimum(&p).unwrap();
        assert!(opt.a.norm() < 1e-15);
        assert_eq!(opt.value, 0.0);
    }

    #[test]
    fn large_ridge_shrinks_the_optimum() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let y = DVector::from_column_slice(&[1.0, -2.0]);
        let small = ridge_optimum(&RidgeProblem::new(b.clone(), y.clone(), 1e-2).unwrap()).unwrap();
        let big = ridge_optimum(&RidgeProblem::new(b, y, 1e6).unwrap()).unwrap();
        assert!(big.a.norm() < 1e-5 * small.a.norm());
    }

    #[test]
    fn ridge_rejects_bad_problems() {
        let b = DMatrix::from_element(2, 1, 1.0);
        assert!(RidgeProblem::new(b.clone(), DVector::zeros(3), 1.0).is_err());
        assert!(RidgeProblem::new(b.clone(), DVector::zeros(2), 0.0).is_err());
        assert!(RidgeProblem::new(DMatrix::zeros(0, 1), DVector::zeros(0), 1.0).is_err());
    }

    #[test]
    fn one_dim_geometric_decay() {
        let p = one_dim();
        // Smoothness of F(a) = (a-1)^2 + a^2 is 4.
        assert!((p.smoothness() - 4.0).abs() < 1e-12);
        let rep = outer_gd_convergence(&p, &DVector::from_element(1, 1.0), 4.0, 10).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.rate, 0.5);
        // a_{t+1} = a_t - (4 a_t - 2)/4 = 1/2 after one step: exact optimum.
        assert!(rep.gaps[1].abs() < 1e-15);
        assert!(outer_gd_convergence(&p, &DVector::from_element(1, 1.0), 3.0, 10).is_err());
    }

    #[test]
    fn start_at_optimum_stays_there() {
        let p = one_dim();
        let opt = ridge_optimum(&p).unwrap();
        let rep = outer_gd_convergence(&p, &opt.a, 8.0, 20).unwrap();
        assert!(rep.passed);
        assert!(rep.gaps.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn descent_report_quadratic_example() {
        // F(a) = a^2, L = 2, a0 = 1 -> a1 = 0.
        let iterates = [vec![1.0], vec![0.0]];
        let rep = descent_report(&iterates, &[1.0, 0.0], &[2.0, 0.0], 2.0, EXACT_TOLERANCE).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.steps[0].descent, 0.0);
        assert_eq!(rep.steps[0].drift, 0.0);
        assert_eq!(rep.steps[0].step_sum, 0.0);
    }

    #[test]
    fn descent_report_constant_function() {
        let iterates = vec![vec![3.0, 1.0]; 5];
        let rep = descent_report(&iterates, &[7.0; 5], &[0.0; 5], 1.0, EXACT_TOLERANCE).unwrap();
        assert!(rep.passed);
        assert!(rep.steps.iter().all(|s| s.drift == 0.0 && s.descent == 0.0));
    }

    #[test]
    fn descent_report_flags_overshoot() {
        // F(a) = a^2 with L = 0.5 (too small): a1 = 1 - 4 = -3.
        let iterates = [vec![1.0], vec![-3.0]];
        let rep = descent_report(&iterates, &[1.0, 9.0], &[2.0, 6.0], 0.5, EXACT_TOLERANCE).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.first_violation, Some(1));
        assert!(descent_report::<Vec<f64>>(&[], &[], &[], 1.0, 0.0).is_err());
    }

    #[test]
    fn gradient_bound_examples() {
        let unit = BoundParams {
            outer_bound: 1.0,
            inner_bound: 1.0,
            alpha: 1.0,
            steps: 10.0,
            inverse_step: 10.0,
            subnets: 1.0,
            depth: 2,
        };
        assert_eq!(gradient_norm_bound(&unit, 0.5, 1.0).unwrap(), 1.0);
        let four = BoundParams { subnets: 4.0, ..unit };
        assert_eq!(gradient_norm_bound(&four, 0.5, 1.0).unwrap(), 8.0);
        let p = BoundParams {
            subnets: 4.0,
            inner_bound: 2.0,
            ..unit
        };
        assert_eq!(gradient_norm_bound(&p, 1.0, 1.0).unwrap(), 128.0);
        assert!(gradient_norm_bound(&BoundParams { alpha: 0.5, ..unit }, 1.0, 1.0).is_err());
        assert!(gradient_norm_bound(&BoundParams { steps: 5.0, ..unit }, 1.0, 1.0).is_err());
        assert_eq!(gradient_lipschitz_bound(&unit, 4.0, 1.0).unwrap(), 2.0);
    }

    fn unit_covering() -> CoveringParams {
        CoveringParams {
            alpha: 1.0,
            beta: 1.0,
            eps: 0.5,
            p: 2.0,
            input_bound: 1.0,
            hidden_bound: 1.0,
            outer_bound: 1.0,
            dim: 1,
            smoothness: 1,
            depth: 2,
            c11: 1.0,
            c12: 1.0,
            c13: 1.0,
        }
    }

    #[test]
    fn covering_bound_examples() {
        let b = covering_bound(&unit_covering()).unwrap();
        assert!((b.value - 64.0).abs() < 1e-9);
        assert!((b.log_value - 64f64.ln()).abs() < 1e-12);
        assert!(covering_bound(&CoveringParams { eps: 1.0, ..unit_covering() }).is_err());
        let huge = covering_bound(&CoveringParams {
            eps: 1e-6,
            hidden_bound: 50.0,
            depth: 6,
            ..unit_covering()
        })
        .unwrap();
        assert!(huge.value.is_infinite() && huge.log_value.is_finite());
        let smooth = covering_bound(&CoveringParams { smoothness: 2, ..unit_covering() }).unwrap();
        assert!(smooth.value < b.value);
    }

    #[test]
    fn cover_of_trivial_families() {
        assert_eq!(empirical_cover(&[vec![1.0, 2.0]], 0.1, 2.0), 1);
        assert_eq!(empirical_cover(&[vec![1.0, 2.0], vec![1.0, 2.0]], 0.1, 2.0), 1);
        assert_eq!(empirical_cover(&[vec![0.0], vec![1.0]], 0.5, 1.0), 2);
        assert_eq!(empirical_cover(&[vec![0.0], vec![1.0]], 1.5, 1.0), 1);
        assert_eq!(empirical_cover(&[], 1.0, 1.0), 0);
    }

    #[test]
    fn envelope_beats_plain_greedy() {
        let fam: Vec<Vec<f64>> = [0.0, 1.5, 2.2, 3.1, 4.9, 5.0, 7.3]
            .iter()
            .map(|v| vec![*v])
            .collect();
        let mut last = usize::MAX;
        for i in 1..80 {
            let eps = i as f64 * 0.1;
            let env = empirical_cover(&fam, eps, 1.0);
            assert!(env <= greedy_cover_size(&fam, eps, 1.0));
            assert!(env <= last);
            last = env;
        }
    }
}
