//! Hand-built weight settings: smooth cube indicators, piecewise-constant
//! grid networks, and shifted grid networks whose boundary strips carry
//! little sample mass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::{Topology, WeightIndex, WeightVector};

/// Which size preconditions an indicator construction enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeCheck {
    /// `n >= 8d` and `n >= e^(r+1)`; the shifted grid also needs `K <= log n - 1`.
    #[default]
    Strict,
    /// Only `n >= 8d`. The sandwich bounds still hold numerically for
    /// moderate `r`, which tests must confirm.
    Relaxed,
}

/// Axis-aligned cube `[u, v]` with margin `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    margin: f64,
}

impl CubeSpec {
    /// Requires `0 < delta <= 1` and `v_l - u_l >= 2 delta` on every axis.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, margin: f64) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len().max(1),
                got: upper.len(),
            });
        }
        if !(margin > 0.0 && margin <= 1.0) {
            return Err(Error::param("delta", format!("must lie in (0, 1], got {margin}")));
        }
        for (u, v) in lower.iter().zip(&upper) {
            if !(u.is_finite() && v.is_finite()) || v - u < 2.0 * margin {
                return Err(Error::param(
                    "cube",
                    format!("need v - u >= 2 delta, got [{u}, {v}] with delta = {margin}"),
                ));
            }
        }
        Ok(CubeSpec { lower, upper, margin })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `x in [u + delta, v - delta]`.
    pub fn in_shrunk(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(xi, (u, v))| *xi >= u + self.margin && *xi <= v - self.margin)
    }

    /// Some coordinate lies outside `[u - delta, v + delta]`.
    pub fn outside_expanded(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .any(|(xi, (u, v))| *xi < u - self.margin || *xi > v + self.margin)
    }
}

fn check_sizes(topo: &Topology, n: f64, check: SizeCheck) -> Result<()> {
    let d = topo.dim() as f64;
    if !(n >= 8.0 * d) {
        return Err(Error::Precondition(format!("need n >= 8d = {}, got {n}", 8.0 * d)));
    }
    if check == SizeCheck::Strict {
        let need = ((topo.width() + 1) as f64).exp();
        if !(n >= need) {
            return Err(Error::Precondition(format!(
                "need n >= e^(r+1) = {need:.1}, got {n}"
            )));
        }
    }
    Ok(())
}

/// Writes the indicator weights into one subnetwork block.
fn write_indicator(topo: &Topology, block: &mut [f64], lower: &[f64], upper: &[f64], slope: f64, log_n: f64) {
    let d = topo.dim();
    let r = topo.width();
    block.fill(0.0);
    for j in 0..d {
        let up = j * (d + 1);
        block[up] = -slope * lower[j];
        block[up + 1 + j] = slope;
        let down = (d + j) * (d + 1);
        block[down] = slope * upper[j];
        block[down + 1 + j] = -slope;
    }
    let sq = log_n * log_n;
    let mut offset = topo.input_level_len();
    block[offset] = -8.0 * sq * (2.0 * d as f64 - 0.5);
    for t in 0..2 * d {
        block[offset + 1 + t] = 8.0 * sq;
    }
    for _ in 2..topo.depth() {
        offset += r * (r + 1);
        block[offset] = -3.0 * sq;
        block[offset + 1] = 6.0 * sq;
    }
}

/// Sets every inner weight of subnetwork `slot` so that its output is
/// `>= 1 - 1/n` on the shrunk cube and `<= 1/n` off the expanded cube, for
/// inputs of magnitude at most `log n`. The outer weight is left alone.
pub fn indicator_subnetwork(
    w: &mut WeightVector,
    slot: usize,
    cube: &CubeSpec,
    n: f64,
    check: SizeCheck,
) -> Result<()> {
    let topo = *w.topology();
    if cube.dim() != topo.dim() {
        return Err(Error::DimensionMismatch {
            expected: topo.dim(),
            got: cube.dim(),
        });
    }
    if slot >= topo.subnets() {
        return Err(Error::BadSlot(slot));
    }
    check_sizes(&topo, n, check)?;
    let log_n = n.ln();
    let slope = 4.0 * topo.dim() as f64 * log_n * log_n / cube.margin;
    write_indicator(&topo, w.subnet_mut(slot), &cube.lower, &cube.upper, slope, log_n);
    Ok(())
}

/// Adds independent `U[-bound, bound]` noise to every inner weight.
pub fn perturb<R: Rng + ?Sized>(w: &WeightVector, bound: f64, rng: &mut R) -> Result<WeightVector> {
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(Error::param("bound", format!("must be finite and >= 0, got {bound}")));
    }
    let mut out = w.clone();
    if bound == 0.0 {
        return Ok(out);
    }
    for v in out.inner_mut() {
        *v += rng.random_range(-bound..=bound);
    }
    Ok(out)
}

/// Regular grid of `K^d` half-open cells on `[a, a + Delta)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    side: f64,
    cells: usize,
    margin: f64,
}

impl GridSpec {
    /// Needs `Delta > 0`, `K >= 1` and `0 < delta <= Delta / (2K)` so each
    /// cell is a valid [`CubeSpec`].
    pub fn new(lower: Vec<f64>, side: f64, cells: usize, margin: f64) -> Result<Self> {
        if lower.is_empty() || lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("lower", "needs d >= 1 finite coordinates"));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::param("side", format!("must be positive, got {side}")));
        }
        if cells == 0 {
            return Err(Error::param("cells", "must be >= 1"));
        }
        let width = side / cells as f64;
        if !(margin > 0.0 && margin <= 1.0 && 2.0 * margin <= width) {
            return Err(Error::param(
                "delta",
                format!("must lie in (0, min(1, cell width / 2)], got {margin} with cell width {width}"),
            ));
        }
        Ok(GridSpec {
            lower,
            side,
            cells,
            margin,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn cell_width(&self) -> f64 {
        self.side / self.cells as f64
    }

    /// `K^d`, or `None` on overflow.
    pub fn cell_count(&self) -> Option<usize> {
        u32::try_from(self.dim()).ok().and_then(|d| self.cells.checked_pow(d))
    }

    fn digits(&self, mut idx: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).map(move |_| {
            let digit = idx % self.cells;
            idx /= self.cells;
            digit
        })
    }

    /// Cell `idx` (axis 0 varies fastest) as a cube with the grid margin.
    pub fn cell(&self, idx: usize) -> CubeSpec {
        let h = self.cell_width();
        let lower: Vec<f64> = self
            .digits(idx)
            .zip(&self.lower)
            .map(|(k, a)| a + k as f64 * h)
            .collect();
        let upper = lower.iter().map(|u| u + h).collect();
        CubeSpec {
            lower,
            upper,
            margin: self.margin,
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let h = self.cell_width();
        self.digits(idx)
            .zip(&self.lower)
            .map(|(k, a)| a + (k as f64 + 0.5) * h)
            .collect()
    }

    /// Index of the half-open cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let h = self.cell_width();
        let mut idx = 0;
        let mut stride = 1;
        for (xi, a) in x.iter().zip(&self.lower) {
            let t = ((xi - a) / h).floor();
            if !(t >= 0.0 && t < self.cells as f64) {
                return None;
            }
            idx += t as usize * stride;
            stride *= self.cells;
        }
        Some(idx)
    }

    /// `|x_i - (a_i + j Delta / K)| < delta` for some axis `i` and `j in 0..=K`.
    pub fn in_boundary_strip(&self, x: &[f64]) -> bool {
        in_strips(x, &self.lower, self.cell_width(), self.cells, self.margin)
    }
}

/// Distance test against the hyperplanes `a_i + j h`, `j = 0..=count`.
fn near_hyperplane(x: f64, a: f64, h: f64, count: usize, delta: f64) -> bool {
    let j = ((x - a) / h).round().clamp(0.0, count as f64);
    // Rounding can pick the wrong neighbour right between two planes, where
    // neither is within delta <= h / 2 anyway; check both sides to be exact.
    [j - 1.0, j, j + 1.0]
        .iter()
        .filter(|k| **k >= 0.0 && **k <= count as f64)
        .any(|k| (x - (a + k * h)).abs() < delta)
}

fn in_strips(x: &[f64], lower: &[f64], h: f64, count: usize, delta: f64) -> bool {
    x.iter()
        .zip(lower)
        .any(|(xi, a)| near_hyperplane(*xi, *a, h, count, delta))
}

/// Membership predicate of the boundary strips of width `delta` around the
/// grid hyperplanes.
pub fn boundary_strips(grid: &GridSpec, delta: f64) -> impl Fn(&[f64]) -> bool + '_ {
    move |x| in_strips(x, &grid.lower, grid.cell_width(), grid.cells, delta)
}

/// Validates `slots` as pairwise distinct subnetwork indices, or returns
/// `0..count` when none are given.
fn resolve_slots(topo: &Topology, count: usize, slots: Option<&[usize]>) -> Result<Vec<usize>> {
    if count > topo.subnets() {
        return Err(Error::InsufficientSubnetworks {
            needed: count,
            available: topo.subnets(),
        });
    }
    let Some(slots) = slots else {
        return Ok((0..count).collect());
    };
    if slots.len() != count {
        return Err(Error::param(
            "slots",
            format!("need exactly {count} slots, got {}", slots.len()),
        ));
    }
    let mut seen = vec![false; topo.subnets()];
    for &s in slots {
        if s >= topo.subnets() || seen[s] {
            return Err(Error::BadSlot(s));
        }
        seen[s] = true;
    }
    Ok(slots.to_vec())
}

/// One indicator subnetwork per grid cell, weighted by `m` at the cell
/// center; every other outer weight is zero.
pub fn piecewise_constant_network(
    m: &dyn Fn(&[f64]) -> f64,
    grid: &GridSpec,
    n: f64,
    slots: Option<&[usize]>,
    topo: &Topology,
    check: SizeCheck,
) -> Result<WeightVector> {
    if grid.dim() != topo.dim() {
        return Err(Error::DimensionMismatch {
            expected: topo.dim(),
            got: grid.dim(),
        });
    }
    let count = grid.cell_count().ok_or(Error::InsufficientSubnetworks {
        needed: usize::MAX,
        available: topo.subnets(),
    })?;
    let slots = resolve_slots(topo, count, slots)?;
    check_sizes(topo, n, check)?;
    let mut w = WeightVector::zeros(*topo);
    for (idx, &slot) in slots.iter().enumerate() {
        indicator_subnetwork(&mut w, slot, &grid.cell(idx), n, check)?;
        w[WeightIndex::Outer { subnet: slot }] = m(&grid.center(idx));
    }
    Ok(w)
}

/// Empirical strip masses of the `K` shifted grids, per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSelection {
    /// Chosen shift index per axis (the first minimizer).
    pub shifts: Vec<usize>,
    /// `masses[axis][k]`: fraction of the sample within `delta` of a
    /// hyperplane of shift `k` along `axis`.
    pub masses: Vec<Vec<f64>>,
}

impl ShiftSelection {
    pub fn selected_masses(&self) -> Vec<f64> {
        self.shifts
            .iter()
            .zip(&self.masses)
            .map(|(&k, m)| m[k])
            .collect()
    }
}

/// Left end of the shifted-grid domain `[-K - 2/K, K]` before shifting.
pub fn shifted_grid_origin(k: usize) -> f64 {
    -(k as f64) - 2.0 / k as f64
}

/// Hyperplane positions of shift `shift` along one axis:
/// `-K - 2/K + shift * 2/K^2 + i * 2/K` for `i = 0..=K^2 + 1`.
pub fn shifted_hyperplanes(k: usize, shift: usize) -> Vec<f64> {
    let kf = k as f64;
    let start = shifted_grid_origin(k) + shift as f64 * 2.0 / (kf * kf);
    (0..=k * k + 1).map(|i| start + i as f64 * 2.0 / kf).collect()
}

/// For every axis, picks among the shifts `k * 2/K^2`, `k = 0..K`, one whose
/// boundary strips hold the least sample mass. The strip families of
/// different shifts are disjoint, so the chosen mass is at most `1/K`.
pub fn select_shift(points: &[f64], dim: usize, k: usize, delta: f64) -> Result<ShiftSelection> {
    if k < 2 {
        return Err(Error::param("K", format!("must be >= 2, got {k}")));
    }
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be positive"));
    }
    if dim == 0 || points.is_empty() || points.len() % dim != 0 || points.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample);
    }
    let count = points.len() / dim;
    let kf = k as f64;
    let h = 2.0 / kf;
    let mut masses = vec![vec![0.0; k]; dim];
    for (axis, row) in masses.iter_mut().enumerate() {
        for (shift, mass) in row.iter_mut().enumerate() {
            let a = shifted_grid_origin(k) + shift as f64 * 2.0 / (kf * kf);
            let hits = points
                .chunks_exact(dim)
                .filter(|x| near_hyperplane(x[axis], a, h, k * k + 1, delta))
                .count();
            *mass = hits as f64 / count as f64;
        }
    }
    let shifts = masses
        .iter()
        .map(|row| {
            let mut best = 0;
            for (s, v) in row.iter().enumerate() {
                if *v < row[best] {
                    best = s;
                }
            }
            best
        })
        .collect();
    Ok(ShiftSelection { shifts, masses })
}

/// Result of [`shifted_grid_network`].
#[derive(Debug, Clone)]
pub struct ShiftedGrid {
    pub weights: WeightVector,
    /// Subnetworks carrying the construction, `(K^2+1)^(3d)` of them.
    pub slots: Vec<usize>,
    pub selection: ShiftSelection,
    /// The grid actually used, after shifting.
    pub grid: GridSpec,
    /// Copies of the grid network, `(K^2+1)^(2d)`.
    pub repetitions: usize,
    /// Estimate of `sup |m|` over the sample and the cell centers.
    pub sup_norm: f64,
}

/// Grid network on `[-K - 2/K, K]^d` with `(K^2+1)^d` cells of side `2/K` and
/// margin `1/K^2`, shifted per axis by [`select_shift`] on `sample`, repeated
/// `(K^2+1)^(2d)` times with outer weights `m(center) / (K^2+1)^(2d)`.
pub fn shifted_grid_network(
    m: &dyn Fn(&[f64]) -> f64,
    k: usize,
    n: f64,
    sample: &[f64],
    topo: &Topology,
    check: SizeCheck,
) -> Result<ShiftedGrid> {
    let d = topo.dim();
    if k < 2 {
        return Err(Error::param("K", format!("must be >= 2, got {k}")));
    }
    let too_many = Error::InsufficientSubnetworks {
        needed: usize::MAX,
        available: topo.subnets(),
    };
    let per_axis = k.checked_mul(k).and_then(|v| v.checked_add(1)).ok_or(too_many.clone())?;
    let cells = u32::try_from(d).ok().and_then(|e| per_axis.checked_pow(e)).ok_or(too_many.clone())?;
    let repetitions = cells.checked_mul(cells).ok_or(too_many.clone())?;
    let total = cells.checked_mul(repetitions).ok_or(too_many)?;
    if total > topo.subnets() {
        return Err(Error::InsufficientSubnetworks {
            needed: total,
            available: topo.subnets(),
        });
    }
    check_sizes(topo, n, check)?;
    if check == SizeCheck::Strict && !(k as f64 <= n.ln() - 1.0) {
        return Err(Error::Precondition(format!("need K <= log n - 1, got K = {k}, n = {n}")));
    }

    let kf = k as f64;
    let delta = 1.0 / (kf * kf);
    let selection = select_shift(sample, d, k, delta)?;
    let lower: Vec<f64> = selection
        .shifts
        .iter()
        .map(|&s| shifted_grid_origin(k) + s as f64 * 2.0 / (kf * kf))
        .collect();
    let grid = GridSpec::new(lower, per_axis as f64 * 2.0 / kf, per_axis, delta)?;

    let mut sup_norm: f64 = 0.0;
    for x in sample.chunks_exact(d) {
        sup_norm = sup_norm.max(m(x).abs());
    }
    let centers: Vec<Vec<f64>> = (0..cells).map(|i| grid.center(i)).collect();
    let values: Vec<f64> = centers.iter().map(|c| m(c)).collect();
    for v in &values {
        sup_norm = sup_norm.max(v.abs());
    }

    let log_n = n.ln();
    let slope = 4.0 * d as f64 * log_n * log_n / delta;
    let scale = repetitions as f64;
    let mut w = WeightVector::zeros(*topo);
    let mut slots = Vec::with_capacity(total);
    for rep in 0..repetitions {
        for (idx, value) in values.iter().enumerate() {
            let slot = rep * cells + idx;
            let cube = grid.cell(idx);
            write_indicator(topo, w.subnet_mut(slot), &cube.lower, &cube.upper, slope, log_n);
            w[WeightIndex::Outer { subnet: slot }] = value / scale;
            slots.push(slot);
        }
    }
    Ok(ShiftedGrid {
        weights: w,
        slots,
        selection,
        grid,
        repetitions,
        sup_norm,
    })
}
