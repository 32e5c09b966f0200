//! The parallel logistic network.
//!
//! A network is a linear combination of `K` independent fully connected
//! subnetworks of depth `L` and width `r`, all using the logistic squasher:
//!
//! ```text
//! f(x) = sum_k outer[k] * f_k(x)
//! ```
//!
//! where `f_k` is the single output neuron of subnetwork `k`.
//!
//! Weights are stored densely in one flat vector so that gradient descent is
//! a plain axpy and individual coordinates can still be addressed by
//! [`WeightIndex`]. The layout is
//!
//! ```text
//! [outer; K] [subnet 0] [subnet 1] ... [subnet K-1]
//! subnet = [level 0: r x (d+1)] [level 1: r x (r+1)] ... [level L-1: r x (r+1)]
//! ```
//!
//! Every level is stored row-major with one row per receiving neuron. Column
//! 0 of each row is the bias; column `j >= 1` multiplies input (or neuron)
//! `j - 1` of the previous level. At level `L-1` only row 0 feeds the output
//! neuron; the remaining rows are stored but never influence `f`.

use serde::{Deserialize, Serialize};

use crate::batch;
use crate::error::{Error, Result};

/// Shape of a parallel network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    dim: usize,
    depth: usize,
    width: usize,
    subnets: usize,
    subnet_len: usize,
    param_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    dim: usize,
    depth: usize,
    width: usize,
    subnets: usize,
}

impl TryFrom<RawTopology> for Topology {
    type Error = Error;

    fn try_from(raw: RawTopology) -> Result<Self> {
        Topology::new(raw.dim, raw.depth, raw.width, raw.subnets)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology {
            dim: t.dim,
            depth: t.depth,
            width: t.width,
            subnets: t.subnets,
        }
    }
}

impl Topology {
    /// `dim` = d, `depth` = L, `width` = r, `subnets` = K_n.
    pub fn new(dim: usize, depth: usize, width: usize, subnets: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTopology("input dimension must be >= 1".into()));
        }
        if depth < 2 {
            return Err(Error::InvalidTopology(format!("depth must be >= 2, got {depth}")));
        }
        if width < 2 * dim {
            return Err(Error::InvalidTopology(format!(
                "width must be >= 2 * dim = {}, got {width}",
                2 * dim
            )));
        }
        if subnets == 0 {
            return Err(Error::InvalidTopology("need at least one subnetwork".into()));
        }
        let overflow = || Error::InvalidTopology("parameter count overflows".into());
        let hidden = (depth - 1)
            .checked_mul(width)
            .and_then(|v| v.checked_mul(width + 1))
            .ok_or_else(overflow)?;
        let input = width.checked_mul(dim + 1).ok_or_else(overflow)?;
        let subnet_len = hidden.checked_add(input).ok_or_else(overflow)?;
        let param_count = subnets
            .checked_mul(subnet_len + 1)
            .ok_or_else(overflow)?;
        Ok(Topology {
            dim,
            depth,
            width,
            subnets,
            subnet_len,
            param_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn subnets(&self) -> usize {
        self.subnets
    }

    /// Total number of weights, `K * (1 + (L-1) r (r+1) + r (d+1))`.
    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Number of inner weights of one subnetwork (levels 0..L-1).
    pub fn subnet_len(&self) -> usize {
        self.subnet_len
    }

    /// Same topology with a different number of subnetworks.
    pub fn with_subnets(&self, subnets: usize) -> Result<Self> {
        Topology::new(self.dim, self.depth, self.width, subnets)
    }

    pub(crate) fn input_level_len(&self) -> usize {
        self.width * (self.dim + 1)
    }

    pub(crate) fn hidden_level_len(&self) -> usize {
        self.width * (self.width + 1)
    }

    /// Activations cached per subnetwork and point: `r` per hidden level plus the output.
    pub(crate) fn activation_len(&self) -> usize {
        self.width * (self.depth - 1) + 1
    }

    /// Number of columns (bias included) of the weight matrix at `level`.
    pub fn columns(&self, level: usize) -> usize {
        if level == 0 {
            self.dim + 1
        } else {
            self.width + 1
        }
    }

    /// Offset of `level` inside a subnetwork block.
    fn level_offset(&self, level: usize) -> usize {
        if level == 0 {
            0
        } else {
            self.input_level_len() + (level - 1) * self.hidden_level_len()
        }
    }

    /// Flat position of `idx`, or `None` when out of range.
    pub fn index_of(&self, idx: WeightIndex) -> Option<usize> {
        match idx {
            WeightIndex::Outer { subnet } => (subnet < self.subnets).then_some(subnet),
            WeightIndex::Inner {
                subnet,
                level,
                neuron,
                input,
            } => {
                if subnet >= self.subnets
                    || level >= self.depth
                    || neuron >= self.width
                    || input >= self.columns(level)
                {
                    return None;
                }
                Some(
                    self.subnets
                        + subnet * self.subnet_len
                        + self.level_offset(level)
                        + neuron * self.columns(level)
                        + input,
                )
            }
        }
    }
}

/// Coordinate of a single weight.
///
/// `Inner` addresses `w_{k,i,j}^{(l)}` with `subnet = k`, `level = l`
/// (0..L-1), `neuron = i` (0-based receiving neuron) and `input = j`, where
/// `input = 0` is the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightIndex {
    Outer {
        subnet: usize,
    },
    Inner {
        subnet: usize,
        level: usize,
        neuron: usize,
        input: usize,
    },
}

/// All weights of a parallel network (also used for gradients, which share the shape).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    topo: Topology,
    data: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(topo: Topology) -> Self {
        WeightVector {
            topo,
            data: vec![0.0; topo.param_count()],
        }
    }

    pub fn from_vec(topo: Topology, data: Vec<f64>) -> Result<Self> {
        if data.len() != topo.param_count() {
            return Err(Error::DimensionMismatch {
                expected: topo.param_count(),
                got: data.len(),
            });
        }
        Ok(WeightVector { topo, data })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn outer(&self) -> &[f64] {
        &self.data[..self.topo.subnets]
    }

    pub fn outer_mut(&mut self) -> &mut [f64] {
        let k = self.topo.subnets;
        &mut self.data[..k]
    }

    /// Inner weights of subnetwork `k` (levels 0..L-1).
    pub fn subnet(&self, k: usize) -> &[f64] {
        let start = self.topo.subnets + k * self.topo.subnet_len;
        &self.data[start..start + self.topo.subnet_len]
    }

    pub fn subnet_mut(&mut self, k: usize) -> &mut [f64] {
        let start = self.topo.subnets + k * self.topo.subnet_len;
        let len = self.topo.subnet_len;
        &mut self.data[start..start + len]
    }

    /// All inner weights, subnetwork after subnetwork.
    pub fn inner(&self) -> &[f64] {
        &self.data[self.topo.subnets..]
    }

    pub fn inner_mut(&mut self) -> &mut [f64] {
        let k = self.topo.subnets;
        &mut self.data[k..]
    }

    pub fn get(&self, idx: WeightIndex) -> Option<f64> {
        self.topo.index_of(idx).map(|i| self.data[i])
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &WeightVector) -> f64 {
        distance(&self.data, &other.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<WeightIndex> for WeightVector {
    type Output = f64;

    fn index(&self, idx: WeightIndex) -> &f64 {
        let i = self
            .topo
            .index_of(idx)
            .unwrap_or_else(|| panic!("weight index {idx:?} out of range"));
        &self.data[i]
    }
}

impl std::ops::IndexMut<WeightIndex> for WeightVector {
    fn index_mut(&mut self, idx: WeightIndex) -> &mut f64 {
        let i = self
            .topo
            .index_of(idx)
            .unwrap_or_else(|| panic!("weight index {idx:?} out of range"));
        &mut self.data[i]
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Neuron outputs `f_{k,i}^{(l)}(x)` of every subnetwork at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    topo: Topology,
    values: Vec<f64>,
}

impl Activations {
    /// Output of neuron `neuron` at `level` (1..=L) of subnetwork `subnet`.
    ///
    /// Level `L` has a single neuron (index 0).
    pub fn get(&self, subnet: usize, level: usize, neuron: usize) -> f64 {
        let t = &self.topo;
        assert!(level >= 1 && level <= t.depth, "level {level} out of range");
        let base = subnet * t.activation_len();
        if level == t.depth {
            assert_eq!(neuron, 0, "the output level has one neuron");
            self.values[base + t.width * (t.depth - 1)]
        } else {
            assert!(neuron < t.width);
            self.values[base + (level - 1) * t.width + neuron]
        }
    }

    /// `f_{k,1}^{(L)}(x)` for subnetwork `k`.
    pub fn output(&self, subnet: usize) -> f64 {
        self.get(subnet, self.topo.depth, 0)
    }

    /// Every stored activation, subnetwork after subnetwork.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The logistic squasher `1 / (1 + e^{-x})`, evaluated without overflow.
#[inline]
pub fn logistic(x: f64) -> f64 {
    // 1/(1+e^-x) for x >= 0 and e^x/(1+e^x) for x < 0, selected without a
    // branch: e = e^-|x| never overflows.
    let e = (-x.abs()).exp();
    let num = if x >= 0.0 { 1.0 } else { e };
    num / (1.0 + e)
}

fn check_point(topo: &Topology, x: &[f64]) -> Result<()> {
    if x.len() != topo.dim {
        return Err(Error::DimensionMismatch {
            expected: topo.dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Evaluates one subnetwork, filling `acts` (length `activation_len`) and
/// returning its output neuron.
#[inline]
pub(crate) fn subnet_forward(topo: &Topology, block: &[f64], x: &[f64], acts: &mut [f64]) -> f64 {
    let d = topo.dim;
    let r = topo.width;
    let depth = topo.depth;

    let (first, _) = acts.split_at_mut(r);
    for (i, a) in first.iter_mut().enumerate() {
        let row = &block[i * (d + 1)..(i + 1) * (d + 1)];
        let mut z = row[0];
        for (w, xj) in row[1..].iter().zip(x) {
            z += w * xj;
        }
        *a = logistic(z);
    }

    let mut offset = topo.input_level_len();
    for level in 1..depth {
        let (prev_all, next_all) = acts.split_at_mut(level * r);
        let prev = &prev_all[(level - 1) * r..];
        let rows = if level + 1 == depth { 1 } else { r };
        for (i, a) in next_all[..rows].iter_mut().enumerate() {
            let row = &block[offset + i * (r + 1)..offset + (i + 1) * (r + 1)];
            let mut z = row[0];
            for (w, p) in row[1..].iter().zip(prev) {
                z += w * p;
            }
            *a = logistic(z);
        }
        offset += topo.hidden_level_len();
    }
    acts[r * (depth - 1)]
}

/// Accumulates `upstream * d(f_k)/d(w)` for every inner weight of one
/// subnetwork into `grad` (same layout as `block`). `acts` must come from
/// [`subnet_forward`] at the same `x`; `scratch` needs `2 * r` entries.
#[inline]
pub(crate) fn subnet_backward(
    topo: &Topology,
    block: &[f64],
    x: &[f64],
    acts: &[f64],
    upstream: f64,
    grad: &mut [f64],
    scratch: &mut [f64],
) {
    let d = topo.dim;
    let r = topo.width;
    let depth = topo.depth;

    let out = acts[r * (depth - 1)];
    let delta_out = upstream * out * (1.0 - out);
    if delta_out == 0.0 {
        return;
    }

    let (delta, next) = scratch.split_at_mut(r);

    // Level L-1, row 0 only.
    let mut offset = topo.input_level_len() + (depth - 2) * topo.hidden_level_len();
    let prev = &acts[(depth - 2) * r..(depth - 1) * r];
    grad[offset] += delta_out;
    for j in 0..r {
        grad[offset + 1 + j] += delta_out * prev[j];
        let a = prev[j];
        delta[j] = delta_out * block[offset + 1 + j] * a * (1.0 - a);
    }

    // Remaining hidden levels, from L-2 down to 1.
    for level in (1..depth - 1).rev() {
        offset -= topo.hidden_level_len();
        let prev = &acts[(level - 1) * r..level * r];
        next[..r].fill(0.0);
        for i in 0..r {
            let di = delta[i];
            if di == 0.0 {
                continue;
            }
            let row = offset + i * (r + 1);
            grad[row] += di;
            for j in 0..r {
                grad[row + 1 + j] += di * prev[j];
                next[j] += di * block[row + 1 + j];
            }
        }
        for j in 0..r {
            let a = prev[j];
            delta[j] = next[j] * a * (1.0 - a);
        }
    }

    // Level 0.
    for i in 0..r {
        let di = delta[i];
        if di == 0.0 {
            continue;
        }
        let row = i * (d + 1);
        grad[row] += di;
        for j in 0..d {
            grad[row + 1 + j] += di * x[j];
        }
    }
}

/// Evaluates `f_w(x)` and returns every neuron output.
pub fn forward(w: &WeightVector, x: &[f64]) -> Result<(f64, Activations)> {
    let topo = *w.topology();
    check_point(&topo, x)?;
    let alen = topo.activation_len();
    let mut values = vec![0.0; topo.subnets * alen];
    let mut value = 0.0;
    for (k, acts) in values.chunks_exact_mut(alen).enumerate() {
        let out = subnet_forward(&topo, w.subnet(k), x, acts);
        value += w.outer()[k] * out;
    }
    Ok((value, Activations { topo, values }))
}

/// `f_w(x)` without keeping the activations.
pub fn evaluate(w: &WeightVector, x: &[f64]) -> Result<f64> {
    let topo = *w.topology();
    check_point(&topo, x)?;
    Ok(evaluate_unchecked(w, x, &mut vec![0.0; topo.activation_len()]))
}

pub(crate) fn evaluate_unchecked(w: &WeightVector, x: &[f64], acts: &mut [f64]) -> f64 {
    let topo = w.topology();
    let mut value = 0.0;
    for (k, c) in w.outer().iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        value += c * subnet_forward(topo, w.subnet(k), x, acts);
    }
    value
}

/// `f_w` at many points, given row-major in `xs` with `d` values per point.
///
/// Uses the vectorized logistic, so values can differ from [`evaluate`] in
/// the last few bits.
pub fn evaluate_many(w: &WeightVector, xs: &[f64]) -> Result<Vec<f64>> {
    let d = w.topology().dim;
    if xs.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d * (xs.len() / d + 1),
            got: xs.len(),
        });
    }
    let mut out = vec![0.0; xs.len() / d];
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::is_x86_feature_detected as has;
        if has!("avx512f") && has!("fma") {
            // SAFETY: the features were detected at runtime.
            unsafe { evaluate_many_avx512(w, xs, &mut out) };
            return Ok(out);
        }
        if has!("avx2") && has!("fma") {
            // SAFETY: the features were detected at runtime.
            unsafe { evaluate_many_avx2(w, xs, &mut out) };
            return Ok(out);
        }
    }
    evaluate_many_impl(w, xs, &mut out);
    Ok(out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx2,fma")]
unsafe fn evaluate_many_avx512(w: &WeightVector, xs: &[f64], out: &mut [f64]) {
    evaluate_many_impl(w, xs, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn evaluate_many_avx2(w: &WeightVector, xs: &[f64], out: &mut [f64]) {
    evaluate_many_impl(w, xs, out)
}

#[inline(always)]
fn evaluate_many_impl(w: &WeightVector, xs: &[f64], out: &mut [f64]) {
    const CHUNK: usize = 512;
    let topo = *w.topology();
    let d = topo.dim;
    let alen = topo.activation_len();
    let mut cols = vec![0.0; d * CHUNK];
    let mut acts = vec![0.0; alen * CHUNK];
    for (pts, vals) in xs.chunks(d * CHUNK).zip(out.chunks_mut(CHUNK)) {
        let m = vals.len();
        for (p, x) in pts.chunks_exact(d).enumerate() {
            for (j, v) in x.iter().enumerate() {
                cols[j * m + p] = *v;
            }
        }
        vals.fill(0.0);
        for (k, &c) in w.outer().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let acts = &mut acts[..alen * m];
            batch::forward(&topo, w.subnet(k), &cols[..d * m], m, acts);
            for (v, o) in vals.iter_mut().zip(&acts[(alen - 1) * m..]) {
                *v += c * o;
            }
        }
    }
}

/// Output of subnetwork `k` alone, `f_{k,1}^{(L)}(x)`.
pub fn subnet_output(w: &WeightVector, k: usize, x: &[f64]) -> Result<f64> {
    let topo = *w.topology();
    check_point(&topo, x)?;
    if k >= topo.subnets {
        return Err(Error::BadSlot(k));
    }
    let mut acts = vec![0.0; topo.activation_len()];
    Ok(subnet_forward(&topo, w.subnet(k), x, &mut acts))
}

/// Partial derivatives of `f_w(x)` with respect to every weight, in the
/// layout of `w`.
pub fn network_gradient(w: &WeightVector, x: &[f64]) -> Result<WeightVector> {
    let topo = *w.topology();
    check_point(&topo, x)?;
    let mut grad = WeightVector::zeros(topo);
    let mut acts = vec![0.0; topo.activation_len()];
    let mut scratch = vec![0.0; 2 * topo.width];
    for k in 0..topo.subnets {
        let out = subnet_forward(&topo, w.subnet(k), x, &mut acts);
        grad.outer_mut()[k] = out;
        let c = w.outer()[k];
        subnet_backward(
            &topo,
            w.subnet(k),
            x,
            &acts,
            c,
            grad.subnet_mut(k),
            &mut scratch,
        );
    }
    Ok(grad)
}
