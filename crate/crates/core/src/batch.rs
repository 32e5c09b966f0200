//! Point-batched subnetwork evaluation.
//!
//! Every loop runs over points, so the compiler can vectorize it, including
//! the exponential inside the logistic. Buffers are column-major: one
//! contiguous column of `m` values per input coordinate or neuron.
//! Reductions use four fixed partial sums and nothing is fused, so results
//! do not depend on the instruction set a caller is compiled for.

use crate::net::Topology;

const LOG2E: f64 = std::f64::consts::LOG2_E;
// ln 2 split so that `n * LN2_HI` is exact for |n| < 2^11.
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
// Adding 1.5 * 2^52 rounds to the nearest integer and leaves it in the low
// mantissa bits.
const ROUNDER: f64 = 6_755_399_441_055_744.0;
// Keeps 2^n normal.
const EXP_FLOOR: f64 = -708.0;

/// `e^x` for `x <= 0`, within a few ulp for `x >= -708`. Smaller arguments
/// return `e^-708`. Branch-free so it vectorizes.
#[inline(always)]
pub(crate) fn exp_nonpositive(x: f64) -> f64 {
    let x = x.max(EXP_FLOOR);
    let shifted = x * LOG2E + ROUNDER;
    let n = shifted - ROUNDER;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // Taylor polynomial of degree 13 on |r| <= ln2 / 2.
    let mut p: f64 = 1.0 / 6_227_020_800.0;
    p = p.mul_add(r, 1.0 / 479_001_600.0);
    p = p.mul_add(r, 1.0 / 39_916_800.0);
    p = p.mul_add(r, 1.0 / 3_628_800.0);
    p = p.mul_add(r, 1.0 / 362_880.0);
    p = p.mul_add(r, 1.0 / 40_320.0);
    p = p.mul_add(r, 1.0 / 5_040.0);
    p = p.mul_add(r, 1.0 / 720.0);
    p = p.mul_add(r, 1.0 / 120.0);
    p = p.mul_add(r, 1.0 / 24.0);
    p = p.mul_add(r, 1.0 / 6.0);
    p = p.mul_add(r, 0.5);
    p = p.mul_add(r, 1.0);
    p = p.mul_add(r, 1.0);
    let k = (shifted.to_bits() as i64).wrapping_sub(ROUNDER.to_bits() as i64);
    let scale = f64::from_bits(((k + 1023) as u64) << 52);
    p * scale
}

/// Logistic squasher applied in place, same branch selection as
/// [`crate::net::logistic`].
#[inline(always)]
pub(crate) fn logistic_in_place(z: &mut [f64]) {
    for v in z.iter_mut() {
        let x = *v;
        let e = exp_nonpositive(-x.abs());
        let num = if x >= 0.0 { 1.0 } else { e };
        *v = num / (1.0 + e);
    }
}

#[inline(always)]
pub(crate) fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        for l in 0..4 {
            acc[l] += c[l];
        }
    }
    for (l, v) in rest.iter().enumerate() {
        acc[l] += v;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

#[inline(always)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        acc[l] += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Column offset of neuron `i` at level `level` (1..=L) in an activation buffer.
#[inline(always)]
pub(crate) fn act_column(topo: &Topology, level: usize, i: usize) -> usize {
    (level - 1) * topo.width() + i
}

/// Forward pass of one subnetwork for `m` points. `cols` holds `d` input
/// columns; `acts` receives `activation_len` columns, the last one being
/// the subnetwork output.
#[inline(always)]
pub(crate) fn forward(topo: &Topology, block: &[f64], cols: &[f64], m: usize, acts: &mut [f64]) {
    let d = topo.dim();
    let r = topo.width();
    let depth = topo.depth();
    debug_assert_eq!(cols.len(), d * m);
    debug_assert_eq!(acts.len(), topo.activation_len() * m);

    for i in 0..r {
        let row = &block[i * (d + 1)..(i + 1) * (d + 1)];
        let z = &mut acts[i * m..(i + 1) * m];
        z.fill(row[0]);
        for j in 0..d {
            let w = row[1 + j];
            for (zp, xp) in z.iter_mut().zip(&cols[j * m..(j + 1) * m]) {
                *zp += w * xp;
            }
        }
        logistic_in_place(z);
    }

    let mut offset = topo.input_level_len();
    for level in 1..depth {
        let (prev_all, next_all) = acts.split_at_mut(level * r * m);
        let prev = &prev_all[(level - 1) * r * m..];
        let rows = if level + 1 == depth { 1 } else { r };
        for i in 0..rows {
            let row = &block[offset + i * (r + 1)..offset + (i + 1) * (r + 1)];
            let z = &mut next_all[i * m..(i + 1) * m];
            z.fill(row[0]);
            for j in 0..r {
                let w = row[1 + j];
                for (zp, pp) in z.iter_mut().zip(&prev[j * m..(j + 1) * m]) {
                    *zp += w * pp;
                }
            }
            logistic_in_place(z);
        }
        offset += topo.hidden_level_len();
    }
}

/// Accumulates `sum_p upstream[p] * d(f_k(x_p))/d(w)` over all inner
/// weights of one subnetwork into `grad`. `acts` comes from [`forward`] on the
/// same points; `scratch` needs `3 * r * m` entries.
#[inline(always)]
pub(crate) fn backward(
    topo: &Topology,
    block: &[f64],
    cols: &[f64],
    m: usize,
    acts: &[f64],
    upstream: &[f64],
    grad: &mut [f64],
    scratch: &mut [f64],
) {
    let d = topo.dim();
    let r = topo.width();
    let depth = topo.depth();
    let (dout, rest) = scratch.split_at_mut(m);
    let (delta, rest) = rest.split_at_mut(r * m);
    let next = &mut rest[..r * m];

    let out = &acts[act_column(topo, depth, 0) * m..][..m];
    for ((dp, &u), &o) in dout.iter_mut().zip(upstream).zip(out) {
        *dp = u * o * (1.0 - o);
    }

    // Level L-1, row 0 only.
    let mut offset = topo.input_level_len() + (depth - 2) * topo.hidden_level_len();
    let prev = &acts[(depth - 2) * r * m..(depth - 1) * r * m];
    grad[offset] += sum(dout);
    for j in 0..r {
        let a = &prev[j * m..(j + 1) * m];
        grad[offset + 1 + j] += dot(dout, a);
        let w = block[offset + 1 + j];
        for ((dl, &g), &ap) in delta[j * m..(j + 1) * m].iter_mut().zip(&*dout).zip(a) {
            *dl = g * w * ap * (1.0 - ap);
        }
    }

    // Remaining hidden levels, from L-2 down to 1.
    for level in (1..depth - 1).rev() {
        offset -= topo.hidden_level_len();
        let prev = &acts[(level - 1) * r * m..level * r * m];
        next.fill(0.0);
        for i in 0..r {
            let di = &delta[i * m..(i + 1) * m];
            let row = offset + i * (r + 1);
            grad[row] += sum(di);
            for j in 0..r {
                grad[row + 1 + j] += dot(di, &prev[j * m..(j + 1) * m]);
                let w = block[row + 1 + j];
                for (np, &dp) in next[j * m..(j + 1) * m].iter_mut().zip(di) {
                    *np += dp * w;
                }
            }
        }
        for j in 0..r {
            let a = &prev[j * m..(j + 1) * m];
            for ((dl, &np), &ap) in delta[j * m..(j + 1) * m].iter_mut().zip(&next[j * m..(j + 1) * m]).zip(a) {
                *dl = np * ap * (1.0 - ap);
            }
        }
    }

    // Level 0.
    for i in 0..r {
        let di = &delta[i * m..(i + 1) * m];
        let row = i * (d + 1);
        grad[row] += sum(di);
        for j in 0..d {
            grad[row + 1 + j] += dot(di, &cols[j * m..(j + 1) * m]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{self, Topology, WeightVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exp_matches_std() {
        let mut worst: f64 = 0.0;
        let mut x = -708.0;
        while x <= 0.0 {
            let rel = (exp_nonpositive(x) - x.exp()).abs() / x.exp();
            worst = worst.max(rel);
            x += 0.000_731;
        }
        assert!(worst < 1e-15, "worst relative error {worst:e}");
        assert_eq!(exp_nonpositive(0.0), 1.0);
        assert!(exp_nonpositive(-1e300) > 0.0);
    }

    #[test]
    fn batched_logistic_matches_scalar() {
        let mut z: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.37).collect();
        let expect: Vec<f64> = z.iter().map(|&x| net::logistic(x)).collect();
        logistic_in_place(&mut z);
        for (a, b) in z.iter().zip(&expect) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
        }
    }

    #[test]
    fn reductions_match_naive_sums() {
        let a: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..11).map(|i| 2.0 - i as f64).collect();
        assert_eq!(sum(&a), 55.0);
        assert_eq!(dot(&a, &b), a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>());
        assert_eq!(sum(&[]), 0.0);
    }

    #[test]
    fn batched_forward_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(d, depth, r) in &[(1, 2, 2), (2, 3, 4), (3, 4, 6)] {
            let topo = Topology::new(d, depth, r, 1).unwrap();
            let mut w = WeightVector::zeros(topo);
            for v in w.as_mut_slice() {
                *v = rng.random_range(-3.0..3.0);
            }
            let m = 7;
            let pts: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let cols: Vec<f64> = (0..d).flat_map(|j| pts.iter().map(move |p| p[j])).collect();
            let mut acts = vec![0.0; topo.activation_len() * m];
            forward(&topo, w.subnet(0), &cols, m, &mut acts);
            for (p, x) in pts.iter().enumerate() {
                let expect = net::subnet_output(&w, 0, x).unwrap();
                let got = acts[act_column(&topo, depth, 0) * m + p];
                assert!((got - expect).abs() < 1e-14);
            }
        }
    }
}
