//! Test-side oracles written from the documented weight layout only, with
//! no calls into the library's evaluation or solver code.
#![allow(dead_code)]

/// Shape `(d, L, r, K)`.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub d: usize,
    pub depth: usize,
    pub r: usize,
    pub k: usize,
}

impl Shape {
    pub fn subnet_len(&self) -> usize {
        self.r * (self.d + 1) + (self.depth - 1) * self.r * (self.r + 1)
    }

    pub fn params(&self) -> usize {
        self.k * (1 + self.subnet_len())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Output of subnetwork `j`: `r` level-0 neurons on the input, `L - 2` full
/// hidden levels, and neuron 0 of the last level.
pub fn subnet(s: Shape, w: &[f64], j: usize, x: &[f64]) -> f64 {
    let block = &w[s.k + j * s.subnet_len()..s.k + (j + 1) * s.subnet_len()];
    let mut a: Vec<f64> = (0..s.r)
        .map(|i| {
            let row = &block[i * (s.d + 1)..(i + 1) * (s.d + 1)];
            sigmoid(row[0] + (0..s.d).map(|c| row[1 + c] * x[c]).sum::<f64>())
        })
        .collect();
    let mut off = s.r * (s.d + 1);
    for level in 1..s.depth {
        let rows = if level + 1 == s.depth { 1 } else { s.r };
        a = (0..rows)
            .map(|i| {
                let row = &block[off + i * (s.r + 1)..off + (i + 1) * (s.r + 1)];
                sigmoid(row[0] + (0..s.r).map(|c| row[1 + c] * a[c]).sum::<f64>())
            })
            .collect();
        off += s.r * (s.r + 1);
    }
    a[0]
}

pub fn network(s: Shape, w: &[f64], x: &[f64]) -> f64 {
    (0..s.k).map(|j| w[j] * subnet(s, w, j, x)).sum()
}

/// `(1/n) sum 1[|x|_inf <= alpha] (f(x_i) - y_i)^2 + c2 sum outer^2`.
pub fn risk(s: Shape, w: &[f64], xs: &[f64], ys: &[f64], alpha: f64, c2: f64) -> f64 {
    let n = ys.len() as f64;
    let mut total = 0.0;
    for (x, y) in xs.chunks(s.d).zip(ys) {
        if x.iter().all(|v| v.abs() <= alpha) {
            total += (network(s, w, x) - y).powi(2);
        }
    }
    total / n + c2 * w[..s.k].iter().map(|a| a * a).sum::<f64>()
}

pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    let mut probe = w.to_vec();
    (0..w.len())
        .map(|i| {
            probe[i] = w[i] + h;
            let plus = f(&probe);
            probe[i] = w[i] - h;
            let minus = f(&probe);
            probe[i] = w[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| <= rel * max(|a|, |b|)` or `|a - b| <= abs`, entrywise; returns
/// the worst ratio of error to allowance.
pub fn mismatch(a: &[f64], b: &[f64], rel: f64, abs: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / (rel * x.abs().max(y.abs())).max(abs))
        .fold(0.0, f64::max)
}

/// Solves `m z = rhs` by Gaussian elimination with partial pivoting;
/// `m` is row-major `k x k`.
pub fn solve(mut m: Vec<f64>, mut rhs: Vec<f64>) -> Vec<f64> {
    let k = rhs.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a * k + col].abs().total_cmp(&m[b * k + col].abs()))
            .unwrap();
        if piv != col {
            for c in 0..k {
                m.swap(col * k + c, piv * k + c);
            }
            rhs.swap(col, piv);
        }
        for row in col + 1..k {
            let f = m[row * k + col] / m[col * k + col];
            for c in col..k {
                m[row * k + c] -= f * m[col * k + c];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut z = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| m[row * k + c] * z[c]).sum();
        z[row] = (rhs[row] - s) / m[row * k + row];
    }
    z
}

/// Ridge problem `F(a) = (1/n)|B a - y|^2 + c2 |a|^2`, with `B` row-major `n x k`.
#[derive(Debug, Clone)]
pub struct Ridge {
    pub n: usize,
    pub k: usize,
    pub basis: Vec<f64>,
    pub y: Vec<f64>,
    pub c2: f64,
}

impl Ridge {
    pub fn objective(&self, a: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let row = &self.basis[i * self.k..(i + 1) * self.k];
            let fit: f64 = row.iter().zip(a).map(|(b, x)| b * x).sum();
            s += (fit - self.y[i]).powi(2);
        }
        s / self.n as f64 + self.c2 * a.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn gradient(&self, a: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = a.iter().map(|x| 2.0 * self.c2 * x).collect();
        for i in 0..self.n {
            let row = &self.basis[i * self.k..(i + 1) * self.k];
            let fit: f64 = row.iter().zip(a).map(|(b, x)| b * x).sum();
            let r = 2.0 * (fit - self.y[i]) / self.n as f64;
            for (gj, b) in g.iter_mut().zip(row) {
                *gj += r * b;
            }
        }
        g
    }

    /// `A = (1/n) B^T B + c2 I`, row-major.
    pub fn normal(&self) -> Vec<f64> {
        let k = self.k;
        let mut m = vec![0.0; k * k];
        for i in 0..self.n {
            let row = &self.basis[i * k..(i + 1) * k];
            for p in 0..k {
                for q in 0..k {
                    m[p * k + q] += row[p] * row[q] / self.n as f64;
                }
            }
        }
        for p in 0..k {
            m[p * k + p] += self.c2;
        }
        m
    }

    pub fn optimum(&self) -> (Vec<f64>, f64) {
        let k = self.k;
        let mut rhs = vec![0.0; k];
        for i in 0..self.n {
            for p in 0..k {
                rhs[p] += self.basis[i * k + p] * self.y[i] / self.n as f64;
            }
        }
        let a = solve(self.normal(), rhs);
        let f = self.objective(&a);
        (a, f)
    }

    /// Gershgorin upper bound on the largest eigenvalue of `2A`.
    pub fn gershgorin(&self) -> f64 {
        let m = self.normal();
        (0..self.k)
            .map(|p| 2.0 * (0..self.k).map(|q| m[p * self.k + q].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
