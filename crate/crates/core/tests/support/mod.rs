#![allow(dead_code, clippy::needless_range_loop)]

use gbtsvm::dataset_io::{Dataset, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting. `None`
/// when a pivot falls below `1e-12` times the largest entry.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

pub fn objective(q: &[Vec<f64>], lin: &[f64], alpha: &[f64]) -> f64 {
    let m = lin.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += alpha[i] * q[i][j] * alpha[j];
        }
    }
    lin.iter().zip(alpha).map(|(a, b)| a * b).sum::<f64>() - 0.5 * quad
}

/// Maximizes `qᵀα − ½ αᵀQα` on `0 ≤ α ≤ upper` by trying every assignment of
/// each coordinate to {lower, upper, free}, solving the stationarity system on
/// the free block, and keeping the best feasible candidate. Exact for
/// positive-definite `Q` (the maximizer is stationary on its own face).
pub fn active_set_oracle(q: &[Vec<f64>], lin: &[f64], upper: &[f64]) -> (Vec<f64>, f64) {
    let m = lin.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for code in 0..3usize.pow(m as u32) {
        let mut pattern = Vec::with_capacity(m);
        let mut c = code;
        for _ in 0..m {
            pattern.push(c % 3);
            c /= 3;
        }
        let mut alpha: Vec<f64> = (0..m)
            .map(|i| if pattern[i] == 1 { upper[i] } else { 0.0 })
            .collect();
        let free: Vec<usize> = (0..m).filter(|&i| pattern[i] == 2).collect();
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| free.iter().map(|&j| q[i][j]).collect())
                .collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| {
                    lin[i]
                        - (0..m)
                            .filter(|&k| pattern[k] == 1)
                            .map(|k| q[i][k] * upper[k])
                            .sum::<f64>()
                })
                .collect();
            let Some(x) = gauss_solve(a, b) else { continue };
            if free
                .iter()
                .zip(&x)
                .any(|(&i, &v)| v < -1e-12 || v > upper[i] + 1e-12)
            {
                continue;
            }
            for (&i, v) in free.iter().zip(x) {
                alpha[i] = v.clamp(0.0, upper[i]);
            }
        }
        let f = objective(q, lin, &alpha);
        if best.as_ref().map_or(true, |(_, bf)| f > *bf) {
            best = Some((alpha, f));
        }
    }
    best.expect("the all-lower pattern is always feasible")
}

/// Random positive-definite box QP: `Q = BᵀB + 0.1 I`.
pub struct RandomQp {
    pub q: Vec<Vec<f64>>,
    pub lin: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn random_qp(rng: &mut ChaCha8Rng, m: usize) -> RandomQp {
    let b: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut q = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            q[i][j] = (0..m).map(|k| b[k][i] * b[k][j]).sum();
        }
        q[i][i] += 0.1;
    }
    for i in 0..m {
        for j in 0..i {
            q[i][j] = q[j][i];
        }
    }
    RandomQp {
        q,
        lin: (0..m).map(|_| rng.random_range(-0.5..2.0)).collect(),
        upper: (0..m).map(|_| rng.random_range(0.1..3.0)).collect(),
    }
}

/// Two Gaussian clouds with the given center offset, labels balanced.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, separation: f64) -> Dataset {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 {
            Label::Positive
        } else {
            Label::Negative
        };
        let shift = if label == Label::Positive {
            separation / 2.0
        } else {
            -separation / 2.0
        };
        let row: Vec<f64> = (0..d)
            .map(|j| {
                let g: f64 = (0..6).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() / 2.0;
                g + if j == 0 { shift } else { 0.0 }
            })
            .collect();
        rows.push(row);
        labels.push(label);
    }
    Dataset::from_rows(&rows, labels).expect("well-formed random dataset")
}

/// Linearly separable with margin at least 1 along the first axis.
pub fn separable_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 {
            Label::Positive
        } else {
            Label::Negative
        };
        let mut row: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let side = rng.random_range(0.5..3.0);
        row[0] = if label == Label::Positive {
            side
        } else {
            -side
        };
        rows.push(row);
        labels.push(label);
    }
    Dataset::from_rows(&rows, labels).expect("well-formed separable dataset")
}
