#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regkrylov::linalg::{axpy, dot, norm, DenseMatrix};

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// SPD matrix `Q diag(σ) Qᵀ` with `σ` geometric over `[1, cond]`.
pub fn random_spd(n: usize, seed: u64, cond: f64) -> DenseMatrix {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut v = random_vector(n, seed * 7919 + j as u64);
        for _ in 0..2 {
            for c in &q {
                let p = dot(c, &v);
                axpy(-p, c, &mut v);
            }
        }
        let s = norm(&v);
        q.push(v.into_iter().map(|x| x / s).collect());
    }
    let mut a = DenseMatrix::zeros(n, n);
    for (k, col) in q.iter().enumerate() {
        let sigma = cond.powf(1.0 - k as f64 / (n.max(2) - 1) as f64);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += sigma * col[i] * col[j];
            }
        }
    }
    a.symmetrized()
}

pub fn quad(m: &DenseMatrix, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &m.matvec(y))
}
