//! Seeded fixtures shared by the unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{axpy, dot, norm, DenseMatrix};

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random orthonormal columns by Gram-Schmidt.
pub fn random_orthogonal(n: usize, seed: u64) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = random_vector(n, seed.wrapping_mul(1000).wrapping_add(j as u64));
        for _ in 0..2 {
            for c in &cols {
                let p = dot(c, &v);
                axpy(-p, c, &mut v);
            }
        }
        let s = norm(&v);
        cols.push(v.iter().map(|x| x / s).collect());
    }
    DenseMatrix::from_columns(&cols).unwrap()
}

/// SPD matrix with eigenvalues spread geometrically over `[1, cond]`.
pub fn random_spd(n: usize, seed: u64, cond: f64) -> DenseMatrix {
    let q = random_orthogonal(n, seed);
    let mut a = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let t = if n > 1 {
            k as f64 / (n - 1) as f64
        } else {
            0.0
        };
        let lam = cond.powf(1.0 - t);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += lam * q[(i, k)] * q[(j, k)];
            }
        }
    }
    a.symmetrized()
}
