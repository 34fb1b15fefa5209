//! Dense linear algebra used by the baselines, the Ritz extraction and the
//! test oracles. Everything here is sized for matrices of a few hundred rows
//! at most.

use std::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 50;
/// Off-diagonal Frobenius threshold, relative to `‖A‖_F`.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scaled(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            check_dim(rows, c.len())?;
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                axpy(a, orow, dst);
            }
        }
        Ok(out)
    }

    pub fn add_scaled(&self, a: f64, other: &Self) -> Result<Self> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn ensure_symmetric(&self, tol: f64) -> Result<()> {
        check_dim(self.rows, self.cols)?;
        let asymmetry = self.asymmetry();
        if asymmetry > tol {
            Err(Error::NotSymmetric { asymmetry })
        } else {
            Ok(())
        }
    }

    /// `(self + selfᵀ) / 2`
    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor `M = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        Self::with_pivot_tolerance(m, 0.0)
    }

    /// Fails on the first pivot not exceeding `rel_tol` times the largest
    /// diagonal entry.
    pub fn with_pivot_tolerance(m: &DenseMatrix, rel_tol: f64) -> Result<Self> {
        check_dim(m.rows(), m.cols())?;
        let n = m.rows();
        let scale = m.diagonal().iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let floor = rel_tol * scale;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    /// `L⁻¹ b`
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// `L⁻ᵀ b`
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `M⁻¹ b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }
}

/// Eigenvalues sorted in decreasing order with orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    /// Column `j` is the eigenvector of `values[j]`.
    pub vectors: DenseMatrix,
}

impl DenseSpectrum {
    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j)
    }

    /// `Σ σ_i u_i u_iᵀ`
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.vectors.rows();
        let mut a = DenseMatrix::zeros(n, n);
        for (j, s) in self.values.iter().enumerate() {
            let u = self.vectors.column(j);
            for r in 0..n {
                for c in 0..n {
                    a[(r, c)] += s * u[r] * u[c];
                }
            }
        }
        a
    }
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn dense_sym_eig(a: &DenseMatrix) -> Result<DenseSpectrum> {
    a.ensure_symmetric(1e-8)?;
    let n = a.rows();
    let mut a = a.symmetrized();
    let mut v = DenseMatrix::identity(n);
    let tol = JACOBI_TOLERANCE * a.frobenius_norm();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau.abs() > 1e150 {
                    0.5 / tau
                } else {
                    tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off_norm = off_diagonal_norm(&a);
        if off_norm > tol {
            return Err(Error::NoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
                off_norm,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(DenseSpectrum { values, vectors })
}

/// Generalized pairs `A v = μ M v` with `M`-orthonormal `v`, through the
/// Cholesky reduction to `L⁻¹ A L⁻ᵀ`.
pub fn generalized_eig(a: &DenseMatrix, m: &DenseMatrix) -> Result<DenseSpectrum> {
    check_dim(a.rows(), m.rows())?;
    a.ensure_symmetric(1e-8)?;
    let chol = Cholesky::new(m)?;
    let n = a.rows();
    // B = L⁻¹ A L⁻ᵀ, built column by column.
    let mut left = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&a.column(j));
        for i in 0..n {
            left[(i, j)] = col[i];
        }
    }
    // left = L⁻¹ A; B = (L⁻¹ (L⁻¹ A)ᵀ)ᵀ = L⁻¹ A L⁻ᵀ since A is symmetric.
    let left_t = left.transpose();
    let mut b = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&left_t.column(j));
        for i in 0..n {
            b[(j, i)] = col[i];
        }
    }
    let spec = dense_sym_eig(&b.symmetrized())?;
    let mut vectors = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let v = chol.solve_upper(&spec.vectors.column(j));
        for i in 0..n {
            vectors[(i, j)] = v[i];
        }
    }
    Ok(DenseSpectrum {
        values: spec.values,
        vectors,
    })
}

/// Truncated spectral solve of a symmetric positive semi-definite system,
/// keeping the modes with `σ_i > ε_σ σ_1`.
pub fn tsvd_solve(a: &DenseMatrix, b: &[f64], eps_sigma: f64) -> Result<Vec<f64>> {
    check_dim(a.rows(), b.len())?;
    let spec = dense_sym_eig(a)?;
    tsvd_from_spectrum(&spec, b, eps_sigma)
}

/// Same as [`tsvd_solve`] with a precomputed spectrum.
pub fn tsvd_from_spectrum(spec: &DenseSpectrum, b: &[f64], eps_sigma: f64) -> Result<Vec<f64>> {
    if !(eps_sigma > 0.0 && eps_sigma < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "eps_sigma must lie in (0, 1), got {eps_sigma}"
        )));
    }
    let sigma1 = spec.values.first().copied().unwrap_or(0.0);
    if sigma1 <= 0.0 {
        return Err(Error::ZeroOperator(sigma1));
    }
    let mut x = vec![0.0; b.len()];
    for (j, &s) in spec.values.iter().enumerate() {
        if s <= eps_sigma * sigma1 {
            break;
        }
        let u = spec.vector(j);
        axpy(dot(&u, b) / s, &u, &mut x);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let b = random_symmetric(n, seed);
        let mut a = b.matmul(&b.transpose()).unwrap();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    #[test]
    fn diagonal_spectrum() {
        let spec = dense_sym_eig(&DenseMatrix::from_diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(spec.values, vec![3.0, 1.0]);
        assert!((spec.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((spec.vectors[(0, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_by_hand() {
        // Characteristic polynomial (2-s)^2 - 1 = 0 gives s = 3, 1.
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let spec = dense_sym_eig(&a).unwrap();
        assert!((spec.values[0] - 3.0).abs() < 1e-14);
        assert!((spec.values[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = spec.vector(0);
        let u1 = spec.vector(1);
        assert!((u0[0].abs() - h).abs() < 1e-14 && (u0[0] - u0[1]).abs() < 1e-14);
        assert!((u1[0].abs() - h).abs() < 1e-14 && (u1[0] + u1[1]).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        for (n, seed) in [(20, 1), (64, 2), (7, 3)] {
            let a = random_symmetric(n, seed);
            let spec = dense_sym_eig(&a).unwrap();
            let err = spec
                .reconstruct()
                .add_scaled(-1.0, &a)
                .unwrap()
                .frobenius_norm();
            assert!(err <= 1e-8 * a.frobenius_norm(), "n={n} err={err:e}");
            assert!(spec.values.windows(2).all(|w| w[0] >= w[1]));
            let gram = spec.vectors.transpose().matmul(&spec.vectors).unwrap();
            assert!(
                gram.add_scaled(-1.0, &DenseMatrix::identity(n))
                    .unwrap()
                    .max_abs()
                    < 1e-10
            );
        }
    }

    #[test]
    fn rejects_nonsymmetric() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(dense_sym_eig(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn generalized_diagonal_pencil() {
        let a = DenseMatrix::from_diagonal(&[4.0, 1.0]);
        let m = DenseMatrix::from_diagonal(&[2.0, 1.0]);
        let spec = generalized_eig(&a, &m).unwrap();
        assert!((spec.values[0] - 2.0).abs() < 1e-14);
        assert!((spec.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generalized_identity_pencil() {
        let m = random_spd(6, 4);
        let spec = generalized_eig(&m, &m).unwrap();
        assert!(spec.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn generalized_residual_random_pair() {
        let a = random_spd(15, 5);
        let m = random_spd(15, 6);
        let spec = generalized_eig(&a, &m).unwrap();
        let anorm = a.frobenius_norm();
        for j in 0..15 {
            let v = spec.vector(j);
            let res = sub(&a.matvec(&v), &scaled(spec.values[j], &m.matvec(&v)));
            assert!(norm(&res) <= 1e-8 * anorm);
            for k in 0..15 {
                let g = dot(&spec.vector(k), &m.matvec(&v));
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((g - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn generalized_with_identity_matches_standard() {
        let a = random_symmetric(12, 7);
        let g = generalized_eig(&a, &DenseMatrix::identity(12)).unwrap();
        let s = dense_sym_eig(&a).unwrap();
        for (x, y) in g.values.iter().zip(&s.values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn generalized_reports_failing_pivot() {
        let a = DenseMatrix::identity(3);
        let m = DenseMatrix::from_diagonal(&[1.0, 2.0, -1.0]);
        match generalized_eig(&a, &m) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tsvd_keeps_full_rank() {
        let x = tsvd_solve(&DenseMatrix::from_diagonal(&[3.0, 1.0]), &[3.0, 1.0], 0.01).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tsvd_truncates_small_mode() {
        let x = tsvd_solve(&DenseMatrix::from_diagonal(&[3.0, 1e-9]), &[3.0, 1.0], 1e-3).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn tsvd_zero_operator() {
        let r = tsvd_solve(&DenseMatrix::zeros(2, 2), &[1.0, 1.0], 0.1);
        assert!(matches!(r, Err(Error::ZeroOperator(_))));
    }

    #[test]
    fn cholesky_solves() {
        let m = random_spd(10, 8);
        let b: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        let x = Cholesky::new(&m).unwrap().solve(&b);
        assert!(norm(&sub(&m.matvec(&x), &b)) < 1e-10 * norm(&b));
    }
}
