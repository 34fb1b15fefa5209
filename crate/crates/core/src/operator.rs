//! Symmetric linear maps.

use std::fmt;

use crate::linalg::{check_dim, Cholesky, DenseMatrix};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Dense,
    Diagonal,
    ShiftedSum,
    MatrixFree,
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MapKind::Dense => "dense",
            MapKind::Diagonal => "diagonal",
            MapKind::ShiftedSum => "shifted-sum",
            MapKind::MatrixFree => "matrix-free",
        };
        f.write_str(s)
    }
}

/// A symmetric operator on `R^dim`.
///
/// Implementations must be pure with respect to their own state so a single
/// map can be shared between concurrent solves.
pub trait LinearMap: Send + Sync {
    fn dim(&self) -> usize;

    /// `y = self · x`; `y` is overwritten.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn kind(&self) -> MapKind;

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// Dense copy, one application per column.
    fn materialize(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

impl LinearMap for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = crate::linalg::dot(self.row(i), x);
        }
    }

    fn kind(&self) -> MapKind {
        MapKind::Dense
    }
}

#[derive(Clone, Debug)]
pub struct Diagonal(pub Vec<f64>);

impl Diagonal {
    pub fn identity(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    /// Entry-wise reciprocal; zero entries stay zero.
    pub fn inverse(&self) -> Self {
        Self(
            self.0
                .iter()
                .map(|d| if *d == 0.0 { 0.0 } else { 1.0 / d })
                .collect(),
        )
    }
}

impl LinearMap for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = d * xi;
        }
    }

    fn kind(&self) -> MapKind {
        MapKind::Diagonal
    }
}

/// `v ↦ A v + λ M v`, never materialized.
pub struct ShiftedMap<'a> {
    a: &'a dyn LinearMap,
    m: &'a dyn LinearMap,
    lambda: f64,
}

impl ShiftedMap<'_> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

pub fn shifted_map<'a>(
    a: &'a dyn LinearMap,
    m: &'a dyn LinearMap,
    lambda: f64,
) -> Result<ShiftedMap<'a>> {
    check_dim(a.dim(), m.dim())?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(crate::Error::InvalidConfig(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(ShiftedMap { a, m, lambda })
}

impl LinearMap for ShiftedMap<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply_into(x, y);
        if self.lambda != 0.0 {
            let mx = self.m.apply(x);
            crate::linalg::axpy(self.lambda, &mx, y);
        }
    }

    fn kind(&self) -> MapKind {
        MapKind::ShiftedSum
    }
}

/// Matrix-free map backed by a closure.
pub struct FnMap<F> {
    dim: usize,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearMap for FnMap<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }

    fn kind(&self) -> MapKind {
        MapKind::MatrixFree
    }
}

/// `M⁻¹` through a dense Cholesky factorization.
#[derive(Clone, Debug)]
pub struct CholeskyInverse(pub Cholesky);

impl CholeskyInverse {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        Ok(Self(Cholesky::new(m)?))
    }
}

impl LinearMap for CholeskyInverse {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.0.solve(x));
    }

    fn kind(&self) -> MapKind {
        MapKind::MatrixFree
    }
}

/// Worst relative defect of `apply(αx + βy) = α apply(x) + β apply(y)` and
/// of `⟨apply(x), y⟩ = ⟨x, apply(y)⟩` over the given probe pairs.
pub fn probe_defects(map: &dyn LinearMap, probes: &[(Vec<f64>, Vec<f64>)]) -> (f64, f64) {
    use crate::linalg::{dot, norm};
    let (alpha, beta) = (0.7, -1.3);
    let mut linearity = 0.0f64;
    let mut symmetry = 0.0f64;
    for (x, y) in probes {
        let ax = map.apply(x);
        let ay = map.apply(y);
        let comb: Vec<f64> = x.iter().zip(y).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = map.apply(&comb);
        let rhs: Vec<f64> = ax
            .iter()
            .zip(&ay)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let scale = norm(&ax).abs() + norm(&ay).abs();
        if scale > 0.0 {
            let diff: f64 = lhs
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            linearity = linearity.max(diff / scale);
        }
        let sym_scale = norm(&ax) * norm(y) + norm(x) * norm(&ay);
        if sym_scale > 0.0 {
            symmetry = symmetry.max((dot(&ax, y) - dot(x, &ay)).abs() / sym_scale);
        }
    }
    (linearity, symmetry)
}
