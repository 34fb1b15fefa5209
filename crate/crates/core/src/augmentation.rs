//! Augmentation of the Krylov space by a fixed basis `C`.
//!
//! The component of the solution in `Range(C)` is resolved at initialization
//! and the iteration runs in the `A`-orthogonal complement through the
//! projector `P = I − C (CᵀAC)⁻¹ CᵀA`. Typical columns are a basis of the
//! preconditioner's kernel and Ritz vectors recycled from a previous solve
//! with the same operator.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, check_dim, dot, norm, Cholesky, DenseMatrix};
use crate::operator::LinearMap;
use crate::pcg::Projector;
use crate::ritz::{a_normalize, RitzSet};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RKAB";
const FORMAT_VERSION: u32 = 1;

/// Pivot of `CᵀAC`, relative to its largest diagonal entry, below which a
/// column is considered dependent on the previous ones.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-10;

/// Fraction of the Ritz vectors recycled by default.
pub const DEFAULT_KEEP_FRACTION: f64 = 0.85;

pub fn default_keep(m: usize) -> usize {
    (DEFAULT_KEEP_FRACTION * m as f64).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnLabel {
    Kernel,
    Ritz,
}

#[derive(Clone, Debug)]
pub struct AugmentationBasis {
    dim: usize,
    c: Vec<Vec<f64>>,
    ac: Vec<Vec<f64>>,
    labels: Vec<ColumnLabel>,
    g: Option<Cholesky>,
}

/// Indices of the columns whose pivot in the Cholesky factorization of the
/// Gram matrix falls below the dependence tolerance, scanning left to right
/// and skipping the rejected ones.
fn dependent_columns(gram: &DenseMatrix) -> Vec<usize> {
    let n = gram.rows();
    let scale = gram.diagonal().iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut kept: Vec<usize> = Vec::new();
    let mut rejected = Vec::new();
    for j in 0..n {
        let mut trial = kept.clone();
        trial.push(j);
        let sub = DenseMatrix::from_rows(
            &trial
                .iter()
                .map(|&r| trial.iter().map(|&c| gram[(r, c)]).collect())
                .collect::<Vec<_>>(),
        )
        .expect("square selection");
        if Cholesky::with_pivot_tolerance(&sub, DEPENDENCE_TOLERANCE).is_ok()
            && gram[(j, j)] > DEPENDENCE_TOLERANCE * scale
        {
            kept = trial;
        } else {
            rejected.push(j);
        }
    }
    rejected
}

impl AugmentationBasis {
    /// Basis with no columns; its projector is the identity.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            c: Vec::new(),
            ac: Vec::new(),
            labels: Vec::new(),
            g: None,
        }
    }

    /// Builds the basis and factorizes `CᵀAC`.
    pub fn new(
        a: &dyn LinearMap,
        columns: Vec<Vec<f64>>,
        labels: Vec<ColumnLabel>,
    ) -> Result<Self> {
        let ac = columns.iter().map(|c| a.apply(c)).collect();
        Self::from_parts(a.dim(), columns, ac, labels)
    }

    /// Builds the basis from columns whose images `A C` are already known.
    pub fn from_parts(
        dim: usize,
        columns: Vec<Vec<f64>>,
        ac: Vec<Vec<f64>>,
        labels: Vec<ColumnLabel>,
    ) -> Result<Self> {
        check_dim(columns.len(), ac.len())?;
        check_dim(columns.len(), labels.len())?;
        for (c, a) in columns.iter().zip(&ac) {
            check_dim(dim, c.len())?;
            check_dim(dim, a.len())?;
        }
        if columns.is_empty() {
            return Ok(Self::empty(dim));
        }
        let gram = Self::gram(&columns, &ac);
        match Cholesky::with_pivot_tolerance(&gram, DEPENDENCE_TOLERANCE) {
            Ok(g) => Ok(Self {
                dim,
                c: columns,
                ac,
                labels,
                g: Some(g),
            }),
            Err(_) => Err(Error::DependentColumns {
                columns: dependent_columns(&gram),
            }),
        }
    }

    fn gram(c: &[Vec<f64>], ac: &[Vec<f64>]) -> DenseMatrix {
        let k = c.len();
        let mut g = DenseMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = 0.5 * (dot(&c[i], &ac[j]) + dot(&c[j], &ac[i]));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.c
    }

    pub fn images(&self) -> &[Vec<f64>] {
        &self.ac
    }

    pub fn labels(&self) -> &[ColumnLabel] {
        &self.labels
    }

    /// `CᵀAC`
    pub fn gram_matrix(&self) -> DenseMatrix {
        Self::gram(&self.c, &self.ac)
    }

    /// `G⁻¹ Yᵀ v` for `Y = C` or `Y = AC`.
    fn coarse(&self, ys: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = ys.iter().map(|y| dot(y, v)).collect();
        self.g.as_ref().map_or(rhs.clone(), |g| g.solve(&rhs))
    }

    /// `C y`
    pub fn combine(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (c, yi) in self.c.iter().zip(y) {
            axpy(*yi, c, &mut out);
        }
        out
    }

    /// Drops the columns selected by `keep`.
    fn retain(&self, keep: &[usize]) -> Result<Self> {
        Self::from_parts(
            self.dim,
            keep.iter().map(|&i| self.c[i].clone()).collect(),
            keep.iter().map(|&i| self.ac[i].clone()).collect(),
            keep.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for l in &self.labels {
            w.write_all(&[match l {
                ColumnLabel::Kernel => 0u8,
                ColumnLabel::Ritz => 1u8,
            }])?;
        }
        for col in self.c.iter().chain(&self.ac) {
            for v in col {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "augmentation basis",
            detail,
        };
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic number".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut labels = vec![0u8; count];
        r.read_exact(&mut labels)?;
        let labels = labels
            .iter()
            .map(|l| match l {
                0 => Ok(ColumnLabel::Kernel),
                1 => Ok(ColumnLabel::Ritz),
                other => Err(bad(format!("unknown column label {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut read_cols = |r: &mut BufReader<File>| -> Result<Vec<Vec<f64>>> {
            (0..count)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            r.read_exact(&mut b8)?;
                            Ok(f64::from_le_bytes(b8))
                        })
                        .collect()
                })
                .collect()
        };
        let c = read_cols(&mut r)?;
        let ac = read_cols(&mut r)?;
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(bad("trailing bytes".into()));
        }
        Self::from_parts(dim, c, ac, labels)
    }
}

impl Projector for AugmentationBasis {
    fn dim(&self) -> usize {
        self.dim
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        if !self.is_empty() {
            let y = self.coarse(&self.ac, v);
            for (c, yi) in self.c.iter().zip(&y) {
                axpy(-yi, c, &mut out);
            }
        }
        out
    }

    fn project_residual(&self, r: &[f64]) -> Vec<f64> {
        let mut out = r.to_vec();
        if !self.is_empty() {
            let y = self.coarse(&self.c, r);
            for (ac, yi) in self.ac.iter().zip(&y) {
                axpy(-yi, ac, &mut out);
            }
        }
        out
    }
}

/// Starting point whose residual is orthogonal to `Range(C)`:
/// `x0 = x00 + C G⁻¹ Cᵀ r00`, `r0 = r00 − AC G⁻¹ Cᵀ r00`.
pub fn augmented_init(
    x00: &[f64],
    b: &[f64],
    basis: &AugmentationBasis,
    a: &dyn LinearMap,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(a.dim(), x00.len())?;
    check_dim(a.dim(), b.len())?;
    check_dim(a.dim(), basis.dim())?;
    let mut r = b.to_vec();
    axpy(-1.0, &a.apply(x00), &mut r);
    if basis.is_empty() {
        return Ok((x00.to_vec(), r));
    }
    let y = basis.coarse(&basis.c, &r);
    let mut x = x00.to_vec();
    for ((c, ac), yi) in basis.c.iter().zip(&basis.ac).zip(&y) {
        axpy(*yi, c, &mut x);
        axpy(-yi, ac, &mut r);
    }
    Ok((x, r))
}

/// `P v` for the given basis.
pub fn project(basis: &AugmentationBasis, v: &[f64]) -> Vec<f64> {
    basis.project(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    /// Power-iteration estimate of `‖M‖₂`.
    pub norm_estimate: f64,
    /// `(column, ‖M c‖ / ‖c‖)` for each column above tolerance.
    pub violations: Vec<(usize, f64)>,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn norm_estimate(m: &dyn LinearMap) -> f64 {
    let n = m.dim();
    let mut v: Vec<f64> = (0..n).map(|i| (0.7 * i as f64 + 0.3).sin() + 0.1).collect();
    let mut est = 0.0;
    for _ in 0..30 {
        let nv = norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let mv = m.apply(&v);
        est = norm(&mv);
        v = mv;
    }
    est
}

/// Checks `M c ≈ 0` for every column, at `1e-8 ‖M‖ ‖c‖`.
pub fn kernel_basis_check(c0: &[Vec<f64>], m: &dyn LinearMap) -> KernelReport {
    let est = norm_estimate(m);
    let violations = c0
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let nc = norm(c);
            let ratio = if nc == 0.0 {
                0.0
            } else {
                norm(&m.apply(c)) / nc
            };
            (ratio > 1e-8 * est).then_some((i, ratio))
        })
        .collect();
    KernelReport {
        norm_estimate: est,
        violations,
    }
}

/// Appends the leading `keep` Ritz vectors, A-normalized, with their images.
///
/// `av` must hold the images of the Ritz vectors by the operator the basis
/// was built for. Only the trusted block of a degraded set is used, and
/// columns that make `CᵀAC` singular are dropped with a warning.
pub fn recycle(
    basis: &AugmentationBasis,
    ritz: &RitzSet,
    av: &[Vec<f64>],
    keep: usize,
) -> Result<AugmentationBasis> {
    if keep == 0 || ritz.is_empty() {
        return Ok(basis.clone());
    }
    check_dim(basis.dim(), ritz.dim())?;
    let take = keep.min(ritz.valid);
    if take < keep.min(ritz.len()) {
        warn!("recycling {take} Ritz vectors instead of {keep}: set is degraded");
    }
    let leading = RitzSet {
        theta: ritz.theta[..take].to_vec(),
        vectors: ritz.vectors[..take].to_vec(),
        r_a: ritz.r_a[..take].to_vec(),
        r_m: ritz.r_m[..take].to_vec(),
        valid: take,
        ..ritz.clone()
    };
    let an = a_normalize(&leading, &av[..take])?;
    let mut c = basis.c.clone();
    let mut ac = basis.ac.clone();
    let mut labels = basis.labels.clone();
    c.extend(an.vectors);
    ac.extend(an.images);
    labels.extend(std::iter::repeat_n(ColumnLabel::Ritz, an.kept.len()));
    let all = AugmentationBasis {
        dim: basis.dim,
        c,
        ac,
        labels,
        g: None,
    };
    let gram = all.gram_matrix();
    let dropped = dependent_columns(&gram);
    if dropped.is_empty() {
        return AugmentationBasis::from_parts(all.dim, all.c, all.ac, all.labels);
    }
    warn!(
        "dropping {} dependent columns after recycling: {:?}",
        dropped.len(),
        dropped
    );
    let keep_idx: Vec<usize> = (0..all.len()).filter(|i| !dropped.contains(i)).collect();
    all.retain(&keep_idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sub;
    use crate::operator::{Diagonal, FnMap};
    use crate::pcg::{pcg_solve, SolveConfig};
    use crate::ritz::{extract, ritz_apply_a};
    use crate::testutil::{random_spd, random_vector};

    fn diag31() -> Diagonal {
        Diagonal(vec![3.0, 1.0])
    }

    #[test]
    fn full_augmentation_solves() {
        let a = random_spd(4, 1, 10.0);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let basis = AugmentationBasis::new(&a, cols, vec![ColumnLabel::Kernel; 4]).unwrap();
        let b = random_vector(4, 2);
        let (x0, r0) = augmented_init(&[0.0; 4], &b, &basis, &a).unwrap();
        assert!(norm(&r0) < 1e-12);
        assert!(norm(&sub(&a.matvec(&x0), &b)) < 1e-12);
    }

    #[test]
    fn hand_projection() {
        let a = diag31();
        let basis =
            AugmentationBasis::new(&a, vec![vec![1.0, 0.0]], vec![ColumnLabel::Kernel]).unwrap();
        let (x0, r0) = augmented_init(&[0.0; 2], &[3.0, 1.0], &basis, &a).unwrap();
        assert!((x0[0] - 1.0).abs() < 1e-15 && x0[1] == 0.0);
        assert!(r0[0].abs() < 1e-15 && r0[1] == 1.0);
    }

    #[test]
    fn empty_passthrough() {
        let a = diag31();
        let basis = AugmentationBasis::empty(2);
        let (x0, r0) = augmented_init(&[0.5, 0.5], &[3.0, 1.0], &basis, &a).unwrap();
        assert_eq!(x0, vec![0.5, 0.5]);
        assert_eq!(r0, vec![1.5, 0.5]);
        assert_eq!(project(&basis, &[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn projector_properties() {
        let n = 12;
        let a = random_spd(n, 3, 50.0);
        let cols = vec![
            random_vector(n, 4),
            random_vector(n, 5),
            random_vector(n, 6),
        ];
        let basis = AugmentationBasis::new(&a, cols.clone(), vec![ColumnLabel::Kernel; 3]).unwrap();
        // Range(C) is annihilated
        let inside = basis.combine(&[0.3, -1.0, 2.0]);
        assert!(norm(&project(&basis, &inside)) < 1e-12 * norm(&inside));
        // A-orthogonal vectors pass through
        let v = project(&basis, &random_vector(n, 7));
        assert!(norm(&sub(&project(&basis, &v), &v)) < 1e-10 * norm(&v));
        // CᵀA P v = 0
        let av = a.matvec(&v);
        for c in &cols {
            assert!(dot(c, &av).abs() < 1e-10 * norm(c) * norm(&av).max(1.0));
        }
    }

    #[test]
    fn dependent_columns_reported() {
        let a = random_spd(5, 8, 5.0);
        let c0 = random_vector(5, 9);
        let c1 = random_vector(5, 10);
        let c2: Vec<f64> = c0.iter().zip(&c1).map(|(x, y)| 2.0 * x - y).collect();
        let err =
            AugmentationBasis::new(&a, vec![c0, c1, c2], vec![ColumnLabel::Kernel; 3]).unwrap_err();
        assert!(
            matches!(err, Error::DependentColumns { ref columns } if columns == &vec![2]),
            "{err:?}"
        );
    }

    fn laplacian_1d(n: usize) -> impl LinearMap {
        FnMap::new(n, move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { x[i] };
                let r = if i + 1 < n { x[i + 1] } else { x[i] };
                y[i] = 2.0 * x[i] - l - r;
            }
        })
    }

    #[test]
    fn kernel_check() {
        let m = laplacian_1d(16);
        assert!(kernel_basis_check(&[vec![0.25; 16]], &m).passed());
        let report = kernel_basis_check(&[vec![0.25; 16], random_vector(16, 1)], &m);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].0, 1);
        assert!((report.norm_estimate - 4.0).abs() < 0.1);
    }

    #[test]
    fn recycling_full_space_converges_immediately() {
        let a = diag31();
        let id = Diagonal::identity(2);
        let cfg = SolveConfig {
            eps: 1e-12,
            store_vectors: true,
            ..Default::default()
        };
        let first = pcg_solve(&a, &id, &[3.0, 1.0], &[0.0; 2], &cfg, None).unwrap();
        let (ritz, spec) = extract(&first.trace, 0.0).unwrap();
        let av = ritz_apply_a(&first.trace, &spec).unwrap();
        let basis = AugmentationBasis::empty(2);
        assert_eq!(recycle(&basis, &ritz, &av, 0).unwrap().len(), 0);
        let basis = recycle(&basis, &ritz, &av, 2).unwrap();
        assert_eq!(basis.len(), 2);
        assert!(basis.labels().iter().all(|l| *l == ColumnLabel::Ritz));
        let g = basis.gram_matrix();
        assert!(
            g.add_scaled(-1.0, &DenseMatrix::identity(2))
                .unwrap()
                .max_abs()
                < 1e-10
        );
        let b = [1.0, -4.0];
        let (x0, _) = augmented_init(&[0.0; 2], &b, &basis, &a).unwrap();
        let second = pcg_solve(&a, &id, &b, &x0, &cfg, Some(&basis)).unwrap();
        assert_eq!(second.trace.m(), 0);
        assert!((second.x[0] - 1.0 / 3.0).abs() < 1e-12 && (second.x[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn recycling_drops_duplicates() {
        let a = diag31();
        let basis =
            AugmentationBasis::new(&a, vec![vec![1.0, 0.0]], vec![ColumnLabel::Kernel]).unwrap();
        let ritz = RitzSet {
            theta: vec![3.0, 1.0],
            shift: 0.0,
            vectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            r_a: vec![0.0; 2],
            r_m: vec![0.0; 2],
            m: 2,
            valid: 2,
        };
        let av = vec![vec![3.0, 0.0], vec![0.0, 1.0]];
        let out = recycle(&basis, &ritz, &av, 2).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.labels(), &[ColumnLabel::Kernel, ColumnLabel::Ritz]);
    }

    #[test]
    fn persistence_roundtrip() {
        let a = random_spd(6, 11, 5.0);
        let basis = AugmentationBasis::new(
            &a,
            vec![random_vector(6, 12), random_vector(6, 13)],
            vec![ColumnLabel::Kernel, ColumnLabel::Ritz],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.bin");
        basis.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 4 + 4 + 8 + 8 + 2 + 2 * 2 * 6 * 8);
        let back = AugmentationBasis::load(&path).unwrap();
        assert_eq!(back.columns(), basis.columns());
        assert_eq!(back.images(), basis.images());
        assert_eq!(back.labels(), basis.labels());
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(AugmentationBasis::load(&path).is_err());
    }

    #[test]
    fn default_keep_fraction() {
        assert_eq!(default_keep(0), 0);
        assert_eq!(default_keep(10), 9);
        assert_eq!(default_keep(20), 17);
    }
}
