//! The Cauchy problem on `[0, T] × [0, H]` and its reduction to the trace on
//! the right edge.
//!
//! `u = 0` on `y = 0` and `y = H`, `u = sin(kπy/H)` and `∂u/∂x = 0` on
//! `x = 0`, nothing prescribed on `x = T`. The harmonic extension is
//! `u = sin(kπy/H) cosh(kπx/H)`.

use std::f64::consts::PI;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use regkrylov::linalg::{norm, DenseMatrix};

use crate::fem::{coupling, BandCholesky, Grid};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CauchyCase {
    pub height: f64,
    pub width: f64,
    pub k: u32,
    pub n_el: usize,
    /// Signal-to-noise ratio of the left data in dB; `f64::INFINITY` for
    /// clean data.
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for CauchyCase {
    fn default() -> Self {
        Self {
            height: 1.0,
            width: 1.0,
            k: 3,
            n_el: 40,
            snr_db: 10.0,
            seed: 0,
        }
    }
}

impl CauchyCase {
    pub fn validate(&self) -> Result<()> {
        if self.n_el < 4 {
            return Err(Error::InvalidCase(format!(
                "n_el must be at least 4, got {}",
                self.n_el
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidCase("wavenumber must be at least 1".into()));
        }
        if !(self.height > 0.0
            && self.width > 0.0
            && self.height.is_finite()
            && self.width.is_finite())
        {
            return Err(Error::InvalidCase(format!(
                "bad domain {} x {}",
                self.width, self.height
            )));
        }
        if self.snr_db.is_nan() {
            return Err(Error::InvalidCase("snr is NaN".into()));
        }
        Ok(())
    }

    /// Ordinates of the trace nodes, corners excluded.
    pub fn trace_ordinates(&self) -> Vec<f64> {
        let hy = self.height / self.n_el as f64;
        (1..self.n_el).map(|j| j as f64 * hy).collect()
    }

    /// Clean left Dirichlet data at the trace nodes.
    pub fn left_signal(&self) -> Vec<f64> {
        let kp = self.k as f64 * PI / self.height;
        self.trace_ordinates()
            .iter()
            .map(|y| (kp * y).sin())
            .collect()
    }
}

/// `u(T, y)` of the analytic solution at the trace nodes.
pub fn analytic_trace(case: &CauchyCase) -> Vec<f64> {
    let kp = case.k as f64 * PI / case.height;
    let c = (kp * case.width).cosh();
    case.trace_ordinates()
        .iter()
        .map(|y| (kp * y).sin() * c)
        .collect()
}

/// Adds white Gaussian noise with `‖v‖² / E‖η‖² = 10^{snr/10}`.
pub fn add_noise(v: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if snr_db == f64::INFINITY {
        return Ok(v.to_vec());
    }
    let nv = norm(v);
    if !(nv > 0.0) {
        return Err(Error::InvalidCase(
            "cannot scale noise on a zero signal".into(),
        ));
    }
    let sigma = nv / (v.len() as f64 * 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(v.iter()
        .map(|x| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x + sigma * e
        })
        .collect())
}

/// Discrete Steklov–Poincaré operators on the interior trace nodes of `x = T`.
#[derive(Clone, Debug)]
pub struct SteklovPair {
    /// Dirichlet condition on the left edge.
    pub s_d: DenseMatrix,
    /// Natural condition on the left edge.
    pub s_n: DenseMatrix,
    /// Maps left Dirichlet data to its contribution `b_D`.
    pub load: DenseMatrix,
    /// Left data after noise.
    pub u_l: Vec<f64>,
    pub b_d: Vec<f64>,
}

impl SteklovPair {
    pub fn dim(&self) -> usize {
        self.s_d.rows()
    }

    /// `S_D − S_N`
    pub fn operator(&self) -> DenseMatrix {
        self.s_d
            .add_scaled(-1.0, &self.s_n)
            .expect("same shape")
            .symmetrized()
    }

    /// `b_D` for other left data.
    pub fn rhs_for(&self, u_l: &[f64]) -> Vec<f64> {
        self.load.matvec(u_l)
    }
}

/// Schur complement onto the right trace with the left column of nodes
/// either eliminated (`left_free`) or held at zero, plus `K_RI K_II⁻¹` applied
/// to the left coupling when the left column is held.
fn schur(grid: &Grid, left_free: bool) -> Result<(DenseMatrix, Option<DenseMatrix>)> {
    let n = grid.n_el;
    let ny = n - 1;
    let i0 = if left_free { 0 } else { 1 };
    let interior: Vec<(usize, usize)> = (i0..n).flat_map(|i| (1..n).map(move |j| (i, j))).collect();
    let right: Vec<(usize, usize)> = (1..n).map(|j| (n, j)).collect();
    // i-major numbering: neighbours are at most ny + 1 apart
    let chol = BandCholesky::factor(interior.len(), ny + 1, |p, q| {
        grid.stiffness(interior[p], interior[q])
    })?;
    let k_ir = coupling(grid, &interior, &right);
    let k_rr = coupling(grid, &right, &right);
    let mut x = DenseMatrix::zeros(interior.len(), ny);
    for c in 0..ny {
        let col = chol.solve(&k_ir.column(c));
        for r in 0..interior.len() {
            x[(r, c)] = col[r];
        }
    }
    let s = k_rr.add_scaled(-1.0, &k_ir.transpose().matmul(&x)?)?;
    let load = if left_free {
        None
    } else {
        let left: Vec<(usize, usize)> = (1..n).map(|j| (0, j)).collect();
        let k_il = coupling(grid, &interior, &left);
        Some(x.transpose().matmul(&k_il)?)
    };
    debug!(
        "Schur complement: {} interior unknowns, asymmetry {:e}",
        interior.len(),
        s.asymmetry()
    );
    Ok((s.symmetrized(), load))
}

pub fn assemble_case(case: &CauchyCase) -> Result<SteklovPair> {
    case.validate()?;
    let grid = Grid::new(case.width, case.height, case.n_el);
    let (s_d, load) = schur(&grid, false)?;
    let (s_n, _) = schur(&grid, true)?;
    let load = load.expect("Dirichlet elimination yields the load map");
    let u_l = add_noise(&case.left_signal(), case.snr_db, case.seed)?;
    let b_d = load.matvec(&u_l);
    Ok(SteklovPair {
        s_d,
        s_n,
        load,
        u_l,
        b_d,
    })
}
