//! Bilinear finite elements for the Laplacian on a structured rectangle, and
//! the banded Cholesky used to eliminate interior unknowns.

use regkrylov::linalg::DenseMatrix;

use crate::{Error, Result};

/// Gauss–Legendre points on `[0, 1]`, two per direction.
const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Corner offsets of the reference square, counter-clockwise from the origin.
const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Node `(i, j)` sits at `(i hx, j hy)`, `0 ≤ i, j ≤ n_el`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n_el: usize,
    pub hx: f64,
    pub hy: f64,
    element: [[f64; 4]; 4],
}

impl Grid {
    pub fn new(width: f64, height: f64, n_el: usize) -> Self {
        let hx = width / n_el as f64;
        let hy = height / n_el as f64;
        Self {
            n_el,
            hx,
            hy,
            element: element_stiffness(hx, hy),
        }
    }

    pub fn element(&self) -> &[[f64; 4]; 4] {
        &self.element
    }

    /// Global stiffness entry between two nodes, summed over the elements
    /// containing both.
    pub fn stiffness(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        if a.0.abs_diff(b.0) > 1 || a.1.abs_diff(b.1) > 1 {
            return 0.0;
        }
        let mut s = 0.0;
        let ex_lo = a.0.max(b.0).saturating_sub(1);
        let ey_lo = a.1.max(b.1).saturating_sub(1);
        for ex in ex_lo..=a.0.min(b.0).min(self.n_el - 1) {
            for ey in ey_lo..=a.1.min(b.1).min(self.n_el - 1) {
                let la = local_index(a.0 - ex, a.1 - ey);
                let lb = local_index(b.0 - ex, b.1 - ey);
                s += self.element[la][lb];
            }
        }
        s
    }
}

fn local_index(dx: usize, dy: usize) -> usize {
    CORNERS
        .iter()
        .position(|&c| c == (dx, dy))
        .expect("node outside element")
}

/// `∫ ∇φ_a·∇φ_b` on an `hx × hy` rectangle, 2×2 Gauss rule.
pub fn element_stiffness(hx: f64, hy: f64) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for &s in &GAUSS {
        for &t in &GAUSS {
            let grads: Vec<(f64, f64)> = CORNERS
                .iter()
                .map(|&(cx, cy)| {
                    let (fx, dfx) = if cx == 0 { (1.0 - s, -1.0) } else { (s, 1.0) };
                    let (fy, dfy) = if cy == 0 { (1.0 - t, -1.0) } else { (t, 1.0) };
                    (dfx * fy / hx, fx * dfy / hy)
                })
                .collect();
            let w = 0.25 * hx * hy;
            for a in 0..4 {
                for b in 0..4 {
                    k[a][b] += w * (grads[a].0 * grads[b].0 + grads[a].1 * grads[b].1);
                }
            }
        }
    }
    k
}

/// Cholesky factor of a symmetric band matrix, lower band stored row by row.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    /// `entry(i, j)` is queried for `j ≤ i ≤ j + bw` only.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                band[i * w + (i - j)] = entry(i, j);
            }
        }
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = band[j * w];
            for k in lo..j {
                let l = band[j * w + (j - k)];
                d -= l * l;
            }
            if !(d > 0.0) {
                return Err(Error::SingularInterior { pivot: j, value: d });
            }
            let d = d.sqrt();
            band[j * w] = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let mut s = band[i * w + (i - j)];
                for k in i.saturating_sub(bw).max(lo)..j {
                    s -= band[i * w + (i - k)] * band[j * w + (j - k)];
                }
                band[i * w + (i - j)] = s / d;
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut y = b.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.band[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.band[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= self.band[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.band[i * w];
        }
        y
    }
}

/// Stiffness block between two node lists.
pub fn coupling(grid: &Grid, rows: &[(usize, usize)], cols: &[(usize, usize)]) -> DenseMatrix {
    let mut k = DenseMatrix::zeros(rows.len(), cols.len());
    for (r, &a) in rows.iter().enumerate() {
        for (c, &b) in cols.iter().enumerate() {
            k[(r, c)] = grid.stiffness(a, b);
        }
    }
    k
}
