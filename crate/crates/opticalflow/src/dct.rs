//! Neumann Laplacian on the pixel grid and its inverse by cosine transform.
//!
//! With reflecting borders the 5-point stencil is diagonalized by the
//! half-sample cosines `cos(π n (x + 1/2) / N) cos(π m (y + 1/2) / M)`, with
//! eigenvalues `2(1 − cos(nπ/N)) + 2(1 − cos(mπ/M))` for `−Δ_h`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::{Error, Result};

/// `−Δ_h u` with reflecting borders, `values[y * width + x]`.
pub fn neg_laplacian(width: usize, height: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    neg_laplacian_into(width, height, u, &mut out);
    out
}

pub fn neg_laplacian_into(width: usize, height: usize, u: &[f64], out: &mut [f64]) {
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let c = u[i];
            let mut s = 0.0;
            if x > 0 {
                s += c - u[i - 1];
            }
            if x + 1 < width {
                s += c - u[i + 1];
            }
            if y > 0 {
                s += c - u[i - width];
            }
            if y + 1 < height {
                s += c - u[i + width];
            }
            out[i] = s;
        }
    }
}

/// Precomputed transforms and eigenvalues for one image shape.
#[derive(Clone)]
pub struct DctPlan {
    width: usize,
    height: usize,
    eigenvalues: Vec<f64>,
    row: Arc<dyn TransformType2And3<f64>>,
    col: Arc<dyn TransformType2And3<f64>>,
}

impl fmt::Debug for DctPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DctPlan")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl DctPlan {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Shape(format!(
                "DCT plan needs at least 2x2, got {width}x{height}"
            )));
        }
        let mut planner = DctPlanner::new();
        let row = planner.plan_dct2(width);
        let col = planner.plan_dct2(height);
        let ex: Vec<f64> = (0..width)
            .map(|n| 2.0 * (1.0 - (n as f64 * PI / width as f64).cos()))
            .collect();
        let ey: Vec<f64> = (0..height)
            .map(|m| 2.0 * (1.0 - (m as f64 * PI / height as f64).cos()))
            .collect();
        let mut eigenvalues = Vec::with_capacity(width * height);
        for m in 0..height {
            for n in 0..width {
                eigenvalues.push(ex[n] + ey[m]);
            }
        }
        Ok(Self {
            width,
            height,
            eigenvalues,
            row,
            col,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `λ_{n,m}` at `m * width + n`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, n: usize, m: usize) -> f64 {
        self.eigenvalues[m * self.width + n]
    }

    fn transform(&self, data: &mut [f64], inverse: bool) {
        let (w, h) = (self.width, self.height);
        for row in data.chunks_exact_mut(w) {
            if inverse {
                self.row.process_dct3(row);
            } else {
                self.row.process_dct2(row);
            }
        }
        let mut col = vec![0.0; h];
        for x in 0..w {
            for y in 0..h {
                col[y] = data[y * w + x];
            }
            if inverse {
                self.col.process_dct3(&mut col);
            } else {
                self.col.process_dct2(&mut col);
            }
            for y in 0..h {
                data[y * w + x] = col[y];
            }
        }
    }

    /// Zero-mean `u` with `−Δ_h u = f − mean(f)`.
    pub fn solve(&self, f: &[f64]) -> Vec<f64> {
        let mut out = f.to_vec();
        self.solve_in_place(&mut out);
        out
    }

    pub fn solve_in_place(&self, data: &mut [f64]) {
        assert_eq!(
            data.len(),
            self.width * self.height,
            "field does not match the plan"
        );
        self.transform(data, false);
        data[0] = 0.0;
        for (c, l) in data.iter_mut().zip(&self.eigenvalues).skip(1) {
            *c /= l;
        }
        self.transform(data, true);
        // a DCT-III after a DCT-II multiplies by N/2 per axis
        let s = 4.0 / (self.width * self.height) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Pseudo-inverse of `−Δ_h`; see [`DctPlan::solve`].
pub fn dct_laplacian_inverse(f: &[f64], plan: &DctPlan) -> Vec<f64> {
    plan.solve(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_in_the_kernel() {
        let plan = DctPlan::new(5, 3).unwrap();
        assert!(plan.solve(&[2.5; 15]).iter().all(|v| v.abs() < 1e-14));
        assert!(neg_laplacian(5, 3, &[2.5; 15]).iter().all(|v| *v == 0.0));
        assert_eq!(plan.eigenvalue(0, 0), 0.0);
        assert!(plan.eigenvalues().iter().skip(1).all(|v| *v > 0.0));
    }

    /// First row mode on four pixels: `λ_{1,0} = 2 − √2`.
    #[test]
    fn first_mode_is_scaled_by_eigenvalue() {
        let (w, h) = (4, 3);
        let plan = DctPlan::new(w, h).unwrap();
        let f: Vec<f64> = (0..w * h)
            .map(|i| (PI * ((i % w) as f64 + 0.5) / w as f64).cos())
            .collect();
        let u = plan.solve(&f);
        let l = 2.0 - 2f64.sqrt();
        assert!((plan.eigenvalue(1, 0) - l).abs() < 1e-15);
        for (a, b) in u.iter().zip(&f) {
            assert!((a - b / l).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_shape() {
        assert!(DctPlan::new(1, 8).is_err());
    }
}
