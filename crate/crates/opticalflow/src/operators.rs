//! Matrix-free operators on flow vectors `x = (vec(u_x), vec(u_y))`.

use regkrylov::operator::MapKind;
use regkrylov::LinearMap;

use crate::dct::{neg_laplacian_into, DctPlan};
use crate::image::Image;
use crate::{Error, Result};

/// `A = J (1 1; 1 1) J` with `J = diag(J_x, J_y)`:
/// `(dx, dy) ↦ (J_x s, J_y s)` where `s = J_x dx + J_y dy` pixelwise.
#[derive(Clone, Debug)]
pub struct FlowOperator {
    jx: Vec<f64>,
    jy: Vec<f64>,
}

impl FlowOperator {
    pub fn new(jx: &Image, jy: &Image) -> Self {
        assert!(jx.same_shape(jy), "gradient shapes differ");
        Self {
            jx: jx.values().to_vec(),
            jy: jy.values().to_vec(),
        }
    }

    pub fn pixels(&self) -> usize {
        self.jx.len()
    }

    pub fn jx(&self) -> &[f64] {
        &self.jx
    }

    pub fn jy(&self) -> &[f64] {
        &self.jy
    }

    /// `diag(A)`
    pub fn diagonal(&self) -> Vec<f64> {
        self.jx
            .iter()
            .map(|v| v * v)
            .chain(self.jy.iter().map(|v| v * v))
            .collect()
    }
}

impl LinearMap for FlowOperator {
    fn dim(&self) -> usize {
        2 * self.jx.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let p = self.jx.len();
        let (dx, dy) = x.split_at(p);
        let (ox, oy) = y.split_at_mut(p);
        for i in 0..p {
            let s = self.jx[i] * dx[i] + self.jy[i] * dy[i];
            ox[i] = self.jx[i] * s;
            oy[i] = self.jy[i] * s;
        }
    }

    fn kind(&self) -> MapKind {
        MapKind::MatrixFree
    }
}

/// `M = diag(−Δ_h, −Δ_h)` with reflecting borders.
#[derive(Clone, Debug)]
pub struct FlowRegularizer {
    width: usize,
    height: usize,
}

impl FlowRegularizer {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    /// `diag(M)`: the number of in-grid neighbours of each pixel.
    pub fn diagonal(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let one: Vec<f64> = (0..h)
            .flat_map(|y| {
                (0..w).map(move |x| {
                    (usize::from(x > 0)
                        + usize::from(x + 1 < w)
                        + usize::from(y > 0)
                        + usize::from(y + 1 < h)) as f64
                })
            })
            .collect();
        [one.clone(), one].concat()
    }
}

impl LinearMap for FlowRegularizer {
    fn dim(&self) -> usize {
        2 * self.width * self.height
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let p = self.width * self.height;
        let (ox, oy) = y.split_at_mut(p);
        neg_laplacian_into(self.width, self.height, &x[..p], ox);
        neg_laplacian_into(self.width, self.height, &x[p..], oy);
    }

    fn kind(&self) -> MapKind {
        MapKind::MatrixFree
    }
}

/// Pseudo-inverse of [`FlowRegularizer`] by cosine transform, per component.
#[derive(Clone, Debug)]
pub struct LaplacianInverse {
    plan: DctPlan,
}

impl LaplacianInverse {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Ok(Self {
            plan: DctPlan::new(width, height)?,
        })
    }

    pub fn plan(&self) -> &DctPlan {
        &self.plan
    }
}

impl LinearMap for LaplacianInverse {
    fn dim(&self) -> usize {
        2 * self.plan.width() * self.plan.height()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        let p = x.len() / 2;
        let (a, b) = y.split_at_mut(p);
        self.plan.solve_in_place(a);
        self.plan.solve_in_place(b);
    }

    fn kind(&self) -> MapKind {
        MapKind::MatrixFree
    }
}

/// `diag(A + λM)⁻¹`.
pub fn jacobi_inverse(
    a: &FlowOperator,
    m: &FlowRegularizer,
    lambda: f64,
) -> Result<regkrylov::operator::Diagonal> {
    let d: Vec<f64> = a
        .diagonal()
        .iter()
        .zip(m.diagonal())
        .map(|(x, y)| x + lambda * y)
        .collect();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Config(format!(
            "diagonal of the regularized operator vanishes at entry {i}"
        )));
    }
    Ok(regkrylov::operator::Diagonal(d).inverse())
}

/// `C_0`: kernel of `M` (constant fields per component) orthonormalized so
/// that `C_0ᵀ A C_0 = I`.
pub fn kernel_basis_c0(jx: &Image, jy: &Image) -> Result<Vec<Vec<f64>>> {
    let sxx: f64 = jx.values().iter().map(|v| v * v).sum();
    let syy: f64 = jy.values().iter().map(|v| v * v).sum();
    let sxy: f64 = jx
        .values()
        .iter()
        .zip(jy.values())
        .map(|(a, b)| a * b)
        .sum();
    let schur = if sxx > 0.0 {
        syy - sxy * sxy / sxx
    } else {
        0.0
    };
    // relative guard: the gradients are numerically collinear
    if !(sxx > 0.0) || !(schur > 1e-12 * syy.max(sxx)) {
        return Err(Error::Textureless { sxx, syy, sxy });
    }
    let sb = 1.0 / schur.sqrt();
    let p = jx.len();
    let mut c1 = vec![0.0; 2 * p];
    c1[..p].fill(1.0 / sxx.sqrt());
    let mut c2 = vec![0.0; 2 * p];
    c2[..p].fill(-sxy * sb / sxx);
    c2[p..].fill(sb);
    Ok(vec![c1, c2])
}
