//! Synthetic speckle patterns that can be rendered under any displacement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::Image;

/// Gray level range of rendered images.
pub const GRAY_MAX: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Blob {
    x: f64,
    y: f64,
    sigma: f64,
    amplitude: f64,
}

/// Sum of isotropic Gaussian spots, defined on the whole plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Speckle {
    width: usize,
    height: usize,
    blobs: Vec<Blob>,
    scale: f64,
    offset: f64,
}

impl Speckle {
    /// Roughly one spot per `1/density` square pixels, radii between
    /// `sigma_min` and `sigma_max`, placed with a margin around the frame so
    /// that moved content stays textured.
    pub fn generate(
        width: usize,
        height: usize,
        density: f64,
        sigma: (f64, f64),
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = 4.0 * sigma.1 + 8.0;
        let (w, h) = (width as f64 + 2.0 * margin, height as f64 + 2.0 * margin);
        let count = (density * w * h).round() as usize;
        let blobs = (0..count)
            .map(|_| Blob {
                x: rng.gen_range(-margin..width as f64 + margin),
                y: rng.gen_range(-margin..height as f64 + margin),
                sigma: rng.gen_range(sigma.0..=sigma.1),
                amplitude: rng.gen_range(0.5..1.0),
            })
            .collect();
        let mut s = Self {
            width,
            height,
            blobs,
            scale: 1.0,
            offset: 0.0,
        };
        let (lo, hi) = s.render(0.0, 0.0).min_max();
        s.offset = -lo;
        s.scale = if hi > lo { GRAY_MAX / (hi - lo) } else { 1.0 };
        s
    }

    /// Desk-scale default: spots of 1.5 to 2.5 px covering the frame densely.
    pub fn standard(width: usize, height: usize, seed: u64) -> Self {
        Self::generate(width, height, 0.08, (1.5, 2.5), seed)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let mut v = 0.0;
        for b in &self.blobs {
            let (dx, dy) = (x - b.x, y - b.y);
            let r2 = dx * dx + dy * dy;
            let s2 = b.sigma * b.sigma;
            if r2 < 25.0 * s2 {
                v += b.amplitude * (-0.5 * r2 / s2).exp();
            }
        }
        self.scale * (v + self.offset)
    }

    /// Frame moved by `(tx, ty)`: pixel `p` shows the pattern at `p − t`, so
    /// the flow from the unmoved frame to this one is `t` everywhere.
    pub fn render(&self, tx: f64, ty: f64) -> Image {
        self.render_with(|_, _| (tx, ty))
    }

    /// Frame under a displacement field given at the sampled positions.
    pub fn render_with(&self, disp: impl Fn(f64, f64) -> (f64, f64)) -> Image {
        Image::from_fn(self.width, self.height, |x, y| {
            let (dx, dy) = disp(x as f64, y as f64);
            self.value(x as f64 - dx, y as f64 - dy)
        })
    }
}
