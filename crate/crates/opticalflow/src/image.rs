//! Gray-level images stored row by row, and the pixel-level operations of
//! the flow pipeline.

use crate::{Error, Result};

/// `values[y * width + x]`
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Shape(format!(
                "images need at least 2x2 pixels, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite pixel at index {i}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Field of the same shape built from `values`.
    pub fn with_values(&self, values: Vec<f64>) -> Image {
        assert_eq!(values.len(), self.values.len(), "shape mismatch");
        Image {
            width: self.width,
            height: self.height,
            values,
        }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64)
            .sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            })
    }

    /// Bilinear sample at a real position, clamped to the pixel grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = (x.floor() as usize).min(self.width - 2);
        let y0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let a = self.at(x0, y0);
        let b = self.at(x0 + 1, y0);
        let c = self.at(x0, y0 + 1);
        let d = self.at(x0 + 1, y0 + 1);
        (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
    }
}

fn diff(values: &[f64], n: usize, stride: usize, at: usize, k: usize) -> f64 {
    if k == 0 {
        values[at + stride] - values[at]
    } else if k == n - 1 {
        values[at] - values[at - stride]
    } else {
        0.5 * (values[at + stride] - values[at - stride])
    }
}

/// Central differences inside, one-sided on the border.
pub fn gradient(img: &Image) -> (Image, Image) {
    let (w, h) = (img.width, img.height);
    let v = &img.values;
    let gx = Image::from_fn(w, h, |x, y| diff(v, w, 1, y * w + x, x));
    let gy = Image::from_fn(w, h, |x, y| diff(v, h, w, y * w + x, y));
    (gx, gy)
}

/// `∂u_x/∂x` with the same differences as [`gradient`].
pub fn strain_xx(ux: &Image) -> Image {
    gradient(ux).0
}

/// `I ∘ (id + u)`, bilinear with edge clamping.
pub fn warp(img: &Image, ux: &Image, uy: &Image) -> Image {
    assert!(
        img.same_shape(ux) && img.same_shape(uy),
        "flow and image shapes differ"
    );
    Image::from_fn(img.width, img.height, |x, y| {
        let i = y * img.width + x;
        img.sample(x as f64 + ux.values[i], y as f64 + uy.values[i])
    })
}

/// Median over a `width × width` window with edge replication.
pub fn median_filter(img: &Image, width: usize) -> Result<Image> {
    if width.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "median width must be odd, got {width}"
        )));
    }
    if width == 1 {
        return Ok(img.clone());
    }
    let half = (width / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);
    let mut window = Vec::with_capacity(width * width);
    let mut out = Vec::with_capacity(img.len());
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for dy in -half..=half {
                let yy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -half..=half {
                    let xx = (x + dx).clamp(0, w - 1) as usize;
                    window.push(img.values[yy * img.width + xx]);
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
            out.push(*m);
        }
    }
    Ok(img.with_values(out))
}

/// 2×2 box average; odd trailing rows and columns are dropped.
pub fn downsample(img: &Image) -> Result<Image> {
    let (w, h) = (img.width / 2, img.height / 2);
    if w < 2 || h < 2 {
        return Err(Error::Shape(format!(
            "cannot halve a {}x{} image",
            img.width, img.height
        )));
    }
    Ok(Image::from_fn(w, h, |x, y| {
        0.25 * (img.at(2 * x, 2 * y)
            + img.at(2 * x + 1, 2 * y)
            + img.at(2 * x, 2 * y + 1)
            + img.at(2 * x + 1, 2 * y + 1))
    }))
}

/// Bilinear prolongation of a field onto a finer grid whose pixel `p` sits
/// at coarse position `(p + 1/2)/2 − 1/2`; values are multiplied by `scale`.
pub fn upsample(field: &Image, width: usize, height: usize, scale: f64) -> Image {
    let sx = field.width as f64 / width as f64;
    let sy = field.height as f64 / height as f64;
    Image::from_fn(width, height, |x, y| {
        scale * field.sample((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
    })
}
