//! Planar 8-bit RGB images and their unit-interval tensor view.

use mlsm_autodiff::{Element, Tensor};

use crate::error::{Error, Result};

/// Planar RGB raster: the R plane, then G, then B, each row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

impl Image {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, [0, 0, 0])
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Usage(format!("image extent {}x{} must be positive", width, height)));
        }
        let plane = width * height;
        let mut data = Vec::with_capacity(3 * plane);
        for c in rgb {
            data.extend(std::iter::repeat(c).take(plane));
        }
        Ok(Image { width, height, data })
    }

    pub fn from_planar(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != 3 * width * height {
            return Err(Error::Usage(format!(
                "planar buffer of {} bytes does not describe a {}x{} RGB image",
                data.len(),
                width,
                height
            )));
        }
        Ok(Image { width, height, data })
    }

    pub fn from_interleaved(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != 3 * width * height {
            return Err(Error::Usage("interleaved buffer length mismatch".into()));
        }
        let mut img = Self::new(width, height)?;
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            for c in 0..3 {
                img.data[c * width * height + i] = px[c];
            }
        }
        Ok(img)
    }

    pub fn to_interleaved(&self) -> Vec<u8> {
        let plane = self.width * self.height;
        let mut out = Vec::with_capacity(3 * plane);
        for i in 0..plane {
            out.extend([self.data[i], self.data[plane + i], self.data[2 * plane + i]]);
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn planar(&self) -> &[u8] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [u8] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = y * self.width + x;
        let n = self.width * self.height;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = y * self.width + x;
        let n = self.width * self.height;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[c * n + i] = v;
        }
    }

    pub fn crop(&self, left: usize, top: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || left + width > self.width || top + height > self.height {
            return Err(Error::Usage(format!(
                "crop {}x{}+{}+{} outside {}x{}",
                width, height, left, top, self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(3 * width * height);
        for c in 0..3 {
            let p = self.plane(c);
            for y in top..top + height {
                out.extend_from_slice(&p[y * self.width + left..y * self.width + left + width]);
            }
        }
        Self::from_planar(width, height, out)
    }

    /// Extends right/bottom edges by mirror reflection (excluding the edge
    /// sample) until both extents are multiples of `multiple`.
    pub fn pad_reflect_to_multiple(&self, multiple: usize) -> Self {
        let w = self.width.div_ceil(multiple) * multiple;
        let h = self.height.div_ceil(multiple) * multiple;
        self.pad_with(w, h, |i, n| reflect(i, n))
    }

    /// Extends right/bottom edges by repeating the last row/column.
    pub fn pad_replicate_to_multiple(&self, multiple: usize) -> Self {
        let w = self.width.div_ceil(multiple) * multiple;
        let h = self.height.div_ceil(multiple) * multiple;
        self.pad_with(w, h, |i, n| i.min(n - 1))
    }

    fn pad_with(&self, w: usize, h: usize, map: impl Fn(usize, usize) -> usize) -> Self {
        if (w, h) == (self.width, self.height) {
            return self.clone();
        }
        let mut out = Vec::with_capacity(3 * w * h);
        for c in 0..3 {
            let p = self.plane(c);
            for y in 0..h {
                let sy = map(y, self.height);
                for x in 0..w {
                    out.push(p[sy * self.width + map(x, self.width)]);
                }
            }
        }
        Image { width: w, height: h, data: out }
    }

    /// `1×3×H×W` tensor with samples scaled to `[0, 1]`.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let data = self.data.iter().map(|&v| T::lit(v as f64 / 255.0)).collect();
        Tensor::from_vec(&[1, 3, self.height, self.width], data).expect("image extents are consistent")
    }

    /// Unit-interval compute values clamped to `[0, 1]` and rounded to 8 bits.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        if values.len() != 3 * width * height {
            return Err(Error::Usage("unit buffer length mismatch".into()));
        }
        let data = values.iter().map(|&v| unit_to_u8(v)).collect();
        Self::from_planar(width, height, data)
    }

    /// Splits an `N×3×H×W` tensor into images (clamped at emission).
    pub fn batch_from_tensor<T: Element>(t: &Tensor<T>) -> Result<Vec<Self>> {
        let d = t.dims();
        if d.len() != 4 || d[1] != 3 {
            return Err(Error::Usage(format!("expected N×3×H×W image tensor, got {:?}", d)));
        }
        let (n, h, w) = (d[0], d[2], d[3]);
        let data = t.to_f64_vec();
        let per = 3 * h * w;
        (0..n).map(|s| Self::from_unit(w, h, &data[s * per..(s + 1) * per])).collect()
    }

    pub fn from_tensor<T: Element>(t: &Tensor<T>) -> Result<Self> {
        let mut v = Self::batch_from_tensor(t)?;
        if v.len() != 1 {
            return Err(Error::Usage(format!("expected a single image, tensor holds {}", v.len())));
        }
        Ok(v.remove(0))
    }

    /// Mean of all samples in `[0, 1]` units.
    pub fn mean_unit(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / (255.0 * self.data.len() as f64)
    }
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

pub fn unit_to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Stacks equally sized images into an `N×3×H×W` tensor in `[0, 1]`.
pub fn stack<T: Element>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| Error::Usage("empty image batch".into()))?;
    let (w, h) = first.dims();
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.dims() != (w, h) {
            return Err(Error::Mismatch(format!("batch mixes {:?} and {:?}", (w, h), img.dims())));
        }
        data.extend(img.data.iter().map(|&v| T::lit(v as f64 / 255.0)));
    }
    Ok(Tensor::from_vec(&[images.len(), 3, h, w], data)?)
}
