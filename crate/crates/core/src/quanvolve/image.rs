use super::{QuanvolveError, Result};
use crate::scalar::Real;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(QuanvolveError::BadImage(format!(
                "{} bytes for a {height}x{width} image",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }
}

/// `phi = pi * pixel / 255`, so 0 maps to 0 and 255 to pi exactly.
pub fn normalize_pixels<T: Real>(patch: &[u8]) -> Vec<T> {
    let scale = T::of(255.0);
    patch.iter().map(|&p| T::PI() * (T::of(f64::from(p)) / scale)).collect()
}

/// Flattened `n x n` patches in row-major sweep order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patches {
    pub n: usize,
    pub h_out: usize,
    pub w_out: usize,
    data: Vec<u8>,
}

impl Patches {
    pub fn len(&self) -> usize {
        self.h_out * self.w_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, k: usize) -> &[u8] {
        let q = self.n * self.n;
        &self.data[k * q..(k + 1) * q]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> {
        self.data.chunks_exact(self.n * self.n)
    }
}

/// Output grid size for a valid (unpadded) sweep.
pub fn output_dims(height: usize, width: usize, n: usize, stride: usize) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(QuanvolveError::InvalidStride(stride));
    }
    if n == 0 || n > height || n > width {
        return Err(QuanvolveError::PatchTooLarge { n, height, width });
    }
    Ok(((height - n) / stride + 1, (width - n) / stride + 1))
}

/// Cuts `image` into `n x n` patches with the given stride. Trailing rows and
/// columns that do not fill a patch are dropped.
pub fn extract_patches(image: &ImageU8, n: usize, stride: usize) -> Result<Patches> {
    let (h_out, w_out) = output_dims(image.height, image.width, n, stride)?;
    let mut data = Vec::with_capacity(h_out * w_out * n * n);
    for y in 0..h_out {
        for x in 0..w_out {
            for r in 0..n {
                let start = (y * stride + r) * image.width + x * stride;
                data.extend_from_slice(&image.data[start..start + n]);
            }
        }
    }
    Ok(Patches { n, h_out, w_out, data })
}
