//! Sweeping a quantum kernel over images.
//!
//! Output channel `m * n^2 + i` of position `(y, x)` holds `<Z_i>` of graph `m`
//! evaluated on the patch whose top-left pixel is `(y * stride, x * stride)`.
//! Patches are evaluated in parallel; every result lands in a fixed slot, so
//! the output does not depend on scheduling.

mod dataset;
mod features;
mod image;

pub use dataset::{dataset_digest, manifest_path, quanvolve_dataset, Extractor, Manifest, QuanvolveReport};
pub use features::{
    read_features, write_features, FeatureMapTensor, FeatureSet, FEATURE_HEADER_LEN, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use image::{extract_patches, normalize_pixels, output_dims, ImageU8, Patches};

use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kernel::{Kernel, KernelError, KernelSpec};
use crate::scalar::Real;

/// Pixel-to-angle map recorded in manifests.
pub const NORMALIZATION: &str = "phi = pi * pixel / 255";

#[derive(Debug, Error)]
pub enum QuanvolveError {
    #[error("{n}x{n} patch does not fit a {height}x{width} image")]
    PatchTooLarge { n: usize, height: usize, width: usize },
    #[error("stride must be at least 1, got {0}")]
    InvalidStride(usize),
    #[error("image {index} is {found:?}, expected {expected:?}")]
    DimensionMismatch {
        index: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("dataset has {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid image: {0}")]
    BadImage(String),
    #[error("malformed feature data: {0}")]
    BadFormat(String),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = QuanvolveError> = std::result::Result<T, E>;

/// A compiled kernel bound to a stride.
#[derive(Debug, Clone)]
pub struct Quanvolver<T: Real> {
    kernel: Kernel<T>,
    stride: usize,
    provenance: String,
}

impl<T: Real> Quanvolver<T> {
    pub fn new(spec: &KernelSpec, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(QuanvolveError::InvalidStride(stride));
        }
        Ok(Self {
            kernel: spec.compile()?,
            stride,
            provenance: provenance_digest(spec, stride),
        })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.kernel.channels()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        output_dims(height, width, self.kernel.n(), self.stride)
    }

    pub fn image(&self, image: &ImageU8) -> Result<FeatureMapTensor> {
        let patches = extract_patches(image, self.kernel.n(), self.stride)?;
        let channels = self.channels();
        let mut data = vec![0f32; patches.len() * channels];
        data.par_chunks_mut(channels)
            .enumerate()
            .try_for_each(|(k, slot)| -> Result<()> {
                let phis = normalize_pixels::<T>(patches.get(k));
                let values = self.kernel.eval(&phis)?;
                for (s, v) in slot.iter_mut().zip(values) {
                    *s = v.to_f32().unwrap_or(f32::NAN);
                }
                Ok(())
            })?;
        Ok(FeatureMapTensor {
            h_out: patches.h_out,
            w_out: patches.w_out,
            channels,
            data,
            provenance: self.provenance.clone(),
        })
    }
}

/// Feature map of a single image, computed in double precision.
pub fn quanvolve_image(image: &ImageU8, spec: &KernelSpec, stride: usize) -> Result<FeatureMapTensor> {
    Quanvolver::<f64>::new(spec, stride)?.image(image)
}

/// Identifies the kernel, normalisation and stride that produced a tensor.
pub fn provenance_digest(spec: &KernelSpec, stride: usize) -> String {
    let doc = json!({
        "kernel": spec,
        "normalization": NORMALIZATION,
        "stride": stride,
    });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}
