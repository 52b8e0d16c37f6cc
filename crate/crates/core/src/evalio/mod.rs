//! Binary-classification metrics and dataset readers.
//!
//! Datasets enter the pipeline either as an IDX image/label pair or as a
//! directory of 8-bit grayscale PNGs indexed by a `filename,label` CSV.
//! Image dimensions are not checked for uniformity here; quanvolution
//! rejects mixed sizes.

mod idx;
mod metrics;
mod pngcsv;
mod synthetic;

pub use idx::{parse_idx_images, parse_idx_labels, read_idx, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use metrics::{trapezoid_area, LabeledScores, PairCounts};
pub use pngcsv::{read_png_csv, write_png_gray};
pub use synthetic::{blob_or_ring, SyntheticSpec};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quanvolve::ImageU8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
    #[error("scores must be totally ordered (no NaN)")]
    UnorderedScore,
    #[error("both classes must be present")]
    SingleClass,
    #[error("no samples")]
    EmptyInput,
    #[error("{path}: magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: {found} bytes, expected {expected}")]
    TruncatedFile {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: not 8-bit grayscale ({detail})")]
    NonGrayscale { path: PathBuf, detail: String },
    #[error("row {row}: label {value:?} is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("images have different sizes")]
    MixedDimensions,
    #[error("unknown split {0:?}")]
    UnknownSplit(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Png { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(EvalError::UnknownSplit(other.into())),
        }
    }
}

/// Labelled grayscale images, one label per image.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageU8>,
    pub labels: Vec<u8>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn new(images: Vec<ImageU8>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(EvalError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(EvalError::NonBinaryLabel(l));
        }
        Ok(Self {
            images,
            labels,
            split: None,
        })
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = Some(split);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Shared `(height, width)`, or `None` when empty or mixed.
    pub fn dims(&self) -> Option<(usize, usize)> {
        let first = self.images.first()?;
        let d = (first.height, first.width);
        self.images.iter().all(|img| (img.height, img.width) == d).then_some(d)
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - pos, pos]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_checks() {
        let img = ImageU8::filled(2, 2, 0);
        assert!(matches!(
            Dataset::new(vec![img.clone()], vec![]),
            Err(EvalError::CountMismatch { images: 1, labels: 0 })
        ));
        assert!(matches!(
            Dataset::new(vec![img.clone()], vec![3]),
            Err(EvalError::NonBinaryLabel(3))
        ));
        let ds = Dataset::new(vec![img.clone(), ImageU8::filled(3, 2, 0)], vec![1, 0]).unwrap();
        assert_eq!(ds.dims(), None);
        assert_eq!(ds.label_counts(), [1, 1]);
        let ds = Dataset::new(vec![img.clone(), img], vec![1, 1])
            .unwrap()
            .with_split(Split::Val);
        assert_eq!(ds.dims(), Some((2, 2)));
        assert_eq!(ds.split, Some(Split::Val));
    }

    #[test]
    fn split_names() {
        for s in [Split::Train, Split::Val, Split::Test] {
            assert_eq!(s.to_string().parse::<Split>().unwrap(), s);
        }
        assert!("dev".parse::<Split>().is_err());
    }
}
