//! `DQKF` feature files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      4 bytes  "DQKF"
//! version    u16      1
//! num_images u32
//! h_out      u32
//! w_out      u32
//! channels   u32
//! payload    num_images * h_out * w_out * channels f32, image-major,
//!            row-major, channel-minor
//! labels     num_images u8
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{QuanvolveError, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"DQKF";
pub const FEATURE_VERSION: u16 = 1;
pub const FEATURE_HEADER_LEN: usize = 4 + 2 + 4 * 4;

/// Feature map of one image, `h_out x w_out x channels`, channel-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapTensor {
    pub h_out: usize,
    pub w_out: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub provenance: String,
}

impl FeatureMapTensor {
    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.w_out + x) * self.channels + c]
    }
}

/// Feature maps for a labelled collection of images, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub labels: Vec<u8>,
}

impl FeatureSet {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        let set = Self {
            height,
            width,
            channels,
            data,
            labels,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Values per image.
    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, k: usize) -> &[f32] {
        let len = self.image_len();
        &self.data[k * len..(k + 1) * len]
    }

    /// Subset in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.image_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &k in indices {
            data.extend_from_slice(self.image(k));
            labels.push(self.labels[k]);
        }
        Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
            labels,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.data.len() != self.labels.len() * self.image_len() {
            return Err(QuanvolveError::BadFormat(format!(
                "{} values for {} images of {} values",
                self.data.len(),
                self.labels.len(),
                self.image_len()
            )));
        }
        if let Some(v) = self.data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(QuanvolveError::BadFormat(format!("feature value {v} outside [-1, 1]")));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l > 1) {
            return Err(QuanvolveError::BadFormat(format!("label {l} is not binary")));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let dim = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| QuanvolveError::BadFormat(format!("{what} {v} exceeds u32")))
        };
        let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + self.data.len() * 4 + self.labels.len());
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        for (v, what) in [
            (self.labels.len(), "num_images"),
            (self.height, "h_out"),
            (self.width, "w_out"),
            (self.channels, "channels"),
        ] {
            out.extend_from_slice(&dim(v, what)?.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.labels);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FEATURE_HEADER_LEN {
            return Err(QuanvolveError::BadFormat("truncated header".into()));
        }
        if &bytes[..4] != FEATURE_MAGIC {
            return Err(QuanvolveError::BadFormat("bad magic, expected DQKF".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FEATURE_VERSION {
            return Err(QuanvolveError::BadFormat(format!("unsupported version {version}")));
        }
        let field = |k: usize| {
            let at = 6 + 4 * k;
            u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
        };
        let (count, height, width, channels) = (field(0), field(1), field(2), field(3));
        let values = count
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| QuanvolveError::BadFormat("header dimensions overflow".into()))?;
        let expected = FEATURE_HEADER_LEN + values * 4 + count;
        if bytes.len() != expected {
            return Err(QuanvolveError::BadFormat(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let payload = &bytes[FEATURE_HEADER_LEN..FEATURE_HEADER_LEN + values * 4];
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let labels = bytes[FEATURE_HEADER_LEN + values * 4..].to_vec();
        Self::new(height, width, channels, data, labels)
    }
}

pub fn write_features(path: &Path, set: &FeatureSet) -> Result<()> {
    let bytes = set.to_bytes()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureSet> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    FeatureSet::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let set = FeatureSet::new(1, 2, 1, vec![0.5, -1.0, 0.25, 1.0], vec![1, 0]).unwrap();
        let bytes = set.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"DQKF");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[2, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[1, 0, 0, 0]);
        assert_eq!(&bytes[14..18], &[2, 0, 0, 0]);
        assert_eq!(&bytes[18..22], &[1, 0, 0, 0]);
        assert_eq!(&bytes[22..26], &0.5f32.to_le_bytes());
        assert_eq!(&bytes[bytes.len() - 2..], &[1, 0]);
        assert_eq!(bytes.len(), FEATURE_HEADER_LEN + 16 + 2);
    }

    #[test]
    fn rejects_corruption() {
        let set = FeatureSet::new(1, 1, 1, vec![0.5], vec![1]).unwrap();
        let mut bytes = set.to_bytes().unwrap();
        assert!(FeatureSet::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(FeatureSet::from_bytes(&bytes).is_err());
        assert!(FeatureSet::new(1, 1, 1, vec![1.5], vec![0]).is_err());
        assert!(FeatureSet::new(1, 1, 1, vec![0.5], vec![2]).is_err());
        assert!(FeatureSet::new(1, 1, 2, vec![0.5], vec![0]).is_err());
    }

    #[test]
    fn select_subsets() {
        let set = FeatureSet::new(1, 1, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], vec![0, 1, 1]).unwrap();
        let sub = set.select(&[2, 0]);
        assert_eq!(sub.data, vec![0.5, 0.6, 0.1, 0.2]);
        assert_eq!(sub.labels, vec![1, 0]);
    }

    proptest! {
        #[test]
        fn bytes_round_trip_bit_exactly(
            h in 1usize..4, w in 1usize..4, c in 1usize..5, count in 0usize..5,
            seed in any::<u64>(),
        ) {
            let len = h * w * c * count;
            let mut x = seed;
            let data: Vec<f32> = (0..len).map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 40) as f32 / (1u64 << 24) as f32) * 2.0 - 1.0
            }).collect();
            let labels: Vec<u8> = (0..count).map(|k| (k % 2) as u8).collect();
            let set = FeatureSet::new(h, w, c, data, labels).unwrap();
            let back = FeatureSet::from_bytes(&set.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            set.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, set);
        }
    }
}
