use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    provenance_digest, write_features, FeatureSet, QuanvolveError, Quanvolver, Result, FEATURE_VERSION, NORMALIZATION,
};
use crate::evalio::Dataset;
use crate::kernel::KernelSpec;

/// How per-image features are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Extractor {
    /// Quantum kernel swept with the given stride.
    Quantum { spec: KernelSpec, stride: usize },
    /// Raw pixels scaled to `[0, 1]` as a single channel; input for the
    /// classical baseline.
    Raw,
}

impl Extractor {
    fn kernel_digest(&self) -> Option<String> {
        match self {
            Extractor::Quantum { spec, stride } => Some(provenance_digest(spec, *stride)),
            Extractor::Raw => None,
        }
    }
}

/// Sidecar document describing a feature file. Serialised with sorted keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u16,
    pub extractor: String,
    pub kernel: Option<KernelSpec>,
    pub kernel_digest: Option<String>,
    pub normalization: String,
    pub stride: Option<usize>,
    pub dataset_digest: String,
    pub num_images: usize,
    pub h_out: usize,
    pub w_out: usize,
    pub channels: usize,
    pub label_counts: [usize; 2],
    pub labels_digest: String,
    pub feature_digest: String,
    pub generator: String,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serialises");
        let mut s = serde_json::to_string_pretty(&value).expect("manifest serialises");
        s.push('\n');
        s
    }

    fn same_inputs(&self, other: &Manifest) -> bool {
        self.version == other.version
            && self.extractor == other.extractor
            && self.kernel_digest == other.kernel_digest
            && self.normalization == other.normalization
            && self.stride == other.stride
            && self.dataset_digest == other.dataset_digest
    }
}

#[derive(Debug, Clone)]
pub struct QuanvolveReport {
    pub cache_hit: bool,
    pub features_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

/// `<features>.manifest.json`.
pub fn manifest_path(features: &Path) -> PathBuf {
    let mut name = features.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// SHA-256 over every image (dimensions and pixels) followed by the labels.
pub fn dataset_digest(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((dataset.images.len() as u64).to_le_bytes());
    for img in &dataset.images {
        h.update((img.height as u64).to_le_bytes());
        h.update((img.width as u64).to_le_bytes());
        h.update(&img.data);
    }
    h.update(&dataset.labels);
    hex::encode(h.finalize())
}

fn check_dataset(dataset: &Dataset) -> Result<(usize, usize)> {
    if dataset.images.len() != dataset.labels.len() {
        return Err(QuanvolveError::CountMismatch {
            images: dataset.images.len(),
            labels: dataset.labels.len(),
        });
    }
    let Some(first) = dataset.images.first() else {
        return Err(QuanvolveError::BadImage("dataset is empty".into()));
    };
    let expected = (first.height, first.width);
    for (index, img) in dataset.images.iter().enumerate() {
        let found = (img.height, img.width);
        if found != expected {
            return Err(QuanvolveError::DimensionMismatch { index, expected, found });
        }
    }
    Ok(expected)
}

fn extract(dataset: &Dataset, extractor: &Extractor, height: usize, width: usize) -> Result<FeatureSet> {
    match extractor {
        Extractor::Raw => {
            let data = dataset
                .images
                .iter()
                .flat_map(|img| img.data.iter().map(|&p| f32::from(p) / 255.0))
                .collect();
            FeatureSet::new(height, width, 1, data, dataset.labels.clone())
        }
        Extractor::Quantum { spec, stride } => {
            let q = Quanvolver::<f64>::new(spec, *stride)?;
            let (h_out, w_out) = q.output_dims(height, width)?;
            let maps = dataset
                .images
                .par_iter()
                .map(|img| q.image(img))
                .collect::<Result<Vec<_>>>()?;
            let mut data = Vec::with_capacity(maps.len() * h_out * w_out * q.channels());
            for m in maps {
                data.extend_from_slice(&m.data);
            }
            FeatureSet::new(h_out, w_out, q.channels(), data, dataset.labels.clone())
        }
    }
}

/// Computes the feature file for a whole dataset and writes it next to its
/// manifest. An existing output whose manifest records the same inputs and
/// whose bytes still match the recorded digest is reused untouched.
///
/// `workers` caps the thread count; `None` uses the global pool.
pub fn quanvolve_dataset(
    dataset: &Dataset,
    extractor: &Extractor,
    out_path: &Path,
    workers: Option<usize>,
) -> Result<QuanvolveReport> {
    let (height, width) = check_dataset(dataset)?;
    if let Extractor::Quantum { spec, stride } = extractor {
        spec.validate()?;
        super::output_dims(height, width, spec.n, *stride)?;
    }
    let labels_digest = hex::encode(Sha256::digest(&dataset.labels));
    let mut label_counts = [0usize; 2];
    for &l in &dataset.labels {
        if l > 1 {
            return Err(QuanvolveError::BadFormat(format!("label {l} is not binary")));
        }
        label_counts[l as usize] += 1;
    }

    let mut manifest = Manifest {
        format: "DQKF".into(),
        version: FEATURE_VERSION,
        extractor: match extractor {
            Extractor::Quantum { .. } => "quantum".into(),
            Extractor::Raw => "raw".into(),
        },
        kernel: match extractor {
            Extractor::Quantum { spec, .. } => Some(spec.clone()),
            Extractor::Raw => None,
        },
        kernel_digest: extractor.kernel_digest(),
        normalization: match extractor {
            Extractor::Quantum { .. } => NORMALIZATION.into(),
            Extractor::Raw => "x = pixel / 255".into(),
        },
        stride: match extractor {
            Extractor::Quantum { stride, .. } => Some(*stride),
            Extractor::Raw => None,
        },
        dataset_digest: dataset_digest(dataset),
        num_images: dataset.images.len(),
        h_out: 0,
        w_out: 0,
        channels: 0,
        label_counts,
        labels_digest,
        feature_digest: String::new(),
        generator: concat!("daqcnn ", env!("CARGO_PKG_VERSION")).into(),
    };

    let manifest_file = manifest_path(out_path);
    if let Some(cached) = load_cached(out_path, &manifest_file, &manifest) {
        return Ok(QuanvolveReport {
            cache_hit: true,
            features_path: out_path.to_path_buf(),
            manifest_path: manifest_file,
            manifest: cached,
        });
    }

    let set = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| QuanvolveError::Io(std::io::Error::other(e)))?
            .install(|| extract(dataset, extractor, height, width))?,
        None => extract(dataset, extractor, height, width)?,
    };
    write_features(out_path, &set)?;
    let bytes = fs::read(out_path)?;
    manifest.h_out = set.height;
    manifest.w_out = set.width;
    manifest.channels = set.channels;
    manifest.feature_digest = hex::encode(Sha256::digest(&bytes));
    fs::write(&manifest_file, manifest.to_json())?;

    Ok(QuanvolveReport {
        cache_hit: false,
        features_path: out_path.to_path_buf(),
        manifest_path: manifest_file,
        manifest,
    })
}

fn load_cached(out_path: &Path, manifest_file: &Path, wanted: &Manifest) -> Option<Manifest> {
    let text = fs::read_to_string(manifest_file).ok()?;
    let cached: Manifest = serde_json::from_str(&text).ok()?;
    if !cached.same_inputs(wanted) {
        return None;
    }
    let bytes = fs::read(out_path).ok()?;
    (hex::encode(Sha256::digest(&bytes)) == cached.feature_digest).then_some(cached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_graph, GraphKind};
    use crate::quanvolve::{read_features, ImageU8, FEATURE_HEADER_LEN};

    fn kings_spec() -> KernelSpec {
        KernelSpec::single(make_graph(&GraphKind::Kings, 2).unwrap())
    }

    fn image(seed: u8) -> ImageU8 {
        ImageU8::new(
            6,
            6,
            (0..36)
                .map(|i| (i as u8).wrapping_mul(seed).wrapping_add(seed))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_images_give_identical_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("f.dqkf");
        let ds = Dataset::new(vec![image(3), image(3), image(3)], vec![0, 1, 0]).unwrap();
        let ex = Extractor::Quantum {
            spec: kings_spec(),
            stride: 2,
        };
        let report = quanvolve_dataset(&ds, &ex, &out, Some(2)).unwrap();
        assert!(!report.cache_hit);
        let set = read_features(&out).unwrap();
        assert_eq!((set.height, set.width, set.channels), (3, 3, 4));
        assert_eq!(set.image(0), set.image(1));
        assert_eq!(set.image(0), set.image(2));
        assert_eq!(set.labels, vec![0, 1, 0]);
        assert_eq!(report.manifest.label_counts, [2, 1]);
    }

    #[test]
    fn rerun_hits_cache_and_change_invalidates() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("f.dqkf");
        let ds = Dataset::new(vec![image(3), image(5)], vec![0, 1]).unwrap();
        let ex = Extractor::Quantum {
            spec: kings_spec(),
            stride: 2,
        };
        let first = quanvolve_dataset(&ds, &ex, &out, None).unwrap();
        let bytes = fs::read(&out).unwrap();
        let manifest = fs::read(manifest_path(&out)).unwrap();
        let second = quanvolve_dataset(&ds, &ex, &out, None).unwrap();
        assert!(second.cache_hit);
        assert_eq!(second.manifest, first.manifest);
        assert_eq!(fs::read(&out).unwrap(), bytes);
        assert_eq!(fs::read(manifest_path(&out)).unwrap(), manifest);

        // fresh computation elsewhere is byte-identical
        let other = dir.path().join("g.dqkf");
        quanvolve_dataset(&ds, &ex, &other, Some(1)).unwrap();
        assert_eq!(fs::read(&other).unwrap(), bytes);

        let ex1 = Extractor::Quantum {
            spec: kings_spec(),
            stride: 1,
        };
        assert!(!quanvolve_dataset(&ds, &ex1, &out, None).unwrap().cache_hit);

        // a tampered feature file is recomputed
        fs::write(&other, b"junk").unwrap();
        let again = quanvolve_dataset(&ds, &ex, &other, None).unwrap();
        assert!(!again.cache_hit);
        assert_eq!(fs::read(&other).unwrap(), bytes);
    }

    #[test]
    fn payload_size_for_200_images() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("f.dqkf");
        let images: Vec<_> = (0..200).map(|k| ImageU8::filled(28, 28, k as u8)).collect();
        let labels = (0..200).map(|k| (k % 2) as u8).collect();
        let ds = Dataset::new(images, labels).unwrap();
        let mut spec = kings_spec();
        spec.tau = 0.0;
        quanvolve_dataset(&ds, &Extractor::Quantum { spec, stride: 2 }, &out, None).unwrap();
        let len = fs::metadata(&out).unwrap().len() as usize;
        assert_eq!(len, FEATURE_HEADER_LEN + 627_200 + 200);
        let set = read_features(&out).unwrap();
        assert_eq!(set.len(), 200);
    }

    #[test]
    fn dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(vec![image(1), ImageU8::filled(5, 6, 0)], vec![0, 1]).unwrap();
        let err = quanvolve_dataset(&ds, &Extractor::Raw, &dir.path().join("x"), None).unwrap_err();
        assert!(matches!(err, QuanvolveError::DimensionMismatch { index: 1, .. }));
    }

    #[test]
    fn raw_extractor() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("raw.dqkf");
        let ds = Dataset::new(vec![ImageU8::filled(4, 4, 255), ImageU8::filled(4, 4, 0)], vec![1, 0]).unwrap();
        let r = quanvolve_dataset(&ds, &Extractor::Raw, &out, None).unwrap();
        assert_eq!(r.manifest.channels, 1);
        assert!(r.manifest.kernel.is_none());
        let set = read_features(&out).unwrap();
        assert!(set.image(0).iter().all(|&v| v == 1.0));
        assert!(set.image(1).iter().all(|&v| v == 0.0));
    }
}
