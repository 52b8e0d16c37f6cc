//! Run configuration: one TOML document drives every subcommand.
//!
//! Relative paths are resolved against the working directory. Every field has
//! a default, so an empty file is a valid configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use daqcnn::cnn::{Activation, Grid, TrainConfig};
use daqcnn::kernel::{make_graph, CouplingModel, GraphKind, KernelSpec};
use daqcnn::quanvolve::Extractor;
use daqcnn::simulator::Schedule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Directory with `images.idx` and `labels.idx`.
    #[default]
    Idx,
    /// Directory with `labels.csv` (`filename,label`) and 8-bit grayscale PNGs.
    Pngcsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    #[default]
    Quantum,
    Raw,
}

/// Image sources. Either `dataset` (split by fraction at training time) or
/// explicit `train` / `val` / `test` directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub format: DataFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            format: DataFormat::Idx,
            dataset: None,
            train: None,
            val: None,
            test: None,
            val_fraction: 0.2,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub extractor: ExtractorKind,
    pub n: usize,
    /// Graph names as accepted by `GraphKind`, e.g. `kings` or `custom:0-1,2-3`.
    pub graphs: Vec<String>,
    pub tau: f64,
    pub steps: usize,
    pub theta0: f64,
    /// Patch stride; `None` means non-overlapping patches (`stride = n`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    pub coupling: CouplingModel,
    pub schedule: Schedule,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            extractor: ExtractorKind::Quantum,
            n: 2,
            graphs: vec!["kings".into()],
            tau: 0.2,
            steps: 4,
            theta0: 0.0,
            stride: None,
            coupling: CouplingModel::default(),
            schedule: Schedule::Linear,
        }
    }
}

impl KernelConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.n)
    }

    pub fn spec(&self) -> Result<KernelSpec> {
        let graphs = self
            .graphs
            .iter()
            .map(|name| {
                let kind: GraphKind = name.parse()?;
                make_graph(&kind, self.n)
            })
            .collect::<Result<Vec<_>, _>>()
            .context("building kernel graphs")?;
        let spec = KernelSpec {
            n: self.n,
            graphs,
            schedule: self.schedule.clone(),
            tau: self.tau,
            steps: self.steps,
            theta0: self.theta0,
            coupling: self.coupling,
        };
        spec.validate().context("invalid kernel")?;
        Ok(spec)
    }

    pub fn extractor(&self) -> Result<Extractor> {
        Ok(match self.extractor {
            ExtractorKind::Quantum => Extractor::Quantum {
                spec: self.spec()?,
                stride: self.stride(),
            },
            ExtractorKind::Raw => Extractor::Raw,
        })
    }
}

/// Training settings; the seed is the run's top-level seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub dropout: f64,
    pub activation: Activation,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub repeats: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            dropout: d.dropout,
            activation: d.activation,
            batch_size: d.batch_size,
            epochs: d.epochs,
            patience: d.patience,
            repeats: d.repeats,
        }
    }
}

/// Feature files. Unset entries default to `<out_dir>/features/<name>.dqkf`
/// for whichever image sources are configured.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturePaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

impl FeaturePaths {
    fn is_empty(&self) -> bool {
        self.all.is_none() && self.train.is_none() && self.val.is_none() && self.test.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub kernel: KernelConfig,
    pub features: FeaturePaths,
    pub train: TrainSection,
    pub grid: Grid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            kernel: KernelConfig::default(),
            features: FeaturePaths::default(),
            train: TrainSection::default(),
            grid: Grid::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serialising config")
    }

    /// JSON with sorted keys and no whitespace.
    pub fn canonical_json(&self) -> String {
        serde_json::to_value(self).expect("config serialises").to_string()
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            dropout: t.dropout,
            activation: t.activation,
            batch_size: t.batch_size,
            epochs: t.epochs,
            patience: t.patience,
            seed: self.seed,
            repeats: t.repeats,
        }
    }

    /// Fills unset feature paths from the configured image sources.
    pub fn resolve(&mut self) -> Result<()> {
        let d = &self.data;
        if d.dataset.is_some() && (d.train.is_some() || d.val.is_some() || d.test.is_some()) {
            bail!("data.dataset and data.train/val/test are mutually exclusive");
        }
        if !self.features.is_empty() {
            return Ok(());
        }
        let dir = self.out_dir.join("features");
        let file = |name: &str| Some(dir.join(format!("{name}.dqkf")));
        if d.dataset.is_some() {
            self.features.all = file("all");
        } else {
            if d.train.is_some() {
                self.features.train = file("train");
            }
            if d.val.is_some() {
                self.features.val = file("val");
            }
            if d.test.is_some() {
                self.features.test = file("test");
            }
        }
        Ok(())
    }

    /// Writes the resolved config as `<out_dir>/<command>.run.toml`.
    pub fn emit(&self, command: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))?;
        let path = self.out_dir.join(format!("{command}.run.toml"));
        fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let k = cfg.kernel.spec().unwrap();
        assert_eq!((k.tau, k.steps, k.theta0, k.channels()), (0.2, 4, 0.0, 4));
        assert_eq!(cfg.kernel.stride(), 2);
        let t = cfg.train_config();
        assert_eq!((t.learning_rate, t.dropout, t.repeats), (5e-4, 0.55, 30));
        assert_eq!(cfg.grid.cells().len(), 8);
    }

    #[test]
    fn toml_round_trip_preserves_digest() {
        let mut cfg = RunConfig::default();
        cfg.data.dataset = Some("data/x".into());
        cfg.kernel.graphs = vec!["kings".into(), "ring".into()];
        cfg.kernel.schedule = Schedule::Constant { omega: 1.0, delta: 0.5 };
        cfg.kernel.coupling = CouplingModel::Uniform { j: 2.0 };
        cfg.resolve().unwrap();
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        assert_eq!(cfg.features.all, Some(PathBuf::from("runs/default/features/all.dqkf")));
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let json = RunConfig::default().canonical_json();
        let keys: Vec<&str> = [
            "\"data\"",
            "\"features\"",
            "\"grid\"",
            "\"kernel\"",
            "\"out_dir\"",
            "\"seed\"",
            "\"train\"",
        ]
        .into_iter()
        .collect();
        let positions: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{json}");
    }

    #[test]
    fn digest_tracks_every_field() {
        let base = RunConfig::default();
        let mut other = base.clone();
        other.kernel.tau = 0.25;
        assert_ne!(base.digest(), other.digest());
        let mut other = base.clone();
        other.seed = 1;
        assert_ne!(base.digest(), other.digest());
    }

    #[test]
    fn rejects_unknown_keys_and_conflicting_sources() {
        assert!(toml::from_str::<RunConfig>("[kernel]\nsize = 3\n").is_err());
        let mut cfg = RunConfig::default();
        cfg.data.dataset = Some("a".into());
        cfg.data.train = Some("b".into());
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn split_sources_map_to_split_feature_files() {
        let mut cfg = RunConfig::default();
        cfg.data.train = Some("d/train".into());
        cfg.data.val = Some("d/val".into());
        cfg.resolve().unwrap();
        assert!(cfg.features.all.is_none() && cfg.features.test.is_none());
        assert_eq!(cfg.features.val, Some(PathBuf::from("runs/default/features/val.dqkf")));
    }

    #[test]
    fn shipped_configs_load_and_validate() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let mut cfg = RunConfig::load(&path).unwrap();
                cfg.resolve().unwrap();
                cfg.kernel.extractor().unwrap();
                assert!(cfg.features.test.is_some(), "{}", path.display());
                seen += 1;
            }
        }
        assert!(seen >= 2);
    }
}
