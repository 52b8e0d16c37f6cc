use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use daqcnn::cnn::Activation;
use daqcnn::kernel::CouplingModel;

mod commands;
mod config;

use config::{DataFormat, ExtractorKind, RunConfig};

/// Digital-analog quantum convolution pipeline.
#[derive(Debug, Parser)]
#[command(name = "daqcnn", version)]
struct Cli {
    /// Cap on worker threads; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Computes feature files for the configured images.
    Quanvolve {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Output feature file (single-dataset mode only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains one model and reports validation and test metrics.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Scores a saved model on a feature file.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Model checkpoint; defaults to `<out_dir>/model.dqkm`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Features to score; defaults to the test split, then validation.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Metrics document path; defaults to `<out_dir>/evaluation.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains every grid cell `repeats` times.
    Gridsearch {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Learning rates, comma separated.
        #[arg(long, value_delimiter = ',')]
        learning_rates: Option<Vec<f64>>,
        /// Dropout rates, comma separated.
        #[arg(long, value_delimiter = ',')]
        dropouts: Option<Vec<f64>>,
        /// Activations, comma separated.
        #[arg(long, value_delimiter = ',')]
        activations: Option<Vec<Activation>>,
    },
    /// Prints kernel readouts, sensitivities and trotter accuracy for one patch.
    InspectKernel {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Patch angles in row-major order, `n*n` values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        phis: Vec<f64>,
        /// Slices of the dense reference integrator.
        #[arg(long, default_value_t = 64)]
        oracle_substeps: usize,
        /// Central-difference step for the sensitivity matrix.
        #[arg(long, default_value_t = daqcnn::kernel::DEFAULT_FD_STEP)]
        fd_step: f64,
    },
    /// Writes the synthetic blob-or-ring dataset to a directory.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = DataFormat::Idx)]
        format: DataFormat,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 28)]
        size: usize,
        /// Standard deviation of the additive pixel noise.
        #[arg(long, default_value_t = 12.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Single labelled image directory, split by fraction at training time.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    #[arg(long)]
    train_data: Option<PathBuf>,
    #[arg(long)]
    val_data: Option<PathBuf>,
    #[arg(long)]
    test_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Patch side `n`.
    #[arg(long)]
    kernel_size: Option<usize>,
    /// Graph names, comma separated (kings, grid4, diag, ring, empty, custom:0-1;1-3).
    #[arg(long, value_delimiter = ',')]
    graphs: Option<Vec<String>>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    theta0: Option<f64>,
    /// `geometric:<c6>` or `uniform:<j>`.
    #[arg(long)]
    coupling: Option<CouplingModel>,
    #[arg(long)]
    stride: Option<usize>,
    /// Use scaled raw pixels instead of the quantum kernel.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// Single feature file, split by fraction.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    train_features: Option<PathBuf>,
    #[arg(long)]
    val_features: Option<PathBuf>,
    #[arg(long)]
    test_features: Option<PathBuf>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    activation: Option<Activation>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_some<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl CommonArgs {
    fn load(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.out_dir, self.out_dir);
        set(&mut cfg.seed, self.seed);
        Ok(cfg)
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let d = &mut cfg.data;
        set(&mut d.format, self.format);
        if self.dataset.is_some() {
            d.dataset = self.dataset;
            d.train = None;
            d.val = None;
            d.test = None;
        }
        if self.train_data.is_some() || self.val_data.is_some() || self.test_data.is_some() {
            d.dataset = None;
        }
        set_some(&mut d.train, self.train_data);
        set_some(&mut d.val, self.val_data);
        set_some(&mut d.test, self.test_data);
    }
}

impl KernelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let k = &mut cfg.kernel;
        set(&mut k.n, self.kernel_size);
        set(&mut k.graphs, self.graphs);
        set(&mut k.tau, self.tau);
        set(&mut k.steps, self.steps);
        set(&mut k.theta0, self.theta0);
        set(&mut k.coupling, self.coupling);
        set_some(&mut k.stride, self.stride);
        if self.raw {
            k.extractor = ExtractorKind::Raw;
        }
    }
}

impl FeatureArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let f = &mut cfg.features;
        if self.features.is_some() {
            *f = config::FeaturePaths {
                all: self.features,
                ..Default::default()
            };
        }
        if self.train_features.is_some() || self.val_features.is_some() {
            f.all = None;
        }
        set_some(&mut f.train, self.train_features);
        set_some(&mut f.val, self.val_features);
        set_some(&mut f.test, self.test_features);
        set(&mut cfg.data.val_fraction, self.val_fraction);
        set(&mut cfg.data.test_fraction, self.test_fraction);
    }
}

impl TrainArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        set(&mut t.learning_rate, self.lr);
        set(&mut t.dropout, self.dropout);
        set(&mut t.activation, self.activation);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.epochs, self.epochs);
        set(&mut t.patience, self.patience);
        set(&mut t.repeats, self.repeats);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Quanvolve {
            common,
            data,
            kernel,
            out,
        } => {
            let mut cfg = common.load()?;
            data.apply(&mut cfg);
            kernel.apply(&mut cfg);
            commands::quanvolve(cfg, out)
        }
        Command::Train {
            common,
            features,
            train,
        } => {
            let mut cfg = common.load()?;
            features.apply(&mut cfg);
            train.apply(&mut cfg);
            commands::train(cfg)
        }
        Command::Evaluate {
            common,
            model,
            features,
            out,
        } => commands::evaluate(common.load()?, model, features, out),
        Command::Gridsearch {
            common,
            features,
            train,
            learning_rates,
            dropouts,
            activations,
        } => {
            let mut cfg = common.load()?;
            features.apply(&mut cfg);
            train.apply(&mut cfg);
            set(&mut cfg.grid.learning_rates, learning_rates);
            set(&mut cfg.grid.dropouts, dropouts);
            set(&mut cfg.grid.activations, activations);
            commands::gridsearch(cfg)
        }
        Command::InspectKernel {
            common,
            kernel,
            phis,
            oracle_substeps,
            fd_step,
        } => {
            let mut cfg = common.load()?;
            kernel.apply(&mut cfg);
            commands::inspect_kernel(&cfg, &phis, oracle_substeps, fd_step)
        }
        Command::Synth {
            out,
            format,
            count,
            size,
            noise,
            seed,
        } => commands::synth(&out, format, count, size, noise, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
