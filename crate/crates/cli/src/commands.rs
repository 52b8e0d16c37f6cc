use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use daqcnn::cnn::{
    grid_search, load_model, metrics_of, param_count, predict, save_model, stratified_split, train as train_model,
    Metrics, ModelParams, Splits, GRID_HEADER, HISTORY_HEADER, SUMMARY_HEADER,
};
use daqcnn::evalio::{
    blob_or_ring, read_idx, read_png_csv, write_idx, write_png_gray, Dataset, LabeledScores, SyntheticSpec,
};
use daqcnn::kernel::{coupling_matrix, sensitivity_matrix, KernelSpec};
use daqcnn::quanvolve::{quanvolve_dataset, read_features, FeatureSet};
use daqcnn::simulator::{exact_evolve_oracle, Axis, Statevector};
use serde::Serialize;

use crate::config::{DataFormat, FeaturePaths, RunConfig};

fn load_images(format: DataFormat, dir: &Path) -> Result<Dataset> {
    let ds = match format {
        DataFormat::Idx => read_idx(&dir.join("images.idx"), &dir.join("labels.idx")),
        DataFormat::Pngcsv => read_png_csv(dir, &dir.join("labels.csv")),
    };
    ds.with_context(|| format!("loading {} dataset {}", format_name(format), dir.display()))
}

fn format_name(format: DataFormat) -> &'static str {
    match format {
        DataFormat::Idx => "idx",
        DataFormat::Pngcsv => "png/csv",
    }
}

fn read_feature_file(path: &Path) -> Result<FeatureSet> {
    if !path.exists() {
        bail!(
            "feature file {} not found; run `daqcnn quanvolve` first",
            path.display()
        );
    }
    read_features(path).with_context(|| format!("reading feature file {}", path.display()))
}

fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    let f = &cfg.features;
    match (&f.train, &f.val, &f.all) {
        (Some(train), Some(val), _) => Ok(Splits {
            train: read_feature_file(train)?,
            val: read_feature_file(val)?,
            test: f.test.as_deref().map(read_feature_file).transpose()?,
        }),
        (None, None, Some(all)) => {
            let set = read_feature_file(all)?;
            Ok(stratified_split(&set, cfg.data.val_fraction, cfg.data.test_fraction, cfg.seed)?)
        }
        _ => bail!(
            "no usable feature files: pass --config <out_dir>/quanvolve.run.toml, --features, or --train-features and --val-features"
        ),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Pretty JSON with sorted keys.
fn json_document(value: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn roc_csv(probs: &[f64], labels: &[u8]) -> Result<String> {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in LabeledScores::new(probs.to_vec(), labels.to_vec())?.roc_points()? {
        writeln!(out, "{fpr},{tpr}")?;
    }
    Ok(out)
}

fn show(m: &Metrics) -> String {
    let auc = m.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
    format!("auc {auc}  acc {:.4}  loss {:.4}  (n = {})", m.acc, m.loss, m.count)
}

pub fn quanvolve(mut cfg: RunConfig, out: Option<PathBuf>) -> Result<()> {
    if let Some(out) = out {
        if cfg.data.dataset.is_none() {
            bail!("--out applies to a single --dataset; split sources write to the `features` paths");
        }
        cfg.features = FeaturePaths {
            all: Some(out),
            ..Default::default()
        };
    }
    cfg.resolve()?;
    let extractor = cfg.kernel.extractor()?;
    let d = &cfg.data;
    let f = &cfg.features;
    let mut jobs = Vec::new();
    let sources = [
        ("all", &d.dataset, &f.all),
        ("train", &d.train, &f.train),
        ("val", &d.val, &f.val),
        ("test", &d.test, &f.test),
    ];
    for (name, src, dst) in sources {
        if let Some(src) = src {
            let Some(dst) = dst else {
                bail!("`features.{name}` is not set for data source {}", src.display());
            };
            jobs.push((name, src.clone(), dst.clone()));
        }
    }
    if jobs.is_empty() {
        bail!("no images configured: pass --dataset, or --train-data and --val-data");
    }

    for (name, src, dst) in jobs {
        let ds = load_images(d.format, &src)?;
        if let Some(parent) = dst.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let report = quanvolve_dataset(&ds, &extractor, &dst, None)
            .with_context(|| format!("computing features for {}", src.display()))?;
        let m = &report.manifest;
        println!(
            "{name}: {} images, {}×{}×{} per image -> {}",
            m.num_images,
            m.h_out,
            m.w_out,
            m.channels,
            dst.display()
        );
        println!(
            "  feature digest {}  ({})",
            m.feature_digest,
            if report.cache_hit { "cache hit" } else { "computed" }
        );
    }
    let emitted = cfg.emit("quanvolve")?;
    println!("config {} (digest {})", emitted.display(), cfg.digest());
    Ok(())
}

#[derive(Serialize)]
struct TrainReport<'a> {
    config_digest: String,
    model: &'a Path,
    input_shape: [usize; 3],
    parameters: usize,
    best_epoch: usize,
    epochs_run: usize,
    train: Metrics,
    val: Metrics,
    test: Option<Metrics>,
}

pub fn train(mut cfg: RunConfig) -> Result<()> {
    cfg.resolve()?;
    let splits = load_splits(&cfg)?;
    let tc = cfg.train_config();
    let outcome = train_model::<f64>(&splits.train, &splits.val, &tc).context("training")?;
    let params = &outcome.params;
    let out = &cfg.out_dir;

    let model_path = out.join("model.dqkm");
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_model(&model_path, params).with_context(|| format!("writing {}", model_path.display()))?;

    let mut history = format!("{HISTORY_HEADER}\n");
    for r in &outcome.history {
        history.push_str(&r.csv_row());
        history.push('\n');
    }
    write(&out.join("history.csv"), history)?;

    let score = |set: &FeatureSet, roc_name: Option<&str>| -> Result<Metrics> {
        let probs = predict(params, set)?;
        if let Some(name) = roc_name {
            write(&out.join(name), roc_csv(&probs, &set.labels)?)?;
        }
        Ok(metrics_of(&probs, &set.labels)?)
    };
    let train_m = score(&splits.train, None)?;
    let val_m = score(&splits.val, Some("roc_val.csv"))?;
    let test_m = splits
        .test
        .as_ref()
        .map(|t| score(t, Some("roc_test.csv")))
        .transpose()?;

    let a = params.arch.input;
    let report = TrainReport {
        config_digest: cfg.digest(),
        model: &model_path,
        input_shape: [a.height, a.width, a.channels],
        parameters: param_count(a)?.total,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.history.len(),
        train: train_m,
        val: val_m,
        test: test_m,
    };
    write(&out.join("metrics.json"), json_document(&report)?)?;
    let emitted = cfg.emit("train")?;

    println!(
        "trained {} parameters on {}×{}×{} inputs; best epoch {} of {}",
        report.parameters, a.height, a.width, a.channels, report.best_epoch, report.epochs_run
    );
    println!("train: {}", show(&train_m));
    println!("val:   {}", show(&val_m));
    if let Some(t) = &test_m {
        println!("test:  {}", show(t));
    }
    println!("outputs in {} (config {})", out.display(), emitted.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport<'a> {
    config_digest: String,
    model: &'a Path,
    features: String,
    metrics: Metrics,
}

pub fn evaluate(
    mut cfg: RunConfig,
    model: Option<PathBuf>,
    features: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    cfg.resolve()?;
    let model_path = model.unwrap_or_else(|| cfg.out_dir.join("model.dqkm"));
    if !model_path.exists() {
        bail!("model checkpoint {} not found", model_path.display());
    }
    let params: ModelParams<f64> =
        load_model(&model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let (label, set) = match features {
        Some(p) => (p.display().to_string(), read_feature_file(&p)?),
        None => {
            let splits = load_splits(&cfg)?;
            match splits.test {
                Some(t) => ("test split".to_string(), t),
                None => ("val split".to_string(), splits.val),
            }
        }
    };
    let probs = predict(&params, &set)?;
    let metrics = metrics_of(&probs, &set.labels)?;
    let out = out.unwrap_or_else(|| cfg.out_dir.join("evaluation.json"));
    let report = EvalReport {
        config_digest: cfg.digest(),
        model: &model_path,
        features: label.clone(),
        metrics,
    };
    write(&out, json_document(&report)?)?;
    let roc = out.with_extension("roc.csv");
    write(&roc, roc_csv(&probs, &set.labels)?)?;
    cfg.emit("evaluate")?;
    println!("{label}: {}", show(&metrics));
    println!("metrics {} and {}", out.display(), roc.display());
    Ok(())
}

#[derive(Serialize)]
struct GridReport<'a> {
    config_digest: String,
    rows: usize,
    cells: usize,
    best: &'a daqcnn::cnn::GridRow,
}

pub fn gridsearch(mut cfg: RunConfig) -> Result<()> {
    cfg.resolve()?;
    if cfg.grid.cells().is_empty() {
        bail!("grid has no cells");
    }
    let splits = load_splits(&cfg)?;
    let base = cfg.train_config();
    let result = grid_search(&splits, &cfg.grid, &base).context("grid search")?;
    let out = &cfg.out_dir;

    let mut table = format!("{GRID_HEADER}\n");
    for r in &result.rows {
        table.push_str(&r.csv_row());
        table.push('\n');
    }
    write(&out.join("grid.csv"), table)?;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    for s in &result.summaries {
        for row in s.csv_rows() {
            summary.push_str(&row);
            summary.push('\n');
        }
    }
    write(&out.join("grid_summary.csv"), summary)?;
    let best = result.best_row();
    let report = GridReport {
        config_digest: cfg.digest(),
        rows: result.rows.len(),
        cells: result.summaries.len(),
        best,
    };
    write(&out.join("best.json"), json_document(&report)?)?;
    let emitted = cfg.emit("gridsearch")?;

    println!("{} runs over {} cells", result.rows.len(), result.summaries.len());
    println!("lr       dropout  act   val AUC median [min, max]   test AUC median");
    for s in &result.summaries {
        let test = s.test_auc.map_or("n/a".to_string(), |q| format!("{:.4}", q.median));
        println!(
            "{:<8} {:<8} {:<5} {:.4} [{:.4}, {:.4}]       {test}",
            s.learning_rate, s.dropout, s.activation, s.val_auc.median, s.val_auc.min, s.val_auc.max
        );
    }
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "best: lr {} dropout {} {} repeat {}: val AUC {:.4}, test AUC {}, test ACC {}",
        best.learning_rate,
        best.dropout,
        best.activation,
        best.repeat,
        best.val_auc,
        opt(best.test_auc),
        opt(best.test_acc)
    );
    println!("outputs in {} (config {})", out.display(), emitted.display());
    Ok(())
}

pub fn inspect_kernel(cfg: &RunConfig, phis: &[f64], oracle_substeps: usize, fd_step: f64) -> Result<()> {
    let spec = cfg.kernel.spec()?;
    let kernel = spec.compile::<f64>()?;
    let q = kernel.n_qubits();
    if phis.len() != q {
        bail!("expected {q} angles for a {0}×{0} patch, got {1}", spec.n, phis.len());
    }
    println!(
        "kernel n={} graphs=[{}] tau={} steps={} theta0={} coupling={:?} schedule={:?}",
        spec.n,
        cfg.kernel.graphs.join(","),
        spec.tau,
        spec.steps,
        spec.theta0,
        spec.coupling,
        spec.schedule
    );
    let outputs = kernel.eval(phis)?;
    for (m, name) in cfg.kernel.graphs.iter().enumerate() {
        let graph = &spec.graphs[m];
        let vals: Vec<String> = outputs[m * q..(m + 1) * q].iter().map(|v| format!("{v:.6}")).collect();
        println!("\n[{name}] outputs: [{}]", vals.join(", "));

        let single = KernelSpec {
            graphs: vec![graph.clone()],
            ..spec.clone()
        };
        match sensitivity_matrix(&single, phis, fd_step) {
            Ok(s) => {
                println!("[{name}] sensitivity d<Z_i>/dphi_j (step {fd_step:e}):");
                for i in 0..q {
                    let row: Vec<String> = s.row(i).iter().map(|v| format!("{v:+.3e}")).collect();
                    println!("  {}", row.join("  "));
                }
                println!("[{name}] max off-diagonal sensitivity: {:.3e}", s.max_off_diagonal());
            }
            Err(e) => println!("[{name}] sensitivity skipped: {e}"),
        }

        let couplings = coupling_matrix::<f64>(graph, &spec.coupling)?;
        let mut exact = exact_evolve_oracle(
            &Statevector::encoded(phis)?,
            &spec.schedule,
            spec.tau,
            oracle_substeps,
            &couplings,
        )?;
        exact.apply_global_rotation(Axis::Y, spec.theta0)?;
        let fidelity = kernel.evolve(m, phis)?.fidelity(&exact);
        println!(
            "[{name}] trotter fidelity vs {oracle_substeps}-slice oracle: {fidelity:.12} (1 - F = {:.3e})",
            1.0 - fidelity
        );
    }
    Ok(())
}

pub fn synth(out: &Path, format: DataFormat, count: usize, size: usize, noise: f64, seed: u64) -> Result<()> {
    let ds = blob_or_ring(&SyntheticSpec {
        count,
        size,
        noise,
        seed,
    });
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match format {
        DataFormat::Idx => write_idx(&ds, &out.join("images.idx"), &out.join("labels.idx"))?,
        DataFormat::Pngcsv => {
            let mut csv = String::from("filename,label\n");
            for (k, (img, label)) in ds.images.iter().zip(&ds.labels).enumerate() {
                let name = format!("img_{k:05}.png");
                write_png_gray(&out.join(&name), img)?;
                writeln!(csv, "{name},{label}")?;
            }
            write(&out.join("labels.csv"), csv)?;
        }
    }
    let [neg, pos] = ds.label_counts();
    println!(
        "wrote {} {size}×{size} images ({pos} ring, {neg} blob) to {}",
        ds.len(),
        out.display()
    );
    Ok(())
}
