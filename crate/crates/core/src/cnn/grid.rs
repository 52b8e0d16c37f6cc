use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::Activation;
use super::train::{evaluate, train, Splits, TrainConfig};
use super::{CnnError, Result};
use crate::rng::derive_seed;

/// Hyper-parameter axes; every combination is trained `repeats` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub learning_rates: Vec<f64>,
    pub dropouts: Vec<f64>,
    pub activations: Vec<Activation>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            learning_rates: vec![1e-4, 5e-4],
            dropouts: vec![0.55, 0.6],
            activations: vec![Activation::Relu, Activation::Gelu],
        }
    }
}

impl Grid {
    pub fn cells(&self) -> Vec<(f64, f64, Activation)> {
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &d in &self.dropouts {
                for &a in &self.activations {
                    out.push((lr, d, a));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub learning_rate: f64,
    pub dropout: f64,
    pub activation: Activation,
    pub repeat: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val_auc: f64,
    pub val_acc: f64,
    pub test_auc: Option<f64>,
    pub test_acc: Option<f64>,
}

pub const GRID_HEADER: &str =
    "learning_rate,dropout,activation,repeat,seed,best_epoch,epochs_run,val_auc,val_acc,test_auc,test_acc";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl GridRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.learning_rate,
            self.dropout,
            self.activation,
            self.repeat,
            self.seed,
            self.best_epoch,
            self.epochs_run,
            self.val_auc,
            self.val_acc,
            opt(self.test_auc),
            opt(self.test_acc)
        )
    }
}

/// Minimum, quartiles (linear interpolation) and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Distribution of one grid cell over its repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub learning_rate: f64,
    pub dropout: f64,
    pub activation: Activation,
    pub val_auc: Quartiles,
    pub test_auc: Option<Quartiles>,
    pub test_acc: Option<Quartiles>,
}

pub const SUMMARY_HEADER: &str = "learning_rate,dropout,activation,metric,min,q1,median,q3,max";

impl CellSummary {
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = Vec::new();
        let metrics = [
            ("val_auc", Some(self.val_auc)),
            ("test_auc", self.test_auc),
            ("test_acc", self.test_acc),
        ];
        for (name, q) in metrics {
            if let Some(q) = q {
                rows.push(format!(
                    "{},{},{},{name},{},{},{},{},{}",
                    self.learning_rate, self.dropout, self.activation, q.min, q.q1, q.median, q.q3, q.max
                ));
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub summaries: Vec<CellSummary>,
    /// Index of the row with the highest validation AUC (first on ties).
    pub best: usize,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }
}

/// Seed of restart `repeat`; shared by every cell so restarts are paired.
pub fn repeat_seed(base: u64, repeat: usize) -> u64 {
    derive_seed(base, repeat as u64)
}

/// Config of one grid row: `base` with the cell's values and restart seed.
pub fn row_config(base: &TrainConfig, cell: (f64, f64, Activation), repeat: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: cell.0,
        dropout: cell.1,
        activation: cell.2,
        seed: repeat_seed(base.seed, repeat),
        ..base.clone()
    }
}

/// Trains every cell of `grid` `base.repeats` times, in parallel over rows.
/// Rows are ordered cell-major, repeat-minor; the outcome does not depend on
/// the thread count.
pub fn grid_search(splits: &Splits, grid: &Grid, base: &TrainConfig) -> Result<GridResult> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(CnnError::InvalidConfig("grid has no cells".into()));
    }
    base.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..base.repeats).map(move |r| (c, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cfg = row_config(base, cells[c], r);
            let out = train::<f64>(&splits.train, &splits.val, &cfg)?;
            let val = evaluate(&out.params, &splits.val)?;
            let test = splits.test.as_ref().map(|t| evaluate(&out.params, t)).transpose()?;
            Ok(GridRow {
                learning_rate: cfg.learning_rate,
                dropout: cfg.dropout,
                activation: cfg.activation,
                repeat: r,
                seed: cfg.seed,
                best_epoch: out.best_epoch,
                epochs_run: out.history.len(),
                val_auc: val.auc.unwrap_or(f64::NAN),
                val_acc: val.acc,
                test_auc: test.and_then(|m| m.auc),
                test_acc: test.map(|m| m.acc),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, &(lr, d, a))| {
            let mine = &rows[c * base.repeats..(c + 1) * base.repeats];
            let col = |f: fn(&GridRow) -> Option<f64>| {
                let v: Vec<f64> = mine.iter().filter_map(f).collect();
                (v.len() == mine.len()).then(|| Quartiles::of(&v)).flatten()
            };
            CellSummary {
                learning_rate: lr,
                dropout: d,
                activation: a,
                val_auc: Quartiles::of(&mine.iter().map(|r| r.val_auc).collect::<Vec<_>>()).expect("repeats >= 1"),
                test_auc: col(|r| r.test_auc),
                test_acc: col(|r| r.test_acc),
            }
        })
        .collect();

    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.val_auc > rows[best].val_auc {
            best = i;
        }
    }
    Ok(GridResult { rows, summaries, best })
}
