use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::RELIABILITY_BINS;
use crate::tensor::checkpoint;

use super::cell::{load_source, run_cell, CellOutcome, CellSeeds, MetricValues, METRICS};
use super::config::ExperimentConfig;

/// Runs `f` over `0..n` on a pool of `workers` threads and returns results
/// in index order.
pub(crate) fn par_cells<T: Send>(workers: Option<usize>, n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let run = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run),
        None => run(),
    }
}

pub(crate) fn cell_seeds(cfg: &ExperimentConfig) -> Vec<CellSeeds> {
    (0..cfg.repeats.splits)
        .flat_map(|s| (0..cfg.repeats.inits).map(move |i| CellSeeds::derive(cfg.seed, s, i)))
        .collect()
}

/// Mean and sample standard deviation of the present values.
pub fn mean_std(values: impl IntoIterator<Item = Option<f64>>) -> Option<(f64, f64, usize)> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std, v.len()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellSeeds>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: String,
    pub runs: usize,
    /// `(mean, std)` per entry of [`METRICS`].
    pub values: Vec<Option<(f64, f64)>>,
}

impl SummaryRow {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        let i = METRICS.iter().position(|m| *m == metric)?;
        self.values[i].map(|v| v.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub split: usize,
    pub init: usize,
    pub estimator: String,
    pub values: MetricValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRow {
    pub estimator: String,
    pub bin: usize,
    pub count: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub manifest: Manifest,
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<RunRow>,
    pub reliability: Vec<ReliabilityRow>,
    pub cells: Vec<CellOutcome>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let source = load_source(cfg)?;
    let seeds = cell_seeds(cfg);
    let cells = par_cells(cfg.workers, seeds.len(), |c| {
        let s = seeds[c].clone();
        let ctx = format!("split {}, init {}", s.split, s.init);
        run_cell(cfg, &source, s).map_err(|e| e.context(ctx))
    })?;

    let labels: Vec<String> = cfg.estimators.iter().map(|e| e.label()).collect();
    let mut runs = Vec::new();
    for c in &cells {
        for (label, o) in labels.iter().zip(&c.estimators) {
            runs.push(RunRow {
                split: c.seeds.split,
                init: c.seeds.init,
                estimator: label.clone(),
                values: o.metrics,
            });
        }
    }
    let summary = labels
        .iter()
        .enumerate()
        .map(|(e, label)| SummaryRow {
            estimator: label.clone(),
            runs: cells.len(),
            values: (0..METRICS.len())
                .map(|m| mean_std(cells.iter().map(|c| c.estimators[e].metrics[m])).map(|(a, b, _)| (a, b)))
                .collect(),
        })
        .collect();
    let mut reliability = Vec::new();
    if cfg.reliability {
        for (e, label) in labels.iter().enumerate() {
            let mut count = [0usize; RELIABILITY_BINS];
            let mut hits = [0usize; RELIABILITY_BINS];
            for c in &cells {
                if let Some(t) = &c.estimators[e].reliability {
                    for b in 0..RELIABILITY_BINS {
                        count[b] += t.count[b];
                        hits[b] += t.hits[b];
                    }
                }
            }
            for b in 0..RELIABILITY_BINS {
                reliability.push(ReliabilityRow {
                    estimator: label.clone(),
                    bin: b,
                    count: count[b],
                    accuracy: (count[b] > 0).then(|| hits[b] as f64 / count[b] as f64),
                });
            }
        }
    }
    Ok(ExperimentResult {
        manifest: Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            cells: seeds,
        },
        summary,
        runs,
        reliability,
        cells,
    })
}

impl ExperimentResult {
    /// `estimator,runs,<metric>_mean,<metric>_std,...`; absent metrics are
    /// empty fields.
    pub fn results_csv(&self) -> String {
        let mut out = String::from("estimator,runs");
        for m in METRICS {
            let _ = write!(out, ",{m}_mean,{m}_std");
        }
        out.push('\n');
        for r in &self.summary {
            let _ = write!(out, "{},{}", r.estimator, r.runs);
            for v in &r.values {
                let _ = write!(out, ",{},{}", fmt_opt(v.map(|x| x.0)), fmt_opt(v.map(|x| x.1)));
            }
            out.push('\n');
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from("split,init,estimator");
        for m in METRICS {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for r in &self.runs {
            let _ = write!(out, "{},{},{}", r.split, r.init, r.estimator);
            for v in r.values {
                let _ = write!(out, ",{}", fmt_opt(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn reliability_csv(&self) -> String {
        let mut out = String::from("estimator,bin,lower,upper,count,accuracy\n");
        for r in &self.reliability {
            let b = RELIABILITY_BINS as f64;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.estimator,
                r.bin,
                r.bin as f64 / b,
                (r.bin + 1) as f64 / b,
                r.count,
                fmt_opt(r.accuracy)
            );
        }
        out
    }

    pub fn summary_row(&self, estimator: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.estimator == estimator)
    }

    /// Writes `results.csv`, `runs.csv`, `manifest.json` and, when enabled,
    /// `reliability.csv`, per-cell histories and checkpoints into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("results.csv"), self.results_csv())?;
        fs::write(dir.join("runs.csv"), self.runs_csv())?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        let cfg = &self.manifest.config;
        if cfg.reliability {
            fs::write(dir.join("reliability.csv"), self.reliability_csv())?;
        }
        for c in &self.cells {
            let stem = format!("split{}_init{}", c.seeds.split, c.seeds.init);
            if cfg.history {
                c.history.write_csv(&dir.join(format!("history_{stem}.csv")))?;
            }
            if cfg.checkpoints {
                let f = fs::File::create(dir.join(format!("model_{stem}.ckpt")))?;
                checkpoint::save(std::io::BufWriter::new(f), &c.model.params)?;
            }
        }
        Ok(())
    }
}
