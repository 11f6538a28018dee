use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use heterouq_core::experiment::{
    ablation_csv, run_experiment, run_layer_ablation, run_moons_sweep, selection_name, sweep_csv, tune, tune_csv,
    ExperimentConfig, SweepConfig, TuneGrid, METRICS,
};
use heterouq_core::graph::{homophily_report, load_dataset};
use heterouq_core::info::verify_theory;

#[derive(Parser)]
#[command(name = "heterouq", version, about = "Post-hoc uncertainty for message-passing networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train backbones, fit estimators and write results.csv and manifest.json.
    Run {
        /// Experiment config or a manifest.json from an earlier run.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel cells; overrides the config's `workers`.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print label homophily statistics of a dataset directory.
    Homophily {
        dir: PathBuf,
        /// Also compute the chance-adjusted homophily.
        #[arg(long)]
        adjusted: bool,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Check the information-theoretic identities and bounds on random finite models.
    VerifyTheory {
        #[arg(long, default_value_t = 200)]
        models: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare JLDE layer selections under shared backbones.
    AblateLayers {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Epistemic AUC-ROC over a grid of moons homophily levels.
    SweepMoons {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid search over backbone hyperparameters by validation accuracy.
    Tune {
        #[arg(long)]
        config: PathBuf,
        /// JSON grid with `hidden_dim`, `dropout`, `lr`, `weight_decay` lists.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig, fallback: &str) -> PathBuf {
    flag.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from(fallback))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn fmt_ms(v: Option<(f64, f64)>) -> String {
    v.map_or_else(|| "-".into(), |(m, s)| format!("{m:.4} ± {s:.4}"))
}

fn run(config: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config)?;
    if workers.is_some() {
        cfg.workers = workers;
    }
    let dir = out_dir(out, &cfg, "results");
    let start = Instant::now();
    let res = run_experiment(&cfg)?;
    res.write(&dir)?;
    let shown = [0usize, 2, 4, 7];
    print!("{:<16} {:>5}", "estimator", "runs");
    for &m in &shown {
        print!("  {:>24}", METRICS[m]);
    }
    println!();
    for r in &res.summary {
        print!("{:<16} {:>5}", r.estimator, r.runs);
        for &m in &shown {
            print!("  {:>24}", fmt_ms(r.values[m]));
        }
        println!();
    }
    eprintln!("{} cells in {:.1?}; wrote {}", res.cells.len(), start.elapsed(), dir.display());
    Ok(true)
}

fn homophily(dir: &Path, adjusted: bool, json: bool) -> Result<bool> {
    let (g, _) = load_dataset(dir).with_context(|| format!("loading {}", dir.display()))?;
    let r = homophily_report(&g, adjusted)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
        return Ok(true);
    }
    println!("nodes      {}", g.num_nodes());
    println!("edges      {}", g.num_edges());
    println!("classes    {}", g.num_classes());
    println!("h_edge     {:.4}", r.h_edge);
    println!("h_node     {:.4}", r.h_node);
    println!("h_class    {:.4}", r.h_class);
    if let Some(a) = r.h_adjusted {
        println!("h_adjusted {a:.4}");
    }
    println!("compatibility:");
    for row in &r.compatibility {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.3}")).collect();
        println!("  {}", cells.join(" "));
    }
    Ok(true)
}

fn theory(models: usize, seed: u64) -> Result<bool> {
    let start = Instant::now();
    let report = verify_theory(models, seed)?;
    println!("{:<44} {:>12} {:>10}  status", "check", "worst", "tolerance");
    for l in report.lines() {
        println!(
            "{:<44} {:>12.3e} {:>10.0e}  {}",
            l.name,
            l.worst,
            l.tolerance,
            if l.passed { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{} models, {} layer transitions, {} bound checks in {:.2?}",
        report.models,
        report.transitions,
        report.bound_checks,
        start.elapsed()
    );
    Ok(report.passed())
}

fn ablate(config: &Path, out: Option<PathBuf>) -> Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out_dir(out, &cfg, "results");
    let rows = run_layer_ablation(&cfg)?;
    println!("{:<12} {:>5}  {:>18}  {:>18}", "selection", "runs", "auc_roc", "auc_pr");
    for r in &rows {
        println!(
            "{:<12} {:>5}  {:>18}  {:>18}",
            selection_name(r.selection),
            r.runs,
            fmt_ms(Some(r.auc_roc)),
            fmt_ms(Some(r.auc_pr))
        );
    }
    write(&dir, "ablation.csv", &ablation_csv(&rows))?;
    Ok(true)
}

fn sweep(config: &Path, out: Option<PathBuf>) -> Result<bool> {
    let cfg = SweepConfig::load(config)?;
    let dir = out_dir(out, &cfg.experiment, "results");
    let rows = run_moons_sweep(&cfg)?;
    println!("{:>9}  {:<16} {:>5}  {:>18}", "homophily", "estimator", "runs", "auc_roc");
    for r in &rows {
        println!("{:>9.2}  {:<16} {:>5}  {:>18}", r.homophily, r.estimator, r.runs, fmt_ms(Some(r.auc_roc)));
    }
    write(&dir, "sweep.csv", &sweep_csv(&rows))?;
    Ok(true)
}

fn tune_cmd(config: &Path, grid: Option<PathBuf>, out: Option<PathBuf>) -> Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let grid: TuneGrid = match grid {
        Some(p) => {
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => TuneGrid::default(),
    };
    let dir = out_dir(out, &cfg, "results");
    let res = tune(&cfg, &grid)?;
    println!("{:>6} {:>7} {:>7} {:>7}  {:>18}", "hidden", "dropout", "lr", "wd", "val_acc");
    for (i, r) in res.rows.iter().enumerate() {
        println!(
            "{:>6} {:>7} {:>7} {:>7}  {:>18}{}",
            r.hidden_dim,
            r.dropout,
            r.lr,
            r.weight_decay,
            fmt_ms(Some(r.val_acc)),
            if i == res.best { "  *" } else { "" }
        );
    }
    write(&dir, "tune.csv", &tune_csv(&res.rows))?;
    write(&dir, "best_config.json", &(serde_json::to_string_pretty(&res.best_config)? + "\n"))?;
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, workers } => run(&config, out, workers),
        Command::Homophily { dir, adjusted, json } => homophily(&dir, adjusted, json),
        Command::VerifyTheory { models, seed } => theory(models, seed),
        Command::AblateLayers { config, out } => ablate(&config, out),
        Command::SweepMoons { config, out } => sweep(&config, out),
        Command::Tune { config, grid, out } => tune_cmd(&config, grid, out),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
