//! Acceptance suite: one pass/fail line per top-level criterion.
//!
//! Runs as a plain binary (`harness = false`). Criteria that need external
//! data report SKIP when it is absent. CoraML-format data is read from the
//! directory named by `HETEROUQ_CORAML_DIR`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heterouq_core::experiment::{
    run_experiment, run_layer_ablation, run_moons_sweep, DatasetSpec, EstimatorEntry, EstimatorSpec, ExperimentConfig,
    Repeats, SweepConfig,
};
use heterouq_core::graph::{homophily_report, load_dataset, make_moons_graph, save_dataset, MoonsConfig};
use heterouq_core::info::verify_theory;
use heterouq_core::metrics::auc_roc;
use heterouq_core::mpnn::{gradient_suite, ArchConfig};
use heterouq_core::shifts::{LocClasses, ShiftKind, ShiftSpec};
use heterouq_core::tensor::Matrix;
use heterouq_core::uncertainty::{fit_jlde, score_jlde, JldeConfig, LayerSelection};
use heterouq_core::{EmbeddingStack, FeatureKind, Graph, SplitMasks};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn theory() -> Outcome {
    let start = Instant::now();
    let report = match verify_theory(200, 0) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let elapsed = start.elapsed();
    let failed: Vec<String> = report
        .lines()
        .iter()
        .filter(|l| !l.passed)
        .map(|l| format!("{} worst {:.2e} tol {:.0e}", l.name, l.worst, l.tolerance))
        .collect();
    let worst = report
        .lines()
        .iter()
        .map(|l| format!("{} {:.1e}", l.name, l.worst))
        .collect::<Vec<_>>()
        .join("; ");
    judge(
        failed.is_empty() && secs(elapsed) < 60.0,
        format!(
            "{} models, {} transitions in {:.1}s (< 60s); {}{}",
            report.models,
            report.transitions,
            secs(elapsed),
            worst,
            if failed.is_empty() { String::new() } else { format!("; FAILED: {}", failed.join(", ")) }
        ),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let lines = gradient_suite(20, 0);
    let elapsed = start.elapsed();
    let ok = lines.iter().all(|l| l.passed) && secs(elapsed) < 30.0;
    let detail = lines
        .iter()
        .map(|l| format!("{} {:.1e}/{:.0e}", l.name, l.max_rel_err, l.tolerance))
        .collect::<Vec<_>>()
        .join("; ");
    judge(ok, format!("20 instances each in {:.1}s (< 30s); {detail}", secs(elapsed)))
}

fn brute_force_auc(scores: &[f64], flags: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(flags).filter(|(_, &f)| f).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(flags).filter(|(_, &f)| !f).map(|(&s, _)| s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut mismatches = 0;
    for set in 0..100 {
        let n = rng.random_range(2..=200);
        // Half the sets draw from a coarse grid so ties are common.
        let coarse = set % 2 == 0;
        let mut scores: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.random_range(0..8) as f64 / 4.0 } else { rng.random::<f64>() })
            .collect();
        let mut flags: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        flags[0] = true;
        flags[1] = false;
        scores.swap(0, n - 1);
        let fast = auc_roc(&scores, &flags).expect("both classes present");
        if fast != brute_force_auc(&scores, &flags) {
            mismatches += 1;
        }
    }
    let example = auc_roc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).expect("valid example");
    judge(
        mismatches == 0 && example == 0.75,
        format!("{mismatches}/100 random sets differ from pairwise counting; worked example gives {example}"),
    )
}

/// Recounts homophily statistics directly from `labels.csv` and `edges.csv`.
fn recount(dir: &Path) -> (f64, f64, f64) {
    let labels: Vec<usize> = std::fs::read_to_string(dir.join("labels.csv"))
        .expect("labels.csv")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse().expect("integer label"))
        .collect();
    let n = labels.len();
    let mut edges = BTreeSet::new();
    for line in std::fs::read_to_string(dir.join("edges.csv")).expect("edges.csv").lines().skip(1) {
        let mut it = line.split(',').map(|t| t.trim().parse::<usize>().expect("node index"));
        let (u, v) = (it.next().expect("src"), it.next().expect("dst"));
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    let mut nbrs = vec![Vec::new(); n];
    for &(u, v) in &edges {
        nbrs[u].push(v);
        nbrs[v].push(u);
    }
    let h_edge = edges.iter().filter(|(u, v)| labels[*u] == labels[*v]).count() as f64 / edges.len() as f64;
    let per_node: Vec<f64> = (0..n)
        .filter(|&v| !nbrs[v].is_empty())
        .map(|v| nbrs[v].iter().filter(|&&u| labels[u] == labels[v]).count() as f64 / nbrs[v].len() as f64)
        .collect();
    let h_node = per_node.iter().sum::<f64>() / per_node.len() as f64;
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut h_class = 0.0;
    for k in 0..c {
        let members: Vec<usize> = (0..n).filter(|&v| labels[v] == k).collect();
        let deg: usize = members.iter().map(|&v| nbrs[v].len()).sum();
        if deg == 0 {
            continue;
        }
        let same: usize = members.iter().map(|&v| nbrs[v].iter().filter(|&&u| labels[u] == k).count()).sum();
        h_class += (same as f64 / deg as f64 - members.len() as f64 / n as f64).max(0.0);
    }
    (h_edge, h_node, h_class / (c as f64 - 1.0))
}

fn random_dataset(seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(20..200);
    let c = rng.random_range(2..6);
    let p = rng.random_range(0.02..0.2);
    let labels: Vec<usize> = (0..n).map(|v| if v < c { v } else { rng.random_range(0..c) }).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let bias = if labels[u] == labels[v] { 2.0 } else { 1.0 };
            if rng.random::<f64>() < p * bias {
                edges.push((u, v));
            }
        }
    }
    let x = Matrix::from_fn(n, 3, |_, _| rng.random::<f64>());
    Graph::new(c, edges, x, labels, FeatureKind::Continuous).expect("valid random graph")
}

fn coraml_dir() -> Option<PathBuf> {
    std::env::var_os("HETEROUQ_CORAML_DIR").map(PathBuf::from).filter(|p| p.join("meta.json").exists())
}

fn homophily_oracle() -> Outcome {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut graphs: Vec<Graph> = (0..20).map(random_dataset).collect();
    graphs.push(make_moons_graph(&MoonsConfig::default(), 0).expect("moons").0);
    for (i, g) in graphs.iter().enumerate() {
        let dir = tmp.path().join(format!("g{i}"));
        save_dataset(&dir, g, None).expect("save dataset");
        let (loaded, _) = load_dataset(&dir).expect("load dataset");
        let r = homophily_report(&loaded, false).expect("report");
        let (e, v, c) = recount(&dir);
        worst = worst.max((r.h_edge - e).abs()).max((r.h_node - v).abs()).max((r.h_class - c).abs());
        checked += 1;
    }
    let mut ok = worst < 1e-12;
    let mut detail = format!("{checked} datasets, max deviation from recount {worst:.1e}");
    match coraml_dir() {
        Some(dir) => {
            let (g, _) = match load_dataset(&dir) {
                Ok(x) => x,
                Err(e) => return Outcome::Fail(format!("{detail}; CoraML: {e}")),
            };
            let r = homophily_report(&g, false).expect("report");
            let (e, v, _) = recount(&dir);
            let dev = (r.h_edge - e).abs().max((r.h_node - v).abs());
            let reference = (r.h_edge - 0.79).abs() <= 0.01 && (r.h_node - 0.81).abs() <= 0.01;
            ok &= dev < 1e-12 && reference;
            detail += &format!("; CoraML h_edge {:.4} (0.79 ± 0.01), h_node {:.4} (0.81 ± 0.01)", r.h_edge, r.h_node);
        }
        None => detail += "; CoraML data absent, reference values not checked",
    }
    judge(ok, detail)
}

/// Settings shared by the moons sweep and the layer ablation, chosen on an
/// exploration seed disjoint from the acceptance seed.
fn moons_experiment(h: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        dataset: DatasetSpec::Moons(MoonsConfig {
            n_per_class: 300,
            homophily: h,
            avg_degree: 20.0,
            per_class_train: 100,
            per_class_val: 100,
            ..MoonsConfig::default()
        }),
        arch: ArchConfig {
            layers: 1,
            dropout: 0.5,
            ..ArchConfig::default()
        },
        shift: ShiftSpec {
            kind: ShiftKind::Loc,
            loc_classes: LocClasses::Explicit(vec![2]),
            ..ShiftSpec::default()
        },
        repeats: Repeats { splits: 5, inits: 1 },
        seed: 0,
        ..ExperimentConfig::default()
    };
    cfg.estimators = vec![
        EstimatorEntry::new(EstimatorSpec::Jlde(moons_jlde())),
        EstimatorEntry::new(EstimatorSpec::Energy),
    ];
    cfg
}

fn moons_jlde() -> JldeConfig {
    JldeConfig {
        include_input_layer: true,
        ..JldeConfig::default()
    }
}

fn moons_sweep() -> Outcome {
    let cfg = SweepConfig {
        experiment: moons_experiment(0.5),
        h_values: vec![0.1, 0.3, 0.5, 0.7, 0.9],
    };
    let start = Instant::now();
    let rows = match run_moons_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let elapsed = start.elapsed();
    let auc = |h: f64, est: &str| {
        rows.iter()
            .find(|r| r.homophily == h && r.estimator == est)
            .map(|r| r.auc_roc.0)
            .expect("sweep row")
    };
    let jlde: Vec<(f64, f64)> = cfg.h_values.iter().map(|&h| (h, auc(h, "jlde"))).collect();
    let margin = auc(0.1, "jlde") - auc(0.1, "energy");
    let floor_ok = jlde.iter().all(|&(_, a)| a >= 0.90);
    let curve = jlde.iter().map(|(h, a)| format!("h={h}: {a:.3}")).collect::<Vec<_>>().join(", ");
    judge(
        floor_ok && margin >= 0.05 && secs(elapsed) < 600.0,
        format!(
            "JLDE AUC {curve} (each ≥ 0.90); energy at h=0.1 {:.3}, margin {margin:.3} (≥ 0.05); {:.0}s (< 600s)",
            auc(0.1, "energy"),
            secs(elapsed)
        ),
    )
}

fn layer_ablation() -> Outcome {
    let mut cfg = moons_experiment(0.2);
    cfg.arch.layers = 3;
    let rows = match run_layer_ablation(&cfg) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let all_cat = rows.iter().find(|r| r.selection == LayerSelection::AllCat).expect("all_cat row").auc_roc.0;
    let (best_sel, best_single) = rows
        .iter()
        .filter(|r| matches!(r.selection, LayerSelection::Single(_)))
        .map(|r| (r.selection, r.auc_roc.0))
        .fold((LayerSelection::AllCat, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    judge(
        all_cat >= best_single - 0.02,
        format!("all_cat AUC {all_cat:.3}, best single layer {best_sel:?} {best_single:.3} (need ≥ best − 0.02)"),
    )
}

fn synthetic_stack(n: usize, d: usize, rng: &mut ChaCha8Rng) -> EmbeddingStack {
    let mut m = || Matrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let hidden = vec![m(), m(), m()];
    let logits = Matrix::zeros(n, 2);
    let probs = Matrix::filled(n, 2, 0.5);
    EmbeddingStack { hidden, logits, probs }
}

fn complexity() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    let (queries, d) = (1000, 64);
    let sizes = [1000usize, 2000, 4000];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut times = Vec::new();
    for &n_train in &sizes {
        let stack = synthetic_stack(n_train + queries, d, &mut rng);
        let masks = SplitMasks {
            train: (0..n_train).collect(),
            val: Vec::new(),
            test: (n_train..n_train + queries).collect(),
        };
        let est = fit_jlde(&stack, &masks, &JldeConfig::default()).expect("fit");
        let mut samples: Vec<f64> = (0..7)
            .map(|_| {
                let start = Instant::now();
                pool.install(|| score_jlde(&est, &stack, &masks.test)).expect("score");
                secs(start.elapsed())
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        times.push(samples[samples.len() / 2]);
    }
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, times.iter().sum::<f64>() / 3.0);
    let sxy: f64 = xs.iter().zip(&times).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs.iter().zip(&times).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let ss_tot: f64 = times.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let pts = sizes
        .iter()
        .zip(&times)
        .map(|(n, t)| format!("{n}: {:.1}ms", t * 1e3))
        .collect::<Vec<_>>()
        .join(", ");
    judge(r2 > 0.98, format!("scoring {queries} queries, median of 7: {pts}; linear fit R² {r2:.4} (> 0.98)"))
}

fn replication() -> Outcome {
    let statement = "large-benchmark results (Roman Empire, Amazon Ratings, multi-backbone ranks) are not reproduced at desk scale";
    let Some(dir) = coraml_dir() else {
        return Outcome::Skip(format!("{statement}; CoraML data absent (set HETEROUQ_CORAML_DIR)"));
    };
    let cfg = ExperimentConfig {
        dataset: DatasetSpec::Path(dir),
        shift: ShiftSpec {
            kind: ShiftKind::FarFeatures,
            ..ShiftSpec::default()
        },
        repeats: Repeats { splits: 3, inits: 3 },
        estimators: vec![EstimatorEntry::new(EstimatorSpec::Jlde(JldeConfig::default()))],
        ..ExperimentConfig::default()
    };
    let res = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("{statement}; CoraML run failed: {e}")),
    };
    let row = res.summary_row("jlde").expect("jlde row");
    let acc = row.mean("id_accuracy").unwrap_or(f64::NAN);
    let auc = row.mean("ood_auc_roc_epistemic").unwrap_or(f64::NAN);
    judge(
        acc >= 0.75 && auc >= 0.90,
        format!("{statement}; CoraML 3x3: Res-GCN ID accuracy {acc:.3} (≥ 0.75), JLDE far-feature AUC {auc:.3} (≥ 0.90)"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("theory suite", theory),
        ("gradient suite", gradients),
        ("metric oracle", metric_oracle),
        ("homophily oracle", homophily_oracle),
        ("moons homophily sweep", moons_sweep),
        ("layer ablation", layer_ablation),
        ("scoring complexity", complexity),
        ("replication statement", replication),
    ];
    // Optional substring filters, e.g. `cargo test --test acceptance -- theory`.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let t = secs(start.elapsed());
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {name} ({t:.1}s): {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance criteria passed or were skipped");
        ExitCode::SUCCESS
    }
}
