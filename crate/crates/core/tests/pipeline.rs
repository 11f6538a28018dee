//! End-to-end use of the public API: generate, shift, train, score, evaluate.

use heterouq_core::experiment::{run_experiment, DatasetSpec, EstimatorEntry, EstimatorSpec, ExperimentConfig, Repeats};
use heterouq_core::graph::{make_moons_graph, save_dataset, MoonsConfig};
use heterouq_core::metrics::auc_roc;
use heterouq_core::mpnn::{accuracy, train};
use heterouq_core::shifts::{apply_loc, LocClasses, ShiftKind, ShiftSpec};
use heterouq_core::uncertainty::{fit_jlde, score_energy, score_jlde};
use heterouq_core::{ArchConfig, JldeConfig, MpnnModel, TrainConfig};

fn loc_spec() -> ShiftSpec {
    ShiftSpec {
        kind: ShiftKind::Loc,
        loc_classes: LocClasses::Explicit(vec![2]),
        ..ShiftSpec::default()
    }
}

#[test]
fn homophilic_moons_anomalies_are_detected() {
    let moons = MoonsConfig {
        n_per_class: 300,
        homophily: 0.9,
        per_class_train: 100,
        per_class_val: 100,
        ..MoonsConfig::default()
    };
    let (g, masks) = make_moons_graph(&moons, 11).unwrap();
    let shift = apply_loc(&g, &masks, &loc_spec()).unwrap();
    assert_eq!(shift.ood_set.len(), 150);

    let mut model = MpnnModel::new(&ArchConfig::default(), 2, shift.num_classes, 3).unwrap();
    let history = train(&mut model, &g, &shift.masks, &shift.labels, &TrainConfig { seed: 5, ..TrainConfig::default() }).unwrap();
    assert!(history.best_val_acc > 0.9);

    let stack = model.forward(&g, false, 0).unwrap();
    assert!(accuracy(&stack.probs, &shift.labels, &shift.id_eval_set) > 0.9);

    let query: Vec<usize> = shift.id_eval_set.iter().chain(&shift.ood_set).copied().collect();
    let flags: Vec<bool> = (0..query.len()).map(|i| i >= shift.id_eval_set.len()).collect();

    let est = fit_jlde(&stack, &shift.masks, &JldeConfig::default()).unwrap();
    let jlde = score_jlde(&est, &stack, &query).unwrap();
    let energy_all = score_energy(&stack.logits);
    let energy: Vec<f64> = query.iter().map(|&v| energy_all[v]).collect();

    let jlde_auc = auc_roc(&jlde, &flags).unwrap();
    let energy_auc = auc_roc(&energy, &flags).unwrap();
    assert!(jlde_auc > 0.8, "jlde {jlde_auc}");
    assert!(energy_auc > 0.8, "energy {energy_auc}");
}

#[test]
fn saved_dataset_runs_through_the_experiment_runner() {
    let tmp = tempfile::tempdir().unwrap();
    let (g, masks) = make_moons_graph(&MoonsConfig { n_per_class: 80, homophily: 0.8, ..MoonsConfig::default() }, 2).unwrap();
    save_dataset(tmp.path(), &g, Some(&masks)).unwrap();

    let mut cfg = ExperimentConfig {
        dataset: DatasetSpec::Path(tmp.path().to_path_buf()),
        shift: loc_spec(),
        repeats: Repeats { splits: 2, inits: 1 },
        estimators: vec![
            EstimatorEntry::new(EstimatorSpec::Jlde(JldeConfig::default())),
            EstimatorEntry::new(EstimatorSpec::Energy),
        ],
        seed: 9,
        ..ExperimentConfig::default()
    };
    cfg.train.max_epochs = 100;
    cfg.splits.per_class_train = 15;
    cfg.splits.per_class_val = 15;
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.runs.len(), 4);
    let jlde = res.summary_row("jlde").unwrap();
    assert_eq!(jlde.runs, 2);
    let auc = jlde.mean("ood_auc_roc_epistemic").unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert!(jlde.mean("id_accuracy").unwrap() > 0.7);

    cfg.splits.from_file = true;
    let stored = run_experiment(&cfg).unwrap();
    assert_eq!(stored.runs.len(), 4);
    assert_ne!(stored.results_csv(), res.results_csv());
}
