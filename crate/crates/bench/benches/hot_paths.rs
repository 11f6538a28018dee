use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use heterouq_core::graph::{make_moons_graph, MoonsConfig};
use heterouq_core::info::{mi, push_forward, random_model, Var, VariableGroup};
use heterouq_core::uncertainty::{fit_jlde, score_jlde, JldeConfig};
use heterouq_core::{ArchConfig, MpnnModel};

fn moons(n_per_class: usize) -> (heterouq_core::Graph, heterouq_core::SplitMasks) {
    let cfg = MoonsConfig {
        n_per_class,
        per_class_train: n_per_class / 4,
        per_class_val: n_per_class / 8,
        ..MoonsConfig::default()
    };
    make_moons_graph(&cfg, 0).unwrap()
}

fn jlde_scoring(c: &mut Criterion) {
    let mut group = c.benchmark_group("jlde_score");
    group.sample_size(10);
    for n in [1000, 2000, 4000] {
        let (g, masks) = moons(n);
        let model = MpnnModel::new(&ArchConfig::default(), g.num_features(), g.num_classes(), 1).unwrap();
        let stack = model.forward(&g, false, 0).unwrap();
        let est = fit_jlde(&stack, &masks, &JldeConfig::default()).unwrap();
        let query: Vec<usize> = (0..g.num_nodes()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(masks.train.len()), &query, |b, q| {
            b.iter(|| score_jlde(&est, &stack, black_box(q)).unwrap())
        });
    }
    group.finish();
}

fn forward_pass(c: &mut Criterion) {
    let (g, _) = moons(2000);
    let model = MpnnModel::new(&ArchConfig::default(), g.num_features(), g.num_classes(), 1).unwrap();
    c.bench_function("res_gcn_forward_5000_nodes", |b| b.iter(|| model.forward(black_box(&g), false, 0).unwrap()));
}

fn mi_enumeration(c: &mut Criterion) {
    let model = random_model(3, 2, 3, 3, 7).unwrap();
    let a = VariableGroup::label();
    let b = VariableGroup::of(&[Var::Hidden { layer: 3, shell: 0 }]);
    c.bench_function("push_forward_and_mi", |bench| {
        bench.iter(|| {
            let joint = push_forward(black_box(&model));
            mi(&joint, &a, &b).unwrap()
        })
    });
}

criterion_group!(benches, jlde_scoring, forward_pass, mi_enumeration);
criterion_main!(benches);
