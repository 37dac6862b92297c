use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use packlab_bench::{deposit, dense};
use packlab_core::generators::{bennett_central, interior_window, BennettParams, SeedCluster};
use packlab_core::inference::{energy_distance_test, Descriptor, ModelEnsemble};
use packlab_core::resistance::build_axis_network;
use packlab_core::stats::{pair_correlation, EdgeCorrection, PointPattern};
use packlab_core::{
    bond_orientational, build_contact_network, solve_bulk_resistance, BondSet, ContactRule, Electrodes, Panel,
    Triangulation,
};
use rand::{Rng, SeedableRng};

fn generators(c: &mut Criterion) {
    let mut g = c.benchmark_group("generators");
    g.sample_size(10);
    g.bench_function("visscher_bolsterli_2000", |b| b.iter(|| deposit(black_box(2000), 1)));
    g.bench_function("jodrey_tory_500_x100", |b| b.iter(|| dense(black_box(500), 100, 1)));
    g.bench_function("bennett_central_1000", |b| {
        let p = BennettParams { n: 1000, dim: 3, seed_cluster: SeedCluster::Simplex };
        b.iter(|| bennett_central(black_box(&p), 1).unwrap())
    });
    g.finish();
}

fn structure(c: &mut Criterion) {
    let config = deposit(3000, 2);
    let tri = Triangulation::build(&config).unwrap();
    let net = build_contact_network(&config, &tri, ContactRule::HardTolerance { eps: 0.02 }).unwrap();
    let window = interior_window(&config).unwrap();
    let pattern = PointPattern::from_config(&config, &window).unwrap();
    let interior: Vec<usize> = (0..config.len()).filter(|&i| window.contains(&config.spheres[i].center)).collect();

    let mut g = c.benchmark_group("structure");
    g.sample_size(10);
    g.bench_function("delaunay_3000", |b| b.iter(|| Triangulation::build(black_box(&config)).unwrap()));
    g.bench_function("contacts_3000", |b| {
        b.iter(|| build_contact_network(&config, &tri, ContactRule::HardTolerance { eps: 0.02 }).unwrap())
    });
    g.bench_function("pair_correlation_3000", |b| {
        b.iter(|| pair_correlation(&pattern, 0.02, 2.5, EdgeCorrection::MinusSampling).unwrap())
    });
    g.bench_function("q6_3000", |b| {
        b.iter(|| bond_orientational(&BondSet::from_contacts(&config, &net, &tri, &interior), 6).unwrap())
    });
    g.bench_function("bulk_resistance_3000", |b| {
        b.iter(|| {
            let e = Electrodes::axis_quantile(&config, 0, 0.1).unwrap();
            solve_bulk_resistance(&build_axis_network(&config, &net, 0, e).unwrap()).unwrap()
        })
    });
    g.bench_function("descriptor_panel_3000", |b| b.iter(|| Panel::default().evaluate(&config, 3).unwrap()));
    g.finish();
}

fn inference(c: &mut Criterion) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let names: Vec<String> = Panel::default().descriptors.iter().map(Descriptor::name).collect();
    let table = |rng: &mut rand_chacha::ChaCha8Rng, shift: f64| ModelEnsemble {
        model: "m".into(),
        spec: None,
        master_seed: 0,
        names: names.clone(),
        seeds: (0..20).collect(),
        rows: (0..20)
            .map(|_| (0..names.len()).map(|_| rng.random::<f64>() + shift).collect())
            .collect(),
        failures: Vec::new(),
    };
    let a = table(&mut rng, 0.0);
    let b = table(&mut rng, 0.1);
    c.bench_function("energy_test_20x20_999", |bench| {
        bench.iter(|| energy_distance_test(black_box(&a), &b, 999, 5).unwrap())
    });
}

criterion_group!(benches, generators, structure, inference);
criterion_main!(benches);
