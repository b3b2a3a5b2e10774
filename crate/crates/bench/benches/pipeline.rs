use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use marketlag_core::correlation::{lag_augment, pearson_matrix, spearman_matrix};
use marketlag_core::network::{asset_graph, betweenness, distance_matrix, mds_embed};
use marketlag_core::spectral::{eigendecompose, shuffle_null};
use marketlag_core::synthetic::{generate_returns, SyntheticSpec};
use marketlag_core::Method;

fn panel(n: usize, days: usize) -> marketlag_core::ReturnPanel {
    generate_returns(&SyntheticSpec { n_west: n / 2, n_east: n - n / 2, days, ..Default::default() }).unwrap()
}

fn correlation(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlation");
    for n in [20, 79] {
        let p = panel(n, 1250);
        g.bench_with_input(BenchmarkId::new("pearson", n), &p, |b, p| b.iter(|| pearson_matrix(black_box(p)).unwrap()));
        g.bench_with_input(BenchmarkId::new("spearman", n), &p, |b, p| b.iter(|| spearman_matrix(black_box(p)).unwrap()));
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let p = lag_augment(&panel(79, 2500), 1).unwrap();
    let corr = pearson_matrix(&p).unwrap();
    c.bench_function("eigendecompose_158", |b| b.iter(|| eigendecompose(black_box(&corr)).unwrap()));
    let small = panel(40, 1250);
    c.bench_function("shuffle_null_40x1250_x10", |b| {
        b.iter(|| shuffle_null(black_box(&small), 10, 7, Method::Pearson).unwrap())
    });
}

fn network(c: &mut Criterion) {
    let p = lag_augment(&panel(79, 1250), 1).unwrap();
    let dist = distance_matrix(&pearson_matrix(&p).unwrap()).unwrap();
    let graph = asset_graph(&dist, 1.2).unwrap();
    let adj = graph.adjacency().unwrap();
    c.bench_function("betweenness_158", |b| b.iter(|| betweenness(black_box(&adj))));
    let small = distance_matrix(&pearson_matrix(&panel(40, 1250)).unwrap()).unwrap();
    c.bench_function("mds_40", |b| b.iter(|| mds_embed(black_box(&small), 2, 1).unwrap()));
}

criterion_group!(benches, correlation, spectrum, network);
criterion_main!(benches);
