use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use optoweak_core::analysis::ScanGrid;
use optoweak_core::{
    amplification_scan, branch_unitary, make_pointer, ConditioningKernel, CouplingParams, Dim, PathState, PointerSpec,
    PostSelection, ScanOptions,
};

fn branch(c: &mut Criterion) {
    let p = CouplingParams::new(0.1, true, 2.0).unwrap();
    for d in [32, 128] {
        let dim = Dim::new(d).unwrap();
        c.bench_function(&format!("branch_unitary d={d}"), |b| b.iter(|| branch_unitary(1, black_box(&p), dim)));
    }
}

fn kernel(c: &mut Criterion) {
    let p = CouplingParams::new(0.05, true, 7.0).unwrap();
    let thermal = make_pointer(&PointerSpec::Thermal { z: 0.5 }, Dim::new(60).unwrap()).unwrap();
    c.bench_function("kernel build thermal d=60", |b| b.iter(|| ConditioningKernel::new(black_box(&thermal), &p)));
    let k = ConditioningKernel::new(&thermal, &p).unwrap();
    let sel = PostSelection::new(0.8, PI - 0.1).unwrap();
    c.bench_function("kernel evaluate", |b| b.iter(|| k.evaluate(&PathState::balanced(), black_box(&sel))));
}

fn scan(c: &mut Criterion) {
    let grid = ScanGrid::with_points(0.05, 60.0, 60, 11, 21);
    let opts = ScanOptions { threads: Some(1), ..Default::default() };
    let mut g = c.benchmark_group("scan");
    g.sample_size(10);
    g.bench_function("ground 60x11x21", |b| {
        b.iter(|| amplification_scan(&PointerSpec::Ground, 0.05, true, black_box(&grid), &opts))
    });
    g.finish();
}

criterion_group!(benches, branch, kernel, scan);
criterion_main!(benches);
