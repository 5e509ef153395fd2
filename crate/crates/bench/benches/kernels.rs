use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mmtrace::functionals::{bsn, sharp_maximal, TraceContext};
use mmtrace::measures::{hausdorff_content, ContentOptions};
use mmtrace::mms_core::build_nets;
use mmtrace::SetOfPoints;
use mmtrace_bench::grid;

fn nets(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_nets");
    for side in [16, 32] {
        let fx = grid(side, 4);
        g.bench_with_input(BenchmarkId::from_parameter(side * side), &fx, |b, fx| {
            b.iter(|| build_nets(&fx.space, 0.1, 0, 3, None).unwrap())
        });
    }
    g.finish();
}

fn sharp(c: &mut Criterion) {
    let fx = grid(16, 8);
    let ctx = TraceContext::new(&fx.space, &fx.mu, &fx.s, &fx.seq).unwrap();
    c.bench_function("sharp_maximal/256", |b| b.iter(|| sharp_maximal(&ctx, &fx.f).unwrap()));
}

fn content(c: &mut Criterion) {
    let fx = grid(16, 2);
    let target = SetOfPoints::new(fx.s.members()[..12].to_vec(), fx.space.len()).unwrap();
    c.bench_function("hausdorff_content/12", |b| {
        b.iter(|| hausdorff_content(&fx.space, &fx.mu, &target, 1.0, 0.2, ContentOptions::default()).unwrap())
    });
}

fn family_search(c: &mut Criterion) {
    let fx = grid(12, 8);
    let ctx = TraceContext::new(&fx.space, &fx.mu, &fx.s, &fx.seq).unwrap();
    let mut g = c.benchmark_group("bsn");
    g.sample_size(10);
    g.bench_function("144", |b| b.iter(|| bsn(&ctx, &fx.f, 2.0, 30.0, 1.0, 22).unwrap()));
    g.finish();
}

criterion_group!(benches, nets, sharp, content, family_search);
criterion_main!(benches);
