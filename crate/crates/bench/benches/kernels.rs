use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use opstep_core::circuits::{build_newton_rd_circuit, build_picard_rd_circuit};
use opstep_core::encoding::BasisCoeffs;
use opstep_core::learner::init_fnn;
use opstep_core::pde::{make_grid, Field};
use opstep_core::schemes::{
    claw_picard_step, parabolic_cn_step, rd_newton_step, rd_picard_step, FluxSpec, ForcingSpec, ReactionSpec,
    SchemeId, SchemeParams,
};

fn bump(d: usize) -> Field {
    let g = make_grid(0.0, 1.0, d).unwrap();
    Field::from_fn(g, |x| 0.8 * (std::f64::consts::PI * x).sin())
}

fn steppers(c: &mut Criterion) {
    let f = ReactionSpec::allen_cahn(2.0).unwrap();
    let flux = FluxSpec::burgers(1.5, 2.0).unwrap();
    let mut group = c.benchmark_group("stepper");
    for d in [16, 64, 256] {
        let u0 = bump(d);
        let forcing = ForcingSpec::new(u0.clone());
        let picard = SchemeParams::new(0.01, 3, SchemeId::RdPicard).unwrap();
        let newton = SchemeParams::new(0.01, 2, SchemeId::RdNewton).unwrap();
        let claw = SchemeParams::new(0.01, 3, SchemeId::ClawPicard).unwrap();
        group.bench_with_input(BenchmarkId::new("picard_m3", d), &u0, |b, u| {
            b.iter(|| rd_picard_step(black_box(u), &f, &picard).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("newton_m2", d), &u0, |b, u| {
            b.iter(|| rd_newton_step(black_box(u), &f, &newton).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("claw_m3", d), &u0, |b, u| {
            b.iter(|| claw_picard_step(black_box(u), &flux, &claw).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("crank_nicolson", d), &u0, |b, u| {
            b.iter(|| parabolic_cn_step(black_box(u), &forcing, 0.01).unwrap())
        });
    }
    group.finish();
}

fn circuits(c: &mut Criterion) {
    let mut group = c.benchmark_group("circuit_eval");
    for d in [8, 16, 32] {
        let g = make_grid(0.0, 1.0, d).unwrap();
        let u0 = bump(d).into_values();
        let picard = build_picard_rd_circuit(&g, &BasisCoeffs::monomial(vec![0.0; 3]), 0.01, 3).unwrap();
        let mut x = u0.clone();
        x.extend([0.1, -0.5, 0.2]);
        group.bench_with_input(BenchmarkId::new("picard_m3", d), &x, |b, x| {
            b.iter(|| picard.eval(black_box(x)).unwrap())
        });
        let newton = build_newton_rd_circuit(&g, &ReactionSpec::allen_cahn(2.0).unwrap(), 0.01, 2).unwrap();
        group.bench_with_input(BenchmarkId::new("newton_m2", d), &u0, |b, x| {
            b.iter(|| newton.eval(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("fnn_forward");
    for (depth, width) in [(2, 32), (4, 64), (8, 128)] {
        let model = init_fnn(32, 32, depth, width, 10.0, 0).unwrap();
        let x: Vec<f64> = (0..32).map(|i| (i as f64 * 0.1).sin()).collect();
        group.bench_with_input(BenchmarkId::new("d32", format!("{depth}x{width}")), &x, |b, x| {
            b.iter(|| model.forward(black_box(x)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, steppers, circuits, forward);
criterion_main!(benches);
