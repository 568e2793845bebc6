use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use parabolic_core::blowup::blow_up;
use parabolic_core::fixtures::{generic_hard_three, hard_witness};
use parabolic_core::index::residual_index;
use parabolic_core::petal::{count_components, prepare, PetalDomain, PetalSolver, SolverConfig};
use parabolic_core::series::{Poly2, Scalar, QC};
use parabolic_core::{normalize, shift_ladder, Germ2, OdeForm, Proj};

fn dense(deg: u32, trunc: u32, seed: i64) -> Poly2<QC> {
    let mut p = Poly2::zero(trunc);
    for d in 2..=deg {
        for i in 0..=d {
            let c = (seed + 3 * i as i64 + 5 * d as i64) % 7 - 3;
            p.add_term(i, d - i, QC::from_i64(c));
        }
    }
    p
}

fn series(c: &mut Criterion) {
    let a = dense(10, 12, 1);
    let b = dense(10, 12, 2);
    c.bench_function("poly2_mul_trunc12", |bn| bn.iter(|| black_box(&a).mul(black_box(&b))));

    let f = Germ2::from_parts(dense(8, 8, 3), dense(8, 8, 4)).unwrap();
    let center = Proj::Affine(QC::from_i64(1));
    c.bench_function("blow_up_trunc8", |bn| {
        bn.iter(|| blow_up(black_box(&f), &center).unwrap())
    });
}

fn invariants(c: &mut Criterion) {
    let af = generic_hard_three();
    c.bench_function("residual_index", |bn| {
        bn.iter(|| residual_index(black_box(&af)).unwrap())
    });
    c.bench_function("normalize_n3", |bn| bn.iter(|| normalize(black_box(&af)).unwrap()));
    let ng = normalize(&af).unwrap();
    c.bench_function("shift_ladder_n3_depth12", |bn| {
        bn.iter(|| shift_ladder(black_box(&ng), OdeForm::Linearized, 12).unwrap())
    });
}

fn petal(c: &mut Criterion) {
    let d = PetalDomain::new(1, 2, 0.2, 0.0);
    c.bench_function("count_components_256", |bn| {
        bn.iter(|| count_components(black_box(&d), 256).unwrap())
    });

    let cfg = SolverConfig {
        grid: 16,
        ..SolverConfig::default()
    };
    let (ng, ladder) = prepare(&hard_witness(-2).to_float(), &cfg).unwrap();
    let domain = PetalDomain::for_component(ng.r, ng.n, cfg.delta0, 0);
    let solver = PetalSolver::new(&ng, &ladder, domain, cfg);
    let w0 = solver.zero_curve().unwrap();
    let mut g = c.benchmark_group("petal");
    g.sample_size(10);
    g.bench_function("sweep_grid16", |bn| bn.iter(|| solver.apply_t(black_box(&w0))));
    g.finish();
}

criterion_group!(benches, series, invariants, petal);
criterion_main!(benches);
