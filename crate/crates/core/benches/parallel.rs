use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magweyl_core::exec::{self, Mode};
use magweyl_core::geometry::VectorPotential;
use magweyl_core::moyal::PhaseLattice;
use magweyl_core::schatten::kato_average;
use magweyl_core::weyl::op_matrix;
use magweyl_core::{make_grid, ProductSymbol};
use std::hint::black_box;

const MODES: [(Mode, &str); 2] = [(Mode::Sequential, "sequential"), (Mode::Parallel, "parallel")];

fn quantization(c: &mut Criterion) {
    let mut group = c.benchmark_group("op_matrix");
    let a = VectorPotential::symmetric(1.0);
    let f = ProductSymbol::gaussian(2, 0.5, 0.5);
    for n in [12, 20] {
        let g = make_grid(2, n, 5.0).unwrap();
        for (mode, name) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &g, |b, g| {
                exec::set_mode(mode);
                b.iter(|| op_matrix(black_box(&f), &a, g).unwrap());
            });
        }
    }
    exec::set_mode(Mode::Parallel);
    group.finish();
}

fn kato(c: &mut Criterion) {
    let mut group = c.benchmark_group("kato_average");
    group.sample_size(10);
    let g = make_grid(2, 12, 4.0).unwrap();
    let a = VectorPotential::symmetric(1.0);
    let t = op_matrix(&ProductSymbol::gaussian(2, 1.0, 1.0), &a, &g).unwrap();
    let lat = PhaseLattice::box_lattice(&g, 3, g.k(), 3).unwrap();
    let phi = ProductSymbol::gaussian(2, 0.5, 0.5);
    for (mode, name) in MODES {
        group.bench_function(name, |b| {
            exec::set_mode(mode);
            b.iter(|| kato_average(&phi, black_box(&t), &a, &lat, u64::MAX).unwrap());
        });
    }
    exec::set_mode(Mode::Parallel);
    group.finish();
}

criterion_group!(benches, quantization, kato);
criterion_main!(benches);
