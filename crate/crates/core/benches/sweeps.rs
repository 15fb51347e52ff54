//! Sequential vs parallel execution of the data-parallel kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use subeq::catalog::{cone_p_dual, cone_pfold};
use subeq::duality::{check_involution, CheckOptions};
use subeq::par::Exec;
use subeq::solver::{apply_operator, solve_dirichlet, sup_convolution, Grid, GridFunction, SchemeOp, SolveOptions};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn rough(grid: &Grid) -> GridFunction {
    GridFunction::from_fn(grid, |x| (x[0] - 0.3).abs() + (5.0 * x[1]).sin() - x[0] * x[1])
}

fn scheme_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("scheme_sweep");
    for nodes in [33, 65, 129] {
        let grid = Grid::cube(2, -1.0, 1.0, nodes).unwrap();
        let u = rough(&grid);
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, nodes), &u, |b, u| {
                b.iter(|| apply_operator(&SchemeOp::Pucci { lam: 1.0, big: 2.0 }, black_box(u), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn dirichlet_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("dirichlet_solve");
    group.sample_size(10);
    let grid = Grid::cube(2, 0.0, 1.0, 33).unwrap();
    let g = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
    for (name, exec) in POLICIES {
        let opts = SolveOptions { tol: 1e-8, exec, ..SolveOptions::default() };
        group.bench_function(name, |b| b.iter(|| solve_dirichlet(&SchemeOp::LambdaMin, &|_| 1.0, &g, &grid, &opts).unwrap()));
    }
    group.finish();
}

fn sup_conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("sup_convolution");
    group.sample_size(10);
    let grid = Grid::cube(2, -1.0, 1.0, 65).unwrap();
    let u = rough(&grid);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| sup_convolution(black_box(&u), 0.1, exec).unwrap()));
    }
    group.finish();
}

fn involution(c: &mut Criterion) {
    let mut group = c.benchmark_group("dual_involution");
    group.sample_size(10);
    for (label, f) in [("P~", cone_p_dual()), ("pfold2", cone_pfold(2).unwrap())] {
        for (name, exec) in POLICIES {
            let mut opts = CheckOptions::new(4, 2000, 7);
            opts.exec = exec;
            group.bench_function(BenchmarkId::new(name, label), |b| b.iter(|| check_involution(&f, &opts).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, scheme_sweep, dirichlet_solve, sup_conv, involution);
criterion_main!(benches);
