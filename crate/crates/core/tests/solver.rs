//! End-to-end solver behaviour across grids, envelopes and configs.

use subeq::catalog::{cone_p, cone_pucci};
use subeq::par::Exec;
use subeq::solver::{
    check_subharmonic, check_superharmonic, perron_envelope, run_config, solve_dirichlet, Grid, GridFunction,
    NodeFiber, SchemeOp, SolveOptions, SolverConfig,
};

fn bowl(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|t| t * t).sum::<f64>()
}

#[test]
fn envelope_of_affine_minorants_sits_below_the_solution() {
    let grid = Grid::cube(2, -1.0, 1.0, 17).unwrap();
    // Tangent planes of the bowl lie below it everywhere, so on the boundary too.
    let family: Vec<GridFunction> = [-1.0, -0.5, 0.0, 0.5, 1.0]
        .iter()
        .flat_map(|&a| [-1.0, 0.0, 1.0].map(move |b| (a, b)))
        .map(|(a, b)| GridFunction::from_fn(&grid, move |x| a * x[0] + b * x[1] - 0.5 * (a * a + b * b)))
        .collect();
    let env = perron_envelope(&family, &bowl, 1e-12).unwrap();
    let opts = SolveOptions { tol: 1e-10, ..SolveOptions::default() };
    let (u, _) = solve_dirichlet(&SchemeOp::LambdaMin, &|_| 0.0, &bowl, &grid, &opts).unwrap();
    let tol = 1e-10 * 8.0;
    for k in grid.interior_nodes() {
        assert!(env.value(k) <= u.value(k) + tol, "node {k}: {} > {}", env.value(k), u.value(k));
    }
    // Each member is affine, so the envelope is convex and lies below the bowl.
    for k in 0..grid.len() {
        assert!(env.value(k) <= bowl(&grid.coords(k)) + 1e-12);
    }
}

#[test]
fn envelope_rejects_members_above_the_data() {
    let grid = Grid::cube(2, -1.0, 1.0, 9).unwrap();
    let high = GridFunction::from_fn(&grid, |x| bowl(x) + 0.1);
    assert!(perron_envelope(&[high], &bowl, 1e-9).is_err());
    assert!(perron_envelope(&[], &bowl, 1e-9).is_err());
}

#[test]
fn concave_functions_are_convexity_superharmonic() {
    let grid = Grid::cube(2, -1.0, 1.0, 17).unwrap();
    let cap = GridFunction::from_fn(&grid, |x| -bowl(x) + 0.2 * x[0]);
    let p = NodeFiber::Constant(cone_p());
    assert!(check_superharmonic(&cap, &p, 1e-9, Exec::Parallel).unwrap().passed());
    // A saddle is neither convex nor concave: it is P-superharmonic but not P-subharmonic.
    let saddle = GridFunction::from_fn(&grid, |x| x[0] * x[0] - x[1] * x[1]);
    assert!(check_superharmonic(&saddle, &p, 1e-9, Exec::Parallel).unwrap().passed());
    assert!(!check_subharmonic(&saddle, &p, 1e-9, Exec::Parallel).unwrap().passed());
    // The bowl is strictly subharmonic, hence not superharmonic.
    let cup = GridFunction::from_fn(&grid, bowl);
    assert!(!check_superharmonic(&cup, &p, 1e-9, Exec::Parallel).unwrap().passed());
}

#[test]
fn pucci_solution_is_a_pucci_subsolution() {
    let grid = Grid::cube(2, -1.0, 1.0, 17).unwrap();
    let g = |x: &[f64]| x[0] * x[0] - 0.5 * x[1] * x[1];
    let opts = SolveOptions { tol: 1e-10, ..SolveOptions::default() };
    let (u, rep) = solve_dirichlet(&SchemeOp::Pucci { lam: 1.0, big: 2.0 }, &|_| 0.0, &g, &grid, &opts).unwrap();
    assert!(rep.residual <= 1e-10);
    // x1² − x2²/2 has eigenvalues (2, −1): λ·2 + Λ·(−1) = 0, so it solves the equation exactly.
    for k in 0..grid.len() {
        assert!((u.value(k) - g(&grid.coords(k))).abs() < 1e-8);
    }
    let f = NodeFiber::Constant(cone_pucci(1.0, 2.0).unwrap());
    let rep = check_subharmonic(&u, &f, 1e-6, Exec::Parallel).unwrap();
    assert_eq!(rep.exterior, 0, "{rep:?}");
}

#[test]
fn sequential_and_parallel_solves_agree_bitwise() {
    let grid = Grid::cube(2, 0.0, 1.0, 17).unwrap();
    let g = |x: &[f64]| (x[0] - 0.4).abs() + x[1] * x[1];
    let run = |exec| {
        let opts = SolveOptions { tol: 1e-9, exec, ..SolveOptions::default() };
        solve_dirichlet(&SchemeOp::LambdaK(2), &|_| 0.0, &g, &grid, &opts).unwrap()
    };
    let (a, ra) = run(Exec::Sequential);
    let (b, rb) = run(Exec::Parallel);
    assert_eq!(ra.iterations, rb.iterations);
    for k in 0..grid.len() {
        assert_eq!(a.value(k).to_bits(), b.value(k).to_bits());
    }
}

#[test]
fn config_driven_special_lagrangian_solve() {
    let cfg = SolverConfig::from_json(
        r#"{"operator": "sl", "level": 1.5707963267948966,
            "domain": {"lo": [0, 0], "hi": [1, 1]}, "h": 0.0625, "tol": 1e-9,
            "boundary": "0.5*(x1^2 + x2^2)", "exact": "0.5*(x1^2 + x2^2)"}"#,
    )
    .unwrap();
    let out = run_config(&cfg, 3, Exec::Parallel).unwrap();
    assert!(out.header.max_error.unwrap() < 1e-6, "{:?}", out.header.max_error);
    assert_eq!(out.header.seed, 3);
}
