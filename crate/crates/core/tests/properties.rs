//! Property tests for the invariants of each module.

use proptest::prelude::*;
use subeq::canonical::{canonical_operator, signed_distance};
use subeq::catalog::{branch, cone_p, cone_p_dual, cone_pfold, cone_pucci, cone_sigma_k, FiberOracle, Region};
use subeq::duality::{dual, dual_contains};
use subeq::expr::Expr;
use subeq::garding::{garding_eigenvalues, GardingOperator, ROOT_TOL};
use subeq::geometry::{boundary_point, strict_pseudoconvex_at, LevelSetDomain, PseudoconvexVerdict};
use subeq::par::Exec;
use subeq::solver::{apply_operator, check_subharmonic, sup_convolution, Grid, GridFunction, NodeFiber, SchemeOp};
use subeq::{Jet2, SymMat};

fn sym(n: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-3.0..3.0f64, n * n).prop_map(move |v| {
        SymMat::from_fn(n, |i, j| if i <= j { v[i * n + j] } else { v[j * n + i] })
    })
}

fn psd(n: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
        SymMat::from_fn(n, |i, j| (0..n).map(|k| v[i * n + k] * v[j * n + k]).sum())
    })
}

fn jet(n: usize) -> impl Strategy<Value = Jet2> {
    (-3.0..3.0f64, prop::collection::vec(-3.0..3.0f64, n), sym(n)).prop_map(|(r, p, a)| Jet2 { r, p, a })
}

fn cones() -> Vec<FiberOracle> {
    vec![
        cone_p(),
        cone_p_dual(),
        branch(2).unwrap(),
        cone_pfold(2).unwrap(),
        cone_sigma_k(2).unwrap(),
        cone_pucci(1.0, 2.0).unwrap(),
    ]
}

/// Fully parenthesized expression text with its value at `X`.
const X: [f64; 3] = [0.7, -1.3, 2.1];

fn expr_case() -> impl Strategy<Value = (String, f64)> {
    let leaf = prop_oneof![
        (0.0..10.0f64).prop_map(|c| (format!("{c:?}"), c)),
        (1usize..=3).prop_map(|i| (format!("x{i}"), X[i - 1])),
    ];
    leaf.prop_recursive(5, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|((a, x), (b, y))| (format!("({a} + {b})"), x + y)),
            (inner.clone(), inner.clone()).prop_map(|((a, x), (b, y))| (format!("({a} - {b})"), x - y)),
            (inner.clone(), inner.clone()).prop_map(|((a, x), (b, y))| (format!("({a} * {b})"), x * y)),
            (inner.clone(), inner.clone()).prop_map(|((a, x), (b, y))| (format!("min({a}, {b})"), x.min(y))),
            (inner.clone(), inner.clone()).prop_map(|((a, x), (b, y))| (format!("max({a},{b})"), x.max(y))),
            inner.clone().prop_map(|(a, x)| (format!("abs({a})"), x.abs())),
            inner.prop_map(|(a, x)| (format!("-({a})"), -x)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_shift_with_identity(a in sym(4), t in -5.0..5.0f64) {
        let (ev, sh) = (a.eigenvalues(), a.shift(t).eigenvalues());
        for (x, y) in ev.iter().zip(&sh) {
            prop_assert!((x + t - y).abs() < 1e-10);
        }
        prop_assert!((ev.iter().sum::<f64>() - a.trace()).abs() < 1e-10);
    }

    #[test]
    fn double_dual_agrees_off_the_boundary(j in jet(3)) {
        let tol = 1e-9;
        for f in cones() {
            let c = f.classify(&j, tol).unwrap();
            if c.margin > 3.0 * tol {
                let dd = dual(dual(f.clone())).classify(&j, tol).unwrap();
                prop_assert_eq!(dd.region, c.region);
            }
        }
    }

    #[test]
    fn dual_of_p_is_closed_form(j in jet(3)) {
        let a = dual_contains(cone_p().as_ref(), &j, 1e-9).unwrap();
        prop_assert!((a.value - j.a.lambda_max()).abs() < 1e-12);
    }

    #[test]
    fn canonical_is_shift_covariant_and_monotone(a in sym(3), pos in psd(3), t in -4.0..4.0f64) {
        for f in cones() {
            let base = canonical_operator(f.as_ref(), &a, 1e-12).unwrap();
            let shifted = canonical_operator(f.as_ref(), &a.shift(t), 1e-12).unwrap();
            prop_assert!((shifted - base - t).abs() < 1e-9, "{}: {} vs {}", f.label(), shifted - base, t);
            let lifted = canonical_operator(f.as_ref(), &(&a + &pos), 1e-12).unwrap();
            prop_assert!(lifted >= base - 1e-9, "{}", f.label());
        }
    }

    #[test]
    fn canonical_zero_set_is_the_boundary(a in sym(3)) {
        for f in cones() {
            let c = canonical_operator(f.as_ref(), &a, 1e-12).unwrap();
            let on = f.classify(&Jet2::pure(a.shift(-c)), 1e-7).unwrap();
            prop_assert_eq!(on.region, Region::Boundary, "{}", f.label());
        }
    }

    #[test]
    fn signed_distance_sign_matches_membership(a in sym(2)) {
        let f = cone_p();
        let j = Jet2::pure(a);
        let c = f.classify(&j, 1e-9).unwrap();
        let d = signed_distance(f.as_ref(), &j, 32, 1, 1e-9).unwrap();
        match c.region {
            Region::Interior => prop_assert!(d > 0.0),
            Region::Exterior => prop_assert!(d < 0.0),
            Region::Boundary => prop_assert!(d == 0.0),
        }
    }

    #[test]
    fn garding_eigenvalues_shift(a in sym(3), t in -2.0..2.0f64) {
        let op = GardingOperator::pfold(3, 2).unwrap();
        let l = garding_eigenvalues(&op, &a, ROOT_TOL).unwrap();
        let s = garding_eigenvalues(&op, &a.shift(t), ROOT_TOL).unwrap();
        for (x, y) in l.iter().zip(&s) {
            prop_assert!((x + t - y).abs() < 1e-8);
        }
    }

    #[test]
    fn boundary_data_invariants(axes in prop::collection::vec(0.5..3.0f64, 3), dir in prop::collection::vec(-1.0..1.0f64, 3)) {
        prop_assume!(dir.iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let dom = LevelSetDomain::ellipsoid(&axes).unwrap();
        let x = dom.project(&dir).unwrap();
        let bp = boundary_point(&dom, &x).unwrap();
        // e points inward and lies in the kernel of A_x.
        let step: Vec<f64> = x.iter().zip(&bp.e).map(|(a, b)| a + 1e-6 * b).collect();
        prop_assert!((dom.phi)(&step) < 0.0);
        prop_assert!(bp.a_x.quadratic_form(&bp.e).abs() < 1e-10);
        // Ellipsoids are strictly convex: positive principal curvatures.
        prop_assert!(bp.principal_curvatures.iter().all(|k| *k > 0.0));
    }

    #[test]
    fn pseudoconvex_membership_is_monotone_in_t(axes in prop::collection::vec(0.5..3.0f64, 3), t in 0.0..10.0f64, p in 1usize..=3) {
        let dom = LevelSetDomain::ellipsoid(&axes).unwrap();
        let x = dom.project(&[0.3, 0.4, 0.5]).unwrap();
        let bp = boundary_point(&dom, &x).unwrap();
        let f = cone_pfold(p).unwrap();
        if let PseudoconvexVerdict::Yes { t0 } = strict_pseudoconvex_at(f.as_ref(), &bp, 1e6, 1e-9).unwrap() {
            let pe = SymMat::rank_one_projector(&bp.e);
            let at = |s: f64| f.classify(&Jet2::pure(&bp.a_x + &(s * &pe)), 1e-12).unwrap().region;
            prop_assert_eq!(at(t0.max(0.0) + t + 1e-6), Region::Interior);
        }
    }

    #[test]
    fn expressions_evaluate_like_their_terms((text, value) in expr_case()) {
        let e = Expr::parse(&text).unwrap();
        let got = e.eval(&X);
        prop_assert!(got == value || (got.is_nan() && value.is_nan()), "{text}: {got} vs {value}");
        let again = Expr::parse(&e.to_string()).unwrap();
        prop_assert_eq!(again.eval(&X).to_bits(), got.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn elementary_properties_of_grid_subharmonics(
        c1 in prop::collection::vec(-1.0..1.0f64, 2),
        c2 in prop::collection::vec(-1.0..1.0f64, 2),
        m in 0.0..3.0f64,
    ) {
        let grid = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let p = NodeFiber::Constant(cone_p());
        let bowl = |c: &[f64]| GridFunction::from_fn(&grid, |x| (x[0] - c[0]).powi(2) + 0.5 * (x[1] - c[1]).powi(2));
        let (u, v) = (bowl(&c1), bowl(&c2));
        for w in [&u, &v] {
            prop_assert!(check_subharmonic(w, &p, 1e-9, Exec::Sequential).unwrap().passed());
        }
        // maximum, through the monotone scheme residual
        let mx = u.zip_with(&v, f64::max).unwrap();
        let (ru, rv, rm) = (
            apply_operator(&SchemeOp::LambdaMin, &u, Exec::Sequential).unwrap(),
            apply_operator(&SchemeOp::LambdaMin, &v, Exec::Sequential).unwrap(),
            apply_operator(&SchemeOp::LambdaMin, &mx, Exec::Sequential).unwrap(),
        );
        for k in 0..rm.len() {
            prop_assert!(rm[k] >= ru[k].min(rv[k]) - 1e-9);
            prop_assert!(rm[k] >= -1e-9);
        }
        // sliding
        let q = NodeFiber::Constant(subeq::catalog::cone_q());
        let shifted = u.map(|x| x - m - 4.0);
        prop_assert!(check_subharmonic(&shifted, &q, 1e-9, Exec::Sequential).unwrap().passed());
    }

    #[test]
    fn sup_convolution_dominates(c in prop::collection::vec(-1.0..1.0f64, 3), eps in 0.02..0.5f64) {
        let grid = Grid::cube(1, -1.0, 1.0, 65).unwrap();
        let u = GridFunction::from_fn(&grid, |x| c[0] * (x[0] - c[1]).abs() + c[2] * x[0]);
        let ue = sup_convolution(&u, eps, Exec::Sequential).unwrap();
        let ue2 = sup_convolution(&u, 2.0 * eps, Exec::Sequential).unwrap();
        for k in 0..grid.len() {
            prop_assert!(ue.value(k) >= u.value(k) && ue2.value(k) >= ue.value(k));
        }
    }
}
