//! Fixed-seed property suites behind `subeq check`.

use rand::Rng;
use serde_json::{json, Value};
use subeq::catalog::{
    branch, cone_lagrangian, cone_m, cone_p, cone_p_dual, cone_pfold, cone_pucci, cone_q, cone_q_dual,
    cone_quasiconvex, cone_sigma_k, fiber_failure_example, BoxDomain, DirectionalCone, FiberOracle, MonotonicityCone,
    Radius, VariableFiberMap, Which,
};
use subeq::duality::{check_involution, CheckOptions};
use subeq::garding::{garding_eigenvalues, GardingOperator, ROOT_TOL};
use subeq::sampling::{random_sym, seeded};
use subeq::solver::{
    discrete_comparison, monotonicity_probe, strict_approximator, uniform_translation_probe, Grid, GridFunction,
    SchemeOp, SolveOptions,
};
use subeq::{Result, SymMat};

use crate::commands::{emit, Ctx};
use crate::{Suite, Verdict};

pub fn run(ctx: &Ctx, suite: Suite, samples: Option<usize>) -> Result<Verdict> {
    let (name, (ok, detail)) = match suite {
        Suite::DualityInvolution => ("duality-involution", duality(ctx, samples.unwrap_or(2000))?),
        Suite::GardingIdentities => ("garding-identities", garding(ctx, samples.unwrap_or(200))?),
        Suite::Monotonicity => ("monotonicity", monotonicity(ctx, samples.unwrap_or(1000))?),
        Suite::Comparison => ("comparison", comparison(ctx, samples.unwrap_or(5))?),
        Suite::Utp => ("utp", utp(ctx)?),
    };
    emit(&json!({"seed": ctx.seed, "suite": name, "passed": ok, "details": detail}));
    Ok(if ok { Verdict::Positive } else { Verdict::Negative })
}

fn oracles() -> Result<Vec<FiberOracle>> {
    let mut out = vec![cone_p(), cone_p_dual(), cone_q(), cone_q_dual(), cone_lagrangian(), cone_quasiconvex(1.0)?];
    for k in 1..=3 {
        out.push(branch(k)?);
        out.push(cone_pfold(k)?);
        out.push(cone_sigma_k(k)?);
    }
    out.push(cone_pucci(1.0, 2.0)?);
    out.push(cone_m(&MonotonicityCone::new(1.0, DirectionalCone::HalfSpace { axis: 0, positive: true }, Radius::Infinite)?));
    out.push(fiber_failure_example(2.0, Which::Min)?);
    Ok(out)
}

fn duality(ctx: &Ctx, samples: usize) -> Result<(bool, Value)> {
    let mut rows = Vec::new();
    let mut ok = true;
    for (i, f) in oracles()?.iter().enumerate() {
        // The Lagrangian cone needs an even dimension.
        let n = if f.label().contains("agrang") { 4 } else { 3 };
        let mut opts = CheckOptions::new(n, samples, ctx.seed.wrapping_add(i as u64));
        opts.tol = ctx.tol;
        opts.exec = ctx.exec;
        let rep = check_involution(f, &opts)?;
        ok &= rep.ok();
        rows.push(json!({"oracle": f.label(), "checked": rep.checked, "disagreements": rep.failures(), "excluded": rep.excluded_boundary}));
    }
    Ok((ok, Value::Array(rows)))
}

fn garding(ctx: &Ctx, samples: usize) -> Result<(bool, Value)> {
    let mut ops = vec![GardingOperator::det(3)?, GardingOperator::lagrangian_ma(2)?];
    for p in 1..=3 {
        ops.push(GardingOperator::pfold(3, p)?);
        ops.push(GardingOperator::sigma_k(3, p)?);
    }
    ops.push(GardingOperator::delta_elliptic(3, 0.1)?);
    ops.push(GardingOperator::pucci_garding(1.0, 2.0, 2)?);
    let mut rows = Vec::new();
    let mut ok = true;
    for (i, op) in ops.iter().enumerate() {
        let mut rng = seeded(ctx.seed.wrapping_add(i as u64));
        let e_id = op.eval(&SymMat::identity(op.n()))?;
        let (mut worst_product, mut worst_shift) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let a = random_sym(&mut rng, op.n(), 1.0);
            let t = rng.random::<f64>() * 4.0 - 2.0;
            let lam = garding_eigenvalues(op, &a, ROOT_TOL)?;
            let shifted = garding_eigenvalues(op, &a.shift(t), ROOT_TOL)?;
            let value = op.eval(&a)?;
            let prod = e_id * lam.iter().product::<f64>();
            worst_product = worst_product.max((value - prod).abs() / value.abs().max(prod.abs()).max(1e-300));
            worst_shift = worst_shift.max(lam.iter().zip(&shifted).map(|(l, s)| (l + t - s).abs()).fold(0.0, f64::max));
        }
        let pass = worst_product <= 1e-7 && worst_shift <= 1e-8;
        ok &= pass;
        rows.push(json!({"operator": op.label(), "n": op.n(), "worst_product": worst_product, "worst_shift": worst_shift, "passed": pass}));
    }
    Ok((ok, Value::Array(rows)))
}

fn scheme_cases() -> Result<Vec<(SchemeOp, Grid)>> {
    let square = Grid::cube(2, 0.0, 1.0, 17)?;
    Ok(vec![
        (SchemeOp::LambdaMin, square.clone()),
        (SchemeOp::LambdaK(2), square.clone()),
        (SchemeOp::Pucci { lam: 1.0, big: 2.0 }, square),
        (SchemeOp::PFold(2), Grid::cube(3, 0.0, 1.0, 9)?),
    ])
}

fn monotonicity(ctx: &Ctx, states: usize) -> Result<(bool, Value)> {
    let mut rows = Vec::new();
    let mut ok = true;
    for (i, (op, grid)) in scheme_cases()?.iter().enumerate() {
        let rep = monotonicity_probe(op, grid, states, ctx.seed.wrapping_add(i as u64), ctx.exec)?;
        ok &= rep.violations == 0;
        rows.push(json!({"operator": op.to_string(), "probes": rep.probes, "violations": rep.violations, "worst": rep.worst}));
    }
    Ok((ok, Value::Array(rows)))
}

/// Ordered boundary data `g_lo ≤ g_hi`; the solutions must stay ordered.
fn comparison(ctx: &Ctx, pairs: usize) -> Result<(bool, Value)> {
    let mut rows = Vec::new();
    let mut ok = true;
    let mut rng = seeded(ctx.seed);
    for (op, grid) in scheme_cases()? {
        let n = grid.dim();
        let opts = SolveOptions { tol: 1e-8, exec: ctx.exec, ..SolveOptions::default() };
        for _ in 0..pairs {
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let lift = rng.random::<f64>();
            let amp = rng.random::<f64>();
            let g_lo = move |x: &[f64]| 0.5 * x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let g_hi = |x: &[f64]| g_lo(x) + lift + amp * (7.0 * x[0]).sin().abs();
            let v = discrete_comparison(&op, &|_| 0.0, &g_lo, &g_hi, &grid, &opts)?;
            ok &= v.holds;
            rows.push(json!({"operator": op.to_string(), "holds": v.holds, "max_excess": v.max_excess}));
        }
    }
    Ok((ok, Value::Array(rows)))
}

/// Translates of a strict subsolution for `Q` stay subsolutions after a
/// small perturbation by the strict approximator.
fn utp(ctx: &Ctx) -> Result<(bool, Value)> {
    let domain = BoxDomain::cube(2, 1.0)?;
    let grid = Grid::cube(2, -1.0, 1.0, 17)?;
    let m = MonotonicityCone::minimal();
    let psi = strict_approximator(&m, &domain)?
        .ok_or_else(|| subeq::Error::HypothesisViolation("no strict approximator on the box".into()))?;
    let theta = VariableFiberMap::constant(domain, cone_q(), m)?;
    let bowl = GridFunction::from_fn(&grid, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) - 5.0);
    let rep = uniform_translation_probe(&bowl, &theta, &psi, 0.0, 0.3, ctx.tol, ctx.exec)?;
    Ok((rep.delta > 0.0, serde_json::to_value(&rep).expect("report serializes")))
}
