//! Thin wrappers over the library, printing JSON or CSV to stdout.

use std::path::Path;

use serde_json::{json, Value};
use subeq::canonical::{canonical_operator, signed_distance};
use subeq::catalog::{catalog_entries, CatalogEntry, CatalogKey, Classification, FiberOracle};
use subeq::duality::dual_contains;
use subeq::garding::{garding_eigenvalues, GardingKey, ROOT_TOL};
use subeq::geometry::{boundary_point, strict_ellipticity_check, strict_pseudoconvex_at, DomainSpec, PseudoconvexVerdict};
use subeq::par::Exec;
use subeq::sampling::{seeded, unit_vector};
use subeq::solver::{run_config, write_outcome, SolverConfig};
use subeq::{Error, Result};

use crate::input;
use crate::Verdict;

pub struct Ctx {
    pub seed: u64,
    pub tol: f64,
    pub exec: Exec,
}

/// Bisection width for canonical values; independent of the classification band.
const CANONICAL_WIDTH: f64 = 1e-13;

/// Directions sampled by the strict ellipticity shortcut.
const ELLIPTICITY_SAMPLES: usize = 256;

pub fn emit(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("JSON values serialize"));
}

/// Registry rows: the fiber catalog plus the hyperbolic polynomials.
fn registry() -> Vec<(CatalogEntry, &'static str)> {
    let mut rows: Vec<(CatalogEntry, &'static str)> = catalog_entries().into_iter().map(|e| (e, "fiber")).collect();
    let op = |key: &str, parameters: &str, inequality: &str, anchor: &str| CatalogEntry {
        key: key.into(),
        arity: subeq::catalog::Arity::PureSecondOrder,
        parameters: parameters.into(),
        inequality: inequality.into(),
        anchor: anchor.into(),
    };
    rows.extend(
        [
            op("det", "dimension n", "det A = prod lambda_j(A)", "Monge-Ampere polynomial"),
            op("pfold:p=2", "p in 1..=n", "prod over p-subsets of (lambda_i1 + ... + lambda_ip)", "p-fold sum polynomial"),
            op("delta-elliptic:1", "delta > 0", "prod (lambda_j + delta tr A)", "delta-uniformly elliptic polynomial"),
            op("lagrangian-ma", "even dimension 2k", "prod (tr A/2 +- mu_1 +- ... +- mu_k)", "Lagrangian Monge-Ampere polynomial"),
            op("pucci-garding:1,2", "0 < lam < Lam", "prod over extreme vertices v of <v, lambda(A)>", "Pucci polynomial"),
            op("sigma:k=2", "k in 1..=n", "sigma_k(lambda(A))", "k-Hessian polynomial"),
        ]
        .into_iter()
        .map(|e| (e, "operator")),
    );
    rows
}

fn family(key: &str) -> &str {
    if key.starts_with("var:") {
        key
    } else {
        key.split(':').next().unwrap_or(key)
    }
}

pub fn catalog_list(as_json: bool) -> Result<Verdict> {
    let rows = registry();
    if as_json {
        let list: Vec<Value> = rows
            .iter()
            .map(|(e, kind)| json!({"kind": kind, "key": e.key, "arity": e.arity, "parameters": e.parameters, "inequality": e.inequality, "anchor": e.anchor}))
            .collect();
        emit(&Value::Array(list));
    } else {
        for (e, kind) in &rows {
            println!("{:<28} {:<9} {:<16?} {}", e.key, kind, e.arity, e.inequality);
        }
    }
    Ok(Verdict::Positive)
}

pub fn catalog_describe(key: &str) -> Result<Verdict> {
    let (canonical, kind) = match key.parse::<CatalogKey>() {
        Ok(k) => (k.to_string(), "fiber"),
        Err(Error::UnknownKey(_)) => (key.parse::<GardingKey>()?.to_string(), "operator"),
        Err(e) => return Err(e),
    };
    let (e, _) = registry()
        .into_iter()
        .find(|(e, k)| *k == kind && family(&e.key) == family(&canonical))
        .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
    emit(&json!({
        "kind": kind,
        "key": canonical,
        "arity": e.arity,
        "parameters": e.parameters,
        "inequality": e.inequality,
        "anchor": e.anchor,
    }));
    Ok(Verdict::Positive)
}

fn fiber(key: &str) -> Result<FiberOracle> {
    key.parse::<CatalogKey>()?.build()
}

fn classification(ctx: &Ctx, key: &str, c: &Classification) -> Value {
    json!({"seed": ctx.seed, "key": key, "region": c.region, "margin": c.margin, "value": c.value})
}

pub fn membership(ctx: &Ctx, key: &str, matrix: Option<&str>, jet: Option<&str>, dual: bool) -> Result<Verdict> {
    let f = fiber(key)?;
    let j = input::jet_or_matrix(matrix, jet)?;
    let c = if dual { dual_contains(f.as_ref(), &j, ctx.tol)? } else { f.classify(&j, ctx.tol)? };
    emit(&classification(ctx, key, &c));
    Ok(Verdict::Positive)
}

pub fn canonical(ctx: &Ctx, key: &str, matrix: &str) -> Result<Verdict> {
    let f = fiber(key)?;
    let a = input::matrix(matrix)?;
    let v = canonical_operator(f.as_ref(), &a, CANONICAL_WIDTH)?;
    emit(&json!({"seed": ctx.seed, "key": key, "value": v}));
    Ok(Verdict::Positive)
}

pub fn garding(ctx: &Ctx, op: &str, matrix: &str) -> Result<Verdict> {
    let a = input::matrix(matrix)?;
    let g = op.parse::<GardingKey>()?.build(a.n())?;
    let lam = garding_eigenvalues(&g, &a, ROOT_TOL)?;
    emit(&json!({"seed": ctx.seed, "op": op, "n": a.n(), "eval": g.eval(&a)?, "lambda": lam}));
    Ok(Verdict::Positive)
}

pub fn distance(ctx: &Ctx, key: &str, matrix: Option<&str>, jet: Option<&str>, directions: usize) -> Result<Verdict> {
    let f = fiber(key)?;
    let j = input::jet_or_matrix(matrix, jet)?;
    let d = signed_distance(f.as_ref(), &j, directions, ctx.seed, ctx.tol)?;
    emit(&json!({"seed": ctx.seed, "key": key, "directions": directions, "distance": d}));
    Ok(Verdict::Positive)
}

/// CSV: one row per boundary point with the verdict and `t0`.
pub fn pseudoconvex(ctx: &Ctx, domain: &str, key: &str, points: Option<&str>, samples: usize, t_cap: f64) -> Result<Verdict> {
    let spec: DomainSpec =
        serde_json::from_str(&input::text_arg(domain)?).map_err(|e| Error::Parse(format!("domain: {e}")))?;
    let dom = spec.build()?;
    let n = dom.dim();
    let f = fiber(key)?;
    let seeds = match points {
        Some(p) => input::points(p)?,
        None => {
            let mut rng = seeded(ctx.seed);
            (0..samples).map(|_| unit_vector(&mut rng, n)).collect()
        }
    };
    // Strictly elliptic fibers need no boundary geometry.
    let elliptic = strict_ellipticity_check(f.as_ref(), n, ELLIPTICITY_SAMPLES, ctx.seed, ctx.tol)?.holds;
    let coords: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    println!("# seed={} domain={} key={key}", ctx.seed, dom.label);
    println!("point,{},verdict,t0,method", coords.join(","));
    let mut all_yes = true;
    for (i, s) in seeds.iter().enumerate() {
        let x = dom.project(s)?;
        let bp = boundary_point(&dom, &x)?;
        let verdict = strict_pseudoconvex_at(f.as_ref(), &bp, t_cap, ctx.tol)?;
        let (yes, t0) = match verdict {
            PseudoconvexVerdict::Yes { t0 } => (true, t0.to_string()),
            PseudoconvexVerdict::No => (elliptic, String::new()),
        };
        all_yes &= yes;
        let method = if elliptic { "strict-ellipticity" } else { "boundary-jet" };
        let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        println!("{i},{},{},{t0},{method}", xs.join(","), if yes { "yes" } else { "no" });
    }
    Ok(if all_yes { Verdict::Positive } else { Verdict::Negative })
}

pub fn solve(ctx: &Ctx, config: &Path, out_dir: &Path) -> Result<Verdict> {
    let cfg = SolverConfig::load(config)?;
    let out = run_config(&cfg, ctx.seed, ctx.exec)?;
    let (csv, json_path) = write_outcome(&out, out_dir)?;
    emit(&json!({
        "seed": ctx.seed,
        "operator": out.header.operator,
        "iterations": out.header.iterations,
        "residual": out.header.residual,
        "max_error": out.header.max_error,
        "csv": csv.display().to_string(),
        "json": json_path.display().to_string(),
    }));
    Ok(Verdict::Positive)
}

/// Reference formulas each command evaluates.
pub fn anchors(command: &str) {
    let lines: &[&str] = match command {
        "catalog" => &["subequation: closed F with positivity, negativity and topological stability", "catalog entries list their defining inequality and anchor name"],
        "membership" => &["fiber membership J in F_x", "Region from the signed defining functional with a tolerance band"],
        "dual" => &["Dirichlet dual F~ = (-Int F)^c", "J in F~ iff -J not in Int F"],
        "canonical" => &["canonical operator F(A) = sup{t : A - tI in F}", "F(A + tI) = F(A) + t, F(A + P) >= F(A) for P >= 0"],
        "garding" => &["Garding eigenvalues: negatives of the roots of s -> F(sI + A)", "F(A) = F(I) prod Lambda_j(A)"],
        "distance" => &["signed distance to the fiber boundary along sampled jet directions"],
        "pseudoconvex" => &["strict F-pseudoconvexity: A_x + t P_e(x) in Int F for all large t", "A_x: second fundamental form for the inward normal e(x)", "strict ellipticity: P_e in Int F for all unit e"],
        "solve" => &["monotone wide-stencil scheme F_h[u] = psi with u = g on the boundary layer", "explicit iteration u <- u + dt (F_h[u] - psi)"],
        _ => &["Dirichlet duality F~~ = F", "Garding product identity and shift covariance", "scheme monotonicity and discrete comparison", "uniform translation property"],
    };
    for l in lines {
        println!("{command}: {l}");
    }
}
