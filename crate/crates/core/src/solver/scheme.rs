//! Monotone wide-stencil operators and the damped Jacobi Dirichlet solve.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use super::grid::{Grid, GridFunction};
use crate::catalog::CatalogKey;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Exec};
use crate::sampling::seeded;

/// Largest frame size (the grid dimension) handled without allocation.
const MAX_FRAME: usize = 8;

/// Operators the scheme can discretize. Every one is a nondecreasing
/// function of the directional second differences, which makes the
/// explicit update monotone under the step bound.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeOp {
    /// Canonical operator of `P`: `λ_min`.
    LambdaMin,
    /// Canonical operator of `P̃`: `λ_max`.
    LambdaMax,
    /// The `k`-th branch `λ_k`.
    LambdaK(usize),
    /// Mean of the `p` smallest eigenvalues (`p = n` is `Δ/n`).
    PFold(usize),
    /// `λ·tr A⁺ + Λ·tr A⁻`.
    Pucci { lam: f64, big: f64 },
    /// `Σ arctan λ_k`.
    SpecialLagrangian,
}

impl SchemeOp {
    /// Lipschitz constant in each second difference.
    pub fn lip(&self) -> f64 {
        match self {
            SchemeOp::Pucci { big, .. } => *big,
            _ => 1.0,
        }
    }

    /// Evaluates the operator from second differences `d` (one per stencil
    /// direction); frames are sets of mutually orthogonal directions.
    pub fn eval(&self, d: &[f64], frames: &[Vec<usize>], dim: usize) -> f64 {
        let sorted = |fr: &[usize], buf: &mut [f64; MAX_FRAME]| {
            let v = &mut buf[..fr.len()];
            for (slot, &k) in v.iter_mut().zip(fr) {
                *slot = d[k];
            }
            v.sort_unstable_by(|a, b| a.total_cmp(b));
        };
        let over_frames = |init: f64, pick: fn(f64, f64) -> f64, f: &dyn Fn(&[f64]) -> f64| {
            let mut buf = [0.0; MAX_FRAME];
            frames.iter().fold(init, |acc, fr| {
                sorted(fr, &mut buf);
                pick(acc, f(&buf[..fr.len()]))
            })
        };
        let lowest = || d.iter().copied().fold(f64::INFINITY, f64::min);
        let highest = || d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            SchemeOp::LambdaMin => lowest(),
            SchemeOp::LambdaMax => highest(),
            SchemeOp::LambdaK(1) => lowest(),
            SchemeOp::LambdaK(k) if *k == dim => highest(),
            SchemeOp::LambdaK(k) => over_frames(f64::NEG_INFINITY, f64::max, &|v| v[k - 1]),
            SchemeOp::PFold(p) => over_frames(f64::INFINITY, f64::min, &|v| v[..*p].iter().sum::<f64>() / *p as f64),
            SchemeOp::Pucci { lam, big } => over_frames(f64::INFINITY, f64::min, &|v| {
                v.iter().map(|&x| if x > 0.0 { lam * x } else { big * x }).sum()
            }),
            SchemeOp::SpecialLagrangian => over_frames(f64::INFINITY, f64::min, &|v| v.iter().map(|x| x.atan()).sum()),
        }
    }

    /// Errors unless the operator is defined in dimension `dim`.
    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            SchemeOp::LambdaK(k) | SchemeOp::PFold(k) if *k == 0 || *k > dim => {
                Err(Error::IndexOutOfRange { index: *k, max: dim })
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SchemeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeOp::LambdaMin => write!(f, "P"),
            SchemeOp::LambdaMax => write!(f, "P~"),
            SchemeOp::LambdaK(k) => write!(f, "branch:k={k}"),
            SchemeOp::PFold(p) => write!(f, "pfold:p={p}"),
            SchemeOp::Pucci { lam, big } => write!(f, "pucci:{lam},{big}"),
            SchemeOp::SpecialLagrangian => write!(f, "special-lagrangian"),
        }
    }
}

impl FromStr for SchemeOp {
    type Err = Error;

    /// Accepts the catalog keys `P`, `P~`, `branch:k=j`, `pfold:p=j`,
    /// `pucci:λ,Λ` and the extra keys `special-lagrangian` / `sl`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "special-lagrangian" || t == "sl" {
            return Ok(SchemeOp::SpecialLagrangian);
        }
        match t.parse::<CatalogKey>()? {
            CatalogKey::P => Ok(SchemeOp::LambdaMin),
            CatalogKey::PDual => Ok(SchemeOp::LambdaMax),
            CatalogKey::Branch(k) => Ok(SchemeOp::LambdaK(k)),
            CatalogKey::PFold(p) => Ok(SchemeOp::PFold(p)),
            CatalogKey::Pucci(lam, big) => Ok(SchemeOp::Pucci { lam, big }),
            other => Err(Error::UnknownKey(format!("{other} has no monotone scheme"))),
        }
    }
}

const MAX_DIRS: usize = 64;

/// Interior nodes with their stencil neighbours, precomputed once.
pub(crate) struct Stencil {
    pub nodes: Vec<usize>,
    pub nbrs: Vec<Vec<(usize, usize)>>,
    pub scale: Vec<f64>,
}

impl Stencil {
    pub fn new(grid: &Grid) -> Result<Self> {
        if grid.dirs().len() > MAX_DIRS || grid.dim() > MAX_FRAME {
            return Err(Error::BadParameters(format!(
                "scheme supports at most {MAX_DIRS} directions in dimension <= {MAX_FRAME}"
            )));
        }
        let nodes = grid.interior_nodes();
        let nbrs = nodes.iter().map(|&k| grid.neighbours(k)).collect::<Result<Vec<_>>>()?;
        let h2 = grid.h() * grid.h();
        let scale = (0..grid.dirs().len()).map(|k| 1.0 / (h2 * grid.dir_norm_sq(k))).collect();
        Ok(Self { nodes, nbrs, scale })
    }

    pub fn second_differences(&self, values: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.scale.len()];
        self.fill_differences(values, i, &mut out);
        out
    }

    pub fn fill_differences(&self, values: &[f64], i: usize, out: &mut [f64]) {
        let c = values[self.nodes[i]];
        for ((slot, &(a, b)), s) in out.iter_mut().zip(&self.nbrs[i]).zip(&self.scale) {
            *slot = (values[a] - 2.0 * c + values[b]) * s;
        }
    }

    /// `F_h` at interior slot `i`, using a stack buffer for the differences.
    pub fn apply(&self, op: &SchemeOp, values: &[f64], i: usize, frames: &[Vec<usize>], dim: usize) -> f64 {
        let mut buf = [0.0; MAX_DIRS];
        let d = &mut buf[..self.scale.len()];
        self.fill_differences(values, i, d);
        op.eval(d, frames, dim)
    }
}

/// `F_h(u)` at every interior node, in interior order.
pub fn apply_operator(op: &SchemeOp, u: &GridFunction, exec: Exec) -> Result<Vec<f64>> {
    let grid = u.grid();
    op.check(grid.dim())?;
    let st = Stencil::new(grid)?;
    Ok(map_indexed(exec, st.nodes.len(), |i| op.eval(&st.second_differences(u.values(), i), grid.frames(), grid.dim())))
}

/// Largest explicit step keeping the update monotone:
/// `h² / (2·Σ|θ|⁻²·lip)`.
pub fn stable_step(op: &SchemeOp, grid: &Grid) -> f64 {
    grid.h() * grid.h() / (2.0 * grid.stencil_weight() * op.lip())
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relaxation step; defaults to 0.9 of the stability bound.
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Warm-start from solves on successively coarser grids (spacing 2h,
    /// 4h, ...) interpolated multilinearly; otherwise the interior starts
    /// at the mean of the boundary data.
    pub nested: bool,
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { dt: None, tol: 1e-9, max_iter: 100_000, nested: true, exec: Exec::Parallel }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Sweeps on the requested grid.
    pub iterations: usize,
    /// Sweeps spent on coarser warm-start grids.
    pub coarse_iterations: usize,
    pub dt: f64,
    pub residual: f64,
    /// Max residual after every sweep on the requested grid.
    pub history: Vec<f64>,
}

/// Solves `F_h(u) = ψ` on `grid` with `u = g` on the boundary layer.
pub fn solve_dirichlet(
    op: &SchemeOp,
    psi: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    let mut init = GridFunction::with_boundary(grid, g, 0.0);
    let bd = init.boundary_data();
    let mean = bd.iter().map(|(_, v)| v).sum::<f64>() / bd.len().max(1) as f64;
    let mut coarse_iterations = 0;
    let warm = match coarser(grid) {
        Some(cg) if opts.nested => {
            let coarse_opts = SolveOptions { dt: None, ..opts.clone() };
            let (cu, rep) = solve_dirichlet(op, psi, g, &cg, &coarse_opts)?;
            coarse_iterations = rep.iterations + rep.coarse_iterations;
            Some(cu)
        }
        _ => None,
    };
    let values = init.values_mut();
    for k in grid.interior_nodes() {
        values[k] = match &warm {
            Some(cu) => prolong(cu, &grid.multi_index(k)),
            None => mean,
        };
    }
    let (u, mut rep) = solve_from(op, psi, &init, opts)?;
    rep.coarse_iterations = coarse_iterations;
    Ok((u, rep))
}

/// The grid with twice the spacing, if it still has interior nodes.
fn coarser(grid: &Grid) -> Option<Grid> {
    if grid.dims().iter().any(|&d| (d - 1) % 2 != 0 || (d - 1) / 2 + 1 < 2 * grid.layer() + 3) {
        return None;
    }
    Grid::with_stencil(&grid.domain(), 2.0 * grid.h(), grid.dirs().to_vec()).ok()
}

/// Multilinear interpolation of a coarse function at fine multi-index `idx`.
fn prolong(coarse: &GridFunction, idx: &[usize]) -> f64 {
    let cg = coarse.grid();
    let n = idx.len();
    let mut total = 0.0;
    for mask in 0..1usize << n {
        let mut weight = 1.0;
        let mut cidx = Vec::with_capacity(n);
        for (d, &i) in idx.iter().enumerate() {
            let base = i / 2;
            let odd = i % 2 == 1;
            let up = mask >> d & 1 == 1;
            if !odd && up {
                weight = 0.0;
                break;
            }
            if odd {
                weight *= 0.5;
            }
            cidx.push(if up { base + 1 } else { base });
        }
        if weight > 0.0 {
            total += weight * coarse.value(cg.index(&cidx));
        }
    }
    total
}

/// Damped Jacobi iteration `u ← u + dt·(F_h(u) − ψ)` on interior nodes,
/// starting from `init` (whose boundary layer carries the Dirichlet data).
pub fn solve_from(
    op: &SchemeOp,
    psi: &dyn Fn(&[f64]) -> f64,
    init: &GridFunction,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    let grid = init.grid().clone();
    op.check(grid.dim())?;
    let st = Stencil::new(&grid)?;
    let dt_max = stable_step(op, &grid);
    let dt = opts.dt.unwrap_or(0.9 * dt_max);
    if !(dt > 0.0) || dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::BadParameters(format!("dt = {dt} outside (0, {dt_max}]")));
    }
    let source: Vec<f64> = st.nodes.iter().map(|&k| psi(&grid.coords(k))).collect();
    let frames = grid.frames().to_vec();
    let dim = grid.dim();
    let mut u = init.clone();
    let mut history = Vec::new();
    let mut growth = 0usize;
    for it in 0..opts.max_iter {
        let vals = u.values();
        let res: Vec<f64> = map_indexed(opts.exec, st.nodes.len(), |i| st.apply(op, vals, i, &frames, dim) - source[i]);
        let r = res.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if !r.is_finite() {
            return Err(Error::UnstableStep { iteration: it });
        }
        if let Some(&prev) = history.last() {
            growth = if r > prev { growth + 1 } else { 0 };
            if growth >= 100 {
                return Err(Error::UnstableStep { iteration: it });
            }
        }
        history.push(r);
        if r <= opts.tol {
            return Ok((u, SolveReport { iterations: it, coarse_iterations: 0, dt, residual: r, history }));
        }
        let values = u.values_mut();
        for (i, &k) in st.nodes.iter().enumerate() {
            values[k] += dt * res[i];
        }
    }
    Err(Error::NotConverged { iterations: opts.max_iter, residual: history.last().copied().unwrap_or(f64::NAN) })
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub probes: usize,
    pub violations: usize,
    pub worst: f64,
}

/// Finite-difference check that the update map
/// `T(u)_x = u_x + dt·(F_h(u)_x − ψ)` is nondecreasing in every stencil
/// value, at `states` random states.
pub fn monotonicity_probe(op: &SchemeOp, grid: &Grid, states: usize, seed: u64, exec: Exec) -> Result<MonotonicityReport> {
    op.check(grid.dim())?;
    let st = Stencil::new(grid)?;
    let dt = 0.9 * stable_step(op, grid);
    let mut rng = seeded(seed);
    let cases: Vec<(Vec<f64>, usize, usize, f64)> = (0..states)
        .map(|_| {
            let vals: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let i = rng.random_range(0..st.nodes.len());
            // Slot 0 is the centre, then plus/minus neighbours per direction.
            let slot = rng.random_range(0..=2 * st.nbrs[i].len());
            let bump = rng.random::<f64>() * 0.1;
            (vals, i, slot, bump)
        })
        .collect();
    let frames = grid.frames();
    let dim = grid.dim();
    let outcomes = map_indexed(exec, cases.len(), |c| {
        let (vals, i, slot, bump) = &cases[c];
        let node = st.nodes[*i];
        let target = match slot {
            0 => node,
            s => {
                let (a, b) = st.nbrs[*i][(s - 1) / 2];
                if s % 2 == 1 { a } else { b }
            }
        };
        let update = |v: &[f64]| v[node] + dt * op.eval(&st.second_differences(v, *i), frames, dim);
        let before = update(vals);
        let mut bumped = vals.clone();
        bumped[target] += bump;
        update(&bumped) - before
    });
    let worst = outcomes.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = outcomes.iter().filter(|&&d| d < -1e-12).count();
    Ok(MonotonicityReport { probes: states, violations, worst })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingVerdict {
    pub holds: bool,
    /// Largest `u − w` over interior nodes.
    pub max_excess: f64,
    pub witness: Option<usize>,
}

/// Interior ordering `u ≤ w + tol`.
pub fn interior_ordering(u: &GridFunction, w: &GridFunction, tol: f64) -> Result<OrderingVerdict> {
    let diff = u.zip_with(w, |a, b| a - b)?;
    let mut best = (f64::NEG_INFINITY, None);
    for k in u.grid().interior_nodes() {
        if diff.value(k) > best.0 {
            best = (diff.value(k), Some(k));
        }
    }
    let holds = best.0 <= tol;
    Ok(OrderingVerdict { holds, max_excess: best.0, witness: if holds { None } else { best.1 } })
}

/// Solves with boundary data `g_lo ≤ g_hi` and checks the converged states
/// are ordered at every interior node.
pub fn discrete_comparison(
    op: &SchemeOp,
    psi: &dyn Fn(&[f64]) -> f64,
    g_lo: &dyn Fn(&[f64]) -> f64,
    g_hi: &dyn Fn(&[f64]) -> f64,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<OrderingVerdict> {
    for k in grid.boundary_nodes() {
        let x = grid.coords(k);
        if g_lo(&x) > g_hi(&x) {
            return Err(Error::HypothesisViolation(format!("boundary data not ordered at node {k}")));
        }
    }
    let (u, _) = solve_dirichlet(op, psi, g_lo, grid, opts)?;
    let (w, _) = solve_dirichlet(op, psi, g_hi, grid, opts)?;
    // A residual of `tol` moves the solution by at most `tol·diam²` (quadratic barrier).
    let diam = grid.domain().diameter();
    interior_ordering(&u, &w, opts.tol * diam * diam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square(nodes: usize) -> Grid {
        Grid::cube(2, 0.0, 1.0, nodes).unwrap()
    }

    #[test]
    fn keys_parse() {
        assert_eq!("P".parse::<SchemeOp>().unwrap(), SchemeOp::LambdaMin);
        assert_eq!("branch:k=2".parse::<SchemeOp>().unwrap(), SchemeOp::LambdaK(2));
        assert_eq!("pfold:p=2".parse::<SchemeOp>().unwrap(), SchemeOp::PFold(2));
        assert_eq!("pucci:1,2".parse::<SchemeOp>().unwrap(), SchemeOp::Pucci { lam: 1.0, big: 2.0 });
        assert_eq!("sl".parse::<SchemeOp>().unwrap(), SchemeOp::SpecialLagrangian);
        assert!("Q".parse::<SchemeOp>().is_err());
        for op in [SchemeOp::LambdaMin, SchemeOp::PFold(2), SchemeOp::Pucci { lam: 1.0, big: 2.0 }] {
            assert_eq!(op.to_string().parse::<SchemeOp>().unwrap(), op);
        }
    }

    #[test]
    fn operators_are_exact_on_isotropic_quadratics() {
        let g = square(17);
        let u = GridFunction::from_fn(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let cases = [
            (SchemeOp::LambdaMin, 1.0),
            (SchemeOp::LambdaMax, 1.0),
            (SchemeOp::LambdaK(2), 1.0),
            (SchemeOp::PFold(2), 1.0),
            (SchemeOp::Pucci { lam: 1.0, big: 2.0 }, 2.0),
            (SchemeOp::SpecialLagrangian, std::f64::consts::FRAC_PI_2),
        ];
        for (op, want) in cases {
            for v in apply_operator(&op, &u, Exec::Sequential).unwrap() {
                assert_abs_diff_eq!(v, want, epsilon = 1e-9);
            }
        }
        let w = GridFunction::from_fn(&g, |x| x[0] * x[0] - x[1] * x[1]);
        for v in apply_operator(&SchemeOp::PFold(2), &w, Exec::Sequential).unwrap() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
        for v in apply_operator(&SchemeOp::LambdaMin, &w, Exec::Sequential).unwrap() {
            assert_abs_diff_eq!(v, -2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn small_solve_reproduces_quadratic() {
        let g = square(17);
        let exact = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let (u, rep) = solve_dirichlet(&SchemeOp::LambdaMin, &|_| 1.0, &exact, &g, &SolveOptions::default()).unwrap();
        assert!(rep.residual <= 1e-9);
        assert!(rep.coarse_iterations > 0);
        for k in 0..g.len() {
            assert_abs_diff_eq!(u.value(k), exact(&g.coords(k)), epsilon = 1e-8);
        }
    }

    #[test]
    fn solve_errors() {
        let g = square(17);
        let init = GridFunction::with_boundary(&g, |_| 0.0, 1.0);
        let opts = SolveOptions { max_iter: 3, ..Default::default() };
        assert!(matches!(solve_from(&SchemeOp::LambdaMin, &|_| 0.0, &init, &opts), Err(Error::NotConverged { .. })));
        let too_big = SolveOptions { dt: Some(1.0), ..Default::default() };
        assert!(matches!(solve_from(&SchemeOp::LambdaMin, &|_| 0.0, &init, &too_big), Err(Error::BadParameters(_))));
        let bad = |_: &[f64]| 0.0;
        let good = |_: &[f64]| 1.0;
        assert!(matches!(
            discrete_comparison(&SchemeOp::LambdaMin, &|_| 0.0, &good, &bad, &g, &SolveOptions::default()),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn sequential_and_parallel_solves_agree() {
        let g = square(13);
        let data = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1];
        let seq = SolveOptions { exec: Exec::Sequential, tol: 1e-7, ..Default::default() };
        let par = SolveOptions { exec: Exec::Parallel, tol: 1e-7, ..Default::default() };
        let op = SchemeOp::Pucci { lam: 1.0, big: 2.0 };
        let (a, ra) = solve_dirichlet(&op, &|_| 0.0, &data, &g, &seq).unwrap();
        let (b, rb) = solve_dirichlet(&op, &|_| 0.0, &data, &g, &par).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.history, rb.history);
    }

    #[test]
    fn update_map_is_monotone() {
        let g = square(9);
        for op in [
            SchemeOp::LambdaMin,
            SchemeOp::LambdaK(2),
            SchemeOp::PFold(2),
            SchemeOp::Pucci { lam: 1.0, big: 2.0 },
            SchemeOp::SpecialLagrangian,
        ] {
            let rep = monotonicity_probe(&op, &g, 500, 3, Exec::Parallel).unwrap();
            assert_eq!(rep.violations, 0, "{op}: {rep:?}");
        }
    }
}
