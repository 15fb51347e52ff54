//! Grid-scale subharmonicity checks and the experiments built on them.

use std::sync::Arc;

use serde::Serialize;

use super::grid::{discrete_jet, directional_second_difference, Grid, GridFunction};
use super::scheme::{interior_ordering, OrderingVerdict};
use crate::catalog::{
    boundary_crossing, BoxDomain, DirectionalCone, Fiber, FiberOracle, MonotonicityCone, Radius, Region,
    VariableFiberMap,
};
use crate::duality::dual;
use crate::error::{Error, Result};
use crate::jets::{Jet2, SymMat};
use crate::par::{map_indexed, map_slice, Exec};

/// The fiber a grid function is tested against at each node.
#[derive(Clone)]
pub enum NodeFiber {
    Constant(FiberOracle),
    Variable(VariableFiberMap),
}

impl NodeFiber {
    pub fn at(&self, x: &[f64]) -> Result<FiberOracle> {
        match self {
            NodeFiber::Constant(f) => Ok(f.clone()),
            NodeFiber::Variable(v) => v.fiber(x),
        }
    }

    /// The pointwise Dirichlet dual.
    pub fn dual(&self) -> NodeFiber {
        match self {
            NodeFiber::Constant(f) => NodeFiber::Constant(dual(f.clone())),
            NodeFiber::Variable(v) => {
                let inner = v.fiber_at.clone();
                let mut d = v.clone();
                d.fiber_at = Arc::new(move |x: &[f64]| Ok(dual(inner(x)?)));
                d.label = format!("dual({})", v.label);
                NodeFiber::Variable(d)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            NodeFiber::Constant(f) => f.label(),
            NodeFiber::Variable(v) => v.label.clone(),
        }
    }
}

impl From<FiberOracle> for NodeFiber {
    fn from(f: FiberOracle) -> Self {
        NodeFiber::Constant(f)
    }
}

impl From<VariableFiberMap> for NodeFiber {
    fn from(v: VariableFiberMap) -> Self {
        NodeFiber::Variable(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeVerdict {
    pub node: usize,
    pub region: Region,
    pub value: f64,
}

/// An ε-strict bad test jet: `J ∉ F_x` with `u − Q_J ≤ −ε|y − x|²` near `x`
/// and equality at `x`. `stencil_excess` is the largest observed
/// `u(y) − Q_J(y) + ε|y − x|²` over stencil neighbours; it is `≤ 0` (up to
/// discretization error) when the witness is genuine.
#[derive(Debug, Clone, Serialize)]
pub struct BadTestJet {
    pub node: usize,
    pub x: Vec<f64>,
    pub jet: Jet2,
    pub epsilon: f64,
    pub stencil_excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubharmonicReport {
    pub label: String,
    pub interior: usize,
    pub boundary: usize,
    pub exterior: usize,
    /// Smallest value of the defining functional over all nodes.
    pub worst_value: f64,
    pub worst_node: Option<usize>,
    pub nodes: Vec<NodeVerdict>,
    pub witness: Option<BadTestJet>,
}

impl SubharmonicReport {
    pub fn passed(&self) -> bool {
        self.exterior == 0
    }
}

fn quadratic(j: &Jet2, x0: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = y.iter().zip(x0).map(|(a, b)| a - b).collect();
    j.r + j.p.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() + 0.5 * j.a.quadratic_form(&d)
}

fn bad_test_jet(u: &GridFunction, node: usize, jet: &Jet2, fiber: &dyn Fiber, tol: f64) -> Result<BadTestJet> {
    let g = u.grid();
    let n = g.dim();
    let x = g.coords(node);
    // Raise the Hessian by 2ε·I while staying outside the fiber.
    let lift = Jet2::pure(SymMat::identity(n));
    let room = boundary_crossing(fiber, jet, &lift, 1e8)?.unwrap_or(1.0).max(0.0);
    let epsilon = (0.25 * room).max(tol);
    let witness = jet.axpy(2.0 * epsilon, &lift);
    let mut excess = f64::NEG_INFINITY;
    for (a, b) in g.neighbours(node)? {
        for y in [a, b] {
            let yc = g.coords(y);
            let d2: f64 = yc.iter().zip(&x).map(|(p, q)| (p - q) * (p - q)).sum();
            excess = excess.max(u.value(y) - quadratic(&witness, &x, &yc) + epsilon * d2);
        }
    }
    Ok(BadTestJet { node, x, jet: witness, epsilon, stencil_excess: excess })
}

/// Classifies the discrete jet of `u` at every interior node.
pub fn check_subharmonic(u: &GridFunction, fiber: &NodeFiber, tol: f64, exec: Exec) -> Result<SubharmonicReport> {
    let g = u.grid();
    let nodes = g.interior_nodes();
    let verdicts = map_indexed(exec, nodes.len(), |i| -> Result<(NodeVerdict, Jet2, FiberOracle)> {
        let k = nodes[i];
        let jet = discrete_jet(u, k)?;
        let f = fiber.at(&g.coords(k))?;
        let c = f.classify(&jet, tol)?;
        Ok((NodeVerdict { node: k, region: c.region, value: c.value }, jet, f))
    });
    let mut rep = SubharmonicReport {
        label: fiber.label(),
        interior: 0,
        boundary: 0,
        exterior: 0,
        worst_value: f64::INFINITY,
        worst_node: None,
        nodes: Vec::with_capacity(nodes.len()),
        witness: None,
    };
    let mut worst: Option<(Jet2, FiberOracle)> = None;
    for v in verdicts {
        let (nv, jet, f) = v?;
        match nv.region {
            Region::Interior => rep.interior += 1,
            Region::Boundary => rep.boundary += 1,
            Region::Exterior => rep.exterior += 1,
        }
        if nv.value < rep.worst_value {
            rep.worst_value = nv.value;
            rep.worst_node = Some(nv.node);
            worst = Some((jet, f));
        }
        rep.nodes.push(nv);
    }
    if rep.exterior > 0 {
        if let (Some(node), Some((jet, f))) = (rep.worst_node, worst) {
            rep.witness = Some(bad_test_jet(u, node, &jet, f.as_ref(), tol)?);
        }
    }
    Ok(rep)
}

/// `w` is `F`-superharmonic iff `−w` is `F̃`-subharmonic.
pub fn check_superharmonic(w: &GridFunction, fiber: &NodeFiber, tol: f64, exec: Exec) -> Result<SubharmonicReport> {
    check_subharmonic(&w.map(|v| -v), &fiber.dual(), tol, exec)
}

/// Pointwise maximum of a family of grid functions lying below `g` on the
/// boundary layer.
pub fn perron_envelope(family: &[GridFunction], g: &dyn Fn(&[f64]) -> f64, tol: f64) -> Result<GridFunction> {
    let first = family.first().ok_or(Error::EmptyFamily)?;
    let grid = first.grid();
    for u in family {
        if u.grid() != grid {
            return Err(Error::BadParameters("family members live on different grids".into()));
        }
        for (node, v) in u.boundary_data() {
            let excess = v - g(&grid.coords(node));
            if excess > tol {
                return Err(Error::BoundaryViolation { node, excess });
            }
        }
    }
    let mut out = first.clone();
    for u in &family[1..] {
        out = out.zip_with(u, f64::max)?;
    }
    Ok(out)
}

/// `u^ε(x) = max_y [u(y) − |y − x|²/(2ε)]` over all grid nodes.
pub fn sup_convolution(u: &GridFunction, eps: f64, exec: Exec) -> Result<GridFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::BadParameters(format!("eps must be positive, got {eps}")));
    }
    let g = u.grid();
    let coords: Vec<Vec<f64>> = (0..g.len()).map(|k| g.coords(k)).collect();
    let values = map_indexed(exec, g.len(), |i| {
        let x = &coords[i];
        coords
            .iter()
            .zip(u.values())
            .map(|(y, &v)| v - y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * eps))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    GridFunction::new(g.clone(), values)
}

/// Smallest second difference of `u + |x|²/(2ε)` over interior nodes and
/// stencil directions; `≥ 0` exactly when `u` is discretely
/// `(1/ε)`-quasiconvex.
pub fn quasiconvexity_defect(u: &GridFunction, eps: f64) -> Result<f64> {
    let g = u.grid();
    let lifted = GridFunction::new(
        g.clone(),
        (0..g.len()).map(|k| u.value(k) + g.coords(k).iter().map(|x| x * x).sum::<f64>() / (2.0 * eps)).collect(),
    )?;
    let mut worst = f64::INFINITY;
    for k in g.interior_nodes() {
        for d in g.dirs() {
            worst = worst.min(directional_second_difference(&lifted, k, d)?);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub sub: SubharmonicReport,
    pub sup: SubharmonicReport,
    pub ordering: OrderingVerdict,
}

/// Checks `u ≤ w` inside given `u ≤ w` on the boundary layer, with `u`
/// subharmonic and `w` superharmonic for the fiber.
pub fn comparison_experiment(
    fiber: &NodeFiber,
    u_sub: &GridFunction,
    w_super: &GridFunction,
    tol: f64,
    exec: Exec,
) -> Result<ComparisonVerdict> {
    let sub = check_subharmonic(u_sub, fiber, tol, exec)?;
    if !sub.passed() {
        return Err(Error::HypothesisViolation(format!("u fails the subharmonic check at {} nodes", sub.exterior)));
    }
    let sup = check_superharmonic(w_super, fiber, tol, exec)?;
    if !sup.passed() {
        return Err(Error::HypothesisViolation(format!("w fails the superharmonic check at {} nodes", sup.exterior)));
    }
    for (k, v) in u_sub.boundary_data() {
        if v > w_super.value(k) + tol {
            return Err(Error::HypothesisViolation(format!("boundary ordering fails at node {k}")));
        }
    }
    let ordering = interior_ordering(u_sub, w_super, tol)?;
    Ok(ComparisonVerdict { sub, sup, ordering })
}

/// `ψ(x) = ½|x − x₀|² − c`, strictly `M`-subharmonic on a box.
#[derive(Debug, Clone, Serialize)]
pub struct StrictApproximator {
    pub x0: Vec<f64>,
    pub c: f64,
}

impl StrictApproximator {
    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() - self.c
    }

    pub fn jet(&self, x: &[f64]) -> Jet2 {
        let p: Vec<f64> = x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
        Jet2 { r: self.value(x), p, a: SymMat::identity(x.len()) }
    }

    pub fn grid_function(&self, grid: &Grid) -> GridFunction {
        GridFunction::from_fn(grid, |x| self.value(x))
    }

    /// Smallest `M`-functional of the jet of `ψ` over the grid nodes.
    pub fn margin(&self, m: &MonotonicityCone, grid: &Grid) -> Result<f64> {
        (0..grid.len()).try_fold(f64::INFINITY, |acc, k| Ok(acc.min(m.functional(&self.jet(&grid.coords(k)))?)))
    }
}

fn corners(domain: &BoxDomain) -> Vec<Vec<f64>> {
    let n = domain.dim();
    (0..1usize << n)
        .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { domain.hi[i] } else { domain.lo[i] }).collect())
        .collect()
}

/// Searches for a quadratic strict approximator for `M(γ, D, R)` on `domain`.
///
/// The vertex is moved from the box centre against the interior direction
/// of `D` until every corner `x` has `x − x₀ ∈ Int D` and, for finite `R`,
/// `|x − x₀| < R`; both conditions are convex so corners suffice. `None`
/// means no vertex on that ray works (for finite `R` this is the case when
/// the box does not fit in a translate of `D ∩ B_R`).
pub fn strict_approximator(m: &MonotonicityCone, domain: &BoxDomain) -> Result<Option<StrictApproximator>> {
    let n = domain.dim();
    let mut d = m.cone.interior_direction(n);
    let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if dn > 0.0 {
        d.iter_mut().for_each(|x| *x /= dn);
    }
    let centre = domain.center();
    let pts = corners(domain);
    let diam = domain.diameter();
    let radius = match m.radius {
        Radius::Finite(r) => r,
        Radius::Infinite => f64::INFINITY,
    };
    let full = matches!(m.cone, DirectionalCone::Full);
    let steps = if full { 1 } else { 400 };
    for s in 0..=steps {
        let shift = if full { 0.0 } else { 4.0 * diam * s as f64 / steps as f64 };
        let x0: Vec<f64> = centre.iter().zip(&d).map(|(c, e)| c - shift * e).collect();
        let mut ok = true;
        let mut worst_r: f64 = 0.0;
        for x in &pts {
            let v: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
            let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if (!full && m.cone.functional(&v)? <= 0.0) || len >= radius {
                ok = false;
                break;
            }
            worst_r = worst_r.max(0.5 * len * len + m.gamma * len);
        }
        if ok {
            return Ok(Some(StrictApproximator { x0, c: worst_r + 1.0 }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct ZmpReport {
    pub drawn: usize,
    pub accepted: usize,
    /// Largest interior value of an accepted sample (boundary max is 0).
    pub worst_interior: f64,
    /// Accepted samples with an interior maximum above `tol`.
    pub positive_maxima: usize,
    /// Accepted samples whose interior maximum exceeds `tol` plus the
    /// detection bound of the membership lattice.
    pub violations: usize,
    /// Spacing of the exact-jet lattice.
    pub lattice_spacing: f64,
    pub approximator: Option<StrictApproximator>,
}

/// Points per grid cell, along each axis, at which samples are also tested
/// with their exact jets.
pub const ZMP_REFINE: usize = 4;

/// Draws random quadratics `z`, normalized to boundary-layer maximum 0, and
/// keeps those in `M̃` both at the grid level (discrete jets at interior
/// nodes) and exactly (analytic jets on a lattice `ZMP_REFINE` times finer
/// covering the closed box). Records interior maxima.
///
/// A lattice of spacing `s` cannot see a region where `−J ∈ Int M` that fits
/// inside one cell. For `R = ∞` a positive interior maximum `v` of a concave
/// sample is always detected once `v > ‖A‖(γ√n·s + n·s²/2)`, so only maxima
/// beyond that bound count as violations.
pub fn zmp_experiment(m: &MonotonicityCone, grid: &Grid, samples: usize, seed: u64, tol: f64, exec: Exec) -> Result<ZmpReport> {
    use crate::sampling::{normal_vec, random_sym, seeded};
    let n = grid.dim();
    let approximator = strict_approximator(m, &grid.domain())?;
    let dual_fiber = dual(crate::catalog::cone_m(m));
    let mtilde = NodeFiber::Constant(dual_fiber.clone());
    let fine = Grid::with_stencil(&grid.domain(), grid.h() / ZMP_REFINE as f64, vec![{
        let mut e = vec![0; n];
        e[0] = 1;
        e
    }])?;
    let cloud: Vec<Vec<f64>> = (0..fine.len())
        .map(|k| fine.coords(k))
        .collect();
    let s = fine.h();
    let mut rng = seeded(seed);
    let draws: Vec<(Vec<f64>, SymMat)> = (0..samples).map(|_| (normal_vec(&mut rng, n), random_sym(&mut rng, n, 1.0))).collect();
    let mut rep = ZmpReport {
        drawn: samples,
        accepted: 0,
        worst_interior: f64::NEG_INFINITY,
        positive_maxima: 0,
        violations: 0,
        lattice_spacing: s,
        approximator,
    };
    for (b, a) in draws {
        let quad = |x: &[f64]| b.iter().zip(x).map(|(p, y)| p * y).sum::<f64>() + 0.5 * a.quadratic_form(x);
        let q = GridFunction::from_fn(grid, quad);
        let top = q.max_boundary();
        let z = q.map(|v| v - top);
        if !check_subharmonic(&z, &mtilde, tol, exec)?.passed() {
            continue;
        }
        let exact = map_slice(exec, &cloud, |x| -> Result<bool> {
            let grad: Vec<f64> =
                (0..n).map(|i| b[i] + (0..n).map(|j| a.get(i, j) * x[j]).sum::<f64>()).collect();
            let jet = Jet2 { r: quad(x) - top, p: grad, a: a.clone() };
            Ok(dual_fiber.classify(&jet, tol)?.region != Region::Exterior)
        });
        if !exact.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().all(|ok| ok) {
            continue;
        }
        rep.accepted += 1;
        let inner = z.max_interior();
        rep.worst_interior = rep.worst_interior.max(inner);
        let bound = a.spectral_norm() * (m.gamma * (n as f64).sqrt() * s + 0.5 * n as f64 * s * s);
        rep.positive_maxima += (inner > tol) as usize;
        rep.violations += (inner > tol + bound) as usize;
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslationReport {
    /// Every offset of length `≤ delta` passed; 0 when the shortest failed.
    pub delta: f64,
    /// Largest offset length scanned.
    pub scanned: f64,
    pub offsets_checked: usize,
    pub first_failure: Option<Vec<i64>>,
    pub psi_margin: f64,
}

/// Finds the largest `δ` such that every grid translate `τ_y u`, `|y| < δ`,
/// perturbed by `θψ` passes the subharmonic check for `Θ` on the shrunken
/// grid. Offsets are integer node shifts up to `max_len` in length.
pub fn uniform_translation_probe(
    u: &GridFunction,
    theta_map: &VariableFiberMap,
    psi: &StrictApproximator,
    theta: f64,
    max_len: f64,
    tol: f64,
    exec: Exec,
) -> Result<TranslationReport> {
    let g = u.grid();
    let n = g.dim();
    let psi_margin = psi.margin(&theta_map.monotonicity, g)?;
    if psi_margin <= tol {
        return Err(Error::HypothesisViolation(format!("approximator margin {psi_margin:e} is not positive")));
    }
    let field = NodeFiber::Variable(theta_map.clone());
    let base = check_subharmonic(u, &field, tol, exec)?;
    if !base.passed() {
        return Err(Error::HypothesisViolation(format!("u fails the subharmonic check at {} nodes", base.exterior)));
    }
    let h = g.h();
    let span = (max_len / h).floor() as i64;
    let mut offsets: Vec<(f64, Vec<i64>)> = Vec::new();
    let total = (2 * span + 1).pow(n as u32);
    for mut idx in 0..total {
        let off: Vec<i64> = (0..n)
            .map(|_| {
                let o = idx % (2 * span + 1) - span;
                idx /= 2 * span + 1;
                o
            })
            .collect();
        let len = h * off.iter().map(|o| (o * o) as f64).sum::<f64>().sqrt();
        if len > 0.0 && len <= max_len * (1.0 + 1e-12) {
            offsets.push((len, off));
        }
    }
    offsets.sort_by(|a, b| a.0.total_cmp(&b.0));

    let interior = g.interior_nodes();
    let jets: Vec<Option<Jet2>> = (0..g.len()).map(|k| if g.is_interior(k) { discrete_jet(u, k).ok() } else { None }).collect();
    let fibers: Vec<FiberOracle> = interior.iter().map(|&k| theta_map.fiber(&g.coords(k))).collect::<Result<_>>()?;
    let mut checked = 0;
    // Offsets of equal length form one group; δ only grows past whole groups.
    let mut passed_len = 0.0;
    let mut group_len = 0.0;
    for (len, off) in &offsets {
        if *len > group_len * (1.0 + 1e-12) {
            passed_len = group_len;
            group_len = *len;
        }
        // Node x takes the jet of u at x − y, which must itself be interior.
        let fails = map_indexed(exec, interior.len(), |i| -> Result<bool> {
            let k = interior[i];
            let Some(src) = g.offset(k, off, -1) else { return Ok(false) };
            let Some(j) = &jets[src] else { return Ok(false) };
            let x = g.coords(k);
            let moved = j.axpy(theta, &psi.jet(&x));
            Ok(fibers[i].functional(&moved)? < -tol)
        });
        checked += 1;
        for f in fails {
            if f? {
                return Ok(TranslationReport {
                    delta: passed_len,
                    scanned: *len,
                    offsets_checked: checked,
                    first_failure: Some(off.clone()),
                    psi_margin,
                });
            }
        }
    }
    let scanned = offsets.last().map_or(0.0, |o| o.0);
    Ok(TranslationReport { delta: scanned, scanned, offsets_checked: checked, first_failure: None, psi_margin })
}
