//! Canonical and signed-distance operators for cone subequations, operator
//! pairs `(F, G)` and the checks behind the correspondence between
//! admissible viscosity solutions and subharmonics.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::catalog::{
    boundary_crossing, cone_p, cone_q, fiber_from_fn, whole_space, Arity, Classification, Fiber, FiberOracle,
    Region,
};
use crate::duality::{reduce, sample_member, CheckOptions, CheckReport, Verdict};
use crate::error::{Error, Result};
use crate::jets::{jet_norm, Jet2, SymMat};
use crate::par::map_indexed;
use crate::sampling::{normal, random_jet, random_psd, random_sym, seeded, SampleRng};
use crate::solver::{discrete_jet, GridFunction};

/// Bisection width used when no tolerance is supplied.
pub const CANONICAL_TOL: f64 = 1e-12;

/// Largest bracket radius tried before giving up.
pub const SEARCH_RADIUS: f64 = 1e6;

/// The canonical operator of a pure second-order cone, normalized so that
/// `F(A + tI) = F(A) + t`: the unique `t` with `A − tI ∈ ∂F`.
pub fn canonical_operator(f: &dyn Fiber, a: &SymMat, tol: f64) -> Result<f64> {
    if f.arity() != Arity::PureSecondOrder {
        return Err(Error::ArityMismatch(format!("{} is not pure second order", f.label())));
    }
    let member = |t: f64| -> Result<bool> { Ok(f.functional(&Jet2::pure(a.shift(-t)))? >= 0.0) };
    let mut radius = a.spectral_norm() + 1.0;
    let (mut lo, mut hi) = loop {
        if member(-radius)? && !member(radius)? {
            break (-radius, radius);
        }
        radius *= 2.0;
        if radius > SEARCH_RADIUS {
            return Err(Error::BracketingFailure { radius: SEARCH_RADIUS });
        }
    };
    let width = tol.max(0.0);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if member(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Unit search directions for the signed distance: `±(−1, 0, I)` first,
/// then seeded random jets with the slots the arity ignores zeroed.
pub fn distance_directions(arity: Arity, n: usize, count: usize, seed: u64) -> Vec<Jet2> {
    let e = Jet2::inward(n);
    let e = e.scale(1.0 / jet_norm(&e));
    let mut out = vec![e.clone(), -&e];
    let mut rng = seeded(seed);
    while out.len() < count.max(2) {
        let mut d = random_jet(&mut rng, n);
        match arity {
            Arity::PureSecondOrder => {
                d.r = 0.0;
                d.p = vec![0.0; n];
            }
            Arity::GradientFree => d.p = vec![0.0; n],
            Arity::Full => {}
        }
        let norm = jet_norm(&d);
        if norm > 1e-12 {
            out.push(d.scale(1.0 / norm));
        }
    }
    out.truncate(count.max(2));
    out
}

/// First `t > 0` where membership of `J + t·D` differs from that of `J`,
/// scanning a geometric ladder then bisecting.
fn first_flip(f: &dyn Fiber, j: &Jet2, d: &Jet2, inside: bool, scale: f64) -> Result<Option<f64>> {
    let is_in = |t: f64| -> Result<bool> { Ok(f.functional(&j.axpy(t, d))? >= 0.0) };
    let mut prev = 0.0;
    let mut t = 1e-9 * scale;
    while t <= SEARCH_RADIUS * scale {
        if is_in(t)? != inside {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if is_in(mid)? == inside {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        prev = t;
        t *= 1.25;
    }
    Ok(None)
}

/// Running signed-distance estimates over growing prefixes of the
/// direction list; entry `k` uses the first `k + 1` directions.
pub fn signed_distance_profile(f: &dyn Fiber, j: &Jet2, directions: usize, seed: u64, tol: f64) -> Result<Vec<f64>> {
    let c = f.classify(j, tol)?;
    let count = directions.max(2);
    if c.region == Region::Boundary {
        return Ok(vec![0.0; count]);
    }
    let inside = c.region == Region::Interior;
    let scale = 1.0 + jet_norm(j);
    let mut best = f64::INFINITY;
    let mut out = Vec::with_capacity(count);
    for d in distance_directions(f.arity(), j.n(), count, seed) {
        if let Some(t) = first_flip(f, j, &d, inside, scale)? {
            best = best.min(t);
        }
        out.push(if inside { best } else { -best });
    }
    if best.is_infinite() {
        return Err(Error::BracketingFailure { radius: SEARCH_RADIUS * scale });
    }
    Ok(out)
}

/// `±dist(J, ∂F)` in the jet norm, positive iff `J ∈ F`, estimated by
/// boundary crossings along sampled unit directions.
pub fn signed_distance(f: &dyn Fiber, j: &Jet2, directions: usize, seed: u64, tol: f64) -> Result<f64> {
    Ok(*signed_distance_profile(f, j, directions, seed, tol)?.last().expect("at least two directions"))
}

pub type JetOperator = Arc<dyn Fn(&Jet2) -> Result<f64> + Send + Sync>;

/// An operator `F` together with its domain `G`.
#[derive(Clone)]
pub struct OperatorPair {
    pub label: String,
    pub arity: Arity,
    pub op: JetOperator,
    pub domain: FiberOracle,
}

impl std::fmt::Debug for OperatorPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorPair").field("label", &self.label).field("domain", &self.domain.label()).finish()
    }
}

fn det(a: &SymMat) -> f64 {
    a.as_matrix().determinant()
}

impl OperatorPair {
    pub fn new(
        label: impl Into<String>,
        arity: Arity,
        domain: FiberOracle,
        op: impl Fn(&Jet2) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), arity, op: Arc::new(op), domain }
    }

    pub fn eval(&self, j: &Jet2) -> Result<f64> {
        (self.op)(j)
    }

    /// `F − c`.
    pub fn with_level(&self, c: f64) -> Self {
        let op = self.op.clone();
        Self {
            label: format!("{} - {c}", self.label),
            arity: self.arity,
            op: Arc::new(move |j: &Jet2| Ok(op(j)? - c)),
            domain: self.domain.clone(),
        }
    }

    /// The induced fiber `{J ∈ G : F(J) ≥ 0}`.
    pub fn induced(&self) -> FiberOracle {
        let op = self.op.clone();
        let g = self.domain.clone();
        fiber_from_fn(self.arity, format!("induced({})", self.label), move |j: &Jet2| {
            Ok(g.functional(j)?.min(op(j)?))
        })
    }

    /// `det A` on `P`.
    pub fn det_on_p() -> Self {
        Self::new("det on P", Arity::PureSecondOrder, cone_p(), |j: &Jet2| Ok(det(&j.a)))
    }

    /// `det A` on all of `S(n)`.
    pub fn det_unrestricted() -> Self {
        Self::new("det", Arity::PureSecondOrder, whole_space(), |j: &Jet2| Ok(det(&j.a)))
    }

    /// `−r·det A` on `Q = N × P`.
    pub fn neg_r_det_on_q() -> Self {
        Self::new("-r det A on Q", Arity::GradientFree, cone_q(), |j: &Jet2| Ok(-j.r * det(&j.a)))
    }

    /// `−r + det A` on `Q`, whose zero set misses `N × {0}`.
    pub fn neg_r_plus_det_on_q() -> Self {
        Self::new("-r + det A on Q", Arity::GradientFree, cone_q(), |j: &Jet2| Ok(-j.r + det(&j.a)))
    }

    /// `Σ arctan λ_k(A) − θ` on all of `S(n)`.
    pub fn special_lagrangian(theta: f64) -> Self {
        Self::new(format!("special Lagrangian, phase {theta}"), Arity::PureSecondOrder, whole_space(), move |j: &Jet2| {
            Ok(j.a.eigenvalues().iter().map(|l| l.atan()).sum::<f64>() - theta)
        })
    }

    /// The canonical operator of a cone on all of `S(n)`.
    pub fn canonical(f: FiberOracle) -> Self {
        let label = format!("canonical({})", f.label());
        Self::new(label, Arity::PureSecondOrder, whole_space(), move |j: &Jet2| {
            canonical_operator(f.as_ref(), &j.a, CANONICAL_TOL)
        })
    }

    /// `F ≡ 0` on `P`.
    pub fn zero_on_p() -> Self {
        Self::new("0 on P", Arity::PureSecondOrder, cone_p(), |_: &Jet2| Ok(0.0))
    }
}

fn slack(tol: f64, a: f64, b: f64) -> f64 {
    tol * (1.0 + a.abs() + b.abs())
}

fn restrict(arity: Arity, mut j: Jet2) -> Jet2 {
    match arity {
        Arity::PureSecondOrder => {
            j.r = 0.0;
            j.p.iter_mut().for_each(|x| *x = 0.0);
        }
        Arity::GradientFree => j.p.iter_mut().for_each(|x| *x = 0.0),
        Arity::Full => {}
    }
    j
}

/// A random jet of `G`: a raw jet if it already lies in `G`, otherwise its
/// push onto `∂G` along the inward direction plus a random extra amount.
fn domain_member(pair: &OperatorPair, rng: &mut SampleRng, n: usize) -> Result<Option<Jet2>> {
    let raw = restrict(pair.arity, random_jet(rng, n));
    if pair.domain.functional(&raw)? >= 0.0 && rng.random_range(0..2) == 0 {
        return Ok(Some(raw));
    }
    Ok(sample_member(pair.domain.as_ref(), rng, n, &Jet2::inward(n))?.map(|j| restrict(pair.arity, j)))
}

/// Sampled check of `F(r, p, A) ≤ F(r − s, p, A + P)` for `J ∈ G`,
/// `s ≥ 0`, `P ≥ 0`.
pub fn check_proper_elliptic(pair: &OperatorPair, opts: &CheckOptions) -> Result<CheckReport> {
    let n = opts.n;
    let mut rng = seeded(opts.seed);
    let cases: Vec<Option<(Jet2, f64, SymMat)>> = (0..opts.samples)
        .map(|_| -> Result<_> {
            let j = domain_member(pair, &mut rng, n)?;
            let s = if pair.arity == Arity::PureSecondOrder { 0.0 } else { normal(&mut rng).abs() };
            let scale = [0.1, 1.0][rng.random_range(0..2)];
            let p = random_psd(&mut rng, n, scale);
            Ok(j.map(|j| (j, s, p)))
        })
        .collect::<Result<_>>()?;
    let verdicts = map_indexed(opts.exec, cases.len(), |i| -> Result<Verdict> {
        let Some((j, s, p)) = &cases[i] else { return Ok(Verdict::Skipped) };
        let moved = Jet2 { r: j.r - s, p: j.p.clone(), a: &j.a + p };
        let (before, after) = (pair.eval(j)?, pair.eval(&moved)?);
        let margin = after - before;
        let pass = margin >= -slack(opts.tol, before, after);
        Ok(Verdict::Checked { pass, margin, witness: vec![j.clone(), moved] })
    });
    reduce(verdicts)
}

/// Where a compatibility probe jet came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeSource {
    Random,
    InducedBoundary,
    NegativeTimesZero,
    DomainBoundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityWitness {
    pub source: ProbeSource,
    pub jet: Jet2,
    pub region: Region,
    pub op: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub interior_checked: usize,
    pub boundary_checked: usize,
    pub failures: usize,
    pub witnesses: Vec<CompatibilityWitness>,
}

impl CompatibilityReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }
}

/// Sampled check that `Int F = {J ∈ G : F(J) > 0}` and
/// `∂F = {J ∈ F : F(J) = 0}` for the given fiber `F`.
///
/// Probe jets come from four sources: raw random jets, pushes onto the
/// boundary of `F`, the set `N × {0}` and pushes onto the boundary of `G`.
/// Interior jets need `F > 0`; boundary jets need
/// `|F| ≤ 10³·tol·(1 + ‖J‖)^{n+1}`.
pub fn check_compatibility(pair: &OperatorPair, fiber: &dyn Fiber, opts: &CheckOptions) -> Result<CompatibilityReport> {
    let n = opts.n;
    let mut rng = seeded(opts.seed);
    let inward = Jet2::inward(n);
    let mut probes: Vec<(ProbeSource, Jet2)> = Vec::new();
    for _ in 0..opts.samples {
        let raw = restrict(pair.arity, random_jet(&mut rng, n));
        probes.push((ProbeSource::Random, raw.clone()));
        if let Some(t) = boundary_crossing(fiber, &raw, &inward, 1e8)? {
            probes.push((ProbeSource::InducedBoundary, restrict(pair.arity, raw.axpy(t, &inward))));
        }
        let r = if pair.arity == Arity::PureSecondOrder { 0.0 } else { -normal(&mut rng).abs() };
        probes.push((ProbeSource::NegativeTimesZero, Jet2::gradient_free(r, SymMat::zeros(n))));
        let other = restrict(pair.arity, Jet2::pure(random_sym(&mut rng, n, 1.0)).axpy(normal(&mut rng), &Jet2::gradient_free(1.0, SymMat::zeros(n))));
        if let Some(t) = boundary_crossing(pair.domain.as_ref(), &other, &inward, 1e8)? {
            probes.push((ProbeSource::DomainBoundary, restrict(pair.arity, other.axpy(t, &inward))));
        }
    }
    let outcomes = map_indexed(opts.exec, probes.len(), |i| -> Result<Option<(Region, bool, f64)>> {
        let (_, j) = &probes[i];
        let c: Classification = fiber.classify(j, opts.tol)?;
        let value = pair.eval(j)?;
        Ok(match c.region {
            Region::Interior => Some((c.region, value > 0.0, value)),
            Region::Boundary => {
                let bound = 1e3 * opts.tol * (1.0 + jet_norm(j)).powi(n as i32 + 1);
                Some((c.region, value.abs() <= bound, value))
            }
            Region::Exterior => None,
        })
    });
    let mut rep = CompatibilityReport { interior_checked: 0, boundary_checked: 0, failures: 0, witnesses: vec![] };
    for (o, (source, jet)) in outcomes.into_iter().zip(probes) {
        let Some((region, pass, op)) = o? else { continue };
        match region {
            Region::Interior => rep.interior_checked += 1,
            _ => rep.boundary_checked += 1,
        }
        if !pass {
            rep.failures += 1;
            if rep.witnesses.len() < 16 {
                rep.witnesses.push(CompatibilityWitness { source, jet, region, op });
            }
        }
    }
    Ok(rep)
}

/// For each level `c`, finds jets of `G` on `{F = c}` by bisection along
/// `(0, 0, I)` and checks each hit has nearby jets with `F > c` and
/// `F < c`. A hit lacking either side is a witness that the level set may
/// have interior.
pub fn check_topological_tameness(pair: &OperatorPair, levels: &[f64], opts: &CheckOptions) -> Result<CheckReport> {
    let n = opts.n;
    let mut rng = seeded(opts.seed);
    let lift = Jet2::pure(SymMat::identity(n));
    let mut cases = Vec::new();
    for &c in levels {
        for _ in 0..opts.samples {
            let j = domain_member(pair, &mut rng, n)?;
            let dirs: Vec<Jet2> = (0..6).map(|_| restrict(pair.arity, random_jet(&mut rng, n))).collect();
            cases.push((c, j, dirs));
        }
    }
    let verdicts = map_indexed(opts.exec, cases.len(), |i| -> Result<Verdict> {
        let (c, j, dirs) = &cases[i];
        let Some(j) = j else { return Ok(Verdict::Skipped) };
        let g = |t: f64| -> Result<f64> { Ok(pair.eval(&j.axpy(t, &lift))? - c) };
        let Some(t) = bisect_level(&g)? else { return Ok(Verdict::Skipped) };
        let hit = j.axpy(t, &lift);
        if pair.domain.functional(&hit)? < -opts.tol {
            return Ok(Verdict::Skipped);
        }
        let delta = 1e-4 * (1.0 + jet_norm(&hit));
        let mut above = false;
        let mut below = false;
        let mut probes = vec![lift.clone(), -&lift];
        probes.extend(dirs.iter().flat_map(|d| [d.clone(), -d]));
        for d in &probes {
            let v = pair.eval(&hit.axpy(delta, d))? - c;
            above |= v > 0.0;
            below |= v < 0.0;
        }
        Ok(Verdict::Checked { pass: above && below, margin: if above && below { 1.0 } else { 0.0 }, witness: vec![hit] })
    });
    reduce(verdicts)
}

/// Zero of a function by doubling bracket then bisection; a function
/// vanishing at 0 returns 0.
fn bisect_level(g: &dyn Fn(f64) -> Result<f64>) -> Result<Option<f64>> {
    let g0 = g(0.0)?;
    if g0 == 0.0 {
        return Ok(Some(0.0));
    }
    let mut step = 1e-3;
    let bracket = loop {
        if step > SEARCH_RADIUS {
            return Ok(None);
        }
        if g(step)?.signum() != g0.signum() {
            break (0.0, step);
        }
        if g(-step)?.signum() != g0.signum() {
            break (-step, 0.0);
        }
        step *= 2.0;
    };
    let (mut lo, mut hi) = bracket;
    let glo = g(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid)?;
        if v == 0.0 {
            return Ok(Some(mid));
        }
        if v.signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Sampled check of `F(J + tJ₀) > F(J)` for `J` in the induced fiber and
/// `t ∈ (0, 1]`.
pub fn check_strict_m_monotone(pair: &OperatorPair, m: &dyn Fiber, j0: &Jet2, opts: &CheckOptions) -> Result<CheckReport> {
    if m.functional(j0)? <= opts.tol {
        return Err(Error::ReferenceJetNotInterior);
    }
    let n = opts.n;
    let induced = pair.induced();
    let mut rng = seeded(opts.seed);
    let cases: Vec<Option<(Jet2, f64)>> = (0..opts.samples)
        .map(|_| -> Result<_> {
            let j = sample_member(induced.as_ref(), &mut rng, n, &Jet2::inward(n))?.map(|j| restrict(pair.arity, j));
            let t = 1e-2 + (1.0 - 1e-2) * rng.random::<f64>();
            Ok(j.map(|j| (j, t)))
        })
        .collect::<Result<_>>()?;
    let verdicts = map_indexed(opts.exec, cases.len(), |i| -> Result<Verdict> {
        let Some((j, t)) = &cases[i] else { return Ok(Verdict::Skipped) };
        let moved = j.axpy(*t, j0);
        let margin = pair.eval(&moved)? - pair.eval(j)?;
        Ok(Verdict::Checked { pass: margin > 0.0, margin, witness: vec![j.clone(), moved] })
    });
    reduce(verdicts)
}

/// Discrete admissible subsolution test at an interior node: the discrete
/// jet lies in `G` and `F ≥ 0` there.
pub fn admissible_subsolution_test(pair: &OperatorPair, u: &GridFunction, node: usize, tol: f64) -> Result<bool> {
    let j = restrict(pair.arity, discrete_jet(u, node)?).with_value(pair.arity, u.value(node));
    Ok(pair.domain.functional(&j)? >= -tol && pair.eval(&j)? >= -tol)
}

/// Discrete admissible supersolution test: the discrete jet lies outside
/// `Int G` or has `F ≤ 0`.
pub fn admissible_supersolution_test(pair: &OperatorPair, u: &GridFunction, node: usize, tol: f64) -> Result<bool> {
    let j = restrict(pair.arity, discrete_jet(u, node)?).with_value(pair.arity, u.value(node));
    Ok(pair.domain.functional(&j)? <= tol || pair.eval(&j)? <= tol)
}

trait WithValue {
    fn with_value(self, arity: Arity, r: f64) -> Self;
}

impl WithValue for Jet2 {
    fn with_value(mut self, arity: Arity, r: f64) -> Self {
        if arity != Arity::PureSecondOrder {
            self.r = r;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{cone_p_dual, cone_pfold, cone_pucci, Arity};
    use crate::sampling::random_matrices;
    use crate::solver::Grid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn canonical_examples() {
        let a = SymMat::diag(&[2.0, 5.0]);
        assert_abs_diff_eq!(canonical_operator(cone_p().as_ref(), &a, CANONICAL_TOL).unwrap(), 2.0, epsilon = 1e-10);
        let f = cone_pfold(2).unwrap();
        let b = SymMat::diag(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(canonical_operator(f.as_ref(), &b, CANONICAL_TOL).unwrap(), 1.5, epsilon = 1e-10);
        for f in [cone_p(), cone_p_dual(), cone_pfold(1).unwrap(), cone_pucci(1.0, 2.0).unwrap()] {
            for t in [-3.0, 0.0, 0.25, 7.0] {
                let v = canonical_operator(f.as_ref(), &SymMat::diag(&[t; 3]), CANONICAL_TOL).unwrap();
                assert_abs_diff_eq!(v, t, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn canonical_errors() {
        let a = SymMat::identity(2);
        assert!(matches!(canonical_operator(cone_q().as_ref(), &a, 1e-12), Err(Error::ArityMismatch(_))));
        let empty = fiber_from_fn(Arity::PureSecondOrder, "empty", |_: &Jet2| Ok(-1.0));
        assert!(matches!(canonical_operator(empty.as_ref(), &a, 1e-12), Err(Error::BracketingFailure { .. })));
        assert!(matches!(canonical_operator(whole_space().as_ref(), &a, 1e-12), Err(Error::BracketingFailure { .. })));
    }

    #[test]
    fn canonical_of_p_is_lambda_min() {
        for a in random_matrices(7, 3, 200, 2.0) {
            let v = canonical_operator(cone_p().as_ref(), &a, CANONICAL_TOL).unwrap();
            assert_abs_diff_eq!(v, a.lambda_min(), epsilon = 1e-9);
        }
    }

    #[test]
    fn signed_distance_examples() {
        let p = cone_p();
        let a = Jet2::pure(SymMat::diag(&[-3.0, 1.0]));
        let profile = signed_distance_profile(p.as_ref(), &a, 32, 1, 1e-12).unwrap();
        assert!(profile.windows(2).all(|w| w[1].abs() <= w[0].abs()));
        assert_abs_diff_eq!(*profile.last().unwrap(), -3.0, epsilon = 1e-9);
        let id = Jet2::pure(SymMat::identity(3));
        assert_abs_diff_eq!(signed_distance(p.as_ref(), &id, 16, 1, 1e-12).unwrap(), 1.0, epsilon = 1e-9);
        let edge = Jet2::pure(SymMat::diag(&[0.0, 2.0]));
        assert_eq!(signed_distance(p.as_ref(), &edge, 16, 1, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn proper_ellipticity() {
        let opts = CheckOptions::new(2, 400, 11);
        assert!(check_proper_elliptic(&OperatorPair::det_on_p(), &opts).unwrap().ok());
        assert!(check_proper_elliptic(&OperatorPair::neg_r_det_on_q(), &opts).unwrap().ok());
        let rep = check_proper_elliptic(&OperatorPair::det_unrestricted(), &opts).unwrap();
        assert!(!rep.ok());
        // The hand witness: diag(−1, −1) moved by diag(1, 0).
        let j = Jet2::pure(SymMat::diag(&[-1.0, -1.0]));
        let k = Jet2::pure(SymMat::diag(&[0.0, -1.0]));
        let pair = OperatorPair::det_unrestricted();
        assert!(pair.eval(&j).unwrap() > pair.eval(&k).unwrap());
    }

    #[test]
    fn compatibility_controls() {
        let opts = CheckOptions::new(2, 300, 5);
        let good = OperatorPair::neg_r_det_on_q();
        assert!(check_compatibility(&good, good.induced().as_ref(), &opts).unwrap().ok());
        let bad = OperatorPair::neg_r_plus_det_on_q();
        let rep = check_compatibility(&bad, bad.induced().as_ref(), &opts).unwrap();
        assert!(!rep.ok());
        assert!(rep.witnesses.iter().any(|w| w.source == ProbeSource::NegativeTimesZero && w.jet.r < 0.0));
        let canon = OperatorPair::canonical(cone_p());
        assert!(check_compatibility(&canon, cone_p().as_ref(), &opts).unwrap().ok());
    }

    #[test]
    fn tameness_and_strict_monotonicity() {
        let opts = CheckOptions::new(2, 100, 3);
        assert!(check_topological_tameness(&OperatorPair::det_on_p(), &[0.0, 1.0], &opts).unwrap().ok());
        let zero = check_topological_tameness(&OperatorPair::zero_on_p(), &[0.0], &opts).unwrap();
        assert!(zero.checked > 0 && zero.passed == 0);

        let j0 = Jet2::pure(SymMat::identity(2));
        assert!(check_strict_m_monotone(&OperatorPair::det_on_p(), cone_p().as_ref(), &j0, &opts).unwrap().ok());
        let sl = OperatorPair::special_lagrangian(0.5);
        assert!(check_strict_m_monotone(&sl, cone_p().as_ref(), &j0, &opts).unwrap().ok());
        let flat = Jet2::pure(SymMat::diag(&[1.0, 0.0]));
        assert!(matches!(
            check_strict_m_monotone(&sl, cone_p().as_ref(), &flat, &opts),
            Err(Error::ReferenceJetNotInterior)
        ));
    }

    #[test]
    fn admissible_tests_on_grids() {
        let g = Grid::cube(2, -1.0, 1.0, 9).unwrap();
        let det1 = OperatorPair::det_on_p().with_level(1.0);
        let bowl = GridFunction::from_fn(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let cap = bowl.map(|v| -v);
        for k in g.interior_nodes() {
            assert!(admissible_subsolution_test(&det1, &bowl, k, 1e-9).unwrap());
            assert!(!admissible_subsolution_test(&det1, &cap, k, 1e-9).unwrap());
            assert!(admissible_supersolution_test(&det1, &bowl, k, 1e-9).unwrap());
        }
        let affine = GridFunction::from_fn(&g, |x| 2.0 + x[0]);
        let q = OperatorPair::neg_r_det_on_q();
        let k = g.interior_nodes()[0];
        assert!(!admissible_subsolution_test(&q, &affine, k, 1e-9).unwrap());
        assert!(matches!(admissible_subsolution_test(&q, &affine, 0, 1e-9), Err(Error::BoundaryNode(0))));
    }
}
