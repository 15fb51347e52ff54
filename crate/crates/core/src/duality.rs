//! Dirichlet duality `F̃ = (−Int F)ᶜ` and the sampled checks built on it.
//!
//! Every check draws its jets from a ChaCha8 stream seeded by the caller,
//! maps the verdicts through [`crate::par::map_indexed`], and reduces them
//! in index order, so reports do not depend on the execution policy.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::catalog::{
    boundary_crossing, cone_m, Arity, Classification, Fiber, FiberOracle, MonotonicityCone, Region,
    VariableFiberMap, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::jets::Jet2;
use crate::par::{map_indexed, Exec};
use crate::sampling::{normal, random_jet, seeded, SampleRng};

/// The dual fiber; its functional is `−f(−J)`.
struct Dual {
    inner: FiberOracle,
}

impl Fiber for Dual {
    fn arity(&self) -> Arity {
        self.inner.arity()
    }
    fn label(&self) -> String {
        format!("dual({})", self.inner.label())
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok(-self.inner.functional(&-j)?)
    }
}

pub fn dual(f: FiberOracle) -> FiberOracle {
    Arc::new(Dual { inner: f })
}

/// `J ∈ F̃` iff `−J ∉ Int F`; margins are those of `F` at `−J`.
pub fn dual_contains(f: &dyn Fiber, j: &Jet2, tol: f64) -> Result<Classification> {
    let c = f.classify(&-j, tol)?;
    let region = match c.region {
        Region::Interior => Region::Exterior,
        Region::Exterior => Region::Interior,
        Region::Boundary => Region::Boundary,
    };
    Ok(Classification { region, margin: c.margin, value: -c.value })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    pub checked: usize,
    pub passed: usize,
    pub excluded_boundary: usize,
    /// Smallest signed value of the defining functional of the asserted
    /// conclusion over the checked samples.
    pub worst_margin: f64,
    pub witnesses: Vec<Jet2>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.passed == self.checked
    }

    pub fn failures(&self) -> usize {
        self.checked - self.passed
    }
}

/// Per-sample verdict collected by the checks.
pub(crate) enum Verdict {
    Skipped,
    Excluded,
    Checked { pass: bool, margin: f64, witness: Vec<Jet2> },
}

pub(crate) const MAX_WITNESSES: usize = 16;

pub(crate) fn reduce(verdicts: Vec<Result<Verdict>>) -> Result<CheckReport> {
    let mut rep = CheckReport { checked: 0, passed: 0, excluded_boundary: 0, worst_margin: f64::INFINITY, witnesses: vec![] };
    for v in verdicts {
        match v? {
            Verdict::Skipped => {}
            Verdict::Excluded => rep.excluded_boundary += 1,
            Verdict::Checked { pass, margin, witness } => {
                rep.checked += 1;
                rep.worst_margin = rep.worst_margin.min(margin);
                if pass {
                    rep.passed += 1;
                } else if rep.witnesses.len() < MAX_WITNESSES {
                    rep.witnesses.extend(witness);
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub exec: Exec,
}

impl CheckOptions {
    pub fn new(n: usize, samples: usize, seed: u64) -> Self {
        Self { n, samples, seed, tol: DEFAULT_TOL, exec: Exec::Parallel }
    }
}

/// Random member of `F`: a random jet pushed onto `∂F` along `dir`, then
/// moved a random nonnegative amount further (zero a quarter of the time).
pub fn sample_member(f: &dyn Fiber, rng: &mut SampleRng, n: usize, dir: &Jet2) -> Result<Option<Jet2>> {
    let j = random_jet(rng, n);
    let extra = if rng.random_range(0..4) == 0 { 0.0 } else { normal(rng).abs() * [0.1, 1.0][rng.random_range(0..2)] };
    Ok(boundary_crossing(f, &j, dir, 1e8)?.map(|t| j.axpy(t + extra, dir)))
}

fn members(f: &dyn Fiber, rng: &mut SampleRng, n: usize, count: usize) -> Result<Vec<Option<Jet2>>> {
    let dir = Jet2::inward(n);
    (0..count).map(|_| sample_member(f, rng, n, &dir)).collect()
}

/// Double-dual agreement: `F̃̃` classifies like `F` away from `∂F`.
pub fn check_involution(f: &FiberOracle, opts: &CheckOptions) -> Result<CheckReport> {
    let jets = crate::sampling::random_jets(opts.seed, opts.n, opts.samples);
    let fd = dual(f.clone());
    let tol = opts.tol;
    reduce(map_indexed(opts.exec, jets.len(), |i| {
        let j = &jets[i];
        let c = f.classify(j, tol)?;
        if c.margin <= 3.0 * tol {
            return Ok(Verdict::Excluded);
        }
        let pass = dual_contains(fd.as_ref(), j, tol)?.region == c.region;
        Ok(Verdict::Checked { pass, margin: c.margin, witness: vec![j.clone()] })
    }))
}

/// Sampled inclusion `F ⊂ G` on random jets classified away from `∂F`.
pub fn check_inclusion(f: &FiberOracle, g: &FiberOracle, opts: &CheckOptions) -> Result<CheckReport> {
    let jets = crate::sampling::random_jets(opts.seed, opts.n, opts.samples);
    let tol = opts.tol;
    reduce(map_indexed(opts.exec, jets.len(), |i| {
        let j = &jets[i];
        let cf = f.classify(j, tol)?;
        if cf.region != Region::Interior {
            return Ok(if cf.region == Region::Boundary { Verdict::Excluded } else { Verdict::Skipped });
        }
        let cg = g.classify(j, tol)?;
        if cg.margin <= 3.0 * tol {
            return Ok(Verdict::Excluded);
        }
        Ok(Verdict::Checked { pass: cg.is_member(), margin: cg.value, witness: vec![j.clone()] })
    }))
}

/// Sampled agreement of two oracles on jets away from both boundaries.
pub fn check_agreement(f: &FiberOracle, g: &FiberOracle, opts: &CheckOptions) -> Result<CheckReport> {
    let jets = crate::sampling::random_jets(opts.seed, opts.n, opts.samples);
    let tol = opts.tol;
    reduce(map_indexed(opts.exec, jets.len(), |i| {
        let j = &jets[i];
        let (a, b) = (f.classify(j, tol)?, g.classify(j, tol)?);
        if a.margin <= 3.0 * tol || b.margin <= 3.0 * tol {
            return Ok(Verdict::Excluded);
        }
        Ok(Verdict::Checked { pass: a.region == b.region, margin: a.margin.min(b.margin), witness: vec![j.clone()] })
    }))
}

fn monotonicity_core(
    fibers: &[FiberOracle],
    m: &MonotonicityCone,
    opts: &CheckOptions,
    rng: &mut SampleRng,
) -> Result<CheckReport> {
    let n = opts.n;
    let mut pairs = Vec::with_capacity(opts.samples);
    for i in 0..opts.samples {
        let f = &fibers[i % fibers.len()];
        let j = sample_member(f.as_ref(), rng, n, &Jet2::inward(n))?;
        let k = m.sample_member(rng, n);
        pairs.push(j.map(|j| (j, k)));
    }
    let tol = opts.tol;
    reduce(map_indexed(opts.exec, pairs.len(), |i| {
        let Some((j, k)) = &pairs[i] else { return Ok(Verdict::Skipped) };
        let f = &fibers[i % fibers.len()];
        let v = f.functional(&(j + k))?;
        if v.abs() <= 3.0 * tol && v < 0.0 {
            return Ok(Verdict::Excluded);
        }
        Ok(Verdict::Checked { pass: v >= -tol, margin: v, witness: vec![j.clone(), k.clone()] })
    }))
}

/// Sampled `F + M ⊂ F`. Witnesses come in pairs `(J, K)`.
pub fn check_monotonicity(f: &FiberOracle, m: &MonotonicityCone, opts: &CheckOptions) -> Result<CheckReport> {
    let mut rng = seeded(opts.seed);
    monotonicity_core(std::slice::from_ref(f), m, opts, &mut rng)
}

/// `F_x + M ⊂ F_x` sampled over points of the fiber map's domain.
pub fn check_monotonicity_variable(
    theta: &VariableFiberMap,
    m: &MonotonicityCone,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    let mut rng = seeded(opts.seed);
    let points = 16.min(opts.samples.max(1));
    let fibers: Vec<FiberOracle> = (0..points)
        .map(|_| {
            let x: Vec<f64> = theta.domain.lo.iter().zip(&theta.domain.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
            theta.fiber(&x)
        })
        .collect::<Result<_>>()?;
    monotonicity_core(&fibers, m, opts, &mut rng)
}

/// Sampled jet addition `F + F̃ ⊂ M̃`. Refuses to run unless the
/// monotonicity check passes on the same seed.
pub fn check_jet_addition(f: &FiberOracle, m: &MonotonicityCone, opts: &CheckOptions) -> Result<CheckReport> {
    let mono = check_monotonicity(f, m, opts)?;
    if !mono.ok() {
        return Err(Error::Precondition(format!(
            "{} is not {}-monotone ({} violations)",
            f.label(),
            m,
            mono.failures()
        )));
    }
    let fd = dual(f.clone());
    let md = dual(cone_m(m));
    let mut rng = seeded(opts.seed ^ 0x5eed);
    let a = members(f.as_ref(), &mut rng, opts.n, opts.samples)?;
    let b = members(fd.as_ref(), &mut rng, opts.n, opts.samples)?;
    let tol = opts.tol;
    reduce(map_indexed(opts.exec, opts.samples, |i| {
        let (Some(j), Some(k)) = (&a[i], &b[i]) else { return Ok(Verdict::Skipped) };
        let v = md.functional(&(j + k))?;
        if v.abs() <= 3.0 * tol && v < 0.0 {
            return Ok(Verdict::Excluded);
        }
        Ok(Verdict::Checked { pass: v >= -tol, margin: v, witness: vec![j.clone(), k.clone()] })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;
    use crate::jets::SymMat;

    const TOL: f64 = 1e-9;

    #[test]
    fn dual_examples() {
        let p = cone_p();
        let j = Jet2::pure(SymMat::diag(&[-1.0, 2.0]));
        assert!(dual_contains(p.as_ref(), &j, TOL).unwrap().is_member());
        let neg = Jet2::pure(-&SymMat::identity(2));
        assert_eq!(dual_contains(p.as_ref(), &neg, TOL).unwrap().region, Region::Exterior);
        assert_eq!(dual(p).classify(&neg, TOL).unwrap().region, Region::Exterior);
    }

    #[test]
    fn closed_form_duals() {
        let opts = CheckOptions::new(3, 10_000, 1);
        let r = check_agreement(&dual(cone_q()), &cone_q_dual(), &opts).unwrap();
        assert!(r.ok() && r.checked > 5000, "{r:?}");
        let r = check_agreement(&dual(cone_p()), &cone_p_dual(), &opts).unwrap();
        assert!(r.ok() && r.checked > 5000, "{r:?}");
    }

    #[test]
    fn involution_examples() {
        let m = MonotonicityCone::new(1.0, DirectionalCone::Full, Radius::Finite(1.0)).unwrap();
        for f in [cone_p(), branch(2).unwrap(), cone_m(&m)] {
            let r = check_involution(&f, &CheckOptions::new(3, 10_000, 2)).unwrap();
            assert!(r.ok(), "{}: {r:?}", f.label());
            assert_eq!(r.checked + r.excluded_boundary, 10_000);
        }
    }

    #[test]
    fn monotonicity_examples() {
        let opts = CheckOptions::new(3, 2000, 3);
        let min = MonotonicityCone::minimal();
        assert!(check_monotonicity(&cone_p(), &min, &opts).unwrap().ok());
        let aff = variable::fiber_affine_sphere(BoxDomain::cube(3, 1.0).unwrap(), Arc::new(|x: &[f64]| 1.0 + x[0] * x[0]))
            .unwrap();
        assert!(check_monotonicity_variable(&aff, &min, &opts).unwrap().ok());
        let fail = fiber_failure_example(2.0, Which::Min).unwrap();
        let r = check_monotonicity(&fail, &min, &opts).unwrap();
        assert!(!r.ok() && r.witnesses.len() >= 2, "{r:?}");
        // Each witness pair has a nonzero gradient somewhere.
        assert!(r.witnesses.chunks(2).any(|w| w[0].p_norm() > 0.0 || w[1].p_norm() > 0.0));
    }

    #[test]
    fn jet_addition_examples() {
        let opts = CheckOptions::new(3, 3000, 4);
        let min = MonotonicityCone::minimal();
        let r = check_jet_addition(&cone_p(), &min, &opts).unwrap();
        assert!(r.ok() && r.checked > 1000, "{r:?}");
        let r = check_jet_addition(&cone_q(), &min, &opts).unwrap();
        assert!(r.ok() && r.checked > 1000, "{r:?}");
        let fail = fiber_failure_example(2.0, Which::Min).unwrap();
        assert!(matches!(check_jet_addition(&fail, &min, &opts), Err(Error::Precondition(_))));
    }

    #[test]
    fn duality_reverses_inclusion() {
        let opts = CheckOptions::new(3, 10_000, 5);
        // P ⊂ branch(2) ⊂ P̃, and Q ⊂ Q̃.
        for (f, g) in [(cone_p(), branch(2).unwrap()), (branch(2).unwrap(), cone_p_dual()), (cone_q(), cone_q_dual())] {
            assert!(check_inclusion(&f, &g, &opts).unwrap().ok());
            assert!(check_inclusion(&dual(g.clone()), &dual(f.clone()), &opts).unwrap().ok());
        }
    }

    #[test]
    fn duals_of_cones_are_cones() {
        let mut rng = seeded(6);
        for f in [cone_p(), cone_q(), cone_pfold(2).unwrap(), cone_pucci(1.0, 2.0).unwrap()] {
            let d = dual(f);
            for _ in 0..1000 {
                let j = random_jet(&mut rng, 3);
                if d.classify(&j, TOL).unwrap().region != Region::Interior {
                    continue;
                }
                let t = rng.random::<f64>() * 10.0 + 1e-3;
                assert!(d.contains(&j.scale(t), 1e-8).unwrap());
            }
        }
    }

    #[test]
    fn reports_do_not_depend_on_execution() {
        let mut seq = CheckOptions::new(3, 3000, 7);
        seq.exec = Exec::Sequential;
        let par = CheckOptions { exec: Exec::Parallel, ..seq.clone() };
        let f = fiber_failure_example(2.0, Which::Min).unwrap();
        let m = MonotonicityCone::minimal();
        assert_eq!(check_monotonicity(&f, &m, &seq).unwrap(), check_monotonicity(&f, &m, &par).unwrap());
    }
}
