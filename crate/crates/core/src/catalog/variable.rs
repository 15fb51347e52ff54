//! Variable-coefficient fibers `x ↦ Θ(x)` and the sampled fiberegularity probe.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::Serialize;

use super::monotone::{DirectionalCone, MonotonicityCone};
use super::{boundary_crossing, fiber_from_fn, Arity, FiberOracle, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::jets::{Jet2, SymMat};
use crate::par::{map_indexed, Exec};
use crate::sampling::{random_jet, seeded};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64]) -> SymMat + Send + Sync>;
pub type FiberField = Arc<dyn Fn(&[f64]) -> Result<FiberOracle> + Send + Sync>;

/// Axis-aligned box `∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), found: hi.len() });
        }
        if lo.is_empty() || lo.len() > crate::jets::MAX_DIM {
            return Err(Error::DimensionOutOfRange(lo.len()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::BadParameters("box needs lo < hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[-half, half]ⁿ`.
    pub fn cube(n: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; n], vec![half; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }
}

/// A fiber map with its declared monotonicity cone and reference jet.
#[derive(Clone)]
pub struct VariableFiberMap {
    pub domain: BoxDomain,
    pub fiber_at: FiberField,
    pub monotonicity: MonotonicityCone,
    pub reference_jet: Jet2,
    pub label: String,
}

impl std::fmt::Debug for VariableFiberMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VariableFiberMap")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("monotonicity", &self.monotonicity.to_string())
            .finish()
    }
}

impl VariableFiberMap {
    pub fn new(
        domain: BoxDomain,
        fiber_at: FiberField,
        monotonicity: MonotonicityCone,
        reference_jet: Jet2,
        label: impl Into<String>,
    ) -> Result<Self> {
        if reference_jet.n() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), found: reference_jet.n() });
        }
        if monotonicity.functional(&reference_jet)? <= DEFAULT_TOL {
            return Err(Error::ReferenceJetNotInterior);
        }
        Ok(Self { domain, fiber_at, monotonicity, reference_jet, label: label.into() })
    }

    pub fn fiber(&self, x: &[f64]) -> Result<FiberOracle> {
        if x.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch { expected: self.domain.dim(), found: x.len() });
        }
        (self.fiber_at)(x)
    }

    /// The same fiber at every point.
    pub fn constant(domain: BoxDomain, fiber: FiberOracle, monotonicity: MonotonicityCone) -> Result<Self> {
        let n = domain.dim();
        let j0 = monotonicity.interior_reference(n);
        let label = format!("const:{}", fiber.label());
        Self::new(domain, Arc::new(move |_: &[f64]| Ok(fiber.clone())), monotonicity, j0, label)
    }
}

fn det_root(ev: &[f64]) -> f64 {
    let n = ev.len() as f64;
    ev.iter().map(|x| x.max(0.0)).product::<f64>().powf(1.0 / n)
}

/// `A + M(x) ≥ 0` and `det(A + M(x)) ≥ f(x)`, via the functional
/// `min(λ_1(A+M), det(A+M)₊^{1/n} − f^{1/n})`.
pub fn fiber_perturbed_ma(domain: BoxDomain, m: MatrixField, f: ScalarField) -> Result<VariableFiberMap> {
    let n = domain.dim();
    let fiber_at: FiberField = Arc::new(move |x: &[f64]| {
        let fx = f(x);
        if fx < 0.0 || fx.is_nan() {
            return Err(Error::NegativeSource { value: fx });
        }
        let mx = m(x);
        if mx.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mx.n() });
        }
        let froot = fx.powf(1.0 / n as f64);
        Ok(fiber_from_fn(Arity::PureSecondOrder, "perturbed-ma", move |j: &Jet2| {
            let ev = (&j.a + &mx).eigenvalues();
            Ok(ev[0].min(det_root(&ev) - froot))
        }))
    });
    VariableFiberMap::new(domain, fiber_at, MonotonicityCone::minimal(), Jet2::inward(n), "var:perturbed-ma")
}

/// Phase bookkeeping for the special Lagrangian potential equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseInfo {
    /// `k` with `θ ∈ I_k = (θ_k, θ_{k−1})`, or the `k` of the special value hit.
    pub interval: usize,
    /// Set when `θ` equals a special value `θ_k = (n − 2k)π/2`, `1 ≤ k ≤ n−1`.
    pub special: Option<usize>,
}

pub fn special_phase(n: usize, k: usize) -> f64 {
    (n as f64 - 2.0 * k as f64) * FRAC_PI_2
}

/// Locates `θ` among the phase intervals; `tol` widens the special values.
pub fn phase_interval(theta: f64, n: usize, tol: f64) -> Result<PhaseInfo> {
    let top = n as f64 * FRAC_PI_2;
    if !(theta > -top && theta < top) {
        return Err(Error::PhaseOutOfRange { phase: theta, n });
    }
    for k in 1..n {
        if (theta - special_phase(n, k)).abs() <= tol {
            return Ok(PhaseInfo { interval: k, special: Some(k) });
        }
    }
    let k = (1..=n).find(|&k| theta > special_phase(n, k)).unwrap_or(n);
    Ok(PhaseInfo { interval: k, special: None })
}

/// `Σ_k arctan λ_k(A) ≥ θ(x)`.
pub fn fiber_special_lagrangian(domain: BoxDomain, theta: ScalarField) -> Result<VariableFiberMap> {
    let n = domain.dim();
    let fiber_at: FiberField = Arc::new(move |x: &[f64]| {
        let t = theta(x);
        phase_interval(t, n, 0.0)?;
        Ok(fiber_from_fn(Arity::PureSecondOrder, "special-lagrangian", move |j: &Jet2| {
            Ok(j.a.eigenvalues().iter().map(|l| l.atan()).sum::<f64>() - t)
        }))
    });
    VariableFiberMap::new(domain, fiber_at, MonotonicityCone::minimal(), Jet2::inward(n), "var:special-lagrangian")
}

/// `r ≤ 0`, `A ≥ 0` and `(−r)^{n+2} det A ≥ f(x)`, with the homogenized
/// functional `min(−r, λ_1, ((−r)₊^{n+2} det A₊)^{1/(2n+2)} − f^{1/(2n+2)})`.
pub fn fiber_affine_sphere(domain: BoxDomain, f: ScalarField) -> Result<VariableFiberMap> {
    let n = domain.dim();
    let deg = 2.0 * n as f64 + 2.0;
    let fiber_at: FiberField = Arc::new(move |x: &[f64]| {
        let fx = f(x);
        if fx < 0.0 || fx.is_nan() {
            return Err(Error::NegativeSource { value: fx });
        }
        let froot = fx.powf(1.0 / deg);
        Ok(fiber_from_fn(Arity::GradientFree, "affine-sphere", move |j: &Jet2| {
            let ev = j.a.eigenvalues();
            let mr = (-j.r).max(0.0);
            let det: f64 = ev.iter().map(|x| x.max(0.0)).product();
            let prod = (mr.powi(n as i32 + 2) * det).powf(1.0 / deg);
            Ok((-j.r).min(ev[0]).min(prod - froot))
        }))
    });
    VariableFiberMap::new(domain, fiber_at, MonotonicityCone::minimal(), Jet2::inward(n), "var:affine-sphere")
}

/// Sampled check of `g(p + q) ≥ g(p)` for `p, q ∈ D`.
pub fn check_directionality(
    g: &(dyn Fn(&[f64]) -> f64 + Send + Sync),
    cone: &DirectionalCone,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<()> {
    let mut rng = seeded(seed);
    for i in 0..samples {
        let scale = [0.1, 1.0, 10.0][i % 3];
        let p: Vec<f64> = cone.sample(&mut rng, n).iter().map(|x| scale * x).collect();
        let q: Vec<f64> = cone.sample(&mut rng, n).iter().map(|x| scale * x).collect();
        let pq: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + b).collect();
        let (gp, gpq) = (g(&p), g(&pq));
        if gpq < gp - 1e-12 * (1.0 + gp.abs()) {
            return Err(Error::DirectionalityViolation { p, q });
        }
    }
    Ok(())
}

/// `p ∈ D`, `A ≥ 0` and `g(p) det A ≥ f(x)`, monotone for `M(0, D, ∞)`.
pub fn fiber_optimal_transport(
    domain: BoxDomain,
    g: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    cone: DirectionalCone,
    f: ScalarField,
) -> Result<VariableFiberMap> {
    let n = domain.dim();
    check_directionality(g.as_ref(), &cone, n, 2000, 0x07)?;
    let m = MonotonicityCone::new(0.0, cone.clone(), super::Radius::Infinite)?;
    let j0 = m.interior_reference(n);
    let fiber_at: FiberField = Arc::new(move |x: &[f64]| {
        let fx = f(x);
        if fx < 0.0 || fx.is_nan() {
            return Err(Error::NegativeSource { value: fx });
        }
        let g = g.clone();
        let cone = cone.clone();
        Ok(fiber_from_fn(Arity::Full, "optimal-transport", move |j: &Jet2| {
            let ev = j.a.eigenvalues();
            let det: f64 = ev.iter().map(|x| x.max(0.0)).product();
            Ok(cone.functional(&j.p)?.min(ev[0]).min(g(&j.p) * det - fx))
        }))
    });
    VariableFiberMap::new(domain, fiber_at, m, j0, "var:optimal-transport")
}

#[derive(Debug, Clone)]
pub struct FiberegularityOptions {
    /// Grid points per axis.
    pub per_axis: usize,
    /// Boundary jets sampled at each grid point.
    pub jets_per_point: usize,
    /// Largest separation scanned; `None` scans the whole box.
    pub max_radius: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for FiberegularityOptions {
    fn default() -> Self {
        Self { per_axis: 16, jets_per_point: 4, max_radius: None, tol: DEFAULT_TOL, seed: 0, exec: Exec::Parallel }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FiberegularityReport {
    /// Every sampled pair closer than `delta` satisfies the inclusion.
    /// `exhaustive` is false when the scan was capped by `max_radius`.
    Delta { delta: f64, exhaustive: bool, spacing: f64 },
    /// A pair at the grid resolution violating `Θ(x) + ηJ₀ ⊂ Θ(y)`.
    Counterexample { x: Vec<f64>, y: Vec<f64>, jet: Jet2, spacing: f64 },
}

fn grid_points(domain: &BoxDomain, per_axis: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = domain.dim();
    let h: Vec<f64> = (0..n).map(|i| (domain.hi[i] - domain.lo[i]) / (per_axis - 1) as f64).collect();
    let total = per_axis.pow(n as u32);
    let pts = (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    domain.lo[i] + k as f64 * h[i]
                })
                .collect()
        })
        .collect();
    (pts, h)
}

/// Sampled probe of `Θ(x) + ηJ₀ ⊂ Θ(y)` for `|x − y| < δ`.
///
/// Jets on `∂Θ(x)` are produced by pushing random jets along `J₀`. Offsets
/// between grid points are scanned by increasing length; the first failing
/// length is the reported `δ`. A failure already at the grid spacing is a
/// counterexample at the sampling resolution.
pub fn check_fiberegularity(
    theta: &VariableFiberMap,
    m: &MonotonicityCone,
    omega: &BoxDomain,
    eta: f64,
    opts: &FiberegularityOptions,
) -> Result<FiberegularityReport> {
    let n = omega.dim();
    if n != theta.domain.dim() {
        return Err(Error::DimensionMismatch { expected: theta.domain.dim(), found: n });
    }
    let j0 = &theta.reference_jet;
    if m.functional(j0)? <= opts.tol {
        return Err(Error::ReferenceJetNotInterior);
    }
    if opts.per_axis < 2 || !(eta > 0.0) {
        return Err(Error::BadParameters("need per_axis >= 2 and eta > 0".into()));
    }
    let per = opts.per_axis;
    let (pts, h) = grid_points(omega, per);
    let spacing = h.iter().cloned().fold(f64::INFINITY, f64::min);
    let diameter = omega.diameter();
    let cap = opts.max_radius.unwrap_or(f64::INFINITY).min(diameter);

    // Integer offsets sorted by physical length.
    let span = per as i64 - 1;
    let mut offsets: Vec<(f64, Vec<i64>)> = Vec::new();
    let total = (2 * span + 1).pow(n as u32);
    for mut idx in 0..total {
        let mut off = Vec::with_capacity(n);
        for _ in 0..n {
            off.push(idx % (2 * span + 1) - span);
            idx /= 2 * span + 1;
        }
        let len = off.iter().zip(&h).map(|(o, hh)| (*o as f64 * hh).powi(2)).sum::<f64>().sqrt();
        if len > 0.0 && len <= cap * (1.0 + 1e-12) {
            offsets.push((len, off));
        }
    }
    offsets.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Boundary jets are drawn sequentially so results do not depend on scheduling.
    let mut rng = seeded(opts.seed);
    let raw: Vec<Vec<Jet2>> =
        (0..pts.len()).map(|_| (0..opts.jets_per_point).map(|_| random_jet(&mut rng, n)).collect()).collect();
    let fibers: Vec<FiberOracle> = pts.iter().map(|x| theta.fiber(x)).collect::<Result<_>>()?;

    let per_point = map_indexed(opts.exec, pts.len(), |i| -> Result<Option<(f64, usize, Jet2)>> {
        let mut jets = Vec::new();
        for j in &raw[i] {
            if let Some(t) = boundary_crossing(fibers[i].as_ref(), j, j0, 1e8)? {
                jets.push(j.axpy(t, j0).axpy(eta, j0));
            }
        }
        let coords: Vec<i64> = {
            let mut idx = i;
            (0..n)
                .map(|_| {
                    let k = idx % per;
                    idx /= per;
                    k as i64
                })
                .collect()
        };
        for (len, off) in &offsets {
            let mut target = 0usize;
            let mut stride = 1usize;
            let mut inside = true;
            for d in 0..n {
                let c = coords[d] + off[d];
                if c < 0 || c > span {
                    inside = false;
                    break;
                }
                target += c as usize * stride;
                stride *= per;
            }
            if !inside {
                continue;
            }
            for jet in &jets {
                if fibers[target].functional(jet)? < -opts.tol {
                    return Ok(Some((*len, target, jet.axpy(-eta, j0))));
                }
            }
        }
        Ok(None)
    });

    let mut worst: Option<(f64, usize, usize, Jet2)> = None;
    for (i, r) in per_point.into_iter().enumerate() {
        if let Some((len, target, jet)) = r? {
            if worst.as_ref().is_none_or(|w| len < w.0) {
                worst = Some((len, i, target, jet));
            }
        }
    }
    Ok(match worst {
        Some((len, i, target, jet)) if len <= spacing * (1.0 + 1e-9) => FiberegularityReport::Counterexample {
            x: pts[i].clone(),
            y: pts[target].clone(),
            jet,
            spacing,
        },
        Some((len, ..)) => FiberegularityReport::Delta { delta: len, exhaustive: true, spacing },
        None => FiberegularityReport::Delta { delta: cap, exhaustive: cap >= diameter, spacing },
    })
}
