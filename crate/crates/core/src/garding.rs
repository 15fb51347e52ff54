//! Gårding hyperbolic polynomials on `S(n)`.
//!
//! Gårding eigenvalues are recovered numerically for every operator: the
//! restriction `q(s) = F(A + sI)` is sampled at `m + 1` Chebyshev nodes on a
//! window scaled by `1 + 2‖A‖`, its Chebyshev coefficients give a colleague
//! matrix whose eigenvalues are the roots, and each simple real root is then
//! polished by bisection on `q` itself.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::catalog::{cone_pucci, lagrangian_mu, Arity, Classification, Fiber, FiberOracle};
use crate::duality::{reduce, CheckReport, Verdict};
use crate::error::{Error, Result};
use crate::jets::{Jet2, SymMat, MAX_DIM};
use crate::par::{map_indexed, Exec};
use crate::sampling::{random_psd, random_sym, seeded};

/// Default tolerance on the imaginary residue of the roots.
pub const ROOT_TOL: f64 = 1e-7;

pub type EvalFn = Arc<dyn Fn(&SymMat) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Det,
    PFold(usize),
    DeltaElliptic(f64),
    LagrangianMa,
    Pucci { lam: f64, big: f64, vertices: Vec<Vec<f64>> },
    SigmaK(usize),
    Custom(EvalFn),
}

/// Record of a passed hyperbolicity verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
}

/// An `I`-hyperbolic polynomial of degree `m` on `S(n)`.
#[derive(Clone)]
pub struct GardingOperator {
    n: usize,
    m: usize,
    label: String,
    kind: Kind,
    certificate: Option<Certificate>,
}

impl fmt::Debug for GardingOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GardingOperator")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("certificate", &self.certificate)
            .finish()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        Err(Error::DimensionOutOfRange(n))
    } else {
        Ok(())
    }
}

fn check_index(k: usize, max: usize) -> Result<()> {
    if k == 0 || k > max {
        Err(Error::IndexOutOfRange { index: k, max })
    } else {
        Ok(())
    }
}

const CONSTRUCTION_SAMPLES: usize = 16;
const CONSTRUCTION_SEED: u64 = 0x6a7d;

impl GardingOperator {
    fn built_in(n: usize, m: usize, label: String, kind: Kind) -> Result<Self> {
        let mut op = Self { n, m, label, kind, certificate: None };
        let e = op.eval(&SymMat::identity(n))?;
        if !(e > 0.0) {
            return Err(Error::NonPositiveAtIdentity(e));
        }
        let report = op.certify(CONSTRUCTION_SAMPLES, CONSTRUCTION_SEED, ROOT_TOL)?;
        if !report.all_real() {
            return Err(Error::NonRealRoots { residue: report.worst_residue });
        }
        Ok(op)
    }

    pub fn det(n: usize) -> Result<Self> {
        check_dim(n)?;
        Self::built_in(n, n, "det".into(), Kind::Det)
    }

    /// `∏_{i_1<⋯<i_p} (λ_{i_1} + ⋯ + λ_{i_p})`, degree `C(n, p)`.
    pub fn pfold(n: usize, p: usize) -> Result<Self> {
        check_dim(n)?;
        check_index(p, n)?;
        Self::built_in(n, binomial(n, p), format!("pfold:p={p}"), Kind::PFold(p))
    }

    /// `∏_j (λ_j + δ tr A)`.
    pub fn delta_elliptic(n: usize, delta: f64) -> Result<Self> {
        check_dim(n)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::BadParameters(format!("delta must be positive, got {delta}")));
        }
        Self::built_in(n, n, format!("delta-elliptic:{delta}"), Kind::DeltaElliptic(delta))
    }

    /// `∏ (½ tr A ± μ_1 ± ⋯ ± μ_k)` on `S(2k)`, degree `2^k`.
    pub fn lagrangian_ma(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if dim % 2 != 0 {
            return Err(Error::OddDimension(dim));
        }
        Self::built_in(dim, 1 << (dim / 2), "lagrangian-ma".into(), Kind::LagrangianMa)
    }

    /// `σ_k(λ(A))`, degree `k`.
    pub fn sigma_k(n: usize, k: usize) -> Result<Self> {
        check_dim(n)?;
        check_index(k, n)?;
        Self::built_in(n, k, format!("sigma:k={k}"), Kind::SigmaK(k))
    }

    /// Product of `ℓ_v(A) = Σ v_i λ_i(A)` over the extreme vertices `v` of
    /// `{lam, Lam}ⁿ`.
    pub fn pucci_garding(lam: f64, big: f64, n: usize) -> Result<Self> {
        check_dim(n)?;
        if !(lam > 0.0 && big > lam && big.is_finite()) {
            return Err(Error::BadParameters(format!("need 0 < lam < Lam, got {lam}, {big}")));
        }
        let vertices = pucci_extreme_vertices(lam, big, n);
        let m = vertices.len();
        Self::built_in(n, m, format!("pucci-garding:{lam},{big}"), Kind::Pucci { lam, big, vertices })
    }

    /// A user polynomial of declared degree `m`. Its eigenvalues are
    /// unavailable until [`GardingOperator::certify`] succeeds.
    pub fn custom(n: usize, m: usize, label: impl Into<String>, eval: EvalFn) -> Result<Self> {
        check_dim(n)?;
        if m == 0 {
            return Err(Error::BadParameters("degree must be positive".into()));
        }
        let op = Self { n, m, label: label.into(), kind: Kind::Custom(eval), certificate: None };
        let e = op.eval(&SymMat::identity(n))?;
        if !(e > 0.0) {
            return Err(Error::NonPositiveAtIdentity(e));
        }
        Ok(op)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn certificate(&self) -> Option<Certificate> {
        self.certificate
    }

    /// Pucci vertices in use, if this is a Pucci-Gårding operator.
    pub fn pucci_vertices(&self) -> Option<&[Vec<f64>]> {
        match &self.kind {
            Kind::Pucci { vertices, .. } => Some(vertices),
            _ => None,
        }
    }

    fn check_input(&self, a: &SymMat) -> Result<()> {
        if a.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: a.n() });
        }
        Ok(())
    }

    pub fn eval(&self, a: &SymMat) -> Result<f64> {
        self.check_input(a)?;
        Ok(self.shifted(a)?(0.0))
    }

    /// `s ↦ F(A + sI)`, with the spectral data of `A` computed once.
    fn shifted<'a>(&'a self, a: &'a SymMat) -> Result<Box<dyn Fn(f64) -> f64 + 'a>> {
        let ev = a.eigenvalues();
        Ok(match &self.kind {
            Kind::Det => Box::new(move |s| ev.iter().map(|l| l + s).product()),
            Kind::PFold(p) => {
                let p = *p;
                let n = ev.len();
                let sums: Vec<f64> = (0u32..1 << n)
                    .filter(|m| m.count_ones() as usize == p)
                    .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| ev[i]).sum())
                    .collect();
                Box::new(move |s| sums.iter().map(|x| x + p as f64 * s).product())
            }
            Kind::DeltaElliptic(d) => {
                let d = *d;
                let tr: f64 = ev.iter().sum();
                let n = ev.len() as f64;
                Box::new(move |s| ev.iter().map(|l| l + s + d * (tr + n * s)).product())
            }
            Kind::LagrangianMa => {
                let mu = lagrangian_mu(a)?;
                let k = mu.len();
                let half = 0.5 * a.trace();
                let factors: Vec<f64> = (0u32..1 << k)
                    .map(|signs| half + (0..k).map(|j| if signs >> j & 1 == 1 { mu[j] } else { -mu[j] }).sum::<f64>())
                    .collect();
                Box::new(move |s| factors.iter().map(|f| f + k as f64 * s).product())
            }
            Kind::Pucci { vertices, .. } => {
                let ls: Vec<(f64, f64)> =
                    vertices.iter().map(|v| (v.iter().zip(&ev).map(|(a, b)| a * b).sum(), v.iter().sum())).collect();
                Box::new(move |s| ls.iter().map(|(l, w)| l + w * s).product())
            }
            Kind::SigmaK(k) => {
                let k = *k;
                Box::new(move |s| {
                    let shifted: Vec<f64> = ev.iter().map(|l| l + s).collect();
                    crate::catalog::elementary_symmetric(&shifted)[k]
                })
            }
            Kind::Custom(f) => {
                let f = f.clone();
                Box::new(move |s| f(&a.shift(s)))
            }
        })
    }

    /// Roots of `q` without consulting the certificate.
    fn roots(&self, a: &SymMat, tol: f64) -> std::result::Result<Vec<f64>, RootFailure> {
        self.check_input(a).map_err(RootFailure::Err)?;
        // Centre the window on the mean eigenvalue: F(A + sI) = F(A0 + (s + μ)I).
        let mu = a.trace() / self.n as f64;
        let a0 = a.shift(-mu);
        let q = self.shifted(&a0).map_err(RootFailure::Err)?;
        // For the operators here every root lies in [-‖A0‖, ‖A0‖]; a tight
        // window keeps the interpolant well conditioned.
        let norm = a0.spectral_norm();
        let scale = if norm > 1e-300 { 1.1 * norm } else { 1.0 };
        let roots = real_roots(&*q, self.m, scale, tol, 1.0 + a.spectral_norm())?;
        Ok(roots.into_iter().map(|s| s - mu).collect())
    }

    /// Runs the sampled hyperbolicity check and, if every sample has real
    /// roots, stores a certificate.
    pub fn certify(&mut self, samples: usize, seed: u64, tol: f64) -> Result<HyperbolicityReport> {
        let report = hyperbolicity_check(self, samples, seed, tol, Exec::Sequential)?;
        if report.all_real() {
            self.certificate = Some(Certificate { seed, samples, tol });
        }
        Ok(report)
    }
}

enum RootFailure {
    Err(Error),
    NonReal(f64),
}

impl From<RootFailure> for Error {
    fn from(r: RootFailure) -> Self {
        match r {
            RootFailure::Err(e) => e,
            RootFailure::NonReal(residue) => Error::NonRealRoots { residue },
        }
    }
}

/// Chebyshev coefficients of the degree-`m` interpolant of `q(scale·t)` on
/// the first-kind nodes.
fn chebyshev_coefficients(q: &dyn Fn(f64) -> f64, m: usize, scale: f64) -> Vec<f64> {
    let nn = m + 1;
    let theta: Vec<f64> = (0..nn).map(|k| std::f64::consts::PI * (k as f64 + 0.5) / nn as f64).collect();
    let values: Vec<f64> = theta.iter().map(|t| q(scale * t.cos())).collect();
    (0..nn)
        .map(|j| {
            let c: f64 = values.iter().zip(&theta).map(|(f, t)| f * (j as f64 * t).cos()).sum::<f64>() * 2.0 / nn as f64;
            if j == 0 {
                c / 2.0
            } else {
                c
            }
        })
        .collect()
}

/// Colleague matrix whose eigenvalues are the roots of `Σ c_j T_j`.
fn colleague(c: &[f64]) -> DMatrix<f64> {
    let m = c.len() - 1;
    if m == 1 {
        return DMatrix::from_element(1, 1, -c[0] / c[1]);
    }
    let mut a = DMatrix::zeros(m, m);
    a[(0, 1)] = 1.0;
    for j in 1..m - 1 {
        a[(j, j - 1)] = 0.5;
        a[(j, j + 1)] = 0.5;
    }
    for j in 0..m {
        a[(m - 1, j)] -= c[j] / (2.0 * c[m]);
    }
    a[(m - 1, m - 2)] += 0.5;
    a
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn bisect(q: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = q(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = q(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const SCHUR_ITERS: usize = 10_000;

/// Eigenvalues of the colleague matrix. The Schur iteration can stall on
/// exactly degenerate inputs; the transpose takes a different path.
fn colleague_eigenvalues(c: &[f64]) -> Option<Vec<Complex<f64>>> {
    let cm = colleague(c);
    for m in [cm.clone(), cm.transpose()] {
        if let Some(schur) = m.try_schur(f64::EPSILON, SCHUR_ITERS) {
            return Some(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    None
}

/// Real roots of the degree-`m` polynomial `q`, sorted ascending.
fn real_roots(q: &dyn Fn(f64) -> f64, m: usize, scale: f64, tol: f64, unit: f64) -> std::result::Result<Vec<f64>, RootFailure> {
    let c = chebyshev_coefficients(q, m, scale);
    let cmax = c.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if c[m].abs() <= 1e-13 * cmax || cmax == 0.0 {
        return Err(RootFailure::Err(Error::DegenerateLeadingCoefficient));
    }
    let start = colleague_eigenvalues(&c).ok_or(RootFailure::Err(Error::NotConverged { iterations: SCHUR_ITERS, residual: f64::NAN }))?;
    let z: Vec<(f64, f64)> = start.iter().map(|w| (w.re * scale, w.im * scale)).collect();

    // A root of multiplicity k splits into a ring of radius about ε^{1/k}
    // under rounding. Rings are detected largest first; the mean of a ring is
    // well conditioned.
    let eps_eff = 1e-14 * m as f64;
    let allowed = |k: usize| 4.0 * eps_eff.powf(1.0 / k as f64) * scale;
    let mut left = z;
    let mut clusters: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut k = left.len();
    while k >= 2 && left.len() >= 2 {
        let k_eff = k.min(left.len());
        let mut accepted = None;
        for seed in 0..left.len() {
            let s0 = left[seed];
            let mut order: Vec<usize> = (0..left.len()).collect();
            order.sort_by(|&a, &b| dist(left[a], s0).total_cmp(&dist(left[b], s0)));
            let group: Vec<usize> = order[..k_eff].to_vec();
            let n = group.len() as f64;
            let mean = (group.iter().map(|&i| left[i].0).sum::<f64>() / n, group.iter().map(|&i| left[i].1).sum::<f64>() / n);
            let spread = group.iter().map(|&i| dist(left[i], mean)).fold(0.0, f64::max);
            let lift = group.iter().map(|&i| left[i].1.abs()).fold(0.0, f64::max);
            // Rounding splits a multiple root into a ring off the real axis;
            // distinct real roots stay on it.
            let ring = k_eff == 2 || lift >= 0.3 * spread;
            if ring && spread <= allowed(k_eff) {
                accepted = Some(group);
                break;
            }
        }
        match accepted {
            Some(mut group) => {
                group.sort_unstable_by(|a, b| b.cmp(a));
                let cl: Vec<(f64, f64)> = group.into_iter().map(|i| left.remove(i)).collect();
                clusters.push(cl);
                k = k.min(left.len());
            }
            None => k -= 1,
        }
    }
    clusters.extend(left.into_iter().map(|w| vec![w]));
    clusters.sort_by(|a, b| a[0].0.total_cmp(&b[0].0));

    // Imaginary parts are measured against tol·(1 + ‖A‖).
    let limit = tol * unit;
    let mut residue: f64 = 0.0;
    let mut resolved: Vec<f64> = Vec::new();
    let mut pending: Vec<(f64, f64)> = Vec::new();
    let mut kept = Vec::with_capacity(clusters.len());
    for cl in clusters {
        let im = cl.iter().map(|w| w.1).sum::<f64>() / cl.len() as f64;
        if im.abs() <= limit {
            kept.push(cl);
        } else if cl.len() == 1 {
            pending.push(cl[0]);
        } else {
            return Err(RootFailure::NonReal(im.abs() / unit));
        }
    }
    let clusters = kept;
    // Conjugate pairs of the interpolant may be close real roots of q.
    pending.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let uppers: Vec<(f64, f64)> = pending.iter().copied().filter(|w| w.1 > 0.0).collect();
    if uppers.len() * 2 != pending.len() {
        let worst = pending.iter().map(|w| w.1.abs()).fold(0.0, f64::max);
        return Err(RootFailure::NonReal(worst / unit));
    }
    for w in uppers {
        let (pair, est) = resolve_pair(q, w.0, w.1);
        if est > limit {
            return Err(RootFailure::NonReal(est / unit));
        }
        residue = residue.max(est);
        resolved.extend(pair);
    }
    let _ = residue;

    let mut centres: Vec<f64> = clusters.iter().map(|cl| cl.iter().map(|w| w.0).sum::<f64>() / cl.len() as f64).collect();
    centres.extend(resolved.iter().copied());
    centres.sort_by(|a, b| a.total_cmp(b));
    let mut roots = Vec::with_capacity(m);
    let mut touching = Vec::new();
    for cl in &clusters {
        let mean = cl.iter().map(|w| w.0).sum::<f64>() / cl.len() as f64;
        if cl.len() == 1 {
            // Widen the bracket up to half the gap to the neighbouring roots.
            let gap = centres
                .iter()
                .filter(|&&x| x != mean)
                .map(|x| (x - mean).abs())
                .fold(scale, f64::min);
            let mut d = 1e-10 * scale;
            let mut root = None;
            while d <= 0.5 * gap {
                let (a, b) = (mean - d, mean + d);
                if (q(a) < 0.0) != (q(b) < 0.0) {
                    root = Some(bisect(q, a, b));
                    break;
                }
                d *= 2.0;
            }
            match root {
                Some(r) => roots.push(r),
                None => touching.push(mean),
            }
            continue;
        }
        // Distinct but close roots show up as sign changes on a fine grid.
        let spread = cl.iter().map(|w| dist(*w, (mean, 0.0))).fold(0.0, f64::max);
        let (lo, hi) = (mean - 1.5 * spread, mean + 1.5 * spread);
        let steps = 256;
        let xs: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
        let mut found = Vec::new();
        for w in xs.windows(2) {
            if (q(w[0]) < 0.0) != (q(w[1]) < 0.0) {
                found.push(bisect(q, w[0], w[1]));
            }
        }
        found.truncate(cl.len());
        let extra = cl.len() - found.len();
        roots.extend(found);
        roots.extend(std::iter::repeat_n(mean, extra));
    }
    roots.extend(resolved);
    // Roots without a sign change of their own are halves of a double root
    // split along the real axis.
    touching.sort_by(|a, b| a.total_cmp(b));
    for pair in touching.chunks(2) {
        if let [x, y] = pair {
            let (got, est) = resolve_pair(q, 0.5 * (x + y), (0.5 * (y - x)).max(1e-12 * scale));
            if est > limit {
                return Err(RootFailure::NonReal(est / unit));
            }
            roots.extend(got);
        } else {
            roots.push(pair[0]);
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

/// Decides a suspected conjugate pair `re ± i·im` using `q` itself: two
/// sign changes nearby give two real roots; otherwise a quadratic model at
/// the extremum of `|q|` estimates the imaginary part.
fn resolve_pair(q: &dyn Fn(f64) -> f64, re: f64, im: f64) -> ([f64; 2], f64) {
    let w = 4.0 * im;
    let steps = 1024;
    let xs: Vec<f64> = (0..=steps).map(|i| re - w + 2.0 * w * i as f64 / steps as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| q(x)).collect();
    let mut found = Vec::new();
    for i in 0..steps {
        if ys[i] == 0.0 {
            found.push(xs[i]);
        } else if (ys[i] < 0.0) != (ys[i + 1] < 0.0) && ys[i + 1] != 0.0 {
            found.push(bisect(q, xs[i], xs[i + 1]));
        }
    }
    if found.len() >= 2 {
        found.sort_by(|a, b| (a - re).abs().total_cmp(&(b - re).abs()));
        return ([found[0], found[1]], 0.0);
    }
    let i = (1..steps).min_by(|&a, &b| ys[a].abs().total_cmp(&ys[b].abs())).unwrap_or(steps / 2);
    let mut c = xs[i];
    let mut h = 2.0 * w / steps as f64;
    // Golden-section refinement of the extremum of |q|.
    let (mut lo, mut hi) = (c - h, c + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if q(a).abs() < q(b).abs() {
            hi = b;
        } else {
            lo = a;
        }
    }
    c = 0.5 * (lo + hi);
    h = h.max(1e-6 * (1.0 + c.abs()));
    let v = q(c);
    let curv = (q(c + h) - 2.0 * v + q(c - h)) / (h * h);
    let est = if v * curv > 0.0 { (2.0 * v / curv).sqrt() } else { 0.0 };
    ([c, c], est)
}

/// Gårding eigenvalues `Λ_1 ≤ ⋯ ≤ Λ_m`, the negatives of the roots of
/// `s ↦ F(A + sI)`.
pub fn garding_eigenvalues(op: &GardingOperator, a: &SymMat, tol: f64) -> Result<Vec<f64>> {
    if op.certificate.is_none() {
        return Err(Error::HyperbolicityNotVerified(op.label.clone()));
    }
    let mut lam: Vec<f64> = op.roots(a, tol)?.into_iter().map(|s| -s).collect();
    lam.sort_by(|a, b| a.total_cmp(b));
    Ok(lam)
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityReport {
    pub samples: usize,
    pub real: usize,
    pub fraction_real: f64,
    pub worst_residue: f64,
    pub witnesses: Vec<SymMat>,
}

impl HyperbolicityReport {
    pub fn all_real(&self) -> bool {
        self.real == self.samples
    }
}

/// Sampled real-rootedness of `s ↦ F(A + sI)`; the sample set mixes
/// Gaussian symmetric matrices of several scales with PSD matrices.
pub fn hyperbolicity_check(
    op: &GardingOperator,
    samples: usize,
    seed: u64,
    tol: f64,
    exec: Exec,
) -> Result<HyperbolicityReport> {
    let mut rng = seeded(seed);
    let mats: Vec<SymMat> = (0..samples)
        .map(|i| match i % 4 {
            3 => random_psd(&mut rng, op.n, 1.0),
            k => random_sym(&mut rng, op.n, [0.1, 1.0, 10.0][k]),
        })
        .collect();
    let out = map_indexed(exec, mats.len(), |i| match op.roots(&mats[i], tol) {
        Ok(_) => Ok(None),
        Err(RootFailure::NonReal(r)) => Ok(Some(r)),
        Err(RootFailure::Err(e)) => Err(e),
    });
    let mut rep = HyperbolicityReport { samples, real: 0, fraction_real: 0.0, worst_residue: 0.0, witnesses: vec![] };
    for (i, r) in out.into_iter().enumerate() {
        match r? {
            None => rep.real += 1,
            Some(res) => {
                rep.worst_residue = rep.worst_residue.max(res);
                if rep.witnesses.len() < 16 {
                    rep.witnesses.push(mats[i].clone());
                }
            }
        }
    }
    rep.fraction_real = if samples == 0 { 1.0 } else { rep.real as f64 / samples as f64 };
    Ok(rep)
}

/// Closed Gårding cone `Γ̄ = {Λ_j(A) ≥ 0 ∀j}`, classified by `Λ_1`.
pub fn garding_cone_contains(op: &GardingOperator, a: &SymMat, tol: f64) -> Result<Classification> {
    let lam = garding_eigenvalues(op, a, ROOT_TOL)?;
    Ok(Classification::from_value(lam[0], tol))
}

/// Sampled `P ⊂ Γ̄`: PSD matrices of random rank must have `Λ_1 ≥ −tol`.
pub fn garding_dirichlet_check(op: &GardingOperator, samples: usize, seed: u64, tol: f64, exec: Exec) -> Result<CheckReport> {
    let mut rng = seeded(seed);
    let scales = [0.1, 1.0, 10.0];
    let mats: Vec<SymMat> = (0..samples).map(|i| random_psd(&mut rng, op.n, scales[i % 3])).collect();
    reduce(map_indexed(exec, mats.len(), |i| {
        let a = &mats[i];
        let l1 = garding_eigenvalues(op, a, ROOT_TOL)?[0];
        let slack = tol * (1.0 + a.spectral_norm());
        Ok(Verdict::Checked { pass: l1 >= -slack, margin: l1, witness: vec![Jet2::pure(a.clone())] })
    }))
}

struct GardingBranch {
    op: Arc<GardingOperator>,
    k: usize,
}

impl Fiber for GardingBranch {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        format!("branch({}, k={})", self.op.label, self.k)
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok(garding_eigenvalues(&self.op, &j.a, ROOT_TOL)?[self.k - 1])
    }
}

/// `{A : Λ_k(A) ≥ 0}`.
pub fn branch_oracle(op: &GardingOperator, k: usize) -> Result<FiberOracle> {
    check_index(k, op.m)?;
    Ok(Arc::new(GardingBranch { op: Arc::new(op.clone()), k }))
}

/// The closed Gårding cone as a fiber oracle.
pub fn garding_cone(op: &GardingOperator) -> FiberOracle {
    Arc::new(GardingBranch { op: Arc::new(op.clone()), k: 1 })
}

/// Nonnegative least squares `min ‖Ex − b‖, x ≥ 0` (Lawson-Hanson).
pub fn nnls(e: &DMatrix<f64>, b: &[f64]) -> (Vec<f64>, f64) {
    let (rows, cols) = e.shape();
    let bv = nalgebra::DVector::from_column_slice(b);
    let mut x = nalgebra::DVector::zeros(cols);
    let mut passive = vec![false; cols];
    let tol = 1e-12 * (1.0 + e.amax()) * (1.0 + bv.amax());
    for _ in 0..3 * cols + 10 {
        let w = e.transpose() * (&bv - e * &x);
        let cand = (0..cols).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..cols).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(rows, idx.len(), |r, c| e[(r, idx[c])]);
            let z = sub.clone().svd(true, true).solve(&bv, 1e-14).expect("svd solve");
            if z.iter().all(|&v| v > 0.0) {
                for (c, &j) in idx.iter().enumerate() {
                    x[j] = z[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &j) in idx.iter().enumerate() {
                if z[c] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[c]));
                }
            }
            for (c, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[c] - x[j]);
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let res = (&bv - e * &x).norm();
    (x.iter().copied().collect(), res)
}

/// Vertices of `{lam, Lam}ⁿ` that are not nonnegative combinations of the
/// other vertices, after removing duplicated directions.
pub fn pucci_extreme_vertices(lam: f64, big: f64, n: usize) -> Vec<Vec<f64>> {
    let all: Vec<Vec<f64>> =
        (0u32..1 << n).map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { big } else { lam }).collect()).collect();
    let unit = |v: &[f64]| {
        let nn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / nn).collect::<Vec<f64>>()
    };
    let mut dedup: Vec<Vec<f64>> = Vec::new();
    for v in all {
        let u = unit(&v);
        if !dedup.iter().any(|w| unit(w).iter().zip(&u).all(|(a, b)| (a - b).abs() < 1e-12)) {
            dedup.push(v);
        }
    }
    let mut out = Vec::new();
    for (i, v) in dedup.iter().enumerate() {
        let others: Vec<&Vec<f64>> = dedup.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w).collect();
        if others.is_empty() {
            out.push(v.clone());
            continue;
        }
        let e = DMatrix::from_fn(n, others.len(), |r, c| others[c][r]);
        let (_, res) = nnls(&e, v);
        if res > 1e-9 * big {
            out.push(v.clone());
        }
    }
    out
}

/// String keys for the built-in operators.
#[derive(Debug, Clone, PartialEq)]
pub enum GardingKey {
    Det,
    PFold(usize),
    DeltaElliptic(f64),
    LagrangianMa,
    PucciGarding(f64, f64),
    Sigma(usize),
}

impl GardingKey {
    pub fn build(&self, n: usize) -> Result<GardingOperator> {
        match self {
            GardingKey::Det => GardingOperator::det(n),
            GardingKey::PFold(p) => GardingOperator::pfold(n, *p),
            GardingKey::DeltaElliptic(d) => GardingOperator::delta_elliptic(n, *d),
            GardingKey::LagrangianMa => GardingOperator::lagrangian_ma(n),
            GardingKey::PucciGarding(a, b) => GardingOperator::pucci_garding(*a, *b, n),
            GardingKey::Sigma(k) => GardingOperator::sigma_k(n, *k),
        }
    }
}

impl fmt::Display for GardingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GardingKey::Det => write!(f, "det"),
            GardingKey::PFold(p) => write!(f, "pfold:p={p}"),
            GardingKey::DeltaElliptic(d) => write!(f, "delta-elliptic:{d}"),
            GardingKey::LagrangianMa => write!(f, "lagrangian-ma"),
            GardingKey::PucciGarding(a, b) => write!(f, "pucci-garding:{a},{b}"),
            GardingKey::Sigma(k) => write!(f, "sigma:k={k}"),
        }
    }
}

impl FromStr for GardingKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{x}' in '{s}'")));
        let idx = |x: &str| x.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad index '{x}' in '{s}'")));
        match s {
            "det" => return Ok(GardingKey::Det),
            "lagrangian-ma" => return Ok(GardingKey::LagrangianMa),
            _ => {}
        }
        let (head, body) = s.split_once(':').ok_or_else(|| Error::UnknownKey(s.to_string()))?;
        match head {
            "pfold" => Ok(GardingKey::PFold(idx(body.strip_prefix("p=").ok_or_else(|| Error::Parse(format!("expected p= in '{s}'")))?)?)),
            "sigma" => Ok(GardingKey::Sigma(idx(body.strip_prefix("k=").ok_or_else(|| Error::Parse(format!("expected k= in '{s}'")))?)?)),
            "delta-elliptic" => Ok(GardingKey::DeltaElliptic(num(body)?)),
            "pucci-garding" => {
                let (a, b) = body.split_once(',').ok_or_else(|| Error::Parse(format!("expected two parameters in '{s}'")))?;
                Ok(GardingKey::PucciGarding(num(a)?, num(b)?))
            }
            _ => Err(Error::UnknownKey(s.to_string())),
        }
    }
}

/// CSV row: matrix entries row-major, then `Λ_1..Λ_m`.
pub fn eigenvalue_csv_row(a: &SymMat, lam: &[f64]) -> String {
    a.rows().iter().flatten().chain(lam).map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Pucci cone with the same parameters, for cross-checks.
pub fn pucci_reference(op: &GardingOperator) -> Option<FiberOracle> {
    match &op.kind {
        Kind::Pucci { lam, big, .. } => cone_pucci(*lam, *big).ok(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;
    use crate::sampling::random_orthogonal;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn det_eigenvalues_are_standard_eigenvalues() {
        let op = GardingOperator::det(3).unwrap();
        let lam = garding_eigenvalues(&op, &SymMat::diag(&[1.0, 2.0, 3.0]), ROOT_TOL).unwrap();
        assert!(close(&lam, &[1.0, 2.0, 3.0], 1e-12), "{lam:?}");
        let mut rng = seeded(1);
        for _ in 0..500 {
            let a = random_sym(&mut rng, 4, 1.0);
            let lam = garding_eigenvalues(&GardingOperator::det(4).unwrap(), &a, ROOT_TOL).unwrap();
            assert!(close(&lam, &a.eigenvalues(), 1e-9));
        }
    }

    #[test]
    fn delta_elliptic_example_and_closed_form() {
        let op = GardingOperator::delta_elliptic(2, 0.5).unwrap();
        let lam = garding_eigenvalues(&op, &SymMat::diag(&[1.0, -1.0]), ROOT_TOL).unwrap();
        // Roots of F(A + sI) give (λ_j + δ tr A)/(1 + nδ); the unnormalized
        // factors λ_j + δ tr A = (−1, 1) differ by the factor 1 + nδ = 2.
        assert!(close(&lam, &[-0.5, 0.5], 1e-12), "{lam:?}");
        assert!(close(&lam.iter().map(|l| 2.0 * l).collect::<Vec<_>>(), &[-1.0, 1.0], 1e-12));
        // Normalized closed form (λ_j + δ tr A)/(1 + nδ).
        let mut rng = seeded(2);
        for _ in 0..200 {
            let a = random_sym(&mut rng, 3, 1.0);
            let op = GardingOperator::delta_elliptic(3, 0.3).unwrap();
            let tr = a.trace();
            let want: Vec<f64> = a.eigenvalues().iter().map(|l| (l + 0.3 * tr) / 1.9).collect();
            assert!(close(&garding_eigenvalues(&op, &a, ROOT_TOL).unwrap(), &want, 1e-9));
        }
    }

    #[test]
    fn zero_matrix_has_zero_eigenvalues() {
        for op in [
            GardingOperator::det(3).unwrap(),
            GardingOperator::pfold(4, 2).unwrap(),
            GardingOperator::lagrangian_ma(4).unwrap(),
            GardingOperator::sigma_k(4, 3).unwrap(),
        ] {
            let lam = garding_eigenvalues(&op, &SymMat::zeros(op.n()), ROOT_TOL).unwrap();
            assert_eq!(lam.len(), op.degree());
            assert!(lam.iter().all(|x| x.abs() < 1e-12), "{}: {lam:?}", op.label());
        }
    }

    #[test]
    fn scalar_matrices_have_repeated_eigenvalues() {
        for op in [GardingOperator::det(3).unwrap(), GardingOperator::pfold(4, 2).unwrap(), GardingOperator::lagrangian_ma(4).unwrap()] {
            let lam = garding_eigenvalues(&op, &SymMat::identity(op.n()).shift(1.5), ROOT_TOL).unwrap();
            assert!(lam.iter().all(|x| (x - 2.5).abs() < 1e-9), "{}: {lam:?}", op.label());
        }
    }

    #[test]
    fn pfold_matches_subset_means() {
        let mut rng = seeded(3);
        for _ in 0..200 {
            let n = rng.random_range(2..=5);
            let p = rng.random_range(1..=n);
            let a = random_sym(&mut rng, n, 1.0);
            let ev = a.eigenvalues();
            let mut want: Vec<f64> = (0u32..1 << n)
                .filter(|m| m.count_ones() as usize == p)
                .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| ev[i]).sum::<f64>() / p as f64)
                .collect();
            want.sort_by(|a, b| a.total_cmp(b));
            let got = garding_eigenvalues(&GardingOperator::pfold(n, p).unwrap(), &a, ROOT_TOL).unwrap();
            assert!(close(&got, &want, 1e-8), "n={n} p={p}\n{got:?}\n{want:?}");
        }
    }

    /// Realification `[L | JL]` of a random unitary matrix.
    fn random_unitary(rng: &mut crate::sampling::SampleRng, k: usize) -> DMatrix<f64> {
        let l = crate::sampling::random_lagrangian_frame(rng, k);
        DMatrix::from_fn(2 * k, 2 * k, |i, j| {
            if j < k {
                l[(i, j)]
            } else if i < k {
                -l[(i + k, j - k)]
            } else {
                l[(i - k, j - k)]
            }
        })
    }

    #[test]
    fn identities_hold_for_all_built_ins() {
        let ops = vec![
            GardingOperator::det(3).unwrap(),
            GardingOperator::pfold(4, 2).unwrap(),
            GardingOperator::delta_elliptic(3, 1.0).unwrap(),
            GardingOperator::sigma_k(4, 2).unwrap(),
            GardingOperator::lagrangian_ma(4).unwrap(),
            GardingOperator::pucci_garding(1.0, 2.0, 3).unwrap(),
        ];
        let mut rng = seeded(4);
        for op in &ops {
            for _ in 0..100 {
                let a = random_sym(&mut rng, op.n(), 1.0);
                let lam = garding_eigenvalues(op, &a, ROOT_TOL).unwrap();
                let prod = op.eval(&SymMat::identity(op.n())).unwrap() * lam.iter().product::<f64>();
                assert_relative_eq!(op.eval(&a).unwrap(), prod, max_relative = 1e-7, epsilon = 1e-12);
                let t = rng.random::<f64>() * 4.0 - 2.0;
                let shifted = garding_eigenvalues(op, &a.shift(t), ROOT_TOL).unwrap();
                assert!(close(&shifted, &lam.iter().map(|l| l + t).collect::<Vec<_>>(), 1e-8), "shift {}: {lam:?} {shifted:?} t={t}", op.label());
                // The Lagrangian operator is only unitarily invariant.
                let q = if op.label() == "lagrangian-ma" { random_unitary(&mut rng, op.n() / 2) } else { random_orthogonal(&mut rng, op.n()) };
                let rotated = garding_eigenvalues(op, &a.congruence(&q), ROOT_TOL).unwrap();
                assert!(close(&rotated, &lam, 1e-8), "rotation {}: {lam:?} {rotated:?}", op.label());
                for k in 1..lam.len() {
                    assert!(lam[k - 1] < 0.0 || lam[k] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn homogeneity() {
        let mut rng = seeded(5);
        for op in [GardingOperator::pfold(3, 2).unwrap(), GardingOperator::lagrangian_ma(4).unwrap()] {
            for _ in 0..100 {
                let a = random_sym(&mut rng, op.n(), 1.0);
                let t = 0.5 + rng.random::<f64>() * 2.0;
                let lhs = op.eval(&(t * &a)).unwrap();
                let rhs = t.powi(op.degree() as i32) * op.eval(&a).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-9, epsilon = 1e-12);
            }
        }
    }

    fn sigma_direct(a: &SymMat, k: usize) -> f64 {
        elementary_symmetric(&a.eigenvalues())[k]
    }

    #[test]
    fn hyperbolicity_reports() {
        let det = GardingOperator::det(3).unwrap();
        assert_eq!(hyperbolicity_check(&det, 1000, 1, ROOT_TOL, Exec::Parallel).unwrap().fraction_real, 1.0);
        let pf = GardingOperator::pfold(4, 2).unwrap();
        assert!(hyperbolicity_check(&pf, 1000, 2, ROOT_TOL, Exec::Parallel).unwrap().all_real());

        let eps = 0.1;
        let mut bad = GardingOperator::custom(
            2,
            2,
            "tr(A^2)-eps tr(A)^2",
            Arc::new(move |a: &SymMat| {
                let tr = a.trace();
                (a.as_matrix() * a.as_matrix()).trace() - eps * tr * tr
            }),
        )
        .unwrap();
        assert!(matches!(
            garding_eigenvalues(&bad, &SymMat::identity(2), ROOT_TOL),
            Err(Error::HyperbolicityNotVerified(_))
        ));
        let rep = bad.certify(200, 3, ROOT_TOL).unwrap();
        assert!(!rep.all_real() && !rep.witnesses.is_empty());
        assert!(bad.certificate().is_none());
        let witness = SymMat::diag(&[1.0, -1.0]);
        assert!(matches!(bad.roots(&witness, ROOT_TOL), Err(RootFailure::NonReal(_))));

        let mut sig = GardingOperator::custom(3, 2, "sigma2", Arc::new(|a: &SymMat| sigma_direct(a, 2))).unwrap();
        assert!(sig.certify(200, 4, ROOT_TOL).unwrap().all_real());
        let a = SymMat::diag(&[1.0, 2.0, -0.5]);
        let got = garding_eigenvalues(&sig, &a, ROOT_TOL).unwrap();
        let want = garding_eigenvalues(&GardingOperator::sigma_k(3, 2).unwrap(), &a, ROOT_TOL).unwrap();
        assert!(close(&got, &want, 1e-9));
    }

    #[test]
    fn negative_determinant_rejected() {
        let e = GardingOperator::custom(2, 2, "-det", Arc::new(|a: &SymMat| -a.as_matrix().determinant())).unwrap_err();
        assert!(matches!(e, Error::NonPositiveAtIdentity(v) if v < 0.0));
    }

    #[test]
    fn cones_match_catalog() {
        let opts = crate::duality::CheckOptions::new(3, 2000, 6);
        let pairs: Vec<(FiberOracle, FiberOracle)> = vec![
            (garding_cone(&GardingOperator::det(3).unwrap()), cone_p()),
            (garding_cone(&GardingOperator::pfold(3, 2).unwrap()), cone_pfold(2).unwrap()),
            (garding_cone(&GardingOperator::sigma_k(3, 2).unwrap()), cone_sigma_k(2).unwrap()),
            (garding_cone(&GardingOperator::pucci_garding(1.0, 2.0, 3).unwrap()), cone_pucci(1.0, 2.0).unwrap()),
        ];
        for (g, c) in &pairs {
            let r = crate::duality::check_agreement(g, c, &opts).unwrap();
            assert!(r.ok(), "{}: {r:?}", g.label());
        }
        let lag = garding_cone(&GardingOperator::lagrangian_ma(4).unwrap());
        let r = crate::duality::check_agreement(&lag, &cone_lagrangian(), &crate::duality::CheckOptions::new(4, 2000, 7)).unwrap();
        assert!(r.ok());
        for k in 1..=3 {
            let b = branch_oracle(&GardingOperator::det(3).unwrap(), k).unwrap();
            assert!(crate::duality::check_agreement(&b, &branch(k).unwrap(), &opts).unwrap().ok());
        }
    }

    #[test]
    fn dirichlet_checks_pass() {
        for op in [
            GardingOperator::det(3).unwrap(),
            GardingOperator::pfold(3, 2).unwrap(),
            GardingOperator::delta_elliptic(3, 0.5).unwrap(),
            GardingOperator::lagrangian_ma(4).unwrap(),
            GardingOperator::sigma_k(3, 2).unwrap(),
        ] {
            let r = garding_dirichlet_check(&op, 500, 8, 1e-9, Exec::Parallel).unwrap();
            assert!(r.ok(), "{}: {r:?}", op.label());
            let top = branch_oracle(&op, op.degree()).unwrap();
            let mut rng = seeded(9);
            for _ in 0..100 {
                let a = random_psd(&mut rng, op.n(), 1.0);
                assert!(top.contains(&Jet2::pure(a), 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn pucci_extreme_set() {
        let s = pucci_extreme_vertices(1.0, 2.0, 2);
        assert_eq!(s, vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        // (Λ,Λ) = (Λ/(λ+Λ))·((λ,Λ) + (Λ,λ)) by hand.
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (x, res) = nnls(&e, &[2.0, 2.0]);
        assert!(res < 1e-12 && (x[0] - 2.0 / 3.0).abs() < 1e-12);
        for n in 2..=4 {
            let s = pucci_extreme_vertices(1.0, 3.0, n);
            assert_eq!(s.len(), (1 << n) - 2, "n={n}");
            assert!(s.iter().all(|v| v.contains(&1.0) && v.contains(&3.0)));
        }
        let op = GardingOperator::pucci_garding(1.0, 2.0, 2).unwrap();
        assert!(op.eval(&SymMat::identity(2)).unwrap() > 0.0);
        assert!(GardingOperator::pucci_garding(2.0, 1.0, 2).is_err());
    }

    #[test]
    fn pucci_sign_agreement() {
        let op = GardingOperator::pucci_garding(1.0, 2.0, 3).unwrap();
        let mut rng = seeded(10);
        for _ in 0..2000 {
            let a = random_sym(&mut rng, 3, 1.0);
            let reference = crate::catalog::pucci_value(&a.eigenvalues(), 1.0, 2.0);
            if reference.abs() < 1e-6 {
                continue;
            }
            let l1 = garding_eigenvalues(&op, &a, ROOT_TOL).unwrap()[0];
            assert_eq!(l1 > 0.0, reference > 0.0);
        }
    }

    #[test]
    fn csv_rows() {
        assert_eq!(eigenvalue_csv_row(&SymMat::diag(&[1.0, 2.0]), &[1.0, 2.0]), "1,0,0,2,1,2");
    }

    #[test]
    fn input_dimension_checked() {
        let op = GardingOperator::det(3).unwrap();
        assert!(matches!(garding_eigenvalues(&op, &SymMat::zeros(2), ROOT_TOL), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(branch_oracle(&op, 4), Err(Error::IndexOutOfRange { .. })));
    }

    fn gkey() -> impl Strategy<Value = GardingKey> {
        prop_oneof![
            Just(GardingKey::Det),
            Just(GardingKey::LagrangianMa),
            (1usize..9).prop_map(GardingKey::PFold),
            (1usize..9).prop_map(GardingKey::Sigma),
            (1u32..100).prop_map(|d| GardingKey::DeltaElliptic(d as f64 / 16.0)),
            (1u32..100, 1u32..100).prop_map(|(a, b)| GardingKey::PucciGarding(a as f64 / 4.0, (a + b) as f64 / 4.0)),
        ]
    }

    proptest! {
        #[test]
        fn garding_keys_round_trip(k in gkey()) {
            prop_assert_eq!(k.to_string().parse::<GardingKey>().unwrap(), k);
        }
    }
}
