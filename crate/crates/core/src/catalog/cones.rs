use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Arity, Fiber, FiberOracle};
use crate::error::{Error, Result};
use crate::jets::{Jet2, SymMat};

struct Convex;

impl Fiber for Convex {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        "P".into()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok(j.a.lambda_min())
    }
}

struct Subaffine;

impl Fiber for Subaffine {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        "P~".into()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok(j.a.lambda_max())
    }
}

/// `{A : λ_min(A) ≥ 0}`.
pub fn cone_p() -> FiberOracle {
    Arc::new(Convex)
}

/// `{A : λ_max(A) ≥ 0}`.
pub fn cone_p_dual() -> FiberOracle {
    Arc::new(Subaffine)
}

fn check_index(index: usize, max: usize) -> Result<()> {
    if index == 0 || index > max {
        Err(Error::IndexOutOfRange { index, max })
    } else {
        Ok(())
    }
}

struct Branch {
    k: usize,
}

impl Fiber for Branch {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        format!("branch:k={}", self.k)
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        check_index(self.k, j.n())?;
        Ok(j.a.eigenvalues()[self.k - 1])
    }
}

/// `{A : λ_k(A) ≥ 0}`. The index is checked against the jet dimension at
/// classification time.
pub fn branch(k: usize) -> Result<FiberOracle> {
    check_index(k, crate::jets::MAX_DIM)?;
    Ok(Arc::new(Branch { k }))
}

struct PFold {
    p: usize,
}

impl Fiber for PFold {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        format!("pfold:p={}", self.p)
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        check_index(self.p, j.n())?;
        Ok(j.a.eigenvalues()[..self.p].iter().sum())
    }
}

/// `{A : λ_1 + ⋯ + λ_p ≥ 0}`: trace nonnegative on every p-plane.
pub fn cone_pfold(p: usize) -> Result<FiberOracle> {
    check_index(p, crate::jets::MAX_DIM)?;
    Ok(Arc::new(PFold { p }))
}

/// Elementary symmetric polynomials `σ_0..=σ_n` of `x`.
pub fn elementary_symmetric(x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; x.len() + 1];
    e[0] = 1.0;
    for (i, &xi) in x.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += xi * e[j - 1];
        }
    }
    e
}

fn in_open_gamma(mu: &[f64], k: usize) -> bool {
    let e = elementary_symmetric(mu);
    e[1..=k].iter().all(|&s| s > 0.0)
}

/// `sup { t : λ − t·1 ∈ Γ_k }` where `Γ_k = {σ_1, …, σ_k > 0}`. The closed
/// cone is exactly `{t* ≥ 0}` because shifting by `t` moves the boundary by
/// `t`, so this is the shift-rule functional for `Γ̄_k`.
pub fn sigma_shift(lambdas: &[f64], k: usize) -> f64 {
    let n = lambdas.len();
    let scale = 1.0 + lambdas.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    // λ − lo·1 lies in the positive orthant; λ − hi·1 has negative trace.
    let mut lo = lambdas[0] - scale;
    let mut hi = lambdas.iter().sum::<f64>() / n as f64 + scale;
    let mut mu = vec![0.0; n];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        for (m, l) in mu.iter_mut().zip(lambdas) {
            *m = l - mid;
        }
        if in_open_gamma(&mu, k) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct SigmaK {
    k: usize,
}

impl Fiber for SigmaK {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        format!("sigma:k={}", self.k)
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        check_index(self.k, j.n())?;
        Ok(sigma_shift(&j.a.eigenvalues(), self.k))
    }
}

/// Closed Gårding cone of the k-Hessian `σ_k(λ(A))`.
pub fn cone_sigma_k(k: usize) -> Result<FiberOracle> {
    check_index(k, crate::jets::MAX_DIM)?;
    Ok(Arc::new(SigmaK { k }))
}

struct Pucci {
    lam: f64,
    big: f64,
}

impl Fiber for Pucci {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        format!("pucci:{},{}", self.lam, self.big)
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok(pucci_value(&j.a.eigenvalues(), self.lam, self.big))
    }
}

pub(crate) fn pucci_value(ev: &[f64], lam: f64, big: f64) -> f64 {
    ev.iter().map(|&x| if x > 0.0 { lam * x } else { big * x }).sum()
}

/// `{A : lam·tr A⁺ + big·tr A⁻ ≥ 0}` with `0 < lam < big`.
pub fn cone_pucci(lam: f64, big: f64) -> Result<FiberOracle> {
    if !(lam > 0.0 && big > lam && big.is_finite()) {
        return Err(Error::BadParameters(format!("need 0 < lam < Lam, got {lam}, {big}")));
    }
    Ok(Arc::new(Pucci { lam, big }))
}

struct Quasiconvex {
    lambda: f64,
}

impl Fiber for Quasiconvex {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        format!("quasiconvex:{}", self.lambda)
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok(j.a.lambda_min() + self.lambda)
    }
}

/// `P_λ = {A : A + λI ≥ 0}`.
pub fn cone_quasiconvex(lambda: f64) -> Result<FiberOracle> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::BadParameters(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(Arc::new(Quasiconvex { lambda }))
}

/// The nonnegative eigenvalues `μ_1 ≥ ⋯ ≥ μ_n` of the skew-Hermitian part
/// `(A + JAJ)/2` of `A ∈ S(2n)`, where `J(x, y) = (−y, x)`.
pub fn lagrangian_mu(a: &SymMat) -> Result<Vec<f64>> {
    let dim = a.n();
    if dim % 2 != 0 {
        return Err(Error::OddDimension(dim));
    }
    let n = dim / 2;
    // (JAJ)_{ij} = J_{ik} A_{kl} J_{lj}; each row and column of J has one
    // nonzero entry.
    let skew = SymMat::from_fn(dim, |i, j| {
        let (k, si) = if i < n { (i + n, -1.0) } else { (i - n, 1.0) };
        let (l, sj) = if j < n { (j + n, 1.0) } else { (j - n, -1.0) };
        0.5 * (a.get(i, j) + si * sj * a.get(k, l))
    });
    let ev = skew.eigenvalues();
    Ok(ev[n..].iter().rev().map(|x| x.max(0.0)).collect())
}

struct Lagrangian;

impl Fiber for Lagrangian {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        "lagrangian".into()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        let mu = lagrangian_mu(&j.a)?;
        Ok(0.5 * j.a.trace() - mu.iter().sum::<f64>())
    }
}

/// `{A ∈ S(2n) : ½ tr A − μ_1 − ⋯ − μ_n ≥ 0}`.
pub fn cone_lagrangian() -> FiberOracle {
    Arc::new(Lagrangian)
}

struct ConeQ;

impl Fiber for ConeQ {
    fn arity(&self) -> Arity {
        Arity::GradientFree
    }
    fn label(&self) -> String {
        "Q".into()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok((-j.r).min(j.a.lambda_min()))
    }
}

struct ConeQDual;

impl Fiber for ConeQDual {
    fn arity(&self) -> Arity {
        Arity::GradientFree
    }
    fn label(&self) -> String {
        "Q~".into()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok((-j.r).max(j.a.lambda_max()))
    }
}

/// `Q = N × P`: `r ≤ 0` and `A ≥ 0`.
pub fn cone_q() -> FiberOracle {
    Arc::new(ConeQ)
}

/// `Q̃`: `r ≤ 0` or `λ_max(A) ≥ 0`.
pub fn cone_q_dual() -> FiberOracle {
    Arc::new(ConeQDual)
}

struct M0;

impl Fiber for M0 {
    fn arity(&self) -> Arity {
        Arity::Full
    }
    fn label(&self) -> String {
        "M0".into()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        Ok((-j.r).min(-j.p_norm()).min(j.a.lambda_min()))
    }
}

/// `M_0 = N × {0} × P`.
pub fn cone_m0() -> FiberOracle {
    Arc::new(M0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Min,
    Max,
}

struct Failure {
    alpha: f64,
    which: Which,
}

impl Failure {
    fn matrix(&self, j: &Jet2) -> SymMat {
        let n = j.n();
        let pn = j.p_norm();
        if pn == 0.0 {
            return j.a.clone();
        }
        let w = pn.powf((self.alpha - 1.0) / n as f64);
        let extra = (self.alpha - 1.0) * w / (pn * pn);
        &j.a + &SymMat::from_fn(n, |i, k| {
            let id = if i == k { w } else { 0.0 };
            id + extra * j.p[i] * j.p[k]
        })
    }
}

impl Fiber for Failure {
    fn arity(&self) -> Arity {
        Arity::Full
    }
    fn label(&self) -> String {
        let w = match self.which {
            Which::Min => "min",
            Which::Max => "max",
        };
        format!("failure:alpha={},{w}", self.alpha)
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        let m = self.matrix(j);
        Ok(match self.which {
            Which::Min => m.lambda_min(),
            Which::Max => m.lambda_max(),
        })
    }
}

/// Sign of `λ_min` (or `λ_max`) of `A + |p|^{(α−1)/n}(P_{p⊥} + α P_p)`.
pub fn fiber_failure_example(alpha: f64, which: Which) -> Result<FiberOracle> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::BadAlpha(alpha));
    }
    Ok(Arc::new(Failure { alpha, which }))
}

struct Whole;

impl Fiber for Whole {
    fn arity(&self) -> Arity {
        Arity::PureSecondOrder
    }
    fn label(&self) -> String {
        "whole".into()
    }
    fn functional(&self, _j: &Jet2) -> Result<f64> {
        Ok(f64::INFINITY)
    }
}

/// The unconstrained domain: every jet is interior.
pub fn whole_space() -> FiberOracle {
    Arc::new(Whole)
}
