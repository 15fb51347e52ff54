//! The fundamental family `M(γ, D, R)` of monotonicity cones.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Arity, Fiber, FiberOracle};
use crate::error::{Error, Result};
use crate::jets::{Jet2, SymMat};
use crate::sampling::{normal, normal_vec, random_psd, SampleRng};

/// Closed convex directional cone in gradient space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionalCone {
    /// All of `Rⁿ`.
    Full,
    /// `{p : ±p_axis ≥ 0}` (axis is 0-based).
    HalfSpace { axis: usize, positive: bool },
    /// `{p : p_j ≥ 0 for j ∈ S}` (0-based indices).
    Orthant(Vec<usize>),
}

impl DirectionalCone {
    fn check(&self, n: usize) -> Result<()> {
        let bad = match self {
            DirectionalCone::Full => None,
            DirectionalCone::HalfSpace { axis, .. } => (*axis >= n).then_some(*axis),
            DirectionalCone::Orthant(s) => s.iter().copied().find(|&j| j >= n),
        };
        match bad {
            Some(j) => Err(Error::IndexOutOfRange { index: j + 1, max: n }),
            None => Ok(()),
        }
    }

    /// Signed membership functional; `+∞` for the full space.
    pub fn functional(&self, p: &[f64]) -> Result<f64> {
        self.check(p.len())?;
        Ok(match self {
            DirectionalCone::Full => f64::INFINITY,
            DirectionalCone::HalfSpace { axis, positive } => {
                if *positive {
                    p[*axis]
                } else {
                    -p[*axis]
                }
            }
            DirectionalCone::Orthant(s) => s.iter().map(|&j| p[j]).fold(f64::INFINITY, f64::min),
        })
    }

    /// A unit vector in the interior (zero for the full space).
    pub fn interior_direction(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        match self {
            DirectionalCone::Full => {}
            DirectionalCone::HalfSpace { axis, positive } => {
                v[*axis] = if *positive { 1.0 } else { -1.0 };
            }
            DirectionalCone::Orthant(s) => {
                let w = 1.0 / (s.len() as f64).sqrt();
                for &j in s {
                    v[j] = w;
                }
            }
        }
        v
    }

    /// Folds a vector into the cone by reflecting the constrained coordinates.
    pub fn project_into(&self, p: &mut [f64]) {
        match self {
            DirectionalCone::Full => {}
            DirectionalCone::HalfSpace { axis, positive } => {
                p[*axis] = if *positive { p[*axis].abs() } else { -p[*axis].abs() };
            }
            DirectionalCone::Orthant(s) => {
                for &j in s {
                    p[j] = p[j].abs();
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut SampleRng, n: usize) -> Vec<f64> {
        let mut p = normal_vec(rng, n);
        self.project_into(&mut p);
        p
    }
}

impl fmt::Display for DirectionalCone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectionalCone::Full => write!(f, "full"),
            DirectionalCone::HalfSpace { axis, positive } => {
                write!(f, "half:{}e{}", if *positive { "" } else { "-" }, axis + 1)
            }
            DirectionalCone::Orthant(s) => {
                let parts: Vec<String> = s.iter().map(|j| (j + 1).to_string()).collect();
                write!(f, "orthant:{}", parts.join("+"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Radius {
    Finite(f64),
    Infinite,
}

impl Radius {
    /// `1/R`, zero for `R = ∞`.
    pub fn inverse(self) -> f64 {
        match self {
            Radius::Finite(r) => 1.0 / r,
            Radius::Infinite => 0.0,
        }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => write!(f, "{r}"),
            Radius::Infinite => write!(f, "inf"),
        }
    }
}

/// `M(γ, D, R) = {(r, p, A) : r ≤ −γ|p|, p ∈ D, A ≥ (|p|/R) I}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCone {
    pub gamma: f64,
    pub cone: DirectionalCone,
    pub radius: Radius,
}

impl MonotonicityCone {
    pub fn new(gamma: f64, cone: DirectionalCone, radius: Radius) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::BadParameters(format!("gamma must be nonnegative, got {gamma}")));
        }
        if let Radius::Finite(r) = radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::BadParameters(format!("R must be positive, got {r}")));
            }
        }
        if let DirectionalCone::Orthant(s) = &cone {
            if s.is_empty() {
                return Err(Error::BadParameters("orthant needs at least one index".into()));
            }
        }
        Ok(Self { gamma, cone, radius })
    }

    /// `M(0, Rⁿ, ∞) = N × Rⁿ × P`, the minimal monotonicity used by
    /// pure second-order and gradient-free fibers.
    pub fn minimal() -> Self {
        Self { gamma: 0.0, cone: DirectionalCone::Full, radius: Radius::Infinite }
    }

    pub fn functional(&self, j: &Jet2) -> Result<f64> {
        let pn = j.p_norm();
        let value = -j.r - self.gamma * pn;
        let dir = self.cone.functional(&j.p)?;
        let hess = j.a.lambda_min() - pn * self.radius.inverse();
        Ok(value.min(dir).min(hess))
    }

    /// A jet in the interior: `(−γ|p₀| − 1, p₀, (|p₀|/R + 1) I)`.
    pub fn interior_reference(&self, n: usize) -> Jet2 {
        let p0 = self.cone.interior_direction(n);
        let pn = p0.iter().map(|x| x * x).sum::<f64>().sqrt();
        Jet2 {
            r: -self.gamma * pn - 1.0,
            p: p0,
            a: SymMat::identity(n).shift(pn * self.radius.inverse()),
        }
    }

    /// Random member, occasionally on a face of the cone.
    pub fn sample_member(&self, rng: &mut SampleRng, n: usize) -> Jet2 {
        let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let mut p: Vec<f64> = self.cone.sample(rng, n).into_iter().map(|x| scale * x).collect();
        if rng.random_range(0..4) == 0 {
            p = vec![0.0; n];
        }
        let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let slack = if rng.random_range(0..4) == 0 { 0.0 } else { scale * normal(rng).abs() };
        let r = -self.gamma * pn - slack;
        let a = random_psd(rng, n, scale).shift(pn * self.radius.inverse());
        Jet2 { r, p, a }
    }
}

impl fmt::Display for MonotonicityCone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M:gamma={},D={},R={}", self.gamma, self.cone, self.radius)
    }
}

struct MCone(MonotonicityCone);

impl Fiber for MCone {
    fn arity(&self) -> Arity {
        Arity::Full
    }
    fn label(&self) -> String {
        self.0.to_string()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        self.0.functional(j)
    }
}

pub fn cone_m(m: &MonotonicityCone) -> FiberOracle {
    Arc::new(MCone(m.clone()))
}
