//! Subequation fiber oracles.
//!
//! Every oracle exposes a continuous scalar *defining functional* that is
//! nonnegative exactly on the fiber. Classification compares it against a
//! caller tolerance: above `tol` is interior, below `-tol` exterior, and the
//! band in between is reported as boundary.

mod cones;
mod keys;
mod monotone;
pub mod variable;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jets::Jet2;

pub use cones::{
    cone_lagrangian, cone_m0, cone_p, cone_p_dual, cone_pfold, cone_pucci, cone_q, cone_q_dual,
    cone_quasiconvex, cone_sigma_k, branch, elementary_symmetric, fiber_failure_example,
    lagrangian_mu, sigma_shift, whole_space, Which,
};
pub use variable::{BoxDomain, VariableFiberMap};
pub use keys::{catalog_entries, CatalogEntry, CatalogKey, VarKind};
#[cfg(test)]
pub(crate) use cones::pucci_value;
pub use monotone::{cone_m, DirectionalCone, MonotonicityCone, Radius};

/// Default classification tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arity {
    /// Depends on the Hessian part only.
    PureSecondOrder,
    /// Depends on `(r, A)`.
    GradientFree,
    /// Depends on `(r, p, A)`.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Interior,
    Boundary,
    Exterior,
}

/// Result of classifying a jet: the region, a nonnegative margin (0 on the
/// boundary band) and the signed value of the defining functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub region: Region,
    pub margin: f64,
    pub value: f64,
}

impl Classification {
    pub fn from_value(value: f64, tol: f64) -> Self {
        if value > tol {
            Self { region: Region::Interior, margin: value, value }
        } else if value < -tol {
            Self { region: Region::Exterior, margin: -value, value }
        } else {
            Self { region: Region::Boundary, margin: 0.0, value }
        }
    }

    pub fn is_member(&self) -> bool {
        self.region != Region::Exterior
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::Interior => "Interior",
            Region::Boundary => "Boundary",
            Region::Exterior => "Exterior",
        };
        f.write_str(s)
    }
}

/// A membership classifier for a subequation fiber.
pub trait Fiber: Send + Sync {
    fn arity(&self) -> Arity;

    fn label(&self) -> String;

    /// Signed defining functional, `>= 0` exactly on the fiber.
    fn functional(&self, j: &Jet2) -> Result<f64>;

    fn classify(&self, j: &Jet2, tol: f64) -> Result<Classification> {
        Ok(Classification::from_value(self.functional(j)?, tol))
    }

    fn contains(&self, j: &Jet2, tol: f64) -> Result<bool> {
        Ok(self.classify(j, tol)?.is_member())
    }
}

pub type FiberOracle = Arc<dyn Fiber>;

/// Finds `t` with `functional(j + t·dir) = 0` by expanding a bracket and
/// bisecting. The functional must be nondecreasing in `t`.
pub fn boundary_crossing(fiber: &dyn Fiber, j: &Jet2, dir: &Jet2, radius: f64) -> Result<Option<f64>> {
    let f = |t: f64| fiber.functional(&j.axpy(t, dir));
    let f0 = f(0.0)?;
    if f0 == 0.0 {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi);
    let mut step = 1.0;
    if f0 < 0.0 {
        lo = 0.0;
        loop {
            if step > radius {
                return Ok(None);
            }
            if f(step)? >= 0.0 {
                hi = step;
                break;
            }
            lo = step;
            step *= 2.0;
        }
    } else {
        hi = 0.0;
        loop {
            if step > radius {
                return Ok(None);
            }
            if f(-step)? < 0.0 {
                lo = -step;
                break;
            }
            hi = -step;
            step *= 2.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

struct FnFiber<F> {
    arity: Arity,
    label: String,
    f: F,
}

impl<F> Fiber for FnFiber<F>
where
    F: Fn(&Jet2) -> Result<f64> + Send + Sync,
{
    fn arity(&self) -> Arity {
        self.arity
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn functional(&self, j: &Jet2) -> Result<f64> {
        (self.f)(j)
    }
}

/// Wraps a defining functional as an oracle.
pub fn fiber_from_fn<F>(arity: Arity, label: impl Into<String>, f: F) -> FiberOracle
where
    F: Fn(&Jet2) -> Result<f64> + Send + Sync + 'static,
{
    Arc::new(FnFiber { arity, label: label.into(), f })
}
