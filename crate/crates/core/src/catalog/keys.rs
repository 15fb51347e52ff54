//! String keys addressing catalog entries.
//!
//! ```text
//! key      := "P" | "P~" | "Q" | "Q~" | "M0" | "lagrangian"
//!           | "branch:k=" INT | "pfold:p=" INT | "sigma:k=" INT
//!           | "pucci:" NUM "," NUM | "quasiconvex:" NUM
//!           | "M:gamma=" NUM ",D=" dcone ",R=" (NUM | "inf")
//!           | "failure:alpha=" NUM "," ("min" | "max")
//!           | "var:" ("perturbed-ma" | "special-lagrangian" | "affine-sphere" | "optimal-transport")
//! dcone    := "full" | "half:" ["-"] "e" INT | "orthant:" INT ("+" INT)*
//! ```
//! Indices in keys are 1-based. `Display` prints the canonical form, and
//! parsing it back yields the same key.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::cones::*;
use super::monotone::{cone_m, DirectionalCone, MonotonicityCone, Radius};
use super::{Arity, FiberOracle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    PerturbedMongeAmpere,
    SpecialLagrangian,
    AffineSphere,
    OptimalTransport,
}

impl VarKind {
    fn name(self) -> &'static str {
        match self {
            VarKind::PerturbedMongeAmpere => "perturbed-ma",
            VarKind::SpecialLagrangian => "special-lagrangian",
            VarKind::AffineSphere => "affine-sphere",
            VarKind::OptimalTransport => "optimal-transport",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogKey {
    P,
    PDual,
    Q,
    QDual,
    M0,
    Lagrangian,
    Branch(usize),
    PFold(usize),
    Sigma(usize),
    Pucci(f64, f64),
    Quasiconvex(f64),
    M(MonotonicityCone),
    Failure(f64, Which),
    Var(VarKind),
}

impl CatalogKey {
    /// Builds the constant-coefficient oracle. Variable fibers need
    /// coefficient fields and are built through `catalog::variable`.
    pub fn build(&self) -> Result<FiberOracle> {
        Ok(match self {
            CatalogKey::P => cone_p(),
            CatalogKey::PDual => cone_p_dual(),
            CatalogKey::Q => cone_q(),
            CatalogKey::QDual => cone_q_dual(),
            CatalogKey::M0 => cone_m0(),
            CatalogKey::Lagrangian => cone_lagrangian(),
            CatalogKey::Branch(k) => branch(*k)?,
            CatalogKey::PFold(p) => cone_pfold(*p)?,
            CatalogKey::Sigma(k) => cone_sigma_k(*k)?,
            CatalogKey::Pucci(a, b) => cone_pucci(*a, *b)?,
            CatalogKey::Quasiconvex(l) => cone_quasiconvex(*l)?,
            CatalogKey::M(m) => cone_m(m),
            CatalogKey::Failure(a, w) => fiber_failure_example(*a, *w)?,
            CatalogKey::Var(v) => {
                return Err(Error::Precondition(format!(
                    "var:{} is a variable-coefficient fiber; build it with its coefficient fields",
                    v.name()
                )))
            }
        })
    }
}

impl fmt::Display for CatalogKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogKey::P => write!(f, "P"),
            CatalogKey::PDual => write!(f, "P~"),
            CatalogKey::Q => write!(f, "Q"),
            CatalogKey::QDual => write!(f, "Q~"),
            CatalogKey::M0 => write!(f, "M0"),
            CatalogKey::Lagrangian => write!(f, "lagrangian"),
            CatalogKey::Branch(k) => write!(f, "branch:k={k}"),
            CatalogKey::PFold(p) => write!(f, "pfold:p={p}"),
            CatalogKey::Sigma(k) => write!(f, "sigma:k={k}"),
            CatalogKey::Pucci(a, b) => write!(f, "pucci:{a},{b}"),
            CatalogKey::Quasiconvex(l) => write!(f, "quasiconvex:{l}"),
            CatalogKey::M(m) => write!(f, "{m}"),
            CatalogKey::Failure(a, w) => {
                write!(f, "failure:alpha={a},{}", if *w == Which::Min { "min" } else { "max" })
            }
            CatalogKey::Var(v) => write!(f, "var:{}", v.name()),
        }
    }
}

fn parse_num(s: &str, key: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}' in key '{key}'")))
}

fn parse_index(s: &str, key: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad index '{s}' in key '{key}'")))
}

fn parse_dcone(s: &str, key: &str) -> Result<DirectionalCone> {
    if s == "full" {
        return Ok(DirectionalCone::Full);
    }
    if let Some(rest) = s.strip_prefix("half:") {
        let (positive, rest) = match rest.strip_prefix('-') {
            Some(r) => (false, r),
            None => (true, rest),
        };
        let idx = rest
            .strip_prefix('e')
            .ok_or_else(|| Error::Parse(format!("half-space needs e<i> in '{key}'")))?;
        let i = parse_index(idx, key)?;
        if i == 0 {
            return Err(Error::Parse(format!("indices are 1-based in '{key}'")));
        }
        return Ok(DirectionalCone::HalfSpace { axis: i - 1, positive });
    }
    if let Some(rest) = s.strip_prefix("orthant:") {
        let mut idx = Vec::new();
        for part in rest.split('+') {
            let i = parse_index(part, key)?;
            if i == 0 {
                return Err(Error::Parse(format!("indices are 1-based in '{key}'")));
            }
            idx.push(i - 1);
        }
        return Ok(DirectionalCone::Orthant(idx));
    }
    Err(Error::Parse(format!("unknown directional cone '{s}' in '{key}'")))
}

fn parse_m(body: &str, key: &str) -> Result<MonotonicityCone> {
    let rest = body
        .strip_prefix("gamma=")
        .ok_or_else(|| Error::Parse(format!("expected gamma= in '{key}'")))?;
    let (gamma, rest) = rest
        .split_once(",D=")
        .ok_or_else(|| Error::Parse(format!("expected ,D= in '{key}'")))?;
    let (dcone, radius) = rest
        .rsplit_once(",R=")
        .ok_or_else(|| Error::Parse(format!("expected ,R= in '{key}'")))?;
    let radius = if radius == "inf" { Radius::Infinite } else { Radius::Finite(parse_num(radius, key)?) };
    MonotonicityCone::new(parse_num(gamma, key)?, parse_dcone(dcone, key)?, radius)
}

impl FromStr for CatalogKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        let simple = match key {
            "P" => Some(CatalogKey::P),
            "P~" => Some(CatalogKey::PDual),
            "Q" => Some(CatalogKey::Q),
            "Q~" => Some(CatalogKey::QDual),
            "M0" => Some(CatalogKey::M0),
            "lagrangian" => Some(CatalogKey::Lagrangian),
            _ => None,
        };
        if let Some(k) = simple {
            return Ok(k);
        }
        let (head, body) = key.split_once(':').ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        let parsed = match head {
            "branch" => CatalogKey::Branch(parse_index(strip(body, "k=", key)?, key)?),
            "pfold" => CatalogKey::PFold(parse_index(strip(body, "p=", key)?, key)?),
            "sigma" => CatalogKey::Sigma(parse_index(strip(body, "k=", key)?, key)?),
            "pucci" => {
                let (a, b) = body
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("pucci needs two parameters in '{key}'")))?;
                CatalogKey::Pucci(parse_num(a, key)?, parse_num(b, key)?)
            }
            "quasiconvex" => CatalogKey::Quasiconvex(parse_num(body, key)?),
            "M" => CatalogKey::M(parse_m(body, key)?),
            "failure" => {
                let (a, w) = body
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("failure needs alpha and min|max in '{key}'")))?;
                let which = match w {
                    "min" => Which::Min,
                    "max" => Which::Max,
                    _ => return Err(Error::Parse(format!("expected min or max in '{key}'"))),
                };
                CatalogKey::Failure(parse_num(strip(a, "alpha=", key)?, key)?, which)
            }
            "var" => CatalogKey::Var(match body {
                "perturbed-ma" => VarKind::PerturbedMongeAmpere,
                "special-lagrangian" => VarKind::SpecialLagrangian,
                "affine-sphere" => VarKind::AffineSphere,
                "optimal-transport" => VarKind::OptimalTransport,
                _ => return Err(Error::UnknownKey(key.to_string())),
            }),
            _ => return Err(Error::UnknownKey(key.to_string())),
        };
        // Parameter validation happens in the constructors.
        if !matches!(parsed, CatalogKey::Var(_)) {
            parsed.build()?;
        }
        Ok(parsed)
    }
}

fn strip<'a>(s: &'a str, prefix: &str, key: &str) -> Result<&'a str> {
    s.strip_prefix(prefix).ok_or_else(|| Error::Parse(format!("expected '{prefix}' in '{key}'")))
}

/// One row of the catalog listing.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub key: String,
    pub arity: Arity,
    pub parameters: String,
    pub inequality: String,
    pub anchor: String,
}

fn entry(key: &str, arity: Arity, parameters: &str, inequality: &str, anchor: &str) -> CatalogEntry {
    CatalogEntry {
        key: key.into(),
        arity,
        parameters: parameters.into(),
        inequality: inequality.into(),
        anchor: anchor.into(),
    }
}

/// Every catalog family with a representative key.
pub fn catalog_entries() -> Vec<CatalogEntry> {
    use Arity::*;
    vec![
        entry("P", PureSecondOrder, "none", "lambda_min(A) >= 0", "convexity subequation"),
        entry("P~", PureSecondOrder, "none", "lambda_max(A) >= 0", "subaffine subequation, dual of P"),
        entry("Q", GradientFree, "none", "r <= 0 and A >= 0", "Q = N x P"),
        entry("Q~", GradientFree, "none", "r <= 0 or lambda_max(A) >= 0", "dual of Q"),
        entry("M0", Full, "none", "r <= 0, p = 0, A >= 0", "M0 = N x {0} x P"),
        entry("branch:k=2", PureSecondOrder, "k in 1..=n", "lambda_k(A) >= 0", "k-th Monge-Ampere branch"),
        entry("pfold:p=2", PureSecondOrder, "p in 1..=n", "lambda_1 + ... + lambda_p >= 0", "polar of the p-plane Grassmannian"),
        entry("sigma:k=2", PureSecondOrder, "k in 1..=n", "sigma_j(lambda(A)) >= 0 for j <= k (closure of Gamma_k)", "k-Hessian Garding cone"),
        entry("pucci:1,2", PureSecondOrder, "0 < lam < Lam", "lam tr A+ + Lam tr A- >= 0", "Pucci cone"),
        entry("quasiconvex:1", PureSecondOrder, "lambda >= 0", "A + lambda I >= 0", "lambda-quasiconvexity"),
        entry("lagrangian", PureSecondOrder, "even dimension 2n", "tr(A)/2 - mu_1 - ... - mu_n >= 0", "polar of the Lagrangian Grassmannian"),
        entry("M:gamma=1,D=half:e1,R=inf", Full, "gamma >= 0, D in {full, half:e<i>, orthant:i+j}, R > 0 or inf", "r <= -gamma |p|, p in D, A >= (|p|/R) I", "fundamental monotonicity family"),
        entry("failure:alpha=2,min", Full, "alpha > 1, min|max", "lambda_min (or max) of A + |p|^((alpha-1)/n) (P_perp + alpha P_p) >= 0", "operator without comparison"),
        entry("var:perturbed-ma", PureSecondOrder, "matrix field M(x), source f(x) >= 0", "A + M(x) >= 0 and det(A + M(x)) >= f(x)", "perturbed Monge-Ampere"),
        entry("var:special-lagrangian", PureSecondOrder, "phase theta(x) in (-n pi/2, n pi/2)", "sum_k arctan lambda_k(A) >= theta(x)", "special Lagrangian potential equation"),
        entry("var:affine-sphere", GradientFree, "source f(x) >= 0", "r <= 0, A >= 0, (-r)^(n+2) det A >= f(x)", "hyperbolic affine sphere"),
        entry("var:optimal-transport", Full, "density g with directional cone D, source f(x)", "p in D, A >= 0, g(p) det A >= f(x)", "optimal transport"),
    ]
}
