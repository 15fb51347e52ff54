//! Level-set domains, second fundamental forms and strict boundary
//! pseudoconvexity.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::catalog::{BoxDomain, Fiber, Region};
use crate::error::{Error, Result};
use crate::jets::{trace_on_subspace, Jet2, SymMat};
use crate::sampling::{random_frame, seeded, unit_vector};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&[f64]) -> SymMat + Send + Sync>;

/// Gradients smaller than this make a boundary point singular.
pub const GRAD_FLOOR: f64 = 1e-8;
/// Largest `|φ|` accepted as on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-8;

/// `Ω = {φ < 0}` with analytic derivatives and a box containing the region
/// of interest.
#[derive(Clone)]
pub struct LevelSetDomain {
    pub label: String,
    pub phi: ScalarFn,
    pub grad: VectorFn,
    pub hess: HessianFn,
    pub bbox: BoxDomain,
}

impl std::fmt::Debug for LevelSetDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevelSetDomain").field("label", &self.label).field("bbox", &self.bbox).finish()
    }
}

/// JSON description of a preset domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    /// `|x|² − r²`.
    Sphere { n: usize, radius: f64 },
    /// `x₁² − w²`: two parallel faces.
    Slab { n: usize, half_width: f64 },
    /// `Σ x_i²/a_i² − 1`.
    Ellipsoid { axes: Vec<f64> },
    /// `x₁² + x₂² − r²` in `R³`.
    Cylinder { radius: f64 },
    /// `x₃ − x₁² + x₂²`, a saddle patch over the origin.
    Saddle,
}

impl DomainSpec {
    pub fn build(&self) -> Result<LevelSetDomain> {
        match self {
            DomainSpec::Sphere { n, radius } => LevelSetDomain::sphere(*n, *radius),
            DomainSpec::Slab { n, half_width } => LevelSetDomain::slab(*n, *half_width),
            DomainSpec::Ellipsoid { axes } => LevelSetDomain::ellipsoid(axes),
            DomainSpec::Cylinder { radius } => LevelSetDomain::cylinder(*radius),
            DomainSpec::Saddle => LevelSetDomain::saddle(),
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > crate::jets::MAX_DIM {
        return Err(Error::DimensionOutOfRange(n));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::BadParameters(format!("{name} must be positive, got {v}")))
    }
}

impl LevelSetDomain {
    pub fn new(label: impl Into<String>, phi: ScalarFn, grad: VectorFn, hess: HessianFn, bbox: BoxDomain) -> Self {
        Self { label: label.into(), phi, grad, hess, bbox }
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn sphere(n: usize, radius: f64) -> Result<Self> {
        check_dim(n)?;
        positive("radius", radius)?;
        let r2 = radius * radius;
        Ok(Self::new(
            format!("sphere(n={n}, r={radius})"),
            Arc::new(move |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() - r2),
            Arc::new(|x: &[f64]| x.iter().map(|v| 2.0 * v).collect()),
            Arc::new(move |_: &[f64]| SymMat::diag(&vec![2.0; n])),
            BoxDomain::cube(n, radius)?,
        ))
    }

    pub fn slab(n: usize, half_width: f64) -> Result<Self> {
        check_dim(n)?;
        positive("half width", half_width)?;
        let w2 = half_width * half_width;
        let mut hi = vec![2.0 * half_width; n];
        hi[0] = half_width;
        let lo = hi.iter().map(|v| -v).collect();
        Ok(Self::new(
            format!("slab(n={n}, w={half_width})"),
            Arc::new(move |x: &[f64]| x[0] * x[0] - w2),
            Arc::new(move |x: &[f64]| {
                let mut g = vec![0.0; n];
                g[0] = 2.0 * x[0];
                g
            }),
            Arc::new(move |_: &[f64]| SymMat::from_fn(n, |i, j| if i == 0 && j == 0 { 2.0 } else { 0.0 })),
            BoxDomain::new(lo, hi)?,
        ))
    }

    pub fn ellipsoid(axes: &[f64]) -> Result<Self> {
        let n = axes.len();
        check_dim(n)?;
        for &a in axes {
            positive("semi-axis", a)?;
        }
        let inv: Vec<f64> = axes.iter().map(|a| 1.0 / (a * a)).collect();
        let (i1, i2, i3) = (inv.clone(), inv.clone(), inv);
        Ok(Self::new(
            format!("ellipsoid({axes:?})"),
            Arc::new(move |x: &[f64]| x.iter().zip(&i1).map(|(v, w)| v * v * w).sum::<f64>() - 1.0),
            Arc::new(move |x: &[f64]| x.iter().zip(&i2).map(|(v, w)| 2.0 * v * w).collect()),
            Arc::new(move |_: &[f64]| SymMat::diag(&i3.iter().map(|w| 2.0 * w).collect::<Vec<_>>())),
            BoxDomain::new(axes.iter().map(|a| -a).collect(), axes.to_vec())?,
        ))
    }

    pub fn cylinder(radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        let r2 = radius * radius;
        Ok(Self::new(
            format!("cylinder(r={radius})"),
            Arc::new(move |x: &[f64]| x[0] * x[0] + x[1] * x[1] - r2),
            Arc::new(|x: &[f64]| vec![2.0 * x[0], 2.0 * x[1], 0.0]),
            Arc::new(|_: &[f64]| SymMat::diag(&[2.0, 2.0, 0.0])),
            BoxDomain::new(vec![-radius, -radius, -2.0 * radius], vec![radius, radius, 2.0 * radius])?,
        ))
    }

    pub fn saddle() -> Result<Self> {
        Ok(Self::new(
            "saddle",
            Arc::new(|x: &[f64]| x[2] - x[0] * x[0] + x[1] * x[1]),
            Arc::new(|x: &[f64]| vec![-2.0 * x[0], 2.0 * x[1], 1.0]),
            Arc::new(|_: &[f64]| SymMat::diag(&[-2.0, 2.0, 0.0])),
            BoxDomain::cube(3, 1.0)?,
        ))
    }

    /// Newton steps along the gradient, `x ← x − φ∇φ/|∇φ|²`, until
    /// `|φ| ≤ 1e-12`.
    pub fn project(&self, seed: &[f64]) -> Result<Vec<f64>> {
        if seed.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: seed.len() });
        }
        let mut x = seed.to_vec();
        for _ in 0..200 {
            let v = (self.phi)(&x);
            if v.abs() <= 1e-12 {
                return Ok(x);
            }
            let g = (self.grad)(&x);
            let g2: f64 = g.iter().map(|c| c * c).sum();
            if g2.sqrt() <= GRAD_FLOOR {
                return Err(Error::SingularGradient { norm: g2.sqrt() });
            }
            x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= v * gi / g2);
        }
        Err(Error::NotConverged { iterations: 200, residual: (self.phi)(&x).abs() })
    }

    /// Largest deviation of the analytic gradient and Hessian from central
    /// differences of `φ` (step `h`) at `samples` random points of the box.
    pub fn derivative_defect(&self, samples: usize, h: f64, seed: u64) -> (f64, f64) {
        use rand::Rng;
        let n = self.dim();
        let mut rng = seeded(seed);
        let (mut dg, mut dh) = (0.0_f64, 0.0_f64);
        for _ in 0..samples {
            let x: Vec<f64> =
                (0..n).map(|i| self.bbox.lo[i] + (self.bbox.hi[i] - self.bbox.lo[i]) * rng.random::<f64>()).collect();
            let at = |d: &[(usize, f64)]| {
                let mut y = x.clone();
                for &(i, s) in d {
                    y[i] += s;
                }
                (self.phi)(&y)
            };
            let g = (self.grad)(&x);
            let hm = (self.hess)(&x);
            for i in 0..n {
                let fd = (at(&[(i, h)]) - at(&[(i, -h)])) / (2.0 * h);
                dg = dg.max((fd - g[i]).abs());
                for j in 0..n {
                    let fd = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                        + at(&[(i, -h), (j, -h)]))
                        / (4.0 * h * h);
                    dh = dh.max((fd - hm.get(i, j)).abs());
                }
            }
        }
        (dg, dh)
    }
}

/// Geometry at a boundary point: inward normal, the second fundamental form
/// extended by zero on the normal line, and a tangent frame.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPointData {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub a_x: SymMat,
    pub tangent_frame: Vec<Vec<f64>>,
    /// Eigenvalues of `A_x` on the tangent space, ascending.
    pub principal_curvatures: Vec<f64>,
}

/// `e = −∇φ/|∇φ|` and `A_x = P ∇²φ P / |∇φ|` with `P` the tangential
/// projection; the unit sphere gets `A_x = I` on its tangent spaces.
pub fn boundary_point(dom: &LevelSetDomain, x: &[f64]) -> Result<BoundaryPointData> {
    let n = dom.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let value = (dom.phi)(x);
    if value.abs() > BOUNDARY_TOL {
        return Err(Error::NotOnBoundary { value });
    }
    let g = (dom.grad)(x);
    let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm <= GRAD_FLOOR {
        return Err(Error::SingularGradient { norm });
    }
    let e: Vec<f64> = g.iter().map(|c| -c / norm).collect();
    let p = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - e[i] * e[j]);
    let h = (dom.hess)(x);
    let a = SymMat::symmetrize(&(&p * h.as_matrix() * &p / norm));
    // Tangent frame: eigenvectors of P with eigenvalue 1.
    let frame = tangent_basis(&e);
    let w = DMatrix::from_fn(n, frame.len(), |i, k| frame[k][i]);
    let restricted = SymMat::symmetrize(&(w.transpose() * a.as_matrix() * &w));
    let principal_curvatures = if frame.is_empty() { vec![] } else { restricted.eigenvalues() };
    Ok(BoundaryPointData { x: x.to_vec(), e, a_x: a, tangent_frame: frame, principal_curvatures })
}

/// Orthonormal basis of `e⊥` by Gram–Schmidt on the coordinate axes.
fn tangent_basis(e: &[f64]) -> Vec<Vec<f64>> {
    let n = e.len();
    let mut basis: Vec<Vec<f64>> = vec![e.to_vec()];
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
        }
        let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len > 1e-8 {
            basis.push(v.iter().map(|a| a / len).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum PseudoconvexVerdict {
    /// `A_x + tP_e ∈ Int F` for all `t ≥ t0` (up to the cap).
    Yes { t0: f64 },
    /// Not interior at the cap.
    No,
}

impl PseudoconvexVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, PseudoconvexVerdict::Yes { .. })
    }
}

/// Probes `A_x + t·P_e` at `t = t_cap`; if interior, bisects down (over
/// `[−t_cap, t_cap]`) to the smallest interior `t` within `tol`. Positivity
/// of `F` makes membership monotone in `t`.
pub fn strict_pseudoconvex_at(f: &dyn Fiber, bp: &BoundaryPointData, t_cap: f64, tol: f64) -> Result<PseudoconvexVerdict> {
    let pe = SymMat::rank_one_projector(&bp.e);
    let interior = |t: f64| -> Result<bool> {
        Ok(f.classify(&Jet2::pure(&bp.a_x + &(t * &pe)), tol)?.region == Region::Interior)
    };
    if !interior(t_cap)? {
        return Ok(PseudoconvexVerdict::No);
    }
    if interior(-t_cap)? {
        return Ok(PseudoconvexVerdict::Yes { t0: -t_cap });
    }
    let (mut lo, mut hi) = (-t_cap, t_cap);
    while hi - lo > tol.max(1e-15 * t_cap) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if interior(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(PseudoconvexVerdict::Yes { t0: hi })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrictEllipticityReport {
    pub holds: bool,
    pub checked: usize,
    /// Smallest functional value of `P_e` over the sampled directions.
    pub worst_value: f64,
    pub witness: Option<Vec<f64>>,
}

/// Tests `P_e ∈ Int F` over the coordinate axes and `samples` seeded unit
/// directions.
pub fn strict_ellipticity_check(f: &dyn Fiber, n: usize, samples: usize, seed: u64, tol: f64) -> Result<StrictEllipticityReport> {
    check_dim(n)?;
    let mut rng = seeded(seed);
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v
        })
        .collect();
    dirs.extend((0..samples).map(|_| unit_vector(&mut rng, n)));
    let mut rep = StrictEllipticityReport { holds: true, checked: 0, worst_value: f64::INFINITY, witness: None };
    for e in dirs {
        let value = f.functional(&Jet2::pure(SymMat::rank_one_projector(&e)))?;
        rep.checked += 1;
        if value < rep.worst_value {
            rep.worst_value = value;
            if value <= tol {
                rep.holds = false;
                rep.witness = Some(e);
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricReport {
    pub holds: bool,
    pub planes: usize,
    /// Smallest trace of `A_x` over the sampled tangential planes.
    pub worst_trace: f64,
}

/// Samples tangential `k`-planes (including the span of the `k` smallest
/// principal directions) and checks `tr(A_x|_W) > tol` on each. Vacuously
/// true when `k` exceeds the tangent dimension.
pub fn geometric_pseudoconvex_at(k: usize, bp: &BoundaryPointData, samples: usize, seed: u64, tol: f64) -> Result<GeometricReport> {
    let n = bp.x.len();
    let m = bp.tangent_frame.len();
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, max: n });
    }
    if k > m {
        return Ok(GeometricReport { holds: true, planes: 0, worst_trace: f64::INFINITY });
    }
    let t = DMatrix::from_fn(n, m, |i, j| bp.tangent_frame[j][i]);
    let restricted = SymMat::symmetrize(&(t.transpose() * bp.a_x.as_matrix() * &t));
    let spec = restricted.spectrum();
    let lowest = DMatrix::from_fn(m, k, |i, j| spec.frame[(i, j)]);
    let mut frames = vec![&t * lowest];
    let mut rng = seeded(seed);
    for _ in 0..samples {
        frames.push(&t * random_frame(&mut rng, m, k));
    }
    let mut worst = f64::INFINITY;
    for w in &frames {
        worst = worst.min(trace_on_subspace(&bp.a_x, w)?);
    }
    Ok(GeometricReport { holds: worst > tol, planes: frames.len(), worst_trace: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{cone_p, cone_pfold};
    use approx::assert_relative_eq;

    fn parametric_curvature(a: f64, b: f64, t: f64) -> f64 {
        a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5)
    }

    #[test]
    fn ellipse_curvatures_match_parametric_formula() {
        let dom = LevelSetDomain::ellipsoid(&[2.0, 1.0]).unwrap();
        for (x, k) in [([2.0, 0.0], 2.0), ([0.0, 1.0], 0.25)] {
            let bp = boundary_point(&dom, &x).unwrap();
            assert_relative_eq!(bp.principal_curvatures[0], k, epsilon = 1e-12);
        }
        for i in 0..16 {
            let t = 0.37 * i as f64;
            let x = [2.0 * t.cos(), t.sin()];
            let bp = boundary_point(&dom, &x).unwrap();
            assert_relative_eq!(bp.principal_curvatures[0], parametric_curvature(2.0, 1.0, t), epsilon = 1e-10);
        }
    }

    #[test]
    fn curvature_matches_normal_turning_rate() {
        // |de/ds| along the curve, by finite differences of the unit normal.
        let dom = LevelSetDomain::ellipsoid(&[2.0, 1.0]).unwrap();
        let t = 0.8_f64;
        let h = 1e-5;
        let pt = |s: f64| [2.0 * s.cos(), s.sin()];
        let e0 = boundary_point(&dom, &pt(t - h)).unwrap().e;
        let e1 = boundary_point(&dom, &pt(t + h)).unwrap().e;
        let ds = {
            let (p, q) = (pt(t - h), pt(t + h));
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        };
        let turning = ((e1[0] - e0[0]).powi(2) + (e1[1] - e0[1]).powi(2)).sqrt() / ds;
        let bp = boundary_point(&dom, &pt(t)).unwrap();
        assert_relative_eq!(bp.principal_curvatures[0], turning, epsilon = 1e-6);
    }

    #[test]
    fn presets_have_consistent_derivatives() {
        let doms = [
            LevelSetDomain::sphere(3, 1.5).unwrap(),
            LevelSetDomain::slab(2, 1.0).unwrap(),
            LevelSetDomain::ellipsoid(&[1.0, 2.0, 3.0]).unwrap(),
            LevelSetDomain::cylinder(1.0).unwrap(),
            LevelSetDomain::saddle().unwrap(),
        ];
        for d in &doms {
            let (dg, dh) = d.derivative_defect(10, 1e-4, 3);
            assert!(dg < 1e-6 && dh < 1e-5, "{}: {dg} {dh}", d.label);
        }
    }

    #[test]
    fn preset_curvatures() {
        let s = LevelSetDomain::sphere(3, 2.0).unwrap();
        let x = s.project(&[1.0, 1.0, 1.0]).unwrap();
        let bp = boundary_point(&s, &x).unwrap();
        for k in &bp.principal_curvatures {
            assert_relative_eq!(*k, 0.5, epsilon = 1e-10);
        }
        assert_relative_eq!(bp.a_x.quadratic_form(&bp.e), 0.0, epsilon = 1e-12);

        let c = LevelSetDomain::cylinder(1.0).unwrap();
        let bp = boundary_point(&c, &[1.0, 0.0, 0.3]).unwrap();
        assert_relative_eq!(bp.principal_curvatures[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(bp.principal_curvatures[1], 1.0, epsilon = 1e-12);

        let sd = LevelSetDomain::saddle().unwrap();
        let bp = boundary_point(&sd, &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(bp.principal_curvatures[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(bp.principal_curvatures[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_point_errors() {
        let s = LevelSetDomain::sphere(2, 1.0).unwrap();
        assert!(matches!(boundary_point(&s, &[0.5, 0.0]), Err(Error::NotOnBoundary { .. })));
        let sing = LevelSetDomain::new(
            "cone",
            Arc::new(|x: &[f64]| x[0] * x[0] - x[1] * x[1]),
            Arc::new(|x: &[f64]| vec![2.0 * x[0], -2.0 * x[1]]),
            Arc::new(|_: &[f64]| SymMat::diag(&[2.0, -2.0])),
            BoxDomain::cube(2, 1.0).unwrap(),
        );
        assert!(matches!(boundary_point(&sing, &[0.0, 0.0]), Err(Error::SingularGradient { .. })));
        assert!(matches!(boundary_point(&s, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn convexity_of_sphere_and_flatness_of_slab() {
        let p = cone_p();
        let s = LevelSetDomain::sphere(3, 1.0).unwrap();
        let bp = boundary_point(&s, &[0.0, 0.0, 1.0]).unwrap();
        match strict_pseudoconvex_at(p.as_ref(), &bp, 1e6, 1e-9).unwrap() {
            PseudoconvexVerdict::Yes { t0 } => assert!(t0.abs() < 1e-6, "{t0}"),
            PseudoconvexVerdict::No => panic!("sphere should be strictly convex"),
        }
        assert!(geometric_pseudoconvex_at(1, &bp, 20, 1, 1e-9).unwrap().holds);

        let slab = LevelSetDomain::slab(3, 1.0).unwrap();
        let bp = boundary_point(&slab, &[1.0, 0.2, -0.4]).unwrap();
        assert_eq!(strict_pseudoconvex_at(p.as_ref(), &bp, 1e6, 1e-9).unwrap(), PseudoconvexVerdict::No);
        let g = geometric_pseudoconvex_at(2, &bp, 20, 1, 1e-9).unwrap();
        assert!(!g.holds && g.worst_trace.abs() < 1e-12);
    }

    #[test]
    fn geometric_test_agrees_with_partial_sums_of_curvatures() {
        let dom = LevelSetDomain::ellipsoid(&[1.0, 2.0, 3.0]).unwrap();
        let x = dom.project(&[0.4, -1.0, 1.7]).unwrap();
        let bp = boundary_point(&dom, &x).unwrap();
        let k = &bp.principal_curvatures;
        let rep = geometric_pseudoconvex_at(1, &bp, 200, 9, 1e-12).unwrap();
        assert_relative_eq!(rep.worst_trace, k[0], epsilon = 1e-10);
        let rep = geometric_pseudoconvex_at(2, &bp, 50, 9, 1e-12).unwrap();
        assert_relative_eq!(rep.worst_trace, k[0] + k[1], epsilon = 1e-10);
        assert!(geometric_pseudoconvex_at(3, &bp, 5, 9, 1e-12).unwrap().holds);
    }

    #[test]
    fn strict_ellipticity_of_cones() {
        let p = cone_p();
        let rep = strict_ellipticity_check(p.as_ref(), 3, 20, 4, 1e-12).unwrap();
        assert!(!rep.holds && rep.witness.is_some());
        let lap = cone_pfold(3).unwrap();
        let rep = strict_ellipticity_check(lap.as_ref(), 3, 20, 4, 1e-12).unwrap();
        assert!(rep.holds, "{rep:?}");
        let p2 = cone_pfold(2).unwrap();
        assert!(!strict_ellipticity_check(p2.as_ref(), 3, 20, 4, 1e-12).unwrap().holds);
    }
}
