//! 2-jets, symmetric matrices and their spectra.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 8;

/// Default Gram-deviation threshold for orthonormal frames.
pub const FRAME_TOL: f64 = 1e-8;

fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::DimensionOutOfRange(n))
    }
}

/// A real symmetric matrix. Storage is a full square matrix whose two
/// triangles are kept bitwise equal.
#[derive(Clone, PartialEq)]
pub struct SymMat {
    m: DMatrix<f64>,
}

impl SymMat {
    /// Validates squareness, dimension and exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare);
        }
        check_dim(n)?;
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::NotSymmetric { i, j });
                }
            }
        }
        Ok(Self { m: DMatrix::from_fn(n, n, |i, j| rows[i][j]) })
    }

    /// Builds a matrix from the upper triangle of `f`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { m }
    }

    /// Symmetrizes an arbitrary square matrix as (M + Mᵀ)/2.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        Self::from_fn(n, |i, j| if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) })
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// The orthogonal projector onto the line through `e` (need not be unit).
    pub fn rank_one_projector(e: &[f64]) -> Self {
        let nn: f64 = e.iter().map(|x| x * x).sum();
        Self::from_fn(e.len(), |i, j| e[i] * e[j] / nn)
    }

    /// `Σ_k w_k w_kᵀ` for the columns of `w`.
    pub fn projector_onto(w: &DMatrix<f64>) -> Self {
        Self::symmetrize(&(w * w.transpose()))
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| (0..self.n()).map(|j| self.m[(i, j)]).collect()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// A + tI.
    pub fn shift(&self, t: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..self.n() {
            m[(i, i)] += t;
        }
        Self { m }
    }

    /// QᵀAQ for a square `q`.
    pub fn congruence(&self, q: &DMatrix<f64>) -> Self {
        Self::symmetrize(&(q.transpose() * &self.m * q))
    }

    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += v[i] * self.m[(i, j)] * v[j];
            }
        }
        s
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().expect("non-empty matrix")
    }

    /// Operator (spectral) norm.
    pub fn spectral_norm(&self) -> f64 {
        let ev = self.eigenvalues();
        ev[0].abs().max(ev[ev.len() - 1].abs())
    }

    pub fn spectrum(&self) -> Spectrum {
        spectrum(self)
    }
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMat{:?}", self.rows())
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat { m: &self.m + &rhs.m }
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat { m: &self.m - &rhs.m }
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat { m: -&self.m }
    }
}

impl Mul<&SymMat> for f64 {
    type Output = SymMat;
    fn mul(self, rhs: &SymMat) -> SymMat {
        SymMat { m: &rhs.m * self }
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Ascending eigenvalues with an orthonormal eigenvector frame (columns).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub frame: DMatrix<f64>,
}

impl Spectrum {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.frame * d * self.frame.transpose()
    }
}

/// Eigendecomposition with ascending eigenvalues. Each eigenvector is
/// oriented so that its first non-negligible component is positive.
pub fn spectrum(a: &SymMat) -> Spectrum {
    let n = a.n();
    let eig = SymmetricEigen::new(a.m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let mut frame = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let mut v = eig.eigenvectors.column(k).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = -v;
            }
        }
        frame.set_column(col, &v);
    }
    Spectrum { values, frame }
}

/// A point `(r, p, A)` of the 2-jet space.
#[derive(Clone, PartialEq)]
pub struct Jet2 {
    pub r: f64,
    pub p: Vec<f64>,
    pub a: SymMat,
}

impl Jet2 {
    pub fn new(r: f64, p: Vec<f64>, a: SymMat) -> Result<Self> {
        if p.len() != a.n() {
            return Err(Error::DimensionMismatch { expected: a.n(), found: p.len() });
        }
        Ok(Self { r, p, a })
    }

    pub fn zero(n: usize) -> Self {
        Self { r: 0.0, p: vec![0.0; n], a: SymMat::zeros(n) }
    }

    /// The jet `(0, 0, A)`.
    pub fn pure(a: SymMat) -> Self {
        let n = a.n();
        Self { r: 0.0, p: vec![0.0; n], a }
    }

    /// The jet `(r, 0, A)`.
    pub fn gradient_free(r: f64, a: SymMat) -> Self {
        let n = a.n();
        Self { r, p: vec![0.0; n], a }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn p_norm(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, t: f64) -> Self {
        Self { r: t * self.r, p: self.p.iter().map(|x| t * x).collect(), a: t * &self.a }
    }

    /// self + t·other.
    pub fn axpy(&self, t: f64, other: &Jet2) -> Self {
        Self {
            r: self.r + t * other.r,
            p: self.p.iter().zip(&other.p).map(|(a, b)| a + t * b).collect(),
            a: &self.a + &(t * &other.a),
        }
    }

    /// The direction `(-1, 0, I)` used for boundary searches: it lies in the
    /// interior of `N × {0} × P` and so moves into every subequation.
    pub fn inward(n: usize) -> Self {
        Self { r: -1.0, p: vec![0.0; n], a: SymMat::identity(n) }
    }
}

impl fmt::Debug for Jet2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet2 {{ r: {}, p: {:?}, A: {:?} }}", self.r, self.p, self.a.rows())
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        self.axpy(1.0, rhs)
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

#[derive(Serialize, Deserialize)]
struct JetRepr {
    r: f64,
    p: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

impl Serialize for Jet2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        JetRepr { r: self.r, p: self.p.clone(), a: self.a.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Jet2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = JetRepr::deserialize(d)?;
        let a = SymMat::from_rows(&repr.a).map_err(serde::de::Error::custom)?;
        Jet2::new(repr.r, repr.p, a).map_err(serde::de::Error::custom)
    }
}

/// `max(|r|, |p|₂, max_k |λ_k(A)|)`.
pub fn jet_norm(j: &Jet2) -> f64 {
    j.r.abs().max(j.p_norm()).max(j.a.spectral_norm())
}

/// `Σ_i w_iᵀ A w_i` over the columns of an orthonormal frame `w`.
pub fn trace_on_subspace(a: &SymMat, w: &DMatrix<f64>) -> Result<f64> {
    if w.nrows() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), found: w.nrows() });
    }
    let gram = w.transpose() * w;
    let k = w.ncols();
    let mut dev = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((gram[(i, j)] - target).abs());
        }
    }
    if dev > FRAME_TOL {
        return Err(Error::NonOrthonormalBasis(dev));
    }
    Ok((0..k).map(|c| {
        let col: Vec<f64> = w.column(c).iter().copied().collect();
        a.quadratic_form(&col)
    }).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_frame, random_sym, seeded};

    /// det(A − xI) by Gaussian elimination with partial pivoting.
    fn char_det(a: &SymMat, x: f64) -> f64 {
        let n = a.n();
        let mut m: Vec<Vec<f64>> = a.rows();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= x;
        }
        let mut det = 1.0;
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            if m[piv][c] == 0.0 {
                return 0.0;
            }
            if piv != c {
                m.swap(piv, c);
                det = -det;
            }
            det *= m[c][c];
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        det
    }

    /// Roots of the characteristic polynomial by sign-change scan and bisection.
    fn char_roots(a: &SymMat) -> Vec<f64> {
        let bound = a.as_matrix().norm() + 1.0;
        let steps = 40_000;
        let mut roots = Vec::new();
        let mut x0 = -bound;
        let mut f0 = char_det(a, x0);
        for s in 1..=steps {
            let x1 = -bound + 2.0 * bound * s as f64 / steps as f64;
            let f1 = char_det(a, x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut lo, mut hi, flo) = (x0, x1, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = char_det(a, mid);
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }

    #[test]
    fn spectrum_of_identity_and_diagonal() {
        assert_eq!(SymMat::identity(3).eigenvalues(), vec![1.0, 1.0, 1.0]);
        assert_eq!(SymMat::diag(&[3.0, 1.0, 2.0]).eigenvalues(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spectrum_matches_char_poly_bisection() {
        let mut rng = seeded(11);
        for _ in 0..5 {
            let a = random_sym(&mut rng, 5, 1.0);
            let ev = a.eigenvalues();
            let roots = char_roots(&a);
            assert_eq!(roots.len(), 5, "oracle found {roots:?}");
            for (x, y) in ev.iter().zip(&roots) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn spectrum_reconstructs_and_is_orthonormal() {
        let mut rng = seeded(3);
        for n in 1..=MAX_DIM {
            let a = random_sym(&mut rng, n, 3.0);
            let s = a.spectrum();
            assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
            let res = (s.reconstruct() - a.as_matrix()).amax();
            assert!(res <= 1e-12 * (1.0 + a.max_abs()), "residual {res}");
            let gram = s.frame.transpose() * &s.frame;
            assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12);
            for c in 0..n {
                let first = s.frame.column(c).iter().copied().find(|x| x.abs() > 1e-12).unwrap();
                assert!(first > 0.0);
            }
        }
    }

    #[test]
    fn jet_norm_examples() {
        assert_eq!(jet_norm(&Jet2::zero(2)), 0.0);
        let j = Jet2::new(-2.0, vec![1.0, 0.0], SymMat::identity(2)).unwrap();
        assert_eq!(jet_norm(&j), 2.0);
        let j = Jet2::new(1.0, vec![3.0, 4.0], SymMat::diag(&[-7.0, 2.0])).unwrap();
        // brute force over the three components
        let brute = [1.0_f64, (9.0_f64 + 16.0).sqrt(), 7.0, 2.0].into_iter().fold(0.0, f64::max);
        assert_eq!(jet_norm(&j), brute);
        assert_eq!(jet_norm(&j), 7.0);
    }

    #[test]
    fn trace_on_subspace_examples() {
        let mut rng = seeded(5);
        let w = random_frame(&mut rng, 4, 2);
        assert!((trace_on_subspace(&SymMat::identity(4), &w).unwrap() - 2.0).abs() < 1e-12);
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(trace_on_subspace(&SymMat::diag(&[1.0, -1.0]), &e1).unwrap(), 1.0);
        for _ in 0..20 {
            let a = random_sym(&mut rng, 5, 2.0);
            let w = random_frame(&mut rng, 5, 3);
            let p = &w * w.transpose();
            let oracle = (&p * a.as_matrix() * &p).trace();
            assert!((trace_on_subspace(&a, &w).unwrap() - oracle).abs() < 1e-12);
        }
        let bad = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(trace_on_subspace(&SymMat::identity(2), &bad), Err(Error::NonOrthonormalBasis(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let j: Jet2 = serde_json::from_str(r#"{"r": 1.5, "p": [1, 2], "A": [[1, 2], [2, 3]]}"#).unwrap();
        assert_eq!(j.a.get(0, 1), 2.0);
        let back: Jet2 = serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap();
        assert_eq!(back, j);
        assert!(serde_json::from_str::<Jet2>(r#"{"r": 0, "p": [0, 0], "A": [[1, 2], [2.5, 3]]}"#).is_err());
        assert!(serde_json::from_str::<Jet2>(r#"{"r": 0, "p": [0], "A": [[1, 0], [0, 3]]}"#).is_err());
    }

    #[test]
    fn dimension_cap() {
        let rows = vec![vec![0.0; 9]; 9];
        assert_eq!(SymMat::from_rows(&rows), Err(Error::DimensionOutOfRange(9)));
    }
}
