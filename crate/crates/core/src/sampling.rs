//! Seeded random generators for matrices, frames and jets.
//!
//! All probes in the crate draw from ChaCha8 streams so that reports are
//! reproducible from their seed alone.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::jets::{Jet2, SymMat};

pub type SampleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut SampleRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vec(rng: &mut SampleRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

pub fn unit_vector(rng: &mut SampleRng, n: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, n);
        let nn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nn > 1e-8 {
            return v.into_iter().map(|x| x / nn).collect();
        }
    }
}

/// Gaussian symmetric matrix with entries of standard deviation `scale`.
pub fn random_sym(rng: &mut SampleRng, n: usize, scale: f64) -> SymMat {
    let g = DMatrix::from_fn(n, n, |_, _| scale * normal(rng));
    SymMat::symmetrize(&g)
}

/// Positive semidefinite matrix `BBᵀ` of random rank in `0..=n`.
pub fn random_psd(rng: &mut SampleRng, n: usize, scale: f64) -> SymMat {
    let rank = rng.random_range(0..=n);
    if rank == 0 {
        return SymMat::zeros(n);
    }
    let b = DMatrix::from_fn(n, rank, |_, _| scale * normal(rng));
    SymMat::symmetrize(&(&b * b.transpose()))
}

/// Orthonormal `n × k` frame from the QR factorization of a Gaussian matrix.
pub fn random_frame(rng: &mut SampleRng, n: usize, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, k, |_, _| normal(rng));
    let q = g.qr().q();
    q.columns(0, k).into_owned()
}

pub fn random_orthogonal(rng: &mut SampleRng, n: usize) -> DMatrix<f64> {
    random_frame(rng, n, n)
}

/// A Lagrangian n-frame in `R^{2n} = C^n`: the realification of the columns
/// of a random unitary matrix. Coordinates are `(x_1..x_n, y_1..y_n)` and
/// the complex structure is `J(x, y) = (−y, x)`.
pub fn random_lagrangian_frame(rng: &mut SampleRng, n: usize) -> DMatrix<f64> {
    // Gram-Schmidt on complex Gaussian columns in (re, im) pairs.
    let mut cols: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut re = normal_vec(rng, n);
        let mut im = normal_vec(rng, n);
        for (qr, qi) in &cols {
            // <q, v> = Σ conj(q) v
            let mut dr = 0.0;
            let mut di = 0.0;
            for k in 0..n {
                dr += qr[k] * re[k] + qi[k] * im[k];
                di += qr[k] * im[k] - qi[k] * re[k];
            }
            for k in 0..n {
                re[k] -= dr * qr[k] - di * qi[k];
                im[k] -= dr * qi[k] + di * qr[k];
            }
        }
        let nn = re.iter().chain(&im).map(|x| x * x).sum::<f64>().sqrt();
        if nn > 1e-8 {
            cols.push((re.iter().map(|x| x / nn).collect(), im.iter().map(|x| x / nn).collect()));
        }
    }
    DMatrix::from_fn(2 * n, n, |row, c| if row < n { cols[c].0[row] } else { cols[c].1[row - n] })
}

/// Random jet with a scale drawn from {0.1, 1, 10}. A fraction of the
/// draws land on coordinate faces (`r = 0`, `p = 0` or `A = 0`), which is
/// where several catalog boundaries live.
pub fn random_jet(rng: &mut SampleRng, n: usize) -> Jet2 {
    let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let mut j = Jet2 {
        r: scale * normal(rng),
        p: normal_vec(rng, n).into_iter().map(|x| scale * x).collect(),
        a: random_sym(rng, n, scale),
    };
    match rng.random_range(0..10) {
        0 => j.r = 0.0,
        1 => j.p = vec![0.0; n],
        2 => j.a = SymMat::zeros(n),
        _ => {}
    }
    j
}

pub fn random_jets(seed: u64, n: usize, count: usize) -> Vec<Jet2> {
    let mut rng = seeded(seed);
    (0..count).map(|_| random_jet(&mut rng, n)).collect()
}

pub fn random_matrices(seed: u64, n: usize, count: usize, scale: f64) -> Vec<SymMat> {
    let mut rng = seeded(seed);
    (0..count).map(|_| random_sym(&mut rng, n, scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrangian_frames_are_lagrangian() {
        let mut rng = seeded(1);
        for n in 1..=3 {
            let w = random_lagrangian_frame(&mut rng, n);
            let gram = w.transpose() * &w;
            assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12);
            // J w_k is orthogonal to every w_l
            for k in 0..n {
                let jw: Vec<f64> = (0..2 * n)
                    .map(|row| if row < n { -w[(row + n, k)] } else { w[(row - n, k)] })
                    .collect();
                for l in 0..n {
                    let dot: f64 = (0..2 * n).map(|row| jw[row] * w[(row, l)]).sum();
                    assert!(dot.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        assert_eq!(random_jets(9, 3, 5), random_jets(9, 3, 5));
    }
}
