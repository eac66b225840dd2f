//! Dense decompositions delegated to `faer`; matrices cross the boundary by
//! copy. Results are computed sequentially so they do not depend on the
//! thread count.
//!
//! The SVD always runs bidiagonal QR iteration. faer's divide-and-conquer
//! path (bidiagonal size >= 128) can report a spurious singular value near
//! 1e-4 on exactly rank-deficient input such as `[Q, Q W]`.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self as fsvd, ComputeSvdVectors, SvdParams};
use faer::traits::ComplexField;
use faer::{Mat, Par, Spec};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::Matrix;

pub(crate) type CMatrix = DMatrix<Complex64>;

/// Thin SVD factors; `u` and `v` are present only when requested.
pub(crate) struct Factors<T> {
    pub u: Option<DMatrix<T>>,
    pub singular_values: Vec<f64>,
    pub v: Option<DMatrix<T>>,
}

fn to_faer<T: Copy + nalgebra::Scalar>(a: &DMatrix<T>) -> Mat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer<T: Copy + nalgebra::Scalar>(m: faer::MatRef<'_, T>) -> DMatrix<T> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn failed(what: &str) -> Error {
    Error::NumericalError(format!("{what} did not converge"))
}

fn params<T: ComplexField>(recursion_threshold: usize) -> Spec<SvdParams, T> {
    let mut p: Spec<SvdParams, T> = Default::default();
    p.recursion_threshold = recursion_threshold;
    p
}

type Thin<T> = (Vec<T>, Option<Mat<T>>, Option<Mat<T>>);

fn attempt<T: ComplexField + Copy>(a: faer::MatRef<'_, T>, vectors: bool, recursion_threshold: usize) -> Option<Thin<T>> {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mode = if vectors { ComputeSvdVectors::Thin } else { ComputeSvdVectors::No };
    let par = params(recursion_threshold);
    let mut s = Diag::<T>::zeros(k);
    let mut u = vectors.then(|| Mat::<T>::zeros(m, k));
    let mut v = vectors.then(|| Mat::<T>::zeros(n, k));
    let mut buf = MemBuffer::new(fsvd::svd_scratch::<T>(m, n, mode, mode, Par::Seq, par));
    fsvd::svd(
        a,
        s.as_mut(),
        u.as_mut().map(|x| x.as_mut()),
        v.as_mut().map(|x| x.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        par,
    )
    .ok()?;
    let sv = s.column_vector();
    Some(((0..k).map(|i| sv[i]).collect(), u, v))
}

/// Orthonormal factors that reproduce `a` to a few hundred ulps of its norm.
fn verified<T: ComplexField<Real = f64> + Copy>(a: faer::MatRef<'_, T>, f: &Thin<T>) -> bool {
    let (Some(u), Some(v)) = (&f.1, &f.2) else { return false };
    let k = f.0.len();
    let size = a.nrows().max(a.ncols()) as f64;
    let scale = a.norm_l2().max(f64::MIN_POSITIVE);
    let mut us = u.clone();
    for j in 0..k {
        for i in 0..us.nrows() {
            us[(i, j)] = us[(i, j)] * f.0[j];
        }
    }
    let recon = (&us * v.adjoint() - a).norm_l2();
    let eye = Mat::<T>::identity(k, k);
    let orth = (u.adjoint() * u - &eye).norm_l2().max((v.adjoint() * v - &eye).norm_l2());
    recon <= 1e-13 * size * scale && orth <= 1e-13 * size
}

/// Thin SVD of a nonempty matrix; singular values are returned as `T`.
///
/// Bidiagonal QR iteration occasionally stalls on inputs with repeated
/// exact zero singular values. The transpose and the divide-and-conquer
/// path are then tried in turn, and a fallback result is only accepted
/// once its factors are checked against `a`.
fn thin<T>(a: &DMatrix<T>, vectors: bool) -> Result<(Vec<T>, Option<DMatrix<T>>, Option<DMatrix<T>>)>
where
    T: ComplexField<Real = f64> + Copy + nalgebra::Scalar,
{
    let fa = to_faer(a);
    let found = attempt(fa.as_ref(), vectors, usize::MAX)
        .or_else(|| {
            let t = fa.adjoint().to_owned();
            attempt(t.as_ref(), true, usize::MAX).map(|(s, u, v)| (s, v, u)).filter(|f| verified(fa.as_ref(), f))
        })
        .or_else(|| attempt(fa.as_ref(), true, 4).filter(|f| verified(fa.as_ref(), f)))
        .ok_or_else(|| failed("SVD"))?;
    let (s, u, v) = found;
    let keep = |m: Option<Mat<T>>| if vectors { m.map(|x| from_faer(x.as_ref())) } else { None };
    Ok((s, keep(u), keep(v)))
}

pub(crate) fn svd(a: &Matrix, vectors: bool) -> Result<Factors<f64>> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok(Factors {
            u: vectors.then(|| Matrix::zeros(a.nrows(), 0)),
            singular_values: Vec::new(),
            v: vectors.then(|| Matrix::zeros(a.ncols(), 0)),
        });
    }
    let (singular_values, u, v) = thin(a, vectors)?;
    Ok(Factors { u, singular_values, v })
}

pub(crate) fn complex_svd(a: &CMatrix) -> Result<Factors<Complex64>> {
    if a.nrows().min(a.ncols()) == 0 {
        return Err(Error::InvalidInput("SVD of an empty matrix".into()));
    }
    let (sv, u, v) = thin(a, true)?;
    Ok(Factors {
        u,
        singular_values: sv.iter().map(|s| s.re).collect(),
        v,
    })
}

pub(crate) fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>> {
    to_faer(a).eigenvalues().map_err(|_| failed("eigenvalue iteration"))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Column-major `rows cols [values]` dump of a basis on which plain
    /// bidiagonal QR iteration stalls.
    fn stalled() -> Matrix {
        let text = include_str!("../../testdata/stalled_svd.txt");
        let (dims, rest) = text.split_once(" [").unwrap();
        let d: Vec<usize> = dims.split(' ').map(|x| x.parse().unwrap()).collect();
        let vals: Vec<f64> = rest.trim().trim_end_matches(']').split(", ").map(|x| x.parse().unwrap()).collect();
        Matrix::from_column_slice(d[0], d[1], &vals)
    }

    #[test]
    fn stalled_iteration_falls_back_to_a_checked_factorization() {
        let a = stalled();
        assert!(attempt(to_faer(&a).as_ref(), true, usize::MAX).is_none());
        let f = svd(&a, true).unwrap();
        let (u, v) = (f.u.unwrap(), f.v.unwrap());
        let mut us = u.clone();
        for (j, s) in f.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        assert!((us * v.transpose() - &a).norm() < 1e-12);
        let plain = svd(&a, false).unwrap().singular_values;
        assert_eq!(plain, f.singular_values);
        assert!((plain[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn factors_reconstruct() {
        let a = Matrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64).sin() * 10f64.powi(-(j as i32)));
        let f = svd(&a, true).unwrap();
        let (u, v) = (f.u.unwrap(), f.v.unwrap());
        let mut us = u.clone();
        for (j, s) in f.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        assert!((us * v.transpose() - &a).norm() < 1e-14);
        assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_deficient_pair_of_bases() {
        use rand::{Rng, SeedableRng};
        // [Q, Q W] with orthogonal W has exactly half its singular values at zero.
        for seed in 0..8 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut random = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
            let (n, p) = (128 + seed as usize % 2, 64);
            let q = svd(&random(n, p), true).unwrap().u.unwrap();
            let f = svd(&random(p, p), true).unwrap();
            let rot = f.u.unwrap() * f.v.unwrap().transpose();
            let h = crate::linalg::hstack(&q, &(&q * rot));
            for vectors in [false, true] {
                let sv = svd(&h, vectors).unwrap().singular_values;
                assert!(sv[p..].iter().all(|s| *s < 1e-12), "seed {seed}: {:?}", &sv[p - 1..p + 2]);
            }
        }
    }

    #[test]
    fn eigenvalues_of_rotation() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.im.total_cmp(&y.im));
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }
}
