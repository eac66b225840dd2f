//! Reduced Koopman operators, eigenfunctions, multi-step prediction and
//! prediction error metrics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::{CoefficientMatrix, Observables};
use crate::error::{Error, Result};
use crate::linalg::{self, flops, CMatrix, Matrix, Span, Tolerances};


/// `K = D~(X)^+ D~(Y)`.
pub fn prediction_matrix(dx: &Matrix, dy: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    if dx.shape() != dy.shape() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch {:?} vs {:?}",
            dx.shape(),
            dy.shape()
        )));
    }
    if dx.ncols() == 0 || dx.nrows() == 0 {
        return Err(Error::InvalidInput("prediction matrix of an empty dictionary".into()));
    }
    linalg::check_finite(dx)?;
    linalg::check_finite(dy)?;
    Ok(linalg::mul(&linalg::pseudo_inverse(dx, tol)?, dy))
}

/// Eigenvalue with coefficients on the reduced dictionary (`w`) and on the
/// full dictionary (`v = C w`, unit norm, largest entry real positive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub eigenvalue: Complex64,
    pub dictionary_coeffs: Vec<Complex64>,
    pub reduced_coeffs: Vec<Complex64>,
}

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-8 * a.norm().max(b.norm()).max(1.0)
}

/// Eigenpairs of `K`, lifted through `C`. Clustered eigenvalues receive as
/// many vectors as their algebraic multiplicity, taken from the numerical
/// null space of `K - lambda I`.
pub fn eigenpairs(k: &Matrix, c: &CoefficientMatrix) -> Result<Vec<Eigenpair>> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(Error::InvalidInput(format!("K must be square and nonempty, got {:?}", k.shape())));
    }
    let Span::Basis(cm) = c.span() else {
        return Err(Error::InvalidInput("eigenpairs of a zero subspace".into()));
    };
    if cm.ncols() != n {
        return Err(Error::InvalidInput(format!("C has {} columns, K has side {n}", cm.ncols())));
    }
    linalg::check_finite(k)?;
    flops::add(flops::eig(n));
    let mut values = linalg::eigenvalues(k)?;
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NumericalError("non-finite eigenvalue".into()));
    }
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));

    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for v in values {
        match clusters.iter_mut().find(|cl| close(cl[0], v)) {
            Some(cl) => cl.push(v),
            None => clusters.push(vec![v]),
        }
    }

    let kc: CMatrix = k.map(|x| Complex64::new(x, 0.0));
    let cc: CMatrix = cm.map(|x| Complex64::new(x, 0.0));
    let mut out = Vec::with_capacity(n);
    for cl in clusters {
        let lambda = cl.iter().sum::<Complex64>() / cl.len() as f64;
        let shifted = &kc - CMatrix::identity(n, n) * lambda;
        let vm = linalg::complex_svd(&shifted)?.v.expect("requested V");
        for (idx, value) in cl.iter().enumerate() {
            let wv = vm.column(n - cl.len() + idx).into_owned();
            let v = &cc * &wv;
            let norm = v.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::NumericalError("eigenvector lifted to zero".into()));
            }
            let pivot = v
                .iter()
                .copied()
                .fold((0usize, 0.0f64, 0usize), |(best, mag, i), z| {
                    if z.norm() > mag {
                        (i, z.norm(), i + 1)
                    } else {
                        (best, mag, i + 1)
                    }
                })
                .0;
            let phase = v[pivot].conj() / v[pivot].norm();
            let scale = phase / norm;
            out.push(Eigenpair {
                eigenvalue: *value,
                dictionary_coeffs: v.iter().map(|z| z * scale).collect(),
                reduced_coeffs: wv.iter().map(|z| z * scale).collect(),
            });
        }
    }
    Ok(out)
}

fn real_times_complex(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    let re = a * nalgebra::DVector::from_iterator(v.len(), v.iter().map(|z| z.re));
    let im = a * nalgebra::DVector::from_iterator(v.len(), v.iter().map(|z| z.im));
    re.iter().zip(im.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect()
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|D(Y) v - lambda D(X) v| / |D(X) v|`.
pub fn verify_linear_evolution(v: &[Complex64], lambda: Complex64, dx: &Matrix, dy: &Matrix) -> Result<f64> {
    if v.len() != dx.ncols() || dx.shape() != dy.shape() {
        return Err(Error::InvalidInput("coefficient length does not match the data".into()));
    }
    if cnorm(v) == 0.0 {
        return Err(Error::InvalidInput("zero coefficient vector".into()));
    }
    let xv = real_times_complex(dx, v);
    let yv = real_times_complex(dy, v);
    let base = cnorm(&xv);
    if base <= f64::EPSILON * cnorm(v) * dx.norm() {
        return Err(Error::DegenerateEigenfunction);
    }
    let diff: Vec<Complex64> = yv.iter().zip(&xv).map(|(y, x)| y - lambda * x).collect();
    Ok(cnorm(&diff) / base)
}

/// Rows `D(x0) K^k` for `k = 0..=steps`, by repeated multiplication.
pub fn predict_observables(obs: &dyn Observables, k: &Matrix, x0: &[f64], steps: usize) -> Result<Matrix> {
    let row0 = obs.evaluate_point(x0)?;
    predict_from_row(&row0, k, steps)
}

pub fn predict_from_row(row0: &[f64], k: &Matrix, steps: usize) -> Result<Matrix> {
    let m = row0.len();
    if k.nrows() != m || k.ncols() != m {
        return Err(Error::InvalidInput(format!("K is {:?}, observable row has {m} entries", k.shape())));
    }
    let mut out = Matrix::zeros(steps + 1, m);
    let mut row = Matrix::from_row_slice(1, m, row0);
    out.row_mut(0).copy_from(&row);
    for s in 1..=steps {
        row = &row * k;
        out.row_mut(s).copy_from(&row);
    }
    Ok(out)
}

/// Relative errors in percent and angles in radians, one entry per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorSeries {
    pub relative: Vec<f64>,
    pub angle: Vec<f64>,
}

/// Angle between two rows; `pi / 2` when the prediction vanishes.
pub fn row_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Compares `D(x(k))` on a trajectory (one state per row) with `D(x(0)) K^k`.
pub fn error_series(obs: &dyn Observables, k: &Matrix, trajectory: &Matrix) -> Result<PredictionErrorSeries> {
    if trajectory.nrows() == 0 {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let truth = obs.evaluate(trajectory)?;
    let row0: Vec<f64> = truth.row(0).iter().copied().collect();
    let pred = predict_from_row(&row0, k, trajectory.nrows() - 1)?;
    let mut relative = Vec::with_capacity(truth.nrows());
    let mut angle = Vec::with_capacity(truth.nrows());
    for s in 0..truth.nrows() {
        let t: Vec<f64> = truth.row(s).iter().copied().collect();
        let p: Vec<f64> = pred.row(s).iter().copied().collect();
        let nt = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nt == 0.0 || !nt.is_finite() {
            return Err(Error::DegenerateObservable { step: s });
        }
        let diff = t.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        relative.push(diff / nt * 100.0);
        angle.push(row_angle(&t, &p));
    }
    Ok(PredictionErrorSeries { relative, angle })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `p (n - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-step median and quartiles across a collection of equal-length series.
pub fn quartile_summary(series: &[Vec<f64>]) -> Result<Vec<Quartiles>> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidInput("empty series collection".into()))?;
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    Ok((0..first.len())
        .map(|step| {
            let mut col: Vec<f64> = series.iter().map(|s| s[step]).collect();
            col.sort_by(f64::total_cmp);
            Quartiles {
                median: quantile(&col, 0.5),
                q1: quantile(&col, 0.25),
                q3: quantile(&col, 0.75),
            }
        })
        .collect())
}

/// Angle between a real vector and its orthogonal projection onto the
/// complex span of `basis`.
pub fn angle_to_span(target: &[f64], basis: &[Vec<Complex64>]) -> Result<f64> {
    let n = target.len();
    if basis.is_empty() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    if basis.iter().any(|b| b.len() != n) {
        return Err(Error::InvalidInput("basis vectors have the wrong length".into()));
    }
    let b = CMatrix::from_fn(n, basis.len(), |r, c| basis[c][r]);
    let svd = linalg::complex_svd(&b)?;
    let top = svd.singular_values[0];
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-12 * top * n as f64)
        .count();
    let u = svd.u.expect("requested U");
    let q = u.columns(0, rank);
    let t = nalgebra::DVector::from_iterator(n, target.iter().map(|x| Complex64::new(*x, 0.0)));
    let proj = &q * (q.adjoint() * &t);
    let resid = (&t - &proj).norm();
    Ok(resid.atan2(proj.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::MonomialDictionary;
    use approx::assert_relative_eq;

    #[test]
    fn prediction_matrix_of_identical_data_is_identity() {
        let dx = Matrix::from_fn(10, 3, |r, c| (r as f64 * 0.3 - 1.0).powi(c as i32));
        let k = prediction_matrix(&dx, &dx, &Tolerances::default()).unwrap();
        assert_relative_eq!(k, Matrix::identity(3, 3), epsilon = 1e-12);
        assert!(prediction_matrix(&Matrix::zeros(3, 0), &Matrix::zeros(3, 0), &Tolerances::default()).is_err());
    }

    #[test]
    fn diagonal_eigenpairs() {
        let k = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.8]));
        let c = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.6, 0.0, 0.8]);
        let pairs = eigenpairs(&k, &CoefficientMatrix::trusted(Span::Basis(c))).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_relative_eq!(pairs[0].eigenvalue.re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(pairs[1].eigenvalue.re, 0.8, epsilon = 1e-14);
        assert_relative_eq!(pairs[0].dictionary_coeffs[0].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(pairs[1].dictionary_coeffs[1].re, 0.6, epsilon = 1e-14);
        assert_relative_eq!(pairs[1].dictionary_coeffs[2].re, 0.8, epsilon = 1e-14);
    }

    #[test]
    fn complex_pairs_and_multiplicity() {
        // rotation block plus a repeated eigenvalue
        let k = Matrix::from_row_slice(4, 4, &[
            0.0, -1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.5, 0.0,
            0.0, 0.0, 0.0, 0.5,
        ]);
        let pairs = eigenpairs(&k, &CoefficientMatrix::identity(4)).unwrap();
        assert_eq!(pairs.len(), 4);
        for p in &pairs {
            let w = &p.reduced_coeffs;
            let kw = real_times_complex(&k, w);
            let r: f64 = kw.iter().zip(w).map(|(a, b)| (a - p.eigenvalue * b).norm_sqr()).sum::<f64>().sqrt();
            assert!(r < 1e-12);
            assert_relative_eq!(cnorm(&p.dictionary_coeffs), 1.0, epsilon = 1e-12);
        }
        let imag: Vec<f64> = pairs.iter().map(|p| p.eigenvalue.im).collect();
        assert!(imag.contains(&1.0) && imag.contains(&-1.0));
    }

    #[test]
    fn linear_evolution_checks() {
        let x = Matrix::from_fn(20, 1, |r, _| r as f64 * 0.1 - 1.0);
        let dict = MonomialDictionary::up_to_degree(1, 2).unwrap();
        let dx = dict.evaluate(&x).unwrap();
        let dy = dict.evaluate(&x.map(|v| 0.5 * v)).unwrap();
        let e0 = vec![Complex64::new(1.0, 0.0), Complex64::default(), Complex64::default()];
        assert!(verify_linear_evolution(&e0, Complex64::new(1.0, 0.0), &dx, &dy).unwrap() < 1e-12);
        let e2 = vec![Complex64::default(), Complex64::default(), Complex64::new(1.0, 0.0)];
        assert!(verify_linear_evolution(&e2, Complex64::new(0.25, 0.0), &dx, &dy).unwrap() < 1e-12);
        let mixed = vec![Complex64::new(0.3, 0.0), Complex64::new(1.0, 0.0), Complex64::new(-0.7, 0.0)];
        assert!(verify_linear_evolution(&mixed, Complex64::new(0.5, 0.0), &dx, &dy).unwrap() > 1e-2);
        let zeros = Matrix::zeros(20, 3);
        assert!(matches!(
            verify_linear_evolution(&e0, Complex64::new(1.0, 0.0), &zeros, &zeros),
            Err(Error::DegenerateEigenfunction)
        ));
    }

    #[test]
    fn prediction_rows() {
        let dict = MonomialDictionary::up_to_degree(1, 1).unwrap();
        let p = predict_observables(&dict, &Matrix::identity(2, 2), &[3.0], 4).unwrap();
        for r in 0..5 {
            assert_eq!(p.row(r).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.0]);
        }
        let k = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let p = predict_observables(&dict, &k, &[3.0], 2).unwrap();
        assert_eq!(p[(2, 1)], 0.75);
    }

    #[test]
    fn exact_prediction_has_zero_error() {
        let dict = MonomialDictionary::up_to_degree(1, 2).unwrap();
        let k = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.5, 0.25]));
        let traj = Matrix::from_fn(6, 1, |r, _| 2.0 * 0.5f64.powi(r as i32));
        let s = error_series(&dict, &k, &traj).unwrap();
        assert!(s.relative.iter().all(|e| *e < 1e-12));
        assert!(s.angle.iter().all(|e| *e < 1e-7));
        assert_eq!(s.relative[0], 0.0);
    }

    #[test]
    fn quartile_examples() {
        let single = quartile_summary(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(single[1], Quartiles { median: 2.0, q1: 2.0, q3: 2.0 });
        let three = quartile_summary(&[vec![0.0], vec![2.0], vec![1.0]]).unwrap();
        assert_eq!(three[0], Quartiles { median: 1.0, q1: 0.5, q3: 1.5 });
        let flat = quartile_summary(&[vec![4.0; 3], vec![4.0; 3]]).unwrap();
        assert!(flat.iter().all(|q| q.median == 4.0 && q.q1 == 4.0 && q.q3 == 4.0));
        assert!(quartile_summary(&[]).is_err());
    }

    #[test]
    fn span_angle_examples() {
        let basis = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]];
        assert!(angle_to_span(&[2.0, 0.0], &basis).unwrap() < 1e-15);
        assert_relative_eq!(angle_to_span(&[1.0, 1.0], &basis).unwrap(), std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
    }
}
