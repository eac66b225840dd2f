//! Symmetric subspace decomposition: the largest `C` with
//! `R(D(X) C) = R(D(Y) C)`, found by repeated null-space pruning.

use serde::{Deserialize, Serialize};

use crate::dictionary::CoefficientMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, flops, Matrix, Span, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    /// `[A, B]` had a trivial null space; the result is zero.
    NullEmpty,
    /// The null space was as wide as `A`; the accumulator is returned.
    SizeCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsdStep {
    pub null_dim: usize,
    /// Columns of the accumulator after this step.
    pub reduced_cols: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsdTrace {
    pub iterations: Vec<SsdStep>,
    pub terminal_reason: TerminalReason,
    /// Null-space dimension seen by the final size check.
    pub terminal_null_dim: usize,
    /// The size check fired with strictly more null directions than columns.
    pub strict_size_check: bool,
}

/// `[D(X), D(Y)]` reduced to a triangular factor with the same null spaces.
///
/// For `[D(X), D(Y)] = Q R` and any `C`, `[D(X) C, D(Y) C] = Q R diag(C, C)`,
/// so every null space the decomposition needs can be computed from `R`.
#[derive(Clone, Debug)]
pub struct FactoredPair {
    r: Matrix,
    n: usize,
}

impl FactoredPair {
    /// Checks shapes and full column rank of both matrices, then factors them.
    pub fn new(dx: &Matrix, dy: &Matrix, tol: &Tolerances) -> Result<Self> {
        if dx.shape() != dy.shape() {
            return Err(Error::InvalidInput(format!(
                "D(X) is {:?} but D(Y) is {:?}",
                dx.shape(),
                dy.shape()
            )));
        }
        linalg::check_finite(dx)?;
        linalg::check_finite(dy)?;
        let n = dx.ncols();
        let stacked = linalg::hstack(dx, dy);
        let r = if stacked.nrows() > stacked.ncols() {
            linalg::qr_r(&stacked)?
        } else {
            stacked
        };
        let pair = Self { r, n };
        for (name, block) in [("D(X)", pair.left()), ("D(Y)", pair.right())] {
            if dx.nrows() < n || !linalg::is_full_column_rank(&block, tol)? {
                return Err(Error::PreconditionViolation(format!(
                    "{name} ({}x{n}) does not have full column rank",
                    dx.nrows()
                )));
            }
        }
        Ok(pair)
    }

    pub fn n_cols(&self) -> usize {
        self.n
    }

    fn left(&self) -> Matrix {
        self.r.columns(0, self.n).into_owned()
    }

    fn right(&self) -> Matrix {
        self.r.columns(self.n, self.n).into_owned()
    }

    /// Decomposition restricted to `R(basis)`: returns `E` such that
    /// `basis * E` is the symmetric part of the restricted pair. The energy
    /// tail selected by `eps` is discarded in every null-space step.
    pub fn decompose_within(&self, basis: &Matrix, eps: f64, tol: &Tolerances) -> Result<(Span, SsdTrace)> {
        if basis.nrows() != self.n {
            return Err(Error::InvalidInput(format!(
                "basis has {} rows, pair has {} columns",
                basis.nrows(),
                self.n
            )));
        }
        let ra = linalg::mul(&self.left(), basis);
        let rb = linalg::mul(&self.right(), basis);
        decompose(&ra, &rb, eps, tol)
    }

    pub fn decompose(&self, eps: f64, tol: &Tolerances) -> Result<(Span, SsdTrace)> {
        decompose(&self.left(), &self.right(), eps, tol)
    }
}

/// Orthonormal basis `Q` of `R(a)` and the map `V S^-1` with `a V S^-1 = Q`.
fn whiten(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let dec = linalg::svd(a)?;
    let mut inv = dec.v.clone();
    for (j, s) in dec.singular_values.iter().enumerate() {
        if *s <= 0.0 {
            return Err(Error::NumericalError("whitening a rank deficient block".into()));
        }
        inv.column_mut(j).scale_mut(1.0 / s);
    }
    Ok((dec.u, inv))
}

/// Pruning loop. Each step whitens `A` and `B` so the truncated null space
/// of `[Q_A, Q_B]` is decided by the principal angles between `R(A)` and
/// `R(B)`, independent of column scaling; `Z^A` is mapped back through the
/// whitening of `A`.
fn decompose(a0: &Matrix, b0: &Matrix, eps: f64, tol: &Tolerances) -> Result<(Span, SsdTrace)> {
    let m = a0.ncols();
    let mut c = Matrix::identity(m, m);
    let mut a = a0.clone();
    let mut b = b0.clone();
    let mut iterations = Vec::new();
    for _ in 0..=m {
        let cols = c.ncols();
        let (qa, wa) = whiten(&a)?;
        let (qb, _) = whiten(&b)?;
        let z = match linalg::truncated_null_space(&linalg::hstack(&qa, &qb), eps, tol)? {
            Span::Zero { .. } => {
                iterations.push(SsdStep { null_dim: 0, reduced_cols: 0 });
                return Ok((
                    Span::zero(m),
                    SsdTrace {
                        iterations,
                        terminal_reason: TerminalReason::NullEmpty,
                        terminal_null_dim: 0,
                        strict_size_check: false,
                    },
                ));
            }
            Span::Basis(z) => z,
        };
        let null_dim = z.ncols();
        if cols <= null_dim {
            let mut out = c;
            linalg::normalize_column_signs(&mut out);
            return Ok((
                Span::Basis(out),
                SsdTrace {
                    iterations,
                    terminal_reason: TerminalReason::SizeCheck,
                    terminal_null_dim: null_dim,
                    strict_size_check: cols < null_dim,
                },
            ));
        }
        let za = linalg::mul(&wa, &z.rows(0, cols).into_owned());
        let za = match linalg::orthonormal_basis(&za, tol)? {
            Span::Basis(q) => q,
            Span::Zero { .. } => {
                return Err(Error::NumericalError(
                    "null-space block of A vanished while B has full rank".into(),
                ))
            }
        };
        iterations.push(SsdStep {
            null_dim,
            reduced_cols: za.ncols(),
        });
        c = linalg::mul(&c, &za);
        a = linalg::mul(&a, &za);
        b = linalg::mul(&b, &za);
    }
    Err(Error::InternalError(format!(
        "decomposition did not settle within {} iterations",
        m + 1
    )))
}

/// Exact decomposition with truncation `tol.eps_cap`.
pub fn ssd(dx: &Matrix, dy: &Matrix, tol: &Tolerances) -> Result<(CoefficientMatrix, SsdTrace)> {
    let pair = FactoredPair::new(dx, dy, tol)?;
    let (span, trace) = pair.decompose(tol.eps_cap, tol)?;
    Ok((CoefficientMatrix::trusted(span), trace))
}

/// Approximated decomposition: each null space keeps only the directions
/// whose singular values lie in the energy tail selected by `eps_approx`.
pub fn approx_ssd(dx: &Matrix, dy: &Matrix, eps_approx: f64, tol: &Tolerances) -> Result<CoefficientMatrix> {
    if !(eps_approx > 0.0 && eps_approx < 1.0) {
        return Err(Error::InvalidInput(format!("eps_approx must lie in (0, 1), got {eps_approx}")));
    }
    let pair = FactoredPair::new(dx, dy, tol)?;
    let (span, _) = pair.decompose(eps_approx.max(tol.eps_cap), tol)?;
    Ok(CoefficientMatrix::trusted(span))
}

/// Least-squares `K` with `D(X) C K ≈ D(Y) C`.
pub fn ssd_reduced_operator(dx: &Matrix, dy: &Matrix, c: &CoefficientMatrix, tol: &Tolerances) -> Result<Matrix> {
    let Span::Basis(cm) = c.span() else {
        return Err(Error::InvalidInput("reduced operator of a zero subspace".into()));
    };
    let a = linalg::mul(dx, cm);
    let b = linalg::mul(dy, cm);
    Ok(linalg::mul(&linalg::pseudo_inverse(&a, tol)?, &b))
}

/// Operation count of one exact decomposition, for cost comparisons.
pub fn ssd_flops(dx: &Matrix, dy: &Matrix, tol: &Tolerances) -> Result<u64> {
    let (res, spent) = flops::measure(|| ssd(dx, dy, tol));
    res.map(|_| spent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::range_equal;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn identity_dynamics_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dx = random(&mut rng, 30, 5);
        let (c, trace) = ssd(&dx, &dx, &tol()).unwrap();
        assert_eq!(c.ncols(), 5);
        assert!(range_equal(c.span(), &Span::identity(5), 1e-10));
        assert_eq!(trace.terminal_reason, TerminalReason::SizeCheck);
        assert!(trace.iterations.is_empty());
        assert_eq!(trace.terminal_null_dim, 5);
    }

    #[test]
    fn independent_ranges_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dx = random(&mut rng, 40, 4);
        let dy = random(&mut rng, 40, 4);
        let inter = linalg::range_intersection_basis(&Span::Basis(dx.clone()), &Span::Basis(dy.clone()), &tol()).unwrap();
        assert!(inter.is_zero());
        let (c, trace) = ssd(&dx, &dy, &tol()).unwrap();
        assert!(c.is_zero());
        assert_eq!(trace.terminal_reason, TerminalReason::NullEmpty);
    }

    #[test]
    fn planted_invariant_subspace() {
        // dy = dx * G on a 3-dim coordinate block, random elsewhere
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let dx = random(&mut rng, 50, n);
        let mut dy = random(&mut rng, 50, n);
        let g = random(&mut rng, 3, 3) + Matrix::identity(3, 3) * 2.0;
        let block = dx.columns(0, 3) * &g;
        dy.columns_mut(0, 3).copy_from(&block);
        let (c, trace) = ssd(&dx, &dy, &tol()).unwrap();
        let mut want = Matrix::zeros(n, 3);
        want.view_mut((0, 0), (3, 3)).copy_from(&Matrix::identity(3, 3));
        assert!(range_equal(c.span(), &Span::Basis(want), 1e-8));
        for w in trace.iterations.windows(2) {
            assert!(w[1].reduced_cols < w[0].reduced_cols);
        }
    }

    #[test]
    fn linear_scalar_system() {
        let a = 0.7;
        let xs: Vec<f64> = (0..10).map(|i| -1.0 + 0.2 * i as f64).collect();
        let dx = Matrix::from_fn(10, 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
        let dy = Matrix::from_fn(10, 2, |r, c| if c == 0 { 1.0 } else { a * xs[r] });
        let (c, _) = ssd(&dx, &dy, &tol()).unwrap();
        assert_eq!(c.ncols(), 2);
        let k = ssd_reduced_operator(&dx, &dy, &CoefficientMatrix::identity(2), &tol()).unwrap();
        assert_relative_eq!(k, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, a]), epsilon = 1e-12);
        let k = ssd_reduced_operator(&dx, &dx, &CoefficientMatrix::identity(2), &tol()).unwrap();
        assert_relative_eq!(k, Matrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut dx = random(&mut rng, 20, 3);
        let col = dx.column(0).into_owned();
        dx.column_mut(2).copy_from(&col);
        let dy = random(&mut rng, 20, 3);
        assert!(matches!(ssd(&dx, &dy, &tol()), Err(Error::PreconditionViolation(_))));
        assert!(matches!(ssd(&dy, &dx, &tol()), Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn zero_operator_is_rejected() {
        let dx = Matrix::identity(3, 3);
        assert!(ssd_reduced_operator(&dx, &dx, &CoefficientMatrix::zero(3), &tol()).is_err());
    }

    #[test]
    fn approx_retains_exact_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut dx = random(&mut rng, 60, 4);
        let mut dy = random(&mut rng, 60, 4);
        dx.column_mut(0).fill(1.0);
        dy.column_mut(0).fill(1.0);
        let c = approx_ssd(&dx, &dy, 0.01, &tol()).unwrap();
        let e1 = Span::Basis(Matrix::from_fn(4, 1, |r, _| if r == 0 { 1.0 } else { 0.0 }));
        assert!(linalg::containment_residual(&e1, c.span()).unwrap() < 1e-8);
    }

    #[test]
    fn compression_matches_direct_null_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dx = random(&mut rng, 200, 5);
        let g = random(&mut rng, 5, 5) + Matrix::identity(5, 5) * 3.0;
        let dy = &dx * g;
        let (c, _) = ssd(&dx, &dy, &tol()).unwrap();
        assert_eq!(c.ncols(), 5);
    }
}
