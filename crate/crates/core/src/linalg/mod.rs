//! Tolerance-aware dense kernels: singular value decompositions, rank
//! decisions, null spaces, range intersections and pseudo-inverses.
//!
//! Subspaces are carried as [`Span`] values, which are either an explicit
//! zero marker or a matrix with full column rank whose range is the subspace.
//! Every basis returned from this module has orthonormal columns and a fixed
//! sign convention: the largest-magnitude entry of each column is positive.

mod backend;
pub mod flops;

pub(crate) use backend::{complex_svd, eigenvalues, CMatrix};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Thresholds shared by every rank and truncation decision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Singular values at or below `rank_rtol * sigma_1 * max(rows, cols)` count as zero.
    pub rank_rtol: f64,
    /// Energy fraction discarded when intersecting ranges.
    pub eps_cap: f64,
    /// Energy fraction discarded by the approximated decomposition.
    pub eps_approx: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rtol: 1e-12,
            eps_cap: 1e-12,
            eps_approx: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn with_eps_cap(mut self, eps_cap: f64) -> Self {
        self.eps_cap = eps_cap;
        self
    }

    pub fn with_eps_approx(mut self, eps_approx: f64) -> Self {
        self.eps_approx = eps_approx;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_rtol", self.rank_rtol),
            ("eps_cap", self.eps_cap),
            ("eps_approx", self.eps_approx),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "tolerance {name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn rank_threshold(&self, sigma_max: f64, max_dim: usize) -> f64 {
        self.rank_rtol * sigma_max * max_dim as f64
    }
}

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Matrix,
    /// Non-increasing, nonnegative.
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// A linear subspace of `R^ambient`, either `{0}` or the range of a full
/// column rank matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Span {
    Zero { ambient: usize },
    Basis(Matrix),
}

impl Span {
    pub fn zero(ambient: usize) -> Self {
        Span::Zero { ambient }
    }

    pub fn identity(n: usize) -> Self {
        Span::Basis(Matrix::identity(n, n))
    }

    /// Wraps a matrix without checking its rank. A matrix with no columns
    /// becomes the zero marker.
    pub fn from_matrix(m: Matrix) -> Self {
        if m.ncols() == 0 {
            Span::Zero { ambient: m.nrows() }
        } else {
            Span::Basis(m)
        }
    }

    pub fn ambient(&self) -> usize {
        match self {
            Span::Zero { ambient } => *ambient,
            Span::Basis(m) => m.nrows(),
        }
    }

    /// Column count, with `#cols(0) = 0`.
    pub fn ncols(&self) -> usize {
        match self {
            Span::Zero { .. } => 0,
            Span::Basis(m) => m.ncols(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Span::Zero { .. })
    }

    pub fn basis(&self) -> Option<&Matrix> {
        match self {
            Span::Zero { .. } => None,
            Span::Basis(m) => Some(m),
        }
    }

    /// `ambient x ncols` matrix; the zero marker yields an `ambient x 0` matrix.
    pub fn to_matrix(&self) -> Matrix {
        match self {
            Span::Zero { ambient } => Matrix::zeros(*ambient, 0),
            Span::Basis(m) => m.clone(),
        }
    }
}

pub fn check_finite(a: &Matrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidMatrix(format!(
            "empty {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if let Some(idx) = a.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix(format!(
            "non-finite entry at linear index {idx}"
        )));
    }
    Ok(())
}

/// Flips column signs so the largest-magnitude entry of every column is positive.
pub fn normalize_column_signs(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    flops::add(flops::matmul(a.nrows(), a.ncols(), b.ncols()));
    a * b
}

pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn vstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.ncols(), b.ncols(), "vstack column mismatch");
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn decompose(a: &Matrix, vectors: bool) -> Result<backend::Factors<f64>> {
    let (r, c) = a.shape();
    let dec = backend::svd(a, vectors)?;
    flops::add(flops::svd(r, c, vectors, vectors));
    Ok(dec)
}

/// Thin SVD with singular values sorted non-increasing.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    check_finite(a)?;
    let dec = decompose(a, true)?;
    Ok(SvdResult {
        u: dec.u.expect("requested U"),
        singular_values: dec.singular_values,
        v: dec.v.expect("requested V"),
    })
}

pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    check_finite(a)?;
    Ok(decompose(a, false)?.singular_values)
}

/// Singular values padded with zeros to length `cols`, and the full square
/// matrix of right singular vectors.
fn right_singular(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_finite(a)?;
    let (r, c) = a.shape();
    let work = if r < c {
        let mut padded = Matrix::zeros(c, c);
        padded.rows_mut(0, r).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let dec = decompose(&work, true)?;
    Ok((dec.singular_values, dec.v.expect("requested V")))
}

/// Number of singular values above `rank_rtol * sigma_1 * max_dim`.
pub fn numerical_rank(sv: &[f64], max_dim: usize, tol: &Tolerances) -> usize {
    let Some(&top) = sv.first() else { return 0 };
    if top <= 0.0 {
        return 0;
    }
    let thr = tol.rank_threshold(top, max_dim);
    sv.iter().filter(|&&s| s > thr).count()
}

/// One-based index `k`, the smallest with
/// `sum_{j>=k} sigma_j^2 <= eps * sum_j sigma_j^2`. Callers treat
/// `sigma_k, ..., sigma_l` as zero, so `k - 1` values survive.
pub fn truncation_index(sv: &[f64], eps: f64) -> Result<usize> {
    if sv.is_empty() {
        return Err(Error::InvalidInput("empty singular value list".into()));
    }
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let bound = eps * total;
    let mut tail = 0.0;
    let mut k = sv.len() + 1;
    for j in (0..sv.len()).rev() {
        tail += sv[j] * sv[j];
        if tail <= bound {
            k = j + 1;
        } else {
            break;
        }
    }
    Ok(k)
}

/// Rank after applying both the relative threshold and the energy truncation.
pub fn truncated_rank(sv: &[f64], max_dim: usize, eps: f64, tol: &Tolerances) -> Result<usize> {
    let by_threshold = numerical_rank(sv, max_dim, tol);
    let by_energy = truncation_index(sv, eps)? - 1;
    Ok(by_threshold.min(by_energy))
}

fn trailing_columns(v: Matrix, rank: usize) -> Span {
    let c = v.ncols();
    if rank >= c {
        return Span::zero(c);
    }
    let mut z = v.columns(rank, c - rank).into_owned();
    normalize_column_signs(&mut z);
    Span::Basis(z)
}

/// Orthonormal basis of the numerical null space of `a`.
pub fn null_space_basis(a: &Matrix, tol: &Tolerances) -> Result<Span> {
    let (r, c) = a.shape();
    let (sv, v) = right_singular(a)?;
    let rank = numerical_rank(&sv, r.max(c), tol);
    Ok(trailing_columns(v, rank))
}

/// Null space of `a` after zeroing the energy tail selected by `eps`.
pub fn truncated_null_space(a: &Matrix, eps: f64, tol: &Tolerances) -> Result<Span> {
    let (r, c) = a.shape();
    let (sv, v) = right_singular(a)?;
    let rank = truncated_rank(&sv, r.max(c), eps, tol)?;
    Ok(trailing_columns(v, rank))
}

/// Orthonormal basis of the numerical range of `a`.
pub fn orthonormal_basis(a: &Matrix, tol: &Tolerances) -> Result<Span> {
    let (r, c) = a.shape();
    let dec = svd(a)?;
    let rank = numerical_rank(&dec.singular_values, r.max(c), tol);
    if rank == 0 {
        return Ok(Span::zero(r));
    }
    let mut q = dec.u.columns(0, rank).into_owned();
    normalize_column_signs(&mut q);
    Ok(Span::Basis(q))
}

pub fn is_full_column_rank(a: &Matrix, tol: &Tolerances) -> Result<bool> {
    let (r, c) = a.shape();
    if r < c {
        return Ok(false);
    }
    let sv = singular_values(a)?;
    Ok(numerical_rank(&sv, r.max(c), tol) == c)
}

fn require_full_rank(span: &Span, tol: &Tolerances, what: &str) -> Result<()> {
    if let Span::Basis(m) = span {
        if !is_full_column_rank(m, tol)? {
            return Err(Error::PreconditionViolation(format!(
                "{what} is nonzero but not full column rank"
            )));
        }
    }
    Ok(())
}

/// Basis of `R(A) ∩ R(B)` from the truncated null space of `[A, B]`.
///
/// If `[z_a; z_b]` spans that null space then `A z_a = -B z_b` spans the
/// intersection; the result is re-orthonormalized.
pub fn range_intersection_basis(a: &Span, b: &Span, tol: &Tolerances) -> Result<Span> {
    if a.ambient() != b.ambient() {
        return Err(Error::InvalidInput(format!(
            "ambient dimension mismatch: {} vs {}",
            a.ambient(),
            b.ambient()
        )));
    }
    require_full_rank(a, tol, "left operand")?;
    require_full_rank(b, tol, "right operand")?;
    let (Span::Basis(am), Span::Basis(bm)) = (a, b) else {
        return Ok(Span::zero(a.ambient()));
    };
    let stacked = hstack(am, bm);
    match truncated_null_space(&stacked, tol.eps_cap, tol)? {
        Span::Zero { .. } => Ok(Span::zero(a.ambient())),
        Span::Basis(z) => {
            let top = z.rows(0, am.ncols()).into_owned();
            let w = mul(am, &top);
            orthonormal_basis(&w, tol)
        }
    }
}

/// Left fold of [`range_intersection_basis`] over `spans`.
pub fn multi_intersection_basis(spans: &[Span], tol: &Tolerances) -> Result<Span> {
    let (first, rest) = spans
        .split_first()
        .ok_or_else(|| Error::InvalidInput("no subspaces to intersect".into()))?;
    require_full_rank(first, tol, "first operand")?;
    let mut acc = match first {
        Span::Zero { ambient } => Span::zero(*ambient),
        Span::Basis(m) => orthonormal_basis(m, tol)?,
    };
    for s in rest {
        acc = range_intersection_basis(&acc, s, tol)?;
    }
    Ok(acc)
}

/// Orthogonal projector onto the span.
pub fn projector(span: &Span) -> Result<Matrix> {
    let n = span.ambient();
    match span {
        Span::Zero { .. } => Ok(Matrix::zeros(n, n)),
        Span::Basis(m) => match orthonormal_basis(m, &Tolerances::default())? {
            Span::Zero { .. } => Ok(Matrix::zeros(n, n)),
            Span::Basis(q) => Ok(&q * q.transpose()),
        },
    }
}

fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 || a.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Spectral norm of the difference of the orthogonal projectors onto both
/// ranges: the sine of the largest principal angle for equal dimensions,
/// 1 otherwise.
pub fn subspace_distance(a: &Span, b: &Span) -> Result<f64> {
    if a.ambient() != b.ambient() {
        return Err(Error::InvalidInput(format!(
            "ambient dimension mismatch: {} vs {}",
            a.ambient(),
            b.ambient()
        )));
    }
    match (a.is_zero(), b.is_zero()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(1.0),
        _ => {}
    }
    spectral_norm(&(projector(a)? - projector(b)?))
}

/// True iff the orthogonal projectors onto both ranges differ by less than
/// `tol` in spectral norm.
pub fn range_equal(a: &Span, b: &Span, tol: f64) -> bool {
    subspace_distance(a, b).map(|d| d < tol).unwrap_or(false)
}

/// Spectral norm of the component of `R(A)` outside `R(B)`; zero iff `R(A) ⊆ R(B)`.
pub fn containment_residual(a: &Span, b: &Span) -> Result<f64> {
    let Span::Basis(am) = a else { return Ok(0.0) };
    let qa = match orthonormal_basis(am, &Tolerances::default())? {
        Span::Zero { .. } => return Ok(0.0),
        Span::Basis(q) => q,
    };
    let pb = projector(b)?;
    spectral_norm(&(&qa - pb * &qa))
}

/// Moore-Penrose pseudo-inverse through a truncated SVD.
pub fn pseudo_inverse(a: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let (r, c) = a.shape();
    let dec = svd(a)?;
    let rank = numerical_rank(&dec.singular_values, r.max(c), tol);
    let mut vs = dec.v.columns(0, rank).into_owned();
    for j in 0..rank {
        vs.column_mut(j).scale_mut(1.0 / dec.singular_values[j]);
    }
    Ok(mul(&vs, &dec.u.columns(0, rank).transpose()))
}

/// Triangular factor of a Householder QR; `min(rows, cols) x cols`.
pub fn qr_r(a: &Matrix) -> Result<Matrix> {
    check_finite(a)?;
    flops::add(flops::qr(a.nrows(), a.ncols()));
    Ok(a.clone().qr().unpack_r())
}
