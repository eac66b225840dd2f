//! Monomial dictionaries `D(x) = [d_1(x), ..., d_Nd(x)]` and their reductions
//! `D~(x) = D(x) C`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Span, Tolerances};

/// Anything that maps a batch of states (one per row) to a row of observables.
pub trait Observables {
    fn n_vars(&self) -> usize;

    /// Number of observables per state.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn evaluate(&self, states: &Matrix) -> Result<Matrix>;

    fn evaluate_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.evaluate(&Matrix::from_row_slice(1, x.len(), x))?;
        Ok(m.row(0).iter().copied().collect())
    }
}

/// Ordered monomials with per-term scale factors.
///
/// Terms are kept in graded lexicographic order: increasing total degree,
/// and within one degree, decreasing exponent vectors (`x1^2, x1 x2, x2^2`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialDictionary {
    n_vars: usize,
    terms: Vec<Vec<u32>>,
    scales: Vec<f64>,
}

fn graded_lex(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    da.cmp(&db).then_with(|| b.cmp(a))
}

impl MonomialDictionary {
    /// Builds a dictionary from explicit exponent vectors. Terms are reordered
    /// into graded lexicographic order, carrying their scales along.
    pub fn new(n_vars: usize, terms: Vec<Vec<u32>>, scales: Option<Vec<f64>>) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::InvalidInput("dictionary needs at least one variable".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidInput("dictionary has no terms".into()));
        }
        let scales = scales.unwrap_or_else(|| vec![1.0; terms.len()]);
        if scales.len() != terms.len() {
            return Err(Error::InvalidInput(format!(
                "{} scales for {} terms",
                scales.len(),
                terms.len()
            )));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidInput(format!("scale {s} is not a positive finite number")));
        }
        if let Some(t) = terms.iter().find(|t| t.len() != n_vars) {
            return Err(Error::InvalidInput(format!(
                "exponent vector {t:?} does not have {n_vars} entries"
            )));
        }
        let mut paired: Vec<(Vec<u32>, f64)> = terms.into_iter().zip(scales).collect();
        paired.sort_by(|a, b| graded_lex(&a.0, &b.0));
        if paired.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("dictionary terms are not distinct".into()));
        }
        let (terms, scales) = paired.into_iter().unzip();
        Ok(Self { n_vars, terms, scales })
    }

    /// All distinct monomials of total degree at most `max_degree`.
    pub fn up_to_degree(n_vars: usize, max_degree: u32) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::InvalidInput("dictionary needs at least one variable".into()));
        }
        let mut terms = Vec::new();
        let mut current = vec![0u32; n_vars];
        fn fill(var: usize, left: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if var == current.len() {
                out.push(current.clone());
                return;
            }
            for e in 0..=left {
                current[var] = e;
                fill(var + 1, left - e, current, out);
            }
            current[var] = 0;
        }
        fill(0, max_degree, &mut current, &mut terms);
        Self::new(n_vars, terms, None)
    }

    pub fn terms(&self) -> &[Vec<u32>] {
        &self.terms
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(|t| t.iter().sum()).max().unwrap_or(0)
    }

    pub fn with_scales(&self, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != self.terms.len() {
            return Err(Error::InvalidInput(format!(
                "{} scales for {} terms",
                scales.len(),
                self.terms.len()
            )));
        }
        if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidInput(format!("scale {s} is not a positive finite number")));
        }
        Ok(Self {
            n_vars: self.n_vars,
            terms: self.terms.clone(),
            scales,
        })
    }

    /// Position of a term, if present.
    pub fn index_of(&self, exponents: &[u32]) -> Option<usize> {
        self.terms.iter().position(|t| t == exponents)
    }

    /// Human-readable term names, e.g. `x1^2*x2`.
    pub fn labels(&self) -> Vec<String> {
        self.terms
            .iter()
            .map(|t| {
                let parts: Vec<String> = t
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| **e > 0)
                    .map(|(i, e)| match e {
                        1 => format!("x{}", i + 1),
                        _ => format!("x{}^{}", i + 1, e),
                    })
                    .collect();
                if parts.is_empty() {
                    "1".to_string()
                } else {
                    parts.join("*")
                }
            })
            .collect()
    }

    /// Converts coefficients on the scaled terms into coefficients on the
    /// plain monomials.
    pub fn to_monomial_coefficients(&self, coeffs: &[f64]) -> Vec<f64> {
        coeffs.iter().zip(&self.scales).map(|(c, s)| c * s).collect()
    }
}

impl Observables for MonomialDictionary {
    fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn len(&self) -> usize {
        self.terms.len()
    }

    fn evaluate(&self, states: &Matrix) -> Result<Matrix> {
        if states.ncols() != self.n_vars {
            return Err(Error::InvalidInput(format!(
                "state matrix has {} columns, dictionary expects {}",
                states.ncols(),
                self.n_vars
            )));
        }
        let deg = self.max_degree() as usize;
        let mut out = Matrix::zeros(states.nrows(), self.terms.len());
        let mut powers = vec![1.0; self.n_vars * (deg + 1)];
        for r in 0..states.nrows() {
            for v in 0..self.n_vars {
                let x = states[(r, v)];
                let base = v * (deg + 1);
                powers[base] = 1.0;
                for p in 1..=deg {
                    powers[base + p] = powers[base + p - 1] * x;
                }
            }
            for (j, term) in self.terms.iter().enumerate() {
                let mut value = self.scales[j];
                for (v, &e) in term.iter().enumerate() {
                    value *= powers[v * (deg + 1) + e as usize];
                }
                out[(r, j)] = value;
            }
        }
        Ok(out)
    }
}

/// Per-term multipliers that make every column of `[D(X); D(Y)]` unit norm.
pub fn balancing_factors(
    dict: &MonomialDictionary,
    x: &Matrix,
    y: &Matrix,
) -> Result<Vec<f64>> {
    let stacked = linalg::vstack(&dict.evaluate(x)?, &dict.evaluate(y)?);
    stacked
        .column_iter()
        .enumerate()
        .map(|(j, c)| {
            let n = c.norm();
            if n > 0.0 && n.is_finite() {
                Ok(1.0 / n)
            } else {
                Err(Error::DegenerateDictionary { term: j })
            }
        })
        .collect()
}

/// Rescales every term so the columns of `[D(X); D(Y)]` have unit 2-norm.
/// The spanned function space is unchanged.
pub fn balance_scales(dict: &MonomialDictionary, x: &Matrix, y: &Matrix) -> Result<MonomialDictionary> {
    let factors = balancing_factors(dict, x, y)?;
    let scales = dict.scales.iter().zip(&factors).map(|(s, f)| s * f).collect();
    dict.with_scales(scales)
}

/// An `N_d x m` coefficient matrix that is either zero or has full column rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMatrix(Span);

impl CoefficientMatrix {
    pub fn new(span: Span, tol: &Tolerances) -> Result<Self> {
        if let Span::Basis(m) = &span {
            if !linalg::is_full_column_rank(m, tol)? {
                return Err(Error::PreconditionViolation(
                    "coefficient matrix is nonzero but not full column rank".into(),
                ));
            }
        }
        Ok(Self(span))
    }

    /// Wraps the output of an algorithm that guarantees the rank property.
    pub(crate) fn trusted(span: Span) -> Self {
        Self(span)
    }

    pub fn identity(n: usize) -> Self {
        Self(Span::identity(n))
    }

    pub fn zero(n: usize) -> Self {
        Self(Span::zero(n))
    }

    pub fn span(&self) -> &Span {
        &self.0
    }

    pub fn into_span(self) -> Span {
        self.0
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.0.ambient()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_matrix(&self) -> Matrix {
        self.0.to_matrix()
    }
}

/// `D~(x) = D(x) C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedDictionary {
    base: MonomialDictionary,
    coeffs: CoefficientMatrix,
}

impl ReducedDictionary {
    pub fn base(&self) -> &MonomialDictionary {
        &self.base
    }

    pub fn coeffs(&self) -> &CoefficientMatrix {
        &self.coeffs
    }
}

impl Observables for ReducedDictionary {
    fn n_vars(&self) -> usize {
        self.base.n_vars
    }

    fn len(&self) -> usize {
        self.coeffs.ncols()
    }

    fn evaluate(&self, states: &Matrix) -> Result<Matrix> {
        let full = self.base.evaluate(states)?;
        Ok(full * self.coeffs.to_matrix())
    }
}

pub fn reduce(dict: &MonomialDictionary, coeffs: &CoefficientMatrix) -> Result<ReducedDictionary> {
    if coeffs.nrows() != dict.len() {
        return Err(Error::PreconditionViolation(format!(
            "coefficient matrix has {} rows, dictionary has {} terms",
            coeffs.nrows(),
            dict.len()
        )));
    }
    Ok(ReducedDictionary {
        base: dict.clone(),
        coeffs: coeffs.clone(),
    })
}

/// JSON description of a dictionary: either all monomials up to a degree, or
/// an explicit list of exponent vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySpec {
    pub n_vars: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
}

impl DictionarySpec {
    pub fn build(&self) -> Result<MonomialDictionary> {
        match (&self.max_degree, &self.exponents) {
            (Some(d), None) => {
                let dict = MonomialDictionary::up_to_degree(self.n_vars, *d)?;
                match &self.scales {
                    Some(s) => dict.with_scales(s.clone()),
                    None => Ok(dict),
                }
            }
            // scales follow the listed term order, not the canonical one
            (None, Some(terms)) => {
                MonomialDictionary::new(self.n_vars, terms.clone(), self.scales.clone())
            }
            _ => Err(Error::InvalidInput(
                "dictionary needs exactly one of max_degree or exponents".into(),
            )),
        }
    }
}
