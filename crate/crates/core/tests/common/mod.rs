#![allow(dead_code)]

use koopman_pssd::linalg::{self, Span};
use koopman_pssd::network::Digraph;
use koopman_pssd::pssd::AgentState;
use koopman_pssd::{CoefficientMatrix, Matrix, RngSeed, Tolerances};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Data with a known `s`-dimensional symmetric subspace.
///
/// `D(X) = [P, Q] T` and `D(Y) = [P diag(lambda), R] T`, so the columns of
/// `T^-1 [I; 0]` span the symmetric part and `v_j = T^-1 e_j` satisfies
/// `D(Y) v_j = lambda_j D(X) v_j`. Generic `Q, R` with at least `2n` rows
/// leave nothing else symmetric.
pub struct Planted {
    pub dx: Matrix,
    pub dy: Matrix,
    pub truth: Span,
    pub lambdas: Vec<f64>,
    pub vectors: Vec<Matrix>,
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| {
        let u: f64 = rng.random_range(-1.0..1.0);
        let v: f64 = rng.random_range(-1.0..1.0);
        u + v
    })
}

pub fn planted(seed: u64, n: usize, s: usize, rows: usize) -> Planted {
    assert!(s <= n);
    let mut rng = RngSeed(seed).substream("planted").rng();
    let t = gaussian(&mut rng, n, n) + Matrix::identity(n, n) * 2.0;
    let t_inv = t.clone().try_inverse().expect("shifted gaussian is invertible");
    let lambdas: Vec<f64> = (0..s).map(|j| 0.5 + 0.25 * j as f64 + rng.random_range(0.0..0.1)).collect();
    let p = gaussian(&mut rng, rows, s);
    let q = gaussian(&mut rng, rows, n - s);
    let r = gaussian(&mut rng, rows, n - s);
    let mut pl = p.clone();
    for (j, l) in lambdas.iter().enumerate() {
        pl.column_mut(j).scale_mut(*l);
    }
    let dx = linalg::hstack(&p, &q) * &t;
    let dy = linalg::hstack(&pl, &r) * &t;
    let truth = if s == 0 {
        Span::zero(n)
    } else {
        Span::Basis(t_inv.columns(0, s).into_owned())
    };
    let vectors = (0..s).map(|j| t_inv.columns(j, 1).into_owned()).collect();
    Planted { dx, dy, truth, lambdas, vectors }
}

/// Signature rows `0..sig` go to every agent; the rest are dealt out evenly.
pub fn agents_for(dx: &Matrix, dy: &Matrix, m: usize, sig: usize, reuse: bool) -> Vec<AgentState> {
    let rest = dx.nrows() - sig;
    let tol = Tolerances::default();
    (0..m)
        .map(|i| {
            let lo = sig + rest * i / m;
            let hi = sig + rest * (i + 1) / m;
            let rows: Vec<usize> = (0..sig).chain(lo..hi).collect();
            let pick = |a: &Matrix| a.select_rows(rows.iter());
            AgentState::new(i, pick(dx), pick(dy), &tol, reuse).expect("local data has full column rank")
        })
        .collect()
}

/// Random strongly connected digraph: a Hamiltonian cycle through a random
/// permutation plus independent extra edges.
pub fn random_strong_digraph(rng: &mut ChaCha8Rng, m: usize, extra_p: f64) -> Digraph {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for w in 0..m {
        edges.push((order[w], order[(w + 1) % m]));
    }
    for i in 0..m {
        for j in 0..m {
            if i != j && rng.random_bool(extra_p) {
                edges.push((i, j));
            }
        }
    }
    Digraph::new(m, edges).expect("valid edges")
}

pub fn coeffs(agents: &[AgentState]) -> Vec<&CoefficientMatrix> {
    agents.iter().map(|a| &a.c).collect()
}
