//! Benchmark dynamical systems, trajectory integration and snapshot sampling.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngSeed;

/// Largest RK4 substep used by the continuous-time flows.
pub const MAX_SUBSTEP: f64 = 1e-3;

/// Discrete-time map `x+ = T(x)`; continuous-time systems are sampled
/// through their flow over `dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicalSystem {
    UnstableNonlinear,
    PiecewiseLinear { n: usize },
    Vanderpol { dt: f64 },
    Lorenz { dt: f64 },
}

impl DynamicalSystem {
    pub fn validate(&self) -> Result<()> {
        match self {
            DynamicalSystem::PiecewiseLinear { n } if *n == 0 => {
                Err(Error::InvalidInput("piecewise linear system needs n >= 1".into()))
            }
            DynamicalSystem::Vanderpol { dt } | DynamicalSystem::Lorenz { dt }
                if !(dt.is_finite() && *dt > 0.0) =>
            {
                Err(Error::InvalidInput(format!("time step must be positive, got {dt}")))
            }
            _ => Ok(()),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            DynamicalSystem::UnstableNonlinear | DynamicalSystem::Vanderpol { .. } => 2,
            DynamicalSystem::PiecewiseLinear { n } => *n,
            DynamicalSystem::Lorenz { .. } => 3,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, DynamicalSystem::Vanderpol { .. } | DynamicalSystem::Lorenz { .. })
    }

    /// Per-coordinate bounds of the state space.
    pub fn state_space_box(&self) -> Vec<(f64, f64)> {
        match self {
            DynamicalSystem::UnstableNonlinear => vec![(-3.0, 3.0); 2],
            DynamicalSystem::PiecewiseLinear { n } => vec![(-1.0, 1.0); *n],
            DynamicalSystem::Vanderpol { .. } => vec![(-4.0, 4.0); 2],
            DynamicalSystem::Lorenz { .. } => vec![(-20.0, 20.0), (-30.0, 30.0), (0.0, 50.0)],
        }
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::InvalidInput(format!(
                "state has {} entries, system expects {}",
                x.len(),
                self.state_dim()
            )));
        }
        match self {
            DynamicalSystem::UnstableNonlinear => Ok(step_unstable_nonlinear([x[0], x[1]]).to_vec()),
            DynamicalSystem::PiecewiseLinear { .. } => step_piecewise_linear(x),
            DynamicalSystem::Vanderpol { dt } => Ok(integrate_vanderpol([x[0], x[1]], *dt).to_vec()),
            DynamicalSystem::Lorenz { dt } => Ok(integrate_lorenz([x[0], x[1], x[2]], *dt).to_vec()),
        }
    }
}

/// `x1+ = 1.2 x1`, `x2+ = cbrt(0.8 x2^3 + 8 x1^2 + 0.1)` with the real cube root.
pub fn step_unstable_nonlinear(x: [f64; 2]) -> [f64; 2] {
    let [x1, x2] = x;
    [1.2 * x1, (0.8 * x2.powi(3) + 8.0 * x1 * x1 + 0.1).cbrt()]
}

/// One-based index `k` of the cell `S_k` containing `x`, if any.
pub fn piecewise_cell(x: &[f64]) -> Option<usize> {
    let mut positive = x.iter().enumerate().filter(|(_, v)| **v > 0.0);
    let (k, _) = positive.next()?;
    if positive.next().is_some() {
        return None;
    }
    let inside = x
        .iter()
        .enumerate()
        .all(|(j, v)| if j == k { *v <= 1.0 } else { (-1.0..=0.0).contains(v) });
    inside.then_some(k + 1)
}

/// Scales coordinate `k` by `1/k` on `S_k`, identity elsewhere in `[-1, 1]^n`.
pub fn step_piecewise_linear(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("state entry {v} outside [-1, 1]")));
    }
    let mut out = x.to_vec();
    if let Some(k) = piecewise_cell(x) {
        out[k - 1] /= k as f64;
    }
    Ok(out)
}

/// Classical RK4 over `dt` with equal substeps no longer than `max_substep`.
pub fn rk4_advance<const N: usize>(
    rhs: impl Fn(&[f64; N]) -> [f64; N],
    x: [f64; N],
    dt: f64,
    max_substep: f64,
) -> [f64; N] {
    if dt <= 0.0 {
        return x;
    }
    let steps = (dt / max_substep).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] {
        std::array::from_fn(|i| a[i] + s * b[i])
    };
    let mut s = x;
    for _ in 0..steps {
        let k1 = rhs(&s);
        let k2 = rhs(&axpy(&s, 0.5 * h, &k1));
        let k3 = rhs(&axpy(&s, 0.5 * h, &k2));
        let k4 = rhs(&axpy(&s, h, &k3));
        s = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    s
}

pub fn vanderpol_rhs(x: &[f64; 2]) -> [f64; 2] {
    [x[1], -x[0] + (1.0 - x[0] * x[0]) * x[1]]
}

pub fn lorenz_rhs(s: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *s;
    [10.0 * (y - x), x * (28.0 - z) - y, x * y - (8.0 / 3.0) * z]
}

pub fn integrate_vanderpol(x: [f64; 2], dt: f64) -> [f64; 2] {
    rk4_advance(vanderpol_rhs, x, dt, MAX_SUBSTEP)
}

pub fn integrate_lorenz(s: [f64; 3], dt: f64) -> [f64; 3] {
    rk4_advance(lorenz_rhs, s, dt, MAX_SUBSTEP)
}

/// Rows `T^k(x0)` for `k = 0..=steps`.
pub fn generate_trajectory(sys: &DynamicalSystem, x0: &[f64], steps: usize) -> Result<Matrix> {
    let n = sys.state_dim();
    let mut out = Matrix::zeros(steps + 1, n);
    let mut x = x0.to_vec();
    for k in 0..=steps {
        if k > 0 {
            x = sys.step(&x)?;
        }
        if x.len() != n {
            return Err(Error::InvalidInput(format!("initial state must have {n} entries")));
        }
        for (j, v) in x.iter().enumerate() {
            out[(k, j)] = *v;
        }
    }
    Ok(out)
}

/// How initial conditions are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    /// Independent uniform states over a box, one step each.
    Uniform { region: Vec<(f64, f64)>, n_samples: usize },
    /// Consecutive states along trajectories started uniformly in a box.
    Trajectories {
        region: Vec<(f64, f64)>,
        n_trajectories: usize,
        steps: usize,
    },
    /// Piecewise linear benchmark: a signature block drawn outside
    /// `S_2 ∪ ... ∪ S_n`, followed by one block per cell `S_k`.
    PiecewiseCells {
        signature_samples: usize,
        per_cell_samples: usize,
    },
}

/// Which rows are shared with every agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignaturePolicy {
    First { count: usize },
    Random { count: usize },
    /// Rows the sampler itself designates (the signature block of
    /// [`Sampling::PiecewiseCells`]).
    Sampler,
    None,
}

/// Paired states `y_i = T(x_i)` with a designated signature subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSet {
    pub x: Matrix,
    pub y: Matrix,
    pub signature_rows: Vec<usize>,
    /// Row blocks produced by a cell-structured sampler, one per cell.
    #[serde(default)]
    pub groups: Vec<Vec<usize>>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn select_rows(&self, rows: &[usize]) -> (Matrix, Matrix) {
        (self.x.select_rows(rows), self.y.select_rows(rows))
    }

    /// Largest `|y_i - T(x_i)|_2` over all rows.
    pub fn max_residual(&self, sys: &DynamicalSystem) -> Result<f64> {
        let mut worst = 0.0f64;
        for r in 0..self.len() {
            let x: Vec<f64> = self.x.row(r).iter().copied().collect();
            let t = sys.step(&x)?;
            let d: f64 = t
                .iter()
                .zip(self.y.row(r).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            worst = worst.max(d.sqrt());
        }
        Ok(worst)
    }

    /// CSV with the state columns followed by the successor columns.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.x.ncols();
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        let header: Vec<String> = (1..=n)
            .map(|j| format!("x{j}"))
            .chain((1..=n).map(|j| format!("y{j}")))
            .collect();
        w.write_record(&header).map_err(io_err)?;
        for r in 0..self.len() {
            let rec: Vec<String> = self
                .x
                .row(r)
                .iter()
                .chain(self.y.row(r).iter())
                .map(|v| crate::format_float(*v))
                .collect();
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn read_csv(path: &Path, signature_rows: Vec<usize>) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path).map_err(io_err)?;
        let width = rd.headers().map_err(io_err)?.len();
        if width == 0 || width % 2 != 0 {
            return Err(Error::InvalidInput(format!("snapshot CSV has {width} columns")));
        }
        let n = width / 2;
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(io_err)?;
            for field in rec.iter() {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad number {field:?}: {e}")))?,
                );
            }
        }
        let rows = values.len() / width;
        let all = Matrix::from_row_slice(rows, width, &values);
        let x = all.columns(0, n).into_owned();
        let y = all.columns(n, n).into_owned();
        if let Some(bad) = signature_rows.iter().find(|r| **r >= rows) {
            return Err(Error::InvalidInput(format!("signature row {bad} out of range")));
        }
        Ok(Self {
            x,
            y,
            signature_rows,
            groups: Vec::new(),
        })
    }
}

/// JSON companion of a snapshot CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSidecar {
    pub system: DynamicalSystem,
    pub seed: RngSeed,
    pub signature_rows: Vec<usize>,
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

fn check_region(sys: &DynamicalSystem, region: &[(f64, f64)]) -> Result<()> {
    let bounds = sys.state_space_box();
    if region.len() != bounds.len() {
        return Err(Error::InvalidInput(format!(
            "region has {} coordinates, state space has {}",
            region.len(),
            bounds.len()
        )));
    }
    for ((lo, hi), (blo, bhi)) in region.iter().zip(&bounds) {
        if !(lo <= hi && lo >= blo && hi <= bhi) {
            return Err(Error::InvalidInput(format!(
                "region [{lo}, {hi}] not inside state space [{blo}, {bhi}]"
            )));
        }
    }
    Ok(())
}

pub fn sample_box(rng: &mut impl Rng, region: &[(f64, f64)]) -> Vec<f64> {
    region
        .iter()
        .map(|(lo, hi)| if hi > lo { rng.random_range(*lo..*hi) } else { *lo })
        .collect()
}

fn sample_cell(rng: &mut impl Rng, n: usize, k: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let u: f64 = rng.random();
            if j + 1 == k {
                1.0 - u
            } else {
                -u
            }
        })
        .collect()
}

fn sample_signature_region(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let x = sample_box(rng, &vec![(-1.0, 1.0); n]);
        match piecewise_cell(&x) {
            Some(k) if k >= 2 => continue,
            _ => return x,
        }
    }
}

/// Draws a snapshot set. The `seed` drives the states; signature selection
/// uses its own substream.
pub fn generate_snapshots(
    sys: &DynamicalSystem,
    sampling: &Sampling,
    seed: RngSeed,
    signature: &SignaturePolicy,
) -> Result<SnapshotSet> {
    sys.validate()?;
    let n = sys.state_dim();
    let mut rng = seed.rng();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<Vec<f64>> = Vec::new();
    let mut groups = Vec::new();
    let mut designated = Vec::new();
    match sampling {
        Sampling::Uniform { region, n_samples } => {
            check_region(sys, region)?;
            for _ in 0..*n_samples {
                let x = sample_box(&mut rng, region);
                ys.push(sys.step(&x)?);
                xs.push(x);
            }
        }
        Sampling::Trajectories {
            region,
            n_trajectories,
            steps,
        } => {
            check_region(sys, region)?;
            for _ in 0..*n_trajectories {
                let mut x = sample_box(&mut rng, region);
                for _ in 0..*steps {
                    let next = sys.step(&x)?;
                    xs.push(x);
                    ys.push(next.clone());
                    x = next;
                }
            }
        }
        Sampling::PiecewiseCells {
            signature_samples,
            per_cell_samples,
        } => {
            if !matches!(sys, DynamicalSystem::PiecewiseLinear { .. }) {
                return Err(Error::InvalidInput(
                    "cell sampling only applies to the piecewise linear system".into(),
                ));
            }
            for _ in 0..*signature_samples {
                let x = sample_signature_region(&mut rng, n);
                designated.push(xs.len());
                ys.push(sys.step(&x)?);
                xs.push(x);
            }
            for k in 1..=n {
                let mut block = Vec::with_capacity(*per_cell_samples);
                for _ in 0..*per_cell_samples {
                    let x = sample_cell(&mut rng, n, k);
                    block.push(xs.len());
                    ys.push(sys.step(&x)?);
                    xs.push(x);
                }
                groups.push(block);
            }
        }
    }
    let rows = xs.len();
    if rows == 0 {
        return Err(Error::InvalidInput("sampling produced no snapshots".into()));
    }
    let flat = |v: &[Vec<f64>]| Matrix::from_row_iterator(rows, n, v.iter().flatten().copied());
    let x = flat(&xs);
    let y = flat(&ys);

    let signature_rows = match signature {
        SignaturePolicy::First { count } => (0..(*count).min(rows)).collect(),
        SignaturePolicy::Random { count } => {
            let mut srng = seed.substream("signature").rng();
            let mut idx = index::sample(&mut srng, rows, (*count).min(rows)).into_vec();
            idx.sort_unstable();
            idx
        }
        SignaturePolicy::Sampler => designated,
        SignaturePolicy::None => Vec::new(),
    };
    Ok(SnapshotSet {
        x,
        y,
        signature_rows,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Reference flow with a much finer substep.
    fn reference<const N: usize>(rhs: impl Fn(&[f64; N]) -> [f64; N], x: [f64; N], dt: f64) -> [f64; N] {
        rk4_advance(rhs, x, dt, 1e-5)
    }

    #[test]
    fn unstable_nonlinear_examples() {
        let [a, b] = step_unstable_nonlinear([0.0, 0.0]);
        assert_eq!(a, 0.0);
        assert_relative_eq!(b, 0.1f64.cbrt(), epsilon = 1e-15);
        assert_relative_eq!(b, 0.46416, epsilon = 1e-5);
        let [a, b] = step_unstable_nonlinear([1.0, 1.0]);
        assert_relative_eq!(a, 1.2);
        assert_relative_eq!(b, 8.9f64.cbrt(), epsilon = 1e-15);
        assert_relative_eq!(b, 2.07235, epsilon = 1e-5);
        let [a, b] = step_unstable_nonlinear([-1.0, 0.0]);
        assert_relative_eq!(a, -1.2);
        assert_relative_eq!(b, 2.00830, epsilon = 1e-5);
        // real branch for negative arguments
        let [_, b] = step_unstable_nonlinear([0.0, -2.0]);
        assert_relative_eq!(b, (0.8f64 * -8.0 + 0.1).cbrt());
        assert!(b < 0.0);
    }

    #[test]
    fn piecewise_examples() {
        assert_eq!(step_piecewise_linear(&[0.5, -0.5]).unwrap(), vec![0.5, -0.5]);
        assert_eq!(step_piecewise_linear(&[-0.5, 0.5]).unwrap(), vec![-0.5, 0.25]);
        assert_eq!(step_piecewise_linear(&[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(piecewise_cell(&[-0.1, -0.2, 0.3]), Some(3));
        assert_eq!(piecewise_cell(&[-0.1, -0.2, 0.0]), None);
        assert!(step_piecewise_linear(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn vanderpol_examples() {
        assert_eq!(integrate_vanderpol([0.0, 0.0], 0.05), [0.0, 0.0]);
        assert_eq!(integrate_vanderpol([0.7, -0.2], 0.0), [0.7, -0.2]);
        let got = integrate_vanderpol([1.0, 0.0], 0.05);
        let want = reference(vanderpol_rhs, [1.0, 0.0], 0.05);
        assert_relative_eq!(got[0], want[0], epsilon = 1e-12);
        assert_relative_eq!(got[1], want[1], epsilon = 1e-12);
        // first-order behaviour: x2 ~ -dt
        assert!((got[1] + 0.05).abs() < 5e-3);
    }

    #[test]
    fn lorenz_examples() {
        assert_eq!(integrate_lorenz([0.0; 3], 0.05), [0.0; 3]);
        assert_eq!(integrate_lorenz([1.0, 2.0, 3.0], 0.0), [1.0, 2.0, 3.0]);
        let dt = 0.05;
        let got = integrate_lorenz([0.0, 0.0, 10.0], dt);
        assert_eq!(got[0], 0.0);
        assert_eq!(got[1], 0.0);
        assert_relative_eq!(got[2], 10.0 * (-8.0 * dt / 3.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn halving_substep_changes_little() {
        let x = [1.5, -2.0];
        let a = rk4_advance(vanderpol_rhs, x, 0.05, MAX_SUBSTEP);
        let b = rk4_advance(vanderpol_rhs, x, 0.05, MAX_SUBSTEP / 2.0);
        for i in 0..2 {
            assert!((a[i] - b[i]).abs() <= 1e-9 * a[i].abs().max(1.0));
        }
        let s = [-8.0, 7.0, 27.0];
        let a = rk4_advance(lorenz_rhs, s, 0.05, MAX_SUBSTEP);
        let b = rk4_advance(lorenz_rhs, s, 0.05, MAX_SUBSTEP / 2.0);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() <= 1e-9 * a[i].abs().max(1.0), "{i}: {} vs {}", a[i], b[i]);
        }
    }

    #[test]
    fn trajectory_examples() {
        let sys = DynamicalSystem::UnstableNonlinear;
        let t = generate_trajectory(&sys, &[0.3, 0.4], 0).unwrap();
        assert_eq!(t.nrows(), 1);
        assert_eq!(t[(0, 1)], 0.4);

        let t = generate_trajectory(&sys, &[1.0, 0.0], 2).unwrap();
        assert_relative_eq!(t[(1, 0)], 1.2);
        assert_relative_eq!(t[(1, 1)], 8.1f64.cbrt());
        let x2 = step_unstable_nonlinear([1.2, 8.1f64.cbrt()]);
        assert_relative_eq!(t[(2, 0)], x2[0]);
        assert_relative_eq!(t[(2, 1)], x2[1]);

        let pw = DynamicalSystem::PiecewiseLinear { n: 2 };
        let t = generate_trajectory(&pw, &[0.5, 0.5], 5).unwrap();
        for k in 0..=5 {
            assert_eq!(t[(k, 0)], 0.5);
            assert_eq!(t[(k, 1)], 0.5);
        }
    }

    #[test]
    fn generated_discrete_snapshots_are_exact() {
        let sys = DynamicalSystem::UnstableNonlinear;
        let sampling = Sampling::Uniform {
            region: vec![(-3.0, 3.0); 2],
            n_samples: 10_000,
        };
        let s = generate_snapshots(&sys, &sampling, RngSeed(1), &SignaturePolicy::First { count: 15 }).unwrap();
        assert_eq!(s.len(), 10_000);
        assert_eq!(s.signature_rows, (0..15).collect::<Vec<_>>());
        assert_eq!(s.max_residual(&sys).unwrap(), 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let sys = DynamicalSystem::Vanderpol { dt: 0.05 };
        let sampling = Sampling::Trajectories {
            region: vec![(-4.0, 4.0); 2],
            n_trajectories: 3,
            steps: 10,
        };
        let p = SignaturePolicy::Random { count: 5 };
        let a = generate_snapshots(&sys, &sampling, RngSeed(9), &p).unwrap();
        let b = generate_snapshots(&sys, &sampling, RngSeed(9), &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 30);
        // consecutive pairs chain along each trajectory
        assert_eq!(a.y.row(0), a.x.row(1));
        let c = generate_snapshots(&sys, &sampling, RngSeed(10), &p).unwrap();
        assert_ne!(a.x, c.x);

        let single = Sampling::Uniform { region: vec![(-1.0, 1.0); 2], n_samples: 1 };
        let u = DynamicalSystem::UnstableNonlinear;
        let a = generate_snapshots(&u, &single, RngSeed(3), &SignaturePolicy::None).unwrap();
        let b = generate_snapshots(&u, &single, RngSeed(3), &SignaturePolicy::None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn piecewise_cells_layout() {
        let sys = DynamicalSystem::PiecewiseLinear { n: 10 };
        let sampling = Sampling::PiecewiseCells {
            signature_samples: 100,
            per_cell_samples: 1000,
        };
        let s = generate_snapshots(&sys, &sampling, RngSeed(5), &SignaturePolicy::Sampler).unwrap();
        assert_eq!(s.len(), 100 + 10 * 1000);
        assert_eq!(s.signature_rows, (0..100).collect::<Vec<_>>());
        assert_eq!(s.groups.len(), 10);
        for &r in &s.signature_rows {
            let x: Vec<f64> = s.x.row(r).iter().copied().collect();
            assert!(!matches!(piecewise_cell(&x), Some(k) if k >= 2));
        }
        for (k, block) in s.groups.iter().enumerate() {
            assert_eq!(block.len(), 1000);
            for &r in block {
                let x: Vec<f64> = s.x.row(r).iter().copied().collect();
                assert_eq!(piecewise_cell(&x), Some(k + 1));
            }
        }
        assert_eq!(s.max_residual(&sys).unwrap(), 0.0);
    }

    #[test]
    fn rejects_region_outside_state_space() {
        let sys = DynamicalSystem::UnstableNonlinear;
        let sampling = Sampling::Uniform { region: vec![(-4.0, 3.0); 2], n_samples: 5 };
        assert!(generate_snapshots(&sys, &sampling, RngSeed(0), &SignaturePolicy::None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let sys = DynamicalSystem::UnstableNonlinear;
        let sampling = Sampling::Uniform { region: vec![(-3.0, 3.0); 2], n_samples: 20 };
        let s = generate_snapshots(&sys, &sampling, RngSeed(2), &SignaturePolicy::First { count: 3 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        s.write_csv(&path).unwrap();
        let back = SnapshotSet::read_csv(&path, s.signature_rows.clone()).unwrap();
        assert_eq!(back.x, s.x);
        assert_eq!(back.y, s.y);
    }
}
