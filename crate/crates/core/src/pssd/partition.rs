use serde::{Deserialize, Serialize};

use crate::dictionary::Observables;
use crate::dynamics::SnapshotSet;
use crate::error::{Error, Result};
use crate::linalg::{self, Tolerances};

/// How the non-signature rows are split among agents.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionPolicy {
    /// Contiguous blocks whose sizes differ by at most one.
    #[default]
    Even,
    /// Contiguous blocks sized proportionally to the weights.
    Weighted { weights: Vec<f64> },
    /// Agent `k` receives the `k`-th row group of the snapshot set; rows in
    /// no group are split evenly.
    PerGroup,
}

/// Row indices held by each agent, besides the shared signature rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPartition {
    pub agents: Vec<Vec<usize>>,
    pub signature: Vec<usize>,
}

impl DataPartition {
    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Signature rows followed by the agent's own rows.
    pub fn agent_rows(&self, i: usize) -> Vec<usize> {
        let mut rows = self.signature.clone();
        rows.extend(self.agents[i].iter().copied());
        rows
    }

    /// Every row in `0..total` is held by some agent.
    pub fn covers(&self, total: usize) -> bool {
        let mut seen = vec![false; total];
        for r in self.signature.iter().chain(self.agents.iter().flatten()) {
            if *r < total {
                seen[*r] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn split_sizes(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let missing = total - sizes.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        sizes[i] += 1;
    }
    sizes
}

fn chunk(rows: &[usize], sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(rows[start..start + s].to_vec());
        start += s;
    }
    out
}

/// Replicates the signature rows to every agent and splits the rest.
///
/// A nonempty signature set must evaluate to full column rank matrices
/// `D(X_s)` and `D(Y_s)`; an empty one is accepted.
pub fn partition_data(
    snapshots: &SnapshotSet,
    m: usize,
    policy: &PartitionPolicy,
    dict: &dyn Observables,
    tol: &Tolerances,
) -> Result<DataPartition> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one agent".into()));
    }
    let total = snapshots.len();
    let mut is_sig = vec![false; total];
    for &r in &snapshots.signature_rows {
        if r >= total {
            return Err(Error::InvalidInput(format!("signature row {r} out of range")));
        }
        is_sig[r] = true;
    }
    let signature: Vec<usize> = (0..total).filter(|&r| is_sig[r]).collect();
    if !signature.is_empty() {
        let (xs, ys) = snapshots.select_rows(&signature);
        let nd = dict.len();
        for m_s in [dict.evaluate(&xs)?, dict.evaluate(&ys)?] {
            let sv = linalg::singular_values(&m_s)?;
            let rank = linalg::numerical_rank(&sv, m_s.nrows().max(nd), tol);
            if rank < nd || m_s.nrows() < nd {
                return Err(Error::SignatureRankError { rank, required: nd });
            }
        }
    }
    let rest: Vec<usize> = (0..total).filter(|&r| !is_sig[r]).collect();
    let agents = match policy {
        PartitionPolicy::Even => chunk(&rest, &split_sizes(rest.len(), &vec![1.0; m])),
        PartitionPolicy::Weighted { weights } => {
            if weights.len() != m || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "need {m} positive weights, got {weights:?}"
                )));
            }
            chunk(&rest, &split_sizes(rest.len(), weights))
        }
        PartitionPolicy::PerGroup => {
            if snapshots.groups.len() != m {
                return Err(Error::InvalidInput(format!(
                    "{} row groups for {m} agents",
                    snapshots.groups.len()
                )));
            }
            let mut grouped = vec![false; total];
            let mut agents: Vec<Vec<usize>> = Vec::with_capacity(m);
            for g in &snapshots.groups {
                let mut own = Vec::with_capacity(g.len());
                for &r in g {
                    if r >= total {
                        return Err(Error::InvalidInput(format!("group row {r} out of range")));
                    }
                    grouped[r] = true;
                    if !is_sig[r] {
                        own.push(r);
                    }
                }
                agents.push(own);
            }
            let loose: Vec<usize> = rest.iter().copied().filter(|&r| !grouped[r]).collect();
            for (own, extra) in agents.iter_mut().zip(chunk(&loose, &split_sizes(loose.len(), &vec![1.0; m]))) {
                own.extend(extra);
            }
            agents
        }
    };
    Ok(DataPartition { agents, signature })
}
