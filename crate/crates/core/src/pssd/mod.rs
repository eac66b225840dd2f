//! Parallel symmetric subspace decomposition over a network of agents.
//!
//! Rounds are bulk synchronous: in round `k` every agent reads only the
//! round `k - 1` matrices of itself and its current in-neighbors, so agent
//! updates run in parallel and their evaluation order never matters.

mod partition;

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use partition::{partition_data, DataPartition, PartitionPolicy};

use crate::dictionary::{CoefficientMatrix, Observables};
use crate::dynamics::SnapshotSet;
use crate::error::{Error, Result};
use crate::linalg::{self, flops, Matrix, Span, Tolerances};
use crate::network::{Digraph, DigraphSchedule};
use crate::ssd::FactoredPair;

/// Projector distance below which two ranges count as equal.
pub const CONSENSUS_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: usize,
    dx: Arc<Matrix>,
    dy: Arc<Matrix>,
    factor: Option<Arc<FactoredPair>>,
    pub c: CoefficientMatrix,
    pub flag: bool,
    /// Bumped whenever `c` changes.
    pub version: u64,
}

impl AgentState {
    /// Agent holding local dictionary matrices, starting from `C = I`.
    ///
    /// With `reuse_factorization` the local pair is factored once here and
    /// every later decomposition works on the triangular factor; otherwise
    /// each round factors `[D(X_i), D(Y_i)]` afresh.
    pub fn new(id: usize, dx: Matrix, dy: Matrix, tol: &Tolerances, reuse_factorization: bool) -> Result<Self> {
        let pair = FactoredPair::new(&dx, &dy, tol).map_err(|e| Error::AbortRound {
            agent: id,
            source: Box::new(e),
        })?;
        let nd = dx.ncols();
        Ok(Self {
            id,
            dx: Arc::new(dx),
            dy: Arc::new(dy),
            factor: reuse_factorization.then(|| Arc::new(pair)),
            c: CoefficientMatrix::identity(nd),
            flag: false,
            version: 0,
        })
    }

    pub fn local_dx(&self) -> &Matrix {
        &self.dx
    }

    pub fn local_dy(&self) -> &Matrix {
        &self.dy
    }

    pub fn n_rows(&self) -> usize {
        self.dx.nrows()
    }

    fn decompose_within(&self, d: &Matrix, eps: f64, tol: &Tolerances) -> Result<Span> {
        let span = match &self.factor {
            Some(f) => f.decompose_within(d, eps, tol)?.0,
            None => FactoredPair::new(&self.dx, &self.dy, tol)?.decompose_within(d, eps, tol)?.0,
        };
        Ok(span)
    }

    /// One protocol step given the round `k - 1` matrices of the in-neighbors.
    fn step(&self, neighbors: &[&CoefficientMatrix], eps: f64, tol: &Tolerances) -> Result<(CoefficientMatrix, bool)> {
        let mut spans = Vec::with_capacity(neighbors.len() + 1);
        spans.push(self.c.span().clone());
        spans.extend(neighbors.iter().map(|c| c.span().clone()));
        let d = linalg::multi_intersection_basis(&spans, tol)?;
        let candidate = match &d {
            Span::Zero { ambient } => Span::zero(*ambient),
            Span::Basis(dm) => match self.decompose_within(dm, eps, tol)? {
                Span::Zero { .. } => Span::zero(dm.nrows()),
                Span::Basis(e) => Span::Basis(linalg::mul(dm, &e)),
            },
        };
        if candidate.ncols() < self.c.ncols() {
            Ok((CoefficientMatrix::trusted(candidate), false))
        } else {
            Ok((self.c.clone(), true))
        }
    }
}

/// Builds one agent per partition block, evaluating the dictionary on its rows.
pub fn build_agents<D: Observables + Sync>(
    dict: &D,
    snapshots: &SnapshotSet,
    partition: &DataPartition,
    tol: &Tolerances,
    reuse_factorization: bool,
) -> Result<Vec<AgentState>> {
    (0..partition.agent_count())
        .into_par_iter()
        .map(|i| {
            let (x, y) = snapshots.select_rows(&partition.agent_rows(i));
            AgentState::new(i, dict.evaluate(&x)?, dict.evaluate(&y)?, tol, reuse_factorization)
        })
        .collect()
}

/// Which decomposition agents run on their local data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    Exact,
    Approx { eps: f64 },
}

impl StepKind {
    fn eps(&self, tol: &Tolerances) -> f64 {
        match self {
            StepKind::Exact => tol.eps_cap,
            StepKind::Approx { eps } => eps.max(tol.eps_cap),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RoundOutput {
    pub agents: Vec<AgentState>,
    pub flops: Vec<u64>,
}

type MemoKey = Vec<(usize, u64)>;

fn round_inner(
    agents: &[AgentState],
    g: &Digraph,
    tol: &Tolerances,
    step: StepKind,
    memo: Option<&mut Vec<HashSet<MemoKey>>>,
) -> Result<RoundOutput> {
    if g.node_count() != agents.len() {
        return Err(Error::InvalidInput(format!(
            "graph has {} nodes for {} agents",
            g.node_count(),
            agents.len()
        )));
    }
    let eps = step.eps(tol);
    let keys: Vec<MemoKey> = agents
        .iter()
        .map(|a| {
            let mut key = vec![(a.id, a.version)];
            key.extend(g.in_neighbors(a.id).into_iter().map(|j| (j, agents[j].version)));
            key
        })
        .collect();
    let settled: Vec<bool> = match &memo {
        Some(m) => keys.iter().enumerate().map(|(i, k)| m[i].contains(k)).collect(),
        None => vec![false; agents.len()],
    };
    let results: Vec<Result<(CoefficientMatrix, bool, u64)>> = agents
        .par_iter()
        .map(|a| {
            if settled[a.id] {
                return Ok((a.c.clone(), true, 0));
            }
            let neighbors: Vec<&CoefficientMatrix> = keys[a.id][1..].iter().map(|(j, _)| &agents[*j].c).collect();
            let (res, spent) = flops::measure(|| a.step(&neighbors, eps, tol));
            res.map(|(c, flag)| (c, flag, spent)).map_err(|e| Error::AbortRound {
                agent: a.id,
                source: Box::new(e),
            })
        })
        .collect();
    let mut next = Vec::with_capacity(agents.len());
    let mut tallies = Vec::with_capacity(agents.len());
    for (a, res) in agents.iter().zip(results) {
        let (c, flag, spent) = res?;
        let mut s = a.clone();
        if !flag {
            s.c = c;
            s.version += 1;
        }
        s.flag = flag;
        next.push(s);
        tallies.push(spent);
    }
    if let Some(m) = memo {
        for (i, a) in next.iter().enumerate() {
            if a.flag {
                m[i].insert(keys[i].clone());
            }
        }
    }
    Ok(RoundOutput { agents: next, flops: tallies })
}

/// One synchronous round on graph `g`.
pub fn pssd_round(agents: &[AgentState], g: &Digraph, tol: &Tolerances, step: StepKind) -> Result<RoundOutput> {
    round_inner(agents, g, tol, step, None)
}

/// True iff every agent's range equals the oracle range.
pub fn check_consensus(coeffs: &[&CoefficientMatrix], oracle: &CoefficientMatrix, tol: f64) -> bool {
    coeffs
        .iter()
        .all(|c| c.ncols() == oracle.ncols() && linalg::range_equal(c.span(), oracle.span(), tol))
}

fn agreement(coeffs: &[&CoefficientMatrix], tol: f64) -> bool {
    match coeffs.split_first() {
        None => true,
        Some((first, rest)) => check_consensus(rest, first, tol),
    }
}

/// When the runner stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    /// All flags equal one.
    Flags,
    /// No matrix changed during the last `rounds` rounds.
    Window { rounds: usize },
    /// Every agent matches the oracle; requires an oracle.
    Consensus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PssdOptions {
    pub max_rounds: usize,
    pub step: StepKind,
    pub stop: StopRule,
    /// Count one broadcast per agent per round instead of one message per edge.
    #[serde(default)]
    pub shared_bus: bool,
    /// Skip agents whose inputs repeat an earlier round that left them unchanged.
    #[serde(default)]
    pub memoize: bool,
    #[serde(default = "default_consensus_tol")]
    pub consensus_tol: f64,
}

fn default_consensus_tol() -> f64 {
    CONSENSUS_TOL
}

impl PssdOptions {
    /// Flags on time-invariant schedules, a `2M` stationarity window otherwise.
    pub fn for_schedule(schedule: &DigraphSchedule, max_rounds: usize) -> Self {
        let stop = if schedule.is_time_varying() {
            StopRule::Window {
                rounds: 2 * schedule.node_count(),
            }
        } else {
            StopRule::Flags
        };
        Self {
            max_rounds,
            step: StepKind::Exact,
            stop,
            shared_bus: false,
            memoize: false,
            consensus_tol: CONSENSUS_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub flags: Vec<bool>,
    pub cols: Vec<usize>,
    pub changed: bool,
    pub consensus: bool,
    pub flops: Vec<u64>,
    pub messages: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PssdRunReport {
    pub rounds_executed: usize,
    /// Last round in which some matrix changed; 0 if none ever did.
    pub equilibrium_round: Option<usize>,
    /// Round at which the stop rule fired, for the flag and window rules.
    pub termination_round: Option<usize>,
    /// First round from which all agents match the oracle (or each other
    /// when no oracle is given) through the last executed round.
    pub consensus_round: Option<usize>,
    pub rounds: Vec<RoundRecord>,
    pub final_coeffs: Vec<CoefficientMatrix>,
}

impl PssdRunReport {
    pub fn total_messages(&self) -> u64 {
        self.rounds.iter().map(|r| r.messages).sum()
    }

    /// Sum over rounds `1..=upto` of the largest per-agent tally.
    pub fn critical_path_flops(&self, upto: usize) -> u64 {
        self.rounds
            .iter()
            .take(upto)
            .map(|r| r.flops.iter().copied().max().unwrap_or(0))
            .sum()
    }
}

/// Runs rounds `1, 2, ...` until the stop rule fires.
///
/// Exhausting `max_rounds` first yields [`Error::NoTermination`] carrying
/// the partial report.
pub fn run_pssd(
    agents: Vec<AgentState>,
    schedule: &DigraphSchedule,
    tol: &Tolerances,
    opts: &PssdOptions,
    oracle: Option<&CoefficientMatrix>,
) -> Result<PssdRunReport> {
    schedule.validate()?;
    tol.validate()?;
    if opts.max_rounds == 0 {
        return Err(Error::InvalidInput("max_rounds must be at least 1".into()));
    }
    if schedule.node_count() != agents.len() {
        return Err(Error::InvalidInput(format!(
            "schedule has {} nodes for {} agents",
            schedule.node_count(),
            agents.len()
        )));
    }
    if opts.stop == StopRule::Consensus && oracle.is_none() {
        return Err(Error::InvalidInput("consensus stop rule needs an oracle".into()));
    }
    if let StopRule::Window { rounds } = opts.stop {
        if rounds == 0 {
            return Err(Error::InvalidInput("stationarity window must be at least 1".into()));
        }
    }
    let consensus_now = |agents: &[AgentState]| {
        let cs: Vec<&CoefficientMatrix> = agents.iter().map(|a| &a.c).collect();
        match oracle {
            Some(o) => check_consensus(&cs, o, opts.consensus_tol),
            None => agreement(&cs, opts.consensus_tol),
        }
    };

    let mut memo = opts.memoize.then(|| vec![HashSet::new(); agents.len()]);
    let mut agents = agents;
    let mut consensus = consensus_now(&agents);
    let mut consensus_round = consensus.then_some(0);
    let mut last_change = 0;
    let mut rounds = Vec::new();
    let mut quiet = 0;
    let mut termination_round = None;

    for k in 1..=opts.max_rounds {
        let g = schedule.edges_at(k);
        let out = round_inner(&agents, &g, tol, opts.step, memo.as_mut())?;
        let changed = out.agents.iter().any(|a| !a.flag);
        agents = out.agents;
        if changed {
            last_change = k;
            quiet = 0;
            consensus = consensus_now(&agents);
        } else {
            quiet += 1;
        }
        if !consensus {
            consensus_round = None;
        } else if consensus_round.is_none() {
            consensus_round = Some(k);
        }
        let messages = if opts.shared_bus {
            agents.len() as u64
        } else {
            g.edge_count() as u64
        };
        rounds.push(RoundRecord {
            round: k,
            flags: agents.iter().map(|a| a.flag).collect(),
            cols: agents.iter().map(|a| a.c.ncols()).collect(),
            changed,
            consensus,
            flops: out.flops,
            messages,
        });
        let stop = match opts.stop {
            StopRule::Flags => agents.iter().all(|a| a.flag),
            StopRule::Window { rounds } => quiet >= rounds,
            StopRule::Consensus => consensus,
        };
        if stop {
            if opts.stop != StopRule::Consensus {
                termination_round = Some(k);
            }
            break;
        }
    }

    let stopped = termination_round.is_some() || (opts.stop == StopRule::Consensus && consensus);
    let report = PssdRunReport {
        rounds_executed: rounds.len(),
        equilibrium_round: stopped.then_some(last_change),
        termination_round,
        consensus_round,
        rounds,
        final_coeffs: agents.into_iter().map(|a| a.c).collect(),
    };
    if stopped {
        Ok(report)
    } else {
        Err(Error::NoTermination(Box::new(report)))
    }
}
