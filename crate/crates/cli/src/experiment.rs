//! Orchestration of single runs, drop-probability sweeps and cost
//! comparisons. Everything random flows from the config seed through the
//! named substreams `data`, `drops` and `trajectory_inits`.

use std::collections::BTreeMap;
use std::time::Instant;

use koopman_pssd::dictionary::{balance_scales, reduce};
use koopman_pssd::dynamics::{generate_snapshots, generate_trajectory, sample_box, Sampling, SnapshotSet};
use koopman_pssd::koopman::{eigenpairs, error_series, prediction_matrix, quartile_summary, verify_linear_evolution, Eigenpair, Quartiles};
use koopman_pssd::network::DigraphSchedule;
use koopman_pssd::pssd::{
    build_agents, check_consensus, partition_data, run_pssd, AgentState, PartitionPolicy, PssdOptions, PssdRunReport,
    RoundRecord, StepKind, StopRule, CONSENSUS_TOL,
};
use koopman_pssd::ssd::{approx_ssd, ssd, ssd_flops, ssd_reduced_operator, SsdTrace};
use koopman_pssd::linalg::subspace_distance;
use koopman_pssd::{CoefficientMatrix, Error, Matrix, MonomialDictionary, Observables, RngSeed};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Topology, Variant};
use crate::error::CliError;

/// Wall-clock seconds per phase. Kept out of the reports so those stay
/// byte-reproducible.
pub type Timing = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub phase: f64,
}

impl From<Complex64> for Eigenvalue {
    fn from(z: Complex64) -> Self {
        Eigenvalue {
            re: z.re,
            im: z.im,
            modulus: z.norm(),
            phase: z.arg(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenpairRecord {
    pub index: usize,
    pub eigenvalue: Eigenvalue,
    /// `[re, im]` per monomial, in the order of `dictionary_terms`.
    pub monomial_coeffs: Vec<[f64; 2]>,
    /// `|D(Y) v - lambda D(X) v| / |D(X) v|` on all snapshots.
    pub linear_evolution_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub snapshots: usize,
    pub signature_rows: usize,
    pub rows_per_agent: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<SsdTrace>,
    pub flops: u64,
    pub eigenvalues: Vec<Eigenvalue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PssdSummary {
    pub dimension: usize,
    pub agent_dimensions: Vec<usize>,
    pub agents_agree: bool,
    /// Largest projector distance between agent 0 and any other agent.
    pub max_agent_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches_oracle: Option<bool>,
    pub stop_rule: StopRule,
    pub rounds_executed: usize,
    pub consensus_round: Option<usize>,
    pub termination_round: Option<usize>,
    pub equilibrium_round: Option<usize>,
    pub messages: u64,
    pub critical_path_flops: u64,
    pub max_agent_round_flops: u64,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// `original` or `reduced`.
    pub method: String,
    /// Percent, steps `0..=L`.
    pub relative: Vec<Quartiles>,
    /// Radians, steps `0..=L`.
    pub angle: Vec<Quartiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub full_scale: bool,
    pub variant: Variant,
    pub agents: usize,
    pub data: DataSummary,
    pub dictionary_terms: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub pssd: PssdSummary,
    pub eigenpairs: Vec<EigenpairRecord>,
    pub prediction: Vec<ErrorSummary>,
    pub annotations: Vec<String>,
}

/// `|phi|` and `angle(phi)` of one eigenfunction at one lattice point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    pub eigenpair: usize,
    pub x1: f64,
    pub x2: f64,
    pub value: Complex64,
}

pub struct RunOutcome {
    pub report: ExperimentReport,
    pub grid: Vec<GridSample>,
    pub timing: Timing,
}

struct Timer {
    phases: Timing,
    at: Instant,
}

impl Timer {
    fn new() -> Self {
        Timer {
            phases: Timing::new(),
            at: Instant::now(),
        }
    }

    fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        *self.phases.entry(phase.to_string()).or_default() += (now - self.at).as_secs_f64();
        self.at = now;
    }
}

/// Data, dictionary and the full-data dictionary matrices shared by every
/// command.
pub struct Prepared {
    pub snapshots: SnapshotSet,
    pub dict: MonomialDictionary,
    pub dx: Matrix,
    pub dy: Matrix,
}

pub fn prepare(config: &ExperimentConfig, full: bool) -> Result<Prepared, CliError> {
    prepare_with(config, config.sampling_for(full))
}

fn prepare_with(config: &ExperimentConfig, sampling: &Sampling) -> Result<Prepared, CliError> {
    let seed = RngSeed(config.seed);
    let snapshots = generate_snapshots(
        &config.system,
        sampling,
        seed.substream("data"),
        &config.signature,
    )?;
    let n = config.system.state_dim();
    let mut dict = MonomialDictionary::up_to_degree(n, config.dictionary.max_degree)?;
    if config.dictionary.balance {
        dict = balance_scales(&dict, &snapshots.x, &snapshots.y)?;
    }
    let dx = dict.evaluate(&snapshots.x)?;
    let dy = dict.evaluate(&snapshots.y)?;
    Ok(Prepared { snapshots, dict, dx, dy })
}

fn agents_for(
    config: &ExperimentConfig,
    prep: &Prepared,
    m: usize,
    policy: &PartitionPolicy,
    reuse: bool,
) -> Result<(Vec<AgentState>, DataSummary), CliError> {
    let tol = &config.tolerances;
    let partition = partition_data(&prep.snapshots, m, policy, &prep.dict, tol)?;
    let agents = build_agents(&prep.dict, &prep.snapshots, &partition, tol, reuse)?;
    let data = DataSummary {
        snapshots: prep.snapshots.len(),
        signature_rows: partition.signature.len(),
        rows_per_agent: agents.iter().map(|a| a.n_rows()).collect(),
    };
    Ok((agents, data))
}

fn oracle_for(config: &ExperimentConfig, prep: &Prepared) -> Result<(CoefficientMatrix, Option<SsdTrace>, u64), CliError> {
    let tol = &config.tolerances;
    let (res, flops) = koopman_pssd::linalg::flops::measure(|| match config.protocol.variant {
        Variant::Exact => ssd(&prep.dx, &prep.dy, tol).map(|(c, t)| (c, Some(t))),
        Variant::Approximated => approx_ssd(&prep.dx, &prep.dy, tol.eps_approx, tol).map(|c| (c, None)),
    });
    let (c, trace) = res?;
    Ok((c, trace, flops))
}

fn schedule_for(topology: &Topology, m: usize, p: f64, seed: RngSeed) -> Result<DigraphSchedule, CliError> {
    let graph = topology.build(m)?;
    Ok(if p > 0.0 {
        DigraphSchedule::Dropped { graph, p, seed }
    } else {
        DigraphSchedule::Static { graph }
    })
}

fn options_for(config: &ExperimentConfig, stop: StopRule) -> PssdOptions {
    PssdOptions {
        max_rounds: config.protocol.max_rounds,
        step: match config.protocol.variant {
            Variant::Exact => StepKind::Exact,
            Variant::Approximated => StepKind::Approx {
                eps: config.tolerances.eps_approx,
            },
        },
        stop,
        shared_bus: config.protocol.shared_bus,
        memoize: config.protocol.memoize,
        consensus_tol: config.protocol.consensus_tol.unwrap_or(CONSENSUS_TOL),
    }
}

/// Eigenvalues sorted by modulus, then real part, then imaginary part, all
/// descending.
fn sort_pairs(pairs: &mut [Eigenpair]) {
    pairs.sort_by(|a, b| {
        b.eigenvalue
            .norm()
            .total_cmp(&a.eigenvalue.norm())
            .then(b.eigenvalue.re.total_cmp(&a.eigenvalue.re))
            .then(b.eigenvalue.im.total_cmp(&a.eigenvalue.im))
    });
}

fn sorted_eigenvalues(k: &Matrix, c: &CoefficientMatrix) -> Result<Vec<Eigenvalue>, CliError> {
    let mut pairs = eigenpairs(k, c)?;
    sort_pairs(&mut pairs);
    Ok(pairs.into_iter().map(|p| p.eigenvalue.into()).collect())
}

fn complex_residual(v: &[Complex64], lambda: Complex64, dx: &Matrix, dy: &Matrix) -> Option<f64> {
    match verify_linear_evolution(v, lambda, dx, dy) {
        Ok(r) if r.is_finite() => Some(r),
        _ => None,
    }
}

fn summarize(method: &str, series: &[koopman_pssd::koopman::PredictionErrorSeries]) -> Result<ErrorSummary, CliError> {
    let rel: Vec<Vec<f64>> = series.iter().map(|s| s.relative.clone()).collect();
    let ang: Vec<Vec<f64>> = series.iter().map(|s| s.angle.clone()).collect();
    Ok(ErrorSummary {
        method: method.to_string(),
        relative: quartile_summary(&rel)?,
        angle: quartile_summary(&ang)?,
    })
}

fn evaluate_predictions(
    config: &ExperimentConfig,
    prep: &Prepared,
    reduced: Option<&CoefficientMatrix>,
) -> Result<Vec<ErrorSummary>, CliError> {
    let Some(ev) = config.evaluation.as_ref().filter(|e| e.trajectories > 0) else {
        return Ok(Vec::new());
    };
    let tol = &config.tolerances;
    let mut rng = RngSeed(config.seed).substream("trajectory_inits").rng();
    let inits: Vec<Vec<f64>> = (0..ev.trajectories).map(|_| sample_box(&mut rng, &ev.region)).collect();
    let trajectories: Vec<Matrix> = inits
        .par_iter()
        .map(|x0| generate_trajectory(&config.system, x0, ev.steps))
        .collect::<Result<_, Error>>()?;

    let mut out = Vec::new();
    let k_full = prediction_matrix(&prep.dx, &prep.dy, tol)?;
    let original: Vec<_> = trajectories
        .par_iter()
        .map(|t| error_series(&prep.dict, &k_full, t))
        .collect::<Result<_, Error>>()?;
    out.push(summarize("original", &original)?);

    if let Some(c) = reduced.filter(|c| !c.is_zero()) {
        let rd = reduce(&prep.dict, c)?;
        let cm = c.to_matrix();
        let k = prediction_matrix(&(&prep.dx * &cm), &(&prep.dy * &cm), tol)?;
        let series: Vec<_> = trajectories
            .par_iter()
            .map(|t| error_series(&rd, &k, t))
            .collect::<Result<_, Error>>()?;
        out.push(summarize("reduced", &series)?);
    }
    Ok(out)
}

fn eigenfunction_grid(config: &ExperimentConfig, prep: &Prepared, pairs: &[Eigenpair]) -> Result<Vec<GridSample>, CliError> {
    let Some(grid) = &config.eigenfunction_grid else {
        return Ok(Vec::new());
    };
    let p = grid.points;
    let at = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (p - 1) as f64;
    let mut states = Matrix::zeros(p * p, 2);
    for i in 0..p {
        for j in 0..p {
            states[(i * p + j, 0)] = at(grid.region[0], i);
            states[(i * p + j, 1)] = at(grid.region[1], j);
        }
    }
    let d = prep.dict.evaluate(&states)?;
    let mut out = Vec::with_capacity(pairs.len() * p * p);
    for (idx, pair) in pairs.iter().enumerate() {
        for r in 0..p * p {
            let value = d
                .row(r)
                .iter()
                .zip(&pair.dictionary_coeffs)
                .map(|(x, v)| v * *x)
                .sum::<Complex64>();
            out.push(GridSample {
                eigenpair: idx,
                x1: states[(r, 0)],
                x2: states[(r, 1)],
                value,
            });
        }
    }
    Ok(out)
}

fn finite_check(report: &ExperimentReport) -> Result<(), CliError> {
    let text = serde_json::to_value(report)?;
    fn walk(v: &serde_json::Value, path: &str) -> Result<(), CliError> {
        match v {
            serde_json::Value::Number(n) if n.as_f64().is_some_and(|x| !x.is_finite()) => {
                Err(CliError::Core(Error::NumericalError(format!("non-finite value at {path}"))))
            }
            serde_json::Value::Array(a) => a.iter().enumerate().try_for_each(|(i, x)| walk(x, &format!("{path}/{i}"))),
            serde_json::Value::Object(o) => o.iter().try_for_each(|(k, x)| walk(x, &format!("{path}/{k}"))),
            _ => Ok(()),
        }
    }
    walk(&text, "")
}

/// Non-finite floats would serialize as `null`; reject them up front.
fn reject_non_finite(report: &ExperimentReport) -> Result<(), CliError> {
    let floats = report
        .eigenpairs
        .iter()
        .flat_map(|e| [e.eigenvalue.re, e.eigenvalue.im].into_iter().chain(e.monomial_coeffs.iter().flatten().copied()))
        .chain(report.prediction.iter().flat_map(|s| {
            s.relative
                .iter()
                .chain(&s.angle)
                .flat_map(|q| [q.median, q.q1, q.q3])
        }));
    for x in floats {
        if !x.is_finite() {
            return Err(CliError::Core(Error::NumericalError("non-finite value in report".into())));
        }
    }
    finite_check(report)
}

/// Data, oracle, parallel identification, eigenpairs and prediction errors.
pub fn run_experiment(config: &ExperimentConfig, full: bool) -> Result<RunOutcome, CliError> {
    let mut timer = Timer::new();
    let tol = &config.tolerances;
    let prep = prepare(config, full)?;
    timer.lap("data");

    let (agents, data) = agents_for(config, &prep, config.agents, &config.partition, config.protocol.reuse_factorization)?;
    timer.lap("partition");

    let oracle = if config.oracle {
        let (c, trace, flops) = oracle_for(config, &prep)?;
        let eigenvalues = if c.is_zero() {
            Vec::new()
        } else {
            sorted_eigenvalues(&ssd_reduced_operator(&prep.dx, &prep.dy, &c, tol)?, &c)?
        };
        Some((c, trace, flops, eigenvalues))
    } else {
        None
    };
    timer.lap("oracle");

    let p = config.network.drop_probability;
    let schedule = schedule_for(&config.network.topology, config.agents, p, RngSeed(config.seed).substream("drops"))?;
    let stop = config.stop_rule(p);
    let opts = options_for(config, stop);
    let exact_oracle = match (&oracle, config.protocol.variant) {
        (Some((c, ..)), Variant::Exact) => Some(c),
        _ => None,
    };
    let run = run_pssd(agents, &schedule, tol, &opts, exact_oracle)?;
    timer.lap("pssd");

    let final_c = run.final_coeffs[0].clone();
    let refs: Vec<&CoefficientMatrix> = run.final_coeffs.iter().collect();
    let agents_agree = check_consensus(&refs, &final_c, opts.consensus_tol);
    let max_agent_distance = run
        .final_coeffs
        .iter()
        .map(|c| subspace_distance(c.span(), final_c.span()))
        .try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))?;
    let matches_oracle = oracle.as_ref().map(|(c, ..)| check_consensus(&refs, c, opts.consensus_tol));

    let mut pairs = if final_c.is_zero() {
        Vec::new()
    } else {
        let cm = final_c.to_matrix();
        let k = prediction_matrix(&(&prep.dx * &cm), &(&prep.dy * &cm), tol)?;
        eigenpairs(&k, &final_c)?
    };
    sort_pairs(&mut pairs);
    let scales = prep.dict.scales();
    let records = pairs
        .iter()
        .enumerate()
        .map(|(index, e)| EigenpairRecord {
            index,
            eigenvalue: e.eigenvalue.into(),
            monomial_coeffs: e.dictionary_coeffs.iter().zip(scales).map(|(v, s)| [v.re * s, v.im * s]).collect(),
            linear_evolution_residual: complex_residual(&e.dictionary_coeffs, e.eigenvalue, &prep.dx, &prep.dy),
        })
        .collect();
    timer.lap("eigenpairs");

    let prediction = evaluate_predictions(config, &prep, Some(&final_c))?;
    timer.lap("evaluation");
    let grid = eigenfunction_grid(config, &prep, &pairs)?;
    timer.lap("grid");

    let mut annotations = Vec::new();
    let dim = final_c.ncols();
    if let Some((c, ..)) = &oracle {
        match (config.protocol.variant, matches_oracle) {
            (Variant::Exact, Some(false)) => annotations.push(format!(
                "FAILURE-MODE: parallel result ({dim} columns) differs from the centralized one ({} columns)",
                c.ncols()
            )),
            (Variant::Approximated, _) => annotations.push(format!(
                "centralized approximation on all data keeps {} columns; not a consensus target",
                c.ncols()
            )),
            _ => {}
        }
    }
    if dim == prep.dict.len() {
        annotations.push(format!("identified subspace is the whole dictionary span ({dim} terms)"));
    }
    if dim == 0 {
        annotations.push("identified subspace is empty".into());
    }
    if !agents_agree {
        annotations.push(format!(
            "agents ended on different subspaces (largest distance {max_agent_distance:.3e})"
        ));
    }

    let mut pssd = pssd_summary(&run, stop, dim, agents_agree, matches_oracle);
    pssd.max_agent_distance = max_agent_distance;
    let report = ExperimentReport {
        name: config.name.clone(),
        seed: config.seed,
        full_scale: full,
        variant: config.protocol.variant,
        agents: config.agents,
        data,
        dictionary_terms: prep.dict.labels(),
        oracle: oracle.map(|(c, trace, flops, eigenvalues)| OracleSummary {
            dimension: c.ncols(),
            trace,
            flops,
            eigenvalues,
        }),
        pssd,
        eigenpairs: records,
        prediction,
        annotations,
    };
    reject_non_finite(&report)?;
    Ok(RunOutcome {
        report,
        grid,
        timing: timer.phases,
    })
}

fn pssd_summary(run: &PssdRunReport, stop: StopRule, dim: usize, agents_agree: bool, matches_oracle: Option<bool>) -> PssdSummary {
    PssdSummary {
        dimension: dim,
        agent_dimensions: run.final_coeffs.iter().map(|c| c.ncols()).collect(),
        agents_agree,
        max_agent_distance: 0.0,
        matches_oracle,
        stop_rule: stop,
        rounds_executed: run.rounds_executed,
        consensus_round: run.consensus_round,
        termination_round: run.termination_round,
        equilibrium_round: run.equilibrium_round,
        messages: run.total_messages(),
        critical_path_flops: run.critical_path_flops(run.rounds_executed),
        max_agent_round_flops: run.rounds.iter().flat_map(|r| r.flops.iter().copied()).max().unwrap_or(0),
        rounds: run.rounds.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// `None` when the round limit ran out first.
    pub consensus_round: Option<usize>,
    pub rounds_executed: usize,
    pub dimension: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub drop_probability: f64,
    pub trials: Vec<TrialRecord>,
    pub mean_consensus_round: Option<f64>,
    pub min_consensus_round: Option<usize>,
    pub max_consensus_round: Option<usize>,
    pub unreached: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub seed: u64,
    pub agents: usize,
    pub oracle_dimension: Option<usize>,
    pub max_rounds: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn unreached(&self) -> usize {
        self.points.iter().map(|p| p.unreached).sum()
    }
}

/// Consensus rounds across drop probabilities and seeds. Trial `t` at the
/// `i`-th probability drops packets from `drops/i/t`.
pub fn run_sweep(config: &ExperimentConfig, full: bool) -> Result<(SweepReport, Timing), CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("the sweep command needs a sweep block".into()))?;
    let mut timer = Timer::new();
    let tol = &config.tolerances;
    let prep = prepare(config, full)?;
    let (agents, _) = agents_for(config, &prep, config.agents, &config.partition, config.protocol.reuse_factorization)?;
    timer.lap("data");
    let oracle = match (config.oracle, config.protocol.variant) {
        (true, Variant::Exact) => Some(oracle_for(config, &prep)?.0),
        _ => None,
    };
    timer.lap("oracle");

    let drops = RngSeed(config.seed).substream("drops");
    let mut points = Vec::new();
    for (pi, &p) in sweep.drop_probabilities.iter().enumerate() {
        let stop = if oracle.is_some() { StopRule::Consensus } else { config.stop_rule(p) };
        let mut opts = options_for(config, stop);
        opts.memoize = true;
        let mut trials = Vec::new();
        for t in 0..sweep.trials {
            let seed = drops.indexed(pi as u64).indexed(t as u64);
            let schedule = schedule_for(&config.network.topology, config.agents, p, seed)?;
            let record = match run_pssd(agents.clone(), &schedule, tol, &opts, oracle.as_ref()) {
                Ok(run) => TrialRecord {
                    trial: t,
                    consensus_round: run.consensus_round,
                    rounds_executed: run.rounds_executed,
                    dimension: run.final_coeffs[0].ncols(),
                },
                Err(Error::NoTermination(run)) => TrialRecord {
                    trial: t,
                    consensus_round: None,
                    rounds_executed: run.rounds_executed,
                    dimension: run.final_coeffs[0].ncols(),
                },
                Err(e) => return Err(e.into()),
            };
            trials.push(record);
        }
        let reached: Vec<usize> = trials.iter().filter_map(|t| t.consensus_round).collect();
        points.push(SweepPoint {
            drop_probability: p,
            mean_consensus_round: (!reached.is_empty())
                .then(|| reached.iter().sum::<usize>() as f64 / reached.len() as f64),
            min_consensus_round: reached.iter().copied().min(),
            max_consensus_round: reached.iter().copied().max(),
            unreached: trials.len() - reached.len(),
            trials,
        });
        timer.lap(&format!("p={p}"));
    }
    Ok((
        SweepReport {
            name: config.name.clone(),
            seed: config.seed,
            agents: config.agents,
            oracle_dimension: oracle.map(|c| c.ncols()),
            max_rounds: config.protocol.max_rounds,
            points,
        },
        timer.phases,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub agents: usize,
    pub rounds: usize,
    pub dimension: usize,
    /// Largest tally of one agent in one round.
    pub max_agent_round_flops: u64,
    /// Sum over rounds of the per-round maximum.
    pub critical_path_flops: u64,
    /// `max_agent_round_flops / ssd_flops`.
    pub round_fraction: f64,
    /// `ssd_flops / critical_path_flops`.
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub name: String,
    pub seed: u64,
    pub snapshots: usize,
    pub ssd_flops: u64,
    pub ssd_dimension: usize,
    pub rows: Vec<SpeedupRow>,
}

/// Operation counts of the parallel run against one centralized run, for
/// each agent count. Agents re-factor their data every round.
pub fn compare_speedup(config: &ExperimentConfig, full: bool) -> Result<(CompareReport, Timing), CliError> {
    let cmp = config
        .compare
        .as_ref()
        .ok_or_else(|| CliError::Config("the compare command needs a compare block".into()))?;
    let mut timer = Timer::new();
    let tol = &config.tolerances;
    let prep = match (&cmp.sampling, full) {
        (Some(s), false) => prepare_with(config, s)?,
        _ => prepare(config, full)?,
    };
    timer.lap("data");
    let ssd_cost = ssd_flops(&prep.dx, &prep.dy, tol)?;
    let (oracle, _) = ssd(&prep.dx, &prep.dy, tol)?;
    timer.lap("ssd");
    let topology = cmp.topology.as_ref().unwrap_or(&config.network.topology);
    let mut rows = Vec::new();
    for &m in &cmp.agent_counts {
        let (agents, _) = agents_for(config, &prep, m, &PartitionPolicy::Even, false)?;
        let schedule = schedule_for(topology, m, 0.0, RngSeed(0))?;
        let mut opts = options_for(config, StopRule::Flags);
        opts.memoize = false;
        let lap = Instant::now();
        let run = run_pssd(agents, &schedule, tol, &opts, None)?;
        timer.phases.insert(format!("pssd_m{m}"), lap.elapsed().as_secs_f64());
        let max_round = run.rounds.iter().flat_map(|r| r.flops.iter().copied()).max().unwrap_or(0);
        let critical = run.critical_path_flops(run.rounds_executed);
        rows.push(SpeedupRow {
            agents: m,
            rounds: run.rounds_executed,
            dimension: run.final_coeffs[0].ncols(),
            max_agent_round_flops: max_round,
            critical_path_flops: critical,
            round_fraction: max_round as f64 / ssd_cost as f64,
            speedup: ssd_cost as f64 / critical.max(1) as f64,
        });
        timer.at = Instant::now();
    }
    Ok((
        CompareReport {
            name: config.name.clone(),
            seed: config.seed,
            snapshots: prep.snapshots.len(),
            ssd_flops: ssd_cost,
            ssd_dimension: oracle.ncols(),
            rows,
        },
        timer.phases,
    ))
}
