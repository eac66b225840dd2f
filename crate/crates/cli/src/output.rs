//! Result files. CSV follows RFC 4180 with `.` decimals and 17 significant
//! digits; JSON reports are pretty-printed. Wall-clock data goes only to
//! `timing.json`.

use std::fs;
use std::path::{Path, PathBuf};

use koopman_pssd::format_float as f;
use serde::Serialize;

use crate::error::CliError;
use crate::experiment::{CompareReport, ExperimentReport, GridSample, RunOutcome, SweepReport, Timing};

pub const REPORT: &str = "report.json";
pub const TIMING: &str = "timing.json";
pub const EIGENPAIRS: &str = "eigenpairs.csv";
pub const ROUNDS: &str = "rounds.csv";
pub const PREDICTION_ERRORS: &str = "prediction_errors.csv";
pub const EIGENFUNCTION_GRID: &str = "eigenfunction_grid.csv";
pub const SWEEP_TRIALS: &str = "sweep_trials.csv";
pub const CONSENSUS_VS_DROP: &str = "consensus_vs_drop.csv";
pub const SPEEDUP: &str = "speedup.csv";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(file))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Writes every file of a single run and returns their paths.
pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<Vec<PathBuf>, CliError> {
    prepare_dir(dir)?;
    let report = &outcome.report;
    let mut written = vec![dir.join(REPORT), dir.join(TIMING), dir.join(EIGENPAIRS), dir.join(ROUNDS)];
    write_json(&written[0], report)?;
    write_json(&written[1], &outcome.timing)?;
    write_eigenpairs(&written[2], report)?;
    write_rounds(&written[3], report)?;
    if !report.prediction.is_empty() {
        let p = dir.join(PREDICTION_ERRORS);
        write_prediction_errors(&p, report)?;
        written.push(p);
    }
    if !outcome.grid.is_empty() {
        let p = dir.join(EIGENFUNCTION_GRID);
        write_grid(&p, &outcome.grid)?;
        written.push(p);
    }
    Ok(written)
}

fn write_eigenpairs(path: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "eigenvalue_re", "eigenvalue_im", "modulus", "phase", "term", "coeff_re", "coeff_im"])?;
    for e in &report.eigenpairs {
        for (term, [re, im]) in report.dictionary_terms.iter().zip(&e.monomial_coeffs) {
            w.write_record([
                e.index.to_string(),
                f(e.eigenvalue.re),
                f(e.eigenvalue.im),
                f(e.eigenvalue.modulus),
                f(e.eigenvalue.phase),
                term.clone(),
                f(*re),
                f(*im),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_rounds(path: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["round", "agent", "flag", "cols", "flops", "changed", "consensus", "messages"])?;
    for r in &report.pssd.rounds {
        for (i, ((flag, cols), flops)) in r.flags.iter().zip(&r.cols).zip(&r.flops).enumerate() {
            w.write_record([
                r.round.to_string(),
                i.to_string(),
                u8::from(*flag).to_string(),
                cols.to_string(),
                flops.to_string(),
                u8::from(r.changed).to_string(),
                u8::from(r.consensus).to_string(),
                r.messages.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Steps `1..=L` per method and metric.
fn write_prediction_errors(path: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["method", "metric", "k", "median", "q1", "q3"])?;
    for s in &report.prediction {
        for (metric, series) in [("relative", &s.relative), ("angle", &s.angle)] {
            for (k, q) in series.iter().enumerate().skip(1) {
                w.write_record([s.method.clone(), metric.to_string(), k.to_string(), f(q.median), f(q.q1), f(q.q3)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_grid(path: &Path, grid: &[GridSample]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["eigenpair", "x1", "x2", "re", "im", "abs", "angle"])?;
    for g in grid {
        w.write_record([
            g.eigenpair.to_string(),
            f(g.x1),
            f(g.x2),
            f(g.value.re),
            f(g.value.im),
            f(g.value.norm()),
            f(g.value.arg()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(dir: &Path, report: &SweepReport, timing: &Timing) -> Result<Vec<PathBuf>, CliError> {
    prepare_dir(dir)?;
    let paths = vec![dir.join(REPORT), dir.join(TIMING), dir.join(SWEEP_TRIALS), dir.join(CONSENSUS_VS_DROP)];
    write_json(&paths[0], report)?;
    write_json(&paths[1], timing)?;
    let mut w = csv_writer(&paths[2])?;
    w.write_record(["drop_probability", "trial", "consensus_round", "rounds_executed", "dimension"])?;
    for p in &report.points {
        for t in &p.trials {
            w.write_record([
                f(p.drop_probability),
                t.trial.to_string(),
                opt(t.consensus_round),
                t.rounds_executed.to_string(),
                t.dimension.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = csv_writer(&paths[3])?;
    w.write_record(["drop_probability", "mean_consensus_round", "min", "max", "unreached"])?;
    for p in &report.points {
        w.write_record([
            f(p.drop_probability),
            p.mean_consensus_round.map(f).unwrap_or_default(),
            opt(p.min_consensus_round),
            opt(p.max_consensus_round),
            p.unreached.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(paths)
}

pub fn write_compare(dir: &Path, report: &CompareReport, timing: &Timing) -> Result<Vec<PathBuf>, CliError> {
    prepare_dir(dir)?;
    let paths = vec![dir.join(REPORT), dir.join(TIMING), dir.join(SPEEDUP)];
    write_json(&paths[0], report)?;
    write_json(&paths[1], timing)?;
    let mut w = csv_writer(&paths[2])?;
    w.write_record([
        "agents",
        "rounds",
        "dimension",
        "max_agent_round_flops",
        "critical_path_flops",
        "ssd_flops",
        "round_fraction",
        "speedup",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.agents.to_string(),
            r.rounds.to_string(),
            r.dimension.to_string(),
            r.max_agent_round_flops.to_string(),
            r.critical_path_flops.to_string(),
            report.ssd_flops.to_string(),
            f(r.round_fraction),
            f(r.speedup),
        ])?;
    }
    w.flush()?;
    Ok(paths)
}
