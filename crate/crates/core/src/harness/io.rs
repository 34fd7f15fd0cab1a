use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VmgError};
use crate::trace::{RegretTrace, RunDiagnostics};

pub const RUN_SCHEMA: &str = "vmg-run/1";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    round: usize,
    gap: f64,
    cum_regret: f64,
    wallclock_ms: f64,
}

fn csv_err(e: csv::Error) -> VmgError {
    VmgError::Io(e.to_string())
}

/// Writes `round,gap,cum_regret,wallclock_ms` with 1-based rounds.
pub fn write_trace_csv<W: std::io::Write>(trace: &RegretTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    for t in 0..trace.len() {
        w.serialize(Row { round: t + 1, gap: trace.gaps[t], cum_regret: trace.cum_regret[t], wallclock_ms: trace.wallclock_ms[t] })
            .map_err(csv_err)?;
    }
    if trace.is_empty() {
        w.write_record(["round", "gap", "cum_regret", "wallclock_ms"]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace_csv(trace: &RegretTrace, path: &Path) -> Result<()> {
    write_trace_csv(trace, std::fs::File::create(path)?)
}

/// Reads the per-round columns back; metadata fields stay at their defaults.
pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<RegretTrace> {
    let mut r = csv::Reader::from_reader(input);
    let mut trace = RegretTrace::default();
    for (k, row) in r.deserialize::<Row>().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.round != k + 1 {
            return Err(VmgError::Io(format!("row {} has round {}", k + 1, row.round)));
        }
        trace.gaps.push(row.gap);
        trace.cum_regret.push(row.cum_regret);
        trace.wallclock_ms.push(row.wallclock_ms);
    }
    Ok(trace)
}

pub fn load_trace_csv(path: &Path) -> Result<RegretTrace> {
    read_trace_csv(std::fs::File::open(path)?)
}

/// Least-squares line through `(log t, log cum_regret_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Minimum trace length accepted by [`fit_regret_slope`].
pub const MIN_FIT_ROUNDS: usize = 50;

/// Fits over the second half of the trace; the first half is burn-in.
pub fn fit_regret_slope(trace: &RegretTrace) -> Result<SlopeFit> {
    let n = trace.cum_regret.len();
    if n < MIN_FIT_ROUNDS {
        return Err(VmgError::TraceTooShort { len: n, min: MIN_FIT_ROUNDS });
    }
    let mut xs = Vec::with_capacity(n - n / 2);
    let mut ys = Vec::with_capacity(n - n / 2);
    for t in n / 2..n {
        let c = trace.cum_regret[t];
        if !(c > 0.0) {
            return Err(VmgError::NonPositiveRegret { round: t + 1 });
        }
        xs.push(((t + 1) as f64).ln());
        ys.push(c.ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit { slope, intercept, r2 })
}

/// Summary of one `(config, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub seed: u64,
    pub csv: String,
    pub rounds_completed: usize,
    pub total_regret: f64,
    pub min_gap: Option<f64>,
    pub final_residual: Option<f64>,
    /// Absent when the trace is too short or has no positive regret.
    pub slope_fit: Option<SlopeFit>,
    pub diagnostics: RunDiagnostics,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn from_trace(trace: &RegretTrace, csv: String) -> Self {
        Self {
            seed: trace.seed,
            csv,
            rounds_completed: trace.len(),
            total_regret: trace.total_regret(),
            min_gap: trace.min_gap(),
            final_residual: trace.final_residual,
            slope_fit: fit_regret_slope(trace).ok(),
            diagnostics: trace.diagnostics.clone(),
            error: trace.error.clone(),
        }
    }
}

/// The `summary.json` document of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSummary {
    pub schema: String,
    pub kind: String,
    pub config_hash: String,
    pub rounds: usize,
    pub runs: Vec<RunSummary>,
}

/// Checks a parsed JSON value against the `vmg-run/1` layout.
pub fn validate_summary(value: &serde_json::Value) -> Result<ExperimentSummary> {
    let s: ExperimentSummary =
        serde_json::from_value(value.clone()).map_err(|e| VmgError::ConfigInvalid(format!("summary: {e}")))?;
    if s.schema != RUN_SCHEMA {
        return Err(VmgError::ConfigInvalid(format!("summary schema {:?}, expected {RUN_SCHEMA:?}", s.schema)));
    }
    if s.config_hash.len() != 64 || !s.config_hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(VmgError::ConfigInvalid("config_hash must be 64 hex digits".into()));
    }
    Ok(s)
}
