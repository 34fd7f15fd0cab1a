//! Per-round regret records produced by every runner.

use serde::{Deserialize, Serialize};

/// Counters collected while a run executes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Rounds on which the saddle (or deviation) sandwich was checked.
    pub sandwich_checks: usize,
    /// Rounds on which it failed beyond twice the solver tolerance.
    pub sandwich_violations: usize,
    /// Largest observed excess over the allowed slack (<= 0 when no violation).
    pub worst_sandwich_excess: f64,
    /// Model updates that stopped at the iteration cap.
    pub model_nonconverged: usize,
    /// Equilibrium solves that returned without a convergence certificate.
    pub equilibrium_nonconverged: usize,
}

impl RunDiagnostics {
    pub(crate) fn record_sandwich(&mut self, excess: f64) {
        if self.sandwich_checks == 0 {
            self.worst_sandwich_excess = excess;
        } else {
            self.worst_sandwich_excess = self.worst_sandwich_excess.max(excess);
        }
        self.sandwich_checks += 1;
        if excess > 0.0 {
            self.sandwich_violations += 1;
        }
    }
}

/// Gap per round, its running sum, and run metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub gaps: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub wallclock_ms: Vec<f64>,
    pub config_hash: String,
    pub seed: u64,
    /// Mean squared residual of the final model on the collected data.
    pub final_residual: Option<f64>,
    pub diagnostics: RunDiagnostics,
    /// Set when the run aborted early; the trace then holds the completed rounds.
    pub error: Option<String>,
}

impl RegretTrace {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Default::default() }
    }

    pub fn push(&mut self, gap: f64, wallclock_ms: f64) {
        let prev = self.cum_regret.last().copied().unwrap_or(0.0);
        self.gaps.push(gap);
        self.cum_regret.push(prev + gap);
        self.wallclock_ms.push(wallclock_ms);
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn total_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    pub fn min_gap(&self) -> Option<f64> {
        self.gaps.iter().copied().reduce(f64::min)
    }

    /// Mean gap over rounds `range` (0-based, clipped to the trace).
    pub fn mean_gap(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let end = range.end.min(self.gaps.len());
        let start = range.start.min(end);
        if start == end {
            return None;
        }
        Some(self.gaps[start..end].iter().sum::<f64>() / (end - start) as f64)
    }

    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

/// Milliseconds elapsed since `start`, or zero when timing is disabled.
pub(crate) fn elapsed_ms(start: Option<std::time::Instant>) -> f64 {
    start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)
}
