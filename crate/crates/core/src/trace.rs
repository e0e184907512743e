//! Trajectory records emitted by the iterative solvers and learners.

use crate::error::{MfcgError, Result};
use crate::types::{LocalFamily, QTable, SimplexDist};

/// Snapshot of an iterate after `step` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub mu: Vec<f64>,
    /// Q entries in row-major (x, a) order.
    pub q: Vec<f64>,
    /// Local distributions in (x, a) order, each of length |X|.
    pub locals: Vec<Vec<f64>>,
    /// `ν(x,a,n)/n` per pair, for learners that track visits.
    pub visit_fractions: Option<Vec<f64>>,
}

impl TraceRow {
    pub fn snapshot(step: u64, mu: &SimplexDist, q: &QTable, locals: &LocalFamily) -> Self {
        TraceRow {
            step,
            mu: mu.probs().to_vec(),
            q: q.values().to_vec(),
            locals: locals
                .members()
                .iter()
                .map(|d| d.probs().to_vec())
                .collect(),
            visit_fractions: None,
        }
    }
}

/// Receiver of trajectory rows.
pub trait TraceSink {
    fn record(&mut self, row: TraceRow) -> std::result::Result<(), String>;
}

impl TraceSink for Vec<TraceRow> {
    fn record(&mut self, row: TraceRow) -> std::result::Result<(), String> {
        self.push(row);
        Ok(())
    }
}

/// Sink that drops every row.
#[derive(Debug, Default, Clone, Copy)]
pub struct Discard;

impl TraceSink for Discard {
    fn record(&mut self, _row: TraceRow) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// Row cadence: after update `done` (1-based) of `total`, a row is due when
/// `done` is a multiple of `every` or is the final update. This yields
/// `⌈total/every⌉` rows.
#[inline]
pub fn is_due(done: u64, total: u64, every: u64) -> bool {
    done.is_multiple_of(every) || done == total
}

pub(crate) fn check_cadence(n_steps: u64, trace_every: u64) -> Result<()> {
    if n_steps == 0 {
        return Err(MfcgError::InvalidInput("n_steps must be at least 1".into()));
    }
    if trace_every == 0 {
        return Err(MfcgError::InvalidInput(
            "trace_every must be at least 1".into(),
        ));
    }
    Ok(())
}

pub(crate) fn emit<S: TraceSink + ?Sized>(sink: &mut S, row: TraceRow) -> Result<()> {
    sink.record(row).map_err(MfcgError::Sink)
}
