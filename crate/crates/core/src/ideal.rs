//! The deterministic three-timescale iteration.

use crate::error::Result;
use crate::model::MeanFieldModel;
use crate::operators::{family_push, p3_tilde_with_policy, t3};
use crate::par::{try_map_range, Execution};
use crate::schedules::{RateExponents, RateKind, Schedule};
use crate::trace::{check_cadence, emit, is_due, TraceRow, TraceSink};
use crate::types::{softmin_policy, LocalFamily, QTable, SimplexDist, SpaceDims};

/// Joint iterate `(μ_n, Q_n, {μ̃^{(x,a)}_n})` after `step` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealState {
    pub mu: SimplexDist,
    pub q: QTable,
    pub locals: LocalFamily,
    pub step: u64,
}

impl IdealState {
    /// Uniform distributions and a zero Q-table.
    pub fn initial(dims: SpaceDims) -> Self {
        IdealState {
            mu: SimplexDist::uniform(dims.n_states),
            q: QTable::zeros(dims),
            locals: LocalFamily::uniform(dims),
            step: 0,
        }
    }

    pub fn snapshot(&self) -> TraceRow {
        TraceRow::snapshot(self.step, &self.mu, &self.q, &self.locals)
    }
}

/// `q + rho * drift`, entrywise.
pub(crate) fn q_step(q: &QTable, rho: f64, drift: &[f64]) -> Result<QTable> {
    let v = q
        .values()
        .iter()
        .zip(drift)
        .map(|(q, d)| q + rho * d)
        .collect();
    QTable::from_vec(q.dims(), v)
}

/// One simultaneous update of all three iterates from their time-n values.
pub fn step_ideal<M: MeanFieldModel + ?Sized>(
    model: &M,
    state: &IdealState,
    schedule: &Schedule,
) -> Result<IdealState> {
    step_ideal_with(model, state, schedule, Execution::Sequential)
}

/// [`step_ideal`] with the per-pair local updates optionally run in parallel.
pub fn step_ideal_with<M: MeanFieldModel + ?Sized>(
    model: &M,
    state: &IdealState,
    schedule: &Schedule,
    exec: Execution,
) -> Result<IdealState> {
    let dims = model.dims();
    let n = state.step;
    let rho_t = schedule.deterministic(RateKind::MuTilde, n);
    let rho_q = schedule.deterministic(RateKind::Q, n);
    let rho_m = schedule.deterministic(RateKind::Mu, n);
    let pi = softmin_policy(&state.q, model.phi())?;

    let locals = try_map_range(exec, dims.n_pairs(), |i| {
        let (x, a) = dims.unpair(i);
        let cur = state.locals.get(x, a);
        let drift = p3_tilde_with_policy(model, x, a, &state.mu, &pi, cur)?;
        cur.step(rho_t, &drift)
    })?;

    let pushed = family_push(model, &state.mu, &pi, &state.locals)?;
    let mu = state
        .mu
        .step(rho_m, &state.mu.direction_to(pushed.probs()))?;

    let drift = t3(model, &state.mu, &state.q, &state.locals)?;
    let q = q_step(&state.q, rho_q, drift.values())?;

    Ok(IdealState {
        mu,
        q,
        locals: LocalFamily::from_vec(dims, locals)?,
        step: n + 1,
    })
}

/// Run `n_steps` updates from the standard initial state, collecting a trace.
pub fn run_ideal<M: MeanFieldModel + ?Sized>(
    model: &M,
    exps: &RateExponents,
    n_steps: u64,
    trace_every: u64,
) -> Result<(IdealState, Vec<TraceRow>)> {
    let schedule = Schedule::new(*exps)?;
    let mut rows = Vec::new();
    let end = run_ideal_from(
        model,
        &schedule,
        IdealState::initial(model.dims()),
        n_steps,
        trace_every,
        &mut rows,
    )?;
    Ok((end, rows))
}

/// Run `n_steps` updates from `state`, streaming rows into `sink`.
pub fn run_ideal_from<M, S>(
    model: &M,
    schedule: &Schedule,
    mut state: IdealState,
    n_steps: u64,
    trace_every: u64,
    sink: &mut S,
) -> Result<IdealState>
where
    M: MeanFieldModel + ?Sized,
    S: TraceSink + ?Sized,
{
    check_cadence(n_steps, trace_every)?;
    for done in 1..=n_steps {
        state = step_ideal(model, &state, schedule)?;
        if is_due(done, n_steps, trace_every) {
            emit(sink, state.snapshot())?;
        }
    }
    Ok(state)
}
