//! Model-free asynchronous learner: one global sample path plus one path per
//! state-action pair, each driving its own distribution estimate, with a
//! single Q entry updated per step.
//!
//! Streams for seed `s`: the global path uses stream 0 and the path of pair
//! `i` uses stream `1 + i`.

use crate::error::{MfcgError, Result};
use crate::model::{cost_checked, transition_into, MeanFieldModel};
use crate::par::{map_slice, Execution};
use crate::rng::RandomSource;
use crate::schedules::{RateExponents, RateKind, Schedule, VisitCounts};
use crate::trace::{check_cadence, emit, is_due, TraceRow, TraceSink};
use crate::types::{softmin_policy_row, LocalFamily, QTable, SimplexDist};

#[derive(Debug, Clone)]
pub struct AsyncState {
    pub q: QTable,
    pub mu: SimplexDist,
    pub locals: LocalFamily,
    pub global_state: usize,
    /// Current state of each pair's path, in pair order.
    pub local_states: Vec<usize>,
    pub visits: VisitCounts,
    pub step: u64,
    /// Number of steps on which the Q update fired.
    pub gate_open_steps: u64,
    global_rng: RandomSource,
    local_rngs: Vec<RandomSource>,
}

impl AsyncState {
    /// `ν(x,a,n)/n` per pair; zeros before the first step.
    pub fn visit_fractions(&self) -> Vec<f64> {
        let n = self.step.max(1) as f64;
        self.visits.counts().iter().map(|&c| c as f64 / n).collect()
    }

    pub fn gate_open_fraction(&self) -> f64 {
        if self.step == 0 {
            0.0
        } else {
            self.gate_open_steps as f64 / self.step as f64
        }
    }

    pub fn snapshot(&self) -> TraceRow {
        let mut row = TraceRow::snapshot(self.step, &self.mu, &self.q, &self.locals);
        row.visit_fractions = Some(self.visit_fractions());
        row
    }
}

/// Zero Q; every path starts at a uniformly drawn state and every
/// distribution is the point mass at its own path's start.
pub fn init_async<M: MeanFieldModel + ?Sized>(model: &M, seed: u64) -> AsyncState {
    let dims = model.dims();
    let n = dims.n_states;
    let mut global_rng = RandomSource::new(seed, 0);
    let mut local_rngs: Vec<RandomSource> = (0..dims.n_pairs() as u64)
        .map(|i| RandomSource::new(seed, 1 + i))
        .collect();
    let global_state = global_rng.index(n);
    let local_states: Vec<usize> = local_rngs.iter_mut().map(|r| r.index(n)).collect();
    let members = local_states
        .iter()
        .map(|&s| SimplexDist::point_mass(n, s))
        .collect();
    AsyncState {
        q: QTable::zeros(dims),
        mu: SimplexDist::point_mass(n, global_state),
        locals: LocalFamily::from_vec(dims, members).expect("family sized from dims"),
        global_state,
        local_states,
        visits: VisitCounts::new(dims),
        step: 0,
        gate_open_steps: 0,
        global_rng,
        local_rngs,
    }
}

/// What happened on the global path during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsyncStepInfo {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub cost: f64,
    pub gate_open: bool,
}

/// Advance every path by one transition and apply the updates.
pub fn step_async<M: MeanFieldModel + ?Sized>(
    model: &M,
    st: &mut AsyncState,
    schedule: &Schedule,
) -> Result<AsyncStepInfo> {
    let dims = model.dims();
    let n = st.step;
    let phi = model.phi();
    let mut buf = vec![0.0; dims.n_states];

    // Global path, evaluated at the time-n distributions.
    let x = st.global_state;
    let pi_x = softmin_policy_row(st.q.row(x), phi)?;
    let a = st.global_rng.categorical(&pi_x);
    let own_local = st.locals.get(x, a);
    let cost = cost_checked(model, x, a, &st.mu, own_local)?;
    transition_into(model, x, a, &st.mu, own_local, &mut buf)?;
    let x_next = st.global_rng.categorical(&buf);
    let gate_open = st.local_states[dims.pair(x, a)] == x;

    // Visits count step n itself.
    st.visits.increment(x, a);

    let mut new_locals = Vec::with_capacity(dims.n_pairs());
    let mut new_states = Vec::with_capacity(dims.n_pairs());
    for i in 0..dims.n_pairs() {
        let (lx, la) = dims.unpair(i);
        let s = st.local_states[i];
        let rng = &mut st.local_rngs[i];
        let b = if s == lx {
            la
        } else {
            rng.categorical(&softmin_policy_row(st.q.row(s), phi)?)
        };
        let cur = st.locals.get(lx, la);
        transition_into(model, s, b, &st.mu, cur, &mut buf)?;
        let s_next = rng.categorical(&buf);
        let rho = schedule.visit(RateKind::MuTilde, &st.visits, s, b)?;
        let mut target = vec![0.0; dims.n_states];
        target[s_next] = 1.0;
        new_locals.push(cur.step(rho, &cur.direction_to(&target))?);
        new_states.push(s_next);
    }

    let mut target = vec![0.0; dims.n_states];
    target[x_next] = 1.0;
    let new_mu = st
        .mu
        .step(schedule.global(n), &st.mu.direction_to(&target))?;

    if gate_open {
        let rho = schedule.visit(RateKind::Q, &st.visits, x, a)?;
        let old = st.q.get(x, a);
        let drift = (cost + model.gamma() * st.q.row_min(x_next)) - old;
        let updated = old + rho * drift;
        if !updated.is_finite() {
            return Err(MfcgError::ModelContract {
                x,
                a,
                detail: "Q update produced a non-finite value".into(),
            });
        }
        st.q.set(x, a, updated);
        st.gate_open_steps += 1;
    }

    st.mu = new_mu;
    st.locals = LocalFamily::from_vec(dims, new_locals)?;
    st.local_states = new_states;
    st.global_state = x_next;
    st.step = n + 1;
    Ok(AsyncStepInfo {
        state: x,
        action: a,
        next_state: x_next,
        cost,
        gate_open,
    })
}

/// Run `n_steps` from [`init_async`], collecting a trace.
pub fn run_async<M: MeanFieldModel + ?Sized>(
    model: &M,
    exps: &RateExponents,
    n_steps: u64,
    seed: u64,
    trace_every: u64,
) -> Result<(AsyncState, Vec<TraceRow>)> {
    let schedule = Schedule::new(*exps)?;
    let mut rows = Vec::new();
    let end = run_async_from(
        model,
        &schedule,
        init_async(model, seed),
        n_steps,
        trace_every,
        &mut rows,
    )?;
    Ok((end, rows))
}

/// Run `n_steps` from `state`, streaming rows into `sink`.
pub fn run_async_from<M, S>(
    model: &M,
    schedule: &Schedule,
    mut state: AsyncState,
    n_steps: u64,
    trace_every: u64,
    sink: &mut S,
) -> Result<AsyncState>
where
    M: MeanFieldModel + ?Sized,
    S: TraceSink + ?Sized,
{
    check_cadence(n_steps, trace_every)?;
    for done in 1..=n_steps {
        step_async(model, &mut state, schedule)?;
        if is_due(done, n_steps, trace_every) {
            emit(sink, state.snapshot())?;
        }
    }
    Ok(state)
}

/// Independent runs over several seeds, without traces. Results are in seed order.
pub fn run_async_batch<M: MeanFieldModel + ?Sized>(
    model: &M,
    exps: &RateExponents,
    n_steps: u64,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<AsyncState>> {
    let schedule = Schedule::new(*exps)?;
    map_slice(exec, seeds, |&seed| {
        run_async_from(
            model,
            &schedule,
            init_async(model, seed),
            n_steps,
            n_steps,
            &mut crate::trace::Discard,
        )
    })
    .into_iter()
    .collect()
}
