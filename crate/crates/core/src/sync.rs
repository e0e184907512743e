//! Synchronous stochastic approximation: every iterate is updated each step
//! from single-sample estimates of its drift.
//!
//! Stream layout for a run with seed `s`: the global sampler uses stream 0,
//! the local sampler of pair `i` stream `1 + i`, and the Q sampler of pair `i`
//! stream `1 + |X||A| + i`.

use crate::error::{MfcgError, Result};
use crate::ideal::{q_step, IdealState};
use crate::model::{cost_checked, transition_into, MeanFieldModel};
use crate::operators::{family_push, p3_tilde_with_policy, t3};
use crate::rng::RandomSource;
use crate::schedules::{RateExponents, RateKind, Schedule};
use crate::trace::{check_cadence, emit, is_due, TraceRow, TraceSink};
use crate::types::{check_action_row, softmin_policy, LocalFamily, QTable, SimplexDist, SpaceDims};

/// Draw an action from `policy_row`, then a successor from `p(·|x, action, mu, mu_tilde)`.
pub fn sample_next_state<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    policy_row: &[f64],
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
    rng: &mut RandomSource,
) -> Result<usize> {
    let dims = model.dims();
    dims.check_state(x)?;
    if policy_row.len() != dims.n_actions {
        return Err(MfcgError::InvalidInput(format!(
            "policy row has {} entries, model has {} actions",
            policy_row.len(),
            dims.n_actions
        )));
    }
    check_action_row(policy_row)
        .map_err(|e| MfcgError::InvalidInput(format!("policy row: {e}")))?;
    let mut row = vec![0.0; dims.n_states];
    draw_successor(model, x, policy_row, mu, mu_tilde, rng, &mut row)
}

fn draw_successor<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    policy_row: &[f64],
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
    rng: &mut RandomSource,
    buf: &mut [f64],
) -> Result<usize> {
    let a = rng.categorical(policy_row);
    transition_into(model, x, a, mu, mu_tilde, buf)?;
    Ok(rng.categorical(buf))
}

fn point_mass_row(n: usize, a: usize) -> Vec<f64> {
    let mut r = vec![0.0; n];
    r[a] = 1.0;
    r
}

/// Single-sample Q drift at (x,a): `f + γ min_a' Q(X',a') − Q(x,a)` with `X' ~ p(·|x,a,μ,μ̃)`.
pub fn check_t<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    q: &QTable,
    mu_tilde: &SimplexDist,
    x: usize,
    a: usize,
    rng: &mut RandomSource,
) -> Result<f64> {
    let dims = model.dims();
    dims.check_pair(x, a)?;
    let xn = sample_next_state(
        model,
        x,
        &point_mass_row(dims.n_actions, a),
        mu,
        mu_tilde,
        rng,
    )?;
    let f = cost_checked(model, x, a, mu, mu_tilde)?;
    Ok((f + model.gamma() * q.row_min(xn)) - q.get(x, a))
}

/// Single-sample distribution drift: `δ(X') − ν` with `X'` drawn from state `x` under `policy_row`.
pub fn check_p<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    policy_row: &[f64],
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
    nu: &SimplexDist,
    rng: &mut RandomSource,
) -> Result<Vec<f64>> {
    let xn = sample_next_state(model, x, policy_row, mu, mu_tilde, rng)?;
    Ok(nu.direction_to(&point_mass_row(nu.len(), xn)))
}

/// Random streams of one synchronous run.
#[derive(Debug, Clone)]
pub struct SyncStreams {
    pub global: RandomSource,
    pub local: Vec<RandomSource>,
    pub q: Vec<RandomSource>,
}

impl SyncStreams {
    pub fn new(seed: u64, dims: SpaceDims) -> Self {
        let np = dims.n_pairs() as u64;
        SyncStreams {
            global: RandomSource::new(seed, 0),
            local: (0..np).map(|i| RandomSource::new(seed, 1 + i)).collect(),
            q: (0..np)
                .map(|i| RandomSource::new(seed, 1 + np + i))
                .collect(),
        }
    }
}

/// Sampled-minus-expected drifts of one synchronous step, with the rates used.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleIncrement {
    pub step: u64,
    pub p_mu: Vec<f64>,
    pub p_locals: Vec<Vec<f64>>,
    pub t_q: Vec<f64>,
    pub rho_mu: f64,
    pub rho_q: f64,
    pub rho_mu_tilde: f64,
}

/// Rate-weighted running sums of the martingale increments.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrace {
    pub psi_mu: Vec<f64>,
    pub psi_locals: Vec<Vec<f64>>,
    pub psi_q: Vec<f64>,
    pub increments: Option<Vec<MartingaleIncrement>>,
}

impl MartingaleTrace {
    pub fn new(dims: SpaceDims, retain: bool) -> Self {
        MartingaleTrace {
            psi_mu: vec![0.0; dims.n_states],
            psi_locals: vec![vec![0.0; dims.n_states]; dims.n_pairs()],
            psi_q: vec![0.0; dims.n_pairs()],
            increments: retain.then(Vec::new),
        }
    }

    pub fn absorb(&mut self, inc: MartingaleIncrement) {
        axpy(&mut self.psi_mu, inc.rho_mu, &inc.p_mu);
        for (psi, p) in self.psi_locals.iter_mut().zip(&inc.p_locals) {
            axpy(psi, inc.rho_mu_tilde, p);
        }
        axpy(&mut self.psi_q, inc.rho_q, &inc.t_q);
        if let Some(v) = self.increments.as_mut() {
            v.push(inc);
        }
    }
}

fn axpy(acc: &mut [f64], w: f64, v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += w * b;
    }
}

fn minus(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// One synchronous step. All samples read the time-n state; locals are drawn
/// first, then the global path, then the Q entries.
pub fn step_sync<M: MeanFieldModel + ?Sized>(
    model: &M,
    state: &IdealState,
    schedule: &Schedule,
    streams: &mut SyncStreams,
) -> Result<(IdealState, MartingaleIncrement)> {
    let dims = model.dims();
    let n = state.step;
    let rho_t = schedule.deterministic(RateKind::MuTilde, n);
    let rho_q = schedule.deterministic(RateKind::Q, n);
    let rho_m = schedule.deterministic(RateKind::Mu, n);
    let pi = softmin_policy(&state.q, model.phi())?;
    let mu = &state.mu;
    let mut buf = vec![0.0; dims.n_states];

    let mut locals = Vec::with_capacity(dims.n_pairs());
    let mut p_locals = Vec::with_capacity(dims.n_pairs());
    for i in 0..dims.n_pairs() {
        let (x, a) = dims.unpair(i);
        let cur = state.locals.get(x, a);
        let rng = &mut streams.local[i];
        let xs = rng.categorical(cur.probs());
        let frozen;
        let row = if xs == x {
            frozen = point_mass_row(dims.n_actions, a);
            &frozen[..]
        } else {
            pi.row(xs)
        };
        let xn = draw_successor(model, xs, row, mu, cur, rng, &mut buf)?;
        let sampled = cur.direction_to(&point_mass_row(dims.n_states, xn));
        let expected = p3_tilde_with_policy(model, x, a, mu, &pi, cur)?;
        p_locals.push(minus(&sampled, &expected));
        locals.push(cur.step(rho_t, &sampled)?);
    }

    let rng = &mut streams.global;
    let xg = rng.categorical(mu.probs());
    let ag = rng.categorical(pi.row(xg));
    transition_into(model, xg, ag, mu, state.locals.get(xg, ag), &mut buf)?;
    let xgn = rng.categorical(&buf);
    let sampled = mu.direction_to(&point_mass_row(dims.n_states, xgn));
    let expected = mu.direction_to(family_push(model, mu, &pi, &state.locals)?.probs());
    let p_mu = minus(&sampled, &expected);
    let next_mu = mu.step(rho_m, &sampled)?;

    let expected_t = t3(model, mu, &state.q, &state.locals)?;
    let gamma = model.gamma();
    let mut sampled_t = Vec::with_capacity(dims.n_pairs());
    for i in 0..dims.n_pairs() {
        let (x, a) = dims.unpair(i);
        let mt = state.locals.get(x, a);
        let rng = &mut streams.q[i];
        transition_into(model, x, a, mu, mt, &mut buf)?;
        let xn = rng.categorical(&buf);
        let f = cost_checked(model, x, a, mu, mt)?;
        sampled_t.push((f + gamma * state.q.row_min(xn)) - state.q.get(x, a));
    }
    let t_q = minus(&sampled_t, expected_t.values());
    let next_q = q_step(&state.q, rho_q, &sampled_t)?;

    let next = IdealState {
        mu: next_mu,
        q: next_q,
        locals: LocalFamily::from_vec(dims, locals)?,
        step: n + 1,
    };
    let inc = MartingaleIncrement {
        step: n,
        p_mu,
        p_locals,
        t_q,
        rho_mu: rho_m,
        rho_q,
        rho_mu_tilde: rho_t,
    };
    Ok((next, inc))
}

/// Run the synchronous iteration from the standard initial state.
pub fn run_sync<M: MeanFieldModel + ?Sized>(
    model: &M,
    exps: &RateExponents,
    n_steps: u64,
    seed: u64,
    trace_every: u64,
) -> Result<(IdealState, Vec<TraceRow>, MartingaleTrace)> {
    let schedule = Schedule::new(*exps)?;
    let mut rows = Vec::new();
    let (end, psi) = run_sync_from(
        model,
        &schedule,
        IdealState::initial(model.dims()),
        n_steps,
        seed,
        trace_every,
        &mut rows,
        false,
    )?;
    Ok((end, rows, psi))
}

/// Run from `state`, streaming rows into `sink`; `retain` keeps every increment.
#[allow(clippy::too_many_arguments)]
pub fn run_sync_from<M, S>(
    model: &M,
    schedule: &Schedule,
    mut state: IdealState,
    n_steps: u64,
    seed: u64,
    trace_every: u64,
    sink: &mut S,
    retain: bool,
) -> Result<(IdealState, MartingaleTrace)>
where
    M: MeanFieldModel + ?Sized,
    S: TraceSink + ?Sized,
{
    check_cadence(n_steps, trace_every)?;
    let dims = model.dims();
    let mut streams = SyncStreams::new(seed, dims);
    let mut psi = MartingaleTrace::new(dims, retain);
    for done in 1..=n_steps {
        let (next, inc) = step_sync(model, &state, schedule, &mut streams)?;
        psi.absorb(inc);
        state = next;
        if is_due(done, n_steps, trace_every) {
            emit(sink, state.snapshot())?;
        }
    }
    Ok((state, psi))
}
