//! Picard solvers for the equilibria of each timescale and the extraction of
//! the pure-policy solution from the softmin-level one.
//!
//! Public entry points start from uniform distributions and a zero Q-table.
//! Nested solves inside an outer sweep warm-start from the previous sweep's
//! result; the fixed points are the same, only the iteration count changes.

use serde::{Deserialize, Serialize};

use crate::error::{MfcgError, Result};
use crate::model::{frozen_push, renormalize, MeanFieldModel};
use crate::operators::{action_gap, bellman_apply_family, family_push, t3};
use crate::par::{try_map_range, Execution};
use crate::types::{
    argmin_policy, softmin_policy, sup_norm, LocalFamily, PurePolicy, QTable, SimplexDist,
    StochasticPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Stop when successive iterates differ by at most this much.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the Picard step applied to Q each sweep; 1 is plain iteration.
    pub relaxation: f64,
    /// How the per-pair local solves of a sweep are scheduled.
    pub execution: Execution,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-10,
            max_iter: 100_000,
            relaxation: 1.0,
            execution: Execution::Parallel,
        }
    }
}

impl FixedPointOptions {
    pub fn with_tol(tol: f64) -> Self {
        FixedPointOptions {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(MfcgError::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(MfcgError::InvalidInput(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(MfcgError::InvalidInput(format!(
                "relaxation must lie in (0,1], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

/// Iterate the frozen-action chain of pair (x,a) under `pi` starting from `start`.
fn local_fixed_point<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    pi: &StochasticPolicy,
    x: usize,
    a: usize,
    start: SimplexDist,
    opts: &FixedPointOptions,
) -> Result<SimplexDist> {
    let mut cur = start;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let next = renormalize(frozen_push(model, &cur, pi, x, a, mu, &cur)?)?;
        residual = next.l1_distance(&cur);
        cur = next;
        if residual <= opts.tol {
            return Ok(cur);
        }
    }
    Err(MfcgError::IterationLimit {
        solver: "local equilibrium",
        iterations: opts.max_iter,
        residual,
    })
}

/// Stationary distribution of the frozen-action chain for pair (x,a) under the
/// softmin policy of `q`, holding `mu` fixed.
pub fn solve_local_gase<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    q: &QTable,
    x: usize,
    a: usize,
    opts: &FixedPointOptions,
) -> Result<SimplexDist> {
    opts.validate()?;
    model.dims().check_pair(x, a)?;
    let pi = softmin_policy(q, model.phi())?;
    local_fixed_point(
        model,
        mu,
        &pi,
        x,
        a,
        SimplexDist::uniform(model.dims().n_states),
        opts,
    )
}

fn all_locals<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    pi: &StochasticPolicy,
    warm: &LocalFamily,
    opts: &FixedPointOptions,
) -> Result<LocalFamily> {
    let dims = model.dims();
    let members = try_map_range(opts.execution, dims.n_pairs(), |i| {
        let (x, a) = dims.unpair(i);
        local_fixed_point(model, mu, pi, x, a, warm.get(x, a).clone(), opts)
    })?;
    LocalFamily::from_vec(dims, members)
}

/// Q-level equilibrium for a fixed global distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct QGase {
    pub q: QTable,
    /// Local equilibria under the softmin policy of `q`.
    pub locals: LocalFamily,
    /// ‖T₃‖_∞ at `q`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `T₃(μ, Q, {μ̃^{*φ,(x,a)}_{Q,μ}}) = 0` by iterating the Bellman map,
/// recomputing every local equilibrium each sweep.
pub fn solve_q_gase<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    opts: &FixedPointOptions,
) -> Result<QGase> {
    opts.validate()?;
    let dims = model.dims();
    q_gase_from(
        model,
        mu,
        QTable::zeros(dims),
        LocalFamily::uniform(dims),
        opts,
    )
}

fn q_gase_from<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    mut q: QTable,
    mut locals: LocalFamily,
    opts: &FixedPointOptions,
) -> Result<QGase> {
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let pi = softmin_policy(&q, model.phi())?;
        locals = all_locals(model, mu, &pi, &locals, opts)?;
        let b = bellman_apply_family(model, mu, &locals, &q)?;
        residual = b.sup_distance(&q);
        if residual <= opts.tol {
            return Ok(QGase {
                q,
                locals,
                residual,
                iterations: it + 1,
            });
        }
        q = if opts.relaxation == 1.0 {
            b
        } else {
            let w = opts.relaxation;
            let v = q
                .values()
                .iter()
                .zip(b.values())
                .map(|(q, b)| q + w * (b - q))
                .collect();
            QTable::from_vec(q.dims(), v)?
        };
    }
    Err(MfcgError::IterationLimit {
        solver: "Q equilibrium",
        iterations: opts.max_iter,
        residual,
    })
}

/// The softmin-level equilibrium `(μ^{*φ}, Q^{*φ}, {μ̃^{*φ,(x,a)}})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSolution {
    pub mu: SimplexDist,
    pub q: QTable,
    pub locals: LocalFamily,
    /// ‖P₃‖_∞ at return.
    pub residual: f64,
    pub iterations: usize,
}

/// Iterate `μ ← μP` under the softmin chain of `Q^{*φ}_μ`, re-solving the
/// inner Q and local equilibria at every sweep.
pub fn solve_global_gase<M: MeanFieldModel + ?Sized>(
    model: &M,
    opts: &FixedPointOptions,
) -> Result<PhiSolution> {
    opts.validate()?;
    let dims = model.dims();
    let mut mu = SimplexDist::uniform(dims.n_states);
    let mut q = QTable::zeros(dims);
    let mut locals = LocalFamily::uniform(dims);
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let inner = q_gase_from(model, &mu, q, locals, opts)?;
        let pi = softmin_policy(&inner.q, model.phi())?;
        let next = family_push(model, &mu, &pi, &inner.locals)?;
        residual = sup_norm(&mu.direction_to(next.probs()));
        if residual <= opts.tol {
            return Ok(PhiSolution {
                mu,
                q: inner.q,
                locals: inner.locals,
                residual,
                iterations: it + 1,
            });
        }
        mu = next;
        q = inner.q;
        locals = inner.locals;
    }
    Err(MfcgError::IterationLimit {
        solver: "global equilibrium",
        iterations: opts.max_iter,
        residual,
    })
}

/// Solution of the coupled distribution system for a pure policy.
#[derive(Debug, Clone, PartialEq)]
pub struct MuSystemSolution {
    pub mu: SimplexDist,
    pub locals: LocalFamily,
    /// `max_x ‖μ̃^{(x,α(x))} − μ‖₁`.
    pub played_local_gap: f64,
    pub iterations: usize,
}

/// Solve the coupled fixed-point system for `(μ, {μ̃^{(x,a)}})` under the pure
/// policy `alpha` by simultaneous sweeps.
pub fn solve_mus_system<M: MeanFieldModel + ?Sized>(
    model: &M,
    alpha: &PurePolicy,
    opts: &FixedPointOptions,
) -> Result<MuSystemSolution> {
    opts.validate()?;
    let dims = model.dims();
    if alpha.dims() != dims {
        return Err(MfcgError::InvalidInput(
            "policy dimensions do not match the model".into(),
        ));
    }
    let pi = StochasticPolicy::from_pure(alpha);
    let mut mu = SimplexDist::uniform(dims.n_states);
    let mut locals = LocalFamily::uniform(dims);
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let next_locals = try_map_range(opts.execution, dims.n_pairs(), |i| {
            let (x, a) = dims.unpair(i);
            let cur = locals.get(x, a);
            renormalize(frozen_push(model, cur, &pi, x, a, &mu, cur)?)
        })?;
        let next_locals = LocalFamily::from_vec(dims, next_locals)?;
        let next_mu = family_push(model, &mu, &pi, &locals)?;
        residual = next_mu
            .l1_distance(&mu)
            .max(next_locals.max_l1_distance(&locals));
        mu = next_mu;
        locals = next_locals;
        if residual <= opts.tol {
            let played_local_gap = (0..dims.n_states)
                .map(|x| locals.get(x, alpha.action(x)).l1_distance(&mu))
                .fold(0.0, f64::max);
            return Ok(MuSystemSolution {
                mu,
                locals,
                played_local_gap,
                iterations: it + 1,
            });
        }
    }
    Err(MfcgError::IterationLimit {
        solver: "distribution system",
        iterations: opts.max_iter,
        residual,
    })
}

/// Softmin-level equilibrium together with the extracted pure-policy solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTriple {
    pub mu_star_phi: SimplexDist,
    pub q_star_phi: QTable,
    pub locals_star_phi: LocalFamily,
    pub alpha_star: PurePolicy,
    pub mu_star: SimplexDist,
    pub locals_star: LocalFamily,
    pub q_star: QTable,
}

/// Fixed point of the family Bellman map with `(mu, locals)` frozen, from zero Q.
pub fn frozen_value_iteration<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    locals: &LocalFamily,
    opts: &FixedPointOptions,
) -> Result<QTable> {
    let mut q = QTable::zeros(model.dims());
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let b = bellman_apply_family(model, mu, locals, &q)?;
        residual = b.sup_distance(&q);
        q = b;
        if residual <= opts.tol {
            return Ok(q);
        }
    }
    Err(MfcgError::IterationLimit {
        solver: "value iteration",
        iterations: opts.max_iter,
        residual,
    })
}

/// Greedy policy of `Q^{*φ}`, its distribution system, and the Bellman fixed
/// point under those distributions. Fails if that policy is not the unique
/// greedy policy of the resulting Q*.
pub fn extract_solution<M: MeanFieldModel + ?Sized>(
    model: &M,
    phi_level: &PhiSolution,
    opts: &FixedPointOptions,
) -> Result<SolutionTriple> {
    opts.validate()?;
    let alpha = argmin_policy(&phi_level.q);
    let sys = solve_mus_system(model, &alpha, opts)?;
    let q_star = frozen_value_iteration(model, &sys.mu, &sys.locals, opts)?;
    for x in 0..model.dims().n_states {
        let best = alpha.action(x);
        let lo = q_star.get(x, best);
        for (a, &v) in q_star.row(x).iter().enumerate() {
            if a != best && v <= lo {
                return Err(MfcgError::DegenerateGap {
                    delta: action_gap(&q_star),
                    detail: format!("Q*({x},{a}) = {v} does not exceed Q*({x},{best}) = {lo}"),
                });
            }
        }
    }
    Ok(SolutionTriple {
        mu_star_phi: phi_level.mu.clone(),
        q_star_phi: phi_level.q.clone(),
        locals_star_phi: phi_level.locals.clone(),
        alpha_star: alpha,
        mu_star: sys.mu,
        locals_star: sys.locals,
        q_star,
    })
}

/// ‖T₃‖_∞ at a candidate point.
pub fn q_residual<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    q: &QTable,
    locals: &LocalFamily,
) -> Result<f64> {
    Ok(t3(model, mu, q, locals)?.sup_norm())
}
