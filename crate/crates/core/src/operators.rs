//! Mean-field operators, the Bellman map, structural constants of a model and
//! the checks and error bounds derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{MfcgError, Result};
use crate::model::{
    cost_checked, frozen_push, push_forward, transition_into, LipschitzConstants, MeanFieldModel,
};
use crate::rng::RandomSource;
use crate::types::{l1, softmin_policy, LocalFamily, QTable, SimplexDist, StochasticPolicy};

/// `f(x,a) + γ Σ_x' p(x'|x,a) min_a' Q(x',a')`, with `local(x,a)` as the local argument.
fn bellman_with<'a, M, L>(model: &M, mu: &SimplexDist, q: &QTable, local: L) -> Result<QTable>
where
    M: MeanFieldModel + ?Sized,
    L: Fn(usize, usize) -> &'a SimplexDist,
{
    let dims = model.dims();
    check_q_dims(model, q)?;
    let gamma = model.gamma();
    let mins = q.row_mins();
    let mut row = vec![0.0; dims.n_states];
    let mut out = Vec::with_capacity(dims.n_pairs());
    for x in 0..dims.n_states {
        for a in 0..dims.n_actions {
            let mt = local(x, a);
            let f = cost_checked(model, x, a, mu, mt)?;
            transition_into(model, x, a, mu, mt, &mut row)?;
            out.push(f + gamma * expectation(&row, &mins));
        }
    }
    QTable::from_vec(dims, out)
}

/// `Σ_y p(y) v(y)` accumulated in index order.
#[inline]
pub(crate) fn expectation(p: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (pi, vi) in p.iter().zip(v) {
        s += pi * vi;
    }
    s
}

fn check_q_dims<M: MeanFieldModel + ?Sized>(model: &M, q: &QTable) -> Result<()> {
    if q.dims() != model.dims() {
        return Err(MfcgError::InvalidInput(format!(
            "Q-table is {}x{}, model is {}x{}",
            q.dims().n_states,
            q.dims().n_actions,
            model.dims().n_states,
            model.dims().n_actions
        )));
    }
    Ok(())
}

fn check_family<M: MeanFieldModel + ?Sized>(model: &M, locals: &LocalFamily) -> Result<()> {
    if locals.dims() != model.dims() {
        return Err(MfcgError::InvalidInput(
            "local family dimensions do not match the model".into(),
        ));
    }
    Ok(())
}

/// Bellman operator with one shared local distribution.
pub fn bellman_apply<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
    q: &QTable,
) -> Result<QTable> {
    bellman_with(model, mu, q, |_, _| mu_tilde)
}

/// Bellman operator where entry (x,a) uses the local distribution `locals(x,a)`.
pub fn bellman_apply_family<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    locals: &LocalFamily,
    q: &QTable,
) -> Result<QTable> {
    check_family(model, locals)?;
    bellman_with(model, mu, q, |x, a| locals.get(x, a))
}

/// Q-drift: the family Bellman operator minus `q`.
pub fn t3<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    q: &QTable,
    locals: &LocalFamily,
) -> Result<QTable> {
    let b = bellman_apply_family(model, mu, locals, q)?;
    let diff = b
        .values()
        .iter()
        .zip(q.values())
        .map(|(b, q)| b - q)
        .collect();
    QTable::from_vec(q.dims(), diff)
}

/// One-step population push under the softmin policy of `q`, with the
/// transition out of (x,a) evaluated at local distribution `locals(x,a)`.
pub(crate) fn family_push<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    pi: &StochasticPolicy,
    locals: &LocalFamily,
) -> Result<SimplexDist> {
    crate::model::renormalize(push_forward(
        model,
        mu,
        |x| pi.row(x),
        mu,
        |x, a| locals.get(x, a),
    )?)
}

/// Global drift `μP − μ` under the softmin policy of `q`.
pub fn p3<M: MeanFieldModel + ?Sized>(
    model: &M,
    mu: &SimplexDist,
    q: &QTable,
    locals: &LocalFamily,
) -> Result<Vec<f64>> {
    check_q_dims(model, q)?;
    check_family(model, locals)?;
    let pi = softmin_policy(q, model.phi())?;
    Ok(mu.direction_to(family_push(model, mu, &pi, locals)?.probs()))
}

/// Local drift for pair (x,a): frozen-chain push of `mu_tilde` minus `mu_tilde`.
pub fn p3_tilde<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    a: usize,
    mu: &SimplexDist,
    q: &QTable,
    mu_tilde: &SimplexDist,
) -> Result<Vec<f64>> {
    check_q_dims(model, q)?;
    model.dims().check_pair(x, a)?;
    let pi = softmin_policy(q, model.phi())?;
    p3_tilde_with_policy(model, x, a, mu, &pi, mu_tilde)
}

pub(crate) fn p3_tilde_with_policy<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    a: usize,
    mu: &SimplexDist,
    pi: &StochasticPolicy,
    mu_tilde: &SimplexDist,
) -> Result<Vec<f64>> {
    let pushed = crate::model::renormalize(frozen_push(model, mu_tilde, pi, x, a, mu, mu_tilde)?)?;
    Ok(mu_tilde.direction_to(pushed.probs()))
}

/// `δ = min_x (second-smallest distinct value − smallest value)` of each row; +∞
/// when no row has two distinct values.
pub fn action_gap(q: &QTable) -> f64 {
    let mut gap = f64::INFINITY;
    for x in 0..q.dims().n_states {
        let row = q.row(x);
        let lo = q.row_min(x);
        let next = row
            .iter()
            .copied()
            .filter(|v| *v > lo)
            .fold(f64::INFINITY, f64::min);
        gap = gap.min(next - lo);
    }
    gap
}

/// Model constants entering the contraction conditions and error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    pub c_min: f64,
    pub c_min_phi: f64,
    pub l_p_glob: f64,
    pub l_p_loc: f64,
    pub l_f_glob: f64,
    pub l_f_loc: f64,
    pub l_p_max: f64,
    pub action_gap: f64,
    /// Difference-quotient estimates; lower bounds on the true constants.
    pub empirical: LipschitzConstants,
    /// Whether the `l_*` fields come from the model's declared constants.
    pub declared: bool,
}

const STRUCTURAL_SEED: u64 = 0x5eed_c0de;

/// Estimate the constants of `model`.
///
/// `c_min` is minimized over every pair of simplex vertices plus
/// `sample_budget` random pairs; for kernels affine in the distributions this
/// is exact. Lipschitz constants are difference-quotient suprema over vertex
/// pairs and random pairs. When the model declares its constants, those are
/// used and the estimates are kept in `empirical`. `c_min_phi` and the action
/// gap use the softmin policy and values of `q` (zero Q when absent).
pub fn structural_constants<M: MeanFieldModel + ?Sized>(
    model: &M,
    q: Option<&QTable>,
    sample_budget: usize,
) -> Result<StructuralConstants> {
    if sample_budget == 0 {
        return Err(MfcgError::InvalidInput(
            "sample budget must be at least 1".into(),
        ));
    }
    let dims = model.dims();
    let n = dims.n_states;
    let zero;
    let q = match q {
        Some(q) => {
            check_q_dims(model, q)?;
            q
        }
        None => {
            zero = QTable::zeros(dims);
            &zero
        }
    };
    let pi = softmin_policy(q, model.phi())?;
    let mut rng = RandomSource::new(STRUCTURAL_SEED, 0);

    let vertices: Vec<SimplexDist> = (0..n).map(|z| SimplexDist::point_mass(n, z)).collect();
    let mut points: Vec<(SimplexDist, SimplexDist)> = Vec::new();
    for u in &vertices {
        for v in &vertices {
            points.push((u.clone(), v.clone()));
        }
    }
    points.push((SimplexDist::uniform(n), SimplexDist::uniform(n)));
    for _ in 0..sample_budget {
        let mu = SimplexDist::new(rng.simplex_point(n))?;
        let mt = SimplexDist::new(rng.simplex_point(n))?;
        points.push((mu, mt));
    }

    let mut c_min = f64::INFINITY;
    let mut c_min_phi = f64::INFINITY;
    let mut rows = vec![vec![0.0; n]; dims.n_actions];
    for (mu, mt) in &points {
        for xp in 0..n {
            for (a, row) in rows.iter_mut().enumerate() {
                transition_into(model, xp, a, mu, mt, row)?;
                c_min = c_min.min(row.iter().copied().fold(f64::INFINITY, f64::min));
            }
            for y in 0..n {
                let mixed: f64 = (0..dims.n_actions)
                    .map(|a| pi.prob(xp, a) * rows[a][y])
                    .sum();
                c_min_phi = c_min_phi.min(mixed);
            }
        }
    }
    c_min_phi = c_min_phi.max(c_min);

    // Difference quotients: all vertex pairs against a random partner, then random pairs.
    let mut pairs: Vec<(SimplexDist, SimplexDist, SimplexDist)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let other = SimplexDist::new(rng.simplex_point(n))?;
                pairs.push((vertices[i].clone(), vertices[j].clone(), other));
            }
        }
    }
    for _ in 0..sample_budget {
        let u = SimplexDist::new(rng.simplex_point(n))?;
        let v = SimplexDist::new(rng.simplex_point(n))?;
        let w = SimplexDist::new(rng.simplex_point(n))?;
        pairs.push((u, v, w));
    }
    let mut emp = LipschitzConstants {
        p_glob: 0.0,
        p_loc: 0.0,
        f_glob: 0.0,
        f_loc: 0.0,
    };
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for (u, v, w) in &pairs {
        let d = u.l1_distance(v);
        if d < 1e-12 {
            continue;
        }
        for x in 0..n {
            for a in 0..dims.n_actions {
                transition_into(model, x, a, u, w, &mut r1)?;
                transition_into(model, x, a, v, w, &mut r2)?;
                emp.p_glob = emp.p_glob.max(l1(&r1, &r2) / d);
                transition_into(model, x, a, w, u, &mut r1)?;
                transition_into(model, x, a, w, v, &mut r2)?;
                emp.p_loc = emp.p_loc.max(l1(&r1, &r2) / d);
                let fg =
                    (cost_checked(model, x, a, u, w)? - cost_checked(model, x, a, v, w)?).abs();
                emp.f_glob = emp.f_glob.max(fg / d);
                let fl =
                    (cost_checked(model, x, a, w, u)? - cost_checked(model, x, a, w, v)?).abs();
                emp.f_loc = emp.f_loc.max(fl / d);
            }
        }
    }

    let (used, declared) = match model.declared_lipschitz() {
        Some(l) => (l, true),
        None => (emp, false),
    };
    Ok(StructuralConstants {
        c_min,
        c_min_phi,
        l_p_glob: used.p_glob,
        l_p_loc: used.p_loc,
        l_f_glob: used.f_glob,
        l_f_loc: used.f_loc,
        l_p_max: used.p_glob.max(used.p_loc),
        action_gap: action_gap(q),
        empirical: emp,
        declared,
    })
}

/// Verdicts on the kernel contraction condition and the φ upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `½ |X| c_min`
    pub contraction_threshold: f64,
    pub local_contraction_ok: bool,
    pub global_contraction_ok: bool,
    /// `½|X|c_min − max(L_p^glob, L_p^loc)`; negative when violated.
    pub contraction_margin: f64,
    pub phi: f64,
    pub phi_branch_total: f64,
    pub phi_branch_glob: f64,
    pub phi_bound_ok: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.local_contraction_ok && self.global_contraction_ok && self.phi_bound_ok
    }
}

/// Evaluate both assumptions for `model` with the given constants.
pub fn check_assumptions<M: MeanFieldModel + ?Sized>(
    constants: &StructuralConstants,
    model: &M,
) -> AssumptionReport {
    let nx = model.dims().n_states as f64;
    let na = model.dims().n_actions as f64;
    let gamma = model.gamma();
    let phi = model.phi();
    let f_norm = model.cost_bound();
    let c = constants;
    let xc = nx * c.c_min;
    let threshold = 0.5 * xc;

    let lp_tot = c.l_p_glob + c.l_p_loc;
    let lf_tot = c.l_f_glob + c.l_f_loc;
    let disc = gamma / (1.0 - gamma);
    let branch_total = (xc - lp_tot) / na * (1.0 - gamma) / (lf_tot + disc * lp_tot * f_norm);
    let xg = xc - c.l_p_glob;
    let branch_glob = xg * xg / (phi * na * (xg + c.l_p_loc)) * (1.0 - gamma)
        / (c.l_f_glob + disc * c.l_p_glob * f_norm);
    let bound = branch_total.min(branch_glob);

    AssumptionReport {
        contraction_threshold: threshold,
        local_contraction_ok: c.l_p_loc < threshold,
        global_contraction_ok: c.l_p_glob < threshold,
        contraction_margin: threshold - c.l_p_max,
        phi,
        phi_branch_total: branch_total,
        phi_branch_glob: branch_glob,
        phi_bound_ok: phi > 0.0 && phi < bound,
    }
}

/// Right-hand sides of the softmin-versus-argmin error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// Bound on the summed ‖·‖₁ errors of the local and global distributions.
    pub dist_bound: f64,
    /// Bound on ‖Q^{*φ} − Q*‖_∞.
    pub q_bound: f64,
}

pub fn softmin_error_bounds<M: MeanFieldModel + ?Sized>(
    constants: &StructuralConstants,
    model: &M,
) -> Result<ErrorBounds> {
    let nx = model.dims().n_states as f64;
    let na = model.dims().n_actions as f64;
    let gamma = model.gamma();
    let c = constants;
    let denom = nx * c.c_min - 2.0 * c.l_p_max;
    if !(denom > 0.0) {
        return Err(MfcgError::AssumptionViolation(format!(
            "|X| c_min - 2 L_p^max = {denom} must be positive"
        )));
    }
    let tail = 4.0 * na.powf(1.5) * (-model.phi() * c.action_gap).exp();
    let l_f = c.l_f_glob + c.l_f_loc;
    let dist_bound = tail / denom;
    let q_bound = (l_f + gamma / (1.0 - gamma) * c.l_p_max * model.cost_bound()) * tail
        / ((1.0 - gamma) * denom);
    Ok(ErrorBounds {
        dist_bound,
        q_bound,
    })
}
