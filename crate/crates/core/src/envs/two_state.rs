//! Two-state benchmark with closed-form solutions.
//!
//! States are {0, 1}; action 0 ("stay") aims at the current state and action
//! 1 ("move") at the other one. The aimed-at state is reached with
//! probability `1 − p`. The cost is `x + c_g μ(0) + c_l μ̃(0)`.

use serde::{Deserialize, Serialize};

use crate::envs::dense::{CostSpec, DenseModelSpec, KernelSpec};
use crate::error::{MfcgError, Result};
use crate::fixed_point::SolutionTriple;
use crate::model::{validate_model_params, LipschitzConstants, MeanFieldModel};
use crate::types::{
    softmin_policy, LocalFamily, PurePolicy, QTable, SimplexDist, SpaceDims, StochasticPolicy,
};

pub const STAY: usize = 0;
pub const MOVE: usize = 1;

/// Convergence tolerance of the implicit closed-form couplings.
const COUPLING_TOL: f64 = 1e-12;
const COUPLING_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStateParams {
    pub p: f64,
    pub c_g: f64,
    pub c_l: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl Default for TwoStateParams {
    fn default() -> Self {
        TwoStateParams {
            p: 0.1,
            c_g: 5.0,
            c_l: 5.0,
            gamma: 0.5,
            phi: 500.0,
        }
    }
}

impl TwoStateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 0.5) {
            return Err(MfcgError::InvalidInput(format!(
                "p must lie in (0, 0.5), got {}",
                self.p
            )));
        }
        if !(self.c_g > 0.0 && self.c_g.is_finite()) {
            return Err(MfcgError::InvalidInput(format!(
                "c_g must be positive, got {}",
                self.c_g
            )));
        }
        if !(self.c_l > 0.0 && self.c_l.is_finite()) {
            return Err(MfcgError::InvalidInput(format!(
                "c_l must be positive, got {}",
                self.c_l
            )));
        }
        validate_model_params(self.gamma, self.phi, 0.0)
    }

    /// Whether `c_l > 2γ`, the regime with the unique pure solution (move, stay).
    pub fn in_unique_regime(&self) -> bool {
        self.c_l > 2.0 * self.gamma
    }

    pub fn with_phi(self, phi: f64) -> Self {
        TwoStateParams { phi, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateModel {
    params: TwoStateParams,
}

/// Validated two-state model.
pub fn build_two_state(params: TwoStateParams) -> Result<TwoStateModel> {
    params.validate()?;
    Ok(TwoStateModel { params })
}

impl TwoStateModel {
    pub fn params(&self) -> TwoStateParams {
        self.params
    }

    /// The state reached by action `a` in the absence of noise.
    pub fn target(x: usize, a: usize) -> usize {
        if a == STAY {
            x
        } else {
            1 - x
        }
    }
}

impl MeanFieldModel for TwoStateModel {
    fn dims(&self) -> SpaceDims {
        SpaceDims {
            n_states: 2,
            n_actions: 2,
        }
    }
    fn gamma(&self) -> f64 {
        self.params.gamma
    }
    fn phi(&self) -> f64 {
        self.params.phi
    }
    fn transition(
        &self,
        x: usize,
        a: usize,
        _mu: &SimplexDist,
        _mt: &SimplexDist,
        out: &mut [f64],
    ) {
        let t = Self::target(x, a);
        out[t] = 1.0 - self.params.p;
        out[1 - t] = self.params.p;
    }
    fn cost(&self, x: usize, _a: usize, mu: &SimplexDist, mt: &SimplexDist) -> f64 {
        x as f64 + self.params.c_g * mu[0] + self.params.c_l * mt[0]
    }
    fn cost_bound(&self) -> f64 {
        1.0 + self.params.c_g + self.params.c_l
    }
    fn declared_lipschitz(&self) -> Option<LipschitzConstants> {
        Some(LipschitzConstants {
            p_glob: 0.0,
            p_loc: 0.0,
            f_glob: self.params.c_g / 2.0,
            f_loc: self.params.c_l / 2.0,
        })
    }
    fn kernel_is_distribution_free(&self) -> bool {
        true
    }
}

fn dims() -> SpaceDims {
    SpaceDims {
        n_states: 2,
        n_actions: 2,
    }
}

fn dist1(m1: f64) -> SimplexDist {
    SimplexDist::new(vec![1.0 - m1, m1]).expect("closed form lies in [0,1]")
}

/// Closed-form solution in the regime `c_l > 2γ`, together with the
/// softmin-level equilibrium at the model's φ.
pub fn two_state_exact(params: TwoStateParams) -> Result<SolutionTriple> {
    params.validate()?;
    if !params.in_unique_regime() {
        return Err(MfcgError::UnsupportedRegime(format!(
            "closed form needs c_l > 2 gamma (c_l = {}, gamma = {})",
            params.c_l, params.gamma
        )));
    }
    let TwoStateParams {
        p,
        c_g,
        c_l,
        gamma: g,
        ..
    } = params;
    let q0m = c_g * p / (1.0 - g) + (c_l * p - g * p + g) / (1.0 - g);
    let q0s = c_g * p / (1.0 - g) + c_l / 2.0 + g * (c_l * p - 2.0 * g * p + g + p) / (1.0 - g);
    let q_star = QTable::from_rows(&[vec![q0s, q0m], vec![q0m + 1.0, q0s + 1.0]])?;
    let alpha_star = PurePolicy::new(dims(), vec![MOVE, STAY])?;
    let mu_star = SimplexDist::new(vec![p, 1.0 - p])?;
    let locals_star =
        two_state_local_equilibria(params, &StochasticPolicy::from_pure(&alpha_star))?;

    let mu_star_phi = two_state_global_gase(params)?;
    let (q_star_phi, locals_star_phi) = q_gase_with_locals(params, &mu_star_phi)?;
    Ok(SolutionTriple {
        mu_star_phi,
        q_star_phi,
        locals_star_phi,
        alpha_star,
        mu_star,
        locals_star,
        q_star,
    })
}

/// Stationary local distributions of the four frozen-action chains under `pi`.
pub fn two_state_local_equilibria(
    params: TwoStateParams,
    pi: &StochasticPolicy,
) -> Result<LocalFamily> {
    params.validate()?;
    if pi.dims() != dims() {
        return Err(MfcgError::InvalidInput("policy must be 2x2".into()));
    }
    let p = params.p;
    let r = 1.0 - 2.0 * p;
    let s0 = pi.prob(0, STAY);
    let s1 = pi.prob(1, STAY);
    let m_0s = p / (1.0 - r * s1);
    let m_0m = (1.0 - p) / (2.0 - 2.0 * p - r * s1);
    let m_1s = (1.0 - p - r * s0) / (1.0 - r * s0);
    let m_1m = (1.0 - p - r * s0) / (2.0 - 2.0 * p - r * s0);
    LocalFamily::from_vec(
        dims(),
        vec![dist1(m_0s), dist1(m_0m), dist1(m_1s), dist1(m_1m)],
    )
}

/// `Q^{*φ}_μ` from its closed form; the softmin/local coupling is resolved by
/// fixed-point iteration.
pub fn two_state_q_gase(params: TwoStateParams, mu: &SimplexDist) -> Result<QTable> {
    Ok(q_gase_with_locals(params, mu)?.0)
}

fn q_gase_with_locals(params: TwoStateParams, mu: &SimplexDist) -> Result<(QTable, LocalFamily)> {
    params.validate()?;
    if mu.len() != 2 {
        return Err(MfcgError::InvalidInput("mu must have two entries".into()));
    }
    let TwoStateParams {
        p,
        c_g,
        c_l,
        gamma: g,
        phi,
    } = params;
    let mut q = QTable::zeros(dims());
    let mut change = f64::INFINITY;
    for _ in 0..COUPLING_MAX_ITER {
        let locals = two_state_local_equilibria(params, &softmin_policy(&q, phi)?)?;
        let l0 = |x: usize, a: usize| locals.get(x, a)[0];
        let d = 1.0 - c_l * l0(0, MOVE) + c_l * l0(1, STAY);
        let q0m = (c_g * mu[0] + c_l * l0(0, MOVE) + g * (1.0 - p) * d) / (1.0 - g);
        let q1s = q0m + d;
        let q0s = c_g * mu[0] + c_l * l0(0, STAY) + g * q0m + g * p * d;
        let q1m = q0s + 1.0 - c_l * l0(0, STAY) + c_l * l0(1, MOVE);
        let next = QTable::from_rows(&[vec![q0s, q0m], vec![q1s, q1m]])?;
        change = next.sup_distance(&q);
        q = next;
        if change <= COUPLING_TOL {
            let locals = two_state_local_equilibria(params, &softmin_policy(&q, phi)?)?;
            return Ok((q, locals));
        }
    }
    Err(MfcgError::IterationLimit {
        solver: "two-state Q closed form",
        iterations: COUPLING_MAX_ITER,
        residual: change,
    })
}

/// Stationary distribution of the two-state chain under `pi`.
pub fn two_state_stationary(params: TwoStateParams, pi: &StochasticPolicy) -> Result<SimplexDist> {
    params.validate()?;
    if pi.dims() != dims() {
        return Err(MfcgError::InvalidInput("policy must be 2x2".into()));
    }
    let p = params.p;
    // Rates 0 → 1 and 1 → 0; both components come straight from them.
    let up = p * pi.prob(0, STAY) + (1.0 - p) * pi.prob(0, MOVE);
    let down = p * pi.prob(1, STAY) + (1.0 - p) * pi.prob(1, MOVE);
    SimplexDist::new(vec![down / (up + down), up / (up + down)])
}

/// `μ^{*φ}`: stationary distribution of the softmin policy of `Q^{*φ}`, whose
/// policy does not depend on μ.
pub fn two_state_global_gase(params: TwoStateParams) -> Result<SimplexDist> {
    let q = two_state_q_gase(params, &SimplexDist::uniform(2))?;
    two_state_stationary(params, &softmin_policy(&q, params.phi)?)
}

/// The same model written as an affine dense spec.
pub fn two_state_spec(params: TwoStateParams) -> Result<DenseModelSpec> {
    params.validate()?;
    let p = params.p;
    let row = |x: usize, a: usize| {
        let mut r = vec![p; 2];
        r[TwoStateModel::target(x, a)] = 1.0 - p;
        r
    };
    let kernel = (0..2)
        .map(|x| (0..2).map(|a| row(x, a)).collect())
        .collect();
    let weights = |c: f64| vec![vec![vec![c, 0.0]; 2]; 2];
    Ok(DenseModelSpec {
        dims: dims(),
        kernel: KernelSpec {
            base: kernel,
            glob: None,
            loc: None,
        },
        cost: CostSpec {
            base: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            glob: Some(weights(params.c_g)),
            loc: Some(weights(params.c_l)),
        },
        gamma: params.gamma,
        phi: params.phi,
        cost_bound: Some(1.0 + params.c_g + params.c_l),
        lipschitz: None,
    })
}
