//! The mean-field model contract and the kernels built on it.

use crate::error::{MfcgError, Result};
use crate::types::{SimplexDist, SpaceDims, StochasticPolicy, NEGATIVE_CLAMP_TOL, SIMPLEX_SUM_TOL};

/// Lipschitz constants of the kernel (in ‖·‖₁ → ‖·‖₁) and cost (in ‖·‖₁ → |·|)
/// with respect to the global and local distribution arguments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LipschitzConstants {
    pub p_glob: f64,
    pub p_loc: f64,
    pub f_glob: f64,
    pub f_loc: f64,
}

impl LipschitzConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_glob", self.p_glob),
            ("p_loc", self.p_loc),
            ("f_glob", self.f_glob),
            ("f_loc", self.f_loc),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MfcgError::InvalidInput(format!(
                    "Lipschitz constant {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluator of a mean-field kernel `p(·|x,a,μ,μ̃)` and cost `f(x,a,μ,μ̃)`.
///
/// Implementations must return a probability vector from
/// [`transition`](MeanFieldModel::transition) for every input and a cost whose
/// absolute value never exceeds [`cost_bound`](MeanFieldModel::cost_bound).
pub trait MeanFieldModel: Sync {
    fn dims(&self) -> SpaceDims;
    /// Discount factor in (0, 1).
    fn gamma(&self) -> f64;
    /// Softmin temperature parameter (> 0).
    fn phi(&self) -> f64;

    /// Write `p(·|x, a, mu, mu_tilde)` into `out` (length |X|).
    fn transition(
        &self,
        x: usize,
        a: usize,
        mu: &SimplexDist,
        mu_tilde: &SimplexDist,
        out: &mut [f64],
    );

    fn cost(&self, x: usize, a: usize, mu: &SimplexDist, mu_tilde: &SimplexDist) -> f64;

    /// Declared bound on `sup |f|`.
    fn cost_bound(&self) -> f64;

    /// Analytically known Lipschitz constants, if the model has them.
    fn declared_lipschitz(&self) -> Option<LipschitzConstants> {
        None
    }

    /// True when the kernel ignores both distribution arguments.
    fn kernel_is_distribution_free(&self) -> bool {
        false
    }
}

impl<M: MeanFieldModel + ?Sized> MeanFieldModel for &M {
    fn dims(&self) -> SpaceDims {
        (**self).dims()
    }
    fn gamma(&self) -> f64 {
        (**self).gamma()
    }
    fn phi(&self) -> f64 {
        (**self).phi()
    }
    fn transition(
        &self,
        x: usize,
        a: usize,
        mu: &SimplexDist,
        mu_tilde: &SimplexDist,
        out: &mut [f64],
    ) {
        (**self).transition(x, a, mu, mu_tilde, out)
    }
    fn cost(&self, x: usize, a: usize, mu: &SimplexDist, mu_tilde: &SimplexDist) -> f64 {
        (**self).cost(x, a, mu, mu_tilde)
    }
    fn cost_bound(&self) -> f64 {
        (**self).cost_bound()
    }
    fn declared_lipschitz(&self) -> Option<LipschitzConstants> {
        (**self).declared_lipschitz()
    }
    fn kernel_is_distribution_free(&self) -> bool {
        (**self).kernel_is_distribution_free()
    }
}

impl<M: MeanFieldModel + ?Sized> MeanFieldModel for Box<M> {
    fn dims(&self) -> SpaceDims {
        (**self).dims()
    }
    fn gamma(&self) -> f64 {
        (**self).gamma()
    }
    fn phi(&self) -> f64 {
        (**self).phi()
    }
    fn transition(
        &self,
        x: usize,
        a: usize,
        mu: &SimplexDist,
        mu_tilde: &SimplexDist,
        out: &mut [f64],
    ) {
        (**self).transition(x, a, mu, mu_tilde, out)
    }
    fn cost(&self, x: usize, a: usize, mu: &SimplexDist, mu_tilde: &SimplexDist) -> f64 {
        (**self).cost(x, a, mu, mu_tilde)
    }
    fn cost_bound(&self) -> f64 {
        (**self).cost_bound()
    }
    fn declared_lipschitz(&self) -> Option<LipschitzConstants> {
        (**self).declared_lipschitz()
    }
    fn kernel_is_distribution_free(&self) -> bool {
        (**self).kernel_is_distribution_free()
    }
}

/// Checks the scalar parameters every model must satisfy.
pub fn validate_model_params(gamma: f64, phi: f64, cost_bound: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(MfcgError::InvalidInput(format!(
            "gamma must lie in [0,1), got {gamma}"
        )));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(MfcgError::InvalidInput(format!(
            "phi must be positive and finite, got {phi}"
        )));
    }
    if !(cost_bound >= 0.0 && cost_bound.is_finite()) {
        return Err(MfcgError::InvalidInput(format!(
            "cost bound must be finite and nonnegative, got {cost_bound}"
        )));
    }
    Ok(())
}

/// Validate a kernel row in place (clamping tiny negatives) or describe why it is invalid.
pub(crate) fn check_row(row: &mut [f64]) -> std::result::Result<(), String> {
    let mut sum = 0.0;
    for (y, p) in row.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(format!("p(y={y}) is not finite"));
        }
        if *p < 0.0 {
            if *p < -NEGATIVE_CLAMP_TOL {
                return Err(format!("p(y={y}) = {p:e} is negative"));
            }
            *p = 0.0;
        }
        sum += *p;
    }
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(format!("kernel row sums to {sum}"));
    }
    Ok(())
}

/// Evaluate and validate one kernel row into `out`.
pub fn transition_into<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    a: usize,
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
    out: &mut [f64],
) -> Result<()> {
    model.transition(x, a, mu, mu_tilde, out);
    check_row(out).map_err(|detail| MfcgError::ModelContract { x, a, detail })
}

/// Evaluate and validate one kernel row.
pub fn transition_row<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    a: usize,
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.dims().n_states];
    transition_into(model, x, a, mu, mu_tilde, &mut out)?;
    Ok(out)
}

/// Evaluate the cost and reject non-finite values.
pub fn cost_checked<M: MeanFieldModel + ?Sized>(
    model: &M,
    x: usize,
    a: usize,
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
) -> Result<f64> {
    let c = model.cost(x, a, mu, mu_tilde);
    if c.is_finite() {
        Ok(c)
    } else {
        Err(MfcgError::ModelContract {
            x,
            a,
            detail: format!("cost is not finite ({c})"),
        })
    }
}

fn check_lengths(dims: SpaceDims, dists: &[&SimplexDist], pi: &StochasticPolicy) -> Result<()> {
    if pi.dims() != dims {
        return Err(MfcgError::InvalidInput(format!(
            "policy is {}x{}, model is {}x{}",
            pi.dims().n_states,
            pi.dims().n_actions,
            dims.n_states,
            dims.n_actions
        )));
    }
    if let Some(d) = dists.iter().find(|d| d.len() != dims.n_states) {
        return Err(MfcgError::InvalidInput(format!(
            "distribution has {} entries, model has {} states",
            d.len(),
            dims.n_states
        )));
    }
    Ok(())
}

/// Unnormalized push-forward `Σ_x' ν(x') Σ_a π(a|x') p(·|x',a,μ,μ̃(x',a))`, where
/// `action_row(x')` gives the action weights used at `x'` and `local(x',a)`
/// the local distribution argument.
pub(crate) fn push_forward<'a, M, R, L>(
    model: &M,
    nu: &SimplexDist,
    action_row: R,
    mu: &SimplexDist,
    local: L,
) -> Result<Vec<f64>>
where
    M: MeanFieldModel + ?Sized,
    R: Fn(usize) -> &'a [f64],
    L: Fn(usize, usize) -> &'a SimplexDist,
{
    let dims = model.dims();
    let mut out = vec![0.0; dims.n_states];
    let mut row = vec![0.0; dims.n_states];
    for xp in 0..dims.n_states {
        let w = nu[xp];
        if w == 0.0 {
            continue;
        }
        for (a, &pa) in action_row(xp).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            transition_into(model, xp, a, mu, local(xp, a), &mut row)?;
            let c = w * pa;
            for (o, r) in out.iter_mut().zip(&row) {
                *o += c * r;
            }
        }
    }
    Ok(out)
}

/// Divide by the total mass so the result lies exactly on the simplex.
pub(crate) fn renormalize(mut v: Vec<f64>) -> Result<SimplexDist> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|p| *p /= s);
    }
    SimplexDist::new(v)
}

/// `ν P^{π,μ,μ̃}`: one step of the population chain under `pi`.
pub fn apply_kernel<M: MeanFieldModel + ?Sized>(
    model: &M,
    nu: &SimplexDist,
    pi: &StochasticPolicy,
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
) -> Result<SimplexDist> {
    check_lengths(model.dims(), &[nu, mu, mu_tilde], pi)?;
    renormalize(push_forward(model, nu, |x| pi.row(x), mu, |_, _| mu_tilde)?)
}

/// `ν P̃_{(x,a)}^{π,μ,μ̃}`: like [`apply_kernel`] but the action at state `x` is frozen to `a`.
pub fn apply_modified_kernel<M: MeanFieldModel + ?Sized>(
    model: &M,
    nu: &SimplexDist,
    pi: &StochasticPolicy,
    x: usize,
    a: usize,
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
) -> Result<SimplexDist> {
    let dims = model.dims();
    dims.check_pair(x, a)?;
    check_lengths(dims, &[nu, mu, mu_tilde], pi)?;
    renormalize(frozen_push(model, nu, pi, x, a, mu, mu_tilde)?)
}

/// Unnormalized frozen-action push-forward, computed directly from the kernel.
pub(crate) fn frozen_push<M: MeanFieldModel + ?Sized>(
    model: &M,
    nu: &SimplexDist,
    pi: &StochasticPolicy,
    x: usize,
    a: usize,
    mu: &SimplexDist,
    mu_tilde: &SimplexDist,
) -> Result<Vec<f64>> {
    let n = model.dims().n_states;
    let mut out = vec![0.0; n];
    let mut row = vec![0.0; n];
    for xp in 0..n {
        let w = nu[xp];
        if w == 0.0 {
            continue;
        }
        if xp == x {
            transition_into(model, xp, a, mu, mu_tilde, &mut row)?;
            for (o, r) in out.iter_mut().zip(&row) {
                *o += w * r;
            }
        } else {
            for (b, &pb) in pi.row(xp).iter().enumerate() {
                if pb == 0.0 {
                    continue;
                }
                transition_into(model, xp, b, mu, mu_tilde, &mut row)?;
                let c = w * pb;
                for (o, r) in out.iter_mut().zip(&row) {
                    *o += c * r;
                }
            }
        }
    }
    Ok(out)
}

type KernelFn = dyn Fn(usize, usize, &SimplexDist, &SimplexDist, &mut [f64]) + Send + Sync;
type CostFn = dyn Fn(usize, usize, &SimplexDist, &SimplexDist) -> f64 + Send + Sync;

/// A model assembled from closures.
pub struct FnModel {
    dims: SpaceDims,
    gamma: f64,
    phi: f64,
    cost_bound: f64,
    kernel: Box<KernelFn>,
    cost: Box<CostFn>,
    lipschitz: Option<LipschitzConstants>,
    distribution_free: bool,
}

impl FnModel {
    pub fn new<K, C>(
        dims: SpaceDims,
        gamma: f64,
        phi: f64,
        cost_bound: f64,
        kernel: K,
        cost: C,
    ) -> Result<Self>
    where
        K: Fn(usize, usize, &SimplexDist, &SimplexDist, &mut [f64]) + Send + Sync + 'static,
        C: Fn(usize, usize, &SimplexDist, &SimplexDist) -> f64 + Send + Sync + 'static,
    {
        validate_model_params(gamma, phi, cost_bound)?;
        Ok(FnModel {
            dims,
            gamma,
            phi,
            cost_bound,
            kernel: Box::new(kernel),
            cost: Box::new(cost),
            lipschitz: None,
            distribution_free: false,
        })
    }

    pub fn with_lipschitz(mut self, l: LipschitzConstants) -> Result<Self> {
        l.validate()?;
        self.lipschitz = Some(l);
        Ok(self)
    }

    /// Mark the kernel as ignoring the distribution arguments.
    pub fn distribution_free(mut self) -> Self {
        self.distribution_free = true;
        self
    }
}

impl MeanFieldModel for FnModel {
    fn dims(&self) -> SpaceDims {
        self.dims
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn phi(&self) -> f64 {
        self.phi
    }
    fn transition(
        &self,
        x: usize,
        a: usize,
        mu: &SimplexDist,
        mu_tilde: &SimplexDist,
        out: &mut [f64],
    ) {
        (self.kernel)(x, a, mu, mu_tilde, out)
    }
    fn cost(&self, x: usize, a: usize, mu: &SimplexDist, mu_tilde: &SimplexDist) -> f64 {
        (self.cost)(x, a, mu, mu_tilde)
    }
    fn cost_bound(&self) -> f64 {
        self.cost_bound
    }
    fn declared_lipschitz(&self) -> Option<LipschitzConstants> {
        self.lipschitz
    }
    fn kernel_is_distribution_free(&self) -> bool {
        self.distribution_free
    }
}

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnModel")
            .field("dims", &self.dims)
            .field("gamma", &self.gamma)
            .field("phi", &self.phi)
            .finish_non_exhaustive()
    }
}
