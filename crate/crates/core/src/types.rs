//! Domain types shared by every solver: distributions on the state simplex,
//! Q-tables, policies and the per-(x,a) family of local distributions.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, MfcgError, Result};

/// Accepted deviation of a distribution's mass from 1 before renormalizing.
pub const SIMPLEX_SUM_TOL: f64 = 1e-10;
/// Negative entries down to this value are clamped to zero.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;

/// Sizes of the finite state and action spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceDims {
    pub n_states: usize,
    pub n_actions: usize,
}

impl SpaceDims {
    pub fn new(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(MfcgError::InvalidInput(format!(
                "state and action spaces must be non-empty (got {n_states} states, {n_actions} actions)"
            )));
        }
        Ok(SpaceDims {
            n_states,
            n_actions,
        })
    }

    /// Number of state-action pairs |X||A|.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Row-major index of the pair (x, a).
    #[inline]
    pub fn pair(&self, x: usize, a: usize) -> usize {
        x * self.n_actions + a
    }

    /// Inverse of [`SpaceDims::pair`].
    #[inline]
    pub fn unpair(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_actions, idx % self.n_actions)
    }

    pub fn check_state(&self, x: usize) -> Result<()> {
        check_index("state", x, self.n_states)
    }

    pub fn check_action(&self, a: usize) -> Result<()> {
        check_index("action", a, self.n_actions)
    }

    pub fn check_pair(&self, x: usize, a: usize) -> Result<()> {
        self.check_state(x)?;
        self.check_action(a)
    }
}

/// A probability vector over the state space.
///
/// Construction clamps tiny negative entries and renormalizes, so long
/// iterations do not accumulate drift off the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexDist {
    probs: Vec<f64>,
}

impl SimplexDist {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(MfcgError::InvalidInput("empty distribution".into()));
        }
        let mut sum = 0.0;
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(MfcgError::InvalidInput(format!(
                    "entry {i} is not finite ({p})"
                )));
            }
            if *p < 0.0 {
                if *p < -NEGATIVE_CLAMP_TOL {
                    return Err(MfcgError::InvalidInput(format!(
                        "entry {i} is negative ({p:e})"
                    )));
                }
                *p = 0.0;
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(MfcgError::InvalidInput(format!(
                "entries sum to {sum}, not 1 (tolerance {SIMPLEX_SUM_TOL:e})"
            )));
        }
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(SimplexDist { probs })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty space");
        SimplexDist {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// The point mass δ(i) on a space of size `n`.
    pub fn point_mass(n: usize, i: usize) -> Self {
        assert!(i < n, "point mass index {i} out of range {n}");
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        SimplexDist { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn l1_distance(&self, other: &SimplexDist) -> f64 {
        l1(&self.probs, &other.probs)
    }

    /// Convex update `self + rho * increment`, where `increment` is a
    /// target-minus-current direction (e.g. `δ(X') − μ` or `μP − μ`).
    pub fn step(&self, rho: f64, increment: &[f64]) -> Result<SimplexDist> {
        debug_assert_eq!(increment.len(), self.probs.len());
        let next = self
            .probs
            .iter()
            .zip(increment)
            .map(|(m, d)| m + rho * d)
            .collect();
        SimplexDist::new(next)
    }

    /// Signed vector `target − self`.
    pub fn direction_to(&self, target: &[f64]) -> Vec<f64> {
        target.iter().zip(&self.probs).map(|(t, m)| t - m).collect()
    }
}

impl Index<usize> for SimplexDist {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

impl TryFrom<Vec<f64>> for SimplexDist {
    type Error = MfcgError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexDist::new(v)
    }
}

impl From<SimplexDist> for Vec<f64> {
    fn from(d: SimplexDist) -> Vec<f64> {
        d.probs
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// An |X|×|A| table of finite reals, stored row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    dims: SpaceDims,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(dims: SpaceDims) -> Self {
        QTable {
            dims,
            values: vec![0.0; dims.n_pairs()],
        }
    }

    pub fn from_vec(dims: SpaceDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.n_pairs() {
            return Err(MfcgError::InvalidInput(format!(
                "Q-table needs {} entries, got {}",
                dims.n_pairs(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let (x, a) = dims.unpair(i);
            return Err(MfcgError::InvalidInput(format!("Q({x},{a}) is not finite")));
        }
        Ok(QTable { dims, values })
    }

    /// Build from one row of action values per state.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        let dims = SpaceDims::new(rows.len(), n_actions)?;
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(MfcgError::InvalidInput("ragged Q-table rows".into()));
        }
        QTable::from_vec(dims, rows.concat())
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.values[self.dims.pair(x, a)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, a: usize, v: f64) {
        let i = self.dims.pair(x, a);
        self.values[i] = v;
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.dims.n_actions;
        &self.values[x * n..(x + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// min_a Q(x, a)
    pub fn row_min(&self, x: usize) -> f64 {
        self.row(x).iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Vector of row minima, one per state.
    pub fn row_mins(&self) -> Vec<f64> {
        (0..self.dims.n_states).map(|x| self.row_min(x)).collect()
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dims.n_states)
            .map(|x| self.row(x).to_vec())
            .collect()
    }
}

/// A randomized stationary policy: one distribution over actions per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    dims: SpaceDims,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(dims: SpaceDims, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != dims.n_pairs() {
            return Err(MfcgError::InvalidInput(format!(
                "policy needs {} entries, got {}",
                dims.n_pairs(),
                probs.len()
            )));
        }
        for x in 0..dims.n_states {
            let row = &probs[x * dims.n_actions..(x + 1) * dims.n_actions];
            check_action_row(row)
                .map_err(|e| MfcgError::InvalidInput(format!("policy row {x}: {e}")))?;
        }
        Ok(StochasticPolicy { dims, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        let dims = SpaceDims::new(rows.len(), n_actions)?;
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(MfcgError::InvalidInput("ragged policy rows".into()));
        }
        StochasticPolicy::new(dims, rows.concat())
    }

    pub fn uniform(dims: SpaceDims) -> Self {
        StochasticPolicy {
            dims,
            probs: vec![1.0 / dims.n_actions as f64; dims.n_pairs()],
        }
    }

    /// The randomized policy that plays `pure` deterministically.
    pub fn from_pure(pure: &PurePolicy) -> Self {
        let dims = pure.dims;
        let mut probs = vec![0.0; dims.n_pairs()];
        for (x, &a) in pure.choice.iter().enumerate() {
            probs[dims.pair(x, a)] = 1.0;
        }
        StochasticPolicy { dims, probs }
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.dims.n_actions;
        &self.probs[x * n..(x + 1) * n]
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[self.dims.pair(x, a)]
    }
}

/// Checks a probability vector over actions (sum within 1e-12, entries in [0, 1]).
pub(crate) fn check_action_row(row: &[f64]) -> std::result::Result<(), String> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(format!("entries must lie in [0,1]: {row:?}"));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(format!("sums to {s}, not 1"));
    }
    Ok(())
}

/// A deterministic policy mapping each state to one action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PurePolicy {
    dims: SpaceDims,
    choice: Vec<usize>,
}

impl PurePolicy {
    pub fn new(dims: SpaceDims, choice: Vec<usize>) -> Result<Self> {
        if choice.len() != dims.n_states {
            return Err(MfcgError::InvalidInput(format!(
                "pure policy must map all {} states (got {})",
                dims.n_states,
                choice.len()
            )));
        }
        for &a in &choice {
            dims.check_action(a)?;
        }
        Ok(PurePolicy { dims, choice })
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn action(&self, x: usize) -> usize {
        self.choice[x]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    /// Every pure policy on `dims`, in lexicographic order of the choice vector.
    pub fn enumerate(dims: SpaceDims) -> Vec<PurePolicy> {
        let total = dims.n_actions.pow(dims.n_states as u32);
        (0..total)
            .map(|mut code| {
                let mut choice = vec![0; dims.n_states];
                for slot in choice.iter_mut().rev() {
                    *slot = code % dims.n_actions;
                    code /= dims.n_actions;
                }
                PurePolicy { dims, choice }
            })
            .collect()
    }
}

/// One local distribution per state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFamily {
    dims: SpaceDims,
    dists: Vec<SimplexDist>,
}

impl LocalFamily {
    pub fn uniform(dims: SpaceDims) -> Self {
        LocalFamily {
            dims,
            dists: vec![SimplexDist::uniform(dims.n_states); dims.n_pairs()],
        }
    }

    /// Every member equal to `dist`.
    pub fn constant(dims: SpaceDims, dist: &SimplexDist) -> Self {
        LocalFamily {
            dims,
            dists: vec![dist.clone(); dims.n_pairs()],
        }
    }

    /// Members listed in pair order (x-major).
    pub fn from_vec(dims: SpaceDims, dists: Vec<SimplexDist>) -> Result<Self> {
        if dists.len() != dims.n_pairs() {
            return Err(MfcgError::InvalidInput(format!(
                "local family needs {} members, got {}",
                dims.n_pairs(),
                dists.len()
            )));
        }
        if dists.iter().any(|d| d.len() != dims.n_states) {
            return Err(MfcgError::InvalidInput(
                "local distribution of wrong length".into(),
            ));
        }
        Ok(LocalFamily { dims, dists })
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize) -> &SimplexDist {
        &self.dists[self.dims.pair(x, a)]
    }

    pub fn set(&mut self, x: usize, a: usize, d: SimplexDist) {
        let i = self.dims.pair(x, a);
        self.dists[i] = d;
    }

    pub fn members(&self) -> &[SimplexDist] {
        &self.dists
    }

    /// max over (x,a) of the L1 distance between corresponding members.
    pub fn max_l1_distance(&self, other: &LocalFamily) -> f64 {
        self.dists
            .iter()
            .zip(&other.dists)
            .fold(0.0, |m, (p, q)| m.max(p.l1_distance(q)))
    }
}

/// Boltzmann distribution favouring low values: `exp(−φ q_i) / Σ_j exp(−φ q_j)`.
///
/// The row minimum is subtracted before exponentiating, so large `phi`
/// cannot overflow.
pub fn softmin_policy_row(q_row: &[f64], phi: f64) -> Result<Vec<f64>> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(MfcgError::InvalidInput(format!(
            "softmin temperature must be positive, got {phi}"
        )));
    }
    if q_row.is_empty() {
        return Err(MfcgError::InvalidInput("softmin of an empty row".into()));
    }
    if let Some(v) = q_row.iter().find(|v| !v.is_finite()) {
        return Err(MfcgError::InvalidInput(format!(
            "softmin input not finite ({v})"
        )));
    }
    Ok(softmin_unchecked(q_row, phi))
}

pub(crate) fn softmin_unchecked(q_row: &[f64], phi: f64) -> Vec<f64> {
    let lo = q_row.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = q_row.iter().map(|q| (-phi * (q - lo)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}

/// Row-wise softmin policy of a Q-table.
pub fn softmin_policy(q: &QTable, phi: f64) -> Result<StochasticPolicy> {
    let dims = q.dims();
    let mut probs = Vec::with_capacity(dims.n_pairs());
    for x in 0..dims.n_states {
        probs.extend(softmin_policy_row(q.row(x), phi)?);
    }
    Ok(StochasticPolicy { dims, probs })
}

/// Greedy policy; ties go to the lowest action index.
pub fn argmin_policy(q: &QTable) -> PurePolicy {
    let dims = q.dims();
    let choice = (0..dims.n_states)
        .map(|x| {
            let row = q.row(x);
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] < row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    PurePolicy { dims, choice }
}

/// The policy that freezes action `a` at state `x` and follows `pi` elsewhere.
pub fn substitute_policy(pi: &StochasticPolicy, x: usize, a: usize) -> Result<StochasticPolicy> {
    let dims = pi.dims();
    dims.check_pair(x, a)?;
    let mut out = pi.clone();
    for b in 0..dims.n_actions {
        out.probs[dims.pair(x, b)] = if b == a { 1.0 } else { 0.0 };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(n: usize, m: usize) -> SpaceDims {
        SpaceDims::new(n, m).unwrap()
    }

    #[test]
    fn softmin_constant_row_is_uniform() {
        for phi in [0.1, 1.0, 500.0] {
            let p = softmin_policy_row(&[3.7; 4], phi).unwrap();
            assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn softmin_dominance_at_large_phi() {
        let p = softmin_policy_row(&[4.5, 2.9], 500.0).unwrap();
        assert!(p[0].abs() < 1e-12);
        assert!((p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmin_rejects_bad_input() {
        assert!(softmin_policy_row(&[1.0, f64::NAN], 1.0).is_err());
        assert!(softmin_policy_row(&[1.0, f64::INFINITY], 1.0).is_err());
        assert!(softmin_policy_row(&[1.0, 2.0], 0.0).is_err());
        assert!(softmin_policy_row(&[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn argmin_reference_table_and_ties() {
        let q = QTable::from_rows(&[vec![4.5, 2.9], vec![3.9, 5.5]]).unwrap();
        assert_eq!(argmin_policy(&q).choices(), &[1, 0]);
        let flat = QTable::from_rows(&[vec![1.0; 3], vec![1.0; 3]]).unwrap();
        assert_eq!(argmin_policy(&flat).choices(), &[0, 0]);
    }

    #[test]
    fn substitute_uniform_two_actions() {
        let pi = StochasticPolicy::uniform(dims(2, 2));
        let s = substitute_policy(&pi, 0, 1).unwrap();
        assert_eq!(s.row(0), &[0.0, 1.0]);
        assert_eq!(s.row(1), &[0.5, 0.5]);
        assert!(substitute_policy(&pi, 2, 0).is_err());
        assert!(substitute_policy(&pi, 0, 2).is_err());
    }

    #[test]
    fn substitute_is_idempotent_on_pure_rows() {
        let pure = PurePolicy::new(dims(3, 2), vec![1, 0, 1]).unwrap();
        let pi = StochasticPolicy::from_pure(&pure);
        for x in 0..3 {
            assert_eq!(substitute_policy(&pi, x, pure.action(x)).unwrap(), pi);
        }
    }

    #[test]
    fn simplex_clamps_and_renormalizes() {
        let d = SimplexDist::new(vec![0.5 + 4e-11, 0.5, -5e-13]).unwrap();
        assert_eq!(d[2], 0.0);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(SimplexDist::new(vec![0.6, 0.5]).is_err());
        assert!(SimplexDist::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexDist::new(vec![]).is_err());
    }

    #[test]
    fn pure_policy_enumeration() {
        let all = PurePolicy::enumerate(dims(2, 2));
        let choices: Vec<_> = all.iter().map(|p| p.choices().to_vec()).collect();
        assert_eq!(
            choices,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }

    #[test]
    fn space_dims_reject_empty() {
        assert!(SpaceDims::new(0, 2).is_err());
        assert!(SpaceDims::new(2, 0).is_err());
        let d = dims(3, 4);
        assert_eq!(d.unpair(d.pair(2, 3)), (2, 3));
    }
}
