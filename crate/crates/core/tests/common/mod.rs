//! Independent oracles for the integration tests. Nothing here calls the
//! solver or operator code under test; only `MeanFieldModel::transition` and
//! `MeanFieldModel::cost` are used to read a model.
#![allow(dead_code)]

use mfcg_core::{LocalFamily, MeanFieldModel, QTable, SimplexDist, SpaceDims, StochasticPolicy};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

pub fn kernel_row<M: MeanFieldModel + ?Sized>(
    m: &M,
    x: usize,
    a: usize,
    mu: &[f64],
    mt: &[f64],
) -> Vec<f64> {
    let n = m.dims().n_states;
    let mut out = vec![0.0; n];
    let mu = SimplexDist::new(mu.to_vec()).unwrap();
    let mt = SimplexDist::new(mt.to_vec()).unwrap();
    m.transition(x, a, &mu, &mt, &mut out);
    out
}

pub fn cost<M: MeanFieldModel + ?Sized>(m: &M, x: usize, a: usize, mu: &[f64], mt: &[f64]) -> f64 {
    let mu = SimplexDist::new(mu.to_vec()).unwrap();
    let mt = SimplexDist::new(mt.to_vec()).unwrap();
    m.cost(x, a, &mu, &mt)
}

/// Softmin via `1 / Σ_j exp(−φ(q_j − q_i))`, a different route from the
/// shifted-exponential form.
pub fn softmin_by_ratios(q: &[f64], phi: f64) -> Vec<f64> {
    q.iter()
        .map(|qi| 1.0 / q.iter().map(|qj| (-phi * (qj - qi)).exp()).sum::<f64>())
        .collect()
}

pub fn policy_rows(q: &QTable, phi: f64) -> Vec<Vec<f64>> {
    (0..q.dims().n_states)
        .map(|x| softmin_by_ratios(q.row(x), phi))
        .collect()
}

/// `Σ_{x'} ν(x') Σ_a π(a|x') p(y|x',a,μ,μ̃)` by explicit triple loop, where
/// the kernel out of (x',a) is evaluated at `local(x', a)`.
pub fn brute_push<M, L>(m: &M, nu: &[f64], pi: &[Vec<f64>], mu: &[f64], local: L) -> Vec<f64>
where
    M: MeanFieldModel + ?Sized,
    L: Fn(usize, usize) -> Vec<f64>,
{
    let d = m.dims();
    let mut out = vec![0.0; d.n_states];
    for y in 0..d.n_states {
        for xp in 0..d.n_states {
            for a in 0..d.n_actions {
                out[y] += nu[xp] * pi[xp][a] * kernel_row(m, xp, a, mu, &local(xp, a))[y];
            }
        }
    }
    out
}

/// Policy with row `x` replaced by the point mass on `a`, built by hand.
pub fn frozen_rows(pi: &[Vec<f64>], x: usize, a: usize) -> Vec<Vec<f64>> {
    let mut rows = pi.to_vec();
    rows[x] = vec![0.0; pi[x].len()];
    rows[x][a] = 1.0;
    rows
}

pub fn brute_bellman<M, L>(m: &M, mu: &[f64], local: L, q: &QTable) -> Vec<f64>
where
    M: MeanFieldModel + ?Sized,
    L: Fn(usize, usize) -> Vec<f64>,
{
    let d = m.dims();
    let vmin: Vec<f64> = (0..d.n_states)
        .map(|y| q.row(y).iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut out = Vec::new();
    for x in 0..d.n_states {
        for a in 0..d.n_actions {
            let mt = local(x, a);
            let row = kernel_row(m, x, a, mu, &mt);
            let cont: f64 = row.iter().zip(&vmin).map(|(p, v)| p * v).sum();
            out.push(cost(m, x, a, mu, &mt) + m.gamma() * cont);
        }
    }
    out
}

pub fn brute_t3<M: MeanFieldModel + ?Sized>(
    m: &M,
    mu: &[f64],
    q: &QTable,
    locals: &LocalFamily,
) -> Vec<f64> {
    brute_bellman(m, mu, |x, a| locals.get(x, a).probs().to_vec(), q)
        .iter()
        .zip(q.values())
        .map(|(b, q)| b - q)
        .collect()
}

pub fn brute_p3<M: MeanFieldModel + ?Sized>(
    m: &M,
    mu: &[f64],
    q: &QTable,
    locals: &LocalFamily,
) -> Vec<f64> {
    let pi = policy_rows(q, m.phi());
    let pushed = brute_push(m, mu, &pi, mu, |x, a| locals.get(x, a).probs().to_vec());
    pushed.iter().zip(mu).map(|(p, m)| p - m).collect()
}

pub fn brute_p3_tilde<M: MeanFieldModel + ?Sized>(
    m: &M,
    x: usize,
    a: usize,
    mu: &[f64],
    q: &QTable,
    mt: &[f64],
) -> Vec<f64> {
    let pi = frozen_rows(&policy_rows(q, m.phi()), x, a);
    let pushed = brute_push(m, mt, &pi, mu, |_, _| mt.to_vec());
    pushed.iter().zip(mt).map(|(p, v)| p - v).collect()
}

/// Transition matrix `P[x'][y]` of the population chain under `pi` with the
/// distributions frozen.
pub fn chain_matrix<M: MeanFieldModel + ?Sized>(
    m: &M,
    pi: &[Vec<f64>],
    mu: &[f64],
    mt: &[f64],
) -> Vec<Vec<f64>> {
    let d = m.dims();
    (0..d.n_states)
        .map(|xp| {
            let mut row = vec![0.0; d.n_states];
            for a in 0..d.n_actions {
                for (y, p) in kernel_row(m, xp, a, mu, mt).iter().enumerate() {
                    row[y] += pi[xp][a] * p;
                }
            }
            row
        })
        .collect()
}

/// Stationary distribution by a direct linear solve of `πP = π`, `Σπ = 1`.
pub fn stationary_lu(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .expect("irreducible chain has a unique stationary law");
    sol.iter().copied().collect()
}

/// Plain value iteration for a fixed MDP, iterated to `1e-14`.
pub fn value_iteration<P, C>(dims: SpaceDims, gamma: f64, kernel: P, cost: C) -> Vec<f64>
where
    P: Fn(usize, usize) -> Vec<f64>,
    C: Fn(usize, usize) -> f64,
{
    let (nx, na) = (dims.n_states, dims.n_actions);
    let mut q = vec![0.0; nx * na];
    for _ in 0..100_000 {
        let v: Vec<f64> = (0..nx)
            .map(|y| (0..na).map(|b| q[y * na + b]).fold(f64::INFINITY, f64::min))
            .collect();
        let mut next = vec![0.0; nx * na];
        for x in 0..nx {
            for a in 0..na {
                let row = kernel(x, a);
                next[x * na + a] =
                    cost(x, a) + gamma * row.iter().zip(&v).map(|(p, v)| p * v).sum::<f64>();
            }
        }
        let diff = next
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if diff < 1e-14 {
            break;
        }
    }
    q
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Two-state model written out by hand, independent of the library's env.
pub mod two_state {
    pub const P: f64 = 0.1;
    pub const C_G: f64 = 5.0;
    pub const C_L: f64 = 5.0;
    pub const GAMMA: f64 = 0.5;

    /// Minimal action gap `Q*(0,s) − Q*(0,m)` of the closed-form solution.
    pub fn gap(p: f64, c_l: f64, gamma: f64) -> f64 {
        0.5 * (1.0 - 2.0 * p) * (c_l - 2.0 * gamma)
    }

    /// Stationary `μ(1)` of the two-state chain by power iteration.
    pub fn power_stationary(p: f64, stay0: f64, stay1: f64) -> f64 {
        let to1_from0 = stay0 * p + (1.0 - stay0) * (1.0 - p);
        let to1_from1 = stay1 * (1.0 - p) + (1.0 - stay1) * p;
        let mut m1 = 0.5;
        for _ in 0..10_000 {
            m1 = (1.0 - m1) * to1_from0 + m1 * to1_from1;
        }
        m1
    }
}

// ---- proptest strategies ----

/// A strictly positive probability vector of length `n`.
pub fn dist(n: usize) -> impl Strategy<Value = SimplexDist> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        SimplexDist::new(w.iter().map(|v| v / s).collect()).unwrap()
    })
}

pub fn qtable(dims: SpaceDims, scale: f64) -> impl Strategy<Value = QTable> {
    prop::collection::vec(-scale..scale, dims.n_pairs())
        .prop_map(move |v| QTable::from_vec(dims, v).unwrap())
}

pub fn policy(dims: SpaceDims) -> impl Strategy<Value = StochasticPolicy> {
    prop::collection::vec(
        prop::collection::vec(0.01f64..1.0, dims.n_actions),
        dims.n_states,
    )
    .prop_map(move |rows| {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect();
        StochasticPolicy::from_rows(&rows).unwrap()
    })
}

pub fn family(dims: SpaceDims) -> impl Strategy<Value = LocalFamily> {
    prop::collection::vec(dist(dims.n_states), dims.n_pairs())
        .prop_map(move |members| LocalFamily::from_vec(dims, members).unwrap())
}

/// Constants of a model that is affine in each distribution argument, read
/// off kernel and cost evaluations at simplex vertices.
#[derive(Debug, Clone, Copy)]
pub struct VertexConstants {
    pub c_min: f64,
    pub l_p_glob: f64,
    pub l_p_loc: f64,
    pub l_f_glob: f64,
    pub l_f_loc: f64,
}

fn vertex(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn vertex_constants<M: MeanFieldModel + ?Sized>(m: &M) -> VertexConstants {
    let d = m.dims();
    let n = d.n_states;
    let w = vec![1.0 / n as f64; n];
    let mut k = VertexConstants {
        c_min: f64::INFINITY,
        l_p_glob: 0.0,
        l_p_loc: 0.0,
        l_f_glob: 0.0,
        l_f_loc: 0.0,
    };
    for x in 0..n {
        for a in 0..d.n_actions {
            for i in 0..n {
                for j in 0..n {
                    let (vi, vj) = (vertex(n, i), vertex(n, j));
                    let row = kernel_row(m, x, a, &vi, &vj);
                    k.c_min = k
                        .c_min
                        .min(row.iter().copied().fold(f64::INFINITY, f64::min));
                    k.l_p_glob = k.l_p_glob.max(
                        0.5 * l1(&kernel_row(m, x, a, &vi, &w), &kernel_row(m, x, a, &vj, &w)),
                    );
                    k.l_p_loc = k.l_p_loc.max(
                        0.5 * l1(&kernel_row(m, x, a, &w, &vi), &kernel_row(m, x, a, &w, &vj)),
                    );
                    k.l_f_glob = k
                        .l_f_glob
                        .max(0.5 * (cost(m, x, a, &vi, &w) - cost(m, x, a, &vj, &w)).abs());
                    k.l_f_loc = k
                        .l_f_loc
                        .max(0.5 * (cost(m, x, a, &w, &vi) - cost(m, x, a, &w, &vj)).abs());
                }
            }
        }
    }
    k
}

/// `min_{x',y} Σ_a π(a|x') p(y|x',a,·,·)` over vertex pairs.
pub fn vertex_c_min_phi<M: MeanFieldModel + ?Sized>(m: &M, pi: &[Vec<f64>]) -> f64 {
    let d = m.dims();
    let n = d.n_states;
    let mut c = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let rows = chain_matrix(m, pi, &vertex(n, i), &vertex(n, j));
            c = c.min(rows.iter().flatten().copied().fold(f64::INFINITY, f64::min));
        }
    }
    c
}

/// Largest absolute value of the cost over vertex pairs (exact for affine costs).
pub fn vertex_cost_bound<M: MeanFieldModel + ?Sized>(m: &M) -> f64 {
    let d = m.dims();
    let n = d.n_states;
    let mut b: f64 = 0.0;
    for x in 0..n {
        for a in 0..d.n_actions {
            for i in 0..n {
                for j in 0..n {
                    b = b.max(cost(m, x, a, &vertex(n, i), &vertex(n, j)).abs());
                }
            }
        }
    }
    b
}

/// `Q^{*φ}_μ` and its local equilibria for a kernel that ignores both
/// distributions: locals are stationary laws of the frozen chains (LU
/// solve), alternated with single Bellman sweeps until Q stops moving.
pub fn oracle_q_gase<M: MeanFieldModel + ?Sized>(m: &M, mu: &[f64]) -> (QTable, Vec<Vec<f64>>) {
    let d = m.dims();
    let u = vec![1.0 / d.n_states as f64; d.n_states];
    let mut q = QTable::zeros(d);
    for _ in 0..1_000_000 {
        let pi = policy_rows(&q, m.phi());
        let locals: Vec<Vec<f64>> = (0..d.n_pairs())
            .map(|i| {
                let (x, a) = (i / d.n_actions, i % d.n_actions);
                stationary_lu(&chain_matrix(m, &frozen_rows(&pi, x, a), &u, &u))
            })
            .collect();
        let next = brute_bellman(m, mu, |x, a| locals[x * d.n_actions + a].clone(), &q);
        let change = sup(&next, q.values());
        q = QTable::from_vec(d, next).unwrap();
        if change < 1e-14 {
            return (q, locals);
        }
    }
    panic!("oracle Q iteration did not settle");
}
