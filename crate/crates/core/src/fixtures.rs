//! Random models and inputs for tests and benchmarks.

use crate::envs::dense::{load_dense_model, AffineModel, CostSpec, DenseModelSpec, KernelSpec};
use crate::rng::RandomSource;
use crate::types::{LocalFamily, QTable, SimplexDist, SpaceDims, StochasticPolicy};

/// Random affine model. `coupling ∈ [0, ½]` is the weight each distribution
/// argument carries in the kernel; costs lie in `[0, 1 + 2·coupling]`.
pub fn random_affine_model(
    n_states: usize,
    n_actions: usize,
    coupling: f64,
    gamma: f64,
    phi: f64,
    seed: u64,
) -> AffineModel {
    assert!(
        (0.0..=0.5).contains(&coupling),
        "coupling must lie in [0, 1/2]"
    );
    let mut rng = RandomSource::new(seed, 0);
    let nx = n_states;
    let base_w = 1.0 - 2.0 * coupling;
    let mut simplex = |scale: f64| -> Vec<f64> { rng_simplex(&mut rng, nx, scale) };
    let base: Vec<Vec<Vec<f64>>> = (0..nx)
        .map(|_| (0..n_actions).map(|_| simplex(base_w)).collect())
        .collect();
    let mut coef = || -> Option<Vec<Vec<Vec<Vec<f64>>>>> {
        (coupling > 0.0).then(|| {
            (0..nx)
                .map(|_| {
                    (0..n_actions)
                        .map(|_| (0..nx).map(|_| simplex(coupling)).collect())
                        .collect()
                })
                .collect()
        })
    };
    let glob = coef();
    let loc = coef();
    let mut cost_rng = RandomSource::new(seed, 1);
    let c_base = (0..nx)
        .map(|_| (0..n_actions).map(|_| cost_rng.uniform()).collect())
        .collect();
    let mut c_coef = || -> Option<Vec<Vec<Vec<f64>>>> {
        (coupling > 0.0).then(|| {
            (0..nx)
                .map(|_| {
                    (0..n_actions)
                        .map(|_| (0..nx).map(|_| coupling * cost_rng.uniform()).collect())
                        .collect()
                })
                .collect()
        })
    };
    let c_glob = c_coef();
    let c_loc = c_coef();
    load_dense_model(&DenseModelSpec {
        dims: SpaceDims {
            n_states: nx,
            n_actions,
        },
        kernel: KernelSpec { base, glob, loc },
        cost: CostSpec {
            base: c_base,
            glob: c_glob,
            loc: c_loc,
        },
        gamma,
        phi,
        cost_bound: None,
        lipschitz: None,
    })
    .expect("random affine model is valid by construction")
}

fn rng_simplex(rng: &mut RandomSource, n: usize, scale: f64) -> Vec<f64> {
    // Mix in a uniform floor so every entry is bounded away from zero.
    let v = rng.simplex_point(n);
    v.into_iter()
        .map(|p| scale * (0.5 * p + 0.5 / n as f64))
        .collect()
}

pub fn random_dist(rng: &mut RandomSource, n: usize) -> SimplexDist {
    SimplexDist::new(rng.simplex_point(n)).expect("flat Dirichlet draw")
}

pub fn random_q(rng: &mut RandomSource, dims: SpaceDims, scale: f64) -> QTable {
    let v = (0..dims.n_pairs())
        .map(|_| scale * (2.0 * rng.uniform() - 1.0))
        .collect();
    QTable::from_vec(dims, v).expect("finite draws")
}

pub fn random_policy(rng: &mut RandomSource, dims: SpaceDims) -> StochasticPolicy {
    let rows: Vec<Vec<f64>> = (0..dims.n_states)
        .map(|_| rng.simplex_point(dims.n_actions))
        .collect();
    let probs = rows.concat();
    // Re-normalize to the tighter policy tolerance.
    let fixed: Vec<f64> = probs
        .chunks(dims.n_actions)
        .flat_map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(move |p| p / s).collect::<Vec<_>>()
        })
        .collect();
    StochasticPolicy::new(dims, fixed).expect("normalized rows")
}

pub fn random_family(rng: &mut RandomSource, dims: SpaceDims) -> LocalFamily {
    let members = (0..dims.n_pairs())
        .map(|_| random_dist(rng, dims.n_states))
        .collect();
    LocalFamily::from_vec(dims, members).expect("sized from dims")
}
