mod common;

use common::*;
use mfcg_core::envs::{
    build_two_state, load_dense_model, two_state_exact, two_state_global_gase,
    two_state_local_equilibria, two_state_q_gase, two_state_spec, two_state_stationary, CostSpec,
    DenseModelSpec, KernelSpec, TwoStateModel, TwoStateParams, MOVE, STAY,
};
use mfcg_core::fixtures::{random_dist, random_policy};
use mfcg_core::{
    action_gap, apply_kernel, softmin_error_bounds, softmin_policy, solve_global_gase,
    solve_local_gase, solve_mus_system, solve_q_gase, structural_constants, FixedPointOptions,
    LipschitzConstants, MeanFieldModel, MfcgError, PurePolicy, QTable, RandomSource, SimplexDist,
    SpaceDims, StochasticPolicy,
};
use proptest::prelude::*;

const D22: SpaceDims = SpaceDims {
    n_states: 2,
    n_actions: 2,
};

fn params(p: f64, c_l: f64, gamma: f64, phi: f64) -> TwoStateParams {
    TwoStateParams {
        p,
        c_g: 5.0,
        c_l,
        gamma,
        phi,
    }
}

fn d(v: &[f64]) -> SimplexDist {
    SimplexDist::new(v.to_vec()).unwrap()
}

/// The 18-point sweep p × c_l × γ.
fn sweep() -> Vec<(f64, f64, f64)> {
    let mut out = vec![];
    for p in [0.05, 0.1, 0.2] {
        for c_l in [2.0, 5.0, 8.0] {
            for gamma in [0.3, 0.5] {
                out.push((p, c_l, gamma));
            }
        }
    }
    out
}

/// A Q table whose softmin policy at `phi` is `pi`.
fn q_for_policy(pi: &StochasticPolicy, phi: f64) -> QTable {
    let dims = pi.dims();
    let v = (0..dims.n_pairs())
        .map(|i| -pi.prob(i / dims.n_actions, i % dims.n_actions).ln() / phi)
        .collect();
    QTable::from_vec(dims, v).unwrap()
}

/// Pure-policy equilibrium of the two-state model by linear solves and value iteration.
fn oracle_pure_solution(
    m: &TwoStateModel,
    alpha: [usize; 2],
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let pi: Vec<Vec<f64>> = alpha
        .iter()
        .map(|&a| (0..2).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
        .collect();
    let u = [0.5, 0.5];
    let mu = stationary_lu(&chain_matrix(m, &pi, &u, &u));
    let locals: Vec<Vec<f64>> = (0..4)
        .map(|i| stationary_lu(&chain_matrix(m, &frozen_rows(&pi, i / 2, i % 2), &u, &u)))
        .collect();
    let q = value_iteration(
        D22,
        m.gamma(),
        |x, a| kernel_row(m, x, a, &u, &u),
        |x, a| cost(m, x, a, &mu, &locals[x * 2 + a]),
    );
    (mu, locals, q)
}

#[test]
fn two_state_kernel_and_cost() {
    let m = build_two_state(TwoStateParams::default()).unwrap();
    let u = [0.5, 0.5];
    assert_eq!(kernel_row(&m, 0, MOVE, &u, &u)[1], 0.9);
    assert_eq!(kernel_row(&m, 0, STAY, &u, &u), vec![0.9, 0.1]);
    assert_eq!(kernel_row(&m, 1, MOVE, &u, &u), vec![0.9, 0.1]);
    let mut rng = RandomSource::new(1, 0);
    for _ in 0..100 {
        let (mu, mt) = (rng.simplex_point(2), rng.simplex_point(2));
        for x in 0..2 {
            for a in 0..2 {
                assert!((kernel_row(&m, x, a, &mu, &mt).iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }
    for a in 0..2 {
        assert_eq!(cost(&m, 1, a, &[1.0, 0.0], &[1.0, 0.0]), 11.0);
    }
    assert_eq!(m.cost_bound(), 11.0);
    assert_eq!(
        m.declared_lipschitz(),
        Some(LipschitzConstants {
            p_glob: 0.0,
            p_loc: 0.0,
            f_glob: 2.5,
            f_loc: 2.5
        })
    );
}

#[test]
fn two_state_rejects_bad_parameters() {
    for bad in [
        TwoStateParams {
            p: 0.5,
            ..Default::default()
        },
        TwoStateParams {
            p: 0.0,
            ..Default::default()
        },
        TwoStateParams {
            c_g: -1.0,
            ..Default::default()
        },
        TwoStateParams {
            c_l: 0.0,
            ..Default::default()
        },
        TwoStateParams {
            gamma: 1.0,
            ..Default::default()
        },
        TwoStateParams {
            phi: 0.0,
            ..Default::default()
        },
    ] {
        assert!(build_two_state(bad).is_err(), "{bad:?}");
    }
    let flat = TwoStateParams {
        c_l: 1.0,
        gamma: 0.5,
        ..Default::default()
    };
    assert!(!flat.in_unique_regime());
    assert!(matches!(
        two_state_exact(flat),
        Err(MfcgError::UnsupportedRegime(_))
    ));
}

#[test]
fn exact_solution_at_default_parameters() {
    let sol = two_state_exact(TwoStateParams::default()).unwrap();
    let want = [[4.5, 2.9], [3.9, 5.5]];
    for (x, row) in want.iter().enumerate() {
        for (a, w) in row.iter().enumerate() {
            assert!((sol.q_star.get(x, a) - w).abs() < 1e-12);
        }
    }
    assert_eq!(sol.mu_star.probs(), &[0.1, 0.9]);
    assert_eq!(sol.alpha_star.choices(), &[MOVE, STAY]);
    let q = &sol.q_star;
    assert!((q.get(1, STAY) - q.get(0, MOVE) - 1.0).abs() < 1e-12);
    assert!((q.get(1, MOVE) - q.get(0, STAY) - 1.0).abs() < 1e-12);
    assert!((action_gap(q) - two_state::gap(0.1, 5.0, 0.5)).abs() < 1e-12);
    assert!((action_gap(q) - 1.6).abs() < 1e-12);
}

#[test]
fn exact_solution_matches_pure_policy_oracle_across_sweep() {
    for (p, c_l, gamma) in sweep() {
        let prm = params(p, c_l, gamma, 50.0);
        let m = build_two_state(prm).unwrap();
        let sol = two_state_exact(prm).unwrap();
        let (mu, locals, q) = oracle_pure_solution(&m, [MOVE, STAY]);
        assert!(sup(sol.mu_star.probs(), &mu) < 1e-12, "{prm:?}");
        for i in 0..4 {
            assert!(
                sup(sol.locals_star.members()[i].probs(), &locals[i]) < 1e-12,
                "{prm:?} pair {i}"
            );
        }
        assert!(
            sup(sol.q_star.values(), &q) < 1e-10,
            "{prm:?}: {:?} vs {q:?}",
            sol.q_star.values()
        );
        // (move, stay) is greedy for its own Q.
        assert!(q[1] < q[0] && q[2] < q[3], "{prm:?}");
        assert!(
            (action_gap(&sol.q_star) - two_state::gap(p, c_l, gamma)).abs() < 1e-10,
            "{prm:?}"
        );
    }
}

#[test]
fn local_equilibria_of_the_greedy_policy() {
    let prm = TwoStateParams::default();
    let alpha = PurePolicy::new(D22, vec![MOVE, STAY]).unwrap();
    let fam = two_state_local_equilibria(prm, &StochasticPolicy::from_pure(&alpha)).unwrap();
    assert!((fam.get(0, STAY)[1] - 0.5).abs() < 1e-15);
    assert!((fam.get(1, STAY)[1] - 0.9).abs() < 1e-15);
}

#[test]
fn stationary_laws_of_pure_policies() {
    for (p, c_l, gamma) in sweep() {
        let prm = params(p, c_l, gamma, 5.0);
        let m = build_two_state(prm).unwrap();
        let expected = [
            ([STAY, STAY], [0.5, 0.5]),
            ([STAY, MOVE], [1.0 - p, p]),
            ([MOVE, STAY], [p, 1.0 - p]),
            ([MOVE, MOVE], [0.5, 0.5]),
        ];
        for (alpha, want) in expected {
            let pure = PurePolicy::new(D22, alpha.to_vec()).unwrap();
            let generic = solve_mus_system(&m, &pure, &FixedPointOptions::with_tol(1e-13)).unwrap();
            assert!(sup(generic.mu.probs(), &want) < 1e-10, "{prm:?} {alpha:?}");
            let closed = two_state_stationary(prm, &StochasticPolicy::from_pure(&pure)).unwrap();
            assert!(sup(closed.probs(), &want) < 1e-15, "{prm:?} {alpha:?}");
        }
    }
}

#[test]
fn pure_greedy_policy_gives_p_and_one_minus_p() {
    let prm = TwoStateParams::default();
    let pure = PurePolicy::new(D22, vec![MOVE, STAY]).unwrap();
    let mu = two_state_stationary(prm, &StochasticPolicy::from_pure(&pure)).unwrap();
    assert_eq!(mu.probs(), &[0.1, 0.9]);
}

#[test]
fn q_closed_form_matches_generic_solver() {
    for phi in [5.0, 500.0] {
        let prm = TwoStateParams::default().with_phi(phi);
        let m = build_two_state(prm).unwrap();
        for mu in [d(&[0.1, 0.9]), d(&[0.5, 0.5])] {
            let closed = two_state_q_gase(prm, &mu).unwrap();
            let generic = solve_q_gase(&m, &mu, &FixedPointOptions::with_tol(1e-12)).unwrap();
            assert!(
                closed.sup_distance(&generic.q) < 1e-6,
                "φ={phi}, μ={:?}",
                mu.probs()
            );
        }
    }
}

#[test]
fn q_closed_form_approaches_exact_within_the_error_bound() {
    let prm = TwoStateParams::default();
    let m = build_two_state(prm).unwrap();
    let sol = two_state_exact(prm).unwrap();
    let q_phi = two_state_q_gase(prm, &sol.mu_star).unwrap();
    let consts = structural_constants(&m, Some(&sol.q_star_phi), 64).unwrap();
    let bounds = softmin_error_bounds(&consts, &m).unwrap();
    assert!(q_phi.sup_distance(&sol.q_star) <= bounds.q_bound + 1e-9);
    assert!(q_phi.sup_distance(&sol.q_star) < 1e-9);
}

#[test]
fn global_closed_form_at_large_phi() {
    let mu = two_state_global_gase(TwoStateParams::default()).unwrap();
    assert!(sup(mu.probs(), &[0.1, 0.9]) < 1e-3);
}

#[test]
fn all_closed_forms_match_generic_solvers_across_sweep() {
    let tol = FixedPointOptions::with_tol(1e-12);
    for (p, c_l, gamma) in sweep() {
        let prm = params(p, c_l, gamma, 5.0);
        let m = build_two_state(prm).unwrap();

        let generic = solve_global_gase(&m, &tol).unwrap();
        let mu = two_state_global_gase(prm).unwrap();
        assert!(sup(mu.probs(), generic.mu.probs()) < 1e-6, "{prm:?}");

        let q = two_state_q_gase(prm, &generic.mu).unwrap();
        assert!(q.sup_distance(&generic.q) < 1e-6, "{prm:?}");

        let pi = softmin_policy(&generic.q, prm.phi).unwrap();
        let fam = two_state_local_equilibria(prm, &pi).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                assert!(
                    sup(fam.get(x, a).probs(), generic.locals.get(x, a).probs()) < 1e-6,
                    "{prm:?} ({x},{a})"
                );
            }
        }

        let sol = two_state_exact(prm).unwrap();
        assert!(
            sup(sol.mu_star_phi.probs(), generic.mu.probs()) < 1e-6,
            "{prm:?}"
        );
        assert!(sol.q_star_phi.sup_distance(&generic.q) < 1e-6, "{prm:?}");
    }
}

#[test]
fn two_state_as_dense_spec_evaluates_identically() {
    let prm = TwoStateParams::default();
    let m = build_two_state(prm).unwrap();
    let dense = load_dense_model(&two_state_spec(prm).unwrap()).unwrap();
    assert_eq!(
        (dense.dims(), dense.gamma(), dense.phi()),
        (m.dims(), m.gamma(), m.phi())
    );
    assert_eq!(dense.cost_bound(), m.cost_bound());
    let mut rng = RandomSource::new(7, 0);
    for _ in 0..1000 {
        let (mu, mt) = (rng.simplex_point(2), rng.simplex_point(2));
        let (x, a) = (rng.index(2), rng.index(2));
        assert!(
            sup(
                &kernel_row(&dense, x, a, &mu, &mt),
                &kernel_row(&m, x, a, &mu, &mt)
            ) < 1e-15
        );
        assert!((cost(&dense, x, a, &mu, &mt) - cost(&m, x, a, &mu, &mt)).abs() < 1e-13);
    }
}

fn identity_spec(n: usize, na: usize) -> DenseModelSpec {
    let base = (0..n)
        .map(|x| {
            (0..na)
                .map(|_| (0..n).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    DenseModelSpec {
        dims: SpaceDims {
            n_states: n,
            n_actions: na,
        },
        kernel: KernelSpec {
            base,
            glob: None,
            loc: None,
        },
        cost: CostSpec {
            base: vec![vec![1.0; na]; n],
            glob: None,
            loc: None,
        },
        gamma: 0.9,
        phi: 1.0,
        cost_bound: None,
        lipschitz: None,
    }
}

#[test]
fn identity_kernel_leaves_distributions_unchanged() {
    let m = load_dense_model(&identity_spec(4, 3)).unwrap();
    let mut rng = RandomSource::new(3, 0);
    for _ in 0..50 {
        let nu = random_dist(&mut rng, 4);
        let pi = random_policy(&mut rng, m.dims());
        let (mu, mt) = (random_dist(&mut rng, 4), random_dist(&mut rng, 4));
        let out = apply_kernel(&m, &nu, &pi, &mu, &mt).unwrap();
        assert!(sup(out.probs(), nu.probs()) < 1e-15);
    }
}

fn invalid_field(spec: &DenseModelSpec) -> (String, String) {
    match load_dense_model(spec) {
        Err(MfcgError::InvalidSpec { field, detail }) => (field, detail),
        other => panic!("expected an invalid-spec error, got {other:?}"),
    }
}

#[test]
fn dense_spec_validation_names_the_offending_entry() {
    let mut spec = identity_spec(3, 2);
    spec.kernel.base[2][1] = vec![0.0, 0.0, 0.99];
    let (field, detail) = invalid_field(&spec);
    assert_eq!(field, "kernel.base[2][1]");
    assert!(detail.contains("x=2") && detail.contains("a=1"), "{detail}");

    let mut spec = identity_spec(3, 2);
    spec.kernel.base[1].pop();
    assert_eq!(invalid_field(&spec).0, "kernel.base[1]");

    let mut spec = identity_spec(3, 2);
    spec.cost.base[0] = vec![1.0, f64::NAN];
    assert_eq!(invalid_field(&spec).0, "cost.base[0][1]");

    let mut spec = identity_spec(3, 2);
    spec.cost.glob = Some(vec![vec![vec![0.0; 2]; 2]; 3]);
    assert_eq!(invalid_field(&spec).0, "cost.glob[0][0]");

    let mut spec = identity_spec(3, 2);
    spec.cost_bound = Some(0.5);
    assert_eq!(invalid_field(&spec).0, "cost_bound");

    let mut spec = identity_spec(3, 2);
    spec.lipschitz = Some(LipschitzConstants {
        p_glob: -1.0,
        p_loc: 0.0,
        f_glob: 0.0,
        f_loc: 0.0,
    });
    assert_eq!(invalid_field(&spec).0, "lipschitz");

    let mut spec = identity_spec(3, 2);
    spec.gamma = 1.0;
    assert_eq!(invalid_field(&spec).0, "gamma");
}

#[test]
fn affine_kernel_leaving_the_simplex_is_rejected() {
    // Moving mass by μ(0) out of state 0 is fine; moving 2μ(0) is not.
    for (scale, ok) in [(1.0, true), (2.0, false)] {
        let mut spec = identity_spec(2, 1);
        spec.kernel.base = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let mut glob = vec![vec![vec![vec![0.0; 2]; 2]; 1]; 2];
        glob[0][0][0] = vec![-scale, scale];
        spec.kernel.glob = Some(glob);
        assert_eq!(load_dense_model(&spec).is_ok(), ok, "scale {scale}");
    }
}

proptest! {
    #[test]
    fn local_closed_forms_match_generic_solver(pi in policy(D22), mu in dist(2)) {
        let prm = TwoStateParams::default().with_phi(5.0);
        let m = build_two_state(prm).unwrap();
        let fam = two_state_local_equilibria(prm, &pi).unwrap();
        let q = q_for_policy(&pi, prm.phi);
        for x in 0..2 {
            for a in 0..2 {
                let generic = solve_local_gase(&m, &mu, &q, x, a, &FixedPointOptions::with_tol(1e-13)).unwrap();
                prop_assert!(sup(fam.get(x, a).probs(), generic.probs()) < 1e-8);
            }
        }
    }

    #[test]
    fn global_shift_moves_q_by_a_constant(a in dist(2), b in dist(2)) {
        let prm = TwoStateParams::default().with_phi(5.0);
        let (qa, qb) = (two_state_q_gase(prm, &a).unwrap(), two_state_q_gase(prm, &b).unwrap());
        let shift = prm.c_g * (a[0] - b[0]) / (1.0 - prm.gamma);
        for (x, y) in qa.values().iter().zip(qb.values()) {
            prop_assert!((x - y - shift).abs() < 1e-10);
        }
    }
}
