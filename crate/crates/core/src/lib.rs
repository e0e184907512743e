//! Three-timescale Q-learning for mean field control games on finite state
//! and action spaces.
//!
//! The crate provides three solvers for the same equilibrium: a deterministic
//! iteration ([`ideal`]), a synchronous sampled variant ([`sync`]) and a
//! model-free asynchronous learner ([`async_learner`]). Fixed-point oracles
//! ([`fixed_point`]) and a closed-form two-state benchmark
//! ([`envs::two_state`]) give ground truth for all three.

pub mod async_learner;
pub mod envs;
pub mod error;
pub mod fixed_point;
pub mod fixtures;
pub mod ideal;
pub mod model;
pub mod operators;
pub mod par;
pub mod rng;
pub mod schedules;
pub mod sync;
pub mod trace;
pub mod types;

pub use async_learner::{
    init_async, run_async, run_async_batch, step_async, AsyncState, AsyncStepInfo,
};
pub use error::{MfcgError, Result};
pub use fixed_point::{
    extract_solution, solve_global_gase, solve_local_gase, solve_mus_system, solve_q_gase,
    FixedPointOptions, PhiSolution, QGase, SolutionTriple,
};
pub use ideal::{run_ideal, step_ideal, IdealState};
pub use model::{apply_kernel, apply_modified_kernel, FnModel, LipschitzConstants, MeanFieldModel};
pub use operators::{
    action_gap, bellman_apply, check_assumptions, p3, p3_tilde, softmin_error_bounds,
    structural_constants, t3, AssumptionReport, ErrorBounds, StructuralConstants,
};
pub use par::Execution;
pub use rng::RandomSource;
pub use schedules::{
    rate_deterministic, rate_global, rate_visit, validate_exponents, RateExponents, RateKind,
    Schedule, VisitCounts,
};
pub use sync::{check_p, check_t, run_sync, sample_next_state, step_sync, MartingaleTrace};
pub use trace::{TraceRow, TraceSink};
pub use types::{
    argmin_policy, softmin_policy, softmin_policy_row, substitute_policy, LocalFamily, PurePolicy,
    QTable, SimplexDist, SpaceDims, StochasticPolicy,
};
