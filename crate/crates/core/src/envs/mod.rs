//! Built-in environments.

pub mod dense;
pub mod two_state;

pub use dense::{load_dense_model, AffineModel, CostSpec, DenseModelSpec, KernelSpec};
pub use two_state::{
    build_two_state, two_state_exact, two_state_global_gase, two_state_local_equilibria,
    two_state_q_gase, two_state_spec, two_state_stationary, TwoStateModel, TwoStateParams, MOVE,
    STAY,
};
