//! Stochastic cumulant mean-field simulation of an atomic ensemble in a
//! probed optical cavity under continuous homodyne detection.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod matrix;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod protocol;

pub use dynamics::{diffusion, drift, third_order_closure, DriveFlags};
pub use error::{Error, Result};
pub use integrator::{simulate_trajectory, step, TrajectoryRecord, TrajectorySeed};
pub use model::{
    conjugate_closure, default_params, init_all_down, init_spin_coherent, MomentId, MomentState,
    ParamsHz, PhysicalParams, Slot,
};
