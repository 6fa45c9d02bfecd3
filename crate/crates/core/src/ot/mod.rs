//! Optimal-transport skill segmentation.

mod asot;
mod config;
mod cost;
mod fit;
mod sinkhorn;

pub use asot::{hard_assign, solve_asot, AsotSolution};
pub use config::{Mode, ModeParams, SolverConfig};
pub use cost::{
    band_width, build_cost_matrix, gw_gradient, order_prior, temporal_band, temporal_regularity,
    Prototypes,
};
pub use fit::{fit, init_prototypes, label_dataset, segment_dataset, Segmentation};
pub use sinkhorn::{sinkhorn_solve, SinkhornParams, TransportPlan};
