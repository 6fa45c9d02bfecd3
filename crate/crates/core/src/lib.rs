//! Unsupervised skill segmentation and skill-hierarchy discovery.
//!
//! Feature trajectories are segmented into discrete skills with a regularized
//! optimal-transport solver ([`ot`]), the collapsed skill sequences are
//! compressed into a grammar with a boundary-aware Sequitur ([`grammar`]), and
//! both stages are scored with segmentation and tree metrics ([`eval`]).

pub mod commands;
pub mod error;
pub mod eval;
pub mod grammar;
pub mod io;
pub mod model;
pub mod ot;
pub mod synth;

pub use error::{Error, Result};
