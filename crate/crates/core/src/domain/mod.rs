//! Simulation box, logical-rank brick decomposition and ghost communication.
//!
//! Ranks live in one process. Communication is a two-phase pack/unpack over
//! per-rank-pair buffers so each phase can run concurrently across ranks.

mod comm;
mod decomp;
pub mod geometry;
mod store;

pub use comm::{check_ghost_cutoff, exchange_ghosts, forward_comm, reverse_comm, Decomposition};
pub use decomp::{decompose, Brick, RankSet};
pub use geometry::{minimum_image, SimBox, Vec3};
pub use store::{AtomRecord, AtomStore, GhostLink};
