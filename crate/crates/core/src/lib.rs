//! Performance-portable short-range molecular dynamics kernels.
//!
//! The crate mirrors the structure of a production MD code: dual-space
//! arrays with explicit synchronization, a brick decomposition with ghost
//! atoms, cell-list neighbor lists, and interchangeable force kernels
//! (Lennard-Jones, charge equilibration, bond-order torsions and SNAP),
//! driven by a small input-script interpreter.

pub mod domain;
pub mod driver;
pub mod error;
pub mod lattice;
pub mod md;
pub mod memspace;
pub mod neighbor;
pub mod pair;
pub mod qeq;
pub mod snap;
pub mod torsion;

pub use error::{Error, Result};
