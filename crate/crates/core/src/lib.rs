//! Constrained discrete gradient flows for bending problems of thin rods and
//! plates.
//!
//! Every model advances its state by solving a linear (or, for Föppl–von
//! Kármán, a small nonlinear) problem for the update `d_t`, restricted to the
//! tangent space of the linearized nodal constraints at the previous iterate.
//! The nodal constraints are enforced through the null-space method in
//! [`kkt`]; no projection onto the constraint set is ever performed, so the
//! accumulated constraint defect is exactly `τ² Σ |d_t|²` at every node.

pub mod error;
pub mod exec;
pub mod fem;
pub mod flow;
pub mod fvk;
pub mod harmonic_map;
pub mod kkt;
pub mod mesh;
pub mod plate;
pub mod rod;
pub mod scenarios;
pub mod sparse;
pub mod tangent_point;

pub use error::{Error, Result};
pub use exec::Exec;
