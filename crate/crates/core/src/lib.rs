//! Contact Hamilton-Jacobi equations `u_t + H(x, Du, u) = 0` on 1-D and 2-D
//! grids, solved through discrete Lax-Oleinik semigroups.
//!
//! The building blocks are [`hamiltonian`] (specs and their derivatives),
//! [`transform`] (discrete Legendre transforms), [`semigroup`] (time stepping,
//! the space-time fixed point and the implicit action), [`bracket`] (the
//! Jacobi bracket scan), [`harness`] (commutation, reparametrisation,
//! scaling and multi-time experiments) and [`oracle`] (a brute-force curve
//! enumerator used as ground truth).

pub mod bracket;
pub mod catalog;
mod error;
pub mod format;
pub mod grid;
pub mod hamiltonian;
pub mod harness;
pub mod initial;
pub mod oracle;
pub mod semigroup;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{Boundary, GridFunction, GridSpec, BIG};
pub use hamiltonian::HamiltonianSpec;
pub use transform::VelocityGrid;
