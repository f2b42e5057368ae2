//! Mixed finite element solver for coupled Brinkman-Forchheimer / Darcy flow.
//!
//! Velocities are Bernardi-Raugel in the Brinkman region and lowest-order
//! Raviart-Thomas in the Darcy region, pressures are piecewise constant, and
//! normal-velocity continuity across the interface is enforced weakly with a
//! continuous piecewise-linear multiplier on the doubled interface partition.
//! The nonlinear Forchheimer term is handled by Newton's method.

// NaN-rejecting `!(x > 0.0)` checks and index loops over small fixed blocks are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod elements;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;
pub mod verification;
pub mod vtk;
