//! Trajectory planning with symmetry breaking on SO(3) and the sphere.
//!
//! The crate covers the Lie algebra and group operations on `so(3)`/`SO(3)`,
//! reduced Euler-Poincaré dynamics with an advected parameter, horizontal
//! dynamics on `S² = SO(3)/SO(2)`, obstacle-avoidance potentials, a
//! geometric RK4 integrator with shooting for boundary value problems, and a
//! decoupled solver for manipulators with revolute and spherical joints.

// negated comparisons in this crate are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod group;
pub mod homogeneous;
pub mod integrate;
pub mod manipulator;
pub mod potentials;
pub mod reduction;
pub mod shooting;

pub use algebra::{AlgebraVector, InertiaMetric, Momentum};
pub use error::{Error, Result};
pub use group::RotationMatrix;
pub use homogeneous::{HomogeneousSystem, ReductiveSplit, SpherePoint};
pub use integrate::{IntegratorConfig, Trajectory};
pub use nalgebra;
pub use potentials::{AvoidanceParams, ExtendedPotential};
pub use reduction::{AdvectedParameter, ReducedField, ReducedState, SymmetryBreakingSystem};
pub use shooting::{BoundaryTarget, ShootingConfig, ShootingResult};
