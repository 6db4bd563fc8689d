//! Dynamics of a spring-hinge click mechanism.
//!
//! The crate covers the mechanics of the restoring field, equilibria and
//! their bifurcations, time integration, exact free vibration, a cubic
//! harmonic-balance approximation and Melnikov thresholds for homoclinic
//! tangling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod equilibria;
pub mod error;
pub mod freevib;
pub mod hbm;
pub mod melnikov;
pub mod model;
pub mod odeint;
pub mod quad;
pub mod roots;

pub use equilibria::{Equilibrium, EquilibriumKind, RegionLabel};
pub use error::{Error, Result};
pub use model::{Params, PhysicalParams, State};
pub use odeint::{IntegratorSpec, Method, Trajectory};
