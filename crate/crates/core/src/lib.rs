//! Subsonic–sonic potential flow in a convergent approximate nozzle.
//!
//! The nozzle is the strip `(0,1) × S¹` carrying the metric
//! `dx² + n(x)² dy²`. This crate provides:
//!
//! - [`gasdyn`]: Bernoulli closure, critical data and the entry-speed root.
//! - [`nozzle`]: the width profile `n(x)` and its convexity/monotonicity checks.
//! - [`symmetric`]: the exact y-independent subsonic–sonic flow.
//! - [`grid`]: periodic strip grid, scalar fields and finite-difference stencils.
//! - [`banded`]: banded LU with partial pivoting used by the Newton solver.
//! - [`pde2d`]: discrete full potential equation, Bernoulli boundary rows and
//!   the damped Newton / sonic-regularization continuation solver.
//! - [`linop`]: linearized operator for `ψ = φ_b − φ` and its sign conditions.
//! - [`hopf`]: boundary flattening, Hopf condition, barrier construction and
//!   boundary-derivative checks for degenerate elliptic operators.

pub mod banded;
pub mod error;
pub mod gasdyn;
pub mod grid;
pub mod hopf;
pub mod linop;
pub mod nozzle;
pub mod pde2d;
pub mod roots;
pub mod symmetric;

pub use error::{FlowError, Result};
pub use gasdyn::{CriticalData, GasModel};
pub use grid::{ScalarField, StripGrid};
pub use nozzle::NozzleProfile;
pub use symmetric::SymmetricFlow;
