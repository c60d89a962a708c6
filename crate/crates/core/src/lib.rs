//! Stabilized finite element solver for double-diffusive viscous fingering.
//!
//! The crate couples a quasistatic mixed Darcy flow solve (Q9 velocity, Q4
//! pressure) with two transient advection-diffusion-reaction equations for
//! solute concentration and temperature. The scalar equations can be
//! discretized with plain Galerkin, SUPG, or SUPG augmented by isotropic
//! and/or crosswind SOLD artificial diffusion. Diagnostics quantify bound
//! violations and the length of the `c = 0.5` front.
//!
//! Everything here is pure computation on `alloc` collections. File formats,
//! configuration parsing and the command line live in the `fingering` crate.
#![no_std]

extern crate alloc;

pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod flow;
pub mod linalg;
pub mod mesh;
pub mod transport;
pub mod verification;

pub use coupling::{Simulation, SimulationConfig, SimulationState};
pub use diagnostics::{BoundsReport, DiagnosticsSeries, StepDiagnostics};
pub use error::{Error, Result};
pub use flow::{FlowProblem, FlowSolution, ViscosityLaw, ViscosityModel};
pub use mesh::{StructuredQuadMesh, Subdomain};
pub use transport::{ScalarField, StabilizationScheme, TransportProblem};
