//! Ligand–receptor reaction–diffusion on a bulk domain coupled to its
//! membrane, solved on a fixed reference strip through an ALE pullback.
//!
//! The bulk unknown `u` lives on `[0, Px) x [0, H]` (periodic in `x`), the
//! surface unknowns `w` (free receptors) and `z` (complexes) live on the
//! membrane `y = 0`. See [`timestepper::run`] for the entry point.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretization;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod io;
pub mod params;
pub mod timestepper;
pub mod verify;

pub use discretization::{Grid, SimulationState};
pub use error::{Error, Result};
pub use functionals::{DiagnosticsRow, EquilibriumState, MassPair};
pub use geometry::{MotionKind, MotionPreset};
pub use io::config::{parse_config, FieldSpec, InitialData, RunConfig};
pub use params::{DimensionalParameters, Nondimensional, SystemParameters};
pub use timestepper::Trajectory;
