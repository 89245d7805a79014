//! Resonance-fluorescence spectra of coherent backscattering by two
//! laser-driven atoms with a J=0 -> J=1 transition.
//!
//! The two-atom equations of motion are linear in the 255 expectation values
//! of the operator basis. The photon-exchange coupling is treated to second
//! order; averaging over the atomic configuration leaves the ladder
//! (background) and crossed (interference) contributions.

pub mod averaging;
pub mod basis;
pub mod error;
pub mod liouvillian;
pub mod model;
pub mod oracles;
pub mod resolvent;
pub mod spectrum;
pub mod steady_state;

pub use basis::{OperatorBasis, PairOperator, SingleAtomOperator, C64};
pub use error::{CbsError, Result};
pub use liouvillian::{assemble, assemble_with, Channel, DriveConfig, GeneratorSet, Geometry};
pub use model::PointSolver;
