//! Reduced-order models of geometrically nonlinear structures: normal form,
//! quadratic manifolds from modal derivatives, and harmonic-balance
//! reference solutions.

pub mod continuation;
pub mod eigen;
pub mod error;
pub mod models;
pub mod modal_derivatives;
pub mod normal_form;
pub mod rom;
pub mod tensors;

pub use eigen::{solve_modes, ModalModel};
pub use error::{Result, RomError};
pub use tensors::{CubicTensor, QuadTensor, StructuralModel};
