//! Harmonic-balance periodic orbits, pseudo-arclength backbone
//! continuation and a time-integration oracle for polynomial second-order
//! systems.

mod backbone;
mod hbm;
mod integrate;
mod manifold;
mod system;

pub use backbone::{
    backbone, BackboneCurve, BackboneOptions, BranchPoint, BranchStatus, Measure, StopReason,
    AMPLITUDE_SAMPLES,
};
pub use hbm::{
    gauss_newton, n_coeffs, solve_at_amplitude, solve_fixed_frequency, HarmonicSignal, Hbm,
    HbmOptions, SignalSamples, Solved,
};
pub use integrate::{integrate, Trajectory};
pub use manifold::{
    fs_manifold, manifold_distance, manifold_scan, map_backbone, ManifoldSample, QmMapping, ReducedMapping};
pub use system::{Kind, Partials, PolySystem, Term};
