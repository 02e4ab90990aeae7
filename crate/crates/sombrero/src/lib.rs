//! Spectral split-operator simulator for a harmonically trapped,
//! spin-orbit-coupled two-component condensate whose lower adiabatic
//! surface is a sombrero in momentum space.
//!
//! The crate is organized around six layers:
//!
//! * [`grid`] — the discretized 2D domain and the unitary position ↔
//!   momentum transform, plus quadrature for expectation values;
//! * [`model`] — physical parameters, initial Gaussian states, adiabatic
//!   surfaces, gauge-field formulas and the closed-form kinetic + spin-orbit
//!   propagation factor;
//! * [`propagate`] — the split-operator time steppers (full spinor model,
//!   single-surface control, free time-of-flight) with run monitors, and
//!   [`dense`] — a brute-force dense propagator used as a verification
//!   oracle on small grids;
//! * [`analysis`] — reduced spinor density matrix, non-cyclic geometric
//!   phase, Bloch-sphere solid angles, phonon numbers, momentum
//!   distributions and node/antinode contrast;
//! * [`scenario`] — canned experiment runners producing result bundles;
//! * [`config`] / [`io`] — config parsing and the on-disk formats.
//!
//! Hot loops fan out over rayon when the `parallel` feature (default) is
//! enabled; disabling it yields a fully sequential build with identical
//! results.

pub mod analysis;
pub mod config;
pub mod dense;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod mat2;
pub mod model;
pub mod par;
pub mod propagate;
pub mod scenario;

pub use error::{Error, Result};
pub use grid::{GridSpec, Observable, Representation, SpinorField};
pub use model::{Branch, GaussianSpec, ModelParams, ScatteringMatrix};
pub use propagate::{MonitorConfig, NonlinearityUpdate, RunState, SplitKind, StepScheme, Stepper};
