//! Explicit stencil PDE updates evaluated by sampling shallow quantum
//! micro-kernels on an exact statevector simulator.
//!
//! The crate is layered bottom-up:
//!
//! - [`statevector`]: RY / X / multi-controlled RY circuits, exact amplitudes,
//!   seeded shot sampling and logical depth.
//! - [`noise`]: 2x2 readout confusion matrices, corruption, calibration and
//!   inverse-matrix mitigation.
//! - [`kernels`]: Bernoulli, branching, signed-mixture, row and coin-sum
//!   micro-kernels plus in-circuit fusion.
//! - [`pde`]: grids, Heat and Burgers stencil weights, CFL handling, the
//!   classical oracle step and the sampled step.
//! - [`runtime`]: launch/fusion cost model, job execution and telemetry.
//! - [`harness`]: run configuration, experiment drivers and CSV/JSON output.
//!
//! Qubit 0 is the least-significant bit of a basis-state index. Bitstrings
//! are printed most-significant first.

pub mod error;
pub mod harness;
pub mod kernels;
pub mod noise;
pub mod pde;
pub mod rng;
pub mod runtime;
pub mod statevector;

pub use error::{Error, Result};
pub use kernels::{
    BranchValues, KernelKind, KernelResult, NormWindow, ShotPlan, SignedTerm, StencilWeights,
};
pub use noise::ConfusionMatrix;
pub use pde::{Field, Grid1D};
pub use rng::{ShotSampler, StreamKey};
pub use statevector::{Circuit, Control, Gate, Histogram, Polarity, StateVector};
