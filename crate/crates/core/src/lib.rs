//! Semi-discrete spectral toolkit for partially dissipative hyperbolic
//! systems on 1-D periodic lattices.
//!
//! The crate provides, in layers:
//!
//! - [`grid`]: uniform lattices, measure-weighted discrete Fourier analysis,
//!   central/one-sided difference operators, Fourier multipliers, Sobolev
//!   norms, band-limiting truncation, and discrete convolution.
//! - [`lp`]: the Littlewood-Paley decomposition adapted to the discrete
//!   symbol `|sin(xi h)|/h`, Besov norms, low/high frequency splitting, and
//!   Bernstein/embedding checkers.
//! - [`system`]: validation of partially dissipative pairs `(A, B)` and the
//!   Kalman rank condition.
//! - [`solver`]: exact per-mode spectral propagation of `d/dt U + A D_h U =
//!   -B U`, the relaxed Euler and discrete heat systems, an independent RK4
//!   stepper, and the scheme-stability analyzer.
//! - [`analysis`]: hypocoercivity functionals with certified constants,
//!   decay-rate fits, experiment initial data, and relaxation error records.
//!
//! All computations are deterministic: fixed seeds, order-independent
//! reductions, and exact spectral propagators.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod lp;
pub mod quad;
pub mod solver;
pub mod system;

pub use analysis::{
    ConvergenceOrders, CorrectorConstants, DecayRecord, InitialDataSet, LineFit,
    RelaxationErrorRecord, TransformTable,
};
pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, SpectralFunction};
pub use lp::{BandGeometry, PartitionOfUnity};
pub use solver::{PropagatorCache, Scheme, StabilityReport, VectorGridFunction};
pub use system::{KalmanCertificate, SystemSpec};
