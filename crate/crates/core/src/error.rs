//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants carry
//! enough context (offending value, mode, constraint) to diagnose a failure
//! without re-running the computation.

use thiserror::Error;

/// Errors raised by validation, spectral, and experiment routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A system matrix fails the symmetry tolerance.
    #[error("matrix {name} is not symmetric: |{name} - {name}^T| = {defect:.3e} exceeds {tol:.3e}")]
    NonSymmetric { name: &'static str, defect: f64, tol: f64 },

    /// The damping matrix has nonzero entries outside its trailing block.
    #[error("damping matrix has entries outside the trailing {n2}x{n2} block (max |entry| = {defect:.3e})")]
    BadBlockStructure { n2: usize, defect: f64 },

    /// The trailing block of the damping matrix is not positive definite.
    #[error("damping block is not positive definite: min eigenvalue = {min_eigenvalue:.6e}")]
    NotDissipative { min_eigenvalue: f64 },

    /// Matrix powers overflowed while assembling the controllability matrix.
    #[error("numeric overflow assembling matrix powers (entry magnitude {magnitude:.3e})")]
    NumericOverflow { magnitude: f64 },

    /// A Fourier multiplier evaluated to NaN or infinity at a discrete mode.
    #[error("symbol is not finite at frequency {xi:.6e}")]
    NonFiniteSymbol { xi: f64 },

    /// Two grid functions live on different grids.
    #[error("grid mismatch: {context}")]
    GridMismatch { context: &'static str },

    /// A band localization is identically zero where a nonzero one is required.
    #[error("localization to band j = {j} is identically zero")]
    ZeroLocalization { j: i32 },

    /// A parameter that must be strictly positive is not.
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    /// Regularity indices supplied in the wrong order.
    #[error("parameter order violated: require s < s', got s = {s}, s' = {s_prime}")]
    ParameterOrder { s: f64, s_prime: f64 },

    /// A norm that must be nonzero vanished.
    #[error("norm is zero: {context}")]
    ZeroNorm { context: &'static str },

    /// Explicit time step too large for the stiff relaxation scale.
    #[error("stiffness guard: dt = {dt:.3e} exceeds eps^2/4 = {limit:.3e}")]
    StiffnessGuard { dt: f64, limit: f64 },

    /// A time stepper produced NaN or infinity.
    #[error("non-finite value detected at t = {t:.6e}")]
    NonFinite { t: f64 },

    /// The Kalman rank condition fails, so no hypocoercivity certificate exists.
    #[error("Kalman rank {rank} < {n}: norm equivalence unavailable")]
    KalmanFails { rank: usize, n: usize },

    /// Certificate search underflowed before all constraints held.
    #[error("no convergence: base epsilon underflowed before certificates held (failing constraint: {constraint})")]
    NoConvergence { constraint: &'static str },

    /// Too few samples for a fit or a sweep.
    #[error("insufficient samples: need at least {needed}, got {got} ({context})")]
    InsufficientSamples { needed: usize, got: usize, context: &'static str },

    /// A fitted norm sequence contains nonpositive values.
    #[error("nonpositive norm at t = {t:.6e}: cannot take logarithms")]
    NonPositiveNorm { t: f64 },

    /// Initial-data support does not fit inside the grid window.
    #[error("support overflow: data support [{lo}, {hi}] does not fit in window [{window_lo}, {window_hi}] with margin")]
    SupportOverflow { lo: f64, hi: f64, window_lo: f64, window_hi: f64 },

    /// The requested Sobolev regularity is not attained by the data.
    #[error("regularity failure: H^{s_prime} quadrature did not converge (last increment {increment:.3e})")]
    RegularityFail { s_prime: f64, increment: f64 },

    /// The time-sample density self-check failed for an L^1 time integral.
    #[error("quadrature unresolved: halving the sample density changed {column} by {rel_change:.3e} (limit {limit:.3e})")]
    QuadratureUnresolved { column: &'static str, rel_change: f64, limit: f64 },

    /// An initial-data family name was not recognized.
    #[error("unknown initial data set '{name}' (expected decay_data or relax_data)")]
    UnknownDataSet { name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
