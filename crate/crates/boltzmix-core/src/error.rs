//! Error type shared by the library.

use core::fmt;

/// Errors raised by construction and evaluation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A physical parameter that must be strictly positive was not.
    NonPositiveParameter(&'static str),
    /// Species/grid/cell shapes of two objects do not match.
    ShapeMismatch(&'static str),
    /// Invalid or inconsistent configuration value.
    InvalidConfig(&'static str),
    /// Degenerate geometric input (e.g. coincident velocities for a
    /// Carleman set).
    DegenerateSet(&'static str),
    /// A sphere set was requested for equal masses (or vice versa).
    KindMismatch(&'static str),
    /// `kernel_k` evaluated inside the near-diagonal singular band.
    SingularBand,
    /// Quadrature residual above tolerance, typically a resolution problem.
    ResolutionExceeded(&'static str),
    /// The input has a component in the kernel of the operator and must be
    /// projected first.
    KernelComponent,
    /// An iteration failed to converge within its configured budget.
    NoConvergence(&'static str),
    /// Trajectory norm grew beyond the configured blow-up factor.
    BlowUp,
    /// No moment threshold below the scan bound.
    NoThreshold,
    /// Matrix assembly produced an asymmetry above tolerance.
    AsymmetricAssembly,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::NonPositiveParameter(what) => {
                write!(f, "parameter must be strictly positive: {what}")
            }
            CoreError::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            CoreError::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            CoreError::DegenerateSet(what) => write!(f, "degenerate set: {what}"),
            CoreError::KindMismatch(what) => write!(f, "set kind mismatch: {what}"),
            CoreError::SingularBand => write!(f, "evaluation inside the singular band"),
            CoreError::ResolutionExceeded(what) => {
                write!(f, "quadrature residual above tolerance: {what}")
            }
            CoreError::KernelComponent => {
                write!(f, "input has a kernel component; project it out first")
            }
            CoreError::NoConvergence(what) => write!(f, "iteration did not converge: {what}"),
            CoreError::BlowUp => write!(f, "trajectory norm blow-up detected"),
            CoreError::NoThreshold => write!(f, "no moment threshold found below the scan bound"),
            CoreError::AsymmetricAssembly => {
                write!(f, "assembled operator asymmetric beyond tolerance")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}
