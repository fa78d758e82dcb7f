use core::fmt;

/// Failure modes shared across the model, estimator, controllers and simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Error {
    /// Parameter record or argument outside its documented domain.
    InvalidInput(&'static str),
    /// The I-V residual kept one sign over the whole (widened) search interval.
    NoBracket { voltage: f64 },
    /// Operating point is not on the model curve for the given environment.
    OffCurve { residual: f64 },
    /// Newton-Raphson Jacobian is (numerically) rank deficient.
    SingularJacobian { det: f64 },
    /// Iteration cap hit before the tolerance was met.
    NoConvergence { iterations: usize },
    /// Boost steady state has no real solution or needs a duty outside (0, 1).
    InfeasibleOperatingPoint,
    /// Reference generation produced a negative discriminant or non-physical state.
    InfeasibleReferences(&'static str),
    /// Back-stepping duty denominator fell below the guard threshold.
    DegenerateDenominator { channel: u8, value: f64 },
    /// Integrated state went NaN/Inf.
    NonFinite { time: f64 },
    /// Signal never stays inside the requested band.
    NeverSettles,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
            Error::NoBracket { voltage } => {
                write!(f, "I-V residual does not change sign at v = {voltage} V")
            }
            Error::OffCurve { residual } => {
                write!(f, "operating point is off the model curve (residual {residual:e} A)")
            }
            Error::SingularJacobian { det } => write!(f, "singular Jacobian (det = {det:e})"),
            Error::NoConvergence { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::InfeasibleOperatingPoint => write!(f, "infeasible converter operating point"),
            Error::InfeasibleReferences(why) => write!(f, "infeasible references: {why}"),
            Error::DegenerateDenominator { channel, value } => {
                write!(f, "duty {channel} denominator degenerate ({value:e})")
            }
            Error::NonFinite { time } => write!(f, "non-finite state at t = {time} s"),
            Error::NeverSettles => write!(f, "signal never settles inside the band"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
