use core::fmt;

/// Everything that can go wrong inside the model, the engine or the fits.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// A computation produced NaN or infinity.
    NonFinite(&'static str),
    /// The generator has more than one stationary direction.
    NonUniqueSteadyState { second_singular_value: f64 },
    /// An excited level has every outgoing rate equal to zero.
    NoDecayChannel(&'static str),
    /// A pulse or MW rotation was applied while the centre was still excited.
    Sequencing(&'static str),
    /// The pulse sequence has no segments.
    EmptySequence,
    /// An operation needed at least one trace interval.
    EmptyTrace,
    /// The requested window does not lie inside the trace span.
    WindowOutOfRange { start: f64, end: f64, span: (f64, f64) },
    /// Not enough points to run a fit or extraction.
    InsufficientData { needed: usize, got: usize },
    /// The data do not constrain the named quantity.
    Unidentifiable(&'static str),
    /// Extracted probabilities left the unit interval.
    Inconsistent(&'static str),
    /// No physical root of the inversion system was found.
    ModelInconsistent { best_residual: f64 },
    /// A linear system could not be solved.
    Singular,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, value, reason } => {
                write!(f, "invalid parameter {name} = {value}: {reason}")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::NonUniqueSteadyState { second_singular_value } => write!(
                f,
                "non-unique steady state (second smallest singular value {second_singular_value:e})"
            ),
            Error::NoDecayChannel(level) => {
                write!(f, "excited level has no decay channel: {level}")
            }
            Error::Sequencing(msg) => write!(f, "sequencing error: {msg}"),
            Error::EmptySequence => write!(f, "pulse sequence is empty"),
            Error::EmptyTrace => write!(f, "emission trace is empty"),
            Error::WindowOutOfRange { start, end, span } => write!(
                f,
                "window [{start}, {end}] ns outside trace span [{}, {}] ns",
                span.0, span.1
            ),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need {needed}, got {got}")
            }
            Error::Unidentifiable(what) => write!(f, "{what} unidentifiable from the data"),
            Error::Inconsistent(msg) => write!(f, "inconsistent inputs: {msg}"),
            Error::ModelInconsistent { best_residual } => {
                write!(f, "model inconsistent with inputs (best residual {best_residual:e})")
            }
            Error::Singular => write!(f, "singular linear system"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        });
    }
    if value < 0.0 {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be non-negative",
        });
    }
    Ok(())
}

/// Non-fatal conditions attached to a result.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "warning", rename_all = "snake_case"))]
pub enum Warning {
    /// Pulse spacing is less than five singlet lifetimes.
    ShortPulseSpacing { spacing_ns: f64, singlet_lifetime_ns: f64 },
    /// The two fitted lifetimes differ by less than a factor 1.2.
    IndistinguishableComponents { ratio: f64 },
    /// Recovery data decrease by more than the noise level somewhere.
    NonMonotonic,
    /// The delay span is shorter than twice the fitted time constant.
    ShortSpan { span: f64, time_constant: f64 },
    /// The fitted decay constant of a pulse series exceeds ten times the
    /// longest pulse index.
    RateUnidentifiable { c: f64 },
    /// More than a fifth of the Monte-Carlo draws had no physical solution.
    LowFeasibility { fraction: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ShortPulseSpacing {
                spacing_ns,
                singlet_lifetime_ns,
            } => write!(
                f,
                "pulse spacing {spacing_ns} ns is below 5x the singlet lifetime {singlet_lifetime_ns} ns"
            ),
            Warning::IndistinguishableComponents { ratio } => {
                write!(f, "lifetime ratio {ratio:.3} < 1.2: components indistinguishable")
            }
            Warning::NonMonotonic => write!(f, "recovery data are not monotonic beyond noise"),
            Warning::ShortSpan { span, time_constant } => write!(
                f,
                "delay span {span} is shorter than twice the time constant {time_constant}"
            ),
            Warning::RateUnidentifiable { c } => write!(f, "decay constant c = {c} unidentifiable"),
            Warning::LowFeasibility { fraction } => {
                write!(f, "only {:.1}% of draws feasible", 100.0 * fraction)
            }
        }
    }
}
