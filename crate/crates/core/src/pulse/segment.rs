use alloc::vec::Vec;

use crate::error::{require_non_negative, Error, Result};
use crate::kinetics::RateParameters;

/// One step of an experiment protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum Segment {
    /// Instantaneous picosecond excitation with probability `alpha`.
    PsPulse { alpha: f64 },
    /// Resonant MW rotation by `theta` radians on the (m0, sym) pair.
    MwRotation {
        #[cfg_attr(feature = "serde", serde(rename = "theta_rad"))]
        theta: f64,
    },
    /// Continuous optical pumping.
    Cw {
        #[cfg_attr(feature = "serde", serde(rename = "pump_rate_MHz"))]
        pump_rate: f64,
        duration_ns: f64,
    },
    /// Free evolution in the dark.
    Delay { duration_ns: f64 },
}

impl Segment {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Segment::PsPulse { alpha } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::InvalidParameter {
                        name: "alpha",
                        value: alpha,
                        reason: "excitation probability must lie in [0, 1]",
                    });
                }
            }
            Segment::MwRotation { theta } => {
                if !theta.is_finite() {
                    return Err(Error::NonFinite("theta"));
                }
            }
            Segment::Cw { pump_rate, duration_ns } => {
                require_non_negative("pump_rate", pump_rate)?;
                require_non_negative("duration", duration_ns)?;
            }
            Segment::Delay { duration_ns } => require_non_negative("duration", duration_ns)?,
        }
        Ok(())
    }

    pub fn duration_ns(&self) -> f64 {
        match *self {
            Segment::Cw { duration_ns, .. } | Segment::Delay { duration_ns } => duration_ns,
            _ => 0.0,
        }
    }
}

/// Ordered segments run against one rate set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PulseSequence {
    pub params: RateParameters,
    pub segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn new(params: RateParameters, segments: Vec<Segment>) -> Result<Self> {
        let seq = Self { params, segments };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.params.validate()?;
        self.segments.iter().try_for_each(Segment::validate)
    }

    pub fn duration_ns(&self) -> f64 {
        self.segments.iter().map(Segment::duration_ns).sum()
    }
}
