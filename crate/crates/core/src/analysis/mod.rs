//! Curve fitting and parameter extraction.

mod curves;
mod decay;
mod extract;
mod lm;
mod uncertainty;

use alloc::vec::Vec;

use crate::error::Warning;

pub use curves::{fit_polarization_series, fit_recovery, fit_temperature_model};
pub use decay::{
    fit_biexponential, fit_monoexponential, polarization_from_amplitudes, DecayFitOptions, MIN_SIGNAL_BINS,
};
pub use extract::{extract_flip_probabilities, extract_isc_probabilities, IscProbabilities};
pub use uncertainty::{uncertainty_propagation, ExtractionInputs, ExtractionReport, FlipSource, Measured, MIN_DRAWS};

/// One fitted parameter.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitParameter {
    pub name: alloc::string::String,
    pub value: f64,
    /// 1σ from the curvature of the objective; infinite when the data do
    /// not constrain the parameter.
    pub sigma: f64,
}

/// Outcome of a fit. When `converged` is false the estimates are the last
/// iterate and should not be relied on.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// Square root of the weighted sum of squared residuals.
    pub residual_norm: f64,
    /// Weighted sum of squared residuals.
    pub chi2: f64,
    pub points: usize,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Abscissa of the first point used (fit start for decays).
    pub window_start: f64,
    pub warnings: Vec<Warning>,
}

impl FitResult {
    pub(crate) fn new(
        names: &[&str],
        values: Vec<f64>,
        sigmas: Vec<f64>,
        sol: &lm::Solution,
        points: usize,
        window_start: f64,
        warnings: Vec<Warning>,
    ) -> Self {
        let parameters = names
            .iter()
            .zip(values)
            .zip(sigmas)
            .map(|((name, value), sigma)| FitParameter {
                name: (*name).into(),
                value,
                sigma: if sigma.is_nan() { f64::INFINITY } else { sigma.abs() },
            })
            .collect();
        Self {
            parameters,
            residual_norm: crate::math::sqrt(sol.chi2),
            chi2: sol.chi2,
            points,
            dof: points.saturating_sub(sol.params.len()),
            iterations: sol.iterations,
            converged: sol.converged,
            window_start,
            warnings,
        }
    }

    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameter(name).map(|p| p.value)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.parameter(name).map(|p| p.sigma)
    }
}
