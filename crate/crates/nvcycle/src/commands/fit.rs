use std::path::{Path, PathBuf};

use nvcycle_core::analysis::{
    fit_biexponential, fit_monoexponential, fit_polarization_series, fit_recovery, fit_temperature_model, FitResult,
};
use serde::Serialize;

use crate::config::{FitKind, FitSpec};
use crate::error::CliError;
use crate::files::{read_curve, read_histogram, Outputs};

/// Column headers each curve fit expects.
pub fn expected_header(kind: FitKind) -> Option<[&'static str; 2]> {
    match kind {
        FitKind::Biexp | FitKind::Mono => None,
        FitKind::Recovery => Some(["delay_ns", "counts"]),
        FitKind::Temperature => Some(["temperature_K", "lifetime_ns"]),
        FitKind::Series => Some(["pulse", "p_es"]),
    }
}

fn kind_name(kind: FitKind) -> &'static str {
    match kind {
        FitKind::Biexp => "biexp",
        FitKind::Mono => "mono",
        FitKind::Recovery => "recovery",
        FitKind::Temperature => "temperature",
        FitKind::Series => "series",
    }
}

/// Reads `input`, runs the fit and returns its result.
pub fn run_fit(spec: &FitSpec, input: &Path) -> Result<FitResult, CliError> {
    let invalid = |e: nvcycle_core::Error| CliError::Usage(format!("{}: {e}", input.display()));
    match spec.kind {
        FitKind::Biexp => fit_biexponential(&read_histogram(input)?, &spec.decay).map_err(invalid),
        FitKind::Mono => fit_monoexponential(&read_histogram(input)?, &spec.decay).map_err(invalid),
        kind => {
            let curve = read_curve(input)?;
            let want = expected_header(kind).expect("curve fit");
            if [curve.x_name.as_str(), curve.y_name.as_str()] != want {
                return Err(CliError::Usage(format!(
                    "{}: {} fit expects header '{}'",
                    input.display(),
                    kind_name(kind),
                    want.join(",")
                )));
            }
            match kind {
                FitKind::Recovery => fit_recovery(&curve.x, &curve.y),
                FitKind::Temperature => fit_temperature_model(&curve.x, &curve.y),
                _ => fit_polarization_series(&curve.x, &curve.y),
            }
            .map_err(invalid)
        }
    }
}

#[derive(Serialize)]
struct FitInputs<'a> {
    input: &'a Path,
    fit: &'a FitSpec,
}

/// Writes `fit_<kind>.json` and a manifest. A non-converged fit is still
/// written, then reported as an error.
pub fn fit(spec: &FitSpec, input: &Path, out: &Path) -> Result<(PathBuf, FitResult), CliError> {
    let result = run_fit(spec, input)?;
    let mut outputs = Outputs::create(out)?;
    let path = outputs.write_json(&format!("fit_{}.json", kind_name(spec.kind)), &result)?;
    outputs.finish("fit", &FitInputs { input, fit: spec })?;
    if !result.converged {
        return Err(CliError::NonConvergence {
            iterations: result.iterations,
        });
    }
    Ok((path, result))
}
