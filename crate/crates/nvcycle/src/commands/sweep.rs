use std::path::{Path, PathBuf};

use nvcycle_core::analysis::fit_recovery;
use nvcycle_core::instrument::poisson_counts;
use nvcycle_core::pulse::{preset_double_pulse, preset_power_dependence, preset_rabi_lifetime};
use serde::Serialize;

use super::simulate::derived_seed;
use crate::config::{PresetName, PresetSpec, RunConfig};
use crate::error::CliError;
use crate::files::{table_csv, Outputs};

/// Parameter swept by `nvcycle sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Sample temperature (K); double-pulse recovery plus fit.
    Temperature,
    /// Excitation rate (MHz); CW pulse pairs.
    PumpRate,
    /// MW rotation angle (rad); Rabi-lifetime protocol.
    Theta,
}

impl SweepAxis {
    fn preset(self) -> PresetName {
        match self {
            SweepAxis::Temperature => PresetName::DoublePulse,
            SweepAxis::PumpRate => PresetName::Power,
            SweepAxis::Theta => PresetName::Rabi,
        }
    }
}

#[derive(Serialize)]
struct SweepInputs<'a> {
    axis: SweepAxis,
    values: &'a [f64],
    config: RunConfig,
}

/// Row of the long-format sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub observable: &'static str,
    pub value: f64,
}

fn check_values(values: &[f64]) -> Result<(), CliError> {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("--values needs at least two finite numbers".into()));
    }
    Ok(())
}

/// Runs the axis' preset at every value. The preset settings are taken from
/// `config` when it already names the matching preset, defaults otherwise.
pub fn sweep(
    config: &RunConfig,
    axis: SweepAxis,
    values: &[f64],
    out: &Path,
) -> Result<(PathBuf, Vec<SweepRow>), CliError> {
    check_values(values)?;
    config.validate()?;
    let seed = config.seed.unwrap_or(0);
    let params = config.model.resolve()?;
    let preset = if config.preset.name() == axis.preset().with_defaults().name() {
        config.preset.clone()
    } else {
        axis.preset().with_defaults()
    };
    let mut rows = Vec::new();
    let mut outputs = Outputs::create(out)?;
    let mut push = |x: f64, observable: &'static str, value: f64| {
        rows.push(SweepRow {
            axis_value: x,
            observable,
            value,
        })
    };

    match &preset {
        PresetSpec::DoublePulse {
            delays_ns,
            singlet_model,
            settings,
            ..
        } => {
            let mut lifetimes = Vec::with_capacity(values.len());
            for (k, &t) in values.iter().enumerate() {
                let run = preset_double_pulse(&params, singlet_model, t, delays_ns, settings)?;
                let expected: Vec<f64> = run.points.iter().map(|p| p.counts).collect();
                let scale = config.instrument.total_photons / expected.iter().sum::<f64>().max(f64::MIN_POSITIVE);
                let scaled: Vec<f64> = expected.iter().map(|c| c * scale).collect();
                let counts = if config.noiseless {
                    scaled
                } else {
                    poisson_counts(&scaled, derived_seed(seed, k))
                };
                let fit = fit_recovery(delays_ns, &counts).map_err(|e| CliError::Usage(format!("T = {t} K: {e}")))?;
                if !fit.converged {
                    return Err(CliError::NonConvergence {
                        iterations: fit.iterations,
                    });
                }
                let tau = fit.value("tau_singlet_ns").unwrap_or(f64::NAN);
                push(t, "singlet_lifetime_ns", run.singlet_lifetime_ns);
                push(t, "recovery_tau_ns", tau);
                lifetimes.push(vec![t, tau]);
            }
            outputs.write(
                "singlet_lifetimes.csv",
                &table_csv(&["temperature_K", "lifetime_ns"], lifetimes),
            )?;
        }
        PresetSpec::Power { mw, settings, .. } => {
            for t in preset_power_dependence(&params, values, *mw, settings)? {
                push(t.pump_rate, "plateau_per_ns", t.plateau);
                push(t.pump_rate, "first_pulse_photons", t.first.total());
                push(t.pump_rate, "second_pulse_photons", t.second.total());
            }
        }
        PresetSpec::Rabi { settings, .. } => {
            for p in preset_rabi_lifetime(&params, values, settings)? {
                push(p.theta, "p_es", p.after_pulse.p_es().unwrap_or(f64::NAN));
                push(p.theta, "readout_photons", p.readout_counts);
            }
        }
        PresetSpec::PulseTrain { .. } => unreachable!("no axis sweeps the pulse train"),
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["axis_value", "observable", "value"])
        .expect("in-memory write");
    for r in &rows {
        csv.write_record([r.axis_value.to_string(), r.observable.to_string(), r.value.to_string()])
            .expect("in-memory write");
    }
    outputs.write("sweep.csv", &csv.into_inner().expect("in-memory flush"))?;
    let mut recorded = config.clone();
    recorded.preset = preset;
    recorded.output_dir = None;
    recorded.seed = Some(seed);
    let manifest = outputs.finish(
        "sweep",
        &SweepInputs {
            axis,
            values,
            config: recorded,
        },
    )?;
    Ok((manifest, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_are_checked() {
        assert!(check_values(&[1.0]).is_err());
        assert!(check_values(&[1.0, f64::NAN]).is_err());
        assert!(check_values(&[1.0, 2.0]).is_ok());
    }
}
