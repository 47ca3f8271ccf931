use std::path::PathBuf;

use nvcycle_core::instrument::{convolve_irf, poisson_counts, sample_histogram, HistogramSettings, TcspcHistogram};
use nvcycle_core::kinetics::RateParameters;
use nvcycle_core::pulse::{
    preset_double_pulse, preset_power_dependence, preset_pulse_train, preset_rabi_lifetime, EmissionTrace,
};
use serde::Serialize;

use crate::config::{InstrumentSpec, PresetSpec, RunConfig};
use crate::error::CliError;
use crate::files::{histogram_csv, table_csv, trace_csv, Outputs};

/// Distinct, reproducible seed for the `index`-th noisy output of a run.
pub fn derived_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Resolved inputs as recorded in the manifest.
#[derive(Debug, Serialize)]
pub struct Resolved<'a> {
    pub config: RunConfig,
    pub rate_parameters: &'a RateParameters,
}

/// Picosecond-pulse decays rendered as TCSPC histograms. All histograms of
/// one run share a photon scale, fixed so that the first decay carries
/// `total_photons`; brightness differences between decays survive.
struct DecayRenderer<'a> {
    instrument: &'a InstrumentSpec,
    noiseless: bool,
    seed: u64,
    scale: Option<f64>,
}

impl DecayRenderer<'_> {
    fn render(&mut self, decay: &EmissionTrace, index: usize) -> Result<TcspcHistogram, CliError> {
        let lead = decay.with_dark_lead_in(self.instrument.lead_in_ns)?;
        let blurred = convolve_irf(&lead, self.instrument.irf_sigma_ns)?;
        let scale = *self.scale.get_or_insert(self.instrument.total_photons / decay.total());
        let settings = HistogramSettings {
            bin_width_ns: self.instrument.bin_width_ns,
            origin_ns: 0.0,
            total_photons: scale * decay.total(),
            background_per_bin: self.instrument.background_per_bin,
            noiseless: self.noiseless,
            seed: derived_seed(self.seed, index),
        };
        // The trace stops at the end of its window; drop bins the blurred
        // cut-off would reach so the histogram only shows the decay itself.
        let last = decay.end() - 4.0 * self.instrument.irf_sigma_ns - 0.5 * self.instrument.bin_width_ns;
        let h = sample_histogram(&blurred, &settings)?;
        Ok(h.window(f64::NEG_INFINITY, last))
    }
}

fn sum_histograms(hs: &[TcspcHistogram]) -> Option<TcspcHistogram> {
    let first = hs.first()?;
    if hs.iter().any(|h| h.centers() != first.centers()) {
        return None;
    }
    let counts = (0..first.len())
        .map(|i| hs.iter().map(|h| h.counts()[i]).sum())
        .collect();
    TcspcHistogram::new(first.bin_width(), first.centers().to_vec(), counts).ok()
}

/// Runs the configured preset and writes its CSV outputs and manifest into
/// `out`. Returns the manifest path.
pub fn simulate(config: &RunConfig, out: &std::path::Path) -> Result<PathBuf, CliError> {
    config.validate()?;
    let params = config.model.resolve()?;
    let seed = config.seed.unwrap_or(0);
    let mut outputs = Outputs::create(out)?;
    let mut renderer = DecayRenderer {
        instrument: &config.instrument,
        noiseless: config.noiseless,
        seed,
        scale: None,
    };

    match &config.preset {
        PresetSpec::Rabi { thetas_rad, settings } => {
            let points = preset_rabi_lifetime(&params, thetas_rad, settings)?;
            let mut hists = Vec::with_capacity(points.len());
            for (k, p) in points.iter().enumerate() {
                outputs.write(&format!("rabi_{k:03}_trace.csv"), &trace_csv(&p.decay))?;
                let h = renderer.render(&p.decay, k)?;
                outputs.write(&format!("rabi_{k:03}_histogram.csv"), &histogram_csv(&h))?;
                hists.push(h);
            }
            if let Some(sum) = sum_histograms(&hists) {
                outputs.write("rabi_sum_histogram.csv", &histogram_csv(&sum))?;
            }
            let rows = points.iter().map(|p| {
                vec![
                    p.theta,
                    p.before_pulse.p_gs().unwrap_or(f64::NAN),
                    p.after_pulse.p_es().unwrap_or(f64::NAN),
                    p.decay.total(),
                    p.readout_counts,
                ]
            });
            outputs.write(
                "rabi_summary.csv",
                &table_csv(&["theta_rad", "p_gs", "p_es", "decay_photons", "readout_photons"], rows),
            )?;
        }
        PresetSpec::DoublePulse {
            temperature_k,
            delays_ns,
            singlet_model,
            settings,
        } => {
            let run = preset_double_pulse(&params, singlet_model, *temperature_k, delays_ns, settings)?;
            let expected: Vec<f64> = run.points.iter().map(|p| p.counts).collect();
            let scale = config.instrument.total_photons / expected.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            let scaled: Vec<f64> = expected.iter().map(|c| c * scale).collect();
            let counts = if config.noiseless {
                scaled
            } else {
                poisson_counts(&scaled, derived_seed(seed, 0))
            };
            outputs.write(
                "recovery.csv",
                &table_csv(
                    &["delay_ns", "counts"],
                    delays_ns.iter().zip(&counts).map(|(d, c)| vec![*d, *c]),
                ),
            )?;
            outputs.write(
                "recovery_reference.csv",
                &table_csv(
                    &["singlet_lifetime_ns", "reference_counts"],
                    [vec![run.singlet_lifetime_ns, run.reference_counts * scale]],
                ),
            )?;
        }
        PresetSpec::PulseTrain {
            pulses,
            spacing_ns,
            mw_after_first,
            settings,
        } => {
            let run = preset_pulse_train(&params, *pulses, *spacing_ns, *mw_after_first, settings)?;
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
            let records: Vec<_> = std::iter::once(&run.reference).chain(&run.pulses).collect();
            for r in &records {
                let h = renderer.render(&r.decay, r.index)?;
                outputs.write(&format!("pulse_{:03}_histogram.csv", r.index), &histogram_csv(&h))?;
            }
            outputs.write(
                "pulse_train.csv",
                &table_csv(
                    &["pulse", "time_ns", "p_gs", "p_es"],
                    records
                        .iter()
                        .map(|r| vec![r.index as f64, r.time_ns, r.p_gs(), r.p_es()]),
                ),
            )?;
            outputs.write(
                "pulse_series.csv",
                &table_csv(
                    &["pulse", "p_es"],
                    run.pulses.iter().map(|r| vec![r.index as f64, r.p_es()]),
                ),
            )?;
        }
        PresetSpec::Power {
            pump_rates,
            mw,
            settings,
        } => {
            let traces = preset_power_dependence(&params, pump_rates, *mw, settings)?;
            for (k, t) in traces.iter().enumerate() {
                outputs.write(&format!("power_{k:02}_first.csv"), &trace_csv(&t.first))?;
                outputs.write(&format!("power_{k:02}_second.csv"), &trace_csv(&t.second))?;
            }
            outputs.write(
                "power_plateau.csv",
                &table_csv(
                    &["pump_rate_MHz", "plateau_per_ns"],
                    traces.iter().map(|t| vec![t.pump_rate, t.plateau]),
                ),
            )?;
        }
    }

    let mut recorded = config.clone();
    recorded.output_dir = None;
    recorded.seed = Some(seed);
    outputs.finish(
        "simulate",
        &Resolved {
            config: recorded,
            rate_parameters: &params,
        },
    )
}
