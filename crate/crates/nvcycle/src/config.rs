//! Run configuration: strict JSON with unit-suffixed keys.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nvcycle_core::analysis::{extract_isc_probabilities, DecayFitOptions};
use nvcycle_core::kinetics::{RateParameters, SingletTemperatureModel};
use nvcycle_core::pulse::{DoublePulseSettings, PowerSettings, PulseTrainSettings, RabiSettings};
use nvcycle_core::reference::{self, CentreObservables};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Reference centres with tabulated room-temperature observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Centre {
    NvJ,
    NvC,
}

impl Centre {
    pub fn observables(self) -> CentreObservables {
        match self {
            Centre::NvJ => reference::NV_J,
            Centre::NvC => reference::NV_C,
        }
    }
}

fn room_temperature() -> f64 {
    reference::ROOM_TEMPERATURE_K
}

fn default_singlet_model() -> SingletTemperatureModel {
    reference::SINGLET_MODEL
}

/// How the rate model is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// All eight rates and ε given explicitly.
    Rates(RateParameters),
    /// A reference centre at a given temperature.
    Centre {
        name: Centre,
        #[serde(rename = "temperature_K", default = "room_temperature")]
        temperature_k: f64,
    },
    /// Lifetimes and flip probabilities, inverted to rates.
    Observables {
        p12: f64,
        p21: f64,
        t13_ns: f64,
        t14_ns: f64,
        epsilon: f64,
        singlet_lifetime_ns: f64,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Centre {
            name: Centre::NvJ,
            temperature_k: room_temperature(),
        }
    }
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<RateParameters, CliError> {
        let params = match *self {
            ModelSpec::Rates(p) => p,
            ModelSpec::Centre { name, temperature_k } => name.observables().rate_parameters(temperature_k)?,
            ModelSpec::Observables {
                p12,
                p21,
                t13_ns,
                t14_ns,
                epsilon,
                singlet_lifetime_ns,
            } => {
                let isc = extract_isc_probabilities(p12, p21, t13_ns, t14_ns, epsilon).map_err(CliError::Infeasible)?;
                RateParameters::from_closure(isc.radiative_rate, isc.k35, isc.k45, 1.0, isc.singlet_to_ms0, epsilon)
                    .with_singlet_lifetime(singlet_lifetime_ns)?
            }
        };
        params.validate()?;
        Ok(params)
    }
}

fn default_thetas() -> Vec<f64> {
    (0..=16).map(|k| k as f64 * PI / 8.0).collect()
}

fn default_delays() -> Vec<f64> {
    (2..=24).map(|k| 50.0 * k as f64).collect()
}

fn default_pump_rates() -> Vec<f64> {
    vec![4.0, 8.0, 12.0]
}

fn yes() -> bool {
    true
}

fn default_pulses() -> usize {
    20
}

fn default_spacing() -> f64 {
    2000.0
}

/// The experiment to simulate; exactly one per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PresetSpec {
    Rabi {
        #[serde(default = "default_thetas")]
        thetas_rad: Vec<f64>,
        #[serde(default)]
        settings: RabiSettings,
    },
    DoublePulse {
        #[serde(rename = "temperature_K", default = "room_temperature")]
        temperature_k: f64,
        #[serde(default = "default_delays")]
        delays_ns: Vec<f64>,
        #[serde(default = "default_singlet_model")]
        singlet_model: SingletTemperatureModel,
        #[serde(default)]
        settings: DoublePulseSettings,
    },
    PulseTrain {
        #[serde(default = "default_pulses")]
        pulses: usize,
        #[serde(default = "default_spacing")]
        spacing_ns: f64,
        #[serde(default = "yes")]
        mw_after_first: bool,
        #[serde(default)]
        settings: PulseTrainSettings,
    },
    Power {
        #[serde(rename = "pump_rates_MHz", default = "default_pump_rates")]
        pump_rates: Vec<f64>,
        #[serde(default = "yes")]
        mw: bool,
        #[serde(default)]
        settings: PowerSettings,
    },
}

/// Names accepted by `--preset` for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PresetName {
    Rabi,
    DoublePulse,
    PulseTrain,
    Power,
}

impl PresetName {
    pub fn with_defaults(self) -> PresetSpec {
        match self {
            PresetName::Rabi => PresetSpec::Rabi {
                thetas_rad: default_thetas(),
                settings: RabiSettings::default(),
            },
            PresetName::DoublePulse => PresetSpec::DoublePulse {
                temperature_k: room_temperature(),
                delays_ns: default_delays(),
                singlet_model: default_singlet_model(),
                settings: DoublePulseSettings::default(),
            },
            PresetName::PulseTrain => PresetSpec::PulseTrain {
                pulses: default_pulses(),
                spacing_ns: default_spacing(),
                mw_after_first: true,
                settings: PulseTrainSettings::default(),
            },
            PresetName::Power => PresetSpec::Power {
                pump_rates: default_pump_rates(),
                mw: true,
                settings: PowerSettings::default(),
            },
        }
    }
}

impl PresetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PresetSpec::Rabi { .. } => "rabi",
            PresetSpec::DoublePulse { .. } => "double_pulse",
            PresetSpec::PulseTrain { .. } => "pulse_train",
            PresetSpec::Power { .. } => "power",
        }
    }
}

/// Detector model and histogramming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstrumentSpec {
    pub irf_sigma_ns: f64,
    pub bin_width_ns: f64,
    pub total_photons: f64,
    pub background_per_bin: f64,
    /// Dark time kept before each picosecond pulse so fits can see the
    /// background.
    pub lead_in_ns: f64,
}

impl Default for InstrumentSpec {
    fn default() -> Self {
        Self {
            irf_sigma_ns: nvcycle_core::instrument::DEFAULT_IRF_SIGMA_NS,
            bin_width_ns: nvcycle_core::instrument::DEFAULT_BIN_WIDTH_NS,
            total_photons: 1e6,
            background_per_bin: 0.0,
            lead_in_ns: 10.0,
        }
    }
}

/// Which fit `nvcycle fit` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Biexp,
    Mono,
    Recovery,
    Temperature,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub kind: FitKind,
    #[serde(default)]
    pub decay: DecayFitOptions,
}

/// One run of `simulate` or `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSpec,
    pub preset: PresetSpec,
    #[serde(default)]
    pub instrument: InstrumentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noiseless: bool,
}

impl RunConfig {
    pub fn new(preset: PresetSpec) -> Self {
        Self {
            model: ModelSpec::default(),
            preset,
            instrument: InstrumentSpec::default(),
            fit: None,
            output_dir: None,
            seed: None,
            noiseless: false,
        }
    }

    /// Noisy runs must be reproducible.
    pub fn validate(&self) -> Result<(), CliError> {
        if !self.noiseless && self.seed.is_none() {
            return Err(CliError::Usage(
                "a seed is required unless the run is noiseless (use --seed N or --noiseless)".into(),
            ));
        }
        Ok(())
    }
}

/// Reads a JSON document, rejecting unknown keys.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
