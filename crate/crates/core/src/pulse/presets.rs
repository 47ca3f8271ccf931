//! Ready-made protocols: spin-resolved lifetime under Rabi driving,
//! double-pulse singlet recovery, picosecond pulse trains and CW power
//! dependence.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result, Warning};
use crate::kinetics::{
    build_generator, derived_quantities, steady_state, Populations, RateParameters, SingletTemperatureModel,
};
use crate::pulse::{run_sequence, EmissionTrace, EngineOptions, EventKind, PulseSequence, Segment};

fn engine(sample_dt_ns: f64) -> EngineOptions {
    EngineOptions {
        sample_dt_ns,
        ..EngineOptions::default()
    }
}

/// Duration after which every excited and singlet population has decayed
/// below e^-50 of its start.
fn full_relaxation_ns(params: &RateParameters) -> Result<f64> {
    let d = derived_quantities(params)?;
    Ok(50.0 * d.t13_ns.max(d.t14_ns).max(d.t15_ns))
}

/// Fixed point of a repeated protocol: runs `cycle` from the thermal state
/// until the state at its start stops changing.
fn repeated_start(params: &RateParameters, cycle: &[Segment]) -> Result<Populations> {
    let seq = PulseSequence::new(*params, cycle.to_vec())?;
    let coarse = EngineOptions {
        sample_dt_ns: 10.0,
        max_intervals_per_segment: 200,
        ..EngineOptions::default()
    };
    let mut p = Populations::thermal();
    for _ in 0..500 {
        let next = run_sequence(&seq, &p, &coarse)?.final_populations;
        let change = p
            .to_array()
            .iter()
            .zip(next.to_array())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        p = next;
        if change < 1e-14 {
            break;
        }
    }
    Ok(p)
}

/// Settings of the MW-Rabi lifetime protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RabiSettings {
    #[cfg_attr(feature = "serde", serde(rename = "pump_rate_MHz"))]
    pub pump_rate: f64,
    pub polarize_ns: f64,
    /// Dark time between the polarizing pulse and the MW rotation.
    pub mw_delay_ns: f64,
    /// Dark time between the MW rotation and the picosecond pulse.
    pub pulse_delay_ns: f64,
    pub alpha: f64,
    /// Length of the returned post-pulse decay trace.
    pub decay_window_ns: f64,
    /// Dark time between the picosecond pulse and the readout pulse.
    pub readout_delay_ns: f64,
    pub readout_window_ns: f64,
    pub sample_dt_ns: f64,
}

impl Default for RabiSettings {
    fn default() -> Self {
        Self {
            pump_rate: 10.0,
            polarize_ns: 1300.0,
            mw_delay_ns: 800.0,
            pulse_delay_ns: 200.0,
            alpha: 0.95,
            decay_window_ns: 200.0,
            readout_delay_ns: 1000.0,
            readout_window_ns: 300.0,
            sample_dt_ns: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RabiPoint {
    pub theta: f64,
    /// Emission after the picosecond pulse, time zero at the pulse.
    pub decay: EmissionTrace,
    /// Photons in the first `readout_window_ns` of the next CW pulse.
    pub readout_counts: f64,
    /// Populations right before / after the MW rotation.
    pub before_rotation: Populations,
    pub after_rotation: Populations,
    /// Populations right before / after the picosecond pulse.
    pub before_pulse: Populations,
    pub after_pulse: Populations,
}

/// For each MW angle: polarize, rotate, excite with a picosecond pulse, and
/// read the spin out through the start of the next CW pulse.
pub fn preset_rabi_lifetime(
    params: &RateParameters,
    thetas: &[f64],
    settings: &RabiSettings,
) -> Result<Vec<RabiPoint>> {
    if settings.decay_window_ns > settings.readout_delay_ns {
        return Err(Error::InvalidParameter {
            name: "decay_window_ns",
            value: settings.decay_window_ns,
            reason: "must not exceed readout_delay_ns",
        });
    }
    let opts = engine(settings.sample_dt_ns);
    thetas
        .iter()
        .map(|&theta| {
            let seq = PulseSequence::new(
                *params,
                vec![
                    Segment::Cw {
                        pump_rate: settings.pump_rate,
                        duration_ns: settings.polarize_ns,
                    },
                    Segment::Delay {
                        duration_ns: settings.mw_delay_ns,
                    },
                    Segment::MwRotation { theta },
                    Segment::Delay {
                        duration_ns: settings.pulse_delay_ns,
                    },
                    Segment::PsPulse { alpha: settings.alpha },
                    Segment::Delay {
                        duration_ns: settings.readout_delay_ns,
                    },
                    Segment::Cw {
                        pump_rate: settings.pump_rate,
                        duration_ns: settings.readout_window_ns,
                    },
                ],
            )?;
            let run = run_sequence(&seq, &Populations::thermal(), &opts)?;
            let pulse = run
                .events
                .iter()
                .find(|e| e.kind == EventKind::PsPulse)
                .expect("sequence contains a pulse");
            let rotation = run
                .events
                .iter()
                .find(|e| e.kind == EventKind::MwRotation)
                .expect("sequence contains a rotation");
            let t = pulse.time_ns;
            let decay = run.trace.slice(t, t + settings.decay_window_ns, 0.0)?;
            let readout_start = t + settings.readout_delay_ns;
            let readout_counts = run
                .trace
                .integral(readout_start, readout_start + settings.readout_window_ns)?;
            Ok(RabiPoint {
                theta,
                decay,
                readout_counts,
                before_rotation: rotation.before,
                after_rotation: rotation.after,
                before_pulse: pulse.before,
                after_pulse: pulse.after,
            })
        })
        .collect()
}

/// Settings of the double-pulse singlet-recovery protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DoublePulseSettings {
    #[cfg_attr(feature = "serde", serde(rename = "pump_rate_MHz"))]
    pub pump_rate: f64,
    pub pulse_ns: f64,
    /// Integration window at the start of the second pulse.
    pub window_ns: f64,
    pub sample_dt_ns: f64,
}

impl Default for DoublePulseSettings {
    fn default() -> Self {
        Self {
            pump_rate: 10.0,
            pulse_ns: 1000.0,
            window_ns: 30.0,
            sample_dt_ns: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryPoint {
    pub delay_ns: f64,
    pub counts: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublePulseRun {
    /// Singlet lifetime imposed on the rates at this temperature.
    pub singlet_lifetime_ns: f64,
    /// Window counts at the start of the first pulse.
    pub reference_counts: f64,
    pub points: Vec<RecoveryPoint>,
}

/// Two CW pulses separated by a variable dark delay; reports the photons in
/// the first `window_ns` of the second pulse. The singlet drain is rescaled
/// to the lifetime of `model` at `temperature_k`, keeping `k51/k52`.
///
/// The first pulse starts from the state the protocol repeats into (pulse
/// followed by full relaxation), so an infinite delay reproduces the first
/// pulse exactly.
pub fn preset_double_pulse(
    params: &RateParameters,
    model: &SingletTemperatureModel,
    temperature_k: f64,
    delays_ns: &[f64],
    settings: &DoublePulseSettings,
) -> Result<DoublePulseRun> {
    let tau = crate::kinetics::singlet_lifetime(model, temperature_k)?;
    let params = params.with_singlet_lifetime(tau)?;
    for &d in delays_ns {
        crate::error::require_non_negative("delay", d)?;
    }
    let pulse = Segment::Cw {
        pump_rate: settings.pump_rate,
        duration_ns: settings.pulse_ns,
    };
    let relax = full_relaxation_ns(&params)?;
    let start = repeated_start(&params, &[pulse, Segment::Delay { duration_ns: relax }])?;
    let opts = engine(settings.sample_dt_ns);

    let window = |trace: &EmissionTrace, t0: f64| trace.integral(t0, t0 + settings.window_ns);
    let first = run_sequence(&PulseSequence::new(params, vec![pulse])?, &start, &opts)?;
    let reference_counts = window(&first.trace, 0.0)?;

    let points = delays_ns
        .iter()
        .map(|&delay_ns| {
            // Only the start of the second pulse matters.
            let seq = PulseSequence::new(
                params,
                vec![
                    Segment::Delay { duration_ns: delay_ns },
                    Segment::Cw {
                        pump_rate: settings.pump_rate,
                        duration_ns: settings.window_ns,
                    },
                ],
            )?;
            let run = run_sequence(&seq, &first.final_populations, &opts)?;
            Ok(RecoveryPoint {
                delay_ns,
                counts: window(&run.trace, delay_ns)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DoublePulseRun {
        singlet_lifetime_ns: tau,
        reference_counts,
        points,
    })
}

/// Settings of the picosecond pulse-train protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PulseTrainSettings {
    #[cfg_attr(feature = "serde", serde(rename = "pump_rate_MHz"))]
    pub pump_rate: f64,
    pub polarize_ns: f64,
    /// Dark time between the polarizing pulse and the reference pulse.
    pub wait_ns: f64,
    pub alpha: f64,
    /// Position of the MW π rotation after the reference pulse; `None` puts
    /// it halfway through the spacing.
    pub mw_delay_ns: Option<f64>,
    /// Length of each returned decay trace.
    pub trace_window_ns: f64,
    pub sample_dt_ns: f64,
}

impl Default for PulseTrainSettings {
    fn default() -> Self {
        Self {
            pump_rate: 10.0,
            polarize_ns: 2000.0,
            wait_ns: 1000.0,
            alpha: 0.95,
            mw_delay_ns: None,
            trace_window_ns: 100.0,
            sample_dt_ns: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PulseRecord {
    /// 0 for the reference pulse, then 1..=n.
    pub index: usize,
    pub time_ns: f64,
    pub before: Populations,
    pub after: Populations,
    /// Emission after this pulse, time zero at the pulse.
    pub decay: EmissionTrace,
}

impl PulseRecord {
    /// Excited-state polarization right after the pulse.
    pub fn p_es(&self) -> f64 {
        self.after.p_es().unwrap_or(f64::NAN)
    }

    /// Ground-state polarization right before the pulse.
    pub fn p_gs(&self) -> f64 {
        self.before.p_gs().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct PulseTrainRun {
    pub reference: PulseRecord,
    pub pulses: Vec<PulseRecord>,
    pub warnings: Vec<Warning>,
}

/// CW polarization, a reference picosecond pulse, an optional MW π rotation,
/// then `n_pulses` picosecond pulses `spacing_ns` apart.
pub fn preset_pulse_train(
    params: &RateParameters,
    n_pulses: usize,
    spacing_ns: f64,
    mw_after_first: bool,
    settings: &PulseTrainSettings,
) -> Result<PulseTrainRun> {
    let d = derived_quantities(params)?;
    let mut warnings = Vec::new();
    if spacing_ns < 5.0 * d.t15_ns {
        warnings.push(Warning::ShortPulseSpacing {
            spacing_ns,
            singlet_lifetime_ns: d.t15_ns,
        });
    }
    if settings.trace_window_ns > spacing_ns {
        return Err(Error::InvalidParameter {
            name: "trace_window_ns",
            value: settings.trace_window_ns,
            reason: "must not exceed the pulse spacing",
        });
    }
    let mw_delay = settings.mw_delay_ns.unwrap_or(0.5 * spacing_ns);
    if mw_after_first && !(0.0..=spacing_ns).contains(&mw_delay) {
        return Err(Error::InvalidParameter {
            name: "mw_delay_ns",
            value: mw_delay,
            reason: "must lie within the pulse spacing",
        });
    }

    let pulse = Segment::PsPulse { alpha: settings.alpha };
    let mut segments = vec![
        Segment::Cw {
            pump_rate: settings.pump_rate,
            duration_ns: settings.polarize_ns,
        },
        Segment::Delay {
            duration_ns: settings.wait_ns,
        },
        pulse,
    ];
    if mw_after_first {
        segments.push(Segment::Delay { duration_ns: mw_delay });
        segments.push(Segment::MwRotation { theta: PI });
        segments.push(Segment::Delay {
            duration_ns: spacing_ns - mw_delay,
        });
    } else if n_pulses > 0 {
        segments.push(Segment::Delay {
            duration_ns: spacing_ns,
        });
    }
    for k in 0..n_pulses {
        segments.push(pulse);
        if k + 1 < n_pulses {
            segments.push(Segment::Delay {
                duration_ns: spacing_ns,
            });
        }
    }
    // Without further pulses the MW branch above already covers the window.
    if n_pulses > 0 || !mw_after_first {
        segments.push(Segment::Delay {
            duration_ns: settings.trace_window_ns,
        });
    }
    let run = run_sequence(
        &PulseSequence::new(*params, segments)?,
        &Populations::thermal(),
        &engine(settings.sample_dt_ns),
    )?;

    let mut records = run
        .events
        .iter()
        .filter(|e| e.kind == EventKind::PsPulse)
        .enumerate()
        .map(|(index, e)| {
            Ok(PulseRecord {
                index,
                time_ns: e.time_ns,
                before: e.before,
                after: e.after,
                decay: run.trace.slice(e.time_ns, e.time_ns + settings.trace_window_ns, 0.0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let reference = records.next().expect("reference pulse present");
    Ok(PulseTrainRun {
        reference,
        pulses: records.collect(),
        warnings,
    })
}

/// Settings of the CW power-dependence protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PowerSettings {
    pub pulse_ns: f64,
    /// Dark time after each pulse; the MW rotation sits at its end.
    pub gap_ns: f64,
    pub sample_dt_ns: f64,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            pulse_ns: 1000.0,
            gap_ns: 3000.0,
            sample_dt_ns: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowerTrace {
    /// Excitation rate in MHz.
    pub pump_rate: f64,
    /// First pulse (spin optically polarized into m_s = 0), time zero at
    /// its start.
    pub first: EmissionTrace,
    /// Second pulse, after the MW π rotation when enabled.
    pub second: EmissionTrace,
    pub first_start: Populations,
    pub second_start: Populations,
    /// Emission rate (photons/ns) of the pumped steady state; zero without
    /// pump.
    pub plateau: f64,
}

/// Pairs of CW pulses per pump rate: the first from the optically polarized
/// state, the second after a MW π rotation (`mw`) or after the same dark
/// gap without one.
pub fn preset_power_dependence(
    params: &RateParameters,
    pump_rates: &[f64],
    mw: bool,
    settings: &PowerSettings,
) -> Result<Vec<PowerTrace>> {
    let opts = engine(settings.sample_dt_ns);
    let theta = if mw { PI } else { 0.0 };
    pump_rates
        .iter()
        .map(|&pump_rate| {
            crate::error::require_non_negative("pump_rate", pump_rate)?;
            let pulse = Segment::Cw {
                pump_rate,
                duration_ns: settings.pulse_ns,
            };
            let gap = Segment::Delay {
                duration_ns: settings.gap_ns,
            };
            let rotation = Segment::MwRotation { theta };
            let start = repeated_start(params, &[pulse, gap, rotation, pulse, gap])?;
            let seq = PulseSequence::new(*params, vec![pulse, gap, rotation, pulse])?;
            let run = run_sequence(&seq, &start, &opts)?;
            let second_at = settings.pulse_ns + settings.gap_ns;
            let first = run.trace.slice(0.0, settings.pulse_ns, 0.0)?;
            let second = run.trace.slice(second_at, second_at + settings.pulse_ns, 0.0)?;
            let g = build_generator(params, pump_rate)?;
            let plateau = if pump_rate > 0.0 {
                let ss = steady_state(&g)?;
                g.emission_rate(ss.p3, ss.p4)
            } else {
                0.0
            };
            Ok(PowerTrace {
                pump_rate,
                first,
                second,
                first_start: start,
                second_start: run.boundaries[2],
                plateau,
            })
        })
        .collect()
}
