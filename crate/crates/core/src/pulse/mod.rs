//! Pulse sequences over the rate model, and the four experiment presets.

mod engine;
mod presets;
mod segment;
mod trace;

pub use engine::{
    apply_mw_rotation, apply_ps_pulse, run_sequence, EngineOptions, EventKind, EventRecord, SequenceRun,
    EXCITED_TOLERANCE,
};
pub use presets::{
    preset_double_pulse, preset_power_dependence, preset_pulse_train, preset_rabi_lifetime, DoublePulseRun,
    DoublePulseSettings, PowerSettings, PowerTrace, PulseRecord, PulseTrainRun, PulseTrainSettings, RabiPoint,
    RabiSettings, RecoveryPoint,
};
pub use segment::{PulseSequence, Segment};
pub use trace::{EmissionTrace, Marker, MarkerKind};
