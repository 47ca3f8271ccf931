//! The five-level rate model of the NV optical cycle.
//!
//! Levels, in generator order: `m0` (ground m_s=0, |1⟩), `sym` and `asym`
//! (the symmetric and antisymmetric m_s=±1 combinations that together form
//! |2⟩), `p3` and `p4` (excited m_s=0 and m_s=±1), `p5` (the lumped singlet
//! manifold). Splitting |2⟩ keeps the microwave bookkeeping classical: only
//! `sym` couples to `m0` under resonant driving, and every incoherent process
//! feeds `sym` and `asym` equally.

mod cycle;
mod generator;
mod params;
mod populations;
mod propagate;
mod singlet;

pub use cycle::{cycle_map, excited_polarization, CycleProbabilities, PolarizationStep};
pub use generator::{build_generator, RateMatrix, LEVELS};
pub use params::{derived_quantities, DerivedQuantities, RateParameters, EPSILON_BOUND};
pub use populations::Populations;
pub use propagate::{propagate, propagate_trace, steady_state, Propagator};
pub use singlet::{singlet_lifetime, SingletTemperatureModel, BOLTZMANN_MEV_PER_K};

/// Ground-state zero-field splitting. Sets the MW resonance only; it does not
/// enter the rate dynamics.
pub const D_GS_GHZ: f64 = 2.87;
/// Excited-state zero-field splitting, kept for reference like [`D_GS_GHZ`].
pub const D_ES_GHZ: f64 = 1.43;

/// Rates are stored in MHz and times in ns; `rate * time * MHZ_NS` is
/// dimensionless.
pub const MHZ_NS: f64 = 1e-3;
