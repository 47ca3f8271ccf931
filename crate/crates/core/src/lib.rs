//! Spin dynamics of the NV-centre optical cycle.
//!
//! The crate is split along the data flow of a lifetime experiment:
//!
//! * [`kinetics`] holds the five-level rate model (parameters, generator,
//!   exact propagation, steady state, per-cycle spin-flip map and the
//!   singlet temperature model).
//! * [`pulse`] interprets pulse sequences over that model and carries the
//!   experiment presets (Rabi lifetime, double-pulse singlet recovery,
//!   picosecond pulse train, CW power dependence).
//! * [`instrument`] turns deterministic emission traces into TCSPC
//!   histograms (Gaussian IRF, binning, Poisson shot noise).
//! * [`analysis`] fits decays and recovery curves and inverts the measured
//!   observables back to spin-flip and intersystem-crossing probabilities.
//!
//! Everything is `no_std` + `alloc`; file formats and the command line live
//! in the companion `nvcycle` crate.
//!
//! Units throughout: rates in MHz, times in ns, energies in meV, temperature
//! in kelvin.
#![no_std]
// `!(x > 0.0)` deliberately rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod instrument;
pub mod kinetics;
pub(crate) mod linalg;
pub(crate) mod math;
pub mod pulse;
pub mod reference;

pub use error::{Error, Result, Warning};
