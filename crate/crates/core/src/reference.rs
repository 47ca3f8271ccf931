//! Measured observables of two NV centres at room temperature and the rate
//! sets they imply.

use crate::analysis::{extract_isc_probabilities, ExtractionInputs, FlipSource, Measured};
use crate::error::Result;
use crate::kinetics::{RateParameters, SingletTemperatureModel};

/// Room-temperature observables of one centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentreObservables {
    pub name: &'static str,
    pub p12: Measured,
    pub p21: Measured,
    pub t13_ns: Measured,
    pub t14_ns: Measured,
    pub p35: Measured,
    pub p45: Measured,
    pub branching_ratio: Measured,
}

/// Excitation probability of a picosecond pulse and spin-mixing fraction
/// assumed for both centres.
pub const ALPHA: Measured = Measured::new(0.95, 0.05);
pub const EPSILON: Measured = Measured::new(0.01, 0.01);

pub const NV_J: CentreObservables = CentreObservables {
    name: "NV J",
    p12: Measured::new(0.078, 0.002),
    p21: Measured::new(0.315, 0.011),
    t13_ns: Measured::new(13.26, 0.03),
    t14_ns: Measured::new(6.89, 0.06),
    p35: Measured::new(0.14, 0.02),
    p45: Measured::new(0.55, 0.01),
    branching_ratio: Measured::new(1.15, 0.05),
};

pub const NV_C: CentreObservables = CentreObservables {
    name: "NV C",
    p12: Measured::new(0.079, 0.004),
    p21: Measured::new(0.372, 0.017),
    t13_ns: Measured::new(13.1, 0.1),
    t14_ns: Measured::new(7.0, 0.2),
    p35: Measured::new(0.17, 0.03),
    p45: Measured::new(0.56, 0.02),
    branching_ratio: Measured::new(1.6, 0.4),
};

/// Singlet lifetime model: spontaneous lifetime and phonon energy.
pub const SINGLET_MODEL: SingletTemperatureModel = SingletTemperatureModel {
    tau0_ns: 371.0,
    delta_e_mev: 16.6,
};

/// Room temperature in kelvin.
pub const ROOM_TEMPERATURE_K: f64 = 300.0;

impl CentreObservables {
    pub fn extraction_inputs(&self) -> ExtractionInputs {
        ExtractionInputs {
            flips: FlipSource::Probabilities {
                p12: self.p12,
                p21: self.p21,
            },
            t13_ns: self.t13_ns,
            t14_ns: self.t14_ns,
            alpha: ALPHA,
            epsilon: EPSILON,
        }
    }

    /// Rates reproducing the observables exactly, with the singlet lifetime
    /// of [`SINGLET_MODEL`] at `temperature_k`.
    pub fn rate_parameters(&self, temperature_k: f64) -> Result<RateParameters> {
        let isc = extract_isc_probabilities(
            self.p12.value,
            self.p21.value,
            self.t13_ns.value,
            self.t14_ns.value,
            EPSILON.value,
        )?;
        let tau = crate::kinetics::singlet_lifetime(&SINGLET_MODEL, temperature_k)?;
        RateParameters::from_closure(
            isc.radiative_rate,
            isc.k35,
            isc.k45,
            1e3 / tau,
            isc.singlet_to_ms0,
            EPSILON.value,
        )
        .with_singlet_lifetime(tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{cycle_map, derived_quantities};

    #[test]
    fn rate_sets_reproduce_their_observables() {
        for c in [NV_J, NV_C] {
            let p = c.rate_parameters(ROOM_TEMPERATURE_K).unwrap();
            let flips = cycle_map(&p).unwrap();
            let d = derived_quantities(&p).unwrap();
            assert!((flips.p12 - c.p12.value).abs() < 1e-9);
            assert!((flips.p21 - c.p21.value).abs() < 1e-9);
            assert!((d.t13_ns - c.t13_ns.value).abs() < 1e-9);
            assert!((d.t14_ns - c.t14_ns.value).abs() < 1e-9);
            assert!((d.t15_ns - 175.788_147_247_402_1).abs() < 1e-9);
        }
    }

    #[test]
    fn propagated_spreads_are_within_a_factor_two_of_tabulated() {
        use crate::analysis::uncertainty_propagation;
        for c in [NV_J, NV_C] {
            let r = uncertainty_propagation(&c.extraction_inputs(), 4000, 1).unwrap();
            for (value, sigma, want) in [
                (r.isc.p35, r.sigma_p35, c.p35),
                (r.isc.p45, r.sigma_p45, c.p45),
                (r.isc.branching_ratio, r.sigma_branching_ratio, c.branching_ratio),
            ] {
                assert!(
                    (value - want.value).abs() <= 2.0 * want.sigma,
                    "{}: {value} vs {want:?}",
                    c.name
                );
                let ratio = sigma / want.sigma;
                assert!((0.5..=2.0).contains(&ratio), "{}: spread {sigma} vs {want:?}", c.name);
            }
        }
    }
}
