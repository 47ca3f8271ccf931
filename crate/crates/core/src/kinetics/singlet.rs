use crate::error::{Error, Result};
use crate::math;

/// Boltzmann constant in meV/K.
pub const BOLTZMANN_MEV_PER_K: f64 = 0.086_173_332_62;

/// Singlet-manifold lifetime as a spontaneous decay accelerated by
/// stimulated phonon emission: `τ(T) = τ₀ [1 − exp(−ΔE / k_B T)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SingletTemperatureModel {
    #[cfg_attr(feature = "serde", serde(rename = "tau0_ns"))]
    pub tau0_ns: f64,
    #[cfg_attr(feature = "serde", serde(rename = "delta_e_meV"))]
    pub delta_e_mev: f64,
}

impl SingletTemperatureModel {
    pub fn new(tau0_ns: f64, delta_e_mev: f64) -> Result<Self> {
        let m = Self { tau0_ns, delta_e_mev };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau0", self.tau0_ns), ("deltaE", self.delta_e_mev)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }

    pub fn lifetime(&self, temperature_k: f64) -> f64 {
        if temperature_k <= 0.0 {
            return self.tau0_ns;
        }
        let x = self.delta_e_mev / (BOLTZMANN_MEV_PER_K * temperature_k);
        // 1 − e^{−x} without cancellation at high temperature
        -self.tau0_ns * math::expm1(-x)
    }
}

pub fn singlet_lifetime(model: &SingletTemperatureModel, temperature_k: f64) -> Result<f64> {
    model.validate()?;
    if !(temperature_k >= 0.0) || !temperature_k.is_finite() {
        return Err(Error::InvalidParameter {
            name: "temperature",
            value: temperature_k,
            reason: "must be non-negative",
        });
    }
    Ok(model.lifetime(temperature_k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_limit() {
        let m = SingletTemperatureModel::new(371.0, 16.6).unwrap();
        assert_eq!(singlet_lifetime(&m, 0.0).unwrap(), 371.0);
        assert!((m.lifetime(1.0) - 371.0).abs() < 1e-12);
    }

    #[test]
    fn room_temperature_value() {
        // 30-digit evaluation: 175.788147247402104994506358827
        let m = SingletTemperatureModel::new(371.0, 16.6).unwrap();
        let tau = m.lifetime(300.0);
        assert!((tau - 175.788_147_247_402_1).abs() < 1e-10, "{tau}");
    }

    #[test]
    fn lifetime_decreases_with_temperature() {
        let m = SingletTemperatureModel::new(371.0, 16.6).unwrap();
        let mut last = f64::INFINITY;
        for t in (0..=600).step_by(5) {
            let tau = m.lifetime(t as f64);
            assert!(tau <= last);
            last = tau;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SingletTemperatureModel::new(0.0, 16.6).is_err());
        assert!(SingletTemperatureModel::new(371.0, -1.0).is_err());
        let m = SingletTemperatureModel::new(371.0, 16.6).unwrap();
        assert!(singlet_lifetime(&m, -3.0).is_err());
    }
}
