use crate::error::{Error, Result};

/// Occupation of the six bookkeeping components of the five-level model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Populations {
    /// Ground m_s = 0 (|1⟩).
    pub m0: f64,
    /// Symmetric m_s = ±1 superposition (MW-coupled part of |2⟩).
    pub sym: f64,
    /// Antisymmetric m_s = ±1 superposition (dark to MW).
    pub asym: f64,
    pub p3: f64,
    pub p4: f64,
    /// Lumped singlet manifold.
    pub p5: f64,
}

/// Components below this are treated as rounding noise and clamped to zero.
pub(crate) const NEGATIVE_TOLERANCE: f64 = 1e-12;

impl Populations {
    pub const fn from_array(a: [f64; 6]) -> Self {
        Self {
            m0: a[0],
            sym: a[1],
            asym: a[2],
            p3: a[3],
            p4: a[4],
            p5: a[5],
        }
    }

    pub const fn to_array(&self) -> [f64; 6] {
        [self.m0, self.sym, self.asym, self.p3, self.p4, self.p5]
    }

    /// Ground-state mixture with m_s = 0 fraction `polarization`; the m_s = ±1
    /// remainder is incoherent, so it sits equally in `sym` and `asym`.
    pub fn ground(polarization: f64) -> Self {
        let rest = 0.5 * (1.0 - polarization);
        Self {
            m0: polarization,
            sym: rest,
            asym: rest,
            ..Self::default()
        }
    }

    /// Unpolarized ground state: one third in each spin sublevel.
    pub fn thermal() -> Self {
        Self::ground(1.0 / 3.0)
    }

    pub fn total(&self) -> f64 {
        self.to_array().iter().sum()
    }

    /// Population of |2⟩.
    pub fn p2(&self) -> f64 {
        self.sym + self.asym
    }

    pub fn ground_total(&self) -> f64 {
        self.m0 + self.p2()
    }

    pub fn excited_total(&self) -> f64 {
        self.p3 + self.p4
    }

    /// Ground-state spin polarization `P1 / (P1 + P2)`.
    pub fn p_gs(&self) -> Option<f64> {
        let d = self.ground_total();
        (d > 0.0).then(|| self.m0 / d)
    }

    /// Excited-state spin polarization `P3 / (P3 + P4)`.
    pub fn p_es(&self) -> Option<f64> {
        let d = self.excited_total();
        (d > 0.0).then(|| self.p3 / d)
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.to_array() {
            if !v.is_finite() {
                return Err(Error::NonFinite("populations"));
            }
            if !(-NEGATIVE_TOLERANCE..=1.0 + 1e-9).contains(&v) {
                return Err(Error::InvalidParameter {
                    name: "population",
                    value: v,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        let total = self.total();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "total population",
                value: total,
                reason: "must equal 1",
            });
        }
        Ok(())
    }

    /// Clamps rounding-level negatives to zero; anything more negative is a
    /// numerical failure.
    pub(crate) fn clamp_rounding(mut self) -> Result<Self> {
        for v in [
            &mut self.m0,
            &mut self.sym,
            &mut self.asym,
            &mut self.p3,
            &mut self.p4,
            &mut self.p5,
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite("populations"));
            }
            if *v < 0.0 {
                if *v < -NEGATIVE_TOLERANCE {
                    return Err(Error::NonFinite("negative population"));
                }
                *v = 0.0;
            }
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarization_accessors() {
        let p = Populations {
            m0: 0.4,
            sym: 0.2,
            asym: 0.2,
            p3: 0.15,
            p4: 0.05,
            p5: 0.0,
        };
        assert!((p.p2() - 0.4).abs() < 1e-15);
        assert!((p.p_gs().unwrap() - 0.5).abs() < 1e-15);
        assert!((p.p_es().unwrap() - 0.75).abs() < 1e-15);
        assert!(p.validate().is_ok());
        assert_eq!(Populations::ground(1.0).p_es(), None);
    }

    #[test]
    fn ground_state_splits_incoherent_part() {
        let g = Populations::ground(0.7);
        assert!((g.sym - 0.15).abs() < 1e-15);
        assert_eq!(g.sym, g.asym);
        assert!((g.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_totals() {
        let mut p = Populations::ground(0.5);
        p.p5 = 0.1;
        assert!(p.validate().is_err());
        let q = Populations::from_array([1.1, -0.1, 0.0, 0.0, 0.0, 0.0]);
        assert!(q.validate().is_err());
    }

    #[test]
    fn clamping_only_touches_rounding_noise() {
        let p = Populations::from_array([1.0, -1e-14, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.clamp_rounding().unwrap().sym, 0.0);
        let q = Populations::from_array([1.0, -1e-6, 0.0, 0.0, 0.0, 0.0]);
        assert!(q.clamp_rounding().is_err());
    }
}
