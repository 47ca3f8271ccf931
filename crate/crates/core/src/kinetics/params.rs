use crate::error::{require_non_negative, Error, Result};

/// Upper bound on the spin-mixing fraction accepted by default validation.
pub const EPSILON_BOUND: f64 = 0.04;

/// The eight relaxation rates of the five-level model plus the spin-mixing
/// fraction `epsilon`.
///
/// Rates are in MHz. `epsilon` is the ratio of spin non-conserving to
/// spin-conserving optical transition strength; it sets how the optical pump
/// distributes over the two excited levels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RateParameters {
    #[cfg_attr(feature = "serde", serde(rename = "k31_MHz"))]
    pub k31: f64,
    #[cfg_attr(feature = "serde", serde(rename = "k32_MHz"))]
    pub k32: f64,
    #[cfg_attr(feature = "serde", serde(rename = "k35_MHz"))]
    pub k35: f64,
    #[cfg_attr(feature = "serde", serde(rename = "k41_MHz"))]
    pub k41: f64,
    #[cfg_attr(feature = "serde", serde(rename = "k42_MHz"))]
    pub k42: f64,
    #[cfg_attr(feature = "serde", serde(rename = "k45_MHz"))]
    pub k45: f64,
    #[cfg_attr(feature = "serde", serde(rename = "k51_MHz"))]
    pub k51: f64,
    #[cfg_attr(feature = "serde", serde(rename = "k52_MHz"))]
    pub k52: f64,
    pub epsilon: f64,
    /// Accept `epsilon` up to 1 instead of [`EPSILON_BOUND`].
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "is_false"))]
    pub relax_epsilon_bound: bool,
}

#[cfg(feature = "serde")]
fn is_false(b: &bool) -> bool {
    !*b
}

impl RateParameters {
    /// Builds a rate set under the emission closure used throughout the
    /// crate: both excited levels share one radiative rate, and emission
    /// mixes spin with the same fraction as excitation
    /// (`k32/k31 = k41/k42 = epsilon`).
    ///
    /// `singlet_rate` is the total singlet drain `k51 + k52` and `branching`
    /// is `k51 / (k51 + k52)`.
    pub fn from_closure(radiative: f64, k35: f64, k45: f64, singlet_rate: f64, branching: f64, epsilon: f64) -> Self {
        let conserving = radiative / (1.0 + epsilon);
        let flipping = radiative * epsilon / (1.0 + epsilon);
        Self {
            k31: conserving,
            k32: flipping,
            k35,
            k41: flipping,
            k42: conserving,
            k45,
            k51: singlet_rate * branching,
            k52: singlet_rate * (1.0 - branching),
            epsilon,
            relax_epsilon_bound: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k31", self.k31),
            ("k32", self.k32),
            ("k35", self.k35),
            ("k41", self.k41),
            ("k42", self.k42),
            ("k45", self.k45),
            ("k51", self.k51),
            ("k52", self.k52),
            ("epsilon", self.epsilon),
        ] {
            require_non_negative(name, v)?;
        }
        let bound = if self.relax_epsilon_bound { 1.0 } else { EPSILON_BOUND };
        if self.epsilon > bound {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: self.epsilon,
                reason: "exceeds the spin-mixing bound",
            });
        }
        if self.k35 + self.k45 > 0.0 && self.k51 + self.k52 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "k51+k52",
                value: self.k51 + self.k52,
                reason: "singlet can fill but has no decay channel",
            });
        }
        Ok(())
    }

    /// Total decay rate out of |3⟩.
    pub fn k3_total(&self) -> f64 {
        self.k31 + self.k32 + self.k35
    }

    /// Total decay rate out of |4⟩.
    pub fn k4_total(&self) -> f64 {
        self.k41 + self.k42 + self.k45
    }

    pub fn singlet_rate(&self) -> f64 {
        self.k51 + self.k52
    }

    /// Radiative rate of |3⟩ (photons per unit time per unit population).
    pub fn radiative3(&self) -> f64 {
        self.k31 + self.k32
    }

    pub fn radiative4(&self) -> f64 {
        self.k41 + self.k42
    }

    /// Same rates with `k51 + k52` rescaled to `1 / lifetime_ns`, keeping
    /// `k51 / k52` fixed.
    pub fn with_singlet_lifetime(&self, lifetime_ns: f64) -> Result<Self> {
        if !(lifetime_ns > 0.0) || !lifetime_ns.is_finite() {
            return Err(Error::InvalidParameter {
                name: "singlet lifetime",
                value: lifetime_ns,
                reason: "must be positive and finite",
            });
        }
        let total = self.singlet_rate();
        let target = 1e3 / lifetime_ns;
        let mut out = *self;
        if total > 0.0 {
            out.k51 = self.k51 / total * target;
            out.k52 = self.k52 / total * target;
        } else {
            out.k51 = 0.5 * target;
            out.k52 = 0.5 * target;
        }
        Ok(out)
    }
}

/// Lifetimes and branching probabilities implied by a rate set.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivedQuantities {
    pub t13_ns: f64,
    pub t14_ns: f64,
    /// Singlet lifetime `1/(k51+k52)`; infinite when the singlet never drains.
    pub t15_ns: f64,
    pub p35: f64,
    pub p45: f64,
    /// `k51 / (k51 + k52)`.
    pub branching: f64,
}

pub fn derived_quantities(params: &RateParameters) -> Result<DerivedQuantities> {
    let k3 = params.k3_total();
    let k4 = params.k4_total();
    if !(k3 > 0.0) {
        return Err(Error::NoDecayChannel("|3>"));
    }
    if !(k4 > 0.0) {
        return Err(Error::NoDecayChannel("|4>"));
    }
    let k5 = params.singlet_rate();
    if !(k5 > 0.0) {
        return Err(Error::NoDecayChannel("|5>"));
    }
    Ok(DerivedQuantities {
        t13_ns: 1e3 / k3,
        t14_ns: 1e3 / k4,
        t15_ns: 1e3 / k5,
        p35: params.k35 / k3,
        p45: params.k45 / k4,
        branching: params.k51 / k5,
    })
}
