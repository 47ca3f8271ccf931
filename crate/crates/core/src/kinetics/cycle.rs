use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kinetics::RateParameters;

/// Spin-flip probabilities of one excitation-and-relaxation cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleProbabilities {
    /// |1⟩ → |2⟩.
    pub p12: f64,
    /// |2⟩ → |1⟩.
    pub p21: f64,
}

/// Ground and excited polarization just before/after one picosecond pulse of
/// a train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationStep {
    /// Ground-state polarization `P1,n` before the pulse.
    pub ground: f64,
    /// Excited-state polarization right after the pulse.
    pub excited: f64,
}

impl CycleProbabilities {
    pub fn new(p12: f64, p21: f64) -> Result<Self> {
        for (name, v) in [("p12", p12), ("p21", p21)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "probability must lie in [0, 1]",
                });
            }
        }
        Ok(Self { p12, p21 })
    }

    /// Fixed point of the pulse recursion, `p21 / (p12 + p21)`.
    pub fn steady_polarization(&self) -> Option<f64> {
        let s = self.p12 + self.p21;
        (s > 0.0).then(|| self.p21 / s)
    }

    /// Ground m_s = 0 population before the next pulse, given `p1` before
    /// this one and excitation probability `alpha`.
    pub fn step(&self, p1: f64, alpha: f64) -> f64 {
        alpha * self.p21 * (1.0 - p1) + (1.0 - alpha * self.p12) * p1
    }

    /// Iterates the pulse recursion `pulses` times from ground polarization
    /// `p1_start`, reporting the polarization seen by each pulse.
    pub fn pulse_series(&self, p1_start: f64, alpha: f64, epsilon: f64, pulses: usize) -> Vec<PolarizationStep> {
        let mut p1 = p1_start;
        let mut out = Vec::with_capacity(pulses);
        for _ in 0..pulses {
            out.push(PolarizationStep {
                ground: p1,
                excited: excited_polarization(p1, epsilon),
            });
            p1 = self.step(p1, alpha);
        }
        out
    }
}

/// Excited-state polarization produced by a picosecond pulse acting on a
/// relaxed ground state of polarization `p1`.
pub fn excited_polarization(p1: f64, epsilon: f64) -> f64 {
    (p1 * (1.0 - epsilon) + epsilon) / (1.0 + epsilon)
}

/// Flip probabilities of a single optical cycle obtained by summing the
/// relaxation paths out of each excited level, with no re-excitation.
///
/// Starting in |1⟩, excitation lands in |3⟩ with weight 1/(1+ε) and in |4⟩
/// with weight ε/(1+ε). From |3⟩ the spin flips either radiatively (k32) or
/// through the singlet, which returns to |2⟩ with probability `1 − r`. The
/// |2⟩ start is the mirror image.
pub fn cycle_map(params: &RateParameters) -> Result<CycleProbabilities> {
    params.validate()?;
    let k3 = params.k3_total();
    let k4 = params.k4_total();
    if !(k3 > 0.0) {
        return Err(Error::NoDecayChannel("|3>"));
    }
    if !(k4 > 0.0) {
        return Err(Error::NoDecayChannel("|4>"));
    }
    let k5 = params.singlet_rate();
    // With no singlet drain validation guarantees k35 = k45 = 0, so r is moot.
    let r = if k5 > 0.0 { params.k51 / k5 } else { 0.0 };
    let p35 = params.k35 / k3;
    let p45 = params.k45 / k4;
    let direct = 1.0 / (1.0 + params.epsilon);
    let mixed = params.epsilon / (1.0 + params.epsilon);

    let p12 = direct * (params.k32 / k3 + p35 * (1.0 - r)) + mixed * (params.k42 / k4 + p45 * (1.0 - r));
    let p21 = direct * (params.k41 / k4 + p45 * r) + mixed * (params.k31 / k3 + p35 * r);
    CycleProbabilities::new(p12.clamp(0.0, 1.0), p21.clamp(0.0, 1.0))
}
