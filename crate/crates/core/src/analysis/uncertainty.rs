//! Monte-Carlo propagation of input uncertainties through the extraction.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::extract::{extract_flip_probabilities, extract_isc_probabilities, IscProbabilities};
use crate::error::{require_non_negative, Error, Result, Warning};
use crate::kinetics::{CycleProbabilities, EPSILON_BOUND};

/// A measured value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Measured {
    pub value: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub sigma: f64,
}

impl Measured {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Where the flip probabilities come from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", deny_unknown_fields))]
pub enum FlipSource {
    /// Flip probabilities measured directly.
    Probabilities { p12: Measured, p21: Measured },
    /// Limit and decay constant of a fitted pulse-train series; these are
    /// converted with the sampled `alpha` and `epsilon`.
    Series { p_inf: Measured, c: Measured },
}

/// Everything the extraction chain consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ExtractionInputs {
    pub flips: FlipSource,
    pub t13_ns: Measured,
    pub t14_ns: Measured,
    /// Only used with [`FlipSource::Series`].
    pub alpha: Measured,
    pub epsilon: Measured,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtractionReport {
    pub flips: CycleProbabilities,
    pub isc: IscProbabilities,
    pub sigma_p12: f64,
    pub sigma_p21: f64,
    pub sigma_p35: f64,
    pub sigma_p45: f64,
    pub sigma_branching_ratio: f64,
    pub draws: usize,
    /// Fraction of draws for which the extraction had a physical solution.
    pub feasible_fraction: f64,
    pub warnings: Vec<Warning>,
}

/// Minimum number of Monte-Carlo draws.
pub const MIN_DRAWS: usize = 1000;

fn flips_for(inputs: &ExtractionInputs, flips: (f64, f64), alpha: f64, epsilon: f64) -> Result<CycleProbabilities> {
    match inputs.flips {
        FlipSource::Probabilities { .. } => CycleProbabilities::new(flips.0, flips.1),
        FlipSource::Series { .. } => extract_flip_probabilities(flips.0, flips.1, alpha, epsilon),
    }
}

fn chain(
    inputs: &ExtractionInputs,
    flips: (f64, f64),
    t13: f64,
    t14: f64,
    alpha: f64,
    epsilon: f64,
) -> Result<(CycleProbabilities, IscProbabilities)> {
    let f = flips_for(inputs, flips, alpha, epsilon)?;
    let isc = extract_isc_probabilities(f.p12, f.p21, t13, t14, epsilon)?;
    Ok((f, isc))
}

/// Runs the extraction at the nominal inputs, then repeats it for `draws`
/// seeded normal perturbations of every input. `alpha` is truncated to
/// (0, 1] and `epsilon` to [0, 0.04] by resampling.
pub fn uncertainty_propagation(inputs: &ExtractionInputs, draws: usize, seed: u64) -> Result<ExtractionReport> {
    let (f0, f1) = match inputs.flips {
        FlipSource::Probabilities { p12, p21 } => (p12, p21),
        FlipSource::Series { p_inf, c } => (p_inf, c),
    };
    for (name, m) in [
        ("flip input sigma", f0),
        ("flip input sigma", f1),
        ("T13 sigma", inputs.t13_ns),
        ("T14 sigma", inputs.t14_ns),
        ("alpha sigma", inputs.alpha),
        ("epsilon sigma", inputs.epsilon),
    ] {
        require_non_negative(name, m.sigma)?;
    }
    let (flips, isc) = chain(
        inputs,
        (f0.value, f1.value),
        inputs.t13_ns.value,
        inputs.t14_ns.value,
        inputs.alpha.value,
        inputs.epsilon.value,
    )?;

    let draws = draws.max(MIN_DRAWS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |m: Measured, lo: f64, hi: f64| -> f64 {
        if m.sigma == 0.0 {
            return m.value;
        }
        for _ in 0..1000 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = m.value + m.sigma * z;
            if v > lo && v <= hi {
                return v;
            }
        }
        m.value.clamp(lo, hi)
    };

    let mut samples: [Vec<f64>; 5] = Default::default();
    for _ in 0..draws {
        let a = normal(f0, f64::NEG_INFINITY, f64::INFINITY);
        let b = normal(f1, f64::NEG_INFINITY, f64::INFINITY);
        let t13 = normal(inputs.t13_ns, 0.0, f64::INFINITY);
        let t14 = normal(inputs.t14_ns, 0.0, f64::INFINITY);
        let alpha = normal(inputs.alpha, 0.0, 1.0);
        let eps = normal(inputs.epsilon, -1e-300, EPSILON_BOUND);
        let eps = eps.max(0.0);
        if let Ok((f, i)) = chain(inputs, (a, b), t13, t14, alpha, eps) {
            for (s, v) in samples.iter_mut().zip([f.p12, f.p21, i.p35, i.p45, i.branching_ratio]) {
                s.push(v);
            }
        }
    }
    let feasible = samples[0].len();
    if feasible < 2 {
        return Err(Error::ModelInconsistent {
            best_residual: isc.residual,
        });
    }
    let fraction = feasible as f64 / draws as f64;
    let mut warnings = Vec::new();
    if fraction < 0.8 {
        warnings.push(Warning::LowFeasibility { fraction });
    }
    let sd = |v: &[f64]| {
        // Deviations from the first sample keep identical draws at exactly 0.
        let shift = v[0];
        let n = v.len() as f64;
        let mean = v.iter().map(|x| x - shift).sum::<f64>() / n;
        let var = v.iter().map(|x| (x - shift - mean) * (x - shift - mean)).sum::<f64>() / (n - 1.0);
        crate::math::sqrt(var)
    };
    Ok(ExtractionReport {
        flips,
        isc,
        sigma_p12: sd(&samples[0]),
        sigma_p21: sd(&samples[1]),
        sigma_p35: sd(&samples[2]),
        sigma_p45: sd(&samples[3]),
        sigma_branching_ratio: sd(&samples[4]),
        draws,
        feasible_fraction: fraction,
        warnings,
    })
}
