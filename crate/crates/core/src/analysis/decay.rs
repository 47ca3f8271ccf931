//! Exponential decay fits to TCSPC histograms.

use alloc::vec;
use alloc::vec::Vec;

use super::lm::{minimize, Model, Weighting};
use super::FitResult;
use crate::error::{Error, Result, Warning};
use crate::instrument::{TcspcHistogram, DEFAULT_IRF_SIGMA_NS};
use crate::math;

/// Fewest bins above background a decay fit accepts.
pub const MIN_SIGNAL_BINS: usize = 20;

/// Window and constraint options shared by the decay fits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DecayFitOptions {
    /// Width of the instrument response; the fit starts 2σ past the peak.
    pub irf_sigma_ns: f64,
    /// Explicit fit start, overriding the peak rule.
    pub start_ns: Option<f64>,
    /// Last bin center included in the fit.
    pub end_ns: Option<f64>,
    /// Hold `(T13, T14)` fixed and fit only amplitudes and background.
    pub fixed_taus: Option<(f64, f64)>,
}

impl Default for DecayFitOptions {
    fn default() -> Self {
        Self {
            irf_sigma_ns: DEFAULT_IRF_SIGMA_NS,
            start_ns: None,
            end_ns: None,
            fixed_taus: None,
        }
    }
}

/// Sum of exponentials integrated exactly over each bin, plus a constant
/// background per bin. Amplitudes are rates (counts/ns) at t = 0.
struct BinnedExponentials<'a> {
    lo: &'a [f64],
    hi: &'a [f64],
    /// Lifetimes held fixed; `None` means the lifetime is a parameter.
    fixed: Option<Vec<f64>>,
    components: usize,
}

impl BinnedExponentials<'_> {
    fn layout(&self, p: &[f64]) -> (Vec<(f64, f64)>, f64) {
        let k = self.components;
        let comps = match &self.fixed {
            Some(taus) => (0..k).map(|i| (p[i], taus[i])).collect(),
            None => (0..k).map(|i| (p[2 * i], p[2 * i + 1])).collect(),
        };
        (comps, *p.last().expect("background parameter"))
    }
}

impl Model for BinnedExponentials<'_> {
    fn points(&self) -> usize {
        self.lo.len()
    }

    fn eval(&self, p: &[f64], values: &mut [f64], jac: &mut [f64]) {
        let np = p.len();
        let (comps, bg) = self.layout(p);
        let free_tau = self.fixed.is_none();
        for (i, (&a, &b)) in self.lo.iter().zip(self.hi).enumerate() {
            let row = &mut jac[i * np..(i + 1) * np];
            let mut v = bg;
            for (c, &(amp, tau)) in comps.iter().enumerate() {
                let ea = math::exp(-a / tau);
                let eb = math::exp(-b / tau);
                let shape = tau * (ea - eb);
                v += amp * shape;
                if free_tau {
                    row[2 * c] = shape;
                    // d/dτ [τ(e^{-a/τ} − e^{-b/τ})]
                    row[2 * c + 1] = amp * ((ea - eb) + (a * ea - b * eb) / tau);
                } else {
                    row[c] = shape;
                }
            }
            row[np - 1] = 1.0;
            values[i] = v;
        }
    }

    fn admissible(&self, p: &[f64]) -> bool {
        self.fixed.is_some() || (0..self.components).all(|c| p[2 * c + 1] > 0.0)
    }
}

struct Prepared {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<f64>,
    background: f64,
    start: f64,
}

fn prepare(hist: &TcspcHistogram, options: &DecayFitOptions, need_signal: bool) -> Result<Prepared> {
    if hist.is_empty() {
        return Err(Error::InsufficientData {
            needed: MIN_SIGNAL_BINS,
            got: 0,
        });
    }
    let centers = hist.centers();
    let counts = hist.counts();
    let peak = (0..counts.len())
        .max_by(|&i, &j| counts[i].total_cmp(&counts[j]))
        .expect("non-empty");
    let start = options.start_ns.unwrap_or(centers[peak] + 2.0 * options.irf_sigma_ns);
    let end = options.end_ns.unwrap_or(f64::INFINITY);

    // Background from bins well before the peak, else from the last tenth.
    let pre: Vec<f64> = centers
        .iter()
        .zip(counts)
        .filter(|(c, _)| **c < centers[peak] - 4.0 * options.irf_sigma_ns - hist.bin_width())
        .map(|(_, n)| *n)
        .collect();
    let background = if pre.len() >= 3 {
        pre.iter().sum::<f64>() / pre.len() as f64
    } else {
        let tail = &counts[counts.len() - (counts.len() / 10).max(1)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    };

    let half = 0.5 * hist.bin_width();
    let (mut lo, mut hi, mut sel) = (Vec::new(), Vec::new(), Vec::new());
    for (&c, &n) in centers.iter().zip(counts) {
        if c >= start && c <= end {
            lo.push(c - half);
            hi.push(c + half);
            sel.push(n);
        }
    }
    let noise = math::sqrt(background.max(1.0));
    let signal = if need_signal {
        sel.iter().filter(|&&n| n > background + noise).count()
    } else {
        sel.len()
    };
    if signal < MIN_SIGNAL_BINS {
        return Err(Error::InsufficientData {
            needed: MIN_SIGNAL_BINS,
            got: signal,
        });
    }
    Ok(Prepared {
        lo,
        hi,
        counts: sel,
        background,
        start,
    })
}

/// Log-linear regression of background-subtracted counts; returns the
/// lifetime or `None` when the slope is not a decay.
fn log_slope(t: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (*t, math::ln(*v)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    (slope < 0.0 && slope.is_finite()).then(|| (-1.0 / slope, math::exp(my - slope * mt)))
}

/// Linear least squares for amplitudes and background given lifetimes.
fn linear_amplitudes(prep: &Prepared, taus: &[f64]) -> Vec<f64> {
    let model = BinnedExponentials {
        lo: &prep.lo,
        hi: &prep.hi,
        fixed: Some(taus.to_vec()),
        components: taus.len(),
    };
    let start: Vec<f64> = taus.iter().map(|_| 0.0).chain([prep.background]).collect();
    let scale = amplitude_scale(prep, taus);
    minimize(&model, &prep.counts, &start, &scale, Weighting::Unit).params
}

fn amplitude_scale(prep: &Prepared, taus: &[f64]) -> Vec<f64> {
    let peak = prep.counts.iter().fold(1.0f64, |m, v| m.max(*v));
    let width = prep.hi[0] - prep.lo[0];
    let t0 = prep.lo[0];
    taus.iter()
        .map(|tau| peak / width * math::exp(t0 / tau))
        .chain([prep.background.max(1.0)])
        .collect()
}

/// Peeling initialization: slow lifetime from the late third of the
/// window, fast lifetime from the early third after subtracting the slow
/// component.
fn initial_lifetimes(prep: &Prepared) -> (f64, f64) {
    let t: Vec<f64> = prep.lo.iter().zip(&prep.hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let y: Vec<f64> = prep.counts.iter().map(|n| n - prep.background).collect();
    // Only the part of the window that still carries signal.
    let noise = math::sqrt(prep.background.max(1.0));
    let usable = y
        .iter()
        .rposition(|v| *v > 3.0 * noise)
        .map_or(y.len(), |i| i + 1)
        .max(9);
    let (t, y) = (&t[..usable.min(t.len())], &y[..usable.min(y.len())]);
    let third = t.len() / 3;
    let span = t[t.len() - 1] - t[0];
    let (slow, slow_amp) = log_slope(&t[2 * third..], &y[2 * third..]).unwrap_or((span / 3.0, y[0]));
    let peeled: Vec<f64> = t[..third]
        .iter()
        .zip(&y[..third])
        .map(|(t, v)| v - slow_amp * math::exp(-t / slow))
        .collect();
    let fast = log_slope(&t[..third], &peeled)
        .map(|f| f.0)
        .filter(|f| *f < slow)
        .unwrap_or(0.5 * slow);
    (slow, fast)
}

/// Best lifetime pair on a logarithmic grid, amplitudes and background
/// solved linearly at each node and scored with Poisson-like weights.
fn grid_lifetimes(prep: &Prepared) -> (f64, f64) {
    const NODES: usize = 16;
    let width = prep.hi[0] - prep.lo[0];
    let span = prep.hi[prep.hi.len() - 1] - prep.lo[0];
    let (lo, hi) = (math::ln(width), math::ln(span));
    let tau = |k: usize| math::exp(lo + (hi - lo) * k as f64 / (NODES - 1) as f64);
    let mut values = vec![0.0; prep.counts.len()];
    let mut jac = vec![0.0; prep.counts.len() * 3];
    let mut best = (f64::INFINITY, (span / 3.0, span / 6.0));
    for i in 1..NODES {
        for j in 0..i {
            let taus = [tau(i), tau(j)];
            let model = BinnedExponentials {
                lo: &prep.lo,
                hi: &prep.hi,
                fixed: Some(taus.to_vec()),
                components: 2,
            };
            let amps = linear_amplitudes(prep, &taus);
            model.eval(&amps, &mut values, &mut jac);
            let score: f64 = values
                .iter()
                .zip(&prep.counts)
                .map(|(m, n)| (m - n) * (m - n) / n.max(1.0))
                .sum();
            if score < best.0 {
                best = (score, (taus[0], taus[1]));
            }
        }
    }
    best.1
}

const BIEXP_NAMES: [&str; 5] = ["A3", "T13_ns", "A4", "T14_ns", "background"];

/// Fits `A3·exp(−t/T13) + A4·exp(−t/T14) + background` to the decay
/// tail, Poisson-weighted. `T13` is always the longer lifetime.
pub fn fit_biexponential(hist: &TcspcHistogram, options: &DecayFitOptions) -> Result<FitResult> {
    let prep = prepare(hist, options, true)?;
    let mut warnings = Vec::new();

    if let Some((t13, t14)) = options.fixed_taus {
        for (name, v) in [("T13", t13), ("T14", t14)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "fixed lifetime must be positive",
                });
            }
        }
        let taus = vec![t13, t14];
        let model = BinnedExponentials {
            lo: &prep.lo,
            hi: &prep.hi,
            fixed: Some(taus.clone()),
            components: 2,
        };
        let start = linear_amplitudes(&prep, &taus);
        let scale = amplitude_scale(&prep, &taus);
        let sol = minimize(&model, &prep.counts, &start, &scale, Weighting::Poisson);
        let p = &sol.params;
        let s = &sol.sigmas;
        return Ok(FitResult::new(
            &BIEXP_NAMES,
            vec![p[0], t13, p[1], t14, p[2]],
            vec![s[0], 0.0, s[1], 0.0, s[2]],
            &sol,
            prep.counts.len(),
            prep.start,
            warnings,
        ));
    }

    // The peeling start occasionally lands in the basin of the degenerate
    // solution with equal lifetimes and opposite amplitudes, so a coarse
    // grid supplies a second start and the better optimum wins.
    let model = BinnedExponentials {
        lo: &prep.lo,
        hi: &prep.hi,
        fixed: None,
        components: 2,
    };
    let mut sol: Option<super::lm::Solution> = None;
    for (slow, fast) in [initial_lifetimes(&prep), grid_lifetimes(&prep)] {
        let amps = linear_amplitudes(&prep, &[slow, fast]);
        let start = vec![amps[0], slow, amps[1], fast, amps[2]];
        let amp_scale = amplitude_scale(&prep, &[slow, fast]);
        let scale = vec![amp_scale[0], slow, amp_scale[1], fast, amp_scale[2]];
        let candidate = minimize(&model, &prep.counts, &start, &scale, Weighting::Poisson);
        if sol.as_ref().is_none_or(|best| candidate.chi2 < best.chi2) {
            sol = Some(candidate);
        }
    }
    let sol = sol.expect("at least one start");
    let (mut p, mut s) = (sol.params.clone(), sol.sigmas.clone());
    if p[3] > p[1] {
        p.swap(0, 2);
        p.swap(1, 3);
        s.swap(0, 2);
        s.swap(1, 3);
    }
    let ratio = p[1] / p[3];
    if ratio < 1.2 {
        warnings.push(Warning::IndistinguishableComponents { ratio });
    }
    Ok(FitResult::new(
        &BIEXP_NAMES,
        p,
        s,
        &sol,
        prep.counts.len(),
        prep.start,
        warnings,
    ))
}

/// Fits `A·exp(−t/T) + background`, Poisson-weighted. Unlike the
/// bi-exponential fit it accepts a window without signal, returning an
/// amplitude near zero.
pub fn fit_monoexponential(hist: &TcspcHistogram, options: &DecayFitOptions) -> Result<FitResult> {
    let prep = prepare(hist, options, false)?;
    let model = BinnedExponentials {
        lo: &prep.lo,
        hi: &prep.hi,
        fixed: None,
        components: 1,
    };
    let t: Vec<f64> = prep.lo.iter().zip(&prep.hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let y: Vec<f64> = prep.counts.iter().map(|n| n - prep.background).collect();
    let span = t[t.len() - 1] - t[0];
    let tau = log_slope(&t, &y).map_or(span / 3.0, |f| f.0);
    let amps = linear_amplitudes(&prep, &[tau]);
    let amp_scale = amplitude_scale(&prep, &[tau]);
    let sol = minimize(
        &model,
        &prep.counts,
        &[amps[0], tau, amps[1]],
        &[amp_scale[0], tau, amp_scale[1]],
        Weighting::Poisson,
    );
    Ok(FitResult::new(
        &["A", "T_ns", "background"],
        sol.params.clone(),
        sol.sigmas.clone(),
        &sol,
        prep.counts.len(),
        prep.start,
        Vec::new(),
    ))
}

/// Excited-state polarization from the two decay amplitudes,
/// `A3 / (A3 + A4)`. Both levels radiate at the same rate, so the
/// amplitudes at the pulse are proportional to the populations.
pub fn polarization_from_amplitudes(a3: f64, a4: f64) -> Result<f64> {
    for (name, v) in [("A3", a3), ("A4", a4)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "amplitude must be finite and non-negative",
            });
        }
    }
    if a3 + a4 == 0.0 {
        return Err(Error::InvalidParameter {
            name: "A3+A4",
            value: 0.0,
            reason: "amplitudes are both zero",
        });
    }
    Ok(a3 / (a3 + a4))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Expected counts of a bi-exponential starting at t = 0, no IRF.
    fn synthetic(a3: f64, t13: f64, a4: f64, t14: f64, bg: f64, width: f64, bins: usize) -> TcspcHistogram {
        let counts = (0..bins)
            .map(|k| {
                let (a, b) = (k as f64 * width, (k + 1) as f64 * width);
                a3 * t13 * (math::exp(-a / t13) - math::exp(-b / t13))
                    + a4 * t14 * (math::exp(-a / t14) - math::exp(-b / t14))
                    + bg
            })
            .collect();
        TcspcHistogram::uniform(0.0, width, counts).unwrap()
    }

    fn exact() -> DecayFitOptions {
        DecayFitOptions {
            irf_sigma_ns: 0.0,
            start_ns: Some(0.0),
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_biexponential_is_exact() {
        let h = synthetic(4000.0, 13.7, 3000.0, 7.3, 5.0, 0.512, 300);
        let fit = fit_biexponential(&h, &exact()).unwrap();
        assert!(fit.converged);
        for (name, want) in [
            ("A3", 4000.0),
            ("T13_ns", 13.7),
            ("A4", 3000.0),
            ("T14_ns", 7.3),
            ("background", 5.0),
        ] {
            let got = fit.value(name).unwrap();
            assert!((got / want - 1.0).abs() < 1e-6, "{name}: {got}");
        }
    }

    #[test]
    fn labels_put_longer_lifetime_first() {
        let h = synthetic(1000.0, 4.0, 2000.0, 12.0, 0.0, 0.5, 300);
        let fit = fit_biexponential(&h, &exact()).unwrap();
        assert!((fit.value("T13_ns").unwrap() - 12.0).abs() < 1e-6);
        assert!((fit.value("A3").unwrap() - 2000.0).abs() < 1e-3);
    }

    #[test]
    fn close_lifetimes_are_flagged() {
        let h = synthetic(1000.0, 10.0, 1000.0, 9.0, 1.0, 0.5, 300);
        let fit = fit_biexponential(&h, &exact()).unwrap();
        assert!(fit
            .warnings
            .iter()
            .any(|w| matches!(w, Warning::IndistinguishableComponents { .. })));
    }

    #[test]
    fn fixed_taus_fit_amplitudes_only() {
        let h = synthetic(700.0, 13.7, 300.0, 7.3, 2.0, 0.512, 200);
        let opts = DecayFitOptions {
            fixed_taus: Some((13.7, 7.3)),
            ..exact()
        };
        let fit = fit_biexponential(&h, &opts).unwrap();
        let p = polarization_from_amplitudes(fit.value("A3").unwrap(), fit.value("A4").unwrap()).unwrap();
        assert!((p - 0.7).abs() < 1e-9);
    }

    #[test]
    fn monoexponential_exact_and_worse_on_two_components() {
        let h = synthetic(5000.0, 9.0, 0.0, 1.0, 3.0, 0.5, 200);
        let fit = fit_monoexponential(&h, &exact()).unwrap();
        assert!((fit.value("T_ns").unwrap() / 9.0 - 1.0).abs() < 1e-6);

        let h = synthetic(4000.0, 13.26, 4000.0, 6.89, 3.0, 0.512, 300);
        let mono = fit_monoexponential(&h, &exact()).unwrap();
        let bi = fit_biexponential(&h, &exact()).unwrap();
        assert!(mono.residual_norm > bi.residual_norm);
    }

    #[test]
    fn flat_background_gives_no_amplitude() {
        let h = TcspcHistogram::uniform(0.0, 0.5, vec![40.0; 100]).unwrap();
        let fit = fit_monoexponential(&h, &exact()).unwrap();
        assert!(fit.value("A").unwrap().abs() < 1e-6);
        assert!((fit.value("background").unwrap() - 40.0).abs() < 1e-6);
        assert!(fit_biexponential(&h, &exact()).is_err());
    }

    #[test]
    fn too_few_signal_bins() {
        let h = synthetic(10.0, 1.0, 0.0, 1.0, 0.0, 1.0, 10);
        assert!(matches!(
            fit_biexponential(&h, &exact()),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn polarization_from_amplitudes_cases() {
        assert_eq!(polarization_from_amplitudes(2.0, 2.0).unwrap(), 0.5);
        assert_eq!(polarization_from_amplitudes(2.0, 0.0).unwrap(), 1.0);
        assert!(polarization_from_amplitudes(0.0, 0.0).is_err());
        assert!(polarization_from_amplitudes(-1.0, 1.0).is_err());
    }
}
