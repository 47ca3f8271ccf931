//! Fits of derived curves: singlet recovery, singlet lifetime versus
//! temperature and polarization along a pulse train.

use alloc::vec;
use alloc::vec::Vec;

use super::lm::{minimize, Model, Weighting};
use super::FitResult;
use crate::error::{Error, Result, Warning};
use crate::kinetics::BOLTZMANN_MEV_PER_K;
use crate::math;

fn check_xy(x: &[f64], y: &[f64], needed: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter {
            name: "data",
            value: y.len() as f64,
            reason: "x and y lengths differ",
        });
    }
    if x.len() < needed {
        return Err(Error::InsufficientData { needed, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit data"));
    }
    Ok(())
}

/// Two-parameter linear least squares `y ≈ a·u + b·v`.
fn linear2(u: &[f64], v: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let (mut uu, mut uv, mut vv, mut uy, mut vy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        uu += u[i] * u[i];
        uv += u[i] * v[i];
        vv += v[i] * v[i];
        uy += u[i] * y[i];
        vy += v[i] * y[i];
    }
    let det = uu * vv - uv * uv;
    if !(det.abs() > 1e-300) {
        return None;
    }
    Some(((uy * vv - vy * uv) / det, (vy * uu - uy * uv) / det))
}

fn sum_squares(y: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    y.iter().enumerate().map(|(i, v)| (v - f(i)) * (v - f(i))).sum()
}

/// Log-spaced values between `lo` and `hi`.
fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = math::ln(hi / lo) / (n - 1) as f64;
    (0..n).map(move |k| lo * math::exp(step * k as f64))
}

struct Recovery<'a> {
    delays: &'a [f64],
}

impl Model for Recovery<'_> {
    fn points(&self) -> usize {
        self.delays.len()
    }
    // Parameters: tau, amplitude, offset.
    fn eval(&self, p: &[f64], values: &mut [f64], jac: &mut [f64]) {
        let (tau, amp, offset) = (p[0], p[1], p[2]);
        for (i, &d) in self.delays.iter().enumerate() {
            let e = math::exp(-d / tau);
            values[i] = offset - amp * e;
            jac[i * 3] = -amp * e * d / (tau * tau);
            jac[i * 3 + 1] = -e;
            jac[i * 3 + 2] = 1.0;
        }
    }
    fn admissible(&self, p: &[f64]) -> bool {
        p[0] > 0.0
    }
}

/// Fits `offset − amplitude·exp(−delay/tau)` to window counts measured at
/// each dark delay.
pub fn fit_recovery(delays_ns: &[f64], counts: &[f64]) -> Result<FitResult> {
    check_xy(delays_ns, counts, 5)?;
    let mut order: Vec<usize> = (0..delays_ns.len()).collect();
    order.sort_by(|&a, &b| delays_ns[a].total_cmp(&delays_ns[b]));
    let d: Vec<f64> = order.iter().map(|&i| delays_ns[i]).collect();
    let y: Vec<f64> = order.iter().map(|&i| counts[i]).collect();
    let span = d[d.len() - 1] - d[0];
    let min_gap = d
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::Unidentifiable("recovery time (all delays equal)"));
    }

    // Grid over tau with exact offset/amplitude for each candidate.
    let ones = vec![1.0; d.len()];
    let mut best = (f64::INFINITY, span, 0.0, y[y.len() - 1]);
    for tau in log_grid(min_gap.min(span) * 0.1, span * 20.0, 240) {
        let e: Vec<f64> = d.iter().map(|x| -math::exp(-x / tau)).collect();
        if let Some((amp, offset)) = linear2(&e, &ones, &y) {
            let ss = sum_squares(&y, |i| offset + amp * e[i]);
            if ss < best.0 {
                best = (ss, tau, amp, offset);
            }
        }
    }
    let (_, tau0, amp0, off0) = best;
    let level = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let sol = minimize(
        &Recovery { delays: &d },
        &y,
        &[tau0, amp0, off0],
        &[tau0, level, level],
        Weighting::Unit,
    );
    let (tau, amp) = (sol.params[0], sol.params[1]);

    let mut warnings = Vec::new();
    // Robust noise level from the second differences of the data (scaled
    // median), so that a single outlier cannot hide itself.
    let mut curvature: Vec<f64> = y.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).collect();
    curvature.sort_by(f64::total_cmp);
    let noise = 1.4826 * curvature[curvature.len() / 2] / 2.449_489_742_783_178;
    let sign = if amp >= 0.0 { 1.0 } else { -1.0 };
    let tol = 4.0 * core::f64::consts::SQRT_2 * noise + 1e-9 * level;
    if y.windows(2).any(|w| sign * (w[1] - w[0]) < -tol) {
        warnings.push(Warning::NonMonotonic);
    }
    if span < 2.0 * tau {
        warnings.push(Warning::ShortSpan {
            span,
            time_constant: tau,
        });
    }
    Ok(FitResult::new(
        &["tau_singlet_ns", "amplitude", "offset"],
        sol.params.clone(),
        sol.sigmas.clone(),
        &sol,
        d.len(),
        d[0],
        warnings,
    ))
}

struct Temperature<'a> {
    temps: &'a [f64],
}

impl Model for Temperature<'_> {
    fn points(&self) -> usize {
        self.temps.len()
    }
    // Parameters: tau0, delta_e.
    fn eval(&self, p: &[f64], values: &mut [f64], jac: &mut [f64]) {
        let (tau0, de) = (p[0], p[1]);
        for (i, &t) in self.temps.iter().enumerate() {
            let kt = BOLTZMANN_MEV_PER_K * t;
            let x = de / kt;
            let shape = -math::expm1(-x);
            values[i] = tau0 * shape;
            jac[i * 2] = shape;
            jac[i * 2 + 1] = tau0 * math::exp(-x) / kt;
        }
    }
    fn admissible(&self, p: &[f64]) -> bool {
        p[0] > 0.0 && p[1] > 0.0
    }
}

/// Below this value of `exp(−ΔE/kT)` at the warmest temperature the data
/// carry no information on ΔE.
const FLAT_REGIME: f64 = 1e-3;

/// Least-squares fit of `tau0·[1 − exp(−ΔE/(k_B·T))]` to singlet lifetimes,
/// weighting every point by its inverse square so that each lifetime counts
/// with the same relative uncertainty.
pub fn fit_temperature_model(temperatures_k: &[f64], lifetimes_ns: &[f64]) -> Result<FitResult> {
    check_xy(temperatures_k, lifetimes_ns, 4)?;
    if temperatures_k.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            value: temperatures_k.iter().copied().fold(f64::INFINITY, f64::min),
            reason: "must be positive",
        });
    }
    if lifetimes_ns.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "lifetime",
            value: lifetimes_ns.iter().copied().fold(f64::INFINITY, f64::min),
            reason: "must be positive",
        });
    }
    let t_max = temperatures_k.iter().copied().fold(0.0, f64::max);
    let t_min = temperatures_k.iter().copied().fold(f64::INFINITY, f64::min);

    // ΔE grid with tau0 solved linearly for each candidate.
    let mut best = (f64::INFINITY, 1.0, 1.0);
    let lo = 0.01 * BOLTZMANN_MEV_PER_K * t_min;
    let hi = 50.0 * BOLTZMANN_MEV_PER_K * t_max;
    for de in log_grid(lo, hi, 400) {
        let shape: Vec<f64> = temperatures_k
            .iter()
            .map(|t| -math::expm1(-de / (BOLTZMANN_MEV_PER_K * t)))
            .collect();
        // Residuals relative to each lifetime.
        let ratio: Vec<f64> = shape.iter().zip(lifetimes_ns).map(|(s, y)| s / y).collect();
        let tau0 = ratio.iter().sum::<f64>() / ratio.iter().map(|r| r * r).sum::<f64>();
        let ss: f64 = ratio.iter().map(|r| (1.0 - tau0 * r) * (1.0 - tau0 * r)).sum();
        if ss < best.0 && tau0 > 0.0 {
            best = (ss, tau0, de);
        }
    }
    let (_, tau0, de) = best;
    let sol = minimize(
        &Temperature { temps: temperatures_k },
        lifetimes_ns,
        &[tau0, de],
        &[tau0, de],
        Weighting::Relative,
    );
    let de = sol.params[1];
    if math::exp(-de / (BOLTZMANN_MEV_PER_K * t_max)) < FLAT_REGIME {
        return Err(Error::Unidentifiable(
            "activation energy (all temperatures in the flat regime)",
        ));
    }
    Ok(FitResult::new(
        &["tau0_ns", "delta_e_meV"],
        sol.params.clone(),
        sol.sigmas.clone(),
        &sol,
        temperatures_k.len(),
        t_min,
        Vec::new(),
    ))
}

/// `q^k` with `0^0 = 1`.
fn power(q: f64, k: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else if q <= 0.0 {
        0.0
    } else {
        math::exp(k * math::ln(q))
    }
}

struct Approach<'a> {
    /// Pulse index minus the first index.
    k: &'a [f64],
}

impl Model for Approach<'_> {
    fn points(&self) -> usize {
        self.k.len()
    }
    // Parameters: limit, b (offset at the first pulse), q = exp(−1/c).
    fn eval(&self, p: &[f64], values: &mut [f64], jac: &mut [f64]) {
        let (limit, b, q) = (p[0], p[1], p[2]);
        for (i, &k) in self.k.iter().enumerate() {
            let qk = power(q, k);
            values[i] = limit + b * qk;
            jac[i * 3] = 1.0;
            jac[i * 3 + 1] = qk;
            jac[i * 3 + 2] = if k == 0.0 { 0.0 } else { b * k * power(q, k - 1.0) };
        }
    }
    fn admissible(&self, p: &[f64]) -> bool {
        p[2] >= 0.0 && p[2] < 1.0
    }
}

/// Fits `P_inf + a·exp(−n/c)` to the excited-state polarization measured at
/// pulse indices `n` (1 for the first pulse after the MW rotation).
///
/// Internally the model is `P_inf + b·q^(n − n_first)` with
/// `q = exp(−1/c)`, which stays well posed when the approach is complete
/// after one pulse. In that limit (`q = 0`) `c` is reported as 0 and `a` as
/// the offset at the first pulse.
pub fn fit_polarization_series(pulse_index: &[f64], polarization: &[f64]) -> Result<FitResult> {
    check_xy(pulse_index, polarization, 4)?;
    let n_first = pulse_index.iter().copied().fold(f64::INFINITY, f64::min);
    let n_max = pulse_index.iter().copied().fold(0.0, f64::max);
    let k: Vec<f64> = pulse_index.iter().map(|n| n - n_first).collect();
    let ones = vec![1.0; k.len()];

    let mut best = (f64::INFINITY, 0.5, polarization[polarization.len() - 1], 0.0);
    for step in 0..400 {
        let q = step as f64 / 400.0;
        let qk: Vec<f64> = k.iter().map(|k| power(q, *k)).collect();
        if let Some((b, limit)) = linear2(&qk, &ones, polarization) {
            let ss = sum_squares(polarization, |i| limit + b * qk[i]);
            if ss < best.0 {
                best = (ss, q, limit, b);
            }
        }
    }
    let (_, q0, limit0, b0) = best;
    let level = polarization.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let sol = minimize(
        &Approach { k: &k },
        polarization,
        &[limit0, b0, q0],
        &[level, level, 0.1],
        Weighting::Unit,
    );
    let (limit, b, q) = (sol.params[0], sol.params[1], sol.params[2]);
    let (sigma_b, sigma_q) = (sol.sigmas[1], sol.sigmas[2]);
    let (c, sigma_c, a, sigma_a) = if q > 0.0 {
        let ln_q = math::ln(q);
        let c = -1.0 / ln_q;
        // a = b·q^(−n_first); first-order propagation, correlations ignored.
        let lift = math::exp(-n_first * ln_q);
        let da_dq = -b * n_first * lift / q;
        let (ea, eq) = (lift * sigma_b, da_dq * sigma_q);
        let sigma_a = math::sqrt(ea * ea + eq * eq);
        (c, sigma_q / (q * ln_q * ln_q), b * lift, sigma_a)
    } else {
        (0.0, 0.0, b, sigma_b)
    };
    let mut warnings = Vec::new();
    if c > 10.0 * n_max {
        warnings.push(Warning::RateUnidentifiable { c });
    }
    Ok(FitResult::new(
        &["P_inf", "a", "c"],
        vec![limit, a, c],
        vec![sol.sigmas[0], sigma_a, sigma_c.abs()],
        &sol,
        pulse_index.len(),
        n_first,
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{CycleProbabilities, SingletTemperatureModel};

    #[test]
    fn recovery_exact_on_noiseless_data() {
        let d: Vec<f64> = (0..12).map(|k| 60.0 * k as f64).collect();
        let y: Vec<f64> = d.iter().map(|x| 900.0 - 300.0 * math::exp(-x / 176.0)).collect();
        let fit = fit_recovery(&d, &y).unwrap();
        assert!((fit.value("tau_singlet_ns").unwrap() / 176.0 - 1.0).abs() < 1e-6);
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn recovery_long_delays_have_no_amplitude() {
        let d: Vec<f64> = (0..8).map(|k| 5000.0 + 500.0 * k as f64).collect();
        let y: Vec<f64> = d.iter().map(|x| 900.0 - 300.0 * math::exp(-x / 176.0)).collect();
        let fit = fit_recovery(&d, &y).unwrap();
        let a = fit.value("amplitude").unwrap();
        let tau = fit.value("tau_singlet_ns").unwrap();
        assert!((a * math::exp(-d[0] / tau)).abs() < 1e-6);
        assert!((fit.value("offset").unwrap() - 900.0).abs() < 1e-6);
    }

    #[test]
    fn recovery_flags_outliers_and_short_spans() {
        let d: Vec<f64> = (0..10).map(|k| 20.0 * k as f64).collect();
        let mut y: Vec<f64> = d.iter().map(|x| 900.0 - 300.0 * math::exp(-x / 176.0)).collect();
        y[5] -= 200.0;
        let fit = fit_recovery(&d, &y).unwrap();
        assert!(fit.warnings.contains(&Warning::NonMonotonic));
        assert!(fit.warnings.iter().any(|w| matches!(w, Warning::ShortSpan { .. })));
        assert!(fit_recovery(&d[..4], &y[..4]).is_err());
    }

    fn temps() -> Vec<f64> {
        vec![13.0, 25.0, 50.0, 75.0, 100.0, 150.0, 200.0, 250.0, 300.0]
    }

    #[test]
    fn temperature_fit_exact_and_scales() {
        let m = SingletTemperatureModel::new(371.0, 16.6).unwrap();
        let y: Vec<f64> = temps().iter().map(|t| m.lifetime(*t)).collect();
        let fit = fit_temperature_model(&temps(), &y).unwrap();
        assert!((fit.value("tau0_ns").unwrap() / 371.0 - 1.0).abs() < 1e-6);
        assert!((fit.value("delta_e_meV").unwrap() / 16.6 - 1.0).abs() < 1e-6);

        let scaled: Vec<f64> = y.iter().map(|v| 1.7 * v).collect();
        let fit2 = fit_temperature_model(&temps(), &scaled).unwrap();
        assert!((fit2.value("tau0_ns").unwrap() / (1.7 * 371.0) - 1.0).abs() < 1e-6);
        assert!((fit2.value("delta_e_meV").unwrap() / 16.6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn temperature_fit_rejects_non_positive_lifetimes() {
        let y = [371.0, 360.0, 0.0, 300.0, 250.0, 176.0];
        assert!(fit_temperature_model(&temps()[..6], &y).is_err());
    }

    #[test]
    fn temperature_fit_rejects_flat_regime() {
        let t = [4.0, 5.0, 6.0, 8.0, 10.0];
        let y = [371.0; 5];
        assert!(matches!(fit_temperature_model(&t, &y), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn series_matches_recursion_closed_form() {
        let c = CycleProbabilities::new(0.078, 0.315).unwrap();
        let alpha = 0.95;
        let steps = c.pulse_series(0.1, alpha, 0.0, 30);
        let n: Vec<f64> = (1..=30).map(|k| k as f64).collect();
        let p: Vec<f64> = steps.iter().map(|s| s.excited).collect();
        let fit = fit_polarization_series(&n, &p).unwrap();
        let want_c = -1.0 / math::ln(1.0 - alpha * (0.078 + 0.315));
        assert!((fit.value("c").unwrap() / want_c - 1.0).abs() < 1e-6);
        assert!((fit.value("P_inf").unwrap() - 0.315 / 0.393).abs() < 1e-6);
    }

    #[test]
    fn constant_series_has_no_amplitude() {
        let n = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let fit = fit_polarization_series(&n, &[0.6; 6]).unwrap();
        assert!(fit.value("a").unwrap().abs() < 1e-9);
        assert!((fit.value("P_inf").unwrap() - 0.6).abs() < 1e-9);
    }

    #[test]
    fn single_jump_series_settles_on_last_value() {
        let n = [1.0, 2.0, 3.0, 4.0, 5.0];
        let p = [0.2, 0.7, 0.7, 0.7, 0.7];
        let fit = fit_polarization_series(&n, &p).unwrap();
        assert!((fit.value("P_inf").unwrap() - 0.7).abs() < 1e-6);
        assert!(fit.value("c").unwrap() < 1.0);
    }
}
