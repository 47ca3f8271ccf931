//! Damped Gauss-Newton for small nonlinear least-squares problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

pub(crate) const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Weighting {
    /// Every point has weight one; uncertainties are scaled by the residual
    /// variance.
    Unit,
    /// Weight `1/max(model, 1)`, refreshed from the current model at every
    /// iteration. The fixed point solves the Poisson likelihood equations.
    Poisson,
    /// Weight `1/y²` from the data: every point has the same relative
    /// uncertainty. Uncertainties are scaled by the residual variance.
    Relative,
}

/// Fills model values and the row-major Jacobian (`points × params`) for
/// the given parameters.
pub(crate) trait Model {
    fn points(&self) -> usize;
    fn eval(&self, params: &[f64], values: &mut [f64], jacobian: &mut [f64]);
    /// Parameters outside the model's domain are never accepted.
    fn admissible(&self, _params: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub params: Vec<f64>,
    /// Covariance diagonal square roots; infinite where the data do not
    /// constrain a direction.
    pub sigmas: Vec<f64>,
    /// Weighted sum of squared residuals at the solution.
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Linearization {
    chi2: f64,
    normal: Vec<f64>,
    gradient: Vec<f64>,
    weights: Vec<f64>,
}

fn weights_for(weighting: Weighting, data: &[f64], values: &[f64]) -> Vec<f64> {
    match weighting {
        Weighting::Unit => vec![1.0; values.len()],
        Weighting::Poisson => values.iter().map(|v| 1.0 / v.max(1.0)).collect(),
        Weighting::Relative => data.iter().map(|y| 1.0 / (y * y).max(f64::MIN_POSITIVE)).collect(),
    }
}

fn chi2(data: &[f64], values: &[f64], weights: &[f64]) -> f64 {
    data.iter()
        .zip(values)
        .zip(weights)
        .map(|((y, f), w)| w * (y - f) * (y - f))
        .sum()
}

fn linearize<M: Model>(model: &M, data: &[f64], params: &[f64], weighting: Weighting, scale: &[f64]) -> Linearization {
    let (n, p) = (model.points(), params.len());
    let mut values = vec![0.0; n];
    let mut jac = vec![0.0; n * p];
    model.eval(params, &mut values, &mut jac);
    let weights = weights_for(weighting, data, &values);
    let mut normal = vec![0.0; p * p];
    let mut gradient = vec![0.0; p];
    for i in 0..n {
        let row = &jac[i * p..(i + 1) * p];
        let w = weights[i];
        let r = data[i] - values[i];
        for a in 0..p {
            let ja = row[a] * scale[a];
            gradient[a] += w * ja * r;
            for b in a..p {
                normal[a * p + b] += w * ja * row[b] * scale[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            normal[a * p + b] = normal[b * p + a];
        }
    }
    Linearization {
        chi2: chi2(data, &values, &weights),
        normal,
        gradient,
        weights,
    }
}

/// Cholesky solve of the symmetric system after Jacobi equilibration.
/// Returns `None` when the matrix is numerically rank deficient.
fn spd_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let d: Vec<f64> = (0..p).map(|i| a[i * p + i]).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / math::sqrt(*v)).collect();
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j] * s[i] * s[j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(sum > 1e-13) {
                    return None;
                }
                l[i * p + i] = math::sqrt(sum);
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    let mut y: Vec<f64> = (0..p).map(|i| b[i] * s[i]).collect();
    for i in 0..p {
        for k in 0..i {
            y[i] -= l[i * p + k] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            y[i] -= l[k * p + i] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    Some(y.iter().zip(&s).map(|(v, si)| v * si).collect())
}

fn relative_step(step: &[f64]) -> f64 {
    // Steps are in scaled units, so one unit is the parameter's magnitude.
    step.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimizes the weighted squared residuals of `model` against `data`
/// starting from `start`. `scale` gives the typical magnitude of each
/// parameter; steps are measured relative to it.
pub(crate) fn minimize<M: Model>(
    model: &M,
    data: &[f64],
    start: &[f64],
    scale: &[f64],
    weighting: Weighting,
) -> Solution {
    let p = start.len();
    let n = model.points();
    let scale: Vec<f64> = scale
        .iter()
        .map(|s| if *s > 0.0 && s.is_finite() { *s } else { 1.0 })
        .collect();
    let mut params = start.to_vec();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut values = vec![0.0; n];
    let mut scratch = vec![0.0; n * p];

    let trial_chi2 = |trial: &[f64], weights: &[f64], values: &mut [f64], scratch: &mut [f64]| {
        if !model.admissible(trial) {
            return f64::INFINITY;
        }
        model.eval(trial, values, scratch);
        let c = chi2(data, values, weights);
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    };
    let apply = |params: &[f64], step: &[f64]| -> Vec<f64> {
        params
            .iter()
            .zip(step)
            .zip(&scale)
            .map(|((x, d), s)| x + d * s)
            .collect()
    };

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let lin = linearize(model, data, &params, weighting, &scale);

        if let Some(step) = spd_solve(&lin.normal, &lin.gradient, p) {
            if relative_step(&step) < STEP_TOLERANCE {
                let trial = apply(&params, &step);
                if model.admissible(&trial) {
                    params = trial;
                }
                converged = true;
                break;
            }
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = lin.normal.clone();
            for i in 0..p {
                damped[i * p + i] += lambda * (lin.normal[i * p + i] + 1e-12);
            }
            let Some(step) = spd_solve(&damped, &lin.gradient, p) else {
                lambda *= 4.0;
                continue;
            };
            if relative_step(&step) < STEP_TOLERANCE {
                converged = true;
                break;
            }
            let trial = apply(&params, &step);
            let c = trial_chi2(&trial, &lin.weights, &mut values, &mut scratch);
            if c < lin.chi2 {
                params = trial;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if converged || !accepted {
            // No damping produced a decrease: the current point is a
            // minimum up to rounding.
            converged = true;
            break;
        }
    }

    let lin = linearize(model, data, &params, weighting, &scale);
    let dof = n.saturating_sub(p);
    let variance_scale = match weighting {
        Weighting::Poisson => 1.0,
        Weighting::Unit | Weighting::Relative if dof > 0 => lin.chi2 / dof as f64,
        Weighting::Unit | Weighting::Relative => 0.0,
    };
    let sigmas = covariance_diagonal(&lin.normal, p)
        .map(|d| {
            d.iter()
                .zip(&scale)
                .map(|(v, s)| math::sqrt(v.max(0.0) * variance_scale) * s)
                .collect()
        })
        .unwrap_or_else(|| vec![f64::INFINITY; p]);
    Solution {
        params,
        sigmas,
        chi2: lin.chi2,
        iterations,
        converged,
    }
}

fn covariance_diagonal(normal: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        out.push(spd_solve(normal, &e, p)?[j]);
    }
    Some(out)
}
