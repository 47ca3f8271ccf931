use alloc::vec::Vec;

use crate::error::{check_finite, require_non_negative, Error, Result};
use crate::kinetics::{Populations, RateMatrix, LEVELS, MHZ_NS};
use crate::linalg::Dense;

/// Exact one-step map of a generator over a fixed interval.
///
/// Holds both `exp(G·dt)` and `∫₀^dt exp(G·s) ds`, the latter in μs so that
/// dotting it with MHz rates gives a dimensionless count. Both come from one
/// exponential of the block matrix `[[G·dt, I·dt], [0, 0]]`.
#[derive(Debug, Clone)]
pub struct Propagator {
    dt_ns: f64,
    step: Dense,
    integral: Dense,
}

impl Propagator {
    pub fn new(matrix: &RateMatrix, dt_ns: f64) -> Result<Self> {
        require_non_negative("duration", dt_ns)?;
        let g = matrix.to_dense();
        if !g.is_finite() {
            return Err(Error::NonFinite("generator"));
        }
        let s = dt_ns * MHZ_NS;
        let mut aug = Dense::zeros(2 * LEVELS);
        for i in 0..LEVELS {
            for j in 0..LEVELS {
                aug[(i, j)] = g[(i, j)] * s;
            }
            aug[(i, LEVELS + i)] = s;
        }
        let e = aug.expm();
        if !e.is_finite() {
            return Err(Error::NonFinite("matrix exponential"));
        }
        Ok(Self {
            dt_ns,
            step: e.block(0, 0, LEVELS),
            integral: e.block(0, LEVELS, LEVELS),
        })
    }

    pub fn dt_ns(&self) -> f64 {
        self.dt_ns
    }

    /// Populations one step later.
    pub fn advance(&self, p: &Populations) -> Result<Populations> {
        let out = self.step.mul_vec(&p.to_array());
        let arr: [f64; LEVELS] = out.try_into().expect("six components");
        Populations::from_array(arr).clamp_rounding()
    }

    /// Time integral (μs) of each component over the step, starting from `p`.
    pub fn integrate(&self, p: &Populations) -> [f64; LEVELS] {
        self.integral.mul_vec(&p.to_array()).try_into().expect("six components")
    }

    /// Photons emitted during the step.
    pub fn emitted(&self, matrix: &RateMatrix, p: &Populations) -> f64 {
        let occ = self.integrate(p);
        matrix.emission_rate(occ[3], occ[4]) / MHZ_NS
    }
}

/// `exp(duration·G)·initial`, with duration in ns.
pub fn propagate(matrix: &RateMatrix, initial: &Populations, duration_ns: f64) -> Result<Populations> {
    check_finite(duration_ns, "duration")?;
    require_non_negative("duration", duration_ns)?;
    if duration_ns == 0.0 {
        return Ok(*initial);
    }
    let g = matrix.to_dense();
    if !g.is_finite() {
        return Err(Error::NonFinite("generator"));
    }
    let phi = g.scaled(duration_ns * MHZ_NS).expm();
    if !phi.is_finite() {
        return Err(Error::NonFinite("matrix exponential"));
    }
    let arr: [f64; LEVELS] = phi.mul_vec(&initial.to_array()).try_into().expect("six components");
    Populations::from_array(arr).clamp_rounding()
}

/// Samples at `t = 0, dt, 2dt, …` up to and including `duration` (to within
/// a relative 1e-9 of a step).
pub fn propagate_trace(
    matrix: &RateMatrix,
    initial: &Populations,
    duration_ns: f64,
    dt_ns: f64,
) -> Result<Vec<Populations>> {
    if !(dt_ns > 0.0) || !dt_ns.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt_ns,
            reason: "must be positive",
        });
    }
    require_non_negative("duration", duration_ns)?;
    let steps = crate::math::floor(duration_ns / dt_ns + 1e-9) as usize;
    let prop = Propagator::new(matrix, dt_ns)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut p = *initial;
    out.push(p);
    for _ in 0..steps {
        p = prop.advance(&p)?;
        out.push(p);
    }
    Ok(out)
}

/// Threshold on the second-smallest singular value below which the kernel is
/// considered more than one-dimensional.
const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// The normalized stationary vector of the generator.
pub fn steady_state(matrix: &RateMatrix) -> Result<Populations> {
    let g = matrix.to_dense();
    if !g.is_finite() {
        return Err(Error::NonFinite("generator"));
    }
    let (sigma, v) = g.svd_right();
    let second = sigma[LEVELS - 2];
    if second < DEGENERACY_THRESHOLD {
        return Err(Error::NonUniqueSteadyState {
            second_singular_value: second,
        });
    }
    let mut kernel = [0.0; LEVELS];
    for (i, k) in kernel.iter_mut().enumerate() {
        *k = v[(i, LEVELS - 1)];
    }
    let total: f64 = kernel.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::NonFinite("steady-state kernel"));
    }
    for k in kernel.iter_mut() {
        *k /= total;
    }
    // One Newton-like polish step: the bordered system [G; 1ᵀ] p = [0; 1]
    // solved in least-squares sense via its normal equations.
    let polished = polish_kernel(&g, &kernel).unwrap_or(kernel);
    Populations::from_array(polished).clamp_rounding()
}

fn polish_kernel(g: &Dense, guess: &[f64; LEVELS]) -> Option<[f64; LEVELS]> {
    // Replace the row of G with the smallest diagonal magnitude by the
    // normalization constraint; the remaining rows stay linearly independent
    // when the kernel is one-dimensional.
    let mut a = g.clone();
    let row = (0..LEVELS).max_by(|&i, &j| g[(i, i)].abs().total_cmp(&g[(j, j)].abs()))?;
    for j in 0..LEVELS {
        a[(row, j)] = 1.0;
    }
    let mut b = [0.0; LEVELS];
    b[row] = 1.0;
    let x = a.solve(&b)?;
    let arr: [f64; LEVELS] = x.try_into().ok()?;
    let worse = residual(g, &arr) > residual(g, guess);
    (!worse && arr.iter().all(|v| *v > -1e-12)).then_some(arr)
}

fn residual(g: &Dense, p: &[f64; LEVELS]) -> f64 {
    g.mul_vec(p).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
