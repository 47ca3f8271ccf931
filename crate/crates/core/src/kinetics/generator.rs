use crate::error::{require_non_negative, Result};
use crate::kinetics::RateParameters;
use crate::linalg::Dense;

/// Number of bookkeeping components: m0, sym, asym, p3, p4, p5.
pub const LEVELS: usize = 6;

const M0: usize = 0;
const SYM: usize = 1;
const ASYM: usize = 2;
const P3: usize = 3;
const P4: usize = 4;
const P5: usize = 5;

/// Generator `G` of `dp/dt = G p` over the ordered basis
/// (m0, sym, asym, p3, p4, p5), entries in MHz.
///
/// `G[i][j]` is the rate from component `j` into component `i`; diagonal
/// entries hold minus the total outflow so every column sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    entries: [[f64; LEVELS]; LEVELS],
    pump_rate: f64,
    radiative3: f64,
    radiative4: f64,
}

impl RateMatrix {
    pub fn entries(&self) -> &[[f64; LEVELS]; LEVELS] {
        &self.entries
    }

    pub fn pump_rate(&self) -> f64 {
        self.pump_rate
    }

    /// Photons per ns emitted for the given populations.
    pub fn emission_rate(&self, p3: f64, p4: f64) -> f64 {
        (self.radiative3 * p3 + self.radiative4 * p4) * super::MHZ_NS
    }

    pub fn column_sums(&self) -> [f64; LEVELS] {
        let mut s = [0.0; LEVELS];
        for (j, sj) in s.iter_mut().enumerate() {
            *sj = (0..LEVELS).map(|i| self.entries[i][j]).sum();
        }
        s
    }

    pub(crate) fn to_dense(&self) -> Dense {
        Dense::from_rows(&self.entries)
    }
}

/// Assembles the generator for a rate set under optical pumping at
/// `pump_rate` MHz.
///
/// Every flow into |2⟩ is split equally between `sym` and `asym`. The pump
/// drives the spin-conserving transition at `pump/(1+ε)` and the
/// spin-flipping one at `pump·ε/(1+ε)`.
pub fn build_generator(params: &RateParameters, pump_rate: f64) -> Result<RateMatrix> {
    params.validate()?;
    require_non_negative("pump_rate", pump_rate)?;

    let eps = params.epsilon;
    let conserving = pump_rate / (1.0 + eps);
    let flipping = pump_rate * eps / (1.0 + eps);

    let mut g = [[0.0; LEVELS]; LEVELS];
    let mut flow = |from: usize, to: usize, rate: f64| {
        g[to][from] += rate;
        g[from][from] -= rate;
    };

    flow(M0, P3, conserving);
    flow(M0, P4, flipping);
    for ms1 in [SYM, ASYM] {
        flow(ms1, P4, conserving);
        flow(ms1, P3, flipping);
    }

    flow(P3, M0, params.k31);
    flow(P3, SYM, 0.5 * params.k32);
    flow(P3, ASYM, 0.5 * params.k32);
    flow(P3, P5, params.k35);

    flow(P4, M0, params.k41);
    flow(P4, SYM, 0.5 * params.k42);
    flow(P4, ASYM, 0.5 * params.k42);
    flow(P4, P5, params.k45);

    flow(P5, M0, params.k51);
    flow(P5, SYM, 0.5 * params.k52);
    flow(P5, ASYM, 0.5 * params.k52);

    Ok(RateMatrix {
        entries: g,
        pump_rate,
        radiative3: params.radiative3(),
        radiative4: params.radiative4(),
    })
}
