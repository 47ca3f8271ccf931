use alloc::vec::Vec;

use crate::error::{Error, Result};

/// What happened at a marked instant of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MarkerKind {
    SegmentStart { index: usize },
    PsPulse,
    MwRotation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Marker {
    pub time_ns: f64,
    pub kind: MarkerKind,
}

/// Expected photon emission over time.
///
/// Knots are strictly increasing. Each knot carries the instantaneous
/// emission rate (photons/ns) just after that instant, so a picosecond
/// pulse shows up as a jump at its knot. Each interval between consecutive
/// knots carries the exact number of photons emitted in it; integrals
/// over knot-aligned windows are therefore exact.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTrace {
    times: Vec<f64>,
    rates: Vec<f64>,
    counts: Vec<f64>,
    markers: Vec<Marker>,
}

impl EmissionTrace {
    /// Single knot at `start` with the given instantaneous rate.
    pub fn starting_at(start_ns: f64, rate: f64) -> Self {
        Self {
            times: alloc::vec![start_ns],
            rates: alloc::vec![rate],
            counts: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn from_parts(times: Vec<f64>, rates: Vec<f64>, counts: Vec<f64>, markers: Vec<Marker>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if rates.len() != times.len() || counts.len() + 1 != times.len() {
            return Err(Error::InvalidParameter {
                name: "trace",
                value: times.len() as f64,
                reason: "need one rate per knot and one count per interval",
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "trace times",
                value: f64::NAN,
                reason: "must be finite and strictly increasing",
            });
        }
        if rates.iter().chain(&counts).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "trace values",
                value: f64::NAN,
                reason: "rates and counts must be finite and non-negative",
            });
        }
        Ok(Self {
            times,
            rates,
            counts,
            markers,
        })
    }

    /// Appends an interval ending at `end` with `count` photons and
    /// instantaneous rate `end_rate` at its end.
    pub(crate) fn push(&mut self, end_ns: f64, end_rate: f64, count: f64) {
        debug_assert!(end_ns > *self.times.last().expect("non-empty"));
        self.times.push(end_ns);
        self.rates.push(end_rate.max(0.0));
        self.counts.push(count.max(0.0));
    }

    /// Overwrites the rate at the last knot (after an instantaneous event).
    pub(crate) fn set_last_rate(&mut self, rate: f64) {
        *self.rates.last_mut().expect("non-empty") = rate.max(0.0);
    }

    pub(crate) fn mark(&mut self, kind: MarkerKind) {
        let time_ns = *self.times.last().expect("non-empty");
        self.markers.push(Marker { time_ns, kind });
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Photons per interval; one shorter than [`times`](Self::times).
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    /// Number of knots.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when the trace has no intervals.
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Photons emitted in `[from, to]`. Intervals cut by the window are
    /// assumed to emit uniformly.
    pub fn integral(&self, from_ns: f64, to_ns: f64) -> Result<f64> {
        let span = (self.start(), self.end());
        let tol = 1e-9 * (1.0 + span.1.abs().max(span.0.abs()));
        if from_ns < span.0 - tol
            || to_ns > span.1 + tol
            || to_ns < from_ns
            || !from_ns.is_finite()
            || !to_ns.is_finite()
        {
            return Err(Error::WindowOutOfRange {
                start: from_ns,
                end: to_ns,
                span,
            });
        }
        let a = from_ns.max(span.0);
        let b = to_ns.min(span.1);
        if b <= a {
            return Ok(0.0);
        }
        let first = self.times.partition_point(|&t| t <= a).saturating_sub(1);
        let mut acc = 0.0;
        for i in first..self.counts.len() {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            if t0 >= b {
                break;
            }
            let lo = a.max(t0);
            let hi = b.min(t1);
            if hi > lo {
                acc += self.counts[i] * ((hi - lo) / (t1 - t0)).min(1.0);
            }
        }
        Ok(acc)
    }

    /// Sub-trace covering the knots in `[from, to]` (with a relative
    /// tolerance), times shifted so that `from` becomes `origin`.
    pub fn slice(&self, from_ns: f64, to_ns: f64, origin_ns: f64) -> Result<Self> {
        let tol = 1e-9 * (1.0 + from_ns.abs().max(to_ns.abs()));
        let lo = self.times.partition_point(|&t| t < from_ns - tol);
        let hi = self.times.partition_point(|&t| t <= to_ns + tol);
        if hi <= lo {
            return Err(Error::WindowOutOfRange {
                start: from_ns,
                end: to_ns,
                span: (self.start(), self.end()),
            });
        }
        let shift = origin_ns - from_ns;
        let times = self.times[lo..hi].iter().map(|t| t + shift).collect();
        let rates = self.rates[lo..hi].to_vec();
        let counts = self.counts[lo..hi - 1].to_vec();
        let t_lo = self.times[lo] - tol;
        let t_hi = self.times[hi - 1] + tol;
        let markers = self
            .markers
            .iter()
            .filter(|m| m.time_ns >= t_lo && m.time_ns <= t_hi)
            .map(|m| Marker {
                time_ns: m.time_ns + shift,
                kind: m.kind,
            })
            .collect();
        Ok(Self {
            times,
            rates,
            counts,
            markers,
        })
    }

    /// Same trace preceded by `duration` of darkness.
    pub fn with_dark_lead_in(&self, duration_ns: f64) -> Result<Self> {
        if !(duration_ns > 0.0) || !duration_ns.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lead-in",
                value: duration_ns,
                reason: "must be positive",
            });
        }
        let mut out = Self::starting_at(self.start() - duration_ns, 0.0);
        out.counts.push(0.0);
        out.times.extend_from_slice(&self.times);
        out.rates.extend_from_slice(&self.rates);
        out.counts.extend_from_slice(&self.counts);
        out.markers = self.markers.clone();
        Ok(out)
    }

    pub fn shifted(&self, offset_ns: f64) -> Self {
        let mut out = self.clone();
        out.times.iter_mut().for_each(|t| *t += offset_ns);
        out.markers.iter_mut().for_each(|m| m.time_ns += offset_ns);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ramp() -> EmissionTrace {
        EmissionTrace::from_parts(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![1.5, 2.5, 3.5],
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn integrals_over_aligned_and_partial_windows() {
        let t = ramp();
        assert_eq!(t.total(), 7.5);
        assert_eq!(t.integral(0.0, 3.0).unwrap(), 7.5);
        assert_eq!(t.integral(1.0, 2.0).unwrap(), 2.5);
        assert!((t.integral(0.5, 1.5).unwrap() - (0.75 + 1.25)).abs() < 1e-15);
        assert_eq!(t.integral(1.2, 1.2).unwrap(), 0.0);
        assert!(t.integral(-1.0, 1.0).is_err());
        assert!(t.integral(2.0, 3.5).is_err());
    }

    #[test]
    fn slice_keeps_exact_counts() {
        let t = ramp();
        let s = t.slice(1.0, 3.0, 0.0).unwrap();
        assert_eq!(s.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(s.total(), 6.0);
    }

    #[test]
    fn dark_lead_in_adds_nothing() {
        let t = ramp().with_dark_lead_in(2.0).unwrap();
        assert_eq!(t.start(), -2.0);
        assert_eq!(t.total(), 7.5);
        assert_eq!(t.integral(-2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_malformed_parts() {
        assert!(EmissionTrace::from_parts(vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0], vec![]).is_err());
        assert!(EmissionTrace::from_parts(vec![0.0, 1.0], vec![0.0, -1.0], vec![0.0], vec![]).is_err());
        assert!(EmissionTrace::from_parts(vec![], vec![], vec![], vec![]).is_err());
    }
}
