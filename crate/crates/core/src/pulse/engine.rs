use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kinetics::{build_generator, Populations, Propagator, RateMatrix, RateParameters};
use crate::math;
use crate::pulse::{EmissionTrace, MarkerKind, PulseSequence, Segment};

/// Excited-triplet population above which optical or MW events are refused.
pub const EXCITED_TOLERANCE: f64 = 1e-6;

/// Sampling controls for [`run_sequence`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EngineOptions {
    /// Knot spacing inside propagated segments.
    pub sample_dt_ns: f64,
    /// Long segments are sampled more coarsely so they never exceed this
    /// many intervals. Integrals stay exact either way.
    pub max_intervals_per_segment: usize,
    /// Let picosecond pulses act while the excited triplet is populated.
    pub allow_excited_pulse: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            sample_dt_ns: 0.1,
            max_intervals_per_segment: 50_000,
            allow_excited_pulse: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    PsPulse,
    MwRotation,
}

/// Populations on both sides of an instantaneous event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time_ns: f64,
    pub segment: usize,
    pub kind: EventKind,
    pub before: Populations,
    pub after: Populations,
}

/// Output of [`run_sequence`].
#[derive(Debug, Clone)]
pub struct SequenceRun {
    pub trace: EmissionTrace,
    pub final_populations: Populations,
    pub events: Vec<EventRecord>,
    /// Populations at the end of every segment, in order.
    pub boundaries: Vec<Populations>,
}

/// Picosecond excitation: a fraction `alpha` of each ground spin state is
/// promoted, splitting between the spin-conserving and spin-flipping excited
/// levels as 1 : ε.
pub fn apply_ps_pulse(pops: &Populations, alpha: f64, epsilon: f64, allow_excited: bool) -> Result<Populations> {
    Segment::PsPulse { alpha }.validate()?;
    if !allow_excited && pops.excited_total() >= EXCITED_TOLERANCE {
        return Err(Error::Sequencing("ps pulse while the excited triplet is populated"));
    }
    let direct = 1.0 / (1.0 + epsilon);
    let mixed = epsilon / (1.0 + epsilon);
    let from_m0 = alpha * pops.m0;
    let from_ms1 = alpha * pops.p2();
    Populations {
        m0: pops.m0 - from_m0,
        sym: pops.sym * (1.0 - alpha),
        asym: pops.asym * (1.0 - alpha),
        p3: pops.p3 + direct * from_m0 + mixed * from_ms1,
        p4: pops.p4 + mixed * from_m0 + direct * from_ms1,
        p5: pops.p5,
    }
    .clamp_rounding()
}

/// Resonant MW rotation treated as a classical transfer between `m0` and
/// `sym`; the antisymmetric m_s = ±1 combination does not couple, so a π
/// rotation moves all of `m0` out but brings back only the `sym` half of an
/// incoherent m_s = ±1 population.
///
/// Singlet population is left untouched; only the excited triplet blocks the
/// rotation.
pub fn apply_mw_rotation(pops: &Populations, theta: f64) -> Result<Populations> {
    Segment::MwRotation { theta }.validate()?;
    if pops.excited_total() >= EXCITED_TOLERANCE {
        return Err(Error::Sequencing("MW rotation during optical excitation"));
    }
    let c = math::cos(0.5 * theta);
    let s = math::sin(0.5 * theta);
    let (c2, s2) = (c * c, s * s);
    Ok(Populations {
        m0: pops.m0 * c2 + pops.sym * s2,
        sym: pops.sym * c2 + pops.m0 * s2,
        ..*pops
    })
}

struct Segmenter<'a> {
    params: &'a RateParameters,
    options: &'a EngineOptions,
    cache: Vec<(f64, f64, RateMatrix, Propagator)>,
}

impl<'a> Segmenter<'a> {
    fn propagator(&mut self, pump: f64, dt: f64) -> Result<(RateMatrix, Propagator)> {
        if let Some((_, _, g, p)) = self.cache.iter().find(|(a, b, _, _)| *a == pump && *b == dt) {
            return Ok((g.clone(), p.clone()));
        }
        let g = build_generator(self.params, pump)?;
        let p = Propagator::new(&g, dt)?;
        if self.cache.len() > 16 {
            self.cache.remove(0);
        }
        self.cache.push((pump, dt, g.clone(), p.clone()));
        Ok((g, p))
    }

    fn evolve(
        &mut self,
        trace: &mut EmissionTrace,
        start: Populations,
        pump: f64,
        duration: f64,
    ) -> Result<Populations> {
        if duration <= 0.0 {
            return Ok(start);
        }
        let base_dt = self.options.sample_dt_ns;
        let cap = self.options.max_intervals_per_segment.max(1) as f64;
        let dt = if duration / base_dt > cap {
            duration / cap
        } else {
            base_dt
        };
        let full = math::floor(duration / dt * (1.0 + 1e-12)) as usize;
        let rest = duration - full as f64 * dt;
        let (g, step) = self.propagator(pump, dt)?;
        let t0 = trace.end();
        let mut p = start;
        for k in 0..full {
            let count = step.emitted(&g, &p);
            p = step.advance(&p)?;
            trace.push(t0 + (k + 1) as f64 * dt, g.emission_rate(p.p3, p.p4), count);
        }
        if rest > 1e-9 * dt {
            let tail = Propagator::new(&g, rest)?;
            let count = tail.emitted(&g, &p);
            p = tail.advance(&p)?;
            trace.push(t0 + duration, g.emission_rate(p.p3, p.p4), count);
        }
        Ok(p)
    }
}

/// Runs every segment in order, recording the emission rate
/// `k_r,3·p3 + k_r,4·p4` throughout.
pub fn run_sequence(seq: &PulseSequence, initial: &Populations, options: &EngineOptions) -> Result<SequenceRun> {
    seq.validate()?;
    initial.validate()?;
    if !(options.sample_dt_ns > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sample_dt",
            value: options.sample_dt_ns,
            reason: "must be positive",
        });
    }
    let params = &seq.params;
    let emission =
        |p: &Populations| (params.radiative3() * p.p3 + params.radiative4() * p.p4) * crate::kinetics::MHZ_NS;

    let mut trace = EmissionTrace::starting_at(0.0, emission(initial));
    let mut seg = Segmenter {
        params,
        options,
        cache: Vec::new(),
    };
    let mut pops = *initial;
    let mut events = Vec::new();
    let mut boundaries = Vec::with_capacity(seq.segments.len());

    for (index, segment) in seq.segments.iter().enumerate() {
        trace.mark(MarkerKind::SegmentStart { index });
        match *segment {
            Segment::PsPulse { alpha } => {
                let after = apply_ps_pulse(&pops, alpha, params.epsilon, options.allow_excited_pulse)?;
                events.push(EventRecord {
                    time_ns: trace.end(),
                    segment: index,
                    kind: EventKind::PsPulse,
                    before: pops,
                    after,
                });
                pops = after;
                trace.set_last_rate(emission(&pops));
                trace.mark(MarkerKind::PsPulse);
            }
            Segment::MwRotation { theta } => {
                let after = apply_mw_rotation(&pops, theta)?;
                events.push(EventRecord {
                    time_ns: trace.end(),
                    segment: index,
                    kind: EventKind::MwRotation,
                    before: pops,
                    after,
                });
                pops = after;
                trace.mark(MarkerKind::MwRotation);
            }
            Segment::Cw { pump_rate, duration_ns } => pops = seg.evolve(&mut trace, pops, pump_rate, duration_ns)?,
            Segment::Delay { duration_ns } => pops = seg.evolve(&mut trace, pops, 0.0, duration_ns)?,
        }
        boundaries.push(pops);
    }

    Ok(SequenceRun {
        trace,
        final_populations: pops,
        events,
        boundaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::propagate;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn params() -> RateParameters {
        RateParameters::from_closure(64.8, 10.6, 80.3, 5.69, 0.55, 0.01)
    }

    #[test]
    fn full_pulse_without_mixing_fills_p3() {
        let p = apply_ps_pulse(&Populations::ground(1.0), 1.0, 0.0, false).unwrap();
        assert_eq!(p.p3, 1.0);
        assert_eq!(p.m0, 0.0);
    }

    #[test]
    fn partial_pulse_with_mixing() {
        let p = apply_ps_pulse(&Populations::ground(1.0), 0.95, 0.01, false).unwrap();
        assert!((p.p3 - 0.95 / 1.01).abs() < 1e-15);
        assert!((p.p4 - 0.95 * 0.01 / 1.01).abs() < 1e-15);
        assert!((p.m0 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_is_identity() {
        let g = Populations::ground(0.3);
        assert_eq!(apply_ps_pulse(&g, 0.0, 0.01, false).unwrap(), g);
    }

    #[test]
    fn pulse_on_excited_state_needs_override() {
        let mut g = Populations::ground(0.5);
        g.m0 -= 0.01;
        g.p3 = 0.01;
        assert!(matches!(apply_ps_pulse(&g, 1.0, 0.0, false), Err(Error::Sequencing(_))));
        assert!(apply_ps_pulse(&g, 1.0, 0.0, true).is_ok());
    }

    #[test]
    fn pi_rotation_transfers_m0() {
        let p = apply_mw_rotation(&Populations::ground(1.0), PI).unwrap();
        assert!(p.m0.abs() < 1e-15);
        assert!((p.sym - 1.0).abs() < 1e-15);
        assert_eq!(p.asym, 0.0);
    }

    #[test]
    fn pi_rotation_returns_only_half_of_incoherent_population() {
        let p = apply_mw_rotation(&Populations::ground(0.0), PI).unwrap();
        assert!((p.m0 - 0.5).abs() < 1e-15);
        assert!(p.sym.abs() < 1e-15);
        assert_eq!(p.asym, 0.5);
    }

    #[test]
    fn two_pi_rotation_is_identity() {
        let g = Populations::ground(0.7);
        let p = apply_mw_rotation(&g, 2.0 * PI).unwrap();
        assert!((p.m0 - g.m0).abs() < 1e-15);
        assert!((p.sym - g.sym).abs() < 1e-15);
    }

    #[test]
    fn rotation_during_excitation_fails() {
        let p = apply_ps_pulse(&Populations::ground(1.0), 1.0, 0.0, false).unwrap();
        assert!(matches!(apply_mw_rotation(&p, PI), Err(Error::Sequencing(_))));
    }

    #[test]
    fn zero_delay_sequence_gives_single_knot() {
        let seq = PulseSequence::new(params(), vec![Segment::Delay { duration_ns: 0.0 }]).unwrap();
        let start = Populations::ground(0.6);
        let run = run_sequence(&seq, &start, &EngineOptions::default()).unwrap();
        assert_eq!(run.trace.len(), 1);
        assert_eq!(run.final_populations, start);
    }

    #[test]
    fn empty_sequence_is_rejected() {
        assert_eq!(PulseSequence::new(params(), vec![]), Err(Error::EmptySequence));
    }

    #[test]
    fn decay_counts_match_analytic_integral() {
        // ε = 0 and α = 1 from m0: total photons = k_r · T13 exactly
        let p = RateParameters::from_closure(60.0, 15.0, 90.0, 5.0, 0.5, 0.0);
        let seq = PulseSequence::new(
            p,
            vec![Segment::PsPulse { alpha: 1.0 }, Segment::Delay { duration_ns: 5000.0 }],
        )
        .unwrap();
        let run = run_sequence(&seq, &Populations::ground(1.0), &EngineOptions::default()).unwrap();
        let expected = 60.0 / 75.0;
        assert!((run.trace.total() - expected).abs() < 1e-12);
        assert!((run.trace.rates()[0] - 60.0e-3).abs() < 1e-15);
    }

    #[test]
    fn engine_matches_direct_propagation() {
        let p = params();
        let seq = PulseSequence::new(
            p,
            vec![
                Segment::Cw {
                    pump_rate: 10.0,
                    duration_ns: 1300.0,
                },
                Segment::Delay { duration_ns: 800.0 },
                Segment::MwRotation { theta: 1.1 },
                Segment::Delay { duration_ns: 200.0 },
            ],
        )
        .unwrap();
        let start = Populations::thermal();
        let run = run_sequence(&seq, &start, &EngineOptions::default()).unwrap();
        let g = build_generator(&p, 10.0).unwrap();
        let g0 = build_generator(&p, 0.0).unwrap();
        let a = propagate(&g, &start, 1300.0).unwrap();
        let b = propagate(&g0, &a, 800.0).unwrap();
        let c = apply_mw_rotation(&b, 1.1).unwrap();
        let d = propagate(&g0, &c, 200.0).unwrap();
        for (x, y) in run.final_populations.to_array().iter().zip(d.to_array()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn probability_conserved_at_every_boundary(
            pump in 0.0..40.0f64, theta in 0.0..6.3f64, pol in 0.0..1.0f64,
            cw in 10.0..2000.0f64, gap in 100.0..3000.0f64, alpha in 0.0..1.0f64,
        ) {
            let seq = PulseSequence::new(params(), vec![
                Segment::Cw { pump_rate: pump, duration_ns: cw },
                Segment::Delay { duration_ns: gap },
                Segment::MwRotation { theta },
                Segment::PsPulse { alpha },
                Segment::Delay { duration_ns: gap },
            ]).unwrap();
            let run = run_sequence(&seq, &Populations::ground(pol), &EngineOptions { sample_dt_ns: 1.0, ..Default::default() });
            // a short gap can leave the triplet excited; that must surface as
            // a sequencing error, never as silent corruption
            match run {
                Ok(run) => {
                    for b in &run.boundaries {
                        prop_assert!((b.total() - 1.0).abs() < 1e-9);
                    }
                    prop_assert!(run.trace.times().windows(2).all(|w| w[1] > w[0]));
                }
                Err(e) => prop_assert!(matches!(e, Error::Sequencing(_))),
            }
        }
    }
}
