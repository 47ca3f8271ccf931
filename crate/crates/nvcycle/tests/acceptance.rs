//! Acceptance criteria, one line each. Every check computes its expected
//! values independently of the library code under test.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nvcycle::commands::simulate::simulate;
use nvcycle::config::{PresetName, RunConfig};
use nvcycle_core::analysis::{extract_isc_probabilities, fit_biexponential, fit_temperature_model, DecayFitOptions};
use nvcycle_core::instrument::TcspcHistogram;
use nvcycle_core::kinetics::{
    build_generator, cycle_map, derived_quantities, propagate, steady_state, CycleProbabilities, Populations,
    RateParameters, LEVELS, MHZ_NS,
};
use nvcycle_core::pulse::{preset_power_dependence, preset_rabi_lifetime, PowerSettings, RabiSettings};
use nvcycle_core::reference::{self, CentreObservables};
use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const BOLTZMANN_MEV_PER_K: f64 = 8.617_333_262e-2;

fn random_rates(rng: &mut ChaCha8Rng) -> RateParameters {
    RateParameters::from_closure(
        rng.random_range(40.0..90.0),
        rng.random_range(1.0..40.0),
        rng.random_range(20.0..150.0),
        rng.random_range(1.0..20.0),
        rng.random_range(0.1..0.9),
        rng.random_range(0.0..0.04),
    )
}

fn table_round_trip(c: &CentreObservables) -> Outcome {
    let got = match extract_isc_probabilities(c.p12.value, c.p21.value, c.t13_ns.value, c.t14_ns.value, 0.01) {
        Ok(g) => g,
        Err(e) => return outcome(false, format!("extraction failed: {e}")),
    };
    let checks = [
        ("p35", got.p35, c.p35),
        ("p45", got.p45, c.p45),
        ("p51/p52", got.branching_ratio, c.branching_ratio),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, value, want) in checks {
        let ok = (value - want.value).abs() <= want.sigma;
        pass &= ok;
        detail.push(format!(
            "{name} = {value:.4} vs {} ± {}{}",
            want.value,
            want.sigma,
            if ok { "" } else { " (outside)" }
        ));
    }
    outcome(pass, detail.join(", "))
}

fn forward_inverse_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let p = random_rates(&mut rng);
        let c = cycle_map(&p).unwrap();
        let d = derived_quantities(&p).unwrap();
        match extract_isc_probabilities(c.p12, c.p21, d.t13_ns, d.t14_ns, p.epsilon) {
            Ok(got) => {
                let ratio = p.k51 / p.k52;
                worst = worst
                    .max((got.p35 - d.p35).abs())
                    .max((got.p45 - d.p45).abs())
                    .max((got.branching_ratio - ratio).abs());
            }
            Err(_) => failures += 1,
        }
    }
    outcome(
        failures == 0 && worst < 1e-6,
        format!("100 rate sets, worst deviation {worst:.2e}, {failures} failed"),
    )
}

fn recursion_steady_state() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let alpha = rng.random_range(0.05..=1.0);
        let p12 = rng.random_range(0.01..0.3);
        let p21 = rng.random_range(0.01..0.6);
        let cycle = CycleProbabilities::new(p12, p21).unwrap();
        let mut p1 = rng.random_range(0.0..=1.0);
        for _ in 0..1_000_000 {
            let next = cycle.step(p1, alpha);
            let done = next == p1;
            p1 = next;
            if done {
                break;
            }
        }
        worst = worst.max((p1 - p21 / (p12 + p21)).abs());
    }
    outcome(
        worst < 1e-9,
        format!("100 draws, worst |P1 - p21/(p12+p21)| = {worst:.2e}"),
    )
}

/// Photon-by-photon TCSPC experiment: exponential emission delay plus
/// Gaussian timing jitter, Poisson total.
fn synthetic_decay(seed: u64) -> TcspcHistogram {
    const BIN: f64 = 0.512;
    const LEAD_IN: f64 = 10.0;
    const WINDOW: f64 = 200.0;
    // Amplitudes 1:3 at t = 0, so the slow component carries 13.7/(13.7 + 3·7.3)
    // of the photons.
    const SLOW_PHOTONS: f64 = 13.7 / (13.7 + 3.0 * 7.3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = Poisson::new(1e6).unwrap().sample(&mut rng) as usize;
    let slow = Exp::new(1.0 / 13.7).unwrap();
    let fast = Exp::new(1.0 / 7.3).unwrap();
    let jitter = Normal::new(0.0, 0.45).unwrap();
    let bins = ((LEAD_IN + WINDOW) / BIN) as usize;
    let mut counts = vec![0.0; bins];
    for _ in 0..total {
        let delay = if rng.random::<f64>() < SLOW_PHOTONS {
            slow.sample(&mut rng)
        } else {
            fast.sample(&mut rng)
        };
        let t = delay + jitter.sample(&mut rng) + LEAD_IN;
        if t >= 0.0 {
            if let Some(c) = counts.get_mut((t / BIN) as usize) {
                *c += 1.0;
            }
        }
    }
    TcspcHistogram::uniform(-LEAD_IN, BIN, counts).unwrap()
}

fn biexponential_recovery() -> Outcome {
    let options = DecayFitOptions::default();
    let mut hits = 0;
    for seed in 0..100 {
        let h = synthetic_decay(seed);
        if let Ok(fit) = fit_biexponential(&h, &options) {
            let t13 = fit.value("T13_ns").unwrap();
            let t14 = fit.value("T14_ns").unwrap();
            if fit.converged && (t13 / 13.7 - 1.0).abs() <= 0.02 && (t14 / 7.3 - 1.0).abs() <= 0.02 {
                hits += 1;
            }
        }
    }
    outcome(hits >= 90, format!("{hits}/100 seeds within 2% (need 90)"))
}

fn polarization_extremes() -> Outcome {
    let thetas: Vec<f64> = (0..=8).map(|k| k as f64 * PI / 4.0).collect();
    let settings = RabiSettings::default();
    // Rate sets around the NV J values, whose steady polarization is near 0.72.
    let property = (
        60.0f64..70.0,
        8.0f64..13.0,
        70.0f64..90.0,
        4.0f64..8.0,
        0.45f64..0.65,
        0.0f64..0.02,
    );
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 24,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let result = runner.run(&property, |(kr, k35, k45, k5, r, eps)| {
        let p = RateParameters::from_closure(kr, k35, k45, k5, r, eps);
        let pts = preset_rabi_lifetime(&p, &thetas, &settings).unwrap();
        let (zero, pi) = (&pts[0], &pts[4]);
        let ms1 = zero.before_rotation.p2();
        // Only the symmetric half of the incoherent m_s = ±1 population
        // returns to m_s = 0.
        prop_assert!((pi.after_rotation.m0 - 0.5 * ms1).abs() < 1e-12);
        prop_assert!((pi.after_rotation.p2() - (zero.before_rotation.m0 + 0.5 * ms1)).abs() < 1e-12);
        let pes: Vec<f64> = pts.iter().map(|q| q.after_pulse.p_es().unwrap()).collect();
        for (q, got) in pts.iter().zip(&pes) {
            let pgs = q.before_pulse.m0 / q.before_pulse.ground_total();
            let want = (pgs * (1.0 - eps) + eps) / (1.0 + eps);
            prop_assert!((got - want).abs() < 1e-9);
        }
        for k in 0..=4 {
            prop_assert!((pes[k] - pes[8 - k]).abs() < 1e-12);
        }
        prop_assert!(pes.iter().all(|&v| v <= pes[0] + 1e-12 && v >= pes[4] - 1e-12));
        prop_assert!(pes[4] < 0.5 && pes[0] > 0.6);
        Ok(())
    });
    let p = reference::NV_J.rate_parameters(reference::ROOM_TEMPERATURE_K).unwrap();
    let pts = preset_rabi_lifetime(&p, &[0.0, PI], &settings).unwrap();
    let max = pts[0].after_pulse.p_es().unwrap();
    let min = pts[1].after_pulse.p_es().unwrap();
    let steady = (0.65..0.80).contains(&max);
    match result {
        Ok(()) => outcome(
            steady,
            format!("24 rate sets hold the half-return rule; NV J P_ES max {max:.3}, min {min:.3}"),
        ),
        Err(e) => outcome(false, format!("property failed: {e}")),
    }
}

fn temperature_model() -> Outcome {
    let (tau0, de) = (371.0, 16.6);
    let model = |t: f64| tau0 * (1.0 - (-de / (BOLTZMANN_MEV_PER_K * t)).exp());
    let lib = |t: f64| reference::SINGLET_MODEL.lifetime(t);
    let cold_ok = (lib(0.01) - tau0).abs() < 1e-9;
    let room = lib(300.0);
    let room_ok = (room - model(300.0)).abs() < 1e-9 && (room - 176.0).abs() < 1.0;

    let temps = [
        13.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0, 225.0, 250.0, 275.0, 300.0,
    ];
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let lifetimes: Vec<f64> = temps
            .iter()
            .map(|&t| model(t) * (1.0 + noise.sample(&mut rng)))
            .collect();
        if let Ok(fit) = fit_temperature_model(&temps, &lifetimes) {
            let ok_tau = (fit.value("tau0_ns").unwrap() / tau0 - 1.0).abs() <= 0.05;
            let ok_de = (fit.value("delta_e_meV").unwrap() / de - 1.0).abs() <= 0.05;
            if fit.converged && ok_tau && ok_de {
                hits += 1;
            }
        }
    }
    outcome(
        cold_ok && room_ok && hits >= 95,
        format!(
            "tau(0) = {:.3} ns, tau(300 K) = {room:.2} ns, {hits}/100 sweeps within 5% (need 95)",
            lib(0.01)
        ),
    )
}

fn rk4(g: &[[f64; LEVELS]; LEVELS], x: [f64; LEVELS], duration_ns: f64, dt_ns: f64) -> [f64; LEVELS] {
    let f = |v: &[f64; LEVELS]| {
        let mut out = [0.0; LEVELS];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..LEVELS).map(|j| g[i][j] * MHZ_NS * v[j]).sum();
        }
        out
    };
    let axpy = |v: &[f64; LEVELS], k: &[f64; LEVELS], h: f64| {
        let mut out = *v;
        for i in 0..LEVELS {
            out[i] += h * k[i];
        }
        out
    };
    let steps = (duration_ns / dt_ns).ceil() as usize;
    let dt_ns = duration_ns / steps as f64;
    let mut v = x;
    for _ in 0..steps {
        let k1 = f(&v);
        let k2 = f(&axpy(&v, &k1, 0.5 * dt_ns));
        let k3 = f(&axpy(&v, &k2, 0.5 * dt_ns));
        let k4 = f(&axpy(&v, &k3, dt_ns));
        for i in 0..LEVELS {
            v[i] += dt_ns / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    v
}

fn propagation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut leak) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = random_rates(&mut rng);
        let g = build_generator(&p, rng.random_range(0.0..100.0)).unwrap();
        let mut x = [0.0; LEVELS];
        x.iter_mut().for_each(|v| *v = rng.random::<f64>());
        let s: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= s);
        let start = Populations::from_array(x);
        let duration = rng.random_range(1.0..20.0);
        let got: [f64; LEVELS] = propagate(&g, &start, duration).unwrap().to_array();
        let want = rk4(g.entries(), x, duration, 1e-3);
        worst = got.iter().zip(&want).fold(worst, |w, (a, b)| w.max((a - b).abs()));
        leak = leak.max((got.iter().sum::<f64>() - 1.0).abs());
    }
    outcome(
        worst < 1e-6 && leak < 1e-9,
        format!("100 generators, worst |expm - RK4| = {worst:.2e}, worst |sum - 1| = {leak:.2e}"),
    )
}

fn power_dependence() -> Outcome {
    let p = reference::NV_J.rate_parameters(reference::ROOM_TEMPERATURE_K).unwrap();
    let settings = PowerSettings {
        pulse_ns: 6000.0,
        ..PowerSettings::default()
    };
    let traces = preset_power_dependence(&p, &[4.0, 8.0, 12.0], true, &settings).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for tr in &traces {
        let g = build_generator(&p, tr.pump_rate).unwrap();
        let ss = steady_state(&g).unwrap();
        let plateau = g.emission_rate(ss.p3, ss.p4);
        let plateau_ok = (tr.plateau / plateau - 1.0).abs() < 1e-12;
        let (first, second) = (tr.first.rates(), tr.second.rates());
        let deepest = first
            .iter()
            .zip(second)
            .map(|(a, b)| (b - a) / plateau)
            .fold(0.0f64, f64::min);
        let end_first = (first.last().unwrap() / plateau - 1.0).abs();
        let end_second = (second.last().unwrap() / plateau - 1.0).abs();
        let ok = plateau_ok && deepest < -0.05 && end_first < 1e-3 && end_second < 1e-3;
        pass &= ok;
        notes.push(format!("{} MHz dip {:.0}%", tr.pump_rate, -100.0 * deepest));
    }
    outcome(pass, notes.join(", "))
}

fn determinism() -> Outcome {
    let mut config = RunConfig::new(PresetName::Rabi.with_defaults());
    config.seed = Some(42);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        simulate(&config, d.path()).unwrap();
    }
    let read = |d: &tempfile::TempDir| {
        let mut files: Vec<_> = std::fs::read_dir(d.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let (a, b) = (read(&dirs[0]), read(&dirs[1]));
    outcome(a == b && !a.is_empty(), format!("{} files compared", a.len()))
}

/// Number, name, runtime limit, check.
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (1, "NV J table round trip", Duration::from_secs(1), || {
            table_round_trip(&reference::NV_J)
        }),
        (2, "NV C table round trip", Duration::from_secs(1), || {
            table_round_trip(&reference::NV_C)
        }),
        (
            3,
            "forward-inverse identity",
            Duration::from_secs(10),
            forward_inverse_identity,
        ),
        (
            4,
            "recursion steady state",
            Duration::from_secs(1),
            recursion_steady_state,
        ),
        (
            5,
            "bi-exponential recovery",
            Duration::from_secs(30),
            biexponential_recovery,
        ),
        (
            6,
            "polarization extremes",
            Duration::from_secs(5),
            polarization_extremes,
        ),
        (7, "temperature model", Duration::from_secs(10), temperature_model),
        (8, "propagation oracle", Duration::from_secs(30), propagation_oracle),
        (
            9,
            "power dependence structure",
            Duration::from_secs(5),
            power_dependence,
        ),
        (10, "determinism", Duration::from_secs(5), determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed < limit;
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
