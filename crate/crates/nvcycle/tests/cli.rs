use std::path::Path;
use std::process::{Command, Output};

fn nvcycle(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvcycle"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NVCYCLE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn simulate_without_seed_or_preset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvcycle(&["simulate", "--preset", "rabi"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    assert_eq!(code(&nvcycle(&["simulate", "--seed", "1"], dir.path())), 2);
    assert_eq!(code(&nvcycle(&["simulate", "--preset", "nonsense"], dir.path())), 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"preset": {"name": "rabi", "thetas": [0]}, "seed": 1}"#).unwrap();
    let o = nvcycle(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn out_flag_beats_environment_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"preset": {"name": "power", "pump_rates_MHz": [4]}, "noiseless": true, "output_dir": "from_config"}"#,
    )
    .unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_nvcycle"));
        c.args(["simulate", "--config", cfg.to_str().unwrap()])
            .args(extra)
            .current_dir(dir.path());
        match env {
            Some(v) => c.env("NVCYCLE_OUT_DIR", v),
            None => c.env_remove("NVCYCLE_OUT_DIR"),
        };
        assert!(c.status().unwrap().success());
    };
    run(&["--out", "from_flag"], Some("from_env"));
    assert!(dir.path().join("from_flag/manifest.json").exists());
    run(&[], Some("from_env"));
    assert!(dir.path().join("from_config/manifest.json").exists());
    assert!(!dir.path().join("from_env").exists());
}

#[test]
fn environment_sets_the_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_nvcycle"))
        .args(["simulate", "--preset", "power", "--noiseless"])
        .current_dir(dir.path())
        .env("NVCYCLE_OUT_DIR", "env_out")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("env_out/power_plateau.csv").exists());
}

#[test]
fn seeded_runs_are_byte_identical_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    for (out, seed) in [("a", "7"), ("b", "7"), ("c", "8")] {
        let o = nvcycle(
            &["simulate", "--preset", "pulse-train", "--seed", seed, "--out", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a/manifest.json"), read("b/manifest.json"));
    assert_eq!(read("a/pulse_003_histogram.csv"), read("b/pulse_003_histogram.csv"));
    assert_ne!(read("a/pulse_003_histogram.csv"), read("c/pulse_003_histogram.csv"));
}

#[test]
fn simulated_outputs_feed_the_fits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&nvcycle(
            &["simulate", "--preset", "double-pulse", "--seed", "2", "--out", "dp"],
            d
        )),
        0
    );
    let o = nvcycle(&["fit", "recovery", "dp/recovery.csv", "--out", "fit"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("fit/fit_recovery.json")).unwrap()).unwrap();
    let tau = fit["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "tau_singlet_ns")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((tau / 175.8 - 1.0).abs() < 0.15, "{tau}");

    assert_eq!(
        code(&nvcycle(
            &["simulate", "--preset", "pulse-train", "--seed", "2", "--out", "pt"],
            d
        )),
        0
    );
    let o = nvcycle(&["fit", "biexp", "pt/pulse_000_histogram.csv", "--out", "fit"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("fit/fit_biexp.json").exists());
    let o = nvcycle(&["fit", "series", "pt/pulse_series.csv", "--out", "fit"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_rejects_a_mismatched_schema() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x,y\n1,2\n2,3\n").unwrap();
    let o = nvcycle(&["fit", "temperature", "bad.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("temperature_K,lifetime_ns"));
}

#[test]
fn extract_prints_the_table_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvcycle(&["extract", "--preset", "table", "--out", "ex"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("NV J") && text.contains("NV C") && text.contains("p51/p52"));
    let csv = std::fs::read_to_string(dir.path().join("ex/extract.csv")).unwrap();
    assert!(csv.starts_with("quantity,centre,value,sigma"));
    assert_eq!(csv.lines().count(), 1 + 2 * 7);
}

#[test]
fn extract_reports_infeasible_inputs() {
    let dir = tempfile::tempdir().unwrap();
    // T13 far shorter than T14 leaves no consistent set of crossing rates.
    let cfg = r#"{"centres": [{"name": "odd",
        "flips": {"probabilities": {"p12": {"value": 0.3, "sigma": 0}, "p21": {"value": 0.01, "sigma": 0}}},
        "t13_ns": {"value": 2.0, "sigma": 0}, "t14_ns": {"value": 20.0, "sigma": 0}}]}"#;
    std::fs::write(dir.path().join("x.json"), cfg).unwrap();
    let o = nvcycle(&["extract", "--config", "x.json"], dir.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_needs_two_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvcycle(
        &["sweep", "--axis", "theta", "--values", "1", "--noiseless"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let o = nvcycle(
        &[
            "sweep",
            "--axis",
            "theta",
            "--values",
            "0,3.14159",
            "--noiseless",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert!(csv.starts_with("axis_value,observable,value\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn temperature_sweep_feeds_the_temperature_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvcycle(
        &[
            "sweep",
            "--axis",
            "temperature",
            "--values",
            "13,50,100,150,200,250,300",
            "--noiseless",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = nvcycle(
        &["fit", "temperature", "s/singlet_lifetimes.csv", "--out", "f"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fixed_lifetimes_are_held() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&nvcycle(
            &["simulate", "--preset", "pulse-train", "--noiseless", "--out", "pt"],
            d
        )),
        0
    );
    let hist = "pt/pulse_000_histogram.csv";
    let o = nvcycle(&["fit", "biexp", hist, "--fixed-taus", "13.26,6.89", "--out", "f"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("f/fit_biexp.json")).unwrap()).unwrap();
    assert_eq!(fit["parameters"][1]["value"].as_f64(), Some(13.26));
    assert_eq!(code(&nvcycle(&["fit", "biexp", hist, "--fixed-taus", "13.26"], d)), 2);
}
