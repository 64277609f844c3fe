use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use teleport_sim::config::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_teleport-sim"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn limits_table() {
    let out = run(&["limits"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.contains("single_mode_rate\t100 kHz"), "{stdout}");
    assert!(stdout.contains("multiplexed_rate\t1.19 MHz"), "{stdout}");
}

#[test]
fn shipped_configs_are_the_presets() {
    let root = repo_root();
    let short = ExperimentConfig::load(&root.join("configs/short_distance.toml")).unwrap();
    let long = ExperimentConfig::load(&root.join("configs/long_distance.toml")).unwrap();
    assert_eq!(short, ExperimentConfig::short_distance());
    assert_eq!(long, ExperimentConfig::long_distance());
    let out = run(&[
        "validate-config",
        root.join("configs/long_distance.toml").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        ExperimentConfig::from_toml_str(&text(&out.stdout)).unwrap(),
        long
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let broken = write("broken.toml", "timing = [");
    assert_eq!(run(&["validate-config", &broken]).status.code(), Some(2));
    let unknown = write("unknown.toml", "[fiber]\nlenght_km = 1.0\n");
    assert_eq!(run(&["validate-config", &unknown]).status.code(), Some(2));

    let overlap = write("overlap.toml", "[timing]\nattempt_period_us = 0.5\n");
    let out = run(&["validate-config", &overlap]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = text(&out.stderr);
    assert!(
        stderr.contains("attempt_period_us") && stderr.contains("qubit_duration_ns"),
        "{stderr}"
    );

    let short_storage = write(
        "short_storage.toml",
        "[fiber]\nlength_km = 1.0\n[memory]\nstorage_time_us = 9.0\n[timing]\nclassical_return_us = 5.0\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "long-distance",
        "--config",
        &short_storage,
        "--strict",
        "--attempts",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", text(&out.stderr));

    let out = run(&["run", "medium-distance", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "run",
        "rate-sweep",
        "--rates",
        "2000",
        "--attempts",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

fn run_short(out: &Path, workers: &str, attempts: &str, records: bool) {
    let mut cmd = bin();
    cmd.args([
        "run",
        "short-distance",
        "--seed",
        "11",
        "--attempts",
        attempts,
        "--out",
    ])
    .arg(out)
    .env("TELEPORT_SIM_WORKERS", workers);
    if records {
        cmd.arg("--records");
    }
    let status = cmd.output().unwrap();
    assert!(status.status.success(), "{}", text(&status.stderr));
}

const GOLDEN_FILES: [&str; 3] = ["report.json", "histogram.csv", "state_fidelity.tsv"];

#[test]
fn outputs_are_deterministic_and_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_short(&a, "1", "2000000", false);
    run_short(&b, "4", "2000000", false);
    for name in GOLDEN_FILES {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/short_distance");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&golden).unwrap();
        for name in GOLDEN_FILES {
            fs::copy(a.join(name), golden.join(name)).unwrap();
        }
    }
    for name in GOLDEN_FILES {
        let want = fs::read_to_string(golden.join(name)).unwrap();
        let got = fs::read_to_string(a.join(name)).unwrap();
        assert!(
            want == got,
            "{name} differs from the golden file; rerun with UPDATE_GOLDEN=1 if intended"
        );
    }
}

#[test]
fn records_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_short(&a, "1", "200000", true);
    run_short(&b, "3", "200000", true);
    let records = fs::read(a.join("records.ndjson")).unwrap();
    assert!(!records.is_empty());
    assert_eq!(records, fs::read(b.join("records.ndjson")).unwrap());
    let first: serde_json::Value =
        serde_json::from_slice(records.split(|&c| c == b'\n').next().unwrap()).unwrap();
    assert_eq!(first["setting"], "e/pole");
    assert!(first["attempt_id"].is_u64());
}

#[test]
fn calibration_file_feeds_later_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal.toml");
    let out = run(&[
        "calibrate",
        "--target",
        "0.9",
        "--out",
        cal.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = fs::read_to_string(&cal).unwrap();
    let noise: f64 = body
        .lines()
        .find_map(|l| l.strip_prefix("werner_white_noise = "))
        .unwrap()
        .parse()
        .unwrap();
    let out_dir = dir.path().join("run");
    let out = run(&[
        "run",
        "short-distance",
        "--attempts",
        "0",
        "--calibration",
        cal.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(
        report["config"]["spdc"]["werner_white_noise"].as_f64(),
        Some(noise)
    );
    let f_eq = report["expected_report"]["f_eq"]["value"].as_f64().unwrap();
    assert!((f_eq - 0.9).abs() < 0.002);

    let out = run(&[
        "calibrate",
        "--target",
        "0.3",
        "--out",
        cal.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
}
