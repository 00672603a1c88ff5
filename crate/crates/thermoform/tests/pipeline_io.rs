//! Persistence and process-level behavior of the pipeline: artifacts
//! survive a disk round trip bit for bit, downstream stages behave the same
//! whether fed from memory or from disk, and the binary maps failures to
//! its documented exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use tempfile::TempDir;
use thermoform::container::Container;
use thermoform::estimator::{run_estimator, NoiseConfig};
use thermoform::pipeline::{
    cmd_estimate, cmd_reduce, cmd_simulate, EstimateOptions, ExperimentConfig, BASIS_FILE,
    ESTIMATE_RUN_FILE, PLANT_RUN_FILE, SCHEDULE_FILE,
};
use thermoform::rom::pod::PodBasis;
use thermoform::rom::LtvSchedule;

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.geometry.edge_length = 0.05;
    cfg.scenario.template.steps = [20, 16, 16, 12];
    // The coarse test mesh leaves larger gaps around the sensor spots.
    cfg.scenario.sensors.snap_radius = 0.05;
    cfg.sweep.t_aust = vec![1173.0, 1273.0];
    cfg.sweep.v_punch = vec![80.0];
    cfg.rom.rank = 12;
    cfg.rom.snapshot_stride = 2;
    cfg.evaluate.ranks = vec![4, 12];
    cfg
}

fn run_pipeline(dir: &Path) {
    let cfg = small_config();
    cmd_simulate(&cfg, dir, 5).expect("simulate");
    cmd_reduce(&cfg, dir).expect("reduce");
    cmd_estimate(&cfg, dir, &EstimateOptions::default()).expect("estimate");
}

#[test]
fn containers_round_trip_matrices_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("roundtrip.bin");

    let m = DMatrix::from_fn(7, 5, |i, j| (i as f64 + 1.0).powf(1.5) * 0.3 - j as f64 / 7.0);
    let v = vec![0.1, -2.5e-17, f64::MAX / 2.0, 3.0];
    let mut c = Container::new("test-kind");
    c.push("field", m.clone());
    c.push_vec("series", &v);
    c.save(&path).unwrap();

    let display = path.display().to_string();
    let mut back = Container::load(&path).unwrap();
    back.expect_kind("test-kind", &display).unwrap();
    let m2 = back.take("field", &display).unwrap();
    let v2 = back.take_column("series", &display).unwrap();
    assert_eq!(m, m2);
    assert_eq!(v, v2);

    let wrong = Container::load(&path).unwrap();
    assert!(wrong.expect_kind("other-kind", &display).is_err());
}

#[test]
fn every_pipeline_artifact_reloads() {
    let tmp = TempDir::new().unwrap();
    run_pipeline(tmp.path());

    let basis = PodBasis::load(&tmp.path().join(BASIS_FILE)).expect("basis reloads");
    let schedule = LtvSchedule::load(&tmp.path().join(SCHEDULE_FILE)).expect("schedule reloads");
    assert_eq!(basis.rank(), 12);
    assert_eq!(schedule.rank(), 12);
    assert_eq!(schedule.n_steps() + 1, schedule.times.len());

    for (file, kind) in [(PLANT_RUN_FILE, "plant-run"), (ESTIMATE_RUN_FILE, "estimate-run")] {
        let path = tmp.path().join(file);
        let display = path.display().to_string();
        let mut c = Container::load(&path).expect("container reloads");
        c.expect_kind(kind, &display).expect("container kind");
        assert!(!c.take_column("times", &display).unwrap().is_empty());
    }
}

#[test]
fn saved_artifacts_rewrite_to_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    run_pipeline(tmp.path());

    for file in [BASIS_FILE, SCHEDULE_FILE] {
        let first = tmp.path().join(file);
        let second = tmp.path().join(format!("copy_{file}"));
        match file {
            BASIS_FILE => PodBasis::load(&first).unwrap().save(&second).unwrap(),
            _ => LtvSchedule::load(&first).unwrap().save(&second).unwrap(),
        }
        assert_eq!(
            fs::read(&first).unwrap(),
            fs::read(&second).unwrap(),
            "{file} changed across a load/save cycle"
        );
    }
}

#[test]
fn estimation_from_disk_matches_the_in_memory_filter() {
    let tmp = TempDir::new().unwrap();
    run_pipeline(tmp.path());

    // Re-run the downstream stage from the persisted artifacts.
    let first = fs::read(tmp.path().join(ESTIMATE_RUN_FILE)).unwrap();
    cmd_estimate(&small_config(), tmp.path(), &EstimateOptions::default()).unwrap();
    let second = fs::read(tmp.path().join(ESTIMATE_RUN_FILE)).unwrap();
    assert_eq!(first, second, "re-running estimate changed its artifact");

    // The filter on the reloaded schedule equals the filter on a schedule
    // that never touched the disk.
    let schedule = LtvSchedule::load(&tmp.path().join(SCHEDULE_FILE)).unwrap();
    let reload_path = tmp.path().join("schedule_again.bin");
    schedule.save(&reload_path).unwrap();
    let reloaded = LtvSchedule::load(&reload_path).unwrap();

    let plant = tmp.path().join(PLANT_RUN_FILE);
    let display = plant.display().to_string();
    let mut c = Container::load(&plant).unwrap();
    let y = c.take("sensors_noisy", &display).unwrap();
    let x0 = DVector::zeros(schedule.rank());
    let a = run_estimator(&schedule, &y, &x0, &NoiseConfig::default(), true).unwrap();
    let b = run_estimator(&reloaded, &y, &x0, &NoiseConfig::default(), true).unwrap();
    assert_eq!(a.x_hat, b.x_hat);
    assert_eq!(a.d_hat, b.d_hat);
}

// ---------------------------------------------------------------------------
// Exit codes of the binary
// ---------------------------------------------------------------------------

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermoform"))
}

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    let base = "\
[geometry]
edge_length = 0.05

[template]
steps = [20, 16, 16, 12]
durations = [5.2, 1.8, 4.1, 1.0]
v_punch_ref = 80.0

[sensors]
positions = [[0.17, 0.0, 0.0], [0.0, 0.19, 0.0], [-0.26, 0.0, 0.0]]
sigma_v = 10.0
snap_radius = 0.05

[sweep]
t_aust = [1273.0]
v_punch = [80.0]

[rom]
rank = 10
snapshot_stride = 2

[evaluate]
ranks = [10]
";
    fs::write(&path, format!("{base}\n{extra}")).unwrap();
    path
}

#[test]
fn healthy_run_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "");
    let status = binary()
        .args(["simulate", "--seed", "3"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(0));
}

#[test]
fn invalid_input_exits_one() {
    let tmp = TempDir::new().unwrap();

    // Unparseable flag value.
    let status = binary()
        .args(["estimate", "--plant", "carrier-pigeon:coop"])
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(1), "unknown plant source");

    // Config that parses but fails validation.
    let config = write_config(tmp.path(), "[noise]\nq_w = -4.0\n");
    let status = binary()
        .args(["simulate"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(1), "negative noise variance");

    // Missing upstream artifacts.
    let config = write_config(tmp.path(), "");
    let status = binary()
        .args(["estimate"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("empty"))
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(1), "estimate without artifacts");
}

#[test]
fn numerical_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(tmp.path(), "");

    for cmd in ["simulate", "reduce"] {
        let status = binary()
            .args([cmd, "--seed", "3"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .expect("binary runs");
        assert_eq!(status.code(), Some(0), "{cmd} prepares artifacts");
    }

    // A recording taken elsewhere works through `--plant external:PATH`.
    let external = tmp.path().join("recorded_elsewhere.bin");
    fs::copy(out.join(PLANT_RUN_FILE), &external).unwrap();
    let status = binary()
        .args(["estimate", "--plant"])
        .arg(format!("external:{}", external.display()))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(0), "external plant recording");

    // All-zero noise is a legal configuration, but it collapses the state
    // covariance and with it the innovation covariance: the first update
    // has nothing to factorize. That is a numerical failure, not a usage
    // error.
    let config = write_config(
        tmp.path(),
        "[noise]\nq_w = 0.0\nr_v = 0.0\nq_d = 0.0\np0 = 0.0\np_d0 = 0.0\n",
    );
    let status = binary()
        .args(["estimate"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(2));
}

#[test]
fn disturbance_estimation_can_be_disabled_from_the_cli() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(tmp.path(), "");

    for cmd in ["simulate", "reduce"] {
        let status = binary()
            .args([cmd, "--seed", "3"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .expect("binary runs");
        assert_eq!(status.code(), Some(0));
    }
    let status = binary()
        .args(["estimate", "--no-disturbance-estimation"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(0));

    let report = fs::read_to_string(out.join("estimate_report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["estimate_disturbance"], serde_json::Value::Bool(false));
}
