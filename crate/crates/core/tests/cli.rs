//! End-to-end checks of the command-line interface.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patterning"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("patterning-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fast_args(out: &PathBuf) -> Vec<String> {
    [
        "--target",
        "uniform",
        "--agents",
        "2",
        "--duration",
        "12",
        "--seed",
        "3",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([
        "--out".to_string(),
        out.display().to_string(),
        "--set".to_string(),
        "strategy=spectral_feedback".to_string(),
        "--set".to_string(),
        "modes_per_axis=4".to_string(),
        "--set".to_string(),
        "dimple_period=0.3".to_string(),
        "--set".to_string(),
        "render_size=32".to_string(),
        "--set".to_string(),
        "target_resolution=32".to_string(),
    ])
    .collect()
}

#[test]
fn run_writes_log_and_images() {
    let out = tmp_dir("run");
    let status = bin()
        .arg("run")
        .args(fast_args(&out))
        .status()
        .expect("spawn");
    assert!(status.success());
    assert!(out.join("trial_uniform_full_0003.csv").exists());
    assert!(out.join("trial_uniform_full_0003_dimples.pgm").exists());
    assert!(out.join("trial_uniform_full_0003_trajectories.ppm").exists());
    assert!(out.join("trial_uniform_full_0003_target.pgm").exists());
}

#[test]
fn identical_runs_produce_identical_logs() {
    let out_a = tmp_dir("det-a");
    let out_b = tmp_dir("det-b");
    for out in [&out_a, &out_b] {
        let status = bin().arg("run").args(fast_args(out)).status().unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out_a.join("trial_uniform_full_0003.csv")).unwrap();
    let b = std::fs::read(out_b.join("trial_uniform_full_0003.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn analyze_reads_run_output() {
    let out = tmp_dir("analyze");
    assert!(bin().arg("run").args(fast_args(&out)).status().unwrap().success());
    let log = out.join("trial_uniform_full_0003.csv");
    let output = bin()
        .arg("analyze")
        .arg(&log)
        .args(["--target", "uniform", "--modes", "4", "--resolution", "32"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "file,agents,heterogeneity,performance");
    let data = lines.next().unwrap();
    assert!(data.starts_with(log.display().to_string().as_str()));
    assert!(data.contains(",2,"), "agent count missing: {data}");
}

#[test]
fn render_regenerates_images_from_log() {
    let out = tmp_dir("render");
    assert!(bin().arg("run").args(fast_args(&out)).status().unwrap().success());
    let log = out.join("trial_uniform_full_0003.csv");
    let render_out = tmp_dir("render-out");
    let status = bin()
        .arg("render")
        .args(["--record", &log.display().to_string()])
        .args(["--target", "uniform", "--size", "48", "--resolution", "32"])
        .args(["--out", &render_out.display().to_string()])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(render_out.join("trial_uniform_full_0003_dimples.pgm").exists());
    assert!(render_out
        .join("trial_uniform_full_0003_trajectories.ppm")
        .exists());
}

#[test]
fn config_file_with_cli_override() {
    let out = tmp_dir("config");
    let cfg_path = out.join("exp.cfg");
    std::fs::write(
        &cfg_path,
        "targets = uniform\nagents = 2\nduration = 8\nstrategy = spectral_feedback\n\
         modes_per_axis = 4\nrender_size = 32\ntarget_resolution = 32\ncomm = full\n",
    )
    .unwrap();
    let status = bin()
        .arg("run")
        .args(["--config", &cfg_path.display().to_string()])
        .args(["--comm", "none", "--seed", "9"])
        .args(["--out", &out.display().to_string()])
        .status()
        .unwrap();
    assert!(status.success());
    // the CLI override (comm none) wins over the file (comm full)
    assert!(out.join("trial_uniform_none_0009.csv").exists());
}

#[test]
fn invalid_config_fails_with_field_name() {
    let out = tmp_dir("invalid");
    let output = bin()
        .arg("run")
        .args(fast_args(&out))
        .args(["--set", "u_max=-1"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("u_max"), "stderr: {err}");
}

#[test]
fn batch_subcommand_writes_summary() {
    let out = tmp_dir("batch");
    let status = bin()
        .arg("batch")
        .args(fast_args(&out))
        .args(["--trials", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "condition,objective,median_heterogeneity,median_performance,trials"
    );
    assert_eq!(lines.clone().count(), 2); // uniform x {none, full}
    assert!(lines.all(|l| l.ends_with(",2")));
}
