use std::fs;
use std::path::Path;
use std::process::Command;

use funkframe::cli::commands::{
    cmd_experiment, cmd_forward, cmd_precompute, cmd_reconstruct, read_node_csv, DATA_CSV_HEADER,
};
use funkframe::cli::config::{ExperimentConfig, GridSpec};
use funkframe::frame::table_file;

fn small(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        n: 4,
        l_max: 20,
        grid: GridSpec::Product { n_theta: 21, n_lambda: 42 },
        m_circle: 128,
        alphas: vec![0.0, 0.05, 0.2],
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_funkframe"))
}

#[test]
fn precompute_single_member_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { n: 1, ..small(dir.path()) };
    let path = dir.path().join("t1.frfd");
    let first = cmd_precompute(&cfg, Some(&path)).unwrap();
    assert_eq!(first.frame_members, 1);
    assert_eq!(first.retained_rank, 1);
    let table = table_file::load(&path).unwrap();
    assert_eq!(table.index_set().len(), 1);
    // M = |C|² for a single member
    let c = table.c()[(0, 0)];
    assert!((table.d()[(0, 0)] * c.conj() - 1.0).norm() < 1e-12);
    assert!(dir.path().join("t1.frfd.json").exists());

    let second = cmd_precompute(&cfg, Some(&path)).unwrap();
    assert_eq!(first.table_crc32, second.table_crc32);
}

#[test]
fn forward_writes_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let path = dir.path().join("data.csv");
    let report = cmd_forward(&cfg, Some(&path)).unwrap();
    assert_eq!(report.data.nodes, 21 * 42);
    assert!(report.data.evenness_ok);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(DATA_CSV_HEADER));
    assert_eq!(lines.count(), 21 * 42);
    let back = read_node_csv(&path, cfg.grid.build().unwrap()).unwrap();
    assert!((back.l2_norm() - report.data.data_norm).abs() < 1e-12 * report.data.data_norm);
}

#[test]
fn zero_phantom_gives_zero_data_and_rejects_noise() {
    let dir = tempfile::tempdir().unwrap();
    let ph = dir.path().join("zero.txt");
    fs::write(&ph, "# a single cap with no mass\n0 0 1 0.5 0\n").unwrap();
    let cfg = ExperimentConfig { phantom: ph.display().to_string(), ..small(dir.path()) };
    let report = cmd_forward(&cfg, Some(&dir.path().join("z.csv"))).unwrap();
    assert_eq!(report.data.data_norm, 0.0);
    let noisy = ExperimentConfig { noise_level: 0.1, ..cfg };
    assert!(cmd_forward(&noisy, Some(&dir.path().join("zn.csv"))).is_err());
}

#[test]
fn forward_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let data = dir.path().join("data.csv");
    cmd_forward(&cfg, Some(&data)).unwrap();
    let rep = cmd_reconstruct(&cfg, &data, Some(0.05)).unwrap();
    assert!(rep.norm_bound_ok);
    assert!(rep.relative_error < 1.0);
    for name in ["reconstruction.csv", "reconstruction_coeffs.csv", "reconstruct_report.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert!(cmd_reconstruct(&cfg, &data, Some(-1.0)).is_err());
}

#[test]
fn mismatched_table_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let path = dir.path().join("t.frfd");
    cmd_precompute(&cfg, Some(&path)).unwrap();

    let ok = ExperimentConfig { table: Some(path.clone()), ..cfg.clone() };
    assert!(cmd_experiment(&ok).is_ok());
    for bad in [
        ExperimentConfig { n: 5, ..ok.clone() },
        ExperimentConfig { pinv_threshold: 1e-4, ..ok.clone() },
        ExperimentConfig { grid: GridSpec::Product { n_theta: 22, n_lambda: 44 }, ..ok.clone() },
    ] {
        assert!(cmd_experiment(&bad).is_err());
    }
}

#[test]
fn corrupted_table_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let path = dir.path().join("t.frfd");
    cmd_precompute(&cfg, Some(&path)).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&path, &bytes).unwrap();
    assert!(table_file::load(&path).is_err());
    let cfg = ExperimentConfig { table: Some(path), ..cfg };
    assert!(cmd_experiment(&cfg).is_err());
}

#[test]
fn experiment_without_filters_runs_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { alphas: vec![], ..small(dir.path()) };
    let report = cmd_experiment(&cfg).unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(report.runs[0].alpha, None);
    assert_eq!(report.best_index, 0);
    assert!(report.norm_bound_ok);
}

#[test]
fn experiment_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { noise_level: 0.2, seed: 4, ..small(dir.path()) };
    let a = cmd_experiment(&cfg).unwrap();
    let bytes_a = fs::read(dir.path().join("report.json")).unwrap();
    let b = cmd_experiment(&cfg).unwrap();
    let bytes_b = fs::read(dir.path().join("report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(bytes_a, bytes_b);
    let c = cmd_experiment(&ExperimentConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.runs[0].relative_error, c.runs[0].relative_error);
}

#[test]
fn binary_runs_experiment_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let status = bin()
        .args(["--n", "3", "--l-max", "16", "--grid", "product:17x34", "--m-circle", "64"])
        .args(["--alphas", "0,0.1", "--output-dir", &out, "experiment"])
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("timings.json").exists());

    let data = dir.path().join("data.csv");
    let common = ["--n", "3", "--l-max", "16", "--grid", "product:17x34", "--m-circle", "64"];
    let forward = bin().args(common).args(["--output-dir", &out, "forward", "--out"]).arg(&data).output();
    assert!(forward.unwrap().status.success());
    assert!(bin()
        .args(common)
        .args(["--output-dir", &out, "reconstruct", "--alpha", "0.1", "--data"])
        .arg(&data)
        .output()
        .unwrap()
        .status
        .success());
    let pgm = dir.path().join("rec.pgm");
    let status = bin()
        .args(["export", "--width", "32", "--height", "16", "--coeffs"])
        .arg(dir.path().join("reconstruction_coeffs.csv"))
        .arg("--out")
        .arg(&pgm)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let bytes = fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n32 16\n65535\n"));
    assert_eq!(bytes.len(), b"P5\n32 16\n65535\n".len() + 32 * 16 * 2);
}

#[test]
fn binary_rejects_bad_input() {
    let out = bin().args(["--n", "0", "experiment"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["--grid", "product:3", "experiment"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["reconstruct", "--data", "/nonexistent/data.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(
        &cfg_path,
        format!(
            "n = 3\nl_max = 16\ngrid = \"product:17x34\"\nm_circle = 64\nalphas = []\noutput_dir = \"{}\"\n",
            dir.path().join("from_file").display()
        ),
    )
    .unwrap();
    let status =
        bin().arg("--config").arg(&cfg_path).args(["--seed", "9", "experiment"]).output().unwrap().status;
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("from_file/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["n"], 3);

    fs::write(&cfg_path, "n = 3\nbogus = 1\n").unwrap();
    let out = bin().arg("--config").arg(&cfg_path).arg("experiment").output().unwrap();
    assert!(!out.status.success());
}
