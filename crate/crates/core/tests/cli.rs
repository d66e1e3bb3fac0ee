use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn cavtool(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cavtool"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(n) = threads {
        cmd.env("CAVTOOL_THREADS", n);
    }
    cmd.output().unwrap()
}

fn run_config(sub: &str, config: &Path, out: &Path, seed: &str, threads: Option<&str>) -> Output {
    cavtool(&[sub, "--config", config.to_str().unwrap(), "--seed", seed], out, threads)
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const RUNS: [(&str, &str); 11] = [
    ("stack", "stack_design.json"),
    ("stack", "stack_empty.json"),
    ("dispersion", "dispersion.json"),
    ("fit", "fit_g2.json"),
    ("fit", "fit_saturation.json"),
    ("fit", "fit_peaks.json"),
    ("report", "report.json"),
    ("beta-scan", "beta_scan.json"),
    ("synth", "synth_g2.json"),
    ("synth", "synth_saturation.json"),
    ("synth", "synth_peaks.json"),
];

#[test]
fn every_subcommand_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, (sub, file)) in RUNS.iter().enumerate() {
        let config = configs().join(file);
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        let ra = run_config(sub, &config, &a, "7", Some("1"));
        let rb = run_config(sub, &config, &b, "7", Some("4"));
        assert!(ra.status.success(), "{sub} {file}: {}", String::from_utf8_lossy(&ra.stderr));
        assert!(rb.status.success(), "{sub} {file}: {}", String::from_utf8_lossy(&rb.stderr));
        let fa = read_dir_sorted(&a);
        assert!(!fa.is_empty());
        assert_eq!(fa, read_dir_sorted(&b), "{sub} {file}");
    }
}

#[test]
fn synth_seed_changes_the_data() {
    let tmp = tempfile::tempdir().unwrap();
    let config = configs().join("synth_g2.json");
    run_config("synth", &config, &tmp.path().join("a"), "1", None);
    run_config("synth", &config, &tmp.path().join("b"), "2", None);
    let a = fs::read(tmp.path().join("a/synth_g2.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/synth_g2.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn shipped_data_matches_shipped_synth_configs() {
    let tmp = tempfile::tempdir().unwrap();
    for kind in ["g2", "saturation", "peaks"] {
        let out = tmp.path().join(kind);
        let r = run_config("synth", &configs().join(format!("synth_{kind}.json")), &out, "1", None);
        assert!(r.status.success());
        let fresh = fs::read(out.join(format!("synth_{kind}.csv"))).unwrap();
        let shipped = fs::read(configs().join(format!("data/synth_{kind}.csv"))).unwrap();
        assert_eq!(fresh, shipped, "{kind}");
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = dir.join("out");

    let missing = write(dir, "missing.json", r#"{"free_counts": 4000, "eta_free": 0.0035}"#);
    let r = run_config("report", &missing, &out, "0", None);
    assert_eq!(r.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&r.stderr);
    for field in ["cavity_counts", "eta_cavity", "emitter_linewidth_thz", "cavity_linewidth_ghz", "bright_state_rate"] {
        assert!(stderr.contains(field), "{stderr}");
    }

    let garbled = write(dir, "garbled.json", "{ not json");
    assert_eq!(run_config("stack", &garbled, &out, "0", None).status.code(), Some(2));
    assert_eq!(run_config("stack", &dir.join("absent.json"), &out, "0", None).status.code(), Some(2));

    let unstable = write(
        dir,
        "unstable.json",
        r#"{"geometry": {"R_um": 3.0, "air_gap_um": 4.5, "t_d_nm": 862.0, "n_d": 2.41, "emitter_depth_nm": 737.0, "lambda_nm": 603.0},
            "air_gap_um": [4.4, 4.5], "wavelength_nm": [600.0, 603.0]}"#,
    );
    assert_eq!(run_config("dispersion", &unstable, &out, "0", None).status.code(), Some(4));

    let data = configs().join("data/synth_g2.csv");
    let starved = write(
        dir,
        "starved.json",
        &format!(r#"{{"model": "g2", "data": {:?}, "max_iterations": 1}}"#, data.to_str().unwrap()),
    );
    let r = run_config("fit", &starved, &dir.join("starved"), "0", None);
    assert_eq!(r.status.code(), Some(3));
    assert!(dir.join("starved/fit_result.json").exists());

    let wrong_header = write(dir, "wrong.json", &format!(r#"{{"model": "saturation", "data": {:?}}}"#, data.to_str().unwrap()));
    assert_eq!(run_config("fit", &wrong_header, &out, "0", None).status.code(), Some(2));

    let r = Command::new(env!("CARGO_BIN_EXE_cavtool")).arg("bogus").output().unwrap();
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn empty_stack_transmits_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run_config("stack", &configs().join("stack_empty.json"), tmp.path(), "0", None);
    assert!(r.status.success());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("stack_report.json")).unwrap()).unwrap();
    for row in report["response"].as_array().unwrap() {
        assert_eq!(row["transmittance"].as_f64(), Some(1.0));
    }
}
