use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gyrocav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gyrocav")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

#[test]
fn sweep_and_thermo_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert!(gyrocav(&["sweep", "--out", &out]).status.success());
    assert!(gyrocav(&["thermo", "--out", &out]).status.success());
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("B_mT,branch1_GHz,branch2_GHz,branch3_GHz,frac_R1,frac_L1,frac_S1,"));
    assert_eq!(sweep.lines().count(), 202);
    let chi = fs::read_to_string(dir.path().join("chi.csv")).unwrap();
    assert_eq!(chi.lines().next().unwrap(), "T_K,chi_plus,chi_minus,N_plus,N_minus");
    assert_eq!(chi.lines().count(), 122);
}

#[test]
fn other_commands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    for cmd in ["levels", "transitions", "s21"] {
        assert!(gyrocav(&[cmd, "--out", &out]).status.success(), "{cmd}");
    }
    assert_eq!(entries(dir.path()), ["levels.csv", "s21.csv", "transitions.csv"]);
    let levels = fs::read_to_string(dir.path().join("levels.csv")).unwrap();
    assert!(levels.starts_with("B_mT,E_-5/2_GHz,"));
    let s21 = fs::read_to_string(dir.path().join("s21.csv")).unwrap();
    assert!(s21.starts_with("f_GHz,S21_mag\n"));
}

#[test]
fn sweep_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert!(gyrocav(&["sweep", "--out", &out]).status.success());
    let data = dir.path().join("sweep.csv");
    let res = gyrocav(&[
        "fit", "--data", data.to_str().unwrap(), "--out", &out,
        "--set", "coupling.g_plus_MHz=9",
        "--set", "doublet_plus.g_RL_MHz=1.5",
        "--set", "doublet_plus.f_R_GHz=13.2615",
        "--set", "doublet_plus.f_L_GHz=13.2585",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("fit.json")).unwrap()).unwrap();
    let p = &fit["parameters"];
    for (key, truth) in [("f_R_GHz", 13.261), ("f_L_GHz", 13.259), ("g_RL_MHz", 1.0), ("g_sel_MHz", 6.0)] {
        let v = p[key].as_f64().unwrap();
        assert!((v / truth - 1.0).abs() < 0.01, "{key}: {v}");
    }
    assert_eq!(fit["converged"], true);
}

#[test]
fn override_beats_file_for_nested_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.config");
    let text = gyrocav::cli::REFERENCE_CONFIG.replace("dir = \"out\"", &format!("dir = {:?}", dir.path().join("from_file")));
    fs::write(&config, text).unwrap();
    let cfg = config.to_str().unwrap();
    assert!(gyrocav(&["sweep", "--config", cfg, "--set", "sweep.B_mT.points=7"]).status.success());
    let sweep = fs::read_to_string(dir.path().join("from_file/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 8);
    let cli_out = dir.path().join("from_flag");
    assert!(gyrocav(&["sweep", "--config", cfg, "--out", cli_out.to_str().unwrap()]).status.success());
    assert!(cli_out.join("sweep.csv").exists());
}

#[test]
fn invalid_override_exits_2_naming_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir.path().join("o"));
    let res = gyrocav(&["sweep", "--out", &out, "--set", "doublet_plus.kappa_L_MHz=-1"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("doublet_plus.kappa_L_MHz"));
    let res = gyrocav(&["sweep", "--out", &out, "--set", "spin.no_such_key=1"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("spin.no_such_key"));
    let res = gyrocav(&["sweep", "--config", "/nonexistent/run.config", "--out", &out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(entries(&dir.path().join("o")).is_empty());
}

#[test]
fn failure_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert!(gyrocav(&["sweep", "--out", &out]).status.success());
    let before = fs::read(dir.path().join("sweep.csv")).unwrap();
    // Out-of-range start for the fit: fails after the data were read.
    let data = dir.path().join("sweep.csv");
    let res = gyrocav(&["fit", "--data", data.to_str().unwrap(), "--out", &out, "--set", "fit.bounds.g_sel_MHz=[0.0, 1.0]"]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(entries(dir.path()), ["sweep.csv"]);
    assert_eq!(fs::read(dir.path().join("sweep.csv")).unwrap(), before);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = out_arg(dir.path());
        for cmd in ["sweep", "thermo", "s21"] {
            assert!(gyrocav(&[cmd, "--out", &out]).status.success());
        }
    }
    for name in ["sweep.csv", "chi.csv", "s21.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn json_format() {
    let dir = tempfile::tempdir().unwrap();
    let res = gyrocav(&["thermo", "--out", &out_arg(dir.path()), "--format", "json", "--set", "sweep.T_K.points=3"]);
    assert!(res.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("chi.json")).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let keys: Vec<&str> = rows[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["T_K", "chi_plus", "chi_minus", "N_plus", "N_minus"]);
}

#[test]
fn interrupted_write_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut tmp = tempfile::Builder::new().prefix(".sweep.csv.").tempfile_in(dir.path()).unwrap();
        std::io::Write::write_all(&mut tmp, b"partial").unwrap();
        // Dropped before persist, as on a crash mid-write.
    }
    assert!(entries(dir.path()).is_empty());
    let path = gyrocav::cli::write_atomic(dir.path(), "sweep.csv", b"complete").unwrap();
    assert_eq!(fs::read(path).unwrap(), b"complete");
    assert_eq!(entries(dir.path()), ["sweep.csv"]);
}
