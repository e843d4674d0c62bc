use std::path::Path;
use std::process::{Command, Output};

use cohglm::decompose::BandParams;
use cohglm::io::signal_csv;
use cohglm::sim::{DriverSpec, SweepContext};

const SMALL: &str = "seed = 3\n[driver]\nfs_hz = 25.0\n[sweep]\nn_targets = 10\n[surrogate]\nn_perm = 100\n";

fn cohglm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohglm"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn setup() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    (dir, cfg)
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn simulate_writes_one_row_per_target_and_echoes_seed() {
    let (dir, cfg) = setup();
    let out = cohglm(dir.path(), &["simulate", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout) + String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("seed: 3"), "{text}");
    let sweep = lines(&dir.path().join("out/sweep.csv"));
    assert_eq!(sweep.len(), 11);
    assert_eq!(sweep[0], "c_true,sigma_n,snr_db,c_obs,p_glm,p_circ,p_phase,f_br_hz");
    assert_eq!(lines(&dir.path().join("out/sweep_control.csv")).len(), 11);

    let seeded = cohglm(dir.path(), &["simulate", "--config", &cfg, "--seed", "9"]);
    assert!(String::from_utf8_lossy(&seeded.stdout).contains("seed: 9") || String::from_utf8_lossy(&seeded.stderr).contains("seed: 9"));
}

#[test]
fn missing_driver_file_exits_2_without_output() {
    let (dir, _) = setup();
    let out = cohglm(dir.path(), &["test", "/nonexistent/x.csv", "/nonexistent/y.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/test.csv").exists());
    assert!(!dir.path().join("out/psd.csv").exists());
}

#[test]
fn bad_bench_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[bench]\nrepeats = 2\n").unwrap();
    let out = cohglm(dir.path(), &["bench", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/bench.csv").exists());
}

#[test]
fn empty_or_tiny_sweeps_exit_2() {
    let (dir, _) = setup();
    let header = "c_true,sigma_n,snr_db,c_obs,p_glm,p_circ,p_phase,f_br_hz\n";
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, header).unwrap();
    assert_eq!(cohglm(dir.path(), &["power", empty.to_str().unwrap()]).status.code(), Some(2));

    let one = dir.path().join("one.csv");
    std::fs::write(&one, format!("{header}0.5,1,0,0.5,0.01,0.02,0.03,0.3\n")).unwrap();
    let out = cohglm(dir.path(), &["roc", one.to_str().unwrap(), "--control", one.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/roc.csv").exists());

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n").unwrap();
    assert_eq!(cohglm(dir.path(), &["agreement", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn recorded_pair_test_separates_coupled_from_independent() {
    let (dir, cfg) = setup();
    let spec = DriverSpec { fs_hz: 25.0, ..Default::default() };
    let ctx = SweepContext::new(&spec, &BandParams::default(), 8).unwrap();
    let x = dir.path().join("x.csv");
    std::fs::write(&x, signal_csv(&ctx.driver).unwrap()).unwrap();

    // the driver against itself: the peak band is as coherent as it gets
    let out = cohglm(dir.path(), &["test", x.to_str().unwrap(), x.to_str().unwrap(), "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&dir.path().join("out/test.csv"));
    assert_eq!(rows[0], "band_hz,c_obs,p_glm,p_circ,p_phase");
    let min_glm = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(1.0, f64::min);
    assert!(min_glm < 1e-100, "{min_glm}");
    assert!(lines(&dir.path().join("out/psd.csv"))[0] == "freq_hz,psd_x,psd_y");

    // pure noise at the target
    let (y, _, _) = ctx.observation(0, 1e-6).unwrap();
    let yp = dir.path().join("y.csv");
    std::fs::write(&yp, signal_csv(&y).unwrap()).unwrap();
    let out = cohglm(dir.path(), &["test", x.to_str().unwrap(), yp.to_str().unwrap(), "--config", &cfg]);
    assert!(out.status.success());
    let rows = lines(&dir.path().join("out/test.csv"));
    let hits = rows[1..]
        .iter()
        .filter(|r| r.split(',').nth(2).unwrap().parse::<f64>().unwrap() < 0.05)
        .count();
    assert!(hits <= 2, "{hits} of {} bands significant", rows.len() - 1);
}

#[test]
fn analysis_chain_runs_on_simulated_sweep() {
    let (dir, cfg) = setup();
    assert!(cohglm(dir.path(), &["simulate", "--config", &cfg]).status.success());
    for cmd in ["power", "roc", "agreement"] {
        let out = cohglm(dir.path(), &[cmd, "--config", &cfg]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(lines(&dir.path().join("out/agreement.csv")).len(), 11);
    assert_eq!(lines(&dir.path().join("out/roc.csv"))[0], "method,threshold,fpr,tpr,auc,control_freq_hz");
    assert_eq!(
        lines(&dir.path().join("out/power_thresholds.csv"))[0],
        "method,axis,alpha,c50,c80,c90,snr_at_80_db"
    );
}
