use std::path::Path;
use std::process::{Command, Output};

fn tdmpc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdmpc")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn constants_from_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmpc(&["constants", "--preset", "pendulum"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("constants.txt")).unwrap();
    for key in [
        "L = ",
        "beta = ",
        "eta = ",
        "alpha = ",
        "omega = ",
        "sigma = ",
        "kappa = ",
        "c = ",
        "r_N = ",
        "ell_star = ",
        "M_x = ",
        "M_u = ",
    ] {
        assert!(text.lines().any(|l| l.starts_with(key)), "missing {key}");
    }
    assert!(text.contains("M_bar = pending probe"));
}

#[test]
fn probe_then_constants_fills_fitted_values() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--preset", "pendulum", "--set", "N=5", "--set", "probe.pairs=60", "--set", "probe.holdout=30"];
    let o = tdmpc(&[&["probe"][..], &args].concat(), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = tdmpc(&[&["constants"][..], &args].concat(), dir.path());
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("constants.txt")).unwrap();
    assert!(!text.contains("pending probe"), "{text}");
    assert!(text.contains("rho_empirical = 0."));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "A_c = [0, 1; 14.7, 0]\nB_c = [0; 30]\nTs = 0.1\nR = [1]\nN = 5\nT = 30\nx0 = [0.1, 0]\nu_min = [-1]\nu_max = [1]\n").unwrap();
    let o = tdmpc(&["constants", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("`Q`"), "{}", stderr(&o));

    let o = tdmpc(&["constants"], dir.path());
    assert_eq!(code(&o), 1);
    let o = tdmpc(&["frobnicate", "--preset", "pendulum"], dir.path());
    assert_eq!(code(&o), 1);
    let o = tdmpc(&["run", "zero", "--preset", "pendulum"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn failed_calibration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmpc(
        &[
            "calibrate-N",
            "--preset",
            "pendulum",
            "--set",
            "calibrate.low=0.999",
            "--set",
            "calibrate.high=0.9999",
            "--set",
            "calibrate.max_N=3",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(dir.path().join("calibrate_N.csv").exists());
}

#[test]
fn unstabilizable_model_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        tdmpc(&["constants", "--preset", "pendulum", "--set", "A_c=[1, 0; 0, 1]", "--set", "B_c=[0; 1]"], dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn calibrate_then_run_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmpc(&["calibrate-N", "--preset", "pendulum"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = dir.path().join("calibrated.cfg");
    let cfg = cfg.to_str().unwrap();
    assert!(std::fs::read_to_string(cfg).unwrap().contains("N = 5"));

    let o = tdmpc(&["run", "6", "--config", cfg, "--no-timing"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = std::fs::read_to_string(dir.path().join("run_ell6.csv")).unwrap();
    assert_eq!(run.lines().next(), Some("k,x_1,x_2,u_applied_1,norm_d_k,solve_time_s"));
    assert_eq!(run.lines().count(), 32);

    let o = tdmpc(&["run", "benchmark", "--config", cfg], dir.path());
    assert_eq!(code(&o), 0);
    let bench = std::fs::read_to_string(dir.path().join("run_benchmark.csv")).unwrap();
    assert!(bench.lines().nth(1).unwrap().contains(",,"), "benchmark rows leave norm_d_k empty");

    let sweep_args = ["sweep", "--config", cfg, "--no-timing", "--svg", "--set", "ells=[1, 6, 40]"];
    let o = tdmpc(&sweep_args, dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = std::fs::read(dir.path().join("sweep.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("ell,eta_pow_ell,R_T_empirical,complexity_cor1,bound_thm8,S_T,S_T2,compute_time_s,stable_flag")
    );
    assert_eq!(text.lines().count(), 4);
    assert!(dir.path().join("sweep.svg").exists());
    let o = tdmpc(&sweep_args, dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(dir.path().join("sweep.csv")).unwrap(), first);
}
