use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfc-sim"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn sim(sub: &str, conf: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(conf)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    names
}

// a short step run keeps the debug binary quick
const SHORT: [&str; 4] = ["--set", "run.duration=8", "--set", "run.distance=120"];

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim("run", &config("step.conf"), dir.path(), &SHORT);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(listing(dir.path()), ["metrics.csv", "trace.csv"]);

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,s,v_ref,v_true,v_meas,error,f_hat,alpha_hat,u_total,u_applied,tq_fl,tq_fr,tq_rl,tq_rr"
    );
    assert!(lines.all(|l| l.split(',').count() == 14));

    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("mfc,delay_ms,average,std_dev,rms,step_overshoot_pct,step_settling_m\nclassic,0,"));
}

#[test]
fn bad_control_period_is_a_config_error_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = sim(
        "run",
        &config("step.conf"),
        &out_dir,
        &["--set", "controller.dt=0.0105", "--set", "run.plant_dt=0.001"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(listing(&out_dir).is_empty());
}

#[test]
fn missing_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim("run", &dir.path().join("nope.conf"), dir.path(), &[]);
    assert_ne!(out.status.code(), Some(0));
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn overrides_and_flags_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SHORT.to_vec();
    args.extend(["--set", "controller.mode=adaptive", "--delay-ms", "50"]);
    let out = sim("run", &config("step.conf"), dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.lines().nth(1).unwrap().starts_with("adaptive,50,"), "{metrics}");
}

#[test]
fn reruns_with_same_seed_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let mut args = SHORT.to_vec();
        args.extend(["--seed", seed]);
        assert!(sim("run", &config("step.conf"), dir.path(), &args).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn compare_writes_paired_traces_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SHORT.to_vec();
    args.extend(["--set", "compare.delay_sweep=true"]);
    let out = sim("compare", &config("step.conf"), dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        listing(dir.path()),
        [
            "comparison.csv",
            "trace_adaptive.csv",
            "trace_adaptive_delay.csv",
            "trace_classic.csv",
            "trace_classic_delay.csv"
        ]
    );
    let table = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let labels: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["classic", "adaptive", "classic", "adaptive"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), table);
}

#[test]
fn fit_tire_prints_coefficients() {
    let out = bin()
        .args(["fit-tire", "--peak", "3000", "--asymptote", "3000", "--slope", "50000", "--peak-slip", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
    assert_eq!(
        keys,
        ["tire.stiffness_factor", "tire.shape_factor", "tire.peak_value", "tire.curvature_factor"]
    );
    assert!(text.contains("tire.shape_factor=1\n"));

    let bad = bin()
        .args(["fit-tire", "--peak", "3000", "--asymptote", "3500", "--slope", "50000", "--peak-slip", "0.1"])
        .output()
        .unwrap();
    assert_ne!(bad.status.code(), Some(0));
    assert!(!bad.stderr.is_empty());
}

#[test]
fn generated_driver_record_feeds_a_driver_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = bin()
        .args(["gen-driver-data", "--seed", "3", "--duration", "20", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(data.join("driver.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,vx,vy,yaw_rate"));
    assert!(csv.lines().count() > 1000);

    let conf = dir.path().join("drive.conf");
    std::fs::write(&conf, "scenario.kind = driver\nscenario.driver.file = data/driver.csv\nrun.duration = 10\n").unwrap();
    let run_dir = dir.path().join("run");
    let out = sim("run", &conf, &run_dir, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(listing(&run_dir), ["metrics.csv", "trace.csv"]);
}
