use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn floatsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floatsim"))
        .args(args)
        .output()
        .expect("spawn floatsim")
}

fn run_in(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> (Output, std::path::PathBuf) {
    let cfg = dir.join(format!("{cmd}.ini"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("{cmd}_out"));
    let mut args = vec![cmd, cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (floatsim(&args), out)
}

fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const NOISY: &str = "[sensor]\nnoise_std = 0.05\n";

#[test]
fn sweep_writes_one_trace_per_value_and_a_monotone_summary() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run_in(
        tmp.path(),
        "sweep",
        "[sweep]\nvaried = k_ri\nvalues = 0, 500, 2000\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for i in 0..3 {
        assert!(out.join(format!("k_ri_{i:02}.csv")).exists());
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,value,peak_force,min_force,break_count,break_intervals,log_decrement"
    );
    let peaks: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(peaks.len(), 3);
    assert!(peaks.windows(2).all(|w| w[0] < w[1]), "{peaks:?}");
}

#[test]
fn reruns_are_byte_identical() {
    for (cmd, cfg) in [
        ("sweep", String::new()),
        ("scenario", NOISY.to_string()),
        ("threshold", "[sensor]\nnoise_std = 0.005\n[threshold]\nruns = method2\nf_lo = 0.1\nf_hi = 2.0\nresolution = 0.2\n".to_string()),
    ] {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        let (oa, da) = run_in(a.path(), cmd, &cfg, &["--seed", "11"]);
        let (ob, db) = run_in(b.path(), cmd, &cfg, &["--seed", "11"]);
        assert_eq!(oa.status.code(), Some(0), "{cmd}: {}", stderr(&oa));
        assert_eq!(ob.status.code(), Some(0));
        assert_eq!(contents(&da), contents(&db), "{cmd}");
    }
}

#[test]
fn seed_controls_the_sensor_noise() {
    let tmp = TempDir::new().unwrap();
    let dirs: Vec<_> = ["1", "1", "2"]
        .iter()
        .enumerate()
        .map(|(i, seed)| {
            let sub = tmp.path().join(i.to_string());
            fs::create_dir(&sub).unwrap();
            let (o, out) = run_in(&sub, "scenario", NOISY, &["--seed", seed]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            contents(&out)
        })
        .collect();
    assert_eq!(dirs[0], dirs[1]);
    assert_ne!(dirs[0]["method2_trace.csv"], dirs[2]["method2_trace.csv"]);
}

#[test]
fn scenario_writes_a_trace_and_metrics_per_run() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run_in(tmp.path(), "scenario", "", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for label in ["method1_case1", "method1_case2", "method2", "method3"] {
        let trace = fs::read_to_string(out.join(format!("{label}_trace.csv"))).unwrap();
        assert!(trace.starts_with(
            "tick,t,mode,ee_y,ee_z,ee_th,t_y,t_z,t_th,fz_meas,fy_meas,tx_meas,fz_cmd,fy_cmd,tx_cmd,n_contacts\n"
        ));
        assert_eq!(trace.lines().count(), 801);
        let metrics = fs::read_to_string(out.join(format!("{label}_metrics.txt"))).unwrap();
        assert!(metrics.starts_with(&format!("label={label}\n")));
        assert!(metrics.contains("contact_break_count="));
    }
    assert!(out.join("comparison.csv").exists());
}

#[test]
fn configuration_errors_exit_one() {
    let cases = [
        ("sweep", "[sweep]\nvalues =\n", "values"),
        ("sweep", "[sweep]\nstiffness = 3\n", "line 2"),
        (
            "scenario",
            "[run.bad]\nmethod = ForceOnly\nk_xp = 0.5\n",
            "k_xp",
        ),
        ("scenario", "[plant]\nee_mass = -1\n", "ee_mass"),
        ("threshold", "[bogus]\n", "line 1"),
    ];
    for (cmd, cfg, needle) in cases {
        let tmp = TempDir::new().unwrap();
        let (o, _) = run_in(tmp.path(), cmd, cfg, &[]);
        assert_eq!(o.status.code(), Some(1), "{cmd} {cfg:?}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{cmd} {cfg:?}: {}", stderr(&o));
    }
    let o = floatsim(&["scenario", "/nonexistent/config.ini", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(floatsim(&["scenario"]).status.code(), Some(1));
    assert_eq!(floatsim(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn divergence_exits_two() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = run_in(tmp.path(), "sweep", "[sweep]\nk_c = 1e9\ndt = 0.01\n", &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverge"));
    let (o, _) = run_in(
        tmp.path(),
        "scenario",
        "[run.wild]\nmethod = ForceWithInertiaReduction\nk_yp = 200\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_brackets_exit_three() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = run_in(
        tmp.path(),
        "threshold",
        "[threshold]\nf_lo = 2\nf_hi = 1\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // already aligning at f_lo: nothing to bracket
    let (o, _) = run_in(
        tmp.path(),
        "threshold",
        "[threshold]\nruns = method1_case2\nf_lo = 1.0\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn threshold_writes_logs_and_brackets() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run_in(
        tmp.path(),
        "threshold",
        "[threshold]\nresolution = 0.1\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("thresholds.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    for label in ["method1_case1", "method2"] {
        assert!(out.join(format!("{label}_threshold.csv")).exists());
    }
    // a bracket narrower than the resolution needs only the end probes
    let (o, out) = run_in(
        tmp.path(),
        "threshold",
        "[threshold]\nruns = method2\nf_lo = 0.2\nf_hi = 1.0\nresolution = 1.0\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = fs::read_to_string(out.join("method2_threshold.csv")).unwrap();
    let probes = log
        .lines()
        .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
        .count();
    assert_eq!(probes, 1, "{log}");
}

#[test]
fn dump_defaults_round_trips() {
    let o = floatsim(&["scenario", "--dump-defaults"]);
    assert_eq!(o.status.code(), Some(0));
    let dumped = String::from_utf8(o.stdout).unwrap();
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("dumped.ini");
    fs::write(&path, &dumped).unwrap();
    let again = floatsim(&[
        "sweep",
        path.to_str().unwrap(),
        "--dump-defaults",
        "--seed",
        "4",
    ]);
    assert_eq!(again.status.code(), Some(0));
    let again = String::from_utf8(again.stdout).unwrap();
    assert_eq!(dumped.replace("seed = 0", "seed = 4"), again);
}
