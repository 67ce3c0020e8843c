use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sigmalambda"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scenario(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
    "physics": {"m": 1.0, "hbar": 1.0, "lambda": 0.5},
    "grid": {"n": 256, "x_min": -20.0, "x_max": 20.0},
    "initial": {"kind": "gaussian", "x0": 0.0, "p0": 0.5, "s0": 1.0},
    "time": {"dt": 0.001, "t_end": 0.05, "output_every": 10},
    "trajectories": {"count": 8},
    "phase_space": {"n_x": 64, "n_p": 64, "p_min": -5.0, "p_max": 5.0, "every": 2}
}"#;

#[test]
fn run_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["run", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (file, header) in [
        ("summary.csv", "t,norm,energy,width,center,hj_res_l2,cont_res_l2"),
        ("density.csv", "t,x,rho,S,Q"),
        ("trajectories.csv", "t,particle_id,x"),
        ("phasespace.csv", "t,x,p,f"),
    ] {
        let text = std::fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{file}");
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }
    let meta: String = std::fs::read_to_string(out.join("metadata.json")).unwrap();
    assert!(meta.contains("\"lambda\": 0.5"));
}

#[test]
fn output_defaults_to_the_scenario_entry() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-file");
    let body = SMALL.replacen('{', &format!("{{\n    \"output\": {:?},", target.to_str().unwrap()), 1);
    let sc = scenario(dir.path(), &body);
    let o = run(&["run", "--scenario", &sc]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(target.join("summary.csv").exists());
    let bare = scenario(dir.path(), SMALL);
    assert_eq!(run(&["run", "--scenario", &bare]).status.code(), Some(2));
}

#[test]
fn configuration_problems_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad_lambda = scenario(dir.path(), &SMALL.replace("\"lambda\": 0.5", "\"lambda\": 2.0"));
    let o = run(&["run", "--scenario", &bad_lambda, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));

    let typo = scenario(dir.path(), &SMALL.replace("\"t_end\"", "\"t_fin\""));
    assert_eq!(run(&["run", "--scenario", &typo, "--out", out]).status.code(), Some(2));

    let sc = scenario(dir.path(), SMALL);
    let dup = run(&["sweep-lambda", "--scenario", &sc, "--lambdas", "0.5,0.5", "--out", out]);
    assert_eq!(dup.status.code(), Some(2));
    let without = SMALL.replace(
        ",\n    \"phase_space\": {\"n_x\": 64, \"n_p\": 64, \"p_min\": -5.0, \"p_max\": 5.0, \"every\": 2}",
        "",
    );
    assert!(!without.contains("phase_space"));
    let no_phase = scenario(dir.path(), &without);
    let o = run(&["kvn", "--scenario", &no_phase, "--out", out]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("phase_space section"));
    assert_eq!(run(&["kvn", "--scenario", &no_phase, "--out", out]).status.code(), Some(2));
    assert_eq!(run(&["demo", "crossing", "--mode", "sideways", "--out", out]).status.code(), Some(2));
}

#[test]
fn missing_files_and_unwritable_outputs_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = run(&["run", "--scenario", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    let blocker = dir.path().join("plain-file");
    std::fs::write(&blocker, b"x").unwrap();
    let sc = scenario(dir.path(), SMALL);
    let o = run(&["run", "--scenario", &sc, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["validate", "--fast", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sweep_reports_one_row_per_lambda_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), SMALL);
    let out = dir.path().join("sweep");
    let o = run(&["sweep-lambda", "--scenario", &sc, "--lambdas", "1,0,0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "lambda,regime,final_width,energy,hj_res_l2,cont_res_l2");
    assert!(rows[1].starts_with("1.0000000000000000e0,classical,"));
    assert!(rows[2].starts_with("0.0000000000000000e0,quantum,"));
    assert!(rows[3].starts_with("5.0000000000000000e-1,intermediate,"));
    for l in ["lambda_1", "lambda_0", "lambda_0.5"] {
        assert!(out.join(l).join("summary.csv").exists(), "{l}");
    }
}

#[test]
fn crossing_demo_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mixture");
    let o = run(&["demo", "crossing", "--mode", "mixture", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let count: usize = stdout
        .lines()
        .find_map(|l| l.strip_prefix("crossings: "))
        .expect("crossing line")
        .parse()
        .unwrap();
    assert!(count >= 1, "{stdout}");
    assert!(out.join("phasespace.csv").exists());
}

#[test]
fn fast_validation_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--fast", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("[PASS]") || l.starts_with("[SKIP]")), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    assert_eq!(csv.lines().count(), stdout.lines().count() + 1);
}
