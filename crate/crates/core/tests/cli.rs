use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mala-lab"))
}

#[test]
fn verify_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.csv");
    let status = bin().args(["verify", "--seed", "4", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("check,measured,bound,slack,passed\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn corrupted_acceptance_fails_naming_ratio_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.csv");
    let run = bin().args(["verify", "--corrupt-acceptance", "--out"]).arg(&out).output().unwrap();
    assert_eq!(run.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&run.stderr);
    let failed: Vec<&str> = stderr.lines().filter(|l| l.starts_with("FAILED")).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|l| l.starts_with("FAILED log_accept_ratio")), "{stderr}");
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let args = ["sweep-gap", "--set", "d_grid=8", "--set", "n_states=500", "--set", "h_grid=0.1,0.2"];
    assert!(bin().args(args).arg("--out").arg(&a).env("SEED", "9").status().unwrap().success());
    assert!(bin().args(args).args(["--seed", "9", "--out"]).arg(&b).env_remove("SEED").status().unwrap().success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("experiment,d,h,eta,estimator,value,std_error,n,seed\n"));
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn config_file_and_bad_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("accept.cfg");
    fs::write(&cfg, "# small run\ntarget=gaussian\nd_grid=16,32\nn_states=20\nn_mc=20\n").unwrap();
    let out = dir.path().join("accept.csv");
    let status = bin().args(["sweep-accept", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("mean_acceptance")).count(), 2);

    fs::write(&cfg, "wibble=3\n").unwrap();
    let run = bin().args(["sweep-accept", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("wibble"));
}

#[test]
fn finite_selftest_runs() {
    let run = bin().args(["finite-selftest", "--instances", "50", "--seed", "2"]).output().unwrap();
    assert!(run.status.success());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with("instance_seed,check,slack\n"));
    assert_eq!(stdout.lines().count(), 1 + 50 * 9);
}

#[test]
fn mix_labels_lower_bound() {
    let run = bin()
        .args(["mix", "--set", "d_grid=4", "--set", "max_steps=50", "--set", "h_rule=fixed", "--set", "h_grid=0.5"])
        .output()
        .unwrap();
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("lower bounds"));
    assert!(String::from_utf8_lossy(&run.stdout).contains("mixing_steps_lower_bound"));
}
