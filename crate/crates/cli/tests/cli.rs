use std::process::Command;

use anticonc_cli::{compare_rows, read_record, replay, run, CliError, ExperimentConfig};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn small_configs() -> Vec<ExperimentConfig> {
    [
        "experiment=smallball\nn_list=6,9\ntrials=300\nbeta=1",
        "experiment=tail\nn_list=6,10\ntrials=60\na_exp=1",
        "experiment=detconc\nn_list=8,12\ntrials=40",
        "experiment=decoupling\nn=4\ntrials=12",
        "experiment=gapreduce\nplanted=true\ntrials=25",
        "experiment=rankgrow\nn=3\ntrials=80",
        "experiment=odlyzko\nn_list=6\ntrials=120",
    ]
    .into_iter()
    .map(|t| config(&format!("{t}\nseed=99")))
    .collect()
}

#[test]
fn rows_do_not_depend_on_worker_count() {
    for cfg in small_configs() {
        let mut one = cfg.clone();
        one.workers = Some(1);
        let mut four = cfg.clone();
        four.workers = Some(4);
        let a = run(&one).unwrap();
        let b = run(&four).unwrap();
        assert!(!a.rows.is_empty(), "{}", cfg.experiment);
        assert_eq!(a.rows, b.rows, "{}", cfg.experiment);
        assert_eq!(a.config_hash, b.config_hash);
        assert_eq!(a.verdict, b.verdict);
    }
}

#[test]
fn replay_reproduces_stored_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("experiment=decoupling\nn=4\ntrials=10\nseed=3");
    cfg.out = Some(dir.path().to_path_buf());
    let first = run(&cfg).unwrap();
    let path = dir.path().join("decoupling.json");
    assert!(dir.path().join("decoupling.csv").exists());
    let again = replay(&path, Some(2)).unwrap();
    assert_eq!(first.rows, again.rows);

    // A stored record whose seed was edited no longer matches its rows.
    let mut tampered = read_record(&path).unwrap();
    tampered.config.seed = 4;
    std::fs::write(&path, serde_json::to_string(&tampered).unwrap()).unwrap();
    let err = replay(&path, None).unwrap_err();
    assert!(matches!(err, CliError::ReplayMismatch { .. }), "{err}");
}

#[test]
fn csv_has_header_and_one_line_per_row() {
    let rec = run(&config("experiment=odlyzko\nn=5\ntrials=50\nseed=1")).unwrap();
    let csv = rec.to_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), rec.rows.len() + 1);
    assert_eq!(lines[0], rec.header.join(","));
    let mut other = rec.clone();
    other.rows[0][0] = "x".into();
    assert!(matches!(compare_rows(&rec, &other), Err(CliError::ReplayMismatch { row: 1, .. })));
}

#[test]
fn unknown_experiment_and_bad_fields() {
    assert!(matches!(run(&config("experiment=nothing")), Err(CliError::UnknownExperiment(_))));
    assert!(matches!(ExperimentConfig::parse("seed = -x"), Err(CliError::InvalidConfig { .. })));
    assert!(matches!(run(&config("experiment=tail\nworkers=0")), Err(CliError::InvalidConfig { .. })));
}

#[test]
fn worked_gap_instance() {
    let rec = run(&config("experiment=gapreduce")).unwrap();
    assert_eq!(rec.exit_code(), 0);
    let output = rec.summary.to_string();
    assert!(output.contains("g=[11]"), "{output}");
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anticonc"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary().args(["--seed", "5", "--out"]).arg(dir.path()).args(["gapreduce"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict: pass"));

    let out = binary().arg("replay").arg(dir.path().join("gapreduce.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    // An impossible bound fails outright.
    let out = binary().args(["--trials", "200", "tail", "--n-list", "4", "--a-exp", "0", "--bound", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));

    // Bound inside the interval: inconclusive.
    let out = binary().args(["--trials", "30", "--seed", "1", "odlyzko", "--n", "4", "--k", "3", "--set", "bound=0.5"]).output().unwrap();
    let code = out.status.code();
    assert!(code == Some(3) || code == Some(0), "{code:?}: {}", String::from_utf8_lossy(&out.stdout));

    let out = binary().args(["smallball", "--law", "cauchy"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("law"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"experiment": "rankgrow", "n": 3, "trials": 40, "seed": 8}"#).unwrap();
    let out = binary().arg("--config").arg(&path).args(["--workers", "2", "--out"]).arg(dir.path()).arg("rankgrow").output().unwrap();
    assert!(out.status.code() == Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rec = read_record(&dir.path().join("rankgrow.json")).unwrap();
    assert_eq!(rec.config.trials, 40);
    assert_eq!(rec.config.workers, Some(2));
    assert_eq!(rec.rows, run(&config("experiment=rankgrow\nn=3\ntrials=40\nseed=8")).unwrap().rows);
}

#[test]
fn ensemble_commands() {
    let out = binary().args(["--seed", "2", "--trials", "2", "ensemble", "rank", "--n", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<serde_json::Value> = String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|v| v["n"] == 4 && v["rank"].as_u64().unwrap() <= 4));

    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.txt");
    std::fs::write(&m, "3 0\n0 -1\n").unwrap();
    let out = binary().args(["ensemble", "spectrum", "--input"]).arg(&m).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sigma_1"], 3.0);
    assert_eq!(v["sigma_n"], 1.0);
    assert_eq!(v["kappa"], 3.0);
}
