use std::path::Path;
use std::process::{Command, Output};

fn amfmcmc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amfmcmc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AMF_THREADS")
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"))
}

const TOY: &str = r#"
mode = "exact-mcmc"
seed = 5

[problem]
name = "toy1d"

[sampler]
n_iterations = 400
"#;

#[test]
fn help_lists_the_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = amfmcmc(&["run", "--help"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--mode", "--seed", "--output-dir", "--threads", "AMF_THREADS"] {
        assert!(text.contains(flag), "{flag} missing from help:\n{text}");
    }
}

#[test]
fn exact_run_writes_tables_and_prints_paths() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), TOY).unwrap();
    let out = amfmcmc(&["run", "--config", "run.toml", "--output-dir", "out", "--threads", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for f in ["measurements.csv", "traces.csv", "posterior.csv", "summary.csv", "rhat.csv", "manifest.toml"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
        assert!(stdout.contains(f));
    }
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.starts_with("parameter,mean,sd,p2.5,p50,p97.5\nm,"));
}

#[test]
fn seed_flag_overrides_the_file_and_thread_count_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), TOY).unwrap();
    let run = |out: &str, seed: &str, threads: &str| {
        let o = amfmcmc(&["run", "--config", "run.toml", "--output-dir", out, "--seed", seed, "--threads", threads], dir.path());
        assert!(o.status.success());
        std::fs::read(dir.path().join(out).join("traces.csv")).unwrap()
    };
    let a = run("a", "9", "1");
    let b = run("b", "9", "3");
    let c = run("c", "10", "1");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn diag_mode_reads_traces_without_a_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), TOY).unwrap();
    assert!(amfmcmc(&["run", "--config", "run.toml", "--output-dir", "run"], dir.path()).status.success());
    let out = amfmcmc(&["run", "--mode", "diag", "--traces", "run/traces.csv", "--output-dir", "diag"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(dir.path().join("run/rhat.csv")).unwrap(),
        std::fs::read(dir.path().join("diag/rhat.csv")).unwrap()
    );
}

#[test]
fn figure_mode_writes_the_fig1_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = amfmcmc(&["run", "--mode", "figure", "--figure", "fig1", "--output-dir", "fig"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rmse = std::fs::read_to_string(dir.path().join("fig/fig1_rmse.csv")).unwrap();
    assert!(rmse.starts_with("model,rmse\nsingle-fidelity,"));
}

#[test]
fn bad_config_exits_2_with_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "mode = \"exact-mcmc\"\n[sampler]\nn_chains = 1\n").unwrap();
    let out = amfmcmc(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["exit_code"], 2);
    assert_eq!(e["error"], "config");
}

#[test]
fn unknown_mode_and_missing_file_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = amfmcmc(&["run", "--mode", "sample-everything"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");

    let out = amfmcmc(&["run", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "file");
}

#[test]
fn corrupt_traces_are_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.csv"), "iteration,chain,a,log_post\n2,1,0.5,-1\n1,0,0.5,-1\n").unwrap();
    let out = amfmcmc(&["run", "--mode", "diag", "--traces", "t.csv", "--output-dir", "d"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "parse");
}
