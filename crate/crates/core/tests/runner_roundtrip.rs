use std::path::Path;

use amf_core::io::tables::{measurements_to_csv, parse_real, parse_traces, Table};
use amf_core::io::{self, load_gp, Mode, ProblemConfig, RunConfig};
use amf_core::mcmc::SamplerConfig;
use amf_core::models::{make_problem, ProblemOverrides};

fn toy_config(mode: Mode, dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(mode);
    cfg.seed = 3;
    cfg.output_dir = dir.to_path_buf();
    cfg.problem = Some(ProblemConfig {
        name: "toy1d".into(),
        overrides: ProblemOverrides::default(),
        measurements: None,
        noise_seed: None,
    });
    cfg.sampler = SamplerConfig {
        n_iterations: 600,
        ..Default::default()
    };
    cfg
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    let k = t.header.iter().position(|h| h == name).unwrap();
    t.rows.iter().map(|r| parse_real(&r[k]).unwrap()).collect()
}

#[test]
fn diag_recomputes_rhat_from_written_traces() {
    let dir = tempfile::tempdir().unwrap();
    let run = io::execute(&toy_config(Mode::ExactMcmc, &dir.path().join("run"))).unwrap();
    assert!(run.files.contains(&"traces.csv".to_string()));

    let mut diag = RunConfig::new(Mode::Diag);
    diag.output_dir = dir.path().join("diag");
    diag.diag = Some(io::DiagConfig {
        traces: dir.path().join("run/traces.csv"),
    });
    io::execute(&diag).unwrap();

    let a = Table::parse(&std::fs::read_to_string(dir.path().join("run/rhat.csv")).unwrap()).unwrap();
    let b = Table::parse(&std::fs::read_to_string(dir.path().join("diag/rhat.csv")).unwrap()).unwrap();
    assert_eq!(a.header, b.header);
    assert_eq!(a.rows.len(), b.rows.len());
    for (x, y) in column(&a, "m").iter().zip(column(&b, "m")) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} {y}");
    }
    assert_eq!(column(&a, "iteration"), column(&b, "iteration"));
}

#[test]
fn traces_parse_back_to_the_same_chain_count() {
    let dir = tempfile::tempdir().unwrap();
    io::execute(&toy_config(Mode::ExactMcmc, dir.path())).unwrap();
    let t = parse_traces(&std::fs::read_to_string(dir.path().join("traces.csv")).unwrap()).unwrap();
    assert_eq!(t.names, vec!["m".to_string()]);
    assert_eq!(t.history.n_chains(), 4);
    // History keeps every iteration; thin_every only thins the archive.
    assert_eq!(t.history.n_kept(), 600);
}

#[test]
fn fitted_models_reload_and_predict_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(Mode::FitGp, dir.path());
    cfg.design.n_low = 12;
    cfg.design.n_high = 4;
    io::execute(&cfg).unwrap();
    let models = load_gp(&dir.path().join("gp.json")).unwrap();
    assert_eq!(models.len(), 1);
    // Refit from the same seed: the reloaded model must agree with a fresh run.
    let dir2 = tempfile::tempdir().unwrap();
    cfg.output_dir = dir2.path().to_path_buf();
    io::execute(&cfg).unwrap();
    let again = load_gp(&dir2.path().join("gp.json")).unwrap();
    for i in 0..=50 {
        let q = [10.0 * i as f64 / 50.0];
        let (p, r) = (models[0].predict(&q).unwrap(), again[0].predict(&q).unwrap());
        assert_eq!(p, r);
        assert!((p.mean - q[0].sin()).abs() < 0.5);
    }
}

#[test]
fn measurement_file_overrides_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let p = make_problem("toy1d", &ProblemOverrides::default()).unwrap();
    let meas = p.synthetic_measurements(99).unwrap();
    let path = dir.path().join("meas.csv");
    std::fs::write(&path, measurements_to_csv(&meas)).unwrap();
    let mut cfg = toy_config(Mode::ExactMcmc, &dir.path().join("out"));
    cfg.problem.as_mut().unwrap().measurements = Some(path.clone());
    io::execute(&cfg).unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join("out/measurements.csv")).unwrap(),
        std::fs::read_to_string(&path).unwrap()
    );
}

#[test]
fn wrong_measurement_count_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meas.csv");
    std::fs::write(&path, "label,value,noise_sd\na,1,0.1\nb,2,0.1\n").unwrap();
    let mut cfg = toy_config(Mode::ExactMcmc, dir.path());
    cfg.problem.as_mut().unwrap().measurements = Some(path);
    let err = io::execute(&cfg).unwrap_err();
    assert!(matches!(err, io::IoError::Input(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn manifest_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = io::execute(&toy_config(Mode::ExactMcmc, dir.path())).unwrap();
    let manifest: toml::Table = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap().parse().unwrap();
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(files, out.files.iter().map(String::as_str).collect::<Vec<_>>());
    for f in &out.files {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(manifest["mode"].as_str(), Some("exact-mcmc"));
}
