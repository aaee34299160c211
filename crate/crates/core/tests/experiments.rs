use kernel_bandits::harness::{
    run_experiment, write_outputs, ActionsSpec, AdversarySpec, Algorithm, ExperimentConfig, Params, Seeds,
    TRACE_HEADER,
};

fn config(algo: Algorithm) -> ExperimentConfig {
    ExperimentConfig {
        algo,
        kernel: "linear".into(),
        norm_bound: None,
        actions: ActionsSpec::Named("ball:16".into()),
        dim: 2,
        adversary: AdversarySpec::IidUnit,
        n: 500,
        seeds: Seeds::Count(3),
        adversary_seed: 7,
        params: Params::default(),
    }
}

#[test]
fn output_files_are_byte_identical_across_runs() {
    for algo in [Algorithm::BanditEw, Algorithm::FullinfoEw, Algorithm::Cg] {
        let cfg = config(algo);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_outputs(a.path(), &cfg, &run_experiment(&cfg).unwrap()).unwrap();
        write_outputs(b.path(), &cfg, &run_experiment(&cfg).unwrap()).unwrap();
        for name in ["trace_seed0.csv", "trace_seed2.csv", "diagnostics_seed1.csv", "report.json"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name} differs for {algo:?}");
        }
        let trace = std::fs::read_to_string(a.path().join("trace_seed0.csv")).unwrap();
        assert_eq!(trace.lines().next(), Some(TRACE_HEADER));
        let diag = std::fs::read_to_string(a.path().join("diagnostics_seed0.csv")).unwrap();
        assert!(diag.starts_with("# {"));
    }
}

#[test]
fn config_round_trips_through_json() {
    let cfg = config(Algorithm::Cg);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
}

#[test]
fn bandit_schedule_errors_name_the_precondition() {
    let mut cfg = config(Algorithm::BanditEw);
    cfg.n = 3;
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.class(), kernel_bandits::ErrorClass::Precondition);
    assert!(err.to_string().contains("gamma"), "{err}");
}

#[test]
fn cg_on_discretized_ball_meets_bound() {
    let mut cfg = config(Algorithm::Cg);
    cfg.actions = ActionsSpec::Named("ball:64".into());
    cfg.n = 4096;
    cfg.seeds = Seeds::Count(20);
    let out = run_experiment(&cfg).unwrap();
    let r = &out.report;
    assert!(r.mean_regret <= r.bound);
    assert!(r.discretization_error.unwrap() < 0.05);
}

#[test]
fn quadratic_full_information_on_ball() {
    let mut cfg = config(Algorithm::FullinfoEw);
    cfg.kernel = "quadratic".into();
    cfg.norm_bound = Some(2f64.sqrt());
    let out = run_experiment(&cfg).unwrap();
    assert!(out.report.final_regrets.iter().all(|r| r.is_finite()));
    assert!(out.report.mean_regret <= out.report.bound);
}
