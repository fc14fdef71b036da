use nestlab_core::experiments::{
    run_experiment, validate_artifact, ExperimentConfig, ExperimentKind, MethodKind, StepValue, Tamper,
};
use nestlab_core::LabError;
use proptest::prelude::*;

const KNOWN_TOP: [&str; 19] = [
    "experiment", "seed", "n", "density", "network", "retries", "objective", "theta", "thetas", "b0", "k_max",
    "targets", "x0", "taus", "k", "m", "long", "tamper", "out",
];

fn config_key(e: LabError) -> String {
    match e {
        LabError::Config { key, .. } => key,
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn failed_checks(cfg: &ExperimentConfig) -> Vec<String> {
    let out = run_experiment(cfg).unwrap();
    for a in &out.artifacts {
        validate_artifact(&a.name, &a.contents).unwrap_or_else(|e| panic!("{}: {e}", a.name));
    }
    out.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendered_configs_parse_back(
        seed in any::<u64>(),
        n in 2usize..200,
        k_max in 1usize..100_000,
        c in 0.01f64..10.0,
        alpha_over_l in 0.05f64..2.0,
        tau in 0.0f64..1.0,
        eta in 0.01f64..0.99,
    ) {
        let text = format!(
            "# comment\nexperiment = custom\nseed = {seed}\nn = {n}\nk_max = {k_max}\n\
             [method.a]\nkind = dng\nc = {c}\neta = {eta}\n\
             [method.b]\nkind = dnc\nalpha = {alpha_over_l}/L\n\
             [method.dsg]\nc = {c}\ntau = {tau}\n"
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(cfg.experiment, ExperimentKind::Custom);
        prop_assert_eq!(cfg.seed, seed);
        prop_assert_eq!(cfg.n, Some(n));
        prop_assert_eq!(cfg.k_max, Some(k_max));
        let kinds: Vec<MethodKind> = cfg.methods.iter().map(|m| m.kind).collect();
        prop_assert_eq!(kinds, vec![MethodKind::Dng, MethodKind::Dnc, MethodKind::Dsg]);
        prop_assert_eq!(cfg.methods[0].c, Some(StepValue::Abs(c)));
        prop_assert_eq!(cfg.methods[0].eta, Some(eta));
        prop_assert_eq!(cfg.methods[1].alpha, Some(StepValue::OverL(alpha_over_l)));
        prop_assert_eq!(cfg.methods[2].tau, Some(tau));
    }

    #[test]
    fn unknown_keys_are_named(key in "[a-z][a-z_]{0,12}", in_method in any::<bool>()) {
        prop_assume!(!KNOWN_TOP.contains(&key.as_str()));
        prop_assume!(!["kind", "c", "tau", "alpha", "eta", "k_max", "keep_every", "momentum"].contains(&key.as_str()));
        let text = if in_method {
            format!("experiment = custom\nseed = 1\n[method.dng]\nc = 1\n{key} = 3\n")
        } else {
            format!("experiment = custom\nseed = 1\n{key} = 3\n")
        };
        let expected = if in_method { format!("method.dng.{key}") } else { key };
        prop_assert_eq!(config_key(ExperimentConfig::parse(&text).unwrap_err()), expected);
    }

    #[test]
    fn step_values_resolve(a in 0.01f64..10.0, l in 0.01f64..10.0) {
        let v: StepValue = format!("{a}/L").parse().unwrap();
        prop_assert!((v.resolve(Some(l)).unwrap() - a / l).abs() <= 1e-12 * a / l);
        let w: StepValue = format!("1/({a}L)").parse().unwrap();
        prop_assert!((w.resolve(Some(l)).unwrap() - 1.0 / (a * l)).abs() <= 1e-12 / (a * l));
        prop_assert!(v.resolve(None).is_err());
    }
}

#[test]
fn required_keys_and_parameters() {
    assert_eq!(config_key(ExperimentConfig::parse("experiment = custom\n").unwrap_err()), "seed");
    assert_eq!(config_key(ExperimentConfig::parse("seed = 4\n").unwrap_err()), "experiment");
    let e = ExperimentConfig::parse("experiment = custom\nseed = 1\n[method.x]\nkind = dnc\n").unwrap_err();
    assert_eq!(config_key(e), "method.x.alpha");
    let e = ExperimentConfig::parse("experiment = custom\nseed = 1\n[method.x]\nkind = newton\n").unwrap_err();
    assert_eq!(config_key(e), "method.x.kind");
    assert!(ExperimentConfig::parse("experiment = custom\nseed = 1\nseed = 2\n").is_err());
    assert!(ExperimentConfig::parse("experiment = nope\nseed = 1\n").is_err());
    let cfg = ExperimentConfig::parse("experiment = hard_unbounded\nseed = 1\n").unwrap();
    assert_eq!(cfg.experiment, ExperimentKind::HardUnboundedDnc);
}

#[test]
fn tamper_syntax() {
    assert_eq!("halve_c_cons".parse::<Tamper>().unwrap(), Tamper::HalveCCons);
    assert_eq!("fixed_momentum".parse::<Tamper>().unwrap(), Tamper::FixedMomentum(0.5));
    assert_eq!("fixed_momentum:0.3".parse::<Tamper>().unwrap(), Tamper::FixedMomentum(0.3));
    assert!("other".parse::<Tamper>().is_err());
}

#[test]
fn schema_validator_dispatches_on_header() {
    assert_eq!(validate_artifact("x.csv", "method,eps,k,comms_per_node,total_comms\ndng,1e-1,3,3,30\n").unwrap(), 1);
    assert!(validate_artifact("x.csv", "method,eps,k\ndng,1e-1,3\n").is_err());
    assert!(validate_artifact("x.csv", "check,passed,value,threshold\nfoo,maybe,1,2\n").is_err());
    assert!(validate_artifact("summary.txt", "").is_err());
    assert!(validate_artifact("summary.txt", "no newline").is_err());
    assert!(validate_artifact("summary.txt", "ok\n").is_ok());
}

#[test]
fn custom_runs_are_deterministic_and_valid() {
    let text = "experiment = custom\nseed = 5\nobjective = logistic\nn = 8\nk_max = 200\n\
                [method.dng]\nc = 1\neta = 0.1\n[method.dnc]\nalpha = 1/(2L)\n[method.dsg]\nc = 1\ntau = 0.5\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    let (a, b) = (run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
    let names: Vec<&str> = a.artifacts.iter().map(|x| x.name.as_str()).collect();
    assert!(names.contains(&"dng.csv") && names.contains(&"dnc_bounds.csv") && names.contains(&"first_hits.csv"));
    for (x, y) in a.artifacts.iter().zip(&b.artifacts) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.contents, y.contents, "{} differs between runs", x.name);
        validate_artifact(&x.name, &x.contents).unwrap();
    }
    assert_eq!(a.summary, b.summary);
}

#[test]
fn single_node_custom_matches_centralized() {
    let text = "experiment = custom\nseed = 4\nobjective = fair\nn = 1\nk_max = 300\nx0 = 2.5\n[method.dng]\nc = 0.8\n";
    assert!(failed_checks(&ExperimentConfig::parse(text).unwrap()).is_empty());
}

#[test]
fn adversarial_demos_pass() {
    for kind in [ExperimentKind::HardNedic, ExperimentKind::HardUnboundedDnc, ExperimentKind::HardUnboundedDng] {
        let failed = failed_checks(&ExperimentConfig::new(kind, 1));
        assert!(failed.is_empty(), "{}: {failed:?}", kind.name());
    }
}

#[test]
fn divergence_demo_for_non_psd_weights() {
    assert!(failed_checks(&ExperimentConfig::new(ExperimentKind::Diverge1b, 1)).is_empty());
}

#[test]
fn verification_suite_passes_and_catches_tampering() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Verify, 1);
    let out = run_experiment(&cfg).unwrap();
    assert!(out.gating);
    assert_eq!(out.failed(), 0, "{}", out.summary);
    for tamper in [Tamper::HalveCCons, Tamper::FixedMomentum(0.5)] {
        cfg.tamper = Some(tamper);
        assert!(run_experiment(&cfg).unwrap().failed() >= 1, "{tamper:?} went unnoticed");
    }
}

#[test]
fn mismatched_experiment_inputs_are_config_errors() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Custom, 1);
    assert_eq!(config_key(run_experiment(&cfg).unwrap_err()), "method");
    cfg = ExperimentConfig::parse("experiment = custom\nseed = 1\nobjective = logistic\nn = 4\nx0 = 1,2\n[method.dng]\nc = 1\n")
        .unwrap();
    assert!(run_experiment(&cfg).is_err());
}
