use whitney_core::immersions::{Hamiltonian, ImmersionKind, ImmersionSpec};
use whitney_core::verify::{run_case, to_csv, to_markdown, CaseConfig, Classification, REPORT_VERSION};

fn config(spec: ImmersionSpec, resolution: usize) -> CaseConfig {
    let mut cfg = CaseConfig::new(spec);
    cfg.resolution = resolution;
    cfg
}

#[test]
fn whitney_sphere_is_on_the_whitney_branch() {
    let r = run_case(&config(ImmersionSpec::whitney_c0(2, 1.0).unwrap(), 48)).unwrap();
    assert!(r.passed(), "{:?}", r.invariants);
    assert_eq!(r.classification, Classification::WhitneyBranch);
    assert!(r.normalized_defect.abs() <= 1e-6);
    assert!(r.integrals_resolved);
    assert!(r.sup_grad_h > 1e-3);
    assert!(r.model_self_test.as_ref().unwrap().passed);
    assert_eq!(r.yano_test_integrals.len(), 3);
}

#[test]
fn product_torus_is_on_the_parallel_branch() {
    let s = ImmersionSpec::new(2, ImmersionKind::ProductTorus { radii: vec![1.0, 2.5] }).unwrap();
    let r = run_case(&config(s, 24)).unwrap();
    assert!(r.passed());
    assert_eq!(r.classification, Classification::ParallelBranch);
    assert!(r.sup_grad_h <= 1e-9);
    // Flat torus: Ric ≡ 0, so both sides vanish.
    assert!(r.integral_lhs.abs() < 1e-12 && r.integral_rhs.abs() < 1e-12);
    let area = (2.0 * std::f64::consts::PI).powi(2) * 2.5;
    assert!((r.volume - area).abs() < 1e-10 * area);
}

#[test]
fn whitney_volume_is_stable_across_resolutions() {
    let a = run_case(&config(ImmersionSpec::whitney_c0(2, 1.0).unwrap(), 40)).unwrap();
    let b = run_case(&config(ImmersionSpec::whitney_c0(2, 1.0).unwrap(), 56)).unwrap();
    assert!((a.volume - b.volume).abs() < 1e-9);
    assert_eq!(a.classification, b.classification);
}

#[test]
fn classification_is_stable_under_refinement() {
    let s = ImmersionSpec::new(2, ImmersionKind::ContactWhitneyS { theta: 0.4, a: 1.0 }).unwrap();
    let a = run_case(&config(s.clone(), 32)).unwrap();
    let b = run_case(&config(s, 64)).unwrap();
    assert_eq!(a.classification, Classification::WhitneyBranch);
    assert_eq!(b.classification, Classification::WhitneyBranch);
}

#[test]
fn defect_is_nonnegative_off_the_equality_cases() {
    // A non-Whitney flowed sphere with a different seed.
    let s = ImmersionSpec::perturbed_whitney(2, 1.0, 5, 0.02, 24).unwrap();
    let r = run_case(&config(s, 40)).unwrap();
    assert!(r.normalized_defect > 0.0);
    assert!(r.invariants["defect_nonnegative"].passed);
    assert_ne!(r.classification, Classification::WhitneyBranch);
}

#[test]
fn node_failures_are_reported_not_raised() {
    // A huge quartic flow leaves the numeric range.
    let s = ImmersionSpec::new(
        2,
        ImmersionKind::Perturbed {
            base: Box::new(ImmersionSpec::whitney_c0(2, 1.0).unwrap()),
            hamiltonian: Hamiltonian::random_quartic(4, 3),
            epsilon: 1e6,
            steps: 16,
        },
    )
    .unwrap();
    let r = run_case(&config(s, 16)).unwrap();
    let failure = r.failure.as_deref().expect("failure recorded");
    assert!(failure.contains("node"), "{failure}");
    assert_eq!(r.classification, Classification::Unresolved);
    assert!(!r.passed());
}

#[test]
fn report_schema() {
    let mut cfg = config(ImmersionSpec::new(2, ImmersionKind::WhitneyCp { theta: 0.5 }).unwrap(), 24);
    cfg.conformal = true;
    cfg.seed = 42;
    let r = run_case(&cfg).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["report_version"], REPORT_VERSION);
    assert_eq!(v["seed"], 42);
    for key in [
        "case", "n", "model", "parameters", "resolution", "tolerances", "model_self_test", "residuals",
        "lemma_gap_minima", "integral_lhs", "integral_rhs", "defect", "normalized_defect",
        "defect_error_estimate", "yano_integral", "yano_test_integrals", "classification", "invariants",
        "conformal",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["parameters"]["kind"], "whitney_cp");
    assert!(v["conformal"]["sectional_spread"].as_f64().unwrap() > 1e-3);
    assert!(v["conformal"]["weyl_sup"].is_null());
    let back: whitney_core::verify::VerificationReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, r);

    let csv = to_csv(std::slice::from_ref(&r));
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(
        csv.lines().next().unwrap().split(',').count(),
        csv.lines().nth(1).unwrap().split(',').count()
    );
    assert!(to_markdown(&[r]).contains("whitney_cp"));
}

#[test]
fn invalid_configs_are_errors() {
    let mut cfg = config(ImmersionSpec::whitney_c0(2, 1.0).unwrap(), 32);
    cfg.tolerances.strict = 1e-9;
    assert!(run_case(&cfg).is_err());
    let cfg = config(ImmersionSpec::whitney_c0(2, 1.0).unwrap(), 4);
    assert!(run_case(&cfg).is_err());
}
