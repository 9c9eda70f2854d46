//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with `harness = false`; the process exits non-zero if any criterion
//! fails. Expect several minutes of single-core time in release mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use whitney_core::immersions::{ImmersionKind, ImmersionSpec};
use whitney_core::spaceforms::{self_test, AmbientModel, ModelKind};
use whitney_core::verify::{conformal_block, run_case, CaseConfig, Classification, VerificationReport};

/// Grid resolution of the n = 2 equality sweeps.
const SWEEP_RES: usize = 64;
const SEED: u64 = 1;

struct Criterion {
    index: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

/// Worst value of a set together with the case that attained it.
#[derive(Default)]
struct Worst {
    value: f64,
    at: String,
    failures: Vec<String>,
}

impl Worst {
    fn new() -> Worst {
        Worst { value: 0.0, ..Worst::default() }
    }

    fn record(&mut self, case: &str, value: f64, ok: bool) {
        if !(value <= self.value) {
            self.value = value;
            self.at = case.to_string();
        }
        if !ok {
            self.failures.push(format!("{case}: {value:e}"));
        }
    }

    fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn describe(&self, what: &str) -> String {
        let mut s = format!("worst {what} {:.2e} ({})", self.value, self.at);
        if !self.failures.is_empty() {
            s += &format!("; failing: {}", self.failures.join(", "));
        }
        s
    }
}

fn spec(n: usize, kind: ImmersionKind) -> ImmersionSpec {
    ImmersionSpec::new(n, kind).expect("valid catalog case")
}

fn family(name: &str, n: usize, v: f64) -> ImmersionSpec {
    match name {
        "whitney_c0" => spec(n, ImmersionKind::WhitneyC0 { r: v, b: vec![] }),
        "whitney_cp" => spec(n, ImmersionKind::WhitneyCp { theta: v }),
        "whitney_ch" => spec(n, ImmersionKind::WhitneyCh { theta: v }),
        "contact_whitney_r" => spec(n, ImmersionKind::ContactWhitneyR { r: v, a: 0.0, b: vec![] }),
        "contact_whitney_s" => spec(n, ImmersionKind::ContactWhitneyS { theta: v, a: 1.0 }),
        "contact_whitney_b" => spec(n, ImmersionKind::ContactWhitneyB { theta: v, a: 1.0 }),
        _ => unreachable!(),
    }
}

/// Equality families: sweep values at n = 2, and the n = 3 case with its resolution.
const FAMILIES: [(&str, [f64; 5], f64, usize); 6] = [
    ("whitney_c0", [0.5, 0.75, 1.0, 1.5, 2.0], 1.0, 40),
    ("whitney_cp", [0.2, 0.5, 1.0, 1.5, 2.0], 0.7, 32),
    ("whitney_ch", [0.8, 1.0, 1.25, 1.5, 2.0], 1.5, 48),
    ("contact_whitney_r", [0.5, 0.75, 1.0, 1.5, 2.0], 1.0, 40),
    ("contact_whitney_s", [0.2, 0.5, 1.0, 1.5, 2.0], 0.5, 32),
    ("contact_whitney_b", [0.8, 1.0, 1.25, 1.5, 2.0], 1.5, 40),
];

fn run(spec: ImmersionSpec, resolution: usize) -> VerificationReport {
    let mut cfg = CaseConfig::new(spec);
    cfg.resolution = resolution;
    cfg.seed = SEED;
    let start = Instant::now();
    let r = run_case(&cfg).expect("case configuration is valid");
    println!(
        "  case {:<20} n={} [{}] res={:<3} nd={:+.3e} ±{:.1e} yano={:+.1e} {:<15} {:.1?}",
        r.case,
        r.n,
        whitney_core::verify::parameter_label(&r.parameters),
        r.resolution,
        r.normalized_defect,
        r.defect_error_estimate,
        r.yano_integral,
        r.classification.label(),
        start.elapsed()
    );
    r
}

fn label(r: &VerificationReport) -> String {
    format!("{} n={} [{}]", r.case, r.n, whitney_core::verify::parameter_label(&r.parameters))
}

fn models_criteria() -> (Criterion, Criterion) {
    let mut curvature = Worst::new();
    let mut structure = Worst::new();
    let mut nabla = Worst::new();
    for n in [2, 3] {
        for kind in ModelKind::ALL {
            let deformations: &[Option<f64>] = if kind.is_sasakian() { &[None, Some(0.7)] } else { &[None] };
            for &a in deformations {
                let model = AmbientModel::make(kind, n, a).expect("model");
                let mut rng = ChaCha8Rng::seed_from_u64(SEED);
                let st = self_test(&model, 50, &mut rng).expect("self-test runs");
                let name = format!("{} n={n} a={}", kind.id(), model.deformation());
                curvature.record(&name, st.curvature_rel_error, st.curvature_rel_error <= 1e-8);
                if kind.is_sasakian() {
                    for (k, v) in &st.structure {
                        let (w, lim) = if k.starts_with("nabla") { (&mut nabla, 1e-8) } else { (&mut structure, 1e-10) };
                        w.record(&format!("{name} {k}"), *v, *v <= lim);
                    }
                }
            }
        }
    }
    (
        Criterion {
            index: 1,
            title: "ambient curvature matches the closed forms (6 models, n = 2, 3, 50 points, rel ≤ 1e-8)",
            passed: curvature.ok(),
            detail: curvature.describe("relative error"),
        },
        Criterion {
            index: 2,
            title: "Sasakian structure identities (3 models, 50 points, ≤ 1e-10; ∇ξ = −φ ≤ 1e-8)",
            passed: structure.ok() && nabla.ok(),
            detail: format!("{}; {}", structure.describe("algebraic"), nabla.describe("connection")),
        },
    )
}

fn pointwise_criteria(reports: &[VerificationReport]) -> Vec<Criterion> {
    let mut iso = Worst::new();
    let mut structure = Worst::new();
    let mut identities = Worst::new();
    let mut gaps = Worst::new();
    let mut yano = Worst::new();
    let mut failures = Vec::new();
    for r in reports {
        let name = label(r);
        if let Some(f) = &r.failure {
            failures.push(format!("{name}: {f}"));
            continue;
        }
        let flowed = r.parameters.is_generated();
        let iso_tol = if flowed { 1e-7 } else { 1e-9 };
        let v = r.invariants["isotropy"].value;
        iso.record(&name, v / iso_tol, v <= iso_tol);
        for (k, lim) in [
            ("cubic_symmetry", 1e-9),
            ("codazzi_symmetry", 1e-8),
            ("reeb_component", 1e-8),
            ("reeb_linkage", 1e-8),
            ("mean_symmetry", 1e-9),
            ("gauss_cross_check", 1e-8),
        ] {
            if let Some(c) = r.invariants.get(k) {
                structure.record(&format!("{name} {k}"), c.value / lim, c.value <= lim);
            }
        }
        for k in ["maslov_identity", "lie_identity"] {
            let v = r.residuals[k].sup;
            identities.record(&format!("{name} {k}"), v, v <= 1e-10);
        }
        for k in ["conformal_gap", "derivative_gap"] {
            let m = r.lemma_gap_minima[k];
            gaps.record(&format!("{name} {k}"), -m, m >= -1e-9);
        }
        let worst_yano = std::iter::once(r.yano_integral)
            .chain(r.yano_test_integrals.iter().copied())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        yano.record(&name, worst_yano, worst_yano <= 1e-8 && r.yano_test_integrals.len() == 3);
    }
    let fail_note = if failures.is_empty() { String::new() } else { format!("; node failures: {}", failures.join(", ")) };
    vec![
        Criterion {
            index: 3,
            title: "isotropy at all nodes (1e-9; 1e-7 flowed/lifted)",
            passed: iso.ok() && failures.is_empty(),
            detail: iso.describe("residual/tolerance") + &fail_note,
        },
        Criterion {
            index: 4,
            title: "structure equations at all nodes (cubic, Codazzi, Reeb, mean, Gauss)",
            passed: structure.ok() && failures.is_empty(),
            detail: structure.describe("residual/tolerance"),
        },
        Criterion {
            index: 5,
            title: "identity residuals ≤ 1e-10 and gap inequalities ≥ −1e-9 pointwise",
            passed: identities.ok() && gaps.ok() && failures.is_empty(),
            detail: format!("{}; {}", identities.describe("identity residual"), gaps.describe("negative gap")),
        },
        Criterion {
            index: 6,
            title: "divergence identity integrates to 0 (JH / φH and 3 gradient fields, ≤ 1e-8)",
            passed: yano.ok() && failures.is_empty(),
            detail: yano.describe("|normalized integral|"),
        },
    ]
}

fn equality_criterion(reports: &[&VerificationReport]) -> Criterion {
    let mut defect = Worst::new();
    let mut whitney = Worst::new();
    let mut scalar = Worst::new();
    let mut equality = Worst::new();
    let mut labels = Vec::new();
    for r in reports {
        let name = label(r);
        defect.record(&name, r.normalized_defect.abs(), r.normalized_defect.abs() <= 1e-6);
        let w = r.residuals["whitney_residual"].sup;
        whitney.record(&name, w, w <= 1e-8);
        let s = r.residuals["scalar_relation_residual"].sup;
        scalar.record(&name, s, s <= 1e-8);
        let e = r.residuals["equality_condition_residual"].sup.max(r.residuals["derivative_gap"].sup);
        equality.record(&name, e, e <= 1e-8);
        if r.classification != Classification::WhitneyBranch {
            labels.push(format!("{name}: {}", r.classification.label()));
        }
    }
    let all = [&defect, &whitney, &scalar, &equality];
    Criterion {
        index: 7,
        title: "equality certification on the six Whitney families (n = 2 sweeps + n = 3)",
        passed: all.iter().all(|w| w.ok()) && labels.is_empty(),
        detail: format!(
            "{} cases; {}; {}; {}; {}{}",
            reports.len(),
            defect.describe("|defect|"),
            whitney.describe("Whitney residual"),
            scalar.describe("scalar relation"),
            equality.describe("equality relation"),
            if labels.is_empty() { String::new() } else { format!("; not WHITNEY_BRANCH: {}", labels.join(", ")) }
        ),
    }
}

fn parallel_criterion(reports: &[&VerificationReport]) -> Criterion {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in reports {
        let good = r.classification == Classification::ParallelBranch
            && r.normalized_defect.abs() <= 1e-8
            && r.sup_grad_h <= 1e-9;
        ok &= good;
        parts.push(format!(
            "{}: {} defect {:.1e} sup‖∇h‖ {:.1e}",
            label(r),
            r.classification.label(),
            r.normalized_defect,
            r.sup_grad_h
        ));
    }
    Criterion {
        index: 8,
        title: "parallel branch: product torus and totally geodesic RPⁿ",
        passed: ok,
        detail: parts.join("; "),
    }
}

fn strictness_criterion(perturbed: &VerificationReport, unperturbed: &VerificationReport) -> Criterion {
    let strict = perturbed.normalized_defect > 1e-4 && perturbed.classification == Classification::Strict;
    let back = unperturbed.normalized_defect.abs() <= 1e-6;
    Criterion {
        index: 9,
        title: "Hamiltonian perturbation is strict (ε = 0.05), ε = 0 returns to equality",
        passed: strict && back,
        detail: format!(
            "ε = 0.05: defect {:.4e} ± {:.1e} {}; ε = 0: defect {:.1e} {}",
            perturbed.normalized_defect,
            perturbed.defect_error_estimate,
            perturbed.classification.label(),
            unperturbed.normalized_defect,
            unperturbed.classification.label()
        ),
    }
}

/// Resolution of the n = 4 curvature block (pointwise quantities only).
const CONFORMAL_RES: usize = 8;

fn conformal_criterion() -> Criterion {
    let start = Instant::now();
    let whitney = spec(4, ImmersionKind::ContactWhitneyR { r: 1.0, a: 0.0, b: vec![] });
    let w = conformal_block(&whitney, CONFORMAL_RES, SEED).expect("block evaluates");
    let control = conformal_block(&spec(4, ImmersionKind::TotallyGeodesicCp), CONFORMAL_RES, SEED).expect("block evaluates");
    println!("  conformal blocks at n = 4, res {CONFORMAL_RES}: {:.1?}", start.elapsed());
    let weyl = w.weyl_sup.unwrap_or(f64::NAN);
    let passed = weyl <= 1e-7 && w.sectional_spread >= 1e-3 && control.sectional_spread <= 1e-9;
    Criterion {
        index: 10,
        title: "contact Whitney sphere (n = 4) is conformally flat with non-constant curvature",
        passed,
        detail: format!(
            "{} nodes: Weyl sup {:.2e}, sectional spread {:.4} [{:.4}, {:.4}]; totally geodesic spread {:.1e}",
            w.nodes, weyl, w.sectional_spread, w.sectional_min, w.sectional_max, control.sectional_spread
        ),
    }
}

fn determinism_criterion() -> Criterion {
    let cases = [
        ImmersionSpec::perturbed_whitney(2, 1.0, SEED, 0.05, 32).unwrap(),
        spec(2, ImmersionKind::ContactWhitneyS { theta: 0.4, a: 1.0 }),
    ];
    let mut ok = true;
    let mut bytes = 0;
    for s in cases {
        let mut cfg = CaseConfig::new(s);
        cfg.resolution = 24;
        cfg.conformal = true;
        let a = run_case(&cfg).unwrap().to_json();
        let b = run_case(&cfg).unwrap().to_json();
        ok &= a == b;
        bytes += a.len();
    }
    Criterion {
        index: 11,
        title: "identical configs give byte-identical JSON reports",
        passed: ok,
        detail: format!("2 cases, {bytes} bytes compared"),
    }
}

fn main() {
    let start = Instant::now();
    let mut criteria = Vec::new();
    let (c1, c2) = models_criteria();
    criteria.push(c1);
    criteria.push(c2);

    let mut equality = Vec::new();
    for (name, values, v3, res3) in FAMILIES {
        for v in values {
            equality.push(run(family(name, 2, v), SWEEP_RES));
        }
        equality.push(run(family(name, 3, v3), res3));
    }
    let parallel = vec![
        run(spec(2, ImmersionKind::ProductTorus { radii: vec![1.0, 0.6] }), 32),
        run(spec(3, ImmersionKind::ProductTorus { radii: vec![1.0, 0.6, 1.7] }), 24),
        run(spec(2, ImmersionKind::TotallyGeodesicCp), 32),
        run(spec(3, ImmersionKind::TotallyGeodesicCp), 24),
    ];
    let perturbed = run(ImmersionSpec::perturbed_whitney(2, 1.0, SEED, 0.05, 32).unwrap(), 48);
    let unperturbed = run(ImmersionSpec::perturbed_whitney(2, 1.0, SEED, 0.0, 32).unwrap(), 48);
    let others = vec![
        run(spec(2, ImmersionKind::WhitneyC0 { r: 1.2, b: vec![0.3, -0.2, 0.5, 0.1] }), 48),
        run(spec(2, ImmersionKind::ContactWhitneyR { r: 1.0, a: 0.6, b: vec![0.2, -0.4, 0.1, 0.3, -0.5] }), 48),
        run(spec(2, ImmersionKind::ContactWhitneyS { theta: 0.6, a: 0.7 }), 48),
        run(spec(2, ImmersionKind::ContactWhitneyB { theta: 1.2, a: 1.4 }), 64),
        run(
            spec(
                2,
                ImmersionKind::Lifted {
                    base: Box::new(ImmersionSpec::perturbed_whitney(2, 1.0, SEED, 0.05, 32).unwrap()),
                    z0: 0.25,
                },
            ),
            48,
        ),
    ];

    let all: Vec<VerificationReport> = equality
        .iter()
        .chain(&parallel)
        .chain([&perturbed, &unperturbed])
        .chain(&others)
        .cloned()
        .collect();
    criteria.extend(pointwise_criteria(&all));
    criteria.push(equality_criterion(&equality.iter().collect::<Vec<_>>()));
    criteria.push(parallel_criterion(&parallel.iter().collect::<Vec<_>>()));
    criteria.push(strictness_criterion(&perturbed, &unperturbed));
    criteria.push(conformal_criterion());
    criteria.push(determinism_criterion());

    println!();
    for c in &criteria {
        println!(
            "{} criterion {:>2}: {} — {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.index,
            c.title,
            c.detail
        );
    }
    let failed = criteria.iter().filter(|c| !c.passed).count();
    println!("\n{} of {} criteria passed in {:.1?}", criteria.len() - failed, criteria.len(), start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
