//! Whole-case verification: pointwise invariants over an integration grid,
//! the integral inequality and its defect, Yano's divergence identity, and
//! the equality-case classification.

use crate::error::{Error, Result};
use crate::geometry::{pointwise_geometry, BumpField, GeometryOptions, PointGeometry};
use crate::immersions::{Domain, ImmersionSpec, SphereAtlas};
use crate::quadrature::{blend_weight, build_grid, estimate_resolutions, geometric_error_estimate, IntegrationGrid};
use crate::spaceforms::{self_test, AmbientModel, SelfTestReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const REPORT_VERSION: u32 = 1;
/// Gradient test fields per case for the divergence identity.
pub const TEST_FIELDS: usize = 3;
/// Smallest error claimed for a volume-normalized integral (summation
/// roundoff of integrands of size O(10²)).
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub pointwise: f64,
    pub slack: f64,
    pub integral: f64,
    pub classification: f64,
    pub strict: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pointwise: 1e-8,
            slack: 1e-9,
            integral: 1e-8,
            classification: 1e-6,
            strict: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.pointwise, self.slack, self.integral, self.classification, self.strict];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.strict > self.classification && self.classification > self.slack) {
            return Err(Error::InvalidParameter(
                "need strict > classification > slack".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    ParallelBranch,
    WhitneyBranch,
    Strict,
    Unresolved,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::ParallelBranch => "PARALLEL_BRANCH",
            Classification::WhitneyBranch => "WHITNEY_BRANCH",
            Classification::Strict => "STRICT",
            Classification::Unresolved => "UNRESOLVED",
        }
    }
}

/// Everything `run_case` needs besides the immersion itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub spec: ImmersionSpec,
    pub resolution: usize,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub self_test_samples: usize,
    /// Also report the Weyl / sectional-curvature block.
    pub conformal: bool,
}

impl CaseConfig {
    pub fn new(spec: ImmersionSpec) -> CaseConfig {
        let resolution = crate::quadrature::default_resolution(spec.n);
        CaseConfig {
            spec,
            resolution,
            tolerances: Tolerances::default(),
            seed: 1,
            self_test_samples: 20,
            conformal: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    /// `sup |r|` over nodes.
    pub sup: f64,
    /// `(∫ r² dV / Vol)^{1/2}`.
    pub l2: f64,
    pub min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelfTest {
    pub passed: bool,
    pub report: SelfTestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalBlock {
    pub resolution: usize,
    pub nodes: usize,
    /// `None` for `n < 4`.
    pub weyl_sup: Option<f64>,
    pub sectional_min: f64,
    pub sectional_max: f64,
    pub sectional_spread: f64,
    /// Worst structural residuals over the block's nodes.
    pub structure: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub report_version: u32,
    pub case: String,
    pub n: usize,
    pub model: String,
    pub parameters: ImmersionSpec,
    pub seed: u64,
    pub resolution: usize,
    pub tolerances: Tolerances,
    pub model_self_test: Option<ModelSelfTest>,
    pub nodes: usize,
    pub volume: f64,
    pub residuals: BTreeMap<String, ResidualStats>,
    pub lemma_gap_minima: BTreeMap<String, f64>,
    /// `∫ Ric(JH, JH) dV` (or `φH`).
    pub integral_lhs: f64,
    /// `(n−1)(n+2)/(3n²) ∫ ‖∇̄h‖² dV` (or `‖∇̄^ξ h‖²`).
    pub integral_rhs: f64,
    pub defect: f64,
    pub normalized_defect: f64,
    /// Extrapolated error of the normalized defect from two companion grids.
    pub defect_error_estimate: f64,
    pub integrals_resolved: bool,
    /// `∫ Yano integrand dV / Vol` for `X = JH` (or `φH`).
    pub yano_integral: f64,
    /// Same for the seeded gradient fields.
    pub yano_test_integrals: Vec<f64>,
    pub sup_grad_h: f64,
    pub classification: Classification,
    pub invariants: BTreeMap<String, InvariantCheck>,
    pub conformal: Option<ConformalBlock>,
    pub failure: Option<String>,
}

impl VerificationReport {
    /// All hard invariants passed and no evaluation failed.
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.invariants.values().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The model self-test with the repository's acceptance tolerances
/// (connection identities of `ξ` and `φ` get the looser bound).
pub fn self_test_passes(report: &SelfTestReport) -> bool {
    report.curvature_rel_error <= 1e-8
        && report.bianchi <= 1e-8
        && report
            .structure
            .iter()
            .all(|(k, v)| *v <= if k.starts_with("nabla") { 1e-8 } else { 1e-10 })
}

/// Per-node data kept after evaluation.
#[derive(Debug, Clone)]
struct Sample {
    density: f64,
    residuals: BTreeMap<&'static str, f64>,
    checks: [f64; 8],
    ric_x: f64,
    rhs: f64,
    yano: f64,
    yano_test: Vec<f64>,
    grad_h: f64,
    weyl: Option<f64>,
    kmin: f64,
    kmax: f64,
}

const CHECK_NAMES: [&str; 8] = [
    "isotropy",
    "cubic_symmetry",
    "codazzi_symmetry",
    "reeb_component",
    "reeb_linkage",
    "mean_symmetry",
    "gauss_cross_check",
    "norm_linkage",
];

fn check_limit(name: &str, spec: &ImmersionSpec, tol: &Tolerances) -> f64 {
    match name {
        "isotropy" => spec.isotropy_tolerance(),
        "cubic_symmetry" | "mean_symmetry" => 1e-9,
        _ => tol.pointwise,
    }
}

fn sample(g: &PointGeometry) -> Sample {
    let nf = g.n as f64;
    let c = &g.checks;
    Sample {
        density: g.volume_density,
        residuals: g.residuals(),
        checks: [
            c.isotropy,
            c.cubic_symmetry,
            c.codazzi_symmetry,
            c.reeb_component,
            c.reeb_linkage,
            c.mean_symmetry,
            c.gauss_cross_check,
            c.norm_linkage,
        ],
        ric_x: g.ric_x,
        rhs: (nf - 1.0) * (nf + 2.0) / (3.0 * nf * nf) * g.derivative_norm2(),
        yano: g.yano_integrand,
        yano_test: g.yano_test.clone(),
        grad_h: g.derivative_norm2().sqrt(),
        weyl: g.curvature.weyl_sup,
        kmin: g.curvature.sectional_min,
        kmax: g.curvature.sectional_max,
    }
}

fn node_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Seeded gradient test fields for a case.
pub fn test_fields(spec: &ImmersionSpec, seed: u64) -> Vec<BumpField> {
    let dim = match spec.domain() {
        Domain::Sphere => spec.n + 1,
        Domain::Torus => 2 * spec.n,
    };
    (0..TEST_FIELDS)
        .map(|k| BumpField::random(dim, 4, node_seed(seed, 1_000_003 + k)))
        .collect()
}

/// Evaluate every node. On the sphere each node is evaluated in the chart
/// whose singular set is farthest away (pointwise scalars are chart
/// independent); its volume density is carried back to the node's chart
/// through the chart-independent ratio `√det g / ρ_round`.
fn evaluate(
    model: &AmbientModel,
    spec: &ImmersionSpec,
    grid: &IntegrationGrid,
    seed: u64,
    fields: &[BumpField],
) -> Result<Vec<Sample>> {
    let atlas = match grid.domain {
        Domain::Sphere => Some(SphereAtlas::new(spec.n)?),
        Domain::Torus => None,
    };
    grid.map_nodes(|i, node| {
        let opts = GeometryOptions {
            frame_mix: None,
            plane_seed: node_seed(seed, i),
            test_fields: fields.to_vec(),
        };
        match &atlas {
            None => pointwise_geometry(model, spec, node.chart, &node.t, &opts).map(|g| sample(&g)),
            Some(atlas) => {
                let u = atlas.map_values(node.chart, &node.t);
                let best = (0..atlas.num_charts())
                    .map(|c| (c, blend_weight(atlas, c, &u)))
                    .fold((node.chart, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
                    .0;
                let t = if best == node.chart { node.t.clone() } else { atlas.preimage(best, &u) };
                let g = pointwise_geometry(model, spec, best, &t, &opts)?;
                let mut s = sample(&g);
                s.density = g.volume_density / atlas.density(&t) * node.chart_density;
                Ok(s)
            }
        }
    })
}

struct Integrals {
    volume: f64,
    lhs: f64,
    rhs: f64,
    yano: f64,
    yano_test: Vec<f64>,
}

fn integrals(grid: &IntegrationGrid, samples: &[Sample]) -> Integrals {
    let dens: Vec<f64> = samples.iter().map(|s| s.density).collect();
    let int = |f: &dyn Fn(&Sample) -> f64| {
        let v: Vec<f64> = samples.iter().map(f).collect();
        grid.weighted_sum(&dens, &v)
    };
    let k = samples.first().map_or(0, |s| s.yano_test.len());
    Integrals {
        volume: int(&|_| 1.0),
        lhs: int(&|s| s.ric_x),
        rhs: int(&|s| s.rhs),
        yano: int(&|s| s.yano),
        yano_test: (0..k).map(|j| int(&|s| s.yano_test[j])).collect(),
    }
}

/// Equality-case classification from the normalized defect and its error
/// estimate. A defect whose distance above the strictness threshold exceeds
/// the error estimate is STRICT even when not resolved to integral
/// tolerance; every other decision needs resolved integrals.
pub fn classify_equality(
    normalized_defect: f64,
    error_estimate: f64,
    sup_grad_h: f64,
    sup_whitney: f64,
    tol: &Tolerances,
) -> Classification {
    if !normalized_defect.is_finite() || !error_estimate.is_finite() {
        return Classification::Unresolved;
    }
    if normalized_defect - error_estimate >= tol.strict {
        return Classification::Strict;
    }
    if error_estimate > tol.integral {
        return Classification::Unresolved;
    }
    if normalized_defect <= tol.classification {
        if sup_grad_h <= tol.pointwise {
            Classification::ParallelBranch
        } else if sup_whitney <= tol.pointwise {
            Classification::WhitneyBranch
        } else {
            Classification::Unresolved
        }
    } else if normalized_defect >= tol.strict {
        Classification::Strict
    } else {
        Classification::Unresolved
    }
}

fn empty_report(cfg: &CaseConfig, model: &AmbientModel) -> VerificationReport {
    VerificationReport {
        report_version: REPORT_VERSION,
        case: cfg.spec.id().to_string(),
        n: cfg.spec.n,
        model: model.kind().id().to_string(),
        parameters: cfg.spec.clone(),
        seed: cfg.seed,
        resolution: cfg.resolution,
        tolerances: cfg.tolerances,
        model_self_test: None,
        nodes: 0,
        volume: f64::NAN,
        residuals: BTreeMap::new(),
        lemma_gap_minima: BTreeMap::new(),
        integral_lhs: f64::NAN,
        integral_rhs: f64::NAN,
        defect: f64::NAN,
        normalized_defect: f64::NAN,
        defect_error_estimate: f64::NAN,
        integrals_resolved: false,
        yano_integral: f64::NAN,
        yano_test_integrals: Vec::new(),
        sup_grad_h: f64::NAN,
        classification: Classification::Unresolved,
        invariants: BTreeMap::new(),
        conformal: None,
        failure: None,
    }
}

fn conformal_summary(spec: &ImmersionSpec, resolution: usize, samples: &[Sample]) -> ConformalBlock {
    let weyl_sup = if spec.n >= 4 {
        Some(samples.iter().filter_map(|s| s.weyl).fold(0.0, f64::max))
    } else {
        None
    };
    let kmin = samples.iter().map(|s| s.kmin).fold(f64::INFINITY, f64::min);
    let kmax = samples.iter().map(|s| s.kmax).fold(f64::NEG_INFINITY, f64::max);
    let mut structure = BTreeMap::new();
    for (j, name) in CHECK_NAMES.iter().enumerate() {
        structure.insert(name.to_string(), samples.iter().map(|s| s.checks[j]).fold(0.0, f64::max));
    }
    ConformalBlock {
        resolution,
        nodes: samples.len(),
        weyl_sup,
        sectional_min: kmin,
        sectional_max: kmax,
        sectional_spread: kmax - kmin,
        structure,
    }
}

/// Weyl sup norm and sectional-curvature spread over a grid of the given
/// resolution, without integrals.
pub fn conformal_block(spec: &ImmersionSpec, resolution: usize, seed: u64) -> Result<ConformalBlock> {
    let model = spec.model()?;
    let grid = build_grid(spec.n, resolution, spec.domain())?;
    let samples = evaluate(&model, spec, &grid, seed, &[])?;
    Ok(conformal_summary(spec, resolution, &samples))
}

/// Run the whole pipeline for one case. Configuration problems are
/// returned as errors; evaluation failures are recorded in the report.
pub fn run_case(cfg: &CaseConfig) -> Result<VerificationReport> {
    cfg.tolerances.validate()?;
    cfg.spec.validate()?;
    let model = cfg.spec.model()?;
    let grid = build_grid(cfg.spec.n, cfg.resolution, cfg.spec.domain())?;
    let (mid_res, coarse_res) = estimate_resolutions(cfg.resolution);
    let mid = build_grid(cfg.spec.n, mid_res, cfg.spec.domain())?;
    let coarse = build_grid(cfg.spec.n, coarse_res, cfg.spec.domain())?;
    let tol = cfg.tolerances;
    let mut report = empty_report(cfg, &model);

    if cfg.self_test_samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        match self_test(&model, cfg.self_test_samples, &mut rng) {
            Ok(st) => {
                let passed = self_test_passes(&st);
                report.invariants.insert(
                    "model_self_test".into(),
                    InvariantCheck {
                        value: st.curvature_rel_error.max(st.worst_structure()),
                        tolerance: 1e-8,
                        passed,
                    },
                );
                report.model_self_test = Some(ModelSelfTest { passed, report: st });
            }
            Err(e) => {
                report.failure = Some(format!("model self-test: {e}"));
                return Ok(report);
            }
        }
    }

    let fields = test_fields(&cfg.spec, cfg.seed);
    let samples = (|| {
        let full = evaluate(&model, &cfg.spec, &grid, cfg.seed, &fields)?;
        let m = evaluate(&model, &cfg.spec, &mid, cfg.seed, &fields)?;
        let c = evaluate(&model, &cfg.spec, &coarse, cfg.seed, &fields)?;
        Ok::<_, Error>((full, integrals(&mid, &m), integrals(&coarse, &c)))
    })();
    let (full, mi, ci) = match samples {
        Ok(s) => s,
        Err(e) => {
            report.failure = Some(e.to_string());
            return Ok(report);
        }
    };
    report.nodes = full.len();

    // Pointwise residuals.
    let dens: Vec<f64> = full.iter().map(|s| s.density).collect();
    let fi = integrals(&grid, &full);
    let vol = fi.volume;
    report.volume = vol;
    let names: Vec<&'static str> = full[0].residuals.keys().copied().collect();
    for name in names {
        let vals: Vec<f64> = full.iter().map(|s| s.residuals[name]).collect();
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        report.residuals.insert(
            name.to_string(),
            ResidualStats {
                sup: vals.iter().fold(0.0, |m, v| m.max(v.abs())),
                l2: (grid.weighted_sum(&dens, &sq) / vol).max(0.0).sqrt(),
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            },
        );
    }
    for gap in ["conformal_gap", "derivative_gap"] {
        report.lemma_gap_minima.insert(gap.to_string(), report.residuals[gap].min);
    }

    // Integrals and the defect.
    report.integral_lhs = fi.lhs;
    report.integral_rhs = fi.rhs;
    report.defect = fi.rhs - fi.lhs;
    report.normalized_defect = report.defect / vol;
    let defect_of = |i: &Integrals| (i.rhs - i.lhs) / i.volume;
    let estimate = |f: f64, m: f64, c: f64| {
        let e = geometric_error_estimate(f, m, c);
        if e.is_nan() {
            e
        } else {
            e.max(ROUNDOFF_FLOOR)
        }
    };
    report.defect_error_estimate = estimate(report.normalized_defect, defect_of(&mi), defect_of(&ci));
    report.yano_integral = fi.yano / vol;
    report.yano_test_integrals = fi.yano_test.iter().map(|v| v / vol).collect();
    let mut yano_err: f64 = estimate(fi.yano / vol, mi.yano / mi.volume, ci.yano / ci.volume);
    for k in 0..fi.yano_test.len() {
        yano_err = yano_err.max(estimate(
            fi.yano_test[k] / vol,
            mi.yano_test[k] / mi.volume,
            ci.yano_test[k] / ci.volume,
        ));
    }
    report.integrals_resolved = report.defect_error_estimate <= tol.integral && yano_err <= tol.integral;
    report.sup_grad_h = full.iter().map(|s| s.grad_h).fold(0.0, f64::max);

    // Hard invariants.
    let mut put = |name: &str, value: f64, tolerance: f64, passed: bool| {
        report
            .invariants
            .insert(name.to_string(), InvariantCheck { value, tolerance, passed });
    };
    let sasakian = model.is_sasakian();
    for (j, name) in CHECK_NAMES.iter().enumerate() {
        if !sasakian && matches!(*name, "reeb_component" | "reeb_linkage" | "norm_linkage") {
            continue;
        }
        let sup = full.iter().map(|s| s.checks[j]).fold(0.0, f64::max);
        let lim = check_limit(name, &cfg.spec, &tol);
        put(name, sup, lim, sup <= lim);
    }
    for id in ["maslov_identity", "lie_identity"] {
        let sup = report.residuals[id].sup;
        put(id, sup, tol.pointwise, sup <= tol.pointwise);
    }
    for gap in ["conformal_gap", "derivative_gap"] {
        let m = report.lemma_gap_minima[gap];
        put(&format!("{gap}_min"), m, -tol.slack, m >= -tol.slack);
    }
    let nd = report.normalized_defect;
    put("defect_nonnegative", nd, -tol.integral, nd >= -tol.integral);
    let y = report.yano_integral;
    put("yano_integral", y.abs(), tol.integral, y.abs() <= tol.integral);
    for (k, v) in report.yano_test_integrals.clone().iter().enumerate() {
        put(&format!("yano_gradient_{k}"), v.abs(), tol.integral, v.abs() <= tol.integral);
    }

    report.classification = classify_equality(
        report.normalized_defect,
        report.defect_error_estimate,
        report.sup_grad_h,
        report.residuals["whitney_residual"].sup,
        &tol,
    );
    if cfg.conformal {
        report.conformal = Some(conformal_summary(&cfg.spec, cfg.resolution, &full));
    }
    Ok(report)
}

/// Run independent cases in parallel, preserving input order.
pub fn run_cases(cfgs: &[CaseConfig]) -> Vec<Result<VerificationReport>> {
    cfgs.par_iter().map(run_case).collect()
}

/// Compact `key=value` rendering of a case's parameters.
pub fn parameter_label(spec: &ImmersionSpec) -> String {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    if k == "kind" || k == "n" || k == "hamiltonian" {
                        continue;
                    }
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            serde_json::Value::Array(a) if a.is_empty() => {}
            other => out.push(format!("{prefix}={other}")),
        }
    }
    let v = serde_json::to_value(spec).expect("spec serializes");
    let mut out = Vec::new();
    walk("", &v, &mut out);
    out.join(";")
}

const CSV_HEADER: &str = "case,n,model,parameters,resolution,nodes,volume,integral_lhs,integral_rhs,defect,normalized_defect,defect_error_estimate,yano_integral,sup_grad_h,whitney_residual_sup,scalar_relation_residual_sup,equality_condition_residual_sup,conformal_gap_min,derivative_gap_min,classification,passed";

/// One CSV row per report.
pub fn to_csv(reports: &[VerificationReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    let sup = |r: &VerificationReport, k: &str| r.residuals.get(k).map_or(f64::NAN, |x| x.sup);
    let gap = |r: &VerificationReport, k: &str| r.lemma_gap_minima.get(k).copied().unwrap_or(f64::NAN);
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},\"{}\",{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.case,
            r.n,
            r.model,
            parameter_label(&r.parameters),
            r.resolution,
            r.nodes,
            r.volume,
            r.integral_lhs,
            r.integral_rhs,
            r.defect,
            r.normalized_defect,
            r.defect_error_estimate,
            r.yano_integral,
            r.sup_grad_h,
            sup(r, "whitney_residual"),
            sup(r, "scalar_relation_residual"),
            sup(r, "equality_condition_residual"),
            gap(r, "conformal_gap"),
            gap(r, "derivative_gap"),
            r.classification.label(),
            r.passed()
        );
    }
    s
}

/// Human-readable summary table.
pub fn to_markdown(reports: &[VerificationReport]) -> String {
    let mut s = String::from(
        "| case | n | parameters | normalized defect | Yano | Whitney sup | classification | invariants |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for r in reports {
        let w = r.residuals.get("whitney_residual").map_or(f64::NAN, |x| x.sup);
        let failed: Vec<&str> = r
            .invariants
            .iter()
            .filter(|(_, c)| !c.passed)
            .map(|(k, _)| k.as_str())
            .collect();
        let status = match (&r.failure, failed.is_empty()) {
            (Some(f), _) => format!("failure: {f}"),
            (None, true) => "all passed".to_string(),
            (None, false) => format!("failed: {}", failed.join(", ")),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.3e} | {:.3e} | {:.3e} | {} | {} |",
            r.case,
            r.n,
            parameter_label(&r.parameters),
            r.normalized_defect,
            r.yano_integral,
            w,
            r.classification.label(),
            status
        );
        if let Some(c) = &r.conformal {
            let weyl = c.weyl_sup.map_or("n/a".to_string(), |w| format!("{w:.3e}"));
            let _ = writeln!(
                s,
                "| ↳ conformal | | Weyl sup {} | sectional [{:.4}, {:.4}] | spread {:.3e} | | | |",
                weyl, c.sectional_min, c.sectional_max, c.sectional_spread
            );
        }
    }
    s
}
