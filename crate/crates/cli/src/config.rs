//! Run configuration: flags, flat TOML files, and their resolution into
//! core case configurations.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;
use whitney_core::immersions::{Hamiltonian, ImmersionKind, ImmersionSpec, CATALOG};
use whitney_core::verify::{CaseConfig, Tolerances};

/// Default RK4 steps for flowed cases.
pub const DEFAULT_STEPS: usize = 32;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] whitney_core::error::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

/// Flags shared by `verify` and `sweep`. Every field except `config` and
/// `emit_config` is also a key of the flat config file; flags override it.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog identifier (see `list`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Translation vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// Torus radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// RK4 steps of the Hamiltonian flow.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Fiber value at the anchor point for `lifted`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    /// Seed for sampled planes, test fields and the quartic `F`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_test_samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_pointwise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_slack: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_integral: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_classification: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_strict: Option<f64>,
    /// Add the Weyl / sectional-curvature block.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conformal: Option<bool>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// `param=start:stop:steps` (sweep only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    /// Flat TOML file with the same keys as the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Write the fully resolved configuration to this path.
    #[arg(long)]
    #[serde(skip)]
    pub emit_config: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

/// Parameters a case accepts, beyond the common ones.
fn case_parameters(case: &str) -> &'static [&'static str] {
    match case {
        "whitney_c0" => &["r", "b"],
        "whitney_cp" | "whitney_ch" => &["theta"],
        "contact_whitney_r" => &["r", "a", "b"],
        "contact_whitney_s" | "contact_whitney_b" => &["theta", "a"],
        "product_torus" => &["radii"],
        "totally_geodesic_cp" => &[],
        "perturbed" => &["r", "epsilon", "steps"],
        "lifted" => &["r", "epsilon", "steps", "z0"],
        _ => &[],
    }
}

/// Parameters that `--sweep` can vary.
pub const SWEEPABLE: &[&str] = &["r", "theta", "a", "epsilon", "z0"];

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Sweep, ConfigError> {
        let bad = || ConfigError::Invalid(format!("sweep `{s}`: expected param=start:stop:steps"));
        let (param, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let param = param.trim().to_string();
        if !SWEEPABLE.contains(&param.as_str()) {
            return Err(ConfigError::Invalid(format!(
                "cannot sweep `{param}` (sweepable: {})",
                SWEEPABLE.join(", ")
            )));
        }
        if steps == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        let values = if steps == 1 {
            vec![start]
        } else {
            (0..steps)
                .map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        Ok(Sweep { param, values })
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(&self, flags: &RunConfig) -> RunConfig {
        let mut out = self.clone();
        overlay!(
            out, flags, case, n, r, theta, a, b, radii, epsilon, steps, z0, seed, resolution,
            self_test_samples, tol_pointwise, tol_slack, tol_integral, tol_classification,
            tol_strict, conformal, format, out, sweep
        );
        out
    }

    /// Config file (if any) overlaid with the flags.
    pub fn from_flags(flags: &RunConfig) -> Result<RunConfig, ConfigError> {
        let base = match &flags.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overridden_by(flags))
    }

    fn set_param(&mut self, name: &str, v: f64) {
        match name {
            "r" => self.r = Some(v),
            "theta" => self.theta = Some(v),
            "a" => self.a = Some(v),
            "epsilon" => self.epsilon = Some(v),
            "z0" => self.z0 = Some(v),
            _ => unreachable!("checked by Sweep::parse"),
        }
    }

    fn given(&self, name: &str) -> bool {
        match name {
            "r" => self.r.is_some(),
            "theta" => self.theta.is_some(),
            "a" => self.a.is_some(),
            "b" => self.b.is_some(),
            "radii" => self.radii.is_some(),
            "epsilon" => self.epsilon.is_some(),
            "steps" => self.steps.is_some(),
            "z0" => self.z0.is_some(),
            _ => false,
        }
    }

    /// Every default filled in; `sweep`, `config` and `emit_config` dropped.
    /// Re-parsing the TOML of the result reproduces the same run.
    pub fn resolved(&self) -> Result<RunConfig, ConfigError> {
        let case = self
            .case
            .clone()
            .ok_or_else(|| ConfigError::Invalid("missing --case (see `whitney list`)".into()))?;
        if !CATALOG.iter().any(|e| e.id == case) {
            return Err(ConfigError::Invalid(format!("unknown case `{case}` (see `whitney list`)")));
        }
        let allowed = case_parameters(&case);
        for p in ["r", "theta", "a", "b", "radii", "epsilon", "steps", "z0"] {
            if self.given(p) && !allowed.contains(&p) {
                return Err(ConfigError::Invalid(format!("`{p}` does not apply to {case}")));
            }
        }
        let n = self.n.unwrap_or(2);
        let defaults = Tolerances::default();
        let mut out = RunConfig {
            case: Some(case.clone()),
            n: Some(n),
            seed: Some(self.seed.unwrap_or(1)),
            resolution: Some(
                self.resolution
                    .unwrap_or_else(|| whitney_core::quadrature::default_resolution(n)),
            ),
            self_test_samples: Some(self.self_test_samples.unwrap_or(20)),
            tol_pointwise: Some(self.tol_pointwise.unwrap_or(defaults.pointwise)),
            tol_slack: Some(self.tol_slack.unwrap_or(defaults.slack)),
            tol_integral: Some(self.tol_integral.unwrap_or(defaults.integral)),
            tol_classification: Some(self.tol_classification.unwrap_or(defaults.classification)),
            tol_strict: Some(self.tol_strict.unwrap_or(defaults.strict)),
            conformal: Some(self.conformal.unwrap_or(false)),
            format: Some(self.format.unwrap_or(Format::Json)),
            out: self.out.clone(),
            ..RunConfig::default()
        };
        for p in allowed {
            match *p {
                "r" => out.r = Some(self.r.unwrap_or(1.0)),
                "theta" => out.theta = Some(self.theta.unwrap_or(1.0)),
                "a" => {
                    let d = if case == "contact_whitney_r" { 0.0 } else { 1.0 };
                    out.a = Some(self.a.unwrap_or(d));
                }
                "b" => out.b = self.b.clone().filter(|b| !b.is_empty()),
                "radii" => out.radii = Some(self.radii.clone().unwrap_or_else(|| vec![1.0; n])),
                "epsilon" => {
                    let d = if case == "perturbed" { Some(0.05) } else { None };
                    out.epsilon = self.epsilon.or(d);
                }
                "steps" => {
                    if case == "perturbed" || self.epsilon.is_some() {
                        out.steps = Some(self.steps.unwrap_or(DEFAULT_STEPS));
                    }
                }
                "z0" => out.z0 = Some(self.z0.unwrap_or(0.0)),
                _ => {}
            }
        }
        if case == "whitney_cp" && !out.theta.is_some_and(|t| t > 0.0) {
            return Err(ConfigError::Invalid(
                "whitney_cp needs theta > 0 (use totally_geodesic_cp for the theta -> 0 limit)".into(),
            ));
        }
        if case == "lifted" && out.epsilon.is_none() && self.steps.is_some() {
            return Err(ConfigError::Invalid("`steps` needs `epsilon` for lifted".into()));
        }
        Ok(out)
    }

    /// Immersion described by a resolved config.
    pub fn spec(&self) -> Result<ImmersionSpec, ConfigError> {
        let r = self.resolved()?;
        let n = r.n.unwrap_or(2);
        let seed = r.seed.unwrap_or(1);
        let b = r.b.clone().unwrap_or_default();
        let perturbed = |eps: f64| -> Result<ImmersionSpec, ConfigError> {
            Ok(ImmersionSpec::new(
                n,
                ImmersionKind::Perturbed {
                    base: Box::new(ImmersionSpec::whitney_c0(n, r.r.unwrap_or(1.0))?),
                    hamiltonian: Hamiltonian::random_quartic(2 * n, seed),
                    epsilon: eps,
                    steps: r.steps.unwrap_or(DEFAULT_STEPS),
                },
            )?)
        };
        let kind = match r.case.as_deref().unwrap_or_default() {
            "whitney_c0" => ImmersionKind::WhitneyC0 { r: r.r.unwrap_or(1.0), b },
            "whitney_cp" => ImmersionKind::WhitneyCp { theta: r.theta.unwrap_or(1.0) },
            "whitney_ch" => ImmersionKind::WhitneyCh { theta: r.theta.unwrap_or(1.0) },
            "contact_whitney_r" => ImmersionKind::ContactWhitneyR {
                r: r.r.unwrap_or(1.0),
                a: r.a.unwrap_or(0.0),
                b,
            },
            "contact_whitney_s" => ImmersionKind::ContactWhitneyS {
                theta: r.theta.unwrap_or(1.0),
                a: r.a.unwrap_or(1.0),
            },
            "contact_whitney_b" => ImmersionKind::ContactWhitneyB {
                theta: r.theta.unwrap_or(1.0),
                a: r.a.unwrap_or(1.0),
            },
            "product_torus" => ImmersionKind::ProductTorus {
                radii: r.radii.clone().unwrap_or_default(),
            },
            "totally_geodesic_cp" => ImmersionKind::TotallyGeodesicCp,
            "perturbed" => return perturbed(r.epsilon.unwrap_or(0.05)),
            "lifted" => {
                let base = match r.epsilon {
                    Some(eps) => perturbed(eps)?,
                    None => ImmersionSpec::whitney_c0(n, r.r.unwrap_or(1.0))?,
                };
                ImmersionKind::Lifted {
                    base: Box::new(base),
                    z0: r.z0.unwrap_or(0.0),
                }
            }
            other => return Err(ConfigError::Invalid(format!("unknown case `{other}`"))),
        };
        Ok(ImmersionSpec::new(n, kind)?)
    }

    pub fn case_config(&self) -> Result<CaseConfig, ConfigError> {
        let r = self.resolved()?;
        let spec = self.spec()?;
        let tolerances = Tolerances {
            pointwise: r.tol_pointwise.unwrap_or_default(),
            slack: r.tol_slack.unwrap_or_default(),
            integral: r.tol_integral.unwrap_or_default(),
            classification: r.tol_classification.unwrap_or_default(),
            strict: r.tol_strict.unwrap_or_default(),
        };
        tolerances.validate()?;
        let resolution = r.resolution.unwrap_or_default();
        if resolution < 8 {
            return Err(ConfigError::Invalid(format!("resolution {resolution} must be at least 8")));
        }
        let mut cfg = CaseConfig::new(spec);
        cfg.resolution = resolution;
        cfg.tolerances = tolerances;
        cfg.seed = r.seed.unwrap_or(1);
        cfg.self_test_samples = r.self_test_samples.unwrap_or(20);
        cfg.conformal = r.conformal.unwrap_or(false);
        Ok(cfg)
    }

    /// One config per sweep value (the config itself when not sweeping).
    pub fn expand(&self) -> Result<Vec<RunConfig>, ConfigError> {
        let Some(s) = &self.sweep else {
            return Ok(vec![self.clone()]);
        };
        let sweep = Sweep::parse(s)?;
        let case = self.case.clone().unwrap_or_default();
        if !case_parameters(&case).contains(&sweep.param.as_str()) {
            return Err(ConfigError::Invalid(format!(
                "`{}` does not apply to {case}",
                sweep.param
            )));
        }
        Ok(sweep
            .values
            .iter()
            .map(|&v| {
                let mut c = self.clone();
                c.sweep = None;
                c.set_param(&sweep.param, v);
                c
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(case: &str) -> RunConfig {
        RunConfig {
            case: Some(case.into()),
            ..RunConfig::default()
        }
    }

    #[test]
    fn sweep_parses_linear_ranges() {
        let s = Sweep::parse("theta=0.5:2:4").unwrap();
        assert_eq!(s.param, "theta");
        assert_eq!(s.values, vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(Sweep::parse("r=1:3:1").unwrap().values, vec![1.0]);
        assert!(Sweep::parse("theta=0:1").is_err());
        assert!(Sweep::parse("n=2:4:3").is_err());
        assert!(Sweep::parse("theta=0:1:0").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig::from_toml("case = \"whitney_cp\"\ntheta = 0.5\nresolution = 40\n").unwrap();
        let flags = RunConfig {
            theta: Some(0.7),
            ..RunConfig::default()
        };
        let merged = file.overridden_by(&flags);
        assert_eq!(merged.theta, Some(0.7));
        assert_eq!(merged.resolution, Some(40));
        assert_eq!(merged.case.as_deref(), Some("whitney_cp"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("case = \"whitney_c0\"\nradius = 2.0\n").is_err());
    }

    #[test]
    fn resolved_round_trips_through_toml() {
        for case in CATALOG.iter().map(|e| e.id) {
            let r = cfg(case).resolved().unwrap();
            let back = RunConfig::from_toml(&r.to_toml()).unwrap();
            assert_eq!(back, r, "{case}");
            assert_eq!(back.resolved().unwrap(), r, "{case}");
            assert_eq!(back.case_config().unwrap(), r.case_config().unwrap(), "{case}");
        }
    }

    #[test]
    fn domain_guards_are_config_errors() {
        let mut c = cfg("whitney_cp");
        c.theta = Some(0.0);
        assert!(matches!(c.case_config(), Err(ConfigError::Invalid(_))));
        let mut c = cfg("whitney_ch");
        c.theta = Some(-1.0);
        assert!(matches!(c.case_config(), Err(ConfigError::Core(_))));
        let mut c = cfg("whitney_c0");
        c.theta = Some(1.0);
        assert!(matches!(c.resolved(), Err(ConfigError::Invalid(_))));
        assert!(cfg("nope").resolved().is_err());
        let mut c = cfg("whitney_c0");
        c.resolution = Some(4);
        assert!(c.case_config().is_err());
    }

    #[test]
    fn case_defaults() {
        let r = cfg("contact_whitney_r").resolved().unwrap();
        assert_eq!((r.r, r.a), (Some(1.0), Some(0.0)));
        let s = cfg("contact_whitney_s").resolved().unwrap();
        assert_eq!((s.theta, s.a), (Some(1.0), Some(1.0)));
        let p = cfg("perturbed").resolved().unwrap();
        assert_eq!((p.epsilon, p.steps), (Some(0.05), Some(DEFAULT_STEPS)));
        let l = cfg("lifted").resolved().unwrap();
        assert_eq!((l.epsilon, l.steps), (None, None));
        let t = RunConfig { n: Some(3), ..cfg("product_torus") }.resolved().unwrap();
        assert_eq!(t.radii, Some(vec![1.0; 3]));
        assert_eq!(t.resolution, Some(32));
    }

    #[test]
    fn expand_sweeps_one_parameter() {
        let c = RunConfig {
            sweep: Some("theta=0.2:1:5".into()),
            ..cfg("whitney_cp")
        };
        let runs = c.expand().unwrap();
        assert_eq!(runs.len(), 5);
        assert!(runs.iter().all(|r| r.sweep.is_none()));
        assert_eq!(runs[4].theta, Some(1.0));
        let bad = RunConfig {
            sweep: Some("a=0:1:2".into()),
            ..cfg("whitney_cp")
        };
        assert!(bad.expand().is_err());
    }
}
