//! Catalog of sphere (and torus) immersions into the model spaces.
//!
//! Every entry maps chart parameters `t` (as jets) to ambient chart
//! coordinates (as jets of the same order). Sphere parameters come from a
//! small atlas of rotated generalized-spherical-coordinate charts; see
//! [`SphereAtlas`].

use crate::error::{Error, Result};
use crate::jets::{layout, seed_variables, ComplexJet, Jet};
use crate::quadrature::gauss_legendre;
use crate::spaceforms::{AmbientModel, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Sphere atlas

/// Generalized spherical coordinates on `𝕊ⁿ`, cyclically permuted per chart.
///
/// Chart parameters are `n − 1` polar angles in `(0, π)` and one azimuth in
/// `[0, 2π)`. The unpermuted chart is singular only where its last two
/// coordinates vanish; chart `c` rotates that pair to `(s_c, s_c + 1)` so the
/// singular sets of all charts have empty common intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphereAtlas {
    n: usize,
    starts: Vec<usize>,
}

impl SphereAtlas {
    pub fn new(n: usize) -> Result<SphereAtlas> {
        let starts = match n {
            2 => vec![1, 0],
            3 => vec![2, 0],
            4 => vec![3, 0, 2],
            _ => {
                return Err(Error::Unsupported(format!(
                    "sphere atlas for n = {n} (supported: 2..=4)"
                )))
            }
        };
        Ok(SphereAtlas { n, starts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_charts(&self) -> usize {
        self.starts.len()
    }

    /// Coordinates of `𝕊ⁿ ⊂ ℝⁿ⁺¹` that vanish together on chart `c`'s
    /// singular set.
    pub fn singular_pair(&self, chart: usize) -> (usize, usize) {
        let s = self.starts[chart];
        (s, (s + 1) % (self.n + 1))
    }

    fn shift(&self, chart: usize) -> usize {
        let m = self.n + 1;
        (self.starts[chart] + m + m - (self.n - 1)) % m
    }

    /// `u(t)` for chart `c`.
    pub fn map(&self, chart: usize, t: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        assert_eq!(t.len(), n, "sphere chart takes n parameters");
        let mut sigma = Vec::with_capacity(n + 1);
        let mut prod = t[0].constant_like(1.0);
        for tk in &t[..n - 1] {
            sigma.push(&prod * &tk.cos());
            prod = &prod * &tk.sin();
        }
        sigma.push(&prod * &t[n - 1].cos());
        sigma.push(&prod * &t[n - 1].sin());
        let k = self.shift(chart);
        let mut u = vec![t[0].zero_like(); n + 1];
        for (i, s) in sigma.into_iter().enumerate() {
            u[(i + k) % (n + 1)] = s;
        }
        u
    }

    /// Values of `u(t)` for plain parameters.
    pub fn map_values(&self, chart: usize, t: &[f64]) -> Vec<f64> {
        let lay = layout(1, 0).expect("layout");
        let jets: Vec<Jet> = t.iter().map(|&v| Jet::constant_in(lay, v)).collect();
        self.map(chart, &jets).iter().map(Jet::value).collect()
    }

    /// Parameters of a unit vector in chart `c` (azimuth in `[0, 2π)`).
    pub fn preimage(&self, chart: usize, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let k = self.shift(chart);
        let sigma: Vec<f64> = (0..=n).map(|i| u[(i + k) % (n + 1)]).collect();
        let mut t = Vec::with_capacity(n);
        for i in 0..n - 1 {
            let tail: f64 = sigma[i + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            t.push(tail.atan2(sigma[i]));
        }
        let mut az = sigma[n].atan2(sigma[n - 1]);
        if az < 0.0 {
            az += 2.0 * PI;
        }
        t.push(az);
        t
    }

    /// Round-metric volume density `√det` of the chart.
    pub fn density(&self, t: &[f64]) -> f64 {
        let n = self.n;
        (0..n - 1)
            .map(|k| t[k].sin().abs().powi((n - 1 - k) as i32))
            .product()
    }
}

// ---------------------------------------------------------------------------
// Hamiltonians

/// Polynomial `F = Σ c_α x^α` on `ℝ²ⁿ` of degree at most 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub num_vars: usize,
    /// `(coefficient, exponents)`.
    pub terms: Vec<(f64, Vec<u8>)>,
}

impl Hamiltonian {
    pub fn zero(num_vars: usize) -> Hamiltonian {
        Hamiltonian {
            num_vars,
            terms: Vec::new(),
        }
    }

    /// `‖z‖² / 2`; its flow is a unitary rotation.
    pub fn rotation(num_vars: usize) -> Hamiltonian {
        let terms = (0..num_vars)
            .map(|v| {
                let mut e = vec![0u8; num_vars];
                e[v] = 2;
                (0.5, e)
            })
            .collect();
        Hamiltonian { num_vars, terms }
    }

    /// Seeded quartic with every monomial of degree 2..=4, coefficients
    /// drawn uniformly from `[−1, 1]` and rescaled to unit ℓ¹ norm (so
    /// `|∇F| ≤ 4` on the unit ball).
    pub fn random_quartic(num_vars: usize, seed: u64) -> Hamiltonian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for deg in 2..=4u8 {
            for e in exponents(num_vars, deg) {
                terms.push((rng.gen_range(-1.0..1.0), e));
            }
        }
        let l1: f64 = terms.iter().map(|(c, _)| f64::abs(*c)).sum();
        for (c, _) in &mut terms {
            *c /= l1;
        }
        Hamiltonian { num_vars, terms }
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().map(|&k| k as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    fn gradient_table(&self) -> Result<GradientTable> {
        if self.degree() > 4 {
            return Err(Error::InvalidParameter("Hamiltonian degree exceeds 4".into()));
        }
        let lay = layout(self.num_vars, 3)?;
        let mut coeffs = vec![vec![0.0; lay.len()]; self.num_vars];
        for (c, e) in &self.terms {
            if e.len() != self.num_vars {
                return Err(Error::InvalidParameter("Hamiltonian exponent length".into()));
            }
            for v in 0..self.num_vars {
                if e[v] == 0 {
                    continue;
                }
                let mut d = e.clone();
                d[v] -= 1;
                let i = lay.index_of(&d).expect("degree ≤ 3");
                coeffs[v][i] += c * e[v] as f64;
            }
        }
        Ok(GradientTable { lay, coeffs })
    }
}

fn exponents(num_vars: usize, deg: u8) -> Vec<Vec<u8>> {
    fn rec(v: usize, left: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if v + 1 == cur.len() {
            cur[v] = left;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[v] = k;
            rec(v + 1, left - k, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, deg, &mut vec![0; num_vars], &mut out);
    out
}

/// `∂_v F` as coefficient tables over the degree-≤3 monomials.
struct GradientTable {
    lay: &'static crate::jets::Layout,
    coeffs: Vec<Vec<f64>>,
}

impl GradientTable {
    /// Hamiltonian vector field `J ∇F` at jet arguments, with
    /// `J(a, b) = (−b, a)` on each interleaved pair.
    fn field(&self, x: &[Jet]) -> Vec<Jet> {
        let lay = self.lay;
        let mut mono: Vec<Jet> = Vec::with_capacity(lay.len());
        mono.push(x[0].constant_like(1.0));
        for i in 1..lay.len() {
            let m = lay.monomial(i);
            let v = m.iter().position(|&k| k > 0).expect("nonzero degree");
            let below = lay.pred(i, v).expect("predecessor");
            let next = &mono[below] * &x[v];
            mono.push(next);
        }
        let grad: Vec<Jet> = self
            .coeffs
            .iter()
            .map(|row| {
                let mut g = x[0].zero_like();
                for (c, m) in row.iter().zip(&mono) {
                    if *c != 0.0 {
                        g.add_scaled(m, *c);
                    }
                }
                g
            })
            .collect();
        let mut out = Vec::with_capacity(x.len());
        for k in 0..x.len() / 2 {
            out.push(-&grad[2 * k + 1]);
            out.push(grad[2 * k].clone());
        }
        out
    }

    fn flow(&self, start: Vec<Jet>, epsilon: f64, steps: usize) -> Result<Vec<Jet>> {
        let h = epsilon / steps as f64;
        let mut y = start;
        let axpy = |y: &[Jet], k: &[Jet], s: f64| -> Vec<Jet> {
            y.iter()
                .zip(k)
                .map(|(a, b)| {
                    let mut r = a.clone();
                    r.add_scaled(b, s);
                    r
                })
                .collect()
        };
        for _ in 0..steps {
            let k1 = self.field(&y);
            let k2 = self.field(&axpy(&y, &k1, h / 2.0));
            let k3 = self.field(&axpy(&y, &k2, h / 2.0));
            let k4 = self.field(&axpy(&y, &k3, h));
            for (i, yi) in y.iter_mut().enumerate() {
                yi.add_scaled(&k1[i], h / 6.0);
                yi.add_scaled(&k2[i], h / 3.0);
                yi.add_scaled(&k3[i], h / 3.0);
                yi.add_scaled(&k4[i], h / 6.0);
            }
            if y.iter().any(|j| j.coeffs().iter().any(|c| !c.is_finite() || c.abs() > 1e12)) {
                return Err(Error::FlowDiverged);
            }
        }
        Ok(y)
    }
}

// ---------------------------------------------------------------------------
// Catalog

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Sphere,
    Torus,
}

/// One catalog entry with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImmersionKind {
    /// Whitney sphere in `ℂⁿ` of radius `r` and center `b` (interleaved; empty = origin).
    WhitneyC0 { r: f64, b: Vec<f64> },
    WhitneyCp { theta: f64 },
    WhitneyCh { theta: f64 },
    /// Contact Whitney sphere in `ℝ²ⁿ⁺¹`; `b = (x, y, z)`, empty = origin.
    ContactWhitneyR { r: f64, a: f64, b: Vec<f64> },
    /// Contact Whitney sphere in `𝕊²ⁿ⁺¹` with D_a parameter `a`.
    ContactWhitneyS { theta: f64, a: f64 },
    /// Contact Whitney sphere in `𝔹ⁿ × ℝ` with D_a parameter `a`.
    ContactWhitneyB { theta: f64, a: f64 },
    ProductTorus { radii: Vec<f64> },
    TotallyGeodesicCp,
    /// Image of a `ℂⁿ` immersion under the time-`epsilon` Hamiltonian flow.
    Perturbed {
        base: Box<ImmersionSpec>,
        hamiltonian: Hamiltonian,
        epsilon: f64,
        steps: usize,
    },
    /// Legendrian lift to `ℝ²ⁿ⁺¹` of an exact Lagrangian sphere in `ℂⁿ`,
    /// with `z = z0` at the anchor point.
    Lifted { base: Box<ImmersionSpec>, z0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionSpec {
    pub n: usize,
    #[serde(flatten)]
    pub kind: ImmersionKind,
}

/// Listing metadata for one catalog identifier.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub model: &'static str,
    pub domain: &'static str,
    pub parameters: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry { id: "whitney_c0", model: "C_n", domain: "sphere", parameters: "r > 0; B in C^n (default 0)" },
    CatalogEntry { id: "whitney_cp", model: "CP_n", domain: "sphere", parameters: "theta > 0" },
    CatalogEntry { id: "whitney_ch", model: "CH_n", domain: "sphere", parameters: "theta > 0" },
    CatalogEntry { id: "contact_whitney_r", model: "Sasakian_R", domain: "sphere", parameters: "r > 0; a real; B in R^(2n+1) (default 0)" },
    CatalogEntry { id: "contact_whitney_s", model: "Sasakian_S", domain: "sphere", parameters: "theta > 0; a > 0" },
    CatalogEntry { id: "contact_whitney_b", model: "Sasakian_B", domain: "sphere", parameters: "theta > 0; a > 0" },
    CatalogEntry { id: "product_torus", model: "C_n", domain: "torus", parameters: "r_1..r_n > 0" },
    CatalogEntry { id: "totally_geodesic_cp", model: "CP_n", domain: "sphere", parameters: "none" },
    CatalogEntry { id: "perturbed", model: "C_n", domain: "sphere", parameters: "base whitney_c0; seeded quartic F; epsilon; steps >= 16" },
    CatalogEntry { id: "lifted", model: "Sasakian_R", domain: "sphere", parameters: "base whitney_c0 (or perturbed); z0" },
];

/// The anchor point `(1, …, 1)/√(n+1)` used by fiber lifts.
pub fn anchor_point(n: usize) -> Vec<f64> {
    vec![1.0 / ((n + 1) as f64).sqrt(); n + 1]
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

impl ImmersionSpec {
    pub fn new(n: usize, kind: ImmersionKind) -> Result<ImmersionSpec> {
        let spec = ImmersionSpec { n, kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn id(&self) -> &'static str {
        match self.kind {
            ImmersionKind::WhitneyC0 { .. } => "whitney_c0",
            ImmersionKind::WhitneyCp { .. } => "whitney_cp",
            ImmersionKind::WhitneyCh { .. } => "whitney_ch",
            ImmersionKind::ContactWhitneyR { .. } => "contact_whitney_r",
            ImmersionKind::ContactWhitneyS { .. } => "contact_whitney_s",
            ImmersionKind::ContactWhitneyB { .. } => "contact_whitney_b",
            ImmersionKind::ProductTorus { .. } => "product_torus",
            ImmersionKind::TotallyGeodesicCp => "totally_geodesic_cp",
            ImmersionKind::Perturbed { .. } => "perturbed",
            ImmersionKind::Lifted { .. } => "lifted",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if !(2..=4).contains(&n) {
            return Err(Error::InvalidParameter(format!("n = {n} must lie in 2..=4")));
        }
        match &self.kind {
            ImmersionKind::WhitneyC0 { r, b } => {
                positive("r", *r)?;
                if !b.is_empty() && b.len() != 2 * n {
                    return Err(Error::InvalidParameter(format!("B needs {} entries", 2 * n)));
                }
            }
            ImmersionKind::WhitneyCp { theta } | ImmersionKind::WhitneyCh { theta } => {
                positive("theta", *theta)?
            }
            ImmersionKind::ContactWhitneyR { r, a, b } => {
                positive("r", *r)?;
                if !a.is_finite() {
                    return Err(Error::InvalidParameter("a must be finite".into()));
                }
                if !b.is_empty() && b.len() != 2 * n + 1 {
                    return Err(Error::InvalidParameter(format!("B needs {} entries", 2 * n + 1)));
                }
            }
            ImmersionKind::ContactWhitneyS { theta, a } | ImmersionKind::ContactWhitneyB { theta, a } => {
                positive("theta", *theta)?;
                positive("a", *a)?;
            }
            ImmersionKind::ProductTorus { radii } => {
                if radii.len() != n {
                    return Err(Error::InvalidParameter(format!("product_torus needs {n} radii")));
                }
                for r in radii {
                    positive("r_i", *r)?;
                }
            }
            ImmersionKind::TotallyGeodesicCp => {}
            ImmersionKind::Perturbed {
                base,
                hamiltonian,
                epsilon,
                steps,
            } => {
                base.validate()?;
                if base.n != n || base.model_kind() != ModelKind::ComplexEuclidean {
                    return Err(Error::InvalidParameter("perturbed base must be an immersion into C_n".into()));
                }
                if hamiltonian.num_vars != 2 * n || hamiltonian.degree() > 4 {
                    return Err(Error::InvalidParameter("Hamiltonian must be a polynomial of degree <= 4 on R^2n".into()));
                }
                if !epsilon.is_finite() {
                    return Err(Error::InvalidParameter("epsilon must be finite".into()));
                }
                if *steps < 16 {
                    return Err(Error::InvalidParameter(format!("steps = {steps} must be at least 16")));
                }
            }
            ImmersionKind::Lifted { base, z0 } => {
                base.validate()?;
                if base.n != n || base.model_kind() != ModelKind::ComplexEuclidean || base.domain() != Domain::Sphere {
                    return Err(Error::InvalidParameter("lifted base must be a sphere immersion into C_n".into()));
                }
                if !z0.is_finite() {
                    return Err(Error::InvalidParameter("z0 must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn model_kind(&self) -> ModelKind {
        match self.kind {
            ImmersionKind::WhitneyC0 { .. }
            | ImmersionKind::ProductTorus { .. }
            | ImmersionKind::Perturbed { .. } => ModelKind::ComplexEuclidean,
            ImmersionKind::WhitneyCp { .. } | ImmersionKind::TotallyGeodesicCp => ModelKind::ComplexProjective,
            ImmersionKind::WhitneyCh { .. } => ModelKind::ComplexHyperbolic,
            ImmersionKind::ContactWhitneyR { .. } | ImmersionKind::Lifted { .. } => ModelKind::SasakianEuclidean,
            ImmersionKind::ContactWhitneyS { .. } => ModelKind::SasakianSphere,
            ImmersionKind::ContactWhitneyB { .. } => ModelKind::SasakianBall,
        }
    }

    pub fn model(&self) -> Result<AmbientModel> {
        let a = match self.kind {
            ImmersionKind::ContactWhitneyS { a, .. } | ImmersionKind::ContactWhitneyB { a, .. } => Some(a),
            _ => None,
        };
        AmbientModel::make(self.model_kind(), self.n, a)
    }

    pub fn domain(&self) -> Domain {
        match &self.kind {
            ImmersionKind::ProductTorus { .. } => Domain::Torus,
            ImmersionKind::Perturbed { base, .. } => base.domain(),
            _ => Domain::Sphere,
        }
    }

    pub fn num_charts(&self) -> usize {
        match self.domain() {
            Domain::Torus => 1,
            Domain::Sphere => SphereAtlas::new(self.n).map(|a| a.num_charts()).unwrap_or(0),
        }
    }

    /// Pointwise isotropy tolerance: looser for numerically generated cases.
    pub fn isotropy_tolerance(&self) -> f64 {
        match self.kind {
            ImmersionKind::Perturbed { .. } | ImmersionKind::Lifted { .. } => 1e-7,
            _ => 1e-9,
        }
    }

    /// Whether the immersion arises by a numerical construction (flow or lift).
    pub fn is_generated(&self) -> bool {
        matches!(self.kind, ImmersionKind::Perturbed { .. } | ImmersionKind::Lifted { .. })
    }

    /// Ambient chart coordinates of the immersion at parameter jets `t`.
    pub fn eval(&self, chart: usize, t: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.n;
        match &self.kind {
            ImmersionKind::ProductTorus { radii } => {
                let mut out = Vec::with_capacity(2 * n);
                for (r, tk) in radii.iter().zip(t) {
                    out.push(tk.cos().scale(*r));
                    out.push(tk.sin().scale(*r));
                }
                Ok(out)
            }
            ImmersionKind::Perturbed {
                base,
                hamiltonian,
                epsilon,
                steps,
            } => {
                let start = base.eval(chart, t)?;
                hamiltonian.gradient_table()?.flow(start, *epsilon, *steps)
            }
            ImmersionKind::Lifted { base, z0 } => {
                let b = base.eval(chart, t)?;
                let z = self.fiber(chart, t, &b, *z0)?;
                Ok(heisenberg_coords(&b, n, z))
            }
            ImmersionKind::ContactWhitneyB { theta, .. } => {
                let u = SphereAtlas::new(n)?.map(chart, t);
                let w = whitney_ball_chart(&u, *theta)?;
                let fiber = self.fiber(chart, t, &w, 0.0)?;
                let mut out = w;
                out.push(fiber);
                Ok(out)
            }
            _ => {
                let u = SphereAtlas::new(n)?.map(chart, t);
                self.eval_on_sphere(&u)
            }
        }
    }

    /// Closed-form entries evaluated on sphere points `u` (length `n + 1`).
    fn eval_on_sphere(&self, u: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.n;
        let u0 = &u[n];
        match &self.kind {
            ImmersionKind::WhitneyC0 { r, b } => {
                let f = (u0 * u0 + 1.0).recip()?.scale(*r);
                let mut out = Vec::with_capacity(2 * n);
                for (j, uj) in u[..n].iter().enumerate() {
                    let re = &f * uj;
                    let im = &re * u0;
                    out.push(re + b.get(2 * j).copied().unwrap_or(0.0));
                    out.push(im + b.get(2 * j + 1).copied().unwrap_or(0.0));
                }
                Ok(out)
            }
            ImmersionKind::WhitneyCp { theta } => {
                let z = whitney_cp_homogeneous(u, *theta)?;
                projective_chart(&z)
            }
            ImmersionKind::TotallyGeodesicCp => {
                let mut z: Vec<ComplexJet> = u[..n].iter().map(|x| ComplexJet::from_real(x.clone())).collect();
                z.push(ComplexJet::new(u0.zero_like(), u0.clone()));
                projective_chart(&z)
            }
            ImmersionKind::WhitneyCh { theta } => whitney_ball_chart(u, *theta),
            ImmersionKind::ContactWhitneyR { r, a, b } => {
                let f = (u0 * u0 + 1.0).recip()?.scale(*r);
                let bx = |i: usize| b.get(i).copied().unwrap_or(0.0);
                let mut out = Vec::with_capacity(2 * n + 1);
                let xs: Vec<Jet> = u[..n].iter().map(|uj| &(&f * uj) * u0).collect();
                for x in &xs {
                    out.push(x.clone());
                }
                for uj in &u[..n] {
                    out.push(&f * uj);
                }
                let mut z = &(&f * &f) * u0 + a * r;
                for (i, x) in xs.iter().enumerate() {
                    z.add_scaled(x, bx(n + i));
                }
                out.push(z);
                if !b.is_empty() {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = o.clone() + b[i];
                    }
                }
                Ok(out)
            }
            ImmersionKind::ContactWhitneyS { theta, .. } => {
                let z = whitney_cp_homogeneous(u, *theta)?;
                let last = &z[n];
                let inv = last.try_recip()?;
                let mut out = Vec::with_capacity(2 * n + 1);
                for zj in &z[..n] {
                    let w = zj * &inv;
                    out.push(w.re);
                    out.push(w.im);
                }
                out.push(last.im.atan2(&last.re)?);
                Ok(out)
            }
            _ => unreachable!("handled in eval"),
        }
    }

    /// Fiber coordinate of a lift: value by path integration from the anchor,
    /// derivatives from the (exact) closed 1-form.
    fn fiber(&self, chart: usize, t: &[Jet], base: &[Jet], anchor_value: f64) -> Result<Jet> {
        let form = self.fiber_form(base)?;
        let order = t[0].order();
        let grads: Vec<Jet> = (0..self.n)
            .map(|a| {
                let mut g = t[0].truncate(order - 1).zero_like();
                for (al, b) in form.iter().zip(base) {
                    g.add_product(&al.truncate(order - 1), &b.partial(a));
                }
                g
            })
            .collect();
        let atlas = SphereAtlas::new(self.n)?;
        let t0: Vec<f64> = t.iter().map(Jet::value).collect();
        let start = atlas.preimage(chart, &anchor_point(self.n));
        let mut path = vec![start.clone()];
        let mut cur = start;
        for k in 0..self.n {
            cur[k] = t0[k];
            path.push(cur.clone());
        }
        let value = anchor_value + self.path_integral(chart, &path)?;
        Ok(Jet::from_gradient(value, &grads)?)
    }

    /// `α` with `d(fiber) = Σ α_μ d(base^μ)` on the image of the base.
    fn fiber_form(&self, b: &[Jet]) -> Result<Vec<Jet>> {
        let n = self.n;
        match &self.kind {
            // dz = Σ y_i dx_i with (x_i, y_i) = (Im z_i, Re z_i)
            ImmersionKind::Lifted { .. } => {
                let mut form = vec![b[0].zero_like(); 2 * n];
                for i in 0..n {
                    form[2 * i + 1] = b[2 * i].clone();
                }
                Ok(form)
            }
            // dt = −ω = −4 Σ (y_j dx_j − x_j dy_j) / (1 − |w|²)
            ImmersionKind::ContactWhitneyB { .. } => {
                let mut rho = b[0].constant_like(1.0);
                for v in b {
                    rho -= &(v * v);
                }
                let inv = rho.recip()?;
                let mut form = Vec::with_capacity(2 * n);
                for j in 0..n {
                    form.push((&b[2 * j + 1] * &inv).scale(-4.0));
                    form.push((&b[2 * j] * &inv).scale(4.0));
                }
                Ok(form)
            }
            _ => Err(Error::Unsupported(format!("{} has no fiber lift", self.id()))),
        }
    }

    fn lift_base(&self, chart: usize, t: &[Jet]) -> Result<Vec<Jet>> {
        match &self.kind {
            ImmersionKind::Lifted { base, .. } => base.eval(chart, t),
            ImmersionKind::ContactWhitneyB { theta, .. } => {
                let u = SphereAtlas::new(self.n)?.map(chart, t);
                whitney_ball_chart(&u, *theta)
            }
            _ => Err(Error::Unsupported(format!("{} has no fiber lift", self.id()))),
        }
    }

    /// `∫ α(b) · db` along the polyline through chart parameter points.
    pub fn path_integral(&self, chart: usize, points: &[Vec<f64>]) -> Result<f64> {
        let (gx, gw) = gauss_legendre(10);
        let lay = layout(1, 1)?;
        let mut total = 0.0;
        for seg in points.windows(2) {
            let (p, q) = (&seg[0], &seg[1]);
            let len = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if len == 0.0 {
                continue;
            }
            let panels = (len / 0.5).ceil() as usize;
            let mut seg_sum = 0.0;
            for k in 0..panels {
                let (lo, hi) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
                for (x, w) in gx.iter().zip(&gw) {
                    let tau = lo + (hi - lo) * (x + 1.0) / 2.0;
                    let t: Vec<Jet> = p
                        .iter()
                        .zip(q)
                        .map(|(a, b)| {
                            Jet::from_coeffs(lay, &[a + tau * (b - a), b - a])
                        })
                        .collect();
                    let base = self.lift_base(chart, &t)?;
                    let form = self.fiber_form(&base)?;
                    let integrand: f64 = form
                        .iter()
                        .zip(&base)
                        .map(|(al, b)| al.value() * b.derivative(&[0]))
                        .sum();
                    seg_sum += w * (hi - lo) / 2.0 * integrand;
                }
            }
            total += seg_sum;
        }
        Ok(total)
    }

    /// For flowed cases: sup change of all jet coefficients when the RK4 step
    /// count is doubled. Zero for every other entry.
    pub fn flow_refinement(&self, chart: usize, t: &[f64]) -> Result<f64> {
        match &self.kind {
            ImmersionKind::Perturbed {
                base,
                hamiltonian,
                epsilon,
                steps,
            } => {
                let tj = seed_variables(t, 3)?;
                let table = hamiltonian.gradient_table()?;
                let start = base.eval(chart, &tj)?;
                let a = table.flow(start.clone(), *epsilon, *steps)?;
                let b = table.flow(start, *epsilon, 2 * steps)?;
                Ok(a.iter()
                    .zip(&b)
                    .flat_map(|(x, y)| x.coeffs().iter().zip(y.coeffs()).map(|(p, q)| (p - q).abs()))
                    .fold(0.0, f64::max))
            }
            ImmersionKind::Lifted { base, .. } => base.flow_refinement(chart, t),
            _ => Ok(0.0),
        }
    }

    /// Values of the immersion at plain parameters.
    pub fn eval_values(&self, chart: usize, t: &[f64]) -> Result<Vec<f64>> {
        let tj = seed_variables(t, 1)?;
        Ok(self.eval(chart, &tj)?.iter().map(Jet::value).collect())
    }
}

/// `ℂⁿ` coordinates `b` (interleaved) to `(x, y, z)` with `(x_i, y_i) = (Im, Re)`.
fn heisenberg_coords(b: &[Jet], n: usize, z: Jet) -> Vec<Jet> {
    let mut out = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        out.push(b[2 * i + 1].clone());
    }
    for i in 0..n {
        out.push(b[2 * i].clone());
    }
    out.push(z);
    out
}

/// Homogeneous coordinates on `𝕊²ⁿ⁺¹` of the Whitney sphere in `ℂPⁿ`
/// (and of the contact Whitney sphere in `𝕊²ⁿ⁺¹`).
fn whitney_cp_homogeneous(u: &[Jet], theta: f64) -> Result<Vec<ComplexJet>> {
    let n = u.len() - 1;
    let (sh, ch) = (theta.sinh(), theta.cosh());
    let u0 = &u[n];
    let den = ComplexJet::new(u0.constant_like(ch), u0.scale(sh));
    let inv = den.try_recip()?;
    let mut z: Vec<ComplexJet> = u[..n]
        .iter()
        .map(|x| inv.scale_jet(x))
        .collect();
    let mut d2 = &(u0 * u0).scale(sh * sh) + ch * ch;
    d2 = d2.recip()?;
    let re = (&(u0 * u0) + 1.0).scale(sh * ch);
    z.push(ComplexJet::new(&re * &d2, u0 * &d2));
    Ok(z)
}

/// Divide by the homogeneous coordinate of largest modulus; the Fubini–Study
/// metric has the same form in every standard affine chart.
fn projective_chart(z: &[ComplexJet]) -> Result<Vec<Jet>> {
    let k = (0..z.len())
        .max_by(|&a, &b| z[a].abs_value().total_cmp(&z[b].abs_value()))
        .expect("nonempty");
    let inv = z[k].try_recip()?;
    let mut out = Vec::with_capacity(2 * (z.len() - 1));
    for (j, zj) in z.iter().enumerate() {
        if j != k {
            let w = zj * &inv;
            out.push(w.re);
            out.push(w.im);
        }
    }
    Ok(out)
}

/// Ball chart `w_j = u_j / (cosh θ + i sinh θ u_{n+1})` of the Whitney sphere
/// in `ℂHⁿ`.
fn whitney_ball_chart(u: &[Jet], theta: f64) -> Result<Vec<Jet>> {
    let n = u.len() - 1;
    let u0 = &u[n];
    let den = ComplexJet::new(u0.constant_like(theta.cosh()), u0.scale(theta.sinh()));
    let inv = den.try_recip()?;
    let mut out = Vec::with_capacity(2 * n);
    for x in &u[..n] {
        let w = inv.scale_jet(x);
        out.push(w.re);
        out.push(w.im);
    }
    Ok(out)
}

/// Convenience constructors.
impl ImmersionSpec {
    pub fn whitney_c0(n: usize, r: f64) -> Result<ImmersionSpec> {
        ImmersionSpec::new(n, ImmersionKind::WhitneyC0 { r, b: Vec::new() })
    }

    pub fn perturbed_whitney(n: usize, r: f64, seed: u64, epsilon: f64, steps: usize) -> Result<ImmersionSpec> {
        ImmersionSpec::new(
            n,
            ImmersionKind::Perturbed {
                base: Box::new(ImmersionSpec::whitney_c0(n, r)?),
                hamiltonian: Hamiltonian::random_quartic(2 * n, seed),
                epsilon,
                steps,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cj(v: &[f64]) -> Vec<Jet> {
        seed_variables(v, 1).unwrap()
    }

    #[test]
    fn atlas_charts_are_unit_and_invertible() {
        for n in 2..=4 {
            let atlas = SphereAtlas::new(n).unwrap();
            for c in 0..atlas.num_charts() {
                let t: Vec<f64> = (0..n).map(|k| 0.3 + 0.4 * k as f64).collect();
                let u = atlas.map_values(c, &t);
                let norm: f64 = u.iter().map(|x| x * x).sum();
                assert!((norm - 1.0).abs() < 1e-14);
                let back = atlas.preimage(c, &u);
                for (a, b) in back.iter().zip(&t) {
                    assert!((a - b).abs() < 1e-12, "n={n} c={c}");
                }
                let (a, b) = atlas.singular_pair(c);
                let mut ts = vec![0.7; n];
                ts[n - 2] = 0.0;
                let us = atlas.map_values(c, &ts);
                assert!(us[a].abs() < 1e-15 && us[b].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn whitney_c0_hand_values() {
        let spec = ImmersionSpec::whitney_c0(3, 1.0).unwrap();
        let v = spec.eval_on_sphere(&cj(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let vals: Vec<f64> = v.iter().map(Jet::value).collect();
        assert_eq!(vals, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let north = spec.eval_on_sphere(&cj(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        let south = spec.eval_on_sphere(&cj(&[0.0, 0.0, 0.0, -1.0])).unwrap();
        for (a, b) in north.iter().zip(&south) {
            assert_eq!(a.value(), b.value());
        }
    }

    #[test]
    fn whitney_cp_equator_chart_value() {
        let theta: f64 = 0.8;
        let u = [0.6, 0.8, 0.0];
        let z = whitney_cp_homogeneous(&cj(&u), theta).unwrap();
        assert!((z[0].re.value() - 0.6 / theta.cosh()).abs() < 1e-15);
        assert!((z[2].re.value() - theta.tanh()).abs() < 1e-15);
        let norm: f64 = z.iter().map(|c| c.norm_sqr().value()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
        let w: Vec<f64> = projective_chart(&z).unwrap().iter().map(Jet::value).collect();
        assert!((w[0] - 0.6 / theta.sinh()).abs() < 1e-14);
        assert!((w[2] - 0.8 / theta.sinh()).abs() < 1e-14);
    }

    #[test]
    fn ch_sphere_lies_in_ball() {
        let w = whitney_ball_chart(&cj(&[0.0, 0.0, 1.0]), 0.2).unwrap();
        assert!(w.iter().all(|x| x.value() == 0.0));
        let w = whitney_ball_chart(&cj(&[0.6, 0.8, 0.0]), 0.05).unwrap();
        let r2: f64 = w.iter().map(|x| x.value().powi(2)).sum();
        assert!(r2 < 1.0);
    }

    #[test]
    fn lift_matches_closed_form() {
        for n in [2, 3] {
            let r = 1.3;
            let anchor = anchor_point(n);
            let u0 = anchor[n];
            let z_anchor = r * r * u0 / (1.0 + u0 * u0).powi(2);
            let lifted = ImmersionSpec::new(
                n,
                ImmersionKind::Lifted {
                    base: Box::new(ImmersionSpec::whitney_c0(n, r).unwrap()),
                    z0: z_anchor,
                },
            )
            .unwrap();
            let closed = ImmersionSpec::new(n, ImmersionKind::ContactWhitneyR { r, a: 0.0, b: vec![] }).unwrap();
            for chart in 0..lifted.num_charts() {
                let t: Vec<f64> = (0..n).map(|k| 0.4 + 0.9 * k as f64).collect();
                let a = lifted.eval(chart, &seed_variables(&t, 3).unwrap()).unwrap();
                let b = closed.eval(chart, &seed_variables(&t, 3).unwrap()).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    for (p, q) in x.coeffs().iter().zip(y.coeffs()) {
                        assert!((p - q).abs() < 1e-10, "n={n} chart={chart}: {p} vs {q}");
                    }
                }
            }
        }
    }

    #[test]
    fn loop_integral_vanishes() {
        let spec = ImmersionSpec::new(
            2,
            ImmersionKind::Lifted {
                base: Box::new(ImmersionSpec::whitney_c0(2, 1.0).unwrap()),
                z0: 0.0,
            },
        )
        .unwrap();
        let pts = vec![vec![0.3, 0.2], vec![2.5, 0.2], vec![2.5, 5.9], vec![0.3, 5.9], vec![0.3, 0.2]];
        assert!(spec.path_integral(0, &pts).unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let base = ImmersionSpec::whitney_c0(2, 1.0).unwrap();
        let spec = ImmersionSpec::new(
            2,
            ImmersionKind::Perturbed {
                base: Box::new(base.clone()),
                hamiltonian: Hamiltonian::zero(4),
                epsilon: 0.3,
                steps: 16,
            },
        )
        .unwrap();
        let t = seed_variables(&[1.0, 2.0], 3).unwrap();
        assert_eq!(spec.eval(0, &t).unwrap(), base.eval(0, &t).unwrap());
    }

    #[test]
    fn rotation_flow_is_unitary() {
        let base = ImmersionSpec::whitney_c0(2, 1.0).unwrap();
        let eps = 0.7;
        let spec = ImmersionSpec::new(
            2,
            ImmersionKind::Perturbed {
                base: Box::new(base.clone()),
                hamiltonian: Hamiltonian::rotation(4),
                epsilon: eps,
                steps: 64,
            },
        )
        .unwrap();
        let t = [1.0, 2.0];
        let a = base.eval_values(0, &t).unwrap();
        let b = spec.eval_values(0, &t).unwrap();
        // J∇F = i z, so the flow is z ↦ e^{iε} z
        for k in 0..2 {
            let (x, y) = (a[2 * k], a[2 * k + 1]);
            let (c, s) = (eps.cos(), eps.sin());
            assert!((b[2 * k] - (c * x - s * y)).abs() < 1e-10);
            assert!((b[2 * k + 1] - (s * x + c * y)).abs() < 1e-10);
        }
        assert!(spec.flow_refinement(0, &t).unwrap() < 1e-9);
    }

    #[test]
    fn parameter_guards() {
        assert!(ImmersionSpec::new(2, ImmersionKind::WhitneyCp { theta: 0.0 }).is_err());
        assert!(ImmersionSpec::new(5, ImmersionKind::TotallyGeodesicCp).is_err());
        assert!(ImmersionSpec::new(2, ImmersionKind::ProductTorus { radii: vec![1.0] }).is_err());
        assert!(ImmersionSpec::perturbed_whitney(2, 1.0, 1, 0.05, 8).is_err());
        assert!(ImmersionSpec::new(2, ImmersionKind::ContactWhitneyS { theta: 0.3, a: -1.0 }).is_err());
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let spec = ImmersionSpec::perturbed_whitney(2, 1.0, 9, 0.05, 16).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        let back: ImmersionSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
    }
}
