//! Chart models of the six ambient space forms.
//!
//! Every model exposes its metric and structure tensors (`J` for the complex
//! space forms; `φ, ξ, η` for the Sasakian ones) as jets around a chart point,
//! the Levi-Civita connection and Riemann tensor derived from those jets, and
//! the closed-form curvature tensor used as an independent oracle.
//!
//! Chart conventions:
//! - `C_n`, `CP_n`, `CH_n`: interleaved `(Re w_1, Im w_1, …, Re w_n, Im w_n)`
//!   of an affine chart (`w = z / z_k` for `CP_n`, the Bergman ball for `CH_n`).
//! - `Sasakian_R`: `(x_1, …, x_n, y_1, …, y_n, z)`.
//! - `Sasakian_S`: `(Re w, Im w interleaved, s)` with the point of `𝕊²ⁿ⁺¹`
//!   given by `e^{is} (w, 1) / √(1 + |w|²)`.
//! - `Sasakian_B`: `(Re w, Im w interleaved, t)` on `𝔹ⁿ × ℝ`.

use crate::error::{Error, Result};
use crate::jets::{matrix, seed_variables, ComplexJet, Jet};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "C_n")]
    ComplexEuclidean,
    #[serde(rename = "CP_n")]
    ComplexProjective,
    #[serde(rename = "CH_n")]
    ComplexHyperbolic,
    #[serde(rename = "Sasakian_R")]
    SasakianEuclidean,
    #[serde(rename = "Sasakian_S")]
    SasakianSphere,
    #[serde(rename = "Sasakian_B")]
    SasakianBall,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::ComplexEuclidean,
        ModelKind::ComplexProjective,
        ModelKind::ComplexHyperbolic,
        ModelKind::SasakianEuclidean,
        ModelKind::SasakianSphere,
        ModelKind::SasakianBall,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::ComplexEuclidean => "C_n",
            ModelKind::ComplexProjective => "CP_n",
            ModelKind::ComplexHyperbolic => "CH_n",
            ModelKind::SasakianEuclidean => "Sasakian_R",
            ModelKind::SasakianSphere => "Sasakian_S",
            ModelKind::SasakianBall => "Sasakian_B",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.id() == s)
    }

    pub fn is_sasakian(self) -> bool {
        matches!(
            self,
            ModelKind::SasakianEuclidean | ModelKind::SasakianSphere | ModelKind::SasakianBall
        )
    }

    fn takes_deformation(self) -> bool {
        matches!(self, ModelKind::SasakianSphere | ModelKind::SasakianBall)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Constant-curvature data of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceFormConstant {
    /// Holomorphic sectional curvature `4c`.
    Complex { c: f64 },
    /// `φ`-sectional curvature `c̃`.
    Sasakian { c_tilde: f64 },
}

impl SpaceFormConstant {
    /// Constant in front of `δ_ik δ_jl − δ_il δ_jk` in the Gauss equation of an
    /// isotropic submanifold: `c`, resp. `(c̃ + 3)/4`.
    pub fn gauss_constant(self) -> f64 {
        match self {
            SpaceFormConstant::Complex { c } => c,
            SpaceFormConstant::Sasakian { c_tilde } => (c_tilde + 3.0) / 4.0,
        }
    }
}

/// One of the six model spaces in a single chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientModel {
    kind: ModelKind,
    n: usize,
    /// D_a-homothetic parameter; 1 for models without one.
    a: f64,
}

/// Point of a model chart.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint<'m> {
    pub model: &'m AmbientModel,
    pub coords: Vec<f64>,
}

/// Metric and structure fields as jets in the chart coordinates.
#[derive(Debug, Clone)]
pub struct StructureJets {
    /// `g_μν`, row-major `N × N`.
    pub metric: Vec<Jet>,
    /// `J^μ_ν` or `φ^μ_ν`, row-major; `(JX)^μ = Σ_ν J^μ_ν X^ν`.
    pub structure: Vec<Jet>,
    /// `ξ^μ` (Sasakian only).
    pub reeb: Option<Vec<Jet>>,
    /// `η_μ` (Sasakian only).
    pub contact: Option<Vec<Jet>>,
}

/// Everything the submanifold engine needs from the ambient space at a point:
/// metric jets (order 2), Christoffel jets (order 1), structure jets (order 1).
#[derive(Debug, Clone)]
pub struct LocalAmbient {
    pub point: Vec<f64>,
    pub dim: usize,
    pub metric: Vec<Jet>,
    /// `Γ^μ_{νλ}` at `(μ N + ν) N + λ`.
    pub christoffel: Vec<Jet>,
    pub structure: Vec<Jet>,
    pub reeb: Option<Vec<Jet>>,
    pub contact: Option<Vec<Jet>>,
    pub constant: SpaceFormConstant,
}

impl AmbientModel {
    /// Build a model. `a` is required (and must be positive) for
    /// `Sasakian_S` and `Sasakian_B`; it is ignored otherwise.
    pub fn make(kind: ModelKind, n: usize, a: Option<f64>) -> Result<AmbientModel> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
        }
        if 2 * n + 1 > crate::jets::MAX_VARS {
            return Err(Error::InvalidParameter(format!("n = {n} exceeds the supported range")));
        }
        let a = if kind.takes_deformation() {
            match a {
                Some(a) if a > 0.0 && a.is_finite() => a,
                Some(a) => {
                    return Err(Error::InvalidParameter(format!(
                        "deformation parameter a = {a} must be positive"
                    )))
                }
                None => 1.0,
            }
        } else {
            1.0
        };
        Ok(AmbientModel { kind, n, a })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn deformation(&self) -> f64 {
        self.a
    }

    pub fn is_sasakian(&self) -> bool {
        self.kind.is_sasakian()
    }

    pub fn chart_dim(&self) -> usize {
        if self.is_sasakian() {
            2 * self.n + 1
        } else {
            2 * self.n
        }
    }

    pub fn constant(&self) -> SpaceFormConstant {
        match self.kind {
            ModelKind::ComplexEuclidean => SpaceFormConstant::Complex { c: 0.0 },
            ModelKind::ComplexProjective => SpaceFormConstant::Complex { c: 1.0 },
            ModelKind::ComplexHyperbolic => SpaceFormConstant::Complex { c: -1.0 },
            ModelKind::SasakianEuclidean => SpaceFormConstant::Sasakian { c_tilde: -3.0 },
            ModelKind::SasakianSphere => SpaceFormConstant::Sasakian {
                c_tilde: 4.0 / self.a - 3.0,
            },
            ModelKind::SasakianBall => SpaceFormConstant::Sasakian {
                c_tilde: -1.0 / self.a - 3.0,
            },
        }
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        if p.len() != self.chart_dim() || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self.kind {
            ModelKind::ComplexHyperbolic | ModelKind::SasakianBall => {
                p[..2 * self.n].iter().map(|x| x * x).sum::<f64>() < 1.0
            }
            _ => true,
        }
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<AmbientPoint<'_>> {
        if !self.in_domain(&coords) {
            return Err(Error::OutOfDomain(coords, self.kind.id()));
        }
        Ok(AmbientPoint {
            model: self,
            coords,
        })
    }

    /// Structure fields evaluated on arbitrary coordinate jets. The metric is
    /// exact to the order of `y` (one less for `Sasakian_S`, whose fields come
    /// from derivatives of the embedding); the structure fields to one order
    /// less than the metric.
    pub fn structure_jets(&self, y: &[Jet]) -> Result<StructureJets> {
        assert_eq!(y.len(), self.chart_dim(), "chart dimension");
        match self.kind {
            ModelKind::ComplexEuclidean => Ok(complex_fields(y, self.n, 0.0, 1.0)),
            ModelKind::ComplexProjective => Ok(complex_fields(y, self.n, 1.0, 1.0)),
            ModelKind::ComplexHyperbolic => Ok(complex_fields(y, self.n, -1.0, 1.0)),
            ModelKind::SasakianEuclidean => Ok(heisenberg_fields(y, self.n)),
            ModelKind::SasakianSphere => sphere_fields(y, self.n, self.a),
            ModelKind::SasakianBall => ball_fields(y, self.n, self.a),
        }
    }

    /// Metric (order 2), Christoffel symbols (order 1) and structure fields
    /// (order 1) as jets in the chart variables around `p`.
    pub fn local(&self, p: &[f64]) -> Result<LocalAmbient> {
        if !self.in_domain(p) {
            return Err(Error::OutOfDomain(p.to_vec(), self.kind.id()));
        }
        let dim = self.chart_dim();
        let order = if self.kind == ModelKind::SasakianSphere { 3 } else { 2 };
        let y = seed_variables(p, order)?;
        let mut fields = self.structure_jets(&y)?;
        if order == 3 {
            fields.metric = fields.metric.iter().map(|g| g.truncate(2)).collect();
        }
        let structure: Vec<Jet> = fields.structure.iter().map(|j| j.truncate(1)).collect();
        let reeb = fields
            .reeb
            .map(|v| v.iter().map(|j| j.truncate(1)).collect());
        let contact = fields
            .contact
            .map(|v| v.iter().map(|j| j.truncate(1)).collect());
        check_positive_definite(&fields.metric, dim, p)?;
        let christoffel = christoffel_jets(&fields.metric, dim)?;
        Ok(LocalAmbient {
            point: p.to_vec(),
            dim,
            metric: fields.metric,
            christoffel,
            structure,
            reeb,
            contact,
            constant: self.constant(),
        })
    }

    /// Christoffel values `Γ^μ_{νλ}` at `p`, indexed `(μ N + ν) N + λ`.
    pub fn christoffel_at(&self, p: &AmbientPoint<'_>) -> Result<Vec<f64>> {
        Ok(self
            .local(&p.coords)?
            .christoffel
            .iter()
            .map(Jet::value)
            .collect())
    }

    /// Riemann tensor `R^μ_{νρσ}` at `p`, indexed `((μ N + ν) N + ρ) N + σ`.
    pub fn riemann_at(&self, p: &AmbientPoint<'_>) -> Result<Vec<f64>> {
        Ok(self.local(&p.coords)?.riemann())
    }

    /// Random chart point well inside the domain.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let dim = self.chart_dim();
        let n2 = 2 * self.n;
        let mut p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        match self.kind {
            ModelKind::ComplexHyperbolic | ModelKind::SasakianBall => {
                let r: f64 = p[..n2].iter().map(|x| x * x).sum::<f64>().sqrt();
                let target = rng.gen_range(0.05..0.8);
                for x in &mut p[..n2] {
                    *x *= target / r;
                }
            }
            ModelKind::SasakianSphere => p[n2] *= std::f64::consts::PI,
            _ => {}
        }
        p
    }
}

fn check_positive_definite(metric: &[Jet], dim: usize, p: &[f64]) -> Result<()> {
    let g = DMatrix::from_fn(dim, dim, |i, j| metric[i * dim + j].value());
    if g.cholesky().is_none() {
        return Err(Error::MetricNotPositiveDefinite(p.to_vec()));
    }
    Ok(())
}

/// `Γ^μ_{νλ} = ½ g^{μκ} (∂_ν g_{κλ} + ∂_λ g_{κν} − ∂_κ g_{νλ})`, one order
/// below the metric jets.
pub fn christoffel_jets(metric: &[Jet], dim: usize) -> Result<Vec<Jet>> {
    let order = metric[0].order();
    assert!(order >= 1, "metric jets need first derivatives");
    let low: Vec<Jet> = metric.iter().map(|g| g.truncate(order - 1)).collect();
    let inv = matrix::inverse(&low, dim)?;
    // dg[(k * dim + l) * dim + v] = ∂_v g_{kl}
    let mut dg = Vec::with_capacity(dim * dim * dim);
    for g in metric {
        for v in 0..dim {
            dg.push(g.partial(v));
        }
    }
    let d = |k: usize, l: usize, v: usize| &dg[(k * dim + l) * dim + v];
    let zero = low[0].zero_like();
    // first_kind[(k dim + ν) dim + λ], symmetric in ν λ
    let mut first_kind = vec![zero.clone(); dim * dim * dim];
    for k in 0..dim {
        for nu in 0..dim {
            for la in nu..dim {
                let mut s = d(k, la, nu).clone();
                s += d(k, nu, la);
                s -= d(nu, la, k);
                if s.is_zero() {
                    continue;
                }
                let s = s.scale(0.5);
                first_kind[(k * dim + la) * dim + nu] = s.clone();
                first_kind[(k * dim + nu) * dim + la] = s;
            }
        }
    }
    let fk_zero: Vec<bool> = first_kind.iter().map(Jet::is_zero).collect();
    let mut out: Vec<Jet> = Vec::with_capacity(dim * dim * dim);
    for mu in 0..dim {
        for nu in 0..dim {
            for la in 0..dim {
                if la < nu {
                    let sym = out[(mu * dim + la) * dim + nu].clone();
                    out.push(sym);
                    continue;
                }
                let mut s = zero.clone();
                for k in 0..dim {
                    let f = (k * dim + nu) * dim + la;
                    if !fk_zero[f] {
                        s.add_product(&inv[mu * dim + k], &first_kind[f]);
                    }
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// `R^μ_{νρσ} = ∂_ρ Γ^μ_{σν} − ∂_σ Γ^μ_{ρν} + Γ^μ_{ρκ} Γ^κ_{σν} − Γ^μ_{σκ} Γ^κ_{ρν}`
/// from order-1 Christoffel jets.
pub fn riemann_from_christoffel(gamma: &[Jet], dim: usize) -> Vec<f64> {
    let g = |m: usize, a: usize, b: usize| gamma[(m * dim + a) * dim + b].value();
    let dgam = |m: usize, a: usize, b: usize, v: usize| gamma[(m * dim + a) * dim + b].derivative(&[v]);
    let mut r = vec![0.0; dim * dim * dim * dim];
    for mu in 0..dim {
        for nu in 0..dim {
            for rho in 0..dim {
                for sig in 0..dim {
                    let mut s = dgam(mu, sig, nu, rho) - dgam(mu, rho, nu, sig);
                    for k in 0..dim {
                        s += g(mu, rho, k) * g(k, sig, nu) - g(mu, sig, k) * g(k, rho, nu);
                    }
                    r[((mu * dim + nu) * dim + rho) * dim + sig] = s;
                }
            }
        }
    }
    r
}

impl LocalAmbient {
    pub fn metric_values(&self) -> Vec<f64> {
        self.metric.iter().map(Jet::value).collect()
    }

    pub fn structure_values(&self) -> Vec<f64> {
        self.structure.iter().map(Jet::value).collect()
    }

    pub fn reeb_values(&self) -> Option<Vec<f64>> {
        self.reeb.as_ref().map(|v| v.iter().map(Jet::value).collect())
    }

    pub fn contact_values(&self) -> Option<Vec<f64>> {
        self.contact.as_ref().map(|v| v.iter().map(Jet::value).collect())
    }

    pub fn riemann(&self) -> Vec<f64> {
        riemann_from_christoffel(&self.christoffel, self.dim)
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.metric[i * d + j].value() * x[i] * y[j];
            }
        }
        s
    }

    pub fn apply_structure(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.structure[i * d + j].value() * x[j]).sum())
            .collect()
    }

    /// `R̄(X, Y) Z` from the jet-derived Riemann tensor.
    pub fn curvature_numeric(&self, riemann: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (mu, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for nu in 0..d {
                for rho in 0..d {
                    for sig in 0..d {
                        s += riemann[((mu * d + nu) * d + rho) * d + sig] * z[nu] * x[rho] * y[sig];
                    }
                }
            }
            *o = s;
        }
        out
    }

    /// Closed-form `R̄(X, Y) Z` of the space form.
    pub fn curvature_oracle(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let jx = self.apply_structure(x);
        let jy = self.apply_structure(y);
        let jz = self.apply_structure(z);
        let g = |a: &[f64], b: &[f64]| self.inner(a, b);
        let mut out = vec![0.0; d];
        match self.constant {
            SpaceFormConstant::Complex { c } => {
                let (gyz, gxz) = (g(y, z), g(x, z));
                let (gjyz, gjxz, gjxy) = (g(&jy, z), g(&jx, z), g(&jx, y));
                for m in 0..d {
                    out[m] = c
                        * (gyz * x[m] - gxz * y[m] + gjyz * jx[m] - gjxz * jy[m]
                            - 2.0 * gjxy * jz[m]);
                }
            }
            SpaceFormConstant::Sasakian { c_tilde } => {
                let xi = self.reeb_values().expect("Sasakian model carries ξ");
                let eta = self.contact_values().expect("Sasakian model carries η");
                let e = |v: &[f64]| v.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>();
                let (ex, ey, ez) = (e(x), e(y), e(z));
                let (gyz, gxz) = (g(y, z), g(x, z));
                let (gjyz, gjxz, gxjy) = (g(&jy, z), g(&jx, z), g(x, &jy));
                let p = (c_tilde + 3.0) / 4.0;
                let q = (c_tilde - 1.0) / 4.0;
                for m in 0..d {
                    out[m] = p * (gyz * x[m] - gxz * y[m])
                        + q * (ex * ez * y[m] - ey * ez * x[m] + gxz * ey * xi[m]
                            - gyz * ex * xi[m]
                            + gjyz * jx[m]
                            - gjxz * jy[m]
                            + 2.0 * gxjy * jz[m]);
                }
            }
        }
        out
    }

    /// Components `g(R̄(e_i, e_j) e_l, e_k)` of the closed-form curvature on a
    /// family of vectors, at `((i m + j) m + k) m + l` for `m = e.len()`.
    /// Equivalent to [`Self::curvature_oracle`] but built from Gram matrices.
    pub fn curvature_frame(&self, e: &[Vec<f64>]) -> Vec<f64> {
        let m = e.len();
        let low: Vec<Vec<f64>> = e.iter().map(|v| self.lower(v)).collect();
        let je: Vec<Vec<f64>> = e.iter().map(|v| self.apply_structure(v)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        // a_ij = g(e_i, e_j), b_ij = g(J e_i, e_j)
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] = dot(&low[j], &e[i]);
                b[i * m + j] = dot(&low[j], &je[i]);
            }
        }
        let g = |i: usize, j: usize| a[i * m + j];
        let w = |i: usize, j: usize| b[i * m + j];
        let mut out = vec![0.0; m * m * m * m];
        match self.constant {
            SpaceFormConstant::Complex { c } => {
                for i in 0..m {
                    for j in 0..m {
                        for k in 0..m {
                            for l in 0..m {
                                out[((i * m + j) * m + k) * m + l] = c
                                    * (g(j, l) * g(i, k) - g(i, l) * g(j, k) + w(j, l) * w(i, k)
                                        - w(i, l) * w(j, k)
                                        - 2.0 * w(i, j) * w(l, k));
                            }
                        }
                    }
                }
            }
            SpaceFormConstant::Sasakian { c_tilde } => {
                let eta = self.contact_values().expect("Sasakian model carries η");
                let et: Vec<f64> = e.iter().map(|v| dot(&eta, v)).collect();
                let p = (c_tilde + 3.0) / 4.0;
                let q = (c_tilde - 1.0) / 4.0;
                for i in 0..m {
                    for j in 0..m {
                        for k in 0..m {
                            for l in 0..m {
                                // g(ξ, e_k) = η(e_k)
                                out[((i * m + j) * m + k) * m + l] = p * (g(j, l) * g(i, k) - g(i, l) * g(j, k))
                                    + q * (et[i] * et[l] * g(j, k) - et[j] * et[l] * g(i, k)
                                        + g(i, l) * et[j] * et[k]
                                        - g(j, l) * et[i] * et[k]
                                        + w(j, l) * w(i, k)
                                        - w(i, l) * w(j, k)
                                        + 2.0 * w(j, i) * w(l, k));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn lower(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|mu| (0..d).map(|nu| self.metric[mu * d + nu].value() * v[nu]).sum())
            .collect()
    }

    /// `∇̄_X V` for a vector field given as order-1 jets.
    pub fn covariant_derivative(&self, field: &[Jet], x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|mu| {
                let mut s: f64 = (0..d).map(|v| field[mu].derivative(&[v]) * x[v]).sum();
                for nu in 0..d {
                    for la in 0..d {
                        s += self.christoffel[(mu * d + nu) * d + la].value() * x[nu] * field[la].value();
                    }
                }
                s
            })
            .collect()
    }
}

/// Kähler fields from the Hermitian matrix
/// `H_jk = scale · (δ_jk/(1 + c|w|²) − c w̄_j w_k/(1 + c|w|²)²)`.
/// `c = 1` is Fubini–Study, `c = −1` the Bergman ball, `c = 0` flat.
fn hermitian_metric(y: &[Jet], n: usize, c: f64, scale: f64) -> Vec<Jet> {
    let dim = 2 * n;
    let like = &y[0];
    let mut metric = vec![like.zero_like(); dim * dim];
    if c == 0.0 {
        for i in 0..dim {
            metric[i * dim + i] = like.constant_like(scale);
        }
        return metric;
    }
    let mut s = like.zero_like();
    for v in &y[..dim] {
        s.add_product(v, v);
    }
    let rho = s.scale(c) + 1.0;
    let inv = rho.recip().expect("chart domain keeps 1 + c|w|² positive");
    let inv2 = &inv * &inv;
    for j in 0..n {
        for k in 0..n {
            // w̄_j w_k = (x_j x_k + y_j y_k) + i (x_j y_k − y_j x_k)
            let (xj, yj, xk, yk) = (&y[2 * j], &y[2 * j + 1], &y[2 * k], &y[2 * k + 1]);
            let mut re_ww = xj * xk;
            re_ww.add_product(yj, yk);
            let mut im_ww = xj * yk;
            im_ww.add_product(&(-yj), xk);
            let mut re = (&re_ww * &inv2).scale(-c * scale);
            if j == k {
                re.add_scaled(&inv, scale);
            }
            let im = (&im_ww * &inv2).scale(-c * scale);
            metric[(2 * j) * dim + 2 * k] = re.clone();
            metric[(2 * j + 1) * dim + 2 * k + 1] = re;
            metric[(2 * j) * dim + 2 * k + 1] = im.clone();
            metric[(2 * j + 1) * dim + 2 * k] = -im;
        }
    }
    metric
}

/// Multiplication by `i` in interleaved coordinates, embedded in a `dim`-square
/// matrix acting on the first `2n` coordinates.
fn standard_complex_structure(like: &Jet, n: usize, dim: usize) -> Vec<Jet> {
    let mut j = vec![like.zero_like(); dim * dim];
    for k in 0..n {
        j[(2 * k + 1) * dim + 2 * k] = like.constant_like(1.0);
        j[(2 * k) * dim + 2 * k + 1] = like.constant_like(-1.0);
    }
    j
}

fn lower(v: &[Jet]) -> Vec<Jet> {
    v.iter()
        .map(|j| j.truncate(j.order().saturating_sub(1)))
        .collect()
}

fn complex_fields(y: &[Jet], n: usize, c: f64, scale: f64) -> StructureJets {
    let metric = hermitian_metric(y, n, c, scale);
    let low = y[0].truncate(y[0].order().saturating_sub(1));
    StructureJets {
        metric,
        structure: standard_complex_structure(&low, n, 2 * n),
        reeb: None,
        contact: None,
    }
}

fn heisenberg_fields(y: &[Jet], n: usize) -> StructureJets {
    let dim = 2 * n + 1;
    let like = &y[0];
    let zd = 2 * n;
    // η = ½ (dz − Σ y_i dx_i)
    let mut eta = vec![like.zero_like(); dim];
    for i in 0..n {
        eta[i] = y[n + i].scale(-0.5);
    }
    eta[zd] = like.constant_like(0.5);
    let mut metric = vec![like.zero_like(); dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            let mut g = &eta[a] * &eta[b];
            if a == b && a < zd {
                g = g + 0.25;
            }
            metric[a * dim + b] = g;
        }
    }
    let low = lower(y);
    let lk = &low[0];
    let mut phi = vec![lk.zero_like(); dim * dim];
    for i in 0..n {
        phi[i * dim + n + i] = lk.constant_like(1.0);
        phi[(n + i) * dim + i] = lk.constant_like(-1.0);
        phi[zd * dim + n + i] = low[n + i].clone();
    }
    let mut xi = vec![lk.zero_like(); dim];
    xi[zd] = lk.constant_like(2.0);
    StructureJets {
        metric,
        structure: phi,
        reeb: Some(xi),
        contact: Some(lower(&eta)),
    }
}

/// D_a-homothetic deformation: `g = a ḡ + a(a − 1) η̄⊗η̄`, `η = a η̄`,
/// `ξ = ξ̄ / a`, `φ` unchanged. `eta` must be known to the metric's order.
fn deform(
    metric: Vec<Jet>,
    eta: Vec<Jet>,
    structure: Vec<Jet>,
    reeb: Vec<Jet>,
    a: f64,
    dim: usize,
) -> StructureJets {
    let metric = if a == 1.0 {
        metric
    } else {
        let mut out = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut g = metric[i * dim + j].scale(a);
                let ee = &eta[i] * &eta[j];
                g.add_scaled(&ee, a * (a - 1.0));
                out.push(g);
            }
        }
        out
    };
    StructureJets {
        metric,
        structure,
        reeb: Some(reeb.iter().map(|x| x.scale(1.0 / a)).collect()),
        contact: Some(eta.iter().map(|e| lower_one(e).scale(a)).collect()),
    }
}

fn lower_one(j: &Jet) -> Jet {
    j.truncate(j.order().saturating_sub(1))
}

/// Real inner product on `ℂⁿ⁺¹ = ℝ²ⁿ⁺²`: `Re Σ ū_k v_k`.
fn real_inner(u: &[ComplexJet], v: &[ComplexJet]) -> Jet {
    let mut s = u[0].re.zero_like();
    for (a, b) in u.iter().zip(v) {
        s.add_product(&a.re, &b.re);
        s.add_product(&a.im, &b.im);
    }
    s
}

/// `Sasakian_S`: structure induced by `𝕊²ⁿ⁺¹ ⊂ ℂⁿ⁺¹` with inward normal
/// `N = −F`, so `ξ = JN`-dual of `η̄ = ⟨·, −iF⟩`, `φ = tangential part of J`.
fn sphere_fields(y: &[Jet], n: usize, a: f64) -> Result<StructureJets> {
    let dim = 2 * n + 1;
    let like = &y[0];
    let mut norm = like.constant_like(1.0);
    for v in &y[..2 * n] {
        norm.add_product(v, v);
    }
    let inv_r = norm.sqrt()?.recip()?;
    let s = &y[2 * n];
    let phase = ComplexJet::new(s.cos(), s.sin()).scale_jet(&inv_r);
    let mut f: Vec<ComplexJet> = (0..n)
        .map(|j| &phase * &ComplexJet::new(y[2 * j].clone(), y[2 * j + 1].clone()))
        .collect();
    f.push(phase);
    // tangent[μ] = ∂_μ F
    let tangent: Vec<Vec<ComplexJet>> = (0..dim)
        .map(|mu| {
            f.iter()
                .map(|c| ComplexJet::new(c.re.partial(mu), c.im.partial(mu)))
                .collect()
        })
        .collect();
    let f_low: Vec<ComplexJet> = f
        .iter()
        .map(|c| ComplexJet::new(lower_one(&c.re), lower_one(&c.im)))
        .collect();
    let minus_i_f: Vec<ComplexJet> = f_low.iter().map(|c| -&c.mul_i()).collect();
    let mut metric = vec![like.zero_like(); dim * dim];
    for mu in 0..dim {
        for nu in mu..dim {
            let g = real_inner(&tangent[mu], &tangent[nu]);
            if nu != mu {
                metric[nu * dim + mu] = g.clone();
            }
            metric[mu * dim + nu] = g;
        }
    }
    let eta: Vec<Jet> = (0..dim).map(|nu| real_inner(&tangent[nu], &minus_i_f)).collect();
    // φ and ξ are only needed one order below the metric.
    let metric_low: Vec<Jet> = metric.iter().map(lower_one).collect();
    let eta_low: Vec<Jet> = eta.iter().map(lower_one).collect();
    let ginv = matrix::inverse(&metric_low, dim)?;
    let xi = matrix::matvec(&ginv, &eta_low, dim, dim);
    let tangent_low: Vec<Vec<ComplexJet>> = tangent
        .iter()
        .map(|t| {
            t.iter()
                .map(|c| ComplexJet::new(lower_one(&c.re), lower_one(&c.im)))
                .collect()
        })
        .collect();
    // ⟨F_κ, i F_μ⟩ at (κ, μ)
    let mut jt = Vec::with_capacity(dim * dim);
    for k in 0..dim {
        for mu in 0..dim {
            let ifm: Vec<ComplexJet> = tangent_low[mu].iter().map(ComplexJet::mul_i).collect();
            jt.push(real_inner(&tangent_low[k], &ifm));
        }
    }
    let phi = matrix::matmul(&ginv, &jt, dim, dim, dim);
    Ok(deform(metric, eta, phi, xi, a, dim))
}

/// `Sasakian_B`: `𝔹ⁿ × ℝ` over the Bergman ball with
/// `η̄ = ω + dt`, `ω = 4 Σ (y_j dx_j − x_j dy_j) / (1 − |w|²)`, `ξ̄ = ∂_t`.
fn ball_fields(y: &[Jet], n: usize, a: f64) -> Result<StructureJets> {
    let dim = 2 * n + 1;
    let td = 2 * n;
    let like = &y[0];
    let base = hermitian_metric(y, n, -1.0, 4.0);
    let mut rho = like.constant_like(1.0);
    for v in &y[..2 * n] {
        rho -= &(v * v);
    }
    let inv = rho.recip()?;
    let mut eta = vec![like.zero_like(); dim];
    for j in 0..n {
        eta[2 * j] = (&y[2 * j + 1] * &inv).scale(4.0);
        eta[2 * j + 1] = (&y[2 * j] * &inv).scale(-4.0);
    }
    eta[td] = like.constant_like(1.0);
    let mut metric = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut g = &eta[i] * &eta[j];
            if i < td && j < td {
                g += &base[i * td + j];
            }
            metric.push(g);
        }
    }
    let eta_low: Vec<Jet> = eta.iter().map(lower_one).collect();
    let lk = &eta_low[0];
    let mut phi = standard_complex_structure(lk, n, dim);
    // φ̄X = J̃X_b − ω(J̃X_b) ∂_t
    for nu in 0..td {
        let mut s = lk.zero_like();
        for mu in 0..td {
            let jm = &phi[mu * dim + nu];
            if jm.value() != 0.0 {
                s.add_scaled(&eta_low[mu], jm.value());
            }
        }
        phi[td * dim + nu] = -s;
    }
    let mut xi = vec![lk.zero_like(); dim];
    xi[td] = lk.constant_like(1.0);
    Ok(deform(metric, eta, phi, xi, a, dim))
}

// ---------------------------------------------------------------------------
// Self-tests

/// Worst residuals of the model validation suite over a set of points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub model: String,
    pub points: usize,
    /// Max of `‖R_numeric − R_oracle‖ / max(1, ‖R_oracle‖)` over unit triples.
    pub curvature_rel_error: f64,
    /// Max first-Bianchi residual relative to the curvature scale.
    pub bianchi: f64,
    /// Named structure identities and their worst residuals.
    pub structure: std::collections::BTreeMap<String, f64>,
}

impl SelfTestReport {
    pub fn worst_structure(&self) -> f64 {
        self.structure.values().fold(0.0, |a, &b| a.max(b))
    }

    pub fn passes(&self, curvature_tol: f64, structure_tol: f64) -> bool {
        self.curvature_rel_error <= curvature_tol
            && self.bianchi <= curvature_tol
            && self.worst_structure() <= structure_tol
    }

    fn record(&mut self, name: &str, v: f64) {
        let e = self.structure.entry(name.to_string()).or_insert(0.0);
        if !(v <= *e) {
            *e = v;
        }
    }
}

fn norm_g(local: &LocalAmbient, v: &[f64]) -> f64 {
    local.inner(v, v).max(0.0).sqrt()
}

fn random_unit<R: Rng>(local: &LocalAmbient, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..local.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = norm_g(local, &v);
    v.iter().map(|x| x / r).collect()
}

impl LocalAmbient {
    /// `(∇̄_X A) Y` for a (1,1)-tensor field given as order-1 jets.
    pub fn covariant_derivative_tensor(&self, a: &[Jet], x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let gam = |m: usize, r: usize, l: usize| self.christoffel[(m * d + r) * d + l].value();
        let mut out = vec![0.0; d];
        for (mu, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for nu in 0..d {
                let mut t = 0.0;
                for rho in 0..d {
                    let mut u = a[mu * d + nu].derivative(&[rho]);
                    for l in 0..d {
                        u += gam(mu, rho, l) * a[l * d + nu].value()
                            - gam(l, rho, nu) * a[mu * d + l].value();
                    }
                    t += u * x[rho];
                }
                s += t * y[nu];
            }
            *o = s;
        }
        out
    }
}

/// Run the model validation suite at `samples` random points.
pub fn self_test<R: Rng>(model: &AmbientModel, samples: usize, rng: &mut R) -> Result<SelfTestReport> {
    let mut report = SelfTestReport {
        model: model.kind().id().to_string(),
        points: samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let p = model.sample_point(rng);
        let local = model.local(&p)?;
        check_point(&local, rng, &mut report);
    }
    Ok(report)
}

fn check_point<R: Rng>(local: &LocalAmbient, rng: &mut R, rep: &mut SelfTestReport) {
    let d = local.dim;
    let riem = local.riemann();
    for _ in 0..4 {
        let x = random_unit(local, rng);
        let y = random_unit(local, rng);
        let z = random_unit(local, rng);
        let num = local.curvature_numeric(&riem, &x, &y, &z);
        let ora = local.curvature_oracle(&x, &y, &z);
        let diff: Vec<f64> = num.iter().zip(&ora).map(|(a, b)| a - b).collect();
        let scale = norm_g(local, &ora).max(1.0);
        rep.curvature_rel_error = rep.curvature_rel_error.max(norm_g(local, &diff) / scale);
        let b1 = local.curvature_numeric(&riem, &y, &z, &x);
        let b2 = local.curvature_numeric(&riem, &z, &x, &y);
        let cyc: Vec<f64> = (0..d).map(|m| num[m] + b1[m] + b2[m]).collect();
        rep.bianchi = rep.bianchi.max(norm_g(local, &cyc) / scale);
    }
    let j = local.structure_values();
    let jj = |v: &[f64]| local.apply_structure(v);
    let basis = |k: usize| {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        e
    };
    let metric_scale = local.metric_values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    match local.constant {
        SpaceFormConstant::Complex { c } => {
            for k in 0..d {
                let e = basis(k);
                let sq = jj(&jj(&e));
                let res: Vec<f64> = sq.iter().zip(&e).map(|(a, b)| a + b).collect();
                rep.record("J_squared", res.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
            let x = random_unit(local, rng);
            let y = random_unit(local, rng);
            rep.record(
                "hermitian",
                (local.inner(&jj(&x), &jj(&y)) - local.inner(&x, &y)).abs(),
            );
            let jx = jj(&x);
            let k = local.inner(&local.curvature_numeric(&riem, &x, &jx, &jx), &x);
            rep.record("holomorphic_sectional", (k - 4.0 * c).abs());
            let z = random_unit(local, rng);
            let nj = local.covariant_derivative_tensor(&local.structure, &x, &z);
            rep.record("parallel_J", norm_g(local, &nj));
        }
        SpaceFormConstant::Sasakian { c_tilde } => {
            let xi = local.reeb_values().expect("ξ");
            let eta = local.contact_values().expect("η");
            let e = |v: &[f64]| v.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>();
            rep.record("phi_xi", norm_g(local, &jj(&xi)));
            rep.record("eta_xi", (e(&xi) - 1.0).abs());
            for k in 0..d {
                let b = basis(k);
                let sq = jj(&jj(&b));
                let ek = e(&b);
                let res: Vec<f64> = (0..d).map(|m| sq[m] + b[m] - ek * xi[m]).collect();
                rep.record("phi_squared", res.iter().fold(0.0, |m, v| m.max(v.abs())));
                rep.record("eta_phi", e(&jj(&b)).abs());
                rep.record("eta_metric", (ek - local.inner(&b, &xi)).abs() / metric_scale);
            }
            let x = random_unit(local, rng);
            let y = random_unit(local, rng);
            rep.record(
                "compatible",
                (local.inner(&jj(&x), &jj(&y)) - local.inner(&x, &y) + e(&x) * e(&y)).abs(),
            );
            // dη(X, Y) = ½(∂_X η(Y) − ∂_Y η(X)) = g(X, φY)
            let eta_j = local.contact.as_ref().expect("η");
            let mut deta = 0.0;
            for a in 0..d {
                for b in 0..d {
                    deta += 0.5 * (eta_j[b].derivative(&[a]) - eta_j[a].derivative(&[b])) * x[a] * y[b];
                }
            }
            rep.record("contact", (deta - local.inner(&x, &jj(&y))).abs());
            let xi_j = local.reeb.as_ref().expect("ξ");
            let nxi = local.covariant_derivative(xi_j, &x);
            let jx = jj(&x);
            let res: Vec<f64> = nxi.iter().zip(&jx).map(|(a, b)| a + b).collect();
            rep.record("nabla_xi", norm_g(local, &res));
            let nphi = local.covariant_derivative_tensor(&local.structure, &x, &y);
            let gxy = local.inner(&x, &y);
            let ey = e(&y);
            let res: Vec<f64> = (0..d).map(|m| nphi[m] - gxy * xi[m] + ey * x[m]).collect();
            rep.record("nabla_phi", norm_g(local, &res));
            let sv = DMatrix::from_row_slice(d, d, &j).singular_values();
            let mut s: Vec<f64> = sv.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let smallest_nonzero = s[d - 2];
            let rank_defect = if smallest_nonzero > 1e-8 { s[d - 1] } else { 1.0 };
            rep.record("phi_rank", rank_defect);
            // φ-sectional curvature on a unit horizontal vector
            let ex = e(&x);
            let mut h: Vec<f64> = (0..d).map(|m| x[m] - ex * xi[m]).collect();
            let r = norm_g(local, &h);
            h.iter_mut().for_each(|v| *v /= r);
            let jh = jj(&h);
            let k = local.inner(&local.curvature_numeric(&riem, &h, &jh, &jh), &h);
            rep.record("phi_sectional", (k - c_tilde).abs());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn frame_curvature_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in ModelKind::ALL {
            let model = AmbientModel::make(kind, 2, Some(0.7)).unwrap();
            let p = model.sample_point(&mut rng);
            let local = model.local(&p).unwrap();
            let e: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..local.dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let frame = local.curvature_frame(&e);
            for i in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        let r = local.curvature_oracle(&e[i], &e[j], &e[l]);
                        for k in 0..3 {
                            let v = local.inner(&r, &e[k]);
                            let f = frame[((i * 3 + j) * 3 + k) * 3 + l];
                            assert!((v - f).abs() < 1e-12 * (1.0 + v.abs()), "{kind:?}: {v} vs {f}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn flat_christoffels_vanish() {
        let m = AmbientModel::make(ModelKind::ComplexEuclidean, 3, None).unwrap();
        let p = m.point(m.sample_point(&mut rng())).unwrap();
        assert!(m.christoffel_at(&p).unwrap().iter().all(|g| *g == 0.0));
        assert!(m.riemann_at(&p).unwrap().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn deformation_constants() {
        let s = AmbientModel::make(ModelKind::SasakianSphere, 2, Some(1.0)).unwrap();
        assert_eq!(s.constant(), SpaceFormConstant::Sasakian { c_tilde: 1.0 });
        let b = AmbientModel::make(ModelKind::SasakianBall, 2, Some(1.0)).unwrap();
        assert_eq!(b.constant(), SpaceFormConstant::Sasakian { c_tilde: -4.0 });
        let r = AmbientModel::make(ModelKind::SasakianEuclidean, 2, None).unwrap();
        assert_eq!(r.constant().gauss_constant(), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(AmbientModel::make(ModelKind::ComplexProjective, 1, None).is_err());
        assert!(AmbientModel::make(ModelKind::SasakianSphere, 2, Some(0.0)).is_err());
        assert!(AmbientModel::make(ModelKind::SasakianBall, 2, Some(-1.0)).is_err());
        let m = AmbientModel::make(ModelKind::ComplexHyperbolic, 2, None).unwrap();
        assert!(m.point(vec![0.9, 0.0, 0.5, 0.0]).is_err());
    }

    #[test]
    fn christoffels_symmetric() {
        for kind in ModelKind::ALL {
            let m = AmbientModel::make(kind, 2, Some(1.7)).unwrap();
            let p = m.point(m.sample_point(&mut rng())).unwrap();
            let g = m.christoffel_at(&p).unwrap();
            let d = m.chart_dim();
            for mu in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        assert_eq!(g[(mu * d + a) * d + b], g[(mu * d + b) * d + a]);
                    }
                }
            }
        }
    }

    #[test]
    fn all_models_pass_self_test() {
        let mut r = rng();
        for kind in ModelKind::ALL {
            for n in [2, 3] {
                for a in [1.0, 0.6, 2.5] {
                    let m = AmbientModel::make(kind, n, Some(a)).unwrap();
                    let rep = self_test(&m, 3, &mut r).unwrap();
                    assert!(rep.passes(1e-8, 1e-8), "{kind} n={n} a={a}: {rep:?}");
                }
            }
        }
    }

    #[test]
    fn heisenberg_oracle_coefficients() {
        let m = AmbientModel::make(ModelKind::SasakianEuclidean, 2, None).unwrap();
        let local = m.local(&[0.3, -0.2, 0.5, 0.1, 0.7]).unwrap();
        // (c̃+3)/4 = 0: horizontal orthogonal non-φ-related planes are flat
        let x = [2.0, 0.0, 0.0, 0.0, 0.0];
        let y = [0.0, 2.0, 0.0, 0.0, 0.0];
        let hx: Vec<f64> = {
            let xi = local.reeb_values().unwrap();
            let e: f64 = x.iter().zip(local.contact_values().unwrap()).map(|(a, b)| a * b).sum();
            x.iter().zip(&xi).map(|(a, b)| a - e * b).collect()
        };
        let hy: Vec<f64> = {
            let xi = local.reeb_values().unwrap();
            let e: f64 = y.iter().zip(local.contact_values().unwrap()).map(|(a, b)| a * b).sum();
            y.iter().zip(&xi).map(|(a, b)| a - e * b).collect()
        };
        let r = local.curvature_oracle(&hx, &hy, &hy);
        assert!(local.inner(&r, &hx).abs() < 1e-12);
    }
}
