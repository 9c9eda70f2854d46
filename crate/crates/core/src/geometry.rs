//! Pointwise extrinsic and intrinsic invariants of an isotropic immersion.
//!
//! Everything is assembled from order-3 parameter jets of the immersion and
//! order-2 (metric) / order-1 (connection, structure) jets of the ambient
//! fields, composed along the immersion. Frame quantities use a Gram–Schmidt
//! orthonormal tangent frame `e_i` and the normal frame `J e_i` (complex case)
//! or `φ e_i` plus `ξ` (Sasakian case).

use crate::error::{Error, Result};
use crate::immersions::{Domain, ImmersionSpec, SphereAtlas};
use crate::jets::{matrix, seed_variables, Composer, Jet};
use crate::spaceforms::{christoffel_jets, riemann_from_christoffel, AmbientModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Random planes sampled per node for the sectional-curvature spread.
pub const RANDOM_PLANES: usize = 20;

/// Smooth test function `f = Σ_k w_k exp(−|y − c_k|² / s²)` on the domain's
/// standard embedding (`𝕊ⁿ ⊂ ℝⁿ⁺¹`, or the torus in `ℝ²ⁿ` via `(cos, sin)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpField {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub width: f64,
}

impl BumpField {
    pub fn random(ambient_dim: usize, bumps: usize, seed: u64) -> BumpField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..bumps)
            .map(|_| (0..ambient_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let weights = (0..bumps).map(|_| rng.gen_range(-1.0..1.0)).collect();
        BumpField {
            centers,
            weights,
            width: 0.9,
        }
    }

    fn eval(&self, y: &[Jet]) -> Jet {
        let mut f = y[0].zero_like();
        for (c, w) in self.centers.iter().zip(&self.weights) {
            let mut r2 = y[0].zero_like();
            for (yi, ci) in y.iter().zip(c) {
                let d = yi.clone() - *ci;
                r2.add_product(&d, &d);
            }
            f.add_scaled(&r2.scale(-1.0 / (self.width * self.width)).exp(), *w);
        }
        f
    }
}

/// Per-evaluation options.
#[derive(Debug, Clone, Default)]
pub struct GeometryOptions {
    /// Orthogonal `n × n` matrix applied to the coordinate frame before
    /// Gram–Schmidt.
    pub frame_mix: Option<Vec<f64>>,
    /// Seed for the random plane sample.
    pub plane_seed: u64,
    /// Extra gradient fields `∇f` whose Yano integrands are evaluated.
    pub test_fields: Vec<BumpField>,
}

/// Intrinsic curvature in the orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureData {
    /// `R_ijkl = g(R(e_i, e_j) e_l, e_k)` via the Gauss equation.
    pub riemann: Vec<f64>,
    /// Same tensor from the induced-metric jets.
    pub riemann_intrinsic: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: f64,
    pub sectional_min: f64,
    pub sectional_max: f64,
    /// Sup norm of the Weyl tensor (`n ≥ 4`, else `None`).
    pub weyl_sup: Option<f64>,
}

/// Named structural residuals at one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureChecks {
    /// `ω(e_i, e_j)` (complex) or `max(|η(e_i)|, |g(φ e_i, e_j)|)` (Sasakian).
    pub isotropy: f64,
    pub cubic_symmetry: f64,
    pub codazzi_symmetry: f64,
    /// `h^{ξ}_{ij}` (Sasakian only).
    pub reeb_component: f64,
    /// `h^{(n+1)*}_{ij,k} − h^{k*}_{ij}` (Sasakian only).
    pub reeb_linkage: f64,
    pub mean_symmetry: f64,
    /// Relative difference of the two Riemann routes.
    pub gauss_cross_check: f64,
    /// `‖∇̄h‖² − ‖∇̄^ξ h‖² − ‖h‖²` (Sasakian only).
    pub norm_linkage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGeometry {
    pub n: usize,
    pub sasakian: bool,
    pub gauss_constant: f64,
    /// Induced metric `g_ab` in chart coordinates.
    pub metric: Vec<f64>,
    /// `√det g_ab`.
    pub volume_density: f64,
    /// `e_i = Σ_a E_ia ∂_a`.
    pub frame: Vec<f64>,
    /// `h^{k*}_{ij}` at `(k n + i) n + j`.
    pub h: Vec<f64>,
    /// `h^{l*}_{ij,k}` at `((l n + i) n + j) n + k`.
    pub dh: Vec<f64>,
    /// Sasakian: `h^{(n+1)*}_{ij,k}` at `(i n + j) n + k`.
    pub dh_reeb: Vec<f64>,
    /// `H^{k*}`.
    pub mean: Vec<f64>,
    /// `H^{j*}_{,i}` at `j n + i`.
    pub dmean: Vec<f64>,
    pub h_norm2: f64,
    /// `‖∇̄h‖²` over all normal directions.
    pub grad_h_norm2: f64,
    /// `‖∇̄^ξ h‖²` (Sasakian); equals `grad_h_norm2` otherwise.
    pub grad_h_xi_norm2: f64,
    /// `Σ (H^{j*}_{,i})²`: `‖∇⊥H‖²` (complex) or `‖∇̄^ξ H‖²` (Sasakian).
    pub grad_mean_norm2: f64,
    pub mean_norm2: f64,
    /// `Ric(X, X)` for `X = J H` (or `φ H`).
    pub ric_x: f64,
    pub div_x: f64,
    pub grad_x_norm2: f64,
    pub lie_x_norm2: f64,
    pub yano_integrand: f64,
    /// Yano integrands of the options' gradient test fields.
    pub yano_test: Vec<f64>,
    pub curvature: CurvatureData,
    pub checks: StructureChecks,
}

/// Gram–Schmidt on `v_i = Σ_b Q_ib ∂_b` with respect to `g`; returns `E`
/// with `e_i = Σ_a E_ia ∂_a`.
pub fn gram_schmidt(g: &[f64], n: usize, mix: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut e = vec![0.0; n * n];
    let ip = |u: &[f64], v: &[f64]| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += g[a * n + b] * u[a] * v[b];
            }
        }
        s
    };
    for i in 0..n {
        let mut v: Vec<f64> = match mix {
            Some(q) => q[i * n..(i + 1) * n].to_vec(),
            None => (0..n).map(|a| if a == i { 1.0 } else { 0.0 }).collect(),
        };
        for _ in 0..2 {
            for k in 0..i {
                let ek = &e[k * n..(k + 1) * n];
                let c = ip(&v, ek);
                for a in 0..n {
                    v[a] -= c * ek[a];
                }
            }
        }
        let r2 = ip(&v, &v);
        if !(r2 > 0.0) || !r2.is_finite() {
            return Err(Error::DegenerateImmersion);
        }
        let r = r2.sqrt();
        for a in 0..n {
            e[i * n + a] = v[a] / r;
        }
    }
    Ok(e)
}

fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

/// Domain embedding used by test fields.
fn domain_embedding(spec: &ImmersionSpec, chart: usize, t: &[Jet]) -> Result<Vec<Jet>> {
    match spec.domain() {
        Domain::Sphere => Ok(SphereAtlas::new(spec.n)?.map(chart, t)),
        Domain::Torus => Ok(t.iter().flat_map(|x| [x.cos(), x.sin()]).collect()),
    }
}

/// Compute all pointwise invariants at chart parameters `t`.
pub fn pointwise_geometry(
    model: &AmbientModel,
    spec: &ImmersionSpec,
    chart: usize,
    t: &[f64],
    opts: &GeometryOptions,
) -> Result<PointGeometry> {
    let n = spec.n;
    let big = model.chart_dim();
    let sasakian = model.is_sasakian();
    let tj = seed_variables(t, 3)?;
    let x = spec.eval(chart, &tj)?;
    if x.len() != big {
        return Err(Error::InvalidParameter("immersion and model dimensions differ".into()));
    }
    let p = values(&x);
    let local = model.local(&p)?;

    // Ambient fields along the immersion.
    let comp2 = Composer::new(&x, 2);
    let comp1 = Composer::new(&x, 1);
    let mut gt: Vec<Jet> = Vec::with_capacity(big * big);
    for mu in 0..big {
        for nu in 0..big {
            if nu < mu {
                let s = gt[nu * big + mu].clone();
                gt.push(s);
            } else {
                gt.push(comp2.apply(&local.metric[mu * big + nu]));
            }
        }
    }
    let mut gamma_t: Vec<Jet> = Vec::with_capacity(big * big * big);
    for (idx, c) in local.christoffel.iter().enumerate() {
        let (nu, la) = ((idx / big) % big, idx % big);
        if la < nu {
            let s = gamma_t[idx - nu * big - la + la * big + nu].clone();
            gamma_t.push(s);
        } else {
            gamma_t.push(comp1.apply(c));
        }
    }
    let struct_t: Vec<Jet> = local.structure.iter().map(|c| comp1.apply(c)).collect();

    // Tangent vectors and induced metric.
    let tangents: Vec<Vec<Jet>> = (0..n).map(|a| x.iter().map(|c| c.partial(a)).collect()).collect();
    // gx[b][μ] = Σ_ν G_μν X_b^ν
    let gx: Vec<Vec<Jet>> = tangents
        .iter()
        .map(|xb| {
            (0..big)
                .map(|mu| {
                    let mut s = xb[0].zero_like();
                    for nu in 0..big {
                        s.add_product(&gt[mu * big + nu], &xb[nu]);
                    }
                    s
                })
                .collect()
        })
        .collect();
    let mut g_ab: Vec<Jet> = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            if b < a {
                let s = g_ab[b * n + a].clone();
                g_ab.push(s);
            } else {
                let mut s = tangents[a][0].zero_like();
                for mu in 0..big {
                    s.add_product(&tangents[a][mu], &gx[b][mu]);
                }
                g_ab.push(s);
            }
        }
    }
    let g_val = values(&g_ab);
    let g1: Vec<Jet> = g_ab.iter().map(|j| j.truncate(1)).collect();
    let ginv1 = matrix::inverse(&g1, n).map_err(|_| Error::DegenerateImmersion)?;
    let ginv: Vec<f64> = values(&ginv1);
    let det = nalgebra::DMatrix::from_row_slice(n, n, &g_val).determinant();
    if !(det > 0.0) {
        return Err(Error::DegenerateImmersion);
    }

    // D_a X_b = ∂_a X_b + Γ̄(X_a, X_b), order 1.
    let tan1: Vec<Vec<Jet>> = tangents.iter().map(|v| v.iter().map(|c| c.truncate(1)).collect()).collect();
    let gx1: Vec<Vec<Jet>> = gx.iter().map(|v| v.iter().map(|c| c.truncate(1)).collect()).collect();
    // w[b][μ N + ν] = Σ_λ Γ̄^μ_{νλ} X_b^λ
    let zero1 = tan1[0][0].zero_like();
    let w: Vec<Vec<Jet>> = tan1
        .iter()
        .map(|xb| {
            let mut row = Vec::with_capacity(big * big);
            for mu in 0..big {
                for nu in 0..big {
                    let mut s = zero1.clone();
                    for la in 0..big {
                        let g = &gamma_t[(mu * big + nu) * big + la];
                        if !g.is_zero() {
                            s.add_product(g, &xb[la]);
                        }
                    }
                    row.push(s);
                }
            }
            row
        })
        .collect();
    let mut dx: Vec<Vec<Jet>> = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            if b < a {
                let s = dx[b * n + a].clone();
                dx.push(s);
                continue;
            }
            let mut v: Vec<Jet> = tangents[b].iter().map(|c| c.partial(a)).collect();
            for (mu, vm) in v.iter_mut().enumerate() {
                for nu in 0..big {
                    vm.add_product(&w[b][mu * big + nu], &tan1[a][nu]);
                }
            }
            dx.push(v);
        }
    }
    // Induced Christoffels Γ^d_ab = g^{de} G(X_e, D_a X_b), order 1.
    let mut gdx = vec![tan1[0][0].zero_like(); n * n * n]; // [(e n + a) n + b]
    for e in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut s = tan1[0][0].zero_like();
                for mu in 0..big {
                    s.add_product(&gx1[e][mu], &dx[a * n + b][mu]);
                }
                gdx[(e * n + b) * n + a] = s.clone();
                gdx[(e * n + a) * n + b] = s;
            }
        }
    }
    let mut chr = vec![tan1[0][0].zero_like(); n * n * n]; // [(d n + a) n + b]
    for d in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut s = tan1[0][0].zero_like();
                for e in 0..n {
                    s.add_product(&ginv1[d * n + e], &gdx[(e * n + a) * n + b]);
                }
                chr[(d * n + b) * n + a] = s.clone();
                chr[(d * n + a) * n + b] = s;
            }
        }
    }
    let chr_val: Vec<f64> = values(&chr);
    // Coordinate second fundamental form h_ab = D_a X_b − X_d Γ^d_ab, order 1.
    let mut hc: Vec<Vec<Jet>> = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            if b < a {
                let s = hc[b * n + a].clone();
                hc.push(s);
                continue;
            }
            let mut v = dx[a * n + b].clone();
            for d in 0..n {
                let c = &chr[(d * n + a) * n + b];
                for mu in 0..big {
                    v[mu] -= &(c * &tan1[d][mu]);
                }
            }
            hc.push(v);
        }
    }
    let hc_val: Vec<Vec<f64>> = hc.iter().map(|v| values(v)).collect();
    // (∇̄_c h)_ab = ∂_c h_ab + Γ̄(X_c, h_ab) − Γ^d_ca h_db − Γ^d_cb h_ad (values;
    // its tangential part drops out against normal vectors below).
    let gamma_p: Vec<f64> = values(&local.christoffel);
    let xv: Vec<Vec<f64>> = tangents.iter().map(|v| values(v)).collect();
    let mut dhc = vec![vec![0.0; big]; n * n * n]; // [(a n + b) n + c]
    for a in 0..n {
        for b in a..n {
            let hab = &hc[a * n + b];
            for c in 0..n {
                let mut v: Vec<f64> = hab.iter().map(|j| j.derivative(&[c])).collect();
                for (mu, vm) in v.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for nu in 0..big {
                        let xc = xv[c][nu];
                        if xc == 0.0 {
                            continue;
                        }
                        for la in 0..big {
                            s += gamma_p[(mu * big + nu) * big + la] * xc * hc_val[a * n + b][la];
                        }
                    }
                    *vm += s;
                    for d in 0..n {
                        *vm -= chr_val[(d * n + c) * n + a] * hc_val[d * n + b][mu]
                            + chr_val[(d * n + c) * n + b] * hc_val[a * n + d][mu];
                    }
                }
                dhc[(b * n + a) * n + c] = v.clone();
                dhc[(a * n + b) * n + c] = v;
            }
        }
    }

    // Orthonormal frames.
    let e_mat = gram_schmidt(&g_val, n, opts.frame_mix.as_deref())?;
    let frame_vec: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..big)
                .map(|mu| (0..n).map(|a| e_mat[i * n + a] * xv[a][mu]).sum())
                .collect()
        })
        .collect();
    let structure_p: Vec<f64> = local.structure_values();
    let apply_s = |v: &[f64]| -> Vec<f64> {
        (0..big)
            .map(|mu| (0..big).map(|nu| structure_p[mu * big + nu] * v[nu]).sum())
            .collect()
    };
    let metric_p = local.metric_values();
    let lower = |v: &[f64]| -> Vec<f64> {
        (0..big)
            .map(|mu| (0..big).map(|nu| metric_p[mu * big + nu] * v[nu]).sum())
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let normals: Vec<Vec<f64>> = frame_vec.iter().map(|e| apply_s(e)).collect();
    let normals_low: Vec<Vec<f64>> = normals.iter().map(|v| lower(v)).collect();
    let reeb_p = local.reeb_values();
    let reeb_low = reeb_p.as_ref().map(|v| lower(v));

    // Frame components.
    let to_frame2 = |coord: &dyn Fn(usize, usize) -> f64, i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += e_mat[i * n + a] * e_mat[j * n + b] * coord(a, b);
            }
        }
        s
    };
    let mut h = vec![0.0; n * n * n];
    let mut h_reeb = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                let val = to_frame2(&|a, b| dot(&normals_low[k], &hc_val[a * n + b]), i, j);
                h[(k * n + i) * n + j] = val;
                h[(k * n + j) * n + i] = val;
            }
            if let Some(xi) = &reeb_low {
                let val = to_frame2(&|a, b| dot(xi, &hc_val[a * n + b]), i, j);
                h_reeb[i * n + j] = val;
                h_reeb[j * n + i] = val;
            }
        }
    }
    // Contract ∇̄h with normals first: q[l][(a n + b) n + c].
    let q: Vec<Vec<f64>> = normals_low
        .iter()
        .map(|nl| dhc.iter().map(|v| dot(nl, v)).collect())
        .collect();
    let q_reeb: Option<Vec<f64>> = reeb_low.as_ref().map(|xi| dhc.iter().map(|v| dot(xi, v)).collect());
    let to_frame3 = |arr: &[f64], i: usize, j: usize, k: usize| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            let ea = e_mat[i * n + a];
            for b in 0..n {
                let eab = ea * e_mat[j * n + b];
                for c in 0..n {
                    s += eab * e_mat[k * n + c] * arr[(a * n + b) * n + c];
                }
            }
        }
        s
    };
    let mut dh = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    dh[((l * n + i) * n + j) * n + k] = to_frame3(&q[l], i, j, k);
                }
            }
        }
    }
    let mut dh_reeb = Vec::new();
    if let Some(qr) = &q_reeb {
        dh_reeb = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    dh_reeb[(i * n + j) * n + k] = to_frame3(qr, i, j, k);
                }
            }
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = (0..n).map(|k| (0..n).map(|i| h[(k * n + i) * n + i]).sum::<f64>() / nf).collect();
    let mut dmean = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            dmean[j * n + i] = (0..n).map(|m| dh[((j * n + m) * n + m) * n + i]).sum::<f64>() / nf;
        }
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let h_norm2 = sq(&h) + sq(&h_reeb);
    let grad_h_xi_norm2 = sq(&dh);
    let grad_h_norm2 = grad_h_xi_norm2 + sq(&dh_reeb);
    let grad_mean_norm2 = sq(&dmean);
    let mean_norm2 = sq(&mean);

    // Gauss-route curvature: R_ijkl = R̄_ijkl + Σ_m (h^m_ik h^m_jl − h^m_il h^m_jk).
    let hm = |m: usize, i: usize, j: usize| h[(m * n + i) * n + j];
    let mut riemann = local.curvature_frame(&frame_vec);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += hm(m, i, k) * hm(m, j, l) - hm(m, i, l) * hm(m, j, k);
                    }
                    if sasakian {
                        s += h_reeb[i * n + k] * h_reeb[j * n + l] - h_reeb[i * n + l] * h_reeb[j * n + k];
                    }
                    riemann[((i * n + j) * n + k) * n + l] += s;
                }
            }
        }
    }
    // Intrinsic route from the induced-metric jets.
    let chr_int = christoffel_jets(&g_ab, n)?;
    let r_coord = riemann_from_christoffel(&chr_int, n); // R^a_{bcd}
    let mut r_low = vec![0.0; n * n * n * n]; // R_{a b c d} = g_{ae} R^e_{bcd}
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    r_low[((a * n + b) * n + c) * n + d] =
                        (0..n).map(|e| g_val[a * n + e] * r_coord[((e * n + b) * n + c) * n + d]).sum();
                }
            }
        }
    }
    let mut riemann_intrinsic = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    // g(R(e_i, e_j) e_l, e_k) = R_{k l i j} in coordinates
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            let f = e_mat[k * n + a] * e_mat[l * n + b];
                            if f == 0.0 {
                                continue;
                            }
                            for c in 0..n {
                                for d in 0..n {
                                    s += f * e_mat[i * n + c] * e_mat[j * n + d] * r_low[((a * n + b) * n + c) * n + d];
                                }
                            }
                        }
                    }
                    riemann_intrinsic[((i * n + j) * n + k) * n + l] = s;
                }
            }
        }
    }
    let rid = |i: usize, j: usize, k: usize, l: usize| riemann[((i * n + j) * n + k) * n + l];
    let mut ricci = vec![0.0; n * n];
    for j in 0..n {
        for l in 0..n {
            ricci[j * n + l] = (0..n).map(|i| rid(i, j, i, l)).sum();
        }
    }
    let scalar: f64 = (0..n).map(|j| ricci[j * n + j]).sum();
    let sectional = |v: &[f64], w: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += rid(i, j, k, l) * v[i] * w[j] * v[k] * w[l];
                    }
                }
            }
        }
        s
    };
    let (mut kmin, mut kmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let k = rid(i, j, i, j);
            kmin = kmin.min(k);
            kmax = kmax.max(k);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.plane_seed);
    for _ in 0..RANDOM_PLANES {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = sq(&v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let c = dot(&v, &w);
        w.iter_mut().zip(&v).for_each(|(x, y)| *x -= c * y);
        let nw = sq(&w).sqrt();
        w.iter_mut().for_each(|x| *x /= nw);
        let k = sectional(&v, &w);
        kmin = kmin.min(k);
        kmax = kmax.max(k);
    }
    let weyl_sup = if n >= 4 {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let ric = |a: usize, b: usize| ricci[a * n + b];
        let nn = n as f64;
        let mut sup: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let w = rid(i, j, k, l)
                            - (ric(i, k) * d(j, l) - ric(i, l) * d(j, k) + ric(j, l) * d(i, k) - ric(j, k) * d(i, l))
                                / (nn - 2.0)
                            + scalar * (d(i, k) * d(j, l) - d(i, l) * d(j, k)) / ((nn - 1.0) * (nn - 2.0));
                        sup = sup.max(w.abs());
                    }
                }
            }
        }
        Some(sup)
    } else {
        None
    };

    // Tangent fields and Yano's integrand.
    let to_frame_vec = |xa: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += e_mat[i * n + a] * g_val[a * n + b] * xa[b];
                    }
                }
                s
            })
            .collect()
    };
    let field_terms = |xf: &[Jet]| -> (f64, f64, f64, f64) {
        let xval = values(xf);
        // ∇_c X^a at [a n + c]
        let mut nab = vec![0.0; n * n];
        for a in 0..n {
            for c in 0..n {
                let mut s = xf[a].derivative(&[c]);
                for d in 0..n {
                    s += chr_val[(a * n + c) * n + d] * xval[d];
                }
                nab[a * n + c] = s;
            }
        }
        let div: f64 = (0..n).map(|a| nab[a * n + a]).sum();
        // ‖∇X‖² = g_ab g^{cd} ∇_c X^a ∇_d X^b
        let mut grad2 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        grad2 += g_val[a * n + b] * ginv[c * n + d] * nab[a * n + c] * nab[b * n + d];
                    }
                }
            }
        }
        // (L_X g)_cd = g_de ∇_c X^e + g_ce ∇_d X^e
        let mut lie = vec![0.0; n * n];
        for c in 0..n {
            for d in 0..n {
                lie[c * n + d] = (0..n)
                    .map(|e| g_val[d * n + e] * nab[e * n + c] + g_val[c * n + e] * nab[e * n + d])
                    .sum();
            }
        }
        let mut lie2 = 0.0;
        for c in 0..n {
            for d in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        lie2 += ginv[c * n + a] * ginv[d * n + b] * lie[c * n + d] * lie[a * n + b];
                    }
                }
            }
        }
        let xf_frame = to_frame_vec(&xval);
        let mut ric_xx = 0.0;
        for i in 0..n {
            for j in 0..n {
                ric_xx += ricci[i * n + j] * xf_frame[i] * xf_frame[j];
            }
        }
        (ric_xx, div, grad2, lie2)
    };
    // X = J H (or φ H) as a tangent field: X^a = g^{ab} G(X_b, J H).
    let mut hvec: Vec<Jet> = vec![tan1[0][0].zero_like(); big];
    for a in 0..n {
        for b in 0..n {
            let w = &ginv1[a * n + b];
            for mu in 0..big {
                hvec[mu].add_product(w, &hc[a * n + b][mu]);
            }
        }
    }
    for v in &mut hvec {
        *v = v.scale(1.0 / nf);
    }
    let jh: Vec<Jet> = (0..big)
        .map(|mu| {
            let mut s = hvec[0].zero_like();
            for nu in 0..big {
                s.add_product(&struct_t[mu * big + nu], &hvec[nu]);
            }
            s
        })
        .collect();
    let lowered: Vec<Jet> = (0..n)
        .map(|b| {
            let mut s = jh[0].zero_like();
            for mu in 0..big {
                s.add_product(&gx1[b][mu], &jh[mu]);
            }
            s
        })
        .collect();
    let raise = |cov: &[Jet]| -> Vec<Jet> {
        (0..n)
            .map(|a| {
                let mut s = cov[0].zero_like();
                for b in 0..n {
                    s.add_product(&ginv1[a * n + b], &cov[b]);
                }
                s
            })
            .collect()
    };
    let xfield = raise(&lowered);
    let (ric_x, div_x, grad_x_norm2, lie_x_norm2) = field_terms(&xfield);
    let yano = |r: f64, d: f64, g2: f64, l2: f64| r + 0.5 * l2 - g2 - d * d;
    let yano_integrand = yano(ric_x, div_x, grad_x_norm2, lie_x_norm2);
    let mut yano_test = Vec::with_capacity(opts.test_fields.len());
    if !opts.test_fields.is_empty() {
        let t2: Vec<Jet> = tj.iter().map(|j| j.truncate(2)).collect();
        let y = domain_embedding(spec, chart, &t2)?;
        for field in &opts.test_fields {
            let f = field.eval(&y);
            let df: Vec<Jet> = (0..n).map(|b| f.partial(b)).collect();
            let (r, d, g2, l2) = field_terms(&raise(&df));
            yano_test.push(yano(r, d, g2, l2));
        }
    }

    // Structural checks.
    let mut checks = StructureChecks::default();
    let mut iso: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            iso = iso.max(dot(&normals_low[i], &frame_vec[j]).abs());
        }
        if let Some(eta) = local.contact_values() {
            iso = iso.max(dot(&eta, &frame_vec[i]).abs());
        }
    }
    checks.isotropy = iso;
    let mut cubic: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = h[(k * n + i) * n + j];
                cubic = cubic.max((a - h[(i * n + k) * n + j]).abs()).max((a - h[(j * n + i) * n + k]).abs());
            }
        }
    }
    checks.cubic_symmetry = cubic;
    let mut codazzi: f64 = 0.0;
    let dd = |l: usize, i: usize, j: usize, k: usize| dh[((l * n + i) * n + j) * n + k];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = dd(l, i, j, k);
                    for b in [dd(l, i, k, j), dd(l, j, i, k), dd(i, l, j, k), dd(j, i, l, k), dd(k, i, j, l)] {
                        codazzi = codazzi.max((a - b).abs());
                    }
                }
            }
        }
    }
    checks.codazzi_symmetry = codazzi;
    if sasakian {
        checks.reeb_component = h_reeb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut link: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    link = link.max((dh_reeb[(i * n + j) * n + k] - h[(k * n + i) * n + j]).abs());
                }
            }
        }
        checks.reeb_linkage = link;
        checks.norm_linkage = (grad_h_norm2 - grad_h_xi_norm2 - h_norm2).abs();
    }
    let mut msym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            msym = msym.max((dmean[j * n + i] - dmean[i * n + j]).abs());
        }
    }
    checks.mean_symmetry = msym;
    let rscale = riemann.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    checks.gauss_cross_check = riemann
        .iter()
        .zip(&riemann_intrinsic)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / rscale;

    let curvature = CurvatureData {
        riemann,
        riemann_intrinsic,
        ricci,
        scalar,
        sectional_min: kmin,
        sectional_max: kmax,
        weyl_sup,
    };
    Ok(PointGeometry {
        n,
        sasakian,
        gauss_constant: local.constant.gauss_constant(),
        metric: g_val,
        volume_density: det.sqrt(),
        frame: e_mat,
        h,
        dh,
        dh_reeb,
        mean,
        dmean,
        h_norm2,
        grad_h_norm2,
        grad_h_xi_norm2,
        grad_mean_norm2,
        mean_norm2,
        ric_x,
        div_x,
        grad_x_norm2,
        lie_x_norm2,
        yano_integrand,
        yano_test,
        curvature,
        checks,
    })
}

impl PointGeometry {
    /// `‖∇̄h‖²` entering the integral inequality (`‖∇̄^ξ h‖²` for Sasakian).
    pub fn derivative_norm2(&self) -> f64 {
        if self.sasakian {
            self.grad_h_xi_norm2
        } else {
            self.grad_h_norm2
        }
    }

    /// Integrand of the inequality's right side minus its left side.
    pub fn defect_density(&self) -> f64 {
        let nf = self.n as f64;
        (nf - 1.0) * (nf + 2.0) / (3.0 * nf * nf) * self.derivative_norm2() - self.ric_x
    }

    /// Sup over frame indices of `h^{k*}_{ij} − n/(n+2)(δ_ij H^k + δ_ik H^j + δ_jk H^i)`.
    pub fn whitney_residual(&self) -> f64 {
        let n = self.n;
        let c = n as f64 / (n as f64 + 2.0);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut sup: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let model = c * (d(i, j) * self.mean[k] + d(i, k) * self.mean[j] + d(j, k) * self.mean[i]);
                    sup = sup.max((self.h[(k * n + i) * n + j] - model).abs());
                }
            }
        }
        sup
    }

    /// `|H|² − [(n+2)/(n²(n−1)) R − (n+2)/n · c]`.
    pub fn scalar_relation_residual(&self) -> f64 {
        let nf = self.n as f64;
        self.mean_norm2
            - ((nf + 2.0) / (nf * nf * (nf - 1.0)) * self.curvature.scalar - (nf + 2.0) / nf * self.gauss_constant)
    }

    /// `h^{l*}_{ij,k} − n/(n+2)(H^{l*}_{,i} δ_jk + H^{l*}_{,j} δ_ik + H^{l*}_{,k} δ_ij)`, sup.
    pub fn equality_condition_residual(&self) -> f64 {
        let n = self.n;
        let c = n as f64 / (n as f64 + 2.0);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let dm = |l: usize, i: usize| self.dmean[l * n + i];
        let mut sup: f64 = 0.0;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let model = c * (dm(l, i) * d(j, k) + dm(l, j) * d(i, k) + dm(l, k) * d(i, j));
                        sup = sup.max((self.dh[((l * n + i) * n + j) * n + k] - model).abs());
                    }
                }
            }
        }
        sup
    }

    /// Every pointwise residual and gap consumed by the verification.
    pub fn residuals(&self) -> BTreeMap<&'static str, f64> {
        let nf = self.n as f64;
        let mut m = BTreeMap::new();
        m.insert("whitney_residual", self.whitney_residual());
        m.insert("scalar_relation_residual", self.scalar_relation_residual());
        m.insert("conformal_gap", self.grad_x_norm2 - self.div_x * self.div_x / nf);
        m.insert(
            "derivative_gap",
            self.derivative_norm2() - 3.0 * nf * nf / (nf + 2.0) * self.grad_mean_norm2,
        );
        m.insert("maslov_identity", self.grad_x_norm2 - self.grad_mean_norm2);
        m.insert("lie_identity", self.lie_x_norm2 - 4.0 * self.grad_mean_norm2);
        m.insert("equality_condition_residual", self.equality_condition_residual());
        m.insert("yano_integrand", self.yano_integrand);
        m
    }
}
