//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the normalized Taylor coefficients `c_α = ∂^α f / α!` of a
//! scalar quantity for every multi-index `α` with `|α| ≤ order`. Coefficients are
//! laid out graded by degree, so the jets of a lower order are a prefix of the
//! jets of a higher order with the same number of variables. Because a single
//! coefficient is kept per multi-index, the Hessian and third-derivative blocks
//! are symmetric by construction.
//!
//! All operations are pure; a jet never mutates after it is returned.

mod complex;
mod compose;
pub mod matrix;

pub use complex::ComplexJet;
pub use compose::Composer;

use smallvec::SmallVec;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;
use thiserror::Error;

/// Largest number of variables a jet can carry (chart dimension of the
/// 9-dimensional Sasakian models).
pub const MAX_VARS: usize = 9;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 3;

const NONE: u16 = u16::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("jet order {0} out of range (0..={MAX_ORDER})")]
    OrderOutOfRange(usize),
    #[error("jet variable count {0} out of range (1..={MAX_VARS})")]
    VarsOutOfRange(usize),
    #[error("jet shape mismatch: ({0} vars, order {1}) vs ({2} vars, order {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("division by near-zero jet value {0:e}")]
    DivisionByZero(f64),
    #[error("{0} outside its domain at value {1:e}")]
    Domain(&'static str, f64),
    #[error("singular jet matrix")]
    SingularMatrix,
}

pub type Result<T> = std::result::Result<T, JetError>;

/// Multi-index bookkeeping for one `(num_vars, order)` pair.
pub struct Layout {
    nvars: usize,
    order: usize,
    monomials: Vec<[u8; MAX_VARS]>,
    degree_start: [usize; MAX_ORDER + 2],
    /// `(i, j, k)` with `monomial[i] + monomial[j] = monomial[k]`.
    mul: Vec<(u16, u16, u16)>,
    succ: Vec<[u16; MAX_VARS]>,
    pred: Vec<[u16; MAX_VARS]>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut monomials: Vec<[u8; MAX_VARS]> = Vec::new();
        let mut degree_start = [0usize; MAX_ORDER + 2];
        for d in 0..=order {
            degree_start[d] = monomials.len();
            let mut cur = [0u8; MAX_VARS];
            enumerate_degree(nvars, d, 0, &mut cur, &mut monomials);
        }
        for slot in degree_start.iter_mut().skip(order + 1) {
            *slot = monomials.len();
        }
        let index = |m: &[u8; MAX_VARS]| -> u16 {
            monomials
                .iter()
                .position(|x| x == m)
                .map(|p| p as u16)
                .unwrap_or(NONE)
        };
        let len = monomials.len();
        let mut succ = vec![[NONE; MAX_VARS]; len];
        let mut pred = vec![[NONE; MAX_VARS]; len];
        for (i, m) in monomials.iter().enumerate() {
            for v in 0..nvars {
                let mut up = *m;
                up[v] += 1;
                succ[i][v] = index(&up);
                if m[v] > 0 {
                    let mut down = *m;
                    down[v] -= 1;
                    pred[i][v] = index(&down);
                }
            }
        }
        let mut mul = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                let deg: usize = a.iter().chain(b.iter()).map(|&x| x as usize).sum();
                if deg > order {
                    continue;
                }
                let mut s = [0u8; MAX_VARS];
                for v in 0..MAX_VARS {
                    s[v] = a[v] + b[v];
                }
                mul.push((i as u16, j as u16, index(&s)));
            }
        }
        Layout {
            nvars,
            order,
            monomials,
            degree_start,
            mul,
            succ,
            pred,
        }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of coefficients of total degree at most `d`.
    pub fn prefix_len(&self, d: usize) -> usize {
        self.degree_start[(d + 1).min(self.order + 1)]
    }

    pub fn monomial(&self, i: usize) -> &[u8] {
        &self.monomials[i][..self.nvars]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.monomials[i].iter().map(|&x| x as usize).sum()
    }

    /// Position of a multi-index, if it is within the truncation order.
    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        let mut i = 0usize;
        for (v, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                let s = self.succ[i][v];
                if s == NONE {
                    return None;
                }
                i = s as usize;
            }
        }
        Some(i)
    }

    pub(crate) fn succ(&self, i: usize, v: usize) -> Option<usize> {
        let s = self.succ[i][v];
        (s != NONE).then_some(s as usize)
    }

    pub(crate) fn pred(&self, i: usize, v: usize) -> Option<usize> {
        let s = self.pred[i][v];
        (s != NONE).then_some(s as usize)
    }
}

fn enumerate_degree(
    nvars: usize,
    remaining: usize,
    var: usize,
    cur: &mut [u8; MAX_VARS],
    out: &mut Vec<[u8; MAX_VARS]>,
) {
    if var + 1 == nvars {
        cur[var] = remaining as u8;
        out.push(*cur);
        cur[var] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[var] = k as u8;
        enumerate_degree(nvars, remaining - k, var + 1, cur, out);
    }
    cur[var] = 0;
}

static LAYOUTS: [[OnceLock<Layout>; MAX_ORDER + 1]; MAX_VARS + 1] =
    [const { [const { OnceLock::new() }; MAX_ORDER + 1] }; MAX_VARS + 1];

/// Shared layout for `(nvars, order)`.
pub fn layout(nvars: usize, order: usize) -> Result<&'static Layout> {
    if order > MAX_ORDER {
        return Err(JetError::OrderOutOfRange(order));
    }
    if nvars == 0 || nvars > MAX_VARS {
        return Err(JetError::VarsOutOfRange(nvars));
    }
    Ok(LAYOUTS[nvars][order].get_or_init(|| Layout::build(nvars, order)))
}

type Coeffs = SmallVec<[f64; 35]>;

/// Truncated Taylor expansion of a scalar in `num_vars` variables.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    c: Coeffs,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("num_vars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &&self.c[..])
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.layout, other.layout) && self.c == other.c
    }
}

/// Binary arithmetic selector for [`Jet::arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithKind {
    Add,
    Sub,
    Mul,
    Div,
}

/// Univariate elementary function selector for [`Jet::elementary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementary {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Sqrt,
    Recip,
}

/// One jet per coordinate, each with unit gradient in its own slot.
pub fn seed_variables(base_point: &[f64], order: usize) -> Result<Vec<Jet>> {
    let lay = layout(base_point.len(), order)?;
    Ok(base_point
        .iter()
        .enumerate()
        .map(|(v, &x)| Jet::variable_in(lay, x, v))
        .collect())
}

impl Jet {
    pub fn constant_in(layout: &'static Layout, value: f64) -> Jet {
        let mut c: Coeffs = SmallVec::from_elem(0.0, layout.len());
        c[0] = value;
        Jet { layout, c }
    }

    pub fn zero_in(layout: &'static Layout) -> Jet {
        Jet {
            layout,
            c: SmallVec::from_elem(0.0, layout.len()),
        }
    }

    fn variable_in(layout: &'static Layout, value: f64, var: usize) -> Jet {
        let mut j = Jet::constant_in(layout, value);
        if layout.order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    /// Constant with the same shape as `self`.
    pub fn constant_like(&self, value: f64) -> Jet {
        Jet::constant_in(self.layout, value)
    }

    pub fn zero_like(&self) -> Jet {
        Jet::zero_in(self.layout)
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn num_vars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Normalized Taylor coefficients in layout order.
    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn from_coeffs(layout: &'static Layout, coeffs: &[f64]) -> Jet {
        assert_eq!(coeffs.len(), layout.len(), "coefficient table length");
        Jet {
            layout,
            c: SmallVec::from_slice(coeffs),
        }
    }

    /// Partial derivative `∂^k f / ∂x_{v1} … ∂x_{vk}` at the base point.
    /// Returns 0 beyond the truncation order.
    pub fn derivative(&self, vars: &[usize]) -> f64 {
        let mut alpha = [0u8; MAX_VARS];
        for &v in vars {
            alpha[v] += 1;
        }
        match self.layout.index_of(&alpha[..self.layout.nvars]) {
            Some(i) => {
                let fact: f64 = alpha
                    .iter()
                    .map(|&k| (1..=k as u32).product::<u32>() as f64)
                    .product();
                self.c[i] * fact
            }
            None => 0.0,
        }
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.num_vars()).map(|v| self.derivative(&[v])).collect()
    }

    fn check_shape(&self, other: &Jet) -> Result<()> {
        if std::ptr::eq(self.layout, other.layout) {
            Ok(())
        } else {
            Err(JetError::ShapeMismatch(
                self.layout.nvars,
                self.layout.order,
                other.layout.nvars,
                other.layout.order,
            ))
        }
    }

    pub fn arith(&self, other: &Jet, kind: ArithKind) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(match kind {
            ArithKind::Add => self + other,
            ArithKind::Sub => self - other,
            ArithKind::Mul => self * other,
            ArithKind::Div => return self.try_div(other),
        })
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(self * &other.recip()?)
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }

    /// `self + t·other`, reusing storage.
    pub fn add_scaled(&mut self, other: &Jet, t: f64) {
        debug_assert!(std::ptr::eq(self.layout, other.layout));
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += t * b;
        }
    }

    pub fn scale(&self, t: f64) -> Jet {
        Jet {
            layout: self.layout,
            c: self.c.iter().map(|x| x * t).collect(),
        }
    }

    /// Accumulate `a * b` into `self`.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        assert!(
            std::ptr::eq(self.layout, a.layout) && std::ptr::eq(a.layout, b.layout),
            "jet shape mismatch"
        );
        for &(i, j, k) in &self.layout.mul {
            self.c[k as usize] += a.c[i as usize] * b.c[j as usize];
        }
    }

    /// Compose a univariate function given its derivatives `f, f', f'', f'''`
    /// at the base value.
    fn compose_univariate(&self, d: [f64; 4]) -> Jet {
        let order = self.order();
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = delta.scale(d[1]);
        out.c[0] = d[0];
        if order >= 2 {
            let d2 = &delta * &delta;
            out.add_scaled(&d2, d[2] / 2.0);
            if order >= 3 {
                let d3 = &d2 * &delta;
                out.add_scaled(&d3, d[3] / 6.0);
            }
        }
        out
    }

    pub fn elementary(&self, kind: Elementary) -> Result<Jet> {
        let x = self.value();
        let d = match kind {
            Elementary::Sin => [x.sin(), x.cos(), -x.sin(), -x.cos()],
            Elementary::Cos => [x.cos(), -x.sin(), -x.cos(), x.sin()],
            Elementary::Sinh => [x.sinh(), x.cosh(), x.sinh(), x.cosh()],
            Elementary::Cosh => [x.cosh(), x.sinh(), x.cosh(), x.sinh()],
            Elementary::Exp => {
                let e = x.exp();
                [e; 4]
            }
            Elementary::Sqrt => {
                if !(x > 0.0) {
                    return Err(JetError::Domain("sqrt", x));
                }
                let s = x.sqrt();
                [s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)]
            }
            Elementary::Recip => {
                let scale = self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if x == 0.0 || x.abs() <= f64::EPSILON * scale {
                    return Err(JetError::DivisionByZero(x));
                }
                let r = 1.0 / x;
                [r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]
            }
        };
        Ok(self.compose_univariate(d))
    }

    pub fn sin(&self) -> Jet {
        self.compose_univariate_infallible(Elementary::Sin)
    }

    pub fn cos(&self) -> Jet {
        self.compose_univariate_infallible(Elementary::Cos)
    }

    pub fn sinh(&self) -> Jet {
        self.compose_univariate_infallible(Elementary::Sinh)
    }

    pub fn cosh(&self) -> Jet {
        self.compose_univariate_infallible(Elementary::Cosh)
    }

    pub fn exp(&self) -> Jet {
        self.compose_univariate_infallible(Elementary::Exp)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.elementary(Elementary::Sqrt)
    }

    pub fn recip(&self) -> Result<Jet> {
        self.elementary(Elementary::Recip)
    }

    fn compose_univariate_infallible(&self, kind: Elementary) -> Jet {
        self.elementary(kind).expect("entire function")
    }

    /// Two-argument arctangent `atan2(y, x)` of jets `y = self` and `x`.
    ///
    /// Uses `atan2(y, x) = θ₀ + atan(u)` with
    /// `u = (x₀y − y₀x)/(x₀x + y₀y)`, whose value is exactly zero.
    pub fn atan2(&self, x: &Jet) -> Result<Jet> {
        self.check_shape(x)?;
        let (y0, x0) = (self.value(), x.value());
        let r2 = x0 * x0 + y0 * y0;
        if r2 == 0.0 {
            return Err(JetError::Domain("atan2", 0.0));
        }
        let num = &self.scale(x0) - &x.scale(y0);
        let den = &x.scale(x0) + &self.scale(y0);
        let mut u = num.try_div(&den)?;
        u.c[0] = 0.0;
        let mut out = u.clone();
        if self.order() >= 3 {
            let u3 = &(&u * &u) * &u;
            out.add_scaled(&u3, -1.0 / 3.0);
        }
        out.c[0] = y0.atan2(x0);
        Ok(out)
    }

    /// `∂ self / ∂x_var`, one order lower.
    pub fn partial(&self, var: usize) -> Jet {
        let lay = self.layout;
        assert!(var < lay.nvars && lay.order >= 1, "partial out of range");
        let lower = layout(lay.nvars, lay.order - 1).expect("valid layout");
        let mut c: Coeffs = SmallVec::from_elem(0.0, lower.len());
        for (i, slot) in c.iter_mut().enumerate() {
            let up = lay.succ(i, var).expect("within order");
            *slot = (lay.monomials[i][var] as f64 + 1.0) * self.c[up];
        }
        Jet { layout: lower, c }
    }

    /// Drop every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let lower = layout(self.num_vars(), order).expect("valid layout");
        Jet {
            layout: lower,
            c: SmallVec::from_slice(&self.c[..lower.len()]),
        }
    }

    /// Rebuild a jet of order `k` from its value and the `k−1` jets of its
    /// partial derivatives. The gradient is assumed closed (mixed partials
    /// agree); the first variable present in each multi-index is used.
    pub fn from_gradient(value: f64, grads: &[Jet]) -> Result<Jet> {
        let first = grads.first().ok_or(JetError::VarsOutOfRange(0))?;
        for g in grads {
            first.check_shape(g)?;
        }
        let nvars = first.num_vars();
        if grads.len() != nvars {
            return Err(JetError::VarsOutOfRange(grads.len()));
        }
        let lay = layout(nvars, first.order() + 1)?;
        let mut out = Jet::constant_in(lay, value);
        for i in 1..lay.len() {
            let m = lay.monomials[i];
            let v = (0..nvars).find(|&v| m[v] > 0).expect("nonzero degree");
            let below = lay.pred(i, v).expect("predecessor");
            out.c[i] = grads[v].c[below] / m[v] as f64;
        }
        Ok(out)
    }
}

macro_rules! impl_binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $f(self, rhs: &Jet) -> Jet {
                assert!(std::ptr::eq(self.layout, rhs.layout), "jet shape mismatch");
                Jet {
                    layout: self.layout,
                    c: self.c.iter().zip(rhs.c.iter()).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $f(self, rhs: Jet) -> Jet {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $f(self, rhs: &Jet) -> Jet {
                (&self).$f(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $f(self, rhs: Jet) -> Jet {
                self.$f(&rhs)
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let mut out = self.zero_like();
        out.add_product(self, rhs);
        out
    }
}

impl Mul<Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Mul<&Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        &self * rhs
    }
}

impl Mul<Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self * &rhs
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for x in self.c.iter_mut() {
            *x *= rhs;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.clone() + rhs
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.add_scaled(rhs, -1.0);
    }
}
