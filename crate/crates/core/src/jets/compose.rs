use super::{layout, Jet, Layout};

/// Substitutes jets into polynomials given by Taylor tables.
///
/// For inner jets `q_μ` (value ignored; the offsets `q_μ − q_μ(0)` are used)
/// and an outer jet `P` in as many variables, [`Composer::apply`] returns
/// `Σ_α c_α Π (q − q(0))^α`. Because the offsets vanish at the base point, the
/// result is the exact Taylor expansion of `P ∘ q` up to
/// `min(order(P), order(q))`.
pub struct Composer {
    outer: &'static Layout,
    result: &'static Layout,
    monomials: Vec<Jet>,
}

impl Composer {
    pub fn new(inner: &[Jet], outer_order: usize) -> Composer {
        assert!(!inner.is_empty(), "composer needs at least one inner jet");
        let inner_layout = inner[0].layout();
        let order = outer_order.min(inner_layout.order());
        let outer = layout(inner.len(), order).expect("valid outer layout");
        let result = layout(inner_layout.num_vars(), order).expect("valid result layout");
        let offsets: Vec<Jet> = inner
            .iter()
            .map(|q| {
                let mut d = q.truncate(order);
                d.add_scaled(&d.constant_like(q.value()), -1.0);
                d
            })
            .collect();
        let mut monomials: Vec<Jet> = Vec::with_capacity(outer.len());
        monomials.push(Jet::constant_in(result, 1.0));
        for i in 1..outer.len() {
            let m = outer.monomial(i);
            let v = m.iter().position(|&k| k > 0).expect("nonzero degree");
            let below = outer.pred(i, v).expect("predecessor");
            let next = &monomials[below] * &offsets[v];
            monomials.push(next);
        }
        Composer {
            outer,
            result,
            monomials,
        }
    }

    pub fn order(&self) -> usize {
        self.result.order()
    }

    /// Evaluate the Taylor polynomial `outer` at the inner jets.
    pub fn apply(&self, outer: &Jet) -> Jet {
        assert_eq!(
            outer.num_vars(),
            self.outer.num_vars(),
            "outer jet variable count"
        );
        let c = outer.coeffs();
        let mut out = Jet::constant_in(self.result, c[0]);
        for (i, m) in self.monomials.iter().enumerate().skip(1) {
            let ci = c[i];
            if ci != 0.0 {
                out.add_scaled(m, ci);
            }
        }
        out
    }
}
