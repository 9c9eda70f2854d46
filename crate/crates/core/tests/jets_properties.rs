use proptest::prelude::*;
use whitney_core::jets::{layout, matrix, seed_variables, Composer, Jet};

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

/// `Σ_α c_α h^α`: the Taylor polynomial evaluated at offset `h`.
fn taylor_at(j: &Jet, h: &[f64]) -> f64 {
    let lay = j.layout();
    (0..lay.len())
        .map(|i| {
            let m: f64 = lay
                .monomial(i)
                .iter()
                .zip(h)
                .map(|(&k, x)| x.powi(k as i32))
                .product();
            j.coeffs()[i] * m
        })
        .sum()
}

fn cubic(c: &[f64], x: f64, y: f64, z: f64) -> f64 {
    c[0] + c[1] * x * y + c[2] * x * x * z + c[3] * y * y * y + c[4] * x * y * z + c[5] * z
}

fn cubic_jet(c: &[f64], v: &[Jet]) -> Jet {
    let (x, y, z) = (&v[0], &v[1], &v[2]);
    let mut out = v[0].constant_like(c[0]);
    out.add_scaled(&(x * y), c[1]);
    out.add_scaled(&(&(x * x) * z), c[2]);
    out.add_scaled(&(&(y * y) * y), c[3]);
    out.add_scaled(&(&(x * y) * z), c[4]);
    out.add_scaled(z, c[5]);
    out
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, n)
}

fn random_jet(nvars: usize, order: usize) -> impl Strategy<Value = Jet> {
    let lay = layout(nvars, order).unwrap();
    prop::collection::vec(-1.0f64..1.0, lay.len()).prop_map(move |c| Jet::from_coeffs(lay, &c))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cubic_taylor_polynomial_is_exact(c in prop::collection::vec(-2.0f64..2.0, 6), b in point(3), h in point(3)) {
        let v = seed_variables(&b, 3).unwrap();
        let j = cubic_jet(&c, &v);
        let want = cubic(&c, b[0] + h[0], b[1] + h[1], b[2] + h[2]);
        prop_assert!((taylor_at(&j, &h) - want).abs() < 1e-11 * (1.0 + want.abs()));
    }

    #[test]
    fn ring_laws(a in random_jet(3, 3), b in random_jet(3, 3), c in random_jet(3, 3)) {
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-13));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-13));
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-15));
        let mut acc = a.clone();
        acc.add_product(&b, &c);
        prop_assert!(close(&acc, &(&a + &(&b * &c)), 1e-14));
    }

    #[test]
    fn elementary_identities(a in random_jet(4, 3)) {
        let one = a.constant_like(1.0);
        let s = a.sin();
        let co = a.cos();
        prop_assert!(close(&(&(&s * &s) + &(&co * &co)), &one, 1e-13));
        let ch = a.cosh();
        let sh = a.sinh();
        prop_assert!(close(&(&(&ch * &ch) - &(&sh * &sh)), &one, 1e-12));
        let e = a.exp();
        let em = (-&a).exp();
        prop_assert!(close(&(&e * &em), &one, 1e-12));
    }

    #[test]
    fn reciprocal_and_root(a in random_jet(3, 3)) {
        let shifted = &a + 3.0;
        let one = a.constant_like(1.0);
        prop_assert!(close(&(&shifted.recip().unwrap() * &shifted), &one, 1e-13));
        let r = shifted.sqrt().unwrap();
        prop_assert!(close(&(&r * &r), &shifted, 1e-13));
        prop_assert!(close(&shifted.try_div(&shifted).unwrap(), &one, 1e-13));
    }

    #[test]
    fn leibniz_rule(a in random_jet(2, 3), b in random_jet(2, 3)) {
        let p = &a * &b;
        for v in 0..2 {
            let lhs = p.partial(v);
            let rhs = &(&a.partial(v) * &b.truncate(2)) + &(&a.truncate(2) * &b.partial(v));
            prop_assert!(close(&lhs, &rhs, 1e-13));
        }
    }

    #[test]
    fn composition_matches_direct_evaluation(b in point(2), order in 1usize..=3) {
        // Inner map t ↦ y(t) into ℝ³, outer function F(y).
        let t = seed_variables(&b, 3).unwrap();
        let y = vec![t[0].sin(), &t[0] * &t[1], (&t[1] * 0.5).exp()];
        let f = |v: &[Jet]| &(&v[0] * &v[1].cos()) + &(&v[2] * &v[2]).sin();
        let direct = f(&y);
        let p: Vec<f64> = y.iter().map(Jet::value).collect();
        let outer = f(&seed_variables(&p, order).unwrap());
        let composed = Composer::new(&y, order).apply(&outer);
        let keep = direct.truncate(order);
        prop_assert!(close(&composed, &keep, 1e-12));
    }

    #[test]
    fn matrix_inverse_is_exact_to_order(entries in prop::collection::vec(random_jet(2, 2), 9)) {
        let mut m = entries;
        for i in 0..3 {
            m[i * 3 + i] = &m[i * 3 + i] + 4.0;
        }
        let inv = matrix::inverse(&m, 3).unwrap();
        let prod = matrix::matmul(&inv, &m, 3, 3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let want = m[0].constant_like(if i == j { 1.0 } else { 0.0 });
                prop_assert!(close(&prod[i * 3 + j], &want, 1e-12));
            }
        }
    }

    #[test]
    fn derivatives_match_closed_form(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        // f = exp(x) sin(y): every mixed partial is exp(x) times ±sin/cos(y).
        let v = seed_variables(&[x, y], 3).unwrap();
        let f = &v[0].exp() * &v[1].sin();
        let (e, s, c) = (x.exp(), y.sin(), y.cos());
        let tol = 1e-13;
        prop_assert!((f.derivative(&[0, 0, 1]) - e * c).abs() < tol);
        prop_assert!((f.derivative(&[1, 1, 0]) + e * s).abs() < tol);
        prop_assert!((f.derivative(&[1, 1, 1]) + e * c).abs() < tol);
        prop_assert!((f.derivative(&[0, 1]) - e * c).abs() < tol);
    }
}

#[test]
fn mismatched_shapes_are_errors() {
    let a = seed_variables(&[0.1, 0.2], 2).unwrap();
    let b = seed_variables(&[0.1, 0.2, 0.3], 2).unwrap();
    assert!(a[0].arith(&b[0], whitney_core::jets::ArithKind::Mul).is_err());
    assert!(a[0].try_div(&a[0].zero_like()).is_err());
}
