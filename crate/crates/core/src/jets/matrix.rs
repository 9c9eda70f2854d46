//! Dense row-major matrices of jets.

use super::{Jet, JetError, Result};

/// Inverse of the `n × n` jet matrix `m` (row-major) by Gauss–Jordan
/// elimination with partial pivoting on base values.
pub fn inverse(m: &[Jet], n: usize) -> Result<Vec<Jet>> {
    assert_eq!(m.len(), n * n, "matrix size");
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| m[0].constant_like(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    let scale = m.iter().fold(0.0f64, |s, x| s.max(x.value().abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .value()
                    .abs()
                    .total_cmp(&a[j * n + col].value().abs())
            })
            .expect("nonempty range");
        if a[piv * n + col].value().abs() <= 1e-300_f64.max(scale * 1e-15) {
            return Err(JetError::SingularMatrix);
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let r = a[col * n + col].recip()?;
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &r;
            inv[col * n + k] = &inv[col * n + k] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col].clone();
            if f.coeffs().iter().all(|&c| c == 0.0) {
                continue;
            }
            for k in 0..n {
                let da = &f * &a[col * n + k];
                a[row * n + k] -= &da;
                let di = &f * &inv[col * n + k];
                inv[row * n + k] -= &di;
            }
        }
    }
    Ok(inv)
}

/// Row-major product of `n × k` and `k × m` jet matrices.
pub fn matmul(a: &[Jet], b: &[Jet], n: usize, k: usize, m: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let mut s = a[0].zero_like();
            for l in 0..k {
                s.add_product(&a[i * k + l], &b[l * m + j]);
            }
            out.push(s);
        }
    }
    out
}

/// Matrix-vector product.
pub fn matvec(a: &[Jet], x: &[Jet], n: usize, m: usize) -> Vec<Jet> {
    (0..n)
        .map(|i| {
            let mut s = x[0].zero_like();
            for j in 0..m {
                s.add_product(&a[i * m + j], &x[j]);
            }
            s
        })
        .collect()
}

/// Bilinear form `xᵀ G y`.
pub fn bilinear(g: &[Jet], x: &[Jet], y: &[Jet]) -> Jet {
    let n = x.len();
    let mut s = x[0].zero_like();
    for i in 0..n {
        let mut row = x[0].zero_like();
        for j in 0..n {
            row.add_product(&g[i * n + j], &y[j]);
        }
        s.add_product(&x[i], &row);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::seed_variables;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let t = seed_variables(&[0.2, 0.7], 2).unwrap();
        let m = vec![
            &t[0].exp() + 1.0,
            &t[0] * &t[1],
            t[1].sin(),
            &t[1].cosh() + 2.0,
        ];
        let inv = inverse(&m, 2).unwrap();
        let id = matmul(&m, &inv, 2, 2, 2);
        for (k, e) in id.iter().enumerate() {
            let target = if k == 0 || k == 3 { 1.0 } else { 0.0 };
            assert!((e.value() - target).abs() < 1e-14);
            assert!(e.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
        }
    }

    #[test]
    fn singular_detected() {
        let t = seed_variables(&[1.0], 1).unwrap();
        let m = vec![t[0].clone(), t[0].clone(), t[0].clone(), t[0].clone()];
        assert!(matches!(inverse(&m, 2), Err(JetError::SingularMatrix)));
    }
}
