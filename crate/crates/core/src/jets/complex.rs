use super::{Jet, JetError, Result};
use std::ops::{Add, Mul, Neg, Sub};

/// Complex number whose real and imaginary parts are jets.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexJet {
    pub re: Jet,
    pub im: Jet,
}

impl ComplexJet {
    pub fn new(re: Jet, im: Jet) -> ComplexJet {
        ComplexJet { re, im }
    }

    pub fn from_real(re: Jet) -> ComplexJet {
        let im = re.zero_like();
        ComplexJet { re, im }
    }

    /// Constant `a + ib` shaped like `like`.
    pub fn constant(like: &Jet, a: f64, b: f64) -> ComplexJet {
        ComplexJet {
            re: like.constant_like(a),
            im: like.constant_like(b),
        }
    }

    pub fn conj(&self) -> ComplexJet {
        ComplexJet {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> ComplexJet {
        ComplexJet {
            re: -&self.im,
            im: self.re.clone(),
        }
    }

    pub fn scale(&self, t: f64) -> ComplexJet {
        ComplexJet {
            re: self.re.scale(t),
            im: self.im.scale(t),
        }
    }

    pub fn scale_jet(&self, t: &Jet) -> ComplexJet {
        ComplexJet {
            re: &self.re * t,
            im: &self.im * t,
        }
    }

    pub fn norm_sqr(&self) -> Jet {
        let mut out = &self.re * &self.re;
        out.add_product(&self.im, &self.im);
        out
    }

    pub fn value(&self) -> (f64, f64) {
        (self.re.value(), self.im.value())
    }

    pub fn abs_value(&self) -> f64 {
        self.re.value().hypot(self.im.value())
    }

    /// Complex division; `|rhs|²` must be bounded away from zero.
    pub fn try_div(&self, rhs: &ComplexJet) -> Result<ComplexJet> {
        let den = rhs.norm_sqr();
        let scale = rhs.abs_value().max(1e-300);
        if den.value() <= (f64::EPSILON * scale).powi(2) {
            return Err(JetError::DivisionByZero(den.value()));
        }
        let inv = den.recip()?;
        let num = self * &rhs.conj();
        Ok(num.scale_jet(&inv))
    }

    pub fn try_recip(&self) -> Result<ComplexJet> {
        let one = ComplexJet::constant(&self.re, 1.0, 0.0);
        one.try_div(self)
    }
}

impl Add<&ComplexJet> for &ComplexJet {
    type Output = ComplexJet;
    fn add(self, rhs: &ComplexJet) -> ComplexJet {
        ComplexJet {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }
}

impl Sub<&ComplexJet> for &ComplexJet {
    type Output = ComplexJet;
    fn sub(self, rhs: &ComplexJet) -> ComplexJet {
        ComplexJet {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }
}

impl Mul<&ComplexJet> for &ComplexJet {
    type Output = ComplexJet;
    fn mul(self, rhs: &ComplexJet) -> ComplexJet {
        let mut re = &self.re * &rhs.re;
        re.add_product(&(-&self.im), &rhs.im);
        let mut im = &self.re * &rhs.im;
        im.add_product(&self.im, &rhs.re);
        ComplexJet { re, im }
    }
}

impl Neg for &ComplexJet {
    type Output = ComplexJet;
    fn neg(self) -> ComplexJet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::seed_variables;

    #[test]
    fn division_roundtrip() {
        let v = seed_variables(&[0.3, -0.2], 3).unwrap();
        let a = ComplexJet::new(v[0].sin(), v[1].exp());
        let b = ComplexJet::new(v[1].cosh(), &v[0] * &v[1]);
        let q = a.try_div(&b).unwrap();
        let back = &q * &b;
        for (x, y) in back.re.coeffs().iter().zip(a.re.coeffs()) {
            assert!((x - y).abs() < 1e-13);
        }
        for (x, y) in back.im.coeffs().iter().zip(a.im.coeffs()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_denominator_rejected() {
        let v = seed_variables(&[0.0, 0.0], 2).unwrap();
        let z = ComplexJet::new(v[0].clone(), v[1].clone());
        let one = ComplexJet::constant(&v[0], 1.0, 0.0);
        assert!(one.try_div(&z).is_err());
    }
}
