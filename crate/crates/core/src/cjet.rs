//! Complex-valued jets, represented as a pair of real jets.

use crate::jet::Jet;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CJet {
    pub re: Jet,
    pub im: Jet,
}

impl CJet {
    pub fn new(re: Jet, im: Jet) -> Self {
        CJet { re, im }
    }

    pub fn real(re: Jet) -> Self {
        CJet { re, im: Jet::cst(0.0) }
    }

    pub fn cst(re: f64, im: f64) -> Self {
        CJet { re: Jet::cst(re), im: Jet::cst(im) }
    }

    /// The identity `z = x + i y` with `x`, `y` seeded as jet variables 0 and 1.
    pub fn z(x: f64, y: f64, order: usize) -> Self {
        CJet { re: Jet::var(x, 0, order), im: Jet::var(y, 1, order) }
    }

    pub fn i() -> Self {
        CJet::cst(0.0, 1.0)
    }

    pub fn conj(&self) -> Self {
        CJet { re: self.re, im: -self.im }
    }

    pub fn norm_sq(&self) -> Jet {
        self.re * self.re + self.im * self.im
    }

    pub fn value(&self) -> (f64, f64) {
        (self.re.value(), self.im.value())
    }

    pub fn scale(&self, s: f64) -> Self {
        CJet { re: self.re * s, im: self.im * s }
    }

    pub fn exp(&self) -> Self {
        let m = self.re.exp();
        CJet { re: m * self.im.cos(), im: m * self.im.sin() }
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        CJet { re: self.norm_sq().ln() * 0.5, im: Jet::atan2(&self.im, &self.re) }
    }

    pub fn sin(&self) -> Self {
        CJet { re: self.re.sin() * self.im.cosh(), im: self.re.cos() * self.im.sinh() }
    }

    pub fn cos(&self) -> Self {
        CJet { re: self.re.cos() * self.im.cosh(), im: -(self.re.sin() * self.im.sinh()) }
    }

    pub fn sinh(&self) -> Self {
        (self.exp() - (-*self).exp()).scale(0.5)
    }

    pub fn cosh(&self) -> Self {
        (self.exp() + (-*self).exp()).scale(0.5)
    }

    pub fn powi(&self, n: i32) -> Self {
        let mut base = if n < 0 { CJet::cst(1.0, 0.0) / *self } else { *self };
        let mut k = n.unsigned_abs();
        let mut acc = CJet::cst(1.0, 0.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    pub fn powc(&self, p: &CJet) -> Self {
        (*p * self.ln()).exp()
    }

    /// Partial derivative with respect to jet variable `var` (one order lower).
    pub fn d(&self, var: usize) -> Self {
        CJet { re: self.re.d(var), im: self.im.d(var) }
    }

    /// Wirtinger `∂/∂z = ½(∂x − i∂y)` for jets seeded by [`CJet::z`].
    pub fn dz(&self) -> Self {
        let dx = self.d(0);
        let dy = self.d(1);
        CJet { re: (dx.re + dy.im) * 0.5, im: (dx.im - dy.re) * 0.5 }
    }

    /// Wirtinger `∂/∂z̄ = ½(∂x + i∂y)`.
    pub fn dzbar(&self) -> Self {
        let dx = self.d(0);
        let dy = self.d(1);
        CJet { re: (dx.re - dy.im) * 0.5, im: (dx.im + dy.re) * 0.5 }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl Add for CJet {
    type Output = CJet;
    fn add(self, o: CJet) -> CJet {
        CJet { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for CJet {
    type Output = CJet;
    fn sub(self, o: CJet) -> CJet {
        CJet { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for CJet {
    type Output = CJet;
    fn mul(self, o: CJet) -> CJet {
        CJet { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

impl Div for CJet {
    type Output = CJet;
    fn div(self, o: CJet) -> CJet {
        let inv = o.norm_sq().recip();
        let num = self * o.conj();
        CJet { re: num.re * inv, im: num.im * inv }
    }
}

impl Neg for CJet {
    type Output = CJet;
    fn neg(self) -> CJet {
        CJet { re: -self.re, im: -self.im }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_is_holomorphic() {
        let z = CJet::z(0.3, -0.4, 2);
        let w = z.exp();
        // ∂/∂z̄ of a holomorphic function vanishes, ∂/∂z equals the derivative
        let dbar = w.dzbar();
        assert!(dbar.re.value().abs() < 1e-14 && dbar.im.value().abs() < 1e-14);
        let dz = w.dz();
        assert!((dz.re.value() - w.re.value()).abs() < 1e-14);
        assert!((dz.im.value() - w.im.value()).abs() < 1e-14);
    }

    #[test]
    fn division_inverts_multiplication() {
        let z = CJet::z(1.2, 0.7, 2);
        let w = CJet::cst(0.5, -2.0) * z;
        let back = w / z;
        assert!((back.re.value() - 0.5).abs() < 1e-14);
        assert!((back.im.value() + 2.0).abs() < 1e-14);
        assert!(back.re.d1(0).abs() < 1e-13);
    }

    #[test]
    fn ln_inverts_exp_near_real_axis() {
        let z = CJet::z(0.2, 0.1, 2);
        let back = z.exp().ln();
        assert!((back.re.value() - 0.2).abs() < 1e-14);
        assert!((back.im.d1(1) - 1.0).abs() < 1e-13);
    }
}
