//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] holds the Taylor coefficients of a smooth function of up to
//! three variables around a base point, truncated at total degree
//! [`MAX_ORDER`]. Arithmetic on jets is exact arithmetic on the truncated
//! series, so evaluating any smooth expression on seeded jets yields its
//! partial derivatives at the base point without finite differences.
//!
//! Coefficients are stored in graded monomial order and are Taylor
//! coefficients, i.e. `c_m = ∂^m f / m!`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Number of independent variables a jet can carry.
pub const NVARS: usize = 3;
/// Highest total degree retained.
pub const MAX_ORDER: usize = 3;
/// Number of monomials of degree `<= MAX_ORDER` in `NVARS` variables.
pub const NCOEF: usize = 20;

const TERMS_UP_TO: [usize; MAX_ORDER + 2] = [0, 1, 4, 10, 20];

struct Tables {
    exps: [[u8; NVARS]; NCOEF],
    index: [[[u8; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1],
    /// (i, j, k) with monomial_i * monomial_j = monomial_k, sorted by deg(k).
    products: Vec<(u8, u8, u8)>,
    /// `products[..products_up_to[o]]` are the pairs with deg(k) <= o.
    products_up_to: [usize; MAX_ORDER + 1],
    factorial: [f64; NCOEF],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut exps = [[0u8; NVARS]; NCOEF];
        let mut index = [[[u8::MAX; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1];
        let mut n = 0;
        for deg in 0..=MAX_ORDER {
            // lexicographic, first variable highest
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    let c = deg - a - b;
                    exps[n] = [a as u8, b as u8, c as u8];
                    index[a][b][c] = n as u8;
                    n += 1;
                }
            }
        }
        assert_eq!(n, NCOEF);
        let deg = |i: usize| exps[i].iter().map(|&e| e as usize).sum::<usize>();
        let mut products = Vec::new();
        for i in 0..NCOEF {
            for j in 0..NCOEF {
                if deg(i) + deg(j) <= MAX_ORDER {
                    let e = [
                        (exps[i][0] + exps[j][0]) as usize,
                        (exps[i][1] + exps[j][1]) as usize,
                        (exps[i][2] + exps[j][2]) as usize,
                    ];
                    products.push((i as u8, j as u8, index[e[0]][e[1]][e[2]]));
                }
            }
        }
        products.sort_by_key(|&(_, _, k)| deg(k as usize));
        let mut products_up_to = [0; MAX_ORDER + 1];
        for (o, slot) in products_up_to.iter_mut().enumerate() {
            *slot = products.iter().filter(|&&(_, _, k)| deg(k as usize) <= o).count();
        }
        let fact = |k: u8| (1..=k as u32).map(f64::from).product::<f64>();
        let mut factorial = [1.0; NCOEF];
        for (i, f) in factorial.iter_mut().enumerate() {
            *f = exps[i].iter().map(|&e| fact(e)).product();
        }
        Tables { exps, index, products, products_up_to, factorial }
    })
}

fn monomial_index(e: [usize; NVARS]) -> Option<usize> {
    if e.iter().sum::<usize>() > MAX_ORDER {
        return None;
    }
    Some(tables().index[e[0]][e[1]][e[2]] as usize)
}

/// Truncated Taylor polynomial in up to three variables.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; NCOEF],
    order: u8,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = TERMS_UP_TO[self.order as usize + 1];
        f.debug_struct("Jet").field("order", &self.order).field("c", &&self.c[..n]).finish()
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::cst(0.0)
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::cst(v)
    }
}

impl Jet {
    /// An exact constant (valid to every order).
    pub fn cst(v: f64) -> Self {
        let mut c = [0.0; NCOEF];
        c[0] = v;
        Jet { c, order: MAX_ORDER as u8 }
    }

    /// The coordinate function `x_var` expanded around `value`, valid to `order`.
    pub fn var(value: f64, var: usize, order: usize) -> Self {
        assert!(var < NVARS && order <= MAX_ORDER);
        let mut c = [0.0; NCOEF];
        c[0] = value;
        if order >= 1 {
            c[1 + var] = 1.0;
        }
        Jet { c, order: order as u8 }
    }

    /// Seeds a point: coordinate `i` becomes `Jet::var(p[i], i, order)`.
    pub fn seed(p: &[f64], order: usize) -> Vec<Jet> {
        p.iter().enumerate().map(|(i, &v)| Jet::var(v, i, order)).collect()
    }

    /// Builds a jet from partial derivatives: `derivs(e)` returns `∂^e f` at the base point.
    pub fn from_partials(order: usize, mut derivs: impl FnMut([usize; NVARS]) -> f64) -> Self {
        let t = tables();
        let mut c = [0.0; NCOEF];
        for (k, ck) in c.iter_mut().enumerate().take(TERMS_UP_TO[order + 1]) {
            let e = t.exps[k];
            *ck = derivs([e[0] as usize, e[1] as usize, e[2] as usize]) / t.factorial[k];
        }
        Jet { c, order: order as u8 }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    /// Same polynomial, declared valid only up to `order`.
    pub fn truncate(mut self, order: usize) -> Self {
        if order < self.order as usize {
            for v in &mut self.c[TERMS_UP_TO[order + 1]..] {
                *v = 0.0;
            }
            self.order = order as u8;
        }
        self
    }

    /// Partial derivative `∂^e f` at the base point.
    pub fn partial(&self, e: [usize; NVARS]) -> f64 {
        let deg: usize = e.iter().sum();
        assert!(deg <= self.order as usize, "derivative of degree {deg} beyond jet order {}", self.order);
        let k = monomial_index(e).expect("degree checked");
        self.c[k] * tables().factorial[k]
    }

    /// First partial derivative at the base point.
    pub fn d1(&self, i: usize) -> f64 {
        let mut e = [0; NVARS];
        e[i] = 1;
        self.partial(e)
    }

    /// Second partial derivative at the base point.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let mut e = [0; NVARS];
        e[i] += 1;
        e[j] += 1;
        self.partial(e)
    }

    /// The jet of `∂f/∂x_var`, one order lower.
    pub fn d(&self, var: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let t = tables();
        let new_order = self.order as usize - 1;
        let mut c = [0.0; NCOEF];
        for (k, ck) in c.iter_mut().enumerate().take(TERMS_UP_TO[new_order + 1]) {
            let e = t.exps[k];
            let mut up = [e[0] as usize, e[1] as usize, e[2] as usize];
            up[var] += 1;
            let src = monomial_index(up).expect("within order");
            *ck = self.c[src] * up[var] as f64;
        }
        Jet { c, order: new_order as u8 }
    }

    /// True when every derivative coefficient vanishes.
    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Applies a univariate function given its derivatives `f, f', f'', f'''`
    /// at the base value.
    pub fn apply(&self, derivs: [f64; MAX_ORDER + 1]) -> Jet {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Jet::cst(derivs[0]);
        out.order = self.order;
        let mut power = Jet::cst(1.0);
        let mut fact = 1.0;
        for (k, &dk) in derivs.iter().enumerate().skip(1).take(self.order as usize) {
            power *= delta;
            fact *= k as f64;
            if dk != 0.0 {
                out += power * (dk / fact);
            }
        }
        out.order = self.order;
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.apply([e; 4])
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        self.apply([a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a)])
    }

    pub fn powf(&self, p: f64) -> Jet {
        if p == 0.0 {
            return Jet::cst(1.0);
        }
        let a = self.value();
        let is_int = p.fract() == 0.0 && p.abs() < 64.0;
        let pw = |q: f64| if is_int { a.powi(q as i32) } else { a.powf(q) };
        let mut d = [0.0; 4];
        let mut falling = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            if k > 0 {
                falling *= p - (k as f64 - 1.0);
            }
            *dk = if falling == 0.0 { 0.0 } else { falling * pw(p - k as f64) };
        }
        self.apply(d)
    }

    pub fn powi(&self, n: i32) -> Jet {
        self.powf(n as f64)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let r = 1.0 / a;
        self.apply([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.apply([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.apply([c, -s, -c, s])
    }

    pub fn tan(&self) -> Jet {
        self.sin() / self.cos()
    }

    pub fn atan(&self) -> Jet {
        let a = self.value();
        let q = 1.0 + a * a;
        self.apply([a.atan(), 1.0 / q, -2.0 * a / (q * q), (6.0 * a * a - 2.0) / (q * q * q)])
    }

    /// Two-argument arctangent; smooth away from the branch cut on the negative x axis.
    pub fn atan2(y: &Jet, x: &Jet) -> Jet {
        let base = y.value().atan2(x.value());
        // derivatives of atan2 agree with atan(y/x) (x != 0) or -atan(x/y) (y != 0)
        let mut local = if x.value().abs() >= y.value().abs() { (*y / *x).atan() } else { -(*x / *y).atan() };
        local.c[0] = base;
        local
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.apply([s, c, s, c])
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.apply([c, s, c, s])
    }

    pub fn tanh(&self) -> Jet {
        let t = self.value().tanh();
        let s = 1.0 - t * t;
        self.apply([t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)])
    }

    pub fn abs(&self) -> Jet {
        if self.value() < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Substitutes `x_i = base_i + delta_i` where each `delta_i` has zero constant term.
    ///
    /// `self` must be an expansion in the same variables the deltas replace; the
    /// result is an expansion in the deltas' variables.
    pub fn compose(&self, delta: &[Jet]) -> Jet {
        let t = tables();
        let order = delta.iter().fold(self.order as usize, |o, d| o.min(d.order as usize));
        let nv = delta.len().min(NVARS);
        // powers[v][k] = delta_v^k
        let mut powers = [[Jet::cst(1.0); MAX_ORDER + 1]; NVARS];
        for v in 0..nv {
            let mut d = delta[v];
            d.c[0] = 0.0;
            for k in 1..=order {
                powers[v][k] = (powers[v][k - 1] * d).truncate(order);
            }
        }
        let mut out = Jet::cst(0.0);
        for k in 0..TERMS_UP_TO[order + 1] {
            let ck = self.c[k];
            if ck == 0.0 {
                continue;
            }
            let e = t.exps[k];
            if (nv..NVARS).any(|v| e[v] != 0) {
                continue;
            }
            let mut term = Jet::cst(ck);
            for v in 0..nv {
                if e[v] > 0 {
                    term *= powers[v][e[v] as usize];
                }
            }
            out += term;
        }
        out.truncate(order)
    }

    fn combine_order(a: &Jet, b: &Jet) -> u8 {
        a.order.min(b.order)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        self.order = Jet::combine_order(&self, &rhs);
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self.order = Jet::combine_order(&self, &rhs);
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = Jet::combine_order(&self, &rhs);
        let t = tables();
        let mut c = [0.0; NCOEF];
        if rhs.is_constant() {
            for k in 0..NCOEF {
                c[k] = self.c[k] * rhs.c[0];
            }
        } else if self.is_constant() {
            for k in 0..NCOEF {
                c[k] = rhs.c[k] * self.c[0];
            }
        } else {
            for &(i, j, k) in &t.products[..t.products_up_to[order as usize]] {
                c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
            }
        }
        Jet { c, order }.truncate(order as usize)
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        if rhs.is_constant() {
            return self * (1.0 / rhs.c[0]);
        }
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for a in &mut self.c {
            *a = -*a;
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

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for a in &mut self.c {
            *a *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        rhs.recip() * self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Jet {
    fn sum<I: Iterator<Item = Jet>>(iter: I) -> Jet {
        iter.fold(Jet::cst(0.0), |a, b| a + b)
    }
}
