//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] of order `K` in `n` seed variables stores the Taylor coefficients
//! `c_α = ∂^α f / α!` for every multi-index `|α| ≤ K`, so mixed partials are
//! stored once and are symmetric by construction. Order-1 and order-2 jets are
//! the first- and second-order modes; higher orders are used internally when a
//! construction differentiates an already-differentiated quantity.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial layout and product table for jets in `n` variables up to `order`.
///
/// Monomials are enumerated by degree, so the layout of a lower order is a
/// prefix of the layout of a higher one.
pub struct JetSpace {
    n: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    mul: Vec<(u32, u32, u32)>,
    deriv: Vec<Vec<(u32, u32, f64)>>,
    down: OnceLock<Arc<JetSpace>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace(n={}, order={})", self.n, self.order)
    }
}

fn monomials(n: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(n: usize, i: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if i + 1 == n {
            cur[i] = left as u8;
            out.push(cur.clone());
            cur[i] = 0;
            return;
        }
        for k in (0..=left).rev() {
            cur[i] = k as u8;
            rec(n, i + 1, left - k, cur, out);
        }
        cur[i] = 0;
    }
    if n == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return;
    }
    let mut cur = vec![0u8; n];
    rec(n, 0, degree, &mut cur, out);
}

impl JetSpace {
    fn build(n: usize, order: usize) -> JetSpace {
        let mut exps = Vec::new();
        for d in 0..=order {
            monomials(n, d, &mut exps);
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let deg: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&v| v as usize).sum())
            .collect();

        let mut mul = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if deg[i] + deg[j] > order {
                    continue;
                }
                let s: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                mul.push((i as u32, j as u32, index[&s] as u32));
            }
        }

        let mut deriv = vec![Vec::new(); n];
        for (k, dk) in deriv.iter_mut().enumerate() {
            for (t, e) in exps.iter().enumerate() {
                if deg[t] + 1 > order {
                    continue;
                }
                let mut s = e.clone();
                s[k] += 1;
                dk.push((t as u32, index[&s] as u32, s[k] as f64));
            }
        }

        JetSpace {
            n,
            order,
            exps,
            index,
            mul,
            deriv,
            down: OnceLock::new(),
        }
    }

    /// The space one order lower, cached to keep the global lock off hot paths.
    fn lower(&self) -> &Arc<JetSpace> {
        self.down.get_or_init(|| JetSpace::get(self.n, self.order - 1))
    }

    fn at_order(self: &Arc<Self>, order: usize) -> Arc<JetSpace> {
        let mut s = self.clone();
        while s.order > order {
            s = s.lower().clone();
        }
        s
    }

    /// Shared space for `n` variables truncated at `order`.
    pub fn get(n: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
        guard
            .entry((n, order))
            .or_insert_with(|| Arc::new(JetSpace::build(n, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    fn slot(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

/// A scalar together with its Taylor coefficients in the seed variables.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("n", &self.space.n)
            .field("order", &self.space.order)
            .field("c", &self.c)
            .finish()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, b| a * b as f64)
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Jet {
        let mut c = vec![0.0; space.len()];
        c[0] = v;
        Jet {
            space: space.clone(),
            c,
        }
    }

    /// The seed variable `k` at value `v`.
    pub fn variable(space: &Arc<JetSpace>, v: f64, k: usize) -> Jet {
        let mut j = Jet::constant(space, v);
        if space.order >= 1 {
            let mut e = vec![0u8; space.n];
            e[k] = 1;
            let s = space.slot(&e).expect("seed index out of range");
            j.c[s] = 1.0;
        }
        j
    }

    /// A plain value with no seeds.
    pub fn real(v: f64) -> Jet {
        Jet::constant(&JetSpace::get(0, 0), v)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn nvars(&self) -> usize {
        self.space.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// `∂f/∂s_k`, or 0 when the jet is below order 1.
    pub fn first(&self, k: usize) -> f64 {
        self.partial(&[k])
    }

    /// `∂²f/∂s_k∂s_l`, or 0 when the jet is below order 2.
    pub fn second(&self, k: usize, l: usize) -> f64 {
        self.partial(&[k, l])
    }

    /// Mixed partial derivative over the listed seed indices (with repetition).
    pub fn partial(&self, seeds: &[usize]) -> f64 {
        if seeds.len() > self.space.order {
            return 0.0;
        }
        let mut e = vec![0u8; self.space.n];
        for &k in seeds {
            e[k] += 1;
        }
        let scale: f64 = e.iter().map(|&a| factorial(a as usize)).product();
        match self.space.slot(&e) {
            Some(s) => self.c[s] * scale,
            None => 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.space.order {
            return self.clone();
        }
        let space = self.space.at_order(order);
        let c = self.c[..space.len()].to_vec();
        Jet { space, c }
    }

    /// Partial derivative with respect to seed `k`; the result has one order less.
    ///
    /// Panics on an order-0 jet, whose derivatives are unknown.
    pub fn deriv(&self, k: usize) -> Jet {
        assert!(self.space.order >= 1, "cannot differentiate an order-0 jet");
        let space = self.space.lower().clone();
        let mut c = vec![0.0; space.len()];
        for &(t, s, f) in &self.space.deriv[k] {
            c[t as usize] = f * self.c[s as usize];
        }
        Jet { space, c }
    }

    fn zip(&self, other: &Jet) -> (Jet, Jet) {
        assert_eq!(self.space.n, other.space.n, "jets over different seed sets");
        let o = self.space.order.min(other.space.order);
        (self.truncate(o), other.truncate(o))
    }

    fn map_same(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        if Arc::ptr_eq(&self.space, &other.space) {
            let c = self.c.iter().zip(&other.c).map(|(a, b)| f(*a, *b)).collect();
            return Jet {
                space: self.space.clone(),
                c,
            };
        }
        let (a, b) = self.zip(other);
        let c = a.c.iter().zip(&b.c).map(|(x, y)| f(*x, *y)).collect();
        Jet { space: a.space, c }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        if !Arc::ptr_eq(&self.space, &other.space) {
            let (a, b) = self.zip(other);
            return a.mul_jet(&b);
        }
        if self.c.len() == 1 {
            return Jet {
                space: self.space.clone(),
                c: vec![self.c[0] * other.c[0]],
            };
        }
        let mut c = vec![0.0; self.c.len()];
        for &(i, j, t) in &self.space.mul {
            c[t as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet {
            space: self.space.clone(),
            c,
        }
    }

    fn div_jet(&self, other: &Jet) -> Jet {
        let mut q = self.mul_jet(&other.recip());
        q.c[0] = self.c[0] / other.c[0];
        q
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_real(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    /// `Σ_j t[j]·(f − f₀)^j`, i.e. a univariate function composed with this
    /// jet given its Taylor coefficients `t[j] = φ^{(j)}(f₀)/j!`.
    fn compose(&self, t: &[f64]) -> Jet {
        let k = self.space.order;
        if k == 0 || self.c.len() == 1 {
            return Jet::constant(&self.space, t[0]);
        }
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = Jet::constant(&self.space, t[k]);
        for j in (0..k).rev() {
            r = r.mul_jet(&h);
            r.c[0] += t[j];
        }
        r
    }

    pub fn sin(&self) -> Jet {
        let u = self.value();
        let (s, c) = u.sin_cos();
        let t: Vec<f64> = (0..=self.space.order)
            .map(|j| {
                let d = match j % 4 {
                    0 => s,
                    1 => c,
                    2 => -s,
                    _ => -c,
                };
                d / factorial(j)
            })
            .collect();
        self.compose(&t)
    }

    pub fn cos(&self) -> Jet {
        let u = self.value();
        let (s, c) = u.sin_cos();
        let t: Vec<f64> = (0..=self.space.order)
            .map(|j| {
                let d = match j % 4 {
                    0 => c,
                    1 => -s,
                    2 => -c,
                    _ => s,
                };
                d / factorial(j)
            })
            .collect();
        self.compose(&t)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let t: Vec<f64> = (0..=self.space.order).map(|j| e / factorial(j)).collect();
        self.compose(&t)
    }

    /// Natural logarithm; the caller checks the domain.
    pub fn ln(&self) -> Jet {
        let u = self.value();
        let t: Vec<f64> = (0..=self.space.order)
            .map(|j| {
                if j == 0 {
                    u.ln()
                } else {
                    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (j as f64 * u.powi(j as i32))
                }
            })
            .collect();
        self.compose(&t)
    }

    /// `1/f`; the caller checks for a zero value.
    pub fn recip(&self) -> Jet {
        let u = self.value();
        let t: Vec<f64> = (0..=self.space.order)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign / u.powi(j as i32 + 1)
            })
            .collect();
        self.compose(&t)
    }

    /// `f^c` for real `c` via the binomial series; the caller checks the domain.
    pub fn powf(&self, p: f64) -> Jet {
        let u = self.value();
        let mut t = Vec::with_capacity(self.space.order + 1);
        let mut falling = 1.0;
        for j in 0..=self.space.order {
            let base = if j == 0 {
                if p == 0.5 {
                    u.sqrt()
                } else {
                    u.powf(p)
                }
            } else {
                u.powf(p - j as f64)
            };
            t.push(falling * base / factorial(j));
            falling *= p - j as f64;
        }
        self.compose(&t)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    /// Integer power by repeated squaring; exact for polynomials.
    pub fn powi(&self, n: u32) -> Jet {
        let mut result = Jet::constant(&self.space, 1.0);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        self.space.n == other.space.n && self.space.order == other.space.order && self.c == other.c
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.map_same(b, |x, y| x + y));
binop!(Sub, sub, |a, b| a.map_same(b, |x, y| x - y));
binop!(Mul, mul, |a, b| a.mul_jet(b));
binop!(Div, div, |a, b| a.div_jet(b));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
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
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: usize, order: usize, v: f64, k: usize) -> Jet {
        Jet::variable(&JetSpace::get(n, order), v, k)
    }

    #[test]
    fn layout_is_graded_prefix() {
        let lo = JetSpace::get(3, 2);
        let hi = JetSpace::get(3, 4);
        assert_eq!(lo.len(), 10);
        assert_eq!(hi.len(), 35);
        assert_eq!(&hi.exps[..lo.len()], &lo.exps[..]);
    }

    #[test]
    fn bilinear_product() {
        let x = var(2, 2, 3.0, 0);
        let y = var(2, 2, 5.0, 1);
        let f = &x * &y;
        assert_eq!(f.value(), 15.0);
        assert_eq!(f.first(0), 5.0);
        assert_eq!(f.first(1), 3.0);
        assert_eq!(f.second(0, 1), 1.0);
        assert_eq!(f.second(1, 0), 1.0);
        assert_eq!(f.second(0, 0), 0.0);
    }

    #[test]
    fn quadratic_half() {
        let y = var(1, 2, 4.0, 0);
        let f = y.powi(2).scale(0.5);
        assert_eq!((f.value(), f.first(0), f.second(0, 0)), (8.0, 4.0, 1.0));
    }

    #[test]
    fn exp_derivative_is_value() {
        let f = var(1, 1, 1.0, 0).exp();
        assert_eq!(f.first(0), f.value());
    }

    #[test]
    fn sin_cos_high_order() {
        let x = var(1, 5, 0.3, 0);
        let s = x.sin();
        let expected = [0.3f64.sin(), 0.3f64.cos(), -0.3f64.sin(), -0.3f64.cos(), 0.3f64.sin()];
        for (k, e) in expected.iter().enumerate() {
            let seeds = vec![0; k];
            assert!((s.partial(&seeds) - e).abs() < 1e-14);
        }
    }

    #[test]
    fn recip_and_log_series() {
        let x = var(1, 3, 2.0, 0);
        let r = x.recip();
        assert!((r.partial(&[0, 0, 0]) + 6.0 / 16.0).abs() < 1e-15);
        let l = x.ln();
        assert!((l.partial(&[0, 0]) + 0.25).abs() < 1e-15);
        assert!((l.partial(&[0, 0, 0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn deriv_lowers_order() {
        let x = var(2, 3, 1.5, 0);
        let y = var(2, 3, -0.5, 1);
        let f = x.powi(2) * &y;
        let dfx = f.deriv(0);
        assert_eq!(dfx.order(), 2);
        assert_eq!(dfx.value(), 2.0 * 1.5 * -0.5);
        assert_eq!(dfx.first(1), 3.0);
        assert_eq!(dfx.second(0, 1), 2.0);
    }

    #[test]
    fn mixed_orders_truncate() {
        let a = var(1, 3, 2.0, 0);
        let b = var(1, 1, 2.0, 0);
        let p = &a * &b;
        assert_eq!(p.order(), 1);
        assert_eq!(p.first(0), 4.0);
    }

    #[test]
    fn zero_seed_arithmetic_is_real() {
        let a = Jet::real(1.25);
        let b = Jet::real(-3.5);
        assert_eq!((&a * &b).value(), 1.25 * -3.5);
        assert_eq!((&a / &b).value(), 1.25 / -3.5);
        assert_eq!(a.sin().value(), 1.25f64.sin());
    }
}
