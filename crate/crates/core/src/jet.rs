//! Forward-mode differentiation.
//!
//! [`Dual`] carries a value and a gradient, [`Jet2`] adds a packed symmetric
//! Hessian. Both implement [`Scalar`], so expressions can be evaluated over
//! plain reals, first-order jets, second-order jets, or nested jets
//! (`Jet2<Dual>` is used when a Legendre map is given through a Lagrangian).

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use smallvec::SmallVec;

use crate::error::EvalError;

/// Number of gradient entries stored inline before spilling to the heap.
pub const INLINE_VARS: usize = 8;

pub type Grad = SmallVec<[f64; INLINE_VARS]>;

/// Arithmetic needed by the expression evaluator and the field formulas.
///
/// The arithmetic methods are unchecked; domain checks happen in
/// [`jet_arithmetic`] and in the expression evaluator, based on `re()`.
pub trait Scalar: Clone + fmt::Debug + Send + Sync {
    /// Real part (the value with all derivative information dropped).
    fn re(&self) -> f64;
    /// A constant carrying the same derivative shape as `self`.
    fn constant_like(&self, c: f64) -> Self;
    /// True when every derivative component is exactly zero.
    fn is_constant(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn tanh(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn powf(&self, e: f64) -> Self;
}

impl Scalar for f64 {
    fn re(&self) -> f64 {
        *self
    }
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn powi(&self, k: i32) -> Self {
        f64::powi(*self, k)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
}

/// First-order jet: a value and its gradient.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub grad: Grad,
}

impl Dual {
    pub fn constant(re: f64, nvars: usize) -> Self {
        Dual { re, grad: SmallVec::from_elem(0.0, nvars) }
    }

    pub fn variable(re: f64, index: usize, nvars: usize) -> Self {
        let mut d = Dual::constant(re, nvars);
        d.grad[index] = 1.0;
        d
    }

    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    /// Applies `f` with `f(a) = f0`, `f'(a) = f1`.
    fn chain(&self, f0: f64, f1: f64) -> Self {
        Dual { re: f0, grad: self.grad.iter().map(|g| f1 * g).collect() }
    }

    /// Chain rule for `f ∘ φ`, given the value and gradient of `f` at `φ`
    /// and the components of `φ` as jets.
    pub fn compose(value: f64, outer_grad: &[f64], inner: &[Dual]) -> Dual {
        debug_assert_eq!(outer_grad.len(), inner.len());
        let m = inner.first().map_or(0, Dual::nvars);
        let mut grad: Grad = SmallVec::from_elem(0.0, m);
        for (c, phi) in inner.iter().enumerate() {
            let w = outer_grad[c];
            if w != 0.0 {
                for (g, d) in grad.iter_mut().zip(&phi.grad) {
                    *g += w * d;
                }
            }
        }
        Dual { re: value, grad }
    }

    fn zip(&self, rhs: &Dual, f: impl Fn(f64, f64) -> f64) -> Grad {
        debug_assert_eq!(self.grad.len(), rhs.grad.len());
        self.grad.iter().zip(&rhs.grad).map(|(a, b)| f(*a, *b)).collect()
    }
}

impl fmt::Display for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {:?}ε", self.re, self.grad.as_slice())
    }
}

impl Scalar for Dual {
    fn re(&self) -> f64 {
        self.re
    }
    fn constant_like(&self, c: f64) -> Self {
        Dual::constant(c, self.nvars())
    }
    fn is_constant(&self) -> bool {
        self.grad.iter().all(|g| *g == 0.0)
    }
    fn add(&self, rhs: &Self) -> Self {
        Dual { re: self.re + rhs.re, grad: self.zip(rhs, |a, b| a + b) }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Dual { re: self.re - rhs.re, grad: self.zip(rhs, |a, b| a - b) }
    }
    fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self.re, rhs.re);
        Dual { re: a * b, grad: self.zip(rhs, |ga, gb| a * gb + b * ga) }
    }
    fn div(&self, rhs: &Self) -> Self {
        let (a, b) = (self.re, rhs.re);
        let q = a / b;
        Dual { re: q, grad: self.zip(rhs, |ga, gb| (ga - q * gb) / b) }
    }
    fn neg(&self) -> Self {
        self.chain(-self.re, -1.0)
    }
    fn scale(&self, c: f64) -> Self {
        self.chain(self.re * c, c)
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(&self) -> Self {
        self.chain(self.re.ln(), 1.0 / self.re)
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn tanh(&self) -> Self {
        let t = self.re.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn powi(&self, k: i32) -> Self {
        match k {
            0 => self.constant_like(1.0),
            1 => self.clone(),
            _ => self.chain(self.re.powi(k), f64::from(k) * self.re.powi(k - 1)),
        }
    }
    fn powf(&self, e: f64) -> Self {
        self.chain(self.re.powf(e), e * self.re.powf(e - 1.0))
    }
}

macro_rules! dual_binop {
    ($tr:ident, $m:ident, $assign_tr:ident, $assign_m:ident) => {
        impl $tr<&Dual> for &Dual {
            type Output = Dual;
            fn $m(self, rhs: &Dual) -> Dual {
                Scalar::$m(self, rhs)
            }
        }
        impl $tr<Dual> for Dual {
            type Output = Dual;
            fn $m(self, rhs: Dual) -> Dual {
                Scalar::$m(&self, &rhs)
            }
        }
        impl $tr<&Dual> for Dual {
            type Output = Dual;
            fn $m(self, rhs: &Dual) -> Dual {
                Scalar::$m(&self, rhs)
            }
        }
        impl $tr<Dual> for &Dual {
            type Output = Dual;
            fn $m(self, rhs: Dual) -> Dual {
                Scalar::$m(self, &rhs)
            }
        }
        impl $assign_tr<&Dual> for Dual {
            fn $assign_m(&mut self, rhs: &Dual) {
                *self = Scalar::$m(&*self, rhs);
            }
        }
        impl $assign_tr<Dual> for Dual {
            fn $assign_m(&mut self, rhs: Dual) {
                *self = Scalar::$m(&*self, &rhs);
            }
        }
    };
}

dual_binop!(Add, add, AddAssign, add_assign);
dual_binop!(Sub, sub, SubAssign, sub_assign);
dual_binop!(Mul, mul, MulAssign, mul_assign);

impl Div<&Dual> for &Dual {
    type Output = Dual;
    fn div(self, rhs: &Dual) -> Dual {
        Scalar::div(self, rhs)
    }
}

impl Div<f64> for &Dual {
    type Output = Dual;
    fn div(self, rhs: f64) -> Dual {
        self.scale(1.0 / rhs)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    fn div(self, rhs: f64) -> Dual {
        self.scale(1.0 / rhs)
    }
}

impl Mul<f64> for &Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        self.scale(rhs)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(mut self, rhs: f64) -> Dual {
        self.re *= rhs;
        self.grad.iter_mut().for_each(|g| *g *= rhs);
        self
    }
}

impl Mul<&Dual> for f64 {
    type Output = Dual;
    fn mul(self, rhs: &Dual) -> Dual {
        rhs.scale(self)
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Scalar::neg(self)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Scalar::neg(&self)
    }
}

impl Dual {
    /// `self += a * b` without intermediate allocation.
    pub fn add_mul(&mut self, a: &Dual, b: &Dual) {
        self.re += a.re * b.re;
        for ((g, ga), gb) in self.grad.iter_mut().zip(&a.grad).zip(&b.grad) {
            *g += a.re * gb + b.re * ga;
        }
    }

    /// `self += c * a` for a real coefficient.
    pub fn add_scaled(&mut self, c: f64, a: &Dual) {
        self.re += c * a.re;
        for (g, ga) in self.grad.iter_mut().zip(&a.grad) {
            *g += c * ga;
        }
    }
}

/// Second-order jet over `nvars` variables with a packed upper-triangular
/// Hessian, so symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T = f64> {
    pub value: T,
    pub grad: Vec<T>,
    hess: Vec<T>,
}

// Rows 0..i of the upper triangle hold m, m-1, ..., m-i+1 entries.
#[inline]
fn packed(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * i.saturating_sub(1) / 2 + (j - i)
}

impl<T: Scalar> Jet2<T> {
    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    /// A constant jet with the derivative shape of `like`.
    pub fn constant_from(value: T, nvars: usize) -> Self {
        let zero = value.constant_like(0.0);
        Jet2 { grad: vec![zero.clone(); nvars], hess: vec![zero; nvars * (nvars + 1) / 2], value }
    }

    /// Variable `index` with the given value.
    pub fn variable_from(value: T, index: usize, nvars: usize) -> Self {
        let one = value.constant_like(1.0);
        let mut j = Jet2::constant_from(value, nvars);
        j.grad[index] = one;
        j
    }

    /// Builds a jet from a value, gradient and full Hessian (upper triangle used).
    pub fn from_parts(value: T, grad: Vec<T>, hess: impl Fn(usize, usize) -> T) -> Self {
        let m = grad.len();
        let mut h = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                h.push(hess(i, j));
            }
        }
        Jet2 { value, grad, hess: h }
    }

    pub fn hess(&self, i: usize, j: usize) -> &T {
        &self.hess[packed(self.nvars(), i, j)]
    }

    fn unary(&self, f0: T, f1: T, f2: T) -> Self {
        let m = self.nvars();
        let grad: Vec<T> = self.grad.iter().map(|g| f1.mul(g)).collect();
        let mut hess = Vec::with_capacity(self.hess.len());
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                let t = f2.mul(&self.grad[i]).mul(&self.grad[j]).add(&f1.mul(&self.hess[k]));
                hess.push(t);
                k += 1;
            }
        }
        Jet2 { value: f0, grad, hess }
    }

    fn recip(&self) -> Self {
        let a = &self.value;
        let one = a.constant_like(1.0);
        let r = one.div(a);
        let r2 = r.mul(&r);
        let r3 = r2.mul(&r);
        self.unary(r, r2.neg(), r3.scale(2.0))
    }

    fn lin(&self, rhs: &Self, s: f64) -> Self {
        debug_assert_eq!(self.nvars(), rhs.nvars());
        let f = |a: &T, b: &T| if s > 0.0 { a.add(b) } else { a.sub(b) };
        Jet2 {
            value: f(&self.value, &rhs.value),
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| f(a, b)).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| f(a, b)).collect(),
        }
    }

    fn map_all(&self, f: impl Fn(&T) -> T) -> Self {
        Jet2 {
            value: f(&self.value),
            grad: self.grad.iter().map(&f).collect(),
            hess: self.hess.iter().map(&f).collect(),
        }
    }
}

impl Jet2<f64> {
    pub fn constant(value: f64, nvars: usize) -> Self {
        Jet2::constant_from(value, nvars)
    }

    pub fn variable(value: f64, index: usize, nvars: usize) -> Self {
        Jet2::variable_from(value, index, nvars)
    }

    /// Drops the Hessian.
    pub fn to_dual(&self) -> Dual {
        Dual { re: self.value, grad: self.grad.iter().copied().collect() }
    }

    /// The partial derivative along variable `c`, as a first-order jet.
    pub fn partial_dual(&self, c: usize) -> Dual {
        let m = self.nvars();
        Dual { re: self.grad[c], grad: (0..m).map(|a| *self.hess(c, a)).collect() }
    }

    /// Partial along variable `c` pulled back through a map whose Jacobian
    /// has rows `jac[d]` (the gradient of the `d`-th inner component).
    pub fn partial_dual_through(&self, c: usize, inner: &[Dual]) -> Dual {
        let row: Vec<f64> = (0..self.nvars()).map(|d| *self.hess(c, d)).collect();
        Dual::compose(self.grad[c], &row, inner)
    }

    /// Second-order chain rule for `self ∘ φ` where `self` is a jet at `φ(z)`
    /// over the components of `φ`, and `inner[c]` is the jet of `φ_c` at `z`.
    pub fn compose(&self, inner: &[Jet2]) -> Jet2 {
        let mc = self.nvars();
        debug_assert_eq!(mc, inner.len());
        let m = inner.first().map_or(0, Jet2::nvars);
        let mut grad = vec![0.0; m];
        for (c, phi) in inner.iter().enumerate() {
            let w = self.grad[c];
            if w != 0.0 {
                for (g, d) in grad.iter_mut().zip(&phi.grad) {
                    *g += w * d;
                }
            }
        }
        let mut hess = Vec::with_capacity(m * (m + 1) / 2);
        for a in 0..m {
            for b in a..m {
                let mut h = 0.0;
                for c in 0..mc {
                    h += self.grad[c] * inner[c].hess(a, b);
                    for d in 0..mc {
                        let f = *self.hess(c, d);
                        if f != 0.0 {
                            h += f * inner[c].grad[a] * inner[d].grad[b];
                        }
                    }
                }
                hess.push(h);
            }
        }
        Jet2 { value: self.value, grad, hess }
    }
}

impl<T: Scalar> Scalar for Jet2<T> {
    fn re(&self) -> f64 {
        self.value.re()
    }
    fn constant_like(&self, c: f64) -> Self {
        Jet2::constant_from(self.value.constant_like(c), self.nvars())
    }
    fn is_constant(&self) -> bool {
        self.value.is_constant()
            && self.grad.iter().all(|g| g.is_constant() && g.re() == 0.0)
            && self.hess.iter().all(|h| h.is_constant() && h.re() == 0.0)
    }
    fn add(&self, rhs: &Self) -> Self {
        self.lin(rhs, 1.0)
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.lin(rhs, -1.0)
    }
    fn mul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.nvars(), rhs.nvars());
        let (a, b) = (&self.value, &rhs.value);
        let m = self.nvars();
        let grad = (0..m).map(|i| a.mul(&rhs.grad[i]).add(&b.mul(&self.grad[i]))).collect();
        let mut hess = Vec::with_capacity(self.hess.len());
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                let t = a
                    .mul(&rhs.hess[k])
                    .add(&b.mul(&self.hess[k]))
                    .add(&self.grad[i].mul(&rhs.grad[j]))
                    .add(&self.grad[j].mul(&rhs.grad[i]));
                hess.push(t);
                k += 1;
            }
        }
        Jet2 { value: a.mul(b), grad, hess }
    }
    fn div(&self, rhs: &Self) -> Self {
        self.mul(&rhs.recip())
    }
    fn neg(&self) -> Self {
        self.map_all(T::neg)
    }
    fn scale(&self, c: f64) -> Self {
        self.map_all(|t| t.scale(c))
    }
    fn sin(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.unary(s.clone(), c, s.neg())
    }
    fn cos(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.unary(c.clone(), s.neg(), c.neg())
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.unary(e.clone(), e.clone(), e)
    }
    fn ln(&self) -> Self {
        let one = self.value.constant_like(1.0);
        let r = one.div(&self.value);
        self.unary(self.value.ln(), r.clone(), r.mul(&r).neg())
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        let one = self.value.constant_like(1.0);
        let d1 = one.div(&s).scale(0.5);
        let d2 = d1.div(&self.value).scale(-0.5);
        self.unary(s, d1, d2)
    }
    fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let one = t.constant_like(1.0);
        let d1 = one.sub(&t.mul(&t));
        let d2 = d1.mul(&t).scale(-2.0);
        self.unary(t, d1, d2)
    }
    fn powi(&self, k: i32) -> Self {
        match k {
            0 => self.constant_like(1.0),
            1 => self.clone(),
            _ => {
                let a = &self.value;
                let kf = f64::from(k);
                self.unary(a.powi(k), a.powi(k - 1).scale(kf), a.powi(k - 2).scale(kf * (kf - 1.0)))
            }
        }
    }
    fn powf(&self, e: f64) -> Self {
        let a = &self.value;
        self.unary(a.powf(e), a.powf(e - 1.0).scale(e), a.powf(e - 2.0).scale(e * (e - 1.0)))
    }
}

/// Binary operations exposed through [`jet_arithmetic`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Domain-checked binary arithmetic on any [`Scalar`].
///
/// Division by a zero value and powers that are undefined on the reals
/// (a non-integer exponent of a non-positive base, a variable exponent of a
/// non-positive base, zero to a negative power) are reported as errors.
pub fn jet_arithmetic<T: Scalar>(a: &T, b: &T, op: JetOp) -> Result<T, EvalError> {
    match op {
        JetOp::Add => Ok(a.add(b)),
        JetOp::Sub => Ok(a.sub(b)),
        JetOp::Mul => Ok(a.mul(b)),
        JetOp::Div => {
            if b.re() == 0.0 {
                Err(EvalError::DivisionByZero)
            } else {
                Ok(a.div(b))
            }
        }
        JetOp::Pow => checked_pow(a, b),
    }
}

fn checked_pow<T: Scalar>(a: &T, b: &T) -> Result<T, EvalError> {
    let base = a.re();
    if b.is_constant() {
        let e = b.re();
        if e.fract() == 0.0 && e.abs() <= f64::from(i32::MAX) {
            if base == 0.0 && e < 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            return Ok(a.powi(e as i32));
        }
        if base > 0.0 {
            return Ok(a.powf(e));
        }
        return Err(EvalError::Domain { function: "pow", argument: base });
    }
    if base > 0.0 {
        Ok(b.mul(&a.ln()).exp())
    } else {
        Err(EvalError::Domain { function: "pow", argument: base })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn packed_layout_is_dense() {
        let m = 4;
        let mut seen = vec![false; m * (m + 1) / 2];
        for i in 0..m {
            for j in i..m {
                let k = packed(m, i, j);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, packed(m, j, i));
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn product_rule_second_order() {
        // f = x^2 y at (3, 2)
        let x = Jet2::variable(3.0, 0, 2);
        let y = Jet2::variable(2.0, 1, 2);
        let f = x.mul(&x).mul(&y);
        assert_eq!(f.value, 18.0);
        assert_eq!(f.grad, vec![12.0, 9.0]);
        assert_eq!(*f.hess(0, 0), 4.0);
        assert_eq!(*f.hess(0, 1), 6.0);
        assert_eq!(*f.hess(1, 1), 0.0);
    }

    #[test]
    fn elementary_derivatives() {
        let x = Jet2::variable(0.7, 0, 1);
        let s = x.sin();
        assert_relative_eq!(s.grad[0], 0.7f64.cos());
        assert_relative_eq!(*s.hess(0, 0), -0.7f64.sin());
        let t = x.tanh();
        let th = 0.7f64.tanh();
        assert_relative_eq!(*t.hess(0, 0), -2.0 * th * (1.0 - th * th), epsilon = 1e-15);
        let q = x.sqrt();
        assert_relative_eq!(*q.hess(0, 0), -0.25 * 0.7f64.powf(-1.5), epsilon = 1e-15);
        let l = x.ln();
        assert_relative_eq!(*l.hess(0, 0), -1.0 / 0.49, epsilon = 1e-14);
    }

    #[test]
    fn division_matches_quotient_rule() {
        let x = Jet2::variable(1.5, 0, 2);
        let y = Jet2::variable(-0.5, 1, 2);
        let q = x.div(&y);
        assert_relative_eq!(q.grad[0], 1.0 / -0.5);
        assert_relative_eq!(q.grad[1], -1.5 / 0.25);
        assert_relative_eq!(*q.hess(0, 1), -1.0 / 0.25);
        assert_relative_eq!(*q.hess(1, 1), 2.0 * 1.5 / -0.125);
    }

    #[test]
    fn pow_domain_rules() {
        let neg = Jet2::variable(-2.0, 0, 1);
        let two = Jet2::constant(2.0, 1);
        let half = Jet2::constant(0.5, 1);
        let sq = jet_arithmetic(&neg, &two, JetOp::Pow).unwrap();
        assert_eq!(sq.value, 4.0);
        assert_eq!(sq.grad[0], -4.0);
        assert!(jet_arithmetic(&neg, &half, JetOp::Pow).is_err());
        let zero = Jet2::constant(0.0, 1);
        assert!(matches!(
            jet_arithmetic(&zero, &Jet2::constant(-1.0, 1), JetOp::Pow),
            Err(EvalError::DivisionByZero)
        ));
        assert!(jet_arithmetic(&two, &zero, JetOp::Div).is_err());
    }

    #[test]
    fn compose_matches_direct_evaluation() {
        // f(a, b) = a * b, a = sin z0, b = z0 + z1^2
        let z0 = Jet2::variable(0.3, 0, 2);
        let z1 = Jet2::variable(1.1, 1, 2);
        let a = z0.sin();
        let b = z0.add(&z1.mul(&z1));
        let direct = a.mul(&b);
        let fa = Jet2::variable(a.value, 0, 2);
        let fb = Jet2::variable(b.value, 1, 2);
        let f = fa.mul(&fb);
        let composed = f.compose(&[a, b]);
        assert_relative_eq!(composed.value, direct.value);
        for i in 0..2 {
            assert_relative_eq!(composed.grad[i], direct.grad[i], epsilon = 1e-15);
            for j in 0..2 {
                assert_relative_eq!(composed.hess(i, j), direct.hess(i, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn nested_jets_give_mixed_partials() {
        // Jet2<Dual>: outer over y, inner over one extra variable t; f = y0^2 * t
        let t = Dual::variable(2.0, 0, 1);
        let y = Jet2::variable_from(Dual::constant(3.0, 1), 0, 1);
        let tj = Jet2::constant_from(t, 1);
        let f = y.mul(&y).mul(&tj);
        assert_eq!(f.grad[0].re, 12.0);
        assert_eq!(f.grad[0].grad[0], 6.0);
        assert_eq!(f.hess(0, 0).re, 4.0);
    }
}
