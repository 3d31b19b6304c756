//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f / α!` of a function
//! of `dim` variables for every multi-index `|α| ≤ order`. Monomials are
//! enumerated by degree and then by sorted variable list, so a jet of lower
//! order is a coefficient prefix of a jet of higher order with the same
//! dimension. Multiplication is truncated polynomial multiplication driven by
//! a precomputed table per `(dim, order)`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use thiserror::Error;

pub const MAX_DIM: usize = 16;
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet dimension {0} is outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("jet order {0} is outside 1..={MAX_ORDER}")]
    Order(usize),
    #[error("variable index {index} is out of range for dimension {dim}")]
    Variable { index: usize, dim: usize },
    #[error(
        "jets of shape (dim {lhs_dim}, order {lhs_order}) and (dim {rhs_dim}, order {rhs_order}) cannot be combined"
    )]
    Mismatch { lhs_dim: usize, lhs_order: usize, rhs_dim: usize, rhs_order: usize },
    #[error("{op} is singular at {value}")]
    Singularity { op: &'static str, value: f64 },
    #[error("{op} is undefined at {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("cannot differentiate a jet of order 0")]
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
}

struct Table {
    dim: usize,
    order: usize,
    len: usize,
    vars: Vec<Vec<usize>>,
    multiplicity: Vec<f64>,
    // index of the monomial `x_i`, `x_i x_j`, `x_i x_j x_k` in dense (unsorted) layout
    first: Vec<usize>,
    second: Vec<usize>,
    third: Vec<usize>,
    products: Vec<(u32, u32, u32)>,
    // raise[i][β] = index of β + e_i, defined for |β| < order
    raise: Vec<Vec<usize>>,
    prefix_len: [usize; MAX_ORDER + 1],
}

impl Table {
    fn build(dim: usize, order: usize) -> Table {
        let mut vars: Vec<Vec<usize>> = vec![Vec::new()];
        let mut prefix_len = [0usize; MAX_ORDER + 1];
        prefix_len[0] = 1;
        let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
        for deg in 1..=order {
            let mut next = Vec::new();
            for mono in &layer {
                let start = mono.last().copied().unwrap_or(0);
                for v in start..dim {
                    let mut m = mono.clone();
                    m.push(v);
                    next.push(m);
                }
            }
            vars.extend(next.iter().cloned());
            prefix_len[deg] = vars.len();
            layer = next;
        }
        for deg in order + 1..=MAX_ORDER {
            prefix_len[deg] = vars.len();
        }
        let len = vars.len();
        let index: HashMap<Vec<usize>, usize> = vars.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let multiplicity = vars
            .iter()
            .map(|m| {
                let mut f = 1.0;
                let mut run = 1.0;
                for w in 1..m.len() {
                    if m[w] == m[w - 1] {
                        run += 1.0;
                        f *= run;
                    } else {
                        run = 1.0;
                    }
                }
                f
            })
            .collect();
        let lookup = |mut m: Vec<usize>| -> usize {
            m.sort_unstable();
            index[&m]
        };
        let first = if order >= 1 { (0..dim).map(|i| lookup(vec![i])).collect() } else { Vec::new() };
        let mut second = Vec::new();
        if order >= 2 {
            for i in 0..dim {
                for j in 0..dim {
                    second.push(lookup(vec![i, j]));
                }
            }
        }
        let mut third = Vec::new();
        if order >= 3 {
            for i in 0..dim {
                for j in 0..dim {
                    for k in 0..dim {
                        third.push(lookup(vec![i, j, k]));
                    }
                }
            }
        }
        let mut products = Vec::new();
        for (a, ma) in vars.iter().enumerate() {
            for (b, mb) in vars.iter().enumerate() {
                if ma.len() + mb.len() > order {
                    continue;
                }
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                products.push((a as u32, b as u32, lookup(m) as u32));
            }
        }
        let mut raise = vec![Vec::new(); dim];
        for (i, r) in raise.iter_mut().enumerate() {
            for m in vars.iter().take_while(|m| m.len() < order) {
                let mut up = m.clone();
                up.push(i);
                r.push(lookup(up));
            }
        }
        Table { dim, order, len, vars, multiplicity, first, second, third, products, raise, prefix_len }
    }
}

#[allow(clippy::declare_interior_mutable_const)]
const EMPTY: OnceLock<Table> = OnceLock::new();
#[allow(clippy::declare_interior_mutable_const)]
const EMPTY_ROW: [OnceLock<Table>; MAX_ORDER + 1] = [EMPTY; MAX_ORDER + 1];
static TABLES: [[OnceLock<Table>; MAX_ORDER + 1]; MAX_DIM + 1] = [EMPTY_ROW; MAX_DIM + 1];

fn table(dim: usize, order: usize) -> &'static Table {
    TABLES[dim][order].get_or_init(|| Table::build(dim, order))
}

/// Truncated Taylor expansion of a scalar function of `dim` variables.
#[derive(Clone)]
pub struct Jet {
    table: &'static Table,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.dim())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

fn check_shape(dim: usize, order: usize) -> Result<(), JetError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(JetError::Dimension(dim));
    }
    if order == 0 || order > MAX_ORDER {
        return Err(JetError::Order(order));
    }
    Ok(())
}

impl Jet {
    pub fn constant(dim: usize, order: usize, value: f64) -> Result<Jet, JetError> {
        check_shape(dim, order)?;
        Ok(Jet::constant_unchecked(table(dim, order), value))
    }

    /// The coordinate function `x_index` expanded at `value`.
    pub fn variable(dim: usize, order: usize, index: usize, value: f64) -> Result<Jet, JetError> {
        check_shape(dim, order)?;
        if index >= dim {
            return Err(JetError::Variable { index, dim });
        }
        let t = table(dim, order);
        let mut j = Jet::constant_unchecked(t, value);
        j.coeffs[t.first[index]] = 1.0;
        Ok(j)
    }

    /// Seeds one jet variable per coordinate of `point`.
    pub fn seed(point: &[f64], order: usize) -> Result<Vec<Jet>, JetError> {
        let dim = point.len();
        (0..dim).map(|i| Jet::variable(dim, order, i, point[i])).collect()
    }

    fn constant_unchecked(table: &'static Table, value: f64) -> Jet {
        let mut coeffs = vec![0.0; table.len];
        coeffs[0] = value;
        Jet { table, coeffs }
    }

    /// A constant with the same shape as `self`.
    pub fn lift(&self, value: f64) -> Jet {
        Jet::constant_unchecked(self.table, value)
    }

    pub fn zero_like(&self) -> Jet {
        self.lift(0.0)
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn order(&self) -> usize {
        self.table.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn same_shape(&self, other: &Jet) -> bool {
        std::ptr::eq(self.table, other.table)
    }

    fn mismatch(&self, other: &Jet) -> JetError {
        JetError::Mismatch {
            lhs_dim: self.dim(),
            lhs_order: self.order(),
            rhs_dim: other.dim(),
            rhs_order: other.order(),
        }
    }

    /// Mixed partial derivative `∂^k f / ∂x_{i1}…∂x_{ik}` at the expansion point.
    ///
    /// Indices past the stored order yield `None`.
    pub fn derivative(&self, indices: &[usize]) -> Option<f64> {
        let t = self.table;
        if indices.len() > t.order || indices.iter().any(|&i| i >= t.dim) {
            return None;
        }
        let d = t.dim;
        let idx = match *indices {
            [] => 0,
            [i] => t.first[i],
            [i, j] => t.second[i * d + j],
            [i, j, k] => t.third[(i * d + j) * d + k],
            _ => return None,
        };
        Some(self.coeffs[idx] * t.multiplicity[idx])
    }

    pub fn gradient(&self) -> Vec<f64> {
        let t = self.table;
        if t.order == 0 {
            return vec![0.0; t.dim];
        }
        t.first.iter().map(|&i| self.coeffs[i]).collect()
    }

    /// Partial derivative `∂f/∂x_var` as a jet of one lower order.
    pub fn partial(&self, var: usize) -> Result<Jet, JetError> {
        let t = self.table;
        if t.order == 0 {
            return Err(JetError::Exhausted);
        }
        if var >= t.dim {
            return Err(JetError::Variable { index: var, dim: t.dim });
        }
        let child = table(t.dim, t.order - 1);
        let coeffs = (0..child.len)
            .map(|b| {
                let power = t.vars[b].iter().filter(|&&v| v == var).count() as f64 + 1.0;
                self.coeffs[t.raise[var][b]] * power
            })
            .collect();
        Ok(Jet { table: child, coeffs })
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order());
        let t = table(self.dim(), order);
        Jet { table: t, coeffs: self.coeffs[..self.table.prefix_len[order]].to_vec() }
    }

    pub fn checked(&self, rhs: &Jet, op: JetOp) -> Result<Jet, JetError> {
        if !self.same_shape(rhs) {
            return Err(self.mismatch(rhs));
        }
        match op {
            JetOp::Add => Ok(self + rhs),
            JetOp::Sub => Ok(self - rhs),
            JetOp::Mul => Ok(self * rhs),
            JetOp::Div => self.checked_div(rhs),
        }
    }

    pub fn checked_div(&self, rhs: &Jet) -> Result<Jet, JetError> {
        if !self.same_shape(rhs) {
            return Err(self.mismatch(rhs));
        }
        Ok(self * &rhs.recip()?)
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if a == 0.0 {
            return Err(JetError::Singularity { op: "reciprocal", value: a });
        }
        let r = 1.0 / a;
        Ok(self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if a < 0.0 {
            return Err(JetError::Domain { op: "sqrt", value: a });
        }
        if a == 0.0 {
            return Err(JetError::Singularity { op: "sqrt", value: a });
        }
        let s = a.sqrt();
        Ok(self.compose([s, 0.5 / s, -0.25 / (s * a), 0.375 / (s * a * a)]))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if a <= 0.0 {
            return Err(JetError::Domain { op: "log", value: a });
        }
        let r = 1.0 / a;
        Ok(self.compose([a.ln(), r, -r * r, 2.0 * r * r * r]))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn powi(&self, n: i32) -> Result<Jet, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = self.lift(1.0);
        for _ in 0..n {
            acc = &acc * self;
        }
        Ok(acc)
    }

    pub fn square(&self) -> Jet {
        self * self
    }

    /// `atan2(self, x)` on the branch containing the expansion point.
    pub fn atan2(&self, x: &Jet) -> Result<Jet, JetError> {
        if !self.same_shape(x) {
            return Err(self.mismatch(x));
        }
        let (y0, x0) = (self.value(), x.value());
        if y0 == 0.0 && x0 == 0.0 {
            return Err(JetError::Singularity { op: "atan2", value: 0.0 });
        }
        // atan2(y, x) = atan2(y0, x0) + atan(u) with u vanishing at the expansion point
        let num = &(self * x0) - &(x * y0);
        let den = &(x * x0) + &(self * y0);
        let u = num.checked_div(&den)?;
        let u3 = &(&u * &u) * &u;
        let mut out = &u - &(&u3 * (1.0 / 3.0));
        out.coeffs[0] = y0.atan2(x0);
        Ok(out)
    }

    /// Composes a univariate function given its value and first three
    /// derivatives at `self.value()`.
    pub fn compose(&self, derivs: [f64; 4]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = self.lift(derivs[0]);
        let mut power = self.lift(1.0);
        let mut fact = 1.0;
        for (m, d) in derivs.iter().enumerate().take(self.order() + 1).skip(1) {
            power = &power * &h;
            fact *= m as f64;
            out.axpy(d / fact, &power);
        }
        out
    }

    fn axpy(&mut self, a: f64, x: &Jet) {
        for (c, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += a * v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Combines two jets, rejecting mismatched shapes and singular division.
pub fn jet_arith(a: &Jet, b: &Jet, op: JetOp) -> Result<Jet, JetError> {
    a.checked(b, op)
}

fn assert_shape(a: &Jet, b: &Jet) {
    assert!(a.same_shape(b), "{}", a.mismatch(b));
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        assert_shape(self, rhs);
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        assert_shape(self, rhs);
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        assert_shape(self, rhs);
        let mut coeffs = vec![0.0; self.table.len];
        let (a, b) = (&self.coeffs, &rhs.coeffs);
        for &(i, j, k) in &self.table.products {
            coeffs[k as usize] += a[i as usize] * b[j as usize];
        }
        Jet { table: self.table, coeffs }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { table: self.table, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += rhs;
        out
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        Jet { table: self.table, coeffs: self.coeffs.iter().map(|c| c * rhs).collect() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
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
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $m(self, rhs: f64) -> Jet {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
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

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs * self
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        assert_shape(self, rhs);
        self.axpy(1.0, rhs);
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        assert_shape(self, rhs);
        self.axpy(-1.0, rhs);
    }
}

impl SubAssign<Jet> for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self -= &rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
    }
}

/// Complex-valued jet stored as real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexJet {
    pub re: Jet,
    pub im: Jet,
}

impl ComplexJet {
    pub fn new(re: Jet, im: Jet) -> Self {
        assert_shape(&re, &im);
        ComplexJet { re, im }
    }

    pub fn real(re: Jet) -> Self {
        let im = re.zero_like();
        ComplexJet { re, im }
    }

    pub fn constant_like(shape: &Jet, re: f64, im: f64) -> Self {
        ComplexJet { re: shape.lift(re), im: shape.lift(im) }
    }

    pub fn conj(&self) -> Self {
        ComplexJet { re: self.re.clone(), im: -&self.im }
    }

    pub fn norm_sqr(&self) -> Jet {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn scale(&self, s: &Jet) -> Self {
        ComplexJet { re: &self.re * s, im: &self.im * s }
    }

    pub fn scale_f64(&self, s: f64) -> Self {
        ComplexJet { re: &self.re * s, im: &self.im * s }
    }

    /// Multiplication by a complex constant.
    pub fn mul_c(&self, re: f64, im: f64) -> Self {
        ComplexJet { re: &self.re * re - &self.im * im, im: &self.re * im + &self.im * re }
    }

    pub fn times_i(&self) -> Self {
        ComplexJet { re: -&self.im, im: self.re.clone() }
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        let inv = self.norm_sqr().recip()?;
        Ok(self.conj().scale(&inv))
    }

    pub fn value(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.value(), self.im.value())
    }
}

impl Add<&ComplexJet> for &ComplexJet {
    type Output = ComplexJet;
    fn add(self, rhs: &ComplexJet) -> ComplexJet {
        ComplexJet { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub<&ComplexJet> for &ComplexJet {
    type Output = ComplexJet;
    fn sub(self, rhs: &ComplexJet) -> ComplexJet {
        ComplexJet { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul<&ComplexJet> for &ComplexJet {
    type Output = ComplexJet;
    fn mul(self, rhs: &ComplexJet) -> ComplexJet {
        ComplexJet { re: &self.re * &rhs.re - &self.im * &rhs.im, im: &self.re * &rhs.im + &self.im * &rhs.re }
    }
}

impl Neg for &ComplexJet {
    type Output = ComplexJet;
    fn neg(self) -> ComplexJet {
        ComplexJet { re: -&self.re, im: -&self.im }
    }
}

impl AddAssign<&ComplexJet> for ComplexJet {
    fn add_assign(&mut self, rhs: &ComplexJet) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&ComplexJet> for ComplexJet {
    fn sub_assign(&mut self, rhs: &ComplexJet) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn product_rule_example() {
        let x = Jet::variable(2, 2, 0, 1.0).unwrap();
        let y = Jet::variable(2, 2, 1, 2.0).unwrap();
        let f = &x * &y;
        assert_eq!(f.value(), 2.0);
        assert_eq!(f.gradient(), vec![2.0, 1.0]);
        assert_eq!(f.derivative(&[0, 1]), Some(1.0));
        assert_eq!(f.derivative(&[1, 0]), Some(1.0));
        assert_eq!(f.derivative(&[0, 0]), Some(0.0));
    }

    #[test]
    fn exp_of_sum_order_three() {
        let x = Jet::variable(2, 3, 0, 0.0).unwrap();
        let y = Jet::variable(2, 3, 1, 0.0).unwrap();
        let f = (&x + &y).exp();
        for idx in [vec![], vec![0], vec![1], vec![0, 1], vec![0, 0, 1], vec![1, 1, 1]] {
            assert!((f.derivative(&idx).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_of_negative_is_domain_error() {
        let x = Jet::variable(1, 1, 0, -1.0).unwrap();
        assert!(matches!(x.sqrt(), Err(JetError::Domain { .. })));
        assert!(matches!(x.ln(), Err(JetError::Domain { .. })));
        let z = Jet::constant(1, 1, 0.0).unwrap();
        assert!(matches!(x.checked_div(&z), Err(JetError::Singularity { .. })));
    }

    #[test]
    fn shape_validation() {
        assert_eq!(Jet::variable(17, 1, 0, 0.0).unwrap_err(), JetError::Dimension(17));
        assert_eq!(Jet::variable(2, 4, 0, 0.0).unwrap_err(), JetError::Order(4));
        assert!(matches!(Jet::variable(2, 1, 2, 0.0), Err(JetError::Variable { .. })));
        let a = Jet::variable(2, 1, 0, 0.0).unwrap();
        let b = Jet::variable(3, 1, 0, 0.0).unwrap();
        let c = Jet::variable(2, 2, 0, 0.0).unwrap();
        assert!(matches!(jet_arith(&a, &b, JetOp::Add), Err(JetError::Mismatch { .. })));
        assert!(matches!(jet_arith(&a, &c, JetOp::Mul), Err(JetError::Mismatch { .. })));
    }

    #[test]
    fn partial_lowers_order() {
        let p = Jet::seed(&[0.3, -0.7], 3).unwrap();
        let f = &(&p[0] * &p[0]) * &p[1].sin();
        let fx = f.partial(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert!((fx.value() - 2.0 * 0.3 * (-0.7f64).sin()).abs() < 1e-15);
        assert!((fx.derivative(&[1, 1]).unwrap() + 2.0 * 0.3 * (-0.7f64).sin()).abs() < 1e-14);
        assert!((f.derivative(&[0, 1, 1]).unwrap() - fx.derivative(&[1, 1]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn atan2_matches_closed_form() {
        let p = Jet::seed(&[-0.4, 1.3], 3).unwrap();
        let a = p[1].atan2(&p[0]).unwrap();
        let (x, y) = (-0.4f64, 1.3f64);
        let r2 = x * x + y * y;
        assert!((a.value() - y.atan2(x)).abs() < 1e-15);
        assert!((a.derivative(&[0]).unwrap() + y / r2).abs() < 1e-14);
        assert!((a.derivative(&[1]).unwrap() - x / r2).abs() < 1e-14);
        assert!((a.derivative(&[0, 1]).unwrap() - (y * y - x * x) / (r2 * r2)).abs() < 1e-13);
    }

    #[test]
    fn truncate_is_prefix() {
        let p = Jet::seed(&[0.1, 0.2, 0.3], 3).unwrap();
        let f = (&p[0] * &p[1] + &p[2]).exp();
        let g = f.truncate(1);
        let q = Jet::seed(&[0.1, 0.2, 0.3], 1).unwrap();
        let h = (&q[0] * &q[1] + &q[2]).exp();
        for (a, b) in g.coefficients().iter().zip(h.coefficients()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn ring_identities(a in -2.0f64..2.0, b in -2.0f64..2.0, c in 0.5f64..2.0) {
            let p = Jet::seed(&[a, b, c], 3).unwrap();
            let lhs = &(&p[0] + &p[1]) * &p[2];
            let rhs = &(&p[0] * &p[2]) + &(&p[1] * &p[2]);
            for (l, r) in lhs.coefficients().iter().zip(rhs.coefficients()) {
                prop_assert!((l - r).abs() < 1e-12);
            }
            let q = p[2].checked_div(&p[2]).unwrap();
            prop_assert!((q.value() - 1.0).abs() < 1e-14);
            for c in &q.coefficients()[1..] {
                prop_assert!(c.abs() < 1e-12);
            }
            let s = p[2].sqrt().unwrap();
            let back = &s * &s;
            for (l, r) in back.coefficients().iter().zip(p[2].coefficients()) {
                prop_assert!((l - r).abs() < 1e-12);
            }
            let e = p[2].ln().unwrap().exp();
            for (l, r) in e.coefficients().iter().zip(p[2].coefficients()) {
                prop_assert!((l - r).abs() < 1e-12);
            }
            let pyth = p[0].sin().square() + p[0].cos().square();
            prop_assert!((pyth.value() - 1.0).abs() < 1e-14);
            for c in &pyth.coefficients()[1..] {
                prop_assert!(c.abs() < 1e-12);
            }
        }
    }
}
