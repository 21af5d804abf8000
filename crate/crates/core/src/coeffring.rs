//! Exact commutative coefficients.
//!
//! A [`ScalarPoly`] is a sparse polynomial with arbitrary-precision rational
//! coefficients in the fixed variable set `pi, tau1, tau2, xi1, xi2, r, u`.
//! Only `tau2` may carry a negative exponent. `|tau|^2` is never stored as a
//! variable; it enters as `tau1^2 + tau2^2` (see [`ScalarPoly::tau_abs_sq`]).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("unbound variable `{0}`")]
    Unbound(Var),
    #[error("division by zero: `{0}` evaluated to 0 under a negative exponent")]
    DivisionByZero(Var),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// The coefficient variables, in canonical print order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Pi,
    Tau1,
    Tau2,
    Xi1,
    Xi2,
    R,
    U,
}

impl Var {
    pub const ALL: [Var; 7] = [Var::Pi, Var::Tau1, Var::Tau2, Var::Xi1, Var::Xi2, Var::R, Var::U];

    pub fn name(self) -> &'static str {
        match self {
            Var::Pi => "pi",
            Var::Tau1 => "tau1",
            Var::Tau2 => "tau2",
            Var::Xi1 => "xi1",
            Var::Xi2 => "xi2",
            Var::R => "r",
            Var::U => "u",
        }
    }

    pub fn from_name(s: &str) -> Option<Var> {
        Var::ALL.iter().copied().find(|v| v.name() == s)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponent vector. Field order is the canonical variable order, so the
/// derived `Ord` is lexicographic in that order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScalarMono {
    pub e_pi: u32,
    pub e_tau1: u32,
    pub e_tau2: i32,
    pub e_xi1: u32,
    pub e_xi2: u32,
    pub e_r: u32,
    pub e_u: u32,
}

impl ScalarMono {
    pub const ONE: ScalarMono = ScalarMono {
        e_pi: 0,
        e_tau1: 0,
        e_tau2: 0,
        e_xi1: 0,
        e_xi2: 0,
        e_r: 0,
        e_u: 0,
    };

    pub fn var(v: Var, e: i32) -> ScalarMono {
        let mut m = ScalarMono::ONE;
        m.set(v, e);
        m
    }

    pub fn get(&self, v: Var) -> i32 {
        match v {
            Var::Pi => self.e_pi as i32,
            Var::Tau1 => self.e_tau1 as i32,
            Var::Tau2 => self.e_tau2,
            Var::Xi1 => self.e_xi1 as i32,
            Var::Xi2 => self.e_xi2 as i32,
            Var::R => self.e_r as i32,
            Var::U => self.e_u as i32,
        }
    }

    /// Panics on a negative exponent for any variable other than `tau2`.
    pub fn set(&mut self, v: Var, e: i32) {
        let nonneg = |e: i32| -> u32 {
            assert!(e >= 0, "negative exponent {e} for variable {v}");
            e as u32
        };
        match v {
            Var::Pi => self.e_pi = nonneg(e),
            Var::Tau1 => self.e_tau1 = nonneg(e),
            Var::Tau2 => self.e_tau2 = e,
            Var::Xi1 => self.e_xi1 = nonneg(e),
            Var::Xi2 => self.e_xi2 = nonneg(e),
            Var::R => self.e_r = nonneg(e),
            Var::U => self.e_u = nonneg(e),
        }
    }

    pub fn mul(&self, o: &ScalarMono) -> ScalarMono {
        ScalarMono {
            e_pi: self.e_pi + o.e_pi,
            e_tau1: self.e_tau1 + o.e_tau1,
            e_tau2: self.e_tau2 + o.e_tau2,
            e_xi1: self.e_xi1 + o.e_xi1,
            e_xi2: self.e_xi2 + o.e_xi2,
            e_r: self.e_r + o.e_r,
            e_u: self.e_u + o.e_u,
        }
    }

    pub fn xi_degree(&self) -> u32 {
        self.e_xi1 + self.e_xi2
    }

    pub fn is_one(&self) -> bool {
        *self == ScalarMono::ONE
    }

    /// Split into (tau/pi part, xi/r/u part).
    pub fn split_tau(&self) -> (ScalarMono, ScalarMono) {
        let tau = ScalarMono {
            e_pi: self.e_pi,
            e_tau1: self.e_tau1,
            e_tau2: self.e_tau2,
            ..ScalarMono::ONE
        };
        let rest = ScalarMono {
            e_xi1: self.e_xi1,
            e_xi2: self.e_xi2,
            e_r: self.e_r,
            e_u: self.e_u,
            ..ScalarMono::ONE
        };
        (tau, rest)
    }

    fn write_factors(&self, f: &mut fmt::Formatter<'_>, explicit_one: bool) -> fmt::Result {
        let mut first = true;
        for v in Var::ALL {
            let e = self.get(v);
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if e == 1 && !explicit_one {
                write!(f, "{}", v.name())?;
            } else {
                write!(f, "{}^{}", v.name(), e)?;
            }
        }
        Ok(())
    }
}

/// Canonical sparse polynomial: no zero coefficients are ever stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScalarPoly {
    terms: BTreeMap<ScalarMono, Rational>,
}

/// A value bound to a variable during evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(Rational),
    Float(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Value::Float(x) => *x,
        }
    }
}

impl From<Rational> for Value {
    fn from(q: Rational) -> Self {
        Value::Exact(q)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl ScalarPoly {
    pub fn zero() -> Self {
        ScalarPoly::default()
    }

    pub fn one() -> Self {
        ScalarPoly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        ScalarPoly::monomial(ScalarMono::ONE, c)
    }

    pub fn from_int(n: i64) -> Self {
        ScalarPoly::constant(int(n))
    }

    pub fn monomial(m: ScalarMono, c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        ScalarPoly { terms }
    }

    pub fn var(v: Var) -> Self {
        ScalarPoly::monomial(ScalarMono::var(v, 1), Rational::one())
    }

    pub fn var_pow(v: Var, e: i32) -> Self {
        ScalarPoly::monomial(ScalarMono::var(v, e), Rational::one())
    }

    /// `|tau|^2 = tau1^2 + tau2^2`, expanded.
    pub fn tau_abs_sq() -> Self {
        ScalarPoly::var_pow(Var::Tau1, 2) + ScalarPoly::var_pow(Var::Tau2, 2)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .is_some_and(|(m, c)| m.is_one() && c.is_one())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ScalarMono, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &ScalarMono) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    /// The constant coefficient if the polynomial is a pure rational.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: ScalarMono, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &ScalarPoly, s: &Rational) {
        if s.is_zero() {
            return;
        }
        for (m, c) in &other.terms {
            self.add_term(*m, c * s);
        }
    }

    pub fn scale(&self, s: &Rational) -> ScalarPoly {
        if s.is_zero() {
            return ScalarPoly::zero();
        }
        ScalarPoly {
            terms: self.terms.iter().map(|(m, c)| (*m, c * s)).collect(),
        }
    }

    pub fn mul_mono(&self, m: &ScalarMono) -> ScalarPoly {
        ScalarPoly {
            terms: self.terms.iter().map(|(k, c)| (k.mul(m), c.clone())).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> ScalarPoly {
        let mut acc = ScalarPoly::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Partial derivative. `d/d tau2` lowers Laurent exponents as usual.
    pub fn derivative(&self, v: Var) -> ScalarPoly {
        let mut out = ScalarPoly::zero();
        for (m, c) in &self.terms {
            let e = m.get(v);
            if e == 0 {
                continue;
            }
            let mut m2 = *m;
            m2.set(v, e - 1);
            out.add_term(m2, c * int(e as i64));
        }
        out
    }

    /// Substitute an exact rational for one variable.
    pub fn specialize(&self, v: Var, value: &Rational) -> ScalarPoly {
        let mut out = ScalarPoly::zero();
        for (m, c) in &self.terms {
            let e = m.get(v);
            let mut m2 = *m;
            m2.set(v, 0);
            let factor = if e >= 0 {
                num_traits::pow(value.clone(), e as usize)
            } else {
                assert!(!value.is_zero(), "specializing {v} to 0 under a negative exponent");
                num_traits::pow(value.recip(), (-e) as usize)
            };
            out.add_term(m2, c * factor);
        }
        out
    }

    /// Substitute a polynomial for a variable that only occurs with
    /// nonnegative exponents.
    pub fn substitute(&self, v: Var, value: &ScalarPoly) -> ScalarPoly {
        let mut out = ScalarPoly::zero();
        let mut powers: Vec<ScalarPoly> = vec![ScalarPoly::one()];
        for (m, c) in &self.terms {
            let e = m.get(v);
            assert!(e >= 0, "cannot substitute into a negative power of {v}");
            while powers.len() <= e as usize {
                let next = powers.last().unwrap() * value;
                powers.push(next);
            }
            let mut m2 = *m;
            m2.set(v, 0);
            let piece = powers[e as usize].mul_mono(&m2).scale(c);
            out = out + piece;
        }
        out
    }

    pub fn max_degree(&self, v: Var) -> i32 {
        self.terms.keys().map(|m| m.get(v)).max().unwrap_or(0)
    }

    pub fn min_degree(&self, v: Var) -> i32 {
        self.terms.keys().map(|m| m.get(v)).min().unwrap_or(0)
    }

    pub fn mentions(&self, v: Var) -> bool {
        self.terms.keys().any(|m| m.get(v) != 0)
    }

    /// Group by the non-tau part of each monomial: `xi/r/u monomial -> tau polynomial`.
    pub fn split_by_tau(&self) -> BTreeMap<ScalarMono, ScalarPoly> {
        let mut out: BTreeMap<ScalarMono, ScalarPoly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (tau, rest) = m.split_tau();
            out.entry(rest).or_default().add_term(tau, c.clone());
        }
        out
    }

    /// Evaluate. Exact when every bound value is exact and `pi` does not
    /// occur; otherwise a float.
    pub fn eval(&self, point: &BTreeMap<Var, Value>) -> Result<Value, CoeffError> {
        let mut exact_ok = true;
        for m in self.terms.keys() {
            for v in Var::ALL {
                let e = m.get(v);
                if e == 0 {
                    continue;
                }
                if v == Var::Pi {
                    exact_ok = false;
                    continue;
                }
                match point.get(&v) {
                    None => return Err(CoeffError::Unbound(v)),
                    Some(Value::Float(x)) => {
                        exact_ok = false;
                        if e < 0 && *x == 0.0 {
                            return Err(CoeffError::DivisionByZero(v));
                        }
                    }
                    Some(Value::Exact(q)) => {
                        if e < 0 && q.is_zero() {
                            return Err(CoeffError::DivisionByZero(v));
                        }
                    }
                }
            }
        }
        if exact_ok {
            let mut acc = Rational::zero();
            for (m, c) in &self.terms {
                let mut t = c.clone();
                for v in Var::ALL {
                    let e = m.get(v);
                    if e == 0 {
                        continue;
                    }
                    let Some(Value::Exact(q)) = point.get(&v) else {
                        unreachable!()
                    };
                    t *= if e > 0 {
                        num_traits::pow(q.clone(), e as usize)
                    } else {
                        num_traits::pow(q.recip(), (-e) as usize)
                    };
                }
                acc += t;
            }
            Ok(Value::Exact(acc))
        } else {
            let mut acc = 0.0;
            for (m, c) in &self.terms {
                let mut t = c.to_f64().unwrap_or(f64::NAN);
                for v in Var::ALL {
                    let e = m.get(v);
                    if e == 0 {
                        continue;
                    }
                    let x = if v == Var::Pi {
                        std::f64::consts::PI
                    } else {
                        point[&v].to_f64()
                    };
                    t *= x.powi(e);
                }
                acc += t;
            }
            Ok(Value::Float(acc))
        }
    }

    /// Float evaluation helper for the common `(tau1, tau2)` case.
    pub fn eval_tau(&self, tau1: f64, tau2: f64) -> Result<f64, CoeffError> {
        let point: BTreeMap<Var, Value> = [(Var::Tau1, Value::Float(tau1)), (Var::Tau2, Value::Float(tau2))]
            .into_iter()
            .collect();
        Ok(self.eval(&point)?.to_f64())
    }

    /// Pretty form: exponent 1 omitted, unit coefficients omitted.
    pub fn pretty(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { "-" } else { "+" });
            }
            let body = PrettyMono(m).to_string();
            if body.is_empty() {
                out.push_str(&a.to_string());
            } else if a.is_one() {
                out.push_str(&body);
            } else {
                out.push_str(&format!("{a}*{body}"));
            }
        }
        out
    }
}

struct PrettyMono<'a>(&'a ScalarMono);

impl fmt::Display for PrettyMono<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.write_factors(f, false)
    }
}

impl fmt::Display for ScalarPoly {
    /// Canonical form, monomials in descending order, e.g.
    /// `6*tau1^1*xi1^2*xi2^1 + -1/2*r^3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}")?;
            if !m.is_one() {
                f.write_str("*")?;
                m.write_factors(f, true)?;
            }
        }
        Ok(())
    }
}

impl FromStr for ScalarPoly {
    type Err = CoeffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = ScalarParser { src: s, pos: 0 };
        let poly = p.parse_poly()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(poly)
    }
}

/// Cursor over the canonical scalar grammar. Also used by the word-list
/// parser, which embeds scalar polynomials.
pub(crate) struct ScalarParser<'a> {
    pub src: &'a str,
    pub pos: usize,
}

impl<'a> ScalarParser<'a> {
    pub fn err(&self, msg: &str) -> CoeffError {
        CoeffError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn skip_ws(&mut self) {
        while self.rest().starts_with(' ') {
            self.pos += 1;
        }
    }

    fn eat(&mut self, t: &str) -> bool {
        if self.rest().starts_with(t) {
            self.pos += t.len();
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<BigInt, CoeffError> {
        let start = self.pos;
        if self.rest().starts_with('-') {
            self.pos += 1;
        }
        let digits = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            self.pos = start;
            return Err(self.err("expected integer"));
        }
        self.pos += digits;
        self.src[start..self.pos]
            .parse::<BigInt>()
            .map_err(|_| CoeffError::Parse {
                pos: start,
                msg: "bad integer".into(),
            })
    }

    fn rational(&mut self) -> Result<Rational, CoeffError> {
        let n = self.integer()?;
        if self.eat("/") {
            let at = self.pos;
            let d = self.integer()?;
            if d.is_zero() {
                return Err(CoeffError::Parse {
                    pos: at,
                    msg: "zero denominator".into(),
                });
            }
            Ok(Rational::new(n, d))
        } else {
            Ok(Rational::from_integer(n))
        }
    }

    fn term(&mut self) -> Result<(ScalarMono, Rational), CoeffError> {
        let c = self.rational()?;
        let mut m = ScalarMono::ONE;
        let mut last: Option<Var> = None;
        while self.eat("*") {
            let at = self.pos;
            let len = self
                .rest()
                .bytes()
                .take_while(|b| b.is_ascii_alphanumeric())
                .count();
            let name = &self.src[self.pos..self.pos + len];
            let v = Var::from_name(name).ok_or(CoeffError::Parse {
                pos: at,
                msg: format!("unknown variable `{name}`"),
            })?;
            self.pos += len;
            if !self.eat("^") {
                return Err(self.err("expected `^` after variable"));
            }
            let e_at = self.pos;
            let e = self.integer()?;
            let e: i32 = e.to_i32().ok_or(CoeffError::Parse {
                pos: e_at,
                msg: "exponent out of range".into(),
            })?;
            if last.is_some_and(|l| l >= v) {
                return Err(CoeffError::Parse {
                    pos: at,
                    msg: "variables out of canonical order".into(),
                });
            }
            if e == 0 || (e < 0 && v != Var::Tau2) {
                return Err(CoeffError::Parse {
                    pos: e_at,
                    msg: format!("invalid exponent {e} for {v}"),
                });
            }
            last = Some(v);
            m.set(v, e);
        }
        Ok((m, c))
    }

    pub fn parse_poly(&mut self) -> Result<ScalarPoly, CoeffError> {
        self.skip_ws();
        let mut out = ScalarPoly::zero();
        loop {
            let (m, c) = self.term()?;
            out.add_term(m, c);
            let save = self.pos;
            self.skip_ws();
            if self.eat("+") {
                self.skip_ws();
                continue;
            }
            self.pos = save;
            break;
        }
        Ok(out)
    }
}

impl Add for ScalarPoly {
    type Output = ScalarPoly;
    fn add(mut self, rhs: ScalarPoly) -> ScalarPoly {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Add<&ScalarPoly> for &ScalarPoly {
    type Output = ScalarPoly;
    fn add(self, rhs: &ScalarPoly) -> ScalarPoly {
        self.clone() + rhs.clone()
    }
}

impl AddAssign<&ScalarPoly> for ScalarPoly {
    fn add_assign(&mut self, rhs: &ScalarPoly) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, c.clone());
        }
    }
}

impl Neg for ScalarPoly {
    type Output = ScalarPoly;
    fn neg(self) -> ScalarPoly {
        ScalarPoly {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl Neg for &ScalarPoly {
    type Output = ScalarPoly;
    fn neg(self) -> ScalarPoly {
        -self.clone()
    }
}

impl Sub for ScalarPoly {
    type Output = ScalarPoly;
    fn sub(self, rhs: ScalarPoly) -> ScalarPoly {
        self + (-rhs)
    }
}

impl Sub<&ScalarPoly> for &ScalarPoly {
    type Output = ScalarPoly;
    fn sub(self, rhs: &ScalarPoly) -> ScalarPoly {
        self.clone() - rhs.clone()
    }
}

impl Mul<&ScalarPoly> for &ScalarPoly {
    type Output = ScalarPoly;
    fn mul(self, rhs: &ScalarPoly) -> ScalarPoly {
        let mut out = ScalarPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Mul for ScalarPoly {
    type Output = ScalarPoly;
    fn mul(self, rhs: ScalarPoly) -> ScalarPoly {
        &self * &rhs
    }
}

pub fn scalar_add(a: &ScalarPoly, b: &ScalarPoly) -> ScalarPoly {
    a + b
}

pub fn scalar_mul(a: &ScalarPoly, b: &ScalarPoly) -> ScalarPoly {
    a * b
}

pub fn scalar_eval(a: &ScalarPoly, point: &BTreeMap<Var, Value>) -> Result<Value, CoeffError> {
    a.eval(point)
}

/// `n!` as an exact rational.
pub fn factorial(n: u32) -> Rational {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    Rational::from_integer(acc)
}

pub fn binomial(n: u32, k: u32) -> Rational {
    if k > n {
        return Rational::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Beta function at positive integer arguments, exact.
pub fn beta_int(a: u32, b: u32) -> Rational {
    assert!(a >= 1 && b >= 1, "beta_int needs positive arguments");
    factorial(a - 1) * factorial(b - 1) / factorial(a + b - 1)
}

/// Double factorial `n!!`, with `(-1)!! = 0!! = 1`.
pub fn double_factorial(n: i32) -> Rational {
    let mut acc = BigInt::one();
    let mut k = n;
    while k > 1 {
        acc *= k;
        k -= 2;
    }
    Rational::from_integer(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: Var) -> ScalarPoly {
        ScalarPoly::var(x)
    }

    #[test]
    fn tau_abs_sq_is_sum_of_squares() {
        let a = ScalarPoly::var_pow(Var::Tau1, 2);
        let b = ScalarPoly::var_pow(Var::Tau2, 2);
        assert_eq!(scalar_add(&a, &b), ScalarPoly::tau_abs_sq());
        assert_eq!(ScalarPoly::tau_abs_sq().to_string(), "1*tau1^2 + 1*tau2^2");
    }

    #[test]
    fn additive_inverse() {
        let x: ScalarPoly = "3*tau1^2*xi1^1 + -1/2*r^3".parse().unwrap();
        assert!((&x + &(-&x)).is_zero());
    }

    #[test]
    fn b2_group_sum() {
        let a = ScalarPoly::var_pow(Var::Xi1, 2).scale(&int(6));
        let b = (v(Var::Tau1) * v(Var::Xi1) * v(Var::Xi2)).scale(&int(12));
        let s = scalar_add(&a, &b);
        assert_eq!(s.len(), 2);
        assert_eq!(s.coeff(&ScalarMono::var(Var::Xi1, 2)), int(6));
    }

    #[test]
    fn product_examples() {
        let t = ScalarPoly::tau_abs_sq();
        let t2 = scalar_mul(&t, &t);
        assert_eq!(t2.to_string(), "1*tau1^4 + 2*tau1^2*tau2^2 + 1*tau2^4");
        let x: ScalarPoly = "2*tau1^1*xi1^1*xi2^1".parse().unwrap();
        let y = ScalarPoly::var_pow(Var::Xi1, 2);
        assert_eq!((&x * &y).to_string(), "2*tau1^1*xi1^3*xi2^1");
        assert_eq!(&ScalarPoly::one() * &x, x);
    }

    #[test]
    fn eval_examples() {
        let pt: BTreeMap<Var, Value> = [(Var::Tau1, Value::Exact(int(0))), (Var::Tau2, Value::Exact(int(1)))]
            .into_iter()
            .collect();
        assert_eq!(ScalarPoly::tau_abs_sq().eval(&pt).unwrap(), Value::Exact(int(1)));
        assert_eq!(ScalarPoly::zero().eval(&BTreeMap::new()).unwrap(), Value::Exact(int(0)));

        let two_pi_over_tau2 = ScalarPoly::monomial(
            ScalarMono {
                e_pi: 1,
                e_tau2: -1,
                ..ScalarMono::ONE
            },
            int(2),
        );
        let pt: BTreeMap<Var, Value> = [(Var::Tau2, Value::Exact(int(2)))].into_iter().collect();
        let got = two_pi_over_tau2.eval(&pt).unwrap().to_f64();
        assert!((got - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let p: ScalarPoly = "1*xi1^1".parse().unwrap();
        assert_eq!(p.eval(&BTreeMap::new()), Err(CoeffError::Unbound(Var::Xi1)));
        let q = ScalarPoly::var_pow(Var::Tau2, -1);
        let pt: BTreeMap<Var, Value> = [(Var::Tau2, Value::Exact(int(0)))].into_iter().collect();
        assert_eq!(q.eval(&pt), Err(CoeffError::DivisionByZero(Var::Tau2)));
    }

    #[test]
    fn parse_reports_position() {
        let e = "1*tau1^1 + 2*zeta^1".parse::<ScalarPoly>().unwrap_err();
        assert_eq!(
            e,
            CoeffError::Parse {
                pos: 13,
                msg: "unknown variable `zeta`".into()
            }
        );
        assert!("1*xi1^-1".parse::<ScalarPoly>().is_err());
        assert!("1*xi1^1*tau1^1".parse::<ScalarPoly>().is_err());
    }

    #[test]
    fn special_numbers() {
        assert_eq!(beta_int(1, 1), int(1));
        assert_eq!(beta_int(2, 1), rat(1, 2));
        assert_eq!(beta_int(3, 1), rat(1, 3));
        assert_eq!(double_factorial(-1), int(1));
        assert_eq!(double_factorial(5), int(15));
        assert_eq!(binomial(4, 2), int(6));
    }

    #[test]
    fn pretty_drops_unit_exponents() {
        let p: ScalarPoly = "2*tau1^1*xi1^1*xi2^1".parse().unwrap();
        assert_eq!(p.pretty(), "2*tau1*xi1*xi2");
        assert_eq!(ScalarPoly::tau_abs_sq().pretty(), "tau1^2+tau2^2");
    }
}
