//! Functions of the modular operator `Δ(x) = k^{-2} x k^2`.
//!
//! A [`SpectralFn`] is a combination of `u^{q/2}` and `u^{q/2} L_m(u)` where
//! `L_m(u) = ∫_0^∞ x^m (x+1)^{-(m+1)} (xu+1)^{-1} dx` is the modified
//! logarithm. A [`ModularExpr`] stores one spectral function per pair of
//! derivative directions and stands for
//! `(2π/τ2) Σ_{ij} φ(F_ij(Δ)(δ_i k) δ_j k)` with `φ(x) = τ0(x k^{-2})`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::coeffring::{int, rat, CoeffError, Rational, ScalarParser, ScalarPoly, Var};
use crate::ncalg::{Atom, NCPoly};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModularError {
    #[error("term `{0}` is not a bilinear in first derivatives of k")]
    NotBilinear(String),
    #[error("spectral function depends on tau: {0}")]
    TauDependent(String),
    #[error("evaluation outside the domain u > 0 (u = {0})")]
    Domain(f64),
    #[error("no modified logarithm of order {0}")]
    Order(u8),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot conclude: {0}")]
    Missing(String),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

fn fmt_half(q: i32) -> String {
    if q % 2 == 0 {
        (q / 2).to_string()
    } else {
        format!("{q}/2")
    }
}

fn parse_half(s: &str) -> Option<i32> {
    match s.split_once('/') {
        Some((n, "2")) => {
            let n: i32 = n.parse().ok()?;
            (n % 2 != 0).then_some(n)
        }
        Some(_) => None,
        None => s.parse::<i32>().ok().map(|n| 2 * n),
    }
}

/// Basis element `u^{half/2}` times `L_m(u)`, with `m = 0` meaning no logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Basis {
    pub m: u8,
    pub half: i32,
}

impl Basis {
    pub fn new(m: u8, half: i32) -> Basis {
        Basis { m, half }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.m {
            0 => write!(f, "1 u^{}", fmt_half(self.half)),
            m => write!(f, "L{m} u^{}", fmt_half(self.half)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpectralFn {
    terms: BTreeMap<Basis, ScalarPoly>,
}

impl SpectralFn {
    pub fn zero() -> SpectralFn {
        SpectralFn::default()
    }

    pub fn basis(b: Basis) -> SpectralFn {
        SpectralFn::term(b, ScalarPoly::one())
    }

    pub fn term(b: Basis, c: ScalarPoly) -> SpectralFn {
        let mut s = SpectralFn::zero();
        s.add_term(b, c);
        s
    }

    pub fn constant(c: Rational) -> SpectralFn {
        SpectralFn::term(Basis::new(0, 0), ScalarPoly::constant(c))
    }

    /// `u^{half/2}`.
    pub fn u_pow(half: i32) -> SpectralFn {
        SpectralFn::basis(Basis::new(0, half))
    }

    pub fn log_m(m: u8) -> SpectralFn {
        SpectralFn::basis(Basis::new(m, 0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Basis, &ScalarPoly)> {
        self.terms.iter()
    }

    pub fn coeff(&self, b: &Basis) -> ScalarPoly {
        self.terms.get(b).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, b: Basis, c: ScalarPoly) {
        let e = self.terms.entry(b).or_default();
        *e += &c;
        if e.is_zero() {
            self.terms.remove(&b);
        }
    }

    pub fn add(&self, o: &SpectralFn) -> SpectralFn {
        let mut out = self.clone();
        for (b, c) in o.terms() {
            out.add_term(*b, c.clone());
        }
        out
    }

    pub fn sub(&self, o: &SpectralFn) -> SpectralFn {
        self.add(&o.mul_scalar(&ScalarPoly::from_int(-1)))
    }

    pub fn mul_scalar(&self, c: &ScalarPoly) -> SpectralFn {
        let mut out = SpectralFn::zero();
        for (b, x) in self.terms() {
            out.add_term(*b, x * c);
        }
        out
    }

    pub fn scale(&self, q: &Rational) -> SpectralFn {
        self.mul_scalar(&ScalarPoly::constant(q.clone()))
    }

    /// Multiply by `u^{half/2}`.
    pub fn mul_u_half(&self, half: i32) -> SpectralFn {
        SpectralFn {
            terms: self.terms.iter().map(|(b, c)| (Basis::new(b.m, b.half + half), c.clone())).collect(),
        }
    }

    /// Product with a logarithm-free function.
    pub fn mul(&self, o: &SpectralFn) -> Option<SpectralFn> {
        let (plain, other) = if self.terms.keys().all(|b| b.m == 0) {
            (self, o)
        } else if o.terms.keys().all(|b| b.m == 0) {
            (o, self)
        } else {
            return None;
        };
        let mut out = SpectralFn::zero();
        for (b, c) in plain.terms() {
            out = out.add(&other.mul_u_half(b.half).mul_scalar(c));
        }
        Some(out)
    }

    pub fn is_tau_free(&self) -> bool {
        self.terms.values().all(|c| c.as_constant().is_some())
    }

    pub fn specialize(&self, v: Var, value: &Rational) -> SpectralFn {
        let mut out = SpectralFn::zero();
        for (b, c) in self.terms() {
            out.add_term(*b, c.specialize(v, value));
        }
        out
    }

    /// Perturb the coefficient of one basis element; used by fault injection.
    pub fn perturb(&self, b: Basis, delta: &Rational) -> SpectralFn {
        let mut out = self.clone();
        out.add_term(b, ScalarPoly::constant(delta.clone()));
        out
    }
}

impl fmt::Display for SpectralFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.terms().map(|(b, c)| format!("[{c}] {b}")).collect();
        f.write_str(&parts.join(" + "))
    }
}

/// `c · k^{-2} L_m(Δ)(Δ^{twist/2}(δ_i k)) δ_j k`, or `c · k^{-2} Δ^{twist/2}(δ_i k) δ_j k`
/// when `m = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModularTerm {
    pub coeff: ScalarPoly,
    pub i: u8,
    pub j: u8,
    pub m: u8,
    /// Half-units.
    pub twist: i32,
}

impl ModularTerm {
    pub fn basis(&self) -> Basis {
        Basis::new(self.m, self.twist)
    }
}

impl fmt::Display for ModularTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ({},{}) {}", self.coeff, self.i, self.j, self.basis())
    }
}

/// One `[coeff] (i,j) L<m> u^<q>` line per term.
pub fn terms_to_text(terms: &[ModularTerm]) -> String {
    terms.iter().map(|t| format!("{t}\n")).collect()
}

pub fn parse_terms(s: &str) -> Result<Vec<ModularTerm>, ModularError> {
    let mut out = Vec::new();
    for (n, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| ModularError::Parse {
            line: n + 1,
            msg: msg.to_string(),
        };
        let rest = line.strip_prefix('[').ok_or_else(|| bad("expected `[`"))?;
        let mut p = ScalarParser { src: rest, pos: 0 };
        let coeff = p.parse_poly().map_err(|e| bad(&e.to_string()))?;
        p.skip_ws();
        let rest = rest[p.pos..].strip_prefix(']').ok_or_else(|| bad("expected `]`"))?;
        let mut it = rest.split_whitespace();
        let slot = it.next().ok_or_else(|| bad("missing slot"))?;
        let (i, j) = slot
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .and_then(|s| s.split_once(','))
            .and_then(|(a, b)| Some((a.parse::<u8>().ok()?, b.parse::<u8>().ok()?)))
            .filter(|(a, b)| (1..=2).contains(a) && (1..=2).contains(b))
            .ok_or_else(|| bad("bad slot"))?;
        let m = match it.next() {
            Some("1") => 0,
            Some(l) => l
                .strip_prefix('L')
                .and_then(|x| x.parse::<u8>().ok())
                .filter(|m| (1..=3).contains(m))
                .ok_or_else(|| bad("bad basis function"))?,
            None => return Err(bad("missing basis function")),
        };
        let twist = it
            .next()
            .and_then(|x| x.strip_prefix("u^"))
            .and_then(parse_half)
            .ok_or_else(|| bad("bad u power"))?;
        if it.next().is_some() {
            return Err(bad("trailing input"));
        }
        out.push(ModularTerm { coeff, i, j, m, twist });
    }
    Ok(out)
}

/// Slot form `(i,j) -> F_ij`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModularExpr {
    slots: BTreeMap<(u8, u8), SpectralFn>,
}

pub const SLOTS: [(u8, u8); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

impl ModularExpr {
    pub fn zero() -> ModularExpr {
        ModularExpr::default()
    }

    pub fn slot(&self, i: u8, j: u8) -> SpectralFn {
        self.slots.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn set_slot(&mut self, i: u8, j: u8, f: SpectralFn) {
        if f.is_zero() {
            self.slots.remove(&(i, j));
        } else {
            self.slots.insert((i, j), f);
        }
    }

    pub fn add_term(&mut self, t: &ModularTerm) {
        let mut f = self.slot(t.i, t.j);
        f.add_term(t.basis(), t.coeff.clone());
        self.set_slot(t.i, t.j, f);
    }

    pub fn is_zero(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn neg(&self) -> ModularExpr {
        ModularExpr {
            slots: self.slots.iter().map(|(k, f)| (*k, f.scale(&int(-1)))).collect(),
        }
    }

    pub fn specialize(&self, v: Var, value: &Rational) -> ModularExpr {
        let mut out = ModularExpr::zero();
        for (&(i, j), f) in &self.slots {
            out.set_slot(i, j, f.specialize(v, value));
        }
        out
    }

    pub fn to_terms(&self) -> Vec<ModularTerm> {
        let mut out = Vec::new();
        for (&(i, j), f) in &self.slots {
            for (b, c) in f.terms() {
                out.push(ModularTerm {
                    coeff: c.clone(),
                    i,
                    j,
                    m: b.m,
                    twist: b.half,
                });
            }
        }
        out
    }

    pub fn from_terms(terms: &[ModularTerm]) -> ModularExpr {
        let mut out = ModularExpr::zero();
        for t in terms {
            out.add_term(t);
        }
        out
    }

    pub fn to_text(&self) -> String {
        terms_to_text(&self.to_terms())
    }
}

impl FromStr for ModularExpr {
    type Err = ModularError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(ModularExpr::from_terms(&parse_terms(s)?))
    }
}

/// Rewrite the closed-form terms `k^{-2} δ_i(k) δ_j(k)` and `k^{-1} δ_iδ_j(k)`
/// as modular terms. Under the trace,
/// `τ0(k^{-1} δ_iδ_j(k)) = τ0(k^{-2} Δ^{-1/2}(δ_i k) δ_j k)`; the mixed
/// second derivative is split evenly between `(1,2)` and `(2,1)`.
pub fn direct_terms(direct: &NCPoly) -> Result<Vec<ModularTerm>, ModularError> {
    let idx = |a: &Atom| match a {
        Atom::DK { a: 1, b: 0, twist: 0 } => Some(1u8),
        Atom::DK { a: 0, b: 1, twist: 0 } => Some(2u8),
        _ => None,
    };
    let mut out = Vec::new();
    for (w, c) in direct.terms() {
        let bad = || ModularError::NotBilinear(format!("[{c}] {w}"));
        match w.atoms() {
            [Atom::KPow(-2), x, y] => {
                let (i, j) = (idx(x).ok_or_else(bad)?, idx(y).ok_or_else(bad)?);
                out.push(ModularTerm { coeff: c.clone(), i, j, m: 0, twist: 0 });
            }
            [Atom::KPow(-1), Atom::DK { a, b, twist: 0 }] if a + b == 2 => {
                let pairs: Vec<(u8, u8, Rational)> = match (a, b) {
                    (2, 0) => vec![(1, 1, Rational::one())],
                    (0, 2) => vec![(2, 2, Rational::one())],
                    _ => vec![(1, 2, rat(1, 2)), (2, 1, rat(1, 2))],
                };
                for (i, j, s) in pairs {
                    out.push(ModularTerm { coeff: c.scale(&s), i, j, m: 0, twist: -1 });
                }
            }
            _ => return Err(bad()),
        }
    }
    Ok(out)
}

/// Collect the closed-form terms and the modified-logarithm terms into slot
/// form. The trace of `b2` enters `ζ(0)` with a minus sign, so the slots hold
/// the negated sum: the result represents `ζ(0) + 1` up to `2π/τ2`.
pub fn assemble_premain(direct: &NCPoly, modular: &[ModularTerm]) -> Result<ModularExpr, ModularError> {
    Ok(assemble_raw(direct, modular)?.neg())
}

/// The collected sum without the sign change.
pub fn assemble_raw(direct: &NCPoly, modular: &[ModularTerm]) -> Result<ModularExpr, ModularError> {
    let mut out = ModularExpr::zero();
    for t in direct_terms(direct)?.iter().chain(modular) {
        out.add_term(t);
    }
    Ok(out)
}

/// `1/6 u^{-1/2} - 1/3 + L1 - 2(1+u^{1/2}) L2 + (1+u^{1/2})^2 L3`.
pub fn expected_f() -> SpectralFn {
    let one_plus = SpectralFn::constant(Rational::one()).add(&SpectralFn::u_pow(1));
    let sq = one_plus.mul(&one_plus).unwrap();
    SpectralFn::u_pow(-1)
        .scale(&rat(1, 6))
        .add(&SpectralFn::constant(rat(-1, 3)))
        .add(&SpectralFn::log_m(1))
        .add(&one_plus.mul(&SpectralFn::log_m(2)).unwrap().scale(&int(-2)))
        .add(&sq.mul(&SpectralFn::log_m(3)).unwrap())
}

/// Expected ratio `F_ij / f`.
pub fn slot_ratio(i: u8, j: u8) -> ScalarPoly {
    match (i, j) {
        (1, 1) => ScalarPoly::one(),
        (2, 2) => ScalarPoly::tau_abs_sq(),
        _ => ScalarPoly::var(Var::Tau1),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotCheck {
    pub slot: (u8, u8),
    pub ratio: ScalarPoly,
    pub ok: bool,
    /// Basis elements where `F_ij` differs from `ratio · f`.
    pub offending: Vec<Basis>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegroupCertificate {
    pub f_tau_free: bool,
    pub slots: Vec<SlotCheck>,
    /// `f` equals the expected closed form.
    pub f_match: bool,
}

impl RegroupCertificate {
    pub fn passed(&self) -> bool {
        self.f_tau_free && self.f_match && self.slots.iter().all(|s| s.ok)
    }
}

/// Read `f` off slot `(1,1)` and check every slot against its ratio.
pub fn regroup_f(m: &ModularExpr) -> (SpectralFn, RegroupCertificate) {
    let f = m.slot(1, 1);
    let slots = SLOTS
        .iter()
        .map(|&(i, j)| {
            let ratio = slot_ratio(i, j);
            let diff = m.slot(i, j).sub(&f.mul_scalar(&ratio));
            let offending: Vec<Basis> = diff.terms().map(|(b, _)| *b).collect();
            SlotCheck {
                slot: (i, j),
                ratio,
                ok: offending.is_empty(),
                offending,
            }
        })
        .collect();
    let cert = RegroupCertificate {
        f_tau_free: f.is_tau_free(),
        slots,
        f_match: f == expected_f(),
    };
    (f, cert)
}

/// `L_m(1 + t) = Σ_n (-t)^n / (m + n + 1)`.
fn log_m_series(m: u8, t: f64) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for n in 0..=24 {
        acc += p / f64::from(m as u32 + n + 1);
        p *= -t;
    }
    acc
}

/// `(-1)^m (u-1)^{-(m+1)} (log u - Σ_{j=1}^m (-1)^{j+1} (u-1)^j / j)`.
fn log_m_closed(m: u8, u: f64) -> f64 {
    let t = u - 1.0;
    let mut s = t.ln_1p();
    let mut p = 1.0;
    for j in 1..=m as i32 {
        p *= t;
        let term = p / f64::from(j);
        s -= if j % 2 == 1 { term } else { -term };
    }
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * s / t.powi(m as i32 + 1)
}

/// Radius around `u = 1` inside which `L_m` is summed as a series.
pub const SERIES_RADIUS: f64 = 0.1;

pub fn log_m(m: u8, u: f64) -> Result<f64, ModularError> {
    if !(u > 0.0) {
        return Err(ModularError::Domain(u));
    }
    match m {
        0 => Ok(1.0),
        1..=3 => Ok(if (u - 1.0).abs() < SERIES_RADIUS {
            log_m_series(m, u - 1.0)
        } else {
            log_m_closed(m, u)
        }),
        _ => Err(ModularError::Order(m)),
    }
}

/// Evaluate both routes of `L_m` at `u` (series, closed form); for testing the seam.
pub fn log_m_both(m: u8, u: f64) -> (f64, f64) {
    (log_m_series(m, u - 1.0), log_m_closed(m, u))
}

/// Numeric value of a spectral function at `u > 0` and the given `τ`.
pub fn eval_spectral_tau(s: &SpectralFn, u: f64, tau1: f64, tau2: f64) -> Result<f64, ModularError> {
    if !(u > 0.0) {
        return Err(ModularError::Domain(u));
    }
    let mut acc = 0.0;
    for (b, c) in s.terms() {
        acc += c.eval_tau(tau1, tau2)? * u.powf(f64::from(b.half) / 2.0) * log_m(b.m, u)?;
    }
    Ok(acc)
}

/// Numeric value of a τ-free spectral function.
pub fn eval_spectral(s: &SpectralFn, u: f64) -> Result<f64, ModularError> {
    if !s.is_tau_free() {
        return Err(ModularError::TauDependent(s.to_string()));
    }
    eval_spectral_tau(s, u, 0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Rational functions in y = e^{x/2} with Laurent-polynomial dependence on x.

/// Dense polynomial in `y` over the rationals, low degree first.
#[derive(Debug, Clone, PartialEq, Eq)]
struct UPoly(Vec<Rational>);

impl UPoly {
    fn trim(mut self) -> UPoly {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        self
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn deg(&self) -> usize {
        self.0.len() - 1
    }

    fn lead(&self) -> &Rational {
        self.0.last().unwrap()
    }

    fn divrem(&self, d: &UPoly) -> (UPoly, UPoly) {
        let mut r = self.0.clone();
        let dd = d.deg();
        if r.len() <= dd {
            return (UPoly(vec![]), self.clone());
        }
        let mut q = vec![Rational::zero(); r.len() - dd];
        for i in (0..q.len()).rev() {
            let c = &r[i + dd] / d.lead();
            if !c.is_zero() {
                for (k, dc) in d.0.iter().enumerate() {
                    r[i + k] -= &c * dc;
                }
            }
            q[i] = c;
        }
        (UPoly(q).trim(), UPoly(r).trim())
    }

    fn monic(self) -> UPoly {
        if self.is_zero() {
            return self;
        }
        let l = self.lead().clone();
        UPoly(self.0.into_iter().map(|c| c / &l).collect())
    }

    fn gcd(a: &UPoly, b: &UPoly) -> UPoly {
        let (mut a, mut b) = (a.clone(), b.clone());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }
}

/// Sparse polynomial in `x^{±1}` and `y^{±1}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct XYPoly {
    /// `(x exponent, y exponent) -> coefficient`.
    terms: BTreeMap<(i32, i32), Rational>,
}

impl XYPoly {
    pub fn zero() -> XYPoly {
        XYPoly::default()
    }

    pub fn constant(c: Rational) -> XYPoly {
        XYPoly::mono(0, 0, c)
    }

    pub fn mono(ex: i32, ey: i32, c: Rational) -> XYPoly {
        let mut p = XYPoly::zero();
        p.add_mono(ex, ey, c);
        p
    }

    /// `Σ c_i y^i` from integer coefficients, lowest first.
    pub fn y_poly(coeffs: &[i64]) -> XYPoly {
        let mut p = XYPoly::zero();
        for (i, c) in coeffs.iter().enumerate() {
            p.add_mono(0, i as i32, int(*c));
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(i32, i32), &Rational)> {
        self.terms.iter()
    }

    fn add_mono(&mut self, ex: i32, ey: i32, c: Rational) {
        let e = self.terms.entry((ex, ey)).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&(ex, ey));
        }
    }

    pub fn add(&self, o: &XYPoly) -> XYPoly {
        let mut out = self.clone();
        for (&(a, b), c) in &o.terms {
            out.add_mono(a, b, c.clone());
        }
        out
    }

    pub fn scale(&self, q: &Rational) -> XYPoly {
        let mut out = XYPoly::zero();
        for (&(a, b), c) in &self.terms {
            out.add_mono(a, b, c * q);
        }
        out
    }

    pub fn sub(&self, o: &XYPoly) -> XYPoly {
        self.add(&o.scale(&int(-1)))
    }

    pub fn mul(&self, o: &XYPoly) -> XYPoly {
        let mut out = XYPoly::zero();
        for (&(a, b), c) in &self.terms {
            for (&(a2, b2), c2) in &o.terms {
                out.add_mono(a + a2, b + b2, c * c2);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> XYPoly {
        (0..e).fold(XYPoly::constant(Rational::one()), |acc, _| acc.mul(self))
    }

    pub fn shift(&self, ex: i32, ey: i32) -> XYPoly {
        XYPoly {
            terms: self.terms.iter().map(|(&(a, b), c)| ((a + ex, b + ey), c.clone())).collect(),
        }
    }

    /// `x -> -x, y -> 1/y`.
    pub fn reflect(&self) -> XYPoly {
        XYPoly {
            terms: self
                .terms
                .iter()
                .map(|(&(a, b), c)| ((a, -b), if a % 2 == 0 { c.clone() } else { -c }))
                .collect(),
        }
    }

    fn mentions_x(&self) -> bool {
        self.terms.keys().any(|k| k.0 != 0)
    }

    fn min_y(&self) -> i32 {
        self.terms.keys().map(|k| k.1).min().unwrap_or(0)
    }

    /// Coefficients of each x-power as a polynomial in y, after shifting by `y^{-shift}`.
    fn by_x(&self, shift: i32) -> BTreeMap<i32, UPoly> {
        let mut out: BTreeMap<i32, Vec<Rational>> = BTreeMap::new();
        for (&(a, b), c) in &self.terms {
            let v = out.entry(a).or_default();
            let i = (b - shift) as usize;
            if v.len() <= i {
                v.resize(i + 1, Rational::zero());
            }
            v[i] = c.clone();
        }
        out.into_iter().map(|(a, v)| (a, UPoly(v).trim())).collect()
    }

    fn from_by_x(parts: &BTreeMap<i32, UPoly>, shift: i32) -> XYPoly {
        let mut out = XYPoly::zero();
        for (&a, p) in parts {
            for (i, c) in p.0.iter().enumerate() {
                out.add_mono(a, i as i32 + shift, c.clone());
            }
        }
        out
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = (x / 2.0).exp();
        self.terms
            .iter()
            .map(|(&(a, b), c)| to_f64(c) * x.powi(a) * y.powi(b))
            .sum()
    }
}

const SERIES_DEPTH: i32 = 30;

fn to_f64(q: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Display for XYPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(&(a, b), c)| format!("{c}*x^{a}*y^{b}"))
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpError {
    #[error("denominator must be a nonzero polynomial in y")]
    BadDenominator,
    #[error("spectral function is not tau-free")]
    TauDependent,
    #[error("identity fails; residual numerator {0}")]
    Residual(XYPoly),
}

/// `num / den` with `den` a polynomial in `y` alone.
///
/// Canonical form: `den` monic with nonzero constant term and coprime to every
/// x-coefficient of `num`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpRational {
    num: XYPoly,
    den: XYPoly,
}

impl ExpRational {
    pub fn new(num: XYPoly, den: XYPoly) -> Result<ExpRational, ExpError> {
        if den.is_zero() || den.mentions_x() {
            return Err(ExpError::BadDenominator);
        }
        Ok(ExpRational { num, den }.reduce())
    }

    pub fn poly(num: XYPoly) -> ExpRational {
        ExpRational::new(num, XYPoly::constant(Rational::one())).unwrap()
    }

    pub fn zero() -> ExpRational {
        ExpRational::poly(XYPoly::zero())
    }

    pub fn num(&self) -> &XYPoly {
        &self.num
    }

    pub fn den(&self) -> &XYPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn reduce(self) -> ExpRational {
        if self.num.is_zero() {
            return ExpRational {
                num: XYPoly::zero(),
                den: XYPoly::constant(Rational::one()),
            };
        }
        // Move powers of y out of the denominator.
        let dshift = self.den.min_y();
        let den = self.den.by_x(dshift).remove(&0).unwrap();
        let nshift = self.num.min_y();
        let mut num = self.num.by_x(nshift);
        let mut g = den.clone();
        for p in num.values() {
            g = UPoly::gcd(&g, p);
            if g.deg() == 0 {
                break;
            }
        }
        let (mut den, _) = den.divrem(&g);
        for p in num.values_mut() {
            *p = p.divrem(&g).0;
        }
        let l = den.lead().clone();
        den = UPoly(den.0.into_iter().map(|c| c / &l).collect());
        for p in num.values_mut() {
            *p = UPoly(p.0.iter().map(|c| c / &l).collect());
        }
        ExpRational {
            num: XYPoly::from_by_x(&num, nshift - dshift),
            den: XYPoly::from_by_x(&BTreeMap::from([(0, den)]), 0),
        }
    }

    pub fn add(&self, o: &ExpRational) -> ExpRational {
        ExpRational {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
        .reduce()
    }

    pub fn sub(&self, o: &ExpRational) -> ExpRational {
        self.add(&o.scale(&int(-1)))
    }

    pub fn mul(&self, o: &ExpRational) -> ExpRational {
        ExpRational {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        }
        .reduce()
    }

    pub fn scale(&self, q: &Rational) -> ExpRational {
        ExpRational {
            num: self.num.scale(q),
            den: self.den.clone(),
        }
        .reduce()
    }

    pub fn mul_poly(&self, p: &XYPoly) -> ExpRational {
        self.mul(&ExpRational::poly(p.clone()))
    }

    /// `x -> -x`, equivalently `y -> 1/y`.
    pub fn reflect(&self) -> ExpRational {
        ExpRational {
            num: self.num.reflect(),
            den: self.den.reflect(),
        }
        .reduce()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.num.eval(x) / self.den.eval(x)
    }

    /// `eval` away from 0; the exact Laurent series for `|x| < 1/2`, where
    /// the closed form cancels badly.
    pub fn eval_stable(&self, x: f64) -> f64 {
        if x.abs() >= 0.5 {
            return self.eval(x);
        }
        self.series(SERIES_DEPTH)
            .iter()
            .map(|(&n, c)| to_f64(c) * x.powi(n))
            .sum()
    }

    /// Laurent expansion in `x` about 0 through `x^max`, using `y = e^{x/2}`.
    pub fn series(&self, max: i32) -> BTreeMap<i32, Rational> {
        let depth = (max + 2 * self.den_order() + 4).max(4);
        let n = laurent_series(&self.num, depth);
        let d = laurent_series(&self.den, depth);
        series_div(&n, &d, max)
    }

    /// Order of vanishing of the denominator at `x = 0`.
    fn den_order(&self) -> i32 {
        let d = laurent_series(&self.den, 64);
        d.iter().find(|(_, c)| !c.is_zero()).map(|(k, _)| *k).unwrap_or(0)
    }
}

impl fmt::Display for ExpRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

/// Expand an x,y-polynomial as a series in x through `x^max`.
fn laurent_series(p: &XYPoly, max: i32) -> BTreeMap<i32, Rational> {
    let mut out: BTreeMap<i32, Rational> = BTreeMap::new();
    for (&(a, b), c) in p.terms() {
        // y^b = e^{b x / 2}
        let mut t = c.clone();
        let half_b = rat(b as i64, 2);
        let mut n = 0i32;
        while a + n <= max {
            *out.entry(a + n).or_insert_with(Rational::zero) += &t;
            n += 1;
            t = t * &half_b / int(n as i64);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn series_div(n: &BTreeMap<i32, Rational>, d: &BTreeMap<i32, Rational>, max: i32) -> BTreeMap<i32, Rational> {
    let Some((&d0k, d0)) = d.iter().next() else {
        return BTreeMap::new();
    };
    let Some(&n0k) = n.keys().next() else {
        return BTreeMap::new();
    };
    let start = n0k - d0k;
    let mut out = BTreeMap::new();
    let mut rem = n.clone();
    let mut k = start;
    while k <= max {
        let c = rem.get(&(k + d0k)).cloned().unwrap_or_else(Rational::zero) / d0;
        if !c.is_zero() {
            for (dk, dc) in d {
                *rem.entry(k + dk).or_insert_with(Rational::zero) -= &c * dc;
            }
            out.insert(k, c);
        }
        k += 1;
    }
    out
}

/// `L_m` in the variables `y = u^{1/2}`, `x = log u`.
pub fn log_m_exp(m: u8) -> ExpRational {
    let t = XYPoly::y_poly(&[-1, 0, 1]); // u - 1
    let mut inner = XYPoly::mono(1, 0, Rational::one());
    for j in 1..=m as u32 {
        let s = if j % 2 == 1 { rat(-1, j as i64) } else { rat(1, j as i64) };
        inner = inner.add(&t.pow(j).scale(&s));
    }
    let sign = if m % 2 == 0 { Rational::one() } else { -Rational::one() };
    ExpRational::new(inner.scale(&sign), t.pow(m as u32 + 1)).unwrap()
}

/// Substitute `u = y^2`, `log u = x`.
pub fn to_exp_form(s: &SpectralFn) -> Result<ExpRational, ExpError> {
    let mut acc = ExpRational::zero();
    for (b, c) in s.terms() {
        let c = c.as_constant().ok_or(ExpError::TauDependent)?;
        let mut t = ExpRational::poly(XYPoly::mono(0, b.half, c));
        if b.m > 0 {
            t = t.mul(&log_m_exp(b.m));
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

/// `h(x) = -y^{-1}(-1 + 3y + 3y^2 + 6y^3 x - 3y^4 - 3y^5 + y^6) / (6 (y-1)^4 (y+1)^2)`.
pub fn expected_h() -> ExpRational {
    let num = XYPoly::y_poly(&[-1, 3, 3, 0, -3, -3, 1])
        .add(&XYPoly::mono(1, 3, int(6)))
        .shift(0, -1)
        .scale(&int(-1));
    let den = XYPoly::y_poly(&[-1, 1]).pow(4).mul(&XYPoly::y_poly(&[1, 1]).pow(2)).scale(&int(6));
    ExpRational::new(num, den).unwrap()
}

/// `K = 4 x^{-2} (y-1)^2 h`.
pub fn compute_k(h: &ExpRational) -> ExpRational {
    h.mul_poly(&XYPoly::y_poly(&[-1, 1]).pow(2).shift(-2, 0).scale(&int(4)))
}

/// `-(x - sh(x/2) - sh(x) + sh(3x/2)/3) / (x^2 sh(x/2)^2)` with `sh(ax/2) = (y^a - y^{-a})/2`.
pub fn sh_form_k() -> ExpRational {
    let sh = |a: i32| XYPoly::mono(0, a, rat(1, 2)).add(&XYPoly::mono(0, -a, rat(-1, 2)));
    let num = XYPoly::mono(1, 0, Rational::one())
        .sub(&sh(1))
        .sub(&sh(2))
        .add(&sh(3).scale(&rat(1, 3)))
        .scale(&int(-1));
    // x^2 sh(x/2)^2 = x^2 (y^2 - 1)^2 / (4 y^2)
    let num = num.shift(-2, 2).scale(&int(4));
    ExpRational::new(num, XYPoly::y_poly(&[-1, 0, 1]).pow(2)).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KCertificate {
    /// `to_exp_form(f)` equals the expected `h`.
    pub h_match: bool,
    /// `K` equals the hyperbolic-sine form.
    pub sh_match: bool,
    /// `K(x) + K(-x) = 0`.
    pub odd: bool,
    /// Taylor coefficients of `K` at 0 through `x^5`.
    pub series: Vec<(i32, Rational)>,
    pub k: ExpRational,
    pub residual: Option<XYPoly>,
}

impl KCertificate {
    pub fn passed(&self) -> bool {
        self.h_match && self.sh_match && self.odd
    }

    /// `K(0)`; zero when `K` is odd and regular.
    pub fn value_at_zero(&self) -> Rational {
        self.series.iter().find(|(k, _)| *k == 0).map(|(_, c)| c.clone()).unwrap_or_default()
    }
}

/// Convert `f` to exponential form and check `h`, `K` and the parity of `K`.
pub fn k_certificate(f: &SpectralFn) -> Result<KCertificate, ExpError> {
    let h = to_exp_form(f)?;
    let k = compute_k(&h);
    let sum = k.add(&k.reflect());
    let series = k.series(5).into_iter().collect();
    Ok(KCertificate {
        h_match: h == expected_h(),
        sh_match: k == sh_form_k(),
        odd: sum.is_zero(),
        series,
        residual: (!sum.is_zero()).then(|| sum.num().clone()),
        k,
    })
}

pub const CONCLUSION: &str = "ζ(0) is independent of k and τ; ζ(0) = −1";

#[derive(Debug, Clone, PartialEq)]
pub struct Conclusion {
    pub zeta0: i64,
    /// `ratio(1,2) - ratio(2,1)`; the off-diagonal pair cancels when zero.
    pub off_diagonal_residual: ScalarPoly,
    pub statement: String,
}

/// Antisymmetry `φ(f(Δ)(δ_i k) δ_j k) = -φ(f(Δ)(δ_j k) δ_i k)` follows from
/// the oddness of `K`; it kills the diagonal slots and pairs off the others.
pub fn conclude(regroup: &RegroupCertificate, k: &KCertificate) -> Result<Conclusion, ModularError> {
    if !regroup.passed() {
        return Err(ModularError::Missing("slot regrouping failed".into()));
    }
    if !k.odd {
        return Err(ModularError::Missing("K is not odd".into()));
    }
    if !k.h_match || !k.sh_match {
        return Err(ModularError::Missing("h or K does not match its closed form".into()));
    }
    let ratio = |s: (u8, u8)| regroup.slots.iter().find(|c| c.slot == s).map(|c| c.ratio.clone());
    let (Some(r12), Some(r21)) = (ratio((1, 2)), ratio((2, 1))) else {
        return Err(ModularError::Missing("off-diagonal slots".into()));
    };
    let residual = &r12 - &r21;
    if !residual.is_zero() {
        return Err(ModularError::Missing(format!("off-diagonal slots differ by {residual}")));
    }
    Ok(Conclusion {
        zeta0: -1,
        off_diagonal_residual: residual,
        statement: CONCLUSION.to_string(),
    })
}

/// `|a - b| <= tol · max(|a|, |b|, 1)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(s: &str) -> ScalarPoly {
        s.parse().unwrap()
    }

    #[test]
    fn term_text_roundtrip() {
        let text = "[-1] (1,1) L1 u^0\n[2*tau1^1] (1,2) L2 u^1/2\n[1/6] (2,2) 1 u^-1/2\n";
        let t = parse_terms(text).unwrap();
        assert_eq!(t[2].twist, -1);
        assert_eq!(t[2].m, 0);
        assert_eq!(terms_to_text(&t), text);
        assert!(parse_terms("[1] (3,1) L1 u^0").is_err());
        assert!(parse_terms("[1] (1,1) L4 u^0").is_err());
        assert!(parse_terms("[1] (1,1) L1 u^2/2").is_err());
    }

    #[test]
    fn direct_term_rewrites() {
        let d: NCPoly = "[-1/6] k^-1 dk(2,0;0)\n[-1/3*tau1^1] k^-1 dk(1,1;0)\n[1/3] k^-2 dk(1,0;0) dk(1,0;0)\n"
            .parse()
            .unwrap();
        let e = assemble_raw(&d, &[]).unwrap();
        assert_eq!(e.slot(1, 1).coeff(&Basis::new(0, -1)), sp("-1/6"));
        assert_eq!(e.slot(1, 1).coeff(&Basis::new(0, 0)), sp("1/3"));
        assert_eq!(e.slot(1, 2).coeff(&Basis::new(0, -1)), sp("-1/6*tau1^1"));
        assert_eq!(e.slot(2, 1).coeff(&Basis::new(0, -1)), sp("-1/6*tau1^1"));
        assert!(assemble_premain(&NCPoly::zero(), &[]).unwrap().is_zero());
        let bad: NCPoly = "[1] k^-1 dk(1,0;0) dk(1,0;0)\n".parse().unwrap();
        assert!(direct_terms(&bad).is_err());
    }

    #[test]
    fn logarithm_values() {
        for m in 1..=3u8 {
            assert!((log_m(m, 1.0).unwrap() - 1.0 / f64::from(m + 1)).abs() < 1e-15);
        }
        assert!((log_m(1, 2.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!(log_m(1, 0.0).is_err());
        for m in 1..=3u8 {
            for u in [0.9, 1.1, 0.9000001, 1.0999999] {
                let (s, c) = log_m_both(m, u);
                assert!((s - c).abs() < 1e-12, "m={m} u={u}: {s} vs {c}");
            }
        }
    }

    #[test]
    fn log1_exp_form() {
        // (y^2 - 1 - x) / (y^2 - 1)^2
        let num = XYPoly::y_poly(&[-1, 0, 1]).sub(&XYPoly::mono(1, 0, Rational::one()));
        let expect = ExpRational::new(num, XYPoly::y_poly(&[-1, 0, 1]).pow(2)).unwrap();
        assert_eq!(log_m_exp(1), expect);
        assert_eq!(to_exp_form(&SpectralFn::constant(Rational::one())).unwrap(), ExpRational::poly(XYPoly::constant(Rational::one())));
    }

    #[test]
    fn reduction_cancels_common_factor() {
        // (y^2 - 1) / (y - 1) = y + 1
        let r = ExpRational::new(XYPoly::y_poly(&[-1, 0, 1]), XYPoly::y_poly(&[-1, 1])).unwrap();
        assert_eq!(r, ExpRational::poly(XYPoly::y_poly(&[1, 1])));
        // y^{-1}/y^{-1} = 1
        let r = ExpRational::new(XYPoly::mono(0, -1, int(2)), XYPoly::mono(0, -1, int(2))).unwrap();
        assert_eq!(r, ExpRational::poly(XYPoly::constant(Rational::one())));
    }

    #[test]
    fn f_to_h_and_k() {
        let cert = k_certificate(&expected_f()).unwrap();
        assert!(cert.h_match, "h = {}", to_exp_form(&expected_f()).unwrap());
        assert!(cert.sh_match);
        assert!(cert.odd);
        assert!(cert.value_at_zero().is_zero());
        // numeric cross-check near 0
        let x = 1e-3;
        let sh = |t: f64| t.sinh();
        let direct = -(x - sh(x / 2.0) - sh(x) + sh(1.5 * x) / 3.0) / (x * x * sh(x / 2.0).powi(2));
        let c1 = to_f64(&cert.series.iter().find(|(k, _)| *k == 1).unwrap().1);
        assert!((direct - c1 * x).abs() < 1e-6, "{direct} vs {}", c1 * x);
    }

    #[test]
    fn f_and_h_agree_numerically() {
        let h = expected_h();
        for u in [0.1, 0.3, 0.7, 1.5, 2.0, 4.5, 10.0] {
            let a = eval_spectral(&expected_f(), u).unwrap();
            let b = h.eval(f64::ln(u));
            assert!(rel_close(a, b, 1e-12), "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn negative_controls() {
        // u^{-1/2} gives an even K
        let c = k_certificate(&SpectralFn::u_pow(-1)).unwrap();
        assert!(!c.odd);
        assert!(c.k.sub(&c.k.reflect()).is_zero());
        let f = expected_f();
        for (b, _) in f.terms() {
            let bad = f.perturb(*b, &rat(1, 1000));
            let c = k_certificate(&bad).unwrap();
            assert!(!c.passed(), "perturbing {b} went unnoticed");
        }
    }

    #[test]
    fn regroup_on_expected_slots() {
        let f = expected_f();
        let mut e = ModularExpr::zero();
        for (i, j) in SLOTS {
            e.set_slot(i, j, f.mul_scalar(&slot_ratio(i, j)));
        }
        let (got, cert) = regroup_f(&e);
        assert_eq!(got, f);
        assert!(cert.passed());
        let k = k_certificate(&got).unwrap();
        let c = conclude(&cert, &k).unwrap();
        assert_eq!(c.zeta0, -1);
        let at_i = e.specialize(Var::Tau1, &Rational::zero());
        assert!(at_i.slot(1, 2).is_zero() && at_i.slot(2, 1).is_zero());

        let mut broken = e.clone();
        broken.set_slot(2, 1, f.mul_scalar(&sp("2*tau1^1")));
        let (_, cert) = regroup_f(&broken);
        assert!(!cert.passed());
        assert!(conclude(&cert, &k).is_err());
    }
}
