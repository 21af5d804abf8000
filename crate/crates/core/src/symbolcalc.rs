//! Graded symbols, their product and adjoint, and the parametrix of `k∆k`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::coeffring::{factorial, int, Rational, ScalarPoly, Var};
use crate::ncalg::{vanishes_mod_b0, Atom, Context, Direction, NCPoly, NcError, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("parametrix order must be nonnegative, got {0}")]
    NegativeOrder(i32),
    #[error(transparent)]
    Nc(#[from] NcError),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Components indexed by homogeneity order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GradedSymbol {
    components: BTreeMap<i32, NCPoly>,
}

impl GradedSymbol {
    pub fn new() -> Self {
        GradedSymbol::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut g = GradedSymbol::new();
        g.insert(0, NCPoly::scalar(ScalarPoly::constant(c)));
        g
    }

    pub fn insert(&mut self, order: i32, p: NCPoly) {
        if p.is_zero() {
            self.components.remove(&order);
        } else {
            self.components.insert(order, p);
        }
    }

    pub fn add_to(&mut self, order: i32, p: &NCPoly) {
        let cur = self.component(order);
        self.insert(order, cur.add(p));
    }

    pub fn component(&self, order: i32) -> NCPoly {
        self.components.get(&order).cloned().unwrap_or_default()
    }

    pub fn components(&self) -> impl Iterator<Item = (&i32, &NCPoly)> {
        self.components.iter()
    }

    pub fn max_order(&self) -> Option<i32> {
        self.components.keys().next_back().copied()
    }

    pub fn truncate(&self, min_order: i32) -> GradedSymbol {
        GradedSymbol {
            components: self
                .components
                .range(min_order..)
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&NCPoly) -> NCPoly) -> GradedSymbol {
        let mut g = GradedSymbol::new();
        for (k, v) in &self.components {
            g.insert(*k, f(v));
        }
        g
    }

    /// Serialized form: `## order <n>` headers followed by term lists.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.components.iter().rev() {
            out.push_str(&format!("## order {k}\n"));
            out.push_str(&v.to_term_list());
        }
        out
    }

    pub fn parse_text(s: &str) -> Result<GradedSymbol, SymbolError> {
        let mut g = GradedSymbol::new();
        let mut current: Option<(i32, usize, String)> = None;
        let mut offset = 0;
        let flush = |cur: Option<(i32, usize, String)>, g: &mut GradedSymbol| -> Result<(), SymbolError> {
            if let Some((k, base, body)) = cur {
                let p = NCPoly::parse_term_list(&body).map_err(|e| match e {
                    NcError::Parse { pos, msg } => SymbolError::Parse { pos: base + pos, msg },
                    other => SymbolError::Nc(other),
                })?;
                g.insert(k, p);
            }
            Ok(())
        };
        for line in s.split_inclusive('\n') {
            if let Some(rest) = line.strip_prefix("## order ") {
                flush(current.take(), &mut g)?;
                let k: i32 = rest.trim().parse().map_err(|_| SymbolError::Parse {
                    pos: offset,
                    msg: "bad order header".into(),
                })?;
                current = Some((k, offset + line.len(), String::new()));
            } else if let Some((_, _, body)) = current.as_mut() {
                body.push_str(line);
            } else if !line.trim().is_empty() {
                return Err(SymbolError::Parse {
                    pos: offset,
                    msg: "term before first order header".into(),
                });
            }
            offset += line.len();
        }
        flush(current, &mut g)?;
        Ok(g)
    }
}

impl fmt::Display for GradedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Symbol calculus over a fixed conformal class. `tau1` and `tau_sq` are
/// either symbolic (`tau1`, `tau1^2+tau2^2`) or specialized rationals.
#[derive(Debug, Clone)]
pub struct Calculus {
    pub tau1: ScalarPoly,
    pub tau_sq: ScalarPoly,
    pub ctx: Context,
}

impl Default for Calculus {
    fn default() -> Self {
        Calculus::symbolic()
    }
}

impl Calculus {
    pub fn symbolic() -> Calculus {
        Calculus::with(ScalarPoly::var(Var::Tau1), ScalarPoly::tau_abs_sq())
    }

    pub fn specialized(tau1: Rational, tau_sq: Rational) -> Calculus {
        Calculus::with(ScalarPoly::constant(tau1), ScalarPoly::constant(tau_sq))
    }

    fn with(tau1: ScalarPoly, tau_sq: ScalarPoly) -> Calculus {
        let ctx = Context::xi_with(&tau1, &tau_sq);
        Calculus { tau1, tau_sq, ctx }
    }

    /// Symbol of `k∆k`: orders 2, 1, 0.
    pub fn laplacian_symbol(&self) -> GradedSymbol {
        let x1 = ScalarPoly::var(Var::Xi1);
        let x2 = ScalarPoly::var(Var::Xi2);
        let two = int(2);
        let w = |atoms: Vec<Atom>| Word::new(atoms);
        let k = Atom::KPow(1);

        let a2 = NCPoly::term(w(vec![Atom::KPow(2)]), self.ctx.s.clone());

        let mut a1 = NCPoly::zero();
        a1.add_term(w(vec![k, Atom::dk(1, 0)]), (&x1 + &(&x2 * &self.tau1)).scale(&two));
        a1.add_term(
            w(vec![k, Atom::dk(0, 1)]),
            (&(&x2 * &self.tau_sq) + &(&x1 * &self.tau1)).scale(&two),
        );

        let mut a0 = NCPoly::zero();
        a0.add_term(w(vec![k, Atom::dk(2, 0)]), ScalarPoly::one());
        a0.add_term(w(vec![k, Atom::dk(0, 2)]), self.tau_sq.clone());
        a0.add_term(w(vec![k, Atom::dk(1, 1)]), self.tau1.scale(&two));

        let mut g = GradedSymbol::new();
        g.insert(2, a2);
        g.insert(1, a1);
        g.insert(0, a0);
        g
    }

    /// Symbol of the flat Laplacian `∆`, a scalar of order 2.
    pub fn flat_laplacian_symbol(&self) -> GradedSymbol {
        let mut g = GradedSymbol::new();
        g.insert(2, NCPoly::scalar(self.ctx.s.clone()));
        g
    }

    /// `∂_1^{l1} ∂_2^{l2}` of a component.
    fn partials(&self, p: &NCPoly, l1: u32, l2: u32) -> Result<NCPoly, NcError> {
        p.derive_n(Direction::DXi1, l1, &self.ctx)?
            .derive_n(Direction::DXi2, l2, &self.ctx)
    }

    fn deltas(&self, p: &NCPoly, l1: u32, l2: u32) -> Result<NCPoly, NcError> {
        p.derive_n(Direction::Delta1, l1, &self.ctx)?
            .derive_n(Direction::Delta2, l2, &self.ctx)
    }

    /// `Σ (1/l1! l2!) ∂^l(ρ) δ^l(ρ')`, keeping orders `≥ min_order`.
    pub fn symbol_product(
        &self,
        p: &GradedSymbol,
        q: &GradedSymbol,
        min_order: i32,
    ) -> Result<GradedSymbol, SymbolError> {
        let mut jobs = Vec::new();
        for (&i, _) in p.components() {
            for (&j, _) in q.components() {
                let budget = i + j - min_order;
                for l in 0..=budget.max(-1) {
                    for l1 in 0..=l {
                        jobs.push((i, j, l1 as u32, (l - l1) as u32));
                    }
                }
            }
        }
        let parts: Vec<Result<(i32, NCPoly), NcError>> = jobs
            .par_iter()
            .map(|&(i, j, l1, l2)| {
                let dp = self.partials(&p.component(i), l1, l2)?;
                if dp.is_zero() {
                    return Ok((0, NCPoly::zero()));
                }
                let dq = self.deltas(&q.component(j), l1, l2)?;
                let w = (factorial(l1) * factorial(l2)).recip();
                Ok((i + j - (l1 + l2) as i32, dp.mul(&dq).scale(&w)))
            })
            .collect();
        let mut out = GradedSymbol::new();
        for r in parts {
            let (ord, poly) = r?;
            if !poly.is_zero() {
                out.add_to(ord, &poly);
            }
        }
        Ok(out)
    }

    /// `Σ (1/l!) ∂^l δ^l (ρ^*)`, keeping orders `≥ min_order`.
    pub fn symbol_adjoint(&self, p: &GradedSymbol, min_order: i32) -> Result<GradedSymbol, SymbolError> {
        let mut out = GradedSymbol::new();
        for (&i, comp) in p.components() {
            let star = star(comp);
            for l in 0..=(i - min_order).max(-1) {
                for l1 in 0..=l {
                    let l2 = l - l1;
                    let (l1, l2) = (l1 as u32, l2 as u32);
                    let d = self.partials(&self.deltas(&star, l1, l2)?, l1, l2)?;
                    let w = (factorial(l1) * factorial(l2)).recip();
                    out.add_to(i - l, &d.scale(&w));
                }
            }
        }
        Ok(out)
    }

    /// `b_0, …, b_{n_max}` at `λ = -1`, stored at orders `-2, …, -2-n_max`.
    pub fn parametrix(&self, n_max: i32) -> Result<GradedSymbol, SymbolError> {
        if n_max < 0 {
            return Err(SymbolError::NegativeOrder(n_max));
        }
        let a = self.laplacian_symbol();
        let b0 = NCPoly::atom(Atom::B0Pow(1));
        let mut bs: Vec<NCPoly> = vec![b0.clone()];
        for n in 1..=n_max {
            let mut jobs = Vec::new();
            for j in 0..n {
                for k in 0..=2 {
                    let l = n - 2 - j + k;
                    if l < 0 {
                        continue;
                    }
                    for l1 in 0..=l {
                        jobs.push((j as usize, k, l1 as u32, (l - l1) as u32));
                    }
                }
            }
            let parts: Vec<Result<NCPoly, NcError>> = jobs
                .par_iter()
                .map(|&(j, k, l1, l2)| {
                    let dq = self.deltas(&a.component(k), l1, l2)?;
                    if dq.is_zero() {
                        return Ok(NCPoly::zero());
                    }
                    let dp = self.partials(&bs[j], l1, l2)?;
                    let w = (factorial(l1) * factorial(l2)).recip();
                    Ok(dp.mul(&dq).mul(&b0).scale(&w))
                })
                .collect();
            let mut bn = NCPoly::zero();
            for p in parts {
                bn.add_assign(&p?);
            }
            bs.push(bn.neg());
        }
        let mut g = GradedSymbol::new();
        for (n, b) in bs.into_iter().enumerate() {
            g.insert(-2 - n as i32, b);
        }
        Ok(g)
    }

    /// `σ(k∆k) + 1` with the constant placed at order 2, matching
    /// `b0 = (a_2 + 1)^{-1}`.
    pub fn shifted_laplacian(&self) -> GradedSymbol {
        let mut a = self.laplacian_symbol();
        a.add_to(2, &NCPoly::one());
        a
    }

    /// Check `σ(B)·(σ(k∆k)+1) = 1` in every order `0, -1, …, -n`.
    pub fn composition_check(&self, b: &GradedSymbol, n: i32) -> Result<CompositionReport, SymbolError> {
        let prod = self.symbol_product(b, &self.shifted_laplacian(), -n)?;
        let mut orders = Vec::new();
        for ord in (-n..=0).rev() {
            let mut c = prod.component(ord);
            if ord == 0 {
                c = c.sub(&NCPoly::one());
            }
            orders.push((ord, vanishes_mod_b0(&c, &self.ctx.s)));
        }
        Ok(CompositionReport { orders })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionReport {
    /// `(order, residual vanishes)` for orders `0` down to `-n`.
    pub orders: Vec<(i32, bool)>,
}

impl CompositionReport {
    pub fn passed(&self) -> bool {
        self.orders.iter().all(|(_, ok)| *ok)
    }
}

/// The `*`-operation: reverse words; `δ^{a,b}(k)^* = (-1)^{a+b} δ^{a,b}(k)`,
/// and `Δ^q(x)^* = Δ^{-q}(x^*)`. Coefficients are real.
pub fn star(p: &NCPoly) -> NCPoly {
    let mut out = NCPoly::zero();
    for (w, c) in p.terms() {
        let mut sign = 1i64;
        let atoms: Vec<Atom> = w
            .atoms()
            .iter()
            .rev()
            .map(|a| match *a {
                Atom::DK { a, b, twist } => {
                    if (a + b) % 2 == 1 {
                        sign = -sign;
                    }
                    Atom::DK { a, b, twist: -twist }
                }
                Atom::LogK { a, b, twist } => {
                    if (a + b) % 2 == 1 {
                        sign = -sign;
                    }
                    Atom::LogK { a, b, twist: -twist }
                }
                other => other,
            })
            .collect();
        out.add_term(Word::new(atoms), c.scale(&int(sign)));
    }
    out
}

/// Every monomial of every term of `b_n` must satisfy
/// `deg_ξ - 2·(b0 exponents) = -2 - n`. Returns the offending terms.
pub fn grading_violations(b: &GradedSymbol) -> Vec<(i32, Word)> {
    let mut bad = Vec::new();
    for (&ord, comp) in b.components() {
        for (w, c) in comp.terms() {
            let b0 = 2 * w.total_b0() as i32;
            if c.terms().any(|(m, _)| m.xi_degree() as i32 - b0 != ord) {
                bad.push((ord, w.clone()));
            }
        }
    }
    bad
}

pub fn laplacian_symbol() -> GradedSymbol {
    Calculus::symbolic().laplacian_symbol()
}

pub fn parametrix(n_max: i32) -> Result<GradedSymbol, SymbolError> {
    Calculus::symbolic().parametrix(n_max)
}

pub fn symbol_product(p: &GradedSymbol, q: &GradedSymbol, min_order: i32) -> Result<GradedSymbol, SymbolError> {
    Calculus::symbolic().symbol_product(p, q, min_order)
}

pub fn symbol_adjoint(p: &GradedSymbol, min_order: i32) -> Result<GradedSymbol, SymbolError> {
    Calculus::symbolic().symbol_adjoint(p, min_order)
}

/// Coefficient of a single ξ-monomial in the coefficient of `w`.
pub fn xi_coefficient(p: &NCPoly, w: &Word, e_xi1: u32, e_xi2: u32) -> ScalarPoly {
    let c = p.coeff(w);
    let mut out = ScalarPoly::zero();
    for (m, q) in c.terms() {
        if m.e_xi1 == e_xi1 && m.e_xi2 == e_xi2 {
            let mut m2 = *m;
            m2.e_xi1 = 0;
            m2.e_xi2 = 0;
            out.add_term(m2, q.clone());
        }
    }
    out
}

/// `k ∆ k` as the product `σ(k)·σ(∆)·σ(k)`.
pub fn laplacian_by_products(calc: &Calculus) -> Result<GradedSymbol, SymbolError> {
    let mut k = GradedSymbol::new();
    k.insert(0, NCPoly::atom(Atom::KPow(1)));
    let left = calc.symbol_product(&k, &calc.flat_laplacian_symbol(), 0)?;
    calc.symbol_product(&left, &k, 0)
}
