//! Noncommutative words in `k`, `b0` and derivatives of `k`.
//!
//! `b0 = (s k^2 + 1)^{-1}` is a function of `k`, so `b0` and `k` commute and
//! every maximal `k`/`b0` block is stored as `b0^m k^p`. Words are otherwise
//! free: nothing commutes across a `dk`/`logk` atom.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::One;
use thiserror::Error;

use crate::coeffring::{int, CoeffError, Rational, ScalarParser, ScalarPoly, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NcError {
    #[error("derivative {dir} is not valid at the {stage} stage")]
    Stage { dir: Direction, stage: Stage },
    #[error("cannot differentiate twisted atom {0}")]
    Twisted(Atom),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error(transparent)]
    Coeff(#[from] CoeffError),
}

/// One letter of a word. Twists are stored in half-units: `twist = 1`
/// means `Δ^{1/2}` applied to the derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atom {
    B0Pow(u32),
    KPow(i32),
    DK { a: u32, b: u32, twist: i32 },
    LogK { a: u32, b: u32, twist: i32 },
}

impl Atom {
    pub fn dk(a: u32, b: u32) -> Atom {
        Atom::DK { a, b, twist: 0 }
    }

    /// `δ_j(k)` for `j ∈ {1, 2}`.
    pub fn delta_k(j: u8) -> Atom {
        match j {
            1 => Atom::dk(1, 0),
            2 => Atom::dk(0, 1),
            _ => panic!("direction index must be 1 or 2"),
        }
    }

    pub fn is_block(&self) -> bool {
        matches!(self, Atom::B0Pow(_) | Atom::KPow(_))
    }

    fn rank(&self) -> u8 {
        match self {
            Atom::B0Pow(_) => 0,
            Atom::KPow(_) => 1,
            Atom::DK { .. } => 2,
            Atom::LogK { .. } => 3,
        }
    }
}

fn deriv_key(a: u32, b: u32, twist: i32) -> (u32, std::cmp::Reverse<u32>, i32) {
    (a + b, std::cmp::Reverse(a), twist)
}

impl Ord for Atom {
    /// `b0` powers descending, then `k` powers ascending, then derivatives by
    /// total order with `δ_1` before `δ_2`. This picks `b0^2 k^2 δ_1 …` style
    /// representatives.
    fn cmp(&self, other: &Self) -> Ordering {
        use Atom::*;
        match (self, other) {
            (B0Pow(x), B0Pow(y)) => y.cmp(x),
            (KPow(x), KPow(y)) => x.cmp(y),
            (DK { a, b, twist }, DK { a: a2, b: b2, twist: t2 })
            | (LogK { a, b, twist }, LogK { a: a2, b: b2, twist: t2 }) => {
                deriv_key(*a, *b, *twist).cmp(&deriv_key(*a2, *b2, *t2))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn fmt_twist(t: i32) -> String {
    if t % 2 == 0 {
        (t / 2).to_string()
    } else {
        format!("{t}/2")
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::B0Pow(m) => write!(f, "b0^{m}"),
            Atom::KPow(p) => write!(f, "k^{p}"),
            Atom::DK { a, b, twist } => write!(f, "dk({a},{b};{})", fmt_twist(*twist)),
            Atom::LogK { a, b, twist } => write!(f, "logk({a},{b};{})", fmt_twist(*twist)),
        }
    }
}

/// A word in normal form (see module docs).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Vec<Atom>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn new(atoms: Vec<Atom>) -> Word {
        let mut w = Word(Vec::with_capacity(atoms.len()));
        for a in atoms {
            w.push(a);
        }
        w
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Append one atom, restoring normal form at the seam.
    fn push(&mut self, atom: Atom) {
        match atom {
            Atom::KPow(0) => {}
            Atom::B0Pow(0) => {}
            Atom::KPow(p) => match self.0.last_mut() {
                Some(Atom::KPow(q)) => {
                    *q += p;
                    if *q == 0 {
                        self.0.pop();
                    }
                }
                _ => self.0.push(atom),
            },
            Atom::B0Pow(m) => {
                // b0 commutes past a trailing k-power.
                let n = self.0.len();
                let (k, b0_at) = match self.0.last() {
                    Some(Atom::KPow(p)) => (Some(*p), n.checked_sub(2)),
                    _ => (None, n.checked_sub(1)),
                };
                let has_b0 = b0_at.is_some_and(|i| matches!(self.0[i], Atom::B0Pow(_)));
                if k.is_some() {
                    self.0.pop();
                }
                if has_b0 {
                    if let Some(Atom::B0Pow(x)) = self.0.last_mut() {
                        *x += m;
                    }
                } else {
                    self.0.push(Atom::B0Pow(m));
                }
                if let Some(p) = k {
                    self.0.push(Atom::KPow(p));
                }
            }
            _ => self.0.push(atom),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut w = self.clone();
        for a in &other.0 {
            w.push(*a);
        }
        w
    }

    pub fn total_b0(&self) -> u32 {
        self.0
            .iter()
            .map(|a| if let Atom::B0Pow(m) = a { *m } else { 0 })
            .sum()
    }

    pub fn has_separator(&self) -> bool {
        self.0.iter().any(|a| !a.is_block())
    }

    /// Number of `dk`/`logk` letters.
    pub fn separators(&self) -> usize {
        self.0.iter().filter(|a| !a.is_block()).count()
    }

    /// Reverse the atom order (used by the adjoint), renormalizing blocks.
    pub fn reversed(&self) -> Word {
        Word::new(self.0.iter().rev().copied().collect())
    }

    /// Canonical representative of the cyclic class of the word.
    pub fn cyclic_canonical(&self) -> Word {
        if !self.has_separator() {
            return self.clone();
        }
        let n = self.0.len();
        let mut best: Option<Word> = None;
        for i in 0..n {
            if self.0[i].is_block() {
                continue;
            }
            // Rotation starting just after separator i: the wrap-around
            // block then merges into a single leading block.
            let start = (i + 1) % n;
            let atoms: Vec<Atom> = (0..n).map(|t| self.0[(start + t) % n]).collect();
            let cand = Word::new(atoms);
            if best.as_ref().map_or(true, |b| cand < *b) {
                best = Some(cand);
            }
        }
        best.expect("word with a separator has a rotation")
    }

    /// Blocks between separators: `(b0 exponent, k exponent)` for each of the
    /// `separators + 1` slots, together with the separator atoms.
    pub fn skeleton(&self) -> (Vec<Atom>, Vec<(u32, i32)>) {
        let mut seps = Vec::new();
        let mut blocks = vec![(0u32, 0i32)];
        for a in &self.0 {
            match a {
                Atom::B0Pow(m) => blocks.last_mut().unwrap().0 += m,
                Atom::KPow(p) => blocks.last_mut().unwrap().1 += p,
                other => {
                    seps.push(*other);
                    blocks.push((0, 0));
                }
            }
        }
        (seps, blocks)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = NcError;
    fn from_str(s: &str) -> Result<Word, NcError> {
        parse_word(s, 0)
    }
}

fn parse_twist(s: &str, pos: usize) -> Result<i32, NcError> {
    let bad = || NcError::Parse {
        pos,
        msg: format!("bad twist `{s}`"),
    };
    if let Some(num) = s.strip_suffix("/2") {
        let n: i32 = num.parse().map_err(|_| bad())?;
        if n % 2 == 0 {
            return Err(bad());
        }
        Ok(n)
    } else {
        Ok(s.parse::<i32>().map_err(|_| bad())? * 2)
    }
}

fn parse_atom(tok: &str, pos: usize) -> Result<Atom, NcError> {
    let err = |msg: String| NcError::Parse { pos, msg };
    if let Some(m) = tok.strip_prefix("b0^") {
        let m: u32 = m.parse().map_err(|_| err(format!("bad b0 exponent in `{tok}`")))?;
        if m == 0 {
            return Err(err("b0 exponent must be positive".into()));
        }
        return Ok(Atom::B0Pow(m));
    }
    if let Some(p) = tok.strip_prefix("k^") {
        let p: i32 = p.parse().map_err(|_| err(format!("bad k exponent in `{tok}`")))?;
        if p == 0 {
            return Err(err("k exponent must be nonzero".into()));
        }
        return Ok(Atom::KPow(p));
    }
    let (log, inner) = if let Some(r) = tok.strip_prefix("dk(") {
        (false, r)
    } else if let Some(r) = tok.strip_prefix("logk(") {
        (true, r)
    } else {
        return Err(err(format!("unknown atom `{tok}`")));
    };
    let inner = inner
        .strip_suffix(')')
        .ok_or_else(|| err(format!("missing `)` in `{tok}`")))?;
    let (ab, q) = inner
        .split_once(';')
        .ok_or_else(|| err(format!("missing `;` in `{tok}`")))?;
    let (a, b) = ab
        .split_once(',')
        .ok_or_else(|| err(format!("missing `,` in `{tok}`")))?;
    let a: u32 = a.parse().map_err(|_| err(format!("bad index in `{tok}`")))?;
    let b: u32 = b.parse().map_err(|_| err(format!("bad index in `{tok}`")))?;
    if a + b == 0 {
        return Err(err("derivative order must be positive".into()));
    }
    let twist = parse_twist(q, pos)?;
    Ok(if log {
        Atom::LogK { a, b, twist }
    } else {
        Atom::DK { a, b, twist }
    })
}

/// Parse a whitespace-separated word; `base` offsets reported positions.
/// The input must already be in normal form.
pub(crate) fn parse_word(s: &str, base: usize) -> Result<Word, NcError> {
    let t = s.trim();
    if t == "1" {
        return Ok(Word::empty());
    }
    let mut atoms = Vec::new();
    let mut offset = 0;
    for tok in s.split(' ') {
        if !tok.is_empty() {
            atoms.push(parse_atom(tok, base + offset)?);
        }
        offset += tok.len() + 1;
    }
    if atoms.is_empty() {
        return Err(NcError::Parse {
            pos: base,
            msg: "empty word".into(),
        });
    }
    let w = Word::new(atoms.clone());
    if w.0 != atoms {
        return Err(NcError::Parse {
            pos: base,
            msg: format!("word `{t}` is not in normal form (expected `{w}`)"),
        });
    }
    Ok(w)
}

/// Pipeline stage, which decides what `b0` means and which partial
/// derivatives are legal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// `b0 = (s(ξ) k^2 + 1)^{-1}`.
    Xi,
    /// `b0 = (r^2 k^2 + 1)^{-1}`.
    Radial,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Xi => "xi",
            Stage::Radial => "radial",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Delta1,
    Delta2,
    DXi1,
    DXi2,
    DR,
}

impl Direction {
    pub fn delta(j: u8) -> Direction {
        match j {
            1 => Direction::Delta1,
            2 => Direction::Delta2,
            _ => panic!("direction index must be 1 or 2"),
        }
    }

    pub fn dxi(j: u8) -> Direction {
        match j {
            1 => Direction::DXi1,
            2 => Direction::DXi2,
            _ => panic!("direction index must be 1 or 2"),
        }
    }

    fn partial_var(self) -> Option<Var> {
        match self {
            Direction::DXi1 => Some(Var::Xi1),
            Direction::DXi2 => Some(Var::Xi2),
            Direction::DR => Some(Var::R),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Delta1 => "delta1",
            Direction::Delta2 => "delta2",
            Direction::DXi1 => "d/dxi1",
            Direction::DXi2 => "d/dxi2",
            Direction::DR => "d/dr",
        })
    }
}

/// Stage plus the quadratic form `s` with `b0 = (s k^2 + 1)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub stage: Stage,
    pub s: ScalarPoly,
}

impl Context {
    /// `s(ξ) = ξ1^2 + 2 tau1 ξ1 ξ2 + |tau|^2 ξ2^2` for the given `tau1` and
    /// `|tau|^2` (symbolic by default, or specialized).
    pub fn xi_with(tau1: &ScalarPoly, tau_sq: &ScalarPoly) -> Context {
        let x1 = ScalarPoly::var(Var::Xi1);
        let x2 = ScalarPoly::var(Var::Xi2);
        let s = &x1 * &x1 + (&(&x1 * &x2) * tau1).scale(&int(2)) + &(&x2 * &x2) * tau_sq;
        Context { stage: Stage::Xi, s }
    }

    pub fn xi() -> Context {
        Context::xi_with(&ScalarPoly::var(Var::Tau1), &ScalarPoly::tau_abs_sq())
    }

    pub fn radial() -> Context {
        Context {
            stage: Stage::Radial,
            s: ScalarPoly::var_pow(Var::R, 2),
        }
    }
}

/// Linear combination of words with [`ScalarPoly`] coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NCPoly {
    terms: BTreeMap<Word, ScalarPoly>,
}

impl NCPoly {
    pub fn zero() -> NCPoly {
        NCPoly::default()
    }

    pub fn one() -> NCPoly {
        NCPoly::scalar(ScalarPoly::one())
    }

    pub fn scalar(c: ScalarPoly) -> NCPoly {
        NCPoly::term(Word::empty(), c)
    }

    pub fn term(w: Word, c: ScalarPoly) -> NCPoly {
        let mut p = NCPoly::zero();
        p.add_term(w, c);
        p
    }

    pub fn word(w: Word) -> NCPoly {
        NCPoly::term(w, ScalarPoly::one())
    }

    pub fn atom(a: Atom) -> NCPoly {
        NCPoly::word(Word::new(vec![a]))
    }

    pub fn atoms(atoms: Vec<Atom>) -> NCPoly {
        NCPoly::word(Word::new(atoms))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &ScalarPoly)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Word, ScalarPoly)> {
        self.terms.into_iter()
    }

    pub fn coeff(&self, w: &Word) -> ScalarPoly {
        self.terms.get(w).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, w: Word, c: ScalarPoly) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(w) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += &c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &NCPoly) -> NCPoly {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &NCPoly) {
        for (w, c) in &other.terms {
            self.add_term(w.clone(), c.clone());
        }
    }

    pub fn sub(&self, other: &NCPoly) -> NCPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> NCPoly {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, q: &Rational) -> NCPoly {
        self.map_coeffs(|c| c.scale(q))
    }

    pub fn mul_scalar(&self, s: &ScalarPoly) -> NCPoly {
        self.map_coeffs(|c| c * s)
    }

    pub fn map_coeffs(&self, f: impl Fn(&ScalarPoly) -> ScalarPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in &self.terms {
            out.add_term(w.clone(), f(c));
        }
        out
    }

    pub fn map_words(&self, f: impl Fn(&Word) -> Word) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w, c) in &self.terms {
            out.add_term(f(w), c.clone());
        }
        out
    }

    pub fn mul(&self, other: &NCPoly) -> NCPoly {
        let mut out = NCPoly::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                out.add_term(w1.concat(w2), c1 * c2);
            }
        }
        out
    }

    pub fn specialize(&self, v: Var, value: &Rational) -> NCPoly {
        self.map_coeffs(|c| c.specialize(v, value))
    }

    /// Leibniz extension of a derivation to the whole polynomial.
    pub fn derive(&self, dir: Direction, ctx: &Context) -> Result<NCPoly, NcError> {
        if let Some(v) = dir.partial_var() {
            let ok = match ctx.stage {
                Stage::Xi => v != Var::R,
                Stage::Radial => v == Var::R,
            };
            if !ok {
                return Err(NcError::Stage { dir, stage: ctx.stage });
            }
        }
        let mut out = NCPoly::zero();
        for (w, c) in &self.terms {
            if let Some(v) = dir.partial_var() {
                out.add_term(w.clone(), c.derivative(v));
            }
            let atoms = w.atoms();
            for (i, a) in atoms.iter().enumerate() {
                let da = derive_atom(*a, dir, ctx)?;
                if da.is_zero() {
                    continue;
                }
                let left = NCPoly::term(Word::new(atoms[..i].to_vec()), c.clone());
                let right = NCPoly::word(Word::new(atoms[i + 1..].to_vec()));
                out.add_assign(&left.mul(&da).mul(&right));
            }
        }
        Ok(out)
    }

    pub fn derive_n(&self, dir: Direction, n: u32, ctx: &Context) -> Result<NCPoly, NcError> {
        let mut x = self.clone();
        for _ in 0..n {
            x = x.derive(dir, ctx)?;
        }
        Ok(x)
    }

    /// Replace every word by its cyclic representative (valid under a trace).
    pub fn cyclic_normalize(&self) -> NCPoly {
        self.map_words(Word::cyclic_canonical)
    }

    pub fn max_xi_degree(&self) -> u32 {
        self.terms
            .values()
            .flat_map(|c| c.terms().map(|(m, _)| m.xi_degree()))
            .max()
            .unwrap_or(0)
    }

    /// Serialized term list: one `[coefficient] word` per line.
    pub fn to_term_list(&self) -> String {
        let mut out = String::new();
        for (w, c) in &self.terms {
            out.push_str(&format!("[{c}] {w}\n"));
        }
        out
    }

    pub fn parse_term_list(s: &str) -> Result<NCPoly, NcError> {
        let mut out = NCPoly::zero();
        let mut offset = 0;
        for line in s.split_inclusive('\n') {
            let body = line.trim_end_matches('\n');
            let start = offset;
            offset += line.len();
            if body.trim().is_empty() || body.starts_with('#') {
                continue;
            }
            let err = |pos: usize, msg: &str| NcError::Parse {
                pos,
                msg: msg.to_string(),
            };
            let inner = body.strip_prefix('[').ok_or_else(|| err(start, "expected `[`"))?;
            let close = inner.find(']').ok_or_else(|| err(start, "expected `]`"))?;
            let mut sp = ScalarParser {
                src: &inner[..close],
                pos: 0,
            };
            let c = sp.parse_poly().map_err(|e| match e {
                CoeffError::Parse { pos, msg } => NcError::Parse {
                    pos: start + 1 + pos,
                    msg,
                },
                other => NcError::Coeff(other),
            })?;
            sp.skip_ws();
            if sp.pos != close {
                return Err(err(start + 1 + sp.pos, "trailing input in coefficient"));
            }
            let rest = &inner[close + 1..];
            let w_text = rest
                .strip_prefix(' ')
                .ok_or_else(|| err(start + close + 2, "expected space after `]`"))?;
            let w = parse_word(w_text, start + close + 3)?;
            if out.terms.contains_key(&w) {
                return Err(err(start, &format!("duplicate word `{w}`")));
            }
            out.add_term(w, c);
        }
        Ok(out)
    }
}

impl fmt::Display for NCPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_term_list())
    }
}

/// Derivative of a single atom, as a polynomial.
pub fn derive_atom(a: Atom, dir: Direction, ctx: &Context) -> Result<NCPoly, NcError> {
    let j = match dir {
        Direction::Delta1 => Some(1u8),
        Direction::Delta2 => Some(2u8),
        _ => None,
    };
    match (a, j) {
        (Atom::KPow(p), Some(j)) => {
            let dk = Atom::delta_k(j);
            let mut out = NCPoly::zero();
            if p > 0 {
                for i in 0..p {
                    out.add_assign(&NCPoly::atoms(vec![Atom::KPow(i), dk, Atom::KPow(p - 1 - i)]));
                }
            } else {
                // δ(k^{-1}) = -k^{-1} δ(k) k^{-1}, Leibniz over the |p| factors.
                let n = -p;
                for i in 0..n {
                    out.add_assign(&NCPoly::atoms(vec![Atom::KPow(-i - 1), dk, Atom::KPow(-(n - i))]).neg());
                }
            }
            Ok(out)
        }
        (Atom::B0Pow(m), _) => {
            let db0 = match j {
                Some(_) => {
                    // δ(b0) = -s b0 δ(k^2) b0
                    let dk2 = derive_atom(Atom::KPow(2), dir, ctx)?;
                    NCPoly::atom(Atom::B0Pow(1))
                        .mul(&dk2)
                        .mul(&NCPoly::atom(Atom::B0Pow(1)))
                        .mul_scalar(&-&ctx.s)
                }
                None => {
                    let v = dir.partial_var().expect("partial direction");
                    let ds = ctx.s.derivative(v);
                    NCPoly::term(Word::new(vec![Atom::B0Pow(2), Atom::KPow(2)]), -ds)
                }
            };
            if db0.is_zero() {
                return Ok(db0);
            }
            let mut out = NCPoly::zero();
            for i in 0..m {
                let left = NCPoly::atom(Atom::B0Pow(i));
                let right = NCPoly::atom(Atom::B0Pow(m - 1 - i));
                out.add_assign(&left.mul(&db0).mul(&right));
            }
            Ok(out)
        }
        (Atom::DK { a: x, b: y, twist } | Atom::LogK { a: x, b: y, twist }, Some(j)) => {
            if twist != 0 {
                return Err(NcError::Twisted(a));
            }
            let (x, y) = if j == 1 { (x + 1, y) } else { (x, y + 1) };
            Ok(NCPoly::atom(match a {
                Atom::DK { .. } => Atom::dk(x, y),
                _ => Atom::LogK { a: x, b: y, twist: 0 },
            }))
        }
        _ => Ok(NCPoly::zero()),
    }
}

/// Bilinear product with normal form.
pub fn word_mul(x: &NCPoly, y: &NCPoly) -> NCPoly {
    x.mul(y)
}

pub fn derive(x: &NCPoly, dir: Direction, ctx: &Context) -> Result<NCPoly, NcError> {
    x.derive(dir, ctx)
}

pub fn cyclic_normalize(x: &NCPoly) -> NCPoly {
    x.cyclic_normalize()
}

/// Check whether `x` vanishes once `b0 (s k^2 + 1) = 1` is taken into account.
///
/// Within a fixed separator skeleton each block `b0^M k^P` sits at a fixed
/// slot, and all blocks are functions of the single element `k`. Treating
/// slot `i` as a commuting variable `K_i`, the expression is a sum of
/// `c K^P / Π(s K_i^2 + 1)^{M_i}`; multiplying through by the common
/// denominator gives a Laurent polynomial that must vanish identically.
pub fn vanishes_mod_b0(x: &NCPoly, s: &ScalarPoly) -> bool {
    let mut by_skeleton: BTreeMap<Vec<Atom>, Vec<(Vec<(u32, i32)>, &ScalarPoly)>> = BTreeMap::new();
    for (w, c) in x.terms() {
        let (seps, blocks) = w.skeleton();
        by_skeleton.entry(seps).or_default().push((blocks, c));
    }
    for terms in by_skeleton.values() {
        let slots = terms[0].0.len();
        let max_m: Vec<u32> = (0..slots)
            .map(|i| terms.iter().map(|(b, _)| b[i].0).max().unwrap_or(0))
            .collect();
        let mut acc: BTreeMap<Vec<i32>, ScalarPoly> = BTreeMap::new();
        for (blocks, c) in terms {
            let mut poly: BTreeMap<Vec<i32>, ScalarPoly> = BTreeMap::new();
            poly.insert(blocks.iter().map(|b| b.1).collect(), (*c).clone());
            for i in 0..slots {
                let e = max_m[i] - blocks[i].0;
                if e == 0 {
                    continue;
                }
                // (s K_i^2 + 1)^e
                let mut next: BTreeMap<Vec<i32>, ScalarPoly> = BTreeMap::new();
                for t in 0..=e {
                    let factor = s.pow(t).scale(&crate::coeffring::binomial(e, t));
                    for (k, v) in &poly {
                        let mut k2 = k.clone();
                        k2[i] += 2 * t as i32;
                        *next.entry(k2).or_default() += &(v * &factor);
                    }
                }
                poly = next;
            }
            for (k, v) in poly {
                *acc.entry(k).or_default() += &v;
            }
        }
        if acc.values().any(|v| !v.is_zero()) {
            return false;
        }
    }
    true
}

/// Helper for tests and goldens: parse `[c] word` lines.
impl FromStr for NCPoly {
    type Err = NcError;
    fn from_str(s: &str) -> Result<NCPoly, NcError> {
        NCPoly::parse_term_list(s)
    }
}
