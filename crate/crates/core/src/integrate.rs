//! Polar substitution, angular integration and the radial integrals.
//!
//! Input is the trace-normalized `b2` at the ξ-stage. After the change of
//! variables `ξ1 = r cosθ − r(τ1/τ2) sinθ`, `ξ2 = (r/τ2) sinθ` the quadratic
//! form becomes `r^2`, so words are reinterpreted with `b0 = (r^2 k^2 + 1)^{-1}`.
//! Every result below is stated up to the common factor `2π/τ2`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::coeffring::{beta_int, binomial, double_factorial, int, rat, Rational, ScalarMono, ScalarPoly, Var};
use crate::modular::ModularTerm;
use crate::ncalg::{Atom, NCPoly, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("term `{0}` fits none of the radial classes")]
    Unclassified(Word),
    #[error("expected a {expected} term, got `{word}`")]
    WrongClass { expected: RadialClass, word: Word },
    #[error("radial integral of r^{r_exp} against `{word}` diverges")]
    Divergent { word: Word, r_exp: u32 },
    #[error("coefficient `{0}` is not a sum of odd powers of r times tau")]
    BadRadialCoefficient(ScalarPoly),
    #[error("boundary term of r^{r_exp} `{word}` does not vanish")]
    Boundary { word: Word, r_exp: u32 },
    #[error("`r^{r_exp} {word}` does not match the modified-logarithm template: {why}")]
    Template { word: Word, r_exp: u32, why: String },
    #[error("symmetric split applies only to `r^5 b0^3 k^4 δ_i(k) b0 δ_j(k)` with i ≠ j, got `r^{r_exp} {word}`")]
    NotSplitTerm { word: Word, r_exp: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RadialClass {
    /// Every `b0` sits in the leading block.
    AllLeft,
    /// `b0^A k^a δ_i(k) b0 k^b δ_j(k)`.
    SingleMiddle,
    /// `b0^A k^a δ_i(k) b0^2 k^b δ_j(k)`.
    SquaredMiddle,
}

impl fmt::Display for RadialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RadialClass::AllLeft => "all-left",
            RadialClass::SingleMiddle => "single-middle",
            RadialClass::SquaredMiddle => "squared-middle",
        })
    }
}

/// A single term of the post-angular list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadialTerm {
    /// Polynomial in `tau1, tau2^{±1}, r`.
    pub coeff: ScalarPoly,
    /// Canonical cyclic representative, radial stage.
    pub word: Word,
    pub class: RadialClass,
}

impl RadialTerm {
    pub fn new(word: Word, coeff: ScalarPoly) -> Result<RadialTerm, IntegrateError> {
        let word = word.cyclic_canonical();
        let class = classify(&word)?;
        Ok(RadialTerm { coeff, word, class })
    }

    fn by_r_power(&self) -> BTreeMap<u32, ScalarPoly> {
        r_powers(&self.coeff)
    }
}

/// Split a coefficient by power of `r`: `r exponent -> tau polynomial`.
fn r_powers(coeff: &ScalarPoly) -> BTreeMap<u32, ScalarPoly> {
    let mut out: BTreeMap<u32, ScalarPoly> = BTreeMap::new();
    for (m, c) in coeff.terms() {
        let mut m2 = *m;
        m2.e_r = 0;
        out.entry(m.e_r).or_default().add_term(m2, c.clone());
    }
    out
}

/// Classify a canonical word.
pub fn classify(word: &Word) -> Result<RadialClass, IntegrateError> {
    let (seps, blocks) = word.skeleton();
    if blocks[0].0 == 0 {
        return Err(IntegrateError::Unclassified(word.clone()));
    }
    if blocks[1..].iter().all(|b| b.0 == 0) {
        return Ok(RadialClass::AllLeft);
    }
    let derivs_ok = seps
        .iter()
        .all(|a| matches!(a, Atom::DK { a, b, twist: 0 } if a + b == 1));
    if seps.len() == 2 && derivs_ok && blocks[2].0 == 0 {
        match blocks[1].0 {
            1 => return Ok(RadialClass::SingleMiddle),
            2 => return Ok(RadialClass::SquaredMiddle),
            _ => {}
        }
    }
    Err(IntegrateError::Unclassified(word.clone()))
}

/// Trigonometric polynomial in `θ` with word-valued coefficients, reduced by
/// `cos^2 = 1 - sin^2` so the cosine exponent is 0 or 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrigPoly {
    terms: BTreeMap<(u32, u32), NCPoly>,
}

impl TrigPoly {
    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &NCPoly)> {
        self.terms.iter()
    }

    pub fn get(&self, cos: u32, sin: u32) -> NCPoly {
        self.terms.get(&(cos, sin)).cloned().unwrap_or_default()
    }

    /// Add `c · cos^a sin^b · w`, reducing even cosine powers.
    fn add(&mut self, a: u32, b: u32, w: &Word, c: &ScalarPoly) {
        let half = a / 2;
        let cos = a % 2;
        for t in 0..=half {
            let mut s = binomial(half, t);
            if t % 2 == 1 {
                s = -s;
            }
            let entry = self.terms.entry((cos, b + 2 * t)).or_default();
            entry.add_term(w.clone(), c.scale(&s));
            if entry.is_zero() {
                self.terms.remove(&(cos, b + 2 * t));
            }
        }
    }

    pub fn is_theta_free(&self) -> bool {
        self.terms.keys().all(|k| *k == (0, 0))
    }
}

/// Substitute polar coordinates and multiply by the Jacobian `r/τ2`.
pub fn polar_substitute(x: &NCPoly) -> TrigPoly {
    let mut out = TrigPoly::default();
    // -τ1/τ2
    let slope = ScalarPoly::monomial(
        ScalarMono {
            e_tau1: 1,
            e_tau2: -1,
            ..ScalarMono::ONE
        },
        -Rational::one(),
    );
    let mut slope_pows = vec![ScalarPoly::one()];
    for (w, c) in x.terms() {
        for (m, q) in c.terms() {
            let (p1, p2) = (m.e_xi1, m.e_xi2);
            let mut base = *m;
            base.e_xi1 = 0;
            base.e_xi2 = 0;
            base.e_r += p1 + p2 + 1;
            base.e_tau2 -= p2 as i32 + 1;
            let base = ScalarPoly::monomial(base, q.clone());
            while slope_pows.len() <= p1 as usize {
                let next = slope_pows.last().unwrap() * &slope;
                slope_pows.push(next);
            }
            for i in 0..=p1 {
                let coeff = (&base * &slope_pows[i as usize]).scale(&binomial(p1, i));
                out.add(p1 - i, p2 + i, w, &coeff);
            }
        }
    }
    out
}

/// `(1/2π) ∫_0^{2π} cos^a sin^b dθ` for `a ∈ {0, 1}`.
fn angular_mean(a: u32, b: u32) -> Rational {
    if a % 2 == 1 || b % 2 == 1 {
        return Rational::zero();
    }
    double_factorial(a as i32 - 1) * double_factorial(b as i32 - 1) / double_factorial((a + b) as i32)
}

/// Integrate over `θ` and factor out `2π/τ2`. The result is an r-stage
/// polynomial in canonical cyclic form.
pub fn angular_integrate_poly(t: &TrigPoly) -> NCPoly {
    let tau2 = ScalarMono::var(Var::Tau2, 1);
    let mut out = NCPoly::zero();
    for (&(a, b), p) in t.terms() {
        let w = angular_mean(a, b);
        if w.is_zero() {
            continue;
        }
        out.add_assign(&p.map_coeffs(|c| c.mul_mono(&tau2).scale(&w)));
    }
    out.cyclic_normalize()
}

/// Angular integration followed by classification of each term.
pub fn angular_integrate(t: &TrigPoly) -> Result<Vec<RadialTerm>, IntegrateError> {
    angular_integrate_poly(t)
        .terms()
        .map(|(w, c)| RadialTerm::new(w.clone(), c.clone()))
        .collect()
}

/// `∫_0^∞ c r^{2a+1} b0^m k^p · tail dr = (c/2) B(a+1, m-a-1) k^{p-2a-2} · tail`.
pub fn integrate_all_left(t: &RadialTerm) -> Result<NCPoly, IntegrateError> {
    if t.class != RadialClass::AllLeft {
        return Err(IntegrateError::WrongClass {
            expected: RadialClass::AllLeft,
            word: t.word.clone(),
        });
    }
    let atoms = t.word.atoms();
    let Atom::B0Pow(m) = atoms[0] else {
        return Err(IntegrateError::Unclassified(t.word.clone()));
    };
    let (p, tail) = match atoms.get(1) {
        Some(Atom::KPow(p)) => (*p, &atoms[2..]),
        _ => (0, &atoms[1..]),
    };
    let mut out = NCPoly::zero();
    for (n, c) in t.by_r_power() {
        if n % 2 == 0 {
            return Err(IntegrateError::BadRadialCoefficient(t.coeff.clone()));
        }
        let a = (n - 1) / 2;
        if m < a + 2 {
            return Err(IntegrateError::Divergent {
                word: t.word.clone(),
                r_exp: n,
            });
        }
        let w = beta_int(a + 1, m - a - 1) * rat(1, 2);
        let mut word = vec![Atom::KPow(p - 2 * a as i32 - 2)];
        word.extend_from_slice(tail);
        out.add_term(Word::new(word), c.scale(&w));
    }
    Ok(out)
}

/// Shape `b0^A k^a D_i b0^M k^b D_j` of a two-separator canonical word.
#[derive(Clone, Copy)]
struct TwoBlock {
    big: u32,
    a: i32,
    di: Atom,
    mid: u32,
    b: i32,
    dj: Atom,
}

impl TwoBlock {
    fn of(word: &Word) -> Option<TwoBlock> {
        let (seps, blocks) = word.skeleton();
        if seps.len() != 2 || blocks[2] != (0, 0) {
            return None;
        }
        Some(TwoBlock {
            big: blocks[0].0,
            a: blocks[0].1,
            di: seps[0],
            mid: blocks[1].0,
            b: blocks[1].1,
            dj: seps[1],
        })
    }

    fn word(&self) -> Word {
        Word::new(vec![
            Atom::B0Pow(self.big),
            Atom::KPow(self.a),
            self.di,
            Atom::B0Pow(self.mid),
            Atom::KPow(self.b),
            self.dj,
        ])
    }
}

/// Integrate by parts using `r b0^2 = -∂_r(b0) / (2k^2)`:
/// `c r^n X D_i b0^2 k^b D_j  ->  (c/2) ∂_r(r^{n-1} X) D_i b0 k^{b-2} D_j`
/// with `X = b0^A k^a`.
pub fn ibp_rewrite(t: &RadialTerm) -> Result<Vec<RadialTerm>, IntegrateError> {
    if t.class != RadialClass::SquaredMiddle {
        return Err(IntegrateError::WrongClass {
            expected: RadialClass::SquaredMiddle,
            word: t.word.clone(),
        });
    }
    let s = TwoBlock::of(&t.word).ok_or_else(|| IntegrateError::Unclassified(t.word.clone()))?;
    ibp_rotation(&s, &t.coeff)
}

/// Integration by parts on a fixed rotation: the second block is the one
/// treated as the middle `b0^2`, even when a rotation gives the same cyclic word.
fn ibp_rotation(s: &TwoBlock, coeff: &ScalarPoly) -> Result<Vec<RadialTerm>, IntegrateError> {
    let mut out = NCPoly::zero();
    for (n, c) in r_powers(coeff) {
        // Boundary term r^{n-1} b0^A … b0 must vanish at 0 and at ∞.
        if n < 2 || n + 1 >= 2 * s.big + 4 {
            return Err(IntegrateError::Boundary {
                word: s.word(),
                r_exp: n,
            });
        }
        let half = c.scale(&rat(1, 2));
        let first = TwoBlock {
            mid: 1,
            b: s.b - 2,
            ..*s
        };
        out.add_term(
            first.word(),
            half.scale(&int(n as i64 - 1)).mul_mono(&ScalarMono::var(Var::R, n as i32 - 2)),
        );
        let second = TwoBlock {
            big: s.big + 1,
            a: s.a + 2,
            mid: 1,
            b: s.b - 2,
            ..*s
        };
        out.add_term(
            second.word(),
            c.scale(&int(-(s.big as i64))).mul_mono(&ScalarMono::var(Var::R, n as i32)),
        );
    }
    out.cyclic_normalize()
        .terms()
        .map(|(w, c)| {
            let rt = RadialTerm::new(w.clone(), c.clone())?;
            if rt.class != RadialClass::SingleMiddle {
                return Err(IntegrateError::WrongClass {
                    expected: RadialClass::SingleMiddle,
                    word: rt.word,
                });
            }
            Ok(rt)
        })
        .collect()
}

fn deriv_index(a: &Atom) -> Option<u8> {
    match a {
        Atom::DK { a: 1, b: 0, twist: 0 } => Some(1),
        Atom::DK { a: 0, b: 1, twist: 0 } => Some(2),
        _ => None,
    }
}

/// Radial integral of a single-middle term via the modified logarithm:
/// `∫ c r^{2m+1} b0^{m+1} k^a D_i b0 k^b D_j dr = (c/2) k^{-2} D_m(Δ^{b/2}(D_i)) D_j`,
/// valid when `a + b = 2m`.
pub fn apply_dm(t: &RadialTerm) -> Result<Vec<ModularTerm>, IntegrateError> {
    if t.class != RadialClass::SingleMiddle {
        return Err(IntegrateError::WrongClass {
            expected: RadialClass::SingleMiddle,
            word: t.word.clone(),
        });
    }
    // A trailing k-power is moved to the front by the cyclic normal form.
    let word = t.word.cyclic_canonical();
    let s = TwoBlock::of(&word).ok_or_else(|| IntegrateError::Unclassified(word.clone()))?;
    let mut out = Vec::new();
    for (n, c) in t.by_r_power() {
        let bad = |why: String| IntegrateError::Template {
            word: word.clone(),
            r_exp: n,
            why,
        };
        if n % 2 == 0 {
            return Err(bad("even power of r".into()));
        }
        let m = (n - 1) / 2;
        if !(1..=3).contains(&m) {
            return Err(bad(format!("no modified logarithm of order {m}")));
        }
        if s.big != m + 1 {
            return Err(bad(format!("needs b0^{} on the left, found b0^{}", m + 1, s.big)));
        }
        if s.a + s.b != 2 * m as i32 {
            return Err(bad(format!("k-power budget {} + {} != {}", s.a, s.b, 2 * m)));
        }
        let (Some(i), Some(j)) = (deriv_index(&s.di), deriv_index(&s.dj)) else {
            return Err(bad("separators must be first derivatives of k".into()));
        };
        out.push(ModularTerm {
            coeff: c.scale(&rat(1, 2)),
            i,
            j,
            m: m as u8,
            twist: s.b,
        });
    }
    Ok(out)
}

/// Word `b0^3 k^4 D_i b0 D_j`.
fn split_word(i: u8, j: u8) -> Word {
    Word::new(vec![
        Atom::B0Pow(3),
        Atom::KPow(4),
        Atom::delta_k(i),
        Atom::B0Pow(1),
        Atom::delta_k(j),
    ])
}

/// Symmetric treatment of `c r^5 b0^3 k^4 D_i b0 D_j` (i ≠ j):
/// rewrite `r^5 b0^3 k^2 = r^3 b0^2 − ¼ ∂_r(r^4 b0^2)`, integrate the second
/// part by parts, split the resulting `b0^2`-middle term evenly between the
/// `(i,j)` and `(j,i)` rotations and reduce each half again.
pub fn symmetric_split(t: &RadialTerm) -> Result<Vec<ModularTerm>, IntegrateError> {
    let powers = t.by_r_power();
    let r_exp = powers.keys().next().copied().unwrap_or(0);
    let s = TwoBlock::of(&t.word);
    let ok = powers.len() == 1
        && r_exp == 5
        && s.as_ref().is_some_and(|s| {
            s.big == 3 && s.a == 4 && s.mid == 1 && s.b == 0 && deriv_index(&s.di).is_some() && deriv_index(&s.dj).is_some() && s.di != s.dj
        });
    if !ok {
        return Err(IntegrateError::NotSplitTerm {
            word: t.word.clone(),
            r_exp,
        });
    }
    let s = s.unwrap();
    let c = &powers[&5];
    let (i, j) = (deriv_index(&s.di).unwrap(), deriv_index(&s.dj).unwrap());
    let r = |e: i32| ScalarMono::var(Var::R, e);
    let mut out = Vec::new();

    // c r^3 b0^2 k^2 D_i b0 D_j
    let lead = TwoBlock {
        big: 2,
        a: 2,
        ..TwoBlock::of(&t.word).unwrap()
    };
    out.extend(apply_dm(&RadialTerm::new(lead.word(), c.mul_mono(&r(3)))?)?);

    // -(c/4) ∫ ∂_r(r^4 b0^2) k^2 D_i b0 D_j = -(c/2) ∫ r^5 b0^2 k^2 D_i b0^2 k^2 D_j,
    // split as -(c/4) on each rotation.
    let quarter = c.scale(&rat(-1, 4)).mul_mono(&r(5));
    for (x, y) in [(i, j), (j, i)] {
        let rot = TwoBlock {
            big: 2,
            a: 2,
            di: Atom::delta_k(x),
            mid: 2,
            b: 2,
            dj: Atom::delta_k(y),
        };
        for piece in ibp_rotation(&rot, &quarter)? {
            out.extend(apply_dm(&piece)?);
        }
    }
    Ok(merge_modular(out))
}

/// Combine modular terms with the same `(i, j, m, twist)`.
pub fn merge_modular(terms: Vec<ModularTerm>) -> Vec<ModularTerm> {
    let mut acc: BTreeMap<(u8, u8, u8, i32), ScalarPoly> = BTreeMap::new();
    for t in terms {
        *acc.entry((t.i, t.j, t.m, t.twist)).or_default() += &t.coeff;
    }
    acc.into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((i, j, m, twist), coeff)| ModularTerm { coeff, i, j, m, twist })
        .collect()
}

/// All stages of the reduction from `b2` to modular terms.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub r_list: NCPoly,
    pub all_left: NCPoly,
    pub single_middle: NCPoly,
    pub squared_middle: NCPoly,
    /// Single-middle terms after integration by parts.
    pub t: NCPoly,
    pub all_left_result: NCPoly,
    /// The modular terms, with the designated term treated symmetrically.
    pub modular: Vec<ModularTerm>,
    /// Same, with the designated term reduced directly.
    pub modular_unsymmetrized: Vec<ModularTerm>,
    pub split_symmetric: Vec<ModularTerm>,
    pub split_direct: Vec<ModularTerm>,
}

/// Polar substitution and angular integration of the ξ-stage `b2`.
pub fn radial_list(b2: &NCPoly) -> NCPoly {
    angular_integrate_poly(&polar_substitute(&b2.cyclic_normalize()))
}

/// Split the r-list into (all-left, single-middle, squared-middle) parts.
pub fn split_classes(r_list: &NCPoly) -> Result<(NCPoly, NCPoly, NCPoly), IntegrateError> {
    let mut all_left = NCPoly::zero();
    let mut single = NCPoly::zero();
    let mut squared = NCPoly::zero();
    for (w, c) in r_list.cyclic_normalize().terms() {
        let target = match classify(w)? {
            RadialClass::AllLeft => &mut all_left,
            RadialClass::SingleMiddle => &mut single,
            RadialClass::SquaredMiddle => &mut squared,
        };
        target.add_term(w.clone(), c.clone());
    }
    Ok((all_left, single, squared))
}

pub fn all_left_integrals(all_left: &NCPoly) -> Result<NCPoly, IntegrateError> {
    let mut out = NCPoly::zero();
    for (w, c) in all_left.terms() {
        out.add_assign(&integrate_all_left(&RadialTerm::new(w.clone(), c.clone())?)?);
    }
    Ok(out)
}

/// Single-middle terms plus the integrated-by-parts squared-middle terms.
pub fn build_t(single: &NCPoly, squared: &NCPoly) -> Result<NCPoly, IntegrateError> {
    let mut t = single.clone();
    for (w, c) in squared.terms() {
        for rt in ibp_rewrite(&RadialTerm::new(w.clone(), c.clone())?)? {
            t.add_term(rt.word, rt.coeff);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Default)]
pub struct ModularReduction {
    pub modular: Vec<ModularTerm>,
    pub modular_unsymmetrized: Vec<ModularTerm>,
    pub split_symmetric: Vec<ModularTerm>,
    pub split_direct: Vec<ModularTerm>,
}

/// Reduce every term of `T` with the modified logarithms; the designated
/// `b0^3 k^4 δ_1(k) b0 δ_2(k)` term goes through both routes.
pub fn modular_from_t(t: &NCPoly) -> Result<ModularReduction, IntegrateError> {
    let mut modular = Vec::new();
    let mut unsym = Vec::new();
    let mut split_symmetric = Vec::new();
    let mut split_direct = Vec::new();
    let designated = split_word(1, 2);
    for (w, c) in t.terms() {
        if *w == designated {
            // Only the r^5 part is the designated term; other powers (none
            // expected) go the direct route.
            let (five, rest) = split_r_power(c, 5);
            if !rest.is_zero() {
                let other = apply_dm(&RadialTerm::new(w.clone(), rest)?)?;
                modular.extend(other.clone());
                unsym.extend(other);
            }
            let d = RadialTerm::new(w.clone(), five)?;
            split_symmetric = symmetric_split(&d)?;
            split_direct = apply_dm(&d)?;
            modular.extend(split_symmetric.clone());
            unsym.extend(split_direct.clone());
        } else {
            let terms = apply_dm(&RadialTerm::new(w.clone(), c.clone())?)?;
            modular.extend(terms.clone());
            unsym.extend(terms);
        }
    }
    Ok(ModularReduction {
        modular: merge_modular(modular),
        modular_unsymmetrized: merge_modular(unsym),
        split_symmetric,
        split_direct,
    })
}

/// Run the reduction on the ξ-stage `b2`.
pub fn reduce(b2: &NCPoly) -> Result<Reduction, IntegrateError> {
    let r_list = radial_list(b2);
    let (all_left, single, squared) = split_classes(&r_list)?;
    let all_left_result = all_left_integrals(&all_left)?;
    let t = build_t(&single, &squared)?;
    let m = modular_from_t(&t)?;
    Ok(Reduction {
        r_list,
        all_left,
        single_middle: single,
        squared_middle: squared,
        t,
        all_left_result,
        modular: m.modular,
        modular_unsymmetrized: m.modular_unsymmetrized,
        split_symmetric: m.split_symmetric,
        split_direct: m.split_direct,
    })
}

fn split_r_power(c: &ScalarPoly, n: u32) -> (ScalarPoly, ScalarPoly) {
    let mut hit = ScalarPoly::zero();
    let mut rest = ScalarPoly::zero();
    for (m, q) in c.terms() {
        if m.e_r == n {
            hit.add_term(*m, q.clone());
        } else {
            rest.add_term(*m, q.clone());
        }
    }
    (hit, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncalg::Context;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn sp(s: &str) -> ScalarPoly {
        s.parse().unwrap()
    }

    #[test]
    fn quadratic_form_becomes_r_squared() {
        let s = Context::xi().s;
        let t = polar_substitute(&NCPoly::scalar(s));
        assert!(t.is_theta_free());
        // r^2 times the Jacobian r/τ2
        assert_eq!(t.get(0, 0), NCPoly::scalar(sp("1*tau2^-1*r^3")));
    }

    #[test]
    fn xi2_and_constant() {
        let t = polar_substitute(&NCPoly::scalar(ScalarPoly::var(Var::Xi2)));
        assert_eq!(t.get(0, 1), NCPoly::scalar(sp("1*tau2^-2*r^2")));
        let one = polar_substitute(&NCPoly::one());
        assert_eq!(one.get(0, 0), NCPoly::scalar(sp("1*tau2^-1*r^1")));
    }

    #[test]
    fn angular_means() {
        assert_eq!(angular_mean(1, 1), Rational::zero());
        assert_eq!(angular_mean(0, 2), rat(1, 2));
        assert_eq!(angular_mean(0, 4), rat(3, 8));
    }

    #[test]
    fn grouped_coefficient_integrates_to_4r3() {
        let c = sp("6*xi1^2 + 12*tau1^1*xi1^1*xi2^1 + 4*tau1^2*xi2^2 + 2*tau1^2*xi2^2 + 2*tau2^2*xi2^2");
        let word = w("b0^3 k^3 dk(2,0;0)");
        let out = angular_integrate_poly(&polar_substitute(&NCPoly::term(word.clone(), c)));
        assert_eq!(out, NCPoly::term(word, sp("4*r^3")));
    }

    #[test]
    fn all_left_examples() {
        let t = RadialTerm::new(w("b0^2 k^1 dk(2,0;0)"), sp("1*r^1")).unwrap();
        assert_eq!(
            integrate_all_left(&t).unwrap(),
            NCPoly::term(w("k^-1 dk(2,0;0)"), ScalarPoly::constant(rat(1, 2)))
        );
        let fam: NCPoly = "[-1*r^1] b0^2 k^1 dk(2,0;0)\n[4*r^3] b0^3 k^3 dk(2,0;0)\n[-4*r^5] b0^4 k^5 dk(2,0;0)\n"
            .parse()
            .unwrap();
        let mut sum = NCPoly::zero();
        for (word, c) in fam.terms() {
            sum.add_assign(&integrate_all_left(&RadialTerm::new(word.clone(), c.clone()).unwrap()).unwrap());
        }
        assert_eq!(sum, NCPoly::term(w("k^-1 dk(2,0;0)"), ScalarPoly::constant(rat(-1, 6))));
        let div = RadialTerm::new(w("b0^1 k^1 dk(2,0;0)"), sp("1*r^1")).unwrap();
        assert!(matches!(integrate_all_left(&div), Err(IntegrateError::Divergent { .. })));
    }

    #[test]
    fn ibp_example_and_guard() {
        let t = RadialTerm::new(w("b0^2 k^2 dk(1,0;0) b0^2 k^2 dk(1,0;0)"), sp("1*r^5")).unwrap();
        assert_eq!(t.class, RadialClass::SquaredMiddle);
        let got: NCPoly = {
            let mut p = NCPoly::zero();
            for rt in ibp_rewrite(&t).unwrap() {
                p.add_term(rt.word, rt.coeff);
            }
            p
        };
        // (1/2) ∂_r(r^4 b0^2) k^2 D b0 D = 2 r^3 b0^2 k^2 D b0 D - 2 r^5 b0^3 k^4 D b0 D
        let expect: NCPoly = "[2*r^3] b0^2 k^2 dk(1,0;0) b0^1 dk(1,0;0)\n[-2*r^5] b0^3 k^4 dk(1,0;0) b0^1 dk(1,0;0)\n"
            .parse()
            .unwrap();
        assert_eq!(got, expect);
        let single = RadialTerm::new(w("b0^2 k^2 dk(1,0;0) b0^1 dk(1,0;0)"), sp("1*r^3")).unwrap();
        assert!(ibp_rewrite(&single).is_err());
    }

    fn mt(c: &str, i: u8, j: u8, m: u8, twist: i32) -> ModularTerm {
        ModularTerm {
            coeff: sp(c),
            i,
            j,
            m,
            twist,
        }
    }

    #[test]
    fn dm_examples() {
        let t = RadialTerm::new(w("b0^3 k^3 dk(1,0;0) b0^1 k^1 dk(1,0;0)"), sp("4*r^5")).unwrap();
        assert_eq!(apply_dm(&t).unwrap(), vec![mt("2", 1, 1, 2, 1)]);
        let t = RadialTerm::new(w("b0^2 k^2 dk(1,0;0) b0^1 dk(1,0;0)"), sp("-2*r^3")).unwrap();
        assert_eq!(apply_dm(&t).unwrap(), vec![mt("-1", 1, 1, 1, 0)]);
        let t = RadialTerm::new(
            w("b0^4 k^4 dk(0,1;0) b0^1 k^2 dk(0,1;0)"),
            sp("-2*tau1^2*r^7 + -2*tau2^2*r^7"),
        )
        .unwrap();
        assert_eq!(apply_dm(&t).unwrap(), vec![mt("-1*tau1^2 + -1*tau2^2", 2, 2, 3, 2)]);
        let bad = RadialTerm::new(w("b0^3 k^3 dk(1,0;0) b0^1 k^1 dk(1,0;0)"), sp("4*r^3")).unwrap();
        assert!(matches!(apply_dm(&bad), Err(IntegrateError::Template { .. })));
    }

    #[test]
    fn symmetric_split_of_designated_term() {
        let t = RadialTerm::new(split_word(1, 2), sp("8*tau1^1*r^5")).unwrap();
        let got = symmetric_split(&t).unwrap();
        let expect = vec![
            mt("2*tau1^1", 1, 2, 1, 0),
            mt("2*tau1^1", 1, 2, 2, 0),
            mt("-2*tau1^1", 2, 1, 1, 0),
            mt("2*tau1^1", 2, 1, 2, 0),
        ];
        assert_eq!(got, expect);
        assert_eq!(apply_dm(&t).unwrap(), vec![mt("4*tau1^1", 1, 2, 2, 0)]);
        let other = RadialTerm::new(w("b0^2 k^2 dk(1,0;0) b0^1 dk(1,0;0)"), sp("1*r^3")).unwrap();
        assert!(symmetric_split(&other).is_err());
    }
}
