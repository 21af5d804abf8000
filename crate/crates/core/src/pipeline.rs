//! Stage orchestration: symbol → parametrix → polar/angular → radial →
//! modular → conclusion, with certificates, golden comparisons, a cache for
//! the parametrix and single-coefficient fault injection.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_traits::One;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coeffring::{rat, Rational, ScalarMono, ScalarPoly};
use crate::integrate::{all_left_integrals, build_t, modular_from_t, radial_list, split_classes, ModularReduction};
use crate::modular::{
    assemble_premain, conclude, k_certificate, parse_terms, regroup_f, terms_to_text, ModularExpr, ModularTerm,
};
use crate::ncalg::NCPoly;
use crate::symbolcalc::{grading_violations, laplacian_by_products, Calculus, GradedSymbol};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("golden file {path}: {msg}")]
    Golden { path: PathBuf, msg: String },
    #[error("cache {path}: {msg}")]
    Cache { path: PathBuf, msg: String },
    #[error("{0}")]
    Stage(String),
}

/// Where a fault is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultStage {
    B2,
    RList,
    Direct,
    T,
    Modular,
    Slots,
}

impl FaultStage {
    pub const ALL: [FaultStage; 6] = [
        FaultStage::B2,
        FaultStage::RList,
        FaultStage::Direct,
        FaultStage::T,
        FaultStage::Modular,
        FaultStage::Slots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultStage::B2 => "b2",
            FaultStage::RList => "r-list",
            FaultStage::Direct => "direct",
            FaultStage::T => "t",
            FaultStage::Modular => "modular",
            FaultStage::Slots => "slots",
        }
    }
}

/// Multiply the leading rational of the `index`-th term (mod the term count)
/// at `stage` by `1 + 1/1000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fault {
    pub stage: FaultStage,
    pub index: usize,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.stage.name(), self.index)
    }
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (st, idx) = s.split_once(':').ok_or("expected STAGE:INDEX")?;
        let stage = FaultStage::ALL
            .into_iter()
            .find(|x| x.name() == st)
            .ok_or_else(|| format!("unknown stage `{st}`"))?;
        let index = idx.parse().map_err(|_| format!("bad index `{idx}`"))?;
        Ok(Fault { stage, index })
    }
}

fn perturb_scalar(c: &ScalarPoly) -> ScalarPoly {
    let Some((m, q)) = c.terms().next().map(|(m, q)| (*m, q.clone())) else {
        return c.clone();
    };
    let mut out = c.clone();
    out.add_term(m, q * rat(1, 1000));
    out
}

fn perturb_nc(p: &NCPoly, index: usize) -> NCPoly {
    if p.is_zero() {
        return p.clone();
    }
    let (w, c) = p.terms().nth(index % p.len()).map(|(w, c)| (w.clone(), c.clone())).unwrap();
    let mut out = p.clone();
    out.add_term(w, &perturb_scalar(&c) - &c);
    out
}

fn perturb_terms(t: &[ModularTerm], index: usize) -> Vec<ModularTerm> {
    let mut out = t.to_vec();
    if !out.is_empty() {
        let i = index % out.len();
        out[i].coeff = perturb_scalar(&out[i].coeff);
    }
    out
}

/// Stages in execution order; a run stops after `PipelineConfig::through`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Symbol,
    Parametrix,
    Reduce,
    #[default]
    Modular,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub through: Stage,
    pub golden_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Certificate {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Certificate {
        Certificate {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct SlotRatio {
    pub slot: String,
    pub ratio: String,
    pub ok: bool,
    pub offending: Vec<String>,
}

/// The modular-stage certificate.
#[derive(Debug, Clone, Serialize, Default)]
pub struct ModularCertificate {
    pub f_match: bool,
    pub f: String,
    pub slot_ratios: Vec<SlotRatio>,
    pub h_match: bool,
    #[serde(rename = "K_sh_form")]
    pub k_sh_form: bool,
    #[serde(rename = "K_odd")]
    pub k_odd: bool,
    #[serde(rename = "K_at_zero")]
    pub k_at_zero: String,
    pub conclusion: Option<String>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct PipelineReport {
    pub through: Stage,
    pub fault: Option<Fault>,
    pub certificates: Vec<Certificate>,
    pub golden: Vec<Certificate>,
    pub counts: BTreeMap<String, usize>,
    /// SHA-256 of each artifact's canonical text.
    pub checksums: BTreeMap<String, String>,
    pub modular: ModularCertificate,
    pub conclusion: Option<String>,
    pub passed: bool,
}

impl PipelineReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if let Some(f) = self.fault {
            out.push_str(&format!("injected fault: {f}\n"));
        }
        for c in self.certificates.iter().chain(&self.golden) {
            out.push_str(&format!(
                "{} {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        for (k, v) in &self.counts {
            out.push_str(&format!("count {k}: {v}\n"));
        }
        for (k, v) in &self.checksums {
            out.push_str(&format!("sha256 {k}: {v}\n"));
        }
        match &self.conclusion {
            Some(c) => out.push_str(&format!("conclusion: {c}\n")),
            None => out.push_str("conclusion: not reached\n"),
        }
        out
    }

    pub fn failing(&self) -> Vec<&Certificate> {
        self.certificates.iter().chain(&self.golden).filter(|c| !c.passed).collect()
    }
}

fn sha(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// Hash of the rewriting rules the parametrix depends on.
pub fn rules_hash() -> String {
    let src = concat!(
        include_str!("coeffring.rs"),
        include_str!("ncalg.rs"),
        include_str!("symbolcalc.rs")
    );
    sha(src)[..16].to_string()
}

/// Parametrix through order `-2-n`, read from or written to `cache_dir`.
/// Returns the symbol and whether it came from the cache.
pub fn parametrix_cached(n: i32, cache_dir: Option<&Path>) -> Result<(GradedSymbol, bool), PipelineError> {
    let calc = Calculus::symbolic();
    let build = || calc.parametrix(n).map_err(|e| PipelineError::Stage(format!("parametrix: {e}")));
    let Some(dir) = cache_dir else {
        return Ok((build()?, false));
    };
    let path = dir.join(format!("parametrix-{n}-{}.txt", rules_hash()));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(g) = GradedSymbol::parse_text(&text) {
            return Ok((g, true));
        }
    }
    let g = build()?;
    let err = |e: std::io::Error| PipelineError::Cache {
        path: path.clone(),
        msg: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(err)?;
    std::fs::write(&path, g.to_text()).map_err(err)?;
    Ok((g, false))
}

/// Everything produced on the way to the conclusion.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    /// The parametrix was read from the cache; kept out of the report so
    /// that reports do not depend on cache state.
    pub from_cache: bool,
    pub parametrix: GradedSymbol,
    pub b2: NCPoly,
    pub r_list: NCPoly,
    pub all_left: NCPoly,
    pub single_middle: NCPoly,
    pub squared_middle: NCPoly,
    pub all_left_result: NCPoly,
    pub t: NCPoly,
    pub modular: ModularReduction,
    pub expr: ModularExpr,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(PipelineReport, Artifacts), PipelineError> {
    let mut rep = PipelineReport {
        through: cfg.through,
        fault: cfg.fault,
        ..Default::default()
    };
    let mut art = Artifacts::default();
    let fault_at = |s: FaultStage| cfg.fault.filter(|f| f.stage == s).map(|f| f.index);

    let calc = Calculus::symbolic();
    // symbol
    match laplacian_by_products(&calc) {
        Ok(p) => {
            let ok = p == calc.laplacian_symbol();
            rep.certificates.push(Certificate::new(
                "symbol",
                ok,
                "σ(k)·σ(∆)·σ(k) equals the closed-form symbol of k∆k",
            ));
        }
        Err(e) => rep.certificates.push(Certificate::new("symbol", false, e.to_string())),
    }
    if cfg.through == Stage::Symbol {
        return finish(cfg, rep, art, Stage::Symbol);
    }

    // parametrix
    let (mut b, cached) = parametrix_cached(2, cfg.cache_dir.as_deref())?;
    if let Some(i) = fault_at(FaultStage::B2) {
        let b2 = perturb_nc(&b.component(-4), i);
        b.insert(-4, b2);
    }
    art.b2 = b.component(-4);
    let comp = calc
        .composition_check(&b, 2)
        .map_err(|e| PipelineError::Stage(format!("composition: {e}")))?;
    let bad: Vec<String> = comp.orders.iter().filter(|o| !o.1).map(|o| o.0.to_string()).collect();
    rep.certificates.push(Certificate::new(
        "parametrix",
        comp.passed() && grading_violations(&b).is_empty(),
        if bad.is_empty() {
            "σ(B)·(σ(k∆k)+1) = 1 in orders 0, -1, -2".to_string()
        } else {
            format!("composition fails in orders {}", bad.join(", "))
        },
    ));
    art.parametrix = b;
    art.from_cache = cached;
    rep.counts.insert("b2_terms".into(), art.b2.len());
    rep.checksums.insert("b2".into(), sha(&art.b2.to_term_list()));

    if cfg.through == Stage::Parametrix {
        return finish(cfg, rep, art, Stage::Parametrix);
    }

    // polar, angular and radial stages
    art.r_list = radial_list(&art.b2);
    if let Some(i) = fault_at(FaultStage::RList) {
        art.r_list = perturb_nc(&art.r_list, i);
    }
    let reduced = (|| {
        let (al, sm, sq) = split_classes(&art.r_list)?;
        let mut direct = all_left_integrals(&al)?;
        if let Some(i) = fault_at(FaultStage::Direct) {
            direct = perturb_nc(&direct, i);
        }
        let mut t = build_t(&sm, &sq)?;
        if let Some(i) = fault_at(FaultStage::T) {
            t = perturb_nc(&t, i);
        }
        let mut m = modular_from_t(&t)?;
        if let Some(i) = fault_at(FaultStage::Modular) {
            m.modular = perturb_terms(&m.modular, i);
        }
        Ok::<_, crate::integrate::IntegrateError>((al, sm, sq, direct, t, m))
    })();
    match reduced {
        Ok((al, sm, sq, direct, t, m)) => {
            art.all_left = al;
            art.single_middle = sm;
            art.squared_middle = sq;
            art.all_left_result = direct;
            art.t = t;
            art.modular = m;
            rep.certificates.push(Certificate::new(
                "reduction",
                true,
                format!(
                    "{} radial terms: {} all-left, {} single-middle, {} squared-middle",
                    art.r_list.len(),
                    art.all_left.len(),
                    art.single_middle.len(),
                    art.squared_middle.len()
                ),
            ));
        }
        Err(e) => {
            rep.certificates.push(Certificate::new("reduction", false, e.to_string()));
            return finish(cfg, rep, art, Stage::Parametrix);
        }
    }
    for (k, v) in [
        ("r_list_terms", art.r_list.len()),
        ("all_left_terms", art.all_left.len()),
        ("single_middle_terms", art.single_middle.len()),
        ("squared_middle_terms", art.squared_middle.len()),
        ("t_terms", art.t.len()),
        ("modular_terms", art.modular.modular.len()),
    ] {
        rep.counts.insert(k.into(), v);
    }
    rep.checksums.insert("r_list".into(), sha(&art.r_list.to_term_list()));
    rep.checksums.insert("t".into(), sha(&art.t.to_term_list()));
    rep.checksums.insert("modular".into(), sha(&terms_to_text(&art.modular.modular)));
    if cfg.through == Stage::Reduce {
        return finish(cfg, rep, art, Stage::Reduce);
    }

    // modular
    let expr = match assemble_premain(&art.all_left_result, &art.modular.modular) {
        Ok(e) => e,
        Err(e) => {
            rep.certificates.push(Certificate::new("assembly", false, e.to_string()));
            return finish(cfg, rep, art, Stage::Reduce);
        }
    };
    art.expr = match fault_at(FaultStage::Slots) {
        Some(i) => ModularExpr::from_terms(&perturb_terms(&expr.to_terms(), i)),
        None => expr,
    };
    let (f, regroup) = regroup_f(&art.expr);
    rep.modular.f_match = regroup.f_match;
    rep.modular.f = f.to_string();
    rep.modular.slot_ratios = regroup
        .slots
        .iter()
        .map(|s| SlotRatio {
            slot: format!("({},{})", s.slot.0, s.slot.1),
            ratio: s.ratio.pretty(),
            ok: s.ok,
            offending: s.offending.iter().map(|b| b.to_string()).collect(),
        })
        .collect();
    let bad_slots: Vec<String> = rep
        .modular
        .slot_ratios
        .iter()
        .filter(|s| !s.ok)
        .map(|s| format!("{} at {}", s.slot, s.offending.join(", ")))
        .collect();
    rep.certificates.push(Certificate::new(
        "regroup",
        regroup.passed(),
        if regroup.passed() {
            "slots are (f, |τ|²f, τ1·f, τ1·f) with the expected f".to_string()
        } else if !bad_slots.is_empty() {
            format!("slots not proportional: {}", bad_slots.join("; "))
        } else {
            format!("f differs from the expected closed form: {f}")
        },
    ));

    let k = match k_certificate(&f) {
        Ok(k) => k,
        Err(e) => {
            rep.certificates.push(Certificate::new("conclusion", false, e.to_string()));
            return finish(cfg, rep, art, Stage::Reduce);
        }
    };
    rep.modular.h_match = k.h_match;
    rep.modular.k_sh_form = k.sh_match;
    rep.modular.k_odd = k.odd;
    rep.modular.k_at_zero = k.value_at_zero().to_string();
    rep.certificates.push(Certificate::new("h", k.h_match, "f(e^x) equals the expected h(x)"));
    rep.certificates.push(Certificate::new("K-sh-form", k.sh_match, "4x⁻²(e^{x/2}-1)²h(x) equals the sh form"));
    rep.certificates.push(Certificate::new(
        "K-odd",
        k.odd,
        match &k.residual {
            None => "K(x) + K(-x) = 0".to_string(),
            Some(r) => format!("residual numerator {r}"),
        },
    ));
    match conclude(&regroup, &k) {
        Ok(c) => {
            rep.certificates.push(Certificate::new(
                "conclusion",
                true,
                format!("ζ(0) = {} for all τ1, τ2 (off-diagonal residual {})", c.zeta0, c.off_diagonal_residual.pretty()),
            ));
            rep.modular.conclusion = Some(c.statement.clone());
            rep.conclusion = Some(c.statement);
        }
        Err(e) => rep.certificates.push(Certificate::new("conclusion", false, e.to_string())),
    }

    finish(cfg, rep, art, Stage::Modular)
}

/// Golden comparisons for every stage up to `reached`, then the verdict.
/// A run that stops early because a stage failed never passes.
fn finish(
    cfg: &PipelineConfig,
    mut rep: PipelineReport,
    art: Artifacts,
    reached: Stage,
) -> Result<(PipelineReport, Artifacts), PipelineError> {
    if let Some(dir) = &cfg.golden_dir {
        rep.golden = golden_checks(dir, &art, reached)?;
    }
    rep.passed = reached == cfg.through
        && rep.certificates.iter().chain(&rep.golden).all(|c| c.passed)
        && (cfg.through < Stage::Modular || rep.conclusion.is_some());
    Ok((rep, art))
}

fn read_golden(dir: &Path, name: &str) -> Result<String, PipelineError> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| PipelineError::Golden {
        path,
        msg: e.to_string(),
    })
}

fn golden_nc(dir: &Path, name: &str) -> Result<NCPoly, PipelineError> {
    NCPoly::parse_term_list(&read_golden(dir, name)?).map_err(|e| PipelineError::Golden {
        path: dir.join(name),
        msg: e.to_string(),
    })
}

fn compare(name: &str, got: &NCPoly, want: &NCPoly) -> Certificate {
    let d = got.sub(want);
    let first = d.terms().next().map(|(w, c)| format!("[{}] {}", c.pretty(), w));
    match first {
        None => Certificate::new(name, true, format!("{} terms match", want.len())),
        Some(t) => Certificate::new(name, false, format!("{} terms differ; first: {t}", d.len())),
    }
}

/// Compare the artifacts of every stage up to `reached` against the golden
/// term lists in `dir`.
pub fn golden_checks(dir: &Path, art: &Artifacts, reached: Stage) -> Result<Vec<Certificate>, PipelineError> {
    let mut out = Vec::new();
    if reached < Stage::Parametrix {
        return Ok(out);
    }
    out.push(compare("golden b2", &art.b2, &golden_nc(dir, "b2_printed.txt")?));
    out.push(compare(
        "golden rearranged b2",
        &art.b2.cyclic_normalize(),
        &golden_nc(dir, "b2_cyclic_printed.txt")?.cyclic_normalize(),
    ));
    if reached < Stage::Reduce {
        return Ok(out);
    }
    out.extend([
        compare("golden r-list", &art.r_list, &golden_nc(dir, "r_list.txt")?),
        compare("golden all-left terms", &art.all_left, &golden_nc(dir, "all_left_terms.txt")?),
        compare(
            "golden all-left result",
            &art.all_left_result,
            &golden_nc(dir, "all_left_result.txt")?,
        ),
        compare(
            "golden single-middle terms",
            &art.single_middle,
            &golden_nc(dir, "single_middle_terms.txt")?,
        ),
        compare(
            "golden squared-middle terms",
            &art.squared_middle,
            &golden_nc(dir, "squared_middle_terms.txt")?,
        ),
        compare("golden T", &art.t, &golden_nc(dir, "t_terms.txt")?),
    ]);
    let want = parse_terms(&read_golden(dir, "premain_modular.txt")?).map_err(|e| PipelineError::Golden {
        path: dir.join("premain_modular.txt"),
        msg: e.to_string(),
    })?;
    let got = terms_to_text(&art.modular.modular);
    let want = terms_to_text(&want);
    let first = got.lines().zip(want.lines()).find(|(a, b)| a != b);
    out.push(match (first, got.lines().count() == want.lines().count()) {
        (None, true) => Certificate::new("golden modular terms", true, format!("{} terms match", want.lines().count())),
        (Some((a, b)), _) => Certificate::new("golden modular terms", false, format!("first difference: {a} vs {b}")),
        (None, false) => Certificate::new("golden modular terms", false, "term counts differ"),
    });
    Ok(out)
}

/// Compact rendering: each word's coefficient is split by ξ-monomial, pure
/// powers first, e.g. `xi1^2*k^2 + (tau1^2+tau2^2)*xi2^2*k^2 + 2*tau1*xi1*xi2*k^2`.
pub fn pretty_nc(p: &NCPoly) -> String {
    let mut parts = Vec::new();
    for (w, c) in p.terms() {
        let mut by_xi: BTreeMap<(u32, u32), ScalarPoly> = BTreeMap::new();
        for (m, q) in c.terms() {
            let mut rest = *m;
            rest.e_xi1 = 0;
            rest.e_xi2 = 0;
            by_xi.entry((m.e_xi1, m.e_xi2)).or_default().add_term(rest, q.clone());
        }
        let mut keys: Vec<(u32, u32)> = by_xi.keys().copied().collect();
        keys.sort_by_key(|&(a, b)| (a > 0 && b > 0, std::cmp::Reverse(a), b));
        let word = w.atoms().iter().map(|a| a.to_string()).collect::<Vec<_>>().join("*");
        for key in keys {
            let coeff = &by_xi[&key];
            let mut factors = Vec::new();
            if coeff.len() > 1 {
                factors.push(format!("({})", coeff.pretty()));
            } else if coeff.as_constant().is_some_and(|q| q.is_one()) {
            } else {
                factors.push(coeff.pretty());
            }
            let xi = ScalarMono {
                e_xi1: key.0,
                e_xi2: key.1,
                ..ScalarMono::ONE
            };
            let xi = ScalarPoly::monomial(xi, Rational::one()).pretty();
            if xi != "1" {
                factors.push(xi);
            }
            if !word.is_empty() {
                factors.push(word.clone());
            }
            if factors.is_empty() {
                factors.push("1".into());
            }
            parts.push(factors.join("*"));
        }
    }
    if parts.is_empty() {
        return "0".into();
    }
    parts.join(" + ").replace("+ -", "- ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pretty_a2() {
        let a2 = Calculus::symbolic().laplacian_symbol().component(2);
        assert_eq!(
            pretty_nc(&a2),
            "xi1^2*k^2 + (tau1^2+tau2^2)*xi2^2*k^2 + 2*tau1*xi1*xi2*k^2"
        );
    }

    #[test]
    fn fault_parsing() {
        let f: Fault = "r-list:3".parse().unwrap();
        assert_eq!(f, Fault { stage: FaultStage::RList, index: 3 });
        assert_eq!(f.to_string(), "r-list:3");
        assert!("x:1".parse::<Fault>().is_err());
        assert!("t:x".parse::<Fault>().is_err());
    }

    #[test]
    fn perturbation_changes_one_coefficient() {
        let p: NCPoly = "[2] k^1 dk(1,0;0)\n[3*tau1^1] k^1 dk(0,1;0)\n".parse().unwrap();
        let q = perturb_nc(&p, 1);
        let d = q.sub(&p);
        assert_eq!(d.len(), 1);
        assert_eq!(d.to_term_list(), "[3/1000*tau1^1] k^1 dk(0,1;0)\n");
    }
}
