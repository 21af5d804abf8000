use std::path::PathBuf;
use std::sync::OnceLock;

use nczeta::integrate::{reduce, Reduction};
use nczeta::modular::{
    assemble_premain, assemble_raw, k_certificate, parse_terms, regroup_f, terms_to_text, ModularExpr,
};
use nczeta::ncalg::NCPoly;
use nczeta::symbolcalc::Calculus;

fn golden(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn golden_poly(name: &str) -> NCPoly {
    NCPoly::parse_term_list(&golden(name)).unwrap()
}

fn b2() -> &'static NCPoly {
    static B2: OnceLock<NCPoly> = OnceLock::new();
    B2.get_or_init(|| Calculus::symbolic().parametrix(2).unwrap().component(-4))
}

fn reduction() -> &'static Reduction {
    static R: OnceLock<Reduction> = OnceLock::new();
    R.get_or_init(|| reduce(b2()).unwrap())
}

/// Words present in only one side, or with different coefficients.
fn diff(got: &NCPoly, want: &NCPoly) -> Vec<String> {
    got.sub(want).terms().map(|(w, c)| format!("[{c}] {w}")).collect()
}

#[test]
fn goldens_are_canonical_text() {
    for name in [
        "b2_printed.txt",
        "b2_cyclic_printed.txt",
        "r_list.txt",
        "all_left_terms.txt",
        "all_left_result.txt",
        "single_middle_terms.txt",
        "squared_middle_terms.txt",
        "t_terms.txt",
        "premain_direct.txt",
    ] {
        let text = golden(name);
        assert_eq!(golden_poly(name).to_term_list(), text, "{name}");
    }
    let text = golden("premain_modular.txt");
    assert_eq!(terms_to_text(&parse_terms(&text).unwrap()), text);
}

#[test]
fn printed_b2_matches() {
    assert_eq!(diff(b2(), &golden_poly("b2_printed.txt")), Vec::<String>::new());
}

#[test]
fn rearranged_b2_matches() {
    let got = b2().cyclic_normalize();
    let want = golden_poly("b2_cyclic_printed.txt").cyclic_normalize();
    assert_eq!(diff(&got, &want), Vec::<String>::new());
}

#[test]
fn radial_list_and_classes() {
    let r = reduction();
    assert_eq!(diff(&r.r_list, &golden_poly("r_list.txt")), Vec::<String>::new());
    assert_eq!(diff(&r.all_left, &golden_poly("all_left_terms.txt")), Vec::<String>::new());
    assert_eq!(diff(&r.single_middle, &golden_poly("single_middle_terms.txt")), Vec::<String>::new());
    assert_eq!(diff(&r.squared_middle, &golden_poly("squared_middle_terms.txt")), Vec::<String>::new());
    assert_eq!(
        r.all_left.len() + r.single_middle.len() + r.squared_middle.len(),
        r.r_list.len()
    );
}

#[test]
fn radial_integrals() {
    let r = reduction();
    assert_eq!(r.all_left_result, golden_poly("all_left_result.txt"));
    assert_eq!(r.all_left_result, golden_poly("premain_direct.txt"));
    assert_eq!(diff(&r.t, &golden_poly("t_terms.txt")), Vec::<String>::new());
}

#[test]
fn modular_terms_and_conclusion() {
    let r = reduction();
    let want = parse_terms(&golden("premain_modular.txt")).unwrap();
    assert_eq!(terms_to_text(&r.modular), terms_to_text(&want));

    let raw = assemble_raw(&r.all_left_result, &r.modular).unwrap();
    let e = assemble_premain(&r.all_left_result, &r.modular).unwrap();
    assert_eq!(e, raw.neg());
    let (f, cert) = regroup_f(&e);
    assert!(cert.passed(), "{cert:?}");
    let k = k_certificate(&f).unwrap();
    assert!(k.passed());

    // The unsymmetrized route does not regroup slot by slot.
    let u = assemble_premain(&r.all_left_result, &r.modular_unsymmetrized).unwrap();
    assert!(!regroup_f(&u).1.passed());
    assert_ne!(u, e);
    let back: ModularExpr = e.to_text().parse().unwrap();
    assert_eq!(back, e);
}
