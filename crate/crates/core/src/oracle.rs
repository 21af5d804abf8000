//! Finite-dimensional matrix models for checking the identities the symbolic
//! layer relies on.
//!
//! A model is a positive matrix `k` and two commuting hermitian matrices
//! `d_1, d_2` with `δ_j(x) = [d_j, x]`, `τ0 = tr/n`, `Δ(x) = k^{-2} x k^2`
//! and `φ(x) = τ0(x k^{-2})`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::modular::{eval_spectral_tau, log_m, expected_f, slot_ratio, ModularTerm, SpectralFn, SLOTS};
use crate::ncalg::{Atom, NCPoly};

pub type CMat = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("k is not positive definite (smallest eigenvalue {0})")]
    NotPositive(f64),
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
    #[error("cannot evaluate `{0}` on a matrix model")]
    Unsupported(String),
}

#[derive(Debug, Clone)]
pub struct MatrixModel {
    pub n: usize,
    pub k: CMat,
    pub d: [CMat; 2],
    pub seed: u64,
    /// Columns are eigenvectors of `k`.
    basis: CMat,
    /// Eigenvalues of `k`.
    lambda: Vec<f64>,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    random_matrix(rng, n).qr().q()
}

fn conj_diag(u: &CMat, diag: &[f64]) -> CMat {
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x))));
    u * d * u.adjoint()
}

/// Rotate the columns of `v` until `v* k v` is diagonal to roundoff. The
/// library eigensolver stops with off-diagonal residue near 1e-11 when
/// eigenvalues are close; a few complex Jacobi sweeps remove it.
fn jacobi_polish(mut v: CMat, k: &CMat) -> (CMat, Vec<f64>) {
    let n = k.nrows();
    for _ in 0..30 {
        let b = v.adjoint() * k * &v;
        let scale = max_abs(&b).max(f64::MIN_POSITIVE);
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(b[(p, q)].norm());
            }
        }
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = v.adjoint() * k * &v;
                let cpq = b[(p, q)];
                if cpq.norm() <= 1e-17 * scale {
                    continue;
                }
                let (a, d) = (b[(p, p)].re, b[(q, q)].re);
                let phase = cpq / cpq.norm();
                let zeta = (d - a) / (2.0 * cpq.norm());
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let (vp, vq) = (v.column(p).clone_owned(), v.column(q).clone_owned());
                let w = phase.conj();
                v.set_column(p, &(&vp * c(cs) - &vq * (w * sn)));
                v.set_column(q, &(&vp * c(sn) + &vq * (w * cs)));
            }
        }
    }
    let b = v.adjoint() * k * &v;
    let lambda = (0..n).map(|i| b[(i, i)].re).collect();
    (v, lambda)
}

impl MatrixModel {
    pub fn new(k: CMat, d1: CMat, d2: CMat, seed: u64) -> Result<MatrixModel, OracleError> {
        let n = k.nrows();
        let eig = SymmetricEigen::new(k.clone());
        let (basis, lambda) = jacobi_polish(eig.eigenvectors, &k);
        let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(OracleError::NotPositive(min));
        }
        Ok(MatrixModel {
            n,
            k,
            d: [d1, d2],
            seed,
            basis,
            lambda,
        })
    }

    /// Random model. `k` has eigenvalues in `[0.5, 2]` with every ratio of
    /// eigenvalues of `k^2` at least `1e-3` away from 1; `d_1, d_2` share
    /// an eigenbasis so that `δ_1 δ_2 = δ_2 δ_1`.
    pub fn random(n: usize, seed: u64) -> MatrixModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
            let gap = lambda
                .iter()
                .flat_map(|a| lambda.iter().map(move |b| (a * a / (b * b) - 1.0).abs()))
                .filter(|g| *g > 0.0)
                .fold(f64::INFINITY, f64::min);
            if lambda.len() > 1 && gap < 1e-3 {
                continue;
            }
            let u = random_unitary(&mut rng, n);
            let v = random_unitary(&mut rng, n);
            let e1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            return MatrixModel::new(conj_diag(&u, &lambda), conj_diag(&v, &e1), conj_diag(&v, &e2), seed).unwrap();
        }
    }

    /// Model whose `k^2` eigenvalue ratios all lie within `spread` of 1, so
    /// that the functional calculus runs through the series branch.
    pub fn near_degenerate(n: usize, seed: u64, spread: f64) -> MatrixModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: f64 = rng.gen_range(0.7..1.4);
        let lambda: Vec<f64> = (0..n).map(|_| base * (1.0 + rng.gen_range(0.0..spread / 3.0))).collect();
        let u = random_unitary(&mut rng, n);
        let v = random_unitary(&mut rng, n);
        let e1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        MatrixModel::new(conj_diag(&u, &lambda), conj_diag(&v, &e1), conj_diag(&v, &e2), seed).unwrap()
    }

    pub fn random_element(&self, rng: &mut ChaCha8Rng) -> CMat {
        random_matrix(rng, self.n)
    }

    /// Eigenvalues of `k^2`.
    pub fn kappa(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| l * l).collect()
    }

    /// `g(k)` for a function of the eigenvalues of `k`.
    pub fn k_fn(&self, g: impl Fn(f64) -> f64) -> CMat {
        let vals: Vec<f64> = self.lambda.iter().map(|&l| g(l)).collect();
        conj_diag(&self.basis, &vals)
    }

    /// Integer power of `k`, by repeated products and one inverse.
    pub fn k_pow(&self, p: i32) -> CMat {
        let base = if p < 0 {
            self.k.clone().try_inverse().expect("k is invertible")
        } else {
            self.k.clone()
        };
        let mut out = CMat::identity(self.n, self.n);
        for _ in 0..p.unsigned_abs() {
            out = &out * &base;
        }
        out
    }

    pub fn delta(&self, j: usize, x: &CMat) -> CMat {
        let d = &self.d[j - 1];
        d * x - x * d
    }

    /// `δ_1^a δ_2^b (k)`.
    pub fn dk(&self, a: u32, b: u32) -> CMat {
        let mut x = self.k.clone();
        for _ in 0..a {
            x = self.delta(1, &x);
        }
        for _ in 0..b {
            x = self.delta(2, &x);
        }
        x
    }

    pub fn tau0(&self, x: &CMat) -> Complex64 {
        x.trace() / c(self.n as f64)
    }

    pub fn phi(&self, x: &CMat) -> Complex64 {
        self.tau0(&(x * self.k_pow(-2)))
    }

    /// `F(Δ)(x)`: entry `(a, b)` in the eigenbasis of `k` is scaled by `F(κ_b/κ_a)`.
    pub fn functional_calculus(&self, f: impl Fn(f64) -> f64, x: &CMat) -> CMat {
        let kappa = self.kappa();
        let mut y = self.basis.adjoint() * x * &self.basis;
        for a in 0..self.n {
            for b in 0..self.n {
                y[(a, b)] *= f(kappa[b] / kappa[a]);
            }
        }
        &self.basis * y * self.basis.adjoint()
    }

    /// `Δ(x) = k^{-2} x k^2` computed directly.
    pub fn modular(&self, x: &CMat) -> CMat {
        self.k_pow(-2) * x * self.k_pow(2)
    }

    pub fn spectral(&self, s: &SpectralFn, tau: (f64, f64), x: &CMat) -> CMat {
        self.functional_calculus(|u| eval_spectral_tau(s, u, tau.0, tau.1).expect("u > 0"), x)
    }
}

fn max_abs(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Kronrod panel: (15-point estimate, |K15 − G7| in max norm).
fn gk15<F: Fn(f64) -> Vec<Complex64>>(f: &F, a: f64, b: f64) -> (Vec<Complex64>, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut k: Vec<Complex64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut g: Vec<Complex64> = fc.iter().map(|v| v * WG[3]).collect();
    for i in 0..7 {
        let f1 = f(mid - half * XGK[i]);
        let f2 = f(mid + half * XGK[i]);
        for t in 0..k.len() {
            let s = f1[t] + f2[t];
            k[t] += s * WGK[i];
            if i % 2 == 1 {
                g[t] += s * WG[i / 2];
            }
        }
    }
    let err = k.iter().zip(&g).map(|(x, y)| (x - y).norm() * half).fold(0.0, f64::max);
    (k.into_iter().map(|v| v * half).collect(), err)
}

/// Adaptive Gauss–Kronrod integration of a vector-valued function on `[a, b]`
/// with absolute tolerance `tol` per component.
pub fn integrate_adaptive<F: Fn(f64) -> Vec<Complex64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<Vec<Complex64>, OracleError> {
    fn go<F: Fn(f64) -> Vec<Complex64>>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<Vec<Complex64>, OracleError> {
        let (v, err) = gk15(f, a, b);
        if err <= tol {
            return Ok(v);
        }
        if depth == 0 {
            return Err(OracleError::Quadrature { a, b });
        }
        let m = 0.5 * (a + b);
        let mut l = go(f, a, m, tol / 2.0, depth - 1)?;
        let r = go(f, m, b, tol / 2.0, depth - 1)?;
        for (x, y) in l.iter_mut().zip(r) {
            *x += y;
        }
        Ok(l)
    }
    go(f, a, b, tol, 40)
}

/// `∫_0^∞ k^{2m+2} u^m (k^2 u + 1)^{-(m+1)} ρ (k^2 u + 1)^{-1} du`, by quadrature
/// after `u = t/(1-t)`, using only matrix products and inverses.
pub fn dm_integral(model: &MatrixModel, m: u8, rho: &CMat, tol: f64) -> Result<CMat, OracleError> {
    let n = model.n;
    let k2 = model.k_pow(2);
    let lead = model.k_pow(2 * m as i32 + 2);
    let id = CMat::identity(n, n);
    let f = |t: f64| -> Vec<Complex64> {
        let u = t / (1.0 - t);
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        let inv = (&k2 * c(u) + &id).try_inverse().expect("k^2 u + 1 is invertible");
        let mut left = &lead * c(u.powi(m as i32) * jac);
        for _ in 0..=m {
            left = left * &inv;
        }
        let v = left * rho * &inv;
        v.iter().copied().collect()
    };
    let v = integrate_adaptive(&f, 0.0, 1.0, tol)?;
    Ok(CMat::from_iterator(n, n, v))
}

/// Max entrywise error between the quadrature and `L_m(Δ)(ρ)`.
pub fn check_dm_integral(model: &MatrixModel, m: u8, rho: &CMat) -> Result<f64, OracleError> {
    let quad = dm_integral(model, m, rho, 1e-11)?;
    let calc = model.functional_calculus(|u| log_m(m, u).expect("u > 0"), rho);
    Ok(max_abs(&(quad - calc)))
}

/// Evaluate `c · τ0(k^{-2} L_m(Δ)(k^{-q} δ_i(k) k^q) δ_j(k))` for one modular term,
/// with the twist `Δ^{q/2}` applied by explicit conjugation.
pub fn eval_modular_term(model: &MatrixModel, t: &ModularTerm, tau: (f64, f64)) -> Result<Complex64, OracleError> {
    let coeff = t.coeff.eval_tau(tau.0, tau.1).map_err(|e| OracleError::Unsupported(e.to_string()))?;
    let di = model.dk(u32::from(t.i == 1), u32::from(t.i == 2));
    let dj = model.dk(u32::from(t.j == 1), u32::from(t.j == 2));
    // Δ^{q/2}(x) = k^{-q} x k^q
    let twisted = model.k_pow(-t.twist) * &di * model.k_pow(t.twist);
    let inner = if t.m == 0 {
        twisted
    } else {
        model.functional_calculus(|u| log_m(t.m, u).expect("u > 0"), &twisted)
    };
    Ok(model.phi(&(inner * dj)) * coeff)
}

/// `c · τ0(k^{-2} δ_i(k) δ_j(k))` or `c · τ0(k^{-1} δ_1^a δ_2^b(k))` for each closed-form term.
pub fn eval_direct(model: &MatrixModel, direct: &NCPoly, tau: (f64, f64)) -> Result<Complex64, OracleError> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (w, cf) in direct.terms() {
        let coeff = cf.eval_tau(tau.0, tau.1).map_err(|e| OracleError::Unsupported(e.to_string()))?;
        let bad = || OracleError::Unsupported(w.to_string());
        let x = match w.atoms() {
            [Atom::KPow(p), rest @ ..] => {
                let mut x = model.k_pow(*p);
                for a in rest {
                    match a {
                        Atom::DK { a, b, twist: 0 } => x = x * model.dk(*a, *b),
                        _ => return Err(bad()),
                    }
                }
                x
            }
            _ => return Err(bad()),
        };
        acc += model.tau0(&x) * coeff;
    }
    Ok(acc)
}

/// `(2π/τ2) Σ_ij r_ij φ(f(Δ)(δ_i k) δ_j k)` with slot ratios `(1, |τ|^2, τ1, τ1)`.
pub fn regrouped_value(model: &MatrixModel, f: &SpectralFn, tau: (f64, f64)) -> (Complex64, [Complex64; 4]) {
    let mut phis = [Complex64::new(0.0, 0.0); 4];
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, &(i, j)) in SLOTS.iter().enumerate() {
        let di = model.dk(u32::from(i == 1), u32::from(i == 2));
        let dj = model.dk(u32::from(j == 1), u32::from(j == 2));
        let p = model.phi(&(model.spectral(f, tau, &di) * dj));
        phis[n] = p;
        sum += p * slot_ratio(i, j).eval_tau(tau.0, tau.1).unwrap();
    }
    (sum * (2.0 * std::f64::consts::PI / tau.1), phis)
}

/// Tolerance scale: the largest `|coeff · φ(u^{q/2}L_m(Δ)(δ_i k) δ_j k)|` over the expanded `f` slots.
pub fn term_scale(model: &MatrixModel, f: &SpectralFn, tau: (f64, f64)) -> f64 {
    let mut scale: f64 = 0.0;
    for &(i, j) in SLOTS.iter() {
        let ratio = slot_ratio(i, j).eval_tau(tau.0, tau.1).unwrap();
        let di = model.dk(u32::from(i == 1), u32::from(i == 2));
        let dj = model.dk(u32::from(j == 1), u32::from(j == 2));
        for (b, cf) in f.terms() {
            let one = SpectralFn::term(*b, cf.clone());
            let v = model.phi(&(model.spectral(&one, tau, &di) * &dj)) * ratio;
            scale = scale.max(v.norm());
        }
    }
    scale * 2.0 * std::f64::consts::PI / tau.1
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalReport {
    pub sum: f64,
    pub scale: f64,
    /// `max |φ_ij + φ_ji| / scale` over all pairs, diagonal included.
    pub antisymmetry: f64,
    pub relative: f64,
}

pub fn check_final_identity(model: &MatrixModel, tau1: f64, tau2: f64) -> FinalReport {
    let f = expected_f();
    let tau = (tau1, tau2);
    let (sum, phis) = regrouped_value(model, &f, tau);
    let scale = term_scale(model, &f, tau).max(f64::MIN_POSITIVE);
    let pre = 2.0 * std::f64::consts::PI / tau2;
    let anti = [(0, 0), (3, 3), (1, 2)]
        .iter()
        .map(|&(a, b)| (phis[a] + phis[b]).norm() * pre / scale)
        .fold(0.0, f64::max);
    FinalReport {
        sum: sum.norm(),
        scale,
        antisymmetry: anti,
        relative: sum.norm() / scale,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegroupReport {
    /// `|premain − regrouped| / scale`.
    pub premain_vs_regrouped: f64,
    /// `|symmetric split − direct route| / scale` under φ.
    pub split_variants: f64,
    pub scale: f64,
}

/// The collected expression, evaluated literally term by term, against the
/// regrouped slot form.
pub fn check_regrouping(
    model: &MatrixModel,
    direct: &NCPoly,
    modular: &[ModularTerm],
    split: (&[ModularTerm], &[ModularTerm]),
    tau: (f64, f64),
) -> Result<RegroupReport, OracleError> {
    let pre = 2.0 * std::f64::consts::PI / tau.1;
    let mut lhs = eval_direct(model, direct, tau)?;
    for t in modular {
        lhs += eval_modular_term(model, t, tau)?;
    }
    // ζ(0) + 1 carries the opposite sign of the collected sum.
    let lhs = -lhs * pre;
    let f = expected_f();
    let (rhs, _) = regrouped_value(model, &f, tau);
    let scale = term_scale(model, &f, tau).max(f64::MIN_POSITIVE);
    let mut a = Complex64::new(0.0, 0.0);
    for t in split.0 {
        a += eval_modular_term(model, t, tau)?;
    }
    let mut b = Complex64::new(0.0, 0.0);
    for t in split.1 {
        b += eval_modular_term(model, t, tau)?;
    }
    Ok(RegroupReport {
        premain_vs_regrouped: (lhs - rhs).norm() / scale,
        split_variants: (a - b).norm() * pre / scale,
        scale,
    })
}

/// Max entrywise error of `k^{-1} δ_j(k) = g(Δ)(δ_j(log k))`, `g(v) = 2(v^{1/2} − 1)/log v`.
pub fn check_log_transport(model: &MatrixModel) -> f64 {
    let logk = model.k_fn(f64::ln);
    let kinv = model.k_pow(-1);
    let g = |v: f64| {
        let x = v.ln();
        if x.abs() < 1e-4 {
            1.0 + x / 4.0 + x * x / 48.0
        } else {
            2.0 * (v.sqrt() - 1.0) / x
        }
    };
    (1..=2)
        .map(|j| {
            let lhs = &kinv * model.delta(j, &model.k);
            let rhs = model.functional_calculus(g, &model.delta(j, &logk));
            max_abs(&(lhs - rhs))
        })
        .fold(0.0, f64::max)
}

/// `|τ0(a F(log Δ)(b)) − τ0(F(−log Δ)(a) b)|` for a polynomial `F`.
pub fn check_log_delta(model: &MatrixModel, a: &CMat, b: &CMat, poly: &[f64]) -> f64 {
    let f = |x: f64| poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let lhs = model.tau0(&(a * model.functional_calculus(|u| f(u.ln()), b)));
    let rhs = model.tau0(&(model.functional_calculus(|u| f(-u.ln()), a) * b));
    (lhs - rhs).norm()
}

/// `max_j |τ0(δ_j(x))|`.
pub fn check_trace_delta(model: &MatrixModel, x: &CMat) -> f64 {
    (1..=2).map(|j| model.tau0(&model.delta(j, x)).norm()).fold(0.0, f64::max)
}

/// `x k^q = k^q Δ^{q/2}(x)` for `q = 1..4`, with `Δ^{q/2}` from the functional
/// calculus, relative to `|x k^q|`; also `Δ` itself against direct conjugation.
pub fn check_twist(model: &MatrixModel, x: &CMat) -> f64 {
    let mut err = max_abs(&(model.modular(x) - model.functional_calculus(|u| u, x)));
    for q in 1..=4 {
        let lhs = x * model.k_pow(q);
        let rhs = model.k_pow(q) * model.functional_calculus(|u| u.powf(f64::from(q) / 2.0), x);
        err = err.max(max_abs(&(&lhs - rhs)) / max_abs(&lhs));
    }
    err
}

/// Tolerances for the battery.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub dm_integral: f64,
    pub relative: f64,
    pub identity: f64,
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dm_integral: 1e-8,
            relative: 1e-9,
            identity: 1e-10,
            trace: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub dim: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub dm_integral: f64,
    pub final_identity: f64,
    pub antisymmetry: f64,
    pub premain_vs_regrouped: f64,
    pub split_variants: f64,
    pub log_transport: f64,
    pub log_delta: f64,
    pub trace_delta: f64,
    pub twist: f64,
    pub passed: bool,
}

/// Inputs taken from the symbolic pipeline.
#[derive(Debug, Clone)]
pub struct PipelineTerms {
    pub direct: NCPoly,
    pub modular: Vec<ModularTerm>,
    pub split_symmetric: Vec<ModularTerm>,
    pub split_direct: Vec<ModularTerm>,
}

pub fn run_trial(seed: u64, dim: usize, terms: &PipelineTerms, tol: &Tolerances) -> Result<TrialReport, OracleError> {
    let model = MatrixModel::random(dim, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let tau1 = rng.gen_range(-1.0..1.0);
    let tau2 = rng.gen_range(0.5..2.0);
    let mut dm_integral: f64 = 0.0;
    for m in 1..=3 {
        let rho = model.random_element(&mut rng);
        dm_integral = dm_integral.max(check_dm_integral(&model, m, &rho)?);
    }
    let fin = check_final_identity(&model, tau1, tau2);
    let reg = check_regrouping(
        &model,
        &terms.direct,
        &terms.modular,
        (&terms.split_symmetric, &terms.split_direct),
        (tau1, tau2),
    )?;
    let a = model.random_element(&mut rng);
    let b = model.random_element(&mut rng);
    let poly: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let log_delta = check_log_delta(&model, &a, &b, &poly);
    let log_transport = check_log_transport(&model);
    let trace_delta = check_trace_delta(&model, &a);
    let twist = check_twist(&model, &b);
    let passed = dm_integral <= tol.dm_integral
        && fin.relative <= tol.relative
        && fin.antisymmetry <= tol.relative
        && reg.premain_vs_regrouped <= tol.relative
        && reg.split_variants <= tol.relative
        && log_transport <= tol.identity
        && log_delta <= tol.identity
        && trace_delta <= tol.trace
        && twist <= tol.identity;
    Ok(TrialReport {
        seed,
        dim,
        tau1,
        tau2,
        dm_integral,
        final_identity: fin.relative,
        antisymmetry: fin.antisymmetry,
        premain_vs_regrouped: reg.premain_vs_regrouped,
        split_variants: reg.split_variants,
        log_transport,
        log_delta,
        trace_delta,
        twist,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub trials: Vec<TrialReport>,
    pub tolerances: Tolerances,
    pub passed: bool,
}

impl BatteryReport {
    pub fn worst(&self, field: impl Fn(&TrialReport) -> f64) -> f64 {
        self.trials.iter().map(field).fold(0.0, f64::max)
    }
}

/// Seeds `seed0 .. seed0 + trials`, dimension cycling through `dims`.
pub fn run_battery(
    seed0: u64,
    trials: usize,
    dims: &[usize],
    terms: &PipelineTerms,
    tol: &Tolerances,
) -> Result<BatteryReport, OracleError> {
    let trials: Vec<TrialReport> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(seed0 + i as u64, dims[i % dims.len()], terms, tol))
        .collect::<Result<_, _>>()?;
    let passed = trials.iter().all(|t| t.passed);
    Ok(BatteryReport {
        trials,
        tolerances: *tol,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::SpectralFn;

    fn diag_model(l: &[f64]) -> MatrixModel {
        let k = CMat::from_diagonal(&nalgebra::DVector::from_iterator(l.len(), l.iter().map(|&x| c(x))));
        let z = CMat::zeros(l.len(), l.len());
        MatrixModel::new(k, z.clone(), z, 0).unwrap()
    }

    #[test]
    fn functional_calculus_basics() {
        let m = MatrixModel::random(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = m.random_element(&mut rng);
        assert!(max_abs(&(m.functional_calculus(|u| u, &x) - m.modular(&x))) < 1e-12);
        assert!(max_abs(&(m.functional_calculus(|_| 1.0, &x) - &x)) < 1e-12);
        // k = diag(1, 2): E_12 has eigenvalue κ_2/κ_1 = 4
        let d = diag_model(&[1.0, 2.0]);
        let mut e = CMat::zeros(2, 2);
        e[(0, 1)] = c(1.0);
        let y = d.functional_calculus(|u| u, &e);
        assert!((y[(0, 1)] - c(4.0)).norm() < 1e-12 && y[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_k() {
        let k = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-0.5)]));
        let z = CMat::zeros(2, 2);
        assert!(matches!(MatrixModel::new(k, z.clone(), z, 0), Err(OracleError::NotPositive(_))));
    }

    #[test]
    fn quadrature_of_known_integrals() {
        // ∫_0^1 e^t dt and ∫_0^∞ du/(u+1)^2 = 1 after compactification
        let v = integrate_adaptive(&|t: f64| vec![c(t.exp())], 0.0, 1.0, 1e-13).unwrap();
        assert!((v[0].re - (1f64.exp() - 1.0)).abs() < 1e-13);
        let v = integrate_adaptive(
            &|t: f64| {
                let u = t / (1.0 - t);
                vec![c(1.0 / ((u + 1.0) * (u + 1.0) * (1.0 - t) * (1.0 - t)))]
            },
            0.0,
            1.0,
            1e-13,
        )
        .unwrap();
        assert!((v[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dm_integral_degenerate_cases() {
        for m in 1..=3u8 {
            let id = diag_model(&[1.0, 1.0, 1.0]);
            let q = dm_integral(&id, m, &CMat::identity(3, 3), 1e-12).unwrap();
            let expect = 1.0 / f64::from(m + 1);
            assert!(max_abs(&(q - CMat::identity(3, 3) * c(expect))) < 1e-10);
            // scalar k: Δ is the identity
            let s = diag_model(&[1.7, 1.7, 1.7]);
            let mut rng = ChaCha8Rng::seed_from_u64(u64::from(m));
            let rho = s.random_element(&mut rng);
            let q = dm_integral(&s, m, &rho, 1e-12).unwrap();
            assert!(max_abs(&(q - &rho * c(expect))) < 1e-10);
        }
    }

    #[test]
    fn dm_integral_random_models() {
        for seed in 0..5 {
            let m = MatrixModel::random(3, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for order in 1..=3 {
                let rho = m.random_element(&mut rng);
                assert!(check_dm_integral(&m, order, &rho).unwrap() < 1e-8);
            }
        }
        let near = MatrixModel::near_degenerate(4, 3, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = near.random_element(&mut rng);
        assert!(check_dm_integral(&near, 2, &rho).unwrap() < 1e-8);
    }

    #[test]
    fn vanishing_derivations() {
        let m = diag_model(&[0.8, 1.3, 1.9]);
        let r = check_final_identity(&m, 0.3, 1.7);
        assert_eq!(r.sum, 0.0);
        let mut m = MatrixModel::random(3, 4);
        m.k = CMat::identity(3, 3);
        let m = MatrixModel::new(m.k, m.d[0].clone(), m.d[1].clone(), 4).unwrap();
        let (sum, phis) = regrouped_value(&m, &expected_f(), (0.3, 1.7));
        assert!(sum.norm() < 1e-15 && phis.iter().all(|p| p.norm() < 1e-15));
    }

    #[test]
    fn final_identity_and_antisymmetry() {
        let m = MatrixModel::random(4, 11);
        let r = check_final_identity(&m, 0.3, 1.7);
        assert!(r.scale > 1e-6);
        assert!(r.relative < 1e-9, "{r:?}");
        assert!(r.antisymmetry < 1e-9, "{r:?}");
    }

    #[test]
    fn non_odd_function_does_not_vanish() {
        // u^{-1/2} has even K; its diagonal slot is far from zero
        let m = MatrixModel::random(4, 11);
        let (sum, _) = regrouped_value(&m, &SpectralFn::u_pow(-1), (0.0, 1.0));
        assert!(sum.norm() > 1e-3);
    }

    #[test]
    fn identities() {
        let m = MatrixModel::random(5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = m.random_element(&mut rng);
        let b = m.random_element(&mut rng);
        assert!(check_log_transport(&m) < 1e-10);
        assert!(check_log_delta(&m, &a, &b, &[0.3, -1.0, 0.5, 0.25]) < 1e-10);
        assert!(check_trace_delta(&m, &a) < 1e-13);
        assert!(check_twist(&m, &a) < 1e-10);
        // δ_1 δ_2 = δ_2 δ_1
        assert!(max_abs(&(m.delta(1, &m.delta(2, &a)) - m.delta(2, &m.delta(1, &a)))) < 1e-12);
    }
}
