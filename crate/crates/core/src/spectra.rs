//! Characteristic determinant of the equal-speed beam damped on its right
//! half, asymptotic eigenvalue branches, zero counting and root finding,
//! and a shifted inverse iteration probe of the discrete generator.
//!
//! Normalization: `L = 1`, `rho1 = k1`, `rho2 = k2`, `D = k2` on `(1/2, 1]`,
//! coupling `c = sqrt(k1 / k2)`.

use std::f64::consts::PI;

use num_complex::{Complex, Complex64};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::banded::BandMatrix;
use crate::ddouble::{cx, lift, ComplexDD, DoubleDouble, Real};
use crate::discretize::DiscreteGenerator;
use crate::error::{Error, Result};

const CASE_TOL: f64 = 1e-9;
const AMBIGUOUS_BAND: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseLabel {
    /// `c` is not a multiple of `2 pi`.
    One,
    /// `c = 2 (2k + 1) pi`.
    Two,
    /// `c = 4 k pi`.
    Three,
}

impl CaseLabel {
    pub fn number(self) -> u8 {
        match self {
            CaseLabel::One => 1,
            CaseLabel::Two => 2,
            CaseLabel::Three => 3,
        }
    }

    pub fn from_number(k: u8) -> Option<Self> {
        match k {
            1 => Some(CaseLabel::One),
            2 => Some(CaseLabel::Two),
            3 => Some(CaseLabel::Three),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    pub fn index(self) -> u8 {
        match self {
            Branch::One => 1,
            Branch::Two => 2,
        }
    }

    pub fn from_index(k: u8) -> Option<Self> {
        match k {
            1 => Some(Branch::One),
            2 => Some(Branch::Two),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConfig {
    pub c: f64,
    /// `alpha0` of the strip `-alpha0 <= Re lambda <= 0`.
    pub strip_width: f64,
    pub n_min: i64,
    /// Relative residual tolerance: roots satisfy `|det| <= root_tol (1 + |lambda|)`.
    pub root_tol: f64,
    pub case_override: Option<CaseLabel>,
}

impl SpectralConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c",
                value: c,
                reason: "coupling must be finite and positive",
            });
        }
        Ok(SpectralConfig {
            c,
            strip_width: 0.5,
            n_min: 5,
            root_tol: 1e-9,
            case_override: None,
        })
    }

    pub fn with_case(mut self, case: CaseLabel) -> Self {
        self.case_override = Some(case);
        self
    }

    /// Case of the coupling constant. Values within `1e-9` of `2 k pi` are
    /// special; values between `1e-9` and `1e-6` away need an override.
    pub fn case(&self) -> Result<CaseLabel> {
        if let Some(c) = self.case_override {
            return Ok(c);
        }
        let m = (self.c / (2.0 * PI)).round();
        let dist = (self.c - 2.0 * PI * m).abs();
        if m < 1.0 || dist > AMBIGUOUS_BAND {
            return Ok(CaseLabel::One);
        }
        if dist > CASE_TOL {
            return Err(Error::AmbiguousCase { c: self.c, distance: dist });
        }
        if (m as i64) % 2 == 1 {
            Ok(CaseLabel::Two)
        } else {
            Ok(CaseLabel::Three)
        }
    }

    pub fn root_tol_at(&self, lambda: Complex64) -> f64 {
        self.root_tol * (1.0 + lambda.norm())
    }

    pub fn in_strip(&self, lambda: Complex64) -> bool {
        lambda.re <= 0.0 && lambda.re >= -self.strip_width
    }
}

// ---------------------------------------------------------------------------
// wavenumbers and determinant kernel

struct Kernel<R: Real> {
    lam: Complex<R>,
    c: R,
    r1: Complex<R>,
    r2: Complex<R>,
    s1: Complex<R>,
    s2: Complex<R>,
    r1sq: Complex<R>,
    r2sq: Complex<R>,
    s2sq: Complex<R>,
    q: Complex<R>,
    // s1^2 - lambda^2
    d1: Complex<R>,
    radicands: [Complex<R>; 5],
}

fn kernel<R: Real>(lam: Complex<R>, c: R) -> Kernel<R> {
    let one = cx::real(R::one());
    let two = R::of(2.0);
    let four = R::of(4.0);
    let ic = cx::imag(c);
    let c2 = c * c;
    let lam2 = lam * lam;
    let lam3 = lam2 * lam;
    let rad_r1 = one + ic / lam;
    let rad_r2 = one - ic / lam;
    let rad_q = one - cx::real(four * c2) / lam3 - cx::real(four * c2) / (lam3 * lam);
    let q = cx::sqrt(rad_q);
    let d1 = -cx::real(two * c2) / (lam * (one + q));
    let s2sq = lam2 / (one + lam) + cx::real(two * c2) / (lam * (one + q));
    let rad_s1 = one + d1 / lam2;
    let r1 = lam * cx::sqrt(rad_r1);
    let r2 = lam * cx::sqrt(rad_r2);
    let s1 = lam * cx::sqrt(rad_s1);
    let s2 = cx::sqrt(s2sq);
    Kernel {
        lam,
        c,
        r1,
        r2,
        s1,
        s2,
        r1sq: lam2 + ic * lam,
        r2sq: lam2 - ic * lam,
        s2sq,
        q,
        d1,
        radicands: [rad_r1, rad_r2, rad_q, rad_s1, s2sq],
    }
}

impl<R: Real> Kernel<R> {
    fn g(&self) -> [Complex<R>; 6] {
        let one = cx::real(R::one());
        let two = cx::real(R::of(2.0));
        let lam = self.lam;
        let lam2 = lam * lam;
        let lam3 = lam2 * lam;
        let icl = cx::imag(self.c) * lam;
        let icl2 = icl * lam;
        let c2 = self.c * self.c;
        let e = cx::real(R::of(2.0) * c2) * (lam + one) / (lam * (one + self.q));
        let (r1, r2, s1, s2, d1) = (self.r1, self.r2, self.s1, self.s2, self.d1);
        let g1 = two * lam2 * self.q / (r1 * r2);
        let g2 = (-icl - d1) * (-lam3 - icl + e) / (icl2 * s1 * r2);
        let g3 = -((icl - d1) * (-lam3 + icl + e)) / (icl2 * r1 * s1);
        let g4 = two * lam2 * self.q / ((one + lam) * s1 * s2);
        let g5 = (self.r1sq - self.s2sq) * (icl + (lam + one) * d1) / (icl2 * s2 * r1);
        let g6 = -((self.r2sq - self.s2sq) * (-icl + (lam + one) * d1)) / (icl2 * r2 * s2);
        [g1, g2, g3, g4, g5, g6]
    }

    /// Reduced determinant as `value * exp(log_scale)`.
    fn det_scaled(&self) -> (Complex<R>, R) {
        let half = cx::real(R::of(0.5));
        let w1 = self.r1 * half;
        let w2 = self.r2 * half;
        let w3 = self.s1 * half;
        let log_scale = w1.re.rabs() + w2.re.rabs() + w3.re.rabs();
        let (c1, h1) = cx::cosh_sinh_scaled(w1);
        let (c2, h2) = cx::cosh_sinh_scaled(w2);
        let (cs, hs) = cx::cosh_sinh_scaled(w3);
        let t = [
            c1 * c2 * hs,
            h1 * c2 * cs,
            c1 * h2 * cs,
            h1 * h2 * cs,
            c1 * h2 * hs,
            h1 * c2 * hs,
        ];
        let g = self.g();
        let mut p = cx::real(R::zero());
        let mut q = cx::real(R::zero());
        for k in 0..6 {
            let term = g[k] * t[k];
            p = p + term;
            q = if k < 3 { q - term } else { q + term };
        }
        (p + q * cx::exp(-self.s2), log_scale)
    }
}

fn f_terms<R: Real>(lam: Complex<R>, c: R) -> [Complex<R>; 6] {
    let half = cx::real(R::of(0.5));
    let (c3, s3) = cx::cosh_sinh(lam * cx::real(R::of(1.5)));
    let (c1, s1) = cx::cosh_sinh(lam * half);
    let (sc, cc) = (c * R::of(0.5)).rsin_cos();
    let r = |x: R| cx::real(x);
    let c2 = c * c;
    let c3r = c2 * c;
    let c4 = c2 * c2;
    let k = |x: f64| R::of(x);
    let f0 = s3 + s1 * r(cc);
    let f1 = c3 - c1 * r(cc);
    let f2 = c3 * r(c2) - c1 * r(k(4.0) * c * sc);
    let f3 = s3 * r(c2) - c3 * r(k(4.0)) + s1 * r(k(12.0) * c * sc) + c1 * r(k(4.0) * cc);
    let f4 = s3 * r(c2 * (c2 - k(56.0))) - c3 * r(k(32.0) * c2)
        + s1 * r(k(8.0) * c2 * (c * sc - k(8.0) * cc + R::one()))
        - c1 * r(k(32.0) * c * (k(8.0) * sc + c * cc));
    let f5 = -(s3 * r(k(40.0) * c2))
        + c3 * r(c4 - k(88.0) * c2 + k(48.0))
        + s1 * r(k(32.0) * c * (k(5.0) * sc + c * cc))
        - c1 * r(k(8.0) * c3r * sc - k(16.0) * (k(4.0) * c2 - k(3.0)) * cc - k(24.0) * c2);
    [f0, f1, f2, f3, f4, f5]
}

fn asymptotic_f_generic<R: Real>(lam: Complex<R>, c: R) -> Complex<R> {
    let f = f_terms(lam, c);
    let sl = cx::sqrt(lam);
    let k8 = cx::real(R::of(8.0));
    let k128 = cx::real(R::of(128.0));
    let lam2 = lam * lam;
    f[0] + f[1] / sl + f[2] / (k8 * lam) + f[3] / (k8 * lam * sl) + f[4] / (k128 * lam2)
        + f[5] / (k128 * lam2 * sl)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wavenumbers {
    pub r1: Complex64,
    pub r2: Complex64,
    pub s1: Complex64,
    pub s2: Complex64,
    /// Square roots actually taken (of `1 + ic/lambda`, `1 - ic/lambda`,
    /// the discriminant, `s1^2/lambda^2` and `s2^2`); all principal.
    pub roots: [Complex64; 5],
    /// `lambda` was moved by `-1e-12` off a branch cut.
    pub nudged: bool,
}

fn nudge(lambda: Complex64, c: f64) -> (Complex64, bool) {
    let mut lam = lambda;
    let mut moved = false;
    for _ in 0..4 {
        let k = kernel(lam, c);
        let on_cut = k.radicands.iter().any(|r| r.im == 0.0 && r.re < 0.0);
        if !on_cut {
            break;
        }
        lam -= Complex64::new(1e-12, 0.0);
        moved = true;
    }
    (lam, moved)
}

fn check_lambda(lambda: Complex64) -> Result<()> {
    if lambda == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidArgument("lambda must be nonzero".into()));
    }
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::NonFinite("lambda"));
    }
    Ok(())
}

/// `r1 = lambda sqrt(1 + ic/lambda)`, `r2 = lambda sqrt(1 - ic/lambda)`,
/// `s1 = lambda sqrt(s1^2 / lambda^2)` (the root continuing `s1 ~ lambda`)
/// and `s2 = sqrt(s2^2)` (principal), with
/// `s1^2, s2^2 = (lambda + lambda^2 (1 +- q) / 2) / (1 + 1/lambda)` and
/// `q = sqrt(1 - 4c^2/lambda^3 - 4c^2/lambda^4)`, evaluated in
/// cancellation-free form.
pub fn wavenumbers(lambda: Complex64, cfg: &SpectralConfig) -> Result<Wavenumbers> {
    check_lambda(lambda)?;
    let (lam, nudged) = nudge(lambda, cfg.c);
    let k = kernel(lam, cfg.c);
    Ok(Wavenumbers {
        r1: k.r1,
        r2: k.r2,
        s1: k.s1,
        s2: k.s2,
        roots: [
            k.r1 / lam,
            k.r2 / lam,
            k.q,
            k.s1 / lam,
            k.s2,
        ],
        nudged,
    })
}

/// `s1^2` and `s2^2` (exact, cancellation-free).
pub fn squared_wavenumbers(lambda: Complex64, cfg: &SpectralConfig) -> Result<(Complex64, Complex64)> {
    check_lambda(lambda)?;
    let k = kernel(lambda, cfg.c);
    Ok((lambda * lambda + k.d1, k.s2sq))
}

/// Coefficients `g1..g6` of the expanded reduced determinant.
pub fn g_coefficients(lambda: Complex64, cfg: &SpectralConfig) -> Result<[Complex64; 6]> {
    check_lambda(lambda)?;
    let (lam, _) = nudge(lambda, cfg.c);
    Ok(kernel(lam, cfg.c).g())
}

type Mat4 = [[Complex64; 4]; 4];

/// The boundary matrix `M` acting on the amplitudes of the four modes.
pub fn char_matrix(lambda: Complex64, cfg: &SpectralConfig) -> Result<Mat4> {
    check_lambda(lambda)?;
    let (lam, _) = nudge(lambda, cfg.c);
    let k = kernel(lam, cfg.c);
    let icl2 = Complex64::new(0.0, cfg.c) * lam * lam;
    let lam3 = lam * lam * lam;
    let cols = [
        (k.r1, Complex64::new(1.0, 0.0), k.r1 * k.r1),
        (k.r2, Complex64::new(1.0, 0.0), k.r2 * k.r2),
        (k.s1, Complex64::new(-1.0, 0.0), lam3 - (lam + 1.0) * (lam * lam + k.d1)),
        (k.s2, Complex64::new(-1.0, 0.0), lam3 - (lam + 1.0) * k.s2sq),
    ];
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (j, &(w, sign, row3)) in cols.iter().enumerate() {
        let (ch, sh) = ((w * 0.5).cosh(), (w * 0.5).sinh());
        m[0][j] = sign * sh;
        m[1][j] = w / icl2 * ch;
        m[2][j] = row3 * sh;
        m[3][j] = ch / w;
    }
    if m.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("characteristic matrix (use the scaled determinant)"));
    }
    Ok(m)
}

/// `M` with its last column multiplied by `2 exp(-s2/2)`; entries stay
/// bounded for large `|lambda|`.
pub fn char_matrix_reduced(lambda: Complex64, cfg: &SpectralConfig) -> Result<Mat4> {
    check_lambda(lambda)?;
    let (lam, _) = nudge(lambda, cfg.c);
    let k = kernel(lam, cfg.c);
    let icl2 = Complex64::new(0.0, cfg.c) * lam * lam;
    let lam3 = lam * lam * lam;
    let one = Complex64::new(1.0, 0.0);
    let e = (-k.s2).exp();
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    let cols = [
        (k.r1, one, k.r1 * k.r1),
        (k.r2, one, k.r2 * k.r2),
        (k.s1, -one, lam3 - (lam + 1.0) * (lam * lam + k.d1)),
    ];
    for (j, &(w, sign, row3)) in cols.iter().enumerate() {
        let (ch, sh) = ((w * 0.5).cosh(), (w * 0.5).sinh());
        m[0][j] = sign * sh;
        m[1][j] = w / icl2 * ch;
        m[2][j] = row3 * sh;
        m[3][j] = ch / w;
    }
    m[0][3] = -(one - e);
    m[1][3] = k.s2 / icl2 * (one + e);
    m[2][3] = (lam3 - (lam + 1.0) * k.s2sq) * (one - e);
    m[3][3] = (one + e) / k.s2;
    Ok(m)
}

/// Determinant of a 4x4 complex matrix by elimination with partial pivoting.
pub fn det4(mut m: Mat4) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..4 {
        let p = (k..4)
            .max_by(|&a, &b| m[a][k].norm().total_cmp(&m[b][k].norm()))
            .unwrap_or(k);
        if m[p][k].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            m.swap(p, k);
            det = -det;
        }
        det *= m[k][k];
        for r in k + 1..4 {
            let f = m[r][k] / m[k][k];
            for j in k..4 {
                let t = m[k][j];
                m[r][j] -= f * t;
            }
        }
    }
    det
}

/// Reduced determinant in the form `value * exp(log_scale)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledDeterminant {
    pub value: Complex64,
    pub log_scale: f64,
    pub in_strip: bool,
}

impl ScaledDeterminant {
    pub fn unscaled(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }
}

pub fn evaluate_det(lambda: Complex64, cfg: &SpectralConfig) -> Result<ScaledDeterminant> {
    check_lambda(lambda)?;
    let (lam, _) = nudge(lambda, cfg.c);
    let (value, log_scale) = kernel(lam, cfg.c).det_scaled();
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::NonFinite("reduced determinant"));
    }
    Ok(ScaledDeterminant {
        value,
        log_scale,
        in_strip: cfg.in_strip(lambda),
    })
}

/// Reduced determinant `det(M~) = 2 exp(-s2/2) det(M)` through the expanded
/// six-term form; free of overflow in the strip.
pub fn char_det_scaled(lambda: Complex64, cfg: &SpectralConfig) -> Result<Complex64> {
    let d = evaluate_det(lambda, cfg)?;
    let v = d.unscaled();
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NonFinite("reduced determinant (use evaluate_det)"));
    }
    Ok(v)
}

/// Reduced determinant in double-double arithmetic.
pub fn char_det_scaled_dd(lambda: Complex64, cfg: &SpectralConfig) -> Result<ComplexDD> {
    check_lambda(lambda)?;
    let (value, log_scale) = kernel(lift(lambda), DoubleDouble::from_f64(cfg.c)).det_scaled();
    Ok(value * cx::real(log_scale.exp()))
}

/// Truncated large-`lambda` expansion `F = f0 + f1/lambda^(1/2) + ...`.
pub fn asymptotic_f(lambda: Complex64, cfg: &SpectralConfig) -> Result<Complex64> {
    check_lambda(lambda)?;
    Ok(asymptotic_f_generic(lambda, cfg.c))
}

pub fn asymptotic_f_dd(lambda: Complex64, cfg: &SpectralConfig) -> Result<ComplexDD> {
    check_lambda(lambda)?;
    Ok(asymptotic_f_generic(lift(lambda), DoubleDouble::from_f64(cfg.c)))
}

/// `f0 .. f5` at `lambda`.
pub fn f_coefficients(lambda: Complex64, cfg: &SpectralConfig) -> [Complex64; 6] {
    f_terms(lambda, cfg.c)
}

/// `2 sinh(lambda/2) (cosh(lambda) + cos^2(c/4))`.
pub fn f0_factored(lambda: Complex64, c: f64) -> Complex64 {
    let cc = (c / 4.0).cos();
    2.0 * (lambda / 2.0).sinh() * (lambda.cosh() + cc * cc)
}

// ---------------------------------------------------------------------------
// asymptotic branches

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenvaluePrediction {
    pub branch: Branch,
    pub n: i64,
    pub case: CaseLabel,
    pub lambda: Complex64,
    /// Root of the leading term `f0` the branch is attached to.
    pub mu: Complex64,
    /// `lambda - mu`.
    pub epsilon: Complex64,
    /// Exponent of the first neglected term, `O(|n|^order)`.
    pub correction_order: f64,
    pub in_regime: bool,
}

/// Leading-order branch location for mode `n`.
pub fn predict_branch(branch: Branch, n: i64, cfg: &SpectralConfig) -> Result<EigenvaluePrediction> {
    if n == 0 {
        return Err(Error::InvalidArgument("mode index n must be nonzero".into()));
    }
    let case = cfg.case()?;
    let c = cfg.c;
    let nf = n as f64;
    let an = nf.abs();
    let sg = nf.signum();
    let i = Complex64::new(0.0, 1.0);
    let base = 2.0 * PI * nf * i;
    let one_m_is = Complex64::new(1.0, -sg);
    let sq = (PI * an).sqrt();
    let (mu, eps, order) = match (case, branch) {
        (CaseLabel::One, Branch::One) => {
            let s = (c / 4.0).sin();
            (base, -2.0 * one_m_is * s * s / ((3.0 + (c / 2.0).cos()) * sq), -1.0)
        }
        (CaseLabel::One, Branch::Two) => {
            let cc = (c / 4.0).cos().powi(2);
            let mu = base + i * (PI + cc.acos());
            (mu, -one_m_is * cc / ((1.0 + cc) * sq), -1.0)
        }
        (CaseLabel::Two, Branch::One) => (base, -one_m_is / sq, -1.0),
        (CaseLabel::Two, Branch::Two) => {
            let eps = i * c * c / (32.0 * PI * nf)
                - Complex64::new(8.0, 3.0 * PI - 2.0) * c * c / (128.0 * PI * PI * nf * nf);
            (base + i * 1.5 * PI, eps, -2.5)
        }
        (CaseLabel::Three, Branch::One) => {
            let eps = i * c * c / (32.0 * PI * nf) - c * c / (16.0 * PI * PI * nf * nf);
            (base, eps, -2.5)
        }
        (CaseLabel::Three, Branch::Two) => {
            let eps = i * c * c / (32.0 * PI * nf)
                - Complex64::new(4.0, PI) * c * c / (64.0 * PI * PI * nf * nf);
            (base + i * PI, eps, -2.5)
        }
    };
    Ok(EigenvaluePrediction {
        branch,
        n,
        case,
        lambda: mu + eps,
        mu,
        epsilon: eps,
        correction_order: order,
        in_regime: n.abs() >= cfg.n_min,
    })
}

// ---------------------------------------------------------------------------
// argument principle

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) {
            return Err(Error::InvalidArgument(format!(
                "degenerate rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn centered(center: Complex64, half_width: f64) -> Self {
        Rect {
            re_min: center.re - half_width,
            re_max: center.re + half_width,
            im_min: center.im - half_width,
            im_max: center.im + half_width,
        }
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn size(&self) -> f64 {
        (self.re_max - self.re_min).max(self.im_max - self.im_min)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re > self.re_min && z.re < self.re_max && z.im > self.im_min && z.im < self.im_max
    }

    pub fn quadrants(&self) -> [Rect; 4] {
        let c = self.center();
        [
            Rect { re_min: self.re_min, re_max: c.re, im_min: self.im_min, im_max: c.im },
            Rect { re_min: c.re, re_max: self.re_max, im_min: self.im_min, im_max: c.im },
            Rect { re_min: c.re, re_max: self.re_max, im_min: c.im, im_max: self.im_max },
            Rect { re_min: self.re_min, re_max: c.re, im_min: c.im, im_max: self.im_max },
        ]
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    // attempt k > 0: shrink slightly and shift off the original contour
    fn perturbed(&self, k: usize) -> Rect {
        if k == 0 {
            return *self;
        }
        let c = self.center();
        let s = 1.0 - 0.013 * k as f64;
        let hw = 0.5 * (self.re_max - self.re_min) * s;
        let hh = 0.5 * (self.im_max - self.im_min) * s;
        let shift = Complex64::new(0.0031, -0.0023) * (k as f64) * self.size();
        let c = c + shift;
        Rect {
            re_min: c.re - hw,
            re_max: c.re + hw,
            im_min: c.im - hh,
            im_max: c.im + hh,
        }
    }
}

const MAX_RETRIES: usize = 5;

enum ContourFailure {
    NearZero(Complex64),
    Depth(Complex64),
    Eval(Error),
}

fn trace_contour<F>(f: &F, rect: &Rect) -> std::result::Result<f64, ContourFailure>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let corners = rect.corners();
    let per_side = 24;
    let mut pts = Vec::with_capacity(4 * per_side + 1);
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        for k in 0..per_side {
            pts.push(a + (b - a) * (k as f64 / per_side as f64));
        }
    }
    pts.push(corners[0]);
    let vals: Vec<Complex64> = pts.iter().map(|&z| f(z)).collect::<Result<_>>().map_err(ContourFailure::Eval)?;
    let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tiny = 1e-12 * scale;
    for (z, v) in pts.iter().zip(&vals) {
        if v.norm() <= tiny {
            return Err(ContourFailure::NearZero(*z));
        }
    }
    let mut total = 0.0;
    for k in 0..pts.len() - 1 {
        let mut stack = vec![(pts[k], vals[k], pts[k + 1], vals[k + 1], 0usize)];
        while let Some((za, fa, zb, fb, depth)) = stack.pop() {
            let d = (fb / fa).arg();
            if d.abs() <= 0.5 * PI {
                total += d;
                continue;
            }
            if depth >= 40 {
                return Err(ContourFailure::Depth(za));
            }
            let zm = 0.5 * (za + zb);
            let fm = f(zm).map_err(ContourFailure::Eval)?;
            if fm.norm() <= tiny {
                return Err(ContourFailure::NearZero(zm));
            }
            // left half first
            stack.push((zm, fm, zb, fb, depth + 1));
            stack.push((za, fa, zm, fm, depth + 1));
        }
    }
    Ok(total)
}

/// Winding number of `f` around 0 along the boundary of `rect`
/// (counter-clockwise). A contour passing too close to a zero is shrunk and
/// shifted, up to five times.
pub fn winding_number<F>(f: F, rect: &Rect) -> Result<i64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut last = String::new();
    for attempt in 0..=MAX_RETRIES {
        let r = rect.perturbed(attempt);
        match trace_contour(&f, &r) {
            Ok(total) => {
                let w = total / (2.0 * PI);
                let k = w.round();
                if (w - k).abs() > 1e-3 {
                    last = format!("non-integral winding {w}");
                    continue;
                }
                return Ok(k as i64);
            }
            Err(ContourFailure::NearZero(z)) => last = format!("|f| vanishes near {z}"),
            Err(ContourFailure::Depth(z)) => last = format!("phase not resolved near {z}"),
            Err(ContourFailure::Eval(e)) => return Err(e),
        }
    }
    Err(Error::ContourThroughZero(format!(
        "{last} on box {rect:?} after {MAX_RETRIES} retries"
    )))
}

/// Number of zeros of the reduced determinant inside `rect`.
pub fn count_zeros(rect: &Rect, cfg: &SpectralConfig) -> Result<i64> {
    winding_number(|z| char_det_scaled(z, cfg), rect)
}

// ---------------------------------------------------------------------------
// root finding

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootRecord {
    pub branch: Branch,
    pub n: i64,
    pub lambda: Complex64,
    pub prediction: EigenvaluePrediction,
    pub residual: f64,
    pub newton_iters: usize,
    pub rect: Rect,
    pub multiplicity: i64,
    pub in_regime: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnresolvedRoot {
    pub branch: Branch,
    pub n: i64,
    pub prediction: Option<EigenvaluePrediction>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RootSearch {
    pub roots: Vec<RootRecord>,
    pub unresolved: Vec<UnresolvedRoot>,
}

/// Newton iteration with a central-difference derivative. Stops on a step
/// below `1e-12 (1 + |z|)`; a small residual alone is not enough, since the
/// scaled determinant can be flat near a root. After `max_iter` steps the
/// iterate is accepted when `|f| <= tol`.
pub fn newton<F>(f: &F, z0: Complex64, tol: impl Fn(Complex64) -> f64, max_iter: usize) -> Result<(Complex64, usize, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut z = z0;
    let mut fz = f(z)?;
    for it in 0..max_iter {
        if fz.norm() == 0.0 {
            return Ok((z, it, 0.0));
        }
        let h = 1e-6 * (1.0 + z.norm());
        let d = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if d.norm() == 0.0 || !d.re.is_finite() {
            return Err(Error::NotConverged { what: "newton (flat derivative)", iterations: it });
        }
        let dz = fz / d;
        z -= dz;
        fz = f(z)?;
        if dz.norm() <= 1e-12 * (1.0 + z.norm()) {
            return Ok((z, it + 1, fz.norm()));
        }
    }
    if fz.norm() <= tol(z) {
        return Ok((z, max_iter, fz.norm()));
    }
    Err(Error::NotConverged { what: "newton", iterations: max_iter })
}

fn isolate(rect: Rect, cfg: &SpectralConfig, depth: usize) -> Result<Option<Rect>> {
    let k = count_zeros(&rect, cfg)?;
    if k == 0 {
        return Ok(None);
    }
    if k == 1 && rect.size() < 1e-3 {
        return Ok(Some(rect));
    }
    if depth > 30 {
        return Ok(if k == 1 { Some(rect) } else { None });
    }
    let quads = rect.quadrants();
    let counts: Vec<i64> = quads.iter().map(|q| count_zeros(q, cfg)).collect::<Result<_>>()?;
    let pick = counts
        .iter()
        .position(|&c| c == 1)
        .or_else(|| counts.iter().position(|&c| c > 0));
    match pick {
        Some(j) => isolate(quads[j], cfg, depth + 1),
        None => Ok(None),
    }
}

fn solve_one(branch: Branch, n: i64, cfg: &SpectralConfig) -> std::result::Result<RootRecord, UnresolvedRoot> {
    let fail = |pred: Option<EigenvaluePrediction>, reason: String| UnresolvedRoot {
        branch,
        n,
        prediction: pred,
        reason,
    };
    let pred = predict_branch(branch, n, cfg).map_err(|e| fail(None, e.to_string()))?;
    let f = |z: Complex64| char_det_scaled(z, cfg);
    let tol = |z: Complex64| cfg.root_tol_at(z);
    let radius = (n.abs() as f64).powf(-0.25);
    let search = Rect::centered(pred.lambda, radius);
    let mut attempt = newton(&f, pred.lambda, tol, 60)
        .ok()
        .filter(|(z, _, _)| search.contains(*z));
    if attempt.is_none() {
        // bisection in the box, then Newton from the isolated cell
        let cell = isolate(search, cfg, 0)
            .map_err(|e| fail(Some(pred), e.to_string()))?
            .ok_or_else(|| fail(Some(pred), "no zero isolated in the search box".into()))?;
        attempt = newton(&f, cell.center(), tol, 60).ok().filter(|(z, _, _)| search.contains(*z));
    }
    let (z, iters, residual) = attempt.ok_or_else(|| fail(Some(pred), "newton failed in and after bisection".into()))?;
    if residual > cfg.root_tol_at(z) {
        return Err(fail(Some(pred), format!("residual {residual:e} above tolerance")));
    }
    let mut hw = radius;
    let mut count = -1;
    let mut rect = Rect::centered(z, hw);
    for _ in 0..6 {
        rect = Rect::centered(z, hw);
        count = count_zeros(&rect, cfg).map_err(|e| fail(Some(pred), e.to_string()))?;
        if count <= 1 {
            break;
        }
        hw *= 0.25;
    }
    if count != 1 {
        return Err(fail(Some(pred), format!("enclosing box count {count}")));
    }
    Ok(RootRecord {
        branch,
        n,
        lambda: z,
        prediction: pred,
        residual,
        newton_iters: iters,
        rect,
        multiplicity: count,
        in_regime: pred.in_regime,
    })
}

/// Roots of the reduced determinant for every nonzero `n` in
/// `n_lo ..= n_hi`, seeded at the branch predictions. Records are ordered by
/// `n`.
pub fn find_roots(n_lo: i64, n_hi: i64, branch: Branch, cfg: &SpectralConfig) -> RootSearch {
    let ns: Vec<i64> = (n_lo..=n_hi).filter(|&n| n != 0).collect();
    let results: Vec<_> = ns.par_iter().map(|&n| solve_one(branch, n, cfg)).collect();
    let mut out = RootSearch::default();
    for r in results {
        match r {
            Ok(rec) => out.roots.push(rec),
            Err(u) => out.unresolved.push(u),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// discrete probe

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            tol: 1e-10,
            max_iter: 300,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    /// Eigenvector on the unknowns of the generator, unit Euclidean norm.
    pub vector: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOutcome {
    pub shift: Complex64,
    pub eigenvalue: Option<Complex64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn seeded_vector(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
    (0..n).map(|_| Complex64::new(u(), u())).collect()
}

fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Shifted inverse iteration on `A_h - shift I`. On the Dirichlet-Neumann
/// family the iterates are kept in the zero-mean subspace.
pub fn inverse_iteration(gen: &DiscreteGenerator, shift: Complex64, opts: &ProbeOptions) -> Result<EigenPair> {
    let n = gen.dim();
    let a: BandMatrix<Complex64> = gen.matrix().map(|v| Complex64::new(v, 0.0));
    let lu = a.scaled_plus_identity(Complex64::new(1.0, 0.0), -shift).factor()?;
    let mut x = seeded_vector(n, opts.seed);
    gen.project_vec(&mut x);
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    let mut mu_prev = Complex64::new(f64::INFINITY, 0.0);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        lu.solve_in_place(&mut x);
        gen.project_vec(&mut x);
        let nx = norm2(&x);
        if !(nx.is_finite() && nx > 0.0) {
            return Err(Error::NonFinite("inverse iteration"));
        }
        x.iter_mut().for_each(|v| *v /= nx);
        a.mul_vec(&x, &mut ax);
        let mu: Complex64 = x.iter().zip(&ax).map(|(p, q)| p.conj() * q).sum();
        residual = ax.iter().zip(&x).map(|(p, q)| (p - mu * q).norm_sqr()).sum::<f64>().sqrt();
        let settled = (mu - mu_prev).norm() <= 1e-13 * (1.0 + mu.norm());
        if residual <= opts.tol * (1.0 + mu.norm()) || (settled && it >= 3) {
            return Ok(EigenPair {
                value: mu,
                vector: x,
                iterations: it,
                residual,
            });
        }
        mu_prev = mu;
    }
    let _ = residual;
    Err(Error::NotConverged {
        what: "inverse iteration",
        iterations: opts.max_iter,
    })
}

/// Discrete eigenpair continuing the exact root `exact`. Grid dispersion
/// lowers the discrete frequency, so shifts step down from `exact` in
/// `0.1 i` increments (up to `max_offset`); the first eigenvalue whose real
/// part is within 25% of `Re exact` is taken. This separates a slow mode from
/// a strongly damped neighbour at almost the same frequency.
pub fn track_discrete_mode(
    gen: &DiscreteGenerator,
    exact: Complex64,
    max_offset: f64,
    opts: &ProbeOptions,
) -> Result<EigenPair> {
    let steps = (max_offset / 0.1).round() as usize;
    for k in 0..=steps {
        let shift = exact - Complex64::new(0.0, 0.1 * k as f64);
        if let Ok(p) = inverse_iteration(gen, shift, opts) {
            if (p.value.re - exact.re).abs() <= 0.25 * exact.re.abs() {
                return Ok(p);
            }
        }
    }
    Err(Error::NotConverged {
        what: "discrete mode tracking",
        iterations: steps + 1,
    })
}

/// Nearest discrete eigenvalue to each shift; stagnating shifts are flagged.
pub fn discrete_spectrum_probe(gen: &DiscreteGenerator, shifts: &[Complex64], opts: &ProbeOptions) -> Vec<ProbeOutcome> {
    shifts
        .par_iter()
        .map(|&s| match inverse_iteration(gen, s, opts) {
            Ok(p) => ProbeOutcome {
                shift: s,
                eigenvalue: Some(p.value),
                iterations: p.iterations,
                residual: p.residual,
                converged: true,
            },
            Err(_) => ProbeOutcome {
                shift: s,
                eigenvalue: None,
                iterations: opts.max_iter,
                residual: f64::NAN,
                converged: false,
            },
        })
        .collect()
}
