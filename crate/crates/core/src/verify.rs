//! Acceptance criteria as runnable checks. Every `*Settings::default()`
//! carries the acceptance configuration.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ddouble::lower;
use crate::discretize::{AssemblyOptions, DiscreteGenerator};
use crate::error::{Error, Result};
use crate::evolve::{fit_decay_exponent, simulate, EnergyTrace};
use crate::fit::loglog_fit;
use crate::model::{validate_hypothesis, BeamParameters, BoundaryConditionKind, DampingProfile, GridState};
use crate::resolvent::{blowup_exponent, build_blowup_pair, resolvent_growth_scan, ResolventOptions};
use crate::spectra::{
    asymptotic_f_dd, char_det_scaled, char_det_scaled_dd, char_matrix, count_zeros, det4, f0_factored,
    f_coefficients, find_roots, inverse_iteration, track_discrete_mode, wavenumbers, Branch,
    ProbeOptions, Rect, RootRecord, SpectralConfig,
};

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass,
    Fail(String),
    NotApplicable(String),
}

impl Outcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, Outcome::Pass)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Outcome::Fail(_))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Pass => write!(f, "PASS"),
            Outcome::Fail(_) => write!(f, "FAIL"),
            Outcome::NotApplicable(why) => write!(f, "NOT-APPLICABLE ({why})"),
        }
    }
}

/// One measured quantity and its acceptance bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, max: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!("<= {max:e}"),
            pass: value <= max,
        }
    }

    pub fn range(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            pass: value >= lo && value <= hi,
        }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: format!("{target} +- {tol}"),
            pass: (value - target).abs() <= tol,
        }
    }

    pub fn negative(name: &str, value: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound: "< 0".into(),
            pass: value < 0.0,
        }
    }

    pub fn count(name: &str, value: usize, want: usize) -> Self {
        Check {
            name: name.into(),
            value: value as f64,
            bound: format!("== {want}"),
            pass: value == want,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    /// Criterion number; 0 for the supplementary identities suite.
    pub id: u8,
    pub suite: Suite,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionReport {
    fn from_checks(id: u8, suite: Suite, checks: Vec<Check>, notes: Vec<String>, start: Instant) -> Self {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let outcome = if failed.is_empty() {
            Outcome::Pass
        } else {
            Outcome::Fail(failed.join(", "))
        };
        CriterionReport {
            id,
            suite,
            outcome,
            checks,
            notes,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn not_applicable(id: u8, suite: Suite, why: &str, start: Instant) -> Self {
        CriterionReport {
            id,
            suite,
            outcome: Outcome::NotApplicable(why.into()),
            checks: Vec::new(),
            notes: Vec::new(),
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn errored(id: u8, suite: Suite, err: &Error, start: Instant) -> Self {
        CriterionReport {
            id,
            suite,
            outcome: Outcome::Fail(format!("error: {err}")),
            checks: Vec::new(),
            notes: Vec::new(),
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One summary line.
    pub fn line(&self) -> String {
        let label = if self.id == 0 {
            format!("{}", self.suite)
        } else {
            format!("criterion {} ({})", self.id, self.suite)
        };
        let detail: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{}{}={:.4e} [{}]", if c.pass { "" } else { "!" }, c.name, c.value, c.bound))
            .collect();
        let extra = match &self.outcome {
            Outcome::Fail(why) if self.checks.is_empty() => format!(" {why}"),
            _ => String::new(),
        };
        format!(
            "{:<5} {label} {:.2}s{extra} {}",
            match self.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail(_) => "FAIL",
                Outcome::NotApplicable(_) => "N/A",
            },
            self.seconds,
            detail.join(" ")
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Blowup,
    Branches,
    Cases,
    Remainder,
    Decay,
    Resolvent,
    Properties,
    Discretization,
    Identities,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Blowup,
        Suite::Branches,
        Suite::Cases,
        Suite::Remainder,
        Suite::Decay,
        Suite::Resolvent,
        Suite::Properties,
        Suite::Discretization,
        Suite::Identities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Blowup => "blowup",
            Suite::Branches => "branches",
            Suite::Cases => "cases",
            Suite::Remainder => "remainder",
            Suite::Decay => "decay",
            Suite::Resolvent => "resolvent",
            Suite::Properties => "properties",
            Suite::Discretization => "discretization",
            Suite::Identities => "identities",
        }
    }

    pub fn criterion(self) -> u8 {
        match self {
            Suite::Blowup => 1,
            Suite::Branches => 2,
            Suite::Cases => 3,
            Suite::Remainder => 4,
            Suite::Decay => 5,
            Suite::Resolvent => 6,
            Suite::Properties => 7,
            Suite::Discretization => 8,
            Suite::Identities => 0,
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.iter().copied().find(|x| x.name() == s)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn run<F>(suite: Suite, body: F) -> CriterionReport
where
    F: FnOnce() -> Result<(Vec<Check>, Vec<String>)>,
{
    let start = Instant::now();
    match body() {
        Ok((checks, notes)) => CriterionReport::from_checks(suite.criterion(), suite, checks, notes, start),
        Err(e) => CriterionReport::errored(suite.criterion(), suite, &e, start),
    }
}

struct Uniform(ChaCha8Rng);

impl Uniform {
    fn new(seed: u64) -> Self {
        Uniform(ChaCha8Rng::seed_from_u64(seed))
    }

    fn next(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

fn half_damped(c: f64, n_cells: usize) -> Result<DiscreteGenerator> {
    DiscreteGenerator::assemble(
        &BeamParameters::equal_speed(c)?,
        &DampingProfile::right_half(1.0),
        BoundaryConditionKind::DirichletNeumann,
        n_cells,
    )
}

fn spectral(c: f64) -> Result<SpectralConfig> {
    SpectralConfig::new(c)
}

fn unresolved_check(name: &str, roots: &crate::spectra::RootSearch) -> Check {
    Check::count(name, roots.unresolved.len(), 0)
}

// ---------------------------------------------------------------------------
// 1

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupSettings {
    pub d0: f64,
    pub identity_modes: (usize, usize),
    pub fit_modes: (usize, usize),
    pub n_cells: usize,
}

impl Default for BlowupSettings {
    fn default() -> Self {
        BlowupSettings {
            d0: 1.0,
            identity_modes: (1, 50),
            fit_modes: (20, 200),
            n_cells: 1600,
        }
    }
}

/// Closed-form coefficients of the explicit sequence and the growth of
/// `|U_n| / |F_n|`.
pub fn criterion_blowup(s: &BlowupSettings) -> CriterionReport {
    run(Suite::Blowup, || {
        let p = BeamParameters::unit();
        let mut worst = 0.0f64;
        for n in s.identity_modes.0..=s.identity_modes.1 {
            let pair = build_blowup_pair(n, &p, s.d0, (8 * n).max(16))?;
            worst = worst.max(pair.closed_form_residual());
        }
        let modes: Vec<usize> = (s.fit_modes.0..=s.fit_modes.1).collect();
        let fit = blowup_exponent(&modes, &p, s.d0, s.n_cells)?;
        let mut notes = vec![format!("grid-norm slope {:.4}", fit.grid_slope)];
        if !fit.excluded.is_empty() {
            notes.push(format!("{} under-resolved modes excluded", fit.excluded.len()));
        }
        Ok((
            vec![
                Check::le("closed_form_residual", worst, 1e-12),
                Check::within("slope", fit.slope, 2.0, 0.1),
            ],
            notes,
        ))
    })
}

// ---------------------------------------------------------------------------
// 2

#[derive(Clone, Debug, PartialEq)]
pub struct BranchSettings {
    pub c: f64,
    pub n_range: (i64, i64),
    pub ratio_from: i64,
}

impl Default for BranchSettings {
    fn default() -> Self {
        BranchSettings {
            c: 1.0,
            n_range: (50, 500),
            ratio_from: 100,
        }
    }
}

/// `-2 sin^2(c/4) / ((3 + cos(c/2)) sqrt(pi n))`.
pub fn case_one_real_part(c: f64, n: i64) -> f64 {
    -2.0 * (c / 4.0).sin().powi(2) / ((3.0 + (c / 2.0).cos()) * (PI * n.abs() as f64).sqrt())
}

pub fn criterion_branches(s: &BranchSettings) -> CriterionReport {
    run(Suite::Branches, || {
        let cfg = spectral(s.c)?;
        let roots = find_roots(s.n_range.0, s.n_range.1, Branch::One, &cfg);
        let ns: Vec<f64> = roots.roots.iter().map(|r| r.n as f64).collect();
        let scaled: Vec<f64> = roots
            .roots
            .iter()
            .map(|r| (r.lambda - r.prediction.lambda).norm() * r.n as f64)
            .collect();
        let fit = loglog_fit(&ns, &scaled)?;
        let ratios: Vec<f64> = roots
            .roots
            .iter()
            .filter(|r| r.n >= s.ratio_from)
            .map(|r| r.lambda.re / case_one_real_part(s.c, r.n))
            .collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_scaled = scaled.iter().copied().fold(0.0, f64::max);
        Ok((
            vec![
                unresolved_check("unresolved", &roots),
                Check::le("scaled_error_slope", fit.slope, 0.1),
                Check::range("re_ratio_min", lo, 0.8, 1.2),
                Check::range("re_ratio_max", hi, 0.8, 1.2),
            ],
            vec![format!("{} roots, max |root - prediction| n = {max_scaled:.4}", roots.roots.len())],
        ))
    })
}

// ---------------------------------------------------------------------------
// 3

#[derive(Clone, Debug, PartialEq)]
pub struct CaseSettings {
    pub n_range: (i64, i64),
    pub im_from: i64,
}

impl Default for CaseSettings {
    fn default() -> Self {
        CaseSettings {
            n_range: (50, 500),
            im_from: 100,
        }
    }
}

fn real_part_slope(roots: &[RootRecord]) -> Result<f64> {
    let x: Vec<f64> = roots.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = roots.iter().map(|r| -r.lambda.re).collect();
    Ok(loglog_fit(&x, &y)?.slope)
}

pub fn criterion_cases(s: &CaseSettings) -> CriterionReport {
    run(Suite::Cases, || {
        let two = spectral(2.0 * PI)?;
        let three = spectral(4.0 * PI)?;
        let (lo, hi) = s.n_range;
        let runs: Vec<_> = [(two, Branch::One), (two, Branch::Two), (three, Branch::One), (three, Branch::Two)]
            .par_iter()
            .map(|(cfg, b)| find_roots(lo, hi, *b, cfg))
            .collect();
        let mut checks = Vec::new();
        let names = ["case2_branch1", "case2_branch2", "case3_branch1", "case3_branch2"];
        let targets = [-0.5, -2.0, -2.0, -2.0];
        for ((r, name), t) in runs.iter().zip(names).zip(targets) {
            checks.push(unresolved_check(&format!("{name}_unresolved"), r));
            if r.roots.iter().any(|x| x.lambda.re >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name}: root with Re >= 0")));
            }
            checks.push(Check::within(&format!("{name}_slope"), real_part_slope(&r.roots)?, t, 0.15));
        }
        let c2 = 16.0 * PI * PI;
        let worst = runs[2]
            .roots
            .iter()
            .filter(|r| r.n >= s.im_from)
            .map(|r| {
                let want = c2 / (32.0 * PI * r.n as f64);
                ((r.lambda.im - 2.0 * PI * r.n as f64) / want - 1.0).abs()
            })
            .fold(0.0, f64::max);
        checks.push(Check::le("case3_branch1_im_shift_rel", worst, 0.2));
        Ok((checks, Vec::new()))
    })
}

// ---------------------------------------------------------------------------
// 4

#[derive(Clone, Debug, PartialEq)]
pub struct RemainderSettings {
    pub c: f64,
    pub n_range: (f64, f64),
    pub samples: usize,
    pub offset: f64,
}

impl Default for RemainderSettings {
    fn default() -> Self {
        RemainderSettings {
            c: 1.0,
            n_range: (1e2, 1e4),
            samples: 25,
            offset: 1e-3,
        }
    }
}

/// `|det(M~) - F|` in double-double along `2 n pi i - offset`.
pub fn remainder_samples(s: &RemainderSettings) -> Result<Vec<(f64, f64)>> {
    let cfg = spectral(s.c)?;
    let (a, b) = (s.n_range.0.ln(), s.n_range.1.ln());
    let m = s.samples.max(2);
    (0..m)
        .map(|k| {
            let n = (a + (b - a) * k as f64 / (m - 1) as f64).exp().round();
            let lam = Complex64::new(-s.offset, 2.0 * PI * n);
            let d = char_det_scaled_dd(lam, &cfg)? - asymptotic_f_dd(lam, &cfg)?;
            Ok((lam.norm(), lower(d).norm()))
        })
        .collect()
}

pub fn criterion_remainder(s: &RemainderSettings) -> CriterionReport {
    run(Suite::Remainder, || {
        let pts = remainder_samples(s)?;
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let f = loglog_fit(&x, &y)?;
        Ok((
            vec![Check::le("slope", f.slope, -3.0 + 0.2)],
            vec![format!("r2 {:.5}", f.r2)],
        ))
    })
}

// ---------------------------------------------------------------------------
// 5

#[derive(Clone, Debug)]
pub struct DecaySettings {
    pub c: f64,
    pub n_cells: usize,
    pub t_final: f64,
    /// Fit window; the last decade of simulated time.
    pub window: (f64, f64),
    /// Time step; `None` means `h`.
    pub dt: Option<f64>,
    pub modes: (i64, i64),
    /// Replaces the half-beam damping.
    pub profile: Option<DampingProfile>,
    pub stride: usize,
}

impl Default for DecaySettings {
    fn default() -> Self {
        DecaySettings {
            c: 4.0 * PI,
            n_cells: 800,
            t_final: 200.0,
            window: (20.0, 200.0),
            dt: None,
            modes: (5, 25),
            profile: None,
            stride: 10,
        }
    }
}

/// Real smooth datum `2 Re sum n^{-3/2} phi_n` built from the discrete
/// eigenvectors `phi_n` continuing both slow branches, each of unit energy
/// norm, rescaled to unit energy.
pub fn slow_branch_datum(gen: &DiscreteGenerator, c: f64, modes: (i64, i64)) -> Result<GridState> {
    let cfg = spectral(c)?;
    let opts = ProbeOptions::default();
    let mut exact = Vec::new();
    for b in [Branch::One, Branch::Two] {
        let r = find_roots(modes.0, modes.1, b, &cfg);
        if let Some(u) = r.unresolved.first() {
            return Err(Error::NotConverged {
                what: "exact root for the initial datum",
                iterations: u.n.unsigned_abs() as usize,
            });
        }
        exact.extend(r.roots.iter().map(|x| (x.n, x.lambda)));
    }
    let vecs: Vec<(i64, Vec<Complex64>)> = exact
        .par_iter()
        .map(|&(n, l)| track_discrete_mode(gen, l, 2.0, &opts).map(|p| (n, p.vector)))
        .collect::<Result<_>>()?;
    let mut acc = vec![Complex64::new(0.0, 0.0); gen.dim()];
    for (n, v) in vecs {
        let norm = gen.inner_vec(&v, &v).re.sqrt();
        let w = (n as f64).powf(-1.5) / norm;
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += 2.0 * w * x.re;
        }
    }
    for a in acc.iter_mut() {
        *a = Complex64::new(a.re, 0.0);
    }
    let e = gen.inner_vec(&acc, &acc).re.sqrt();
    acc.iter_mut().for_each(|a| *a /= e);
    gen.vec_to_state(&acc)
}

/// `E t` relative to its value at the start of the window, maximized.
fn energy_times_t_growth(trace: &EnergyTrace, window: (f64, f64)) -> f64 {
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.energies)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, e)| (*t, *e))
        .collect();
    let Some(&(t0, e0)) = pts.first() else { return f64::NAN };
    pts.iter().map(|(t, e)| t * e / (t0 * e0)).fold(0.0, f64::max)
}

pub fn criterion_decay(s: &DecaySettings) -> CriterionReport {
    let start = Instant::now();
    let params = match BeamParameters::equal_speed(s.c) {
        Ok(p) => p,
        Err(e) => return CriterionReport::errored(5, Suite::Decay, &e, start),
    };
    let profile = s.profile.clone().unwrap_or_else(|| DampingProfile::right_half(params.k2));
    match validate_hypothesis(&profile, &params, 1024) {
        Ok(r) if !r.passes() => return CriterionReport::not_applicable(5, Suite::Decay, "H violated", start),
        Err(e) => return CriterionReport::errored(5, Suite::Decay, &e, start),
        Ok(_) => {}
    }
    run(Suite::Decay, || {
        let bc = BoundaryConditionKind::DirichletNeumann;
        let gen = DiscreteGenerator::assemble(&params, &profile, bc, s.n_cells)?;
        let dt = s.dt.unwrap_or(params.length / s.n_cells as f64);
        let u0 = slow_branch_datum(&gen, s.c, s.modes)?;
        let trace = simulate(&gen, &u0, dt, s.t_final, s.stride)?;
        let fit = fit_decay_exponent(&trace, s.window)?;
        let growth = energy_times_t_growth(&trace, s.window);
        let cons = DiscreteGenerator::assemble_with(
            &params,
            &DampingProfile::zero(params.length),
            bc,
            s.n_cells,
            AssemblyOptions::permissive(),
        )?;
        let flat = simulate(&cons, &u0, dt, s.t_final, s.stride)?;
        Ok((
            vec![
                Check::le("max_step_increase", trace.max_relative_increase, 1e-12),
                Check::range("p", fit.p, 0.7, 1.4),
                Check::le("et_growth", growth, 2.5),
                Check::le("conservative_variation", flat.relative_variation(), 1e-8),
            ],
            vec![format!(
                "C = {:.3e}, r2 {:.4}, curvature drift {:.3}",
                fit.prefactor, fit.r2, fit.slope_drift
            )],
        ))
    })
}

// ---------------------------------------------------------------------------
// 6

#[derive(Clone, Debug, PartialEq)]
pub struct ResolventSettings {
    pub n_cells: usize,
    pub modes: (usize, usize),
    pub global_d0: f64,
    /// Couplings of the half-damped configurations.
    pub local_couplings: Vec<f64>,
    /// Finer grid and shorter mode range for the half-damped scans, whose
    /// frequencies must follow the slow branch.
    pub local_n_cells: usize,
    pub local_modes: (i64, i64),
    pub options: ResolventOptions,
}

impl Default for ResolventSettings {
    fn default() -> Self {
        ResolventSettings {
            n_cells: 800,
            modes: (10, 80),
            global_d0: 1.0,
            local_couplings: vec![1.0, 2.0 * PI, 4.0 * PI],
            local_n_cells: 1600,
            local_modes: (10, 40),
            options: ResolventOptions::default(),
        }
    }
}

/// Imaginary parts of the discrete eigenvalues nearest to `seeds`, sorted.
pub fn discrete_frequencies(gen: &DiscreteGenerator, seeds: &[Complex64]) -> Result<Vec<f64>> {
    let opts = ProbeOptions::default();
    let mut w: Vec<f64> = seeds
        .par_iter()
        .map(|&s| inverse_iteration(gen, s, &opts).map(|p| p.value.im))
        .collect::<Result<_>>()?;
    w.sort_by(f64::total_cmp);
    w.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(w)
}

pub fn criterion_resolvent(s: &ResolventSettings) -> CriterionReport {
    run(Suite::Resolvent, || {
        let p = BeamParameters::unit();
        let global = DiscreteGenerator::assemble(
            &p,
            &DampingProfile::global(s.global_d0, p.length),
            BoundaryConditionKind::DirichletNeumann,
            s.n_cells,
        )?;
        let seeds: Vec<Complex64> = (s.modes.0..=s.modes.1)
            .map(|n| Complex64::new(0.0, n as f64 * PI * (p.k1 / p.rho1).sqrt() / p.length))
            .collect();
        let w = discrete_frequencies(&global, &seeds)?;
        let g = resolvent_growth_scan(&global, &w, &s.options)?;
        let mut checks = vec![Check::within("global_slope", g.slope, 2.0, 0.3)];
        let mut notes = Vec::new();
        let mut worst = f64::NEG_INFINITY;
        for &c in &s.local_couplings {
            let gen = half_damped(c, s.local_n_cells)?;
            let cfg = spectral(c)?;
            let roots = find_roots(s.local_modes.0, s.local_modes.1, Branch::One, &cfg);
            let opts = ProbeOptions::default();
            let mut w: Vec<f64> = roots
                .roots
                .par_iter()
                .map(|r| track_discrete_mode(&gen, r.lambda, 2.0, &opts).map(|p| p.value.im))
                .collect::<Result<_>>()?;
            w.sort_by(f64::total_cmp);
            let scan = resolvent_growth_scan(&gen, &w, &s.options)?;
            notes.push(format!("c = {c:.4}: slope {:.3}", scan.slope));
            worst = worst.max(scan.slope);
        }
        if !s.local_couplings.is_empty() {
            checks.push(Check::le("max_local_slope", worst, 2.3));
        }
        Ok((checks, notes))
    })
}

// ---------------------------------------------------------------------------
// 7

#[derive(Clone, Debug, PartialEq)]
pub struct PropertySettings {
    pub samples: usize,
    pub seed: u64,
    pub c: f64,
    pub rouche_modes: (i64, i64),
    pub symmetry_modes: (i64, i64),
}

impl Default for PropertySettings {
    fn default() -> Self {
        PropertySettings {
            samples: 100,
            seed: 7,
            c: 1.0,
            rouche_modes: (50, 100),
            symmetry_modes: (50, 60),
        }
    }
}

fn random_strip_point(u: &mut Uniform) -> Complex64 {
    let re = u.next(-0.5, 0.0);
    let im = u.next(1.0, 100.0) * if u.next(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
    Complex64::new(re, im)
}

/// Worst relative errors of the wavenumber identities over random strip
/// points: `[r1^2 + r2^2 = 2 lambda^2, r1^2 - r2^2 = 2 i c lambda,
/// s1^2 + s2^2 = lambda^2, s1^2 s2^2 = lambda^2 (lambda^2 + c^2)/(1 + lambda),
/// s1^2 + s2^2 = lambda^2 (lambda + 2)/(lambda + 1)]`.
pub fn wavenumber_identity_errors(samples: usize, seed: u64) -> Result<[f64; 5]> {
    let mut u = Uniform::new(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..samples {
        let lam = random_strip_point(&mut u);
        let c = u.next(0.1, 20.0);
        let cfg = spectral(c)?;
        let w = wavenumbers(lam, &cfg)?;
        let (s1sq, s2sq) = (w.s1 * w.s1, w.s2 * w.s2);
        let i = Complex64::new(0.0, 1.0);
        let l2 = lam * lam;
        let errs = [
            rel(w.r1 * w.r1 + w.r2 * w.r2, 2.0 * l2),
            rel(w.r1 * w.r1 - w.r2 * w.r2, 2.0 * i * c * lam),
            rel(s1sq + s2sq, l2),
            rel(s1sq * s2sq, l2 * (l2 + c * c) / (1.0 + lam)),
            rel(s1sq + s2sq, l2 * (lam + 2.0) / (lam + 1.0)),
        ];
        for k in 0..5 {
            worst[k] = worst[k].max(errs[k]);
        }
    }
    Ok(worst)
}

/// Worst relative error of the `f0` factorization over random points.
pub fn f0_factorization_error(samples: usize, seed: u64) -> Result<f64> {
    let mut u = Uniform::new(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let lam = random_strip_point(&mut u);
        let c = u.next(0.1, 20.0);
        let f = f_coefficients(lam, &spectral(c)?)[0];
        let g = f0_factored(lam, c);
        // relative to the size of the summands, since f0 has zeros
        let scale = (1.5 * lam).sinh().norm() + (0.5 * lam).sinh().norm();
        worst = worst.max((f - g).norm() / scale);
    }
    Ok(worst)
}

pub fn criterion_properties(s: &PropertySettings) -> CriterionReport {
    run(Suite::Properties, || {
        let f0 = f0_factorization_error(s.samples, s.seed)?;
        let w = wavenumber_identity_errors(s.samples, s.seed)?;
        let cfg = spectral(s.c)?;
        let (a, b) = s.symmetry_modes;
        let pos = find_roots(a, b, Branch::One, &cfg);
        let neg = find_roots(-b, -a, Branch::One, &cfg);
        let pos2 = find_roots(a, b, Branch::Two, &cfg);
        let mut sym = 0.0f64;
        for r in &pos.roots {
            if let Some(q) = neg.roots.iter().find(|q| q.n == -r.n) {
                sym = sym.max((q.lambda - r.lambda.conj()).norm());
            } else {
                sym = f64::INFINITY;
            }
        }
        let all: Vec<&RootRecord> = pos.roots.iter().chain(&neg.roots).chain(&pos2.roots).collect();
        let max_re = all.iter().map(|r| r.lambda.re).fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = s.rouche_modes;
        let counts: Vec<i64> = (lo..=hi)
            .into_par_iter()
            .map(|n| {
                let center = Complex64::new(0.0, 2.0 * PI * n as f64);
                count_zeros(&Rect::centered(center, (n as f64).powf(-0.25)), &cfg)
            })
            .collect::<Result<_>>()?;
        let bad = counts.iter().filter(|&&k| k != 1).count();
        let unresolved = pos.unresolved.len() + neg.unresolved.len() + pos2.unresolved.len();
        Ok((
            vec![
                Check::le("f0_factorization", f0, 1e-12),
                Check::le("r_sum", w[0], 1e-12),
                Check::le("r_difference", w[1], 1e-12),
                Check::le("s_sum_equals_lambda_sq", w[2], 1e-12),
                Check::le("s_product", w[3], 1e-12),
                Check::le("conjugate_symmetry", sym, 1e-8),
                Check::count("unresolved_roots", unresolved, 0),
                Check::negative("max_root_real_part", max_re),
                Check::count("rouche_boxes_without_one_zero", bad, 0),
            ],
            vec![format!(
                "s1^2 + s2^2 equals lambda^2 (lambda + 2)/(lambda + 1) to {:.1e}",
                w[4]
            )],
        ))
    })
}

// ---------------------------------------------------------------------------
// 8

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizationSettings {
    pub c: f64,
    pub modes: (i64, i64),
    pub grids: (usize, usize),
    pub ratio_band: (f64, f64),
}

impl Default for DiscretizationSettings {
    fn default() -> Self {
        DiscretizationSettings {
            c: 1.0,
            modes: (50, 54),
            grids: (2000, 4000),
            ratio_band: (3.0, 5.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizationRow {
    pub n: i64,
    pub root: Complex64,
    pub coarse_error: f64,
    pub fine_error: f64,
    /// `error / h^2` on the coarse grid.
    pub constant: f64,
    pub ratio: f64,
}

pub fn discretization_rows(s: &DiscretizationSettings) -> Result<Vec<DiscretizationRow>> {
    let cfg = spectral(s.c)?;
    let roots = find_roots(s.modes.0, s.modes.1, Branch::One, &cfg);
    if let Some(u) = roots.unresolved.first() {
        return Err(Error::NotConverged {
            what: "exact root for the discretization check",
            iterations: u.n.unsigned_abs() as usize,
        });
    }
    let coarse = half_damped(s.c, s.grids.0)?;
    let fine = half_damped(s.c, s.grids.1)?;
    let opts = ProbeOptions::default();
    roots
        .roots
        .par_iter()
        .map(|r| {
            let a = inverse_iteration(&coarse, r.lambda, &opts)?.value;
            let b = inverse_iteration(&fine, r.lambda, &opts)?.value;
            let (ea, eb) = ((a - r.lambda).norm(), (b - r.lambda).norm());
            let h = 1.0 / s.grids.0 as f64;
            Ok(DiscretizationRow {
                n: r.n,
                root: r.lambda,
                coarse_error: ea,
                fine_error: eb,
                constant: ea / (h * h),
                ratio: ea / eb,
            })
        })
        .collect()
}

pub fn criterion_discretization(s: &DiscretizationSettings) -> CriterionReport {
    run(Suite::Discretization, || {
        let rows = discretization_rows(s)?;
        let lo = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        let consts: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.constant)).collect();
        Ok((
            vec![
                Check::count("roots", rows.len(), (s.modes.1 - s.modes.0 + 1) as usize),
                Check::range("ratio_min", lo, s.ratio_band.0, s.ratio_band.1),
                Check::range("ratio_max", hi, s.ratio_band.0, s.ratio_band.1),
            ],
            vec![format!("C = error/h^2: {}", consts.join(", "))],
        ))
    })
}

// ---------------------------------------------------------------------------
// identities

#[derive(Clone, Debug, PartialEq)]
pub struct IdentitySettings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for IdentitySettings {
    fn default() -> Self {
        IdentitySettings { samples: 100, seed: 11 }
    }
}

/// Algebraic identities that hold exactly for the implemented formulas.
pub fn suite_identities(s: &IdentitySettings) -> CriterionReport {
    run(Suite::Identities, || {
        let w = wavenumber_identity_errors(s.samples, s.seed)?;
        let f0 = f0_factorization_error(s.samples, s.seed)?;
        let mut u = Uniform::new(s.seed.wrapping_add(1));
        let mut raw = 0.0f64;
        let mut conj = 0.0f64;
        for _ in 0..s.samples {
            let lam = Complex64::new(u.next(-0.5, 0.0), u.next(1.0, 60.0));
            let cfg = spectral(u.next(0.1, 20.0))?;
            let g = char_det_scaled(lam, &cfg)?;
            let m = det4(char_matrix(lam, &cfg)?);
            let s2 = wavenumbers(lam, &cfg)?.s2;
            let scale = 1.0 + g.norm();
            raw = raw.max((g - 2.0 * (-0.5 * s2).exp() * m).norm() / scale);
            conj = conj.max((char_det_scaled(lam.conj(), &cfg)? - g.conj()).norm() / scale);
        }
        let mut blow = 0.0f64;
        for n in 1..=50 {
            blow = blow.max(build_blowup_pair(n, &BeamParameters::unit(), 1.0, (8 * n).max(16))?.closed_form_residual());
        }
        Ok((
            vec![
                Check::le("r_sum", w[0], 1e-12),
                Check::le("r_difference", w[1], 1e-12),
                Check::le("s_sum", w[4], 1e-12),
                Check::le("s_product", w[3], 1e-12),
                Check::le("f0_factorization", f0, 1e-12),
                Check::le("reduced_vs_raw_determinant", raw, 1e-9),
                Check::le("determinant_conjugate_symmetry", conj, 1e-12),
                Check::le("blowup_coefficients", blow, 1e-12),
            ],
            Vec::new(),
        ))
    })
}

/// Runs a suite with acceptance settings.
pub fn run_suite(suite: Suite) -> CriterionReport {
    match suite {
        Suite::Blowup => criterion_blowup(&Default::default()),
        Suite::Branches => criterion_branches(&Default::default()),
        Suite::Cases => criterion_cases(&Default::default()),
        Suite::Remainder => criterion_remainder(&Default::default()),
        Suite::Decay => criterion_decay(&Default::default()),
        Suite::Resolvent => criterion_resolvent(&Default::default()),
        Suite::Properties => criterion_properties(&Default::default()),
        Suite::Discretization => criterion_discretization(&Default::default()),
        Suite::Identities => suite_identities(&Default::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("nope"), None);
    }

    #[test]
    fn decay_on_conservative_profile_is_not_applicable() {
        let s = DecaySettings {
            profile: Some(DampingProfile::zero(1.0)),
            ..Default::default()
        };
        let r = criterion_decay(&s);
        assert_eq!(r.outcome, Outcome::NotApplicable("H violated".into()));
    }

    #[test]
    fn check_bounds() {
        assert!(Check::le("a", 1.0, 1.0).pass);
        assert!(!Check::range("a", 0.5, 0.7, 1.4).pass);
        assert!(Check::within("a", 2.09, 2.0, 0.1).pass);
    }
}
