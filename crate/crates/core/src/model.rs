//! Beam parameters, damping profiles, boundary conditions, grid states and
//! the energy functionals evaluated on them.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::discretize::DiscreteGenerator;
use crate::error::{Error, Result};

/// Physical constants of the beam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamParameters {
    pub rho1: f64,
    pub rho2: f64,
    pub k1: f64,
    pub k2: f64,
    pub length: f64,
}

impl BeamParameters {
    pub fn new(rho1: f64, rho2: f64, k1: f64, k2: f64, length: f64) -> Result<Self> {
        for (name, value) in [
            ("rho1", rho1),
            ("rho2", rho2),
            ("k1", k1),
            ("k2", k2),
            ("length", length),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        Ok(BeamParameters {
            rho1,
            rho2,
            k1,
            k2,
            length,
        })
    }

    /// All constants equal to one.
    pub fn unit() -> Self {
        BeamParameters {
            rho1: 1.0,
            rho2: 1.0,
            k1: 1.0,
            k2: 1.0,
            length: 1.0,
        }
    }

    /// Equal-speed normalization with unit bending constants and coupling
    /// `c = sqrt(k1 / k2)`: `rho1 = k1 = c^2`, `rho2 = k2 = 1`, `L = 1`.
    pub fn equal_speed(c: f64) -> Result<Self> {
        BeamParameters::new(c * c, 1.0, c * c, 1.0, 1.0)
    }

    pub fn shear_speed_sq(&self) -> f64 {
        self.k1 / self.rho1
    }

    pub fn bending_speed_sq(&self) -> f64 {
        self.k2 / self.rho2
    }

    pub fn max_speed(&self) -> f64 {
        self.shear_speed_sq().max(self.bending_speed_sq()).sqrt()
    }

    pub fn equal_speeds(&self) -> bool {
        let a = self.shear_speed_sq();
        let b = self.bending_speed_sq();
        (a - b).abs() <= 1e-12 * a.max(b)
    }

    /// Coupling constant `sqrt(k1 / k2)`.
    pub fn coupling(&self) -> f64 {
        (self.k1 / self.k2).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryConditionKind {
    /// `u = y = 0` at both ends.
    FullyDirichlet,
    /// `u = 0` and `y_x = 0` at both ends; `y` has zero mean.
    DirichletNeumann,
}

impl fmt::Display for BoundaryConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryConditionKind::FullyDirichlet => write!(f, "fully-dirichlet"),
            BoundaryConditionKind::DirichletNeumann => write!(f, "dirichlet-neumann"),
        }
    }
}

pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DampingKind {
    /// `value` on `(alpha, beta]`, zero elsewhere.
    PiecewiseConstant { value: f64 },
    /// Arbitrary evaluator on `[0, L]`.
    Smooth(ProfileFn),
    Zero,
}

impl fmt::Debug for DampingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DampingKind::PiecewiseConstant { value } => {
                write!(f, "PiecewiseConstant {{ value: {value} }}")
            }
            DampingKind::Smooth(_) => write!(f, "Smooth(..)"),
            DampingKind::Zero => write!(f, "Zero"),
        }
    }
}

/// Viscoelastic coefficient `D(x)` with support `[alpha, beta]` and floor `d0`.
#[derive(Clone, Debug)]
pub struct DampingProfile {
    pub kind: DampingKind,
    pub alpha: f64,
    pub beta: f64,
    pub d0: f64,
}

impl DampingProfile {
    /// `D = d0` on the whole beam.
    pub fn global(d0: f64, length: f64) -> Self {
        DampingProfile {
            kind: DampingKind::PiecewiseConstant { value: d0 },
            alpha: 0.0,
            beta: length,
            d0,
        }
    }

    /// `D = value` on `(alpha, beta]`, zero elsewhere.
    pub fn piecewise(value: f64, alpha: f64, beta: f64) -> Self {
        DampingProfile {
            kind: DampingKind::PiecewiseConstant { value },
            alpha,
            beta,
            d0: value,
        }
    }

    pub fn smooth(f: impl Fn(f64) -> f64 + Send + Sync + 'static, alpha: f64, beta: f64, d0: f64) -> Self {
        DampingProfile {
            kind: DampingKind::Smooth(Arc::new(f)),
            alpha,
            beta,
            d0,
        }
    }

    /// Conservative baseline; violates the positivity hypothesis.
    pub fn zero(length: f64) -> Self {
        DampingProfile {
            kind: DampingKind::Zero,
            alpha: 0.0,
            beta: length,
            d0: 0.0,
        }
    }

    /// Damping `k2` on the right half of a unit beam.
    pub fn right_half(k2: f64) -> Self {
        DampingProfile::piecewise(k2, 0.5, 1.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DampingKind::Zero)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            DampingKind::PiecewiseConstant { value } => {
                let inside = (x > self.alpha || (self.alpha == 0.0 && x >= 0.0)) && x <= self.beta;
                if inside {
                    *value
                } else {
                    0.0
                }
            }
            DampingKind::Smooth(f) => f(x),
            DampingKind::Zero => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HypothesisViolation {
    Negative { x: f64, value: f64 },
    BelowFloor { x: f64, value: f64, floor: f64 },
    NonPositiveFloor { d0: f64 },
    SupportOutOfRange { alpha: f64, beta: f64, length: f64 },
    NonFinite { x: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationFlag {
    /// Jump detected inside the support (accepted, reported).
    Discontinuity { x: f64, jump: f64 },
    ConservativeBaseline,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<HypothesisViolation>,
    pub flags: Vec<ValidationFlag>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the positivity hypothesis on `n_samples` uniformly spaced points.
pub fn validate_hypothesis(
    profile: &DampingProfile,
    params: &BeamParameters,
    n_samples: usize,
) -> Result<ValidationReport> {
    if n_samples < 16 {
        return Err(Error::InvalidArgument(format!(
            "n_samples = {n_samples}, need at least 16"
        )));
    }
    if !(profile.alpha < profile.beta) {
        return Err(Error::InvalidProfile(format!(
            "empty support: alpha = {} >= beta = {}",
            profile.alpha, profile.beta
        )));
    }
    let len = params.length;
    let mut violations = Vec::new();
    let mut flags = Vec::new();
    if profile.is_zero() {
        flags.push(ValidationFlag::ConservativeBaseline);
    }
    if profile.alpha < 0.0 || profile.alpha >= len || profile.beta > len * (1.0 + 1e-14) {
        violations.push(HypothesisViolation::SupportOutOfRange {
            alpha: profile.alpha,
            beta: profile.beta,
            length: len,
        });
    }
    if !(profile.d0 > 0.0) {
        violations.push(HypothesisViolation::NonPositiveFloor { d0: profile.d0 });
    }
    let xs: Vec<f64> = (0..n_samples)
        .map(|j| len * j as f64 / (n_samples - 1) as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| profile.eval(x)).collect();
    let mut floor_reported = false;
    let mut neg_reported = false;
    for (&x, &d) in xs.iter().zip(&vals) {
        if !d.is_finite() {
            violations.push(HypothesisViolation::NonFinite { x });
            continue;
        }
        if d < 0.0 && !neg_reported {
            violations.push(HypothesisViolation::Negative { x, value: d });
            neg_reported = true;
        }
        let inside = x > profile.alpha && x < profile.beta;
        let floor = profile.d0.max(0.0);
        if inside && (d < floor || d <= 0.0) && !floor_reported {
            violations.push(HypothesisViolation::BelowFloor { x, value: d, floor });
            floor_reported = true;
        }
    }
    let dmax = vals.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    if dmax > 0.0 {
        for j in 0..n_samples - 1 {
            let (a, b) = (xs[j], xs[j + 1]);
            if b <= profile.alpha || a >= profile.beta {
                continue;
            }
            let jump = (vals[j + 1] - vals[j]).abs();
            if jump > 0.1 * dmax {
                if let Some(x) = locate_jump(profile, a.max(profile.alpha), b.min(profile.beta), jump) {
                    if x > profile.alpha && x < profile.beta {
                        flags.push(ValidationFlag::Discontinuity { x, jump });
                    }
                }
            }
        }
    }
    Ok(ValidationReport {
        samples: n_samples,
        violations,
        flags,
    })
}

// Bisection on the increment; a genuine jump keeps its size as the
// interval shrinks.
fn locate_jump(profile: &DampingProfile, mut a: f64, mut b: f64, jump: f64) -> Option<f64> {
    for _ in 0..48 {
        let m = 0.5 * (a + b);
        let left = (profile.eval(m) - profile.eval(a)).abs();
        let right = (profile.eval(b) - profile.eval(m)).abs();
        if left >= right {
            b = m;
        } else {
            a = m;
        }
    }
    let remaining = (profile.eval(b) - profile.eval(a)).abs();
    if remaining > 0.5 * jump {
        Some(0.5 * (a + b))
    } else {
        None
    }
}

/// Samples of `(u, v, y, z)` at the nodes `x_i = i L / n_cells`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub n_cells: usize,
    pub length: f64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub y: Vec<Complex64>,
    pub z: Vec<Complex64>,
}

impl GridState {
    pub fn zeros(n_cells: usize, length: f64) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n_cells + 1];
        GridState {
            n_cells,
            length,
            u: z.clone(),
            v: z.clone(),
            y: z.clone(),
            z,
        }
    }

    pub fn from_fn(
        n_cells: usize,
        length: f64,
        fu: impl Fn(f64) -> Complex64,
        fv: impl Fn(f64) -> Complex64,
        fy: impl Fn(f64) -> Complex64,
        fz: impl Fn(f64) -> Complex64,
    ) -> Self {
        let xs: Vec<f64> = (0..=n_cells).map(|i| length * i as f64 / n_cells as f64).collect();
        GridState {
            n_cells,
            length,
            u: xs.iter().map(|&x| fu(x)).collect(),
            v: xs.iter().map(|&x| fv(x)).collect(),
            y: xs.iter().map(|&x| fy(x)).collect(),
            z: xs.iter().map(|&x| fz(x)).collect(),
        }
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.length * i as f64 / self.n_cells as f64
    }

    pub fn fields(&self) -> [&Vec<Complex64>; 4] {
        [&self.u, &self.v, &self.y, &self.z]
    }

    pub fn scale(&self, a: Complex64) -> Self {
        let f = |w: &Vec<Complex64>| w.iter().map(|&x| a * x).collect();
        GridState {
            n_cells: self.n_cells,
            length: self.length,
            u: f(&self.u),
            v: f(&self.v),
            y: f(&self.y),
            z: f(&self.z),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &GridState, b: Complex64) -> Result<Self> {
        self.check_same_grid(other)?;
        let f = |p: &Vec<Complex64>, q: &Vec<Complex64>| {
            p.iter().zip(q).map(|(&x, &y)| a * x + b * y).collect()
        };
        Ok(GridState {
            n_cells: self.n_cells,
            length: self.length,
            u: f(&self.u, &other.u),
            v: f(&self.v, &other.v),
            y: f(&self.y, &other.y),
            z: f(&self.z, &other.z),
        })
    }

    pub fn conj(&self) -> Self {
        let f = |w: &Vec<Complex64>| w.iter().map(|x| x.conj()).collect();
        GridState {
            n_cells: self.n_cells,
            length: self.length,
            u: f(&self.u),
            v: f(&self.v),
            y: f(&self.y),
            z: f(&self.z),
        }
    }

    pub fn check_same_grid(&self, other: &GridState) -> Result<()> {
        if self.n_cells != other.n_cells {
            return Err(Error::DimensionMismatch {
                expected: self.n_cells,
                found: other.n_cells,
            });
        }
        Ok(())
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.n_cells + 1;
        for w in self.fields() {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
        }
        Ok(())
    }

    pub fn max_amplitude(&self) -> f64 {
        self.fields()
            .iter()
            .flat_map(|w| w.iter())
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.fields()
            .iter()
            .flat_map(|w| w.iter())
            .all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Trapezoidal integral of a nodal field divided by the length.
    pub fn trapezoid_mean(&self, w: &[Complex64]) -> Complex64 {
        let n = self.n_cells;
        let mut s = 0.5 * (w[0] + w[n]);
        for x in &w[1..n] {
            s += x;
        }
        s * self.h() / self.length
    }

    /// One-sided derivative of `y` at the left and right ends.
    pub fn end_slopes_y(&self) -> (Complex64, Complex64) {
        let n = self.n_cells;
        let h = self.h();
        ((self.y[1] - self.y[0]) / h, (self.y[n] - self.y[n - 1]) / h)
    }

    /// Verifies the essential boundary values and, for Dirichlet-Neumann,
    /// the zero-mean constraint on `y` and `z`. The Neumann condition on `y`
    /// is natural for the discretization and is not imposed on samples.
    pub fn check_admissible(&self, bc: BoundaryConditionKind) -> Result<()> {
        self.check_shape()?;
        let n = self.n_cells;
        let amp = self.max_amplitude().max(f64::MIN_POSITIVE);
        let tol = 1e-12 * amp;
        let mut bad = Vec::new();
        if self.u[0].norm() > tol || self.u[n].norm() > tol {
            bad.push("u must vanish at both ends");
        }
        if self.v[0].norm() > tol || self.v[n].norm() > tol {
            bad.push("v must vanish at both ends");
        }
        match bc {
            BoundaryConditionKind::FullyDirichlet => {
                if self.y[0].norm() > tol || self.y[n].norm() > tol {
                    bad.push("y must vanish at both ends");
                }
                if self.z[0].norm() > tol || self.z[n].norm() > tol {
                    bad.push("z must vanish at both ends");
                }
            }
            BoundaryConditionKind::DirichletNeumann => {
                if self.trapezoid_mean(&self.y).norm() > 1e-10 * amp {
                    bad.push("y must have zero mean");
                }
                if self.trapezoid_mean(&self.z).norm() > 1e-10 * amp {
                    bad.push("z must have zero mean");
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Inadmissible(bad.join("; ")))
        }
    }

    /// Subtracts the trapezoidal means of `y` and `z`.
    pub fn remove_means(&mut self) {
        let my = self.trapezoid_mean(&self.y);
        let mz = self.trapezoid_mean(&self.z);
        self.y.iter_mut().for_each(|w| *w -= my);
        self.z.iter_mut().for_each(|w| *w -= mz);
    }
}

/// Shear strain `u_x + y` and bending strain `y_x` on cell `c`.
#[inline]
pub(crate) fn cell_strains(s: &GridState, c: usize, h: f64) -> (Complex64, Complex64) {
    let shear = (s.u[c + 1] - s.u[c]) / h + 0.5 * (s.y[c] + s.y[c + 1]);
    let bend = (s.y[c + 1] - s.y[c]) / h;
    (shear, bend)
}

/// `(1/2) int (rho1 |v|^2 + rho2 |z|^2 + k1 |u_x + y|^2 + k2 |y_x|^2)`:
/// trapezoid rule for the nodal velocities, cell-centered differences and
/// the midpoint rule for the strains.
pub fn energy(state: &GridState, params: &BeamParameters) -> Result<f64> {
    state.check_shape()?;
    let n = state.n_cells;
    if n < 4 {
        return Err(Error::UnderResolved(format!("n_cells = {n} < 4")));
    }
    let h = state.h();
    let mut kin = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        kin += w * (params.rho1 * state.v[i].norm_sqr() + params.rho2 * state.z[i].norm_sqr());
    }
    let mut pot = 0.0;
    for c in 0..n {
        let (s, b) = cell_strains(state, c, h);
        pot += params.k1 * s.norm_sqr() + params.k2 * b.norm_sqr();
    }
    Ok(0.5 * h * (kin + pot))
}

/// `-int D |z_x|^2` with `D` at cell midpoints.
pub fn dissipation_rate(state: &GridState, profile: &DampingProfile) -> Result<f64> {
    state.check_shape()?;
    let n = state.n_cells;
    if n < 1 {
        return Err(Error::UnderResolved("empty grid".into()));
    }
    let h = state.h();
    let mut acc = 0.0;
    for c in 0..n {
        let d = profile.eval((c as f64 + 0.5) * h);
        let dz = (state.z[c + 1] - state.z[c]) / h;
        acc += d * dz.norm_sqr();
    }
    Ok(-h * acc)
}

/// `sqrt(|U|^2 + |A_h U|^2)` in the discrete energy norm.
pub fn graph_norm(state: &GridState, gen: &DiscreteGenerator) -> Result<f64> {
    let au = gen.apply(state)?;
    let a = gen.inner(state, state)?.re;
    let b = gen.inner(&au, &au)?.re;
    Ok((a + b).max(0.0).sqrt())
}
