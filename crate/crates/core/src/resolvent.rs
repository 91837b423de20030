//! Explicit resolvent blow-up sequence for global damping and discrete
//! resolvent norms in the energy inner product.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;

use crate::banded::{BandLu, BandMatrix};
use crate::ddouble::{lower, DoubleDouble};
use crate::discretize::DiscreteGenerator;
use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::model::{BeamParameters, BoundaryConditionKind, DampingProfile, GridState};
use crate::spectra::seeded_vector;

type Dd = DoubleDouble;

/// Sequence with `(i lambda_n I - A) U_n = F_n`, `F_n = (0, sin(n pi x / L), 0, 0)`,
/// `U_n = (A_n s, i lambda_n A_n s, B_n c, i lambda_n B_n c)` for global
/// damping `D = d0` and Dirichlet-Neumann ends.
#[derive(Clone, Debug, PartialEq)]
pub struct BlowupPair {
    pub n: usize,
    pub lambda_n: f64,
    pub a_n: Complex64,
    pub b_n: f64,
    /// Coefficients of `sin` in the second and `cos` in the fourth component
    /// of `(i lambda_n I - A) U_n`, evaluated in double-double.
    pub c1: Complex64,
    pub c2: Complex64,
    pub u_n: GridState,
    pub f_n: GridState,
    /// Norms from the closed-form integrals.
    pub norm_u: f64,
    pub norm_f: f64,
    /// Norms in the discrete energy inner product.
    pub norm_u_grid: f64,
    pub norm_f_grid: f64,
}

impl BlowupPair {
    pub fn ratio(&self) -> f64 {
        self.norm_u / self.norm_f
    }

    pub fn grid_ratio(&self) -> f64 {
        self.norm_u_grid / self.norm_f_grid
    }

    /// `max(|C1 - 1|, |C2|)`.
    pub fn closed_form_residual(&self) -> f64 {
        (self.c1 - 1.0).norm().max(self.c2.norm())
    }

    /// `rho1 L lambda_n^2 |A_n|^2 / 2`, a lower bound for `|U_n|^2`.
    pub fn lower_bound_sq(&self, params: &BeamParameters) -> f64 {
        params.rho1 * params.length * self.lambda_n.powi(2) * self.a_n.norm_sqr() / 2.0
    }
}

fn dd(x: f64) -> Dd {
    Dd::from_f64(x)
}

fn cdd(re: Dd, im: Dd) -> Complex<Dd> {
    Complex::new(re, im)
}

/// `lambda_n`, `A_n`, `B_n`, `C1`, `C2` in double-double.
fn closed_form(n: usize, p: &BeamParameters, d0: f64) -> (Dd, Complex<Dd>, Dd, Complex<Dd>, Complex<Dd>) {
    let (rho1, rho2, k1, k2, l) = (dd(p.rho1), dd(p.rho2), dd(p.k1), dd(p.k2), dd(p.length));
    let d0 = dd(d0);
    let npi = dd(n as f64) * Dd::pi();
    let kn = npi / l;
    let lam = kn * (k1 / rho1).sqrt();
    let a_re = k2 / k1 * (rho2 / k2 - rho1 / k1) - rho1 * l * l / (k1 * npi * npi);
    let a_im = -(npi * d0 / (k1 * l) * (rho1 / k1).sqrt());
    let a = cdd(a_re, a_im);
    let b = rho1 * l / (k1 * npi);
    let bc = cdd(b, Dd::ZERO);
    let real = |x: Dd| cdd(x, Dd::ZERO);
    let c1 = a * real(k1 / rho1 * kn * kn - lam * lam) + real(k1 * npi / (rho1 * l) * b);
    let visc = cdd(k2, lam * d0) * real(kn * kn / rho2);
    let c2 = a * real(npi * k1 / (rho2 * l)) + bc * (real(-(lam * lam) + k1 / rho2) + visc);
    (lam, a, b, c1, c2)
}

fn check_n_cells(n: usize, n_cells: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("mode index n must be positive".into()));
    }
    if n_cells < 8 * n {
        return Err(Error::UnderResolved(format!(
            "mode {n} needs at least {} cells, got {n_cells}",
            8 * n
        )));
    }
    Ok(())
}

fn global_generator(params: &BeamParameters, d0: f64, n_cells: usize) -> Result<DiscreteGenerator> {
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "d0",
            value: d0,
            reason: "global damping level must be positive",
        });
    }
    DiscreteGenerator::assemble(
        params,
        &DampingProfile::global(d0, params.length),
        BoundaryConditionKind::DirichletNeumann,
        n_cells,
    )
}

/// Blow-up pair on a generator that must carry global damping with
/// Dirichlet-Neumann ends.
pub fn build_blowup_pair_on(gen: &DiscreteGenerator, n: usize) -> Result<BlowupPair> {
    check_n_cells(n, gen.n_cells)?;
    if gen.bc != BoundaryConditionKind::DirichletNeumann {
        return Err(Error::InvalidArgument("blow-up pair needs Dirichlet-Neumann ends".into()));
    }
    let d0 = gen.profile.d0;
    let p = gen.params;
    let (lam, a, b, c1, c2) = closed_form(n, &p, d0);
    let lambda_n = lam.to_f64();
    let a_n = lower(a);
    let b_n = b.to_f64();
    let kn = n as f64 * std::f64::consts::PI / p.length;
    let il = Complex64::new(0.0, lambda_n);
    let zero = |_: f64| Complex64::new(0.0, 0.0);
    let s = move |x: f64| Complex64::new((kn * x).sin(), 0.0);
    let c = move |x: f64| Complex64::new((kn * x).cos(), 0.0);
    let u_n = GridState::from_fn(
        gen.n_cells,
        p.length,
        |x| a_n * s(x),
        |x| il * a_n * s(x),
        |x| b_n * c(x),
        |x| il * b_n * c(x),
    );
    let f_n = GridState::from_fn(gen.n_cells, p.length, zero, s, zero, zero);
    let half_l = 0.5 * p.length;
    let norm_u = (half_l
        * (p.rho1 * lambda_n.powi(2) * a_n.norm_sqr()
            + p.rho2 * (lambda_n * b_n).powi(2)
            + p.k1 * (a_n * kn + b_n).norm_sqr()
            + p.k2 * (b_n * kn).powi(2)))
    .sqrt();
    let norm_f = (half_l * p.rho1).sqrt();
    let norm_u_grid = gen.inner(&u_n, &u_n)?.re.sqrt();
    let norm_f_grid = gen.inner(&f_n, &f_n)?.re.sqrt();
    Ok(BlowupPair {
        n,
        lambda_n,
        a_n,
        b_n,
        c1: lower(c1),
        c2: lower(c2),
        u_n,
        f_n,
        norm_u,
        norm_f,
        norm_u_grid,
        norm_f_grid,
    })
}

pub fn build_blowup_pair(n: usize, params: &BeamParameters, d0: f64, n_cells: usize) -> Result<BlowupPair> {
    check_n_cells(n, n_cells)?;
    let gen = global_generator(params, d0, n_cells)?;
    build_blowup_pair_on(&gen, n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupFit {
    pub slope: f64,
    pub r2: f64,
    /// Slope from the grid norms.
    pub grid_slope: f64,
    pub used: Vec<usize>,
    /// Modes skipped as under-resolved.
    pub excluded: Vec<usize>,
}

/// Log-log slope of `|U_n| / |F_n|` against `lambda_n`.
pub fn blowup_exponent(n_list: &[usize], params: &BeamParameters, d0: f64, n_cells: usize) -> Result<BlowupFit> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("mode list must be strictly increasing".into()));
    }
    let gen = global_generator(params, d0, n_cells)?;
    let (used, excluded): (Vec<usize>, Vec<usize>) = n_list.iter().partition(|&&n| n > 0 && 8 * n <= n_cells);
    let pairs: Vec<BlowupPair> = used
        .par_iter()
        .map(|&n| build_blowup_pair_on(&gen, n))
        .collect::<Result<_>>()?;
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} resolved modes; at least 2 needed",
            pairs.len()
        )));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.lambda_n).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.ratio()).collect();
    let yg: Vec<f64> = pairs.iter().map(|p| p.grid_ratio()).collect();
    let f = loglog_fit(&x, &y)?;
    let fg = loglog_fit(&x, &yg)?;
    Ok(BlowupFit {
        slope: f.slope,
        r2: f.r2,
        grid_slope: fg.slope,
        used,
        excluded,
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolventOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions {
            tol: 1e-6,
            max_iter: 500,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolventEstimate {
    /// Frequency actually used (shifted by `1e-8` if the first
    /// factorization failed).
    pub omega: f64,
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Factored `i omega I - A_h` and its adjoint, plus the Gram factor.
pub struct ResolventSolver<'a> {
    gen: &'a DiscreteGenerator,
    pub omega: f64,
    fwd: BandLu<Complex64>,
    adj: BandLu<Complex64>,
    gram: BandMatrix<Complex64>,
    gram_lu: BandLu<Complex64>,
}

impl<'a> ResolventSolver<'a> {
    pub fn new(gen: &'a DiscreteGenerator, omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::NonFinite("omega"));
        }
        let a: BandMatrix<Complex64> = gen.matrix().map(|v| Complex64::new(v, 0.0));
        let at = a.conj_transpose();
        let gram = gen.gram().map(|v| Complex64::new(v, 0.0));
        let gram_lu = gram.factor()?;
        let m1 = Complex64::new(-1.0, 0.0);
        let mut omega_used = omega;
        let mut last = None;
        for _ in 0..2 {
            let iw = Complex64::new(0.0, omega_used);
            match (
                a.scaled_plus_identity(m1, iw).factor(),
                at.scaled_plus_identity(m1, -iw).factor(),
            ) {
                (Ok(fwd), Ok(adj)) => {
                    return Ok(ResolventSolver {
                        gen,
                        omega: omega_used,
                        fwd,
                        adj,
                        gram,
                        gram_lu,
                    })
                }
                (Err(e), _) | (_, Err(e)) => last = Some(e),
            }
            omega_used += 1e-8;
        }
        Err(last.unwrap_or(Error::Singular { column: 0 }))
    }

    /// `(i omega I - A_h)^{-1} b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        self.fwd.solve(b)
    }

    /// Largest singular value of the resolvent in the energy norm.
    pub fn norm(&self, opts: &ResolventOptions) -> Result<ResolventEstimate> {
        let n = self.gen.dim();
        let gnorm = |x: &[Complex64]| self.gen.inner_vec(x, x).re.max(0.0).sqrt();
        let mut x = seeded_vector(n, opts.seed);
        self.gen.project_vec(&mut x);
        let s = gnorm(&x);
        x.iter_mut().for_each(|v| *v /= s);
        let mut gy = vec![Complex64::new(0.0, 0.0); n];
        let mut sigma_prev = 0.0;
        for it in 1..=opts.max_iter {
            let y = self.fwd.solve(&x);
            let sigma = gnorm(&y);
            if !sigma.is_finite() {
                return Err(Error::NonFinite("resolvent iterate"));
            }
            if it > 1 && (sigma - sigma_prev).abs() <= opts.tol * sigma {
                return Ok(ResolventEstimate {
                    omega: self.omega,
                    norm: sigma,
                    iterations: it,
                    converged: true,
                });
            }
            sigma_prev = sigma;
            // x <- G^{-1} R^H G y
            self.gram.mul_vec(&y, &mut gy);
            let t = self.adj.solve(&gy);
            x = self.gram_lu.solve(&t);
            self.gen.project_vec(&mut x);
            let s = gnorm(&x);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::NonFinite("resolvent iterate"));
            }
            x.iter_mut().for_each(|v| *v /= s);
        }
        Err(Error::NotConverged {
            what: "resolvent power iteration",
            iterations: opts.max_iter,
        })
    }
}

/// `|(i omega I - A_h)^{-1}|` in the discrete energy norm. On the
/// Dirichlet-Neumann family the iteration runs in the zero-mean subspace.
pub fn resolvent_norm_discrete(gen: &DiscreteGenerator, omega: f64, opts: &ResolventOptions) -> Result<ResolventEstimate> {
    ResolventSolver::new(gen, omega)?.norm(opts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolventScan {
    pub records: Vec<ResolventEstimate>,
    pub slope: f64,
    pub r2: f64,
    /// Every norm below 10: no growth to speak of.
    pub non_diverging: bool,
}

/// Norms over a positive increasing frequency list and their log-log slope.
pub fn resolvent_growth_scan(gen: &DiscreteGenerator, omegas: &[f64], opts: &ResolventOptions) -> Result<ResolventScan> {
    if omegas.len() < 2 {
        return Err(Error::InsufficientData("at least two frequencies needed".into()));
    }
    if omegas[0] <= 0.0 || omegas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("frequencies must be positive and increasing".into()));
    }
    let records: Vec<ResolventEstimate> = omegas
        .par_iter()
        .map(|&w| resolvent_norm_discrete(gen, w, opts))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = records.iter().map(|r| r.omega).collect();
    let y: Vec<f64> = records.iter().map(|r| r.norm).collect();
    let f = loglog_fit(&x, &y)?;
    Ok(ResolventScan {
        non_diverging: y.iter().all(|&v| v < 10.0),
        slope: f.slope,
        r2: f.r2,
        records,
    })
}
