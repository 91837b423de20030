//! Implicit midpoint time stepping, energy traces and decay-rate fits.

use num_complex::Complex64;

use crate::banded::BandLu;
use crate::discretize::DiscreteGenerator;
use crate::error::{Error, Result};
use crate::fit::{loglog_fit, quadratic_fit};
use crate::model::{graph_norm, BoundaryConditionKind, GridState};

/// Factorized `(I - dt/2 A_h)` for repeated midpoint steps.
pub struct MidpointStepper<'a> {
    gen: &'a DiscreteGenerator,
    dt: f64,
    lu: BandLu<f64>,
    work: Vec<f64>,
}

impl<'a> MidpointStepper<'a> {
    pub fn new(gen: &'a DiscreteGenerator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step dt = {dt} must be positive")));
        }
        let lhs = gen.matrix().scaled_plus_identity(-0.5 * dt, 1.0);
        let lu = lhs.factor()?;
        Ok(MidpointStepper {
            gen,
            dt,
            lu,
            work: vec![0.0; gen.dim()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step on a real vector of unknowns.
    pub fn step_real(&mut self, x: &mut [f64]) {
        self.gen.matrix().mul_vec(x, &mut self.work);
        let h = 0.5 * self.dt;
        for (xi, wi) in x.iter_mut().zip(&self.work) {
            *xi += h * wi;
        }
        self.lu.solve_in_place(x);
    }

    pub fn step_vec(&mut self, x: &mut [Complex64]) {
        let mut re: Vec<f64> = x.iter().map(|c| c.re).collect();
        let mut im: Vec<f64> = x.iter().map(|c| c.im).collect();
        self.step_real(&mut re);
        self.step_real(&mut im);
        for (k, c) in x.iter_mut().enumerate() {
            *c = Complex64::new(re[k], im[k]);
        }
    }
}

/// Solves `(I - dt/2 A_h) U+ = (I + dt/2 A_h) U`.
pub fn step_midpoint(gen: &DiscreteGenerator, state: &GridState, dt: f64) -> Result<GridState> {
    let mut stepper = MidpointStepper::new(gen, dt)?;
    let mut x = gen.state_to_vec(state)?;
    stepper.step_vec(&mut x);
    gen.vec_to_state(&x)
}

/// Default step `h / max wave speed`.
pub fn default_dt(gen: &DiscreteGenerator) -> f64 {
    gen.params.length / gen.n_cells as f64 / gen.params.max_speed()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub graph_norm0: f64,
    pub dt: f64,
    pub steps: usize,
    /// Largest single-step energy increase relative to the initial energy.
    pub max_relative_increase: f64,
    /// Largest trapezoidal mean of `y` or `z` (Dirichlet-Neumann), relative
    /// to the initial amplitude.
    pub max_mean_drift: f64,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max |E(t) - E(0)| / E(0)` over the samples.
    pub fn relative_variation(&self) -> f64 {
        let e0 = self.energies[0];
        if e0 == 0.0 {
            return 0.0;
        }
        self.energies
            .iter()
            .map(|e| (e - e0).abs() / e0)
            .fold(0.0, f64::max)
    }
}

fn half_energy(gen: &DiscreteGenerator, re: &[f64], im: Option<&[f64]>, work: &mut [f64]) -> f64 {
    gen.gram().mul_vec(re, work);
    let mut e: f64 = work.iter().zip(re).map(|(a, b)| a * b).sum();
    if let Some(im) = im {
        gen.gram().mul_vec(im, work);
        e += work.iter().zip(im).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * e
}

fn mean_drift(gen: &DiscreteGenerator, x: &[f64]) -> f64 {
    let n = gen.n_cells;
    let (mut my, mut mz) = (0.0, 0.0);
    for (k, &(i, f)) in gen.dofs().iter().enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 } / n as f64;
        match f {
            crate::discretize::Y => my += w * x[k],
            crate::discretize::Z => mz += w * x[k],
            _ => {}
        }
    }
    f64::max(my.abs(), mz.abs())
}

/// Integrates from `u0` up to `t_final`, recording the energy every `stride`
/// steps (and at the final step). When the profile satisfies the positivity
/// hypothesis a per-step energy increase above `1e-12 E(0)` is an error.
pub fn simulate(
    gen: &DiscreteGenerator,
    u0: &GridState,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<EnergyTrace> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} must be positive")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    gen.check_state(u0)?;
    u0.check_admissible(gen.bc)?;
    let enforce = gen.report.passes();
    let mut stepper = MidpointStepper::new(gen, dt)?;
    let x0 = gen.state_to_vec(u0)?;
    let mut re: Vec<f64> = x0.iter().map(|c| c.re).collect();
    let mut im: Vec<f64> = x0.iter().map(|c| c.im).collect();
    let has_im = im.iter().any(|v| *v != 0.0);
    let mut work = vec![0.0; gen.dim()];
    let amp = u0.max_amplitude().max(f64::MIN_POSITIVE);
    let track_mean = gen.bc == BoundaryConditionKind::DirichletNeumann;

    let energy_of = |re: &[f64], im: &[f64], work: &mut [f64]| {
        half_energy(gen, re, if has_im { Some(im) } else { None }, work)
    };
    let e0 = energy_of(&re, &im, &mut work);
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut trace = EnergyTrace {
        times: vec![0.0],
        energies: vec![e0],
        graph_norm0: graph_norm(u0, gen)?,
        dt,
        steps,
        max_relative_increase: 0.0,
        max_mean_drift: 0.0,
    };
    let mut prev = e0;
    for k in 1..=steps {
        stepper.step_real(&mut re);
        if has_im {
            stepper.step_real(&mut im);
        }
        let e = energy_of(&re, &im, &mut work);
        if !e.is_finite() {
            return Err(Error::NonFinite("energy"));
        }
        if e0 > 0.0 {
            let inc = (e - prev) / e0;
            trace.max_relative_increase = trace.max_relative_increase.max(inc);
            if enforce && inc > 1e-12 {
                return Err(Error::EnergyIncrease {
                    step: k,
                    before: prev,
                    after: e,
                });
            }
        }
        if track_mean {
            let mut d = mean_drift(gen, &re);
            if has_im {
                d = d.max(mean_drift(gen, &im));
            }
            trace.max_mean_drift = trace.max_mean_drift.max(d / amp);
        }
        prev = e;
        if k % stride == 0 || k == steps {
            trace.times.push(k as f64 * dt);
            trace.energies.push(e);
        }
    }
    Ok(trace)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Decay exponent: `E ~ C t^(-p)`.
    pub p: f64,
    pub prefactor: f64,
    pub r2: f64,
    /// Change of the local log-log slope across the window, from a
    /// quadratic fit.
    pub slope_drift: f64,
    /// `false` when the slope drift exceeds half of `max(1, |p|)`.
    pub power_law: bool,
    /// The window contained an exactly vanishing energy; only the positive
    /// prefix was fitted.
    pub truncated: bool,
    pub samples: usize,
}

/// Least-squares fit of `log E` against `log t` over `window`.
pub fn fit_decay_exponent(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("invalid window [{lo}, {hi}]")));
    }
    let mut ts = Vec::new();
    let mut es = Vec::new();
    let mut truncated = false;
    for (&t, &e) in trace.times.iter().zip(&trace.energies) {
        if t < lo || t > hi {
            continue;
        }
        if e <= 0.0 {
            truncated = true;
            break;
        }
        ts.push(t);
        es.push(e);
    }
    if ts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} positive samples in window [{lo}, {hi}], need 10",
            ts.len()
        )));
    }
    let f = loglog_fit(&ts, &es)?;
    let lt: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let le: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let (_, _, c2) = quadratic_fit(&lt, &le)?;
    let span = lt[lt.len() - 1] - lt[0];
    let slope_drift = (2.0 * c2 * span).abs();
    let p = -f.slope;
    Ok(DecayFit {
        p,
        prefactor: f.intercept.exp(),
        r2: f.r2,
        slope_drift,
        power_law: slope_drift <= 0.5 * p.abs().max(1.0),
        truncated,
        samples: ts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::AssemblyOptions;
    use crate::model::{energy, BeamParameters, DampingProfile};
    use std::f64::consts::PI;

    fn trace_of(times: Vec<f64>, f: impl Fn(f64) -> f64) -> EnergyTrace {
        let energies = times.iter().map(|&t| f(t)).collect();
        EnergyTrace {
            times,
            energies,
            graph_norm0: 1.0,
            dt: 1.0,
            steps: 0,
            max_relative_increase: 0.0,
            max_mean_drift: 0.0,
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.5).collect();
        let tr = trace_of(times, |t| if t == 0.0 { 1.0 } else { 5.0 / t });
        let f = fit_decay_exponent(&tr, (10.0, 100.0)).unwrap();
        assert!((f.p - 1.0).abs() < 1e-10 && (f.prefactor - 5.0).abs() < 1e-10);
        assert!(f.power_law && !f.truncated);
    }

    #[test]
    fn exponential_flagged_as_non_power_law() {
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.05).collect();
        let tr = trace_of(times, |t| (-t).exp());
        let f = fit_decay_exponent(&tr, (10.0, 20.0)).unwrap();
        assert!(f.p > 10.0);
        assert!(!f.power_law, "{f:?}");
    }

    #[test]
    fn zero_energy_truncates_window() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let tr = trace_of(times, |t| if t > 60.0 { 0.0 } else { 2.0 / (1.0 + t) });
        let f = fit_decay_exponent(&tr, (10.0, 100.0)).unwrap();
        assert!(f.truncated && f.samples == 51);
        let tr = trace_of((0..5).map(|k| k as f64).collect(), |_| 1.0);
        assert!(matches!(fit_decay_exponent(&tr, (1.0, 4.0)), Err(Error::InsufficientData(_))));
    }

    fn sine_mode(n: usize, k: f64) -> GridState {
        let c = |x: f64| Complex64::new(x, 0.0);
        GridState::from_fn(n, 1.0, move |x| c((k * PI * x).sin()), |_| c(0.0), move |x| c(0.3 * (k * PI * x).cos()), |_| c(0.0))
    }

    #[test]
    fn conservative_midpoint_preserves_energy() {
        let gen = DiscreteGenerator::assemble_with(
            &BeamParameters::unit(),
            &DampingProfile::zero(1.0),
            BoundaryConditionKind::DirichletNeumann,
            64,
            AssemblyOptions::permissive(),
        )
        .unwrap();
        let s0 = sine_mode(64, 2.0);
        let tr = simulate(&gen, &s0, 0.01, 10.0, 100).unwrap();
        assert_eq!(tr.steps, 1000);
        assert!(tr.relative_variation() < 1e-10, "{}", tr.relative_variation());
        let z = GridState::zeros(64, 1.0);
        assert_eq!(step_midpoint(&gen, &z, 0.1).unwrap(), z);
    }

    #[test]
    fn damped_energy_nonincreasing_and_mean_preserved() {
        let gen = DiscreteGenerator::assemble(
            &BeamParameters::unit(),
            &DampingProfile::right_half(1.0),
            BoundaryConditionKind::DirichletNeumann,
            64,
        )
        .unwrap();
        let s0 = sine_mode(64, 1.0);
        let tr = simulate(&gen, &s0, 0.02, 20.0, 10).unwrap();
        assert!(tr.energies.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(tr.energies.last().unwrap() < &(0.9 * tr.energies[0]));
        assert!(tr.max_mean_drift < 1e-12);
        assert!((tr.energies[0] - energy(&s0, &gen.params).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn midpoint_is_second_order_in_time() {
        let gen = DiscreteGenerator::assemble(
            &BeamParameters::unit(),
            &DampingProfile::right_half(1.0),
            BoundaryConditionKind::DirichletNeumann,
            32,
        )
        .unwrap();
        let s0 = sine_mode(32, 1.0);
        let run = |dt: f64, steps: usize| {
            let mut st = MidpointStepper::new(&gen, dt).unwrap();
            let mut x = gen.state_to_vec(&s0).unwrap();
            for _ in 0..steps {
                st.step_vec(&mut x);
            }
            x
        };
        // small steps keep the viscous modes in the asymptotic regime
        let coarse = run(0.002, 100);
        let fine = run(0.001, 200);
        let finer = run(0.0005, 400);
        let d = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let ratio = d(&coarse, &fine) / d(&fine, &finer);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
        // local error of one step against two half steps is third order
        let one = run(2e-4, 1);
        let two = run(1e-4, 2);
        let one_b = run(1e-4, 1);
        let two_b = run(5e-5, 2);
        let r = d(&one, &two) / d(&one_b, &two_b);
        assert!((r - 8.0).abs() < 1.5, "local ratio {r}");
    }
}
