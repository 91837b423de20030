use std::f64::consts::PI;

use kvbeam::evolve::default_dt;
use kvbeam::fit::loglog_fit;
use kvbeam::spectra::{EigenvaluePrediction, RootSearch};
use kvbeam::verify::{self, CriterionReport, DecaySettings, Outcome, Suite};
use kvbeam::{
    find_roots, fit_decay_exponent, resolvent_norm_discrete, simulate, validate_hypothesis, AssemblyOptions,
    BoundaryConditionKind, Branch, CaseLabel, Complex64, DiscreteGenerator, GridState, ResolventOptions,
    SpectralConfig,
};
use rayon::prelude::*;

use crate::config::{InitialDatum, RunConfig};
use crate::output::{Cell, Table};
use crate::CliError;

const MAX_STEPS: f64 = 1e8;

fn metadata(cfg: &RunConfig, command: &str) -> Vec<String> {
    vec![
        format!("kvbeam-cli {} (kvbeam {})", env!("CARGO_PKG_VERSION"), kvbeam::VERSION),
        format!("command: {command}"),
        format!("seed: {}", cfg.seed),
        "config:".into(),
        cfg.echo().lines().filter(|l| !l.trim().is_empty()).map(|l| format!("  {l}")).collect::<Vec<_>>().join("\n"),
    ]
}

/// Generator for the configured beam; profiles violating the positivity
/// hypothesis are accepted with a note.
fn generator(cfg: &RunConfig) -> Result<(DiscreteGenerator, Option<String>), CliError> {
    let params = cfg.params()?;
    let profile = cfg.profile()?;
    let report = validate_hypothesis(&profile, &params, 1024).map_err(|e| CliError::Config(format!("damping: {e}")))?;
    let note = (!report.passes()).then(|| format!("hypothesis violated: {:?}", report.violations[0]));
    let gen = DiscreteGenerator::assemble_with(
        &params,
        &profile,
        cfg.bc.into(),
        cfg.grid.n_cells,
        AssemblyOptions::permissive(),
    )
    .map_err(|e| CliError::Config(format!("damping: {e}")))?;
    Ok((gen, note))
}

fn smooth_datum(gen: &DiscreteGenerator) -> GridState {
    let n = gen.n_cells;
    let len = gen.params.length;
    let re = |v: f64| Complex64::new(v, 0.0);
    let dn = gen.bc == BoundaryConditionKind::DirichletNeumann;
    let mut s = GridState::from_fn(
        n,
        len,
        move |x| re((PI * x / len).sin() + 0.25 * (3.0 * PI * x / len).sin()),
        move |x| re(0.5 * (2.0 * PI * x / len).sin()),
        move |x| re(if dn { (PI * x / len).cos() } else { (2.0 * PI * x / len).sin() }),
        move |x| re(if dn { 0.3 * (2.0 * PI * x / len).cos() } else { 0.3 * (PI * x / len).sin() }),
    );
    if dn {
        s.remove_means();
    }
    s
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Table, CliError> {
    let (gen, note) = generator(cfg)?;
    let u0 = match cfg.simulate.initial {
        InitialDatum::Smooth => smooth_datum(&gen),
        InitialDatum::SlowBranch => {
            if gen.bc != BoundaryConditionKind::DirichletNeumann {
                return Err(CliError::Config("slow-branch datum needs bc = dirichlet-neumann".into()));
            }
            let m = cfg.simulate.modes;
            verify::slow_branch_datum(&gen, cfg.coupling()?, (m[0], m[1]))?
        }
    };
    let dt = cfg.simulate.dt.unwrap_or_else(|| default_dt(&gen));
    let steps = cfg.simulate.t_final / dt;
    if steps > MAX_STEPS {
        return Err(CliError::Config(format!(
            "simulate: t_final / dt = {steps:e} steps exceeds the limit {MAX_STEPS:e}"
        )));
    }
    let trace = simulate(&gen, &u0, dt, cfg.simulate.t_final, cfg.simulate.stride)?;
    let mut t = Table::new(vec!["t", "E", "E_t"]);
    t.meta = metadata(cfg, "simulate");
    t.meta.push(format!("dt: {dt:?}"));
    if let Some(n) = note {
        t.meta.push(n);
    }
    for (&time, &e) in trace.times.iter().zip(&trace.energies) {
        t.push(vec![time.into(), e.into(), (e * time).into()]);
    }
    let w = cfg.simulate.window;
    t.footer.push(format!("max_relative_increase: {:e}", trace.max_relative_increase));
    match fit_decay_exponent(&trace, (w[0], w[1])) {
        Ok(f) if f.p.is_finite() && f.prefactor.is_finite() => t.footer.push(format!(
            "fit: p = {:?}, C = {:?}, r2 = {:?}, power_law = {}, window = [{:?}, {:?}]",
            f.p, f.prefactor, f.r2, f.power_law, w[0], w[1]
        )),
        Ok(_) => return Err(CliError::Numerical("non-finite decay fit".into())),
        Err(e) => t.footer.push(format!("fit: unavailable ({e})")),
    }
    Ok(t)
}

fn prediction_cells(p: Option<&EigenvaluePrediction>) -> [Cell; 2] {
    match p {
        Some(p) => [p.lambda.re.into(), p.lambda.im.into()],
        None => [Cell::Empty, Cell::Empty],
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<(Table, bool), CliError> {
    let c = cfg.coupling()?;
    let mut scfg = SpectralConfig::new(c).map_err(|e| CliError::Config(format!("spectrum: {e}")))?;
    if let Some(k) = cfg.spectrum.case {
        scfg = scfg.with_case(CaseLabel::from_number(k).expect("validated"));
    }
    scfg.case().map_err(|e| CliError::Config(format!("spectrum: {e}")))?;
    let mut t = Table::new(vec!["branch", "n", "status", "re", "im", "residual", "error", "pred_re", "pred_im"]);
    t.meta = metadata(cfg, "spectrum");
    t.meta.push(format!("case: {}", scfg.case().map(|k| k.number()).unwrap_or(0)));
    let mut branches = cfg.spectrum.branches.clone();
    branches.sort_unstable();
    branches.dedup();
    let (lo, hi) = (cfg.spectrum.n_min, cfg.spectrum.n_max);
    let mut total = 0;
    let mut resolved = 0;
    for b in branches {
        let branch = Branch::from_index(b).expect("validated");
        let RootSearch { roots, unresolved } = if lo <= hi { find_roots(lo, hi, branch, &scfg) } else { Default::default() };
        let mut rows: Vec<(i64, Vec<Cell>)> = Vec::new();
        for r in &roots {
            let [pr, pi] = prediction_cells(Some(&r.prediction));
            rows.push((
                r.n,
                vec![
                    Cell::Int(b as i64),
                    r.n.into(),
                    "ok".into(),
                    r.lambda.re.into(),
                    r.lambda.im.into(),
                    r.residual.into(),
                    (r.lambda - r.prediction.lambda).norm().into(),
                    pr,
                    pi,
                ],
            ));
        }
        for u in &unresolved {
            let [pr, pi] = prediction_cells(u.prediction.as_ref());
            rows.push((
                u.n,
                vec![Cell::Int(b as i64), u.n.into(), "unresolved".into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, pr, pi],
            ));
            t.footer.push(format!("unresolved branch {b} n {}: {}", u.n, u.reason));
        }
        rows.sort_by_key(|r| r.0);
        total += rows.len();
        resolved += roots.len();
        for (_, r) in rows {
            t.push(r);
        }
    }
    Ok((t, total == 0 || resolved > 0))
}

pub fn cmd_resolvent(cfg: &RunConfig) -> Result<Table, CliError> {
    let (gen, note) = generator(cfg)?;
    let rc = &cfg.resolvent;
    let mut omegas = if rc.omegas.is_empty() {
        let p = &gen.params;
        let seeds: Vec<Complex64> = (rc.modes[0]..=rc.modes[1])
            .map(|n| Complex64::new(0.0, n as f64 * PI * (p.k1 / p.rho1).sqrt() / p.length))
            .collect();
        verify::discrete_frequencies(&gen, &seeds)?
    } else {
        rc.omegas.clone()
    };
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let opts = ResolventOptions {
        tol: rc.tol,
        max_iter: rc.max_iter,
        seed: cfg.seed,
    };
    let records = omegas
        .par_iter()
        .map(|&w| resolvent_norm_discrete(&gen, w, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(vec!["omega", "norm", "iterations", "converged"]);
    t.meta = metadata(cfg, "resolvent");
    if let Some(n) = note {
        t.meta.push(n);
    }
    for r in &records {
        t.push(vec![r.omega.into(), r.norm.into(), r.iterations.into(), r.converged.to_string().into()]);
    }
    let pos: Vec<_> = records.iter().filter(|r| r.omega > 0.0).collect();
    if pos.len() >= 2 {
        let x: Vec<f64> = pos.iter().map(|r| r.omega).collect();
        let y: Vec<f64> = pos.iter().map(|r| r.norm).collect();
        let f = loglog_fit(&x, &y)?;
        if !(f.slope.is_finite() && f.r2.is_finite()) {
            return Err(CliError::Numerical("non-finite growth fit".into()));
        }
        t.footer.push(format!("fit: slope = {:?}, r2 = {:?}", f.slope, f.r2));
    } else {
        t.footer.push("fit: unavailable (fewer than two positive frequencies)".into());
    }
    Ok(t)
}

pub fn selected_suites(cfg: &RunConfig) -> Vec<Suite> {
    let mut out: Vec<Suite> = if cfg.verify.suites.iter().any(|s| s == "all") {
        Suite::ALL.to_vec()
    } else {
        cfg.verify.suites.iter().filter_map(|s| Suite::parse(s)).collect()
    };
    out.sort();
    out.dedup();
    out
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<(Table, Vec<CriterionReport>), CliError> {
    let mut reports = Vec::new();
    for suite in selected_suites(cfg) {
        let r = if suite == Suite::Decay && cfg.verify.use_damping {
            verify::criterion_decay(&DecaySettings {
                profile: Some(cfg.profile()?),
                ..Default::default()
            })
        } else {
            verify::run_suite(suite)
        };
        eprintln!("{}", r.line());
        reports.push(r);
    }
    let mut t = Table::new(vec!["criterion", "suite", "outcome", "check", "value", "bound", "pass"]);
    t.meta = metadata(cfg, "verify");
    for r in &reports {
        let outcome = match &r.outcome {
            Outcome::Pass => "pass".to_string(),
            Outcome::Fail(_) => "fail".to_string(),
            Outcome::NotApplicable(why) => format!("not-applicable ({why})"),
        };
        let head = || vec![Cell::Int(r.id as i64), r.suite.name().into(), outcome.clone().into()];
        if r.checks.is_empty() {
            let mut row = head();
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
            t.push(row);
        }
        for c in &r.checks {
            let mut row = head();
            // a failed measurement may be non-finite; it is reported as text
            let value = if c.value.is_finite() { Cell::Num(c.value) } else { Cell::Text(c.value.to_string()) };
            row.extend([c.name.clone().into(), value, c.bound.clone().into(), c.pass.to_string().into()]);
            t.push(row);
        }
        if let Outcome::Fail(why) = &r.outcome {
            t.footer.push(format!("{} failed: {why}", r.suite));
        }
    }
    Ok((t, reports))
}
