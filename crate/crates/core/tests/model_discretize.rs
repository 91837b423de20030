use std::f64::consts::PI;

use kvbeam::model::{dissipation_rate, energy, validate_hypothesis};
use kvbeam::{
    build_blowup_pair_on, AssemblyOptions, BeamParameters, BoundaryConditionKind, Complex64, DampingProfile,
    DiscreteGenerator, GridState,
};
use proptest::prelude::*;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random admissible state built from a few sine/cosine modes.
fn state(n: usize, coef: &[f64; 8], bc: BoundaryConditionKind) -> GridState {
    let c = *coef;
    let mut s = GridState::from_fn(
        n,
        1.0,
        move |x| cx(c[0] * (PI * x).sin(), c[1] * (2.0 * PI * x).sin()),
        move |x| cx(c[2] * (3.0 * PI * x).sin(), 0.0),
        move |x| match bc {
            BoundaryConditionKind::FullyDirichlet => cx(c[4] * (PI * x).sin(), c[5] * (2.0 * PI * x).sin()),
            _ => cx(c[4] * (PI * x).cos(), c[5] * (2.0 * PI * x).cos()),
        },
        move |x| match bc {
            BoundaryConditionKind::FullyDirichlet => cx(c[6] * (4.0 * PI * x).sin(), c[7] * x * (1.0 - x)),
            _ => cx(c[6] * (3.0 * PI * x).cos(), c[7] * x * x),
        },
    );
    s.u[0] = cx(0.0, 0.0);
    s.u[n] = cx(0.0, 0.0);
    s.v[0] = cx(0.0, 0.0);
    s.v[n] = cx(0.0, 0.0);
    if bc == BoundaryConditionKind::DirichletNeumann {
        s.remove_means();
    } else {
        for w in [&mut s.y, &mut s.z] {
            w[0] = cx(0.0, 0.0);
            w[n] = cx(0.0, 0.0);
        }
    }
    s
}

fn bc_strategy() -> impl Strategy<Value = BoundaryConditionKind> {
    prop_oneof![
        Just(BoundaryConditionKind::FullyDirichlet),
        Just(BoundaryConditionKind::DirichletNeumann)
    ]
}

fn params_strategy() -> impl Strategy<Value = BeamParameters> {
    (0.2..5.0f64, 0.2..5.0f64, 0.2..5.0f64, 0.2..5.0f64)
        .prop_map(|(r1, r2, k1, k2)| BeamParameters::new(r1, r2, k1, k2, 1.0).unwrap())
}

fn gen(params: &BeamParameters, profile: &DampingProfile, bc: BoundaryConditionKind, n: usize) -> DiscreteGenerator {
    DiscreteGenerator::assemble_with(params, profile, bc, n, AssemblyOptions::permissive()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_quadratic(coef in prop::array::uniform8(-1.0..1.0f64), re in -3.0..3.0f64, im in -3.0..3.0f64,
                           p in params_strategy(), bc in bc_strategy()) {
        let s = state(40, &coef, bc);
        let a = cx(re, im);
        let e = energy(&s, &p).unwrap();
        let ea = energy(&s.scale(a), &p).unwrap();
        prop_assert!((ea - a.norm_sqr() * e).abs() <= 1e-12 * (1.0 + ea.abs()));
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn dissipation_nonpositive(coef in prop::array::uniform8(-1.0..1.0f64), d in 0.0..4.0f64, alpha in 0.0..0.9f64) {
        let s = state(32, &coef, BoundaryConditionKind::DirichletNeumann);
        let prof = DampingProfile::piecewise(d, alpha, 1.0);
        prop_assert!(dissipation_rate(&s, &prof).unwrap() <= 0.0);
    }

    #[test]
    fn inner_is_twice_energy(coef in prop::array::uniform8(-1.0..1.0f64), p in params_strategy(), bc in bc_strategy()) {
        let s = state(24, &coef, bc);
        let g = gen(&p, &DampingProfile::global(1.0, 1.0), bc, 24);
        let ip = g.inner(&s, &s).unwrap();
        let e = energy(&s, &p).unwrap();
        prop_assert!((ip.re - 2.0 * e).abs() <= 1e-12 * (1.0 + e));
        prop_assert!(ip.im.abs() <= 1e-12 * (1.0 + e));
    }

    #[test]
    fn placements_validate(d0 in 0.01..10.0f64, alpha in 0.0..0.95f64, width in 0.01..1.0f64) {
        let p = BeamParameters::unit();
        let beta = (alpha + width).min(1.0);
        prop_assume!(beta > alpha);
        let rep = validate_hypothesis(&DampingProfile::piecewise(d0, alpha, beta), &p, 256).unwrap();
        prop_assert!(rep.passes(), "{:?}", rep.violations);
        let rep = validate_hypothesis(&DampingProfile::global(d0, 1.0), &p, 256).unwrap();
        prop_assert!(rep.passes());
    }

    #[test]
    fn conservative_generator_is_skew(coef in prop::array::uniform8(-1.0..1.0f64), coef2 in prop::array::uniform8(-1.0..1.0f64),
                                      p in params_strategy(), bc in bc_strategy()) {
        let g = gen(&p, &DampingProfile::zero(1.0), bc, 30);
        let a = state(30, &coef, bc);
        let b = state(30, &coef2, bc);
        let lhs = g.inner(&g.apply(&a).unwrap(), &b).unwrap();
        let rhs = g.inner(&a, &g.apply(&b).unwrap()).unwrap();
        let scale = 1.0 + lhs.norm() + rhs.norm();
        prop_assert!((lhs + rhs).norm() <= 1e-10 * scale, "{lhs} {rhs}");
    }

    #[test]
    fn damped_generator_is_dissipative(coef in prop::array::uniform8(-1.0..1.0f64), p in params_strategy(),
                                       bc in bc_strategy(), d in 0.1..3.0f64, alpha in 0.0..0.8f64) {
        let prof = DampingProfile::piecewise(d, alpha, 1.0);
        let g = gen(&p, &prof, bc, 32);
        let s = state(32, &coef, bc);
        let re = g.inner(&g.apply(&s).unwrap(), &s).unwrap().re;
        let diss = dissipation_rate(&s, &prof).unwrap();
        prop_assert!(re <= 1e-12);
        prop_assert!((re - diss).abs() <= 1e-9 * (1.0 + diss.abs()), "{re} vs {diss}");
    }

    #[test]
    fn generator_is_linear(coef in prop::array::uniform8(-1.0..1.0f64), coef2 in prop::array::uniform8(-1.0..1.0f64),
                           a in -2.0..2.0f64, b in -2.0..2.0f64, bc in bc_strategy()) {
        let g = gen(&BeamParameters::unit(), &DampingProfile::right_half(1.0), bc, 20);
        let x = state(20, &coef, bc);
        let y = state(20, &coef2, bc);
        let (ca, cb) = (cx(a, 0.3), cx(-0.2, b));
        let lhs = g.apply(&x.combine(ca, &y, cb).unwrap()).unwrap();
        let rhs = g.apply(&x).unwrap().combine(ca, &g.apply(&y).unwrap(), cb).unwrap();
        for (p, q) in lhs.fields().iter().zip(rhs.fields().iter()) {
            for (u, v) in p.iter().zip(q.iter()) {
                prop_assert!((u - v).norm() <= 1e-9 * (1.0 + v.norm()));
            }
        }
    }

    #[test]
    fn matrix_matches_matrix_free(coef in prop::array::uniform8(-1.0..1.0f64), bc in bc_strategy()) {
        let g = gen(&BeamParameters::new(2.0, 1.0, 3.0, 0.5, 1.0).unwrap(), &DampingProfile::right_half(0.7), bc, 16);
        let s = state(16, &coef, bc);
        let x = g.state_to_vec(&s).unwrap();
        let mut y = vec![cx(0.0, 0.0); x.len()];
        g.apply_vec(&x, &mut y);
        let direct = g.state_to_vec(&g.apply(&s).unwrap()).unwrap();
        for (u, v) in y.iter().zip(&direct) {
            prop_assert!((u - v).norm() <= 1e-10 * (1.0 + v.norm()));
        }
        let ip = g.inner_vec(&x, &x);
        prop_assert!((ip - g.inner(&s, &s).unwrap()).norm() <= 1e-12 * (1.0 + ip.norm()));
    }
}

#[test]
fn blowup_pair_action_converges_second_order() {
    // The residual of the discrete action against the closed form should
    // fall like h^2 at a fixed mode.
    let p = BeamParameters::unit();
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let g = DiscreteGenerator::assemble(&p, &DampingProfile::global(1.0, 1.0), BoundaryConditionKind::DirichletNeumann, n)
                .unwrap();
            let pair = build_blowup_pair_on(&g, 3).unwrap();
            let iw = cx(0.0, pair.lambda_n);
            let au = g.apply(&pair.u_n).unwrap();
            let r = pair.u_n.scale(iw).combine(cx(1.0, 0.0), &au, cx(-1.0, 0.0)).unwrap();
            let d = r.combine(cx(1.0, 0.0), &pair.f_n, cx(-1.0, 0.0)).unwrap();
            g.inner(&d, &d).unwrap().re.sqrt()
        })
        .collect();
    let r1 = errs[0] / errs[1];
    let r2 = errs[1] / errs[2];
    assert!((r1 - 4.0).abs() < 0.6 && (r2 - 4.0).abs() < 0.6, "{errs:?}");
}

#[test]
fn graph_norm_of_eigenvector() {
    // On an eigenvector the graph norm is sqrt(1 + |mu|^2) times the norm.
    let g = DiscreteGenerator::assemble(&BeamParameters::unit(), &DampingProfile::right_half(1.0), BoundaryConditionKind::DirichletNeumann, 64)
        .unwrap();
    let pair = kvbeam::spectra::inverse_iteration(&g, cx(0.0, 7.0), &Default::default()).unwrap();
    let s = g.vec_to_state(&pair.vector).unwrap();
    let norm = g.inner(&s, &s).unwrap().re.sqrt();
    let gn = kvbeam::model::graph_norm(&s, &g).unwrap();
    let expect = norm * (1.0 + pair.value.norm_sqr()).sqrt();
    assert!((gn - expect).abs() <= 1e-6 * expect, "{gn} {expect}");
}

#[test]
fn hypothesis_violations_are_reported() {
    let p = BeamParameters::unit();
    let rep = validate_hypothesis(&DampingProfile::zero(1.0), &p, 64).unwrap();
    assert!(!rep.passes());
    let rep = validate_hypothesis(&DampingProfile::piecewise(1.0, 0.5, 1.5), &p, 64).unwrap();
    assert!(!rep.passes());
    assert!(DiscreteGenerator::assemble(&p, &DampingProfile::zero(1.0), BoundaryConditionKind::FullyDirichlet, 16).is_err());
    assert!(DiscreteGenerator::assemble(&p, &DampingProfile::piecewise(-1.0, 0.0, 1.0), BoundaryConditionKind::FullyDirichlet, 16).is_err());
}
