//! Staggered finite-difference realization of the damped Timoshenko generator.
//!
//! Displacements and velocities live on the nodes `x_i = i h`; the strains
//! `u_x + y`, `y_x` and the viscous flux `D z_x` live on cells, with `D`
//! sampled at cell midpoints. Nodal equations use trapezoid weights
//! (one half at the ends), which makes the operator skew-adjoint in the
//! discrete energy inner product up to the viscous term.

use num_complex::Complex64;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::model::{
    cell_strains, validate_hypothesis, BeamParameters, BoundaryConditionKind, DampingProfile,
    GridState, ValidationReport,
};

pub const U: usize = 0;
pub const V: usize = 1;
pub const Y: usize = 2;
pub const Z: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    /// Accept profiles violating the positivity hypothesis (conservative
    /// baselines); negative values are still rejected.
    pub allow_hypothesis_violation: bool,
    pub validation_samples: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            allow_hypothesis_violation: false,
            validation_samples: 1024,
        }
    }
}

impl AssemblyOptions {
    pub fn permissive() -> Self {
        AssemblyOptions {
            allow_hypothesis_violation: true,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteGenerator {
    pub n_cells: usize,
    pub bc: BoundaryConditionKind,
    pub params: BeamParameters,
    pub profile: DampingProfile,
    pub report: ValidationReport,
    d_mid: Vec<f64>,
    index: Vec<Option<usize>>,
    dofs: Vec<(usize, usize)>,
    matrix: BandMatrix<f64>,
    gram: BandMatrix<f64>,
}

fn node_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        0.5
    } else {
        1.0
    }
}

type Form = Vec<(usize, usize, f64)>;

fn shear_form(c: usize, h: f64) -> Form {
    vec![
        (c + 1, U, 1.0 / h),
        (c, U, -1.0 / h),
        (c, Y, 0.5),
        (c + 1, Y, 0.5),
    ]
}

fn bend_form(c: usize, h: f64, field: usize) -> Form {
    vec![(c + 1, field, 1.0 / h), (c, field, -1.0 / h)]
}

impl DiscreteGenerator {
    pub fn assemble(
        params: &BeamParameters,
        profile: &DampingProfile,
        bc: BoundaryConditionKind,
        n_cells: usize,
    ) -> Result<Self> {
        Self::assemble_with(params, profile, bc, n_cells, AssemblyOptions::default())
    }

    pub fn assemble_with(
        params: &BeamParameters,
        profile: &DampingProfile,
        bc: BoundaryConditionKind,
        n_cells: usize,
        opts: AssemblyOptions,
    ) -> Result<Self> {
        if n_cells < 8 {
            return Err(Error::UnderResolved(format!("n_cells = {n_cells} < 8")));
        }
        let params = BeamParameters::new(params.rho1, params.rho2, params.k1, params.k2, params.length)?;
        let report = validate_hypothesis(profile, &params, opts.validation_samples)?;
        if !report.passes() && !opts.allow_hypothesis_violation {
            return Err(Error::HypothesisViolated(format!("{:?}", report.violations)));
        }
        let n = n_cells;
        let h = params.length / n as f64;
        let d_mid: Vec<f64> = (0..n).map(|c| profile.eval((c as f64 + 0.5) * h)).collect();
        if let Some(c) = d_mid.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidProfile(format!(
                "D = {} at x = {}",
                d_mid[c],
                (c as f64 + 0.5) * h
            )));
        }
        let fixed = |i: usize, f: usize| {
            let end = i == 0 || i == n;
            match f {
                U | V => end,
                _ => end && bc == BoundaryConditionKind::FullyDirichlet,
            }
        };
        let mut index = vec![None; 4 * (n + 1)];
        let mut dofs = Vec::new();
        for i in 0..=n {
            for f in 0..4 {
                if !fixed(i, f) {
                    index[4 * i + f] = Some(dofs.len());
                    dofs.push((i, f));
                }
            }
        }
        let mut gen = DiscreteGenerator {
            n_cells,
            bc,
            params,
            profile: profile.clone(),
            report,
            d_mid,
            index,
            dofs,
            matrix: BandMatrix::zeros(0, 0, 0),
            gram: BandMatrix::zeros(0, 0, 0),
        };
        let (rows, gram_entries) = gen.entries();
        gen.matrix = gen.to_band(&rows);
        gen.gram = gen.to_band(&gram_entries);
        Ok(gen)
    }

    fn h(&self) -> f64 {
        self.params.length / self.n_cells as f64
    }

    fn entries(&self) -> (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>) {
        let n = self.n_cells;
        let h = self.h();
        let p = &self.params;
        let mut a = Vec::new();
        let push_form = |a: &mut Vec<(usize, usize, f64)>, row: usize, form: &Form, scale: f64| {
            for &(node, f, coef) in form {
                if let Some(col) = self.index[4 * node + f] {
                    a.push((row, col, scale * coef));
                }
            }
        };
        for (row, &(i, f)) in self.dofs.iter().enumerate() {
            let w = node_weight(i, n);
            match f {
                U => push_form(&mut a, row, &vec![(i, V, 1.0)], 1.0),
                Y => push_form(&mut a, row, &vec![(i, Z, 1.0)], 1.0),
                V => {
                    let s = p.k1 / (p.rho1 * w * h);
                    if i < n {
                        push_form(&mut a, row, &shear_form(i, h), s);
                    }
                    if i > 0 {
                        push_form(&mut a, row, &shear_form(i - 1, h), -s);
                    }
                }
                _ => {
                    let s = 1.0 / (p.rho2 * w * h);
                    if i < n {
                        push_form(&mut a, row, &bend_form(i, h, Y), s * p.k2);
                        push_form(&mut a, row, &bend_form(i, h, Z), s * self.d_mid[i]);
                        push_form(&mut a, row, &shear_form(i, h), -s * p.k1 * h * 0.5);
                    }
                    if i > 0 {
                        push_form(&mut a, row, &bend_form(i - 1, h, Y), -s * p.k2);
                        push_form(&mut a, row, &bend_form(i - 1, h, Z), -s * self.d_mid[i - 1]);
                        push_form(&mut a, row, &shear_form(i - 1, h), -s * p.k1 * h * 0.5);
                    }
                }
            }
        }
        let mut g = Vec::new();
        for (row, &(i, f)) in self.dofs.iter().enumerate() {
            let w = node_weight(i, n) * h;
            match f {
                V => g.push((row, row, p.rho1 * w)),
                Z => g.push((row, row, p.rho2 * w)),
                _ => {}
            }
        }
        for c in 0..n {
            for (form, k) in [(shear_form(c, h), p.k1), (bend_form(c, h, Y), p.k2)] {
                let active: Vec<(usize, f64)> = form
                    .iter()
                    .filter_map(|&(node, f, coef)| self.index[4 * node + f].map(|j| (j, coef)))
                    .collect();
                for &(r, a1) in &active {
                    for &(s, a2) in &active {
                        g.push((r, s, k * h * a1 * a2));
                    }
                }
            }
        }
        (a, g)
    }

    fn to_band(&self, entries: &[(usize, usize, f64)]) -> BandMatrix<f64> {
        let mut kl = 0;
        let mut ku = 0;
        for &(r, c, _) in entries {
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        let mut m = BandMatrix::zeros(self.dofs.len(), kl, ku);
        for &(r, c, v) in entries {
            m.add(r, c, v);
        }
        m
    }

    /// Number of unconstrained unknowns.
    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    /// `(node, field)` of every unknown, fields numbered `u, v, y, z`.
    pub fn dofs(&self) -> &[(usize, usize)] {
        &self.dofs
    }

    pub fn damping_at_cells(&self) -> &[f64] {
        &self.d_mid
    }

    /// Explicit band matrix of the generator on the unknowns.
    pub fn matrix(&self) -> &BandMatrix<f64> {
        &self.matrix
    }

    /// Gram matrix `G` of the energy inner product: `<a, b> = b^H G a`.
    pub fn gram(&self) -> &BandMatrix<f64> {
        &self.gram
    }

    pub fn check_state(&self, s: &GridState) -> Result<()> {
        if s.n_cells != self.n_cells {
            return Err(Error::DimensionMismatch {
                expected: self.n_cells,
                found: s.n_cells,
            });
        }
        s.check_shape()
    }

    pub fn state_to_vec(&self, s: &GridState) -> Result<Vec<Complex64>> {
        self.check_state(s)?;
        let f = s.fields();
        Ok(self.dofs.iter().map(|&(i, k)| f[k][i]).collect())
    }

    pub fn vec_to_state(&self, x: &[Complex64]) -> Result<GridState> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut s = GridState::zeros(self.n_cells, self.params.length);
        for (&(i, k), &val) in self.dofs.iter().zip(x) {
            match k {
                U => s.u[i] = val,
                V => s.v[i] = val,
                Y => s.y[i] = val,
                _ => s.z[i] = val,
            }
        }
        Ok(s)
    }

    /// `A_h` applied to a grid state (matrix-free); outputs at constrained
    /// nodes are zero.
    pub fn apply(&self, s: &GridState) -> Result<GridState> {
        self.check_state(s)?;
        let n = self.n_cells;
        let h = self.h();
        let p = &self.params;
        let mut shear = vec![Complex64::new(0.0, 0.0); n];
        let mut flux = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            let (sh, b) = cell_strains(s, c, h);
            shear[c] = sh;
            flux[c] = p.k2 * b + self.d_mid[c] * (s.z[c + 1] - s.z[c]) / h;
        }
        let mut out = GridState::zeros(n, p.length);
        for i in 0..=n {
            let w = node_weight(i, n) * h;
            let right = if i < n { (shear[i], flux[i]) } else { Default::default() };
            let left = if i > 0 { (shear[i - 1], flux[i - 1]) } else { Default::default() };
            out.u[i] = s.v[i];
            out.y[i] = s.z[i];
            out.v[i] = p.k1 * (right.0 - left.0) / (p.rho1 * w);
            out.z[i] = (right.1 - left.1 - 0.5 * p.k1 * h * (right.0 + left.0)) / (p.rho2 * w);
        }
        for &i in &[0, n] {
            out.u[i] = Complex64::new(0.0, 0.0);
            out.v[i] = Complex64::new(0.0, 0.0);
            if self.bc == BoundaryConditionKind::FullyDirichlet {
                out.y[i] = Complex64::new(0.0, 0.0);
                out.z[i] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(out)
    }

    /// Discrete energy inner product `<a, b>` (linear in `a`).
    pub fn inner(&self, a: &GridState, b: &GridState) -> Result<Complex64> {
        self.check_state(a)?;
        self.check_state(b)?;
        let n = self.n_cells;
        let h = self.h();
        let p = &self.params;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let w = node_weight(i, n);
            acc += w * (p.rho1 * a.v[i] * b.v[i].conj() + p.rho2 * a.z[i] * b.z[i].conj());
        }
        for c in 0..n {
            let (sa, ba) = cell_strains(a, c, h);
            let (sb, bb) = cell_strains(b, c, h);
            acc += p.k1 * sa * sb.conj() + p.k2 * ba * bb.conj();
        }
        Ok(acc * h)
    }

    /// `y = A x` on unknown vectors.
    pub fn apply_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        let xr: Vec<f64> = x.iter().map(|c| c.re).collect();
        let xi: Vec<f64> = x.iter().map(|c| c.im).collect();
        let mut yr = vec![0.0; x.len()];
        let mut yi = vec![0.0; x.len()];
        self.matrix.mul_vec(&xr, &mut yr);
        self.matrix.mul_vec(&xi, &mut yi);
        for k in 0..x.len() {
            y[k] = Complex64::new(yr[k], yi[k]);
        }
    }

    /// `b^H G a` on unknown vectors.
    pub fn inner_vec(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let g = self.gram.map(|v| Complex64::new(v, 0.0));
        let mut ga = vec![Complex64::new(0.0, 0.0); a.len()];
        g.mul_vec(a, &mut ga);
        ga.iter().zip(b).map(|(p, q)| p * q.conj()).sum()
    }

    /// Projects onto the zero-mean subspace (Dirichlet-Neumann only; the
    /// identity otherwise). The subspace is invariant under `A_h`.
    pub fn project_vec(&self, x: &mut [Complex64]) {
        if self.bc != BoundaryConditionKind::DirichletNeumann {
            return;
        }
        let n = self.n_cells;
        let mut my = Complex64::new(0.0, 0.0);
        let mut mz = Complex64::new(0.0, 0.0);
        for (k, &(i, f)) in self.dofs.iter().enumerate() {
            let w = node_weight(i, n) / n as f64;
            match f {
                Y => my += w * x[k],
                Z => mz += w * x[k],
                _ => {}
            }
        }
        for (k, &(_, f)) in self.dofs.iter().enumerate() {
            match f {
                Y => x[k] -= my,
                Z => x[k] -= mz,
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dissipation_rate, energy, graph_norm};
    use rand_chacha::rand_core::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn uni(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_state(gen: &DiscreteGenerator, seed: u64) -> GridState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Complex64> = (0..gen.dim())
            .map(|_| Complex64::new(uni(&mut rng), uni(&mut rng)))
            .collect();
        gen.vec_to_state(&x).unwrap()
    }

    fn params() -> BeamParameters {
        BeamParameters::new(1.3, 0.7, 2.1, 0.9, 1.0).unwrap()
    }

    #[test]
    fn conservative_operator_is_skew() {
        for bc in [BoundaryConditionKind::FullyDirichlet, BoundaryConditionKind::DirichletNeumann] {
            let gen = DiscreteGenerator::assemble_with(&params(), &DampingProfile::zero(1.0), bc, 40, AssemblyOptions::permissive())
                .unwrap();
            for seed in 0..5 {
                let s = random_state(&gen, seed);
                let au = gen.apply(&s).unwrap();
                let r = gen.inner(&au, &s).unwrap().re;
                assert!(r.abs() <= 1e-12 * gen.inner(&s, &s).unwrap().re, "{bc}: {r}");
            }
        }
    }

    #[test]
    fn zero_profile_rejected_without_flag() {
        let r = DiscreteGenerator::assemble(&params(), &DampingProfile::zero(1.0), BoundaryConditionKind::FullyDirichlet, 16);
        assert!(matches!(r, Err(Error::HypothesisViolated(_))));
        let r = DiscreteGenerator::assemble(&params(), &DampingProfile::global(1.0, 1.0), BoundaryConditionKind::FullyDirichlet, 4);
        assert!(matches!(r, Err(Error::UnderResolved(_))));
    }

    #[test]
    fn dissipation_identity_is_exact() {
        let prof = DampingProfile::piecewise(0.8, 0.3, 0.7);
        for bc in [BoundaryConditionKind::FullyDirichlet, BoundaryConditionKind::DirichletNeumann] {
            let gen = DiscreteGenerator::assemble(&params(), &prof, bc, 50).unwrap();
            for seed in 10..15 {
                let s = random_state(&gen, seed);
                let r = gen.inner(&gen.apply(&s).unwrap(), &s).unwrap().re;
                let d = dissipation_rate(&s, &prof).unwrap();
                assert!(r <= 1e-12 * gen.inner(&s, &s).unwrap().re);
                assert!((r - d).abs() <= 1e-12 * d.abs().max(1.0));
            }
        }
    }

    #[test]
    fn matrix_and_matrix_free_agree() {
        let prof = DampingProfile::right_half(1.0);
        for bc in [BoundaryConditionKind::FullyDirichlet, BoundaryConditionKind::DirichletNeumann] {
            let gen = DiscreteGenerator::assemble(&params(), &prof, bc, 24).unwrap();
            let s = random_state(&gen, 3);
            let x = gen.state_to_vec(&s).unwrap();
            let mut y = vec![c(0.0); x.len()];
            gen.apply_vec(&x, &mut y);
            let direct = gen.state_to_vec(&gen.apply(&s).unwrap()).unwrap();
            for (p, q) in y.iter().zip(&direct) {
                assert!((p - q).norm() < 1e-9 * (1.0 + q.norm()));
            }
            let t = random_state(&gen, 4);
            let g1 = gen.inner(&s, &t).unwrap();
            let g2 = gen.inner_vec(&x, &gen.state_to_vec(&t).unwrap());
            assert!((g1 - g2).norm() < 1e-12 * g1.norm().max(1.0));
        }
    }

    #[test]
    fn inner_is_twice_energy_and_conjugate_symmetric() {
        let gen = DiscreteGenerator::assemble(&params(), &DampingProfile::global(1.0, 1.0), BoundaryConditionKind::DirichletNeumann, 30).unwrap();
        let a = random_state(&gen, 21);
        let b = random_state(&gen, 22);
        let e = energy(&a, &gen.params).unwrap();
        assert!((gen.inner(&a, &a).unwrap().re - 2.0 * e).abs() <= 1e-12 * e);
        let ab = gen.inner(&a, &b).unwrap();
        let ba = gen.inner(&b, &a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-13 * ab.norm().max(1.0));
    }

    #[test]
    fn sine_modes_orthogonal_in_velocity() {
        let gen = DiscreteGenerator::assemble(&BeamParameters::unit(), &DampingProfile::global(1.0, 1.0), BoundaryConditionKind::FullyDirichlet, 64).unwrap();
        let mode = |k: f64| GridState::from_fn(64, 1.0, |_| c(0.0), move |x| c((k * PI * x).sin()), |_| c(0.0), |_| c(0.0));
        for (j, k) in [(1.0, 2.0), (3.0, 7.0), (5.0, 6.0)] {
            assert!(gen.inner(&mode(j), &mode(k)).unwrap().norm() < 1e-12);
        }
        assert!((gen.inner(&mode(3.0), &mode(3.0)).unwrap().re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn velocity_only_structure() {
        let gen = DiscreteGenerator::assemble(&params(), &DampingProfile::global(1.0, 1.0), BoundaryConditionKind::DirichletNeumann, 32).unwrap();
        let mut s = random_state(&gen, 5);
        s.v.iter_mut().for_each(|w| *w = c(0.0));
        s.z.iter_mut().for_each(|w| *w = c(0.0));
        let out = gen.apply(&s).unwrap();
        assert!(out.u.iter().chain(&out.y).all(|w| w.norm() == 0.0));
        let zero = GridState::zeros(32, 1.0);
        assert!(gen.apply(&zero).unwrap().max_amplitude() == 0.0);
        assert!(gen.apply(&GridState::zeros(16, 1.0)).is_err());
    }

    #[test]
    fn manufactured_image_converges_at_second_order() {
        // u = sin(pi x), v = sin(2 pi x), y = cos(pi x), z = cos(2 pi x), D = 1 + x
        let p = params();
        let prof = DampingProfile::smooth(|x| 1.0 + x, 0.0, 1.0, 1.0);
        let exact = |x: f64| {
            let ux = PI * (PI * x).cos();
            let uxx = -PI * PI * (PI * x).sin();
            let y = (PI * x).cos();
            let yx = -PI * (PI * x).sin();
            let yxx = -PI * PI * (PI * x).cos();
            let zx = -2.0 * PI * (2.0 * PI * x).sin();
            let zxx = -4.0 * PI * PI * (2.0 * PI * x).cos();
            let d = 1.0 + x;
            let vt = p.k1 / p.rho1 * (uxx + yx);
            let zt = (p.k2 * yxx + d * zxx + zx - p.k1 * (ux + y)) / p.rho2;
            (vt, zt)
        };
        let mut errs = Vec::new();
        for n in [40, 80, 160] {
            let gen = DiscreteGenerator::assemble(&p, &prof, BoundaryConditionKind::DirichletNeumann, n).unwrap();
            let s = GridState::from_fn(
                n,
                1.0,
                |x| c((PI * x).sin()),
                |x| c((2.0 * PI * x).sin()),
                |x| c((PI * x).cos()),
                |x| c((2.0 * PI * x).cos()),
            );
            let out = gen.apply(&s).unwrap();
            let mut e: f64 = 0.0;
            for i in 1..n {
                let (vt, zt) = exact(s.node(i));
                e = e.max((out.v[i].re - vt).abs()).max((out.z[i].re - zt).abs());
                assert!((out.u[i].re - s.v[i].re).abs() < 1e-14);
            }
            errs.push(e);
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!((r1 - 4.0).abs() < 0.3 && (r2 - 4.0).abs() < 0.3, "{errs:?}");
    }

    #[test]
    fn graph_norm_of_eigen_relation() {
        let gen = DiscreteGenerator::assemble(&params(), &DampingProfile::global(0.3, 1.0), BoundaryConditionKind::DirichletNeumann, 20).unwrap();
        let s = random_state(&gen, 8);
        let au = gen.apply(&s).unwrap();
        let expect = (gen.inner(&s, &s).unwrap().re + gen.inner(&au, &au).unwrap().re).sqrt();
        assert!((graph_norm(&s, &gen).unwrap() - expect).abs() < 1e-12 * expect);
        assert_eq!(graph_norm(&GridState::zeros(20, 1.0), &gen).unwrap(), 0.0);
    }

    #[test]
    fn projection_removes_means() {
        let gen = DiscreteGenerator::assemble(&params(), &DampingProfile::global(1.0, 1.0), BoundaryConditionKind::DirichletNeumann, 20).unwrap();
        let s = random_state(&gen, 9);
        let mut x = gen.state_to_vec(&s).unwrap();
        gen.project_vec(&mut x);
        let t = gen.vec_to_state(&x).unwrap();
        assert!(t.check_admissible(BoundaryConditionKind::DirichletNeumann).is_ok());
        // invariance of the zero-mean subspace
        let at = gen.apply(&t).unwrap();
        assert!(at.trapezoid_mean(&at.y).norm() < 1e-12 * at.max_amplitude());
        assert!(at.trapezoid_mean(&at.z).norm() < 1e-11 * at.max_amplitude());
    }
}
