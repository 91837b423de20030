//! Run configuration: TOML document, `KVBEAM_` environment overrides,
//! conversion to core types.

use std::path::Path;

use kvbeam::{BeamParameters, BoundaryConditionKind, DampingProfile};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ENV_PREFIX: &str = "KVBEAM_";

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub bc: BcTag,
    pub beam: BeamConfig,
    pub damping: DampingConfig,
    pub grid: GridConfig,
    pub simulate: SimulateConfig,
    pub spectrum: SpectrumConfig,
    pub resolvent: ResolventConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            bc: BcTag::DirichletNeumann,
            beam: BeamConfig::default(),
            damping: DampingConfig::default(),
            grid: GridConfig::default(),
            simulate: SimulateConfig::default(),
            spectrum: SpectrumConfig::default(),
            resolvent: ResolventConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BcTag {
    FullyDirichlet,
    DirichletNeumann,
}

impl From<BcTag> for BoundaryConditionKind {
    fn from(b: BcTag) -> Self {
        match b {
            BcTag::FullyDirichlet => BoundaryConditionKind::FullyDirichlet,
            BcTag::DirichletNeumann => BoundaryConditionKind::DirichletNeumann,
        }
    }
}

/// Either the equal-speed shortcut `c` (`rho1 = k1 = c^2`, `rho2 = k2 = 1`)
/// or the explicit constants; unset constants default to 1.
#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DampingKindTag {
    /// `d0` on the right half of the beam.
    RightHalf,
    Global,
    /// `d0` on `(alpha, beta]`.
    Piecewise,
    /// Step function from `table`.
    Table,
    Zero,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DampingConfig {
    pub kind: DampingKindTag,
    pub d0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// `[x, D]` breakpoints: `D` holds from `x` to the next breakpoint (the
    /// last one up to `beta`, default `L`).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<[f64; 2]>,
}

impl Default for DampingConfig {
    fn default() -> Self {
        DampingConfig {
            kind: DampingKindTag::RightHalf,
            d0: 1.0,
            alpha: None,
            beta: None,
            table: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_cells: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_cells: 400 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDatum {
    /// Fixed smooth admissible state.
    Smooth,
    /// `2 Re sum n^{-3/2} phi_n` over the slow eigenvectors (equal speeds only).
    SlowBranch,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub t_final: f64,
    /// Defaults to `h / max wave speed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub stride: usize,
    pub window: [f64; 2],
    pub initial: InitialDatum,
    pub modes: [i64; 2],
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            t_final: 100.0,
            dt: None,
            stride: 10,
            window: [10.0, 100.0],
            initial: InitialDatum::Smooth,
            modes: [5, 25],
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Defaults to `sqrt(k1 / k2)` of an equal-speed beam.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub n_min: i64,
    pub n_max: i64,
    pub branches: Vec<u8>,
    /// Forces case 1, 2 or 3 instead of classifying `c`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<u8>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            c: None,
            n_min: 50,
            n_max: 100,
            branches: vec![1, 2],
            case: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventConfig {
    /// Explicit frequencies; when empty the discrete eigenfrequencies nearest
    /// to `i n pi sqrt(k1/rho1) / L` for `n` in `modes` are scanned.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub omegas: Vec<f64>,
    pub modes: [usize; 2],
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        ResolventConfig {
            omegas: Vec::new(),
            modes: [10, 40],
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Suite names, or `all`.
    pub suites: Vec<String>,
    /// Use `[damping]` for the decay suite instead of the half-damped default.
    pub use_damping: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            suites: vec!["identities".into()],
            use_damping: false,
        }
    }
}

/// Reads the file (if any), applies environment overrides and validates.
pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<RunConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            // typed parse first: its errors carry line and field
            toml::from_str::<RunConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    apply_env(&mut doc, env)?;
    let cfg: RunConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// `KVBEAM_SECTION__KEY=value` sets `section.key`; values are parsed as TOML
/// and fall back to plain strings.
pub fn apply_env(doc: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_ascii_lowercase())
            .collect();
        if path.iter().any(|s| s.is_empty()) {
            return Err(CliError::Config(format!("malformed override variable {key}")));
        }
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw.clone()));
        let mut table = &mut *doc;
        for part in &path[..path.len() - 1] {
            let entry = table
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("{key}: `{part}` is not a table")))?;
        }
        table.insert(path[path.len() - 1].clone(), value);
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {v} must be positive and finite")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let b = &self.beam;
        if b.c.is_some() && (b.rho1.is_some() || b.k1.is_some() || b.rho2.is_some() || b.k2.is_some()) {
            return Err(CliError::Config("beam: give either `c` or the constants rho1, rho2, k1, k2".into()));
        }
        for (name, v) in [
            ("beam.c", b.c),
            ("beam.rho1", b.rho1),
            ("beam.rho2", b.rho2),
            ("beam.k1", b.k1),
            ("beam.k2", b.k2),
            ("beam.length", b.length),
            ("spectrum.c", self.spectrum.c),
            ("simulate.dt", self.simulate.dt),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        let d = &self.damping;
        if d.d0 < 0.0 || !d.d0.is_finite() {
            return Err(CliError::Config(format!("damping.d0 = {} must be nonnegative", d.d0)));
        }
        if d.kind == DampingKindTag::Table && d.table.is_empty() {
            return Err(CliError::Config("damping.table is empty".into()));
        }
        if d.table.iter().any(|[x, v]| !x.is_finite() || !v.is_finite() || *v < 0.0) {
            return Err(CliError::Config("damping.table entries must be finite with D >= 0".into()));
        }
        if d.table.windows(2).any(|w| w[0][0] >= w[1][0]) {
            return Err(CliError::Config("damping.table breakpoints must increase".into()));
        }
        if self.grid.n_cells < 4 {
            return Err(CliError::Config(format!("grid.n_cells = {} must be at least 4", self.grid.n_cells)));
        }
        let s = &self.simulate;
        positive("simulate.t_final", s.t_final)?;
        if s.stride == 0 {
            return Err(CliError::Config("simulate.stride must be at least 1".into()));
        }
        if !(s.window[0] > 0.0 && s.window[1] > s.window[0]) {
            return Err(CliError::Config(format!("simulate.window {:?} must satisfy 0 < lo < hi", s.window)));
        }
        if s.modes[0] < 1 || s.modes[1] < s.modes[0] {
            return Err(CliError::Config(format!("simulate.modes {:?} must satisfy 1 <= lo <= hi", s.modes)));
        }
        if self.spectrum.branches.is_empty() || self.spectrum.branches.iter().any(|b| !(1..=2).contains(b)) {
            return Err(CliError::Config("spectrum.branches must list 1 and/or 2".into()));
        }
        if let Some(k) = self.spectrum.case {
            if !(1..=3).contains(&k) {
                return Err(CliError::Config(format!("spectrum.case = {k} must be 1, 2 or 3")));
            }
        }
        let r = &self.resolvent;
        positive("resolvent.tol", r.tol)?;
        if r.max_iter == 0 {
            return Err(CliError::Config("resolvent.max_iter must be at least 1".into()));
        }
        if r.omegas.iter().any(|w| !w.is_finite()) {
            return Err(CliError::Config("resolvent.omegas must be finite".into()));
        }
        if r.omegas.is_empty() && (r.modes[0] < 1 || r.modes[1] <= r.modes[0]) {
            return Err(CliError::Config(format!("resolvent.modes {:?} must satisfy 1 <= lo < hi", r.modes)));
        }
        for name in &self.verify.suites {
            if name != "all" && kvbeam::verify::Suite::parse(name).is_none() {
                return Err(CliError::Config(format!("verify.suites: unknown suite `{name}`")));
            }
        }
        self.params()?;
        Ok(())
    }

    pub fn params(&self) -> Result<BeamParameters, CliError> {
        let b = &self.beam;
        let len = b.length.unwrap_or(1.0);
        let p = match b.c {
            Some(c) => BeamParameters::new(c * c, 1.0, c * c, 1.0, len),
            None => BeamParameters::new(
                b.rho1.unwrap_or(1.0),
                b.rho2.unwrap_or(1.0),
                b.k1.unwrap_or(1.0),
                b.k2.unwrap_or(1.0),
                len,
            ),
        };
        p.map_err(|e| CliError::Config(format!("beam: {e}")))
    }

    pub fn profile(&self) -> Result<DampingProfile, CliError> {
        let d = &self.damping;
        let len = self.params()?.length;
        Ok(match d.kind {
            DampingKindTag::RightHalf => DampingProfile::piecewise(d.d0, 0.5 * len, len),
            DampingKindTag::Global => DampingProfile::global(d.d0, len),
            DampingKindTag::Piecewise => {
                DampingProfile::piecewise(d.d0, d.alpha.unwrap_or(0.0), d.beta.unwrap_or(len))
            }
            DampingKindTag::Zero => DampingProfile::zero(len),
            DampingKindTag::Table => {
                let table = d.table.clone();
                let alpha = d.alpha.unwrap_or(table[0][0]);
                let beta = d.beta.unwrap_or(len);
                let floor = table.iter().map(|e| e[1]).fold(f64::INFINITY, f64::min);
                let eval = move |x: f64| {
                    if x < table[0][0] || x > beta {
                        return 0.0;
                    }
                    let k = table.partition_point(|e| e[0] <= x).max(1);
                    table[k - 1][1]
                };
                DampingProfile::smooth(eval, alpha, beta, floor)
            }
        })
    }

    /// Coupling for the spectral commands: `spectrum.c`, else `sqrt(k1/k2)`
    /// of an equal-speed beam.
    pub fn coupling(&self) -> Result<f64, CliError> {
        if let Some(c) = self.spectrum.c {
            return Ok(c);
        }
        let p = self.params()?;
        if !p.equal_speeds() {
            return Err(CliError::Config(
                "spectral data need equal wave speeds; set spectrum.c or beam.c".into(),
            ));
        }
        Ok(p.coupling())
    }

    /// Effective configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn defaults_validate() {
        let c = load(None, Vec::new()).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.coupling().unwrap(), 1.0);
    }

    #[test]
    fn overrides_nest_and_parse() {
        let c = load(
            None,
            env(&[
                ("KVBEAM_SEED", "7"),
                ("KVBEAM_BEAM__C", "2.5"),
                ("KVBEAM_DAMPING__KIND", "global"),
                ("KVBEAM_SPECTRUM__BRANCHES", "[2]"),
                ("OTHER", "1"),
            ]),
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.beam.c, Some(2.5));
        assert_eq!(c.damping.kind, DampingKindTag::Global);
        assert_eq!(c.spectrum.branches, vec![2]);
        assert!((c.coupling().unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(load(None, env(&[("KVBEAM_GRID__CELLS", "3")])), Err(CliError::Config(_))));
        assert!(matches!(load(None, env(&[("KVBEAM_BOGUS", "3")])), Err(CliError::Config(_))));
        assert!(matches!(load(None, env(&[("KVBEAM_BEAM__K1", "-1")])), Err(CliError::Config(_))));
        assert!(matches!(load(None, env(&[("KVBEAM_SEED__X", "1")])), Err(CliError::Config(_))));
    }

    #[test]
    fn table_profile_is_a_step_function() {
        let mut c = RunConfig::default();
        c.damping.kind = DampingKindTag::Table;
        c.damping.table = vec![[0.25, 1.0], [0.5, 3.0]];
        let p = c.profile().unwrap();
        assert_eq!(p.eval(0.1), 0.0);
        assert_eq!(p.eval(0.3), 1.0);
        assert_eq!(p.eval(0.5), 3.0);
        assert_eq!(p.eval(0.9), 3.0);
        assert_eq!(p.alpha, 0.25);
        assert_eq!(p.d0, 1.0);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.beam.c = Some(3.0);
        c.resolvent.omegas = vec![1.0, 2.0];
        let back: RunConfig = toml::from_str(&c.echo()).unwrap();
        assert_eq!(back, c);
    }
}
