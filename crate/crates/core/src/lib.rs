//! Numerical toolkit for the Timoshenko beam with Kelvin-Voigt damping:
//! a dissipative finite-difference generator, implicit time stepping with
//! energy-decay fitting, the exact characteristic determinant of the
//! half-damped equal-speed beam with its asymptotic eigenvalue branches, and
//! resolvent-growth probes.

pub mod banded;
pub mod ddouble;
pub mod discretize;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod model;
pub mod resolvent;
pub mod spectra;
pub mod verify;

pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use discretize::{AssemblyOptions, DiscreteGenerator};
pub use error::{Error, Result};
pub use evolve::{fit_decay_exponent, simulate, step_midpoint, DecayFit, EnergyTrace, MidpointStepper};
pub use model::{
    dissipation_rate, energy, graph_norm, validate_hypothesis, BeamParameters,
    BoundaryConditionKind, DampingKind, DampingProfile, GridState, ValidationReport,
};
pub use resolvent::{
    blowup_exponent, build_blowup_pair, build_blowup_pair_on, resolvent_growth_scan, resolvent_norm_discrete, BlowupPair,
    ResolventOptions,
};
pub use spectra::{
    asymptotic_f, char_det_scaled, char_matrix, count_zeros, discrete_spectrum_probe, find_roots,
    predict_branch, wavenumbers, Branch, CaseLabel, EigenvaluePrediction, Rect, RootRecord,
    SpectralConfig,
};
