use thiserror::Error;

use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is singular to working precision (det = {det})")]
    SingularMatrix { det: C64 },

    #[error("energy {eps} lies outside the gap (|eps| must be < |m| = {m})")]
    EnergyOutOfRange { eps: f64, m: f64 },

    #[error("seed coefficients are both zero")]
    DegenerateSeed,

    #[error("column {column} carries energy label {label} but the factorization energy is {lambda}")]
    InconsistentLabels {
        column: usize,
        label: String,
        lambda: f64,
    },

    #[error("seed matrix is singular at x = {x} (|det| = {det_abs:e}, threshold {threshold:e})")]
    SingularSeed {
        x: f64,
        det_abs: f64,
        threshold: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("reduction degenerate at x = {x}: |e - V33| = {gap:e} for e = {e}")]
    AlgebraicDegeneracy { e: f64, x: f64, gap: f64 },

    #[error("potential has not reached its asymptote at L = {length} (deviation {deviation:e})")]
    NonAsymptoticPotential { length: f64, deviation: f64 },

    #[error("U'U^-1 has not converged at L = {length} (deviation {deviation:e})")]
    NoAsymptote { length: f64, deviation: f64 },

    #[error("energy {e} is not propagating on the {side} side")]
    EvanescentEnergy { e: f64, side: &'static str },

    #[error("energy {e} is not evanescent on both sides")]
    NotEvanescent { e: f64 },

    #[error("matching function is not real in the (a, i b) gauge (|Im|/|w| = {ratio:e})")]
    ComplexMatching { ratio: f64 },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("parameters violate the dispersion regime: {0}")]
    RegimeViolation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
