//! Lieb-lattice tight-binding bands.
//!
//! Sites per cell are ordered `(A, B, C)`. Nearest-neighbour hoppings
//! `τ₁, τ₃` connect A–B along x and `τ₂, τ₄` connect A–C along y; `t₃` is the
//! Haldane-like B–C coupling with phase `λ = π/2`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{hermitian_eigenvalues, s1, s1_tilde, s2, s2_tilde, s3, ComplexMatrix3};
use crate::{Error, Result, C64};

/// Above this `‖δk‖·a` the linear expansion is flagged.
pub const EXPANSION_WARNING: f64 = 0.3;

const REGIME_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TBParams {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau4: f64,
    pub t3: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_c: f64,
    pub a: f64,
    pub lambda_phase: f64,
}

impl Default for TBParams {
    fn default() -> Self {
        TBParams {
            tau1: 1.0,
            tau2: 1.0,
            tau3: 1.0,
            tau4: 1.0,
            t3: 0.0,
            mu_a: 0.0,
            mu_b: 0.0,
            mu_c: 0.0,
            a: 1.0,
            lambda_phase: FRAC_PI_2,
        }
    }
}

impl TBParams {
    /// Isotropic hoppings `τ`, NNN amplitude `t₃`, no on-site terms.
    pub fn symmetric(tau: f64, t3: f64) -> Self {
        TBParams {
            tau1: tau,
            tau2: tau,
            tau3: tau,
            tau4: tau,
            t3,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.tau1,
            self.tau2,
            self.tau3,
            self.tau4,
            self.t3,
            self.mu_a,
            self.mu_b,
            self.mu_c,
            self.a,
            self.lambda_phase,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("lattice parameters must be finite".into()));
        }
        if !(self.a > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "lattice constant must be positive (a = {})",
                self.a
            )));
        }
        Ok(())
    }

    fn check_phase(&self) -> Result<()> {
        if (self.lambda_phase - FRAC_PI_2).abs() > 1e-12 {
            return Err(Error::Unsupported(format!(
                "Bloch matrix is implemented for lambda = pi/2 only (got {})",
                self.lambda_phase
            )));
        }
        Ok(())
    }

    /// `K₀ = (π/2a, π/2a)`.
    pub fn dirac_point(&self) -> (f64, f64) {
        (FRAC_PI_2 / self.a, FRAC_PI_2 / self.a)
    }
}

pub fn bloch_hamiltonian(k: (f64, f64), p: &TBParams) -> Result<ComplexMatrix3> {
    p.check_phase()?;
    let (kx, ky) = (p.a * k.0, p.a * k.1);
    let ex = C64::from_polar(1.0, kx);
    let ey = C64::from_polar(1.0, ky);
    let h_ab = ex * p.tau1 + ex.conj() * p.tau3;
    let h_ac = ey * p.tau2 + ey.conj() * p.tau4;
    let h_bc = C64::new(0.0, 4.0 * p.t3 * kx.sin() * ky.sin());
    let inner = ComplexMatrix3([
        [C64::from(-p.mu_a), h_ab, h_ac],
        [h_ab.conj(), C64::from(-p.mu_b), h_bc],
        [h_ac.conj(), h_bc.conj(), C64::from(-p.mu_c)],
    ]);
    Ok(-inner)
}

/// Ascending eigenvalues of the Bloch matrix.
pub fn bands_at(k: (f64, f64), p: &TBParams) -> Result<[f64; 3]> {
    Ok(hermitian_eigenvalues(&bloch_hamiltonian(k, p)?))
}

/// `(E₀, E₊, E₋)` for `τ₁ = τ₃`, `τ₂ = τ₄` and vanishing on-site terms.
pub fn dispersion_regime1(k: (f64, f64), p: &TBParams) -> Result<(f64, f64, f64)> {
    let close = |a: f64, b: f64| (a - b).abs() <= REGIME_TOL;
    if !close(p.tau1, p.tau3) || !close(p.tau2, p.tau4) {
        return Err(Error::RegimeViolation(format!(
            "need tau1 = tau3 and tau2 = tau4 (got {}, {}, {}, {})",
            p.tau1, p.tau2, p.tau3, p.tau4
        )));
    }
    check_mu(p)?;
    let (cx, cy) = ((p.a * k.0).cos(), (p.a * k.1).cos());
    let (sx, sy) = ((p.a * k.0).sin(), (p.a * k.1).sin());
    let e = 2.0
        * (p.tau1 * p.tau1 * cx * cx + p.tau2 * p.tau2 * cy * cy + 4.0 * p.t3 * p.t3 * sx * sx * sy * sy)
            .sqrt();
    Ok((0.0, e, -e))
}

/// `(E₀, E₊, E₋)` for `t₃ = 0` and vanishing on-site terms, with the
/// B–B distance `2a` in the cosine arguments.
pub fn dispersion_regime2(k: (f64, f64), p: &TBParams) -> Result<(f64, f64, f64)> {
    if p.t3.abs() > REGIME_TOL {
        return Err(Error::RegimeViolation(format!("need t3 = 0 (got {})", p.t3)));
    }
    check_mu(p)?;
    let sum = p.tau1 * p.tau1 + p.tau2 * p.tau2 + p.tau3 * p.tau3 + p.tau4 * p.tau4;
    let arg = sum
        + 2.0 * p.tau1 * p.tau3 * (2.0 * p.a * k.0).cos()
        + 2.0 * p.tau2 * p.tau4 * (2.0 * p.a * k.1).cos();
    let e = arg.max(0.0).sqrt();
    Ok((0.0, e, -e))
}

fn check_mu(p: &TBParams) -> Result<()> {
    if [p.mu_a, p.mu_b, p.mu_c].iter().any(|m| m.abs() > REGIME_TOL) {
        return Err(Error::RegimeViolation(format!(
            "need mu_A = mu_B = mu_C = 0 (got {}, {}, {})",
            p.mu_a, p.mu_b, p.mu_c
        )));
    }
    Ok(())
}

/// Linearization of the Bloch matrix at `K₀ + δk`.
pub fn expanded_hamiltonian(dk: (f64, f64), p: &TBParams) -> ComplexMatrix3 {
    s1() * (p.a * (p.tau1 + p.tau3) * dk.0)
        + s2() * (p.a * (p.tau2 + p.tau4) * dk.1)
        + ComplexMatrix3::real_diag([p.mu_a, p.mu_b, p.mu_c])
        + s1_tilde() * (p.tau1 - p.tau3)
        + s2_tilde() * (p.tau2 - p.tau4)
        + s3() * (4.0 * p.t3)
}

/// Message when `‖δk‖·a` exceeds [`EXPANSION_WARNING`].
pub fn expansion_warning(dk: (f64, f64), p: &TBParams) -> Option<String> {
    let size = dk.0.hypot(dk.1) * p.a;
    (size > EXPANSION_WARNING)
        .then(|| format!("|dk|a = {size} is outside the linear regime (> {EXPANSION_WARNING})"))
}

/// Sorted bands on an `nk × nk` grid over `[−π/2a, π/2a]²`, row-major in
/// `k_x` (endpoints included).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandSurface {
    pub nk: usize,
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub bands: Vec<[f64; 3]>,
}

impl BandSurface {
    pub fn k_point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.kx[i], self.ky[j])
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; 3] {
        self.bands[i * self.nk + j]
    }

    /// `(min, max)` of band `b` (0 = lowest).
    pub fn band_range(&self, b: usize) -> (f64, f64) {
        self.bands.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e[b]), hi.max(e[b]))
        })
    }

    /// Middle band within `tol` of zero at every point.
    pub fn has_zero_flat_band(&self, tol: f64) -> bool {
        let (lo, hi) = self.band_range(1);
        lo >= -tol && hi <= tol
    }
}

fn axis(nk: usize, a: f64) -> Vec<f64> {
    let half = FRAC_PI_2 / a;
    (0..nk)
        .map(|i| {
            if i + 1 == nk {
                half
            } else {
                -half + (PI / a) * i as f64 / (nk - 1) as f64
            }
        })
        .collect()
}

pub fn band_scan(p: &TBParams, nk: usize) -> Result<BandSurface> {
    p.validate()?;
    p.check_phase()?;
    if nk < 2 {
        return Err(Error::InvalidParameters(format!("nk must be at least 2 (got {nk})")));
    }
    let kx = axis(nk, p.a);
    let ky = kx.clone();
    let mut bands = vec![[0.0; 3]; nk * nk];
    bands
        .par_chunks_mut(nk)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            for (j, out) in row.iter_mut().enumerate() {
                *out = bands_at((kx[i], ky[j]), p)?;
            }
            Ok(())
        })?;
    Ok(BandSurface { nk, kx, ky, bands })
}
