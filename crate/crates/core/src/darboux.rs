//! Matrix Darboux transformation `L = ∂ₓ − U′U⁻¹` for the pseudospin-1
//! Dirac operator.
//!
//! `A = U′U⁻¹` is obtained in one of two ways. When every seed column is an
//! exponential polynomial, `det U`, `adj U`, `U′·adj U` and `U″·adj U` are
//! formed symbolically and divided after scaled evaluation; this is exact
//! up to rounding for every `x`, including `|x|` far beyond the range where
//! hyperbolic columns become numerically parallel. Otherwise `U′(x)` is
//! multiplied by `invert3(U(x))` pointwise.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{commutator, invert3, is_hermitian, ComplexMatrix3, Spinor3};
use crate::expoly::{ExpMatrix3, ExpPoly};
use crate::free_model::{DiracModel, EnergyLabel, Jet, SpinorFunction};
use crate::grid::Grid;
use crate::{Error, Result, C64};

/// Minimum of `|det U| / scale` for a seed to count as regular.
pub const REGULARITY_THRESHOLD: f64 = 1e-10;

const LABEL_TOL: f64 = 1e-12;

struct Structured {
    det: ExpPoly,
    adj: ExpMatrix3,
    n1: ExpMatrix3,
    n2: ExpMatrix3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Structured,
    Pointwise,
}

/// `U = (Ψ₁, Ψ₂, Ψ₃)` with `HU = UΛ`, `Λ = diag(λ)`.
#[derive(Clone)]
pub struct SeedMatrix {
    columns: Arc<[SpinorFunction; 3]>,
    lambda: [f64; 3],
    structured: Option<Arc<Structured>>,
}

impl fmt::Debug for SeedMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeedMatrix")
            .field("lambda", &self.lambda)
            .field("route", &self.route())
            .finish()
    }
}

/// Everything the transformation needs at one point.
#[derive(Clone, Copy, Debug)]
pub struct SeedFrame {
    pub x: f64,
    pub det: C64,
    /// `U′U⁻¹`
    pub a: ComplexMatrix3,
    /// `(U′U⁻¹)′ = U″U⁻¹ − A²`
    pub a_prime: ComplexMatrix3,
    pub inverse: ComplexMatrix3,
}

pub fn seed_matrix(
    psi1: SpinorFunction,
    psi2: SpinorFunction,
    psi3: SpinorFunction,
    lambda: [f64; 3],
) -> Result<SeedMatrix> {
    let columns = [psi1, psi2, psi3];
    for (j, (col, &l)) in columns.iter().zip(&lambda).enumerate() {
        let ok = match col.label() {
            EnergyLabel::Energy(e) => (e - l).abs() <= LABEL_TOL * l.abs().max(1.0),
            EnergyLabel::FlatBand => l.abs() <= LABEL_TOL,
        };
        if !ok {
            return Err(Error::InconsistentLabels {
                column: j,
                label: col.label().to_string(),
                lambda: l,
            });
        }
    }
    let structured = match (columns[0].expoly(), columns[1].expoly(), columns[2].expoly()) {
        (Some(a), Some(b), Some(c)) => {
            let u = ExpMatrix3::from_columns(&[a.clone(), b.clone(), c.clone()]);
            let du = u.derivative();
            let ddu = du.derivative();
            let adj = u.adjugate();
            Some(Arc::new(Structured {
                det: u.det(),
                n1: du.mul(&adj),
                n2: ddu.mul(&adj),
                adj,
            }))
        }
        _ => None,
    };
    Ok(SeedMatrix {
        columns: Arc::new(columns),
        lambda,
        structured,
    })
}

impl SeedMatrix {
    pub fn columns(&self) -> &[SpinorFunction; 3] {
        &self.columns
    }

    pub fn lambda(&self) -> [f64; 3] {
        self.lambda
    }

    pub fn route(&self) -> Route {
        if self.structured.is_some() {
            Route::Structured
        } else {
            Route::Pointwise
        }
    }

    /// Forces the pointwise route even for exponential-polynomial seeds.
    pub fn pointwise(mut self) -> Self {
        self.structured = None;
        self
    }

    fn jets(&self, x: f64) -> [Jet; 3] {
        std::array::from_fn(|j| self.columns[j].jet(x))
    }

    pub fn value(&self, x: f64) -> ComplexMatrix3 {
        let j = self.jets(x);
        ComplexMatrix3::from_columns([j[0].value, j[1].value, j[2].value])
    }

    pub fn derivative(&self, x: f64) -> ComplexMatrix3 {
        let j = self.jets(x);
        ComplexMatrix3::from_columns([j[0].d1, j[1].d1, j[2].d1])
    }

    pub fn second_derivative(&self, x: f64) -> ComplexMatrix3 {
        let j = self.jets(x);
        ComplexMatrix3::from_columns([j[0].d2, j[1].d2, j[2].d2])
    }

    /// `(|det U(x)|, |det U(x)| / scale)`; the seed is regular at `x` when
    /// the ratio exceeds [`REGULARITY_THRESHOLD`].
    ///
    /// Structured route: scale is the sum of magnitudes of the surviving
    /// exponential terms of `det U`. Pointwise route: cube of the largest
    /// column norm.
    pub fn regularity(&self, x: f64) -> (f64, f64) {
        match &self.structured {
            Some(s) => {
                let d = s.det.eval_scaled(x);
                let scale = s.det.abs_sum_scaled(x);
                if d.is_zero() || scale.is_zero() {
                    return (0.0, 0.0);
                }
                (d.value().norm(), d.div(&scale).norm())
            }
            None => {
                let u = self.value(x);
                let col = (0..3)
                    .map(|j| u.column(j).norm_sqr().sqrt())
                    .fold(0.0, f64::max);
                let d = u.det().norm();
                if col == 0.0 {
                    return (d, 0.0);
                }
                (d, d / (col * col * col))
            }
        }
    }

    fn singular(&self, x: f64) -> Error {
        let (det_abs, ratio) = self.regularity(x);
        let threshold = if ratio > 0.0 {
            det_abs / ratio * REGULARITY_THRESHOLD
        } else {
            0.0
        };
        Error::SingularSeed {
            x,
            det_abs,
            threshold,
        }
    }

    pub fn frame(&self, x: f64) -> Result<SeedFrame> {
        let (_, ratio) = self.regularity(x);
        if !(ratio > REGULARITY_THRESHOLD) {
            return Err(self.singular(x));
        }
        match &self.structured {
            Some(s) => {
                let d = s.det.eval_scaled(x);
                let quot = |m: &ExpMatrix3| {
                    let v = m.eval_scaled(x);
                    ComplexMatrix3(std::array::from_fn(|i| {
                        std::array::from_fn(|j| v[i][j].div(&d))
                    }))
                };
                let a = quot(&s.n1);
                let a_prime = quot(&s.n2) - a * a;
                Ok(SeedFrame {
                    x,
                    det: d.value(),
                    a,
                    a_prime,
                    inverse: quot(&s.adj),
                })
            }
            None => {
                let jets = self.jets(x);
                let u = ComplexMatrix3::from_columns([jets[0].value, jets[1].value, jets[2].value]);
                let du = ComplexMatrix3::from_columns([jets[0].d1, jets[1].d1, jets[2].d1]);
                let ddu = ComplexMatrix3::from_columns([jets[0].d2, jets[1].d2, jets[2].d2]);
                let inverse = invert3(&u).map_err(|_| self.singular(x))?;
                let a = du * inverse;
                Ok(SeedFrame {
                    x,
                    det: u.det(),
                    a,
                    a_prime: ddu * inverse - a * a,
                    inverse,
                })
            }
        }
    }

    /// `U′(x)U(x)⁻¹`.
    pub fn log_derivative(&self, x: f64) -> Result<ComplexMatrix3> {
        Ok(self.frame(x)?.a)
    }
}

/// `det U(x)` by cofactor expansion of the sampled matrix.
pub fn seed_determinant(u: &SeedMatrix, x: f64) -> C64 {
    u.value(x).det()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub min_abs_det: f64,
    pub argmin: f64,
    /// Smallest `|det U| / scale` seen, and where.
    pub min_ratio: f64,
    pub ratio_argmin: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Grid minimum of `key`, refined on successively finer local grids.
fn refined_min(grid: &Grid, samples: &[(f64, f64)], key: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut worst = 0;
    for (k, s) in samples.iter().enumerate() {
        if !(s.1 >= samples[worst].1) {
            worst = k;
        }
    }
    let (mut best_x, mut best) = samples[worst];
    let h = grid.spacing();
    let mut lo = (best_x - h).max(grid.x_min);
    let mut hi = (best_x + h).min(grid.x_max);
    for _ in 0..10 {
        let sub = 32;
        for k in 0..=sub {
            let x = lo + (hi - lo) * k as f64 / sub as f64;
            let v = key(x);
            if !(v >= best) {
                best_x = x;
                best = v;
            }
        }
        let w = (hi - lo) / sub as f64;
        lo = (best_x - w).max(grid.x_min);
        hi = (best_x + w).min(grid.x_max);
    }
    (best_x, best)
}

/// Samples `|det U|` and the regularity ratio on `grid`, refining around
/// the smallest values.
pub fn regularity_scan(u: &SeedMatrix, grid: &Grid) -> RegularityReport {
    let samples: Vec<(f64, f64, f64)> = grid
        .points()
        .par_iter()
        .map(|&x| {
            let (d, r) = u.regularity(x);
            (x, d, r)
        })
        .collect();
    let dets: Vec<(f64, f64)> = samples.iter().map(|s| (s.0, s.1)).collect();
    let ratios: Vec<(f64, f64)> = samples.iter().map(|s| (s.0, s.2)).collect();
    let (argmin, min_abs_det) = refined_min(grid, &dets, |x| u.regularity(x).0);
    let (ratio_argmin, min_ratio) = refined_min(grid, &ratios, |x| u.regularity(x).1);
    RegularityReport {
        min_abs_det,
        argmin,
        min_ratio,
        ratio_argmin,
        threshold: REGULARITY_THRESHOLD,
        pass: min_ratio > REGULARITY_THRESHOLD,
    }
}

/// `(LΨ)(x) = Ψ′(x) − U′U⁻¹Ψ(x)`.
pub fn apply_intertwiner(u: &SeedMatrix, psi: &SpinorFunction, x: f64) -> Result<Spinor3> {
    let f = u.frame(x)?;
    let j = psi.jet(x);
    Ok(j.d1 - f.a * j.value)
}

/// `Ṽ(x) = V(x) + i·hv·[U′U⁻¹, γ]`.
pub fn transformed_potential(u: &SeedMatrix, base: &DiracModel, x: f64) -> Result<ComplexMatrix3> {
    let f = u.frame(x)?;
    Ok(potential_from_frame(&f, base, x))
}

fn potential_from_frame(f: &SeedFrame, base: &DiracModel, x: f64) -> ComplexMatrix3 {
    base.potential(x) + commutator(&f.a, &base.gamma).scale(C64::new(0.0, base.hv))
}

fn nan_spinor() -> Spinor3 {
    Spinor3([C64::new(f64::NAN, f64::NAN); 3])
}

fn nan_matrix() -> ComplexMatrix3 {
    ComplexMatrix3([[C64::new(f64::NAN, f64::NAN); 3]; 3])
}

/// Column `j` of `(U⁻¹)†`, evaluated without a regularity precheck.
fn missing_state_fn(u: &SeedMatrix, j: usize) -> SpinorFunction {
    let seed = u.clone();
    let label = EnergyLabel::Energy(u.lambda[j]);
    SpinorFunction::new(label, move |x| match seed.frame(x) {
        Ok(f) => {
            let phi = f.inverse.row(j).conj();
            let ad = f.a.adjoint();
            let d1 = -(ad * phi);
            let d2 = -(f.a_prime.adjoint() * phi) - ad * d1;
            Jet { value: phi, d1, d2 }
        }
        Err(_) => Jet {
            value: nan_spinor(),
            d1: nan_spinor(),
            d2: nan_spinor(),
        },
    })
}

/// The three columns of `(U⁻¹)†`, unnormalized; zero modes of `L†` and
/// eigenfunctions of `H̃` at the factorization energies.
pub fn missing_states(u: &SeedMatrix, grid: &Grid) -> Result<[SpinorFunction; 3]> {
    let report = regularity_scan(u, grid);
    if !report.pass {
        return Err(u.singular(report.ratio_argmin));
    }
    Ok(std::array::from_fn(|j| missing_state_fn(u, j)))
}

/// `LΨ` as a function. The mapped function carries no second derivative
/// (its `d2` is NaN).
pub fn map_solution(u: &SeedMatrix, psi: &SpinorFunction) -> SpinorFunction {
    let seed = u.clone();
    let psi = psi.clone();
    SpinorFunction::new(psi.label(), move |x| match seed.frame(x) {
        Ok(f) => {
            let j = psi.jet(x);
            Jet {
                value: j.d1 - f.a * j.value,
                d1: j.d2 - f.a_prime * j.value - f.a * j.d1,
                d2: nan_spinor(),
            }
        }
        Err(_) => Jet {
            value: nan_spinor(),
            d1: nan_spinor(),
            d2: nan_spinor(),
        },
    })
}

/// `‖L(HΨ)(x) − H̃(LΨ)(x)‖∞`.
pub fn intertwining_residual_at(
    base: &DiracModel,
    u: &SeedMatrix,
    psi: &SpinorFunction,
    x: f64,
) -> Result<f64> {
    let f = u.frame(x)?;
    let dv = base.potential_derivative(x).ok_or_else(|| {
        Error::Unsupported("base potential has no analytic derivative".into())
    })?;
    let v = base.potential(x);
    let k = C64::new(0.0, -base.hv);
    let j = psi.jet(x);
    let h_psi = (base.gamma * j.d1) * k + v * j.value;
    let h_psi_d = (base.gamma * j.d2) * k + dv * j.value + v * j.d1;
    let lhs = h_psi_d - f.a * h_psi;
    let l_psi = j.d1 - f.a * j.value;
    let l_psi_d = j.d2 - f.a_prime * j.value - f.a * j.d1;
    let vt = potential_from_frame(&f, base, x);
    let rhs = (base.gamma * l_psi_d) * k + vt * l_psi;
    Ok((lhs - rhs).norm_inf())
}

/// Supremum of [`intertwining_residual_at`] over the grid.
pub fn intertwining_residual(
    base: &DiracModel,
    u: &SeedMatrix,
    psi: &SpinorFunction,
    grid: &Grid,
) -> Result<f64> {
    let r: Result<Vec<f64>> = grid
        .points()
        .par_iter()
        .map(|&x| intertwining_residual_at(base, u, psi, x))
        .collect();
    Ok(r?.into_iter().fold(0.0, f64::max))
}

/// Largest `‖L Ψ_j(x)‖∞` over the seed columns.
pub fn zero_mode_residual(u: &SeedMatrix, x: f64) -> Result<f64> {
    let f = u.frame(x)?;
    Ok(u.columns
        .iter()
        .map(|c| {
            let j = c.jet(x);
            (j.d1 - f.a * j.value).norm_inf()
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HermiticityReport {
    pub max_defect: f64,
    pub location: f64,
    pub index: (usize, usize),
    pub tolerance: f64,
    pub pass: bool,
}

pub fn hermiticity_report(
    u: &SeedMatrix,
    base: &DiracModel,
    grid: &Grid,
    tol: f64,
) -> Result<HermiticityReport> {
    let samples: Result<Vec<(f64, f64, (usize, usize))>> = grid
        .points()
        .par_iter()
        .map(|&x| {
            let v = transformed_potential(u, base, x)?;
            let d = is_hermitian(&v, tol);
            Ok((x, d.max_defect, d.index))
        })
        .collect();
    let samples = samples?;
    let mut worst = samples[0];
    for s in &samples {
        if s.1 > worst.1 {
            worst = *s;
        }
    }
    Ok(HermiticityReport {
        max_defect: worst.1,
        location: worst.0,
        index: worst.2,
        tolerance: tol,
        pass: worst.1 <= tol,
    })
}

/// `H̃` together with the seed and missing states that produced it.
#[derive(Clone)]
pub struct TransformedModel {
    pub model: DiracModel,
    pub seed: SeedMatrix,
    pub missing_states: [SpinorFunction; 3],
}

impl fmt::Debug for TransformedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformedModel")
            .field("seed", &self.seed)
            .finish()
    }
}

/// Builds `H̃` from `base` and `seed`. The potential evaluates to NaN
/// wherever the seed is singular; run [`regularity_scan`] first.
pub fn darboux_transform(base: &DiracModel, seed: SeedMatrix) -> TransformedModel {
    let b = base.clone();
    let s = seed.clone();
    let mut model = DiracModel::new(base.hv, move |x| {
        transformed_potential(&s, &b, x).unwrap_or_else(|_| nan_matrix())
    });
    model.gamma = base.gamma;
    TransformedModel {
        missing_states: std::array::from_fn(|j| missing_state_fn(&seed, j)),
        model,
        seed,
    }
}

/// `∫ₐᵇ ‖Ψ‖² dx` by composite Simpson with at least `n` intervals.
pub fn norm_squared(psi: &SpinorFunction, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let sum: f64 = (0..=n)
        .into_par_iter()
        .map(|k| {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * psi.value(a + h * k as f64).norm_sqr()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    sum * h / 3.0
}

/// `Ψ / ‖Ψ‖` with the norm taken over `[a, b]`.
pub fn normalizer(psi: &SpinorFunction, a: f64, b: f64, n: usize) -> SpinorFunction {
    let norm = norm_squared(psi, a, b, n).sqrt();
    psi.scale(C64::from(1.0 / norm))
}
