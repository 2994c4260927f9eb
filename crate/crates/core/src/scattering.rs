//! Reflection and transmission across a transformed potential.
//!
//! A transmitted right-mover is fixed at `+L` and integrated back to `−L`,
//! where it is split into incoming and reflected channel modes of the local
//! asymptotic problem. Channel weights are fluxes `j = 2·hv·Re(ψ_A* ψ_B)`,
//! so unequal asymptotics on the two sides are handled directly.

use rayon::prelude::*;

use crate::algebra::{hermitian_eigenvalues, s1, ComplexMatrix3};
use crate::cases::CaseModel;
use crate::darboux::SeedMatrix;
use crate::free_model::DiracModel;
use crate::ode::Dopri5;
use crate::spectral::{auto_length, check_asymptotic, reduce_to_two_components};
use crate::{Error, Result, C64};

/// Reported `|r|²` never drops below this.
pub const REFLECTION_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterResult {
    pub energy: f64,
    pub reflection: f64,
    pub transmission: f64,
    /// `U′U⁻¹` at `+L` and `−L`, when a seed is known.
    pub w_plus: Option<ComplexMatrix3>,
    pub w_minus: Option<ComplexMatrix3>,
    /// Asymptotic channel wavenumbers on each side.
    pub k_left: f64,
    pub k_right: f64,
    /// `Im(ψ_A′/ψ_A)` of the scattering state at `−L` and `+L`.
    pub k_local_left: f64,
    pub k_local_right: f64,
    pub length: f64,
}

/// `(U′U⁻¹(−L), U′U⁻¹(+L))` once converged to `1e-8` against `±2L`.
pub fn asymptotic_w(u: &SeedMatrix, length: f64) -> Result<(ComplexMatrix3, ComplexMatrix3)> {
    let minus = u.log_derivative(-length)?;
    let plus = u.log_derivative(length)?;
    let deviation = minus
        .max_diff(&u.log_derivative(-2.0 * length)?)
        .max(plus.max_diff(&u.log_derivative(2.0 * length)?));
    if !(deviation < 1e-8) {
        return Err(Error::NoAsymptote { length, deviation });
    }
    Ok((minus, plus))
}

/// Smallest `|e|` of the non-flat bands of `hv·k·S₁ + V(x)` with `V` frozen
/// at `x` (use `x = ±L` for the asymptotic edge).
pub fn band_edge(model: &DiracModel, x: f64) -> f64 {
    let v = model.potential(x);
    let gamma = s1();
    let scale = v.max_abs().max(1.0) / model.hv;
    let gap = |k: f64| {
        hermitian_eigenvalues(&(gamma * (model.hv * k) + v))
            .iter()
            .map(|e| e.abs())
            .filter(|e| *e > 1e-9 * scale)
            .fold(f64::INFINITY, f64::min)
    };
    let n = 4001;
    let kmax = 20.0 * scale;
    let (mut best_k, mut best) = (0.0, gap(0.0));
    for i in 0..n {
        let k = -kmax + 2.0 * kmax * i as f64 / (n - 1) as f64;
        let g = gap(k);
        if g < best {
            best = g;
            best_k = k;
        }
    }
    let step = 2.0 * kmax / (n - 1) as f64;
    let (mut a, mut b) = (best_k - step, best_k + step);
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if gap(m1) < gap(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    best.min(gap(0.5 * (a + b)))
}

#[derive(Clone, Copy, Debug)]
struct Channel {
    k: [[C64; 2]; 2],
    right: [C64; 2],
    left: [C64; 2],
    j_right: f64,
    j_left: f64,
    wavenumber: f64,
}

fn flux(hv: f64, v: &[C64; 2]) -> f64 {
    2.0 * hv * (v[0].conj() * v[1]).re
}

fn channels(model: &DiracModel, e: f64, x: f64, side: &'static str) -> Result<Channel> {
    let k = reduce_to_two_components(model, e, x)?.k;
    let half_tr = (k[0][0] + k[1][1]) * 0.5;
    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
    let root = (half_tr * half_tr - det).sqrt();
    let lambdas = [half_tr + root, half_tr - root];
    let scale = k.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if lambdas.iter().any(|l| l.re.abs() > 1e-9 * scale || l.im.abs() < 1e-9 * scale) {
        return Err(Error::EvanescentEnergy { e, side });
    }
    let modes = lambdas.map(|l| {
        let a = [k[0][1], l - k[0][0]];
        let b = [l - k[1][1], k[1][0]];
        let v = if a[0].norm_sqr() + a[1].norm_sqr() >= b[0].norm_sqr() + b[1].norm_sqr() {
            a
        } else {
            b
        };
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        ([v[0] / n, v[1] / n], l.im)
    });
    let fl = modes.map(|(v, _)| flux(model.hv, &v));
    let (r, l) = if fl[0] > 0.0 { (0, 1) } else { (1, 0) };
    if !(fl[r] > 0.0 && fl[l] < 0.0) {
        return Err(Error::EvanescentEnergy { e, side });
    }
    Ok(Channel {
        k,
        right: modes[r].0,
        left: modes[l].0,
        j_right: fl[r],
        j_left: fl[l],
        wavenumber: modes[r].1,
    })
}

fn local_wavenumber(k: &[[C64; 2]; 2], y: &[C64; 2]) -> f64 {
    ((k[0][0] * y[0] + k[0][1] * y[1]) / y[0]).im
}

/// `|r|²` and `|t|²` at energy `e` with the potential frozen outside `[−L, L]`.
pub fn reflection_coefficient(model: &DiracModel, e: f64, length: f64) -> Result<ScatterResult> {
    check_asymptotic(model, length, 1e-8)?;
    let minus = channels(model, e, -length, "left")?;
    let plus = channels(model, e, length, "right")?;
    let solver = Dopri5::default();
    let rhs = |x: f64, y: &[C64; 2]| -> Result<[C64; 2]> {
        Ok(reduce_to_two_components(model, e, x)?.rhs(y))
    };
    let y = solver.integrate(rhs, length, plus.right, -length)?;

    // y(−L) = α·right + β·left
    let (r, l) = (minus.right, minus.left);
    let det = r[0] * l[1] - r[1] * l[0];
    let alpha = (y[0] * l[1] - y[1] * l[0]) / det;
    let beta = (r[0] * y[1] - r[1] * y[0]) / det;
    let incoming = alpha.norm_sqr() * minus.j_right;
    let reflection = beta.norm_sqr() * minus.j_left.abs() / incoming;
    let transmission = plus.j_right / incoming;

    Ok(ScatterResult {
        energy: e,
        reflection: reflection.max(REFLECTION_FLOOR),
        transmission,
        w_plus: None,
        w_minus: None,
        k_left: minus.wavenumber,
        k_right: plus.wavenumber,
        k_local_left: local_wavenumber(&minus.k, &y),
        k_local_right: local_wavenumber(&plus.k, &plus.right),
        length,
    })
}

/// One result per energy, in input order; `L` chosen so that
/// `‖V(±L) − V(±2L)‖ < 1e-12`.
pub fn scatter_scan(model: &DiracModel, energies: &[f64]) -> Vec<Result<ScatterResult>> {
    if energies.is_empty() {
        return Vec::new();
    }
    match auto_length(model, 1e-12) {
        Ok(length) => energies
            .par_iter()
            .map(|&e| reflection_coefficient(model, e, length))
            .collect(),
        Err(err) => energies.iter().map(|_| Err(err.clone())).collect(),
    }
}

/// [`scatter_scan`] on a case, with `W±` attached.
pub fn case_scatter(case: &CaseModel, energies: &[f64]) -> Vec<Result<ScatterResult>> {
    let results = scatter_scan(case.model(), energies);
    results
        .into_iter()
        .map(|r| {
            let mut r = r?;
            let (minus, plus) = asymptotic_w(case.seed(), r.length)?;
            r.w_minus = Some(minus);
            r.w_plus = Some(plus);
            Ok(r)
        })
        .collect()
}
