//! Residuals on a grid and bound states by shooting.
//!
//! The third row of `S₁` vanishes, so `HΨ = EΨ` splits into a first-order
//! system for `(ψ_A, ψ_B)` and an algebraic relation for `ψ_C`. Bound states
//! are located by integrating decaying solutions inward from `±L` and
//! matching their Wronskian at `x = 0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::Spinor3;
use crate::cases::CaseModel;
use crate::darboux::norm_squared;
use crate::free_model::{DiracModel, SpinorFunction};
use crate::grid::Grid;
use crate::ode::Dopri5;
use crate::{Error, Result, C64};

/// Relative guard on `|e − V₃₃|`.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Bisection stops once the bracket is narrower than this.
pub const ENERGY_TOL: f64 = 1e-12;
/// A sign change is accepted as a root only if the normalized Wronskian
/// is this small at the bisected energy.
pub const ROOT_CHECK: f64 = 1e-6;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `y′ = K y` for `y = (ψ_A, ψ_B)`, with `ψ_C = c·y`.
#[derive(Clone, Copy, Debug)]
pub struct Reduced {
    pub k: [[C64; 2]; 2],
    pub c: [C64; 2],
}

impl Reduced {
    pub fn rhs(&self, y: &[C64; 2]) -> [C64; 2] {
        [
            self.k[0][0] * y[0] + self.k[0][1] * y[1],
            self.k[1][0] * y[0] + self.k[1][1] * y[1],
        ]
    }

    pub fn psi_c(&self, y: &[C64; 2]) -> C64 {
        self.c[0] * y[0] + self.c[1] * y[1]
    }

    pub fn reconstruct(&self, y: &[C64; 2]) -> Spinor3 {
        Spinor3::new(y[0], y[1], self.psi_c(y))
    }

    /// `K` conjugated by `diag(1, i)`; real for the potentials built here.
    pub fn gauge_k(&self) -> [[C64; 2]; 2] {
        let k = self.k;
        [[k[0][0], I * k[0][1]], [-I * k[1][0], k[1][1]]]
    }
}

pub fn reduce_to_two_components(model: &DiracModel, e: f64, x: f64) -> Result<Reduced> {
    let v = model.potential(x);
    let d = C64::from(e) - v[(2, 2)];
    let gap = d.norm();
    if !(gap > DEGENERACY_TOL * e.abs().max(1.0)) {
        return Err(Error::AlgebraicDegeneracy { e, x, gap });
    }
    let c = [v[(2, 0)] / d, v[(2, 1)] / d];
    let s = I / model.hv;
    let k = [
        [
            -s * (v[(1, 0)] + v[(1, 2)] * c[0]),
            s * (C64::from(e) - v[(1, 1)] - v[(1, 2)] * c[1]),
        ],
        [
            s * (C64::from(e) - v[(0, 0)] - v[(0, 2)] * c[0]),
            -s * (v[(0, 1)] + v[(0, 2)] * c[1]),
        ],
    ];
    Ok(Reduced { k, c })
}

/// `sup‖(H − e)ψ‖∞ / max(1, sup‖ψ‖∞)` over the grid.
pub fn eigen_residual(model: &DiracModel, psi: &SpinorFunction, e: f64, grid: &Grid) -> f64 {
    let (res, size) = (0..grid.n)
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k);
            let j = psi.jet(x);
            let r = (model.apply_at(x, j.value, j.d1) - j.value * e).norm_inf();
            (r, j.value.norm_inf())
        })
        .reduce(|| (0.0, 0.0), |a, b| (nan_max(a.0, b.0), nan_max(a.1, b.1)));
    res / size.max(1.0)
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// `max‖V(±L) − V(±2L)‖∞`.
pub fn asymptotic_deviation(model: &DiracModel, length: f64) -> f64 {
    let r = model.potential(length).max_diff(&model.potential(2.0 * length));
    let l = model.potential(-length).max_diff(&model.potential(-2.0 * length));
    nan_max(r, l)
}

pub fn check_asymptotic(model: &DiracModel, length: f64, tol: f64) -> Result<()> {
    let deviation = asymptotic_deviation(model, length);
    if deviation < tol {
        Ok(())
    } else {
        Err(Error::NonAsymptoticPotential { length, deviation })
    }
}

/// Smallest `L = 8·2ᵏ ≤ 512` with `‖V(±L) − V(±2L)‖ < tol`.
pub fn auto_length(model: &DiracModel, tol: f64) -> Result<f64> {
    let mut length = 8.0;
    loop {
        let deviation = asymptotic_deviation(model, length);
        if deviation < tol {
            return Ok(length);
        }
        if length >= 512.0 {
            return Err(Error::NonAsymptoticPotential { length, deviation });
        }
        length *= 2.0;
    }
}

/// Eigenvector of a 2×2 matrix for the eigenvalue with `Re λ` of the given
/// sign, normalized with its largest component real positive.
fn evanescent_mode(k: [[C64; 2]; 2], positive: bool, e: f64) -> Result<[C64; 2]> {
    let half_tr = (k[0][0] + k[1][1]) * 0.5;
    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
    let root = (half_tr * half_tr - det).sqrt();
    let (l1, l2) = (half_tr + root, half_tr - root);
    let lambda = if (l1.re > l2.re) == positive { l1 } else { l2 };
    let scale = k.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if (lambda.re.abs() < 1e-9 * scale) || (l1.re.signum() == l2.re.signum()) {
        return Err(Error::NotEvanescent { e });
    }
    let a = [k[0][1], lambda - k[0][0]];
    let b = [lambda - k[1][1], k[1][0]];
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    let v = if na >= nb { a } else { b };
    Ok(canonical(v))
}

fn canonical(v: [C64; 2]) -> [C64; 2] {
    let big = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let phase = big.conj() / (big.norm() * n);
    [v[0] * phase, v[1] * phase]
}

fn dot_re(a: &[C64; 2], b: &[C64; 2]) -> f64 {
    (a[0].conj() * b[0] + a[1].conj() * b[1]).re
}

/// One shot at energy `e`: asymptotic data (gauge frame) and the matching
/// Wronskian `det[y₋(0), y₊(0)] / (|y₋||y₊|)`.
#[derive(Clone, Copy, Debug)]
struct Shot {
    left: [C64; 2],
    right: [C64; 2],
    w: C64,
}

impl Shot {
    fn aligned_w(&self, left_ref: &[C64; 2], right_ref: &[C64; 2]) -> C64 {
        let sl = dot_re(left_ref, &self.left).signum();
        let sr = dot_re(right_ref, &self.right).signum();
        self.w * (sl * sr)
    }
}

fn shoot(model: &DiracModel, e: f64, length: f64, solver: &Dopri5) -> Result<Shot> {
    let left = evanescent_mode(reduce_to_two_components(model, e, -length)?.gauge_k(), true, e)?;
    let right = evanescent_mode(reduce_to_two_components(model, e, length)?.gauge_k(), false, e)?;
    let rhs = |x: f64, y: &[C64; 2]| -> Result<[C64; 2]> {
        let r = reduce_to_two_components(model, e, x)?;
        let k = r.gauge_k();
        Ok([k[0][0] * y[0] + k[0][1] * y[1], k[1][0] * y[0] + k[1][1] * y[1]])
    };
    let yl = solver.integrate(rhs, -length, left, 0.0)?;
    let yr = solver.integrate(rhs, length, right, 0.0)?;
    let nl = (yl[0].norm_sqr() + yl[1].norm_sqr()).sqrt();
    let nr = (yr[0].norm_sqr() + yr[1].norm_sqr()).sqrt();
    let w = (yl[0] * yr[1] - yl[1] * yr[0]) / (nl * nr);
    Ok(Shot { left, right, w })
}

fn real_part(w: C64) -> Result<f64> {
    if w.im.abs() > 1e-7 {
        return Err(Error::ComplexMatching {
            ratio: w.im.abs() / w.norm(),
        });
    }
    Ok(w.re)
}

/// Normalized matching Wronskian at a single energy (sign is only
/// meaningful relative to neighbouring energies).
pub fn matching_function(model: &DiracModel, e: f64, length: f64) -> Result<f64> {
    real_part(shoot(model, e, length, &Dopri5::default())?.w)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Sorted ascending.
    pub found_energies: Vec<f64>,
    /// Grid residual of the eigenfunction attached to each found energy;
    /// `None` when no closed-form state is available.
    pub residuals: Vec<Option<f64>>,
    pub expected: Vec<f64>,
    /// `|w|` at each shooting root (`None` for residual-confirmed levels).
    pub matching: Vec<Option<f64>>,
    /// Energy intervals where `e = V₃₃(x)` for some `x`; excluded from the scan.
    pub degenerate: Vec<(f64, f64)>,
    pub length: f64,
}

impl SpectrumReport {
    /// Found and expected energies agree one-to-one within `tol`.
    pub fn matches(&self, tol: f64) -> bool {
        self.found_energies.len() == self.expected.len()
            && self
                .found_energies
                .iter()
                .zip(&self.expected)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    fn insert(&mut self, e: f64, matching: Option<f64>) {
        let at = self
            .found_energies
            .iter()
            .position(|&f| f > e)
            .unwrap_or(self.found_energies.len());
        self.found_energies.insert(at, e);
        self.matching.insert(at, matching);
        self.residuals.insert(at, None);
    }
}

fn degenerate_intervals(model: &DiracModel, length: f64) -> Vec<(f64, f64)> {
    let n = 4001;
    let vals: Vec<C64> = (0..n)
        .map(|k| model.potential(-length + 2.0 * length * k as f64 / (n - 1) as f64)[(2, 2)])
        .collect();
    let lo = vals.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let hi = vals.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let pad = DEGENERACY_TOL * lo.abs().max(hi.abs()).max(1.0);
    vec![(lo - pad, hi + pad)]
}

fn overlaps(iv: &[(f64, f64)], a: f64, b: f64) -> bool {
    iv.iter().any(|&(lo, hi)| lo <= b && a <= hi)
}

/// Scans `n_scan` energies of `e_range`, bisects every sign change of the
/// aligned matching function and keeps the roots where `|w|` is small.
pub fn shoot_bound_states(
    model: &DiracModel,
    e_range: (f64, f64),
    n_scan: usize,
    length: f64,
) -> Result<SpectrumReport> {
    let (e_lo, e_hi) = e_range;
    if !(e_hi > e_lo) || n_scan < 2 {
        return Err(Error::InvalidParameters(format!(
            "energy scan needs e_lo < e_hi and n_scan >= 2 (got ({e_lo}, {e_hi}), {n_scan})"
        )));
    }
    check_asymptotic(model, length, 1e-8)?;
    let solver = Dopri5::default();
    let degenerate: Vec<(f64, f64)> = degenerate_intervals(model, length)
        .into_iter()
        .filter(|&(lo, hi)| lo <= e_hi && e_lo <= hi)
        .collect();

    let energies: Vec<f64> = (0..n_scan)
        .map(|k| e_lo + (e_hi - e_lo) * k as f64 / (n_scan - 1) as f64)
        .filter(|&e| !overlaps(&degenerate, e, e))
        .collect();
    let shots: Vec<Result<Shot>> = energies
        .par_iter()
        .map(|&e| shoot(model, e, length, &solver))
        .collect();

    let mut report = SpectrumReport {
        found_energies: Vec::new(),
        residuals: Vec::new(),
        expected: Vec::new(),
        matching: Vec::new(),
        degenerate: degenerate.clone(),
        length,
    };

    let mut prev: Option<(f64, Shot, f64)> = None;
    for (&e, shot) in energies.iter().zip(shots) {
        let shot = match shot {
            Ok(s) => s,
            Err(Error::AlgebraicDegeneracy { .. }) => {
                report.degenerate.push((e, e));
                prev = None;
                continue;
            }
            Err(err) => return Err(err),
        };
        // Orient this shot consistently with the previous one.
        let (shot, w) = match &prev {
            Some((pe, ps, _)) if !overlaps(&report.degenerate, *pe, e) => {
                let sl = dot_re(&ps.left, &shot.left).signum();
                let sr = dot_re(&ps.right, &shot.right).signum();
                let s = Shot {
                    left: [shot.left[0] * sl, shot.left[1] * sl],
                    right: [shot.right[0] * sr, shot.right[1] * sr],
                    w: shot.w * (sl * sr),
                };
                (s, real_part(s.w)?)
            }
            _ => (shot, real_part(shot.w)?),
        };
        if let Some((pe, ps, pw)) = prev {
            if !overlaps(&report.degenerate, pe, e) && pw * w <= 0.0 && !(pw == 0.0 && w == 0.0) {
                if let Some((root, wr)) = bisect(model, length, &solver, (pe, pw, ps), (e, w))? {
                    if report.found_energies.iter().all(|f| (f - root).abs() > 1e-9) {
                        report.insert(root, Some(wr));
                    }
                }
            }
        }
        prev = Some((e, shot, w));
    }
    Ok(report)
}

fn bisect(
    model: &DiracModel,
    length: f64,
    solver: &Dopri5,
    lo: (f64, f64, Shot),
    hi: (f64, f64),
) -> Result<Option<(f64, f64)>> {
    let (mut a, mut wa, reference) = lo;
    let (mut b, _) = hi;
    if wa == 0.0 {
        return Ok(Some((a, 0.0)));
    }
    while b - a > ENERGY_TOL {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let w = real_part(shoot(model, mid, length, solver)?.aligned_w(&reference.left, &reference.right))?;
        if w == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if (w > 0.0) == (wa > 0.0) {
            a = mid;
            wa = w;
        } else {
            b = mid;
        }
    }
    let root = 0.5 * (a + b);
    let w = shoot(model, root, length, solver)?.w.norm();
    Ok((w < ROOT_CHECK).then_some((root, w)))
}

/// `‖ψ‖²` on `[−l2, l2]` relative to `[−l1, l1]`, minus one.
pub fn norm_growth(psi: &SpinorFunction, l1: f64, l2: f64) -> f64 {
    let n1 = norm_squared(psi, -l1, l1, (400.0 * l1) as usize);
    let n2 = norm_squared(psi, -l2, l2, (400.0 * l2) as usize);
    n2 / n1 - 1.0
}

/// Full spectrum check for a case: shooting on `(−m + 0.01, m − 0.01)`,
/// residual confirmation of levels hidden in degenerate intervals, and grid
/// residuals `[−10, 10]`, 2001 points, for every found level.
pub fn case_spectrum(case: &CaseModel, n_scan: usize) -> Result<SpectrumReport> {
    let p = &case.params;
    let model = case.model();
    let length = auto_length(model, 1e-12)?;
    let m = p.m.abs();
    let mut report = shoot_bound_states(model, (-m + 0.01, m - 0.01), n_scan, length)?;
    report.expected = case.expected_spectrum();

    let grid = Grid::new(-10.0, 10.0, 2001)?;
    let lambda = p.lambda();
    let bound: Vec<(f64, &SpinorFunction)> = p
        .bound_columns()
        .into_iter()
        .map(|j| (lambda[j], &case.missing_states()[j]))
        .collect();

    for &(e, psi) in &bound {
        let hidden = overlaps(&report.degenerate, e, e);
        if !hidden || report.found_energies.iter().any(|f| (f - e).abs() < 1e-9) {
            continue;
        }
        let res = eigen_residual(model, psi, e, &grid);
        let growth = norm_growth(psi, 20.0, 40.0);
        if res < 1e-10 && growth.abs() < 1e-8 {
            report.insert(e, None);
        }
    }
    for (k, &f) in report.found_energies.iter().enumerate() {
        if let Some((e, psi)) = bound.iter().find(|(e, _)| (e - f).abs() < 1e-6) {
            report.residuals[k] = Some(eigen_residual(model, psi, *e, &grid));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{s1_tilde, s3_tilde};
    use crate::cases::{build, CaseParams, CaseTag};
    use crate::free_model::free_hamiltonian;

    fn reference(tag: CaseTag) -> CaseModel {
        build(&CaseParams::reference(tag)).unwrap()
    }

    #[test]
    fn free_reduction_third_component() {
        let h = free_hamiltonian(1.0, 1.0).unwrap();
        let e = 0.4;
        let r = reduce_to_two_components(&h, e, 0.3).unwrap();
        // ψ_C = i m ψ_B / e
        assert!((r.c[0]).norm() < 1e-15);
        assert!((r.c[1] - C64::new(0.0, 1.0 / e)).norm() < 1e-15);
        assert!(matches!(
            reduce_to_two_components(&h, 0.0, 0.3),
            Err(Error::AlgebraicDegeneracy { .. })
        ));
    }

    #[test]
    fn case4_reduction_is_upper_block() {
        let c = reference(CaseTag::IV);
        let p = c.params;
        for &x in &[-3.0, -0.2, 0.0, 1.7] {
            for &e in &[-0.9, 0.1, 0.5, 2.0] {
                let r = reduce_to_two_components(c.model(), e, x).unwrap();
                let v = s1_tilde() * (p.hv * p.nu() * (p.nu() * x).tanh()) - s3_tilde() * p.eps;
                // ψ′ = (i/hv) σ₁ (e − 𝔥_V) ψ
                let s = I / p.hv;
                let want = [
                    [-s * v[(1, 0)], s * (C64::from(e) - v[(1, 1)])],
                    [s * (C64::from(e) - v[(0, 0)]), -s * v[(0, 1)]],
                ];
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((r.k[i][j] - want[i][j]).norm() < 1e-12);
                    }
                }
                assert!(r.c[0].norm() < 1e-15 && r.c[1].norm() < 1e-15);
            }
        }
    }

    #[test]
    fn reduction_fidelity() {
        let c = reference(CaseTag::II);
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut done = 0;
        while done < 20 {
            let x = -8.0 + 16.0 * next();
            let e = -2.0 + 4.0 * next();
            if (C64::from(e) - c.potential(x)[(2, 2)]).norm() <= 0.1 {
                continue;
            }
            let y = [C64::new(next(), next()), C64::new(next(), next())];
            let r = reduce_to_two_components(c.model(), e, x).unwrap();
            let dy = r.rhs(&y);
            let psi = r.reconstruct(&y);
            // ψ_C′ never enters: the third column of S₁ is zero.
            let dpsi = Spinor3::new(dy[0], dy[1], C64::new(0.0, 0.0));
            let res = (c.model().apply_at(x, psi, dpsi) - psi * e).norm_inf();
            assert!(res < 1e-10, "x={x} e={e} res={res}");
            done += 1;
        }
    }

    #[test]
    fn residual_examples() {
        let grid = Grid::new(-10.0, 10.0, 2001).unwrap();
        let c1 = reference(CaseTag::I);
        let zero = &c1.missing_states()[1];
        assert!(eigen_residual(c1.model(), zero, 0.0, &grid) < 1e-10);
        assert!(eigen_residual(c1.model(), zero, 0.1, &grid) > 1e-3);
        let c4 = reference(CaseTag::IV);
        assert!(eigen_residual(c4.model(), &c4.missing_states()[0], 0.5, &grid) < 1e-12);
        let fine = Grid::new(-10.0, 10.0, 4001).unwrap();
        let a = eigen_residual(c1.model(), zero, 0.0, &grid);
        let b = eigen_residual(c1.model(), zero, 0.0, &fine);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_length() {
        let c = reference(CaseTag::I);
        let l = auto_length(c.model(), 1e-12).unwrap();
        assert!(asymptotic_deviation(c.model(), l) < 1e-12);
        assert!(matches!(
            check_asymptotic(c.model(), 1.0, 1e-8),
            Err(Error::NonAsymptoticPotential { .. })
        ));
    }

    #[test]
    fn case4_spectrum() {
        let r = case_spectrum(&reference(CaseTag::IV), 200).unwrap();
        assert!(r.matches(1e-8), "{r:?}");
        assert!(r.residuals.iter().all(|x| x.unwrap() < 1e-10));
    }

    #[test]
    fn case1_spectrum() {
        let r = case_spectrum(&reference(CaseTag::I), 200).unwrap();
        assert!(r.matches(1e-8), "{r:?}");
        assert_eq!(r.matching.iter().filter(|m| m.is_none()).count(), 1);
    }

    #[test]
    fn case2_and_case3_spectra() {
        let r2 = case_spectrum(&reference(CaseTag::II), 200).unwrap();
        assert!(r2.matches(1e-8), "{r2:?}");
        let r3 = case_spectrum(&reference(CaseTag::III), 200).unwrap();
        assert!(r3.matches(1e-8), "{r3:?}");
        let mut mirror = CaseParams::new(CaseTag::II, 1.0, 0.4, 1.0);
        mirror.mirror = true;
        let rm = case_spectrum(&build(&mirror).unwrap(), 200).unwrap();
        assert!(rm.matches(1e-8), "{rm:?}");
    }

    #[test]
    fn case2_threshold_state_not_normalizable() {
        let c = reference(CaseTag::II);
        assert!(norm_growth(&c.missing_states()[0], 20.0, 40.0) > 0.1);
    }
}
