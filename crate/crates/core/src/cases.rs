//! The four flat-band seeded transformations of the free model.
//!
//! | case | Λ | seed columns | bound states |
//! |------|---|--------------|--------------|
//! | I   | (ε, 0, −ε) | Ψ_ε, Ψ_fb[cosh νx], SΨ_ε | ε, 0, −ε |
//! | II  | (m, 0, ε), ε < 0 | Ψ_m, Ψ_fb[cosh σx], Ψ_ε | 0, ε |
//! | III | (ε, ε, 0) | Ψ_ε odd, Ψ_ε even, Ψ_fb[sinh ξx] | 0 |
//! | IV  | (ε, 0, 0) | Ψ_ε, Ψ_fb[sinh ν₀x], Ψ_fb[(ℓ/ν₀) cosh ν₀x] | ε |
//!
//! Gap-state columns are divided by `hv·ν`. Closed-form potentials are
//! written in `tanh`/`sech` form and stay finite for all `x`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::{chiral, s1_tilde, s2, s3, s3_tilde, ComplexMatrix3};
use crate::darboux::{
    darboux_transform, regularity_scan, seed_matrix, transformed_potential, SeedMatrix,
    TransformedModel,
};
use crate::expoly::ExpPoly;
use crate::free_model::{
    chiral_partner, flat_band_solution, free_hamiltonian, gap_solution, threshold_solution,
    DiracModel, EnergyLabel, FlatBandProfile, Parity, SpinorFunction,
};
use crate::grid::Grid;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    I,
    II,
    III,
    IV,
}

impl CaseTag {
    pub const ALL: [CaseTag; 4] = [CaseTag::I, CaseTag::II, CaseTag::III, CaseTag::IV];
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::I => "I",
            CaseTag::II => "II",
            CaseTag::III => "III",
            CaseTag::IV => "IV",
        };
        f.write_str(s)
    }
}

impl FromStr for CaseTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(CaseTag::I),
            "II" | "2" => Ok(CaseTag::II),
            "III" | "3" => Ok(CaseTag::III),
            "IV" | "4" => Ok(CaseTag::IV),
            other => Err(Error::InvalidParameters(format!("unknown case '{other}'"))),
        }
    }
}

/// Choice of the zero-energy seed column in case I.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedVariant {
    /// Flat-band state with `χ = cosh(νx)`.
    #[default]
    FlatBand,
    /// The `ε = 0` gap state instead of a flat-band state (non-Hermitian).
    NonFlat,
    /// Flat-band state with `χ = sinh(νx)` (singular at the origin).
    Sinh,
}

impl FromStr for SeedVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "flat-band" => Ok(SeedVariant::FlatBand),
            "non-flat" => Ok(SeedVariant::NonFlat),
            "sinh" => Ok(SeedVariant::Sinh),
            other => Err(Error::InvalidParameters(format!("unknown seed variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub tag: CaseTag,
    pub m: f64,
    pub eps: f64,
    pub hv: f64,
    /// Wronskian constant of case IV.
    pub ell: f64,
    /// Case II with `Λ = (−m, 0, ε)`, `0 < ε < m`.
    pub mirror: bool,
    pub variant: SeedVariant,
}

impl CaseParams {
    pub fn new(tag: CaseTag, m: f64, eps: f64, hv: f64) -> Self {
        CaseParams {
            tag,
            m,
            eps,
            hv,
            ell: 1.0,
            mirror: false,
            variant: SeedVariant::FlatBand,
        }
    }

    /// `m = hv = 1` with ε = 0.75, −0.25, 0.75, 0.5 for I–IV.
    pub fn reference(tag: CaseTag) -> Self {
        let eps = match tag {
            CaseTag::I => 0.75,
            CaseTag::II => -0.25,
            CaseTag::III => 0.75,
            CaseTag::IV => 0.5,
        };
        Self::new(tag, 1.0, eps, 1.0)
    }

    pub fn nu(&self) -> f64 {
        (self.m * self.m - self.eps * self.eps).sqrt() / self.hv
    }

    pub fn nu0(&self) -> f64 {
        self.m / self.hv
    }

    pub fn sigma(&self) -> f64 {
        (self.m * (self.m + self.eps)).sqrt() / self.hv
    }

    pub fn xi(&self) -> f64 {
        (self.m * self.m + self.eps * self.eps).sqrt() / self.hv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameters(msg));
        let (m, eps) = (self.m, self.eps);
        if !(self.hv > 0.0) || !self.hv.is_finite() {
            return bad(format!("hv must be positive, got {}", self.hv));
        }
        if !(m > 0.0) || !m.is_finite() {
            return bad(format!("m must be positive, got {m}"));
        }
        if !eps.is_finite() {
            return bad(format!("eps must be finite, got {eps}"));
        }
        if self.mirror && self.tag != CaseTag::II {
            return bad("the mirror flag applies to case II only".into());
        }
        if self.variant != SeedVariant::FlatBand && self.tag != CaseTag::I {
            return bad("seed variants apply to case I only".into());
        }
        match self.tag {
            CaseTag::I => {
                if !(eps != 0.0 && eps.abs() < m) {
                    return bad(format!("case I needs 0 < |eps| < m (eps = {eps}, m = {m})"));
                }
            }
            CaseTag::II => {
                if self.mirror {
                    if !(eps > 0.0 && eps < m) {
                        return bad(format!("mirrored case II needs 0 < eps < m (eps = {eps})"));
                    }
                } else if !(eps < 0.0 && eps > -m) {
                    return bad(format!("case II needs -m < eps < 0 (eps = {eps}, m = {m})"));
                }
            }
            CaseTag::III => {
                if !(eps != 0.0 && eps.abs() < m) {
                    return bad(format!("case III needs 0 < |eps| < m (eps = {eps}, m = {m})"));
                }
            }
            CaseTag::IV => {
                if !(self.ell != 0.0 && self.ell.is_finite()) {
                    return bad(format!("case IV needs a finite nonzero ell (ell = {})", self.ell));
                }
                if !(eps != 0.0 && eps.abs() < m) {
                    return bad(format!("case IV needs 0 < |eps| < m (eps = {eps}, m = {m})"));
                }
            }
        }
        Ok(())
    }

    /// Factorization energies.
    pub fn lambda(&self) -> [f64; 3] {
        let (m, e) = (self.m, self.eps);
        match self.tag {
            CaseTag::I => [e, 0.0, -e],
            CaseTag::II if self.mirror => [-m, 0.0, e],
            CaseTag::II => [m, 0.0, e],
            CaseTag::III => [e, e, 0.0],
            CaseTag::IV => [e, 0.0, 0.0],
        }
    }

    /// Discrete spectrum of the transformed model, ascending.
    pub fn expected_spectrum(&self) -> Vec<f64> {
        let e = self.eps;
        let mut s = match self.tag {
            CaseTag::I => vec![-e.abs(), 0.0, e.abs()],
            CaseTag::II => vec![0.0, e],
            CaseTag::III => vec![0.0],
            CaseTag::IV => vec![e],
        };
        s.sort_by(f64::total_cmp);
        s
    }

    /// Seed columns whose missing states are square-integrable.
    pub fn bound_columns(&self) -> Vec<usize> {
        match self.tag {
            CaseTag::I => vec![0, 1, 2],
            CaseTag::II => vec![1, 2],
            CaseTag::III => vec![2],
            CaseTag::IV => vec![0],
        }
    }

    /// Same case with `eps → −eps` and the mirror flag cleared.
    fn unmirrored(&self) -> Self {
        CaseParams {
            eps: -self.eps,
            mirror: false,
            ..*self
        }
    }
}

fn gap(p: &CaseParams, eps: f64, parity: Parity) -> Result<SpinorFunction> {
    let nu = (p.m * p.m - eps * eps).sqrt() / p.hv;
    Ok(gap_solution(eps, p.m, p.hv, parity)?.scale(C64::from(1.0 / (p.hv * nu))))
}

fn flat(p: &CaseParams, profile: FlatBandProfile) -> SpinorFunction {
    debug_assert!(profile.is_real());
    flat_band_solution(&profile, p.m, p.hv)
}

/// The closed-form seed matrix of the case, without parameter validation.
pub fn seed_for(p: &CaseParams) -> Result<SeedMatrix> {
    let (m, hv, eps) = (p.m, p.hv, p.eps);
    let lambda = p.lambda();
    let cols: [SpinorFunction; 3] = match p.tag {
        CaseTag::I => {
            let g = gap(p, eps, Parity::OddA)?;
            let mid = match p.variant {
                SeedVariant::FlatBand => flat(p, FlatBandProfile::cosh(p.nu())),
                SeedVariant::Sinh => flat(p, FlatBandProfile::sinh(p.nu())),
                SeedVariant::NonFlat => gap(p, 0.0, Parity::EvenA)?,
            };
            let partner = chiral_partner(&g);
            [g, mid, partner]
        }
        CaseTag::II if p.mirror => {
            let q = p.unmirrored();
            [
                threshold_solution(-1, C64::from(-1.0), C64::from(0.0), m, hv)?,
                flat(p, FlatBandProfile::cosh(q.sigma())),
                chiral_partner(&gap(p, -eps, Parity::OddA)?),
            ]
        }
        CaseTag::II => [
            threshold_solution(1, C64::from(1.0), C64::from(0.0), m, hv)?,
            flat(p, FlatBandProfile::cosh(p.sigma())),
            gap(p, eps, Parity::OddA)?,
        ],
        CaseTag::III => [
            gap(p, eps, Parity::OddA)?,
            gap(p, eps, Parity::EvenA)?,
            flat(p, FlatBandProfile::sinh(p.xi())),
        ],
        CaseTag::IV => {
            let nu0 = p.nu0();
            let chi2 = ExpPoly::cosh(nu0).scale(C64::from(p.ell / nu0));
            [
                gap(p, eps, Parity::OddA)?,
                flat(p, FlatBandProfile::sinh(nu0)),
                flat(p, FlatBandProfile::from_expoly("(ell/nu0)cosh(nu0 x)", chi2)),
            ]
        }
    };
    let [a, b, c] = cols;
    seed_matrix(a, b, c, lambda)
}

/// Named scalar profiles of the closed-form potential at `x`.
pub fn profiles(p: &CaseParams, x: f64) -> Vec<(&'static str, f64)> {
    match p.tag {
        CaseTag::I if p.variant == SeedVariant::FlatBand => {
            let (f, m) = case1_fm(p, x);
            vec![("F", f), ("M", m)]
        }
        CaseTag::II => {
            let (q, sign) = if p.mirror { (p.unmirrored(), -1.0) } else { (*p, 1.0) };
            let [f, m, d, g] = case2_fmdg(&q, x);
            vec![("F", f), ("M", m), ("D", sign * d), ("G", sign * g)]
        }
        CaseTag::III => vec![("T", (p.xi() * x).tanh() / (p.hv * p.xi()))],
        CaseTag::IV => vec![("A", p.hv * p.nu() * (p.nu() * x).tanh())],
        _ => Vec::new(),
    }
}

fn case1_fm(p: &CaseParams, x: f64) -> (f64, f64) {
    let nu = p.nu();
    let t = (nu * x).tanh();
    let sech2 = 1.0 - t * t;
    let k = p.m * p.m / (p.hv * p.hv * nu * nu);
    let den = -k + t * t;
    (-p.hv * nu * t * sech2 / den, p.m * sech2 / den)
}

fn case2_fmdg(p: &CaseParams, x: f64) -> [f64; 4] {
    let (m, e) = (p.m, p.eps);
    let (sigma, nu) = (p.sigma(), p.nu());
    let (ts, tn) = ((sigma * x).tanh(), (nu * x).tanh());
    let r_minus = (m * (m - e)).sqrt();
    let r_plus = (m * (m + e)).sqrt();
    let br = p.hv * sigma * (-r_minus / (m + e) + ts * tn);
    [
        e * (-r_minus * ts + m * tn) / br,
        m * r_plus * (((m - e) / m).sqrt() - ts * tn) / br,
        (m - e) * r_plus * ((m / (m - e)).sqrt() - ts * tn) / br,
        m * e * tn / br,
    ]
}

/// Closed-form transformed potential; `None` for the case I seed variants.
pub fn closed_form_potential(p: &CaseParams, x: f64) -> Option<ComplexMatrix3> {
    let m = p.m;
    match p.tag {
        CaseTag::I => {
            if p.variant != SeedVariant::FlatBand {
                return None;
            }
            let (f, mm) = case1_fm(p, x);
            Some(s3() * (m + mm) + s1_tilde() * f)
        }
        CaseTag::II => {
            let q = if p.mirror { p.unmirrored() } else { *p };
            let [f, mm, d, g] = case2_fmdg(&q, x);
            let v = s3() * (m + mm) + s2() * g + s1_tilde() * f + s3_tilde() * d;
            if p.mirror {
                let s = chiral();
                Some(-(s * v * s))
            } else {
                Some(v)
            }
        }
        CaseTag::III => {
            let xi = p.xi();
            let c = (xi * x).tanh() / (p.hv * xi);
            Some((s1_tilde() * (m * m) + s2() * (p.eps * m)) * c)
        }
        CaseTag::IV => {
            let nu = p.nu();
            Some(s1_tilde() * (p.hv * nu * (nu * x).tanh()) - s3_tilde() * p.eps)
        }
    }
}

/// Closed form of `det U(x)` (for case II the sign convention is that of
/// the closed-form bracket, i.e. `−det U`).
pub fn closed_form_determinant(p: &CaseParams, x: f64) -> Option<C64> {
    let (m, e, hv) = (p.m, p.eps, p.hv);
    match p.tag {
        CaseTag::I if p.variant == SeedVariant::FlatBand => {
            let nu = p.nu();
            let (t, c) = ((nu * x).tanh(), (nu * x).cosh());
            let br = -m * m / (m * m - e * e) + t * t;
            Some(C64::new(0.0, -2.0 * e) * c.powi(3) * br)
        }
        CaseTag::II if !p.mirror => {
            let (sigma, nu) = (p.sigma(), p.nu());
            let br = -(m * (m - e)).sqrt() / (m + e) + (sigma * x).tanh() * (nu * x).tanh();
            Some(C64::from(hv * sigma * (sigma * x).cosh() * (nu * x).cosh() * br))
        }
        CaseTag::III => {
            let xi = p.xi();
            Some(C64::new(0.0, e * xi * (xi * x).cosh() / p.nu()))
        }
        CaseTag::IV => Some(C64::new(0.0, -m * e * p.ell * (p.nu() * x).cosh() / p.nu())),
        _ => None,
    }
}

fn case1_missing(p: &CaseParams) -> [SpinorFunction; 3] {
    let (m, e, hv, nu) = (p.m, p.eps, p.hv, p.nu());
    let k = m * m / (hv * hv * nu * nu);
    let (c, s) = (ExpPoly::cosh(nu), ExpPoly::sinh(nu));
    // −K cosh² + sinh² = cosh²·(−K + tanh²)
    let den = &(&c * &c).scale(C64::from(-k)) + &(&s * &s);
    let i = C64::new(0.0, 1.0);
    let pe = SpinorFunction::from_rational(
        EnergyLabel::Energy(e),
        [
            &s * &c,
            den.scale(i * hv * nu / e),
            (&c * &c).scale(C64::from(m / (hv * nu))),
        ],
        &c * &den,
    );
    let p0 = SpinorFunction::from_rational(
        EnergyLabel::Energy(0.0),
        [
            c.scale(C64::from(-m / (hv * hv * nu * nu))),
            ExpPoly::zero(),
            s.scale(C64::from(-1.0 / (hv * nu))),
        ],
        den,
    );
    let pm = pe.transform(chiral(), EnergyLabel::Energy(-e));
    [pe, p0, pm]
}

/// Closed-form `Ψ̃₀` and `Ψ̃_ε` of case II (`ε < 0`).
fn case2_missing(p: &CaseParams) -> [SpinorFunction; 2] {
    let (m, e, hv) = (p.m, p.eps, p.hv);
    let (sigma, nu) = (p.sigma(), p.nu());
    let (cs, ss) = (ExpPoly::cosh(sigma), ExpPoly::sinh(sigma));
    let (cn, sn) = (ExpPoly::cosh(nu), ExpPoly::sinh(nu));
    let c = (m * (m - e)).sqrt() / (m + e);
    let delta = (&(&cs * &cn).scale(C64::from(-c)) + &(&ss * &sn)).scale(C64::from(hv * sigma));
    let i = C64::new(0.0, 1.0);
    let p0 = SpinorFunction::from_rational(
        EnergyLabel::Energy(0.0),
        [
            cn.scale(C64::from(-((m - e) / (m + e)).sqrt())),
            sn.scale(-i),
            sn.scale(C64::from(-1.0)),
        ],
        delta.clone(),
    );
    let pe = SpinorFunction::from_rational(
        EnergyLabel::Energy(e),
        [
            ss.scale(C64::from((m * (m + e)).sqrt())),
            cs.scale(i * m),
            cs.scale(C64::from(m)),
        ],
        delta,
    );
    [p0, pe]
}

/// Missing states in closed form where known, generic columns of `(U⁻¹)†` elsewhere.
fn missing_for(p: &CaseParams, generic: &[SpinorFunction; 3]) -> [SpinorFunction; 3] {
    match p.tag {
        CaseTag::I if p.variant == SeedVariant::FlatBand => case1_missing(p),
        CaseTag::II => {
            if p.mirror {
                let [p0, pe] = case2_missing(&p.unmirrored());
                [
                    generic[0].clone(),
                    p0.transform(chiral(), EnergyLabel::Energy(0.0)),
                    pe.transform(chiral(), EnergyLabel::Energy(p.eps)),
                ]
            } else {
                let [p0, pe] = case2_missing(p);
                [generic[0].clone(), p0, pe]
            }
        }
        CaseTag::III => {
            let xi = p.xi();
            let bound = SpinorFunction::from_rational(
                EnergyLabel::Energy(0.0),
                [
                    ExpPoly::zero(),
                    ExpPoly::constant(C64::new(0.0, p.m)),
                    ExpPoly::real(p.eps),
                ],
                ExpPoly::cosh(xi),
            );
            [generic[0].clone(), generic[1].clone(), bound]
        }
        CaseTag::IV => {
            let nu = p.nu();
            let bound = SpinorFunction::from_rational(
                EnergyLabel::Energy(p.eps),
                [ExpPoly::zero(), ExpPoly::real((nu / 2.0).sqrt()), ExpPoly::zero()],
                ExpPoly::cosh(nu),
            );
            [bound, generic[1].clone(), generic[2].clone()]
        }
        _ => generic.clone(),
    }
}

/// A validated case with its transformed model.
#[derive(Clone)]
pub struct CaseModel {
    pub params: CaseParams,
    pub base: DiracModel,
    /// `H̃` with the closed-form potential (generic one for case I variants).
    pub transformed: TransformedModel,
}

impl fmt::Debug for CaseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseModel").field("params", &self.params).finish()
    }
}

impl CaseModel {
    pub fn model(&self) -> &DiracModel {
        &self.transformed.model
    }

    pub fn seed(&self) -> &SeedMatrix {
        &self.transformed.seed
    }

    pub fn missing_states(&self) -> &[SpinorFunction; 3] {
        &self.transformed.missing_states
    }

    pub fn potential(&self, x: f64) -> ComplexMatrix3 {
        self.transformed.model.potential(x)
    }

    pub fn profiles(&self, x: f64) -> Vec<(&'static str, f64)> {
        profiles(&self.params, x)
    }

    pub fn expected_spectrum(&self) -> Vec<f64> {
        self.params.expected_spectrum()
    }

    pub fn has_closed_form(&self) -> bool {
        closed_form_potential(&self.params, 0.0).is_some()
    }
}

/// Validates `p` and assembles the case.
pub fn build(p: &CaseParams) -> Result<CaseModel> {
    p.validate()?;
    let base = free_hamiltonian(p.m, p.hv)?;
    let seed = seed_for(p)?;
    let generic = darboux_transform(&base, seed);
    let missing = missing_for(p, &generic.missing_states);
    let model = if closed_form_potential(p, 0.0).is_some() {
        let q = *p;
        DiracModel::new(p.hv, move |x| {
            closed_form_potential(&q, x).expect("closed form checked above")
        })
    } else {
        generic.model.clone()
    };
    Ok(CaseModel {
        params: *p,
        base,
        transformed: TransformedModel {
            model,
            seed: generic.seed,
            missing_states: missing,
        },
    })
}

fn build_tagged(p: &CaseParams, tag: CaseTag) -> Result<CaseModel> {
    if p.tag != tag {
        return Err(Error::InvalidParameters(format!(
            "expected case {tag}, got case {}",
            p.tag
        )));
    }
    build(p)
}

pub fn case1_model(p: &CaseParams) -> Result<CaseModel> {
    build_tagged(p, CaseTag::I)
}

pub fn case2_model(p: &CaseParams) -> Result<CaseModel> {
    build_tagged(p, CaseTag::II)
}

pub fn case3_model(p: &CaseParams) -> Result<CaseModel> {
    build_tagged(p, CaseTag::III)
}

pub fn case4_model(p: &CaseParams) -> Result<CaseModel> {
    build_tagged(p, CaseTag::IV)
}

/// Free solutions used to exercise the intertwining relation: gap states of
/// both parities at four energies, both threshold families and three
/// flat-band profiles.
pub fn probe_solutions(m: f64, hv: f64) -> Result<Vec<SpinorFunction>> {
    let mut out = Vec::new();
    for f in [-0.9, -0.4, 0.2, 0.6] {
        for parity in [Parity::EvenA, Parity::OddA] {
            out.push(gap_solution(f * m, m, hv, parity)?);
        }
    }
    for sign in [1, -1] {
        out.push(threshold_solution(sign, C64::new(1.0, 0.0), C64::new(0.5, 0.0), m, hv)?);
    }
    for profile in [
        FlatBandProfile::cosh(0.5),
        FlatBandProfile::gaussian_packet(0.0, 1.5, 0.7),
        FlatBandProfile::plane_wave(1.3),
    ] {
        out.push(flat_band_solution(&profile, m, hv));
    }
    Ok(out)
}

/// Sup-norm distance between the generic transformed potential and the
/// closed form over `grid`. Parameters are not validated, so invalid
/// choices surface as [`Error::SingularSeed`].
pub fn oracle_crosscheck(p: &CaseParams, grid: &Grid) -> Result<f64> {
    if closed_form_potential(p, 0.0).is_none() {
        return Err(Error::Unsupported(format!(
            "no closed form for case {} with seed variant {:?}",
            p.tag, p.variant
        )));
    }
    let base = free_hamiltonian(p.m, p.hv)?;
    let seed = seed_for(p)?;
    let report = regularity_scan(&seed, grid);
    if !report.pass {
        seed.frame(report.ratio_argmin)?;
    }
    let mut worst: f64 = 0.0;
    for x in grid.points() {
        let generic = transformed_potential(&seed, &base, x)?;
        let closed = closed_form_potential(p, x).expect("checked above");
        worst = worst.max(generic.max_diff(&closed));
    }
    Ok(worst)
}
