//! Free pseudospin-1 Dirac Hamiltonian `H = −i·hv·S₁∂ₓ + m·S₃` and its
//! eigensolution catalog: gap states, threshold states at `±m`, and the
//! zero-energy flat-band family built on an arbitrary profile `χ`.

use std::fmt;
use std::sync::Arc;

use crate::algebra::{chiral, s1, s3, ComplexMatrix3, Spinor3};
use crate::expoly::{spinor_derivative, ExpPoly, ExpSpinor};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Value and first two derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: Spinor3,
    pub d1: Spinor3,
    pub d2: Spinor3,
}

type JetFn = Arc<dyn Fn(f64) -> Jet + Send + Sync>;
type MatrixFn = Arc<dyn Fn(f64) -> ComplexMatrix3 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnergyLabel {
    Energy(f64),
    FlatBand,
}

impl EnergyLabel {
    /// Flat-band states sit at zero energy.
    pub fn energy(&self) -> f64 {
        match self {
            EnergyLabel::Energy(e) => *e,
            EnergyLabel::FlatBand => 0.0,
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            EnergyLabel::Energy(e) => EnergyLabel::Energy(-e),
            EnergyLabel::FlatBand => EnergyLabel::FlatBand,
        }
    }
}

impl fmt::Display for EnergyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyLabel::Energy(e) => write!(f, "{e}"),
            EnergyLabel::FlatBand => write!(f, "flat-band"),
        }
    }
}

/// Analytic map `x → C³` with analytic first and second derivatives.
///
/// When the function is an exponential polynomial the exact representation
/// is kept alongside, which the Darboux machinery uses for large `|x|`.
#[derive(Clone)]
pub struct SpinorFunction {
    jet: JetFn,
    expo: Option<Arc<ExpSpinor>>,
    label: EnergyLabel,
}

impl fmt::Debug for SpinorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpinorFunction")
            .field("label", &self.label)
            .field("structured", &self.expo.is_some())
            .finish()
    }
}

impl SpinorFunction {
    pub fn new<F>(label: EnergyLabel, jet: F) -> Self
    where
        F: Fn(f64) -> Jet + Send + Sync + 'static,
    {
        SpinorFunction {
            jet: Arc::new(jet),
            expo: None,
            label,
        }
    }

    pub fn from_expoly(label: EnergyLabel, s: ExpSpinor) -> Self {
        let d1 = spinor_derivative(&s);
        let d2 = spinor_derivative(&d1);
        let ev = |p: &ExpSpinor, x: f64| Spinor3([p[0].eval(x), p[1].eval(x), p[2].eval(x)]);
        let expo = Arc::new(s);
        let e = expo.clone();
        SpinorFunction {
            jet: Arc::new(move |x| Jet {
                value: ev(&e, x),
                d1: ev(&d1, x),
                d2: ev(&d2, x),
            }),
            expo: Some(expo),
            label,
        }
    }

    /// `nums / den` componentwise, evaluated with the dominant exponential
    /// factored out of both.
    pub fn from_rational(label: EnergyLabel, nums: ExpSpinor, den: ExpPoly) -> Self {
        let n1 = spinor_derivative(&nums);
        let n2 = spinor_derivative(&n1);
        let d1 = den.derivative();
        let d2 = d1.derivative();
        SpinorFunction::new(label, move |x| {
            let d = den.eval_scaled(x);
            let e1 = d1.eval_scaled(x).div(&d);
            let e2 = d2.eval_scaled(x).div(&d);
            let mut jet = Jet {
                value: Spinor3::ZERO,
                d1: Spinor3::ZERO,
                d2: Spinor3::ZERO,
            };
            for i in 0..3 {
                let q = nums[i].eval_scaled(x).div(&d);
                let q1 = n1[i].eval_scaled(x).div(&d) - q * e1;
                let q2 = n2[i].eval_scaled(x).div(&d) - q1 * e1 * 2.0 - q * e2;
                jet.value[i] = q;
                jet.d1[i] = q1;
                jet.d2[i] = q2;
            }
            jet
        })
    }

    pub fn label(&self) -> EnergyLabel {
        self.label
    }

    pub fn with_label(mut self, label: EnergyLabel) -> Self {
        self.label = label;
        self
    }

    pub fn jet(&self, x: f64) -> Jet {
        (self.jet)(x)
    }

    pub fn value(&self, x: f64) -> Spinor3 {
        self.jet(x).value
    }

    pub fn derivative(&self, x: f64) -> Spinor3 {
        self.jet(x).d1
    }

    pub fn second_derivative(&self, x: f64) -> Spinor3 {
        self.jet(x).d2
    }

    pub fn expoly(&self) -> Option<&ExpSpinor> {
        self.expo.as_deref()
    }

    /// Constant linear map applied pointwise.
    pub fn transform(&self, m: ComplexMatrix3, label: EnergyLabel) -> Self {
        let jet = self.jet.clone();
        let expo = self.expo.as_ref().map(|s| {
            Arc::new(std::array::from_fn(|i| {
                (0..3).fold(ExpPoly::zero(), |acc, k| acc + s[k].scale(m[(i, k)]))
            }))
        });
        SpinorFunction {
            jet: Arc::new(move |x| {
                let j = jet(x);
                Jet {
                    value: m * j.value,
                    d1: m * j.d1,
                    d2: m * j.d2,
                }
            }),
            expo,
            label,
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.transform(ComplexMatrix3::identity().scale(c), self.label)
    }
}

/// Scalar profile `χ` with derivatives up to third order.
#[derive(Clone)]
pub struct FlatBandProfile {
    jet: Arc<dyn Fn(f64) -> [C64; 4] + Send + Sync>,
    expo: Option<ExpPoly>,
    real: bool,
    name: String,
}

impl fmt::Debug for FlatBandProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FlatBandProfile({})", self.name)
    }
}

impl FlatBandProfile {
    /// Custom profile; the closure returns `[χ, χ′, χ″, χ‴]`.
    pub fn custom<F>(name: &str, real: bool, jet: F) -> Self
    where
        F: Fn(f64) -> [C64; 4] + Send + Sync + 'static,
    {
        FlatBandProfile {
            jet: Arc::new(jet),
            expo: None,
            real,
            name: name.to_string(),
        }
    }

    pub fn from_expoly(name: &str, p: ExpPoly) -> Self {
        let real = p
            .terms()
            .iter()
            .all(|t| t.coeff.im == 0.0 && t.rate.im == 0.0);
        let d1 = p.derivative();
        let d2 = d1.derivative();
        let d3 = d2.derivative();
        let q = p.clone();
        FlatBandProfile {
            jet: Arc::new(move |x| [q.eval(x), d1.eval(x), d2.eval(x), d3.eval(x)]),
            expo: Some(p),
            real,
            name: name.to_string(),
        }
    }

    pub fn cosh(k: f64) -> Self {
        Self::from_expoly(&format!("cosh({k}x)"), ExpPoly::cosh(k))
    }

    pub fn sinh(k: f64) -> Self {
        Self::from_expoly(&format!("sinh({k}x)"), ExpPoly::sinh(k))
    }

    pub fn exp(rate: C64) -> Self {
        Self::from_expoly(&format!("exp({rate}x)"), ExpPoly::exp(C64::from(1.0), rate))
    }

    /// Degenerate Bloch wave `e^{iκx}`.
    pub fn plane_wave(kappa: f64) -> Self {
        Self::from_expoly(
            &format!("exp(i{kappa}x)"),
            ExpPoly::exp(C64::from(1.0), C64::new(0.0, kappa)),
        )
    }

    /// `(Σ c_p x^p)·e^{rate·x}`.
    pub fn poly_exp(coeffs: &[f64], rate: f64) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(p, &c)| ExpPoly::term(C64::from(c), p as u32, C64::from(rate)))
            .fold(ExpPoly::zero(), |acc, t| acc + t);
        Self::from_expoly(&format!("poly·exp({rate}x)"), terms)
    }

    /// Gaussian-windowed plane wave `exp(−(x−x₀)²/(2w²) + iκx)`.
    pub fn gaussian_packet(center: f64, width: f64, kappa: f64) -> Self {
        let w2 = width * width;
        Self::custom(
            &format!("gauss({center},{width},{kappa})"),
            kappa == 0.0,
            move |x| {
                let g = C64::new(-(x - center) / w2, kappa);
                let gp = -1.0 / w2;
                let chi = (C64::new(-(x - center).powi(2) / (2.0 * w2), kappa * x)).exp();
                [
                    chi,
                    g * chi,
                    (g * g + gp) * chi,
                    (g * g * g + 3.0 * g * gp) * chi,
                ]
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// True when `χ` is real-valued on the real line.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn jet(&self, x: f64) -> [C64; 4] {
        (self.jet)(x)
    }

    pub fn chi(&self, x: f64) -> C64 {
        self.jet(x)[0]
    }

    pub fn chi_prime(&self, x: f64) -> C64 {
        self.jet(x)[1]
    }

    pub fn chi_double_prime(&self, x: f64) -> C64 {
        self.jet(x)[2]
    }

    pub fn expoly(&self) -> Option<&ExpPoly> {
        self.expo.as_ref()
    }
}

/// `H = −i·hv·γ∂ₓ + V(x)`.
#[derive(Clone)]
pub struct DiracModel {
    pub gamma: ComplexMatrix3,
    pub hv: f64,
    potential: MatrixFn,
    potential_derivative: Option<MatrixFn>,
}

impl fmt::Debug for DiracModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiracModel")
            .field("gamma", &self.gamma)
            .field("hv", &self.hv)
            .field("potential(0)", &self.potential(0.0))
            .finish()
    }
}

impl DiracModel {
    pub fn new<F>(hv: f64, potential: F) -> Self
    where
        F: Fn(f64) -> ComplexMatrix3 + Send + Sync + 'static,
    {
        DiracModel {
            gamma: s1(),
            hv,
            potential: Arc::new(potential),
            potential_derivative: None,
        }
    }

    pub fn with_derivative<F>(mut self, dv: F) -> Self
    where
        F: Fn(f64) -> ComplexMatrix3 + Send + Sync + 'static,
    {
        self.potential_derivative = Some(Arc::new(dv));
        self
    }

    pub fn potential(&self, x: f64) -> ComplexMatrix3 {
        (self.potential)(x)
    }

    /// Analytic `V′(x)` when one was supplied.
    pub fn potential_derivative(&self, x: f64) -> Option<ComplexMatrix3> {
        self.potential_derivative.as_ref().map(|d| d(x))
    }

    /// `(HΨ)(x)` from a value and its derivative.
    pub fn apply_at(&self, x: f64, value: Spinor3, d1: Spinor3) -> Spinor3 {
        (self.gamma * d1) * C64::new(0.0, -self.hv) + self.potential(x) * value
    }

    pub fn apply(&self, psi: &SpinorFunction, x: f64) -> Spinor3 {
        let j = psi.jet(x);
        self.apply_at(x, j.value, j.d1)
    }

    /// `‖(H − e)Ψ(x)‖∞`.
    pub fn residual_at(&self, psi: &SpinorFunction, e: f64, x: f64) -> f64 {
        let j = psi.jet(x);
        (self.apply_at(x, j.value, j.d1) - j.value * e).norm_inf()
    }
}

pub fn free_hamiltonian(m: f64, hv: f64) -> Result<DiracModel> {
    if !(hv > 0.0) || !hv.is_finite() || !m.is_finite() {
        return Err(Error::InvalidParameters(format!(
            "hv must be positive and finite, m finite (hv = {hv}, m = {m})"
        )));
    }
    let v = s3() * m;
    Ok(DiracModel::new(hv, move |_| v).with_derivative(|_| ComplexMatrix3::ZERO))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// `ψ_A ∝ cosh`.
    EvenA,
    /// `ψ_A ∝ sinh`.
    OddA,
}

/// Bound-type free solution at energy `|eps| < |m|`.
pub fn gap_solution(eps: f64, m: f64, hv: f64, parity: Parity) -> Result<SpinorFunction> {
    if !(eps.abs() < m.abs()) {
        return Err(Error::EnergyOutOfRange { eps, m });
    }
    if !(hv > 0.0) {
        return Err(Error::InvalidParameters(format!("hv must be positive, got {hv}")));
    }
    let nu = (m * m - eps * eps).sqrt() / hv;
    let (a, bc) = match parity {
        Parity::OddA => (ExpPoly::sinh(nu), ExpPoly::cosh(nu)),
        Parity::EvenA => (ExpPoly::cosh(nu), ExpPoly::sinh(nu)),
    };
    let s = [
        a.scale(C64::from(hv * nu)),
        bc.scale(I * eps),
        bc.scale(C64::from(-m)),
    ];
    Ok(SpinorFunction::from_expoly(EnergyLabel::Energy(eps), s))
}

/// Solution at the band threshold `E = sign·m`, linear in `x`.
pub fn threshold_solution(sign: i32, l0: C64, l1: C64, m: f64, hv: f64) -> Result<SpinorFunction> {
    if l0 == C64::new(0.0, 0.0) && l1 == C64::new(0.0, 0.0) {
        return Err(Error::DegenerateSeed);
    }
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidParameters(format!("sign must be ±1, got {sign}")));
    }
    let sg = sign as f64;
    let x = ExpPoly::x();
    let s = [
        ExpPoly::constant(l1 * hv),
        x.scale(I * sg * l1 * m) + ExpPoly::constant(l0),
        x.scale(-l1 * m) + ExpPoly::constant(I * sg * l0),
    ];
    Ok(SpinorFunction::from_expoly(EnergyLabel::Energy(sg * m), s))
}

/// Zero-energy state `(m·χ, 0, −hv·χ′)`.
pub fn flat_band_solution(profile: &FlatBandProfile, m: f64, hv: f64) -> SpinorFunction {
    if let Some(p) = profile.expoly() {
        let s = [
            p.scale(C64::from(m)),
            ExpPoly::zero(),
            p.derivative().scale(C64::from(-hv)),
        ];
        return SpinorFunction::from_expoly(EnergyLabel::FlatBand, s);
    }
    let prof = profile.clone();
    SpinorFunction::new(EnergyLabel::FlatBand, move |x| {
        let [c0, c1, c2, c3] = prof.jet(x);
        let z = C64::new(0.0, 0.0);
        Jet {
            value: Spinor3([c0 * m, z, -c1 * hv]),
            d1: Spinor3([c1 * m, z, -c2 * hv]),
            d2: Spinor3([c2 * m, z, -c3 * hv]),
        }
    })
}

/// `S·Ψ`, the solution at the opposite energy.
pub fn chiral_partner(psi: &SpinorFunction) -> SpinorFunction {
    psi.transform(chiral(), psi.label().negated())
}
