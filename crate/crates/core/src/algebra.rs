//! Dense 3×3 complex matrices, three-component spinors and the spin-1
//! generator constants shared by the whole crate.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Relative determinant guard used by [`invert3`].
pub const SINGULARITY_THRESHOLD: f64 = 1e-13;

/// Three complex components `(ψ_A, ψ_B, ψ_C)`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Spinor3(pub [C64; 3]);

impl Spinor3 {
    pub const ZERO: Spinor3 = Spinor3([ZERO; 3]);

    pub fn new(a: C64, b: C64, c: C64) -> Self {
        Spinor3([a, b, c])
    }

    pub fn real(a: f64, b: f64, c: f64) -> Self {
        Spinor3([C64::from(a), C64::from(b), C64::from(c)])
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn conj(&self) -> Self {
        Spinor3(self.0.map(|z| z.conj()))
    }

    /// Hermitian inner product ⟨self, other⟩ (antilinear in `self`).
    pub fn inner(&self, other: &Spinor3) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Spinor3(self.0.map(|z| z * s))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<usize> for Spinor3 {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Spinor3 {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for Spinor3 {
    type Output = Spinor3;
    fn add(self, rhs: Spinor3) -> Spinor3 {
        Spinor3([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for Spinor3 {
    type Output = Spinor3;
    fn sub(self, rhs: Spinor3) -> Spinor3 {
        Spinor3([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Neg for Spinor3 {
    type Output = Spinor3;
    fn neg(self) -> Spinor3 {
        Spinor3(self.0.map(|z| -z))
    }
}

impl Mul<C64> for Spinor3 {
    type Output = Spinor3;
    fn mul(self, rhs: C64) -> Spinor3 {
        self.scale(rhs)
    }
}

impl Mul<f64> for Spinor3 {
    type Output = Spinor3;
    fn mul(self, rhs: f64) -> Spinor3 {
        Spinor3(self.0.map(|z| z * rhs))
    }
}

impl fmt::Debug for Spinor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

/// Dense row-major 3×3 complex matrix.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct ComplexMatrix3(pub [[C64; 3]; 3]);

impl ComplexMatrix3 {
    pub const ZERO: ComplexMatrix3 = ComplexMatrix3([[ZERO; 3]; 3]);

    pub fn identity() -> Self {
        Self::diag([ONE, ONE, ONE])
    }

    pub fn diag(d: [C64; 3]) -> Self {
        let mut m = Self::ZERO;
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    pub fn real_diag(d: [f64; 3]) -> Self {
        Self::diag(d.map(C64::from))
    }

    pub fn from_real(rows: [[f64; 3]; 3]) -> Self {
        ComplexMatrix3(rows.map(|r| r.map(C64::from)))
    }

    /// Builds a matrix from its three columns.
    pub fn from_columns(cols: [Spinor3; 3]) -> Self {
        let mut m = Self::ZERO;
        for (j, c) in cols.iter().enumerate() {
            for i in 0..3 {
                m.0[i][j] = c.0[i];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Spinor3 {
        Spinor3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn row(&self, i: usize) -> Spinor3 {
        Spinor3(self.0[i])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Self::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i].conj();
            }
        }
        t
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix3(self.0.map(|r| r.map(|z| z * s)))
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.0
            .iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Cofactor expansion along the first row.
    pub fn det(&self) -> C64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Classical adjugate (transposed cofactor matrix), so `A·adj(A) = det(A)·I`.
    pub fn adjugate(&self) -> Self {
        let a = &self.0;
        let mut adj = Self::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let (r0, r1) = others(j);
                let (c0, c1) = others(i);
                let minor = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                adj.0[i][j] = minor * sign;
            }
        }
        adj
    }

    pub fn mul_vec(&self, v: &Spinor3) -> Spinor3 {
        let mut out = Spinor3::ZERO;
        for i in 0..3 {
            out.0[i] = self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2];
        }
        out
    }

    /// Maximum entrywise distance to another matrix.
    pub fn max_diff(&self, other: &ComplexMatrix3) -> f64 {
        (*self - *other).max_abs()
    }
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

impl Index<(usize, usize)> for ComplexMatrix3 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for ComplexMatrix3 {
    type Output = ComplexMatrix3;
    fn add(self, rhs: ComplexMatrix3) -> ComplexMatrix3 {
        let mut out = self;
        out += rhs;
        out
    }
}

impl AddAssign for ComplexMatrix3 {
    fn add_assign(&mut self, rhs: ComplexMatrix3) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for ComplexMatrix3 {
    type Output = ComplexMatrix3;
    fn sub(self, rhs: ComplexMatrix3) -> ComplexMatrix3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

impl Neg for ComplexMatrix3 {
    type Output = ComplexMatrix3;
    fn neg(self) -> ComplexMatrix3 {
        ComplexMatrix3(self.0.map(|r| r.map(|z| -z)))
    }
}

impl Mul for ComplexMatrix3 {
    type Output = ComplexMatrix3;
    fn mul(self, rhs: ComplexMatrix3) -> ComplexMatrix3 {
        let mut out = ComplexMatrix3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[i][0] * rhs.0[0][j]
                    + self.0[i][1] * rhs.0[1][j]
                    + self.0[i][2] * rhs.0[2][j];
            }
        }
        out
    }
}

impl Mul<Spinor3> for ComplexMatrix3 {
    type Output = Spinor3;
    fn mul(self, rhs: Spinor3) -> Spinor3 {
        self.mul_vec(&rhs)
    }
}

impl Mul<C64> for ComplexMatrix3 {
    type Output = ComplexMatrix3;
    fn mul(self, rhs: C64) -> ComplexMatrix3 {
        self.scale(rhs)
    }
}

impl Mul<f64> for ComplexMatrix3 {
    type Output = ComplexMatrix3;
    fn mul(self, rhs: f64) -> ComplexMatrix3 {
        ComplexMatrix3(self.0.map(|r| r.map(|z| z * rhs)))
    }
}

impl Mul<ComplexMatrix3> for f64 {
    type Output = ComplexMatrix3;
    fn mul(self, rhs: ComplexMatrix3) -> ComplexMatrix3 {
        rhs * self
    }
}

impl Mul<ComplexMatrix3> for C64 {
    type Output = ComplexMatrix3;
    fn mul(self, rhs: ComplexMatrix3) -> ComplexMatrix3 {
        rhs * self
    }
}

impl fmt::Debug for ComplexMatrix3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for r in &self.0 {
            writeln!(f, "  [{}, {}, {}]", r[0], r[1], r[2])?;
        }
        write!(f, "]")
    }
}

/// The spin-1 matrices of the Lieb-lattice low-energy Hamiltonian plus the
/// chiral operator `s` and the diagonal `s3t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinGenerators {
    pub s1: ComplexMatrix3,
    pub s2: ComplexMatrix3,
    pub s3: ComplexMatrix3,
    pub s1t: ComplexMatrix3,
    pub s2t: ComplexMatrix3,
    pub s: ComplexMatrix3,
    pub s3t: ComplexMatrix3,
}

impl SpinGenerators {
    pub fn all(&self) -> [(&'static str, ComplexMatrix3); 7] {
        [
            ("S1", self.s1),
            ("S2", self.s2),
            ("S3", self.s3),
            ("S1~", self.s1t),
            ("S2~", self.s2t),
            ("S", self.s),
            ("S3~", self.s3t),
        ]
    }
}

pub fn spin_generators() -> SpinGenerators {
    SpinGenerators {
        s1: s1(),
        s2: s2(),
        s3: s3(),
        s1t: s1_tilde(),
        s2t: s2_tilde(),
        s: chiral(),
        s3t: s3_tilde(),
    }
}

pub fn s1() -> ComplexMatrix3 {
    ComplexMatrix3::from_real([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
}

pub fn s2() -> ComplexMatrix3 {
    ComplexMatrix3::from_real([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
}

pub fn s3() -> ComplexMatrix3 {
    let mut m = ComplexMatrix3::ZERO;
    m.0[1][2] = -I;
    m.0[2][1] = I;
    m
}

pub fn s1_tilde() -> ComplexMatrix3 {
    let mut m = ComplexMatrix3::ZERO;
    m.0[0][1] = -I;
    m.0[1][0] = I;
    m
}

pub fn s2_tilde() -> ComplexMatrix3 {
    let mut m = ComplexMatrix3::ZERO;
    m.0[0][2] = -I;
    m.0[2][0] = I;
    m
}

/// Chiral operator `diag(1, -1, 1)`.
pub fn chiral() -> ComplexMatrix3 {
    ComplexMatrix3::real_diag([1.0, -1.0, 1.0])
}

pub fn s3_tilde() -> ComplexMatrix3 {
    ComplexMatrix3::real_diag([1.0, -1.0, 0.0])
}

pub fn commutator(a: &ComplexMatrix3, b: &ComplexMatrix3) -> ComplexMatrix3 {
    *a * *b - *b * *a
}

pub fn anticommutator(a: &ComplexMatrix3, b: &ComplexMatrix3) -> ComplexMatrix3 {
    *a * *b + *b * *a
}

/// Inverse by adjugate, refusing matrices with `|det| ≤ 1e-13·‖A‖∞³`.
pub fn invert3(a: &ComplexMatrix3) -> Result<ComplexMatrix3> {
    let det = a.det();
    let scale = a.norm_inf();
    if !(det.norm() > SINGULARITY_THRESHOLD * scale * scale * scale) {
        return Err(Error::SingularMatrix { det });
    }
    Ok(a.adjugate().scale(det.inv()))
}

/// Largest Hermiticity violation of a matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermiticityDefect {
    pub hermitian: bool,
    pub max_defect: f64,
    /// Zero-based `(row, column)` of the worst entry.
    pub index: (usize, usize),
}

pub fn is_hermitian(a: &ComplexMatrix3, tol: f64) -> HermiticityDefect {
    let mut max_defect = 0.0;
    let mut index = (0, 0);
    for i in 0..3 {
        for j in 0..3 {
            let d = (a.0[i][j] - a.0[j][i].conj()).norm();
            if d > max_defect {
                max_defect = d;
                index = (i, j);
            }
        }
    }
    HermiticityDefect {
        hermitian: max_defect <= tol,
        max_defect,
        index,
    }
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
///
/// Trigonometric solution of the characteristic cubic followed by a
/// guarded Newton polish on each root.
pub fn hermitian_eigenvalues(a: &ComplexMatrix3) -> [f64; 3] {
    let d = [a.0[0][0].re, a.0[1][1].re, a.0[2][2].re];
    let h = |i: usize, j: usize| (a.0[i][j] + a.0[j][i].conj()) * 0.5;
    let (x01, x02, x12) = (h(0, 1), h(0, 2), h(1, 2));
    let p1 = x01.norm_sqr() + x02.norm_sqr() + x12.norm_sqr();
    let mut ev = if p1 == 0.0 {
        d
    } else {
        let q = (d[0] + d[1] + d[2]) / 3.0;
        let p2 = (d[0] - q).powi(2) + (d[1] - q).powi(2) + (d[2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let (b0, b1, b2) = ((d[0] - q) / p, (d[1] - q) / p, (d[2] - q) / p);
        let (c01, c02, c12) = (x01 / p, x02 / p, x12 / p);
        // det of the Hermitian matrix B = (A − qI)/p
        let det_b = b0 * b1 * b2 + 2.0 * (c01 * c12 * c02.conj()).re
            - b0 * c12.norm_sqr()
            - b1 * c02.norm_sqr()
            - b2 * c01.norm_sqr();
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    };

    let tr = d[0] + d[1] + d[2];
    let minors = d[0] * d[1] + d[0] * d[2] + d[1] * d[2] - p1;
    let det = d[0] * d[1] * d[2] + 2.0 * (x01 * x12 * x02.conj()).re
        - d[0] * x12.norm_sqr()
        - d[1] * x02.norm_sqr()
        - d[2] * x01.norm_sqr();
    let poly = |l: f64| ((l - tr) * l + minors) * l - det;
    let dpoly = |l: f64| (3.0 * l - 2.0 * tr) * l + minors;
    for l in ev.iter_mut() {
        for _ in 0..3 {
            let f = poly(*l);
            let g = dpoly(*l);
            if f == 0.0 || g.abs() < 1e-8 * (1.0 + l.abs() * l.abs()) {
                break;
            }
            let next = *l - f / g;
            if poly(next).abs() < f.abs() {
                *l = next;
            } else {
                break;
            }
        }
    }
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Entrywise product written out by hand, independent of `Mul`.
    fn naive_product(a: &ComplexMatrix3, b: &ComplexMatrix3) -> ComplexMatrix3 {
        let mut out = ComplexMatrix3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..3 {
                    acc += a.0[i][k] * b.0[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }

    #[test]
    fn generators_match_literal_entries() {
        let g = spin_generators();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if (i, j) == (0, 1) || (i, j) == (1, 0) { 1.0 } else { 0.0 };
                assert_eq!(g.s1[(i, j)], c(expected, 0.0));
            }
        }
        assert_eq!(g.s3[(1, 2)], c(0.0, -1.0));
        assert_eq!(g.s3[(2, 1)], c(0.0, 1.0));
        assert_eq!(g.s3.max_abs(), 1.0);
        assert_eq!(g.s, ComplexMatrix3::real_diag([1.0, -1.0, 1.0]));
        assert_eq!(g.s1t[(0, 1)], c(0.0, -1.0));
        assert_eq!(g.s2t[(2, 0)], c(0.0, 1.0));
        assert_eq!(g.s3t, ComplexMatrix3::real_diag([1.0, -1.0, 0.0]));
    }

    #[test]
    fn chiral_operator_anticommutes_exactly() {
        let g = spin_generators();
        for m in [g.s1, g.s1t, g.s3] {
            assert_eq!(anticommutator(&g.s, &m), ComplexMatrix3::ZERO);
        }
        for m in [g.s2, g.s2t, g.s3t] {
            assert_eq!(commutator(&g.s, &m), ComplexMatrix3::ZERO);
        }
    }

    #[test]
    fn all_generators_hermitian() {
        for (name, m) in spin_generators().all() {
            assert!(is_hermitian(&m, 1e-15).hermitian, "{name}");
        }
    }

    #[test]
    fn commutator_basics() {
        let g = spin_generators();
        let a = ComplexMatrix3([
            [c(1.0, 2.0), c(0.5, 0.0), c(-1.0, 1.0)],
            [c(0.0, 0.3), c(2.0, 0.0), c(0.0, 0.0)],
            [c(4.0, -1.0), c(0.0, 1.0), c(1.0, 1.0)],
        ]);
        assert_eq!(commutator(&ComplexMatrix3::identity(), &a), ComplexMatrix3::ZERO);
        assert_eq!(commutator(&g.s1, &g.s1), ComplexMatrix3::ZERO);
        let expected = naive_product(&g.s1, &g.s2) - naive_product(&g.s2, &g.s1);
        assert_eq!(commutator(&g.s1, &g.s2), expected);
        // [S1, S2] has support only on the (2,3)/(3,2) pair, like S3.
        let comm = commutator(&g.s1, &g.s2);
        assert_eq!(comm[(1, 2)], c(1.0, 0.0));
        assert_eq!(comm[(2, 1)], c(-1.0, 0.0));
        assert_eq!(comm, g.s3.scale(c(0.0, 1.0)));
    }

    #[test]
    fn invert_diagonal() {
        assert_eq!(invert3(&ComplexMatrix3::identity()).unwrap(), ComplexMatrix3::identity());
        let d = ComplexMatrix3::diag([c(2.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let inv = invert3(&d).unwrap();
        let expected = ComplexMatrix3::diag([c(0.5, 0.0), c(0.0, -1.0), c(-1.0, 0.0)]);
        assert!(inv.max_diff(&expected) < 1e-15);
    }

    #[test]
    fn invert_singular_reports_det() {
        let m = ComplexMatrix3::from_real([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        match invert3(&m) {
            Err(Error::SingularMatrix { det }) => assert!(det.norm() < 1e-12),
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn hermiticity_defect_location() {
        let mut m = s1_tilde();
        m[(0, 1)] += c(0.1, 0.0);
        let report = is_hermitian(&m, 1e-14);
        assert!(!report.hermitian);
        assert!((report.max_defect - 0.1).abs() < 1e-15);
        assert!(report.index == (0, 1) || report.index == (1, 0));
        assert!(is_hermitian(&s3(), 1e-14).hermitian);
    }

    #[test]
    fn adjugate_identity() {
        let a = ComplexMatrix3([
            [c(1.0, 2.0), c(0.5, 0.0), c(-1.0, 1.0)],
            [c(0.0, 0.3), c(2.0, 0.0), c(0.0, 0.0)],
            [c(4.0, -1.0), c(0.0, 1.0), c(1.0, 1.0)],
        ]);
        let prod = a * a.adjugate();
        let expected = ComplexMatrix3::identity().scale(a.det());
        assert!(prod.max_diff(&expected) < 1e-13);
    }

    #[test]
    fn hermitian_eigenvalues_known_spectra() {
        // k S₁ + m S₃: {−√(k²+m²), 0, √(k²+m²)}
        let a = s1() * 0.6 + s3() * 0.8;
        let ev = hermitian_eigenvalues(&a);
        assert!((ev[0] + 1.0).abs() < 1e-15 && ev[1].abs() < 1e-15 && (ev[2] - 1.0).abs() < 1e-15);
        let d = hermitian_eigenvalues(&ComplexMatrix3::real_diag([2.0, -1.0, 0.5]));
        assert_eq!(d, [-1.0, 0.5, 2.0]);
        let z = hermitian_eigenvalues(&ComplexMatrix3::ZERO);
        assert_eq!(z, [0.0; 3]);
    }
}
