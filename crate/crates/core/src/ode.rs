//! Dormand-Prince 5(4) with adaptive step control on `C^N`.

use crate::{Error, Result, C64};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Optional cap on `|h|`.
    pub h_max: Option<f64>,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 1_000_000,
            h_max: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

fn axpy<const N: usize>(y: &[C64; N], h: f64, terms: &[(f64, &[C64; N])]) -> [C64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o += acc * h;
    }
    out
}

fn finite<const N: usize>(y: &[C64; N]) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

impl Dopri5 {
    /// Integrates `y′ = f(x, y)` from `x0` to `x1` (either direction).
    pub fn integrate<const N: usize, F>(&self, f: F, x0: f64, y0: [C64; N], x1: f64) -> Result<[C64; N]>
    where
        F: Fn(f64, &[C64; N]) -> Result<[C64; N]>,
    {
        self.integrate_with_stats(f, x0, y0, x1).map(|(y, _)| y)
    }

    pub fn integrate_with_stats<const N: usize, F>(
        &self,
        f: F,
        x0: f64,
        y0: [C64; N],
        x1: f64,
    ) -> Result<([C64; N], Stats)>
    where
        F: Fn(f64, &[C64; N]) -> Result<[C64; N]>,
    {
        let mut stats = Stats::default();
        let span = x1 - x0;
        if span == 0.0 {
            return Ok((y0, stats));
        }
        let dir = span.signum();
        let h_cap = self.h_max.unwrap_or(span.abs()).min(span.abs());

        let mut x = x0;
        let mut y = y0;
        let mut k1 = f(x, &y)?;
        stats.evals += 1;
        let mut h = self.initial_step(&f, x, &y, &k1, dir, h_cap, &mut stats)?;
        let mut last_err: f64 = 1e-4;

        while (x1 - x) * dir > 0.0 {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Integration(format!(
                    "step budget {} exhausted at x = {x}",
                    self.max_steps
                )));
            }
            let min_h = 16.0 * f64::EPSILON * x.abs().max(1.0);
            if h.abs() < min_h {
                return Err(Error::Integration(format!("step size underflow at x = {x}")));
            }
            let last = (x + h - x1) * dir >= 0.0;
            if last {
                h = x1 - x;
            }

            let k2 = f(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = f(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(x + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(
                x + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                x + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(x + h, &y_new)?;
            stats.evals += 6;

            let mut err_sq = 0.0;
            for i in 0..N {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                    * h;
                let sc = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / sc).powi(2);
            }
            let err = (err_sq / N as f64).sqrt();
            if !err.is_finite() || !finite(&y_new) {
                stats.rejected += 1;
                h *= 0.2;
                continue;
            }

            if err <= 1.0 {
                stats.accepted += 1;
                x = if last { x1 } else { x + h };
                y = y_new;
                k1 = k7;
                // PI controller (Hairer's beta = 0.04).
                let fac = 0.9 * err.max(1e-10).powf(-0.17) * last_err.powf(0.04);
                last_err = err.max(1e-4);
                h = (h * fac.clamp(0.2, 10.0)).abs().min(h_cap) * dir;
            } else {
                stats.rejected += 1;
                let fac = 0.9 * err.powf(-0.2);
                h *= fac.clamp(0.2, 1.0);
            }
        }
        Ok((y, stats))
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_step<const N: usize, F>(
        &self,
        f: &F,
        x: f64,
        y: &[C64; N],
        k1: &[C64; N],
        dir: f64,
        h_cap: f64,
        stats: &mut Stats,
    ) -> Result<f64>
    where
        F: Fn(f64, &[C64; N]) -> Result<[C64; N]>,
    {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].norm();
            d0 += (y[i].norm() / sc).powi(2);
            d1 += (k1[i].norm() / sc).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(h_cap);
        let y1 = axpy(y, h0 * dir, &[(1.0, k1)]);
        let k2 = f(x + h0 * dir, &y1)?;
        stats.evals += 1;
        let mut d2 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].norm();
            d2 += ((k2[i] - k1[i]).norm() / sc).powi(2);
        }
        d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(h_cap) * dir)
    }
}
