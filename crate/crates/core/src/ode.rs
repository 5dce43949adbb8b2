//! Adaptive Dormand–Prince 5(4) integrator for real state vectors.
//!
//! Complex systems are packed as interleaved `(re, im)` pairs by the callers.
//! The integrator always lands exactly on the requested end time, so callers
//! split integrations at pulse-segment edges and sample times.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}, error norm {err:.3e})")]
    StepUnderflow { t: f64, h: f64, err: f64 },
    #[error("step budget of {steps} exhausted at t = {t:.6e}")]
    MaxSteps { t: f64, steps: usize },
    #[error("non-finite state at t = {t:.6e}")]
    NonFinite { t: f64 },
}

/// Counters from one integration call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step as a fraction of the integration span (0 disables the cap).
    pub max_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self::new(1e-9, 1e-12)
    }
}

// Butcher tableau.
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂ (error weights); the 7th stage is the FSAL derivative.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_step_fraction: 0.0,
            max_steps: 2_000_000,
        }
    }

    pub fn with_max_step_fraction(mut self, frac: f64) -> Self {
        self.max_step_fraction = frac;
        self
    }

    fn norm(&self, y0: &[f64], y1: &[f64], e: &[f64]) -> f64 {
        let n = y0.len().max(1) as f64;
        let s: f64 = y0
            .iter()
            .zip(y1)
            .zip(e)
            .map(|((a, b), e)| {
                let sc = self.atol + self.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    fn initial_step<F>(&self, f: &mut F, t: f64, y: &[f64], f0: &[f64], span: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let dim = y.len();
        let sc: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let d0 = rms_scaled(y, &sc);
        let d1 = rms_scaled(f0, &sc);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1: Vec<f64> = (0..dim).map(|i| y[i] + h0 * f0[i]).collect();
        let mut f1 = vec![0.0; dim];
        f(t + h0, &y1, &mut f1);
        let diff: Vec<f64> = (0..dim).map(|i| f1[i] - f0[i]).collect();
        let d2 = rms_scaled(&diff, &sc) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Advance `y` from `t0` to `t1` in place.
    pub fn integrate<F>(&self, mut f: F, t0: f64, t1: f64, y: &mut [f64]) -> Result<Stats, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let mut stats = Stats::default();
        let span = t1 - t0;
        if span == 0.0 || y.is_empty() {
            return Ok(stats);
        }
        let dir = span.signum();
        let span = span.abs();
        let h_max = if self.max_step_fraction > 0.0 {
            self.max_step_fraction * span
        } else {
            span
        };
        let dim = y.len();
        let mut k = [
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
            vec![0.0; dim],
        ];
        let mut tmp = vec![0.0; dim];
        let mut ynew = vec![0.0; dim];
        let mut err = vec![0.0; dim];

        let mut t = t0;
        f(t, y, &mut k[0]);
        stats.evaluations += 1;
        let mut h = self.initial_step(&mut f, t, y, &k[0], span).min(h_max);
        stats.evaluations += 1;
        let mut last_rejected = false;

        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= span * 1e-15 {
                break;
            }
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(OdeError::MaxSteps {
                    t,
                    steps: self.max_steps,
                });
            }
            let mut final_step = false;
            if h >= remaining {
                h = remaining;
                final_step = true;
            }
            let hs = h * dir;

            let [k1, k2, k3, k4, k5, k6, k7] = &mut k;
            for i in 0..dim {
                tmp[i] = y[i] + hs * A21 * k1[i];
            }
            f(t + C2 * hs, &tmp, k2);
            for i in 0..dim {
                tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * hs, &tmp, k3);
            for i in 0..dim {
                tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * hs, &tmp, k4);
            for i in 0..dim {
                tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * hs, &tmp, k5);
            for i in 0..dim {
                tmp[i] = y[i]
                    + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if final_step { t1 } else { t + hs };
            f(t + hs, &tmp, k6);
            for i in 0..dim {
                ynew[i] =
                    y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            f(t_new, &ynew, k7);
            for i in 0..dim {
                err[i] = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            stats.evaluations += 6;

            let en = self.norm(y, &ynew, &err);
            if !en.is_finite() {
                if h > span * 1e-14 {
                    h *= 0.1;
                    stats.rejected += 1;
                    last_rejected = true;
                    continue;
                }
                return Err(OdeError::NonFinite { t });
            }
            if en <= 1.0 {
                y.copy_from_slice(&ynew);
                t = t_new;
                std::mem::swap(k1, k7);
                stats.accepted += 1;
                let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                last_rejected = false;
                if final_step {
                    break;
                }
                h = (h * fac).min(h_max);
            } else {
                stats.rejected += 1;
                last_rejected = true;
                h *= (0.9 * en.powf(-0.2)).max(0.2);
                if h < span * 1e-14 || h < f64::EPSILON * t.abs().max(span) {
                    return Err(OdeError::StepUnderflow { t, h, err: en });
                }
            }
        }
        Ok(stats)
    }

    /// Integrate through the sorted interior `stops`, calling `observe` at
    /// `t0`, every stop, and `t1`.
    pub fn integrate_observed<F, O>(
        &self,
        mut f: F,
        t0: f64,
        t1: f64,
        stops: &[f64],
        y: &mut [f64],
        mut observe: O,
    ) -> Result<Stats, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]),
    {
        let mut stats = Stats::default();
        let mut t = t0;
        observe(t, y);
        for &s in stops.iter().filter(|&&s| s > t0 && s < t1) {
            stats += self.integrate(&mut f, t, s, y)?;
            t = s;
            observe(t, y);
        }
        stats += self.integrate(&mut f, t, t1, y)?;
        if t1 != t0 {
            observe(t1, y);
        }
        Ok(stats)
    }
}

fn rms_scaled(v: &[f64], sc: &[f64]) -> f64 {
    let n = v.len().max(1) as f64;
    (v.iter().zip(sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = [1.0];
        let s = Dopri5::new(1e-10, 1e-14)
            .integrate(|_, y, d| d[0] = -2.0 * y[0], 0.0, 3.0, &mut y)
            .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
        assert!(s.accepted > 5);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let mut y = [0.0, 1.0];
        Dopri5::new(1e-11, 1e-14)
            .integrate(
                |_, y, d| {
                    d[0] = y[1];
                    d[1] = -y[0];
                },
                0.0,
                -10.0,
                &mut y,
            )
            .unwrap();
        assert!((y[0] - (-10.0f64).sin()).abs() < 1e-9);
        assert!((y[1] - (-10.0f64).cos()).abs() < 1e-9);
    }

    #[test]
    fn lands_on_stops() {
        let mut seen = Vec::new();
        let mut y = [0.0];
        Dopri5::default()
            .integrate_observed(
                |t, _, d| d[0] = t,
                0.0,
                2.0,
                &[0.5, 1.0],
                &mut y,
                |t, y| seen.push((t, y[0])),
            )
            .unwrap();
        let ts: Vec<f64> = seen.iter().map(|p| p.0).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0, 2.0]);
        assert!((seen[3].1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_span_is_noop() {
        let mut y = [4.0];
        let s = Dopri5::default()
            .integrate(|_, _, d| d[0] = 1.0, 1.0, 1.0, &mut y)
            .unwrap();
        assert_eq!(y[0], 4.0);
        assert_eq!(s, Stats::default());
    }

    #[test]
    fn step_budget_enforced() {
        let mut y = [1.0];
        let mut ode = Dopri5::new(1e-12, 1e-14);
        ode.max_steps = 3;
        let r = ode.integrate(|t, _, d| d[0] = (50.0 * t).cos(), 0.0, 10.0, &mut y);
        assert!(matches!(r, Err(OdeError::MaxSteps { .. })));
    }
}
