//! Optimal-control constraint machinery.
//!
//! Block `n` sees the effective complex drive
//! `Π_n = Ω_{n−1}e^{i(φ_{n−1}−χt)} + Ω_n e^{iφ_n} + Ω_{n+1}e^{i(φ_{n+1}+χt)}`
//! and the generalized Rabi frequency `Ξ_n = √(Δ_n² + |Π_n|²)`. For frozen
//! `(Δ, Π)` the adjoint states obey `i∂λ₁ = ½(Δλ₁ + Π*λ₂)`,
//! `i∂λ₂ = ½(Πλ₁ − Δλ₂)` with `λ(T) = (e^{iθ}, 0)`, solved in closed form by
//! `λ₁ = e^{iθ}[cos(Ξs/2) − i(Δ/Ξ)sin(Ξs/2)]`, `λ₂ = −ie^{iθ}(Π/Ξ)sin(Ξs/2)`,
//! `s = t − T`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_block, EvolveOptions};
use crate::error::{domain, Error, Result};
use crate::linalg::{inner, norm_sqr, Mat2, Vec2, I, ZERO};
use crate::metrics::closed_fidelity;
use crate::par::{map_indexed, Execution};
use crate::pulse::{PulseSchedule, SnapTarget};
use crate::system::{block_hamiltonian_in_segment, BlockMode, SystemParams};

/// Sum of `Ω e^{iφ}` and of `Δ` over the tones addressing `level`.
fn level_drive(schedule: &PulseSchedule, level: usize, seg: usize, t: f64) -> (C64, f64) {
    let mut a = ZERO;
    let mut d = 0.0;
    for (i, tone) in schedule.tones.iter().enumerate() {
        if tone.level == level {
            let v = schedule.tone_value(i, seg, t);
            a += C64::from_polar(v.omega, v.phi);
            d += v.delta;
        }
    }
    (a, d)
}

fn pi_in_segment(
    schedule: &PulseSchedule,
    n: usize,
    seg: usize,
    t: f64,
    chi: f64,
    extended: bool,
) -> C64 {
    let levels = schedule.levels();
    let (lo, hi) = if extended {
        (0, levels)
    } else {
        (n.saturating_sub(1), (n + 2).min(levels))
    };
    (lo..hi)
        .map(|m| {
            let (a, _) = level_drive(schedule, m, seg, t);
            a * C64::from_polar(1.0, (m as f64 - n as f64) * chi * t)
        })
        .sum()
}

/// `Π_n(t)`. With `extended`, every tone contributes with phase
/// `(m − n)χt`; otherwise only `|m − n| ≤ 1`.
pub fn pi_n(schedule: &PulseSchedule, n: usize, t: f64, chi: f64, extended: bool) -> Result<C64> {
    let Some(seg) = schedule.segment_at(t) else {
        return domain(format!("t = {t:e} outside schedule"));
    };
    Ok(pi_in_segment(schedule, n, seg, t, chi, extended))
}

/// Detuning of block `n` at `t`.
pub fn delta_n(schedule: &PulseSchedule, n: usize, t: f64) -> Result<f64> {
    let Some(seg) = schedule.segment_at(t) else {
        return domain(format!("t = {t:e} outside schedule"));
    };
    Ok(level_drive(schedule, n, seg, t).1)
}

pub fn xi_n(delta: f64, pi: C64) -> f64 {
    (delta * delta + pi.norm_sqr()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QocfObjective {
    pub j1: f64,
    pub j2: f64,
    pub j_total: f64,
}

/// Sampled trajectory data for the Schrödinger-consistency term.
#[derive(Debug, Clone, Copy)]
pub struct J2Data<'a> {
    /// Uniform grid with an odd number (≥ 5) of points.
    pub times: &'a [f64],
    pub psi: &'a [Vec2],
    pub lambda: &'a [Vec2],
    pub hamiltonians: &'a [Mat2],
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

fn uniform_step(times: &[f64], min_len: usize) -> Result<f64> {
    if times.len() < min_len || times.len() % 2 == 0 {
        return domain(format!("need an odd number of samples, at least {min_len}"));
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(h > 0.0)
        || times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
    {
        return domain("samples must lie on a uniform increasing grid");
    }
    Ok(h)
}

/// Fourth-order finite-difference derivative of a uniformly sampled state.
fn derivative(psi: &[Vec2], h: f64) -> Vec<Vec2> {
    let n = psi.len();
    let c = |k: usize, w: [f64; 5], idx: [usize; 5]| -> C64 {
        (0..5).map(|j| psi[idx[j]][k] * w[j]).sum::<C64>() / (12.0 * h)
    };
    (0..n)
        .map(|i| {
            let (w, idx) = if i >= 2 && i + 2 < n {
                ([1.0, -8.0, 0.0, 8.0, -1.0], [i - 2, i - 1, i, i + 1, i + 2])
            } else if i == 0 {
                ([-25.0, 48.0, -36.0, 16.0, -3.0], [0, 1, 2, 3, 4])
            } else if i == 1 {
                ([-3.0, -10.0, 18.0, -6.0, 1.0], [0, 1, 2, 3, 4])
            } else if i == n - 1 {
                (
                    [25.0, -48.0, 36.0, -16.0, 3.0],
                    [n - 1, n - 2, n - 3, n - 4, n - 5],
                )
            } else {
                (
                    [3.0, 10.0, -18.0, 6.0, -1.0],
                    [n - 1, n - 2, n - 3, n - 4, n - 5],
                )
            };
            [c(0, w, idx), c(1, w, idx)]
        })
        .collect()
}

/// `2 Im ∫⟨λ|(i∂t − H)|ψ⟩dt` by fourth-order differences and Simpson's rule.
pub fn j2_quadrature(data: &J2Data) -> Result<f64> {
    let n = data.times.len();
    if data.psi.len() != n || data.lambda.len() != n || data.hamiltonians.len() != n {
        return domain("trajectory arrays must have equal length");
    }
    let h = uniform_step(data.times, 5)?;
    let dpsi = derivative(data.psi, h);
    let w = simpson_weights(n, h);
    let mut acc = ZERO;
    for i in 0..n {
        let hp = data.hamiltonians[i].apply(&data.psi[i]);
        let v = [I * dpsi[i][0] - hp[0], I * dpsi[i][1] - hp[1]];
        acc += inner(&data.lambda[i], &v) * w[i];
    }
    Ok(2.0 * acc.im)
}

/// `J₁ = ‖ψ(T) − ψ_tar‖²` plus, when trajectory data are given, `J₂`.
pub fn lagrange_objective(
    final_state: &Vec2,
    target_state: &Vec2,
    j2: Option<&J2Data>,
) -> Result<QocfObjective> {
    for v in [final_state, target_state] {
        if (norm_sqr(v) - 1.0).abs() > 1e-8 {
            return domain("states must be normalized");
        }
    }
    let j1 = (2.0 - 2.0 * inner(target_state, final_state).re).max(0.0);
    let j2 = match j2 {
        Some(d) => j2_quadrature(d)?,
        None => 0.0,
    };
    Ok(QocfObjective {
        j1,
        j2,
        j_total: j1 + j2,
    })
}

/// Closed-form multipliers for frozen `(Δ, Π)`.
pub fn lagrange_multiplier(theta: f64, delta: f64, pi: C64, t: f64, t_final: f64) -> (C64, C64) {
    let xi = xi_n(delta, pi);
    let e = C64::from_polar(1.0, theta);
    let x = 0.5 * xi * (t - t_final);
    // sin(x)/Ξ → (t − T)/2 as Ξ → 0.
    let sinc = if xi == 0.0 {
        0.5 * (t - t_final)
    } else {
        x.sin() / xi
    };
    let l1 = e * (C64::new(x.cos(), 0.0) - I * delta * sinc);
    let l2 = -I * e * pi * sinc;
    (l1, l2)
}

/// Residual of the adjoint equations for the closed form at `t`, using a
/// five-point central difference with step `h`.
pub fn multiplier_ode_residual(
    theta: f64,
    delta: f64,
    pi: C64,
    t: f64,
    t_final: f64,
    h: f64,
) -> f64 {
    let at = |s: f64| lagrange_multiplier(theta, delta, pi, s, t_final);
    let pts: Vec<(C64, C64)> = [-2.0, -1.0, 1.0, 2.0]
        .iter()
        .map(|k| at(t + k * h))
        .collect();
    let d = |f: fn(&(C64, C64)) -> C64| {
        (f(&pts[0]) - 8.0 * f(&pts[1]) + 8.0 * f(&pts[2]) - f(&pts[3])) / (12.0 * h)
    };
    let d1 = d(|p| p.0);
    let d2 = d(|p| p.1);
    let (l1, l2) = at(t);
    let r1 = I * d1 - 0.5 * (delta * l1 + pi.conj() * l2);
    let r2 = I * d2 - 0.5 * (pi * l1 - delta * l2);
    r1.norm().max(r2.norm())
}

/// Power-series coefficients of the multipliers about `t = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSeries {
    pub a: Vec<C64>,
    pub b: Vec<C64>,
}

impl MultiplierSeries {
    /// Coefficients up to order `k_max` from
    /// `a_{k+1} = −i/(2(k+1))(Π* b_k + Δ a_k)`,
    /// `b_{k+1} = −i/(2(k+1))(Π a_k − Δ b_k)`, `a₀ = e^{iθ}`, `b₀ = 0`.
    pub fn new(theta: f64, delta: f64, pi: C64, k_max: usize) -> Self {
        let mut a = vec![C64::from_polar(1.0, theta)];
        let mut b = vec![ZERO];
        for k in 0..k_max {
            let f = -I / (2.0 * (k + 1) as f64);
            a.push(f * (pi.conj() * b[k] + delta * a[k]));
            b.push(f * (pi * a[k] - delta * b[k]));
        }
        Self { a, b }
    }

    /// Partial sums at `s = t − T`.
    pub fn eval(&self, s: f64) -> (C64, C64) {
        let mut p = 1.0;
        let mut l1 = ZERO;
        let mut l2 = ZERO;
        for (a, b) in self.a.iter().zip(&self.b) {
            l1 += a * p;
            l2 += b * p;
            p *= s;
        }
        (l1, l2)
    }
}

/// Which form of the constraint `Δ = −iΞ cot(·)` to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintForm {
    /// `cot(Ξ(t − T))`.
    Single,
    /// `cot(2Ξ(t − T))`.
    Doubled,
    /// `1/(2Ξs) − 2Ξs/3`, the two-term expansion of the doubled form.
    Series,
}

/// Distance below which `|sin(·)|` counts as a cotangent pole.
pub const POLE_TOL: f64 = 1e-6;

/// `|Δ + iΞ·g(Ξ(t − T))|` for the chosen form `g`.
pub fn constraint_residual(
    delta: f64,
    pi: C64,
    t: f64,
    t_final: f64,
    form: ConstraintForm,
) -> Result<f64> {
    let xi = xi_n(delta, pi);
    let s = t - t_final;
    let g = match form {
        ConstraintForm::Single | ConstraintForm::Doubled => {
            let arg = if form == ConstraintForm::Single {
                xi * s
            } else {
                2.0 * xi * s
            };
            let (sn, cs) = arg.sin_cos();
            if sn.abs() < POLE_TOL {
                return Err(Error::Pole { t });
            }
            cs / sn
        }
        ConstraintForm::Series => {
            let x = 2.0 * xi * s;
            if x.abs() < POLE_TOL {
                return Err(Error::Pole { t });
            }
            1.0 / x - x / 3.0
        }
    };
    Ok((C64::new(delta, 0.0) + I * xi * g).norm())
}

/// Time average of the constraint residual of block `n` over `samples`
/// midpoints of the gate; points on a pole are skipped. Returns the mean and
/// the number of skipped points.
pub fn mean_constraint_residual(
    schedule: &PulseSchedule,
    n: usize,
    chi: f64,
    form: ConstraintForm,
    samples: usize,
) -> Result<(f64, usize)> {
    if samples == 0 {
        return Err(Error::EmptyBudget);
    }
    let t_final = schedule.duration();
    let mut sum = 0.0;
    let mut used = 0;
    for k in 0..samples {
        let t = t_final * (k as f64 + 0.5) / samples as f64;
        let seg = schedule.segment_at(t).expect("interior point");
        let pi = pi_in_segment(schedule, n, seg, t, chi, false);
        let (_, d) = level_drive(schedule, n, seg, t);
        match constraint_residual(d, pi, t, t_final, form) {
            Ok(r) => {
                sum += r;
                used += 1;
            }
            Err(Error::Pole { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::Undefined("every sample sits on a pole".into()));
    }
    Ok((sum / used as f64, samples - used))
}

/// `J₂` for block `n` along its exact propagated state, with the frozen
/// closed-form multipliers at every sample. Each segment is sampled on its
/// own uniform grid of `points` (odd) so no difference stencil straddles a
/// control discontinuity.
pub fn block_j2(
    schedule: &PulseSchedule,
    n: usize,
    theta: f64,
    params: &SystemParams,
    mode: BlockMode,
    points: usize,
    opts: &EvolveOptions,
) -> Result<f64> {
    let t_final = schedule.duration();
    let mut times = Vec::new();
    for k in 0..schedule.n_segments() {
        let (a, b) = (schedule.edges[k], schedule.edges[k + 1]);
        times.extend((0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64));
    }
    let (_, states, _) = propagate_block(n, schedule, params, mode, &times, opts)?;
    let mut total = 0.0;
    for k in 0..schedule.n_segments() {
        let r = k * points..(k + 1) * points;
        let ts = &times[r.clone()];
        let psi = &states[r];
        let hs: Vec<Mat2> = ts
            .iter()
            .map(|&t| block_hamiltonian_in_segment(n, schedule, k, t, params, mode))
            .collect();
        let lam: Vec<Vec2> = ts
            .iter()
            .map(|&t| {
                let pi = pi_in_segment(schedule, n, k, t, params.chi, false);
                let (_, d) = level_drive(schedule, n, k, t);
                let (a, b) = lagrange_multiplier(theta, d, pi, t, t_final);
                [a, b]
            })
            .collect();
        total += j2_quadrature(&J2Data {
            times: ts,
            psi,
            lambda: &lam,
            hamiltonians: &hs,
        })?;
    }
    Ok(total)
}

/// Real offsets of the linear adjustment, indexed by level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjustmentParams {
    pub omega_eps: Vec<f64>,
    pub delta_eps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustOptions {
    /// Mode of the fidelity objective.
    pub mode: BlockMode,
    /// Amplitude offset bound as a fraction of Ω_M.
    pub omega_frac: f64,
    /// Detuning offset bound as a fraction of `max|Δ_n|`, or of Ω_M when the
    /// level is never detuned.
    pub delta_frac: f64,
    /// Points per axis of the coarse grid.
    pub grid: usize,
    /// Pattern search stops below this step (fraction of Ω_M).
    pub min_step_frac: f64,
    /// Objective evaluations allowed per subspace.
    pub max_evals: usize,
    /// Gauss–Seidel passes over the subspaces.
    pub passes: usize,
    pub unitary: EvolveOptions,
    pub exec: Execution,
}

impl Default for AdjustOptions {
    fn default() -> Self {
        Self {
            mode: BlockMode::Full,
            omega_frac: 0.1,
            delta_frac: 0.1,
            grid: 11,
            min_step_frac: 1e-3,
            max_evals: 400,
            passes: 1,
            unitary: EvolveOptions::unitary().with_exec(Execution::Sequential),
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub pass: usize,
    pub subspace: usize,
    pub iteration: usize,
    pub omega_eps: f64,
    pub delta_eps: f64,
    pub infidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub params: AdjustmentParams,
    pub schedule: PulseSchedule,
    pub infidelity_before: f64,
    pub infidelity_after: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
}

/// Largest |Δ| the tones of `level` ever apply.
fn max_detuning(schedule: &PulseSchedule, level: usize) -> f64 {
    schedule
        .tones
        .iter()
        .filter(|t| t.level == level)
        .flat_map(|t| t.segments.iter().map(|s| s.detuning.abs()))
        .fold(0.0, f64::max)
}

/// Detuning offset bound of `level`.
pub fn delta_bound(schedule: &PulseSchedule, level: usize, omega_max: f64, frac: f64) -> f64 {
    let d = max_detuning(schedule, level);
    if d > 0.0 {
        frac * d
    } else {
        frac * omega_max
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    a: f64,
    b: f64,
    infid: f64,
    size: f64,
}

impl Candidate {
    /// Strictly better, ties going to the smaller offset.
    fn beats(&self, other: &Candidate) -> bool {
        let tol = 1e-14;
        self.infid < other.infid - tol
            || ((self.infid - other.infid).abs() <= tol && self.size < other.size)
    }
}

/// Bounded per-subspace search over amplitude and detuning offsets that
/// minimizes the closed-system gate infidelity under `opts.mode`.
///
/// For each addressed level in turn (Gauss–Seidel, other levels held at
/// their current offsets) an `grid × grid` box scan seeds a compass search
/// that halves its step down to `min_step_frac·Ω_M`. The result is only
/// admitted if it beats the unadjusted schedule; otherwise zero offsets are
/// returned.
pub fn linear_adjust(
    schedule: &PulseSchedule,
    params: &SystemParams,
    target: &SnapTarget,
    omega_max: f64,
    opts: &AdjustOptions,
) -> Result<Adjustment> {
    if opts.grid == 0 || opts.max_evals == 0 || opts.passes == 0 {
        return Err(Error::EmptyBudget);
    }
    if !(opts.omega_frac >= 0.0
        && opts.omega_frac <= 0.1
        && opts.delta_frac >= 0.0
        && opts.delta_frac <= 0.1)
    {
        return domain("adjustment bounds must lie within ±10%");
    }
    let d = target.dim();
    let closed = params.closed();
    let objective = |oe: &[f64], de: &[f64]| -> Result<f64> {
        let s = schedule.with_offsets(oe, de, omega_max);
        Ok(1.0 - closed_fidelity(&s, &closed, opts.mode, target, &opts.unitary)?)
    };
    let zeros = vec![0.0; d];
    let before = objective(&zeros, &zeros)?;
    let mut oe = zeros.clone();
    let mut de = zeros.clone();
    let mut current = before;
    let mut trace = Vec::new();
    let mut evaluations = 1;
    let a_max = opts.omega_frac * omega_max;
    let min_step = opts.min_step_frac * omega_max;

    for pass in 0..opts.passes {
        for n in 0..d {
            let b_max = delta_bound(schedule, n, omega_max, opts.delta_frac);
            let eval_at = |pts: &[(f64, f64)]| -> Result<Vec<Candidate>> {
                let res = map_indexed(opts.exec, pts.len(), |k| {
                    let (a, b) = pts[k];
                    let mut o = oe.clone();
                    let mut e = de.clone();
                    o[n] = a;
                    e[n] = b;
                    objective(&o, &e)
                });
                res.into_iter()
                    .zip(pts)
                    .map(|(r, &(a, b))| {
                        r.map(|infid| Candidate {
                            a,
                            b,
                            infid,
                            size: norm_offset(a, a_max) + norm_offset(b, b_max),
                        })
                    })
                    .collect()
            };
            let axis = |m: f64| -> Vec<f64> {
                if opts.grid == 1 {
                    vec![0.0]
                } else {
                    (0..opts.grid)
                        .map(|i| -m + 2.0 * m * i as f64 / (opts.grid - 1) as f64)
                        .collect()
                }
            };
            let (ax, bx) = (axis(a_max), axis(b_max));
            let mut pts: Vec<(f64, f64)> = Vec::with_capacity(ax.len() * bx.len() + 1);
            pts.push((oe[n], de[n]));
            for &a in &ax {
                for &b in &bx {
                    pts.push((a, b));
                }
            }
            let cands = eval_at(&pts)?;
            let mut used = cands.len();
            let mut best = cands[0];
            for c in &cands[1..] {
                if c.beats(&best) {
                    best = *c;
                }
            }
            let mut iteration = 0;
            trace.push(TraceRow {
                pass,
                subspace: n,
                iteration,
                omega_eps: best.a,
                delta_eps: best.b,
                infidelity: best.infid,
            });

            let div = (opts.grid.max(2) - 1) as f64;
            let (mut sa, mut sb) = (2.0 * a_max / div, 2.0 * b_max / div);
            while (sa >= min_step || sb >= min_step) && used + 4 <= opts.max_evals {
                let clamp = |v: f64, m: f64| v.clamp(-m, m);
                let moves = [
                    (clamp(best.a + sa, a_max), best.b),
                    (clamp(best.a - sa, a_max), best.b),
                    (best.a, clamp(best.b + sb, b_max)),
                    (best.a, clamp(best.b - sb, b_max)),
                ];
                let cands = eval_at(&moves)?;
                used += cands.len();
                let mut improved = false;
                for c in cands {
                    if c.beats(&best) {
                        best = c;
                        improved = true;
                    }
                }
                if !improved {
                    sa *= 0.5;
                    sb *= 0.5;
                }
                iteration += 1;
                trace.push(TraceRow {
                    pass,
                    subspace: n,
                    iteration,
                    omega_eps: best.a,
                    delta_eps: best.b,
                    infidelity: best.infid,
                });
            }
            evaluations += used;
            oe[n] = best.a;
            de[n] = best.b;
            current = best.infid;
        }
    }

    let (params_out, after) = if current < before {
        (
            AdjustmentParams {
                omega_eps: oe,
                delta_eps: de,
            },
            current,
        )
    } else {
        (
            AdjustmentParams {
                omega_eps: zeros.clone(),
                delta_eps: zeros,
            },
            before,
        )
    };
    let adjusted = schedule.with_offsets(&params_out.omega_eps, &params_out.delta_eps, omega_max);
    Ok(Adjustment {
        params: params_out,
        schedule: adjusted,
        infidelity_before: before,
        infidelity_after: after,
        evaluations,
        trace,
    })
}

fn norm_offset(v: f64, m: f64) -> f64 {
    if m > 0.0 {
        v.abs() / m
    } else {
        v.abs()
    }
}

/// Continuous-time Pearson coefficient of two series sampled on the same
/// uniform grid (odd length), with averages taken by Simpson's rule.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return domain("series must have equal length");
    }
    if x.len() < 3 || x.len() % 2 == 0 {
        return domain("need an odd number of samples, at least 3");
    }
    let w = simpson_weights(x.len(), 1.0);
    let wsum: f64 = w.iter().sum();
    let mean = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let (mx, my) = (mean(x), mean(y));
    let mut cxy = 0.0;
    let mut cxx = 0.0;
    let mut cyy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        cxy += w[i] * dx * dy;
        cxx += w[i] * dx * dx;
        cyy += w[i] * dy * dy;
        sxx += w[i] * x[i] * x[i];
        syy += w[i] * y[i] * y[i];
    }
    let eps = 1e-24;
    if cxx <= eps * sxx || cyy <= eps * syy || cxx == 0.0 || cyy == 0.0 {
        return Err(Error::Undefined("zero variance".into()));
    }
    Ok((cxy / (cxx * cyy).sqrt()).clamp(-1.0, 1.0))
}

/// `Ξ_n²(t)` for every addressed level, all tones at constant amplitude
/// `omega` with phases `−θ_n − π/2` and no detuning, on `points` uniform
/// samples of `[0, τ]`.
pub fn xi_squared_signals(
    target: &SnapTarget,
    omega: f64,
    chi: f64,
    tau: f64,
    points: usize,
) -> Vec<Vec<f64>> {
    let d = target.dim();
    let phi: Vec<f64> = target.thetas().iter().map(|th| -th - FRAC_PI_2).collect();
    (0..d)
        .map(|n| {
            (0..points)
                .map(|k| {
                    let t = tau * k as f64 / (points - 1) as f64;
                    let lo = n.saturating_sub(1);
                    let hi = (n + 2).min(d);
                    let pi: C64 = (lo..hi)
                        .map(|m| C64::from_polar(omega, phi[m] + (m as f64 - n as f64) * chi * t))
                        .sum();
                    pi.norm_sqr()
                })
                .collect()
        })
        .collect()
}

/// Pairwise Pearson coefficients of the `Ξ_n²` signals over `[0, τ]`.
/// The diagonal is exactly 1.
pub fn correlation_matrix(
    target: &SnapTarget,
    omega: f64,
    chi: f64,
    tau: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(tau > 0.0) || !(omega > 0.0) {
        return domain("omega and tau must be positive");
    }
    let points = 8001;
    let sig = xi_squared_signals(target, omega, chi, tau, points);
    let d = target.dim();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        m[i][i] = 1.0;
        for j in i + 1..d {
            let r = pearson_correlation(&sig[i], &sig[j])?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

/// The closed-form expression quoted for `ρ_{0,2}` of θ⃗ = (0, −π/4, π/2)
/// as a function of `x = χτ`.
pub fn rho02_closed_form(x: f64) -> f64 {
    let s = x.sin();
    let num = 2.0 * x * x - (2.0 * x).sin() * x + 4.0 * s * s;
    let den = 2.0 * x * x + (2.0 * x).sin() * x - 4.0 * s * s;
    num / den
}

/// `π` periods of Ξ: the first pole of `cot(Ξ(t − T))` before `T`.
pub fn first_pole_before_end(xi: f64) -> f64 {
    PI / xi
}
