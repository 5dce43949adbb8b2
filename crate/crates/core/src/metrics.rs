//! Gate fidelity, error budgets and parameter sweeps.
//!
//! Closed-system fidelity is the phase-insensitive overlap of the projected
//! gate with the target on the `{|g,n⟩}` sector,
//! `F = |Σ_{n<d} e^{−iθ_n}⟨g,n|U|g,n⟩|² / d²`.
//!
//! Open-system fidelity averages `⟨ψ_tar|ρ(T)|ψ_tar⟩` over the probes
//! `|g,n⟩` and `(|g,n⟩ + |g,n′⟩)/√2`; the superpositions make relative phase
//! errors visible, which diagonal probes alone would miss.
//!
//! Photon number is conserved by the drive and only lowered by cavity
//! decay, so every fidelity here is computed on the first `d` blocks only.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve_lindblad, evolve_unitary, pure_density, EvolutionResult, EvolveOptions,
};
use crate::error::{domain, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::par::{map_indexed, try_map_indexed, Execution};
use crate::pulse::{apply_error, ErrorModel, PulseSchedule, Scheme, SchemeTag, SnapTarget};
use crate::qocf::{linear_adjust, AdjustOptions};
use crate::system::{BlockMode, SystemParams};

pub fn snap_target(target: &SnapTarget, d: usize) -> Result<CMatrix> {
    if d != target.dim() {
        return domain(format!(
            "target has {} phases, requested dimension {d}",
            target.dim()
        ));
    }
    Ok(CMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::from_polar(1.0, target.thetas()[r])
        } else {
            ZERO
        }
    }))
}

/// Closed-system fidelity of an evolved gate.
pub fn fidelity_from_unitary(result: &EvolutionResult, target: &SnapTarget) -> Result<f64> {
    let d = target.dim();
    if result.block_propagators.len() < d {
        return domain(format!(
            "target needs {d} blocks, only {} propagated",
            result.block_propagators.len()
        ));
    }
    let s: C64 = target
        .thetas()
        .iter()
        .zip(&result.block_propagators)
        .map(|(&th, u)| C64::from_polar(1.0, -th) * u.get(0, 0))
        .sum();
    Ok(s.norm_sqr() / (d * d) as f64)
}

/// Probe states on the `2d`-dimensional space (index `2n` is `|g,n⟩`).
pub fn probe_states(d: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for n in 0..d {
        let mut v = vec![ZERO; 2 * d];
        v[2 * n] = C64::new(1.0, 0.0);
        out.push(v);
    }
    for a in 0..d {
        for b in a + 1..d {
            let mut v = vec![ZERO; 2 * d];
            v[2 * a] = C64::new(FRAC_1_SQRT_2, 0.0);
            v[2 * b] = C64::new(FRAC_1_SQRT_2, 0.0);
            out.push(v);
        }
    }
    out
}

/// Applies the SNAP gate to a state on the `2d` space.
pub fn apply_target(target: &SnapTarget, psi: &[C64]) -> Vec<C64> {
    psi.iter()
        .enumerate()
        .map(|(i, &z)| {
            if i % 2 == 0 {
                z * C64::from_polar(1.0, target.thetas()[i / 2])
            } else {
                z
            }
        })
        .collect()
}

/// Open-system fidelity from final density matrices of the probe states
/// (as returned by [`probe_states`], in the same order).
pub fn fidelity_from_densities(finals: &[CMatrix], target: &SnapTarget) -> Result<f64> {
    let probes = probe_states(target.dim());
    if finals.len() != probes.len() {
        return domain(format!(
            "expected {} probe results, got {}",
            probes.len(),
            finals.len()
        ));
    }
    let total: f64 = probes
        .iter()
        .zip(finals)
        .map(|(p, rho)| {
            let w = apply_target(target, p);
            let mut acc = ZERO;
            for r in 0..w.len() {
                for c in 0..w.len() {
                    acc += w[r].conj() * rho[(r, c)] * w[c];
                }
            }
            acc.re
        })
        .sum();
    Ok(total / probes.len() as f64)
}

/// Settings shared by every fidelity evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub mode: BlockMode,
    pub unitary: EvolveOptions,
    pub lindblad: EvolveOptions,
    /// Parallelism across sweep points; inner evolutions run sequentially.
    pub exec: Execution,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            mode: BlockMode::Full,
            unitary: EvolveOptions::unitary().with_exec(Execution::Sequential),
            lindblad: EvolveOptions::lindblad().with_exec(Execution::Sequential),
            exec: Execution::Parallel,
        }
    }
}

impl MetricOptions {
    pub fn with_mode(mut self, mode: BlockMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

fn truncated(params: &SystemParams, target: &SnapTarget, schedule: &PulseSchedule) -> SystemParams {
    params.with_n_max(target.dim().max(schedule.levels()))
}

/// Closed-system fidelity of `schedule` under `mode`.
pub fn closed_fidelity(
    schedule: &PulseSchedule,
    params: &SystemParams,
    mode: BlockMode,
    target: &SnapTarget,
    opts: &EvolveOptions,
) -> Result<f64> {
    let p = truncated(params, target, schedule);
    let r = evolve_unitary(schedule, &p, mode, None, opts)?;
    fidelity_from_unitary(&r, target)
}

/// Open-system probe-averaged fidelity of `schedule` under `mode`.
pub fn open_fidelity(
    schedule: &PulseSchedule,
    params: &SystemParams,
    mode: BlockMode,
    target: &SnapTarget,
    opts: &EvolveOptions,
) -> Result<f64> {
    let p = truncated(params, target, schedule);
    let dim = 2 * p.n_max;
    let probes: Vec<Vec<C64>> = probe_states(target.dim())
        .into_iter()
        .map(|mut v| {
            v.resize(dim, ZERO);
            v
        })
        .collect();
    let finals = try_map_indexed(opts.exec, probes.len(), |k| {
        evolve_lindblad(schedule, &p, mode, &pure_density(&probes[k]), None, opts)
            .map(|r| r.rho_final)
    })?;
    let d = 2 * target.dim();
    let cut: Vec<CMatrix> = finals
        .into_iter()
        .map(|m| m.view((0, 0), (d, d)).into_owned())
        .collect();
    fidelity_from_densities(&cut, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub scheme: SchemeTag,
    pub mode: BlockMode,
    pub decoherence: bool,
    pub omega_ratio: f64,
    pub gate_time: f64,
}

/// Fidelity of a built schedule, closed or open depending on `decoherence`.
pub fn report(
    schedule: &PulseSchedule,
    params: &SystemParams,
    target: &SnapTarget,
    omega_max: f64,
    decoherence: bool,
    opts: &MetricOptions,
) -> Result<FidelityReport> {
    let fidelity = if decoherence {
        open_fidelity(schedule, params, opts.mode, target, &opts.lindblad)?
    } else {
        closed_fidelity(schedule, params, opts.mode, target, &opts.unitary)?
    };
    Ok(FidelityReport {
        fidelity,
        scheme: schedule.tag,
        mode: opts.mode,
        decoherence,
        omega_ratio: omega_max / params.chi,
        gate_time: schedule.duration(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub counterrotating_loss: f64,
    pub decoherence_loss: f64,
    pub higher_order_loss: f64,
    /// RWA closed-system baseline fidelity.
    pub baseline: f64,
}

/// Three single-toggle comparisons against the RWA closed-system baseline:
/// Full vs RWA (closed), RWA open vs closed, and higher-order vs Full
/// (closed). Kerr and χ′ are taken from `params`.
pub fn error_budget(
    target: &SnapTarget,
    schedule: &PulseSchedule,
    params: &SystemParams,
    opts: &MetricOptions,
) -> Result<ErrorBudget> {
    let closed = params.closed();
    let u = &opts.unitary;
    let jobs: [&(dyn Fn() -> Result<f64> + Sync); 4] = [
        &|| closed_fidelity(schedule, &closed, BlockMode::Rwa, target, u),
        &|| closed_fidelity(schedule, &closed, BlockMode::Full, target, u),
        &|| {
            if params.is_closed() {
                Ok(f64::NAN)
            } else {
                open_fidelity(schedule, params, BlockMode::Rwa, target, &opts.lindblad)
            }
        },
        &|| {
            if params.kerr == 0.0 && params.chi_prime == 0.0 {
                Ok(f64::NAN)
            } else {
                closed_fidelity(schedule, &closed, BlockMode::FullHigherOrder, target, u)
            }
        },
    ];
    let f = try_map_indexed(opts.exec, 4, |k| jobs[k]())?;
    let (rwa, full) = (f[0], f[1]);
    let open = if f[2].is_nan() { rwa } else { f[2] };
    let higher = if f[3].is_nan() { full } else { f[3] };
    Ok(ErrorBudget {
        counterrotating_loss: rwa - full,
        decoherence_loss: rwa - open,
        higher_order_loss: full - higher,
        baseline: rwa,
    })
}

/// Fidelities over a product grid. `results` is row-major over `axes`, the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: Vec<(String, Vec<f64>)>,
    pub results: Vec<f64>,
}

impl SweepGrid {
    pub fn new(axes: Vec<(String, Vec<f64>)>, results: Vec<f64>) -> Result<Self> {
        let n: usize = axes.iter().map(|a| a.1.len()).product();
        if n != results.len() {
            return domain(format!("grid has {n} points but {} results", results.len()));
        }
        Ok(Self { axes, results })
    }

    /// One row per grid point: axis values followed by the result.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let lens: Vec<usize> = self.axes.iter().map(|a| a.1.len()).collect();
        (0..self.results.len())
            .map(|mut i| {
                let mut idx = vec![0; lens.len()];
                for k in (0..lens.len()).rev() {
                    idx[k] = i % lens[k];
                    i /= lens[k];
                }
                idx.iter()
                    .enumerate()
                    .map(|(k, &j)| self.axes[k].1[j])
                    .collect::<Vec<f64>>()
            })
            .zip(&self.results)
            .map(|(mut r, &v)| {
                r.push(v);
                r
            })
            .collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.axes.iter().map(|a| a.0.clone()).collect();
        h.push("fidelity".into());
        h
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Default Ω_M/χ axis: 25 log-spaced points on `[0.01, 0.6]`.
pub fn default_ratios() -> Vec<f64> {
    log_grid(0.01, 0.6, 25)
}

/// Default ε and η axes: 21 points on `[−0.1, 0.1]`.
pub fn default_error_axis() -> Vec<f64> {
    lin_grid(-0.1, 0.1, 21)
}

/// Builds the scheme at `omega_max`, optionally passed through the linear
/// adjustment.
pub fn prepared_schedule(
    target: &SnapTarget,
    scheme: Scheme,
    omega_max: f64,
    optimized: bool,
    params: &SystemParams,
    opts: &MetricOptions,
) -> Result<PulseSchedule> {
    let s = scheme.build(target, omega_max)?;
    if !optimized {
        return Ok(s);
    }
    let adj = AdjustOptions {
        mode: opts.mode,
        unitary: opts.unitary,
        ..AdjustOptions::default()
    };
    Ok(linear_adjust(&s, &params.closed(), target, omega_max, &adj)?.schedule)
}

/// Fidelity versus `Ω_M/χ`.
pub fn amplitude_sweep(
    target: &SnapTarget,
    scheme: Scheme,
    optimized: bool,
    ratios: &[f64],
    decoherence: bool,
    params: &SystemParams,
    opts: &MetricOptions,
) -> Result<SweepGrid> {
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return domain("ratios must be positive");
    }
    let res = try_map_indexed(opts.exec, ratios.len(), |k| {
        let om = ratios[k] * params.chi;
        let s = prepared_schedule(target, scheme, om, optimized, params, opts)?;
        report(&s, params, target, om, decoherence, opts).map(|r| r.fidelity)
    })?;
    SweepGrid::new(vec![("omega_ratio".into(), ratios.to_vec())], res)
}

/// Fidelity over the `(ε, η)` grid with η applied to every addressed level.
pub fn robustness_sweep(
    target: &SnapTarget,
    scheme: Scheme,
    optimized: bool,
    eps_grid: &[f64],
    eta_grid: &[f64],
    omega_max: f64,
    params: &SystemParams,
    opts: &MetricOptions,
) -> Result<SweepGrid> {
    let base = prepared_schedule(target, scheme, omega_max, optimized, params, opts)?;
    let closed = params.closed();
    let d = target.dim();
    let n = eps_grid.len() * eta_grid.len();
    let res = try_map_indexed(opts.exec, n, |k| {
        let (i, j) = (k / eta_grid.len(), k % eta_grid.len());
        let err = ErrorModel::uniform(eps_grid[i], eta_grid[j], d);
        let s = apply_error(&base, &err, omega_max);
        closed_fidelity(&s, &closed, opts.mode, target, &opts.unitary)
    })?;
    SweepGrid::new(
        vec![
            ("epsilon".into(), eps_grid.to_vec()),
            ("eta".into(), eta_grid.to_vec()),
        ],
        res,
    )
}

/// Second difference of closed-system fidelity in the amplitude error ε at
/// ε = 0, `(F(h) − 2F(0) + F(−h))/h²`. Less negative means flatter.
pub fn epsilon_curvature(
    schedule: &PulseSchedule,
    params: &SystemParams,
    target: &SnapTarget,
    omega_max: f64,
    h: f64,
    opts: &MetricOptions,
) -> Result<f64> {
    let closed = params.closed();
    let f = map_indexed(opts.exec, 3, |k| {
        let eps = [-h, 0.0, h][k];
        let s = apply_error(
            schedule,
            &ErrorModel::uniform(eps, 0.0, target.dim()),
            omega_max,
        );
        closed_fidelity(&s, &closed, opts.mode, target, &opts.unitary)
    });
    let f: Vec<f64> = f.into_iter().collect::<Result<_>>()?;
    Ok((f[2] - 2.0 * f[1] + f[0]) / (h * h))
}
