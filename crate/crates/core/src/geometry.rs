//! Bloch-sphere trajectories and the geometric/dynamical phase split.
//!
//! Auxiliary states:
//! `|q₊⟩ = cos(ζ/2)|g⟩ + sin(ζ/2)e^{iξ}|e⟩`,
//! `|q₋⟩ = sin(ζ/2)e^{−iξ}|g⟩ − cos(ζ/2)|e⟩`.
//! The Bloch vector of `|q₊⟩` is `(sin ζ cos ξ, sin ζ sin ξ, cos ζ)`, so `|g⟩`
//! is the north pole.
//!
//! Two integration routes are offered. [`integrate_trajectory`] solves the
//! angle equations directly and refuses to cross the poles or the equator,
//! where they are singular. [`integrate_state_trajectory`] evolves the state
//! vector and recovers the angles afterwards; it works for any path.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_sample_times, propagate_segments, EvolveOptions};
use crate::error::{domain, Error, Result};
use crate::linalg::{inner, wrap_angle, Mat2, Vec2, I};
use crate::ode::Dopri5;
use crate::pulse::{PulseSchedule, ToneValue};
use crate::system::{block_hamiltonian_in_segment, check_schedule, BlockMode, SystemParams};

/// Distance from `ζ ∈ {0, π/2, π}` at which the angle equations are
/// declared singular.
pub const DELTA_POLE: f64 = 1e-6;

/// Loop closure tolerance.
pub const CYCLIC_TOL: f64 = 1e-6;

pub fn auxiliary_states(zeta: f64, xi: f64) -> (Vec2, Vec2) {
    let (s, c) = (zeta / 2.0).sin_cos();
    let plus = [C64::new(c, 0.0), C64::from_polar(s, xi)];
    let minus = [C64::from_polar(s, -xi), C64::new(-c, 0.0)];
    (plus, minus)
}

/// Per-block drive as seen by the trajectory integrators.
pub trait Controls: Sync {
    fn edges(&self) -> &[f64];
    /// Block Hamiltonian inside segment `seg`.
    fn hamiltonian(&self, seg: usize, t: f64) -> Mat2;
}

/// Block `n` of a schedule under a given mode.
#[derive(Debug, Clone, Copy)]
pub struct BlockControls<'a> {
    pub schedule: &'a PulseSchedule,
    pub n: usize,
    pub params: &'a SystemParams,
    pub mode: BlockMode,
}

impl<'a> BlockControls<'a> {
    pub fn new(
        schedule: &'a PulseSchedule,
        n: usize,
        params: &'a SystemParams,
        mode: BlockMode,
    ) -> Result<Self> {
        check_schedule(schedule, params)?;
        if n >= params.n_max {
            return domain(format!("block {n} beyond n_max = {}", params.n_max));
        }
        Ok(Self {
            schedule,
            n,
            params,
            mode,
        })
    }
}

impl Controls for BlockControls<'_> {
    fn edges(&self) -> &[f64] {
        &self.schedule.edges
    }

    fn hamiltonian(&self, seg: usize, t: f64) -> Mat2 {
        block_hamiltonian_in_segment(self.n, self.schedule, seg, t, self.params, self.mode)
    }
}

/// Controls given as a closure `t ↦ (Ω, φ, Δ)` on one segment.
pub struct FnControls<F> {
    edges: Vec<f64>,
    f: F,
}

impl<F: Fn(f64) -> ToneValue + Sync> FnControls<F> {
    pub fn new(duration: f64, f: F) -> Self {
        Self {
            edges: vec![0.0, duration],
            f,
        }
    }
}

impl<F: Fn(f64) -> ToneValue + Sync> Controls for FnControls<F> {
    fn edges(&self) -> &[f64] {
        &self.edges
    }

    fn hamiltonian(&self, _seg: usize, t: f64) -> Mat2 {
        let v = (self.f)(t);
        Mat2::hermitian(
            -v.delta / 2.0,
            v.delta / 2.0,
            C64::from_polar(v.omega / 2.0, v.phi),
        )
    }
}

/// `(Ω, φ, Δ, trace/2)` read back from a block Hamiltonian.
fn decompose(h: &Mat2) -> (f64, f64, f64, f64) {
    let c = h.get(0, 1);
    let gg = h.get(0, 0).re;
    let ee = h.get(1, 1).re;
    (2.0 * c.norm(), c.arg(), ee - gg, 0.5 * (ee + gg))
}

fn edges_schedule(edges: &[f64]) -> PulseSchedule {
    PulseSchedule::new(Vec::new(), edges.to_vec(), crate::pulse::SchemeTag::Custom)
        .expect("controls expose a valid segment grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub t: f64,
    pub zeta: f64,
    /// Azimuth, unwrapped.
    pub xi: f64,
    pub f_plus: f64,
    pub gamma_dynamic: f64,
    pub gamma_geometric: f64,
}

impl TrajectoryState {
    pub fn f_minus(&self) -> f64 {
        -self.f_plus
    }

    pub fn bloch(&self) -> [f64; 3] {
        let (s, c) = self.zeta.sin_cos();
        [s * self.xi.cos(), s * self.xi.sin(), c]
    }

    /// `e^{i f₊}|q₊(ζ, ξ)⟩`.
    pub fn state(&self) -> Vec2 {
        let (p, _) = auxiliary_states(self.zeta, self.xi);
        let ph = C64::from_polar(1.0, self.f_plus);
        [p[0] * ph, p[1] * ph]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    /// Direct integration of the angle equations.
    Angles,
    /// State-vector integration with angles recovered afterwards.
    State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub route: Route,
    pub samples: Vec<TrajectoryState>,
}

impl Trajectory {
    pub fn first(&self) -> Option<&TrajectoryState> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&TrajectoryState> {
        self.samples.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub gamma_total: f64,
    pub gamma_dynamic: f64,
    pub gamma_geometric: f64,
}

fn near_singular(zeta: f64) -> bool {
    zeta.abs() < DELTA_POLE
        || (zeta - FRAC_PI_2).abs() < DELTA_POLE
        || (zeta - PI).abs() < DELTA_POLE
}

fn default_times(edges: &[f64], times: Option<&[f64]>) -> Vec<f64> {
    match times {
        Some(t) => t.to_vec(),
        None => {
            let mut v = edges.to_vec();
            v.dedup();
            v
        }
    }
}

/// Integrates `(ζ, ξ, f₊)` with the angle equations
/// `ζ̇ = −Ω sin(φ+ξ)`, `ξ̇ = −Δ − Ω cot ζ cos(φ+ξ)`,
/// `ḟ₊ = −½[ξ̇(cos ζ − 1) − Δ]/cos ζ`, alongside
/// `γ̇ᵍ = −½ξ̇(1 − cos ζ)` and `γ̇ᵈ = −⟨q₊|H|q₊⟩`.
///
/// The last is the dynamical integrand `½(ξ̇ sin²ζ + Δ)/cos ζ` rewritten in
/// a regular form, so `γᵈ + γᵍ = f₊` is a genuine consistency check. A
/// block energy offset (trace of `H`) is added to both `f₊` and `γᵈ`.
///
/// Fails with [`Error::Singular`] when ζ comes within [`DELTA_POLE`] of
/// 0, π/2 or π, or crosses one of them between steps.
pub fn integrate_trajectory<C: Controls>(
    controls: &C,
    zeta0: f64,
    xi0: f64,
    sample_times: Option<&[f64]>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if near_singular(zeta0) {
        return Err(Error::Singular {
            t: controls.edges()[0],
            zeta: zeta0,
        });
    }
    let grid = edges_schedule(controls.edges());
    let times = default_times(controls.edges(), sample_times);
    check_sample_times(&times, grid.duration())?;
    // The equations are regular only inside the open quarter-circle of ζ₀.
    let (lo, hi) = if zeta0 < FRAC_PI_2 {
        (0.0, FRAC_PI_2)
    } else {
        (FRAC_PI_2, PI)
    };
    let inside = |z: f64| z > lo + DELTA_POLE && z < hi - DELTA_POLE;
    let hit: Cell<Option<(f64, f64)>> = Cell::new(None);
    let mut y = [zeta0, xi0, 0.0, 0.0, 0.0];
    let mut samples = Vec::with_capacity(times.len());
    let ode = Dopri5::new(opts.rtol, opts.atol);
    let res = propagate_segments(
        &grid,
        &ode,
        &times,
        &mut y,
        |seg, t, y, dy| {
            let (om, phi, delta, e0) = decompose(&controls.hamiltonian(seg, t));
            let (zeta, xi) = (y[0], y[1]);
            if !inside(zeta) && hit.get().is_none() {
                hit.set(Some((t, zeta)));
            }
            let (s, c) = zeta.sin_cos();
            let (sp, cp) = (phi + xi).sin_cos();
            let xi_dot = -delta - om * (c / s) * cp;
            dy[0] = -om * sp;
            dy[1] = xi_dot;
            dy[2] = -0.5 * (xi_dot * (c - 1.0) - delta) / c - e0;
            dy[3] = -0.5 * xi_dot * (1.0 - c);
            dy[4] = 0.5 * (delta * c - om * s * cp) - e0;
        },
        |t, y| {
            samples.push(TrajectoryState {
                t,
                zeta: y[0],
                xi: y[1],
                f_plus: y[2],
                gamma_geometric: y[3],
                gamma_dynamic: y[4],
            })
        },
    );
    if let Some((t, zeta)) = hit.get() {
        return Err(Error::Singular { t, zeta });
    }
    res?;
    Ok(Trajectory {
        route: Route::Angles,
        samples,
    })
}

/// Evolves `e^{if₊}|q₊⟩` as a state vector from `|q₊(ζ₀, ξ₀)⟩` together with
/// `γ̇ᵈ = −⟨ψ|H|ψ⟩`, and inverts the auxiliary-state parametrization at
/// every sample. `f₊` and `ξ` are unwrapped between samples; at the south
/// pole, where they are degenerate, `f₊` is carried over.
pub fn integrate_state_trajectory<C: Controls>(
    controls: &C,
    zeta0: f64,
    xi0: f64,
    sample_times: Option<&[f64]>,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let grid = edges_schedule(controls.edges());
    let times = default_times(controls.edges(), sample_times);
    check_sample_times(&times, grid.duration())?;
    let (q0, _) = auxiliary_states(zeta0, xi0);
    let mut y = [q0[0].re, q0[0].im, q0[1].re, q0[1].im, 0.0];
    let mut raw: Vec<(f64, Vec2, f64)> = Vec::with_capacity(times.len());
    let ode = Dopri5::new(opts.rtol, opts.atol);
    propagate_segments(
        &grid,
        &ode,
        &times,
        &mut y,
        |seg, t, y, dy| {
            let h = controls.hamiltonian(seg, t);
            let psi = [C64::new(y[0], y[1]), C64::new(y[2], y[3])];
            let hp = h.apply(&psi);
            let d0 = -I * hp[0];
            let d1 = -I * hp[1];
            dy[0] = d0.re;
            dy[1] = d0.im;
            dy[2] = d1.re;
            dy[3] = d1.im;
            dy[4] = -inner(&psi, &hp).re;
        },
        |t, y| raw.push((t, [C64::new(y[0], y[1]), C64::new(y[2], y[3])], y[4])),
    )?;

    let mut samples: Vec<TrajectoryState> = Vec::with_capacity(raw.len());
    let mut prev_f = 0.0;
    let mut prev_xi = xi0;
    for (t, psi, gd) in raw {
        let (ag, ae) = (psi[0].norm(), psi[1].norm());
        let zeta = 2.0 * ae.atan2(ag);
        let f = if ag > 1e-9 {
            unwrap_near(psi[0].arg(), prev_f)
        } else {
            prev_f
        };
        let xi = if ae > 1e-9 {
            unwrap_near(psi[1].arg() - f, prev_xi)
        } else {
            prev_xi
        };
        prev_f = f;
        prev_xi = xi;
        samples.push(TrajectoryState {
            t,
            zeta,
            xi,
            f_plus: f,
            gamma_dynamic: gd,
            gamma_geometric: f - gd,
        });
    }
    Ok(Trajectory {
        route: Route::State,
        samples,
    })
}

fn unwrap_near(x: f64, reference: f64) -> f64 {
    x + TAU * ((reference - x) / TAU).round()
}

fn at_pole(zeta: f64) -> bool {
    zeta.abs() < DELTA_POLE || (zeta - PI).abs() < DELTA_POLE
}

/// Closure residuals `(Δζ, Δξ mod 2π)` between the first and last sample.
/// The azimuth residual is zero when both ends sit on the same pole.
pub fn cyclicity_check(traj: &Trajectory) -> Result<(f64, f64)> {
    let (Some(a), Some(b)) = (traj.first(), traj.last()) else {
        return domain("empty trajectory");
    };
    let dzeta = (b.zeta - a.zeta).abs();
    let same_pole =
        at_pole(a.zeta) && at_pole(b.zeta) && (a.zeta - b.zeta).abs() < 2.0 * DELTA_POLE;
    let dxi = if same_pole {
        0.0
    } else {
        wrap_angle(b.xi - a.xi).abs()
    };
    Ok((dzeta, dxi))
}

/// Splits the accumulated phase of a closed loop into its dynamical and
/// geometric parts. `gamma_total` and `gamma_geometric` are wrapped to
/// `(−π, π]`; `gamma_dynamic` is the raw energy integral.
pub fn phase_decomposition(traj: &Trajectory) -> Result<PhaseDecomposition> {
    let (dzeta, dxi) = cyclicity_check(traj)?;
    if dzeta > CYCLIC_TOL || dxi > CYCLIC_TOL {
        return Err(Error::NotCyclic { dzeta, dxi });
    }
    let end = traj.last().expect("checked nonempty");
    Ok(PhaseDecomposition {
        gamma_total: wrap_angle(end.f_plus),
        gamma_dynamic: end.gamma_dynamic,
        gamma_geometric: wrap_angle(end.gamma_geometric),
    })
}

/// Enclosed-area estimate `−½ Σ (1 − cos ζ_mid) Δξ` over the samples, with
/// each azimuth step taken on its shortest branch.
pub fn area_law_phase(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .map(|w| {
            let zm = 0.5 * (w[0].zeta + w[1].zeta);
            -0.5 * (1.0 - zm.cos()) * wrap_angle(w[1].xi - w[0].xi)
        })
        .sum()
}

/// `e^{iγ}|q₊⟩⟨q₊| + e^{−iγ}|q₋⟩⟨q₋|` at `(ζ₀, ξ₀)`, i.e. `exp(iγ υ⃗·σ⃗)` with
/// the Pauli vector oriented so that `|g⟩` is `+ẑ`.
pub fn holonomy_unitary(gamma: f64, zeta0: f64, xi0: f64) -> Mat2 {
    let (p, m) = auxiliary_states(zeta0, xi0);
    let a = C64::from_polar(1.0, gamma);
    let b = a.conj();
    let mut out = Mat2::zero();
    for r in 0..2 {
        for c in 0..2 {
            out.0[r][c] = a * p[r] * p[c].conj() + b * m[r] * m[c].conj();
        }
    }
    out
}

/// Phase decomposition of block `n` starting from `|g,n⟩`, via the state
/// route.
pub fn block_phase_decomposition(
    schedule: &PulseSchedule,
    n: usize,
    params: &SystemParams,
    mode: BlockMode,
    opts: &EvolveOptions,
) -> Result<PhaseDecomposition> {
    let ctl = BlockControls::new(schedule, n, params, mode)?;
    let traj = integrate_state_trajectory(&ctl, 0.0, 0.0, None, opts)?;
    phase_decomposition(&traj)
}
