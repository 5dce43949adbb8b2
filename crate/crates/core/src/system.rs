//! Physical constants and per-subspace Hamiltonians.
//!
//! The drive conserves photon number, so the interaction-picture Hamiltonian
//! splits into 2×2 blocks on `span{|g,n⟩, |e,n⟩}`. Inside a block
//! `σᶻ = |e⟩⟨e| − |g⟩⟨g|`, so a positive detuning raises `|e,n⟩`.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{direct_sum, CMatrix, Mat2};
use crate::pulse::PulseSchedule;

/// Converts a frequency given in MHz (i.e. `ω/2π` in MHz) to rad/s.
pub fn mhz(f: f64) -> f64 {
    f * TAU * 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Dispersive shift χ (rad/s).
    pub chi: f64,
    /// Qubit decay rate γ₁ (1/s).
    pub gamma_decay: f64,
    /// Qubit dephasing rate γ_φ (1/s).
    pub gamma_phi: f64,
    /// Self-Kerr K (rad/s); only used in [`BlockMode::FullHigherOrder`].
    pub kerr: f64,
    /// Second-order dispersive shift χ′ (rad/s); only used in
    /// [`BlockMode::FullHigherOrder`].
    pub chi_prime: f64,
    /// Number of cavity levels simulated.
    pub n_max: usize,
    /// Cavity decay rate κ_c (1/s), off by default.
    pub cavity_decay: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            chi: mhz(2.5),
            gamma_decay: mhz(1.45e-3),
            gamma_phi: mhz(1.45e-3),
            kerr: mhz(3e-3),
            chi_prime: mhz(5e-3),
            n_max: 10,
            cavity_decay: 0.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.chi,
            self.gamma_decay,
            self.gamma_phi,
            self.kerr,
            self.chi_prime,
            self.cavity_decay,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return domain("system parameters must be finite");
        }
        if !(self.chi > 0.0) {
            return domain("chi must be positive");
        }
        if self.gamma_decay < 0.0 || self.gamma_phi < 0.0 || self.cavity_decay < 0.0 {
            return domain("decoherence rates must be nonnegative");
        }
        if self.n_max < 1 {
            return domain("n_max must be at least 1");
        }
        Ok(())
    }

    /// Same system without any dissipation.
    pub fn closed(&self) -> Self {
        Self {
            gamma_decay: 0.0,
            gamma_phi: 0.0,
            cavity_decay: 0.0,
            ..*self
        }
    }

    pub fn with_n_max(&self, n_max: usize) -> Self {
        Self { n_max, ..*self }
    }

    pub fn is_closed(&self) -> bool {
        self.gamma_decay == 0.0 && self.gamma_phi == 0.0 && self.cavity_decay == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockMode {
    /// Only the resonant tone acts on each block.
    Rwa,
    /// Every tone acts on every block, off-resonant ones rotating at `(n−m)χ`.
    Full,
    /// `Full` plus the second-order dispersive phase and the Kerr energy.
    FullHigherOrder,
}

impl BlockMode {
    pub fn name(&self) -> &'static str {
        match self {
            BlockMode::Rwa => "rwa",
            BlockMode::Full => "full",
            BlockMode::FullHigherOrder => "full+ho",
        }
    }
}

/// Validates that `schedule` fits inside the truncation of `params`.
pub fn check_schedule(schedule: &PulseSchedule, params: &SystemParams) -> Result<()> {
    params.validate()?;
    if let Some(t) = schedule.tones.iter().find(|t| t.level >= params.n_max) {
        return domain(format!(
            "tone targets level {} beyond n_max = {}",
            t.level, params.n_max
        ));
    }
    Ok(())
}

#[inline]
fn ladder(n: usize) -> f64 {
    let n = n as f64;
    n * n - n
}

/// Block Hamiltonian evaluated inside a known segment. `t` may sit on either
/// edge of `seg`; the segment's own controls are used.
pub(crate) fn block_hamiltonian_in_segment(
    n: usize,
    schedule: &PulseSchedule,
    seg: usize,
    t: f64,
    params: &SystemParams,
    mode: BlockMode,
) -> Mat2 {
    let mut off = C64::new(0.0, 0.0);
    let mut delta = 0.0;
    let higher = mode == BlockMode::FullHigherOrder;
    for (i, tone) in schedule.tones.iter().enumerate() {
        let m = tone.level;
        if m == n {
            let v = schedule.tone_value(i, seg, t);
            delta += v.delta;
            // The χ′ factor is identically 1 for m = n.
            if v.omega != 0.0 {
                off += C64::from_polar(v.omega / 2.0, v.phi);
            }
        } else if mode != BlockMode::Rwa {
            let v = schedule.tone_value(i, seg, t);
            if v.omega == 0.0 {
                continue;
            }
            let mut ph = v.phi + (n as f64 - m as f64) * params.chi * t;
            if higher {
                ph -= 0.5 * (ladder(n) - ladder(m)) * params.chi_prime * t;
            }
            off += C64::from_polar(v.omega / 2.0, ph);
        }
    }
    let shift = if higher {
        -0.5 * params.kerr * ladder(n)
    } else {
        0.0
    };
    Mat2::hermitian(shift - delta / 2.0, shift + delta / 2.0, off)
}

/// The 2×2 Hamiltonian of block `n` at time `t`.
pub fn build_block_hamiltonian(
    n: usize,
    schedule: &PulseSchedule,
    t: f64,
    params: &SystemParams,
    mode: BlockMode,
) -> Result<Mat2> {
    check_schedule(schedule, params)?;
    if n >= params.n_max {
        return domain(format!("block {n} beyond n_max = {}", params.n_max));
    }
    let Some(seg) = schedule.segment_at(t) else {
        return domain(format!(
            "t = {t:e} outside schedule [0, {:e}]",
            schedule.duration()
        ));
    };
    Ok(block_hamiltonian_in_segment(
        n, schedule, seg, t, params, mode,
    ))
}

/// Direct sum of all `n_max` block Hamiltonians; basis index `2n + q` with
/// `q = 0` for `g` and `q = 1` for `e`.
pub fn full_space_hamiltonian(
    schedule: &PulseSchedule,
    t: f64,
    params: &SystemParams,
    mode: BlockMode,
) -> Result<CMatrix> {
    let blocks = (0..params.n_max)
        .map(|n| build_block_hamiltonian(n, schedule, t, params, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(direct_sum(&blocks))
}

pub(crate) fn full_space_in_segment(
    schedule: &PulseSchedule,
    seg: usize,
    t: f64,
    params: &SystemParams,
    mode: BlockMode,
) -> Vec<Mat2> {
    (0..params.n_max)
        .map(|n| block_hamiltonian_in_segment(n, schedule, seg, t, params, mode))
        .collect()
}
