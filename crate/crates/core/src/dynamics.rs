//! Time evolution: per-block propagators, a dense full-space propagator used
//! as a cross-check, and the Lindblad master equation.
//!
//! Every integration is split at the schedule's segment edges, so phase jumps
//! between segments are never stepped across.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{direct_sum, CMatrix, Mat2, Vec2, I, ZERO};
use crate::ode::{Dopri5, Stats};
use crate::par::{try_map_indexed, Execution};
use crate::pulse::PulseSchedule;
use crate::system::{
    block_hamiltonian_in_segment, check_schedule, full_space_in_segment, BlockMode, SystemParams,
};

/// Integrator settings shared by the evolution routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub exec: Execution,
}

impl EvolveOptions {
    pub fn unitary() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            exec: Execution::Parallel,
        }
    }

    pub fn lindblad() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-11,
            exec: Execution::Parallel,
        }
    }

    pub fn with_rtol(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub(crate) fn stepper(&self) -> Dopri5 {
        Dopri5::new(self.rtol, self.atol)
    }
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self::unitary()
    }
}

/// States `U_n(t)|g,n⟩` recorded at the requested times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSamples {
    pub times: Vec<f64>,
    /// `states[n][k]` is block `n` at `times[k]`.
    pub states: Vec<Vec<Vec2>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub block_propagators: Vec<Mat2>,
    pub samples: Option<BlockSamples>,
    pub duration: f64,
    pub steps: usize,
}

impl EvolutionResult {
    /// The block-diagonal gate on the full truncated space.
    pub fn assembled_gate(&self) -> CMatrix {
        direct_sum(&self.block_propagators)
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.block_propagators
            .iter()
            .map(|u| u.unitarity_defect())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityResult {
    pub rho_final: CMatrix,
    pub samples: Option<(Vec<f64>, Vec<CMatrix>)>,
    pub steps: usize,
}

pub(crate) fn check_sample_times(times: &[f64], duration: f64) -> Result<()> {
    let slack = 1e-12 * duration;
    if times.iter().any(|t| !(*t >= 0.0 && *t <= duration + slack)) {
        return domain("sample times must lie inside the schedule");
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return domain("sample times must be sorted");
    }
    Ok(())
}

/// Integrates `y` across all segments of `schedule`, stopping at every
/// sample time and handing the state to `record`.
pub(crate) fn propagate_segments<R, O>(
    schedule: &PulseSchedule,
    ode: &Dopri5,
    samples: &[f64],
    y: &mut [f64],
    mut rhs: R,
    mut record: O,
) -> Result<Stats>
where
    R: FnMut(usize, f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let mut stats = Stats::default();
    let mut si = 0;
    while si < samples.len() && samples[si] <= 0.0 {
        record(0.0, y);
        si += 1;
    }
    let nseg = schedule.n_segments();
    for seg in 0..nseg {
        let (a, b) = (schedule.edges[seg], schedule.edges[seg + 1]);
        let last = seg + 1 == nseg;
        let mut t = a;
        while si < samples.len() && (samples[si] <= b || last) {
            let s = samples[si].min(b);
            stats += ode.integrate(|tt, yy, dd| rhs(seg, tt, yy, dd), t, s, y)?;
            t = s;
            record(samples[si], y);
            si += 1;
        }
        stats += ode.integrate(|tt, yy, dd| rhs(seg, tt, yy, dd), t, b, y)?;
    }
    Ok(stats)
}

#[inline]
fn schrodinger_rhs(h: &Mat2, y: &[f64], dy: &mut [f64]) {
    let u = Mat2::from_packed(y);
    let d = (*h * u).scale(-I);
    d.write_packed(dy);
}

/// Propagator of one block, optionally recording `U(t)|g⟩`.
pub fn propagate_block(
    n: usize,
    schedule: &PulseSchedule,
    params: &SystemParams,
    mode: BlockMode,
    samples: &[f64],
    opts: &EvolveOptions,
) -> Result<(Mat2, Vec<Vec2>, Stats)> {
    let mut y = [0.0; 8];
    Mat2::identity().write_packed(&mut y);
    let mut states = Vec::with_capacity(samples.len());
    let stats = propagate_segments(
        schedule,
        &opts.stepper(),
        samples,
        &mut y,
        |seg, t, y, dy| {
            let h = block_hamiltonian_in_segment(n, schedule, seg, t, params, mode);
            schrodinger_rhs(&h, y, dy);
        },
        |_, y| states.push(Mat2::from_packed(y).column(0)),
    )?;
    Ok((Mat2::from_packed(&y), states, stats))
}

/// Solves `i dU_n/dt = H_n(t) U_n` from the identity for every block.
pub fn evolve_unitary(
    schedule: &PulseSchedule,
    params: &SystemParams,
    mode: BlockMode,
    sample_times: Option<&[f64]>,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    check_schedule(schedule, params)?;
    let times = sample_times.unwrap_or(&[]);
    check_sample_times(times, schedule.duration())?;
    let per_block = try_map_indexed(opts.exec, params.n_max, |n| {
        propagate_block(n, schedule, params, mode, times, opts)
    })?;
    let steps = per_block.iter().map(|b| b.2.accepted).sum();
    let mut blocks = Vec::with_capacity(per_block.len());
    let mut states = Vec::with_capacity(per_block.len());
    for (u, s, _) in per_block {
        blocks.push(u);
        states.push(s);
    }
    Ok(EvolutionResult {
        block_propagators: blocks,
        samples: sample_times.map(|t| BlockSamples {
            times: t.to_vec(),
            states,
        }),
        duration: schedule.duration(),
        steps,
    })
}

/// Propagator of the whole `2·n_max` space from the dense Hamiltonian,
/// without using the block structure.
pub fn evolve_full_space(
    schedule: &PulseSchedule,
    params: &SystemParams,
    mode: BlockMode,
    opts: &EvolveOptions,
) -> Result<CMatrix> {
    check_schedule(schedule, params)?;
    let dim = 2 * params.n_max;
    let mut y = vec![0.0; 2 * dim * dim];
    for i in 0..dim {
        y[2 * (i * dim + i)] = 1.0;
    }
    propagate_segments(
        schedule,
        &opts.stepper(),
        &[],
        &mut y,
        |seg, t, y, dy| {
            let h = direct_sum(&full_space_in_segment(schedule, seg, t, params, mode));
            let u = unpack(y, dim);
            let d = (&h * &u) * (-I);
            pack(&d, dy);
        },
        |_, _| {},
    )?;
    Ok(unpack(&y, dim))
}

fn unpack(y: &[f64], dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |r, c| {
        let k = 2 * (r * dim + c);
        C64::new(y[k], y[k + 1])
    })
}

fn pack(m: &CMatrix, out: &mut [f64]) {
    let dim = m.nrows();
    for r in 0..dim {
        for c in 0..dim {
            let z = m[(r, c)];
            let k = 2 * (r * dim + c);
            out[k] = z.re;
            out[k + 1] = z.im;
        }
    }
}

/// Bloch vectors of the sampled block-`n` state.
///
/// With `|ψ⟩ = c_g|g⟩ + c_e|e⟩`: `x + iy = 2 c_g* c_e`, `z = |c_g|² − |c_e|²`,
/// so the initial state `|g,n⟩` sits at the north pole `(0, 0, 1)`.
pub fn bloch_samples(result: &EvolutionResult, n: usize) -> Result<Vec<[f64; 3]>> {
    let samples = result
        .samples
        .as_ref()
        .ok_or_else(|| Error::Domain("evolution was run without samples".into()))?;
    let states = samples
        .states
        .get(n)
        .ok_or_else(|| Error::Domain(format!("no samples for block {n}")))?;
    Ok(states.iter().map(bloch_vector).collect())
}

pub fn bloch_vector(v: &Vec2) -> [f64; 3] {
    let c = v[0].conj() * v[1] * 2.0;
    [c.re, c.im, v[0].norm_sqr() - v[1].norm_sqr()]
}

/// Checks that `rho` is a valid density matrix of the given dimension.
pub fn check_density(rho: &CMatrix, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return domain(format!("density matrix must be {dim}×{dim}"));
    }
    let herm = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if herm > 1e-10 {
        return domain("density matrix is not Hermitian");
    }
    if (rho.trace().re - 1.0).abs() > 1e-10 {
        return domain("density matrix trace differs from 1");
    }
    if min_eigenvalue(rho) < -1e-10 {
        return domain("density matrix is not positive semidefinite");
    }
    Ok(())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(rho: &CMatrix) -> f64 {
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// `ρ̇ = −i[H, ρ] + γ₁D[σ⁻]ρ + γ_φD[σᶻ]ρ + κ_c D[a]ρ` written out by index on
/// the `(q, n)` basis, `q ∈ {g, e}`.
struct Liouvillian<'a> {
    schedule: &'a PulseSchedule,
    params: &'a SystemParams,
    mode: BlockMode,
    dim: usize,
    blocks: Vec<Mat2>,
}

impl Liouvillian<'_> {
    #[inline]
    fn at(y: &[f64], dim: usize, r: usize, c: usize) -> C64 {
        let k = 2 * (r * dim + c);
        C64::new(y[k], y[k + 1])
    }

    fn eval(&mut self, seg: usize, t: f64, y: &[f64], dy: &mut [f64]) {
        let dim = self.dim;
        let p = self.params;
        for n in 0..p.n_max {
            self.blocks[n] = block_hamiltonian_in_segment(n, self.schedule, seg, t, p, self.mode);
        }
        let g1 = p.gamma_decay;
        let gp = p.gamma_phi;
        let kc = p.cavity_decay;
        let nmax = p.n_max;
        for r in 0..dim {
            let (nr, qr) = (r / 2, r % 2);
            let hr = &self.blocks[nr];
            for c in 0..dim {
                let (nc, qc) = (c / 2, c % 2);
                let hc = &self.blocks[nc];
                // (Hρ − ρH)_{rc}, H block diagonal.
                let mut hrho = ZERO;
                for q in 0..2 {
                    hrho += hr.get(qr, q) * Self::at(y, dim, 2 * nr + q, c);
                    hrho -= Self::at(y, dim, r, 2 * nc + q) * hc.get(q, qc);
                }
                let rho = Self::at(y, dim, r, c);
                let mut d = -I * hrho;
                if g1 != 0.0 {
                    let mut v = -0.5 * (qr + qc) as f64 * rho;
                    if qr == 0 && qc == 0 {
                        v += Self::at(y, dim, 2 * nr + 1, 2 * nc + 1);
                    }
                    d += g1 * v;
                }
                if gp != 0.0 && qr != qc {
                    d += gp * (-2.0) * rho;
                }
                if kc != 0.0 {
                    let mut v = -0.5 * (nr + nc) as f64 * rho;
                    if nr + 1 < nmax && nc + 1 < nmax {
                        let s = (((nr + 1) * (nc + 1)) as f64).sqrt();
                        v += s * Self::at(y, dim, r + 2, c + 2);
                    }
                    d += kc * v;
                }
                let k = 2 * (r * dim + c);
                dy[k] = d.re;
                dy[k + 1] = d.im;
            }
        }
    }
}

/// Lindblad evolution of `rho0` over the schedule on the full truncated space.
pub fn evolve_lindblad(
    schedule: &PulseSchedule,
    params: &SystemParams,
    mode: BlockMode,
    rho0: &CMatrix,
    sample_times: Option<&[f64]>,
    opts: &EvolveOptions,
) -> Result<DensityResult> {
    check_schedule(schedule, params)?;
    let dim = 2 * params.n_max;
    check_density(rho0, dim)?;
    let times = sample_times.unwrap_or(&[]);
    check_sample_times(times, schedule.duration())?;
    let mut y = vec![0.0; 2 * dim * dim];
    pack(rho0, &mut y);
    let mut l = Liouvillian {
        schedule,
        params,
        mode,
        dim,
        blocks: vec![Mat2::zero(); params.n_max],
    };
    let mut recorded = Vec::with_capacity(times.len());
    let stats = propagate_segments(
        schedule,
        &opts.stepper(),
        times,
        &mut y,
        |seg, t, y, dy| l.eval(seg, t, y, dy),
        |_, y| recorded.push(unpack(y, dim)),
    )?;
    Ok(DensityResult {
        rho_final: unpack(&y, dim),
        samples: sample_times.map(|t| (t.to_vec(), recorded)),
        steps: stats.accepted,
    })
}

/// `|ψ⟩⟨ψ|` for a state on the full space.
pub fn pure_density(psi: &[C64]) -> CMatrix {
    let n = psi.len();
    CMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj())
}
