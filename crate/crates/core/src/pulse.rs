//! Multi-tone pulse schedules.
//!
//! A schedule is a common grid of segment edges `0 = T₀ < T₁ < … < T_end`
//! and one [`DriveTone`] per addressed Fock level. Within each segment a tone
//! has a sine envelope, a smooth phase and a constant detuning.
//!
//! Phase convention: the drive enters block `n` as `(Ω/2)e^{iφ}` on the
//! `|g,n⟩⟨e,n|` element, and the qubit Bloch vector of
//! `cos(ζ/2)|g⟩ + sin(ζ/2)e^{iξ}|e⟩` obeys `ζ̇ = −Ω sin(φ+ξ)`,
//! `ξ̇ = −Δ − Ω cot ζ cos(φ+ξ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::wrap_angle;

/// Target phases `θ_n` for Fock levels `0..d`, stored wrapped to `(−π, π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapTarget {
    thetas: Vec<f64>,
}

impl SnapTarget {
    pub fn new(thetas: &[f64]) -> Result<Self> {
        if thetas.is_empty() {
            return domain("SNAP target needs at least one level");
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return domain("SNAP phases must be finite");
        }
        Ok(Self {
            thetas: thetas.iter().map(|&t| wrap_angle(t)).collect(),
        })
    }

    /// The reference gate θ⃗ = (0, −π/4, π/2).
    pub fn reference() -> Self {
        Self::new(&[0.0, -PI / 4.0, PI / 2.0]).expect("valid reference target")
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn dim(&self) -> usize {
        self.thetas.len()
    }
}

/// Envelope of one tone on one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    Zero,
    /// `peak · sin(π u / τ)` with `u` the time since the segment start.
    Sine {
        peak: f64,
    },
}

impl Envelope {
    #[inline]
    pub fn value(&self, u: f64, tau: f64) -> f64 {
        match *self {
            Envelope::Zero => 0.0,
            Envelope::Sine { peak } => peak * (PI * u / tau).sin(),
        }
    }

    pub fn area(&self, tau: f64) -> f64 {
        match *self {
            Envelope::Zero => 0.0,
            Envelope::Sine { peak } => 2.0 * peak * tau / PI,
        }
    }

    pub fn peak(&self) -> f64 {
        match *self {
            Envelope::Zero => 0.0,
            Envelope::Sine { peak } => peak,
        }
    }

    fn scaled(self, s: f64) -> Self {
        match self {
            Envelope::Zero => Envelope::Zero,
            Envelope::Sine { peak } => Envelope::Sine { peak: peak * s },
        }
    }
}

/// `φ(u) = base + linear·u + cosine·cos(πu/τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Phase {
    pub base: f64,
    pub linear: f64,
    pub cosine: f64,
}

impl Phase {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            linear: 0.0,
            cosine: 0.0,
        }
    }

    #[inline]
    pub fn value(&self, u: f64, tau: f64) -> f64 {
        let mut p = self.base + self.linear * u;
        if self.cosine != 0.0 {
            p += self.cosine * (PI * u / tau).cos();
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSegment {
    pub envelope: Envelope,
    pub phase: Phase,
    /// Detuning `Δ` (rad/s), applied in the tone's own block only.
    pub detuning: f64,
}

impl ToneSegment {
    pub fn silent() -> Self {
        Self {
            envelope: Envelope::Zero,
            phase: Phase::default(),
            detuning: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    pub level: usize,
    pub segments: Vec<ToneSegment>,
}

/// Instantaneous controls of one tone.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ToneValue {
    pub omega: f64,
    pub phi: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeTag {
    OrangeSlice,
    PathDesigned,
    /// Composite Rabi z-rotation; dynamic-phase reference.
    DynamicReference,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub tones: Vec<DriveTone>,
    /// Segment edges, starting at 0 and strictly increasing.
    pub edges: Vec<f64>,
    pub tag: SchemeTag,
}

impl PulseSchedule {
    pub fn new(tones: Vec<DriveTone>, edges: Vec<f64>, tag: SchemeTag) -> Result<Self> {
        if edges.len() < 2 {
            return domain("schedule needs at least one segment");
        }
        if edges[0] != 0.0 {
            return domain("schedule must start at t = 0");
        }
        if edges
            .windows(2)
            .any(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return domain("segment edges must be finite and strictly increasing");
        }
        let nseg = edges.len() - 1;
        for tone in &tones {
            if tone.segments.len() != nseg {
                return domain(format!(
                    "tone at level {} has {} segments, grid has {nseg}",
                    tone.level,
                    tone.segments.len()
                ));
            }
            for s in &tone.segments {
                if s.envelope.peak() < 0.0 || !s.envelope.peak().is_finite() {
                    return domain("envelope peaks must be finite and nonnegative");
                }
            }
        }
        Ok(Self { tones, edges, tag })
    }

    /// Schedule of one segment with no tones.
    pub fn idle(duration: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![0.0, duration], SchemeTag::Custom)
    }

    pub fn duration(&self) -> f64 {
        *self.edges.last().expect("nonempty edges")
    }

    pub fn n_segments(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn segment_len(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    /// Highest addressed level plus one.
    pub fn levels(&self) -> usize {
        self.tones.iter().map(|t| t.level + 1).max().unwrap_or(0)
    }

    /// Segment containing `t`; edges belong to the later segment except the
    /// final time, which belongs to the last one.
    pub fn segment_at(&self, t: f64) -> Option<usize> {
        let end = self.duration();
        let slack = 1e-12 * end;
        if !(t >= -slack && t <= end + slack) {
            return None;
        }
        let k = self.edges[1..].partition_point(|&e| e <= t);
        Some(k.min(self.n_segments() - 1))
    }

    /// Controls of tone `i` at time `t`, evaluated inside segment `seg`.
    #[inline]
    pub fn tone_value(&self, i: usize, seg: usize, t: f64) -> ToneValue {
        let s = &self.tones[i].segments[seg];
        let tau = self.segment_len(seg);
        let u = t - self.edges[seg];
        ToneValue {
            omega: s.envelope.value(u, tau),
            phi: s.phase.value(u, tau),
            delta: s.detuning,
        }
    }

    /// Per-segment pulse areas of tone `i`.
    pub fn areas(&self, i: usize) -> Vec<f64> {
        (0..self.n_segments())
            .map(|k| self.tones[i].segments[k].envelope.area(self.segment_len(k)))
            .collect()
    }

    /// Tone samples `(Ω, φ, Δ)` for every tone at each time.
    pub fn sample(&self, times: &[f64]) -> Result<Vec<Vec<ToneValue>>> {
        times
            .iter()
            .map(|&t| {
                let seg = match self.segment_at(t) {
                    Some(k) => k,
                    None => return domain(format!("t = {t:e} outside schedule")),
                };
                Ok((0..self.tones.len())
                    .map(|i| self.tone_value(i, seg, t))
                    .collect())
            })
            .collect()
    }

    /// Linear adjustment: tone amplitudes scaled by
    /// `1 + Ω_ε/Ω_M` and detunings shifted by `Δ_ε`, both per level.
    pub fn with_offsets(&self, omega_eps: &[f64], delta_eps: &[f64], omega_max: f64) -> Self {
        let mut out = self.clone();
        for tone in &mut out.tones {
            let a = omega_eps.get(tone.level).copied().unwrap_or(0.0);
            let d = delta_eps.get(tone.level).copied().unwrap_or(0.0);
            let scale = 1.0 + a / omega_max;
            for s in &mut tone.segments {
                s.envelope = s.envelope.scaled(scale);
                s.detuning += d;
            }
        }
        out
    }
}

/// Sine envelope on `[0, τ]`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineEnvelope {
    pub omega_max: f64,
    pub tau: f64,
}

impl SineEnvelope {
    pub fn value(&self, t: f64) -> f64 {
        if (0.0..=self.tau).contains(&t) {
            self.omega_max * (PI * t / self.tau).sin()
        } else {
            0.0
        }
    }

    pub fn area(&self) -> f64 {
        2.0 * self.omega_max * self.tau / PI
    }
}

pub fn sine_envelope(omega_max: f64, tau: f64) -> Result<SineEnvelope> {
    if !(omega_max > 0.0) || !(tau > 0.0) || !omega_max.is_finite() || !tau.is_finite() {
        return domain("sine envelope needs positive, finite amplitude and duration");
    }
    Ok(SineEnvelope { omega_max, tau })
}

/// Duration of a sine segment with peak `omega` and area `area`.
pub fn sine_duration(area: f64, omega: f64) -> f64 {
    PI * area / (2.0 * omega)
}

fn check_omega(omega_max: f64) -> Result<()> {
    if !(omega_max > 0.0) || !omega_max.is_finite() {
        return domain("omega_max must be positive and finite");
    }
    Ok(())
}

/// Two-segment geodesic loop: each segment a sine pulse of area π, with
/// phases `−θ_n − π/2` then `π/2`.
pub fn orange_slice_schedule(target: &SnapTarget, omega_max: f64) -> Result<PulseSchedule> {
    check_omega(omega_max)?;
    let tau = sine_duration(PI, omega_max);
    let env = Envelope::Sine { peak: omega_max };
    let tones = target
        .thetas()
        .iter()
        .enumerate()
        .map(|(n, &theta)| DriveTone {
            level: n,
            segments: vec![
                ToneSegment {
                    envelope: env,
                    phase: Phase::constant(-theta - FRAC_PI_2),
                    detuning: 0.0,
                },
                ToneSegment {
                    envelope: env,
                    phase: Phase::constant(FRAC_PI_2),
                    detuning: 0.0,
                },
            ],
        })
        .collect();
    PulseSchedule::new(tones, vec![0.0, tau, 2.0 * tau], SchemeTag::OrangeSlice)
}

/// Geometry of one path-designed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSegments {
    pub lambda: f64,
    pub kappa: f64,
    pub xi_a: f64,
    pub xi_b: f64,
    pub t1: f64,
    pub t2: f64,
    pub tp: f64,
}

impl PathSegments {
    pub fn geometric_phase(&self) -> f64 {
        self.kappa * (1.0 - self.lambda.cos()) / 2.0
    }

    /// Pulse area of the latitude segment.
    pub fn middle_area(&self) -> f64 {
        (self.kappa * self.lambda.sin() * self.lambda.cos()).abs()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= PI) || lambda == FRAC_PI_2 {
        return domain(format!("lambda = {lambda} outside (0, π/2) ∪ (π/2, π]"));
    }
    Ok(())
}

/// Per-level loop geometry on the shared segment grid.
pub fn path_segments(
    target: &SnapTarget,
    lambda: f64,
    omega_max: f64,
) -> Result<Vec<PathSegments>> {
    check_omega(omega_max)?;
    check_lambda(lambda)?;
    let tau1 = sine_duration(lambda, omega_max);
    let kappas: Vec<f64> = target
        .thetas()
        .iter()
        .map(|&th| 2.0 * th / (1.0 - lambda.cos()))
        .collect();
    let max_area = kappas
        .iter()
        .map(|k| (k * lambda.sin() * lambda.cos()).abs())
        .fold(0.0, f64::max);
    let tau2 = sine_duration(max_area, omega_max);
    Ok(kappas
        .into_iter()
        .map(|kappa| PathSegments {
            lambda,
            kappa,
            xi_a: 0.0,
            xi_b: kappa,
            t1: tau1,
            t2: tau1 + tau2,
            tp: 2.0 * tau1 + tau2,
        })
        .collect())
}

/// Three-segment loop: down the longitude `ξᵇ` to polar angle Λ, along the
/// latitude back to `ξᵃ`, and up the longitude `ξᵃ`.
///
/// The latitude segment uses a sine envelope with constant detuning
/// `Δ = κ sin²Λ / τ₂`; its phase follows `φ = −ξ(t)` (plus π when
/// `κ cos Λ < 0`) so that ζ stays pinned at Λ. All levels share the segment
/// grid, which is set by the level with the largest latitude area driven at
/// peak `omega_max`.
pub fn path_designed_schedule(
    target: &SnapTarget,
    lambda: f64,
    omega_max: f64,
) -> Result<PulseSchedule> {
    let segs = path_segments(target, lambda, omega_max)?;
    let geo = segs[0];
    let tau2 = geo.t2 - geo.t1;
    let has_middle = tau2 > 0.0;
    let max_area = segs.iter().map(|s| s.middle_area()).fold(0.0, f64::max);
    let cot = lambda.cos() / lambda.sin();

    let tones = segs
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let mut segments = Vec::with_capacity(3);
            if s.kappa == 0.0 {
                segments.resize(if has_middle { 3 } else { 2 }, ToneSegment::silent());
                return DriveTone { level: n, segments };
            }
            let env = Envelope::Sine { peak: omega_max };
            segments.push(ToneSegment {
                envelope: env,
                phase: Phase::constant(-s.xi_b - FRAC_PI_2),
                detuning: 0.0,
            });
            if has_middle {
                let area = s.middle_area();
                let peak = omega_max * area / max_area;
                let delta = s.kappa * lambda.sin().powi(2) / tau2;
                let sgn = (s.kappa * lambda.cos()).signum();
                let offset = if sgn > 0.0 { 0.0 } else { PI };
                // ξ(u) = ξᵇ − Δu − sgn·cotΛ·∫Ω, with ∫Ω = peak·τ₂/π·(1 − cos(πu/τ₂)).
                let c = sgn * cot * peak * tau2 / PI;
                let phase = Phase {
                    base: offset - s.xi_b + c,
                    linear: delta,
                    cosine: -c,
                };
                let envelope = if peak > 0.0 {
                    Envelope::Sine { peak }
                } else {
                    Envelope::Zero
                };
                segments.push(ToneSegment {
                    envelope,
                    phase,
                    detuning: delta,
                });
            }
            segments.push(ToneSegment {
                envelope: env,
                phase: Phase::constant(-s.xi_a + FRAC_PI_2),
                detuning: 0.0,
            });
            DriveTone { level: n, segments }
        })
        .collect();
    let edges = if has_middle {
        vec![0.0, geo.t1, geo.t2, geo.tp]
    } else {
        vec![0.0, geo.t1, geo.tp]
    };
    PulseSchedule::new(tones, edges, SchemeTag::PathDesigned)
}

/// Composite Rabi z-rotation: a π/2 pulse about x, a rotation of area
/// `2|θ_n|` about ∓y, and a π/2 pulse about −x. The phase it imprints is
/// purely dynamical; used as the non-geometric reference for robustness.
pub fn dynamic_reference_schedule(target: &SnapTarget, omega_max: f64) -> Result<PulseSchedule> {
    check_omega(omega_max)?;
    let tau1 = sine_duration(FRAC_PI_2, omega_max);
    let max_theta = target.thetas().iter().map(|t| t.abs()).fold(0.0, f64::max);
    let tau2 = sine_duration(2.0 * max_theta, omega_max);
    let has_middle = tau2 > 0.0;
    let tones = target
        .thetas()
        .iter()
        .enumerate()
        .map(|(n, &theta)| {
            let env = Envelope::Sine { peak: omega_max };
            let mut segments = vec![ToneSegment {
                envelope: env,
                phase: Phase::constant(0.0),
                detuning: 0.0,
            }];
            if has_middle {
                let peak = omega_max * theta.abs() / max_theta;
                let envelope = if peak > 0.0 {
                    Envelope::Sine { peak }
                } else {
                    Envelope::Zero
                };
                segments.push(ToneSegment {
                    envelope,
                    phase: Phase::constant(-theta.signum() * FRAC_PI_2),
                    detuning: 0.0,
                });
            }
            segments.push(ToneSegment {
                envelope: env,
                phase: Phase::constant(PI),
                detuning: 0.0,
            });
            DriveTone { level: n, segments }
        })
        .collect();
    let edges = if has_middle {
        vec![0.0, tau1, tau1 + tau2, 2.0 * tau1 + tau2]
    } else {
        vec![0.0, tau1, 2.0 * tau1]
    };
    PulseSchedule::new(tones, edges, SchemeTag::DynamicReference)
}

/// Pulse scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    OrangeSlice,
    PathDesigned { lambda: f64 },
    DynamicReference,
}

impl Scheme {
    /// Path-designed scheme with the default polar excursion Λ = 0.501π.
    pub fn path_designed_default() -> Self {
        Scheme::PathDesigned { lambda: 0.501 * PI }
    }

    pub fn build(&self, target: &SnapTarget, omega_max: f64) -> Result<PulseSchedule> {
        match *self {
            Scheme::OrangeSlice => orange_slice_schedule(target, omega_max),
            Scheme::PathDesigned { lambda } => path_designed_schedule(target, lambda, omega_max),
            Scheme::DynamicReference => dynamic_reference_schedule(target, omega_max),
        }
    }

    pub fn tag(&self) -> SchemeTag {
        match self {
            Scheme::OrangeSlice => SchemeTag::OrangeSlice,
            Scheme::PathDesigned { .. } => SchemeTag::PathDesigned,
            Scheme::DynamicReference => SchemeTag::DynamicReference,
        }
    }
}

/// Total gate time of a scheme.
pub fn gate_time(scheme: Scheme, target: &SnapTarget, omega_max: f64) -> Result<f64> {
    match scheme {
        Scheme::OrangeSlice => {
            check_omega(omega_max)?;
            Ok(PI * PI / omega_max)
        }
        _ => Ok(scheme.build(target, omega_max)?.duration()),
    }
}

/// Control errors: envelopes scaled by `1 + ε`, block-`n` detuning shifted by
/// `−η_n Ω_M`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorModel {
    pub epsilon: f64,
    pub etas: Vec<f64>,
}

impl ErrorModel {
    pub fn uniform(epsilon: f64, eta: f64, levels: usize) -> Self {
        Self {
            epsilon,
            etas: vec![eta; levels],
        }
    }

    pub fn eta(&self, n: usize) -> f64 {
        self.etas.get(n).copied().unwrap_or(0.0)
    }
}

pub fn apply_error(schedule: &PulseSchedule, err: &ErrorModel, omega_max: f64) -> PulseSchedule {
    let mut out = schedule.clone();
    for tone in &mut out.tones {
        let shift = -err.eta(tone.level) * omega_max;
        for s in &mut tone.segments {
            s.envelope = s.envelope.scaled(1.0 + err.epsilon);
            s.detuning += shift;
        }
    }
    out
}
