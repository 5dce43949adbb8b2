use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use geosnap::dynamics::EvolveOptions;
use geosnap::metrics::{lin_grid, log_grid, MetricOptions};
use geosnap::pulse::{Scheme, SnapTarget};
use geosnap::system::{mhz, BlockMode, SystemParams};
use geosnap::Execution;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Oss,
    Pd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum ModeName {
    #[serde(rename = "rwa")]
    #[value(name = "rwa")]
    Rwa,
    #[serde(rename = "full")]
    #[value(name = "full")]
    Full,
    #[serde(rename = "full+ho")]
    #[value(name = "full+ho")]
    FullHo,
}

impl ModeName {
    pub fn mode(self) -> BlockMode {
        match self {
            ModeName::Rwa => BlockMode::Rwa,
            ModeName::Full => BlockMode::Full,
            ModeName::FullHo => BlockMode::FullHigherOrder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Amplitude,
    Robustness,
}

/// Frequencies are given in MHz and converted with `×2π×10⁶`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub chi_mhz: f64,
    pub gamma_decay_mhz: f64,
    pub gamma_phi_mhz: f64,
    pub kerr_mhz: f64,
    pub chi_prime_mhz: f64,
    pub cavity_decay_mhz: f64,
    pub n_max: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            chi_mhz: 2.5,
            gamma_decay_mhz: 1.45e-3,
            gamma_phi_mhz: 1.45e-3,
            kerr_mhz: 3e-3,
            chi_prime_mhz: 5e-3,
            cavity_decay_mhz: 0.0,
            n_max: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub thetas: Vec<f64>,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            thetas: vec![0.0, -PI / 4.0, PI / 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub scheme: SchemeName,
    /// Polar excursion of the path-designed loop, in units of π.
    pub lambda_over_pi: f64,
    pub mode: ModeName,
    pub optimize: bool,
    /// Ω_M/χ for single-point runs.
    pub omega_ratio: f64,
    pub decoherence: bool,
    pub trajectory: bool,
    pub trajectory_points: usize,
    pub output_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            scheme: SchemeName::Oss,
            lambda_over_pi: 0.501,
            mode: ModeName::Full,
            optimize: false,
            omega_ratio: 0.264,
            decoherence: true,
            trajectory: true,
            trajectory_points: 201,
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_points: usize,
    pub ratio_spacing: Spacing,
    pub error_min: f64,
    pub error_max: f64,
    pub error_points: usize,
    /// Drive amplitude of robustness maps, MHz.
    pub robustness_omega_mhz: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kind: SweepKind::Amplitude,
            ratio_min: 0.01,
            ratio_max: 0.6,
            ratio_points: 25,
            ratio_spacing: Spacing::Log,
            error_min: -0.1,
            error_max: 0.1,
            error_points: 21,
            robustness_omega_mhz: 0.66,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSection {
    pub omega_ratio: f64,
    pub chi_tau: Vec<f64>,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        Self {
            omega_ratio: 0.1,
            chi_tau: vec![0.5, 1.0, 2.0, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub unitary_rtol: f64,
    pub unitary_atol: f64,
    pub lindblad_rtol: f64,
    pub lindblad_atol: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let u = EvolveOptions::unitary();
        let l = EvolveOptions::lindblad();
        Self {
            unitary_rtol: u.rtol,
            unitary_atol: u.atol,
            lindblad_rtol: l.rtol,
            lindblad_atol: l.atol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemSection,
    pub target: TargetSection,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub correlation: CorrelationSection,
    pub tolerances: ToleranceSection,
}

fn bad(key: &str, msg: &str) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(key, "must be positive and finite"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(bad(key, "must be non-negative and finite"))
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        positive("system.chi_mhz", s.chi_mhz)?;
        non_negative("system.gamma_decay_mhz", s.gamma_decay_mhz)?;
        non_negative("system.gamma_phi_mhz", s.gamma_phi_mhz)?;
        non_negative("system.cavity_decay_mhz", s.cavity_decay_mhz)?;
        if !s.kerr_mhz.is_finite() {
            return Err(bad("system.kerr_mhz", "must be finite"));
        }
        if !s.chi_prime_mhz.is_finite() {
            return Err(bad("system.chi_prime_mhz", "must be finite"));
        }
        if s.n_max == 0 {
            return Err(bad("system.n_max", "must be at least 1"));
        }
        if self.target.thetas.is_empty() || self.target.thetas.iter().any(|t| !t.is_finite()) {
            return Err(bad(
                "target.thetas",
                "must be a non-empty list of finite angles",
            ));
        }
        if self.target.thetas.len() > s.n_max {
            return Err(bad("target.thetas", "has more entries than system.n_max"));
        }
        let r = &self.run;
        if !(r.lambda_over_pi > 0.0 && r.lambda_over_pi <= 1.0) || r.lambda_over_pi == 0.5 {
            return Err(bad(
                "run.lambda_over_pi",
                "must lie in (0, 1] and differ from 0.5",
            ));
        }
        positive("run.omega_ratio", r.omega_ratio)?;
        if r.trajectory_points < 2 {
            return Err(bad("run.trajectory_points", "must be at least 2"));
        }
        let w = &self.sweep;
        positive("sweep.ratio_min", w.ratio_min)?;
        positive("sweep.ratio_max", w.ratio_max)?;
        if w.ratio_max < w.ratio_min {
            return Err(bad("sweep.ratio_max", "must not be below sweep.ratio_min"));
        }
        if w.ratio_points == 0 {
            return Err(bad("sweep.ratio_points", "must be at least 1"));
        }
        if !(w.error_min.is_finite() && w.error_max.is_finite() && w.error_min <= w.error_max) {
            return Err(bad(
                "sweep.error_max",
                "must be finite and not below sweep.error_min",
            ));
        }
        if w.error_points == 0 {
            return Err(bad("sweep.error_points", "must be at least 1"));
        }
        positive("sweep.robustness_omega_mhz", w.robustness_omega_mhz)?;
        positive("correlation.omega_ratio", self.correlation.omega_ratio)?;
        if self.correlation.chi_tau.is_empty() {
            return Err(bad("correlation.chi_tau", "must not be empty"));
        }
        for &x in &self.correlation.chi_tau {
            positive("correlation.chi_tau", x)?;
        }
        let t = &self.tolerances;
        positive("tolerances.unitary_rtol", t.unitary_rtol)?;
        positive("tolerances.unitary_atol", t.unitary_atol)?;
        positive("tolerances.lindblad_rtol", t.lindblad_rtol)?;
        positive("tolerances.lindblad_atol", t.lindblad_atol)?;
        Ok(())
    }

    pub fn params(&self) -> SystemParams {
        let s = &self.system;
        SystemParams {
            chi: mhz(s.chi_mhz),
            gamma_decay: mhz(s.gamma_decay_mhz),
            gamma_phi: mhz(s.gamma_phi_mhz),
            kerr: mhz(s.kerr_mhz),
            chi_prime: mhz(s.chi_prime_mhz),
            n_max: s.n_max,
            cavity_decay: mhz(s.cavity_decay_mhz),
        }
    }

    pub fn target(&self) -> Result<SnapTarget, CliError> {
        SnapTarget::new(&self.target.thetas).map_err(|e| bad("target.thetas", &e.to_string()))
    }

    pub fn scheme_of(&self, name: SchemeName) -> Scheme {
        match name {
            SchemeName::Oss => Scheme::OrangeSlice,
            SchemeName::Pd => Scheme::PathDesigned {
                lambda: self.run.lambda_over_pi * PI,
            },
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme_of(self.run.scheme)
    }

    pub fn omega_max(&self) -> f64 {
        self.run.omega_ratio * self.params().chi
    }

    pub fn metric_options(&self) -> MetricOptions {
        let t = &self.tolerances;
        MetricOptions {
            mode: self.run.mode.mode(),
            unitary: EvolveOptions::unitary()
                .with_rtol(t.unitary_rtol, t.unitary_atol)
                .with_exec(Execution::Sequential),
            lindblad: EvolveOptions::lindblad()
                .with_rtol(t.lindblad_rtol, t.lindblad_atol)
                .with_exec(Execution::Sequential),
            exec: Execution::Parallel,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        let w = &self.sweep;
        match w.ratio_spacing {
            Spacing::Log => log_grid(w.ratio_min, w.ratio_max, w.ratio_points),
            Spacing::Linear => lin_grid(w.ratio_min, w.ratio_max, w.ratio_points),
        }
    }

    pub fn error_axis(&self) -> Vec<f64> {
        lin_grid(
            self.sweep.error_min,
            self.sweep.error_max,
            self.sweep.error_points,
        )
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.run.output_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ScenarioConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ScenarioConfig::parse(&text).unwrap(), c);
        assert_eq!(ScenarioConfig::parse("").unwrap(), c);
    }

    #[test]
    fn unit_conversion_exact() {
        let c = ScenarioConfig::parse("[system]\nchi_mhz = 2.5\n").unwrap();
        assert_eq!(c.params().chi, 2.5 * std::f64::consts::TAU * 1e6);
        assert_eq!(
            c.params().gamma_decay,
            1.45e-3 * std::f64::consts::TAU * 1e6
        );
    }

    #[test]
    fn unknown_key_named() {
        let e = ScenarioConfig::parse("[system]\nchi_mhx = 2.5\n").unwrap_err();
        assert!(e.to_string().contains("chi_mhx"), "{e}");
        let e = ScenarioConfig::parse("[sytem]\n").unwrap_err();
        assert!(e.to_string().contains("sytem"), "{e}");
    }

    #[test]
    fn invalid_values_named() {
        let e = ScenarioConfig::parse("[run]\nomega_ratio = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("run.omega_ratio"));
        let e = ScenarioConfig::parse("[run]\nmode = \"fast\"\n").unwrap_err();
        assert!(e.to_string().contains("fast"));
        let e = ScenarioConfig::parse("[target]\nthetas = []\n").unwrap_err();
        assert!(e.to_string().contains("target.thetas"));
    }
}
