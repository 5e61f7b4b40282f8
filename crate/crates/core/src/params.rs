//! Device and drive parameters, the derived scalars of the pulse protocol, and
//! pulse-sequence timing checks.
//!
//! All rates are angular (rad/s). Configuration files carry ordinary
//! frequencies in Hz; the `_hz` suffix on a field always means "value / 2π".

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum (m/s).
pub const C_LIGHT: f64 = 299_792_458.0;

/// Default ratio below which a "much less than" relation is considered satisfied.
pub const MUCH_LESS_RATIO: f64 = 0.1;
/// Default ceiling on |E1/E0|.
pub const PROBE_RATIO_LIMIT: f64 = 0.15;
/// Default ceiling on G_eff/κ for the adiabatic elimination of the cavity.
pub const WEAK_COUPLING_RATIO: f64 = 0.2;

const SIMON17_JSON: &str = include_str!("../presets/simon17.json");

/// Physical constants of the optomechanical device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    /// Mechanical energy damping rate (rad/s).
    pub gamma: f64,
    /// Cavity amplitude decay rate (rad/s).
    pub kappa: f64,
    /// Single-photon optomechanical coupling (rad/s).
    pub g: f64,
    /// Bath temperature (K).
    pub temperature: f64,
    /// Optical wavelength (m); fixes ω_c = 2πc/λ.
    pub lambda_optical: f64,
}

impl SystemParams {
    pub fn new(
        omega_m: f64,
        gamma: f64,
        kappa: f64,
        g: f64,
        temperature: f64,
        lambda_optical: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("omega_m", omega_m),
            ("gamma", gamma),
            ("kappa", kappa),
            ("g", g),
            ("lambda_optical", lambda_optical),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::InvalidInput(format!("temperature must be >= 0, got {temperature}")));
        }
        Ok(Self { omega_m, gamma, kappa, g, temperature, lambda_optical })
    }

    /// The photonic-crystal device parameter set: ω_m/2π = 5.25 GHz,
    /// γ = ω_m/3.8×10⁵, κ/2π = 846 MHz, g/2π = √2 × 869 kHz, T = 1 K, λ = 1550 nm.
    pub fn simon17() -> Self {
        let omega_m = 2.0 * PI * 5.25e9;
        Self {
            omega_m,
            gamma: omega_m / 3.8e5,
            kappa: 2.0 * PI * 846e6,
            g: 2.0 * PI * SQRT_2 * 869e3,
            temperature: 1.0,
            lambda_optical: 1550e-9,
        }
    }

    /// Looks up a shipped preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "simon17" => ParamsConfig::from_json_str(SIMON17_JSON)?.to_params(),
            other => Err(Error::InvalidInput(format!("unknown preset `{other}`"))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ParamsConfig::from_json_str(&text)?.to_params()
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    /// Cavity resonance ω_c = 2πc/λ (rad/s).
    pub fn omega_c(&self) -> f64 {
        2.0 * PI * C_LIGHT / self.lambda_optical
    }

    /// κ < ω_m.
    pub fn resolved_sideband(&self) -> bool {
        self.kappa < self.omega_m
    }

    pub fn thermal_occupation(&self) -> f64 {
        thermal_occupation(self.omega_m, self.temperature)
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::simon17()
    }
}

/// On-disk parameter file. Frequencies are ordinary (Hz, i.e. rate / 2π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// ω_m / 2π (Hz).
    pub mechanical_frequency_hz: f64,
    /// Q_m = ω_m / γ.
    pub mechanical_quality_factor: f64,
    /// κ / 2π (Hz), amplitude decay.
    pub cavity_decay_hz: f64,
    /// g / 2π (Hz).
    pub coupling_hz: f64,
    pub temperature_k: f64,
    pub wavelength_m: f64,
}

impl ParamsConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_params(&self) -> Result<SystemParams> {
        let omega_m = 2.0 * PI * self.mechanical_frequency_hz;
        if !(self.mechanical_quality_factor > 0.0) {
            return Err(Error::InvalidInput("mechanical_quality_factor must be > 0".into()));
        }
        SystemParams::new(
            omega_m,
            omega_m / self.mechanical_quality_factor,
            2.0 * PI * self.cavity_decay_hz,
            2.0 * PI * self.coupling_hz,
            self.temperature_k,
            self.wavelength_m,
        )
    }

    pub fn from_params(p: &SystemParams, name: Option<String>) -> Self {
        Self {
            name,
            mechanical_frequency_hz: p.omega_m / (2.0 * PI),
            mechanical_quality_factor: p.omega_m / p.gamma,
            cavity_decay_hz: p.kappa / (2.0 * PI),
            coupling_hz: p.g / (2.0 * PI),
            temperature_k: p.temperature,
            wavelength_m: p.lambda_optical,
        }
    }
}

/// Mean thermal occupation [exp(ħω/k_B T) − 1]⁻¹, zero at T = 0.
pub fn thermal_occupation(omega_m: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega_m / (K_B * temperature);
    1.0 / x.exp_m1()
}

/// Drive amplitude |E| = √(2κP/ħω) (rad/s).
pub fn drive_amplitude(power: f64, omega: f64, kappa: f64) -> f64 {
    (2.0 * kappa * power / (HBAR * omega)).sqrt()
}

/// Intracavity photon number of a sideband-detuned pulse, 2κP/[ħω(κ² + ω_m²)].
pub fn intracavity_photons(power: f64, omega_drive: f64, kappa: f64, omega_m: f64) -> f64 {
    2.0 * kappa * power / (HBAR * omega_drive * (kappa * kappa + omega_m * omega_m))
}

/// Pulse power that produces `n_photons` intracavity photons.
pub fn power_for_photons(n_photons: f64, omega_drive: f64, kappa: f64, omega_m: f64) -> f64 {
    n_photons * HBAR * omega_drive * (kappa * kappa + omega_m * omega_m) / (2.0 * kappa)
}

/// Linearized coupling G = g√(n/2).
pub fn effective_coupling(g: f64, n_photons: f64) -> f64 {
    g * (n_photons / 2.0).sqrt()
}

/// Conversion factor exp(−G²τ/κ). The same law gives Z for the write pulse
/// and B for the readout pulse.
pub fn conversion_factor(coupling: f64, duration: f64, kappa: f64) -> f64 {
    (-coupling * coupling * duration / kappa).exp()
}

/// Coherent amplitude |β| = √2 (ω_m/g) |E1/E0| reached by the preparation stage.
pub fn coherent_amplitude_estimate(params: &SystemParams, drives: &DriveParams) -> Result<f64> {
    let e0 = drives.e0.norm();
    if e0 == 0.0 {
        return Err(Error::InvalidInput("pump amplitude E0 is zero".into()));
    }
    Ok(SQRT_2 * params.omega_m / params.g * drives.e1.norm() / e0)
}

/// Bichromatic preparation drive: strong pump at ω_l and weak probe at ω_p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Pump power P0 (W).
    pub pump_power: f64,
    /// Probe power P1 (W).
    pub probe_power: f64,
    /// Pump frequency (rad/s).
    pub omega_l: f64,
    /// Probe frequency (rad/s).
    pub omega_p: f64,
    pub e0: Complex64,
    pub e1: Complex64,
}

impl DriveParams {
    /// Builds drives with real-positive amplitudes at explicit frequencies.
    pub fn new(params: &SystemParams, pump_power: f64, probe_power: f64, omega_l: f64, omega_p: f64) -> Result<Self> {
        Self::with_phases(params, pump_power, probe_power, omega_l, omega_p, 0.0, 0.0)
    }

    pub fn with_phases(
        params: &SystemParams,
        pump_power: f64,
        probe_power: f64,
        omega_l: f64,
        omega_p: f64,
        pump_phase: f64,
        probe_phase: f64,
    ) -> Result<Self> {
        if !(pump_power >= 0.0 && probe_power >= 0.0) {
            return Err(Error::InvalidInput("drive powers must be >= 0".into()));
        }
        if !(omega_l > 0.0 && omega_p > 0.0) {
            return Err(Error::InvalidInput("drive frequencies must be > 0".into()));
        }
        let e0 = Complex64::from_polar(drive_amplitude(pump_power, omega_l, params.kappa), pump_phase);
        let e1 = Complex64::from_polar(drive_amplitude(probe_power, omega_p, params.kappa), probe_phase);
        Ok(Self { pump_power, probe_power, omega_l, omega_p, e0, e1 })
    }

    /// Places the pump so that the effective detuning Δ = Δ0 − g⟨q⟩0 equals
    /// ω_m, and the probe at δ = ω_m above the pump (on cavity resonance up
    /// to the static radiation-pressure shift).
    pub fn at_operating_point(params: &SystemParams, pump_power: f64, probe_power: f64) -> Result<Self> {
        let omega_c = params.omega_c();
        let mut omega_l = omega_c - params.omega_m;
        let mut drives = Self::new(params, pump_power, probe_power, omega_l, omega_l + params.omega_m)?;
        // ⟨q⟩0 depends on ω_l only through ħω_l in |E0|; two passes settle it.
        for _ in 0..3 {
            let q0 = static_displacement(params, &drives);
            omega_l = omega_c - params.omega_m - params.g * q0;
            drives = Self::new(params, pump_power, probe_power, omega_l, omega_l + params.omega_m)?;
        }
        Ok(drives)
    }

    /// Bare detuning Δ0 = ω_c − ω_l.
    pub fn detuning(&self, params: &SystemParams) -> f64 {
        params.omega_c() - self.omega_l
    }

    /// Probe offset δ = ω_p − ω_l.
    pub fn probe_offset(&self) -> f64 {
        self.omega_p - self.omega_l
    }

    /// |E1/E0|, or infinity when the pump is off and the probe is not.
    pub fn amplitude_ratio(&self) -> f64 {
        let e0 = self.e0.norm();
        let e1 = self.e1.norm();
        if e0 == 0.0 {
            if e1 == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            e1 / e0
        }
    }

    pub fn warnings(&self, limit: f64) -> Vec<String> {
        let r = self.amplitude_ratio();
        if r > limit {
            vec![format!("|E1/E0| = {r:.4} exceeds {limit}; weak-probe truncation may be inaccurate")]
        } else {
            Vec::new()
        }
    }
}

/// Static mechanical displacement (g/ω_m)(|a0|² + |a1|²) at the operating point.
fn static_displacement(params: &SystemParams, drives: &DriveParams) -> f64 {
    let a0 = drives.e0 / Complex64::new(params.kappa, params.omega_m);
    let a1 = drives.e1 / (params.kappa + params.g * params.g / params.gamma * a0.norm_sqr());
    params.g / params.omega_m * (a0.norm_sqr() + a1.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    /// Blue-detuned (ω_c + ω_m), two-mode squeezing.
    Write,
    /// Red-detuned (ω_c − ω_m), beamsplitter.
    Readout,
}

impl PulseKind {
    pub fn carrier(self, params: &SystemParams) -> f64 {
        match self {
            PulseKind::Write => params.omega_c() + params.omega_m,
            PulseKind::Readout => params.omega_c() - params.omega_m,
        }
    }
}

/// A flat-top sideband pulse and its derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// Pulse power (W).
    pub power: f64,
    /// Duration (s).
    pub duration: f64,
    pub n_photons: f64,
    /// Effective coupling G (rad/s).
    pub coupling: f64,
    /// Z for a write pulse, B for a readout pulse.
    pub conversion: f64,
}

impl PulseSpec {
    pub fn from_power(params: &SystemParams, kind: PulseKind, power: f64, duration: f64) -> Result<Self> {
        if !(power > 0.0 && duration >= 0.0) {
            return Err(Error::InvalidInput("pulse power must be > 0 and duration >= 0".into()));
        }
        let n_photons = intracavity_photons(power, kind.carrier(params), params.kappa, params.omega_m);
        let coupling = effective_coupling(params.g, n_photons);
        let conversion = conversion_factor(coupling, duration, params.kappa);
        Ok(Self { kind, power, duration, n_photons, coupling, conversion })
    }

    /// Inverts the power→coupling chain for a target effective coupling.
    pub fn from_coupling(params: &SystemParams, kind: PulseKind, coupling: f64, duration: f64) -> Result<Self> {
        if !(coupling > 0.0) {
            return Err(Error::InvalidInput("coupling must be > 0".into()));
        }
        let n_photons = 2.0 * (coupling / params.g).powi(2);
        let power = power_for_photons(n_photons, kind.carrier(params), params.kappa, params.omega_m);
        Self::from_power(params, kind, power, duration)
    }

    pub fn warnings(&self, params: &SystemParams, limit: f64) -> Vec<String> {
        let ratio = self.coupling / params.kappa;
        if ratio > limit {
            vec![format!("{:?} pulse: G/κ = {ratio:.3} exceeds {limit}; adiabatic elimination questionable", self.kind)]
        } else {
            Vec::new()
        }
    }
}

/// Durations of the five protocol stages (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub tau_c: f64,
    pub tau_pd: f64,
    pub tau_b: f64,
    pub tau_d: f64,
    pub tau_r: f64,
}

impl PulseSequence {
    /// Sequence matching the figure parameters: τ_b = 10 ns, τ_r = 40 ns,
    /// τ_pd = 100/κ and a detection window equal to the write pulse.
    pub fn nominal(params: &SystemParams) -> Self {
        Self { tau_c: 20.0 / params.gamma, tau_pd: 100.0 / params.kappa, tau_b: 1e-8, tau_d: 1e-8, tau_r: 4e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: String,
    pub ratio: f64,
    pub threshold: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub checks: Vec<ConstraintCheck>,
    pub verdict: CheckStatus,
}

impl SequenceReport {
    pub fn passed(&self) -> bool {
        self.verdict == CheckStatus::Pass
    }
}

impl fmt::Display for SequenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Warn => "WARN",
            };
            writeln!(f, "[{tag}] {:<38} ratio = {:.3e} (< {})", c.constraint, c.ratio, c.threshold)?;
        }
        let v = if self.passed() { "all timing constraints satisfied" } else { "timing constraints violated" };
        write!(f, "verdict: {v}")
    }
}

/// Checks κ⁻¹ ≪ τ_pd ≪ γ⁻¹ and τ_pd + τ_b + τ_d + τ_r ≪ γ⁻¹, each as a ratio
/// below `threshold`.
pub fn validate_sequence(seq: &PulseSequence, params: &SystemParams, threshold: f64) -> Result<SequenceReport> {
    let durations = [seq.tau_c, seq.tau_pd, seq.tau_b, seq.tau_d, seq.tau_r];
    if durations.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidInput("pulse durations must be finite and >= 0".into()));
    }
    let total = seq.tau_pd + seq.tau_b + seq.tau_d + seq.tau_r;
    let ratios = [
        ("cavity decay: 1/kappa << tau_pd", 1.0 / (params.kappa * seq.tau_pd)),
        ("mechanical coherence: tau_pd << 1/gamma", seq.tau_pd * params.gamma),
        ("no damping: tau_pd+tau_b+tau_d+tau_r << 1/gamma", total * params.gamma),
    ];
    let checks: Vec<_> = ratios
        .into_iter()
        .map(|(name, ratio)| ConstraintCheck {
            constraint: name.to_string(),
            ratio,
            threshold,
            status: if ratio < threshold { CheckStatus::Pass } else { CheckStatus::Warn },
        })
        .collect();
    let verdict = if checks.iter().all(|c| c.status == CheckStatus::Pass) { CheckStatus::Pass } else { CheckStatus::Warn };
    Ok(SequenceReport { checks, verdict })
}
