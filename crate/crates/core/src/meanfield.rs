//! First-moment dynamics of the bichromatically driven optomechanical system.
//!
//! In the frame rotating at the pump frequency ω_l,
//!
//! ```text
//! d⟨q⟩/dt = ω_m ⟨p⟩
//! d⟨p⟩/dt = −ω_m ⟨q⟩ − γ ⟨p⟩ + g |⟨a⟩|²
//! d⟨a⟩/dt = −(κ + iΔ0) ⟨a⟩ + i g ⟨a⟩⟨q⟩ + E0 + E1 e^{−iδt}
//! ```
//!
//! with Δ0 = ω_c − ω_l and δ = ω_p − ω_l. The long-time solution is periodic
//! at δ; [`analytic_fourier_solution`] gives its first-harmonic truncation and
//! [`integrate_meanfield`] the exact trajectory used to check it.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix3, Matrix4, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Dopri5Options};
use crate::params::{DriveParams, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance on δ = ω_m and Δ = ω_m for the analytic solution.
pub const OPERATING_POINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    pub a: Complex64,
}

impl MeanFieldState {
    pub fn zero() -> Self {
        Self { t: 0.0, q: 0.0, p: 0.0, a: Complex64::new(0.0, 0.0) }
    }

    fn from_vec(t: f64, y: &[f64; 4]) -> Self {
        Self { t, q: y[0], p: y[1], a: Complex64::new(y[2], y[3]) }
    }

    fn to_vec(self) -> [f64; 4] {
        [self.q, self.p, self.a.re, self.a.im]
    }

    fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite() && self.a.re.is_finite() && self.a.im.is_finite()
    }
}

/// Harmonic components of the long-time solution, truncated at the first
/// harmonic: ⟨O⟩ = O0 + O1 e^{−iδt} + c.c. for the mechanics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierSolution {
    pub a0: Complex64,
    pub a1: Complex64,
    pub q0: f64,
    pub q1: Complex64,
    pub p1: Complex64,
    /// Fundamental δ (rad/s).
    pub delta: f64,
    /// G1²/(κγ) with G1 = g a1; the a0 formula assumes this is ≪ 1.
    pub probe_cooperativity: f64,
    /// C0 = G0²/(κγ).
    pub cooperativity: f64,
}

impl FourierSolution {
    /// ⟨q⟩(t) = q0 + 2Re(q1) cos δt + 2Im(q1) sin δt.
    pub fn q_at(&self, t: f64) -> f64 {
        let (s, c) = (self.delta * t).sin_cos();
        self.q0 + 2.0 * self.q1.re * c + 2.0 * self.q1.im * s
    }

    pub fn p_at(&self, t: f64) -> f64 {
        let (s, c) = (self.delta * t).sin_cos();
        2.0 * self.p1.re * c + 2.0 * self.p1.im * s
    }

    pub fn a_at(&self, t: f64) -> Complex64 {
        self.a0 + self.a1 * Complex64::from_polar(1.0, -self.delta * t)
    }

    /// Mechanical coherent amplitude √2|q1|.
    pub fn coherent_amplitude(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.q1.norm()
    }
}

/// First-harmonic solution at the operating point δ = Δ = ω_m.
///
/// Returns [`Error::OutOfValidity`] when the drives are not at that point,
/// unless `allow_off_resonance` is set.
pub fn analytic_fourier_solution(params: &SystemParams, drives: &DriveParams, allow_off_resonance: bool) -> Result<FourierSolution> {
    let a0 = drives.e0 / Complex64::new(params.kappa, params.omega_m);
    let g2 = params.g * params.g;
    let a1 = drives.e1 / (params.kappa + g2 / params.gamma * a0.norm_sqr());
    let q0 = params.g / params.omega_m * (a0.norm_sqr() + a1.norm_sqr());
    let q1 = I * params.g / params.gamma * a0.conj() * a1;
    let p1 = -I * q1;

    if !allow_off_resonance {
        let delta = drives.probe_offset();
        let eff = drives.detuning(params) - params.g * q0;
        let off = |x: f64| (x / params.omega_m - 1.0).abs() > OPERATING_POINT_TOL;
        if off(delta) || off(eff) {
            return Err(Error::OutOfValidity(format!(
                "analytic solution needs δ = Δ = ω_m; got δ/ω_m = {:.9}, Δ/ω_m = {:.9}",
                delta / params.omega_m,
                eff / params.omega_m
            )));
        }
    }
    let kg = params.kappa * params.gamma;
    Ok(FourierSolution {
        a0,
        a1,
        q0,
        q1,
        p1,
        delta: drives.probe_offset(),
        probe_cooperativity: g2 * a1.norm_sqr() / kg,
        cooperativity: g2 * a0.norm_sqr() / kg,
    })
}

fn rhs(params: &SystemParams, drives: &DriveParams, detuning: f64, t: f64, y: &[f64; 4]) -> [f64; 4] {
    let (q, p) = (y[0], y[1]);
    let a = Complex64::new(y[2], y[3]);
    let drive = drives.e0 + drives.e1 * Complex64::from_polar(1.0, -drives.probe_offset() * t);
    let da = -Complex64::new(params.kappa, detuning) * a + I * params.g * a * q + drive;
    [params.omega_m * p, -params.omega_m * q - params.gamma * p + params.g * a.norm_sqr(), da.re, da.im]
}

/// Steady state of the pump-only problem by fixed-point iteration of
/// a = E0/(κ + i(Δ0 − g q)), q = g|a|²/ω_m.
pub fn static_point(params: &SystemParams, drives: &DriveParams) -> (Complex64, f64) {
    let d0 = drives.detuning(params);
    let mut q = 0.0;
    let mut a = Complex64::new(0.0, 0.0);
    for _ in 0..200 {
        a = drives.e0 / Complex64::new(params.kappa, d0 - params.g * q);
        let q_new = params.g * a.norm_sqr() / params.omega_m;
        if (q_new - q).abs() <= 1e-15 * q_new.abs().max(1e-300) {
            q = q_new;
            break;
        }
        q = q_new;
    }
    (a, q)
}

/// Jacobian of the mean-field flow at the pump-only steady state, in the
/// order (q, p, Re a, Im a).
pub fn linearized_jacobian(params: &SystemParams, drives: &DriveParams) -> Matrix4<f64> {
    let (a, q) = static_point(params, drives);
    let eff = drives.detuning(params) - params.g * q;
    let (g, wm) = (params.g, params.omega_m);
    Matrix4::new(
        0.0, wm, 0.0, 0.0,
        -wm, -params.gamma, 2.0 * g * a.re, 2.0 * g * a.im,
        -g * a.im, 0.0, -params.kappa, eff,
        g * a.re, 0.0, -eff, -params.kappa,
    )
}

/// 1/(slowest decay rate) of the linearized dynamics (s).
pub fn relaxation_time(params: &SystemParams, drives: &DriveParams) -> Result<f64> {
    let eig = linearized_jacobian(params, drives).complex_eigenvalues();
    let slowest = eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if slowest >= 0.0 {
        return Err(Error::Instability { eigenvalues: eig.iter().map(|l| (l.re, l.im)).collect() });
    }
    Ok(-1.0 / slowest)
}

#[derive(Debug, Clone, Copy)]
pub struct MeanFieldConfig {
    /// Integration end; defaults to 20 relaxation times.
    pub t_final: Option<f64>,
    /// Spacing of recorded samples (s); defaults to 1/32 of a mechanical period.
    pub output_interval: Option<f64>,
    /// Samples are recorded only for t ≥ `record_from` (s). Negative values
    /// count back from `t_final`.
    pub record_from: f64,
    pub initial: MeanFieldState,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self { t_final: None, output_interval: None, record_from: 0.0, initial: MeanFieldState::zero(), rtol: 1e-9, atol: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<MeanFieldState>,
    pub t_final: f64,
    pub steps: usize,
    pub max_error_ratio: f64,
}

impl Trajectory {
    /// CSV with header `t,q,p,re_a,im_a`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,q,p,re_a,im_a")?;
        for s in &self.states {
            writeln!(w, "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}", s.t, s.q, s.p, s.a.re, s.a.im)?;
        }
        Ok(())
    }
}

/// Integrates the nonlinear first-moment equations.
pub fn integrate_meanfield(params: &SystemParams, drives: &DriveParams, config: &MeanFieldConfig) -> Result<Trajectory> {
    let t_final = match config.t_final {
        Some(t) => t,
        None => 20.0 * relaxation_time(params, drives)?,
    };
    if !(t_final > 0.0) {
        return Err(Error::InvalidInput(format!("t_final must be > 0, got {t_final}")));
    }
    let dt = config.output_interval.unwrap_or(2.0 * PI / params.omega_m / 32.0);
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("output interval must be > 0".into()));
    }
    let start = if config.record_from < 0.0 { (t_final + config.record_from).max(0.0) } else { config.record_from };
    let first = (start / dt).ceil() as usize;
    let last = (t_final / dt * (1.0 + 1e-12)).floor() as usize;
    let times: Vec<f64> = (first..=last).map(|k| k as f64 * dt).filter(|&t| t <= t_final).collect();

    let detuning = drives.detuning(params);
    let opts = Dopri5Options { rtol: config.rtol, atol: config.atol, ..Default::default() };
    let mut states = Vec::with_capacity(times.len());
    let (_, stats) = ode::integrate(
        |t, y| rhs(params, drives, detuning, t, y),
        0.0,
        config.initial.to_vec(),
        t_final,
        &times,
        &opts,
        |t, y| states.push(MeanFieldState::from_vec(t, y)),
    )?;
    if let Some(bad) = states.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite { t: bad.t });
    }
    Ok(Trajectory { states, t_final, steps: stats.accepted, max_error_ratio: stats.max_error_ratio })
}

/// Least-squares harmonic content of a trajectory tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub periods: usize,
    pub samples: usize,
    pub q0: f64,
    pub q1: Complex64,
    pub p0: f64,
    pub p1: Complex64,
    pub a0: Complex64,
    pub a1: Complex64,
    /// Component at e^{+iδt}, dropped by the first-harmonic truncation.
    pub a_minus1: Complex64,
    /// RMS(trajectory − best periodic fit) / RMS(trajectory), worst of q, p.
    pub fit_residual: f64,
    /// RMS(trajectory − analytic waveform) / RMS(analytic waveform), over q and p jointly.
    pub analytic_residual: f64,
    pub discrepancies: Discrepancies,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Discrepancies {
    pub q0_rel: f64,
    pub q1_amplitude_rel: f64,
    pub q1_phase: f64,
    pub p1_amplitude_rel: f64,
    pub a0_rel: f64,
    pub a1_amplitude_rel: f64,
    /// |p0| relative to the first-harmonic amplitude of p (or to 1 when it vanishes).
    pub p_dc: f64,
}

fn rel(x: f64, reference: f64) -> f64 {
    if reference == 0.0 { x.abs() } else { (x / reference - 1.0).abs() }
}

fn fit_real(ts: &[f64], ys: &[f64], w: f64) -> Result<(f64, Complex64, f64)> {
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&t, &y) in ts.iter().zip(ys) {
        let (s, c) = (w * t).sin_cos();
        let v = Vector3::new(1.0, c, s);
        m += v * v.transpose();
        rhs += v * y;
    }
    let x = m.lu().solve(&rhs).ok_or_else(|| Error::Singular("harmonic fit normal equations".into()))?;
    let mut ss = 0.0;
    let mut tot = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let (s, c) = (w * t).sin_cos();
        ss += (y - x[0] - x[1] * c - x[2] * s).powi(2);
        tot += y * y;
    }
    let resid = if tot == 0.0 { 0.0 } else { (ss / tot).sqrt() };
    Ok((x[0], Complex64::new(x[1] / 2.0, x[2] / 2.0), resid))
}

fn fit_complex(ts: &[f64], ys: &[Complex64], w: f64) -> Result<[Complex64; 3]> {
    let mut m = nalgebra::Matrix3::<Complex64>::zeros();
    let mut rhs = nalgebra::Vector3::<Complex64>::zeros();
    for (&t, &y) in ts.iter().zip(ys) {
        let e = Complex64::from_polar(1.0, -w * t);
        let v = nalgebra::Vector3::new(Complex64::new(1.0, 0.0), e, e.conj());
        m += v.conjugate() * v.transpose();
        rhs += v.conjugate() * y;
    }
    let x = m.lu().solve(&rhs).ok_or_else(|| Error::Singular("complex harmonic fit".into()))?;
    Ok([x[0], x[1], x[2]])
}

/// Fits the last `periods` whole periods of 2π/δ in the trajectory to the
/// first-harmonic form and compares with the analytic solution.
pub fn compare_trajectory_to_fourier(traj: &Trajectory, fourier: &FourierSolution, periods: usize) -> Result<FitReport> {
    if periods == 0 {
        return Err(Error::InvalidInput("need at least one period".into()));
    }
    let w = fourier.delta;
    let period = 2.0 * PI / w;
    let t_end = traj.states.last().map(|s| s.t).ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
    let t_start = t_end - periods as f64 * period;
    let tail: Vec<&MeanFieldState> = traj.states.iter().filter(|s| s.t > t_start - 1e-9 * period).collect();
    let covered = tail.first().map(|s| t_end - s.t).unwrap_or(0.0);
    if covered < (periods as f64 - 0.5) * period || tail.len() < 8 * periods {
        return Err(Error::InsufficientData(format!(
            "trajectory tail covers {:.2} periods with {} samples; need {periods} periods with >= {} samples",
            covered / period,
            tail.len(),
            8 * periods
        )));
    }
    // Half-open window over whole periods.
    let tail: Vec<&MeanFieldState> = if (covered / period - periods as f64).abs() < 1e-6 && tail.len() > 1 {
        tail[..tail.len() - 1].to_vec()
    } else {
        tail
    };
    let ts: Vec<f64> = tail.iter().map(|s| s.t).collect();
    let qs: Vec<f64> = tail.iter().map(|s| s.q).collect();
    let ps: Vec<f64> = tail.iter().map(|s| s.p).collect();
    let as_: Vec<Complex64> = tail.iter().map(|s| s.a).collect();

    let (q0, q1, rq) = fit_real(&ts, &qs, w)?;
    let (p0, p1, rp) = fit_real(&ts, &ps, w)?;
    let [a0, a1, a_minus1] = fit_complex(&ts, &as_, w)?;

    let mut diff = 0.0;
    let mut norm = 0.0;
    for s in &tail {
        let (qa, pa) = (fourier.q_at(s.t), fourier.p_at(s.t));
        diff += (s.q - qa).powi(2) + (s.p - pa).powi(2);
        norm += qa * qa + pa * pa;
    }
    let analytic_residual = if norm == 0.0 { diff.sqrt() } else { (diff / norm).sqrt() };

    let q1_phase = if q1.norm() > 0.0 && fourier.q1.norm() > 0.0 { (q1 / fourier.q1).arg() } else { 0.0 };
    let p_ref = 2.0 * p1.norm();
    let discrepancies = Discrepancies {
        q0_rel: rel(q0, fourier.q0),
        q1_amplitude_rel: rel(q1.norm(), fourier.q1.norm()),
        q1_phase,
        p1_amplitude_rel: rel(p1.norm(), fourier.p1.norm()),
        a0_rel: rel(a0.norm(), fourier.a0.norm()),
        a1_amplitude_rel: rel(a1.norm(), fourier.a1.norm()),
        p_dc: if p_ref > 0.0 { p0.abs() / p_ref } else { p0.abs() },
    };
    Ok(FitReport {
        periods,
        samples: tail.len(),
        q0,
        q1,
        p0,
        p1,
        a0,
        a1,
        a_minus1,
        fit_residual: rq.max(rp),
        analytic_residual,
        discrepancies,
    })
}
