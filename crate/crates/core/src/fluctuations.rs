//! Linearized quantum fluctuations around the mean-field solution.
//!
//! State vector u = (δq, δp, δx, δy) with δx = (δa + δa†)/√2 and
//! δy = i(δa† − δa)/√2. The drift is
//!
//! ```text
//!        ⎛   0     ω_m     0      0  ⎞
//!  A  =  ⎜ −ω_m    −γ    √2Gˣ   √2Gʸ ⎟
//!        ⎜ −√2Gʸ    0     −κ      Δ  ⎟
//!        ⎝  √2Gˣ    0     −Δ     −κ  ⎠
//! ```
//!
//! with G = g⟨a⟩, and the diffusion is diag(0, γ(2n̄+1), κ, κ). The symmetrized
//! covariance V_ij = ⟨u_i u_j + u_j u_i⟩/2 of the stationary state solves
//! AV + VAᵀ + D = 0. Counter-rotating terms are kept.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::FourierSolution;
use crate::ode::{self, Dopri5Options};
use crate::params::SystemParams;
use crate::quad::{self, QuadOptions};

/// Residual bound on the Lyapunov solve, relative to ‖D‖.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

/// Drift of the linearized equations: a static part at G0 plus a part
/// oscillating at `omega` from the probe-induced G1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix {
    pub omega_m: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub detuning: f64,
    pub g0: Complex64,
    pub g1: Complex64,
    /// Modulation frequency of the G1 terms (rad/s).
    pub omega: f64,
}

impl DriftMatrix {
    /// The constant drift built from G0 alone.
    pub fn static_part(&self) -> Matrix4<f64> {
        drift(self.omega_m, self.gamma, self.kappa, self.detuning, self.g0)
    }

    /// A(t) − A_static; identically zero when G1 = 0.
    pub fn periodic_part(&self, t: f64) -> Matrix4<f64> {
        let g = self.g1 * Complex64::from_polar(1.0, -self.omega * t);
        coupling_block(g)
    }

    /// Full drift with G(t) = G0 + G1 e^{−iωt}; Gˣ, Gʸ are the real and
    /// imaginary parts of the total so that A(t) stays real.
    pub fn at(&self, t: f64) -> Matrix4<f64> {
        self.static_part() + self.periodic_part(t)
    }
}

fn coupling_block(g: Complex64) -> Matrix4<f64> {
    let (gx, gy) = (SQRT_2 * g.re, SQRT_2 * g.im);
    let mut m = Matrix4::zeros();
    m[(1, 2)] = gx;
    m[(1, 3)] = gy;
    m[(2, 0)] = -gy;
    m[(3, 0)] = gx;
    m
}

/// Static drift for coupling `g_eff` = g⟨a⟩ and effective detuning Δ.
pub fn drift(omega_m: f64, gamma: f64, kappa: f64, detuning: f64, g_eff: Complex64) -> Matrix4<f64> {
    #[rustfmt::skip]
    let bare = Matrix4::new(
        0.0, omega_m, 0.0, 0.0,
        -omega_m, -gamma, 0.0, 0.0,
        0.0, 0.0, -kappa, detuning,
        0.0, 0.0, -detuning, -kappa,
    );
    bare + coupling_block(g_eff)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix(pub Matrix4<f64>);

impl DiffusionMatrix {
    pub fn new(gamma: f64, kappa: f64, n_thermal: f64) -> Self {
        Self(Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, gamma * (2.0 * n_thermal + 1.0), kappa, kappa)))
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.0.symmetric_eigenvalues().iter().all(|&l| l >= -1e-12 * self.0.norm())
    }
}

/// Drift and diffusion at the operating point Δ = ω_m from the harmonic
/// mean-field solution.
pub fn build_drift_diffusion(params: &SystemParams, fourier: &FourierSolution) -> (DriftMatrix, DiffusionMatrix) {
    let a = DriftMatrix {
        omega_m: params.omega_m,
        gamma: params.gamma,
        kappa: params.kappa,
        detuning: params.omega_m,
        g0: params.g * fourier.a0,
        g1: params.g * fourier.a1,
        omega: fourier.delta,
    };
    (a, DiffusionMatrix::new(params.gamma, params.kappa, params.thermal_occupation()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix {
    pub v: Matrix4<f64>,
    /// ‖AV + VAᵀ + D‖_F / ‖D‖_F of the solve that produced it.
    pub residual: f64,
}

impl CovarianceMatrix {
    pub fn vqq(&self) -> f64 {
        self.v[(0, 0)]
    }

    pub fn vpp(&self) -> f64 {
        self.v[(1, 1)]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.v - self.v.transpose()).abs().max() <= tol
    }

    /// Smallest eigenvalue of V + iΩ/2 (Ω the two-mode symplectic form);
    /// physical states have it ≥ 0.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let mut m: Matrix4<Complex64> = self.v.map(|x| Complex64::new(x, 0.0));
        for k in [0, 2] {
            m[(k, k + 1)] += Complex64::new(0.0, 0.5);
            m[(k + 1, k)] -= Complex64::new(0.0, 0.5);
        }
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn residual_occupation(&self) -> f64 {
        residual_occupation(&self.v)
    }

    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.v[(i, j)];
            }
        }
        out
    }
}

/// n̄0 = (V_qq + V_pp − 1)/2.
pub fn residual_occupation(v: &Matrix4<f64>) -> f64 {
    (v[(0, 0)] + v[(1, 1)] - 1.0) / 2.0
}

fn eigen_pairs(a: &Matrix4<f64>) -> Vec<(f64, f64)> {
    a.complex_eigenvalues().iter().map(|l| (l.re, l.im)).collect()
}

/// Fails with [`Error::Instability`] unless every eigenvalue of `a` has a
/// negative real part.
pub fn check_hurwitz(a: &Matrix4<f64>) -> Result<Vec<(f64, f64)>> {
    let eig = eigen_pairs(a);
    if eig.iter().any(|&(re, _)| !(re < 0.0)) {
        return Err(Error::Instability { eigenvalues: eig });
    }
    Ok(eig)
}

fn lyapunov_residual(a: &Matrix4<f64>, v: &Matrix4<f64>, d: &Matrix4<f64>) -> f64 {
    (a * v + v * a.transpose() + d).norm() / d.norm().max(f64::MIN_POSITIVE)
}

/// Solves AV + VAᵀ + D = 0 through the Kronecker form, in units scaled by
/// the largest drift entry.
pub fn steady_covariance_lyapunov(a: &Matrix4<f64>, d: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    check_hurwitz(a)?;
    let s = a.abs().max();
    let an = a / s;
    let dn = d.0 / s;
    let id = Matrix4::<f64>::identity();
    let mut k = DMatrix::<f64>::zeros(16, 16);
    // vec(AV) = (I ⊗ A) vec V, vec(VAᵀ) = (A ⊗ I) vec V, column-major.
    for i in 0..4 {
        for j in 0..4 {
            for p in 0..4 {
                for q in 0..4 {
                    k[(4 * j + i, 4 * q + p)] = id[(j, q)] * an[(i, p)] + an[(j, q)] * id[(i, p)];
                }
            }
        }
    }
    let rhs = DVector::from_iterator(16, dn.iter().map(|x| -x));
    let lu = k.lu();
    let mut x = lu.solve(&rhs).ok_or_else(|| Error::Singular("Lyapunov Kronecker system".into()))?;
    // one step of iterative refinement
    let r = &rhs - &(lu_matrix(&an) * &x);
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let v = Matrix4::from_column_slice(x.as_slice());
    let v = (v + v.transpose()) / 2.0;
    let residual = lyapunov_residual(a, &v, &d.0);
    if residual > LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::Singular(format!("Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_RESIDUAL_TOL:.0e}")));
    }
    Ok(CovarianceMatrix { v, residual })
}

fn lu_matrix(an: &Matrix4<f64>) -> DMatrix<f64> {
    let id = Matrix4::<f64>::identity();
    DMatrix::from_fn(16, 16, |r, c| {
        let (j, i) = (r / 4, r % 4);
        let (q, p) = (c / 4, c % 4);
        id[(j, q)] * an[(i, p)] + an[(j, q)] * id[(i, p)]
    })
}

#[derive(Debug, Clone)]
pub struct SpectralOptions {
    /// Frequency scale s of the map ω = s·tan(u); defaults to the largest |Im λ|.
    pub scale: Option<f64>,
    /// Extra breakpoints (rad/s) added to the automatic ones at the drift resonances.
    pub breakpoints: Vec<f64>,
    /// Integrate ω ≥ 0 and double (the real part of the integrand is even).
    pub use_symmetry: bool,
    pub quad: QuadOptions,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { scale: None, breakpoints: Vec::new(), use_symmetry: true, quad: QuadOptions { rel_tol: 1e-9, abs_tol: 1e-12, max_intervals: 50_000 } }
    }
}

/// V = (1/2π) ∫ (iω − A)⁻¹ D (−iω − Aᵀ)⁻¹ dω over the whole real line, with
/// ω = s·tan(u) so the tails are integrated exactly.
pub fn steady_covariance_spectral(a: &Matrix4<f64>, d: &DiffusionMatrix, opts: &SpectralOptions) -> Result<CovarianceMatrix> {
    let eig = check_hurwitz(a)?;
    let scale = opts.scale.unwrap_or_else(|| eig.iter().map(|e| e.1.abs()).fold(0.0, f64::max).max(a.abs().max()));
    let ac: Matrix4<Complex64> = a.map(|x| Complex64::new(x, 0.0));
    let dc: Matrix4<Complex64> = d.0.map(|x| Complex64::new(x, 0.0));

    let mut freqs: Vec<f64> = Vec::new();
    for &(re, im) in &eig {
        let w = re.abs();
        for k in [-50.0, -5.0, -1.0, 0.0, 1.0, 5.0, 50.0] {
            freqs.push(im + k * w);
            freqs.push(-im + k * w);
        }
    }
    freqs.extend(opts.breakpoints.iter().copied());
    let half = PI / 2.0;
    let lo = if opts.use_symmetry { 0.0 } else { -half };
    let mut points: Vec<f64> = freqs.iter().map(|&w| (w / scale).atan()).filter(|&u| u > lo && u < half).collect();
    points.push(lo);
    points.push(half);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);

    let integrand = |u: f64| -> Vec<f64> {
        let (s, c) = u.sin_cos();
        let mut out = vec![0.0; 16];
        if c <= 0.0 {
            // u = ±π/2 limit: s·sec²u·M D M† → D/s
            for (o, x) in out.iter_mut().zip(d.0.iter()) {
                *o = x / scale;
            }
            return out;
        }
        let w = scale * s / c;
        let jac = scale / (c * c);
        let m = Matrix4::<Complex64>::from_diagonal_element(Complex64::new(0.0, w)) - ac;
        let minv = match m.try_inverse() {
            Some(x) => x,
            None => return out,
        };
        let f = minv * dc * minv.adjoint();
        for (o, x) in out.iter_mut().zip(f.iter()) {
            *o = x.re * jac;
        }
        out
    };
    let r = quad::integrate(integrand, &points, &opts.quad)?;
    let factor = if opts.use_symmetry { 2.0 } else { 1.0 } / (2.0 * PI);
    let v = Matrix4::from_column_slice(&r.value) * factor;
    let v = (v + v.transpose()) / 2.0;
    let residual = lyapunov_residual(a, &v, &d.0);
    Ok(CovarianceMatrix { v, residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Modulation {
    /// Static solution (G1 excluded).
    pub static_vqq: f64,
    pub static_vpp: f64,
    /// Peak-to-peak of V_qq(t), V_pp(t) over the final modulation period.
    pub vqq_peak_to_peak: f64,
    pub vpp_peak_to_peak: f64,
    /// Period-averaged shift from the static value.
    pub vqq_mean_shift: f64,
    pub vpp_mean_shift: f64,
    pub settle_time: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ModulationOptions {
    /// Integration time before measuring; defaults to 10 relaxation times of A_static.
    pub settle_time: Option<f64>,
    pub samples_per_period: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        Self { settle_time: None, samples_per_period: 64, rtol: 1e-11, atol: 1e-13 }
    }
}

/// Integrates V̇ = A(t)V + VA(t)ᵀ + D from the static steady state and reports
/// the residual periodic modulation of V_qq and V_pp.
pub fn periodic_modulation(drift: &DriftMatrix, d: &DiffusionMatrix, opts: &ModulationOptions) -> Result<Modulation> {
    let a0 = drift.static_part();
    let v0 = steady_covariance_lyapunov(&a0, d)?;
    if drift.g1.norm() >= drift.g0.norm() && drift.g1.norm() > 0.0 {
        return Err(Error::OutOfValidity(format!("|G1| = {:.3e} must be below |G0| = {:.3e}", drift.g1.norm(), drift.g0.norm())));
    }
    let base = Modulation {
        static_vqq: v0.vqq(),
        static_vpp: v0.vpp(),
        vqq_peak_to_peak: 0.0,
        vpp_peak_to_peak: 0.0,
        vqq_mean_shift: 0.0,
        vpp_mean_shift: 0.0,
        settle_time: 0.0,
    };
    if drift.g1.norm() == 0.0 {
        return Ok(base);
    }
    let eig = check_hurwitz(&drift.at(0.0))?;
    let slowest = eig.iter().map(|e| -e.0).fold(f64::INFINITY, f64::min);
    let period = 2.0 * PI / drift.omega;
    let settle = opts.settle_time.unwrap_or(10.0 / slowest);
    let n_periods = (settle / period).ceil();
    let t_end = (n_periods + 1.0) * period;
    let n = opts.samples_per_period.max(8);
    let times: Vec<f64> = (0..n).map(|k| n_periods * period + k as f64 * period / n as f64).collect();

    let mut y0 = [0.0; 16];
    y0.copy_from_slice(v0.v.as_slice());
    let dm = d.0;
    let mut qq = Vec::with_capacity(n);
    let mut pp = Vec::with_capacity(n);
    let opts_ode = Dopri5Options { rtol: opts.rtol, atol: opts.atol, ..Default::default() };
    ode::integrate(
        |t, y: &[f64; 16]| {
            let v = Matrix4::from_column_slice(y);
            let a = drift.at(t);
            let dv = a * v + v * a.transpose() + dm;
            let mut out = [0.0; 16];
            out.copy_from_slice(dv.as_slice());
            out
        },
        0.0,
        y0,
        t_end,
        &times,
        &opts_ode,
        |_, y| {
            qq.push(y[0]);
            pp.push(y[5]);
        },
    )?;
    let spread = |xs: &[f64]| {
        let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        hi - lo
    };
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(Modulation {
        vqq_peak_to_peak: spread(&qq),
        vpp_peak_to_peak: spread(&pp),
        vqq_mean_shift: mean(&qq) - base.static_vqq,
        vpp_mean_shift: mean(&pp) - base.static_vpp,
        settle_time: n_periods * period,
        ..base
    })
}
