//! Closed-form detection statistics of the readout field for a
//! phonon-added coherent state |α, m⟩ ∝ b†ᵐ|α⟩, the thermal-residual mixture
//! produced by a displaced thermal input, and the matching Fock-space
//! oracles.
//!
//! The readout maps A_out = B A_in + i√(1−B²) b with A_in in vacuum.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    self, herald_ensemble, operator_mandel_q, readout_bogoliubov, readout_matrix, thermal_coherent_ensemble, DensityOperator,
    FockSpace, KetState, WritePropagator, C64,
};

/// Residual occupation above which the n ≤ 1 thermal truncation is flagged.
pub const THERMAL_TRUNCATION_LIMIT: f64 = 0.45;
const MIN_OUTPUT_MEAN: f64 = 1e-14;

/// Laguerre polynomial L_m(x) by the three-term recurrence.
pub fn laguerre(m: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if m == 0 {
        return prev;
    }
    for k in 1..m {
        let next = ((2 * k + 1) as f64 - x) * cur - k as f64 * prev;
        prev = cur;
        cur = next / (k + 1) as f64;
    }
    cur
}

/// ⟨α, m| bⁿ b†ⁿ |α, m⟩ = (n+m)! L_{n+m}(−|α|²) / [m! L_m(−|α|²)].
pub fn pacs_moment(alpha: C64, m: usize, n: usize) -> f64 {
    let x = -alpha.norm_sqr();
    let rising: f64 = (m + 1..=m + n).map(|k| k as f64).product();
    rising * laguerre(n + m, x) / laguerre(m, x)
}

/// ⟨A_outⁿ A_out†ⁿ⟩ for mechanics in |α, m⟩ and vacuum input:
/// Σ_j C(n,j)² j! B^{2j} (1−B²)^{n−j} ⟨b^{n−j} b†^{n−j}⟩.
pub fn output_moment(alpha: C64, m: usize, b: f64, n: usize) -> f64 {
    let b2 = b * b;
    let t2 = 1.0 - b2;
    let mut binom = 1.0;
    let mut fact = 1.0;
    let mut acc = 0.0;
    for j in 0..=n {
        if j > 0 {
            binom *= (n + 1 - j) as f64 / j as f64;
            fact *= j as f64;
        }
        acc += binom * binom * fact * b2.powi(j as i32) * t2.powi((n - j) as i32) * pacs_moment(alpha, m, n - j);
    }
    acc
}

/// Readout moments of the single-phonon-added state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputMoments {
    /// ⟨A A†⟩
    pub aad: f64,
    /// ⟨A† A⟩
    pub ada: f64,
    /// ⟨A² A†²⟩
    pub a2ad2: f64,
}

impl OutputMoments {
    /// ⟨(A†A)²⟩ = ⟨A²A†²⟩ − 3⟨AA†⟩ + 1.
    pub fn number_squared(&self) -> f64 {
        self.a2ad2 - 3.0 * self.aad + 1.0
    }

    pub fn mandel_q(&self) -> Result<f64> {
        if self.ada <= MIN_OUTPUT_MEAN {
            return Err(Error::UndefinedMandelQ { mean: self.ada });
        }
        Ok((self.number_squared() - self.ada * self.ada) / self.ada - 1.0)
    }

    fn from_anti_normal(aad: f64, a2ad2: f64) -> Self {
        Self { aad, ada: aad - 1.0, a2ad2 }
    }
}

/// Closed forms for m = 1:
/// ⟨AA†⟩ = B² + 2(1−B²) L₂/L₁,
/// ⟨A²A†²⟩ = 2B⁴ + 8B²(1−B²) L₂/L₁ + 6(1−B²)² L₃/L₁,
/// with L_k evaluated at −|α|².
pub fn output_moments(alpha: C64, b: f64) -> OutputMoments {
    let x = -alpha.norm_sqr();
    let (l1, l2, l3) = (laguerre(1, x), laguerre(2, x), laguerre(3, x));
    let b2 = b * b;
    let t2 = 1.0 - b2;
    let aad = b2 + 2.0 * t2 * l2 / l1;
    let a2ad2 = 2.0 * b2 * b2 + 8.0 * b2 * t2 * l2 / l1 + 6.0 * t2 * t2 * l3 / l1;
    OutputMoments::from_anti_normal(aad, a2ad2)
}

/// Readout moments for general m.
pub fn output_moments_general(alpha: C64, m: usize, b: f64) -> OutputMoments {
    OutputMoments::from_anti_normal(output_moment(alpha, m, b, 1), output_moment(alpha, m, b, 2))
}

/// Mandel Q of the readout field for |α, m⟩. Q(α, 0) = 0.
pub fn mandel_q_analytic(alpha: C64, m: usize, b: f64) -> Result<f64> {
    check_b(b)?;
    match m {
        0 => Ok(0.0),
        1 => output_moments(alpha, b).mandel_q(),
        _ => output_moments_general(alpha, m, b).mandel_q(),
    }
}

/// Quadrature variance of the readout field for m = 1,
/// [3 − 2B² + (1−B²)(e^{2iθ}α² + e^{−2iθ}α*²) + 2|α|² + |α|⁴] / [4(1+|α|²)²].
pub fn quadrature_variance_analytic(alpha: C64, b: f64, theta: f64) -> Result<f64> {
    check_b(b)?;
    let a2 = alpha.norm_sqr();
    let phase = C64::from_polar(1.0, 2.0 * theta) * alpha * alpha;
    // numerator regrouped as (1+|α|²)² + 2(1−B²)(1 + Re e^{2iθ}α²)
    Ok(0.25 + (1.0 - b * b) * (1.0 + phase.re) / (2.0 * (1.0 + a2).powi(2)))
}

fn check_b(b: f64) -> Result<()> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidInput(format!("B must lie in (0, 1], got {b}")));
    }
    Ok(())
}

fn check_z(z: f64) -> Result<()> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::InvalidInput(format!("Z must lie in (0, 1], got {z}")));
    }
    Ok(())
}

/// Protocol parameters of one detection setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacsParams {
    /// Coherent amplitude before the write pulse.
    pub beta: C64,
    /// Write conversion factor.
    pub z: f64,
    /// Readout conversion factor.
    pub b: f64,
    /// Quadrature phase (rad).
    pub theta: f64,
    /// Residual thermal occupation of the prepared state.
    pub n0: f64,
}

impl PacsParams {
    pub fn new(beta: C64, z: f64, b: f64, theta: f64, n0: f64) -> Result<Self> {
        check_z(z)?;
        check_b(b)?;
        if !(n0.is_finite() && n0 >= 0.0) {
            return Err(Error::InvalidInput(format!("n0 must be >= 0, got {n0}")));
        }
        Ok(Self { beta, z, b, theta, n0 })
    }

    /// α = Zβ.
    pub fn alpha(&self) -> C64 {
        self.beta * self.z
    }

    /// s = n̄₀/(1+n̄₀).
    pub fn s(&self) -> f64 {
        self.n0 / (1.0 + self.n0)
    }

    /// Closed-form metrics at n̄₀ = 0, thermal pipeline otherwise.
    pub fn metrics(&self, n_max: usize) -> Result<PacsMetrics> {
        if self.n0 == 0.0 {
            let q = mandel_q_analytic(self.alpha(), 1, self.b)?;
            Ok(PacsMetrics::new(q, quadrature_variance_analytic(self.alpha(), self.b, self.theta)?))
        } else {
            let q = thermal_mandel_q(self.beta, self.z, self.b, self.n0, n_max)?.value;
            Ok(PacsMetrics::new(q, thermal_quadrature_variance(self.beta, self.z, self.b, self.n0, self.theta, n_max)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacsMetrics {
    pub mandel_q: f64,
    /// (Δx_θ)², vacuum = 1/4.
    pub variance: f64,
    /// 4(Δx_θ)², vacuum = 1.
    pub normalized_variance: f64,
}

impl PacsMetrics {
    pub fn new(mandel_q: f64, variance: f64) -> Self {
        Self { mandel_q, variance, normalized_variance: 4.0 * variance }
    }
}

/// Mixture weights of the heralded state from a displaced thermal input
/// truncated at n ≤ 1, over the terms
/// b†|α⟩⟨α|b, b†²|α⟩⟨α|b², b†|α⟩⟨α|b², b†²|α⟩⟨α|b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalWeights {
    pub weights: [C64; 4],
    /// 𝒩_Q = 1 + s(|β|² + Z² − β*Z − βZ).
    pub norm: f64,
    pub s: f64,
    pub alpha: C64,
    /// Set when n̄₀ ≥ 0.45.
    pub warning: Option<String>,
}

pub fn thermal_conditional_state_analytic(beta: C64, z: f64, n0: f64) -> Result<ThermalWeights> {
    check_z(z)?;
    if !(n0.is_finite() && n0 >= 0.0) {
        return Err(Error::InvalidInput(format!("n0 must be >= 0, got {n0}")));
    }
    let s = n0 / (1.0 + n0);
    let weights = [
        C64::new(1.0 + s * beta.norm_sqr(), 0.0),
        C64::new(s * z * z, 0.0),
        -beta.conj() * s * z,
        -beta * s * z,
    ];
    let norm = 1.0 + s * (beta.norm_sqr() + z * z - 2.0 * z * beta.re);
    let warning = (n0 >= THERMAL_TRUNCATION_LIMIT)
        .then(|| format!("n0 = {n0} is outside the n <= 1 truncation regime (n0 < {THERMAL_TRUNCATION_LIMIT})"));
    Ok(ThermalWeights { weights, norm, s, alpha: beta * z, warning })
}

/// The four unnormalized operator terms on a single-mode space.
pub fn thermal_terms(alpha: C64, space: FockSpace) -> Result<[DMatrix<C64>; 4]> {
    let coh = KetState::coherent(space.mode(), alpha)?;
    let k1 = coh.create()?.amplitudes;
    let k2 = coh.create()?.create()?.amplitudes;
    Ok([&k1 * k1.adjoint(), &k2 * k2.adjoint(), &k1 * k2.adjoint(), &k2 * k1.adjoint()])
}

/// Heralded state of the n ≤ 1 truncation, Σ w_j X_j normalized by its trace.
pub fn thermal_truncated_state(beta: C64, z: f64, n0: f64, space: FockSpace) -> Result<DensityOperator> {
    let w = thermal_conditional_state_analytic(beta, z, n0)?;
    let terms = thermal_terms(w.alpha, space)?;
    let mut rho = DMatrix::zeros(space.levels(), space.levels());
    for (wj, x) in w.weights.iter().zip(&terms) {
        rho += x * *wj;
    }
    DensityOperator::new(space.mode(), rho)?.normalized()
}

/// Sum of the trace-normalized terms with the mixture weights; its trace is 𝒩_Q.
pub fn thermal_unit_trace_assembly(beta: C64, z: f64, n0: f64, space: FockSpace) -> Result<DMatrix<C64>> {
    let w = thermal_conditional_state_analytic(beta, z, n0)?;
    let terms = thermal_terms(w.alpha, space)?;
    let mut out = DMatrix::zeros(space.levels(), space.levels());
    for (wj, x) in w.weights.iter().zip(&terms) {
        if wj.norm() == 0.0 {
            continue;
        }
        out += x * (*wj / x.trace());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalQ {
    /// 𝒬.
    pub value: f64,
    /// Q₁..Q₄; `None` where the weight vanishes.
    pub terms: [Option<C64>; 4],
    pub weights: ThermalWeights,
}

/// 𝒬 = 𝒩_Q⁻¹ Σ_j w_j Q_j from per-term Mandel parameters.
pub fn thermal_q_from_terms(weights: &ThermalWeights, terms: &[Option<C64>; 4]) -> Result<f64> {
    let mut acc = C64::new(0.0, 0.0);
    for (w, q) in weights.weights.iter().zip(terms) {
        if w.norm() == 0.0 {
            continue;
        }
        let q = q.ok_or_else(|| Error::InvalidInput("missing Q term with nonzero weight".into()))?;
        acc += w * q;
    }
    Ok(acc.re / weights.norm)
}

/// Mandel 𝒬 of the readout field for the n ≤ 1 thermal truncation.
/// Q₁ and Q₂ use the closed-form m = 1, 2 moments; the cross terms Q₃, Q₄
/// are evaluated on the readout of the trace-normalized terms at `n_max`.
pub fn thermal_mandel_q(beta: C64, z: f64, b: f64, n0: f64, n_max: usize) -> Result<ThermalQ> {
    check_b(b)?;
    let weights = thermal_conditional_state_analytic(beta, z, n0)?;
    let alpha = weights.alpha;
    let mut terms = [None; 4];
    terms[0] = Some(C64::new(output_moments(alpha, b).mandel_q()?, 0.0));
    if weights.weights[1].norm() > 0.0 {
        terms[1] = Some(C64::new(output_moments_general(alpha, 2, b).mandel_q()?, 0.0));
    }
    if weights.weights[2].norm() > 0.0 || weights.weights[3].norm() > 0.0 {
        let x = thermal_terms(alpha, FockSpace::single(n_max)?)?;
        for j in [2, 3] {
            let out = readout_matrix(&(&x[j] / x[j].trace()), b)?;
            terms[j] = Some(operator_mandel_q(&out)?);
        }
    }
    let value = thermal_q_from_terms(&weights, &terms)?;
    Ok(ThermalQ { value, terms, weights })
}

/// (Δx_θ)² of the readout of the n ≤ 1 thermal-truncation heralded state.
pub fn thermal_quadrature_variance(beta: C64, z: f64, b: f64, n0: f64, theta: f64, n_max: usize) -> Result<f64> {
    let rho = thermal_truncated_state(beta, z, n0, FockSpace::single(n_max)?)?;
    fock::quadrature_variance_numeric(&readout_bogoliubov(&rho, b)?, theta)
}

/// Full Fock-space pipeline without analytic shortcuts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub mandel_q: f64,
    pub variance: f64,
    /// Heralding probability of the write pulse.
    pub herald_probability: f64,
}

/// Displaced thermal input (untruncated series), write pulse, single-photon
/// herald, readout and measurement, all at truncation `n_max`.
pub fn thermal_oracle(beta: C64, z: f64, b: f64, n0: f64, theta: f64, n_max: usize) -> Result<OracleResult> {
    let space = FockSpace::two_mode(n_max)?;
    let ensemble = thermal_coherent_ensemble(beta, n0, space.mode())?;
    let write = WritePropagator::new(z, space)?;
    let (mech, p) = herald_ensemble(&ensemble, &write)?;
    let out = readout_bogoliubov(&mech, b)?;
    Ok(OracleResult {
        mandel_q: fock::mandel_q_numeric(&out)?,
        variance: fock::quadrature_variance_numeric(&out, theta)?,
        herald_probability: p,
    })
}

/// Readout statistics of the normalized b†ᵐ|α⟩ built directly in Fock space.
pub fn pacs_oracle(alpha: C64, m: usize, b: f64, theta: f64, n_max: usize) -> Result<PacsMetrics> {
    let space = FockSpace::single(n_max)?;
    let mut ket = KetState::coherent(space, alpha)?;
    for _ in 0..m {
        ket = ket.create()?;
    }
    let out = readout_bogoliubov(&ket.normalized()?.to_density(), b)?;
    let q = if m == 0 && alpha.norm() == 0.0 { 0.0 } else { fock::mandel_q_numeric(&out)? };
    Ok(PacsMetrics::new(q, fock::quadrature_variance_numeric(&out, theta)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn laguerre_values() {
        assert_eq!(laguerre(0, 3.7), 1.0);
        assert_eq!(laguerre(1, -1.0), 2.0);
        let x: f64 = -4.0;
        let cubic = 1.0 - 3.0 * x + 1.5 * x * x - x.powi(3) / 6.0;
        assert!((laguerre(3, x) - cubic).abs() < 1e-12);
        assert!((laguerre(3, x) - 47.666_666_666_666_664).abs() < 1e-12);
    }

    #[test]
    fn printed_moments_match_general_sum() {
        for (a, b) in [(0.0, 0.5), (1.3, 0.15), (2.5, 0.9)] {
            let p = output_moments(re(a), b);
            let g = output_moments_general(re(a), 1, b);
            assert!((p.aad - g.aad).abs() < 1e-10 * p.aad);
            assert!((p.a2ad2 - g.a2ad2).abs() < 1e-10 * p.a2ad2);
        }
    }

    #[test]
    fn moment_limits() {
        let m = output_moments(re(1.7), 1.0);
        assert!((m.aad - 1.0).abs() < 1e-14 && m.ada.abs() < 1e-14 && (m.a2ad2 - 2.0).abs() < 1e-13);
        let m = output_moments(re(0.0), 1e-9);
        assert!((m.ada - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_points() {
        assert_eq!(mandel_q_analytic(re(1.4), 0, 0.3).unwrap(), 0.0);
        assert!((mandel_q_analytic(re(0.0), 1, 1e-6).unwrap() + 1.0).abs() < 1e-10);
        assert!(matches!(mandel_q_analytic(re(0.5), 1, 1.0), Err(Error::UndefinedMandelQ { .. })));
        for th in [0.0, 0.9, 2.0] {
            assert_eq!(quadrature_variance_analytic(C64::new(1.2, 0.7), 1.0, th).unwrap(), 0.25);
        }
    }

    #[test]
    fn large_amplitude_approaches_coherent_statistics() {
        assert!(mandel_q_analytic(re(20.0), 1, 0.15).unwrap().abs() < 0.05);
    }

    #[test]
    fn thermal_weights_limits() {
        let w = thermal_conditional_state_analytic(re(2.0), 0.98, 0.0).unwrap();
        assert_eq!(w.weights, [re(1.0), re(0.0), re(0.0), re(0.0)]);
        assert_eq!(w.norm, 1.0);
        let w = thermal_conditional_state_analytic(re(0.0), 0.98, 0.2).unwrap();
        let s = 0.2 / 1.2;
        assert_eq!(w.weights[1], re(s * 0.98 * 0.98));
        assert!(w.weights[2].norm() == 0.0 && w.weights[3].norm() == 0.0);
        assert!(w.warning.is_none());
        assert!(thermal_conditional_state_analytic(re(1.0), 0.98, 0.45).unwrap().warning.is_some());
    }

    #[test]
    fn norm_matches_trace_of_unit_trace_assembly() {
        let space = FockSpace::single(40).unwrap();
        let w = thermal_conditional_state_analytic(re(2.0), 0.98, 0.2).unwrap();
        let t = thermal_unit_trace_assembly(re(2.0), 0.98, 0.2, space).unwrap().trace();
        assert!((t.re - w.norm).abs() < 1e-8 && t.im.abs() < 1e-12);
    }

    #[test]
    fn thermal_reduces_to_pure_at_zero_occupation() {
        let a = 2.0 * 0.98;
        let q = thermal_mandel_q(re(2.0), 0.98, 0.15, 0.0, 40).unwrap().value;
        assert_eq!(q, mandel_q_analytic(re(a), 1, 0.15).unwrap());
        let v = thermal_quadrature_variance(re(2.0), 0.98, 0.15, 0.0, 1.3, 40).unwrap();
        assert!((v - quadrature_variance_analytic(re(a), 0.15, 1.3).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn thermal_q_calibration() {
        let w = thermal_conditional_state_analytic(C64::new(1.5, 0.4), 0.9, 0.3).unwrap();
        let zero = [Some(re(0.0)); 4];
        assert!(thermal_q_from_terms(&w, &zero).unwrap().abs() < 1e-15);
        let minus = [Some(re(-1.0)); 4];
        assert!((thermal_q_from_terms(&w, &minus).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let alpha = C64::new(1.5, 0.0);
        let o = pacs_oracle(alpha, 1, 0.15, 0.4, 40).unwrap();
        assert!((o.mandel_q - mandel_q_analytic(alpha, 1, 0.15).unwrap()).abs() < 1e-6);
        assert!((o.variance - quadrature_variance_analytic(alpha, 0.15, 0.4).unwrap()).abs() < 1e-6);
        let out = readout_bogoliubov(
            &KetState::coherent(FockSpace::single(40).unwrap(), alpha).unwrap().create().unwrap().normalized().unwrap().to_density(),
            0.15,
        )
        .unwrap();
        let m = output_moments(alpha, 0.15);
        assert!((fock::number_moments(&out, 1).unwrap() - m.aad).abs() < 1e-6);
        assert!((fock::number_moments(&out, 2).unwrap() - m.a2ad2).abs() < 1e-6);
    }

    #[test]
    fn full_oracle_at_zero_occupation_equals_pure() {
        let r = thermal_oracle(re(2.0), 0.98, 0.15, 0.0, std::f64::consts::FRAC_PI_2, 40).unwrap();
        let a = re(1.96);
        assert!((r.mandel_q - mandel_q_analytic(a, 1, 0.15).unwrap()).abs() < 1e-8);
        assert!((r.variance - quadrature_variance_analytic(a, 0.15, std::f64::consts::FRAC_PI_2).unwrap()).abs() < 1e-8);
    }
}
