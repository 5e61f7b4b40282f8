use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DensityOperator, C64};
use crate::error::{Error, Result};

const MIN_MEAN: f64 = 1e-14;
/// Populations below this count as outside the support of a state.
const SUPPORT_FLOOR: f64 = 1e-14;

fn check_single(state: &DensityOperator) -> Result<()> {
    if state.space.modes != 1 {
        return Err(Error::InvalidInput("measurement needs a single-mode state".into()));
    }
    Ok(())
}

/// tr(X N^k) / tr(X) for k = 1, 2, with N the number operator.
fn normalized_number_powers(x: &DMatrix<C64>) -> Result<(C64, C64)> {
    let tr = x.trace();
    if tr.norm() == 0.0 {
        return Err(Error::InvalidInput("operator has zero trace".into()));
    }
    let (mut m1, mut m2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for n in 0..x.nrows() {
        let nf = n as f64;
        m1 += x[(n, n)] * nf;
        m2 += x[(n, n)] * nf * nf;
    }
    Ok((m1 / tr, m2 / tr))
}

/// Mandel Q of a trace-class operator X, using trace-normalized number
/// moments; complex for non-Hermitian X.
pub fn operator_mandel_q(x: &DMatrix<C64>) -> Result<C64> {
    let (m1, m2) = normalized_number_powers(x)?;
    if m1.norm() < MIN_MEAN {
        return Err(Error::UndefinedMandelQ { mean: m1.norm() });
    }
    Ok((m2 - m1 * m1) / m1 - 1.0)
}

pub fn mean_number(state: &DensityOperator) -> Result<f64> {
    check_single(state)?;
    Ok(normalized_number_powers(&state.matrix)?.0.re)
}

/// Q = (⟨n²⟩ − ⟨n⟩²)/⟨n⟩ − 1.
pub fn mandel_q_numeric(state: &DensityOperator) -> Result<f64> {
    check_single(state)?;
    Ok(operator_mandel_q(&state.matrix)?.re)
}

/// (Δx_θ)² of X with x_θ = (A e^{iθ} + A† e^{−iθ})/2, using trace-normalized
/// expectation values; complex for non-Hermitian X.
pub fn operator_quadrature_variance(x: &DMatrix<C64>, theta: f64) -> Result<C64> {
    let tr = x.trace();
    if tr.norm() == 0.0 {
        return Err(Error::InvalidInput("operator has zero trace".into()));
    }
    let n = x.nrows();
    let (mut a, mut ad, mut a2, mut ad2, mut nn) = (C64::default(), C64::default(), C64::default(), C64::default(), C64::default());
    for m in 0..n {
        nn += x[(m, m)] * m as f64;
        if m + 1 < n {
            let c = ((m + 1) as f64).sqrt();
            a += x[(m + 1, m)] * c;
            ad += x[(m, m + 1)] * c;
        }
        if m + 2 < n {
            let c = (((m + 1) * (m + 2)) as f64).sqrt();
            a2 += x[(m + 2, m)] * c;
            ad2 += x[(m, m + 2)] * c;
        }
    }
    let (a, ad, a2, ad2, nn) = (a / tr, ad / tr, a2 / tr, ad2 / tr, nn / tr);
    let e = C64::from_polar(1.0, theta);
    let ec = e.conj();
    let mean = (a * e + ad * ec) / 2.0;
    // A A† = A†A + 1
    let second = (a2 * e * e + ad2 * ec * ec + nn * 2.0 + 1.0) / 4.0;
    Ok(second - mean * mean)
}

pub fn quadrature_variance_numeric(state: &DensityOperator, theta: f64) -> Result<f64> {
    check_single(state)?;
    Ok(operator_quadrature_variance(&state.matrix, theta)?.re)
}

/// Anti-normally ordered moment tr(X bⁿ b†ⁿ)/tr(X).
pub fn operator_number_moments(x: &DMatrix<C64>, n: usize) -> Result<C64> {
    let tr = x.trace();
    if tr.norm() == 0.0 {
        return Err(Error::InvalidInput("operator has zero trace".into()));
    }
    let support = (0..x.nrows()).rev().find(|&m| x[(m, m)].norm() > SUPPORT_FLOOR * tr.norm()).unwrap_or(0);
    if support + n > x.nrows() - 1 {
        return Err(Error::TruncationOverflow(format!(
            "moment order {n} on support {support} exceeds n_max = {}",
            x.nrows() - 1
        )));
    }
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..=support {
        let falling: f64 = (1..=n).map(|j| (m + j) as f64).product();
        acc += x[(m, m)] * falling;
    }
    Ok(acc / tr)
}

/// ⟨bⁿ b†ⁿ⟩ of a single-mode state.
pub fn number_moments(state: &DensityOperator, n: usize) -> Result<f64> {
    check_single(state)?;
    Ok(operator_number_moments(&state.matrix, n)?.re)
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceOptions {
    /// Absolute agreement required between n_max and n_max + step.
    pub tol: f64,
    pub step: usize,
    /// Largest truncation tried when escalating.
    pub ceiling: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self { tol: 1e-6, step: 10, ceiling: 120 }
    }
}

/// Outcome of the truncation-convergence protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Converged {
    pub values: Vec<f64>,
    /// Truncation the reported values were computed at.
    pub n_max: usize,
    /// Max-abs difference to the values at `n_max + step`.
    pub delta: f64,
    pub converged: bool,
}

/// Evaluates `f` at `n_max` and `n_max + step`; if they differ by more than
/// `tol`, escalates by `step` until agreement or `ceiling`.
pub fn converge<F>(mut f: F, n_max: usize, opts: &ConvergenceOptions) -> Result<Converged>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let mut n = n_max;
    let mut current = f(n)?;
    loop {
        let next = f(n + opts.step)?;
        if next.len() != current.len() {
            return Err(Error::InvalidInput("convergence probe changed output length".into()));
        }
        let delta = current.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let ok = delta <= opts.tol && delta.is_finite();
        if ok || n + 2 * opts.step > opts.ceiling {
            return Ok(Converged { values: current, n_max: n, delta, converged: ok });
        }
        n += opts.step;
        current = next;
    }
}

#[cfg(test)]
mod tests {
    use super::super::{thermal_coherent_state, FockSpace, KetState};
    use super::*;

    #[test]
    fn calibration_states() {
        let s = FockSpace::single(40).unwrap();
        let coh = KetState::coherent(s, C64::new(1.7, -0.6)).unwrap().to_density();
        assert!(mandel_q_numeric(&coh).unwrap().abs() < 1e-8);
        for th in [0.0, 0.7, 2.0] {
            assert!((quadrature_variance_numeric(&coh, th).unwrap() - 0.25).abs() < 1e-10);
        }
        let one = KetState::number(s, 1).unwrap().to_density();
        assert!((mandel_q_numeric(&one).unwrap() + 1.0).abs() < 1e-14);
        assert!((quadrature_variance_numeric(&one, 0.3).unwrap() - 0.75).abs() < 1e-14);
        let vac = KetState::vacuum(s).to_density();
        assert!((quadrature_variance_numeric(&vac, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(mandel_q_numeric(&vac), Err(Error::UndefinedMandelQ { .. })));
        assert!((number_moments(&vac, 1).unwrap() - 1.0).abs() < 1e-15);
        let th = thermal_coherent_state(C64::new(0.0, 0.0), 1.0, FockSpace::single(80).unwrap()).unwrap();
        assert!((mandel_q_numeric(&th).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coherent_first_moment_and_overflow() {
        let s = FockSpace::single(40).unwrap();
        let a = C64::new(1.2, 0.3);
        let coh = KetState::coherent(s, a).unwrap().to_density();
        assert!((number_moments(&coh, 1).unwrap() - (1.0 + a.norm_sqr())).abs() < 1e-10);
        let small = KetState::number(FockSpace::single(3).unwrap(), 2).unwrap().to_density();
        assert!(number_moments(&small, 1).is_ok());
        assert!(matches!(number_moments(&small, 2), Err(Error::TruncationOverflow(_))));
    }

    #[test]
    fn convergence_escalates_and_flags() {
        let r = converge(|n| Ok(vec![1.0 / n as f64]), 10, &ConvergenceOptions { tol: 1e-3, step: 10, ceiling: 200 }).unwrap();
        assert!(r.converged);
        assert!(r.n_max > 10);
        let r = converge(|n| Ok(vec![n as f64]), 10, &ConvergenceOptions::default()).unwrap();
        assert!(!r.converged);
    }
}
