//! Globally adaptive Gauss–Kronrod (7, 15) quadrature for vector-valued
//! integrands.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<f64>,
    /// Estimated error, max-norm over components.
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> Vec<f64>>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let center = f(c);
    let n = center.len();
    let mut kron: Vec<f64> = center.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<f64> = center.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..n {
            let s = f1[i] + f2[i];
            kron[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
    }
    let mut error: f64 = 0.0;
    for i in 0..n {
        kron[i] *= h;
        gauss[i] *= h;
        error = error.max((kron[i] - gauss[i]).abs());
    }
    Segment { a, b, value: kron, error }
}

/// Integrates `f` over `[points[0], points[last]]`, with the interior points
/// as initial subdivision breakpoints.
pub fn integrate<F: FnMut(f64) -> Vec<f64>>(mut f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    if points.len() < 2 || points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("quadrature breakpoints must be strictly increasing".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        heap.push(gk15(&mut f, w[0], w[1]));
        evaluations += 15;
    }
    loop {
        let n = heap.peek().map(|s| s.value.len()).unwrap_or(0);
        let mut total = vec![0.0; n];
        let mut err = 0.0;
        for s in heap.iter() {
            for (t, v) in total.iter_mut().zip(&s.value) {
                *t += v;
            }
            err += s.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if err <= target {
            return Ok(QuadResult { value: total, error: err, intervals: heap.len(), evaluations });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureNonConvergence { achieved: err, requested: target });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureNonConvergence { achieved: err, requested: target });
        }
        heap.push(gk15(&mut f, worst.a, mid));
        heap.push(gk15(&mut f, mid, worst.b));
        evaluations += 30;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| vec![x.powi(10), 1.0], &[0.0, 2.0], &QuadOptions::default()).unwrap();
        assert!((r.value[0] - 2f64.powi(11) / 11.0).abs() < 1e-10);
        assert!((r.value[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sharp_lorentzian() {
        let w = 1e-6;
        let r = integrate(|x| vec![w / (x * x + w * w)], &[-1.0, 0.0, 1.0], &QuadOptions::default()).unwrap();
        let exact = 2.0 * (1.0f64 / w).atan();
        assert!((r.value[0] - exact).abs() < 1e-9, "{} vs {}", r.value[0], exact);
    }

    #[test]
    fn budget_exhaustion_reports_tolerance() {
        let opts = QuadOptions { max_intervals: 3, abs_tol: 1e-15, rel_tol: 0.0 };
        let r = integrate(|x| vec![(1.0 / x).sin()], &[1e-4, 1.0], &opts);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
