//! Dormand–Prince 5(4) integrator with step-size control and the standard
//! fourth-order continuous extension.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Absolute step floor; the integrator also stops below 16 ulp of t.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-9, h_init: None, h_min: 0.0, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct Dopri5Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest normalized local error estimate among accepted steps (≤ 1).
    pub max_error_ratio: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, calling `observe(t, y)` at
/// each requested output time (ascending, within `[t0, t_end]`) using dense
/// output.
pub fn integrate<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    output_times: &[f64],
    opts: &Dopri5Options,
    mut observe: O,
) -> Result<([f64; N], Dopri5Stats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]),
{
    if !(t_end > t0) {
        return Err(Error::InvalidInput(format!("t_end ({t_end}) must exceed t0 ({t0})")));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("output times must be ascending".into()));
    }
    let scale = |a: &[f64; N], b: &[f64; N], i: usize| opts.atol + opts.rtol * a[i].abs().max(b[i].abs());
    let mut stats = Dopri5Stats { accepted: 0, rejected: 0, evaluations: 0, max_error_ratio: 0.0 };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    let mut next_out = output_times.iter().position(|&s| s >= t0).unwrap_or(output_times.len());
    while next_out < output_times.len() && output_times[next_out] <= t0 {
        observe(output_times[next_out], &y);
        next_out += 1;
    }

    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(&mut f, t, &y, &k1, opts, &mut stats),
    }
    .min(t_end - t);

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::InsufficientData(format!("step budget {} exhausted at t = {t:.6e}", opts.max_steps)));
        }
        if h < opts.h_min || h <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Err(Error::Stiffness { t, t_start: t, t_end: t + h, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err += (e / scale(&y, &y_new, i)).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite { t });
        }

        if err <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            while next_out < output_times.len() && output_times[next_out] <= t_new {
                let s = output_times[next_out];
                let theta = ((s - t) / h).clamp(0.0, 1.0);
                let theta1 = 1.0 - theta;
                let mut ys = [0.0; N];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    let r4 = ydiff - h * k7[i] - bspl;
                    let r5 = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                    ys[i] = y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)));
                }
                observe(s, &ys);
                next_out += 1;
            }
            stats.accepted += 1;
            stats.max_error_ratio = stats.max_error_ratio.max(err);
            t = t_new;
            y = y_new;
            k1 = k7;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { t });
            }
        } else {
            stats.rejected += 1;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if err > 1.0 { fac.min(1.0) } else { fac };
    }
    Ok((y, stats))
}

fn initial_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], opts: &Dopri5Options, stats: &mut Dopri5Stats) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let sc = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d1 = (k1.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, k1)]);
    let k2 = f(t + h0, &y1);
    stats.evaluations += 1;
    let d2 = (k2.iter().zip(k1).enumerate().map(|(i, (a, b))| ((a - b) / sc(i)).powi(2)).sum::<f64>() / N as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_dense_output() {
        let w = 3.0;
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        let mut worst: f64 = 0.0;
        let opts = Dopri5Options { rtol: 1e-10, atol: 1e-12, ..Default::default() };
        integrate(|_, y: &[f64; 2]| [w * y[1], -w * y[0]], 0.0, [1.0, 0.0], 5.0, &times, &opts, |t, y| {
            worst = worst.max((y[0] - (w * t).cos()).abs()).max((y[1] + (w * t).sin()).abs());
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn exponential_decay_end_state() {
        let (y, stats) =
            integrate(|_, y: &[f64; 1]| [-2.0 * y[0]], 0.0, [1.0], 3.0, &[], &Dopri5Options::default(), |_, _| {}).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-9);
        assert!(stats.max_error_ratio <= 1.0);
    }

    #[test]
    fn step_underflow_is_reported() {
        // finite-time blow-up of y' = y², y(0) = 1 at t = 1
        let opts = Dopri5Options { h_min: 1e-12, ..Default::default() };
        let r = integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0, &[], &opts, |_, _| {});
        match r {
            Err(Error::Stiffness { t_start, .. }) | Err(Error::NonFinite { t: t_start }) => assert!(t_start < 1.0 + 1e-3),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
