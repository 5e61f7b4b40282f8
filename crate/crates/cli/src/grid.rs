//! Scan grids.

use crate::CliError;

/// `min, min + step, …` up to `max` inclusive.
pub fn stepped(min: f64, max: f64, step: f64, name: &str) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err(CliError::BadInput(format!("{name} grid bounds must be finite")));
    }
    if min > max {
        return Err(CliError::BadInput(format!("{name} grid is empty: min {min} > max {max}")));
    }
    if min == max {
        return Ok(vec![min]);
    }
    if !(step > 0.0) {
        return Err(CliError::BadInput(format!("{name} step must be > 0, got {step}")));
    }
    let n = ((max - min) / step * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=n).map(|k| min + k as f64 * step).collect())
}

/// `n` evenly spaced points over `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize, name: &str) -> Result<Vec<f64>, CliError> {
    match n {
        0 => Err(CliError::BadInput(format!("{name} grid needs at least one point"))),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
    }
}

/// Checks a user list is non-empty and strictly increasing.
pub fn check_list(values: &[f64], name: &str) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::BadInput(format!("{name} list is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::BadInput(format!("{name} list contains a non-finite value")));
    }
    if !values.windows(2).all(|w| w[0] < w[1]) {
        return Err(CliError::BadInput(format!("{name} list must be strictly increasing")));
    }
    Ok(())
}
