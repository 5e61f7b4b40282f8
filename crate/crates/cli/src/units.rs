//! Physical quantities given on the command line with SI suffixes.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Power,
    Temperature,
    Time,
}

impl Dimension {
    fn unit(self) -> &'static str {
        match self {
            Dimension::Power => "W",
            Dimension::Temperature => "K",
            Dimension::Time => "s",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Power => "power",
            Dimension::Temperature => "temperature",
            Dimension::Time => "time",
        };
        f.write_str(name)
    }
}

fn prefix_scale(prefix: &str) -> Option<f64> {
    Some(match prefix {
        "" => 1.0,
        "G" => 1e9,
        "M" => 1e6,
        "k" => 1e3,
        "m" => 1e-3,
        "u" | "µ" | "μ" => 1e-6,
        "n" => 1e-9,
        "p" => 1e-12,
        "f" => 1e-15,
        _ => return None,
    })
}

/// Parses `"<number><prefix><unit>"`, e.g. `50uW`, `0.5 uW`, `10K`, `40ns`,
/// into SI base units. Bare numbers are rejected.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let s = text.trim();
    let split = s
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || c == '+' || c == '-' || ((c == 'e' || c == 'E') && is_exponent(s, i))))
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, suffix) = s.split_at(split);
    let suffix = suffix.trim();
    if suffix.is_empty() {
        return Err(format!("`{text}` has no unit; give a {dim} with an SI suffix such as 1{}", dim.unit()));
    }
    let value: f64 = num.parse().map_err(|_| format!("`{text}` does not start with a number"))?;
    let prefix = suffix
        .strip_suffix(dim.unit())
        .ok_or_else(|| format!("`{text}`: expected a {dim} in {}", dim.unit()))?;
    let scale = prefix_scale(prefix).ok_or_else(|| format!("`{text}`: unknown SI prefix `{prefix}`"))?;
    let v = value * scale;
    if !v.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok(v)
}

fn is_exponent(s: &str, i: usize) -> bool {
    let rest = &s[i + 1..];
    let rest = rest.strip_prefix(['+', '-']).unwrap_or(rest);
    rest.starts_with(|c: char| c.is_ascii_digit()) && s[..i].chars().last().is_some_and(|c| c.is_ascii_digit() || c == '.')
}

pub fn power(text: &str) -> Result<f64, String> {
    parse_quantity(text, Dimension::Power)
}

pub fn temperature(text: &str) -> Result<f64, String> {
    parse_quantity(text, Dimension::Temperature)
}

pub fn time(text: &str) -> Result<f64, String> {
    parse_quantity(text, Dimension::Time)
}
