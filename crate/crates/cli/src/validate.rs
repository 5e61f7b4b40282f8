//! `validate` subcommand.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use pacs_core::analytics::{mandel_q_analytic, output_moment, pacs_oracle, quadrature_variance_analytic};
use pacs_core::fock::{
    condition_on_single_photon, mean_number, number_moments, readout_bogoliubov, FockSpace, KetState, WritePropagator,
};
use pacs_core::params::{validate_sequence, PulseKind, PulseSequence, PulseSpec, WEAK_COUPLING_RATIO};
use serde::Serialize;

use crate::output::OutputDir;
use crate::{conversion_factors, CliError, ConversionArgs, GlobalArgs, Resolved, READOUT_COUPLING, READOUT_DURATION, WRITE_COUPLING, WRITE_DURATION};

/// Smallest heralded-state fidelity to Zβ-PACS accepted at |β| = 2.
pub const HERALD_FIDELITY_MIN: f64 = 0.998;
/// Relative tolerance of the moment identities.
pub const MOMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<(bool, String), CliError>) -> Check {
    match result {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn timing(resolved: &Resolved, tau_r: Option<f64>, threshold: f64) -> Result<(bool, String), CliError> {
    let mut seq = PulseSequence::nominal(&resolved.params);
    if let Some(t) = tau_r {
        seq.tau_r = t;
    }
    let report = validate_sequence(&seq, &resolved.params, threshold)?;
    let worst = report.checks.iter().map(|c| c.ratio).fold(0.0, f64::max);
    let failed: Vec<&str> = report.checks.iter().filter(|c| c.ratio >= threshold).map(|c| c.constraint.as_str()).collect();
    let detail = if failed.is_empty() { format!("largest ratio {worst:.3e} < {threshold}") } else { format!("violated: {}", failed.join("; ")) };
    Ok((report.passed(), detail))
}

fn pulses(resolved: &Resolved) -> Result<(bool, String), CliError> {
    let p = &resolved.params;
    let write = PulseSpec::from_coupling(p, PulseKind::Write, WRITE_COUPLING, WRITE_DURATION)?;
    let read = PulseSpec::from_coupling(p, PulseKind::Readout, READOUT_COUPLING, READOUT_DURATION)?;
    let mut warnings = write.warnings(p, WEAK_COUPLING_RATIO);
    warnings.extend(read.warnings(p, WEAK_COUPLING_RATIO));
    let detail = format!("Z = {:.5}, B = {:.5}{}", write.conversion, read.conversion, if warnings.is_empty() { String::new() } else { format!("; {}", warnings.join("; ")) });
    Ok((warnings.is_empty(), detail))
}

fn oracle_equivalence(global: &GlobalArgs) -> Result<(bool, String), CliError> {
    let (mut dq, mut dv) = (0.0f64, 0.0f64);
    for a in [0.0, 0.75, 1.5, 2.25, 3.0] {
        for (i, b) in [0.05, 0.15, 0.4, 0.7, 0.95].into_iter().enumerate() {
            for th in [0.0, PI / 8.0, PI / 4.0, FRAC_PI_2, 3.0 * PI / 4.0] {
                let alpha = Complex64::from_polar(a, 0.3 * i as f64);
                let o = pacs_oracle(alpha, 1, b, th, global.nmax)?;
                dq = dq.max((o.mandel_q - mandel_q_analytic(alpha, 1, b)?).abs());
                dv = dv.max((o.normalized_variance - 4.0 * quadrature_variance_analytic(alpha, b, th)?).abs());
            }
        }
    }
    Ok((dq <= global.tol && dv <= global.tol, format!("max |dQ| = {dq:.2e}, max |d 4Var| = {dv:.2e} at n_max = {}", global.nmax)))
}

fn moment_identities(global: &GlobalArgs, b: f64) -> Result<(bool, String), CliError> {
    let space = FockSpace::single(global.nmax)?;
    let mut worst = 0.0f64;
    for a in [0.0, 0.6, 1.3, 2.0] {
        let alpha = Complex64::from_polar(a, 0.7);
        let pacs = KetState::coherent(space, alpha)?.create()?.normalized()?.to_density();
        let out = readout_bogoliubov(&pacs, b)?;
        let aad = number_moments(&out, 1)?;
        let a2ad2 = number_moments(&out, 2)?;
        let n = mean_number(&out)?;
        let n2 = out.populations().iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum::<f64>() / out.trace();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
        worst = worst
            .max(rel(n, aad - 1.0))
            .max(rel(n2, a2ad2 - 3.0 * aad + 1.0))
            .max(rel(aad, output_moment(alpha, 1, b, 1)))
            .max(rel(a2ad2, output_moment(alpha, 1, b, 2)));
    }
    Ok((worst <= MOMENT_TOL, format!("max relative deviation {worst:.2e} (tolerance {MOMENT_TOL:.0e})")))
}

fn convergence(global: &GlobalArgs, z: f64, b: f64, beta_max: f64) -> Result<(bool, String), CliError> {
    let step = crate::scan::CONVERGENCE_STEP;
    let mut worst = (0.0f64, 0.0);
    let betas = [beta_max / 3.0, 2.0 * beta_max / 3.0, beta_max];
    for beta in betas {
        let alpha = re(z * beta);
        let lo = pacs_oracle(alpha, 1, b, FRAC_PI_2, global.nmax)?;
        let hi = pacs_oracle(alpha, 1, b, FRAC_PI_2, global.nmax + step)?;
        let d = (lo.mandel_q - hi.mandel_q).abs().max((lo.normalized_variance - hi.normalized_variance).abs());
        if d > worst.0 {
            worst = (d, beta);
        }
    }
    Ok((
        worst.0 <= global.tol,
        format!("max change n_max {} -> {} is {:.2e} at |beta| = {} (tolerance {:.0e})", global.nmax, global.nmax + step, worst.0, worst.1, global.tol),
    ))
}

fn herald(global: &GlobalArgs, z: f64) -> Result<(bool, String), CliError> {
    let space = FockSpace::two_mode(global.nmax)?;
    let beta = re(2.0);
    let input = KetState::product(&KetState::vacuum(space.mode()), &KetState::coherent(space.mode(), beta)?)?;
    let out = WritePropagator::new(z, space)?.apply(&input)?;
    let (psi, p) = condition_on_single_photon(&out)?;
    let f = psi.fidelity(&KetState::coherent(space.mode(), beta * z)?.create()?.normalized()?);
    Ok((f > HERALD_FIDELITY_MIN, format!("fidelity {f:.9} at |beta| = 2, herald probability {p:.4e}")))
}

pub fn run_validate(
    global: &GlobalArgs,
    resolved: &Resolved,
    conversion: &ConversionArgs,
    tau_r: Option<f64>,
    threshold: f64,
    beta_max: f64,
) -> Result<bool, CliError> {
    if let Some(t) = tau_r {
        if !(t > 0.0) {
            return Err(CliError::BadInput(format!("--tau-r must be > 0, got {t} s")));
        }
    }
    if !(threshold > 0.0) {
        return Err(CliError::BadInput(format!("--threshold must be > 0, got {threshold}")));
    }
    if !(beta_max > 0.0 && beta_max.is_finite()) {
        return Err(CliError::BadInput(format!("--beta-max must be > 0, got {beta_max}")));
    }
    let (z, b) = conversion_factors(&resolved.params, conversion)?;
    let checks = vec![
        check("sequence timing", timing(resolved, tau_r, threshold)),
        check("pulse regime", pulses(resolved)),
        check("oracle equivalence", oracle_equivalence(global)),
        check("moment identities", moment_identities(global, b)),
        check("truncation convergence", convergence(global, z, b, beta_max)),
        check("heralded state", herald(global, z)),
    ];
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let passed = checks.iter().all(|c| c.passed);
    let out = OutputDir::create(&global.out)?;
    out.write_json(
        "validate.json",
        &serde_json::json!({
            "params": resolved.config(),
            "settings": { "z": z, "b": b, "n_max": global.nmax, "tol": global.tol, "tau_r": tau_r, "threshold": threshold, "beta_max": beta_max },
            "checks": checks,
            "passed": passed,
        }),
    )?;
    println!("{} of {} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len());
    Ok(passed)
}
