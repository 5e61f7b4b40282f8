//! `prepare` and `meanfield` subcommands.

use std::f64::consts::{PI, SQRT_2};
use std::fs::File;
use std::io::BufWriter;

use num_complex::Complex64;
use pacs_core::fluctuations::{
    build_drift_diffusion, periodic_modulation, steady_covariance_lyapunov, steady_covariance_spectral, Modulation, ModulationOptions,
    SpectralOptions,
};
use pacs_core::meanfield::{analytic_fourier_solution, compare_trajectory_to_fourier, integrate_meanfield, FitReport, MeanFieldConfig};
use pacs_core::params::{coherent_amplitude_estimate, ParamsConfig, PROBE_RATIO_LIMIT};
use pacs_core::{DriveParams, SystemParams};
use serde::Serialize;
use serde_json::json;

use crate::output::{num, OutputDir};
use crate::{CliError, DriveArgs, GlobalArgs, Resolved};

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Serialize)]
pub struct CovarianceReport {
    pub vqq: f64,
    pub vpp: f64,
    pub residual_occupation: f64,
    pub matrix: [[f64; 4]; 4],
    pub lyapunov_residual: f64,
    /// Max elementwise difference to the frequency-domain solution.
    pub spectral_max_diff: f64,
    pub uncertainty_min_eigenvalue: f64,
}

#[derive(Debug, Serialize)]
pub struct PrepareReport {
    pub params: ParamsConfig,
    pub pump_power: f64,
    pub probe_power: f64,
    pub temperature: f64,
    pub thermal_occupation: f64,
    pub a0: [f64; 2],
    pub a1: [f64; 2],
    pub q0: f64,
    pub q1: [f64; 2],
    pub p1: [f64; 2],
    pub cooperativity: f64,
    pub probe_cooperativity: f64,
    /// √2 |⟨q⟩₁| from the harmonic solution.
    pub beta: f64,
    /// √2 (ω_m/g)|E1/E0|.
    pub beta_estimate: Option<f64>,
    pub coupling_g0: [f64; 2],
    pub coupling_g1: [f64; 2],
    pub covariance: CovarianceReport,
    pub modulation: Modulation,
    pub warnings: Vec<String>,
}

fn drives_for(global: &GlobalArgs, resolved: &Resolved, args: &DriveArgs) -> Result<(SystemParams, DriveParams), CliError> {
    let mut params = resolved.params;
    if let Some(t) = args.temperature {
        if t < 0.0 {
            return Err(CliError::BadInput(format!("temperature must be >= 0, got {t} K")));
        }
        params = params.with_temperature(t);
    }
    let drives = DriveParams::at_operating_point(&params, args.p0, args.p1)?;
    let warnings = drives.warnings(PROBE_RATIO_LIMIT);
    if !warnings.is_empty() && !global.force {
        return Err(CliError::BadInput(format!("{}; pass --force to proceed", warnings.join("; "))));
    }
    Ok((params, drives))
}

pub fn prepare_report(params: &SystemParams, drives: &DriveParams, name: &str, force: bool) -> Result<PrepareReport, CliError> {
    let fourier = analytic_fourier_solution(params, drives, force)?;
    let (drift, diffusion) = build_drift_diffusion(params, &fourier);
    let a = drift.static_part();
    let v = steady_covariance_lyapunov(&a, &diffusion)?;
    let spectral = steady_covariance_spectral(&a, &diffusion, &SpectralOptions::default())?;
    let modulation = periodic_modulation(&drift, &diffusion, &ModulationOptions::default())?;
    Ok(PrepareReport {
        params: ParamsConfig::from_params(params, Some(name.to_string())),
        pump_power: drives.pump_power,
        probe_power: drives.probe_power,
        temperature: params.temperature,
        thermal_occupation: params.thermal_occupation(),
        a0: pair(fourier.a0),
        a1: pair(fourier.a1),
        q0: fourier.q0,
        q1: pair(fourier.q1),
        p1: pair(fourier.p1),
        cooperativity: fourier.cooperativity,
        probe_cooperativity: fourier.probe_cooperativity,
        beta: SQRT_2 * fourier.q1.norm(),
        beta_estimate: coherent_amplitude_estimate(params, drives).ok(),
        coupling_g0: pair(drift.g0),
        coupling_g1: pair(drift.g1),
        covariance: CovarianceReport {
            vqq: v.vqq(),
            vpp: v.vpp(),
            residual_occupation: v.residual_occupation(),
            matrix: v.to_rows(),
            lyapunov_residual: v.residual,
            spectral_max_diff: (v.v - spectral.v).abs().max(),
            uncertainty_min_eigenvalue: v.uncertainty_min_eigenvalue(),
        },
        modulation,
        warnings: drives.warnings(PROBE_RATIO_LIMIT),
    })
}

pub fn run_prepare(global: &GlobalArgs, resolved: &Resolved, args: &DriveArgs) -> Result<bool, CliError> {
    let (params, drives) = drives_for(global, resolved, args)?;
    let report = prepare_report(&params, &drives, &resolved.name, global.force)?;
    let out = OutputDir::create(&global.out)?;
    let path = out.write_json("prepare.json", &report)?;
    println!("<a>_0            = {:.6e} {:+.6e}i", report.a0[0], report.a0[1]);
    println!("<a>_1            = {:.6e} {:+.6e}i", report.a1[0], report.a1[1]);
    println!("|beta|           = {:.6}", report.beta);
    println!("n_thermal        = {:.4}", report.thermal_occupation);
    println!("V_qq             = {:.6}", report.covariance.vqq);
    println!("V_pp             = {:.6}", report.covariance.vpp);
    println!("n0               = {:.6}", report.covariance.residual_occupation);
    println!("modulation V_qq  = {:.3e} peak-to-peak", report.modulation.vqq_peak_to_peak);
    println!("modulation V_pp  = {:.3e} peak-to-peak", report.modulation.vpp_peak_to_peak);
    println!("report: {}", path.display());
    Ok(true)
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    params: ParamsConfig,
    pump_power: f64,
    probe_power: f64,
    temperature: f64,
    t_final: f64,
    steps: usize,
    max_error_ratio: f64,
    fit: &'a FitReport,
}

pub fn run_meanfield(global: &GlobalArgs, resolved: &Resolved, args: &DriveArgs, periods: usize, record_periods: usize) -> Result<bool, CliError> {
    if periods == 0 || record_periods < periods {
        return Err(CliError::BadInput(format!("need 0 < --periods ({periods}) <= --record-periods ({record_periods})")));
    }
    let (params, drives) = drives_for(global, resolved, args)?;
    let fourier = analytic_fourier_solution(&params, &drives, global.force)?;
    let period = 2.0 * PI / fourier.delta;
    let config = MeanFieldConfig { record_from: -(record_periods as f64) * period, ..Default::default() };
    let traj = integrate_meanfield(&params, &drives, &config)?;
    let fit = compare_trajectory_to_fourier(&traj, &fourier, periods)?;

    let out = OutputDir::create(&global.out)?;
    let path = out.path("trajectory.csv");
    traj.write_csv(BufWriter::new(File::create(&path)?))?;
    let settings = json!({
        "pump_power": drives.pump_power,
        "probe_power": drives.probe_power,
        "temperature": params.temperature,
        "omega_l": drives.omega_l,
        "omega_p": drives.omega_p,
        "t_final": traj.t_final,
        "record_periods": record_periods,
        "rtol": config.rtol,
        "atol": config.atol,
    });
    let config_record = ParamsConfig::from_params(&params, Some(resolved.name.clone()));
    let summary = json!({ "samples": traj.states.len(), "steps": traj.steps, "max_error_ratio": traj.max_error_ratio });
    out.write_sidecar("trajectory.csv", &["t", "q", "p", "re_a", "im_a"], "meanfield", &config_record, &settings, summary)?;
    let report = FitOutput {
        params: config_record.clone(),
        pump_power: drives.pump_power,
        probe_power: drives.probe_power,
        temperature: params.temperature,
        t_final: traj.t_final,
        steps: traj.steps,
        max_error_ratio: traj.max_error_ratio,
        fit: &fit,
    };
    let fit_path = out.write_json("meanfield_fit.json", &report)?;
    println!("samples          = {}", traj.states.len());
    println!("fit residual     = {}", num(fit.fit_residual));
    println!("analytic residual= {}", num(fit.analytic_residual));
    println!("|q1| fitted      = {}", num(fit.q1.norm()));
    println!("|q1| analytic    = {}", num(fourier.q1.norm()));
    println!("trajectory: {}", path.display());
    println!("fit report: {}", fit_path.display());
    Ok(true)
}
