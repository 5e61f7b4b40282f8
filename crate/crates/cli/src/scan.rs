//! `pacs-scan` and `thermal-scan` subcommands.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use pacs_core::analytics::{
    mandel_q_analytic, pacs_oracle, quadrature_variance_analytic, thermal_mandel_q, thermal_oracle, thermal_quadrature_variance,
    THERMAL_TRUNCATION_LIMIT,
};
use pacs_core::fock::{converge, ConvergenceOptions, Converged};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::grid::{check_list, linspace, stepped};
use crate::output::{num, OutputDir, Table};
use crate::{conversion_factors, BetaArgs, CliError, ConversionArgs, GlobalArgs, Resolved};

/// Truncation step of the convergence protocol.
pub const CONVERGENCE_STEP: usize = 10;
/// Largest truncation the scans escalate to.
pub const CONVERGENCE_CEILING: usize = 120;
/// Largest |Q_truncated − Q_full| accepted at n̄₀ ≤ 0.2.
pub const TRUNCATION_AUDIT_TOL: f64 = 0.03;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn convergence_options(global: &GlobalArgs) -> ConvergenceOptions {
    ConvergenceOptions { tol: global.tol, step: CONVERGENCE_STEP, ceiling: CONVERGENCE_CEILING.max(global.nmax + 2 * CONVERGENCE_STEP) }
}

/// Analytic and oracle statistics of one single-PACS setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacsPoint {
    pub q_analytic: f64,
    pub var_analytic: f64,
    pub q_oracle: f64,
    pub var_oracle: f64,
    pub n_max: usize,
    pub converged: bool,
}

/// Q and 4(Δx_θ)² of the readout of Zβ-PACS, closed form and Fock oracle.
pub fn pacs_point(beta: f64, z: f64, b: f64, theta: f64, global: &GlobalArgs) -> Result<PacsPoint, CliError> {
    let alpha = re(z * beta);
    let c: Converged = converge(
        |n| {
            let m = pacs_oracle(alpha, 1, b, theta, n)?;
            Ok(vec![m.mandel_q, m.normalized_variance])
        },
        global.nmax,
        &convergence_options(global),
    )?;
    Ok(PacsPoint {
        q_analytic: mandel_q_analytic(alpha, 1, b)?,
        var_analytic: 4.0 * quadrature_variance_analytic(alpha, b, theta)?,
        q_oracle: c.values[0],
        var_oracle: c.values[1],
        n_max: c.n_max,
        converged: c.converged,
    })
}

/// Paper truncation and full pipeline for one thermal setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalPoint {
    pub q_truncated: f64,
    pub var_truncated: f64,
    pub q_full: f64,
    pub var_full: f64,
    pub n_max: usize,
    pub converged: bool,
}

pub fn thermal_point(beta: f64, z: f64, b: f64, n0: f64, global: &GlobalArgs) -> Result<ThermalPoint, CliError> {
    let beta = re(beta);
    let c = converge(
        |n| {
            let full = thermal_oracle(beta, z, b, n0, FRAC_PI_2, n)?;
            Ok(vec![
                thermal_mandel_q(beta, z, b, n0, n)?.value,
                4.0 * thermal_quadrature_variance(beta, z, b, n0, FRAC_PI_2, n)?,
                full.mandel_q,
                4.0 * full.variance,
            ])
        },
        global.nmax,
        &convergence_options(global),
    )?;
    Ok(ThermalPoint {
        q_truncated: c.values[0],
        var_truncated: c.values[1],
        q_full: c.values[2],
        var_full: c.values[3],
        n_max: c.n_max,
        converged: c.converged,
    })
}

fn flag(converged: bool) -> String {
    u8::from(converged).to_string()
}

fn evaluate<T, F>(points: &[T], f: F) -> Result<Vec<PacsPoint>, CliError>
where
    T: Sync,
    F: Fn(&T) -> Result<PacsPoint, CliError> + Sync + Send,
{
    points.par_iter().map(f).collect()
}

struct TableStats {
    max_diff: f64,
    unconverged: usize,
}

fn stats(points: &[PacsPoint], diff: impl Fn(&PacsPoint) -> f64) -> TableStats {
    TableStats {
        max_diff: points.iter().map(&diff).fold(0.0, f64::max),
        unconverged: points.iter().filter(|p| !p.converged).count(),
    }
}

fn beta_grid(args: &BetaArgs) -> Result<Vec<f64>, CliError> {
    if args.beta_min < 0.0 {
        return Err(CliError::BadInput(format!("--beta-min must be >= 0, got {}", args.beta_min)));
    }
    stepped(args.beta_min, args.beta_max, args.beta_step, "beta")
}

fn report(name: &str, unconverged: usize, max_diff: f64, what: &str) {
    println!("{name}: max |analytic - oracle| {what} = {}, unconverged rows = {unconverged}", num(max_diff));
}

#[allow(clippy::too_many_arguments)]
pub fn run_pacs_scan(
    global: &GlobalArgs,
    resolved: &Resolved,
    conversion: &ConversionArgs,
    beta_args: &BetaArgs,
    b_list: &[f64],
    theta_points: usize,
    b_points: usize,
) -> Result<bool, CliError> {
    let (z, b_fig) = conversion_factors(&resolved.params, conversion)?;
    let betas = beta_grid(beta_args)?;
    check_list(b_list, "B")?;
    if b_list.iter().any(|b| !(0.0..1.0).contains(b)) {
        return Err(CliError::BadInput("B list values must lie in [0, 1)".into()));
    }
    let thetas = linspace(0.0, PI, theta_points, "theta")?;
    let bs = linspace(0.01, 0.99, b_points, "B")?;
    let settings = json!({
        "z": z,
        "b": b_fig,
        "beta": betas,
        "b_list": b_list,
        "theta_c": thetas,
        "b_d": bs,
        "theta_ab_d": FRAC_PI_2,
        "n_max": global.nmax,
        "tol": global.tol,
        "convergence_step": CONVERGENCE_STEP,
        "convergence_ceiling": convergence_options(global).ceiling,
    });
    let out = OutputDir::create(&global.out)?;
    let params = resolved.config();
    let mut all_converged = true;

    // fig2a/fig2b share the (B, |β|) grid at θ = π/2.
    let ab: Vec<(f64, f64)> = b_list.iter().flat_map(|&b| betas.iter().map(move |&beta| (b, beta))).collect();
    let ab_points = evaluate(&ab, |&(b, beta)| pacs_point(beta, z, b, FRAC_PI_2, global))?;
    let rows_a = ab
        .iter()
        .zip(&ab_points)
        .map(|(&(b, beta), p)| {
            vec![num(b), num(beta), num(p.q_analytic), num(p.q_oracle), num((p.q_analytic - p.q_oracle).abs()), p.n_max.to_string(), flag(p.converged)]
        })
        .collect();
    let rows_b = ab
        .iter()
        .zip(&ab_points)
        .map(|(&(b, beta), p)| {
            vec![
                num(b),
                num(beta),
                num(p.var_analytic),
                num(p.var_oracle),
                num((p.var_analytic - p.var_oracle).abs()),
                p.n_max.to_string(),
                flag(p.converged),
            ]
        })
        .collect();
    let sa = stats(&ab_points, |p| (p.q_analytic - p.q_oracle).abs());
    let sb = stats(&ab_points, |p| (p.var_analytic - p.var_oracle).abs());
    let cols = &["b", "beta", "q_analytic", "q_oracle", "max_abs_diff", "n_max", "converged"];
    write(&out, Table { name: "fig2a", columns: cols, rows: rows_a }, &params, &settings, &sa)?;
    let cols = &["b", "beta", "var4_analytic", "var4_oracle", "max_abs_diff", "n_max", "converged"];
    write(&out, Table { name: "fig2b", columns: cols, rows: rows_b }, &params, &settings, &sb)?;
    report("fig2a", sa.unconverged, sa.max_diff, "Q");
    report("fig2b", sb.unconverged, sb.max_diff, "4Var");
    all_converged &= sa.unconverged == 0;

    let c: Vec<(f64, f64)> = betas.iter().flat_map(|&beta| thetas.iter().map(move |&th| (beta, th))).collect();
    let c_points = evaluate(&c, |&(beta, th)| pacs_point(beta, z, b_fig, th, global))?;
    let sc = stats(&c_points, |p| (p.var_analytic - p.var_oracle).abs());
    let rows = c
        .iter()
        .zip(&c_points)
        .map(|(&(beta, th), p)| {
            vec![num(beta), num(th), num(p.var_analytic), num(p.var_oracle), num((p.var_analytic - p.var_oracle).abs()), p.n_max.to_string(), flag(p.converged)]
        })
        .collect();
    let cols = &["beta", "theta", "var4_analytic", "var4_oracle", "max_abs_diff", "n_max", "converged"];
    write(&out, Table { name: "fig2c", columns: cols, rows }, &params, &settings, &sc)?;
    report("fig2c", sc.unconverged, sc.max_diff, "4Var");
    all_converged &= sc.unconverged == 0;

    let d: Vec<(f64, f64)> = betas.iter().flat_map(|&beta| bs.iter().map(move |&b| (beta, b))).collect();
    let d_points = evaluate(&d, |&(beta, b)| pacs_point(beta, z, b, FRAC_PI_2, global))?;
    let sd = stats(&d_points, |p| (p.var_analytic - p.var_oracle).abs());
    let rows = d
        .iter()
        .zip(&d_points)
        .map(|(&(beta, b), p)| {
            vec![num(beta), num(b), num(p.var_analytic), num(p.var_oracle), num((p.var_analytic - p.var_oracle).abs()), p.n_max.to_string(), flag(p.converged)]
        })
        .collect();
    let cols = &["beta", "b", "var4_analytic", "var4_oracle", "max_abs_diff", "n_max", "converged"];
    write(&out, Table { name: "fig2d", columns: cols, rows }, &params, &settings, &sd)?;
    report("fig2d", sd.unconverged, sd.max_diff, "4Var");
    all_converged &= sd.unconverged == 0;

    println!("Z = {z:.6}, B = {b_fig:.6}; output in {}", global.out.display());
    if !all_converged {
        eprintln!("some rows did not converge within the truncation ceiling");
    }
    Ok(all_converged)
}

fn write(out: &OutputDir, table: Table, params: &pacs_core::params::ParamsConfig, settings: &Value, s: &TableStats) -> Result<(), CliError> {
    let summary = json!({ "rows": table.rows.len(), "max_abs_diff": s.max_diff, "unconverged_rows": s.unconverged });
    out.write_table(&table, "pacs-scan", params, settings, summary)?;
    Ok(())
}

pub fn run_thermal_scan(
    global: &GlobalArgs,
    resolved: &Resolved,
    conversion: &ConversionArgs,
    beta_args: &BetaArgs,
    n0_list: &[f64],
    n0_curves: &[f64],
) -> Result<bool, CliError> {
    let (z, b) = conversion_factors(&resolved.params, conversion)?;
    let betas = beta_grid(beta_args)?;
    for (list, name) in [(n0_list, "n0"), (n0_curves, "n0 curve")] {
        check_list(list, name)?;
        if list[0] < 0.0 {
            return Err(CliError::BadInput(format!("{name} values must be >= 0")));
        }
        if !global.force && list.iter().any(|&n| n > THERMAL_TRUNCATION_LIMIT) {
            return Err(CliError::BadInput(format!(
                "{name} values above {THERMAL_TRUNCATION_LIMIT} leave the n <= 1 truncation regime; pass --force to proceed"
            )));
        }
    }
    let settings = json!({
        "z": z,
        "b": b,
        "theta": FRAC_PI_2,
        "beta": betas,
        "n0_list": n0_list,
        "n0_curves": n0_curves,
        "n_max": global.nmax,
        "tol": global.tol,
        "convergence_step": CONVERGENCE_STEP,
        "convergence_ceiling": convergence_options(global).ceiling,
    });
    let out = OutputDir::create(&global.out)?;
    let params = resolved.config();

    let grid = |list: &[f64]| -> Vec<(f64, f64)> { list.iter().flat_map(|&n0| betas.iter().map(move |&beta| (n0, beta))).collect() };
    let eval = |pts: &[(f64, f64)]| -> Result<Vec<ThermalPoint>, CliError> {
        pts.par_iter().map(|&(n0, beta)| thermal_point(beta, z, b, n0, global)).collect()
    };

    let a = grid(n0_list);
    let a_points = eval(&a)?;
    let audit = a
        .iter()
        .zip(&a_points)
        .filter(|((n0, _), _)| *n0 <= 0.2)
        .map(|(&(n0, beta), p)| ((p.q_truncated - p.q_full).abs(), n0, beta))
        .fold(None, |m: Option<(f64, f64, f64)>, x| match m {
            Some(m) if m.0 >= x.0 => Some(m),
            _ => Some(x),
        });
    let unconverged_a = a_points.iter().filter(|p| !p.converged).count();
    let rows = a
        .iter()
        .zip(&a_points)
        .map(|(&(n0, beta), p)| {
            vec![num(n0), num(beta), num(p.q_truncated), num(p.q_full), num((p.q_truncated - p.q_full).abs()), p.n_max.to_string(), flag(p.converged)]
        })
        .collect();
    let cols = &["n0", "beta", "q_truncated", "q_full", "abs_diff", "n_max", "converged"];
    let summary = json!({
        "rows": a.len(),
        "unconverged_rows": unconverged_a,
        "truncation_audit": audit.map(|(d, n0, beta)| json!({
            "max_abs_diff_n0_le_0_2": d,
            "at_n0": n0,
            "at_beta": beta,
            "tolerance": TRUNCATION_AUDIT_TOL,
            "passed": d <= TRUNCATION_AUDIT_TOL,
        })),
    });
    out.write_table(&Table { name: "fig3a", columns: cols, rows }, "thermal-scan", &params, &settings, summary)?;

    let bp = grid(n0_curves);
    let b_points = eval(&bp)?;
    let unconverged_b = b_points.iter().filter(|p| !p.converged).count();
    let ordered = betas.iter().enumerate().all(|(i, _)| {
        (1..n0_curves.len()).all(|k| b_points[k * betas.len() + i].var_truncated > b_points[(k - 1) * betas.len() + i].var_truncated)
    });
    let max_var_diff = b_points.iter().map(|p| (p.var_truncated - p.var_full).abs()).fold(0.0, f64::max);
    let rows = bp
        .iter()
        .zip(&b_points)
        .map(|(&(n0, beta), p)| {
            vec![
                num(n0),
                num(beta),
                num(p.var_truncated),
                num(p.var_full),
                num((p.var_truncated - p.var_full).abs()),
                p.n_max.to_string(),
                flag(p.converged),
            ]
        })
        .collect();
    let cols = &["n0", "beta", "var4_truncated", "var4_full", "abs_diff", "n_max", "converged"];
    let summary = json!({
        "rows": bp.len(),
        "unconverged_rows": unconverged_b,
        "increasing_in_n0": ordered,
        "max_abs_diff": max_var_diff,
    });
    out.write_table(&Table { name: "fig3b", columns: cols, rows }, "thermal-scan", &params, &settings, summary)?;

    match audit {
        Some((d, n0, beta)) => println!(
            "fig3a: max |Q_truncated - Q_full| at n0 <= 0.2 = {} (n0 = {n0}, |beta| = {beta}; audit tolerance {TRUNCATION_AUDIT_TOL}, {}), unconverged rows = {unconverged_a}",
            num(d),
            if d <= TRUNCATION_AUDIT_TOL { "within" } else { "exceeded" }
        ),
        None => println!("fig3a: no rows at n0 <= 0.2 for the truncation audit, unconverged rows = {unconverged_a}"),
    }
    println!("fig3b: variance increasing in n0 at every |beta|: {ordered}, max |truncated - full| = {}, unconverged rows = {unconverged_b}", num(max_var_diff));
    println!("Z = {z:.6}, B = {b:.6}; output in {}", global.out.display());
    let ok = unconverged_a == 0 && unconverged_b == 0;
    if !ok {
        eprintln!("some rows did not converge within the truncation ceiling");
    }
    Ok(ok)
}
