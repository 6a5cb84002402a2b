//! Minimization of the normalized value `|t|^(-2/3) S_K(t)` over `t > 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::{check_conditions, AnisotropyField, SampleSpec};
use crate::lab::scan::{scan_with_results, ScanTable};
use crate::mesh::{SphereMesh, SurfaceMap};
use crate::solver::{minimize_isovolumetric, SolveResult, SolveStatus, SolverConfig};
use crate::{Error, Result};

/// Golden-section stopping width in `ln t`.
pub const LOG_T_TOL: f64 = 0.02;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioResult {
    pub t0: f64,
    /// `F(U) / t0^(2/3)` at the refined minimizer.
    pub s_k_const: f64,
    /// `E(U) / t0^(2/3)`.
    pub s_k_energy: f64,
    pub lambda: f64,
    /// `|lambda - 2/3 S_K t0^(-1/3)| / |lambda|`.
    pub identity_residual: f64,
    pub status: SolveStatus,
    /// The field was sampled nonpositive.
    pub nonpositive_field: bool,
    pub evaluations: usize,
    pub table: ScanTable,
    #[serde(skip)]
    pub surface: Option<SurfaceMap>,
}

fn normalized(res: &SolveResult) -> f64 {
    res.energy() / res.t.abs().powf(2.0 / 3.0)
}

pub fn minimize_isoperimetric_ratio(
    mesh: &Arc<SphereMesh>,
    field: &AnisotropyField,
    t_grid: &[f64],
    config: &SolverConfig,
) -> Result<RatioResult> {
    if t_grid.len() < 3 || t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("ratio search needs at least 3 positive volumes".into()));
    }
    let (table, results) = scan_with_results(mesh, field, t_grid, config)?;
    refine_ratio(mesh, field, table, results, config)
}

/// Golden-section refinement around the best row of an existing scan.
pub fn refine_ratio(
    mesh: &Arc<SphereMesh>,
    field: &AnisotropyField,
    table: ScanTable,
    results: Vec<SolveResult>,
    config: &SolverConfig,
) -> Result<RatioResult> {
    let report = check_conditions(field, &SampleSpec::default())?;
    if !report.nonpositive {
        log::warn!("field {} takes positive values on samples; result is flagged", field.label());
    }
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == SolveStatus::Converged)
        .min_by(|a, b| normalized(a.1).total_cmp(&normalized(b.1)))
        .map(|(i, _)| i)
        .ok_or(Error::InsufficientRows { needed: 1, found: 0 })?;

    // bracket in ln t around the best grid point
    let lo = results[best.saturating_sub(1)].t.ln();
    let hi = results[(best + 1).min(results.len() - 1)].t.ln();
    let mut warm = results[best].clone();
    let mut best_res = results[best].clone();
    let mut evaluations = 0;
    let mut solve = |x: f64, warm: &SolveResult| -> Result<SolveResult> {
        evaluations += 1;
        minimize_isovolumetric(mesh, field, x.exp(), config, Some(warm.surface().clone()))
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    if b - a > LOG_T_TOL {
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut r1 = solve(x1, &warm)?;
        let mut r2 = solve(x2, &r1)?;
        while b - a > LOG_T_TOL {
            if normalized(&r1) <= normalized(&r2) {
                b = x2;
                x2 = x1;
                r2 = r1;
                x1 = b - phi * (b - a);
                warm = r2.clone();
                r1 = solve(x1, &warm)?;
            } else {
                a = x1;
                x1 = x2;
                r1 = r2;
                x2 = a + phi * (b - a);
                warm = r1.clone();
                r2 = solve(x2, &warm)?;
            }
        }
        for r in [r1, r2] {
            if r.status == SolveStatus::Converged && normalized(&r) < normalized(&best_res) {
                best_res = r;
            }
        }
    }
    let t0 = best_res.t;
    let s_k_const = best_res.breakdown.capillary_f / t0.powf(2.0 / 3.0);
    let predicted = 2.0 / 3.0 * s_k_const * t0.powf(-1.0 / 3.0);
    Ok(RatioResult {
        t0,
        s_k_const,
        s_k_energy: normalized(&best_res),
        lambda: best_res.lambda,
        identity_residual: (best_res.lambda - predicted).abs() / best_res.lambda.abs(),
        status: best_res.status,
        nonpositive_field: report.nonpositive,
        evaluations,
        table,
        surface: best_res.surface.clone(),
    })
}
