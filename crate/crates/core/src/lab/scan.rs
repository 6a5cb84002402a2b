//! Isovolumetric scans and the checks that read them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::{AnisotropyField, FieldSpec};
use crate::mesh::SphereMesh;
use crate::solver::{minimize_isovolumetric, SolveResult, SolveStatus, SolverConfig};
use crate::{isoperimetric_constant, Error, Result};

/// Relative slack for the two-sided bound on each row.
pub const BOUND_SLACK: f64 = 0.01;

/// One solve of the scan. Column order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub t: f64,
    #[serde(rename = "S_K_value")]
    pub s_k_value: f64,
    pub lambda: f64,
    pub dirichlet: f64,
    pub q_term: f64,
    pub residual: f64,
    pub status: SolveStatus,
    /// `S |t|^(2/3) - S_K(t)`.
    pub gap: f64,
    /// `|t|^(-2/3) S_K(t)`.
    pub normalized: f64,
    pub area: f64,
    pub capillary_f: f64,
    pub conformality_defect: f64,
    pub iterations: usize,
    /// Whether the row satisfies `(1 - ||Q_K||) S |t|^(2/3) <= S_K(t) <= S |t|^(2/3)` with slack.
    pub bound_ok: bool,
}

impl ScanRow {
    pub fn from_result(res: &SolveResult, q_sup: f64) -> Self {
        let t = res.t;
        let b = &res.breakdown;
        let s0 = isoperimetric_constant() * t.abs().powf(2.0 / 3.0);
        let lower = (1.0 - q_sup) * s0 * (1.0 - BOUND_SLACK);
        let upper = s0 * (1.0 + BOUND_SLACK);
        Self {
            t,
            s_k_value: b.energy_e,
            lambda: res.lambda,
            dirichlet: b.dirichlet,
            q_term: b.q_term,
            residual: res.residual,
            status: res.status,
            gap: s0 - b.energy_e,
            normalized: b.energy_e / t.abs().powf(2.0 / 3.0),
            area: b.area,
            capillary_f: b.capillary_f,
            conformality_defect: b.conformality_defect,
            iterations: res.iterations,
            bound_ok: lower <= b.energy_e && b.energy_e <= upper,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub field: FieldSpec,
    pub level: u32,
    pub config: SolverConfig,
    pub seed: u64,
    /// Sampled `sup |Q_K|` used for the row bounds.
    pub q_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub meta: ScanMeta,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn converged_rows(&self) -> impl Iterator<Item = &ScanRow> {
        self.rows.iter().filter(|r| r.converged())
    }

    /// `S_K` at `t` by log-log interpolation between converged rows of the same sign.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let rows: Vec<&ScanRow> = self
            .converged_rows()
            .filter(|r| r.t.signum() == t.signum())
            .collect();
        if let Some(r) = rows.iter().find(|r| r.t == t) {
            return Some(r.s_k_value);
        }
        let pair = rows.windows(2).find(|w| {
            let (a, b) = (w[0].t.abs().min(w[1].t.abs()), w[0].t.abs().max(w[1].t.abs()));
            a <= t.abs() && t.abs() <= b
        })?;
        let (x0, x1) = (pair[0].t.abs().ln(), pair[1].t.abs().ln());
        let (y0, y1) = (pair[0].s_k_value, pair[1].s_k_value);
        if y0 <= 0.0 || y1 <= 0.0 {
            let w = (t.abs().ln() - x0) / (x1 - x0);
            return Some(y0 + w * (y1 - y0));
        }
        let w = (t.abs().ln() - x0) / (x1 - x0);
        Some((y0.ln() + w * (y1.ln() - y0.ln())).exp())
    }
}

/// `n` log-spaced points from `t_min` to `t_max` (same sign, nonzero).
pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if t_min == 0.0 || t_max == 0.0 || t_min.signum() != t_max.signum() || !t_min.is_finite() || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "log grid needs nonzero endpoints of one sign, got {t_min} and {t_max}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("log grid needs at least 2 points".into()));
    }
    let (a, b) = (t_min.abs().ln(), t_max.abs().ln());
    let sign = t_min.signum();
    Ok((0..n)
        .map(|k| sign * (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Sampled `sup |Q_K|` over the default sample set.
pub fn sampled_q_sup(field: &AnisotropyField) -> Result<f64> {
    Ok(crate::field::check_conditions(field, &crate::field::SampleSpec::default())?.q_sup_estimate)
}

/// One solve per grid entry, in increasing `|t|`, each warm-started from the
/// previous converged surface.
pub fn scan_isovolumetric(
    mesh: &Arc<SphereMesh>,
    field: &AnisotropyField,
    t_grid: &[f64],
    config: &SolverConfig,
) -> Result<ScanTable> {
    Ok(scan_with_results(mesh, field, t_grid, config)?.0)
}

/// [`scan_isovolumetric`] that also returns the solves, ordered by `t`.
pub fn scan_with_results(
    mesh: &Arc<SphereMesh>,
    field: &AnisotropyField,
    t_grid: &[f64],
    config: &SolverConfig,
) -> Result<(ScanTable, Vec<SolveResult>)> {
    if t_grid.iter().any(|&t| t == 0.0 || !t.is_finite()) {
        return Err(Error::InvalidArgument("scan volumes must be finite and nonzero".into()));
    }
    let q_sup = sampled_q_sup(field)?;
    let mut grid = t_grid.to_vec();
    grid.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    let mut results: Vec<SolveResult> = Vec::with_capacity(grid.len());
    for &t in &grid {
        let init = results
            .iter()
            .rev()
            .find(|w| w.t.signum() == t.signum() && w.status == SolveStatus::Converged)
            .map(|w| w.surface().clone());
        let res = match minimize_isovolumetric(mesh, field, t, config, init) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("scan row t={t}: {e}; retrying from the default sphere");
                minimize_isovolumetric(mesh, field, t, config, None)?
            }
        };
        log::info!(
            "t={t:.4e} S_K={:.6} lambda={:.5} residual={:.2e} status={} iterations={}",
            res.energy(),
            res.lambda,
            res.residual,
            res.status,
            res.iterations
        );
        results.push(res);
    }
    results.sort_by(|a, b| a.t.total_cmp(&b.t));
    let rows = results.iter().map(|r| ScanRow::from_result(r, q_sup)).collect();
    let table = ScanTable {
        meta: ScanMeta {
            field: field.spec(),
            level: mesh.level(),
            config: config.clone(),
            seed: config.seed,
            q_sup,
        },
        rows,
    };
    Ok((table, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeRow {
    pub t: f64,
    pub finite_difference: f64,
    pub lambda: f64,
    /// `|lambda - dS/dt| / |lambda|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub rows: Vec<DerivativeRow>,
    pub median_deviation: f64,
    pub max_deviation: f64,
}

/// Three-point derivative on a nonuniform grid at the middle node.
pub fn three_point_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// Compares `dS_K/dt` (second-order differences over converged neighbours)
/// with the multiplier column.
pub fn derivative_identity_check(table: &ScanTable) -> Result<DerivativeReport> {
    let mut rows = Vec::new();
    let mut longest = 0;
    let mut run = 0;
    for (i, r) in table.rows.iter().enumerate() {
        run = if r.converged() { run + 1 } else { 0 };
        longest = longest.max(run);
        if i >= 2 && run >= 3 {
            let (a, b, c) = (&table.rows[i - 2], &table.rows[i - 1], r);
            let fd = three_point_derivative([a.t, b.t, c.t], [a.s_k_value, b.s_k_value, c.s_k_value]);
            rows.push(DerivativeRow {
                t: b.t,
                finite_difference: fd,
                lambda: b.lambda,
                deviation: (b.lambda - fd).abs() / b.lambda.abs(),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientRows { needed: 3, found: longest });
    }
    let mut devs: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    devs.sort_by(f64::total_cmp);
    let n = devs.len();
    let median = if n % 2 == 1 {
        devs[n / 2]
    } else {
        0.5 * (devs[n / 2 - 1] + devs[n / 2])
    };
    Ok(DerivativeReport {
        median_deviation: median,
        max_deviation: devs[n - 1],
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityPair {
    pub t1: f64,
    pub t2: f64,
    pub s1: f64,
    pub s2: f64,
    pub s12: f64,
    /// `S_K(t1) + S_K(t2) - S_K(t1 + t2)`.
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub pairs: Vec<SubadditivityPair>,
    /// Pairs that could not be evaluated from the table.
    pub skipped: Vec<(f64, f64)>,
    pub all_passed: bool,
}

/// Checks `S_K(t1) + S_K(t2) >= S_K(t1 + t2)` up to 1% of the right side.
pub fn subadditivity_check(table: &ScanTable, pairs: &[(f64, f64)]) -> SubadditivityReport {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for &(t1, t2) in pairs {
        match (table.interpolate(t1), table.interpolate(t2), table.interpolate(t1 + t2)) {
            (Some(s1), Some(s2), Some(s12)) => {
                let slack = s1 + s2 - s12;
                out.push(SubadditivityPair {
                    t1,
                    t2,
                    s1,
                    s2,
                    s12,
                    slack,
                    passed: slack >= -BOUND_SLACK * s12.abs(),
                });
            }
            _ => skipped.push((t1, t2)),
        }
    }
    SubadditivityReport {
        all_passed: out.iter().all(|p| p.passed),
        pairs: out,
        skipped,
    }
}

/// Pairs `(t_i, t_j)` from converged rows whose sum stays inside the table.
pub fn default_pairs(table: &ScanTable) -> Vec<(f64, f64)> {
    let ts: Vec<f64> = table.converged_rows().map(|r| r.t).filter(|t| *t > 0.0).collect();
    let Some(&max) = ts.last() else {
        return Vec::new();
    };
    let mut pairs = Vec::new();
    for (i, &a) in ts.iter().enumerate() {
        for &b in &ts[i..] {
            if a + b <= max {
                pairs.push((a, b));
            }
        }
    }
    pairs
}
