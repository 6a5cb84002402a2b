//! Volume-constrained minimization of `E = D + Q`.
//!
//! Each iteration takes a preconditioned gradient step tangent to the volume
//! constraint, then restores `V(u) = t` exactly by the cube-root rescale about
//! the centroid. The step length is chosen by Armijo backtracking, so accepted
//! steps never increase the energy.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::field::{best_sphere_center, default_center_grid, AnisotropyField};
use crate::functionals::{
    breakdown, dirichlet, lumped_inner, lumped_norm, q_term, q_term_with_gradient, residual_of, volume,
    EnergyBreakdown,
};
use crate::mesh::{init_sphere, tangential_smooth, SphereMesh, SurfaceMap};
use crate::quadrature::GaussLegendre;
use crate::{isoperimetric_constant, Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial step length in the preconditioned metric.
    pub step_size: f64,
    /// Upper bound for the adaptive step length.
    pub max_step: f64,
    pub backtrack_factor: f64,
    pub armijo: f64,
    pub max_halvings: u32,
    pub max_iters: usize,
    /// Tolerance on `||grad E - lambda grad V|| / ||grad E||`.
    pub residual_tol: f64,
    /// Tangential smoothing cadence in iterations; 0 disables smoothing.
    pub smooth_every: usize,
    pub smooth_strength: f64,
    pub escape_radius: f64,
    /// Window (iterations) and relative change for the escape stagnation test.
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
    /// Mass shift in the preconditioner `L + shift * M`.
    pub precond_shift: f64,
    pub quadrature_nodes: usize,
    /// Initial sphere center; `None` searches the default center grid.
    pub center: Option<[f64; 3]>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_step: 8.0,
            backtrack_factor: 0.5,
            armijo: 1e-4,
            max_halvings: 40,
            max_iters: 3000,
            residual_tol: 1e-6,
            smooth_every: 0,
            smooth_strength: 0.5,
            escape_radius: 1e3,
            stagnation_window: 100,
            stagnation_tol: 1e-6,
            precond_shift: 1.0,
            quadrature_nodes: crate::field::DEFAULT_RADIAL_NODES,
            center: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_size", self.step_size),
            ("max_step", self.max_step),
            ("armijo", self.armijo),
            ("residual_tol", self.residual_tol),
            ("escape_radius", self.escape_radius),
            ("stagnation_tol", self.stagnation_tol),
            ("precond_shift", self.precond_shift),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument("backtrack_factor must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.smooth_strength) {
            return Err(Error::InvalidArgument("smooth_strength must lie in [0, 1]".into()));
        }
        if self.max_iters == 0 || self.stagnation_window == 0 {
            return Err(Error::InvalidArgument("max_iters and stagnation_window must be positive".into()));
        }
        if self.quadrature_nodes < 4 {
            return Err(Error::InvalidArgument("quadrature_nodes must be at least 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Escaped,
    MeshDegenerate,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Escaped => "escaped",
            SolveStatus::MeshDegenerate => "mesh_degenerate",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(SolveStatus::Converged),
            "max_iters" => Ok(SolveStatus::MaxIters),
            "escaped" => Ok(SolveStatus::Escaped),
            "mesh_degenerate" => Ok(SolveStatus::MeshDegenerate),
            other => Err(Error::InvalidArgument(format!("unknown status {other:?}"))),
        }
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub energy: f64,
    /// `|V(u) - t| / |t|`.
    pub volume_drift: f64,
    /// Relative residual at the multiplier fitted to this iterate.
    pub residual: f64,
    pub centroid_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub surface: Option<SurfaceMap>,
    pub t: f64,
    pub breakdown: EnergyBreakdown,
    pub lambda: f64,
    /// Relative residual `||grad E - lambda grad V|| / ||grad E||`.
    pub residual: f64,
    /// Unnormalized residual `||grad E - lambda grad V||`.
    pub residual_abs: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub history: Vec<HistoryEntry>,
}

impl SolveResult {
    pub fn surface(&self) -> &SurfaceMap {
        self.surface.as_ref().expect("solve results carry their surface until serialized")
    }

    pub fn energy(&self) -> f64 {
        self.breakdown.energy_e
    }

    /// `min_k E_k` over the history.
    pub fn min_energy(&self) -> f64 {
        self.history.iter().map(|h| h.energy).fold(f64::INFINITY, f64::min)
    }

    /// Writes `iteration,energy,volume_drift,residual,centroid_norm,step`.
    pub fn write_history_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for h in &self.history {
            out.serialize(h)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Factored `L + shift * M` applied coordinatewise.
pub struct Preconditioner {
    llt: Llt<usize, f64>,
    n: usize,
}

impl Preconditioner {
    pub fn new(mesh: &SphereMesh, shift: f64) -> Result<Self> {
        let n = mesh.vertex_count();
        let mut triplets = Vec::with_capacity(n + 2 * mesh.edges().len());
        let mut diag: Vec<f64> = mesh.dual_areas().iter().map(|m| shift * m).collect();
        for (&[i, j], &w) in mesh.edges().iter().zip(mesh.cotan_weights()) {
            // lower triangle only
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            triplets.push(Triplet::new(hi, lo, -w));
            diag[i] += w;
            diag[j] += w;
        }
        triplets.extend(diag.iter().enumerate().map(|(i, &d)| Triplet::new(i, i, d)));
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let llt = matrix
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { llt, n })
    }

    pub fn apply(&self, g: &[Vec3]) -> Vec<Vec3> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 3, |i, k| g[i][k]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n)
            .map(|i| Vec3::new(rhs[(i, 0)], rhs[(i, 1)], rhs[(i, 2)]))
            .collect()
    }
}

/// Least-squares multiplier `<grad E, grad V> / <grad V, grad V>` in the lumped metric.
pub fn extract_multiplier(u: &SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> Result<f64> {
    let (_, gq) = q_term_with_gradient(u, field, 1.0, rule);
    let mut ge = crate::functionals::grad_dirichlet(u);
    for (a, b) in ge.iter_mut().zip(&gq) {
        *a += b;
    }
    multiplier_of(u, &ge, &crate::functionals::grad_volume(u))
}

fn multiplier_of(u: &SurfaceMap, ge: &[Vec3], gv: &[Vec3]) -> Result<f64> {
    let vv = lumped_inner(u, gv, gv);
    let ev = lumped_inner(u, ge, gv);
    if !(vv > 0.0) || !vv.is_finite() {
        return Err(Error::UndefinedMultiplier);
    }
    // relative to the size of u, grad V is numerically zero
    let scale = lumped_norm(u, ge).max(1.0);
    if vv.sqrt() <= 1e-300 * scale {
        return Err(Error::UndefinedMultiplier);
    }
    Ok(ev / vv)
}

/// Closed-form `(lower, upper)` multiplier bounds for volume `t > 0` and `k0 in [0, 2)`.
pub fn multiplier_bounds(t: f64, k0: f64) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("volume must be positive, got {t}")));
    }
    if !(0.0..2.0).contains(&k0) {
        return Err(Error::InvalidArgument(format!("k0 must lie in [0, 2), got {k0}")));
    }
    let s = isoperimetric_constant();
    let c = t.cbrt();
    let lower = (2.0 - k0).powi(2) * s / (3.0 * (2.0 + k0) * c);
    let upper = 2.0 * (2.0 + k0) * s / (3.0 * (2.0 - k0) * c);
    Ok((lower, upper))
}

/// Energy state of one iterate.
struct State {
    u: SurfaceMap,
    energy: f64,
    ge: Vec<Vec3>,
    gv: Vec<Vec3>,
    lambda: f64,
    residual: f64,
    residual_abs: f64,
}

fn evaluate(u: SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> Result<State> {
    let (q, gq) = q_term_with_gradient(&u, field, 1.0, rule);
    let mut ge = crate::functionals::grad_dirichlet(&u);
    for (a, b) in ge.iter_mut().zip(&gq) {
        *a += b;
    }
    let gv = crate::functionals::grad_volume(&u);
    let lambda = multiplier_of(&u, &ge, &gv)?;
    let residual_abs = residual_of(&u, &ge, &gv, lambda);
    let scale = lumped_norm(&u, &ge);
    let residual = if scale > 0.0 { residual_abs / scale } else { 0.0 };
    Ok(State {
        energy: dirichlet(&u) + q,
        u,
        ge,
        gv,
        lambda,
        residual,
        residual_abs,
    })
}

fn energy_only(u: &SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> f64 {
    dirichlet(u) + q_term(u, field, 1.0, rule)
}

/// Retraction onto `V = t`: cube-root rescale about the centroid.
fn retract(u: &SurfaceMap, t: f64) -> Option<SurfaceMap> {
    let v = volume(u);
    if !v.is_finite() || v == 0.0 || (v > 0.0) != (t > 0.0) {
        return None;
    }
    let out = u.rescaled_to_volume(t).ok()?;
    out.check_degeneracy().ok()?;
    Some(out)
}

/// Default starting surface: the round sphere of volume `t` at the configured
/// center, or at the best center of the default grid.
pub fn default_init(mesh: &Arc<SphereMesh>, field: &AnisotropyField, t: f64, config: &SolverConfig) -> Result<SurfaceMap> {
    let center = match config.center {
        Some(c) => Vec3::from(c),
        None => best_sphere_center(field, t, &default_center_grid())?,
    };
    init_sphere(mesh, t, center)
}

/// Minimizes `E` over surfaces with `V(u) = t`.
pub fn minimize_isovolumetric(
    mesh: &Arc<SphereMesh>,
    field: &AnisotropyField,
    t: f64,
    config: &SolverConfig,
    init: Option<SurfaceMap>,
) -> Result<SolveResult> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("volume must be nonzero, got {t}")));
    }
    config.validate()?;
    let rule = GaussLegendre::new(config.quadrature_nodes)?;
    let start = match init {
        Some(u) => {
            if !Arc::ptr_eq(u.mesh_arc(), mesh) && u.mesh().vertex_count() != mesh.vertex_count() {
                return Err(Error::InvalidArgument("initial surface lives on another mesh".into()));
            }
            u.rescaled_to_volume(t)?
        }
        None => default_init(mesh, field, t, config)?,
    };
    let precond = Preconditioner::new(mesh, config.precond_shift)?;

    let mut history = Vec::new();
    let finish = |state: State, status: SolveStatus, history: Vec<HistoryEntry>, iterations: usize| SolveResult {
        breakdown: breakdown(&state.u, field, &rule),
        surface: Some(state.u),
        t,
        lambda: state.lambda,
        residual: state.residual,
        residual_abs: state.residual_abs,
        status,
        iterations,
        history,
    };

    if start.check_degeneracy().is_err() {
        let state = evaluate(start, field, &rule)?;
        return Ok(finish(state, SolveStatus::MeshDegenerate, history, 0));
    }
    let mut state = evaluate(start, field, &rule)?;
    let mut step = config.step_size;
    let record = |state: &State, iteration: usize, step: f64, history: &mut Vec<HistoryEntry>| {
        history.push(HistoryEntry {
            iteration,
            energy: state.energy,
            volume_drift: (volume(&state.u) - t).abs() / t.abs(),
            residual: state.residual,
            centroid_norm: state.u.centroid().norm(),
            step,
        });
    };
    record(&state, 0, 0.0, &mut history);

    for iter in 1..=config.max_iters {
        if state.residual <= config.residual_tol {
            return Ok(finish(state, SolveStatus::Converged, history, iter - 1));
        }
        // tangent direction in the preconditioned metric
        let pe = precond.apply(&state.ge);
        let pv = precond.apply(&state.gv);
        let dot = |a: &[Vec3], b: &[Vec3]| -> f64 { a.iter().zip(b).map(|(x, y)| x.dot(y)).sum() };
        let mu = dot(&state.gv, &pe) / dot(&state.gv, &pv);
        let dir: Vec<Vec3> = pe.iter().zip(&pv).map(|(e, v)| -(e - v * mu)).collect();
        // <gE, d> = <gE - mu gV, d> avoids cancellation near convergence
        let r: Vec<Vec3> = state.ge.iter().zip(&state.gv).map(|(e, v)| e - v * mu).collect();
        let slope = dot(&r, &dir);
        if !(slope < 0.0) {
            log::debug!("iteration {iter}: no descent direction (slope {slope:e})");
            return Ok(finish(state, SolveStatus::MaxIters, history, iter - 1));
        }

        let mut accepted = None;
        let mut alpha = step;
        for halving in 0..=config.max_halvings {
            let positions: Vec<Vec3> = state.u.positions().iter().zip(&dir).map(|(p, d)| p + d * alpha).collect();
            let moved = SurfaceMap::new(Arc::clone(mesh), positions)?;
            if let Some(candidate) = retract(&moved, t) {
                let e = energy_only(&candidate, field, &rule);
                log::trace!("iteration {iter} alpha {alpha:e}: dE {:e} vs {:e}", e - state.energy, alpha * slope);
                if e <= state.energy + config.armijo * alpha * slope {
                    accepted = Some((candidate, halving));
                    break;
                }
            }
            alpha *= config.backtrack_factor;
        }
        let Some((mut next, halvings)) = accepted else {
            log::debug!("iteration {iter}: line search exhausted at residual {:e}", state.residual);
            return Ok(finish(state, SolveStatus::MaxIters, history, iter - 1));
        };
        step = if halvings == 0 { (alpha * 2.0).min(config.max_step) } else { alpha };

        if config.smooth_every > 0 && iter % config.smooth_every == 0 {
            match tangential_smooth(&next, config.smooth_strength) {
                Ok(smoothed) => {
                    if let Some(smoothed) = retract(&smoothed, t) {
                        // accepted only if the energy does not go up
                        if energy_only(&smoothed, field, &rule) <= energy_only(&next, field, &rule) {
                            next = smoothed;
                        }
                    }
                }
                Err(Error::MeshDegenerate { .. }) => {
                    let state = evaluate(next, field, &rule)?;
                    return Ok(finish(state, SolveStatus::MeshDegenerate, history, iter));
                }
                Err(e) => return Err(e),
            }
        }

        state = evaluate(next, field, &rule)?;
        record(&state, iter, alpha, &mut history);

        let centroid_norm = history.last().map(|h| h.centroid_norm).unwrap_or(0.0);
        if centroid_norm > config.escape_radius && history.len() > config.stagnation_window {
            let old = history[history.len() - 1 - config.stagnation_window].residual;
            let change = (state.residual - old).abs() / old.abs().max(f64::MIN_POSITIVE);
            if change < config.stagnation_tol {
                return Ok(finish(state, SolveStatus::Escaped, history, iter));
            }
        }
    }
    let status = if state.residual <= config.residual_tol {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIters
    };
    Ok(finish(state, status, history, config.max_iters))
}
