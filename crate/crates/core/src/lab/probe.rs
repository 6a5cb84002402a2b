//! Small negative volumes in a negative field: minimizing sequences drift off.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::AnisotropyField;
use crate::mesh::{init_sphere, SphereMesh};
use crate::solver::{minimize_isovolumetric, SolveResult, SolveStatus, SolverConfig};
use crate::{isoperimetric_constant, Result, Vec3};

/// Upper end of the ratio window for the best energy.
pub const RATIO_WINDOW: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRun {
    pub field: String,
    pub t: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `min_k E_k / (S |t|^(2/3))`.
    pub min_ratio: f64,
    pub final_ratio: f64,
    /// Every iterate has `E > S |t|^(2/3)`.
    pub all_above: bool,
    pub energy_monotone: bool,
    pub centroid_start: f64,
    pub centroid_end: f64,
    /// Centroid norm nondecreasing over the second half of the history, and larger at the end.
    pub centroid_monotone_tail: bool,
    pub residual: f64,
    pub energies: Vec<f64>,
}

impl ProbeRun {
    pub fn from_result(field: &AnisotropyField, res: &SolveResult) -> Self {
        let floor = isoperimetric_constant() * res.t.abs().powf(2.0 / 3.0);
        let energies: Vec<f64> = res.history.iter().map(|h| h.energy).collect();
        let centroids: Vec<f64> = res.history.iter().map(|h| h.centroid_norm).collect();
        let tail = &centroids[centroids.len() / 2..];
        let centroid_monotone_tail = tail.len() >= 2
            && tail.windows(2).all(|w| w[1] >= w[0])
            && tail[tail.len() - 1] > tail[0];
        Self {
            field: field.label().to_string(),
            t: res.t,
            status: res.status,
            iterations: res.iterations,
            min_ratio: res.min_energy() / floor,
            final_ratio: res.energy() / floor,
            all_above: energies.iter().all(|&e| e > floor),
            energy_monotone: energies.windows(2).all(|w| w[1] <= w[0]),
            centroid_start: centroids[0],
            centroid_end: centroids[centroids.len() - 1],
            centroid_monotone_tail,
            residual: res.residual,
            energies,
        }
    }

    /// No convergence, energies above the isoperimetric floor, drift outward,
    /// best energy close to the floor.
    pub fn escapes(&self) -> bool {
        self.status != SolveStatus::Converged
            && self.all_above
            && self.energy_monotone
            && self.centroid_monotone_tail
            && self.min_ratio > 1.0
            && self.min_ratio <= RATIO_WINDOW
    }

    /// Converged round sphere with ratio within 1% of 1.
    pub fn settles(&self) -> bool {
        self.status == SolveStatus::Converged && (self.final_ratio - 1.0).abs() <= 0.01
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub center: [f64; 3],
    pub runs: Vec<ProbeRun>,
    /// Zero-field runs at the same volumes.
    pub controls: Vec<ProbeRun>,
    /// `max_k |E_k(K, -|t|) - E_k(-K, |t|)| / E_k` over the first volume.
    pub symmetry_deviation: f64,
    pub passed: bool,
}

/// Solves at each (small, negative) volume from a round sphere at `center`,
/// plus the zero-field control and the mirrored problem for `-K` at `|t|`.
pub fn nonexistence_probe(
    mesh: &Arc<SphereMesh>,
    field: &AnisotropyField,
    t_list: &[f64],
    config: &SolverConfig,
    center: Vec3,
) -> Result<ProbeReport> {
    let zero = AnisotropyField::zero();
    let mut runs = Vec::new();
    let mut controls = Vec::new();
    let mut symmetry_deviation = 0.0;
    for (k, &t) in t_list.iter().enumerate() {
        if t >= 0.0 {
            log::warn!("probe volume {t} is not negative");
        }
        let init = init_sphere(mesh, t, center)?;
        let res = minimize_isovolumetric(mesh, field, t, config, Some(init.clone()))?;
        let control = minimize_isovolumetric(mesh, &zero, t, config, Some(init))?;
        if k == 0 {
            let mirrored_init = init_sphere(mesh, -t, center)?;
            let mirrored = minimize_isovolumetric(mesh, &field.negated(), -t, config, Some(mirrored_init))?;
            symmetry_deviation = if mirrored.history.len() != res.history.len() {
                f64::INFINITY
            } else {
                res.history
                    .iter()
                    .zip(&mirrored.history)
                    .map(|(a, b)| (a.energy - b.energy).abs() / a.energy.abs())
                    .fold(0.0, f64::max)
            };
        }
        log::info!(
            "probe t={t:.3e}: {} after {} iterations, min ratio {:.6}",
            res.status,
            res.iterations,
            res.min_energy() / (isoperimetric_constant() * t.abs().powf(2.0 / 3.0))
        );
        runs.push(ProbeRun::from_result(field, &res));
        controls.push(ProbeRun::from_result(&zero, &control));
    }
    let passed = runs.iter().all(ProbeRun::escapes)
        && controls.iter().all(ProbeRun::settles)
        && symmetry_deviation <= 1e-8;
    Ok(ProbeReport {
        center: [center.x, center.y, center.z],
        runs,
        controls,
        symmetry_deviation,
        passed,
    })
}
