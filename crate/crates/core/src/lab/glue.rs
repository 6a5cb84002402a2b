//! Concavity of the energy along the volume exchange between two bubbles.
//!
//! The bubbles live on separate meshes; energy and volume of the pair are
//! the sums over both. For `s in [0, 1 + t2/t1]` the pair
//! `v^s = (cbrt(s) u1, cbrt((1 - s) tau + 1) u2)` with `tau = t1/t2` has
//! volume `t1 + t2`.

use serde::{Deserialize, Serialize};

use crate::field::AnisotropyField;
use crate::functionals::{energy, volume};
use crate::mesh::SurfaceMap;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingReport {
    pub t1: f64,
    pub t2: f64,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    /// Pair volume at each grid point.
    pub volume: Vec<f64>,
    /// `(f(s+h) - 2 f(s) + f(s-h)) / h^2` at interior nodes.
    pub second_differences: Vec<f64>,
    /// `c = -max second difference`; concavity holds when positive.
    pub c: f64,
    pub max_volume_error: f64,
    /// Slopes of the first and last grid intervals.
    pub first_slope: f64,
    pub last_slope: f64,
    /// First slope is the largest and last slope the smallest over the grid.
    pub endpoint_slopes_extreme: bool,
}

impl GluingReport {
    pub fn concave(&self) -> bool {
        self.c > 0.0
    }
}

/// `n` equally spaced points on `[0, 1 + t2/t1]`.
pub fn default_s_grid(t1: f64, t2: f64, n: usize) -> Vec<f64> {
    let end = 1.0 + t2 / t1;
    (0..n).map(|k| end * k as f64 / (n - 1) as f64).collect()
}

/// Scale factors of the two bubbles at `s`.
pub fn gluing_scales(s: f64, t1: f64, t2: f64) -> (f64, f64) {
    let tau = t1 / t2;
    (s.max(0.0).cbrt(), ((1.0 - s) * tau + 1.0).max(0.0).cbrt())
}

pub fn gluing_concavity(
    field: &AnisotropyField,
    u1: &SurfaceMap,
    u2: &SurfaceMap,
    s_grid: &[f64],
    rule: &GaussLegendre,
) -> Result<GluingReport> {
    let (t1, t2) = (volume(u1), volume(u2));
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gluing needs positive volumes, got {t1} and {t2}"
        )));
    }
    if s_grid.len() < 3 {
        return Err(Error::InvalidArgument("gluing grid needs at least 3 points".into()));
    }
    let h = s_grid[1] - s_grid[0];
    let uniform = s_grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0));
    if !(h > 0.0) || !uniform {
        return Err(Error::InvalidArgument("gluing grid must be increasing and uniform".into()));
    }
    let end = 1.0 + t2 / t1;
    if s_grid[0] < -1e-12 || s_grid[s_grid.len() - 1] > end * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("gluing grid must lie in [0, {end}]")));
    }
    let mut f = Vec::with_capacity(s_grid.len());
    let mut vols = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let (a, b) = gluing_scales(s, t1, t2);
        let (v1, v2) = (u1.scaled(a), u2.scaled(b));
        f.push(energy(&v1, field, rule) + energy(&v2, field, rule));
        vols.push(volume(&v1) + volume(&v2));
    }
    let second: Vec<f64> = f.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) / (h * h)).collect();
    let c = -second.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slopes: Vec<f64> = f.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let first_slope = slopes[0];
    let last_slope = slopes[slopes.len() - 1];
    let endpoint_slopes_extreme = first_slope > 0.0
        && last_slope < 0.0
        && slopes.iter().all(|&d| d <= first_slope && d >= last_slope);
    let max_volume_error = vols
        .iter()
        .map(|v| (v - (t1 + t2)).abs() / (t1 + t2))
        .fold(0.0, f64::max);
    Ok(GluingReport {
        t1,
        t2,
        s: s_grid.to_vec(),
        f,
        volume: vols,
        second_differences: second,
        c,
        max_volume_error,
        first_slope,
        last_slope,
        endpoint_slopes_extreme,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosphere, init_sphere};
    use crate::functionals::dirichlet;
    use crate::Vec3;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn zero_field_matches_closed_form() {
        let m = Arc::new(build_icosphere(3).unwrap());
        let t = 4.0 * PI / 3.0;
        let u1 = init_sphere(&m, t, Vec3::zeros()).unwrap();
        let u2 = init_sphere(&m, t, Vec3::new(5.0, 0.0, 0.0)).unwrap();
        let (t1, t2) = (volume(&u1), volume(&u2));
        let grid = default_s_grid(t1, t2, 41);
        let rule = GaussLegendre::new(16).unwrap();
        let rep = gluing_concavity(&AnisotropyField::zero(), &u1, &u2, &grid, &rule).unwrap();
        let (d1, d2) = (dirichlet(&u1), dirichlet(&u2));
        for (s, f) in rep.s.iter().zip(&rep.f) {
            let (a, b) = (s.cbrt(), ((1.0 - s) * t1 / t2 + 1.0).max(0.0).cbrt());
            let want = d1 * a * a + d2 * b * b;
            assert!((f - want).abs() < 1e-12 * want.max(1.0), "s={s} f={f} want={want}");
        }
        assert!(rep.second_differences.iter().all(|&d| d < 0.0));
        assert!(rep.concave() && rep.endpoint_slopes_extreme);
        assert!(rep.max_volume_error < 1e-12);
    }

    #[test]
    fn scales_preserve_total_volume() {
        let (t1, t2) = (0.7, 2.3);
        for s in default_s_grid(t1, t2, 11) {
            let (a, b) = gluing_scales(s, t1, t2);
            let v = a.powi(3) * t1 + b.powi(3) * t2;
            assert!((v - (t1 + t2)).abs() < 1e-12 * (t1 + t2));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = Arc::new(build_icosphere(1).unwrap());
        let rule = GaussLegendre::new(16).unwrap();
        let u = init_sphere(&m, 1.0, Vec3::zeros()).unwrap();
        let neg = init_sphere(&m, -1.0, Vec3::zeros()).unwrap();
        let z = AnisotropyField::zero();
        assert!(gluing_concavity(&z, &u, &neg, &default_s_grid(1.0, 1.0, 5), &rule).is_err());
        assert!(gluing_concavity(&z, &u, &u, &[0.0, 1.0], &rule).is_err());
        assert!(gluing_concavity(&z, &u, &u, &[0.0, 0.5, 1.7], &rule).is_err());
        assert!(gluing_concavity(&z, &u, &u, &[0.0, 1.5, 3.0], &rule).is_err());
    }
}
