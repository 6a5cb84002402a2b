//! Prescribed scalar fields `K` and the radial vector potential `Q_K`.
//!
//! For a field `K` the potential is `Q_K(p) = m_K(p) p` with
//! `m_K(p) = int_0^1 K(s p) s^2 ds`, so that `div Q_K = K`. Both `m_K` and its
//! gradient `int_0^1 grad K(s p) s^3 ds` are evaluated with Gauss-Legendre
//! rules on `[0, 1]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature::GaussLegendre;
use crate::{Error, Mat3, Result, Vec3};

/// Default order for `m_K` and its gradient.
pub const DEFAULT_RADIAL_NODES: usize = 16;

/// A scalar field on R^3 together with its gradient.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn value(&self, p: &Vec3) -> f64;

    fn gradient(&self, p: &Vec3) -> Vec3;

    fn value_and_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        (self.value(p), self.gradient(p))
    }

    /// True when the field vanishes everywhere; lets callers skip quadrature.
    fn is_identically_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
struct Zero;

impl ScalarField for Zero {
    fn value(&self, _: &Vec3) -> f64 {
        0.0
    }
    fn gradient(&self, _: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn is_identically_zero(&self) -> bool {
        true
    }
}

/// `K(p) = -a / (1 + |p - c|^2)`.
#[derive(Debug, Clone, Copy)]
struct Well {
    depth: f64,
    center: Vec3,
}

impl ScalarField for Well {
    fn value(&self, p: &Vec3) -> f64 {
        -self.depth / (1.0 + (p - self.center).norm_squared())
    }
    fn gradient(&self, p: &Vec3) -> Vec3 {
        self.value_and_gradient(p).1
    }
    fn value_and_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        let d = p - self.center;
        let inv = 1.0 / (1.0 + d.norm_squared());
        (-self.depth * inv, d * (2.0 * self.depth * inv * inv))
    }
}

/// `K(p) = -a (p . e) / (1 + |p|^2)^(3/2)`: negative on the half-cone around `e`.
#[derive(Debug, Clone, Copy)]
struct ConeSign {
    amplitude: f64,
    axis: Vec3,
}

impl ScalarField for ConeSign {
    fn value(&self, p: &Vec3) -> f64 {
        -self.amplitude * p.dot(&self.axis) / (1.0 + p.norm_squared()).powf(1.5)
    }
    fn gradient(&self, p: &Vec3) -> Vec3 {
        let q = 1.0 + p.norm_squared();
        let pe = p.dot(&self.axis);
        -self.amplitude * (self.axis / q.powf(1.5) - p * (3.0 * pe / q.powf(2.5)))
    }
}

/// `K(p) = a (|p|^2 - R^2) / (R^2 + |p|^2)^2`: negative inside `B_R(0)`, positive outside.
#[derive(Debug, Clone, Copy)]
struct SignedShell {
    amplitude: f64,
    radius: f64,
}

impl ScalarField for SignedShell {
    fn value(&self, p: &Vec3) -> f64 {
        let q = p.norm_squared();
        let r2 = self.radius * self.radius;
        self.amplitude * (q - r2) / ((r2 + q) * (r2 + q))
    }
    fn gradient(&self, p: &Vec3) -> Vec3 {
        let q = p.norm_squared();
        let r2 = self.radius * self.radius;
        let dk_dq = self.amplitude * (3.0 * r2 - q) / (r2 + q).powi(3);
        p * (2.0 * dk_dq)
    }
}

#[derive(Debug, Clone)]
struct Negated(Arc<dyn ScalarField>);

impl ScalarField for Negated {
    fn value(&self, p: &Vec3) -> f64 {
        -self.0.value(p)
    }
    fn gradient(&self, p: &Vec3) -> Vec3 {
        -self.0.gradient(p)
    }
    fn value_and_gradient(&self, p: &Vec3) -> (f64, Vec3) {
        let (k, g) = self.0.value_and_gradient(p);
        (-k, -g)
    }
    fn is_identically_zero(&self) -> bool {
        self.0.is_identically_zero()
    }
}

/// Field declaration as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub label: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl FieldSpec {
    pub fn new(label: &str) -> Self {
        Self {
            label: label.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// The prescribed field `K` with provenance metadata.
#[derive(Debug, Clone)]
pub struct AnisotropyField {
    inner: Arc<dyn ScalarField>,
    label: String,
    params: BTreeMap<String, f64>,
    claimed_k0: Option<f64>,
}

impl AnisotropyField {
    /// Wraps a user-supplied field.
    pub fn custom(
        inner: Arc<dyn ScalarField>,
        label: &str,
        params: BTreeMap<String, f64>,
        claimed_k0: Option<f64>,
    ) -> Self {
        Self {
            inner,
            label: label.to_string(),
            params,
            claimed_k0,
        }
    }

    pub fn zero() -> Self {
        Self::custom(Arc::new(Zero), "zero", BTreeMap::new(), Some(0.0))
    }

    /// `K(p) = -a / (1 + |p|^2)`; `sup |K(p) p| = a / 2`.
    pub fn radial_well(a: f64) -> Self {
        Self::custom(
            Arc::new(Well {
                depth: a,
                center: Vec3::zeros(),
            }),
            "radial_well",
            BTreeMap::from([("a".to_string(), a)]),
            Some(a.abs() / 2.0),
        )
    }

    /// `K(p) = -a / (1 + |p - center|^2)`.
    pub fn shifted_well(a: f64, center: Vec3) -> Self {
        Self::custom(
            Arc::new(Well { depth: a, center }),
            "shifted_well",
            BTreeMap::from([
                ("a".to_string(), a),
                ("x".to_string(), center.x),
                ("y".to_string(), center.y),
                ("z".to_string(), center.z),
            ]),
            None,
        )
    }

    /// Negative on the open half-cone around `axis`, positive on the opposite one.
    pub fn cone_sign(a: f64, axis: Vec3) -> Self {
        let axis = axis.normalize();
        Self::custom(
            Arc::new(ConeSign { amplitude: a, axis }),
            "cone_sign",
            BTreeMap::from([
                ("a".to_string(), a),
                ("x".to_string(), axis.x),
                ("y".to_string(), axis.y),
                ("z".to_string(), axis.z),
            ]),
            // sup r^2 / (1 + r^2)^(3/2) = 2 / 3^(3/2) at r = sqrt(2)
            Some(a.abs() * 2.0 / 3f64.powf(1.5)),
        )
    }

    /// Negative inside `B_radius(0)` and positive outside.
    pub fn signed_shell(a: f64, radius: f64) -> Self {
        Self::custom(
            Arc::new(SignedShell {
                amplitude: a,
                radius,
            }),
            "signed_shell",
            BTreeMap::from([("a".to_string(), a), ("radius".to_string(), radius)]),
            None,
        )
    }

    /// The field `-K`.
    pub fn negated(&self) -> Self {
        let mut params = self.params.clone();
        let sign = params.get("sign").copied().unwrap_or(1.0);
        params.insert("sign".to_string(), -sign);
        Self {
            inner: Arc::new(Negated(Arc::clone(&self.inner))),
            label: self.label.clone(),
            params,
            claimed_k0: self.claimed_k0,
        }
    }

    /// Builds a builtin field from its config declaration.
    pub fn from_spec(spec: &FieldSpec) -> Result<Self> {
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            spec.params
                .get(key)
                .copied()
                .or(default)
                .ok_or_else(|| Error::Config(format!("field '{}' needs parameter '{key}'", spec.label)))
        };
        let field = match spec.label.as_str() {
            "zero" => Self::zero(),
            "radial_well" => Self::radial_well(get("a", None)?),
            "shifted_well" => Self::shifted_well(
                get("a", None)?,
                Vec3::new(get("x", Some(0.0))?, get("y", Some(0.0))?, get("z", Some(0.0))?),
            ),
            "cone_sign" => {
                let axis = Vec3::new(get("x", Some(0.0))?, get("y", Some(0.0))?, get("z", Some(1.0))?);
                if axis.norm() == 0.0 {
                    return Err(Error::Config("cone_sign axis must be nonzero".into()));
                }
                Self::cone_sign(get("a", None)?, axis)
            }
            "signed_shell" => Self::signed_shell(get("a", None)?, get("radius", Some(1.0))?),
            other => return Err(Error::Config(format!("unknown field label '{other}'"))),
        };
        match spec.params.get("sign") {
            Some(&s) if s < 0.0 => Ok(field.negated()),
            _ => Ok(field),
        }
    }

    pub fn spec(&self) -> FieldSpec {
        FieldSpec {
            label: self.label.clone(),
            params: self.params.clone(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn claimed_k0(&self) -> Option<f64> {
        self.claimed_k0
    }

    pub fn is_zero(&self) -> bool {
        self.inner.is_identically_zero()
    }

    pub fn k(&self, p: &Vec3) -> f64 {
        self.inner.value(p)
    }

    pub fn grad_k(&self, p: &Vec3) -> Vec3 {
        self.inner.gradient(p)
    }

    pub fn k_and_grad(&self, p: &Vec3) -> (f64, Vec3) {
        self.inner.value_and_gradient(p)
    }

    /// `m_K(p) = int_0^1 K(s p) s^2 ds`.
    pub fn m_k(&self, p: &Vec3, rule: &GaussLegendre) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut m = 0.0;
        for_each_radial_node(p.norm(), rule, |s, w| m += w * s * s * self.k(&(p * s)));
        m
    }

    /// `Q_K(p) = m_K(p) p`.
    pub fn q_k(&self, p: &Vec3, rule: &GaussLegendre) -> Vec3 {
        p * self.m_k(p, rule)
    }

    /// `grad m_K(p) = int_0^1 grad K(s p) s^3 ds`.
    pub fn grad_m_k(&self, p: &Vec3, rule: &GaussLegendre) -> Vec3 {
        if self.is_zero() {
            return Vec3::zeros();
        }
        let mut dm = Vec3::zeros();
        for_each_radial_node(p.norm(), rule, |s, w| dm += self.grad_k(&(p * s)) * (w * s * s * s));
        dm
    }

    /// `Q_K(p)` together with its Jacobian `m_K I + p grad m_K^T`.
    pub fn q_k_with_jacobian(&self, p: &Vec3, rule: &GaussLegendre) -> (Vec3, Mat3) {
        if self.is_zero() {
            return (Vec3::zeros(), Mat3::zeros());
        }
        let mut m = 0.0;
        let mut dm = Vec3::zeros();
        for_each_radial_node(p.norm(), rule, |s, w| {
            let (k, g) = self.k_and_grad(&(p * s));
            m += w * s * s * k;
            dm += g * (w * s * s * s);
        });
        (p * m, Mat3::identity() * m + p * dm.transpose())
    }

    pub fn q_k_jacobian(&self, p: &Vec3, rule: &GaussLegendre) -> Mat3 {
        self.q_k_with_jacobian(p, rule).1
    }

    /// `G_0(p) = K(p) p`.
    pub fn g0(&self, p: &Vec3) -> Vec3 {
        p * self.k(p)
    }

    /// `G_1(p) = (grad K(p) . p) p`.
    pub fn g1(&self, p: &Vec3) -> Vec3 {
        p * self.grad_k(p).dot(p)
    }
}

/// Visits the nodes of the composite radial rule for `|p| = radius`.
///
/// `[0, 1]` is split at `1/|p|, 2/|p|, 4/|p|, ...` and `rule` is applied on
/// each panel, so that features of unit size in `p` stay resolved for large
/// `|p|`. A single panel is used for `|p| <= 1`. Panel edges move
/// continuously with `|p|`.
pub fn for_each_radial_node<F: FnMut(f64, f64)>(radius: f64, rule: &GaussLegendre, mut f: F) {
    let mut a = 0.0;
    let mut b = if radius > 1.0 { 1.0 / radius } else { 1.0 };
    loop {
        let h = b - a;
        if h > 0.0 {
            for (x, w) in rule.iter() {
                f(a + h * x, w * h);
            }
        }
        if b >= 1.0 {
            break;
        }
        a = b;
        b = (2.0 * b).min(1.0);
    }
}

/// Sample set for the condition checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    /// Radii of the sampled spheres.
    pub radii: Vec<f64>,
    /// Radii used for the decay check, increasing, the last at least 100.
    pub decay_radii: Vec<f64>,
    /// Deterministic Fibonacci directions per radius.
    pub lattice_directions: usize,
    /// Additional random directions per radius.
    pub random_directions: usize,
    pub seed: u64,
    pub radial_nodes: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            radii: (-60..=60).map(|k| 10f64.powf(k as f64 / 20.0)).collect(),
            decay_radii: (2..=6).map(|k| 10f64.powf(k as f64 / 2.0)).collect(),
            lattice_directions: 64,
            random_directions: 16,
            seed: 7,
            radial_nodes: DEFAULT_RADIAL_NODES,
        }
    }
}

impl SampleSpec {
    pub fn directions(&self) -> Vec<Vec3> {
        let mut dirs = fibonacci_sphere(self.lattice_directions);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random_directions {
            dirs.push(random_unit(&mut rng));
        }
        dirs
    }
}

/// Sampled estimates of the conditions on `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCheckReport {
    pub label: String,
    /// `sup |K(p) p|` over the samples.
    pub k0_estimate: f64,
    /// `sup |Q_K(p)|` over the samples.
    pub q_sup_estimate: f64,
    /// `sup |K|` over the samples.
    pub k_sup_estimate: f64,
    /// `(radius, sup over directions of |K(p) p|)` along the decay radii.
    pub k2_decay: Vec<(f64, f64)>,
    /// `sup |(grad K(p) . p) p|` over the samples.
    pub k3_estimate: f64,
    pub k1_holds: bool,
    pub k2_holds: bool,
    pub k3_holds: bool,
    pub k4_holds: bool,
    /// True when `K <= 0` on every sample.
    pub nonpositive: bool,
    pub sample_count: usize,
    pub sample_spec: SampleSpec,
}

/// `2^(2/3) (2 + k0) < (2 - k0)^2`.
pub fn k4_inequality(k0: f64) -> bool {
    2f64.powf(2.0 / 3.0) * (2.0 + k0) < (2.0 - k0) * (2.0 - k0)
}

/// Estimates the suprema entering the conditions on `K` from samples.
pub fn check_conditions(field: &AnisotropyField, spec: &SampleSpec) -> Result<FieldCheckReport> {
    if spec.decay_radii.last().copied().unwrap_or(0.0) < 100.0 {
        return Err(Error::InvalidArgument(
            "decay radii must reach at least 100".into(),
        ));
    }
    let rule = GaussLegendre::new(spec.radial_nodes)?;
    let dirs = spec.directions();
    let mut k0: f64 = 0.0;
    let mut k3: f64 = 0.0;
    let mut q_sup: f64 = 0.0;
    let mut k_sup: f64 = 0.0;
    let mut nonpositive = true;
    let mut count = 0;
    let mut visit = |p: Vec3| {
        let (k, g) = field.k_and_grad(&p);
        let r = p.norm();
        k0 = k0.max(k.abs() * r);
        k3 = k3.max(g.dot(&p).abs() * r);
        k_sup = k_sup.max(k.abs());
        q_sup = q_sup.max(field.q_k(&p, &rule).norm());
        nonpositive &= k <= 0.0;
        count += 1;
    };
    visit(Vec3::zeros());
    for &r in spec.radii.iter().chain(&spec.decay_radii) {
        for d in &dirs {
            visit(d * r);
        }
    }

    let k2_decay: Vec<(f64, f64)> = spec
        .decay_radii
        .iter()
        .map(|&r| {
            let sup = dirs.iter().map(|d| field.k(&(d * r)).abs() * r).fold(0.0, f64::max);
            (r, sup)
        })
        .collect();
    let first = k2_decay.first().map(|x| x.1).unwrap_or(0.0);
    let last = k2_decay.last().map(|x| x.1).unwrap_or(0.0);
    let k2_holds = k2_decay.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12))
        && (last <= 0.1 * first || last == 0.0);

    Ok(FieldCheckReport {
        label: field.label().to_string(),
        k0_estimate: k0,
        q_sup_estimate: q_sup,
        k_sup_estimate: k_sup,
        k2_decay,
        k3_estimate: k3,
        k1_holds: k0 < 2.0,
        k2_holds,
        k3_holds: k3 < 2.0,
        k4_holds: k4_inequality(k0),
        nonpositive,
        sample_count: count,
        sample_spec: spec.clone(),
    })
}

/// Product rule for integrals over balls and shells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallGrid {
    pub radial: usize,
    pub polar: usize,
    pub azimuthal: usize,
}

impl Default for BallGrid {
    fn default() -> Self {
        Self {
            radial: 32,
            polar: 24,
            azimuthal: 48,
        }
    }
}

impl BallGrid {
    pub fn coarse() -> Self {
        Self {
            radial: 12,
            polar: 10,
            azimuthal: 20,
        }
    }
}

/// `int_{B_radius(center)} K`.
pub fn ball_integral(field: &AnisotropyField, center: &Vec3, radius: f64, grid: &BallGrid) -> Result<f64> {
    shell_integral(field, center, 0.0, radius, grid)
}

/// Integral of `K` over `{inner <= |p - center| <= outer}`.
pub fn shell_integral(
    field: &AnisotropyField,
    center: &Vec3,
    inner: f64,
    outer: f64,
    grid: &BallGrid,
) -> Result<f64> {
    if !(outer > 0.0) || inner < 0.0 || inner >= outer {
        return Err(Error::InvalidArgument(format!(
            "shell radii must satisfy 0 <= {inner} < {outer}"
        )));
    }
    if field.is_zero() {
        return Ok(0.0);
    }
    let radial = GaussLegendre::new(grid.radial)?;
    let polar = GaussLegendre::new(grid.polar)?;
    let dphi = 2.0 * PI / grid.azimuthal as f64;
    let mut total = 0.0;
    for (x, wr) in radial.iter() {
        let r = inner + (outer - inner) * x;
        let mut angular = 0.0;
        for (y, wz) in polar.iter() {
            let cos_t = 2.0 * y - 1.0;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let mut ring = 0.0;
            for k in 0..grid.azimuthal {
                let phi = (k as f64 + 0.5) * dphi;
                let d = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
                ring += field.k(&(center + d * r));
            }
            angular += 2.0 * wz * ring * dphi;
        }
        total += wr * r * r * angular;
    }
    Ok(total * (outer - inner))
}

/// Result of a `t+` / `t-` search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    /// Signed volume threshold; `+-inf` when the largest searched radius qualifies.
    pub t: f64,
    /// Center and radius of the largest qualifying ball.
    pub center: Option<Vec3>,
    pub radius: Option<f64>,
}

/// Default center grid for the sign-ball searches: the origin and a cube lattice.
pub fn default_center_grid() -> Vec<Vec3> {
    let mut centers = vec![Vec3::zeros()];
    let ticks = [-3.0, -1.5, 0.0, 1.5, 3.0];
    for &x in &ticks {
        for &y in &ticks {
            for &z in &ticks {
                if (x, y, z) != (0.0, 0.0, 0.0) {
                    centers.push(Vec3::new(x, y, z));
                }
            }
        }
    }
    centers
}

/// Default radius grid (geometric, 0.02 to 50).
pub fn default_radius_grid() -> Vec<f64> {
    (0..=40).map(|k| 0.02 * 2500f64.powf(k as f64 / 40.0)).collect()
}

fn ball_samples(center: &Vec3, radius: f64) -> Vec<Vec3> {
    let dirs = fibonacci_sphere(64);
    let mut fractions: Vec<f64> = GaussLegendre::new(8)
        .expect("positive order")
        .nodes()
        .to_vec();
    fractions.push(1.0);
    let mut pts = vec![*center];
    for f in fractions {
        pts.extend(dirs.iter().map(|d| center + d * (radius * f)));
    }
    pts
}

fn threshold(field: &AnisotropyField, centers: &[Vec3], radii: &[f64], sign: f64) -> Result<ThresholdEstimate> {
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::InvalidArgument("center and radius grids must be nonempty".into()));
    }
    let r_max = radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<(f64, Vec3)> = None;
    for c in centers {
        for &r in radii {
            if best.is_some_and(|(b, _)| r <= b) {
                continue;
            }
            let values: Vec<f64> = ball_samples(c, r).iter().map(|p| sign * field.k(p)).collect();
            if values.iter().all(|&k| k <= 0.0) && values.iter().any(|&k| k < 0.0) {
                best = Some((r, *c));
            }
        }
    }
    Ok(match best {
        None => ThresholdEstimate {
            t: 0.0,
            center: None,
            radius: None,
        },
        Some((r, c)) => ThresholdEstimate {
            t: if r >= r_max {
                sign * f64::INFINITY
            } else {
                sign * 4.0 * PI * r.powi(3) / 3.0
            },
            center: Some(c),
            radius: Some(r),
        },
    })
}

/// Largest `4 pi r^3 / 3` over searched balls where `K <= 0` and `K` is not identically zero.
pub fn estimate_t_plus(field: &AnisotropyField, centers: &[Vec3], radii: &[f64]) -> Result<ThresholdEstimate> {
    threshold(field, centers, radii, 1.0)
}

/// Mirror of [`estimate_t_plus`] for balls where `K >= 0`; returns a nonpositive value.
pub fn estimate_t_minus(field: &AnisotropyField, centers: &[Vec3], radii: &[f64]) -> Result<ThresholdEstimate> {
    threshold(field, centers, radii, -1.0)
}

/// Center whose round sphere of volume `t` has the lowest anisotropy term.
///
/// For `t > 0` this minimizes `int_B K`, for `t < 0` it maximizes it.
pub fn best_sphere_center(field: &AnisotropyField, t: f64, centers: &[Vec3]) -> Result<Vec3> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("center grid must be nonempty".into()));
    }
    if field.is_zero() {
        return Ok(centers[0]);
    }
    let r = (3.0 * t.abs() / (4.0 * PI)).cbrt();
    let grid = BallGrid::coarse();
    let mut best = (f64::INFINITY, centers[0]);
    for c in centers {
        let q = t.signum() * ball_integral(field, c, r, &grid)?;
        if q < best.0 - 1e-12 * q.abs().max(1.0) {
            best = (q, *c);
        }
    }
    Ok(best.1)
}

/// Quasi-uniform unit vectors on a golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
