//! Discrete functionals on surface maps and their exact gradients.
//!
//! * `D(u) = 1/2 sum_e w_e |u_i - u_j|^2` with reference cotangent weights,
//!   i.e. the Dirichlet energy of the piecewise-linear map on the reference
//!   polyhedron.
//! * `A(u)` is the image area, `V(u) = 1/6 sum_f u_i . (u_j x u_k)` the
//!   algebraic enclosed volume.
//! * `Q_t(u) = sum_f Q_K(t c_f) . N_f` with face centroid `c_f` and area vector
//!   `N_f = (u_j - u_i) x (u_k - u_i) / 2`.
//!
//! Per-triangle `A <= D` holds exactly (AM-GM on the singular values of the
//! affine map), so the discrete chain `S |V|^(2/3) <= A <= D` is inherited from
//! the polyhedral isoperimetric inequality.

use serde::{Deserialize, Serialize};

use crate::field::{AnisotropyField, FieldCheckReport};
use crate::mesh::SurfaceMap;
use crate::quadrature::GaussLegendre;
use crate::{isoperimetric_constant, Result, Vec3};

/// Values of all functionals at one surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub area: f64,
    pub volume: f64,
    pub q_term: f64,
    /// `dirichlet + q_term`.
    pub energy_e: f64,
    /// `area + q_term`.
    pub capillary_f: f64,
    pub conformality_defect: f64,
}

/// Pairwise summation; deterministic and accurate for long face sums.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn face_sum<F: Fn(usize) -> f64>(u: &SurfaceMap, f: F) -> f64 {
    let terms: Vec<f64> = (0..u.mesh().face_count()).map(f).collect();
    pairwise_sum(&terms)
}

pub fn dirichlet(u: &SurfaceMap) -> f64 {
    let x = u.positions();
    let mesh = u.mesh();
    let terms: Vec<f64> = mesh
        .edges()
        .iter()
        .zip(mesh.cotan_weights())
        .map(|(&[i, j], &w)| 0.5 * w * (x[i] - x[j]).norm_squared())
        .collect();
    pairwise_sum(&terms)
}

/// Dirichlet energy of a single face.
pub fn face_dirichlet(u: &SurfaceMap, f: usize) -> f64 {
    let mesh = u.mesh();
    let tri = mesh.faces()[f];
    let reference = mesh.vertices();
    let x = u.positions();
    let mut total = 0.0;
    for k in 0..3 {
        let (i, j, o) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
        let e1 = reference[i] - reference[o];
        let e2 = reference[j] - reference[o];
        let cot = (e1.dot(&e2) / e1.cross(&e2).norm()).clamp(-crate::mesh::COT_CLAMP, crate::mesh::COT_CLAMP);
        total += 0.25 * cot * (x[i] - x[j]).norm_squared();
    }
    total
}

fn area_vector(u: &SurfaceMap, f: usize) -> Vec3 {
    let [a, b, c] = u.triangle(f);
    0.5 * (b - a).cross(&(c - a))
}

pub fn area(u: &SurfaceMap) -> f64 {
    face_sum(u, |f| area_vector(u, f).norm())
}

pub fn volume(u: &SurfaceMap) -> f64 {
    face_sum(u, |f| {
        let [a, b, c] = u.triangle(f);
        a.dot(&b.cross(&c)) / 6.0
    })
}

/// `Q_t(u)`; `scale = 1` gives `Q(u)`.
pub fn q_term(u: &SurfaceMap, field: &AnisotropyField, scale: f64, rule: &GaussLegendre) -> f64 {
    if field.is_zero() {
        return 0.0;
    }
    face_sum(u, |f| {
        let [a, b, c] = u.triangle(f);
        let centroid = (a + b + c) / 3.0;
        field.q_k(&(centroid * scale), rule).dot(&area_vector(u, f))
    })
}

pub fn energy(u: &SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> f64 {
    dirichlet(u) + q_term(u, field, 1.0, rule)
}

/// Cotangent Laplacian applied to the positions.
pub fn grad_dirichlet(u: &SurfaceMap) -> Vec<Vec3> {
    let x = u.positions();
    let mesh = u.mesh();
    let mut g = vec![Vec3::zeros(); x.len()];
    for (&[i, j], &w) in mesh.edges().iter().zip(mesh.cotan_weights()) {
        let d = (x[i] - x[j]) * w;
        g[i] += d;
        g[j] -= d;
    }
    g
}

pub fn grad_volume(u: &SurfaceMap) -> Vec<Vec3> {
    let x = u.positions();
    let mut g = vec![Vec3::zeros(); x.len()];
    for &[i, j, k] in u.mesh().faces() {
        g[i] += x[j].cross(&x[k]) / 6.0;
        g[j] += x[k].cross(&x[i]) / 6.0;
        g[k] += x[i].cross(&x[j]) / 6.0;
    }
    g
}

/// Exact gradient of the centroid-quadrature `Q_t`, together with its value.
pub fn q_term_with_gradient(
    u: &SurfaceMap,
    field: &AnisotropyField,
    scale: f64,
    rule: &GaussLegendre,
) -> (f64, Vec<Vec3>) {
    let x = u.positions();
    let mut g = vec![Vec3::zeros(); x.len()];
    if field.is_zero() {
        return (0.0, g);
    }
    let mut terms = Vec::with_capacity(u.mesh().face_count());
    for &[i, j, k] in u.mesh().faces() {
        let (a, b, c) = (x[i], x[j], x[k]);
        let normal = 0.5 * (b - a).cross(&(c - a));
        let centroid = (a + b + c) / 3.0;
        let (q, jac) = field.q_k_with_jacobian(&(centroid * scale), rule);
        terms.push(q.dot(&normal));
        // through the centroid
        let via_centroid = jac.transpose() * normal * (scale / 3.0);
        // through the area vector: d(q . N)/du_i = (u_j - u_k) x q / 2, cyclic
        g[i] += via_centroid + 0.5 * (b - c).cross(&q);
        g[j] += via_centroid + 0.5 * (c - a).cross(&q);
        g[k] += via_centroid + 0.5 * (a - b).cross(&q);
    }
    (pairwise_sum(&terms), g)
}

pub fn grad_q(u: &SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> Vec<Vec3> {
    q_term_with_gradient(u, field, 1.0, rule).1
}

/// `grad D + grad Q`.
pub fn grad_energy(u: &SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> Vec<Vec3> {
    let mut g = grad_dirichlet(u);
    if !field.is_zero() {
        for (a, b) in g.iter_mut().zip(grad_q(u, field, rule)) {
            *a += b;
        }
    }
    g
}

/// `sum_i a_i . b_i / m_i` with reference dual areas `m_i`.
pub fn lumped_inner(u: &SurfaceMap, a: &[Vec3], b: &[Vec3]) -> f64 {
    let terms: Vec<f64> = a
        .iter()
        .zip(b)
        .zip(u.mesh().dual_areas())
        .map(|((x, y), m)| x.dot(y) / m)
        .collect();
    pairwise_sum(&terms)
}

pub fn lumped_norm(u: &SurfaceMap, a: &[Vec3]) -> f64 {
    lumped_inner(u, a, a).sqrt()
}

/// `|| grad E(u) - lambda grad V(u) ||` in the inverse lumped-mass norm.
pub fn el_residual(u: &SurfaceMap, field: &AnisotropyField, lambda: f64, rule: &GaussLegendre) -> f64 {
    let ge = grad_energy(u, field, rule);
    let gv = grad_volume(u);
    residual_of(u, &ge, &gv, lambda)
}

pub(crate) fn residual_of(u: &SurfaceMap, ge: &[Vec3], gv: &[Vec3], lambda: f64) -> f64 {
    let r: Vec<Vec3> = ge.iter().zip(gv).map(|(e, v)| e - v * lambda).collect();
    lumped_norm(u, &r)
}

/// [`el_residual`] divided by `|| grad E ||`; zero when the gradient vanishes.
pub fn relative_residual(u: &SurfaceMap, field: &AnisotropyField, lambda: f64, rule: &GaussLegendre) -> f64 {
    let ge = grad_energy(u, field, rule);
    let gv = grad_volume(u);
    let scale = lumped_norm(u, &ge);
    if scale == 0.0 {
        0.0
    } else {
        residual_of(u, &ge, &gv, lambda) / scale
    }
}

/// `(D - A) / D`: zero exactly when every triangle is mapped conformally.
///
/// Per triangle `D_T - A_T = a_T (s1 - s2)^2 / 2` with `s1, s2` the singular
/// values of the affine map, so this is a reference-area-weighted aggregate of
/// the deviation from conformality, normalized to be scale invariant.
pub fn conformality_defect(u: &SurfaceMap) -> f64 {
    let d = dirichlet(u);
    if d == 0.0 {
        0.0
    } else {
        ((d - area(u)) / d).max(0.0)
    }
}

pub fn breakdown(u: &SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> EnergyBreakdown {
    let dirichlet = dirichlet(u);
    let area = area(u);
    let q = q_term(u, field, 1.0, rule);
    EnergyBreakdown {
        dirichlet,
        area,
        volume: volume(u),
        q_term: q,
        energy_e: dirichlet + q,
        capillary_f: area + q,
        conformality_defect: if dirichlet == 0.0 { 0.0 } else { ((dirichlet - area) / dirichlet).max(0.0) },
    }
}

/// `d/ds Q(s u) = s^2 sum_f K(s c_f) c_f . N_f`.
pub fn radial_q_derivative(u: &SurfaceMap, field: &AnisotropyField, s: f64) -> f64 {
    if field.is_zero() || s == 0.0 {
        return 0.0;
    }
    let sum = face_sum(u, |f| {
        let [a, b, c] = u.triangle(f);
        let centroid = (a + b + c) / 3.0;
        field.k(&(centroid * s)) * centroid.dot(&area_vector(u, f))
    });
    s * s * sum
}

/// Both sides of the two anisotropy estimates at one surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `|Q_t(u)|`.
    pub q_scaled: f64,
    /// `||K_t||_inf D(u)^(3/2) / S^(3/2)` with `||K_t||_inf = |t| sup |K|`.
    pub steffen_bound: f64,
    pub steffen_slack: f64,
    /// `|Q(u)|`.
    pub q_plain: f64,
    /// `||Q_K||_inf D(u)`.
    pub potential_bound: f64,
    pub potential_slack: f64,
    pub holds: bool,
}

/// Evaluates `|Q_t(u)| <= ||K_t|| D^(3/2) / S^(3/2)` and `|Q(u)| <= ||Q_K|| D`,
/// with the suprema taken from a sampled field report.
pub fn steffen_bound_check(
    u: &SurfaceMap,
    field: &AnisotropyField,
    t: f64,
    sup: &FieldCheckReport,
    rule: &GaussLegendre,
) -> Result<BoundCheck> {
    let d = dirichlet(u);
    let s = isoperimetric_constant();
    let q_scaled = q_term(u, field, t, rule).abs();
    let steffen_bound = t.abs() * sup.k_sup_estimate * d.powf(1.5) / s.powf(1.5);
    let q_plain = q_term(u, field, 1.0, rule).abs();
    let potential_bound = sup.q_sup_estimate * d;
    let tol = |x: f64| 1e-9 * (1.0 + x.abs());
    let steffen_slack = steffen_bound - q_scaled;
    let potential_slack = potential_bound - q_plain;
    Ok(BoundCheck {
        q_scaled,
        steffen_bound,
        steffen_slack,
        q_plain,
        potential_bound,
        potential_slack,
        holds: steffen_slack >= -tol(steffen_bound) && potential_slack >= -tol(potential_bound),
    })
}

/// Per-face values for diagnostics output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceDiagnostic {
    pub face: usize,
    pub area: f64,
    pub dirichlet: f64,
    pub q_term: f64,
    pub defect: f64,
}

pub fn face_diagnostics(u: &SurfaceMap, field: &AnisotropyField, rule: &GaussLegendre) -> Vec<FaceDiagnostic> {
    (0..u.mesh().face_count())
        .map(|f| {
            let [a, b, c] = u.triangle(f);
            let n = area_vector(u, f);
            let d = face_dirichlet(u, f);
            let q = field.q_k(&((a + b + c) / 3.0), rule).dot(&n);
            FaceDiagnostic {
                face: f,
                area: n.norm(),
                dirichlet: d,
                q_term: q,
                defect: if d > 0.0 { (d - n.norm()) / d } else { 0.0 },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SampleSpec;
    use crate::mesh::{build_icosphere, init_sphere, SphereMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn mesh(level: u32) -> Arc<SphereMesh> {
        Arc::new(build_icosphere(level).unwrap())
    }

    fn rule() -> GaussLegendre {
        GaussLegendre::new(16).unwrap()
    }

    fn bumpy(m: &Arc<SphereMesh>, seed: u64) -> SurfaceMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (rng.gen_range(0.7..1.5), rng.gen_range(0.7..1.5), rng.gen_range(0.7..1.5));
        let shift = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let amp = rng.gen_range(0.0..0.15);
        SurfaceMap::identity(Arc::clone(m)).map_positions(|p| {
            let bump = 1.0 + amp * (3.0 * p.x).sin() * (2.0 * p.y).cos();
            Vec3::new(a * p.x, b * p.y, c * p.z) * bump + shift
        })
    }

    fn random_direction(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn directional_fd<F: Fn(&SurfaceMap) -> f64>(u: &SurfaceMap, dir: &[Vec3], h: f64, f: F) -> f64 {
        let plus = SurfaceMap::new(
            u.mesh_arc().clone(),
            u.positions().iter().zip(dir).map(|(p, d)| p + d * h).collect(),
        )
        .unwrap();
        let minus = SurfaceMap::new(
            u.mesh_arc().clone(),
            u.positions().iter().zip(dir).map(|(p, d)| p - d * h).collect(),
        )
        .unwrap();
        (f(&plus) - f(&minus)) / (2.0 * h)
    }

    fn dot(a: &[Vec3], b: &[Vec3]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
    }

    #[test]
    fn constant_map_is_trivial() {
        let u = SurfaceMap::constant(mesh(2), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(dirichlet(&u), 0.0);
        assert_eq!(area(&u), 0.0);
        assert!(grad_dirichlet(&u).iter().all(|g| g.norm() == 0.0));
        let f = AnisotropyField::radial_well(0.5);
        assert_eq!(el_residual(&u, &f, 3.0, &rule()), 0.0);
    }

    #[test]
    fn unit_sphere_closed_forms() {
        let u = SurfaceMap::identity(mesh(5));
        let target = 4.0 * PI;
        assert!((dirichlet(&u) - target).abs() / target < 1e-3);
        assert!((area(&u) - target).abs() / target < 1e-3);
        assert!((volume(&u) - 4.0 * PI / 3.0).abs() / (4.0 * PI / 3.0) < 1e-3);
    }

    #[test]
    fn icosahedron_volume_matches_polyhedron_formula() {
        let u = SurfaceMap::identity(mesh(0));
        let edge = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        let want = 5.0 / 12.0 * (3.0 + 5f64.sqrt()) * edge.powi(3);
        assert!((edge - 1.0514622).abs() < 1e-6);
        assert!((volume(&u) - want).abs() < 1e-13);
    }

    #[test]
    fn scaling_and_translation_laws() {
        let m = mesh(3);
        for seed in 0..5 {
            let u = bumpy(&m, seed);
            let (d, v) = (dirichlet(&u), volume(&u));
            let t = 1.7;
            assert!((dirichlet(&u.scaled(t)) - t * t * d).abs() < 1e-12 * d * t * t);
            assert!((volume(&u.scaled(t)) - t.powi(3) * v).abs() < 1e-12 * (v * t.powi(3)).abs());
            let shift = Vec3::new(3.0, -2.0, 5.0);
            assert!((volume(&u.translated(&shift)) - v).abs() < 1e-12 * v.abs());
            assert!((dirichlet(&u.translated(&shift)) - d).abs() < 1e-12 * d);
        }
    }

    #[test]
    fn area_never_exceeds_dirichlet() {
        let m = mesh(3);
        for seed in 0..20 {
            let u = bumpy(&m, seed);
            assert!(area(&u) <= dirichlet(&u) + 1e-12);
            for f in 0..m.face_count() {
                assert!(area_vector(&u, f).norm() <= face_dirichlet(&u, f) + 1e-14);
            }
        }
    }

    #[test]
    fn face_dirichlet_sums_to_total() {
        let u = bumpy(&mesh(2), 3);
        let total: f64 = (0..u.mesh().face_count()).map(|f| face_dirichlet(&u, f)).sum();
        assert!((total - dirichlet(&u)).abs() < 1e-12 * total);
    }

    #[test]
    fn volume_is_q_term_of_linear_potential() {
        // K = 1 gives m_K = 1/3, so Q(u) = V(u) exactly
        let one = AnisotropyField::custom(
            std::sync::Arc::new(ConstantField(1.0)),
            "one",
            Default::default(),
            None,
        );
        let u = bumpy(&mesh(2), 7);
        assert!((q_term(&u, &one, 1.0, &rule()) - volume(&u)).abs() < 1e-13);
    }

    #[derive(Debug)]
    struct ConstantField(f64);

    impl crate::field::ScalarField for ConstantField {
        fn value(&self, _: &Vec3) -> f64 {
            self.0
        }
        fn gradient(&self, _: &Vec3) -> Vec3 {
            Vec3::zeros()
        }
    }

    #[test]
    fn q_term_of_sphere_is_ball_integral() {
        let f = AnisotropyField::radial_well(0.5);
        let u = SurfaceMap::identity(mesh(5));
        let closed = -4.0 * PI * 0.5 * (1.0 - PI / 4.0);
        let q = q_term(&u, &f, 1.0, &rule());
        assert!(((q - closed) / closed).abs() < 1e-3, "{q} vs {closed}");
        let q_in = q_term(&crate::mesh::flip_orientation(&u), &f, 1.0, &rule());
        assert!((q_in + q).abs() < 1e-12);
    }

    #[test]
    fn scaled_q_identity() {
        let f = AnisotropyField::shifted_well(0.6, Vec3::new(0.2, 0.1, -0.3));
        let u = bumpy(&mesh(3), 1);
        for t in [0.3, 1.0, 2.5] {
            let lhs = q_term(&u.scaled(t), &f, 1.0, &rule());
            let rhs = t * t * q_term(&u, &f, t, &rule());
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = mesh(2);
        let f = AnisotropyField::shifted_well(0.5, Vec3::new(0.3, -0.2, 0.1));
        let r = rule();
        for seed in 0..4 {
            let u = bumpy(&m, seed);
            let dir = random_direction(m.vertex_count(), 100 + seed);
            let h = 1e-5;
            let checks: [(Vec<Vec3>, Box<dyn Fn(&SurfaceMap) -> f64>); 3] = [
                (grad_dirichlet(&u), Box::new(dirichlet)),
                (grad_volume(&u), Box::new(volume)),
                (grad_q(&u, &f, &r), Box::new(|v: &SurfaceMap| q_term(v, &f, 1.0, &r))),
            ];
            for (k, (g, func)) in checks.iter().enumerate() {
                let analytic = dot(g, &dir);
                let fd = directional_fd(&u, &dir, h, func);
                let err = (analytic - fd).abs() / analytic.abs().max(1e-8);
                assert!(err < 1e-6, "gradient {k}, seed {seed}: {analytic} vs {fd} ({err})");
            }
        }
    }

    #[test]
    fn euler_identity_for_volume() {
        let u = bumpy(&mesh(3), 4);
        let g = grad_volume(&u);
        assert!((dot(&g, u.positions()) - 3.0 * volume(&u)).abs() < 1e-12 * volume(&u).abs());
    }

    #[test]
    fn radial_derivative_matches_finite_differences() {
        let f = AnisotropyField::shifted_well(0.5, Vec3::new(0.3, 0.0, -0.4));
        let r = rule();
        let u = bumpy(&mesh(3), 2);
        for s in [0.5, 1.0, 2.0] {
            let h = 1e-5;
            let fd = (q_term(&u.scaled(s + h), &f, 1.0, &r) - q_term(&u.scaled(s - h), &f, 1.0, &r)) / (2.0 * h);
            let got = radial_q_derivative(&u, &f, s);
            assert!((got - fd).abs() / got.abs() < 1e-6, "s={s}: {got} vs {fd}");
        }
        assert_eq!(radial_q_derivative(&u, &AnisotropyField::zero(), 1.0), 0.0);
        assert_eq!(radial_q_derivative(&u, &f, 0.0), 0.0);
    }

    #[test]
    fn residual_vanishes_for_round_spheres_as_mesh_refines() {
        let r = rule();
        let zero = AnisotropyField::zero();
        let mut prev = f64::INFINITY;
        for level in 2..=5 {
            let u = init_sphere(&mesh(level), 8.0 * PI / 3.0 * 8.0 / 8.0, Vec3::zeros()).unwrap();
            let radius = (2.0f64).cbrt();
            let res = relative_residual(&u, &zero, 2.0 / radius, &r);
            assert!(res < prev, "level {level}: {res} >= {prev}");
            prev = res;
        }
        assert!(prev < 1e-2, "{prev}");
    }

    #[test]
    fn residual_is_affine_in_lambda() {
        let r = rule();
        let f = AnisotropyField::radial_well(0.5);
        let u = init_sphere(&mesh(3), 2.0, Vec3::zeros()).unwrap();
        let gv = grad_volume(&u);
        let gv_norm = lumped_norm(&u, &gv);
        let best = el_residual(&u, &f, 1.7, &r);
        for dl in [0.1, 0.5, 2.0] {
            let worse = el_residual(&u, &f, 1.7 + dl, &r);
            assert!(worse >= dl * gv_norm - best - 1e-12);
        }
    }

    #[test]
    fn conformality_defect_examples() {
        let m = mesh(5);
        let id = SurfaceMap::identity(Arc::clone(&m));
        let floor = conformality_defect(&id);
        assert!(floor <= 1e-2);
        let stretched = id.map_positions(|p| Vec3::new(2.0 * p.x, p.y, p.z));
        let d = conformality_defect(&stretched);
        assert!(d > 0.0 && d > 10.0 * floor);
        assert!((conformality_defect(&stretched.scaled(3.0)) - d).abs() < 1e-12);
    }

    #[test]
    fn steffen_and_potential_bounds_hold() {
        let f = AnisotropyField::radial_well(0.5);
        let report = crate::field::check_conditions(&f, &SampleSpec::default()).unwrap();
        let m = mesh(3);
        for seed in 0..10 {
            let u = bumpy(&m, seed);
            for t in [0.1, 1.0, 10.0] {
                let check = steffen_bound_check(&u, &f, t, &report, &rule()).unwrap();
                assert!(check.holds && check.steffen_slack > 0.0, "{check:?}");
            }
        }
        let zero = AnisotropyField::zero();
        let zr = crate::field::check_conditions(&zero, &SampleSpec::default()).unwrap();
        let check = steffen_bound_check(&bumpy(&m, 0), &zero, 1.0, &zr, &rule()).unwrap();
        assert!(check.holds && check.q_scaled == 0.0);
    }

    #[test]
    fn breakdown_is_consistent() {
        let f = AnisotropyField::radial_well(0.5);
        let u = bumpy(&mesh(3), 9);
        let b = breakdown(&u, &f, &rule());
        assert_eq!(b.energy_e, b.dirichlet + b.q_term);
        assert_eq!(b.capillary_f, b.area + b.q_term);
        assert!(b.area <= b.dirichlet && b.capillary_f <= b.energy_e);
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<EnergyBreakdown>(&json).unwrap(), b);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }
}
