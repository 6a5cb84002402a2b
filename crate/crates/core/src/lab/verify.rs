//! The invariant suite behind `capillarity verify`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{check_conditions, AnisotropyField, SampleSpec};
use crate::functionals::{
    area, dirichlet, grad_dirichlet, grad_q, grad_volume, q_term, radial_q_derivative,
    steffen_bound_check, volume,
};
use crate::lab::glue::{default_s_grid, gluing_concavity, GluingReport};
use crate::lab::io::{GlueSettings, ProbeSettings, RunConfig, ScanSettings};
use crate::lab::probe::{nonexistence_probe, ProbeReport};
use crate::lab::ratio::{refine_ratio, RatioResult};
use crate::lab::scan::{default_pairs, derivative_identity_check, log_grid, scan_with_results, subadditivity_check, ScanTable};
use crate::mesh::{build_icosphere, init_sphere, SphereMesh, SurfaceMap};
use crate::quadrature::GaussLegendre;
use crate::solver::{minimize_isovolumetric, multiplier_bounds, SolveStatus, SolverConfig};
use crate::{isoperimetric_constant, Result, Vec3, UNIT_BALL_VOLUME};

/// Well depth used by the existence-regime criteria.
pub const WELL_DEPTH: f64 = 0.5;

/// Volumes far outside the scan grid for the limits of the normalized function.
pub const EXTENDED_ENDS: [f64; 2] = [1e-3, 1e5];

/// `E / t^(2/3)` of the round sphere of volume `t` centered at the origin.
pub fn sphere_trial_normalized(mesh: &Arc<SphereMesh>, field: &AnisotropyField, t: f64, rule: &GaussLegendre) -> Result<f64> {
    let u = init_sphere(mesh, t, Vec3::zeros())?;
    Ok(crate::functionals::energy(&u, field, rule) / t.abs().powf(2.0 / 3.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    /// Criterion number; extra checks use 0.
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let tag = if self.id == 0 { "extra".to_string() } else { format!("{:>2}", self.id) };
        format!(
            "[{}] {tag} {:<34} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: u32,
    pub criteria: Vec<CriterionResult>,
    pub total_seconds: f64,
    /// All numbered criteria passed.
    pub passed: bool,
    pub extras_passed: bool,
}

/// Outputs kept for files and plots.
#[derive(Debug, Default)]
pub struct VerifyArtifacts {
    pub scan: Option<ScanTable>,
    pub ratio: Option<RatioResult>,
    pub gluing: Option<GluingReport>,
    pub probe: Option<ProbeReport>,
    pub existence_surface: Option<SurfaceMap>,
}

#[derive(Debug, Clone)]
pub struct VerifySettings {
    pub level: u32,
    pub solver: SolverConfig,
    pub scan: ScanSettings,
    pub probe: ProbeSettings,
    pub glue: GlueSettings,
    pub seed: u64,
}

impl From<&RunConfig> for VerifySettings {
    fn from(cfg: &RunConfig) -> Self {
        Self {
            level: cfg.level,
            solver: cfg.solver.clone(),
            scan: cfg.scan.clone(),
            probe: cfg.probe.clone(),
            glue: cfg.glue.clone(),
            seed: cfg.solver.seed,
        }
    }
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self::from(&RunConfig::default())
    }
}

fn timed<F: FnOnce() -> Result<(bool, String)>>(id: u32, name: &str, f: F) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    let out = CriterionResult {
        id,
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    };
    log::info!("{}", out.line());
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Random closed surfaces on `mesh`: vertex noise, rotated ellipsoids and bumpy spheres.
pub fn random_surface(mesh: &Arc<SphereMesh>, rng: &mut ChaCha8Rng, kind: usize) -> SurfaceMap {
    let id = SurfaceMap::identity(Arc::clone(mesh));
    let shift = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let scale = rng.gen_range(0.2..3.0);
    match kind % 3 {
        0 => {
            let edge = (4.0 * PI / mesh.face_count() as f64).sqrt();
            let amp = rng.gen_range(0.0..0.3) * edge;
            let noise: Vec<Vec3> = (0..mesh.vertex_count())
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp)
                .collect();
            let positions = id
                .positions()
                .iter()
                .zip(noise)
                .map(|(p, n)| (p + n) * scale + shift)
                .collect();
            SurfaceMap::new(Arc::clone(mesh), positions).expect("finite positions")
        }
        1 => {
            let axes = Vec3::new(rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0));
            let rot = nalgebra::Rotation3::from_euler_angles(
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..PI),
            );
            id.map_positions(|p| rot * p.component_mul(&axes) * scale + shift)
        }
        _ => {
            let (k1, k2, k3) = (rng.gen_range(1..5) as f64, rng.gen_range(1..5) as f64, rng.gen_range(1..5) as f64);
            let amp = rng.gen_range(0.0..0.25);
            let phase = rng.gen_range(0.0..2.0 * PI);
            id.map_positions(|p| {
                let bump = 1.0 + amp * (k1 * p.x + phase).sin() * (k2 * p.y).cos() * (k3 * p.z + 0.5).cos();
                p * (bump * scale) + shift
            })
        }
    }
}

fn criterion_sphere_closed_forms() -> Result<(bool, String)> {
    let mut errs = Vec::new();
    for level in 3..=6 {
        let u = SurfaceMap::identity(Arc::new(build_icosphere(level)?));
        errs.push((
            level,
            rel(dirichlet(&u), 4.0 * PI),
            rel(area(&u), 4.0 * PI),
            rel(volume(&u).abs(), UNIT_BALL_VOLUME),
        ));
    }
    let at5 = errs.iter().find(|e| e.0 == 5).copied().expect("level 5 present");
    let within = at5.1 < 1e-3 && at5.2 < 1e-3 && at5.3 < 1e-3;
    let ratios: Vec<f64> = errs.windows(2).flat_map(|w| [w[0].1 / w[1].1, w[0].3 / w[1].3]).collect();
    let fourfold = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    Ok((
        within && fourfold,
        format!(
            "level 5 rel err D {:.2e} A {:.2e} |V| {:.2e}; per-level ratios {}",
            at5.1,
            at5.2,
            at5.3,
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(" ")
        ),
    ))
}

fn criterion_isoperimetric(mesh: &Arc<SphereMesh>, seed: u64) -> Result<(bool, String)> {
    let s = isoperimetric_constant();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut failures = 0;
    for k in 0..200 {
        let u = random_surface(mesh, &mut rng, k);
        let (v, a, d) = (volume(&u), area(&u), dirichlet(&u));
        let lhs = s * v.abs().powf(2.0 / 3.0);
        if !(lhs <= a * 1.005 && a * 1.005 <= d * 1.005) {
            failures += 1;
        }
        worst = worst.max(lhs / a).max(a / d);
    }
    Ok((failures == 0, format!("200 surfaces, {failures} violations, max ratio {worst:.6}")))
}

fn directional(u: &SurfaceMap, dir: &[Vec3], h: f64, f: &dyn Fn(&SurfaceMap) -> f64) -> Result<f64> {
    let plus = SurfaceMap::new(u.mesh_arc().clone(), u.positions().iter().zip(dir).map(|(p, d)| p + d * h).collect())?;
    let minus = SurfaceMap::new(u.mesh_arc().clone(), u.positions().iter().zip(dir).map(|(p, d)| p - d * h).collect())?;
    Ok((f(&plus) - f(&minus)) / (2.0 * h))
}

fn criterion_gradients(seed: u64) -> Result<(bool, String)> {
    let mesh = Arc::new(build_icosphere(3)?);
    let field = AnisotropyField::shifted_well(WELL_DEPTH, Vec3::new(0.3, -0.2, 0.4));
    let rule = GaussLegendre::new(16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let u = random_surface(&mesh, &mut rng, k).map_positions(|p| p * 0.5);
        let dir: Vec<Vec3> = (0..mesh.vertex_count())
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let dot = |g: Vec<Vec3>| -> f64 { g.iter().zip(&dir).map(|(a, b)| a.dot(b)).sum() };
        let checks: [(f64, &dyn Fn(&SurfaceMap) -> f64); 3] = [
            (dot(grad_dirichlet(&u)), &dirichlet),
            (dot(grad_volume(&u)), &volume),
            (dot(grad_q(&u, &field, &rule)), &|v: &SurfaceMap| q_term(v, &field, 1.0, &rule)),
        ];
        for (analytic, f) in checks {
            let fd = directional(&u, &dir, 1e-5, f)?;
            worst = worst.max((analytic - fd).abs() / analytic.abs());
        }
    }
    let mut radial_worst: f64 = 0.0;
    let u = random_surface(&mesh, &mut rng, 2);
    for s in [0.5, 1.0, 2.0] {
        let h = 1e-5;
        let fd = (q_term(&u.scaled(s + h), &field, 1.0, &rule) - q_term(&u.scaled(s - h), &field, 1.0, &rule)) / (2.0 * h);
        radial_worst = radial_worst.max(rel(radial_q_derivative(&u, &field, s), fd));
    }
    Ok((
        worst <= 1e-6 && radial_worst <= 1e-6,
        format!("20 pairs, max rel err {worst:.2e}; radial identity {radial_worst:.2e}"),
    ))
}

fn criterion_construction(mesh5: &Arc<SphereMesh>, seed: u64) -> Result<(bool, String)> {
    let rule = GaussLegendre::new(16)?;
    let fields = [
        AnisotropyField::radial_well(WELL_DEPTH),
        AnisotropyField::shifted_well(WELL_DEPTH, Vec3::new(1.0, -0.5, 0.25)),
        AnisotropyField::cone_sign(WELL_DEPTH, Vec3::new(0.0, 0.6, 0.8)),
        AnisotropyField::signed_shell(WELL_DEPTH, 1.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace_err: f64 = 0.0;
    for f in &fields {
        for _ in 0..200 {
            let p = crate::field::random_unit(&mut rng) * rng.gen_range(0.0..10.0);
            trace_err = trace_err.max((f.q_k_jacobian(&p, &rule).trace() - f.k(&p)).abs());
        }
    }
    let report = check_conditions(&fields[0], &SampleSpec::default())?;
    let bound_ok = report.q_sup_estimate <= report.k0_estimate / 2.0 * (1.0 + 1e-12);
    let u = SurfaceMap::identity(Arc::clone(mesh5));
    let q = q_term(&u, &fields[0], 1.0, &rule);
    let closed = -4.0 * PI * WELL_DEPTH * (1.0 - PI / 4.0);
    let q_err = rel(q.abs(), closed.abs());
    Ok((
        trace_err <= 1e-9 && bound_ok && q_err <= 1e-3,
        format!(
            "trace err {trace_err:.2e}; sup|Q_K| {:.5} <= k0/2 {:.5}; |Q(sphere)| {:.5} vs {:.5} (rel {q_err:.2e})",
            report.q_sup_estimate,
            report.k0_estimate / 2.0,
            q.abs(),
            closed.abs()
        ),
    ))
}

/// Deformed start for the zero-field solves.
fn ellipsoidal_start(mesh: &Arc<SphereMesh>, t: f64) -> Result<SurfaceMap> {
    init_sphere(mesh, t, Vec3::zeros())?
        .map_positions(|p| Vec3::new(1.3 * p.x, p.y, 0.8 * p.z + 0.1 * p.x * p.y))
        .rescaled_to_volume(t)
}

fn criterion_zero_field(mesh: &Arc<SphereMesh>, config: &SolverConfig) -> Result<(bool, String)> {
    let s = isoperimetric_constant();
    let zero = AnisotropyField::zero();
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [0.5, UNIT_BALL_VOLUME, 10.0] {
        let start = Instant::now();
        let res = minimize_isovolumetric(mesh, &zero, t, config, Some(ellipsoidal_start(mesh, t)?))?;
        let e_err = rel(res.energy(), s * t.powf(2.0 / 3.0));
        let l_err = rel(res.lambda, 2.0 / 3.0 * s * t.powf(-1.0 / 3.0));
        let defect = res.breakdown.conformality_defect;
        let secs = start.elapsed().as_secs_f64();
        ok &= res.status == SolveStatus::Converged && e_err <= 0.01 && l_err <= 0.1 && defect <= 1e-2 && secs < 120.0;
        parts.push(format!(
            "t={t:.3}: {} E err {e_err:.1e} lambda err {l_err:.1e} defect {defect:.1e} ({secs:.1}s)",
            res.status
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn criterion_existence(
    mesh: &Arc<SphereMesh>,
    config: &SolverConfig,
    artifacts: &mut VerifyArtifacts,
) -> Result<(bool, String)> {
    let field = AnisotropyField::radial_well(WELL_DEPTH);
    let t = UNIT_BALL_VOLUME;
    let res = minimize_isovolumetric(mesh, &field, t, config, None)?;
    let trial = 4.0 * PI - 4.0 * PI * WELL_DEPTH * (1.0 - PI / 4.0);
    let k0 = check_conditions(&field, &SampleSpec::default())?.k0_estimate;
    let (lo, hi) = multiplier_bounds(t, k0)?;
    let in_bounds = res.lambda >= lo * 0.85 && res.lambda <= hi * 1.15;
    let ok = res.status == SolveStatus::Converged && res.energy() <= trial * 1.01 && res.energy() < 4.0 * PI && in_bounds;
    let detail = format!(
        "{} E {:.5} (trial {trial:.5}, S t^2/3 {:.5}); lambda {:.4} in [{lo:.3}, {hi:.3}] +-15%",
        res.status,
        res.energy(),
        4.0 * PI,
        res.lambda
    );
    artifacts.existence_surface = res.surface;
    Ok((ok, detail))
}

/// Runs criteria 1-10 and the extra checks.
pub fn run_verify(settings: &VerifySettings) -> Result<(VerifyReport, VerifyArtifacts)> {
    let total = Instant::now();
    let mesh = Arc::new(build_icosphere(settings.level)?);
    let config = &settings.solver;
    let mut artifacts = VerifyArtifacts::default();
    let mut out = Vec::new();

    out.push(timed(1, "sphere closed forms", criterion_sphere_closed_forms));
    out.push(timed(2, "isoperimetric inequality", || criterion_isoperimetric(&mesh, settings.seed)));
    out.push(timed(3, "gradient checks", || criterion_gradients(settings.seed)));
    out.push(timed(4, "construction identities", || criterion_construction(&mesh, settings.seed)));
    out.push(timed(5, "zero-field solver", || criterion_zero_field(&mesh, config)));
    out.push(timed(6, "existence regime", || criterion_existence(&mesh, config, &mut artifacts)));

    let field = AnisotropyField::radial_well(WELL_DEPTH);
    let scan_start = Instant::now();
    let grid = log_grid(settings.scan.t_min, settings.scan.t_max, settings.scan.points)?;
    let scanned = scan_with_results(&mesh, &field, &grid, config);
    let scan_secs = scan_start.elapsed().as_secs_f64();
    match scanned {
        Ok((table, results)) => {
            let mut c7 = timed(7, "derivative identity", || {
                let rep = derivative_identity_check(&table)?;
                Ok((
                    rep.median_deviation <= 0.1,
                    format!(
                        "{} rows, median deviation {:.2e}, max {:.2e}",
                        rep.rows.len(),
                        rep.median_deviation,
                        rep.max_deviation
                    ),
                ))
            });
            c7.seconds += scan_secs;
            out.push(c7);
            out.push(timed(8, "isoperimetric ratio", || {
                let s = isoperimetric_constant();
                let ratio = refine_ratio(&mesh, &field, table.clone(), results.clone(), config)?;
                let ok = ratio.s_k_const >= 0.75 * s
                    && ratio.s_k_const <= s
                    && ratio.identity_residual <= 0.1
                    && ratio.status == SolveStatus::Converged;
                let detail = format!(
                    "t0 {:.4}, S_K {:.5} in [{:.3}, {:.3}], identity residual {:.2e}",
                    ratio.t0,
                    ratio.s_k_const,
                    0.75 * s,
                    s,
                    ratio.identity_residual
                );
                artifacts.ratio = Some(ratio);
                Ok((ok, detail))
            }));
            out.push(timed(0, "scan rows inside bounds", || {
                let bad: Vec<f64> = table.rows.iter().filter(|r| !r.bound_ok || !r.converged()).map(|r| r.t).collect();
                Ok((bad.is_empty(), format!("{} rows, outside or unconverged at {bad:?}", table.rows.len())))
            }));
            out.push(timed(0, "scan gap and sign law", || {
                let ok = table.converged_rows().all(|r| r.gap > 0.0 && r.lambda * r.t > 0.0);
                let min_gap = table.converged_rows().map(|r| r.gap).fold(f64::INFINITY, f64::min);
                Ok((ok, format!("min gap {min_gap:.3e}")))
            }));
            out.push(timed(0, "subadditivity", || {
                let rep = subadditivity_check(&table, &default_pairs(&table));
                let min = rep.pairs.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
                Ok((
                    rep.all_passed && !rep.pairs.is_empty(),
                    format!("{} pairs, min slack {min:.3e}", rep.pairs.len()),
                ))
            }));
            out.push(timed(0, "normalized endpoints within 3%", || {
                let s = isoperimetric_constant();
                let rule = GaussLegendre::new(config.quadrature_nodes)?;
                let mut ok = !table.rows.is_empty();
                let mut parts = Vec::new();
                for row in [table.rows.first(), table.rows.last()].into_iter().flatten() {
                    let trial = sphere_trial_normalized(&mesh, &field, row.t, &rule)?;
                    ok &= rel(row.normalized, s) <= 0.03;
                    parts.push(format!(
                        "t={:.3}: S~ {:.4} ({:+.1}%), sphere trial {:+.1}%",
                        row.t,
                        row.normalized,
                        100.0 * (row.normalized / s - 1.0),
                        100.0 * (trial / s - 1.0)
                    ));
                }
                Ok((ok, parts.join("; ")))
            }));
            artifacts.scan = Some(table);
        }
        Err(e) => {
            for (id, name) in [(7, "derivative identity"), (8, "isoperimetric ratio")] {
                out.push(CriterionResult {
                    id,
                    name: name.into(),
                    passed: false,
                    detail: format!("scan failed: {e}"),
                    seconds: scan_secs,
                });
            }
        }
    }

    out.push(timed(9, "gluing concavity", || {
        let rule = GaussLegendre::new(config.quadrature_nodes)?;
        let report = check_conditions(&field, &SampleSpec::default())?;
        let (t1, t2) = (settings.glue.t1, settings.glue.t2);
        let u1 = match &artifacts.existence_surface {
            Some(u) if (volume(u) - t1).abs() <= 1e-10 * t1 => u.clone(),
            _ => minimize_isovolumetric(&mesh, &field, t1, config, None)?.surface.expect("surface"),
        };
        let u2 = minimize_isovolumetric(&mesh, &field, t2, config, Some(u1.clone()))?
            .surface
            .expect("surface");
        let rep = gluing_concavity(&field, &u1, &u2, &default_s_grid(t1, t2, settings.glue.points), &rule)?;
        let ok = report.k3_holds && rep.c > 0.0 && rep.max_volume_error <= 1e-12;
        let detail = format!(
            "K3 {}; c = {:.4e}; volume err {:.1e}; slopes {:.3} .. {:.3}",
            report.k3_holds, rep.c, rep.max_volume_error, rep.first_slope, rep.last_slope
        );
        artifacts.gluing = Some(rep);
        Ok((ok, detail))
    }));

    out.push(timed(10, "nonexistence probe", || {
        let probe_cfg = SolverConfig {
            max_iters: settings.probe.max_iters,
            ..config.clone()
        };
        let rep = nonexistence_probe(&mesh, &field, &settings.probe.t, &probe_cfg, Vec3::from(settings.probe.center))?;
        let run = &rep.runs[0];
        let control = &rep.controls[0];
        let detail = format!(
            "{} after {} it, min ratio {:.5}, centroid {:.4} -> {:.4} (tail monotone {}), all above {}; control {} ratio {:.5}; symmetry dev {:.1e}",
            run.status,
            run.iterations,
            run.min_ratio,
            run.centroid_start,
            run.centroid_end,
            run.centroid_monotone_tail,
            run.all_above,
            control.status,
            control.final_ratio,
            rep.symmetry_deviation
        );
        let ok = rep.passed;
        artifacts.probe = Some(rep);
        Ok((ok, detail))
    }));

    out.push(timed(0, "normalized limits, extended grid", || {
        let s = isoperimetric_constant();
        let mut ok = true;
        let mut parts = Vec::new();
        for t in EXTENDED_ENDS {
            let res = minimize_isovolumetric(&mesh, &field, t, config, None)?;
            let normalized = res.energy() / t.powf(2.0 / 3.0);
            ok &= res.status == SolveStatus::Converged && rel(normalized, s) <= 0.03;
            parts.push(format!("t={t:.0e}: S~ {normalized:.4} ({:+.1}%, {})", 100.0 * (normalized / s - 1.0), res.status));
        }
        Ok((ok, parts.join("; ")))
    }));

    out.push(timed(0, "anisotropy bounds", || {
        let report = check_conditions(&field, &SampleSpec::default())?;
        let rule = GaussLegendre::new(16)?;
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
        let small = Arc::new(build_icosphere(3)?);
        let mut min_slack = f64::INFINITY;
        let mut ok = true;
        for k in 0..30 {
            let u = random_surface(&small, &mut rng, k);
            for t in [0.1, 1.0, 10.0] {
                let b = steffen_bound_check(&u, &field, t, &report, &rule)?;
                ok &= b.holds;
                min_slack = min_slack.min(b.steffen_slack).min(b.potential_slack);
            }
        }
        Ok((ok, format!("90 checks, min slack {min_slack:.3e}")))
    }));

    let total_seconds = total.elapsed().as_secs_f64();
    let passed = out.iter().filter(|c| c.id != 0).all(|c| c.passed);
    let extras_passed = out.iter().filter(|c| c.id == 0).all(|c| c.passed);
    Ok((
        VerifyReport {
            level: settings.level,
            criteria: out,
            total_seconds,
            passed,
            extras_passed,
        },
        artifacts,
    ))
}
