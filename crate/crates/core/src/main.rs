use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use capillarity::field::{check_conditions, AnisotropyField, FieldSpec, SampleSpec};
use capillarity::lab::glue::{default_s_grid, gluing_concavity};
use capillarity::lab::io::{
    plot_gluing, plot_lambda, plot_normalized, plot_scan, write_json, write_scan_csv, RunConfig,
};
use capillarity::lab::probe::nonexistence_probe;
use capillarity::lab::ratio::minimize_isoperimetric_ratio;
use capillarity::lab::scan::{derivative_identity_check, log_grid, scan_isovolumetric};
use capillarity::lab::verify::{run_verify, VerifySettings};
use capillarity::mesh::build_icosphere;
use capillarity::solver::{minimize_isovolumetric, SolveStatus};
use capillarity::{GaussLegendre, Result, SphereMesh, Vec3};

#[derive(Parser)]
#[command(name = "capillarity", version, about = "Volume-constrained capillarity experiments on triangulated spheres")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Icosphere subdivision level (overrides the config).
    #[arg(long, global = true)]
    level: Option<u32>,
    /// Increase log verbosity.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct FieldArgs {
    /// Builtin field: zero, radial_well, shifted_well, cone_sign, signed_shell.
    #[arg(long)]
    field: Option<String>,
    /// Field parameter as key=value; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy at one volume.
    Solve {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        /// Initial sphere center as x,y,z.
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        center: Option<Vec3>,
    },
    /// Solve over a log-spaced volume grid.
    Scan {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, allow_negative_numbers = true)]
        t_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        t_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Minimize the normalized value over the volume.
    Ratio {
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Energy along the volume exchange between two bubbles.
    Glue {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Small negative volumes: check that minimizing sequences escape.
    Probe {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, allow_negative_numbers = true, value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        center: Option<Vec3>,
    },
    /// Sampled estimates of the field conditions.
    FieldCheck {
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Run the full invariant suite.
    Verify,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

fn resolve_field(cfg: &RunConfig, args: &FieldArgs) -> Result<AnisotropyField> {
    let mut spec = match &args.field {
        Some(label) if *label != cfg.field.label => FieldSpec::new(label),
        _ => cfg.field.clone(),
    };
    for (k, v) in &args.params {
        spec = spec.with(k, *v);
    }
    AnisotropyField::from_spec(&spec)
}

fn status_line(ok: bool, what: &str) {
    println!("[{}] {what}", if ok { "PASS" } else { "FAIL" });
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(level) = cli.level {
        cfg.level = level;
    }
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    let mesh = || -> Result<Arc<SphereMesh>> { Ok(Arc::new(build_icosphere(cfg.level)?)) };

    match cli.command {
        Command::Solve { field, t, center } => {
            let field = resolve_field(&cfg, &field)?;
            let mut solver = cfg.solver.clone();
            if let Some(c) = center {
                solver.center = Some([c.x, c.y, c.z]);
            }
            let res = minimize_isovolumetric(&mesh()?, &field, t, &solver, None)?;
            write_json(&out.join("result.json"), &res)?;
            res.surface().write_obj(std::io::BufWriter::new(fs::File::create(out.join("surface.obj"))?))?;
            res.write_history_csv(fs::File::create(out.join("history.csv"))?)?;
            println!(
                "t={t} E={:.8} D={:.8} Q={:.8} lambda={:.6} residual={:.3e} status={} iterations={}",
                res.energy(),
                res.breakdown.dirichlet,
                res.breakdown.q_term,
                res.lambda,
                res.residual,
                res.status,
                res.iterations
            );
            let ok = res.status == SolveStatus::Converged;
            status_line(ok, "solve converged");
            Ok(ok)
        }
        Command::Scan { field, t_min, t_max, points } => {
            let field = resolve_field(&cfg, &field)?;
            let grid = log_grid(
                t_min.unwrap_or(cfg.scan.t_min),
                t_max.unwrap_or(cfg.scan.t_max),
                points.unwrap_or(cfg.scan.points),
            )?;
            let table = scan_isovolumetric(&mesh()?, &field, &grid, &cfg.solver)?;
            write_scan_csv(&table, fs::File::create(out.join("scan.csv"))?)?;
            write_json(&out.join("scan.json"), &table)?;
            write_plots(&out, &table, &field)?;
            for r in &table.rows {
                println!(
                    "t={:.5e} S_K={:.6} normalized={:.5} lambda={:.5} gap={:.4e} status={} bound_ok={}",
                    r.t, r.s_k_value, r.normalized, r.lambda, r.gap, r.status, r.bound_ok
                );
            }
            let rows_ok = table.rows.iter().all(|r| r.converged() && r.bound_ok);
            status_line(rows_ok, "all rows converged inside the two-sided bound");
            let deriv_ok = match derivative_identity_check(&table) {
                Ok(rep) => {
                    println!("derivative identity: median deviation {:.3e}", rep.median_deviation);
                    rep.median_deviation <= 0.1
                }
                Err(e) => {
                    println!("derivative identity: {e}");
                    false
                }
            };
            status_line(deriv_ok, "derivative identity within 10%");
            Ok(rows_ok && deriv_ok)
        }
        Command::Ratio { field } => {
            let field = resolve_field(&cfg, &field)?;
            let grid = log_grid(cfg.scan.t_min, cfg.scan.t_max, cfg.scan.points)?;
            let m = mesh()?;
            let res = minimize_isoperimetric_ratio(&m, &field, &grid, &cfg.solver)?;
            write_json(&out.join("result.json"), &res)?;
            write_scan_csv(&res.table, fs::File::create(out.join("scan.csv"))?)?;
            if let Some(u) = &res.surface {
                u.write_obj(std::io::BufWriter::new(fs::File::create(out.join("surface.obj"))?))?;
            }
            let s = capillarity::isoperimetric_constant();
            let q_sup = res.table.meta.q_sup;
            println!(
                "t0={:.5} S_K={:.6} lambda={:.5} identity residual={:.3e} nonpositive field={}",
                res.t0, res.s_k_const, res.lambda, res.identity_residual, res.nonpositive_field
            );
            let window = res.s_k_const <= s * 1.01 && res.s_k_const >= (1.0 - q_sup) * s * 0.99;
            let ok = window && res.identity_residual <= 0.1 && res.status == SolveStatus::Converged;
            status_line(ok, "ratio window and multiplier identity");
            Ok(ok)
        }
        Command::Glue { field, t1, t2, points } => {
            let field = resolve_field(&cfg, &field)?;
            let (t1, t2) = (t1.unwrap_or(cfg.glue.t1), t2.unwrap_or(cfg.glue.t2));
            let m = mesh()?;
            let u1 = minimize_isovolumetric(&m, &field, t1, &cfg.solver, None)?;
            let u2 = minimize_isovolumetric(&m, &field, t2, &cfg.solver, None)?;
            let rule = GaussLegendre::new(cfg.solver.quadrature_nodes)?;
            let grid = default_s_grid(t1, t2, points.unwrap_or(cfg.glue.points));
            let rep = gluing_concavity(&field, u1.surface(), u2.surface(), &grid, &rule)?;
            write_json(&out.join("result.json"), &rep)?;
            plot_gluing(&rep, &out.join("plot_gluing.svg"))?;
            println!(
                "c={:.5e} volume error={:.2e} slopes {:.4} .. {:.4}",
                rep.c, rep.max_volume_error, rep.first_slope, rep.last_slope
            );
            let ok = rep.c > 0.0 && rep.max_volume_error <= 1e-12;
            status_line(ok, "f is concave with constant pair volume");
            Ok(ok)
        }
        Command::Probe { field, t, center } => {
            let field = resolve_field(&cfg, &field)?;
            let ts = if t.is_empty() { cfg.probe.t.clone() } else { t };
            let center = center.unwrap_or(Vec3::from(cfg.probe.center));
            let solver = capillarity::SolverConfig {
                max_iters: cfg.probe.max_iters,
                ..cfg.solver.clone()
            };
            let rep = nonexistence_probe(&mesh()?, &field, &ts, &solver, center)?;
            write_json(&out.join("result.json"), &rep)?;
            for (run, control) in rep.runs.iter().zip(&rep.controls) {
                println!(
                    "t={:.4e}: {} min ratio {:.6} centroid {:.4} -> {:.4}; control {} ratio {:.6}",
                    run.t,
                    run.status,
                    run.min_ratio,
                    run.centroid_start,
                    run.centroid_end,
                    control.status,
                    control.final_ratio
                );
            }
            println!("symmetry deviation {:.2e}", rep.symmetry_deviation);
            status_line(rep.passed, "escape, control and symmetry");
            Ok(rep.passed)
        }
        Command::FieldCheck { field } => {
            let field = resolve_field(&cfg, &field)?;
            let report = check_conditions(&field, &SampleSpec::default())?;
            write_json(&out.join("field_check.json"), &report)?;
            println!(
                "{}: k0 {:.6} sup|Q_K| {:.6} sup|K| {:.6} k3 {:.6}; K1 {} K2 {} K3 {} K4 {} nonpositive {}",
                report.label,
                report.k0_estimate,
                report.q_sup_estimate,
                report.k_sup_estimate,
                report.k3_estimate,
                report.k1_holds,
                report.k2_holds,
                report.k3_holds,
                report.k4_holds,
                report.nonpositive
            );
            let ok = report.q_sup_estimate <= report.k0_estimate / 2.0 * (1.0 + 1e-12);
            status_line(ok, "sup |Q_K| <= k0 / 2 on samples");
            Ok(ok)
        }
        Command::Verify => {
            let settings = VerifySettings::from(&cfg);
            let (report, artifacts) = run_verify(&settings)?;
            for c in &report.criteria {
                println!("{}", c.line());
            }
            let budget = report.total_seconds < 15.0 * 60.0;
            println!(
                "[{}] 11 full verify run                     {:>7.2}s  level {}, budget 900s",
                if budget && report.passed { "PASS" } else { "FAIL" },
                report.total_seconds,
                report.level
            );
            println!(
                "criteria 1-10 {}; extra checks {}",
                if report.passed { "passed" } else { "failed" },
                if report.extras_passed { "passed" } else { "have failures" }
            );
            write_json(&out.join("result.json"), &report)?;
            if let Some(table) = &artifacts.scan {
                write_scan_csv(table, fs::File::create(out.join("scan.csv"))?)?;
                write_plots(&out, table, &AnisotropyField::from_spec(&table.meta.field)?)?;
            }
            if let Some(rep) = &artifacts.gluing {
                plot_gluing(rep, &out.join("plot_gluing.svg"))?;
            }
            if let Some(u) = &artifacts.existence_surface {
                u.write_obj(std::io::BufWriter::new(fs::File::create(out.join("surface.obj"))?))?;
            }
            Ok(report.passed && budget)
        }
    }
}

fn write_plots(out: &Path, table: &capillarity::lab::scan::ScanTable, field: &AnisotropyField) -> Result<()> {
    if table.rows.iter().all(|r| r.t < 0.0) {
        return Ok(());
    }
    let k0 = check_conditions(field, &SampleSpec::default())?.k0_estimate;
    plot_scan(table, &out.join("plot_scan.svg"))?;
    plot_normalized(table, &out.join("plot_normalized.svg"))?;
    if k0 < 2.0 {
        plot_lambda(table, k0, &out.join("plot_lambda.svg"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
