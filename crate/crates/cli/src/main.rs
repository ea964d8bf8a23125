//! Batch command-line surface over the membrane energy library.
//!
//! Subcommands: `evaluate` (energy breakdown of a configuration), `check`
//! (coercivity certificate, feasibility verdict, Gauss-Bonnet audit),
//! `minimize` (constrained optimization with full artifact output), `mesh`
//! (OBJ/VTK export) and `sweep` (minimize across a parameter list with a
//! worker pool).
//!
//! Runs are configured by an optional TOML file plus flags; flags win.
//! Exit codes: 0 success, 1 validation failure (bad config, bad input
//! files, infeasible targets, usage errors), 2 runtime failure (a
//! minimization that ends with residuals above tolerance, or an I/O error
//! mid-run).

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use vesicle_core::analysis;
use vesicle_core::energy::{self, Component, PhaseMaterial};
use vesicle_core::meshio;
use vesicle_core::optimizer::{self, ConstraintSet, OptimizerConfig};
use vesicle_core::{GeneratorCurve, MaterialParams, PhaseLayout, VesicleSystem};

#[derive(Parser)]
#[command(
    name = "vesicle",
    version,
    about = "Axisymmetric two-phase membrane energies"
)]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Generator curve CSV (t,x,z). Default: unit-sphere fixture.
    #[arg(long, global = true)]
    curve: Option<PathBuf>,
    /// Phase layout file. Default: uniform phase A (with a warning).
    #[arg(long, global = true)]
    phase: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the optimizer's proposal stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker pool width for sweep.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Curve resolution N (segments).
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Angular segments M for mesh export.
    #[arg(long, global = true)]
    angular: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the energy breakdown of a curve + phase configuration.
    Evaluate,
    /// Print the coercivity certificate, feasibility verdict and
    /// Gauss-Bonnet defect.
    Check,
    /// Minimize the energy under the configured constraints.
    Minimize,
    /// Export the revolved surface as OBJ and VTK.
    Mesh,
    /// Minimize once per value of a swept parameter.
    Sweep {
        /// Which knob to sweep.
        param: SweepParam,
        /// Comma-separated values, e.g. "0.1,1,10".
        values: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    Sigma,
    Volume,
    M,
}

/// File-shaped configuration; every field optional so a bare run works.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    resolution: Option<usize>,
    angular: Option<usize>,
    components: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    curve: Option<PathBuf>,
    phase: Option<PathBuf>,
    material: Option<MaterialBlock>,
    constraints: Option<ConstraintsBlock>,
    optimizer: Option<OptimizerBlock>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialBlock {
    sigma: Option<f64>,
    a: Option<PhaseMaterial>,
    b: Option<PhaseMaterial>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsBlock {
    total_area: Option<f64>,
    phase_area: Option<f64>,
    volume: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerBlock {
    max_outer: Option<usize>,
    max_inner: Option<usize>,
    mu0: Option<f64>,
    mu_growth: Option<f64>,
    constraint_tol: Option<f64>,
    gradient_tol: Option<f64>,
    phase_move_period: Option<usize>,
    phase_candidates: Option<usize>,
    min_jump_separation: Option<f64>,
    max_jumps: Option<usize>,
    reparam_period: Option<usize>,
    checkpoint_period: Option<usize>,
}

/// Fully resolved run parameters after merging defaults, file and flags.
struct RunConfig {
    resolution: usize,
    angular: usize,
    components: usize,
    threads: usize,
    out: PathBuf,
    curve: Option<PathBuf>,
    phase: Option<PathBuf>,
    sigma: f64,
    phase_a: PhaseMaterial,
    phase_b: PhaseMaterial,
    total_area: f64,
    phase_area: f64,
    volume: f64,
    optimizer: OptimizerConfig,
}

struct CliFailure {
    code: u8,
    error: anyhow::Error,
}

fn validation(error: anyhow::Error) -> CliFailure {
    CliFailure { code: 1, error }
}

fn runtime(error: anyhow::Error) -> CliFailure {
    CliFailure { code: 2, error }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; anything else is a usage
            // error and therefore a validation failure.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliFailure> {
    let config = resolve_config(&cli)?;
    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("creating output directory {}", config.out.display()))
        .map_err(runtime)?;
    match &cli.command {
        Command::Evaluate => cmd_evaluate(&config),
        Command::Check => cmd_check(&config),
        Command::Minimize => cmd_minimize(&config),
        Command::Mesh => cmd_mesh(&config),
        Command::Sweep { param, values } => cmd_sweep(&config, *param, values),
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliFailure> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(validation)?;
            toml::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))
                .map_err(validation)?
        }
        None => FileConfig::default(),
    };

    let material = file.material.unwrap_or_default();
    let canonical = PhaseMaterial {
        kappa_h: 1.0,
        kappa_g: -1.0,
        h0: 0.0,
    };
    let constraints = file.constraints.unwrap_or_default();
    let a = 4.0 * std::f64::consts::PI;
    let opt_block = file.optimizer.unwrap_or_default();
    let mut optimizer = OptimizerConfig::default();
    if let Some(v) = opt_block.max_outer {
        optimizer.max_outer = v;
    }
    if let Some(v) = opt_block.max_inner {
        optimizer.max_inner = v;
    }
    if let Some(v) = opt_block.mu0 {
        optimizer.mu0 = v;
    }
    if let Some(v) = opt_block.mu_growth {
        optimizer.mu_growth = v;
    }
    if let Some(v) = opt_block.constraint_tol {
        optimizer.constraint_tol = v;
    }
    if let Some(v) = opt_block.gradient_tol {
        optimizer.gradient_tol = v;
    }
    if let Some(v) = opt_block.phase_move_period {
        optimizer.phase_move_period = v;
    }
    if let Some(v) = opt_block.phase_candidates {
        optimizer.phase_candidates = v;
    }
    if let Some(v) = opt_block.min_jump_separation {
        optimizer.min_jump_separation = v;
    }
    if let Some(v) = opt_block.max_jumps {
        optimizer.max_jumps = v;
    }
    if let Some(v) = opt_block.reparam_period {
        optimizer.reparam_period = v;
    }
    if let Some(v) = opt_block.checkpoint_period {
        optimizer.checkpoint_period = v;
    }
    optimizer.seed = cli.seed.or(file.seed).unwrap_or(0);

    Ok(RunConfig {
        resolution: cli.resolution.or(file.resolution).unwrap_or(400),
        angular: cli.angular.or(file.angular).unwrap_or(64),
        components: file.components.unwrap_or(1),
        threads: cli.threads.unwrap_or(1).max(1),
        out: cli
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(".")),
        curve: cli.curve.clone().or(file.curve),
        phase: cli.phase.clone().or(file.phase),
        sigma: material.sigma.unwrap_or(1.0),
        phase_a: material.a.unwrap_or(canonical),
        phase_b: material.b.unwrap_or(canonical),
        total_area: constraints.total_area.unwrap_or(a),
        phase_area: constraints.phase_area.unwrap_or(a),
        volume: constraints
            .volume
            .unwrap_or(0.95 * a.powf(1.5) / (6.0 * std::f64::consts::PI.sqrt())),
        optimizer,
    })
}

fn material_params(config: &RunConfig) -> Result<MaterialParams, CliFailure> {
    MaterialParams::new(config.phase_a, config.phase_b, config.sigma)
        .map_err(|e| validation(anyhow!(e).context("material parameters")))
}

/// Loads the configured curve, or the unit-sphere fixture when none is
/// given.
fn load_curve(config: &RunConfig) -> Result<GeneratorCurve, CliFailure> {
    match &config.curve {
        Some(path) => meshio::read_curve_csv(path)
            .with_context(|| format!("loading curve {}", path.display()))
            .map_err(validation),
        None => GeneratorCurve::spheroid(config.resolution, 1.0, 1.0)
            .map_err(|e| validation(anyhow!(e))),
    }
}

/// Loads the configured phase layout; without one, warns and assumes the
/// surface is uniformly phase A.
fn load_phase(config: &RunConfig) -> Result<PhaseLayout, CliFailure> {
    match &config.phase {
        Some(path) => meshio::read_phase_file(path)
            .with_context(|| format!("loading phase {}", path.display()))
            .map_err(validation),
        None => {
            eprintln!("warning: no phase file given; assuming uniform phase A");
            PhaseLayout::constant(1).map_err(|e| validation(anyhow!(e)))
        }
    }
}

fn write_and_print(path: &Path, text: &str) -> Result<(), CliFailure> {
    print!("{text}");
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn cmd_evaluate(config: &RunConfig) -> Result<(), CliFailure> {
    let curve = load_curve(config)?;
    let report = curve.admissibility_check();
    if !report.violations.is_empty() {
        let mut msg = String::from("curve fails admissibility:");
        for v in &report.violations {
            let _ = write!(msg, "\n  {v}");
        }
        return Err(validation(anyhow!(msg)));
    }
    let n_segments = curve.n_segments();
    let layout = load_phase(config)?;
    let params = material_params(config)?;
    let system = VesicleSystem::new(vec![Component { curve, layout }])
        .map_err(|e| validation(anyhow!(e)))?;
    let e = energy::system_energy(&system, &params).map_err(|e| validation(anyhow!(e)))?;

    let mut text = String::new();
    let _ = writeln!(text, "n_segments={n_segments}");
    let _ = writeln!(text, "bending={}", e.total.bending);
    let _ = writeln!(text, "gaussian={}", e.total.gaussian);
    let _ = writeln!(text, "line={}", e.total.line);
    let _ = writeln!(text, "total={}", e.total.total);
    let _ = writeln!(text, "area={}", system.surface_area());
    let _ = writeln!(text, "volume={}", system.enclosed_volume());
    let _ = writeln!(text, "phase_area={}", system.phase_area());
    let _ = writeln!(text, "interface_length={}", system.interface_length());
    write_and_print(&config.out.join("evaluate.txt"), &text)
}

fn cmd_check(config: &RunConfig) -> Result<(), CliFailure> {
    let params = material_params(config)?;
    let cert = analysis::coercivity_constants(&params);
    let feas = analysis::feasibility_check(config.total_area, config.phase_area, config.volume)
        .map_err(|e| validation(anyhow!(e)))?;
    let curve = load_curve(config)?;
    let defect = analysis::gauss_bonnet_defect(&curve).map_err(|e| validation(anyhow!(e)))?;

    let mut text = String::new();
    let _ = writeln!(text, "epsilon={}", cert.epsilon);
    let _ = writeln!(text, "c1_a={}", cert.c1_a);
    let _ = writeln!(text, "c1_b={}", cert.c1_b);
    let _ = writeln!(text, "c2_a={}", cert.c2_a);
    let _ = writeln!(text, "c2_b={}", cert.c2_b);
    let _ = writeln!(text, "c={}", cert.c);
    let _ = writeln!(text, "offset={}", cert.offset);
    let _ = writeln!(text, "feasible={}", feas.feasible);
    let _ = writeln!(text, "volume_bound={}", feas.volume_bound);
    let _ = writeln!(text, "volume_ok={}", feas.volume_ok);
    let _ = writeln!(text, "phase_area_ok={}", feas.phase_area_ok);
    let _ = writeln!(text, "gauss_bonnet_defect={defect}");
    write_and_print(&config.out.join("check.txt"), &text)
}

/// Builds the starting system: from curve/phase files when given (one
/// component), otherwise the spheroid initializer at the configured
/// component count.
fn starting_system(
    config: &RunConfig,
    constraints: &ConstraintSet,
) -> Result<VesicleSystem, CliFailure> {
    if config.curve.is_some() {
        if config.components > 1 {
            return Err(validation(anyhow!(
                "a curve file provides a single component, but components = {}",
                config.components
            )));
        }
        let curve = load_curve(config)?;
        let layout = load_phase(config)?;
        VesicleSystem::new(vec![Component { curve, layout }]).map_err(|e| validation(anyhow!(e)))
    } else {
        optimizer::init_system(config.resolution, config.components, constraints)
            .map_err(|e| validation(anyhow!(e).context("initializing start system")))
    }
}

fn minimize_once(
    config: &RunConfig,
    out: &Path,
) -> Result<(VesicleSystem, optimizer::OptimizationReport), CliFailure> {
    let params = material_params(config)?;
    let constraints = ConstraintSet::new(config.total_area, config.phase_area, config.volume)
        .map_err(|e| validation(anyhow!(e).context("constraint targets")))?;
    let mut system = starting_system(config, &constraints)?;

    let mut opt = config.optimizer.clone();
    if opt.checkpoint_period > 0 {
        opt.checkpoint_dir = Some(out.to_path_buf());
    }
    let report = optimizer::minimize(&mut system, &params, &constraints, &opt)
        .map_err(|e| runtime(anyhow!(e).context("minimization")))?;

    for (i, comp) in system.components().iter().enumerate() {
        meshio::write_curve_csv(&out.join(format!("final_curve_{i}.csv")), &comp.curve)
            .map_err(|e| runtime(anyhow!(e)))?;
        meshio::write_phase_file(&out.join(format!("final_phase_{i}.phase")), &comp.layout)
            .map_err(|e| runtime(anyhow!(e)))?;
    }
    let rows: Vec<meshio::ReportRow> = report.trace.iter().map(|r| r.to_report_row()).collect();
    meshio::write_report_csv(&out.join("report.csv"), &rows).map_err(|e| runtime(anyhow!(e)))?;
    let ckpt = meshio::Checkpoint::capture(
        &system,
        &params,
        Some(meshio::CheckpointConstraints {
            total_area: constraints.total_area(),
            phase_area: constraints.phase_area(),
            volume: constraints.volume(),
        }),
        Some(report.final_state.clone()),
    );
    meshio::write_checkpoint(&out.join("final_checkpoint.json"), &ckpt)
        .map_err(|e| runtime(anyhow!(e)))?;
    Ok((system, report))
}

fn cmd_minimize(config: &RunConfig) -> Result<(), CliFailure> {
    let (system, report) = minimize_once(config, &config.out)?;
    let res = report
        .final_residuals
        .iter()
        .fold(0.0, |m: f64, r| m.max(r.abs()));

    let mut text = String::new();
    let _ = writeln!(text, "termination={:?}", report.termination);
    let _ = writeln!(text, "energy={}", report.final_energy);
    let _ = writeln!(text, "res_area={}", report.final_residuals[0]);
    let _ = writeln!(text, "res_vol={}", report.final_residuals[1]);
    let _ = writeln!(text, "res_phase={}", report.final_residuals[2]);
    let _ = writeln!(text, "gradient_norm={}", report.final_gradient_norm);
    let _ = writeln!(text, "interface_length={}", system.interface_length());
    let _ = writeln!(text, "outer_rounds={}", report.outer_rounds);
    let _ = writeln!(text, "inner_iterations={}", report.inner_iterations);
    let _ = writeln!(text, "barrier_active={}", report.barrier_active);
    let _ = writeln!(text, "wall_seconds={}", report.wall_time.as_secs_f64());
    write_and_print(&config.out.join("summary.txt"), &text)?;

    if res > config.optimizer.constraint_tol {
        return Err(runtime(anyhow!(
            "constraints not met: worst relative residual {res:e} > {:e}",
            config.optimizer.constraint_tol
        )));
    }
    Ok(())
}

fn cmd_mesh(config: &RunConfig) -> Result<(), CliFailure> {
    let curve = load_curve(config)?;
    let layout = load_phase(config)?;
    let mesh = meshio::revolve_to_mesh(&curve, &layout, config.angular)
        .map_err(|e| validation(anyhow!(e)))?;
    meshio::write_mesh_obj(&config.out.join("surface.obj"), &mesh)
        .map_err(|e| runtime(anyhow!(e)))?;
    meshio::write_mesh_vtk(&config.out.join("surface.vtk"), &mesh)
        .map_err(|e| runtime(anyhow!(e)))?;

    let mut text = String::new();
    let _ = writeln!(text, "vertices={}", mesh.vertices.len());
    let _ = writeln!(text, "triangles={}", mesh.triangles.len());
    let _ = writeln!(text, "mesh_area={}", meshio::mesh_area(&mesh));
    let _ = writeln!(text, "mesh_volume={}", meshio::mesh_volume(&mesh));
    let _ = writeln!(
        text,
        "watertight_defects={}",
        meshio::watertightness_defects(&mesh)
    );
    write_and_print(&config.out.join("mesh.txt"), &text)
}

fn cmd_sweep(config: &RunConfig, param: SweepParam, values: &str) -> Result<(), CliFailure> {
    let tokens: Vec<&str> = values
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(validation(anyhow!(
            "sweep needs at least one value, got '{values}'"
        )));
    }
    let name = match param {
        SweepParam::Sigma => "sigma",
        SweepParam::Volume => "volume",
        SweepParam::M => "m",
    };
    // Parse every value up front so a typo fails before any work starts.
    let parsed: Vec<f64> = tokens
        .iter()
        .map(|t| {
            let v: f64 = t
                .parse()
                .map_err(|_| validation(anyhow!("'{t}' is not a valid {name} value")))?;
            if matches!(param, SweepParam::M) && (v.fract() != 0.0 || v < 1.0) {
                return Err(validation(anyhow!(
                    "component count must be a positive integer, got '{t}'"
                )));
            }
            Ok(v)
        })
        .collect::<Result<_, _>>()?;

    struct Row {
        label: String,
        energy: f64,
        bending: f64,
        line: f64,
        interface: f64,
        residual: f64,
        termination: String,
    }
    let results: Mutex<Vec<Option<Result<Row, CliFailure>>>> =
        Mutex::new((0..parsed.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..config.threads.min(parsed.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= parsed.len() {
                    break;
                }
                let value = parsed[i];
                let label = format!("{name}_{}", tokens[i]);
                let out = config.out.join(&label);
                let run = || -> Result<Row, CliFailure> {
                    std::fs::create_dir_all(&out)
                        .with_context(|| format!("creating {}", out.display()))
                        .map_err(runtime)?;
                    let mut cfg = RunConfig {
                        out: out.clone(),
                        curve: config.curve.clone(),
                        phase: config.phase.clone(),
                        optimizer: config.optimizer.clone(),
                        ..*config
                    };
                    match param {
                        SweepParam::Sigma => cfg.sigma = value,
                        SweepParam::Volume => cfg.volume = value,
                        SweepParam::M => cfg.components = value as usize,
                    }
                    let params = material_params(&cfg)?;
                    let (system, report) = minimize_once(&cfg, &out)?;
                    let e =
                        energy::system_energy(&system, &params).map_err(|e| runtime(anyhow!(e)))?;
                    Ok(Row {
                        label: label.clone(),
                        energy: report.final_energy,
                        bending: e.total.bending,
                        line: e.total.line,
                        interface: system.interface_length(),
                        residual: report
                            .final_residuals
                            .iter()
                            .fold(0.0, |m: f64, r| m.max(r.abs())),
                        termination: format!("{:?}", report.termination),
                    })
                };
                results.lock().unwrap()[i] = Some(run());
            });
        }
    });

    let mut text =
        String::from("value,energy,bending,line,interface_length,residual,termination\n");
    let mut worst: f64 = 0.0;
    for slot in results.into_inner().unwrap() {
        let row = slot.expect("worker pool covered every index")?;
        worst = worst.max(row.residual);
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            row.label,
            row.energy,
            row.bending,
            row.line,
            row.interface,
            row.residual,
            row.termination
        );
    }
    write_and_print(&config.out.join("sweep.csv"), &text)?;
    if worst > config.optimizer.constraint_tol {
        return Err(runtime(anyhow!(
            "sweep finished, but the worst run's relative residual {worst:e} exceeds {:e}",
            config.optimizer.constraint_tol
        )));
    }
    Ok(())
}
