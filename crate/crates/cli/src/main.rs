//! Command-line driver for the anonymous MAPF transport pipeline.
//!
//! Exit codes: 0 success (and verify pass), 1 verify fail or I/O trouble,
//! 2 usage errors, 3 infeasible instances, 4 internal invariant violations.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mapf_mmot_core::bench::{self, ExperimentConfig};
use mapf_mmot_core::exact::{self, SolveError, SolveReport};
use mapf_mmot_core::instance::{self, generate_grid, io as instance_io, CostModel, Instance};
use mapf_mmot_core::plan::{self, TransportPlan};
use mapf_mmot_core::project::{self, P3Params, RetentionPolicy};
use mapf_mmot_core::sinkhorn::{self, SinkhornParams, StabilizedMode};
use mapf_mmot_core::verify;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mapf-mmot",
    about = "Anonymous multi-agent path finding via time-expanded flows and entropic relaxation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random grid instance file.
    Gen(GenArgs),
    /// Validate an instance file and report every check.
    Validate(ValidateArgs),
    /// Solve the exact min-cost transport.
    Solve(SolveArgs),
    /// Compute a minimum-makespan transport.
    Makespan(MakespanArgs),
    /// Run the entropic relaxation and dump the shadow transport.
    Shadow(ShadowArgs),
    /// Full pipeline: relaxation, pruning, integral projection.
    Pipeline(PipelineArgs),
    /// Audit a plan file against an instance; exit status reflects the verdict.
    Verify(VerifyArgs),
    /// Run an experiment study and write CSV/SVG artifacts.
    Bench(BenchArgs),
    /// Render an instance, plan, shadow, or metric CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10)]
    width: usize,
    #[arg(long, default_value_t = 10)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    obstacles: usize,
    #[arg(long, default_value_t = 5)]
    robots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Horizon stored in the file (defaults to 2*(width+height)).
    #[arg(long)]
    horizon: Option<usize>,
    /// Cost model: uniform or nonuniform.
    #[arg(long, value_enum, default_value_t = GenCosts::Uniform)]
    costs: GenCosts,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenCosts {
    Uniform,
    Nonuniform,
}

#[derive(Args)]
struct ValidateArgs {
    instance: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Horizon override (defaults to the instance's stored horizon).
    #[arg(long)]
    horizon: Option<usize>,
    /// Write the plan file here.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Append a one-line CSV summary to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Dump the time-expanded network as text (debugging aid).
    #[arg(long)]
    dump_network: Option<PathBuf>,
}

#[derive(Args)]
struct MakespanArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = MakespanMode::Search)]
    mode: MakespanMode,
    /// Horizon for the exponential mode (defaults to the instance horizon).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MakespanMode {
    Search,
    Exponential,
}

#[derive(Args)]
struct ShadowArgs {
    instance: PathBuf,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = StabilizedFlag::Auto)]
    stabilized: StabilizedFlag,
    #[arg(short, long)]
    out: PathBuf,
    /// Write the residual trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StabilizedFlag {
    Auto,
    On,
    Off,
}

impl From<StabilizedFlag> for StabilizedMode {
    fn from(flag: StabilizedFlag) -> StabilizedMode {
        match flag {
            StabilizedFlag::Auto => StabilizedMode::Auto,
            StabilizedFlag::On => StabilizedMode::On,
            StabilizedFlag::Off => StabilizedMode::Off,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    instance: PathBuf,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Fraction of arcs retained per slice.
    #[arg(long, default_value_t = 0.4)]
    keep: f64,
    /// Prune by absolute mass threshold instead of the keep fraction.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = StabilizedFlag::Auto)]
    stabilized: StabilizedFlag,
    /// Write the integral plan here.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Write the prune mask here.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Write the shadow transport here.
    #[arg(long)]
    shadow: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    plan: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    study: Study,
    /// Square grid widths (K = width^2).
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 15, 20])]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    obstacle_density: f64,
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2])]
    epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0])]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.4])]
    keeps: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    sweeps: usize,
    /// Output directory (falls back to MAPF_MMOT_OUT_DIR, then ./bench-out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Scaling,
    Sensitivity,
    Kept,
    Nonuniform,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    shadow: Option<PathBuf>,
    /// Metrics CSV for kind=metrics.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Column names for kind=metrics.
    #[arg(long, default_value = "K")]
    x: String,
    #[arg(long, default_value = "gap_pct")]
    y: String,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Plan,
    Shadow,
    Metrics,
}

/// Anything a subcommand can fail with, mapped onto the exit code contract.
enum CliError {
    Usage(String),
    Io(String),
    Infeasible(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => EXIT_FAIL,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Infeasible(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(err: SolveError) -> CliError {
        match err {
            SolveError::Infeasible { .. } => CliError::Infeasible(err.to_string()),
            SolveError::InvalidInstance(_) => CliError::Usage(err.to_string()),
            SolveError::Internal(_) => CliError::Internal(err.to_string()),
        }
    }
}

impl From<instance_io::IoError> for CliError {
    fn from(err: instance_io::IoError) -> CliError {
        CliError::Io(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Io(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Makespan(args) => cmd_makespan(args),
        Command::Shadow(args) => cmd_shadow(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    Ok(instance_io::load(path)?)
}

fn report_json(report: &SolveReport) -> serde_json::Value {
    serde_json::json!({
        "cost": report.cost.to_f64(),
        "cost_scaled": report.cost.scaled.to_string(),
        "cost_denom": report.cost.denom,
        "makespan": report.makespan,
        "moves": report.moves,
        "horizon": report.horizon,
        "wall_time_s": report.wall_time.as_secs_f64(),
        "augmentations": report.augmentations,
        "kept_fraction": report.kept_fraction,
        "retries": report.retries,
    })
}

fn emit_solve_summary(
    label: &str,
    report: &SolveReport,
    json: bool,
) {
    if json {
        let mut value = report_json(report);
        value["solver"] = serde_json::json!(label);
        println!("{}", serde_json::to_string(&value).expect("json"));
    } else {
        println!(
            "{label}: cost {} makespan {} moves {} ({} augmentations, {:.3}s)",
            report.cost.to_f64(),
            report.makespan,
            report.moves,
            report.augmentations,
            report.wall_time.as_secs_f64()
        );
    }
}

fn append_csv_row(path: &Path, instance_path: &Path, label: &str, report: &SolveReport) -> Result<(), CliError> {
    let header = "instance,solver,horizon,cost,makespan,moves,augmentations,wall_time_s\n";
    let mut body = if path.exists() {
        std::fs::read_to_string(path)?
    } else {
        String::from(header)
    };
    body.push_str(&format!(
        "{},{},{},{},{},{},{},{:.6}\n",
        instance_path.display(),
        label,
        report.horizon,
        report.cost.to_f64(),
        report.makespan,
        report.moves,
        report.augmentations,
        report.wall_time.as_secs_f64()
    ));
    std::fs::write(path, body)?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<u8, CliError> {
    let mut inst = generate_grid(args.width, args.height, args.obstacles, args.robots, args.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(h) = args.horizon {
        inst = inst.with_horizon(h);
    }
    if matches!(args.costs, GenCosts::Nonuniform) {
        inst = inst
            .with_cost_model(CostModel::NonUniformRandom {
                arrival_min: 0.6,
                arrival_max: 1.0,
                wait_min: 0.1,
                wait_max: 0.5,
                seed: args.seed,
            })
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    instance_io::save(&inst, &args.out)?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "out": args.out.display().to_string(),
                "vertices": inst.vertex_count(),
                "edges": inst.edge_count(),
                "robots": inst.robot_count(),
                "horizon": inst.horizon(),
            })
        );
    } else {
        println!(
            "wrote {} ({} vertices, {} robots, horizon {})",
            args.out.display(),
            inst.vertex_count(),
            inst.robot_count(),
            inst.horizon()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, CliError> {
    let inst = load_instance(&args.instance)?;
    let report = instance::validate(&inst);
    let conditions = instance::validate_cost_conditions(&inst);
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "passed": report.passed(),
                "checks": report.checks.iter().map(|c| serde_json::json!({
                    "name": c.name, "passed": c.passed, "detail": c.detail,
                })).collect::<Vec<_>>(),
                "warnings": report.warnings,
                "cost_conditions": {
                    "strict_ordering": conditions.strict_ordering,
                    "no_oscillations": conditions.no_oscillations,
                    "temporal_urgency": conditions.temporal_urgency,
                    "temporal_subadditivity": conditions.temporal_subadditivity,
                    "shortest_path_form": conditions.shortest_path_form,
                },
            })
        );
    } else {
        for check in &report.checks {
            println!(
                "{} {}: {}",
                if check.passed { "pass" } else { "FAIL" },
                check.name,
                check.detail
            );
        }
        for warning in &report.warnings {
            println!("warn: {warning}");
        }
        println!(
            "cost conditions: ordering={} no_oscillations={} urgency={} subadditivity={} metric={}",
            conditions.strict_ordering,
            conditions.no_oscillations,
            conditions.temporal_urgency,
            conditions.temporal_subadditivity,
            conditions.shortest_path_form
        );
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_solve(args: SolveArgs) -> Result<u8, CliError> {
    let inst = load_instance(&args.instance)?;
    let horizon = args.horizon.unwrap_or_else(|| inst.horizon());
    if let Some(dump) = &args.dump_network {
        let teg = mapf_mmot_core::timeexp::build(&inst, horizon)
            .map_err(|e| CliError::Infeasible(e.to_string()))?;
        std::fs::write(dump, mapf_mmot_core::timeexp::dump_arcs(&teg))?;
    }
    let (plan, report) = exact::solve_p1(&inst, horizon)?;
    if let Some(out) = &args.out {
        plan::save_plan(&plan, &report.cost, out).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(csv) = &args.csv {
        append_csv_row(csv, &args.instance, "p1", &report)?;
    }
    emit_solve_summary("p1", &report, args.json);
    Ok(EXIT_OK)
}

fn cmd_makespan(args: MakespanArgs) -> Result<u8, CliError> {
    let inst = load_instance(&args.instance)?;
    let (label, plan, report, t_star) = match args.mode {
        MakespanMode::Search => {
            let (t_star, plan, report) = exact::min_makespan_search(&inst)?;
            ("makespan-search", plan, report, Some(t_star))
        }
        MakespanMode::Exponential => {
            let horizon = args.horizon.unwrap_or_else(|| inst.horizon());
            let (plan, report) = exact::solve_makespan_exponential(&inst, horizon)?;
            ("makespan-exponential", plan, report, None)
        }
    };
    if let Some(out) = &args.out {
        plan::save_plan(&plan, &report.cost, out).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if args.json {
        let mut value = report_json(&report);
        value["solver"] = serde_json::json!(label);
        if let Some(t) = t_star {
            value["t_star"] = serde_json::json!(t);
        }
        println!("{}", serde_json::to_string(&value).expect("json"));
    } else {
        match t_star {
            Some(t) => println!("minimum makespan {t}; plan makespan {}", report.makespan),
            None => println!("exponential-schedule makespan {}", report.makespan),
        }
    }
    Ok(EXIT_OK)
}

fn sinkhorn_params(epsilon: f64, damping: f64, sweeps: usize, tol: f64, flag: StabilizedFlag) -> SinkhornParams {
    SinkhornParams {
        epsilon,
        damping,
        max_sweeps: sweeps,
        tol,
        stabilized: flag.into(),
    }
}

fn cmd_shadow(args: ShadowArgs) -> Result<u8, CliError> {
    let inst = load_instance(&args.instance)?;
    let horizon = args.horizon.unwrap_or_else(|| inst.horizon());
    let shadow = sinkhorn::run(
        &inst,
        horizon,
        sinkhorn_params(args.epsilon, args.damping, args.sweeps, args.tol, args.stabilized),
    )
    .map_err(|e| CliError::Infeasible(e.to_string()))?;
    std::fs::write(&args.out, sinkhorn::shadow_to_json(&inst, &shadow))?;
    if let Some(trace) = &args.trace {
        std::fs::write(trace, sinkhorn::trace_to_csv(&shadow))?;
    }
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "sweeps": shadow.sweeps,
                "final_residual": shadow.final_residual,
                "out": args.out.display().to_string(),
            })
        );
    } else {
        println!(
            "shadow converged in {} sweeps (residual {:.3e}) -> {}",
            shadow.sweeps,
            shadow.final_residual,
            args.out.display()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_pipeline(args: PipelineArgs) -> Result<u8, CliError> {
    let inst = load_instance(&args.instance)?;
    let horizon = args.horizon.unwrap_or_else(|| inst.horizon());
    let (_, p1_report) = exact::solve_p1(&inst, horizon)?;
    let shadow = sinkhorn::run(
        &inst,
        horizon,
        sinkhorn_params(args.epsilon, args.damping, args.sweeps, args.tol, args.stabilized),
    )
    .map_err(|e| CliError::Infeasible(e.to_string()))?;
    let retention = match args.threshold {
        Some(eta) => RetentionPolicy::Threshold(eta),
        None => RetentionPolicy::KeepFraction(args.keep),
    };
    let (plan, mut report) = project::solve_p3(
        &inst,
        &shadow,
        P3Params {
            lambda: args.lambda,
            delta: args.delta,
            retention,
        },
    )?;
    let p1_cost = p1_report.cost.to_f64();
    if p1_cost > 0.0 {
        report.gap_vs_p1 = Some(100.0 * (report.cost.to_f64() - p1_cost) / p1_cost);
    } else {
        report.gap_vs_p1 = Some(0.0);
    }

    let verification = verify::check_plan(&inst, &plan).map_err(|e| CliError::Internal(e.to_string()))?;
    if !verification.passed() {
        return Err(CliError::Internal(format!(
            "projected plan failed verification: {:?}",
            verification.failed_checks()
        )));
    }

    if let Some(out) = &args.out {
        plan::save_plan(&plan, &report.cost, out).map_err(|e| CliError::Io(e.to_string()))?;
    }
    if let Some(mask_path) = &args.mask {
        let mask = project::prune(&inst, &shadow, retention);
        std::fs::write(mask_path, project::mask_to_json(&mask))?;
    }
    if let Some(shadow_path) = &args.shadow {
        std::fs::write(shadow_path, sinkhorn::shadow_to_json(&inst, &shadow))?;
    }
    if args.json {
        let mut value = report_json(&report);
        value["solver"] = serde_json::json!("p3");
        value["p1_cost"] = serde_json::json!(p1_cost);
        value["gap_pct"] = serde_json::json!(report.gap_vs_p1);
        value["sweeps"] = serde_json::json!(shadow.sweeps);
        value["verified"] = serde_json::json!(verification.passed());
        println!("{}", serde_json::to_string(&value).expect("json"));
    } else {
        println!(
            "pipeline: p1 cost {} | p3 cost {} (gap {:.2}%) kept {:.1}% sweeps {} retries {}",
            p1_cost,
            report.cost.to_f64(),
            report.gap_vs_p1.unwrap_or(0.0),
            100.0 * report.kept_fraction,
            shadow.sweeps,
            report.retries
        );
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, CliError> {
    let inst = load_instance(&args.instance)?;
    let (plan, _declared_cost) = plan::load_plan(&args.plan, inst.vertex_count())
        .map_err(|e| CliError::Io(e.to_string()))?;
    let report = match verify::check_plan(&inst, &plan) {
        Ok(report) => report,
        Err(err) => return Err(CliError::Internal(err.to_string())),
    };
    if args.json {
        println!("{}", serde_json::to_string(&report).expect("json"));
    } else {
        for check in &report.checks {
            println!(
                "{} {}{}: {}",
                if check.passed { "pass" } else { "FAIL" },
                check.name,
                if check.hard { "" } else { " (advisory)" },
                check.detail
            );
        }
        println!(
            "metrics: cost {} makespan {} moves {}",
            report.cost, report.makespan, report.moves
        );
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
}

fn cmd_bench(args: BenchArgs) -> Result<u8, CliError> {
    let out_dir = args
        .out_dir
        .or_else(|| std::env::var_os("MAPF_MMOT_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("bench-out"));
    let config = ExperimentConfig {
        grid_widths: args.widths,
        robot_density: args.density,
        obstacle_density: args.obstacle_density,
        horizon: args.horizon,
        epsilons: args.epsilons,
        lambdas: args.lambdas,
        keep_fractions: args.keeps,
        repetitions: args.reps,
        seed: args.seed,
        out_dir,
        max_sweeps: args.sweeps,
        tol: 1e-3,
        non_uniform: false,
    };
    let summary = match args.study {
        Study::Scaling => {
            let result = bench::run_scaling(&config).map_err(|e| CliError::Io(e.to_string()))?;
            serde_json::json!({
                "study": "scaling",
                "rows": result.rows.len(),
                "p1_exponent": result.p1_fit.p,
                "pipeline_exponent": result.pipeline_fit.p,
            })
        }
        Study::Sensitivity => {
            let result = bench::run_sensitivity(&config).map_err(|e| CliError::Io(e.to_string()))?;
            serde_json::json!({
                "study": "sensitivity",
                "rows": result.rows.len(),
                "cells": result.cells.len(),
            })
        }
        Study::Kept => {
            let result = bench::run_cost_vs_kept(&config).map_err(|e| CliError::Io(e.to_string()))?;
            serde_json::json!({"study": "kept", "rows": result.rows.len()})
        }
        Study::Nonuniform => {
            let result = bench::run_nonuniform(&config).map_err(|e| CliError::Io(e.to_string()))?;
            serde_json::json!({"study": "nonuniform", "rows": result.rows.len()})
        }
    };
    if args.json {
        println!("{summary}");
    } else {
        println!("{summary:#}");
    }
    Ok(EXIT_OK)
}

fn cmd_plot(args: PlotArgs) -> Result<u8, CliError> {
    match args.kind {
        PlotKind::Plan => {
            let inst_path = args
                .instance
                .ok_or_else(|| CliError::Usage("--instance is required for kind=plan".into()))?;
            let inst = load_instance(&inst_path)?;
            let plan = match &args.plan {
                Some(path) => {
                    plan::load_plan(path, inst.vertex_count())
                        .map_err(|e| CliError::Io(e.to_string()))?
                        .0
                }
                None => TransportPlan::empty(),
            };
            std::fs::write(&args.out, bench::plot::plot_plan_svg(&inst, &plan))?;
        }
        PlotKind::Shadow => {
            let inst_path = args
                .instance
                .ok_or_else(|| CliError::Usage("--instance is required for kind=shadow".into()))?;
            let shadow_path = args
                .shadow
                .ok_or_else(|| CliError::Usage("--shadow is required for kind=shadow".into()))?;
            let inst = load_instance(&inst_path)?;
            let text = std::fs::read_to_string(&shadow_path)?;
            let shadow = sinkhorn::shadow_from_json(&inst, &text)
                .map_err(|e| CliError::Io(e.to_string()))?;
            std::fs::write(&args.out, bench::plot::plot_shadow_svg(&inst, &shadow))?;
        }
        PlotKind::Metrics => {
            let csv_path = args
                .csv
                .ok_or_else(|| CliError::Usage("--csv is required for kind=metrics".into()))?;
            let text = std::fs::read_to_string(&csv_path)?;
            let series = series_from_csv(&text, &args.x, &args.y)
                .map_err(CliError::Usage)?;
            std::fs::write(
                &args.out,
                bench::plot::plot_series_svg(&[series], &args.x, &args.y),
            )?;
        }
    }
    println!("wrote {}", args.out.display());
    Ok(EXIT_OK)
}

fn series_from_csv(text: &str, x: &str, y: &str) -> Result<bench::plot::Series, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty csv")?;
    let columns: Vec<&str> = header.split(',').collect();
    let xi = columns
        .iter()
        .position(|&c| c == x)
        .ok_or_else(|| format!("column `{x}` not in csv header"))?;
    let yi = columns
        .iter()
        .position(|&c| c == y)
        .ok_or_else(|| format!("column `{y}` not in csv header"))?;
    let mut points = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            continue;
        }
        if let (Ok(px), Ok(py)) = (fields[xi].parse::<f64>(), fields[yi].parse::<f64>()) {
            if px.is_finite() && py.is_finite() {
                points.push((px, py));
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(bench::plot::Series {
        name: format!("{y} vs {x}"),
        points,
    })
}
