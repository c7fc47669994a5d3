//! Experiment harness: scaling, parameter sensitivity, cost-versus-retention
//! and non-uniform cost studies, with CSV outputs, SVG plots and a manifest
//! tying every row to its artifact files.
//!
//! Rows are computed in a worker pool over immutable instances; output order
//! is fixed by the job list, never by completion order. Wall-time columns are
//! the only nondeterministic fields in any emitted file.

pub mod plot;

use crate::exact::{self, SolveError};
use crate::instance::{self, generate_grid, CostModel};
use crate::project::{self, P3Params, RetentionPolicy};
use crate::sinkhorn::{self, SinkhornParams};
use crate::verify;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config invalid: {0}")]
    BadConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Knobs shared by every study.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Square grid widths; K = width^2.
    pub grid_widths: Vec<usize>,
    pub robot_density: f64,
    pub obstacle_density: f64,
    pub horizon: usize,
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub keep_fractions: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub max_sweeps: usize,
    pub tol: f64,
    /// Use the randomized per-cell cost landscape instead of uniform costs.
    pub non_uniform: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid_widths: vec![10, 15, 20],
            robot_density: 0.05,
            obstacle_density: 0.0,
            horizon: 30,
            epsilons: vec![0.2],
            lambdas: vec![0.0],
            keep_fractions: vec![0.4],
            repetitions: 3,
            seed: 1,
            out_dir: PathBuf::from("bench-out"),
            max_sweeps: 400,
            tol: 1e-3,
            non_uniform: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.grid_widths.is_empty()
            || self.epsilons.is_empty()
            || self.lambdas.is_empty()
            || self.keep_fractions.is_empty()
        {
            return Err(BenchError::BadConfig("every sweep list needs entries".into()));
        }
        if !(self.robot_density > 0.0 && self.robot_density <= 0.5) {
            return Err(BenchError::BadConfig(format!(
                "robot density {} outside (0, 0.5]",
                self.robot_density
            )));
        }
        if !(0.0..=0.5).contains(&self.obstacle_density) {
            return Err(BenchError::BadConfig(format!(
                "obstacle density {} outside [0, 0.5]",
                self.obstacle_density
            )));
        }
        if self.repetitions == 0 {
            return Err(BenchError::BadConfig("repetitions must be positive".into()));
        }
        Ok(())
    }
}

/// One measured pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub k: usize,
    pub n: usize,
    pub t: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub seed: u64,
    pub keep: f64,
    pub kept_pct: f64,
    pub p1_cost: f64,
    pub p3_cost: f64,
    pub gap_pct: f64,
    pub p1_time_s: f64,
    pub sinkhorn_time_s: f64,
    pub p3_time_s: f64,
    pub speedup: f64,
    pub sweeps: usize,
    pub retries: usize,
    pub feasible: bool,
    pub integral: bool,
}

pub const CSV_HEADER: &str = "K,N,T,epsilon,lambda,seed,keep,kept_pct,p1_cost,p3_cost,gap_pct,p1_time_s,sinkhorn_time_s,p3_time_s,speedup,sweeps,retries,feasible,integral";

/// Column indices of wall-time fields, the only nondeterministic ones.
pub const TIME_COLUMNS: [usize; 4] = [11, 12, 13, 14];

pub fn rows_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.4},{},{},{:.4},{:.6},{:.6},{:.6},{:.4},{},{},{},{}",
            r.k,
            r.n,
            r.t,
            r.epsilon,
            r.lambda,
            r.seed,
            r.keep,
            r.kept_pct,
            r.p1_cost,
            r.p3_cost,
            r.gap_pct,
            r.p1_time_s,
            r.sinkhorn_time_s,
            r.p3_time_s,
            r.speedup,
            r.sweeps,
            r.retries,
            r.feasible,
            r.integral
        );
    }
    out
}

/// One pipeline case: exact solve, sweep relaxation, pruned projection.
struct CaseJob {
    width: usize,
    seed: u64,
    epsilon: f64,
    lambda: f64,
    keep: f64,
}

struct CaseOutcome {
    row: MetricsRow,
    instance_json: String,
    p1_plan_json: String,
    p3_plan_json: Option<String>,
    mask_json: Option<String>,
    shadow_trace_csv: String,
}

fn run_case(config: &ExperimentConfig, job: &CaseJob) -> Result<CaseOutcome, BenchError> {
    let k = job.width * job.width;
    let robots = ((config.robot_density * k as f64).round() as usize).max(1);
    let obstacles = (config.obstacle_density * k as f64).round() as usize;
    let mut inst = generate_grid(job.width, job.width, obstacles, robots, job.seed)
        .map_err(|e| BenchError::BadConfig(e.to_string()))?
        .with_horizon(config.horizon);
    if config.non_uniform {
        inst = inst
            .with_cost_model(CostModel::NonUniformRandom {
                arrival_min: 0.6,
                arrival_max: 1.0,
                wait_min: 0.1,
                wait_max: 0.5,
                seed: job.seed,
            })
            .map_err(|e| BenchError::BadConfig(e.to_string()))?;
    }
    let horizon = config.horizon;

    let p1_started = Instant::now();
    let p1 = exact::solve_p1(&inst, horizon);
    let p1_time = p1_started.elapsed().as_secs_f64();
    let (p1_plan, p1_report) = match p1 {
        Ok(ok) => ok,
        Err(SolveError::Infeasible { .. }) => {
            // Record the failed row; the study proceeds.
            return Ok(CaseOutcome {
                row: MetricsRow {
                    k,
                    n: robots,
                    t: horizon,
                    epsilon: job.epsilon,
                    lambda: job.lambda,
                    seed: job.seed,
                    keep: job.keep,
                    kept_pct: 0.0,
                    p1_cost: f64::NAN,
                    p3_cost: f64::NAN,
                    gap_pct: f64::NAN,
                    p1_time_s: p1_time,
                    sinkhorn_time_s: 0.0,
                    p3_time_s: 0.0,
                    speedup: f64::NAN,
                    sweeps: 0,
                    retries: 0,
                    feasible: false,
                    integral: false,
                },
                instance_json: instance::io::to_json(&inst),
                p1_plan_json: String::new(),
                p3_plan_json: None,
                mask_json: None,
                shadow_trace_csv: String::new(),
            });
        }
        Err(err) => return Err(err.into()),
    };

    let sinkhorn_started = Instant::now();
    let shadow = sinkhorn::run(
        &inst,
        horizon,
        SinkhornParams {
            epsilon: job.epsilon,
            max_sweeps: config.max_sweeps,
            tol: config.tol,
            ..Default::default()
        },
    )
    .map_err(|e| BenchError::BadConfig(e.to_string()))?;
    let sinkhorn_time = sinkhorn_started.elapsed().as_secs_f64();

    let p3_started = Instant::now();
    let (p3_plan, p3_report) = project::solve_p3(
        &inst,
        &shadow,
        P3Params {
            lambda: job.lambda,
            delta: 1e-6,
            retention: RetentionPolicy::KeepFraction(job.keep),
        },
    )?;
    let p3_time = p3_started.elapsed().as_secs_f64();

    let p1_verified = verify::check_plan(&inst, &p1_plan)
        .map(|r| r.passed())
        .unwrap_or(false);
    let p3_verified = verify::check_plan(&inst, &p3_plan)
        .map(|r| r.passed())
        .unwrap_or(false);

    let p1_cost = p1_report.cost.to_f64();
    let p3_cost = p3_report.cost.to_f64();
    let gap_pct = if p1_cost > 0.0 {
        100.0 * (p3_cost - p1_cost) / p1_cost
    } else {
        0.0
    };
    let pipeline_time = sinkhorn_time + p3_time;
    let row = MetricsRow {
        k,
        n: robots,
        t: horizon,
        epsilon: job.epsilon,
        lambda: job.lambda,
        seed: job.seed,
        keep: job.keep,
        kept_pct: 100.0 * p3_report.kept_fraction,
        p1_cost,
        p3_cost,
        gap_pct,
        p1_time_s: p1_time,
        sinkhorn_time_s: sinkhorn_time,
        p3_time_s: p3_time,
        speedup: if pipeline_time > 0.0 {
            p1_time / pipeline_time
        } else {
            f64::NAN
        },
        sweeps: shadow.sweeps,
        retries: p3_report.retries,
        feasible: true,
        integral: p1_verified && p3_verified,
    };

    let mask = project::prune(&inst, &shadow, RetentionPolicy::KeepFraction(job.keep));
    Ok(CaseOutcome {
        row,
        instance_json: instance::io::to_json(&inst),
        p1_plan_json: crate::plan::plan_to_json(&p1_plan, &p1_report.cost),
        p3_plan_json: Some(crate::plan::plan_to_json(&p3_plan, &p3_report.cost)),
        mask_json: Some(project::mask_to_json(&mask)),
        shadow_trace_csv: sinkhorn::trace_to_csv(&shadow),
    })
}

#[derive(Serialize)]
struct ManifestRow {
    index: usize,
    k: usize,
    seed: u64,
    epsilon: f64,
    lambda: f64,
    keep: f64,
    instance_file: String,
    p1_plan_file: String,
    p3_plan_file: Option<String>,
    mask_file: Option<String>,
    trace_file: String,
}

fn case_tag(job: &CaseJob) -> String {
    format!(
        "w{}_s{}_e{}_l{}_k{}",
        job.width,
        job.seed,
        format!("{:.3}", job.epsilon).replace('.', "p"),
        format!("{:.3}", job.lambda).replace('.', "p"),
        format!("{:.3}", job.keep).replace('.', "p"),
    )
}

/// Execute jobs in a worker pool and write every artifact under `dir`.
fn execute(
    config: &ExperimentConfig,
    jobs: Vec<CaseJob>,
    dir: &Path,
) -> Result<Vec<MetricsRow>, BenchError> {
    std::fs::create_dir_all(dir)?;
    let outcomes: Vec<Result<CaseOutcome, BenchError>> = jobs
        .par_iter()
        .map(|job| run_case(config, job))
        .collect();

    let mut rows = Vec::with_capacity(jobs.len());
    let mut manifest = Vec::with_capacity(jobs.len());
    for (index, (job, outcome)) in jobs.iter().zip(outcomes).enumerate() {
        let outcome = outcome?;
        let tag = case_tag(job);
        let instance_file = format!("instance_{tag}.json");
        std::fs::write(dir.join(&instance_file), &outcome.instance_json)?;
        let p1_plan_file = format!("plan_p1_{tag}.json");
        std::fs::write(dir.join(&p1_plan_file), &outcome.p1_plan_json)?;
        let p3_plan_file = match &outcome.p3_plan_json {
            Some(json) => {
                let name = format!("plan_p3_{tag}.json");
                std::fs::write(dir.join(&name), json)?;
                Some(name)
            }
            None => None,
        };
        let mask_file = match &outcome.mask_json {
            Some(json) => {
                let name = format!("mask_{tag}.json");
                std::fs::write(dir.join(&name), json)?;
                Some(name)
            }
            None => None,
        };
        let trace_file = format!("trace_{tag}.csv");
        std::fs::write(dir.join(&trace_file), &outcome.shadow_trace_csv)?;

        manifest.push(ManifestRow {
            index,
            k: outcome.row.k,
            seed: job.seed,
            epsilon: job.epsilon,
            lambda: job.lambda,
            keep: job.keep,
            instance_file,
            p1_plan_file,
            p3_plan_file,
            mask_file,
            trace_file,
        });
        rows.push(outcome.row);
    }

    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serialization"),
    )?;
    std::fs::write(dir.join("rows.csv"), rows_to_csv(&rows))?;
    Ok(rows)
}

/// Least-squares fit of `a * x^p + b` over a grid of exponents.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub r2: f64,
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> PowerLawFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sst: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();

    let mut best = PowerLawFit {
        a: 0.0,
        p: 1.0,
        b: y_mean,
        r2: 0.0,
    };
    let mut best_sse = f64::INFINITY;
    let mut p = 0.05f64;
    while p <= 3.0 {
        let us: Vec<f64> = xs.iter().map(|&x| x.powf(p)).collect();
        let u_sum: f64 = us.iter().sum();
        let y_sum: f64 = ys.iter().sum();
        let uu: f64 = us.iter().map(|u| u * u).sum();
        let uy: f64 = us.iter().zip(ys).map(|(u, y)| u * y).sum();
        let denom = uu - u_sum * u_sum / n;
        if denom.abs() > 1e-12 {
            let a = (uy - u_sum * y_sum / n) / denom;
            let b = (y_sum - a * u_sum) / n;
            let sse: f64 = us
                .iter()
                .zip(ys)
                .map(|(u, y)| (a * u + b - y).powi(2))
                .sum();
            if sse < best_sse {
                best_sse = sse;
                best = PowerLawFit {
                    a,
                    p,
                    b,
                    r2: if sst > 0.0 { 1.0 - sse / sst } else { 1.0 },
                };
            }
        }
        p += 0.005;
    }
    best
}

#[derive(Debug, Serialize)]
pub struct ScalingResult {
    pub rows: Vec<MetricsRow>,
    pub p1_fit: PowerLawFit,
    pub pipeline_fit: PowerLawFit,
}

/// Scaling study: exact solve versus the relaxation pipeline across grid
/// sizes, with fitted time exponents.
pub fn run_scaling(config: &ExperimentConfig) -> Result<ScalingResult, BenchError> {
    config.validate()?;
    let dir = config.out_dir.join("scaling");
    let mut jobs = Vec::new();
    for &width in &config.grid_widths {
        for rep in 0..config.repetitions {
            jobs.push(CaseJob {
                width,
                seed: config.seed + rep as u64,
                epsilon: config.epsilons[0],
                lambda: config.lambdas[0],
                keep: config.keep_fractions[0],
            });
        }
    }
    let rows = execute(config, jobs, &dir)?;

    let ok: Vec<&MetricsRow> = rows.iter().filter(|r| r.feasible).collect();
    let xs: Vec<f64> = ok.iter().map(|r| r.k as f64).collect();
    let p1_times: Vec<f64> = ok.iter().map(|r| r.p1_time_s).collect();
    let pipe_times: Vec<f64> = ok
        .iter()
        .map(|r| r.sinkhorn_time_s + r.p3_time_s)
        .collect();
    let p1_fit = fit_power_law(&xs, &p1_times);
    let pipeline_fit = fit_power_law(&xs, &pipe_times);

    let result = ScalingResult {
        rows,
        p1_fit,
        pipeline_fit,
    };
    std::fs::write(
        dir.join("fits.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "p1": p1_fit,
            "pipeline": pipeline_fit,
        }))
        .expect("fit serialization"),
    )?;

    // Time-versus-size curves for a quick visual read.
    let mut p1_series: Vec<(f64, f64)> = xs.iter().copied().zip(p1_times).collect();
    p1_series.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pipe_series: Vec<(f64, f64)> = xs.iter().copied().zip(pipe_times).collect();
    pipe_series.sort_by(|a, b| a.0.total_cmp(&b.0));
    let svg = plot::plot_series_svg(
        &[
            plot::Series {
                name: "exact".into(),
                points: p1_series,
            },
            plot::Series {
                name: "pipeline".into(),
                points: pipe_series,
            },
        ],
        "K",
        "seconds",
    );
    std::fs::write(dir.join("times.svg"), svg)?;
    Ok(result)
}

#[derive(Debug, Serialize)]
pub struct SensitivityCell {
    pub epsilon: f64,
    pub lambda: f64,
    pub mean_gap_pct: f64,
    pub mean_sweeps: f64,
    pub mean_kept_pct: f64,
    pub feasible_runs: usize,
    pub total_runs: usize,
}

#[derive(Debug, Serialize)]
pub struct SensitivityResult {
    pub rows: Vec<MetricsRow>,
    pub cells: Vec<SensitivityCell>,
}

/// Sensitivity study over the (epsilon, lambda) grid on matched instances.
pub fn run_sensitivity(config: &ExperimentConfig) -> Result<SensitivityResult, BenchError> {
    config.validate()?;
    let dir = config.out_dir.join("sensitivity");
    let width = config.grid_widths[0];
    let mut jobs = Vec::new();
    for &epsilon in &config.epsilons {
        for &lambda in &config.lambdas {
            for rep in 0..config.repetitions {
                jobs.push(CaseJob {
                    width,
                    seed: config.seed + rep as u64,
                    epsilon,
                    lambda,
                    keep: config.keep_fractions[0],
                });
            }
        }
    }
    let rows = execute(config, jobs, &dir)?;

    let mut cells = Vec::new();
    for &epsilon in &config.epsilons {
        for &lambda in &config.lambdas {
            let cell_rows: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.epsilon == epsilon && r.lambda == lambda)
                .collect();
            let feasible: Vec<&&MetricsRow> =
                cell_rows.iter().filter(|r| r.feasible).collect();
            let mean = |f: &dyn Fn(&MetricsRow) -> f64| -> f64 {
                if feasible.is_empty() {
                    f64::NAN
                } else {
                    feasible.iter().map(|r| f(r)).sum::<f64>() / feasible.len() as f64
                }
            };
            cells.push(SensitivityCell {
                epsilon,
                lambda,
                mean_gap_pct: mean(&|r| r.gap_pct),
                mean_sweeps: mean(&|r| r.sweeps as f64),
                mean_kept_pct: mean(&|r| r.kept_pct),
                feasible_runs: feasible.len(),
                total_runs: cell_rows.len(),
            });
        }
    }
    let mut cell_csv = String::from(
        "epsilon,lambda,mean_gap_pct,mean_sweeps,mean_kept_pct,feasible_runs,total_runs\n",
    );
    for c in &cells {
        let _ = writeln!(
            cell_csv,
            "{},{},{:.4},{:.2},{:.4},{},{}",
            c.epsilon,
            c.lambda,
            c.mean_gap_pct,
            c.mean_sweeps,
            c.mean_kept_pct,
            c.feasible_runs,
            c.total_runs
        );
    }
    std::fs::write(dir.join("cells.csv"), cell_csv)?;
    Ok(SensitivityResult { rows, cells })
}

#[derive(Debug, Serialize)]
pub struct KeptResult {
    pub rows: Vec<MetricsRow>,
}

/// Cost degradation versus retained-arc fraction.
pub fn run_cost_vs_kept(config: &ExperimentConfig) -> Result<KeptResult, BenchError> {
    config.validate()?;
    let dir = config.out_dir.join("kept");
    let mut jobs = Vec::new();
    for &width in &config.grid_widths {
        for &keep in &config.keep_fractions {
            for rep in 0..config.repetitions {
                jobs.push(CaseJob {
                    width,
                    seed: config.seed + rep as u64,
                    epsilon: config.epsilons[0],
                    lambda: config.lambdas[0],
                    keep,
                });
            }
        }
    }
    let rows = execute(config, jobs, &dir)?;

    // Gap-versus-kept curve per grid size, averaged over repetitions.
    let mut series = Vec::new();
    for &width in &config.grid_widths {
        let k = width * width;
        let mut points = Vec::new();
        for &keep in &config.keep_fractions {
            let sel: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.k == k && r.keep == keep && r.feasible)
                .collect();
            if !sel.is_empty() {
                let gap = sel.iter().map(|r| r.gap_pct).sum::<f64>() / sel.len() as f64;
                points.push((100.0 * keep, gap));
            }
        }
        series.push(plot::Series {
            name: format!("K={k}"),
            points,
        });
    }
    std::fs::write(
        dir.join("gap_vs_kept.svg"),
        plot::plot_series_svg(&series, "kept %", "gap %"),
    )?;
    Ok(KeptResult { rows })
}

/// Non-uniform cost study: the same pipeline over randomized terrain costs.
pub fn run_nonuniform(config: &ExperimentConfig) -> Result<KeptResult, BenchError> {
    let mut config = config.clone();
    config.non_uniform = true;
    config.validate()?;
    let dir = config.out_dir.join("nonuniform");
    let mut jobs = Vec::new();
    for &width in &config.grid_widths {
        for rep in 0..config.repetitions {
            jobs.push(CaseJob {
                width,
                seed: config.seed + rep as u64,
                epsilon: config.epsilons[0],
                lambda: config.lambdas[0],
                keep: config.keep_fractions[0],
            });
        }
    }
    let rows = execute(&config, jobs, &dir)?;
    Ok(KeptResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_fit_recovers_planted_exponent() {
        let xs: Vec<f64> = (1..=12).map(|i| (i * 100) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3e-4 * x.powf(1.7) + 2.0).collect();
        let fit = fit_power_law(&xs, &ys);
        assert!((fit.p - 1.7).abs() < 0.02, "fit {fit:?}");
        assert!(fit.r2 > 0.999);
    }

    #[test]
    fn config_validation_rejects_bad_density() {
        let config = ExperimentConfig {
            robot_density: 0.9,
            ..Default::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn single_cell_sensitivity_run() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            grid_widths: vec![4],
            horizon: 8,
            repetitions: 1,
            robot_density: 0.15,
            epsilons: vec![0.2],
            lambdas: vec![0.0],
            out_dir: dir.path().to_path_buf(),
            max_sweeps: 60,
            ..Default::default()
        };
        let result = run_sensitivity(&config).unwrap();
        assert_eq!(result.cells.len(), 1);
        let cell = &result.cells[0];
        assert_eq!(cell.total_runs, 1);
        assert_eq!(cell.feasible_runs, 1);
        assert!(cell.mean_gap_pct >= 0.0);
        assert!(dir.path().join("sensitivity/cells.csv").exists());
    }

    #[test]
    fn tiny_scaling_run_produces_verified_rows() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            grid_widths: vec![4],
            horizon: 8,
            repetitions: 1,
            robot_density: 0.15,
            out_dir: dir.path().to_path_buf(),
            max_sweeps: 60,
            ..Default::default()
        };
        let result = run_scaling(&config).unwrap();
        assert_eq!(result.rows.len(), 1);
        let row = &result.rows[0];
        assert!(row.feasible);
        assert!(row.integral);
        assert!(row.gap_pct >= 0.0);
        assert!(dir.path().join("scaling/rows.csv").exists());
        assert!(dir.path().join("scaling/manifest.json").exists());
    }
}
