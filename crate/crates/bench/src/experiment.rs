//! Experiment execution: replicated runs, mode comparisons and rate studies.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sqvi::theory::step_size_interval;
use sqvi::{natural_residual, solve, AcceleratedPrimalDual, Config, Constants, ProjectionMode, Report, SqviError};

use crate::error::{BenchError, Result};
use crate::output;
use crate::problems::{build, noise_free, Built, ProblemSpec};
use crate::report::{ModeComparison, ModeSummary, PublishedComparison, RunSettings, SummaryReport, SCHEMA};
use crate::synthetic::SyntheticSpec;

/// Iteration cap for the noise-free reference solve.
const REFERENCE_HORIZON: usize = 20_000;
const REFERENCE_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    TrajectoryCsv,
    SummaryJson,
    PlotdataCsv,
}

impl FromStr for Emit {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trajectory_csv" => Ok(Emit::TrajectoryCsv),
            "summary_json" => Ok(Emit::SummaryJson),
            "plotdata_csv" => Ok(Emit::PlotdataCsv),
            other => Err(BenchError::Config(format!(
                "unknown emit target `{other}` (expected trajectory_csv, summary_json or plotdata_csv)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub synthetic: SyntheticSpec,
    pub modes: Vec<ProjectionMode>,
    /// `None` picks the midpoint of the admissible step interval.
    pub eta: Option<f64>,
    pub alpha_bar: f64,
    pub rho: f64,
    pub horizon: usize,
    pub seed: u64,
    pub batch_cap: Option<u64>,
    pub residual_tol: Option<f64>,
    /// Overrides the problem's noise scale.
    pub noise_scale: Option<f64>,
    pub replications: usize,
    pub emit: BTreeSet<Emit>,
    /// Output directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    /// Worker threads for replications; rayon's default when absent.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::Example1,
            synthetic: SyntheticSpec::default(),
            modes: vec![ProjectionMode::Inexact],
            eta: None,
            alpha_bar: 0.5,
            rho: 0.95,
            horizon: 100,
            seed: 0,
            batch_cap: None,
            residual_tol: None,
            noise_scale: None,
            replications: 1,
            emit: [Emit::TrajectoryCsv, Emit::SummaryJson, Emit::PlotdataCsv].into(),
            out: None,
            threads: None,
        }
    }
}

/// All replications of one mode, ordered by replication index.
#[derive(Debug, Clone)]
pub struct ModeRuns {
    pub mode: ProjectionMode,
    pub seeds: Vec<u64>,
    pub reports: Vec<Report>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: SummaryReport,
    pub runs: Vec<ModeRuns>,
    pub constants: Constants,
    pub eta: f64,
}

impl ExperimentConfig {
    fn check(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(BenchError::Config("replications must be >= 1".into()));
        }
        if self.modes.is_empty() {
            return Err(BenchError::Config("at least one mode is required".into()));
        }
        if self.threads == Some(0) {
            return Err(BenchError::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    /// Step size to use: explicit, or the midpoint of the interval for the
    /// problem constants.
    pub fn resolve_eta(&self, constants: &Constants) -> Result<f64> {
        match self.eta {
            Some(eta) => Ok(eta),
            None => Ok(step_size_interval(constants.mu, constants.lipschitz, constants.gamma)?.midpoint()),
        }
    }

    /// Solver configuration for one replication.
    ///
    /// Constants are attached in estimated form so that premise violations
    /// surface as warnings: the harness must be able to run configurations
    /// outside the theory, e.g. to measure how conservative the bound is.
    pub fn solver_config(&self, mode: ProjectionMode, eta: f64, constants: &Constants, seed: u64) -> Config {
        let mut cfg = Config::new(eta, self.alpha_bar, self.rho, self.horizon, mode)
            .with_seed(seed)
            .with_constants(constants.estimated())
            .tracking_residual(true);
        cfg.batch_cap = self.batch_cap;
        if let Some(tol) = self.residual_tol {
            cfg = cfg.with_residual_tol(tol);
        }
        cfg
    }

    fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    fn in_pool<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| BenchError::Config(format!("cannot start thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

fn replicate(cfg: &ExperimentConfig, built: &Built, mode: ProjectionMode, eta: f64) -> Result<ModeRuns> {
    let seeds = cfg.seeds();
    let inner = AcceleratedPrimalDual::default();
    let reports = cfg.in_pool(|| {
        seeds
            .par_iter()
            .map(|&seed| solve(&built.problem, &cfg.solver_config(mode, eta, &built.constants, seed), &inner))
            .collect::<std::result::Result<Vec<_>, SqviError>>()
    })??;
    Ok(ModeRuns { mode, seeds, reports })
}

fn wall(report: &Report) -> Duration {
    Duration::from_nanos(report.records.last().map_or(0, |r| r.wall_nanos))
}

fn summarize(built: &Built, runs: &ModeRuns, eta: f64) -> Result<ModeSummary> {
    let first = &runs.reports[0];
    let x = first.final_x.clone();
    let utilities = match &built.problem.payoffs {
        Some(p) => Some(p.utilities(&x)?),
        None => None,
    };
    let walls: Vec<f64> = runs.reports.iter().map(|r| wall(r).as_secs_f64()).collect();
    let errors: Option<Vec<f64>> = runs
        .reports
        .iter()
        .map(|r| r.records.last().and_then(|rec| rec.error_to_reference))
        .collect();
    Ok(ModeSummary {
        mode: runs.mode,
        seeds: runs.seeds.clone(),
        natural_residual: natural_residual(&built.problem, &x, eta)?,
        self_violation: built.problem.moving_set.max_violation(&x, &x),
        final_utilities: utilities,
        final_x: x,
        iterations: first.records.len(),
        total_samples: first.total_samples,
        total_inner_iterations: first.total_inner_iterations,
        inner_iterations_used: first.inner_iterations_used,
        wall_seconds: walls[0],
        mean_wall_seconds: walls.iter().sum::<f64>() / walls.len() as f64,
        mean_final_error: errors.map(|e| e.iter().sum::<f64>() / e.len() as f64),
        schedule_truncated: runs.reports.iter().any(|r| r.schedule_truncated),
    })
}

fn compare_modes(modes: &[ModeSummary]) -> Option<ModeComparison> {
    let exact = modes.iter().find(|m| m.mode == ProjectionMode::Exact)?;
    let inexact = modes.iter().find(|m| m.mode == ProjectionMode::Inexact)?;
    let utility_delta = match (&exact.final_utilities, &inexact.final_utilities) {
        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(a, b)| b - a).collect()),
        _ => None,
    };
    Some(ModeComparison {
        final_point_distance: sqvi::scalar::distance(&exact.final_x, &inexact.final_x),
        wall_time_ratio_exact_over_inexact: (inexact.mean_wall_seconds > 0.0)
            .then(|| exact.mean_wall_seconds / inexact.mean_wall_seconds),
        utility_delta,
    })
}

fn published_comparison(built: &Built, modes: &[ModeSummary], eta: f64) -> Result<Option<PublishedComparison>> {
    let (Some(targets), Some(market)) = (&built.published, &built.market) else {
        return Ok(None);
    };
    let ours = modes
        .iter()
        .find(|m| m.mode == ProjectionMode::Inexact)
        .unwrap_or(&modes[0]);
    let utilities = market.utilities(&ours.final_x)?;
    let at_published = market.utilities(&targets.q_star)?;
    let residual = natural_residual(&built.problem, &targets.q_star, eta)?;
    Ok(Some(PublishedComparison::new(
        targets.clone(),
        &ours.final_x,
        &utilities,
        at_published,
        residual,
    )))
}

/// Long noise-free exact solve used as the suboptimality reference.
pub fn reference_point(cfg: &ExperimentConfig, eta: f64) -> Result<Vec<f64>> {
    let built = noise_free(&cfg.problem, &cfg.synthetic)?;
    if let Some(x) = &built.problem.reference_solution {
        return Ok(x.clone());
    }
    let mut solver = Config::new(eta, cfg.alpha_bar, cfg.rho, REFERENCE_HORIZON, ProjectionMode::Exact)
        .with_batch_cap(1)
        .with_residual_tol(REFERENCE_RESIDUAL);
    solver.constants = Some(built.constants.estimated());
    let report = solve(&built.problem, &solver, &AcceleratedPrimalDual::default())?;
    Ok(report.final_x)
}

/// Runs every configured mode over all replications and writes the
/// requested artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.check()?;
    if let Some(dir) = &cfg.out {
        output::prepare_dir(dir)?;
    }
    let built = build(&cfg.problem, &cfg.synthetic, cfg.noise_scale)?;
    let eta = cfg.resolve_eta(&built.constants)?;

    let mut runs = Vec::with_capacity(cfg.modes.len());
    for &mode in &cfg.modes {
        runs.push(replicate(cfg, &built, mode, eta)?);
    }
    let modes = runs
        .iter()
        .map(|r| summarize(&built, r, eta))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings: Vec<String> = runs[0].reports[0].warnings.clone();
    if modes.iter().any(|m| m.schedule_truncated) {
        warnings.push("batch_cap truncated the sample schedule".into());
    }
    if let Some(m) = &built.market {
        if m.domain_clamps() > 0 {
            warnings.push(format!("square-root argument clamped {} times", m.domain_clamps()));
        }
    }

    let summary = SummaryReport {
        schema: SCHEMA.to_string(),
        problem: cfg.problem.to_string(),
        settings: RunSettings {
            eta,
            alpha_bar: cfg.alpha_bar,
            rho: cfg.rho,
            horizon: cfg.horizon,
            seed: cfg.seed,
            replications: cfg.replications,
            batch_cap: cfg.batch_cap,
            residual_tol: cfg.residual_tol,
            noise_scale: cfg.noise_scale,
        },
        constants: built.constants,
        comparison: compare_modes(&modes),
        published: published_comparison(&built, &modes, eta)?,
        modes,
        warnings,
    };

    if let Some(dir) = &cfg.out {
        if cfg.emit.contains(&Emit::TrajectoryCsv) {
            for r in &runs {
                for (rep, report) in r.reports.iter().enumerate() {
                    output::write_trajectory(&dir.join(output::trajectory_name(r.mode, rep)), report)?;
                }
            }
        }
        if cfg.emit.contains(&Emit::PlotdataCsv) {
            let reference = reference_point(cfg, eta)?;
            output::write_plotdata(&dir.join(output::PLOTDATA_FILE), &built, &runs, &reference)?;
        }
        if cfg.emit.contains(&Emit::SummaryJson) {
            output::write_summary(&dir.join(output::SUMMARY_FILE), &summary)?;
        }
    }
    Ok(Outcome {
        summary,
        runs,
        constants: built.constants,
        eta,
    })
}

/// Same as [`run`] with both projection modes.
pub fn compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let cfg = ExperimentConfig {
        modes: vec![ProjectionMode::Exact, ProjectionMode::Inexact],
        ..cfg.clone()
    };
    run(&cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub horizon: usize,
    pub mean_error: f64,
    /// `None` when the bound's premise fails for this configuration.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub mode: ProjectionMode,
    pub initial_error: f64,
    pub rows: Vec<RateRow>,
    /// Mean error at every iteration `1..=max(horizons)`.
    pub mean_errors: Vec<f64>,
    pub total_samples: Vec<u64>,
    /// Why the bound column is empty, if it is.
    pub bound_unavailable: Option<String>,
}

impl RateStudy {
    /// True when every row with a bound satisfies it.
    pub fn within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.bound.is_none_or(|b| r.mean_error <= b))
    }
}

/// Mean error to the reference solution against the a-priori bound for each
/// horizon. One run of the longest horizon per seed serves every row: the
/// schedules do not depend on `T`, so its prefix is the shorter run.
pub fn rate_study(cfg: &ExperimentConfig, horizons: &[usize]) -> Result<RateStudy> {
    cfg.check()?;
    let t_max = horizons
        .iter()
        .copied()
        .max()
        .filter(|&t| t > 0 && horizons.iter().all(|&h| h > 0))
        .ok_or_else(|| BenchError::Config("horizons must be positive".into()))?;
    if let Some(dir) = &cfg.out {
        output::prepare_dir(dir)?;
    }
    let built = build(&cfg.problem, &cfg.synthetic, cfg.noise_scale)?;
    let Some(reference) = built.problem.reference_solution.clone() else {
        return Err(BenchError::Config(format!(
            "rate study needs a problem with a known solution; `{}` has none",
            cfg.problem
        )));
    };
    let eta = cfg.resolve_eta(&built.constants)?;
    let mode = cfg.modes[0];
    let run_cfg = ExperimentConfig {
        horizon: t_max,
        residual_tol: None,
        ..cfg.clone()
    };
    let runs = replicate(&run_cfg, &built, mode, eta)?;

    let initial_error = sqvi::scalar::distance(&runs.reports[0].initial_x, &reference);
    let n = runs.reports.len() as f64;
    let mean_errors: Vec<f64> = (0..t_max)
        .map(|k| {
            runs.reports
                .iter()
                .map(|r| r.records[k].error_to_reference.unwrap_or(f64::NAN))
                .sum::<f64>()
                / n
        })
        .collect();
    let mut cumulative = 0u64;
    let total_samples = runs.reports[0]
        .records
        .iter()
        .map(|r| {
            cumulative += r.batch_size;
            cumulative
        })
        .collect();

    let mut bound_cfg = run_cfg.solver_config(mode, eta, &built.constants, cfg.seed);
    bound_cfg.constants = Some(built.constants);
    let mut bound_unavailable = None;
    let mut rows = Vec::with_capacity(horizons.len());
    for &t in horizons {
        let bound = match sqvi::theoretical_error_bound(t, initial_error, &bound_cfg) {
            Ok(b) => Some(b),
            Err(e) => {
                bound_unavailable.get_or_insert_with(|| e.to_string());
                None
            }
        };
        rows.push(RateRow {
            horizon: t,
            mean_error: mean_errors[t - 1],
            bound,
        });
    }
    let study = RateStudy {
        mode,
        initial_error,
        rows,
        mean_errors,
        total_samples,
        bound_unavailable,
    };
    if let Some(dir) = &cfg.out {
        output::write_rate_study(&dir.join(output::RATE_FILE), &study)?;
    }
    Ok(study)
}
