//! End-to-end runs from a project file to files on disk.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exec::Execution;
use crate::project::{ProjectConfig, ProjectError};
use crate::report::{self, ReportError};
use crate::simulator::{SimulationError, SimulationResult};
use crate::tuner::{self, SweepCell, SweepSpec, TunerError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// One run, baseline or controlled, written under `out` with the run kind
/// as file prefix.
pub fn simulate(
    cfg: &ProjectConfig,
    out: &Path,
    controlled: bool,
    figures: bool,
) -> Result<(Vec<PathBuf>, SimulationResult), PipelineError> {
    let loaded = cfg.scenario()?;
    let prepared = loaded.scenario.prepare()?;
    let result = prepared.run(controlled)?;
    let prefix = if controlled { "controlled" } else { "baseline" };
    let written = report::write_run(out, prefix, &loaded.scenario, &result, prepared.offset(), figures)?;
    Ok((written, result))
}

/// Both runs, figure data for the controlled one, and fit reports for any
/// surrogate identified at load time.
pub fn report(cfg: &ProjectConfig, out: &Path, exec: Execution) -> Result<(Vec<PathBuf>, SimulationResult), PipelineError> {
    let loaded = cfg.scenario()?;
    let prepared = loaded.scenario.prepare()?;
    let (baseline, controlled) = prepared.run_pair(exec)?;
    let offset = prepared.offset();
    let mut written = report::write_run(out, "baseline", &loaded.scenario, &baseline, offset, false)?;
    written.extend(report::write_run(out, "controlled", &loaded.scenario, &controlled, offset, true)?);
    if loaded.winter_fit.is_some() || loaded.summer_fit.is_some() {
        let fits = serde_json::json!({ "winter": loaded.winter_fit, "summer": loaded.summer_fit });
        written.push(report::write_file(out, "fit_reports.json", &report::to_json(&fits)?)?);
    }
    Ok((written, controlled))
}

#[derive(Debug)]
pub struct TuneOutput {
    pub written: Vec<PathBuf>,
    pub optimum: Result<SweepCell, TunerError>,
}

/// Sweep, Pareto front and optimum; the heatmap table when asked.
pub fn tune(
    cfg: &ProjectConfig,
    spec: &SweepSpec,
    out: &Path,
    heatmap: bool,
    exec: Execution,
) -> Result<TuneOutput, PipelineError> {
    let loaded = cfg.scenario()?;
    let outcome = tuner::sweep(&loaded.scenario, spec, exec)?;
    let front = tuner::pareto_front(&outcome.cells);
    let mut written = vec![
        report::write_file(out, "tune_cells.csv", &report::cells_csv(&outcome.cells))?,
        report::write_file(out, "tune_pareto.csv", &report::cells_csv(&front))?,
        report::write_file(out, "tune_skipped.csv", &report::skipped_csv(&outcome.skipped))?,
    ];
    if heatmap {
        let map = tuner::heatmap(&outcome.cells, spec);
        written.push(report::write_file(out, "tune_heatmap.csv", &report::heatmap_csv(&map))?);
    }
    let optimum = tuner::select_optimum(&front, spec.comfort_bound);
    let payload = match &optimum {
        Ok(c) => serde_json::json!({ "comfort_bound": spec.comfort_bound, "optimum": c }),
        Err(e) => serde_json::json!({ "comfort_bound": spec.comfort_bound, "optimum": null, "reason": e.to_string() }),
    };
    written.push(report::write_file(out, "tune_optimum.json", &report::to_json(&payload)?)?);
    Ok(TuneOutput { written, optimum })
}
