//! Report emission: summary JSON, ledger CSV, figure data and sweep tables.
//!
//! CSV floats use six decimals, JSON floats use the shortest representation
//! that round-trips. Nothing written depends on the wall clock.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Datelike, FixedOffset, NaiveDate};
use serde::Serialize;
use thiserror::Error;

use crate::comfort::{classify, pmv, BuildingClass, ComfortError, ComfortInput, ComfortResult};
use crate::season::Mode;
use crate::simulator::{ScenarioConfig, SimulationResult, StepRecord, Summary};
use crate::timeseries::format_timestamp;
use crate::tuner::{HeatmapEntry, SkippedCell, SweepCell};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Comfort(#[from] ComfortError),
}

/// Fixed six-decimal formatting without negative zero.
pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub const LEDGER_HEADER: &str = "timestamp,mode,alpha,delta_T,e_pred,e_solar,grid_import,emissions,delta_co2";

pub fn ledger_csv(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 96);
    out.push_str(LEDGER_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_timestamp(r.timestamp),
            r.mode,
            fmt6(r.alpha),
            fmt6(r.delta_t),
            fmt6(r.e_pred),
            fmt6(r.e_solar),
            fmt6(r.grid_import),
            fmt6(r.emissions),
            fmt6(r.delta_co2),
        );
    }
    out
}

/// Comfort check for one season: the user setpoint and the same setpoint
/// shifted by the largest daily setpoint deviation in the storage direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeasonComfort {
    pub mode: Mode,
    pub setpoint: f64,
    pub max_delta_t: f64,
    pub shifted_temp: f64,
    pub at_setpoint: ComfortResult,
    pub shifted: ComfortResult,
    pub existing_building_ok: bool,
    pub new_building_ok: bool,
}

/// Scenario parameters echoed into the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioEcho {
    pub start: String,
    pub end: String,
    pub utc_offset_minutes: i32,
    pub step_minutes: u32,
    pub horizon_hours: u32,
    pub omega: f64,
    pub gamma: f64,
    pub c_th: f64,
}

impl ScenarioEcho {
    pub fn new(s: &ScenarioConfig) -> Self {
        Self {
            start: format_timestamp(s.start),
            end: format_timestamp(s.end),
            utc_offset_minutes: s.utc_offset_minutes,
            step_minutes: s.controller.step_minutes,
            horizon_hours: s.controller.horizon_hours,
            omega: s.controller.omega,
            gamma: s.controller.gamma,
            c_th: s.controller.c_th,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub scenario: ScenarioEcho,
    #[serde(flatten)]
    pub summary: Summary,
    pub comfort: Vec<SeasonComfort>,
}

pub fn comfort_report(scenario: &ScenarioConfig, result: &SimulationResult) -> Result<Vec<SeasonComfort>, ReportError> {
    let mut out = Vec::new();
    for mode in [Mode::Heating, Mode::Cooling] {
        let mut seen = false;
        let mut max_dt: f64 = 0.0;
        for r in result.records.iter().filter(|r| r.mode == mode) {
            seen = true;
            max_dt = max_dt.max(r.delta_t.abs());
        }
        if !seen {
            continue;
        }
        let (setpoint, input): (f64, fn(f64) -> ComfortInput) = match mode {
            Mode::Heating => (scenario.setpoint_winter.weekday_max(), ComfortInput::winter_office),
            Mode::Cooling => (scenario.setpoint_summer.weekday_min(), ComfortInput::summer_office),
        };
        let shifted_temp = setpoint + mode.eta() * max_dt;
        let at_setpoint = pmv(&input(setpoint))?;
        let shifted = pmv(&input(shifted_temp))?;
        out.push(SeasonComfort {
            mode,
            setpoint,
            max_delta_t: max_dt,
            shifted_temp,
            at_setpoint,
            shifted,
            existing_building_ok: classify(&shifted, BuildingClass::Existing),
            new_building_ok: classify(&shifted, BuildingClass::New),
        });
    }
    Ok(out)
}

pub fn summary_report(scenario: &ScenarioConfig, result: &SimulationResult) -> Result<SummaryReport, ReportError> {
    Ok(SummaryReport {
        scenario: ScenarioEcho::new(scenario),
        summary: result.summary.clone(),
        comfort: comfort_report(scenario, result)?,
    })
}

/// Per-month totals in local time.
pub fn monthly_csv(result: &SimulationResult, offset: FixedOffset) -> String {
    let mut rows: Vec<((i32, u32), [f64; 5])> = Vec::new();
    for r in &result.records {
        let local = r.timestamp.with_timezone(&offset);
        let key = (local.year(), local.month());
        let add = [
            r.grid_import_baseline * r.ci / 1000.0,
            r.emissions / 1000.0,
            r.grid_import_baseline,
            r.grid_import,
            r.delta_co2,
        ];
        match rows.last_mut() {
            Some((k, acc)) if *k == key => acc.iter_mut().zip(add).for_each(|(a, b)| *a += b),
            _ => rows.push((key, add)),
        }
    }
    let mut out = String::from(
        "month,baseline_emissions_kg,controlled_emissions_kg,baseline_grid_kwh,controlled_grid_kwh,delta_co2_g\n",
    );
    for ((y, m), v) in rows {
        let _ = writeln!(
            out,
            "{y:04}-{m:02},{},{},{},{},{}",
            fmt6(v[0]),
            fmt6(v[1]),
            fmt6(v[2]),
            fmt6(v[3]),
            fmt6(v[4])
        );
    }
    out
}

/// A figure window: local days `from_day..=to_day` of `month`, taken from
/// the first year in the ledger that reaches it.
#[derive(Debug, Clone, Copy)]
pub struct FigureWindow {
    pub name: &'static str,
    pub month: u32,
    pub from_day: u32,
    pub to_day: u32,
}

pub const FIGURE_WINDOWS: [FigureWindow; 2] = [
    FigureWindow {
        name: "winter",
        month: 11,
        from_day: 15,
        to_day: 30,
    },
    FigureWindow {
        name: "summer",
        month: 7,
        from_day: 15,
        to_day: 30,
    },
];

fn window_records<'a>(records: &'a [StepRecord], w: &FigureWindow, offset: FixedOffset) -> Vec<&'a StepRecord> {
    let in_window = |d: NaiveDate| d.month() == w.month && (w.from_day..=w.to_day).contains(&d.day());
    let year = records
        .iter()
        .map(|r| r.timestamp.with_timezone(&offset).date_naive())
        .find(|d| in_window(*d))
        .map(|d| d.year());
    let Some(year) = year else { return Vec::new() };
    records
        .iter()
        .filter(|r| {
            let d = r.timestamp.with_timezone(&offset).date_naive();
            d.year() == year && in_window(d)
        })
        .collect()
}

type Panel = (&'static str, fn(&StepRecord) -> f64);

/// One `(file name, contents)` pair per panel: α, ΔCO₂ and ΔT for each
/// window. Windows missing from the ledger give header-only files.
pub fn figure_data(result: &SimulationResult, offset: FixedOffset) -> Vec<(String, String)> {
    let panels: [Panel; 3] = [
        ("alpha", |r| r.alpha),
        ("delta_co2", |r| r.delta_co2),
        ("delta_t", |r| r.delta_t),
    ];
    let mut out = Vec::new();
    for w in &FIGURE_WINDOWS {
        let rows = window_records(&result.records, w, offset);
        for (panel, get) in panels {
            let mut s = format!("timestamp,{panel}\n");
            for r in &rows {
                let _ = writeln!(s, "{},{}", format_timestamp(r.timestamp), fmt6(get(r)));
            }
            out.push((format!("figure_{panel}_{}.csv", w.name), s));
        }
    }
    out
}

pub const CELL_HEADER: &str =
    "horizon_h,step_min,omega,emissions_reduction_percent,avg_daily_saving_g,avg_daily_delta_t,max_daily_delta_t";

fn cell_row(c: &SweepCell) -> String {
    format!(
        "{},{},{:e},{},{},{},{}",
        c.horizon_h,
        c.step_min,
        c.omega,
        fmt6(c.emissions_reduction_percent),
        fmt6(c.avg_daily_saving_g),
        fmt6(c.avg_daily_delta_t),
        fmt6(c.max_daily_delta_t)
    )
}

pub fn cells_csv(cells: &[SweepCell]) -> String {
    let mut out = format!("{CELL_HEADER}\n");
    for c in cells {
        out.push_str(&cell_row(c));
        out.push('\n');
    }
    out
}

pub fn skipped_csv(skipped: &[SkippedCell]) -> String {
    let mut out = String::from("horizon_h,step_min,omega,reason\n");
    for s in skipped {
        let omega = s.omega.map(|w| format!("{w:e}")).unwrap_or_default();
        let reason = s.reason.replace('"', "'");
        let _ = writeln!(out, "{},{},{},\"{}\"", s.horizon_h, s.step_min, omega, reason);
    }
    out
}

pub fn heatmap_csv(entries: &[HeatmapEntry]) -> String {
    let mut out = format!("step_min,horizon_h,{}\n", &CELL_HEADER["horizon_h,step_min,".len()..]);
    for e in entries {
        match &e.best {
            Some(c) => {
                let row = cell_row(c);
                let rest = row.splitn(3, ',').nth(2).unwrap_or_default();
                let _ = writeln!(out, "{},{},{}", e.step_min, e.horizon_h, rest);
            }
            None => {
                let _ = writeln!(out, "{},{},,,,,", e.step_min, e.horizon_h);
            }
        }
    }
    out
}

/// Write `contents` to `dir/name`, creating `dir` if needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Write summary JSON, ledger CSV and monthly totals, plus figure data when
/// asked. Returns the written paths in write order.
pub fn write_run(
    dir: &Path,
    prefix: &str,
    scenario: &ScenarioConfig,
    result: &SimulationResult,
    offset: FixedOffset,
    figures: bool,
) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = vec![
        write_file(dir, &format!("{prefix}_summary.json"), &to_json(&summary_report(scenario, result)?)?)?,
        write_file(dir, &format!("{prefix}_ledger.csv"), &ledger_csv(&result.records))?,
        write_file(dir, &format!("{prefix}_monthly.csv"), &monthly_csv(result, offset))?,
    ];
    if figures {
        for (name, body) in figure_data(result, offset) {
            written.push(write_file(dir, &format!("{prefix}_{name}"), &body)?);
        }
    }
    Ok(written)
}
