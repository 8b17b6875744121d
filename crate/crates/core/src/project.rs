//! Project configuration: one JSON file naming the datasets, surrogates,
//! envelope and controller defaults, with paths relative to the file.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "datasets": {
//!     "ci":    { "path": "data/ci.csv",    "unit": "gCO2/kWh" },
//!     "pv":    { "path": "data/pv.csv",    "unit": "kWh" },
//!     "t_ext": { "path": "data/t_ext.csv", "unit": "degC" }
//!   },
//!   "models": { "winter": "models/winter.json", "summer": "models/summer.json" },
//!   "envelope": "envelope.json",
//!   "scenario": { "start": "2024-01-01", "end": "2025-01-01" },
//!   "controller": { "omega": 1e6, "horizon_hours": 24, "step_minutes": 60 },
//!   "output_dir": "out"
//! }
//! ```
//!
//! A season may give `training` data instead of a model file, in which case
//! the surrogate is identified at load time. `c_th` may replace `envelope`.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::EnvelopeDefinition;
use crate::season::{Mode, SeasonCalendar};
use crate::simulator::{ControllerSettings, ScenarioConfig};
use crate::thermal_model::{identify, FitReport, IdentificationData, StateSpaceModel};
use crate::timeseries::{parse_timestamp, Schedule, TimeSeries, Unit};
use crate::tuner::SweepSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("`{key}`: unit `{found}` where `{expected}` is required")]
    UnitMismatch {
        key: String,
        expected: Unit,
        found: String,
    },
    #[error("`{key}`: path not found: {path}")]
    PathNotFound { key: String, path: PathBuf },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("`{key}`: {message}")]
    Load { key: String, message: String },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    path: Option<String>,
    unit: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDatasets {
    ci: Option<RawDataset>,
    pv: Option<RawDataset>,
    t_ext: Option<RawDataset>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModels {
    winter: Option<String>,
    summer: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraining {
    path: Option<String>,
    order: Option<usize>,
    split: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrainingSet {
    winter: Option<RawTraining>,
    summer: Option<RawTraining>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    start: Option<String>,
    end: Option<String>,
    utc_offset_minutes: Option<i32>,
    setpoint_winter: Option<Schedule>,
    setpoint_summer: Option<Schedule>,
    occupancy: Option<Schedule>,
    seasons: Option<SeasonCalendar>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    omega: Option<f64>,
    horizon_hours: Option<u32>,
    step_minutes: Option<u32>,
    gamma: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProject {
    schema_version: Option<u32>,
    datasets: Option<RawDatasets>,
    models: Option<RawModels>,
    training: Option<RawTrainingSet>,
    envelope: Option<String>,
    c_th: Option<f64>,
    scenario: Option<RawScenario>,
    controller: Option<RawController>,
    sweep: Option<SweepSpec>,
    output_dir: Option<String>,
}

/// A validated dataset reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub path: PathBuf,
    pub unit: Unit,
}

/// Where a season's surrogate comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ModelSource {
    File(PathBuf),
    Training { path: PathBuf, order: usize, split: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CapacitySource {
    Envelope(PathBuf),
    Value(f64),
}

/// Fully validated project with absolute paths and defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectConfig {
    pub ci: Dataset,
    pub pv: Dataset,
    pub t_ext: Dataset,
    pub winter_model: Option<ModelSource>,
    pub summer_model: Option<ModelSource>,
    pub capacity: CapacitySource,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub utc_offset_minutes: i32,
    pub setpoint_winter: Schedule,
    pub setpoint_summer: Schedule,
    pub occupancy: Schedule,
    pub seasons: SeasonCalendar,
    pub omega: f64,
    pub horizon_hours: u32,
    pub step_minutes: u32,
    pub gamma: f64,
    pub sweep: SweepSpec,
    pub output_dir: PathBuf,
}

pub const DEFAULT_OMEGA: f64 = 1e6;
pub const DEFAULT_HORIZON_HOURS: u32 = 24;
pub const DEFAULT_STEP_MINUTES: u32 = 60;
pub const DEFAULT_UTC_OFFSET_MINUTES: i32 = 60;

fn resolve(base: &Path, key: &str, raw: Option<&String>) -> Result<PathBuf, ProjectError> {
    let raw = raw.ok_or_else(|| ProjectError::MissingKey(key.into()))?;
    let path = base.join(raw);
    if !path.exists() {
        return Err(ProjectError::PathNotFound { key: key.into(), path });
    }
    Ok(path)
}

fn dataset(base: &Path, name: &str, raw: Option<&RawDataset>, expected: Unit) -> Result<Dataset, ProjectError> {
    let key = format!("datasets.{name}");
    let raw = raw.ok_or_else(|| ProjectError::MissingKey(key.clone()))?;
    let path = resolve(base, &format!("{key}.path"), raw.path.as_ref())?;
    let unit_key = format!("{key}.unit");
    let declared = raw.unit.as_ref().ok_or_else(|| ProjectError::MissingKey(unit_key.clone()))?;
    match declared.parse::<Unit>() {
        Ok(u) if u == expected => Ok(Dataset { path, unit: u }),
        _ => Err(ProjectError::UnitMismatch {
            key: unit_key,
            expected,
            found: declared.clone(),
        }),
    }
}

fn model_source(
    base: &Path,
    season: &str,
    file: Option<&String>,
    training: Option<&RawTraining>,
) -> Result<Option<ModelSource>, ProjectError> {
    if file.is_some() {
        return resolve(base, &format!("models.{season}"), file).map(|p| Some(ModelSource::File(p)));
    }
    let Some(t) = training else { return Ok(None) };
    let key = format!("training.{season}");
    let path = resolve(base, &format!("{key}.path"), t.path.as_ref())?;
    let order = t.order.unwrap_or(2);
    if !(1..=3).contains(&order) {
        return Err(ProjectError::Invalid {
            key: format!("{key}.order"),
            message: "order must be 1, 2 or 3".into(),
        });
    }
    let split = t.split.unwrap_or(0.7);
    if !(split > 0.5 && split < 0.95) {
        return Err(ProjectError::Invalid {
            key: format!("{key}.split"),
            message: "split must lie in (0.5, 0.95)".into(),
        });
    }
    Ok(Some(ModelSource::Training { path, order, split }))
}

/// A calendar date (local midnight) or a full timestamp.
fn parse_instant(key: &str, raw: Option<&String>, offset_minutes: i32) -> Result<DateTime<Utc>, ProjectError> {
    let raw = raw.ok_or_else(|| ProjectError::MissingKey(key.into()))?;
    if let Ok(date) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        let midnight = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("valid midnight"));
        return Ok(midnight - Duration::minutes(i64::from(offset_minutes)));
    }
    parse_timestamp(raw).ok_or_else(|| ProjectError::Invalid {
        key: key.into(),
        message: format!("cannot parse `{raw}` as a date or timestamp"),
    })
}

fn positive(key: &str, v: f64) -> Result<f64, ProjectError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ProjectError::Invalid {
            key: key.into(),
            message: "must be positive and finite".into(),
        })
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, ProjectError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProjectError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base).map_err(|e| match e {
            ProjectError::Parse { message, .. } => ProjectError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Parse with relative paths resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, ProjectError> {
        let raw: RawProject = serde_json::from_str(text).map_err(|e| ProjectError::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        match raw.schema_version {
            None => return Err(ProjectError::MissingKey("schema_version".into())),
            Some(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(ProjectError::Invalid {
                    key: "schema_version".into(),
                    message: format!("unsupported version {v} (expected {SCHEMA_VERSION})"),
                })
            }
        }
        let ds = raw.datasets.ok_or_else(|| ProjectError::MissingKey("datasets".into()))?;
        let ci = dataset(base, "ci", ds.ci.as_ref(), Unit::GramsPerKilowattHour)?;
        let pv = dataset(base, "pv", ds.pv.as_ref(), Unit::KilowattHour)?;
        let t_ext = dataset(base, "t_ext", ds.t_ext.as_ref(), Unit::Celsius)?;

        let models = raw.models.unwrap_or_default();
        let training = raw.training.unwrap_or_default();
        let winter_model = model_source(base, "winter", models.winter.as_ref(), training.winter.as_ref())?;
        let summer_model = model_source(base, "summer", models.summer.as_ref(), training.summer.as_ref())?;
        if winter_model.is_none() && summer_model.is_none() {
            return Err(ProjectError::MissingKey("models".into()));
        }

        let capacity = match (raw.c_th, raw.envelope.as_ref()) {
            (Some(v), _) => CapacitySource::Value(positive("c_th", v)?),
            (None, Some(_)) => CapacitySource::Envelope(resolve(base, "envelope", raw.envelope.as_ref())?),
            (None, None) => return Err(ProjectError::MissingKey("envelope".into())),
        };

        let sc = raw.scenario.ok_or_else(|| ProjectError::MissingKey("scenario".into()))?;
        let utc_offset_minutes = sc.utc_offset_minutes.unwrap_or(DEFAULT_UTC_OFFSET_MINUTES);
        if utc_offset_minutes.abs() >= 24 * 60 {
            return Err(ProjectError::Invalid {
                key: "scenario.utc_offset_minutes".into(),
                message: "offset must be less than a day".into(),
            });
        }
        let start = parse_instant("scenario.start", sc.start.as_ref(), utc_offset_minutes)?;
        let end = parse_instant("scenario.end", sc.end.as_ref(), utc_offset_minutes)?;
        if end <= start {
            return Err(ProjectError::Invalid {
                key: "scenario.end".into(),
                message: "end must follow start".into(),
            });
        }

        let ctl = raw.controller.unwrap_or_default();
        let omega = positive("controller.omega", ctl.omega.unwrap_or(DEFAULT_OMEGA))?;
        let gamma = ctl.gamma.unwrap_or(1.0);
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(ProjectError::Invalid {
                key: "controller.gamma".into(),
                message: "must lie in (0, 1]".into(),
            });
        }
        let horizon_hours = ctl.horizon_hours.unwrap_or(DEFAULT_HORIZON_HOURS);
        let step_minutes = ctl.step_minutes.unwrap_or(DEFAULT_STEP_MINUTES);
        if step_minutes == 0 || horizon_hours == 0 || !(horizon_hours * 60).is_multiple_of(step_minutes) {
            return Err(ProjectError::Invalid {
                key: "controller.horizon_hours".into(),
                message: format!("{horizon_hours} h is not a whole number of {step_minutes} min steps"),
            });
        }
        let sweep = raw.sweep.unwrap_or_default();
        sweep.validate().map_err(|e| ProjectError::Invalid {
            key: "sweep".into(),
            message: e.to_string(),
        })?;

        Ok(Self {
            ci,
            pv,
            t_ext,
            winter_model,
            summer_model,
            capacity,
            start,
            end,
            utc_offset_minutes,
            setpoint_winter: sc.setpoint_winter.unwrap_or_else(Schedule::winter_setpoint),
            setpoint_summer: sc.setpoint_summer.unwrap_or_else(Schedule::summer_setpoint),
            occupancy: sc.occupancy.unwrap_or_else(Schedule::office_occupancy),
            seasons: sc.seasons.unwrap_or_default(),
            omega,
            horizon_hours,
            step_minutes,
            gamma,
            sweep,
            output_dir: base.join(raw.output_dir.as_deref().unwrap_or("output")),
        })
    }

    pub fn thermal_capacity(&self) -> Result<f64, ProjectError> {
        match &self.capacity {
            CapacitySource::Value(v) => Ok(*v),
            CapacitySource::Envelope(path) => EnvelopeDefinition::load(path)
                .and_then(|d| d.summarize())
                .map(|s| s.total_capacity)
                .map_err(|e| ProjectError::Load {
                    key: "envelope".into(),
                    message: e.to_string(),
                }),
        }
    }

    fn load_model(&self, season: &str, mode: Mode, source: &Option<ModelSource>) -> Result<Option<(StateSpaceModel, Option<FitReport>)>, ProjectError> {
        let key = |k: &str| format!("{k}.{season}");
        let err = |k: String, e: String| ProjectError::Load { key: k, message: e };
        match source {
            None => Ok(None),
            Some(ModelSource::File(p)) => {
                let m = StateSpaceModel::load(p).map_err(|e| err(key("models"), e.to_string()))?;
                if m.mode() != mode {
                    return Err(err(key("models"), format!("model is for {}", m.mode())));
                }
                Ok(Some((m, None)))
            }
            Some(ModelSource::Training { path, order, split }) => {
                let data = IdentificationData::load(path, mode).map_err(|e| err(key("training"), e.to_string()))?;
                let (m, report) = identify(&data, *order, *split).map_err(|e| err(key("training"), e.to_string()))?;
                Ok(Some((m, Some(report))))
            }
        }
    }

    /// Load every dataset and surrogate into a runnable scenario.
    pub fn scenario(&self) -> Result<LoadedProject, ProjectError> {
        let series = |key: &str, d: &Dataset| {
            TimeSeries::read_csv_path(&d.path, d.unit).map_err(|e| ProjectError::Load {
                key: format!("datasets.{key}"),
                message: e.to_string(),
            })
        };
        let winter = self.load_model("winter", Mode::Heating, &self.winter_model)?;
        let summer = self.load_model("summer", Mode::Cooling, &self.summer_model)?;
        let c_th = self.thermal_capacity()?;
        let scenario = ScenarioConfig {
            start: self.start,
            end: self.end,
            utc_offset_minutes: self.utc_offset_minutes,
            setpoint_winter: self.setpoint_winter.clone(),
            setpoint_summer: self.setpoint_summer.clone(),
            occupancy: self.occupancy.clone(),
            seasons: self.seasons,
            ci: series("ci", &self.ci)?,
            pv: series("pv", &self.pv)?,
            t_ext: series("t_ext", &self.t_ext)?,
            winter_model: winter.as_ref().map(|(m, _)| m.clone()),
            summer_model: summer.as_ref().map(|(m, _)| m.clone()),
            controller: ControllerSettings {
                omega: self.omega,
                horizon_hours: self.horizon_hours,
                step_minutes: self.step_minutes,
                gamma: self.gamma,
                c_th,
            },
        };
        Ok(LoadedProject {
            scenario,
            winter_fit: winter.and_then(|(_, r)| r),
            summer_fit: summer.and_then(|(_, r)| r),
        })
    }
}

/// A scenario plus the fit reports of surrogates identified at load time.
#[derive(Debug, Clone)]
pub struct LoadedProject {
    pub scenario: ScenarioConfig,
    pub winter_fit: Option<FitReport>,
    pub summer_fit: Option<FitReport>,
}
