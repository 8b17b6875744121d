//! Scenario engine: baseline and controlled runs over aligned signals,
//! producing a per-step ledger and its aggregates.
//!
//! Accounting follows the surrogate emission model. Predicted demand comes
//! from the surrogate under the user's setpoint; a decision α(k) diverts
//! `γ·α(k)·ΔE_solar(k)` of surplus into the thermal mass, and that stored
//! energy offsets grid imports uniformly over the next `m` steps. Offsets
//! from overlapping horizons add up and each step's offset is clipped at the
//! step's import.

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{alpha_star, ControllerConfig, ControllerError, ForecastWindow};
use crate::exec::Execution;
use crate::season::{Mode, SeasonCalendar};
use crate::thermal_model::{ModelError, State, StateSpaceModel};
use crate::timeseries::{Schedule, TimeSeries, TimeSeriesError, Unit};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("signal `{name}` does not cover the scenario: {reason}")]
    SignalGap { name: &'static str, reason: String },
    #[error("signal `{name}` has unit {found}, expected {expected}")]
    UnitMismatch {
        name: &'static str,
        expected: Unit,
        found: Unit,
    },
    #[error("no surrogate model for the {0} season")]
    ModelMissing(Mode),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("ledger is empty")]
    EmptyLedger,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

/// Controller hyperparameters shared by both seasons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerSettings {
    pub omega: f64,
    pub horizon_hours: u32,
    pub step_minutes: u32,
    pub gamma: f64,
    /// kJ/K
    pub c_th: f64,
}

impl ControllerSettings {
    /// Horizon length in steps; the horizon must hold a whole number of
    /// steps.
    pub fn horizon_steps(&self) -> Result<usize, SimulationError> {
        let minutes = self.horizon_hours * 60;
        if self.step_minutes == 0 || minutes == 0 || !minutes.is_multiple_of(self.step_minutes) {
            return Err(SimulationError::InvalidScenario(format!(
                "horizon of {} h is not a whole number of {} min steps",
                self.horizon_hours, self.step_minutes
            )));
        }
        Ok((minutes / self.step_minutes) as usize)
    }

    pub fn config(&self, mode: Mode, horizon_steps: usize) -> ControllerConfig {
        ControllerConfig {
            omega: self.omega,
            horizon_steps,
            step_minutes: self.step_minutes,
            gamma: self.gamma,
            mode,
            c_th: self.c_th,
        }
    }
}

/// Everything needed to simulate a date range.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub start: DateTime<Utc>,
    /// Exclusive.
    pub end: DateTime<Utc>,
    /// Local time offset for schedules, seasons and daily statistics.
    pub utc_offset_minutes: i32,
    pub setpoint_winter: Schedule,
    pub setpoint_summer: Schedule,
    pub occupancy: Schedule,
    pub seasons: SeasonCalendar,
    /// gCO₂/kWh
    pub ci: TimeSeries,
    /// PV energy per step, kWh.
    pub pv: TimeSeries,
    /// °C
    pub t_ext: TimeSeries,
    pub winter_model: Option<StateSpaceModel>,
    pub summer_model: Option<StateSpaceModel>,
    pub controller: ControllerSettings,
}

impl ScenarioConfig {
    pub fn offset(&self) -> Result<FixedOffset, SimulationError> {
        FixedOffset::east_opt(self.utc_offset_minutes * 60)
            .ok_or_else(|| SimulationError::InvalidScenario("UTC offset out of range".into()))
    }

    /// Resample signals and surrogates to the controller step.
    pub fn prepare(&self) -> Result<PreparedScenario, SimulationError> {
        self.prepare_at(self.controller.step_minutes)
    }

    /// Like [`prepare`](Self::prepare) with an overridden step.
    pub fn prepare_at(&self, step_minutes: u32) -> Result<PreparedScenario, SimulationError> {
        if step_minutes == 0 {
            return Err(SimulationError::InvalidScenario("step must be positive".into()));
        }
        if self.end <= self.start {
            return Err(SimulationError::InvalidScenario("end must follow start".into()));
        }
        let span = (self.end - self.start).num_minutes();
        if span % i64::from(step_minutes) != 0 {
            return Err(SimulationError::InvalidScenario(format!(
                "date range is not a whole number of {step_minutes} min steps"
            )));
        }
        let offset = self.offset()?;
        let settings = ControllerSettings {
            step_minutes,
            ..self.controller
        };
        let ci = align(&self.ci, "ci", Unit::GramsPerKilowattHour, self, step_minutes)?;
        let e_solar = align(&self.pv, "pv", Unit::KilowattHour, self, step_minutes)?;
        let t_ext = align(&self.t_ext, "t_ext", Unit::Celsius, self, step_minutes)?;
        let n = ci.len();
        let step = Duration::minutes(i64::from(step_minutes));

        let mut modes = Vec::with_capacity(n);
        let mut t_ref = Vec::with_capacity(n);
        let mut n_occ = Vec::with_capacity(n);
        for k in 0..n {
            let t = self.start + step * k as i32;
            let mode = self.seasons.mode_at(t, offset);
            let schedule = match mode {
                Mode::Heating => &self.setpoint_winter,
                Mode::Cooling => &self.setpoint_summer,
            };
            modes.push(mode);
            t_ref.push(schedule.sample(t, offset));
            n_occ.push(self.occupancy.sample(t, offset));
        }

        let resample_model = |m: &Option<StateSpaceModel>, mode: Mode| -> Result<Option<StateSpaceModel>, SimulationError> {
            if !modes.contains(&mode) {
                return Ok(None);
            }
            let model = m.as_ref().ok_or(SimulationError::ModelMissing(mode))?;
            if model.mode() != mode {
                return Err(SimulationError::InvalidScenario(format!(
                    "the {mode} slot holds a {} model",
                    model.mode()
                )));
            }
            Ok(Some(model.rediscretize(step_minutes)?))
        };
        let winter = resample_model(&self.winter_model, Mode::Heating)?;
        let summer = resample_model(&self.summer_model, Mode::Cooling)?;

        let mut prepared = PreparedScenario {
            start: self.start,
            offset,
            settings,
            modes,
            t_ref,
            n_occ,
            t_ext: t_ext.into_values(),
            e_solar: e_solar.into_values(),
            ci: ci.into_values(),
            e_pred: Vec::new(),
            winter,
            summer,
        };
        prepared.e_pred = prepared.surrogate_energy(None);
        Ok(prepared)
    }
}

fn align(
    series: &TimeSeries,
    name: &'static str,
    unit: Unit,
    scenario: &ScenarioConfig,
    step_minutes: u32,
) -> Result<TimeSeries, SimulationError> {
    if series.unit() != unit {
        return Err(SimulationError::UnitMismatch {
            name,
            expected: unit,
            found: series.unit(),
        });
    }
    let gap = |e: TimeSeriesError| SimulationError::SignalGap {
        name,
        reason: e.to_string(),
    };
    series
        .slice_time(scenario.start, scenario.end)
        .map_err(gap)?
        .resample(step_minutes)
        .map_err(gap)
}

/// Signals and surrogates resampled to one controller step.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    start: DateTime<Utc>,
    offset: FixedOffset,
    settings: ControllerSettings,
    modes: Vec<Mode>,
    t_ref: Vec<f64>,
    n_occ: Vec<f64>,
    t_ext: Vec<f64>,
    e_solar: Vec<f64>,
    ci: Vec<f64>,
    e_pred: Vec<f64>,
    winter: Option<StateSpaceModel>,
    summer: Option<StateSpaceModel>,
}

/// One ledger row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub timestamp: DateTime<Utc>,
    pub mode: Mode,
    /// °C
    pub t_ref_user: f64,
    /// °C
    pub t_ref_applied: f64,
    pub alpha: f64,
    /// kWh
    pub e_pred: f64,
    /// kWh
    pub e_solar: f64,
    /// kWh
    pub surplus: f64,
    /// Import without storage, kWh.
    pub grid_import_baseline: f64,
    /// kWh
    pub grid_import: f64,
    /// gCO₂/kWh
    pub ci: f64,
    /// gCO₂
    pub emissions: f64,
    /// gCO₂
    pub delta_co2: f64,
    /// K
    pub delta_t: f64,
    /// Surrogate energy under the applied setpoint, kWh.
    pub e_applied: f64,
    /// Re-clipped minus simplified window emissions of this step's decision.
    pub simplification_gap: f64,
}

impl PreparedScenario {
    pub fn len(&self) -> usize {
        self.ci.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ci.is_empty()
    }

    pub fn step_minutes(&self) -> u32 {
        self.settings.step_minutes
    }

    pub fn settings(&self) -> &ControllerSettings {
        &self.settings
    }

    pub fn offset(&self) -> FixedOffset {
        self.offset
    }

    pub fn timestamp(&self, k: usize) -> DateTime<Utc> {
        self.start + Duration::minutes(i64::from(self.settings.step_minutes) * k as i64)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn t_ref(&self) -> &[f64] {
        &self.t_ref
    }

    pub fn n_occ(&self) -> &[f64] {
        &self.n_occ
    }

    pub fn t_ext(&self) -> &[f64] {
        &self.t_ext
    }

    pub fn e_solar(&self) -> &[f64] {
        &self.e_solar
    }

    pub fn ci(&self) -> &[f64] {
        &self.ci
    }

    /// Surrogate demand under the user setpoint, kWh per step.
    pub fn e_pred(&self) -> &[f64] {
        &self.e_pred
    }

    pub fn model(&self, mode: Mode) -> Option<&StateSpaceModel> {
        match mode {
            Mode::Heating => self.winter.as_ref(),
            Mode::Cooling => self.summer.as_ref(),
        }
    }

    /// Surrogate states under the user setpoint at the start of each step.
    /// The state is initialised at equilibrium at the first step and at
    /// every season change.
    pub fn user_states(&self) -> Vec<State> {
        let mut states = Vec::with_capacity(self.len());
        self.walk(None, |_, x| states.push(*x));
        states
    }

    fn walk(&self, shift: Option<&[f64]>, mut visit: impl FnMut(usize, &State)) -> Vec<f64> {
        let hours = f64::from(self.settings.step_minutes) / 60.0;
        let mut x = [0.0; 3];
        let mut prev: Option<Mode> = None;
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let mode = self.modes[k];
            // prepare() guarantees a model for every mode present
            let model = self.model(mode).expect("model for active season");
            let user = [self.t_ref[k], self.n_occ[k], self.t_ext[k]];
            if prev != Some(mode) {
                x = model.steady_state(&user);
                prev = Some(mode);
            }
            visit(k, &x);
            let mut u = user;
            if let Some(dt) = shift {
                u[0] += dt[k];
            }
            out.push(model.step(&mut x, &u).max(0.0) * hours);
        }
        out
    }

    fn surrogate_energy(&self, shift: Option<&[f64]>) -> Vec<f64> {
        self.walk(shift, |_, _| {})
    }

    /// Run with the scenario's own ω and horizon.
    pub fn run(&self, controlled: bool) -> Result<SimulationResult, SimulationError> {
        let m = self.settings.horizon_steps()?;
        self.run_with(controlled, self.settings.omega, m)
    }

    /// Run with explicit ω and horizon length in steps.
    pub fn run_with(
        &self,
        controlled: bool,
        omega: f64,
        horizon_steps: usize,
    ) -> Result<SimulationResult, SimulationError> {
        let n = self.len();
        let settings = ControllerSettings { omega, ..self.settings };
        settings.config(Mode::Heating, horizon_steps.max(1)).validate()?;
        if horizon_steps == 0 {
            return Err(SimulationError::InvalidScenario("horizon must be at least one step".into()));
        }
        let surplus: Vec<f64> = self
            .e_solar
            .iter()
            .zip(&self.e_pred)
            .map(|(s, p)| (s - p).max(0.0))
            .collect();
        let baseline_import: Vec<f64> = self
            .e_pred
            .iter()
            .zip(&self.e_solar)
            .map(|(p, s)| (p - s).max(0.0))
            .collect();

        let mut alpha = vec![0.0; n];
        let mut delta_t = vec![0.0; n];
        let mut gap = vec![0.0; n];
        // per-step share of each decision's stored energy
        let mut share = vec![0.0; n];
        if controlled {
            for k in 0..n {
                let m_eff = horizon_steps.min(n - k);
                if m_eff < 2 {
                    continue;
                }
                let cfg = settings.config(self.modes[k], m_eff);
                let fw = ForecastWindow {
                    e_pred: self.e_pred[k..k + m_eff].to_vec(),
                    e_solar: self.e_solar[k..k + m_eff].to_vec(),
                    ci: self.ci[k..k + m_eff].to_vec(),
                };
                let d = alpha_star(&cfg, &fw);
                alpha[k] = d.alpha;
                delta_t[k] = d.delta_t;
                gap[k] = d.simplification_gap();
                share[k] = settings.gamma * d.alpha * surplus[k] / m_eff as f64;
            }
        }
        let e_applied = if controlled {
            self.surrogate_energy(Some(&delta_t))
        } else {
            self.e_pred.clone()
        };

        let mut records = Vec::with_capacity(n);
        for k in 0..n {
            let first = k.saturating_sub(horizon_steps - 1);
            let pending: f64 = share[first..=k].iter().sum();
            let offset = pending.min(baseline_import[k]);
            let import = baseline_import[k] - offset;
            let ci = self.ci[k];
            let emissions = import * ci;
            records.push(StepRecord {
                timestamp: self.timestamp(k),
                mode: self.modes[k],
                t_ref_user: self.t_ref[k],
                t_ref_applied: self.t_ref[k] + delta_t[k],
                alpha: alpha[k],
                e_pred: self.e_pred[k],
                e_solar: self.e_solar[k],
                surplus: surplus[k],
                grid_import_baseline: baseline_import[k],
                grid_import: import,
                ci,
                emissions,
                delta_co2: baseline_import[k] * ci - emissions,
                delta_t: delta_t[k],
                e_applied: e_applied[k],
                simplification_gap: gap[k],
            });
        }
        aggregate(records, controlled, self.offset)
    }

    /// Baseline and controlled runs, concurrently when `exec` allows.
    pub fn run_pair(&self, exec: Execution) -> Result<(SimulationResult, SimulationResult), SimulationError> {
        let (b, c) = exec.join(|| self.run(false), || self.run(true));
        Ok((b?, c?))
    }
}

/// Totals and daily statistics. Fields that only exist for a controlled
/// run are `None` for a baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub controlled: bool,
    pub steps: usize,
    pub days: usize,
    pub baseline_emissions_kg: f64,
    pub baseline_grid_energy_kwh: f64,
    pub controlled_emissions_kg: Option<f64>,
    pub controlled_grid_energy_kwh: Option<f64>,
    pub emissions_reduction_percent: Option<f64>,
    /// gCO₂ per day
    pub avg_daily_saving_g: Option<f64>,
    /// Mean over days of the daily maximum |ΔT|, K.
    pub avg_daily_delta_t: Option<f64>,
    /// Largest daily maximum |ΔT|, K.
    pub max_daily_delta_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub summary: Summary,
    pub records: Vec<StepRecord>,
}

impl SimulationResult {
    pub fn total_delta_co2(&self) -> f64 {
        self.records.iter().map(|r| r.delta_co2).sum()
    }
}

/// Per-day aggregates in local calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyStats {
    pub date: NaiveDate,
    pub delta_co2: f64,
    pub max_abs_delta_t: f64,
}

pub fn daily_stats(records: &[StepRecord], offset: FixedOffset) -> Vec<DailyStats> {
    let mut days: Vec<DailyStats> = Vec::new();
    for r in records {
        let date = r.timestamp.with_timezone(&offset).date_naive();
        match days.last_mut() {
            Some(d) if d.date == date => {
                d.delta_co2 += r.delta_co2;
                d.max_abs_delta_t = d.max_abs_delta_t.max(r.delta_t.abs());
            }
            _ => days.push(DailyStats {
                date,
                delta_co2: r.delta_co2,
                max_abs_delta_t: r.delta_t.abs(),
            }),
        }
    }
    days
}

pub fn aggregate(
    records: Vec<StepRecord>,
    controlled: bool,
    offset: FixedOffset,
) -> Result<SimulationResult, SimulationError> {
    if records.is_empty() {
        return Err(SimulationError::EmptyLedger);
    }
    let baseline_g: f64 = records.iter().map(|r| r.grid_import_baseline * r.ci).sum();
    let baseline_kwh: f64 = records.iter().map(|r| r.grid_import_baseline).sum();
    let controlled_g: f64 = records.iter().map(|r| r.emissions).sum();
    let controlled_kwh: f64 = records.iter().map(|r| r.grid_import).sum();
    let saved_g: f64 = records.iter().map(|r| r.delta_co2).sum();
    let days = daily_stats(&records, offset);
    let n_days = days.len() as f64;
    let summary = Summary {
        controlled,
        steps: records.len(),
        days: days.len(),
        baseline_emissions_kg: baseline_g / 1000.0,
        baseline_grid_energy_kwh: baseline_kwh,
        controlled_emissions_kg: controlled.then_some(controlled_g / 1000.0),
        controlled_grid_energy_kwh: controlled.then_some(controlled_kwh),
        emissions_reduction_percent: controlled.then(|| {
            if baseline_g > 0.0 {
                100.0 * (baseline_g - controlled_g) / baseline_g
            } else {
                0.0
            }
        }),
        avg_daily_saving_g: controlled.then_some(saved_g / n_days),
        avg_daily_delta_t: controlled.then(|| days.iter().map(|d| d.max_abs_delta_t).sum::<f64>() / n_days),
        max_daily_delta_t: controlled.then(|| days.iter().map(|d| d.max_abs_delta_t).fold(0.0, f64::max)),
    };
    Ok(SimulationResult { summary, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{receding_step, ControlSignals};
    use chrono::TimeZone;

    fn series(start: DateTime<Utc>, step: u32, values: Vec<f64>, unit: Unit) -> TimeSeries {
        TimeSeries::new(start, step, values, unit).unwrap()
    }

    fn heating_model() -> StateSpaceModel {
        // P = 0.3·(T_ref − T_ext) in steady state, first-order lag
        StateSpaceModel::new(
            1,
            &[0.8],
            &[0.06, -0.01, -0.06],
            &[1.0],
            &[0.0, 0.0, 0.0],
            30,
            Mode::Heating,
        )
        .unwrap()
    }

    fn scenario(days: i64, pv_peak: f64) -> ScenarioConfig {
        let start = Utc.with_ymd_and_hms(2024, 1, 8, 0, 0, 0).unwrap();
        let n = (days * 48) as usize;
        let pv: Vec<f64> = (0..n)
            .map(|k| {
                let h = (k % 48) as f64 / 2.0;
                if (8.0..16.0).contains(&h) {
                    pv_peak * (std::f64::consts::PI * (h - 8.0) / 8.0).sin()
                } else {
                    0.0
                }
            })
            .collect();
        let ci: Vec<f64> = (0..n).map(|k| 250.0 + 100.0 * ((k % 48) as f64 / 7.0).cos()).collect();
        let t_ext: Vec<f64> = (0..n).map(|k| 5.0 + 4.0 * ((k % 48) as f64 / 7.6).sin()).collect();
        ScenarioConfig {
            start,
            end: start + Duration::days(days),
            utc_offset_minutes: 60,
            setpoint_winter: Schedule::winter_setpoint(),
            setpoint_summer: Schedule::summer_setpoint(),
            occupancy: Schedule::office_occupancy(),
            seasons: SeasonCalendar::default(),
            ci: series(start, 30, ci, Unit::GramsPerKilowattHour),
            pv: series(start, 30, pv, Unit::KilowattHour),
            t_ext: series(start, 30, t_ext, Unit::Celsius),
            winter_model: Some(heating_model()),
            summer_model: None,
            controller: ControllerSettings {
                omega: 1e6,
                horizon_hours: 24,
                step_minutes: 30,
                gamma: 1.0,
                c_th: 6531.77,
            },
        }
    }

    #[test]
    fn baseline_has_no_action() {
        let r = scenario(7, 3.0).prepare().unwrap().run(false).unwrap();
        assert!(r.records.iter().all(|s| s.alpha == 0.0 && s.delta_t == 0.0 && s.delta_co2 == 0.0));
        assert!(r.summary.emissions_reduction_percent.is_none());
        // a UTC-midnight start at UTC+1 touches eight local days
        assert_eq!(r.summary.days, 8);
    }

    #[test]
    fn controlled_reduces_and_closes() {
        let p = scenario(7, 3.0).prepare().unwrap();
        let b = p.run(false).unwrap();
        let c = p.run(true).unwrap();
        let bt = b.summary.baseline_emissions_kg;
        let ct = c.summary.controlled_emissions_kg.unwrap();
        assert_eq!(c.summary.baseline_emissions_kg, bt);
        assert!(ct < bt);
        let diff = (bt - ct) * 1000.0;
        assert!((c.total_delta_co2() - diff).abs() <= 1e-6 * diff);
        let pct = c.summary.emissions_reduction_percent.unwrap();
        assert!((pct - 100.0 * (bt - ct) / bt).abs() <= 1e-9 * pct);
        for r in &c.records {
            assert!(r.grid_import >= 0.0);
            assert!((r.emissions - r.grid_import * r.ci).abs() < 1e-12);
            assert!((r.t_ref_applied - r.t_ref_user - r.delta_t).abs() < 1e-12);
            assert!(r.delta_t >= 0.0);
        }
    }

    #[test]
    fn no_pv_matches_baseline() {
        let p = scenario(3, 0.0).prepare().unwrap();
        let b = p.run(false).unwrap();
        let c = p.run(true).unwrap();
        for (x, y) in b.records.iter().zip(&c.records) {
            assert_eq!(x.grid_import, y.grid_import);
            assert_eq!(y.alpha, 0.0);
        }
    }

    #[test]
    fn alpha_agrees_with_receding_step() {
        let sc = scenario(4, 3.0);
        let p = sc.prepare().unwrap();
        let c = p.run(true).unwrap();
        let states = p.user_states();
        let model = p.model(Mode::Heating).unwrap();
        let cfg = p.settings().config(Mode::Heating, 48);
        let signals = ControlSignals {
            t_ref: p.t_ref(),
            n_occ: p.n_occ(),
            t_ext: p.t_ext(),
            e_solar: p.e_solar(),
            ci: p.ci(),
        };
        for k in (0..p.len() - 48).step_by(5) {
            let d = receding_step(&cfg, model, &states[k], &signals, k).unwrap();
            assert!((d.alpha - c.records[k].alpha).abs() < 1e-12, "step {k}");
        }
    }

    #[test]
    fn huge_omega_collapses_to_baseline() {
        let p = scenario(7, 3.0).prepare().unwrap();
        let b = p.run(false).unwrap();
        let c = p.run_with(true, 1e15, 48).unwrap();
        let total = b.summary.baseline_emissions_kg * 1000.0;
        for (x, y) in b.records.iter().zip(&c.records) {
            assert!(y.alpha.abs() < 1e-4);
            assert!(y.delta_t.abs() < 1e-4);
            assert!((x.emissions - y.emissions).abs() <= 1e-6 * total);
        }
    }

    #[test]
    fn reduction_monotone_in_omega() {
        let p = scenario(7, 3.0).prepare().unwrap();
        let mut last = (f64::INFINITY, f64::INFINITY);
        for e in 0..16 {
            let omega = 10f64.powi(e);
            let s = p.run_with(true, omega, 48).unwrap().summary;
            let cur = (s.emissions_reduction_percent.unwrap(), s.max_daily_delta_t.unwrap());
            assert!(cur.0 <= last.0 && cur.1 <= last.1, "omega {omega}");
            last = cur;
        }
    }

    #[test]
    fn errors() {
        let mut sc = scenario(2, 1.0);
        sc.winter_model = None;
        assert!(matches!(sc.prepare(), Err(SimulationError::ModelMissing(Mode::Heating))));
        let mut sc = scenario(2, 1.0);
        sc.end += Duration::days(1);
        assert!(matches!(sc.prepare(), Err(SimulationError::SignalGap { name: "ci", .. })));
        let mut sc = scenario(2, 1.0);
        sc.pv = series(sc.start, 30, vec![0.0; 96], Unit::Kilowatt);
        assert!(matches!(sc.prepare(), Err(SimulationError::UnitMismatch { name: "pv", .. })));
        assert!(matches!(
            aggregate(Vec::new(), true, FixedOffset::east_opt(0).unwrap()),
            Err(SimulationError::EmptyLedger)
        ));
    }

    #[test]
    fn coarser_step_preserves_pv_energy() {
        let sc = scenario(2, 2.0);
        let fine = sc.prepare().unwrap();
        let coarse = sc.prepare_at(120).unwrap();
        let a: f64 = fine.e_solar().iter().sum();
        let b: f64 = coarse.e_solar().iter().sum();
        assert!((a - b).abs() < 1e-9);
        assert_eq!(coarse.len(), 24);
    }

    #[test]
    fn aggregate_examples() {
        let offset = FixedOffset::east_opt(0).unwrap();
        let t = Utc.with_ymd_and_hms(2024, 3, 1, 10, 0, 0).unwrap();
        let rec = |hour: i64, delta_t: f64, import_b: f64, import: f64| StepRecord {
            timestamp: t + Duration::hours(hour),
            mode: Mode::Heating,
            t_ref_user: 20.0,
            t_ref_applied: 20.0 + delta_t,
            alpha: 0.5,
            e_pred: import_b,
            e_solar: 0.0,
            surplus: 0.0,
            grid_import_baseline: import_b,
            grid_import: import,
            ci: 100.0,
            emissions: import * 100.0,
            delta_co2: (import_b - import) * 100.0,
            delta_t,
            e_applied: import_b,
            simplification_gap: 0.0,
        };
        let r = aggregate(
            vec![rec(0, 0.0, 0.5, 0.5), rec(1, 0.2, 0.5, 0.4), rec(2, -0.5, 0.0, 0.0)],
            true,
            offset,
        )
        .unwrap();
        assert_eq!(r.summary.days, 1);
        assert!((r.summary.emissions_reduction_percent.unwrap() - 10.0).abs() < 1e-9);
        assert!((r.summary.avg_daily_saving_g.unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(r.summary.max_daily_delta_t, Some(0.5));
    }
}
