//! Seeded synthetic signals, surrogates and scenarios for a small office
//! room near Milan. Everything here is deterministic for a given seed.

use std::f64::consts::PI;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::season::{Mode, SeasonCalendar};
use crate::simulator::{ControllerSettings, ScenarioConfig};
use crate::thermal_model::{IdentificationData, Input, StateSpaceModel};
use crate::timeseries::{Schedule, TimeSeries, Unit};

/// Equivalent capacitances of light, medium and heavy reference rooms, kJ/K.
pub const C_TH_LIGHT: f64 = 3130.83;
pub const C_TH_MEDIUM: f64 = 6531.77;
pub const C_TH_HEAVY: f64 = 8182.05;

const LATITUDE_DEG: f64 = 45.46;
const LONGITUDE_DEG: f64 = 9.19;
const MINUTES_PER_DAY: i64 = 1440;

/// Site and signal parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub seed: u64,
    /// Installed PV peak power, kW.
    pub pv_kwp: f64,
    pub utc_offset_minutes: i32,
}

impl Default for Site {
    fn default() -> Self {
        Self {
            seed: 2024,
            pv_kwp: 1.78,
            utc_offset_minutes: 60,
        }
    }
}

fn day_of_year(t: DateTime<Utc>) -> f64 {
    f64::from(t.ordinal0()) + f64::from(t.hour()) / 24.0 + f64::from(t.minute()) / 1440.0
}

/// Sine of the solar elevation at `t`.
fn sun_height(t: DateTime<Utc>) -> f64 {
    let doy = day_of_year(t);
    let decl = (23.44f64).to_radians() * (2.0 * PI * (doy - 80.0) / 365.0).sin();
    let solar_hour = f64::from(t.hour()) + f64::from(t.minute()) / 60.0 + LONGITUDE_DEG / 15.0;
    let hour_angle = (15.0 * (solar_hour - 12.0)).to_radians();
    let lat = LATITUDE_DEG.to_radians();
    lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos()
}

fn sample_times(start: DateTime<Utc>, step_minutes: u32, n: usize) -> impl Iterator<Item = DateTime<Utc>> {
    let step = Duration::minutes(i64::from(step_minutes));
    (0..n).map(move |k| start + step * k as i32)
}

/// Per-day cloudiness factors in [0.25, 1].
fn daily_clearness(rng: &mut ChaCha8Rng, days: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(days);
    let mut c: f64 = 0.7;
    for _ in 0..days {
        c = (0.5 * c + 0.5 * rng.random_range(0.2..1.0f64)).clamp(0.25, 1.0);
        out.push(c);
    }
    out
}

/// PV energy per step, kWh.
pub fn pv(site: &Site, start: DateTime<Utc>, step_minutes: u32, n: usize) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(site.seed ^ 0x5051);
    let span_days = (n as i64 * i64::from(step_minutes)) / MINUTES_PER_DAY + 2;
    let clear = daily_clearness(&mut rng, span_days as usize);
    let hours = f64::from(step_minutes) / 60.0;
    let values = sample_times(start, step_minutes, n)
        .map(|t| {
            let mid = t + Duration::minutes(i64::from(step_minutes) / 2);
            let h = sun_height(mid).max(0.0);
            let day = ((mid - start).num_minutes() / MINUTES_PER_DAY) as usize;
            0.8 * site.pv_kwp * h.powf(1.15) * clear[day] * hours
        })
        .collect();
    TimeSeries::new(start, step_minutes, values, Unit::KilowattHour).expect("valid pv series")
}

/// Grid carbon intensity, gCO₂/kWh: a gas-heavy mix with a midday solar
/// dip, an evening peak, a winter premium and persistent noise.
pub fn carbon_intensity(site: &Site, start: DateTime<Utc>, step_minutes: u32, n: usize) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(site.seed ^ 0xC1);
    let noise = Normal::new(0.0, 12.0).expect("valid normal");
    let mut ar = 0.0;
    let values = sample_times(start, step_minutes, n)
        .map(|t| {
            let local_h = f64::from(t.hour()) + f64::from(t.minute()) / 60.0 + f64::from(site.utc_offset_minutes) / 60.0;
            let doy = day_of_year(t);
            let season = 35.0 * (2.0 * PI * (doy + 10.0) / 365.0).cos();
            let solar_dip = -70.0 * (-((local_h - 13.0) / 2.5).powi(2)).exp();
            let evening = 45.0 * (-((local_h - 19.5) / 2.0).powi(2)).exp();
            ar = 0.9 * ar + noise.sample(&mut rng);
            (300.0 + season + solar_dip + evening + ar).max(60.0)
        })
        .collect();
    TimeSeries::new(start, step_minutes, values, Unit::GramsPerKilowattHour).expect("valid ci series")
}

/// Outdoor air temperature, °C.
pub fn outdoor_temperature(site: &Site, start: DateTime<Utc>, step_minutes: u32, n: usize) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(site.seed ^ 0x7E);
    let noise = Normal::new(0.0, 0.25).expect("valid normal");
    let mut ar = 0.0;
    let values = sample_times(start, step_minutes, n)
        .map(|t| {
            let local_h = f64::from(t.hour()) + f64::from(t.minute()) / 60.0 + f64::from(site.utc_offset_minutes) / 60.0;
            let doy = day_of_year(t);
            let annual = 13.5 - 11.0 * (2.0 * PI * (doy - 15.0) / 365.0).cos();
            let daily = 4.5 * (2.0 * PI * (local_h - 9.0) / 24.0).sin();
            ar = 0.98 * ar + noise.sample(&mut rng);
            annual + daily + ar
        })
        .collect();
    TimeSeries::new(start, step_minutes, values, Unit::Celsius).expect("valid temperature series")
}

/// Second-order surrogate with a slow and a fast mode and the given
/// steady-state gains (kW per unit input), at a 30-minute step.
pub fn two_mode_model(gains: Input, mode: Mode) -> StateSpaceModel {
    let poles = [0.95, 0.6];
    let split = [0.7, 0.3];
    let mut b = Vec::with_capacity(6);
    for i in 0..2 {
        for g in gains {
            b.push(split[i] * g * (1.0 - poles[i]));
        }
    }
    StateSpaceModel::new(2, &[poles[0], 0.0, 0.0, poles[1]], &b, &[1.0, 1.0], &[0.0; 3], 30, mode)
        .expect("stable by construction")
}

/// Heat-pump electrical demand ≈ 0.02 kW/K·(T_ref − T_ext) − 0.03 kW per
/// person.
pub fn heating_model() -> StateSpaceModel {
    two_mode_model([0.02, -0.03, -0.02], Mode::Heating)
}

/// Chiller electrical demand ≈ 0.025 kW/K·(T_ext − T_ref) + 0.04 kW per
/// person.
pub fn cooling_model() -> StateSpaceModel {
    two_mode_model([-0.025, 0.04, 0.025], Mode::Cooling)
}

/// Local midnight of a calendar date as a UTC instant.
pub fn local_midnight(site: &Site, year: i32, month: u32, day: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(year, month, day, 0, 0, 0).unwrap() - Duration::minutes(i64::from(site.utc_offset_minutes))
}

/// Scenario over `[start, start + days)` with signals at 30 minutes.
pub fn scenario(site: &Site, start: DateTime<Utc>, days: i64, c_th: f64) -> ScenarioConfig {
    let step = 30;
    let n = (days * MINUTES_PER_DAY / i64::from(step)) as usize;
    ScenarioConfig {
        start,
        end: start + Duration::days(days),
        utc_offset_minutes: site.utc_offset_minutes,
        setpoint_winter: Schedule::winter_setpoint(),
        setpoint_summer: Schedule::summer_setpoint(),
        occupancy: Schedule::office_occupancy(),
        seasons: SeasonCalendar::default(),
        ci: carbon_intensity(site, start, step, n),
        pv: pv(site, start, step, n),
        t_ext: outdoor_temperature(site, start, step, n),
        winter_model: Some(heating_model()),
        summer_model: Some(cooling_model()),
        controller: ControllerSettings {
            omega: 1e6,
            horizon_hours: 24,
            step_minutes: 30,
            gamma: 1.0,
            c_th,
        },
    }
}

/// Two weeks around the mid-April season change.
pub fn two_week_scenario(c_th: f64) -> ScenarioConfig {
    let site = Site::default();
    scenario(&site, local_midnight(&site, 2024, 4, 8), 14, c_th)
}

/// April 2024.
pub fn one_month_scenario(c_th: f64) -> ScenarioConfig {
    let site = Site::default();
    scenario(&site, local_midnight(&site, 2024, 4, 1), 30, c_th)
}

/// Calendar year 2024.
pub fn full_year_scenario(c_th: f64) -> ScenarioConfig {
    let site = Site::default();
    scenario(&site, local_midnight(&site, 2024, 1, 1), 366, c_th)
}

/// Excited training data from `model` with Gaussian output noise of
/// `noise_fraction` times the RMS clean output.
pub fn training_data(model: &StateSpaceModel, n: usize, noise_fraction: f64, seed: u64) -> IdentificationData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heating = model.mode() == Mode::Heating;
    let mut t_ext: f64 = if heating { 6.0 } else { 27.0 };
    let mut t_ref: f64 = if heating { 20.0 } else { 26.0 };
    let inputs: Vec<Input> = (0..n)
        .map(|k| {
            t_ext = (t_ext + rng.random_range(-0.6..0.6)).clamp(-8.0, 38.0);
            if k % 6 == 0 {
                t_ref = if heating {
                    rng.random_range(17.0..23.0)
                } else {
                    rng.random_range(23.0..29.0)
                };
            }
            let occ = if (k / 9) % 3 == 0 { 0.0 } else { f64::from(rng.random_range(0..4u8)) };
            [t_ref, occ, t_ext]
        })
        .collect();
    let x0 = model.steady_state(&inputs[0]);
    let mut output = model.simulate_raw(&inputs, x0);
    if noise_fraction > 0.0 {
        let rms = (output.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let noise = Normal::new(0.0, noise_fraction * rms).expect("valid normal");
        for v in &mut output {
            *v += noise.sample(&mut rng);
        }
    }
    IdentificationData {
        inputs,
        output,
        step_minutes: model.step_minutes(),
        mode: model.mode(),
    }
}

/// Write a self-contained project to `dir`: the three signal CSVs, both
/// surrogates, training CSVs drawn from them and `project.json` running the
/// controller at 30 minutes. Returns the path of `project.json`.
pub fn write_project(dir: &Path, first_day: NaiveDate, days: i64, c_th: f64) -> io::Result<PathBuf> {
    if days <= 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "days must be positive"));
    }
    let site = Site::default();
    let start = local_midnight(&site, first_day.year(), first_day.month(), first_day.day());
    let sc = scenario(&site, start, days, c_th);
    std::fs::create_dir_all(dir)?;
    for (name, series) in [("ci.csv", &sc.ci), ("pv.csv", &sc.pv), ("t_ext.csv", &sc.t_ext)] {
        let file = BufWriter::new(std::fs::File::create(dir.join(name))?);
        series.write_csv(file).map_err(io::Error::other)?;
    }
    for (name, model, seed) in [("winter", heating_model(), 1), ("summer", cooling_model(), 2)] {
        model.save(&dir.join(format!("{name}.json"))).map_err(io::Error::other)?;
        let file = BufWriter::new(std::fs::File::create(dir.join(format!("training_{name}.csv")))?);
        training_data(&model, 2000, 0.01, seed)
            .write_csv(start, file)
            .map_err(io::Error::other)?;
    }
    let last = first_day + Duration::days(days);
    let project = serde_json::json!({
        "schema_version": crate::project::SCHEMA_VERSION,
        "datasets": {
            "ci": { "path": "ci.csv", "unit": "gCO2/kWh" },
            "pv": { "path": "pv.csv", "unit": "kWh" },
            "t_ext": { "path": "t_ext.csv", "unit": "degC" }
        },
        "models": { "winter": "winter.json", "summer": "summer.json" },
        "c_th": c_th,
        "scenario": {
            "start": first_day.format("%Y-%m-%d").to_string(),
            "end": last.format("%Y-%m-%d").to_string(),
            "utc_offset_minutes": site.utc_offset_minutes
        },
        "controller": { "omega": 1e6, "horizon_hours": 24, "step_minutes": 30, "gamma": 1.0 },
        "output_dir": "output"
    });
    let path = dir.join("project.json");
    let mut text = serde_json::to_string_pretty(&project).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signals_are_plausible() {
        let site = Site::default();
        let start = local_midnight(&site, 2024, 6, 20);
        let n = 48;
        let p = pv(&site, start, 30, n);
        assert!(p.values().iter().all(|&v| v >= 0.0));
        // night is dark, midday is not
        assert_eq!(p.values()[2], 0.0);
        assert!(p.values()[26] > 0.1);
        assert!(p.sum() < 1.78 * 12.0);
        let ci = carbon_intensity(&site, start, 30, n);
        assert!(ci.values().iter().all(|&v| (60.0..600.0).contains(&v)));
        let t = outdoor_temperature(&site, start, 30, n);
        assert!(t.values().iter().all(|&v| (10.0..40.0).contains(&v)));
    }

    #[test]
    fn deterministic() {
        let a = two_week_scenario(C_TH_MEDIUM);
        let b = two_week_scenario(C_TH_MEDIUM);
        assert_eq!(a.ci, b.ci);
        assert_eq!(a.pv, b.pv);
        assert_eq!(a.t_ext, b.t_ext);
    }

    #[test]
    fn models_have_requested_gain() {
        let g = heating_model().dc_gain();
        assert!((g[0] - 0.02).abs() < 1e-12 && (g[1] + 0.03).abs() < 1e-12 && (g[2] + 0.02).abs() < 1e-12);
        let g = cooling_model().dc_gain();
        assert!((g[0] + 0.025).abs() < 1e-12 && (g[2] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn full_year_length() {
        let sc = full_year_scenario(C_TH_MEDIUM);
        assert_eq!(sc.ci.len(), 17_568);
    }
}
