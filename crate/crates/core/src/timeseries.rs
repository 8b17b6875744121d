//! Uniformly sampled signals and weekly schedules.
//!
//! Every series carries an explicit start instant (UTC), a step in whole
//! minutes and a physical unit tag. Energies (kWh) are extensive and are
//! summed or split when the step changes; every other unit is intensive and
//! is averaged or held.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDateTime, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("step must be a positive number of minutes")]
    NonPositiveStep,
    #[error("series is empty")]
    EmptySeries,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("cannot resample from {from} min to {to} min: ratio is not an integer over the series")]
    NonIntegerRatio { from: u32, to: u32 },
    #[error("window [{k}, {k}+{m}) overruns series of length {len}")]
    OutOfRange { k: usize, m: usize, len: usize },
    #[error("unit mismatch: {left} vs {right}")]
    UnitMismatch { left: Unit, right: Unit },
    #[error("series are not aligned (start or step differ)")]
    Misaligned,
    #[error("gap in input at row {row}: expected {expected}, found {found}")]
    Gap {
        row: usize,
        expected: DateTime<Utc>,
        found: DateTime<Utc>,
    },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Physical unit tag of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "degC")]
    Celsius,
    #[serde(rename = "kWh")]
    KilowattHour,
    #[serde(rename = "kW")]
    Kilowatt,
    #[serde(rename = "gCO2/kWh")]
    GramsPerKilowattHour,
    #[serde(rename = "persons")]
    Persons,
    #[serde(rename = "-")]
    Dimensionless,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Celsius => "degC",
            Unit::KilowattHour => "kWh",
            Unit::Kilowatt => "kW",
            Unit::GramsPerKilowattHour => "gCO2/kWh",
            Unit::Persons => "persons",
            Unit::Dimensionless => "-",
        }
    }

    /// Extensive quantities accumulate over a step (energy); the rest are
    /// rates or states.
    pub fn is_extensive(self) -> bool {
        matches!(self, Unit::KilowattHour)
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "degC" | "°C" | "C" => Ok(Unit::Celsius),
            "kWh" => Ok(Unit::KilowattHour),
            "kW" => Ok(Unit::Kilowatt),
            "gCO2/kWh" | "gCO₂/kWh" => Ok(Unit::GramsPerKilowattHour),
            "persons" => Ok(Unit::Persons),
            "-" | "dimensionless" => Ok(Unit::Dimensionless),
            other => Err(format!("unknown unit `{other}`")),
        }
    }
}

/// A uniformly sampled, unit-tagged signal. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: DateTime<Utc>,
    step_minutes: u32,
    values: Vec<f64>,
    unit: Unit,
}

impl TimeSeries {
    pub fn new(
        start: DateTime<Utc>,
        step_minutes: u32,
        values: Vec<f64>,
        unit: Unit,
    ) -> Result<Self, TimeSeriesError> {
        if step_minutes == 0 {
            return Err(TimeSeriesError::NonPositiveStep);
        }
        if values.is_empty() {
            return Err(TimeSeriesError::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TimeSeriesError::NonFinite(i));
        }
        Ok(Self {
            start,
            step_minutes,
            values,
            unit,
        })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> Duration {
        Duration::minutes(i64::from(self.step_minutes))
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + self.step() * index as i32
    }

    /// One step past the last sample.
    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len())
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Change the sampling step by an integer factor.
    ///
    /// Downsampling averages intensive quantities and sums energies;
    /// upsampling holds intensive quantities and splits energies evenly.
    pub fn resample(&self, new_step_minutes: u32) -> Result<TimeSeries, TimeSeriesError> {
        if new_step_minutes == 0 {
            return Err(TimeSeriesError::NonPositiveStep);
        }
        let ratio_err = TimeSeriesError::NonIntegerRatio {
            from: self.step_minutes,
            to: new_step_minutes,
        };
        let extensive = self.unit.is_extensive();
        let values = if new_step_minutes == self.step_minutes {
            self.values.clone()
        } else if new_step_minutes > self.step_minutes {
            if !new_step_minutes.is_multiple_of(self.step_minutes) {
                return Err(ratio_err);
            }
            let factor = (new_step_minutes / self.step_minutes) as usize;
            if !self.len().is_multiple_of(factor) {
                return Err(ratio_err);
            }
            self.values
                .chunks_exact(factor)
                .map(|block| {
                    let total: f64 = block.iter().sum();
                    if extensive {
                        total
                    } else {
                        total / factor as f64
                    }
                })
                .collect()
        } else {
            if !self.step_minutes.is_multiple_of(new_step_minutes) {
                return Err(ratio_err);
            }
            let factor = (self.step_minutes / new_step_minutes) as usize;
            self.values
                .iter()
                .flat_map(|&v| {
                    let each = if extensive { v / factor as f64 } else { v };
                    std::iter::repeat_n(each, factor)
                })
                .collect()
        };
        TimeSeries::new(self.start, new_step_minutes, values, self.unit)
    }

    /// Copy of the values at `k .. k + m`.
    pub fn window(&self, k: usize, m: usize) -> Result<Vec<f64>, TimeSeriesError> {
        match k.checked_add(m) {
            Some(end) if end <= self.len() => Ok(self.values[k..end].to_vec()),
            _ => Err(TimeSeriesError::OutOfRange {
                k,
                m,
                len: self.len(),
            }),
        }
    }

    /// Sub-series covering `[from, to)`. Both bounds must fall on the sample
    /// grid and lie inside the series.
    pub fn slice_time(
        &self,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Result<TimeSeries, TimeSeriesError> {
        let step_secs = i64::from(self.step_minutes) * 60;
        let offset = (from - self.start).num_seconds();
        let span = (to - from).num_seconds();
        if offset % step_secs != 0 || span % step_secs != 0 {
            return Err(TimeSeriesError::Misaligned);
        }
        if offset < 0 || span <= 0 {
            return Err(TimeSeriesError::OutOfRange {
                k: offset.max(0) as usize,
                m: (span.max(0) / step_secs) as usize,
                len: self.len(),
            });
        }
        let k = (offset / step_secs) as usize;
        let m = (span / step_secs) as usize;
        let values = self.window(k, m)?;
        TimeSeries::new(from, self.step_minutes, values, self.unit)
    }

    fn check_aligned(&self, other: &TimeSeries) -> Result<(), TimeSeriesError> {
        if self.unit != other.unit {
            return Err(TimeSeriesError::UnitMismatch {
                left: self.unit,
                right: other.unit,
            });
        }
        if self.start != other.start
            || self.step_minutes != other.step_minutes
            || self.len() != other.len()
        {
            return Err(TimeSeriesError::Misaligned);
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &TimeSeries) -> Result<TimeSeries, TimeSeriesError> {
        self.check_aligned(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        TimeSeries::new(self.start, self.step_minutes, values, self.unit)
    }

    pub fn checked_sub(&self, other: &TimeSeries) -> Result<TimeSeries, TimeSeriesError> {
        self.check_aligned(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        TimeSeries::new(self.start, self.step_minutes, values, self.unit)
    }

    /// Read a `timestamp,value` CSV. The step is inferred from the first two
    /// rows; any later row off that grid is rejected as a gap.
    pub fn read_csv<R: Read>(reader: R, unit: Unit) -> Result<TimeSeries, TimeSeriesError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
        if headers.len() < 2
            || !headers[0].eq_ignore_ascii_case("timestamp")
            || !headers[1].eq_ignore_ascii_case("value")
        {
            return Err(TimeSeriesError::Parse {
                row: 0,
                message: "expected header `timestamp,value`".into(),
            });
        }
        let mut stamps = Vec::new();
        let mut values = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| csv_err(row, e))?;
            let stamp = parse_timestamp(&record[0]).ok_or_else(|| TimeSeriesError::Parse {
                row,
                message: format!("bad timestamp `{}`", &record[0]),
            })?;
            let raw = record.get(1).unwrap_or("");
            if raw.is_empty() {
                return Err(TimeSeriesError::Parse {
                    row,
                    message: "missing value".into(),
                });
            }
            let value: f64 = raw.parse().map_err(|_| TimeSeriesError::Parse {
                row,
                message: format!("bad value `{raw}`"),
            })?;
            stamps.push(stamp);
            values.push(value);
        }
        let start = *stamps.first().ok_or(TimeSeriesError::EmptySeries)?;
        let step_minutes = match stamps.get(1) {
            Some(&second) => {
                let mins = (second - start).num_minutes();
                if mins <= 0 || (second - start).num_seconds() % 60 != 0 {
                    return Err(TimeSeriesError::NonPositiveStep);
                }
                mins as u32
            }
            // A single sample carries no step information; assume hourly.
            None => 60,
        };
        let step = Duration::minutes(i64::from(step_minutes));
        for (i, &found) in stamps.iter().enumerate() {
            let expected = start + step * i as i32;
            if found != expected {
                return Err(TimeSeriesError::Gap {
                    row: i + 1,
                    expected,
                    found,
                });
            }
        }
        TimeSeries::new(start, step_minutes, values, unit)
    }

    pub fn read_csv_path(path: &Path, unit: Unit) -> Result<TimeSeries, TimeSeriesError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), unit)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), TimeSeriesError> {
        writeln!(out, "timestamp,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{:.6}", format_timestamp(self.timestamp(i)), v)?;
        }
        Ok(())
    }
}

fn csv_err(row: usize, e: csv::Error) -> TimeSeriesError {
    TimeSeriesError::Parse {
        row,
        message: e.to_string(),
    }
}

/// Accepts RFC 3339 or a naive `YYYY-MM-DD[T ]HH:MM[:SS]` taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// One constant-valued span of a daily profile, in local hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

/// Piecewise-constant day covering `[0, 24)` with no overlaps or holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct DailyProfile {
    segments: Vec<Segment>,
}

impl DailyProfile {
    pub fn new(mut segments: Vec<Segment>) -> Result<Self, TimeSeriesError> {
        let invalid = |msg: String| Err(TimeSeriesError::InvalidSchedule(msg));
        if segments.is_empty() {
            return invalid("profile has no segments".into());
        }
        segments.sort_by(|a, b| a.from.total_cmp(&b.from));
        let mut cursor = 0.0;
        for s in &segments {
            if !s.value.is_finite() {
                return invalid(format!("non-finite value in segment starting at {}", s.from));
            }
            if s.from != cursor {
                return invalid(format!("segments must be contiguous: expected start {cursor}, found {}", s.from));
            }
            if s.to <= s.from {
                return invalid(format!("empty segment [{}, {})", s.from, s.to));
            }
            cursor = s.to;
        }
        if cursor != 24.0 {
            return invalid(format!("profile ends at {cursor} h instead of 24 h"));
        }
        Ok(Self { segments })
    }

    /// Profile with the same value all day.
    pub fn constant(value: f64) -> Self {
        Self {
            segments: vec![Segment {
                from: 0.0,
                to: 24.0,
                value,
            }],
        }
    }

    /// `value_in` during `[from, to)`, `value_out` for the rest of the day.
    pub fn block(from: f64, to: f64, value_in: f64, value_out: f64) -> Self {
        Self::new(vec![
            Segment { from: 0.0, to: from, value: value_out },
            Segment { from, to, value: value_in },
            Segment { from: to, to: 24.0, value: value_out },
        ])
        .expect("block profile bounds must satisfy 0 < from < to < 24")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn value_at(&self, hour: f64) -> f64 {
        let idx = self.segments.partition_point(|s| s.to <= hour);
        self.segments[idx.min(self.segments.len() - 1)].value
    }
}

impl TryFrom<Vec<Segment>> for DailyProfile {
    type Error = TimeSeriesError;

    fn try_from(segments: Vec<Segment>) -> Result<Self, Self::Error> {
        DailyProfile::new(segments)
    }
}

impl From<DailyProfile> for Vec<Segment> {
    fn from(p: DailyProfile) -> Self {
        p.segments
    }
}

/// Weekday and weekend daily profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub weekday: DailyProfile,
    pub weekend: DailyProfile,
}

impl Schedule {
    /// Office occupancy: two people during working hours on weekdays.
    pub fn office_occupancy() -> Self {
        Self {
            weekday: DailyProfile::block(8.0, 19.0, 2.0, 0.0),
            weekend: DailyProfile::constant(0.0),
        }
    }

    /// Heating-season user setpoint: 20 °C working hours, 18 °C otherwise.
    pub fn winter_setpoint() -> Self {
        Self {
            weekday: DailyProfile::block(8.0, 19.0, 20.0, 18.0),
            weekend: DailyProfile::constant(18.0),
        }
    }

    /// Cooling-season user setpoint: 26 °C working hours, 28 °C otherwise.
    pub fn summer_setpoint() -> Self {
        Self {
            weekday: DailyProfile::block(8.0, 19.0, 26.0, 28.0),
            weekend: DailyProfile::constant(28.0),
        }
    }

    /// Value at instant `t`, evaluated in the local time given by `offset`.
    pub fn sample(&self, t: DateTime<Utc>, offset: FixedOffset) -> f64 {
        let local = t.with_timezone(&offset);
        let hour = f64::from(local.hour())
            + f64::from(local.minute()) / 60.0
            + f64::from(local.second()) / 3600.0;
        let profile = match local.weekday() {
            Weekday::Sat | Weekday::Sun => &self.weekend,
            _ => &self.weekday,
        };
        profile.value_at(hour)
    }

    /// All values that the schedule can produce.
    pub fn values(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .weekday
            .segments()
            .iter()
            .chain(self.weekend.segments())
            .map(|s| s.value)
            .collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        vals
    }

    /// The highest weekday value, i.e. the occupied-hours setpoint for
    /// heating or the peak occupancy.
    pub fn weekday_max(&self) -> f64 {
        self.weekday.segments().iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn weekday_min(&self) -> f64 {
        self.weekday.segments().iter().map(|s| s.value).fold(f64::INFINITY, f64::min)
    }
}
