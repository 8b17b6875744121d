//! Operating mode (heating or cooling) and the calendar that selects it.

use std::fmt;

use chrono::{DateTime, Datelike, FixedOffset, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Heating,
    Cooling,
}

impl Mode {
    /// Sign of the setpoint shift used to store surplus: +1 raises the
    /// setpoint in heating, −1 lowers it in cooling.
    pub fn eta(self) -> f64 {
        match self {
            Mode::Heating => 1.0,
            Mode::Cooling => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Heating => "heating",
            Mode::Cooling => "cooling",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Month and day of month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MonthDay {
    pub month: u32,
    pub day: u32,
}

impl MonthDay {
    pub const fn new(month: u32, day: u32) -> Self {
        Self { month, day }
    }

    pub fn is_valid(self) -> bool {
        (1..=12).contains(&self.month) && (1..=31).contains(&self.day)
    }
}

/// Heating runs from `heating_start` through `heating_end` inclusive,
/// wrapping over the new year; every other local date is cooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonCalendar {
    pub heating_start: MonthDay,
    pub heating_end: MonthDay,
}

impl Default for SeasonCalendar {
    fn default() -> Self {
        Self {
            heating_start: MonthDay::new(10, 15),
            heating_end: MonthDay::new(4, 15),
        }
    }
}

impl SeasonCalendar {
    pub fn mode_on(&self, date: MonthDay) -> Mode {
        let heating = if self.heating_start <= self.heating_end {
            self.heating_start <= date && date <= self.heating_end
        } else {
            date >= self.heating_start || date <= self.heating_end
        };
        if heating {
            Mode::Heating
        } else {
            Mode::Cooling
        }
    }

    pub fn mode_at(&self, t: DateTime<Utc>, offset: FixedOffset) -> Mode {
        let local = t.with_timezone(&offset);
        self.mode_on(MonthDay::new(local.month(), local.day()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_calendar_boundaries() {
        let cal = SeasonCalendar::default();
        assert_eq!(cal.mode_on(MonthDay::new(10, 14)), Mode::Cooling);
        assert_eq!(cal.mode_on(MonthDay::new(10, 15)), Mode::Heating);
        assert_eq!(cal.mode_on(MonthDay::new(1, 1)), Mode::Heating);
        assert_eq!(cal.mode_on(MonthDay::new(4, 15)), Mode::Heating);
        assert_eq!(cal.mode_on(MonthDay::new(4, 16)), Mode::Cooling);
        assert_eq!(cal.mode_on(MonthDay::new(7, 20)), Mode::Cooling);
    }

    #[test]
    fn non_wrapping_calendar() {
        let cal = SeasonCalendar {
            heating_start: MonthDay::new(1, 1),
            heating_end: MonthDay::new(3, 31),
        };
        assert_eq!(cal.mode_on(MonthDay::new(2, 10)), Mode::Heating);
        assert_eq!(cal.mode_on(MonthDay::new(12, 10)), Mode::Cooling);
    }

    #[test]
    fn eta_sign() {
        assert_eq!(Mode::Heating.eta(), 1.0);
        assert_eq!(Mode::Cooling.eta(), -1.0);
    }
}
