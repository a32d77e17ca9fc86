use std::fmt;
use std::str::FromStr;

use crate::Error;

const SECS_PER_HOUR: i64 = 3_600;
const SECS_PER_DAY: i64 = 86_400;

/// How timestamps are bucketed into time slots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TimeScheme {
    /// 24 slots, one per hour of the day.
    #[default]
    Hourly,
    /// 7 slots, Monday = 0.
    DayOfWeek,
    /// 2 slots: weekday = 0, weekend = 1.
    WeekdayWeekend,
}

impl TimeScheme {
    pub const ALL: [TimeScheme; 3] = [
        TimeScheme::Hourly,
        TimeScheme::DayOfWeek,
        TimeScheme::WeekdayWeekend,
    ];

    pub fn slots(self) -> u32 {
        match self {
            TimeScheme::Hourly => 24,
            TimeScheme::DayOfWeek => 7,
            TimeScheme::WeekdayWeekend => 2,
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            TimeScheme::Hourly => 0,
            TimeScheme::DayOfWeek => 1,
            TimeScheme::WeekdayWeekend => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl FromStr for TimeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hourly" | "24" | "daily" => Ok(TimeScheme::Hourly),
            "day-of-week" | "weekly" | "7" => Ok(TimeScheme::DayOfWeek),
            "weekday-weekend" | "2" => Ok(TimeScheme::WeekdayWeekend),
            other => Err(Error::Config(format!("unknown time scheme {other:?}"))),
        }
    }
}

impl fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeScheme::Hourly => "hourly",
            TimeScheme::DayOfWeek => "day-of-week",
            TimeScheme::WeekdayWeekend => "weekday-weekend",
        })
    }
}

/// Time slot of a UTC epoch timestamp.
pub fn discretize_time(timestamp: i64, scheme: TimeScheme) -> u32 {
    discretize_time_with_offset(timestamp, scheme, 0)
}

/// Time slot after shifting the timestamp into local time by `utc_offset_secs`.
pub fn discretize_time_with_offset(
    timestamp: i64,
    scheme: TimeScheme,
    utc_offset_secs: i32,
) -> u32 {
    let local = timestamp + i64::from(utc_offset_secs);
    let days = local.div_euclid(SECS_PER_DAY);
    // 1970-01-01 was a Thursday, i.e. index 3 when Monday is 0.
    let weekday = (days + 3).rem_euclid(7) as u32;
    match scheme {
        TimeScheme::Hourly => (local.rem_euclid(SECS_PER_DAY) / SECS_PER_HOUR) as u32,
        TimeScheme::DayOfWeek => weekday,
        TimeScheme::WeekdayWeekend => u32::from(weekday >= 5),
    }
}
