//! Exact CPU ledger arithmetic.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::Serialize;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

const MICROS_PER_SECOND: f64 = 1e6;

/// CPU time held as an integer count of micro core-seconds.
///
/// Ledger totals are integer sums, so they are exact and independent of
/// the order in which attempts are accumulated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct CpuTime(u64);

impl CpuTime {
    pub const ZERO: CpuTime = CpuTime(0);

    pub const fn from_micros(micros: u64) -> Self {
        CpuTime(micros)
    }

    /// Rounds to the nearest micro core-second. Negative and NaN inputs
    /// saturate to zero.
    pub fn from_secs(secs: f64) -> Self {
        CpuTime((secs * MICROS_PER_SECOND).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND
    }

    pub fn as_core_hours(self) -> f64 {
        self.as_secs() / SECONDS_PER_HOUR
    }

    pub fn saturating_sub(self, rhs: CpuTime) -> CpuTime {
        CpuTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for CpuTime {
    type Output = CpuTime;

    fn add(self, rhs: CpuTime) -> CpuTime {
        CpuTime(self.0 + rhs.0)
    }
}

impl AddAssign for CpuTime {
    fn add_assign(&mut self, rhs: CpuTime) {
        self.0 += rhs.0;
    }
}

impl Sub for CpuTime {
    type Output = CpuTime;

    fn sub(self, rhs: CpuTime) -> CpuTime {
        CpuTime(self.0 - rhs.0)
    }
}

impl Sum for CpuTime {
    fn sum<I: Iterator<Item = CpuTime>>(iter: I) -> CpuTime {
        iter.fold(CpuTime::ZERO, Add::add)
    }
}

/// Fixed six-decimal core-seconds, exact for every representable value.
impl fmt::Display for CpuTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}
