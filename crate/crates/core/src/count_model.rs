//! Observed count series and the zero-inflated Poisson observation density.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// A calendar week, stored as the date of its Monday.
///
/// Displays as an ISO week (`2015-W40`). Parses either an ISO week or the
/// ISO date of the week's Monday.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Week(NaiveDate);

impl Week {
    pub fn from_monday(date: NaiveDate) -> Result<Self> {
        if date.weekday() != Weekday::Mon {
            return Err(Error::InvalidSeries(format!(
                "{date} is a {}, not a Monday",
                date.weekday()
            )));
        }
        Ok(Week(date))
    }

    pub fn from_iso(year: i32, week: u32) -> Option<Self> {
        NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).map(Week)
    }

    pub fn monday(self) -> NaiveDate {
        self.0
    }

    pub fn next(self) -> Self {
        Week(self.0 + Duration::weeks(1))
    }

    pub fn offset(self, weeks: i64) -> Self {
        Week(self.0 + Duration::weeks(weeks))
    }

    /// Number of weeks from `self` to `other`.
    pub fn weeks_until(self, other: Week) -> i64 {
        (other.0 - self.0).num_weeks()
    }
}

impl fmt::Display for Week {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let iso = self.0.iso_week();
        write!(f, "{}-W{:02}", iso.year(), iso.week())
    }
}

impl FromStr for Week {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((year, week)) = s.split_once("-W") {
            let year: i32 = year
                .parse()
                .map_err(|_| Error::InvalidSeries(format!("bad ISO week `{s}`")))?;
            let week: u32 = week
                .parse()
                .map_err(|_| Error::InvalidSeries(format!("bad ISO week `{s}`")))?;
            return Week::from_iso(year, week)
                .ok_or_else(|| Error::InvalidSeries(format!("no such ISO week `{s}`")));
        }
        let date = NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| Error::InvalidSeries(format!("bad week label `{s}`")))?;
        Week::from_monday(date)
    }
}

impl Serialize for Week {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Week {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered weekly non-negative counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSeries {
    labels: Vec<Week>,
    counts: Vec<u64>,
}

impl CountSeries {
    pub const MIN_LEN: usize = 2;

    pub fn new(labels: Vec<Week>, counts: Vec<u64>) -> Result<Self> {
        if labels.len() != counts.len() {
            return Err(Error::InvalidSeries(format!(
                "{} labels for {} counts",
                labels.len(),
                counts.len()
            )));
        }
        if counts.len() < Self::MIN_LEN {
            return Err(Error::SeriesTooShort {
                len: counts.len(),
                required: Self::MIN_LEN,
            });
        }
        for pair in labels.windows(2) {
            if pair[0].weeks_until(pair[1]) != 1 {
                return Err(Error::InvalidSeries(format!(
                    "weeks {} and {} are not consecutive",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(CountSeries { labels, counts })
    }

    /// Series with consecutive weekly labels starting at `start`.
    pub fn from_counts(start: Week, counts: Vec<u64>) -> Result<Self> {
        let labels = (0..counts.len() as i64).map(|i| start.offset(i)).collect();
        Self::new(labels, counts)
    }

    /// Series labelled from 2000-W01, for synthetic data.
    pub fn synthetic(counts: Vec<u64>) -> Result<Self> {
        Self::from_counts(default_start_week(), counts)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn labels(&self) -> &[Week] {
        &self.labels
    }

    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        Self::new(
            self.labels[range.clone()].to_vec(),
            self.counts[range].to_vec(),
        )
    }

    /// Mean of the strictly positive counts, or zero if there are none.
    pub fn mean_positive(&self) -> f64 {
        let (sum, n) = self
            .counts
            .iter()
            .filter(|&&y| y > 0)
            .fold((0.0, 0usize), |(s, n), &y| (s + y as f64, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

pub fn default_start_week() -> Week {
    Week::from_iso(2000, 1).expect("2000-W01 exists")
}

/// Observation parameters of one time point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipParams {
    pub z: f64,
    pub pi: f64,
}

impl ZipParams {
    pub fn new(z: f64, pi: f64) -> Result<Self> {
        if !z.is_finite() {
            return Err(Error::InvalidLogIntensity(z));
        }
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::InvalidProbability(pi));
        }
        Ok(ZipParams { z, pi })
    }

    pub fn lambda(&self) -> f64 {
        self.z.exp()
    }

    pub fn log_pmf(&self, y: u64) -> f64 {
        zip_log_pmf(y, self.z, self.pi).expect("validated on construction")
    }
}

/// `log Poisson(y; exp(z))`.
pub fn poisson_log_pmf(y: u64, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidLogIntensity(z));
    }
    let y = y as f64;
    let data_term = if y == 0.0 { 0.0 } else { y * z };
    Ok(data_term - z.exp() - ln_gamma(y + 1.0))
}

/// `log p(y | z, pi)` under the zero-inflated Poisson mixture.
pub fn zip_log_pmf(y: u64, z: f64, pi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::InvalidProbability(pi));
    }
    let poisson = poisson_log_pmf(y, z)?;
    if y == 0 {
        Ok(log_sum_exp2((1.0 - pi).ln(), pi.ln() + poisson))
    } else {
        Ok(pi.ln() + poisson)
    }
}

/// `log(exp(a) + exp(b))` without overflow or underflow.
pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let lo = a.min(b);
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum exp(x_i))`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}
