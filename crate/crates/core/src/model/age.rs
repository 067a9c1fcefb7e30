use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// An age equivalent. Ages are real years; `year:month` is display only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgeValue {
    Years(f64),
    /// Below the youngest normed age, e.g. `< 3`.
    BelowFloor(f64),
    /// At or above the oldest normed age, e.g. `21:5+`.
    AboveCeiling(f64),
}

impl AgeValue {
    pub fn years(&self) -> f64 {
        match *self {
            AgeValue::Years(y) | AgeValue::BelowFloor(y) | AgeValue::AboveCeiling(y) => y,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            AgeValue::BelowFloor(_) => 0,
            AgeValue::Years(_) => 1,
            AgeValue::AboveCeiling(_) => 2,
        }
    }
}

impl PartialOrd for AgeValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.rank().cmp(&other.rank()) {
            Ordering::Equal => self.years().partial_cmp(&other.years()),
            o => Some(o),
        }
    }
}

/// `year:month`, months truncated.
pub fn format_year_month(years: f64) -> String {
    let whole = years.trunc();
    let months = ((years - whole) * 12.0 + 1e-9).trunc() as u32;
    if months == 0 && years.fract().abs() < 1e-12 {
        format!("{}", whole as u32)
    } else {
        format!("{}:{}", whole as u32, months.min(11))
    }
}

fn parse_year_month(s: &str) -> Result<f64, ModelError> {
    let bad = || ModelError::InvalidAge(s.to_string());
    let (y, m) = match s.split_once(':') {
        Some((y, m)) => (y.trim(), Some(m.trim())),
        None => (s.trim(), None),
    };
    let years: u32 = y.parse().map_err(|_| bad())?;
    let months: u32 = match m {
        Some(m) => m.parse().map_err(|_| bad())?,
        None => 0,
    };
    if months > 11 {
        return Err(bad());
    }
    Ok(f64::from(years) + f64::from(months) / 12.0)
}

impl fmt::Display for AgeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AgeValue::Years(y) => f.write_str(&format_year_month(y)),
            AgeValue::BelowFloor(y) => write!(f, "< {}", format_year_month(y)),
            AgeValue::AboveCeiling(y) => write!(f, "{}+", format_year_month(y)),
        }
    }
}

impl FromStr for AgeValue {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix('<') {
            return Ok(AgeValue::BelowFloor(parse_year_month(rest)?));
        }
        if let Some(rest) = s.strip_suffix('+') {
            return Ok(AgeValue::AboveCeiling(parse_year_month(rest)?));
        }
        Ok(AgeValue::Years(parse_year_month(s)?))
    }
}

impl Serialize for AgeValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgeValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub min: u32,
    pub max: u32,
    pub age: AgeValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtestNorms {
    pub max_score: u32,
    pub entries: Vec<NormEntry>,
}

impl SubtestNorms {
    /// Intervals must tile `[0, max_score]` in order with non-decreasing ages.
    pub fn validate(&self, name: &str) -> Result<(), ModelError> {
        let err = |msg: String| ModelError::InvalidNorm(format!("{name}: {msg}"));
        if self.max_score == 0 {
            return Err(err("max_score is zero".into()));
        }
        let mut next = 0u32;
        let mut prev_age: Option<AgeValue> = None;
        for e in &self.entries {
            if e.min != next {
                return Err(err(format!("interval starting at {} expected {next}", e.min)));
            }
            if e.max < e.min {
                return Err(err(format!("empty interval {}..{}", e.min, e.max)));
            }
            if let Some(p) = prev_age {
                if e.age < p {
                    return Err(err(format!("age {} decreases after {p}", e.age)));
                }
            }
            prev_age = Some(e.age);
            next = e.max + 1;
        }
        if next != self.max_score + 1 {
            return Err(err(format!(
                "intervals cover 0..{} but max_score is {}",
                next.saturating_sub(1),
                self.max_score
            )));
        }
        Ok(())
    }

    pub fn lookup(&self, raw: u32) -> Result<AgeValue, ModelError> {
        if raw > self.max_score {
            return Err(ModelError::invalid(
                "score",
                format!("{raw} outside [0, {}]", self.max_score),
            ));
        }
        self.entries
            .iter()
            .find(|e| e.min <= raw && raw <= e.max)
            .map(|e| e.age)
            .ok_or_else(|| ModelError::InvalidNorm(format!("no interval for score {raw}")))
    }
}

/// Sub-test name to raw-score intervals and their age equivalents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NormTable {
    pub subtests: BTreeMap<String, SubtestNorms>,
}

impl NormTable {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let table: NormTable = serde_json::from_str(text)
            .map_err(|e| ModelError::InvalidNorm(format!("parse: {e}")))?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.subtests.iter().try_for_each(|(n, s)| s.validate(n))
    }

    pub fn subtest(&self, name: &str) -> Result<&SubtestNorms, ModelError> {
        self.subtests
            .get(name)
            .ok_or_else(|| ModelError::InvalidNorm(format!("no norms for sub-test {name:?}")))
    }
}
