//! Per (section, system) change in raw bias between an original report and
//! its round-tripped counterpart.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::RoundTripError;
use crate::rating::RawScore;
use crate::report::RatingReport;

/// Relative change in percent, undefined when the base is zero and the new
/// value is not, or when either raw score is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PercentChange {
    Value(f64),
    Undefined,
}

impl PercentChange {
    pub fn between(before: f64, after: f64) -> Self {
        if before == 0.0 {
            if after == 0.0 {
                PercentChange::Value(0.0)
            } else {
                PercentChange::Undefined
            }
        } else {
            PercentChange::Value((after - before) / before.abs() * 100.0)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            PercentChange::Value(v) => Some(v),
            PercentChange::Undefined => None,
        }
    }
}

impl Serialize for PercentChange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PercentChange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map_or(PercentChange::Undefined, PercentChange::Value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Decrease,
    Increase,
    Unchanged,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDelta {
    pub section: String,
    pub sas_id: String,
    pub before: RawScore,
    pub after: RawScore,
    /// `after - before`, absent when either side is undefined.
    pub delta: Option<f64>,
    pub percent_change: PercentChange,
    pub direction: Direction,
}

fn raw_table(report: &RatingReport) -> BTreeMap<(String, String), RawScore> {
    report
        .sections
        .iter()
        .flat_map(|s| s.partial_order.entries.iter().map(move |e| ((s.label.clone(), e.sas_id.clone()), e.raw)))
        .collect()
}

/// Pairs raw scores by section label and system id. Both reports must cover
/// exactly the same pairs.
pub fn compare_bias(original: &RatingReport, roundtrip: &RatingReport) -> Result<Vec<BiasDelta>, RoundTripError> {
    let a = raw_table(original);
    let b = raw_table(roundtrip);
    let ka: BTreeSet<_> = a.keys().collect();
    let kb: BTreeSet<_> = b.keys().collect();
    if ka != kb {
        let only = ka.symmetric_difference(&kb).next().expect("sets differ");
        return Err(RoundTripError::MismatchedReports(format!(
            "section {:?} system {:?} appears in only one report",
            only.0, only.1
        )));
    }
    let mut out = Vec::with_capacity(a.len());
    for (key, before) in &a {
        let after = b[key];
        if before.kind() != after.kind()
            && !matches!((before, after), (RawScore::Undefined, _) | (_, RawScore::Undefined))
        {
            return Err(RoundTripError::MismatchedReports(format!("section {:?} changes metric", key.0)));
        }
        let (delta, pct) = match (before.value(), after.value()) {
            (Some(x), Some(y)) => (Some(y - x), PercentChange::between(x, y)),
            _ => (None, PercentChange::Undefined),
        };
        let direction = match delta {
            Some(d) if d < 0.0 => Direction::Decrease,
            Some(d) if d > 0.0 => Direction::Increase,
            Some(_) => Direction::Unchanged,
            None if *before == after => Direction::Unchanged,
            None => Direction::Unknown,
        };
        out.push(BiasDelta {
            section: key.0.clone(),
            sas_id: key.1.clone(),
            before: *before,
            after,
            delta,
            percent_change: pct,
            direction,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_change_rules() {
        let v = PercentChange::between(5.9, 1.9).value().unwrap();
        assert!((v - -67.8).abs() < 0.1, "{v}");
        assert_eq!(PercentChange::between(0.0, 0.0), PercentChange::Value(0.0));
        assert_eq!(PercentChange::between(0.0, 2.4), PercentChange::Undefined);
        assert_eq!(PercentChange::between(2.4, 2.4), PercentChange::Value(0.0));
    }
}
