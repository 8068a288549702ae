//! Turning raw bias scores into ordered ratings on a `1..=L` scale.
//!
//! The partition rule works on the sorted *distinct* raw values `V`
//! (an `Undefined` score counts as one more distinct value above every finite
//! one). With `n = |V|`:
//!
//! * `n > L`: `V` is cut into `L` contiguous blocks, the first `n mod L`
//!   blocks one element larger than the rest; a value's rating is its block
//!   number.
//! * `2 <= n <= L`: the value of rank `r` gets `1 + round((r-1)(L-1)/(n-1))`,
//!   spreading the ranks over the full scale.
//! * `n = 1`: everything is rated 1.
//!
//! `Undefined` is always rated `L`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatingError {
    #[error("rating levels must be at least 2, got {0}")]
    InvalidLevels(u32),
    #[error("partial order mixes WRS and DIE raw scores")]
    MixedMetric,
    #[error("raw score must be finite and non-negative, got {0}")]
    InvalidRaw(f64),
    #[error("duplicate system id {0}")]
    DuplicateSystem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawKind {
    Wrs,
    Die,
    Undefined,
}

/// A group-level raw bias score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RawScore {
    Wrs(f64),
    Die(f64),
    /// DIE could not be computed (zero observational expectation); sorts
    /// above every finite score.
    Undefined,
}

impl RawScore {
    pub fn kind(&self) -> RawKind {
        match self {
            RawScore::Wrs(_) => RawKind::Wrs,
            RawScore::Die(_) => RawKind::Die,
            RawScore::Undefined => RawKind::Undefined,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            RawScore::Wrs(v) | RawScore::Die(v) => Some(v),
            RawScore::Undefined => None,
        }
    }

    fn validate(&self) -> Result<(), RatingError> {
        match self.value() {
            Some(v) if !v.is_finite() || v < 0.0 => Err(RatingError::InvalidRaw(v)),
            _ => Ok(()),
        }
    }

    /// Total order on raw values: finite values ascending, `Undefined` last.
    pub fn cmp_raw(&self, other: &RawScore) -> Ordering {
        match (self.value(), other.value()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        }
    }
}

/// `{"kind": "wrs"|"die"|"undefined", "raw": number|null}`
#[derive(Serialize, Deserialize)]
struct RawScoreRepr {
    kind: RawKind,
    raw: Option<f64>,
}

impl Serialize for RawScore {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawScoreRepr { kind: self.kind(), raw: self.value() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RawScore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = RawScoreRepr::deserialize(d)?;
        let need = |v: Option<f64>| v.ok_or_else(|| serde::de::Error::custom("missing raw value"));
        Ok(match repr.kind {
            RawKind::Wrs => RawScore::Wrs(need(repr.raw)?),
            RawKind::Die => RawScore::Die(need(repr.raw)?),
            RawKind::Undefined => RawScore::Undefined,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialOrderEntry {
    pub sas_id: String,
    #[serde(flatten)]
    pub raw: RawScore,
}

/// Systems sorted ascending by raw score; ties keep input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialOrder {
    pub entries: Vec<PartialOrderEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompleteOrder {
    pub ratings: BTreeMap<String, u32>,
    pub levels: u32,
}

pub fn partial_order(raw: &[(String, RawScore)]) -> Result<PartialOrder, RatingError> {
    let mut seen_kind = None;
    let mut ids = std::collections::BTreeSet::new();
    for (id, r) in raw {
        r.validate()?;
        if !ids.insert(id.as_str()) {
            return Err(RatingError::DuplicateSystem(id.clone()));
        }
        if r.kind() != RawKind::Undefined {
            match seen_kind {
                None => seen_kind = Some(r.kind()),
                Some(k) if k != r.kind() => return Err(RatingError::MixedMetric),
                _ => {}
            }
        }
    }
    let mut entries: Vec<PartialOrderEntry> =
        raw.iter().map(|(id, r)| PartialOrderEntry { sas_id: id.clone(), raw: *r }).collect();
    // stable sort keeps input order among ties
    entries.sort_by(|a, b| a.raw.cmp_raw(&b.raw));
    Ok(PartialOrder { entries })
}

/// Maps every system of a partial order to a rating in `1..=levels`.
pub fn complete_order(po: &PartialOrder, levels: u32) -> Result<CompleteOrder, RatingError> {
    if levels < 2 {
        return Err(RatingError::InvalidLevels(levels));
    }
    let mut distinct: Vec<RawScore> = Vec::new();
    let mut sorted: Vec<RawScore> = po.entries.iter().map(|e| e.raw).collect();
    sorted.sort_by(RawScore::cmp_raw);
    for r in sorted {
        if distinct.last().is_none_or(|last| last.cmp_raw(&r) != Ordering::Equal) {
            distinct.push(r);
        }
    }
    let ratings_by_rank = rank_ratings(distinct.len() as u64, levels as u64);
    let ratings = po
        .entries
        .iter()
        .map(|e| {
            let rating = if e.raw == RawScore::Undefined {
                levels
            } else {
                let rank =
                    distinct.iter().position(|d| d.cmp_raw(&e.raw) == Ordering::Equal).expect("value is present");
                ratings_by_rank[rank] as u32
            };
            (e.sas_id.clone(), rating)
        })
        .collect();
    Ok(CompleteOrder { ratings, levels })
}

/// Rating of each 0-based rank among `n` distinct values.
fn rank_ratings(n: u64, levels: u64) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![1];
    }
    if n <= levels {
        // 1 + round(r * (L-1) / (n-1)), rounding half up, in integers
        return (0..n)
            .map(|r| {
                let num = r * (levels - 1);
                let den = n - 1;
                1 + (2 * num + den) / (2 * den)
            })
            .collect();
    }
    let small = n / levels;
    let big_blocks = n % levels;
    let mut out = Vec::with_capacity(n as usize);
    for block in 0..levels {
        let size = if block < big_blocks { small + 1 } else { small };
        out.extend(std::iter::repeat_n(block + 1, size as usize));
    }
    out
}

/// Overall rating from fine-grained ratings: the worst (largest) one.
pub fn overall_rating(fine: &[u32]) -> Option<u32> {
    fine.iter().copied().max()
}
