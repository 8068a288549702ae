//! Two-sample t statistics, multi-level rejection and the Weighted Rejection
//! Score (WRS).
//!
//! The t statistic uses unpooled variances. Rejection is two-tailed at the
//! three fixed confidence levels 95%, 70% and 60%, weighted 1.0, 0.8 and 0.6.

pub mod tdist;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::Dataset;
use crate::domain::{GenderClass, RaceClass, ScoreMap, SentenceRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least 2 observations, got {0}")]
    SampleTooSmall(usize),
    #[error("unsupported confidence level {0}; expected 0.95, 0.70 or 0.60")]
    UnsupportedCI(f64),
    #[error("dataset {dataset}: {reason}")]
    DegenerateClass { dataset: String, reason: String },
    #[error("no score for record {0}")]
    MissingScore(String),
    #[error("test list is empty")]
    NoTests,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfidenceLevel {
    #[serde(rename = "0.95")]
    P95,
    #[serde(rename = "0.70")]
    P70,
    #[serde(rename = "0.60")]
    P60,
}

impl ConfidenceLevel {
    pub const ALL: [ConfidenceLevel; 3] = [ConfidenceLevel::P95, ConfidenceLevel::P70, ConfidenceLevel::P60];

    pub fn value(self) -> f64 {
        match self {
            ConfidenceLevel::P95 => 0.95,
            ConfidenceLevel::P70 => 0.70,
            ConfidenceLevel::P60 => 0.60,
        }
    }

    /// WRS weight in tenths, so sums stay exact.
    fn weight_tenths(self) -> u64 {
        match self {
            ConfidenceLevel::P95 => 10,
            ConfidenceLevel::P70 => 8,
            ConfidenceLevel::P60 => 6,
        }
    }

    pub fn weight(self) -> f64 {
        self.weight_tenths() as f64 / 10.0
    }
}

impl TryFrom<f64> for ConfidenceLevel {
    type Error = StatsError;

    fn try_from(ci: f64) -> Result<Self, Self::Error> {
        ConfidenceLevel::ALL.into_iter().find(|l| (l.value() - ci).abs() < 1e-12).ok_or(StatsError::UnsupportedCI(ci))
    }
}

impl fmt::Display for ConfidenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.0}%", self.value() * 100.0)
    }
}

/// Rejection of the equal-means null hypothesis at each confidence level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejections {
    #[serde(rename = "0.95")]
    pub p95: bool,
    #[serde(rename = "0.70")]
    pub p70: bool,
    #[serde(rename = "0.60")]
    pub p60: bool,
}

impl Rejections {
    pub fn get(&self, level: ConfidenceLevel) -> bool {
        match level {
            ConfidenceLevel::P95 => self.p95,
            ConfidenceLevel::P70 => self.p70,
            ConfidenceLevel::P60 => self.p60,
        }
    }

    fn set(&mut self, level: ConfidenceLevel, value: bool) {
        match level {
            ConfidenceLevel::P95 => self.p95 = value,
            ConfidenceLevel::P70 => self.p70 = value,
            ConfidenceLevel::P60 => self.p60 = value,
        }
    }

    pub fn any_of(self, other: Rejections) -> Rejections {
        Rejections { p95: self.p95 || other.p95, p70: self.p70 || other.p70, p60: self.p60 || other.p60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    #[serde(with = "extended_f64")]
    pub t: f64,
    pub dof: u64,
    pub rejections: Rejections,
}

impl TTestResult {
    pub fn from_t(t: f64, dof: u64) -> Result<Self, StatsError> {
        let mut rejections = Rejections::default();
        for level in ConfidenceLevel::ALL {
            rejections.set(level, t.abs() > t_critical(level.value(), dof)?);
        }
        Ok(Self { t, dof, rejections })
    }
}

/// Serializes infinite t sentinels as the strings `"inf"` / `"-inf"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else if v.is_nan() {
            Repr::Str("nan".into()).serialize(s)
        } else if *v > 0.0 {
            Repr::Str("inf".into()).serialize(s)
        } else {
            Repr::Str("-inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WrsScore(f64);

impl WrsScore {
    pub fn value(self) -> f64 {
        self.0
    }

    /// WRS of a sequence of per-test rejection flags.
    pub fn from_rejections<I: IntoIterator<Item = Rejections>>(items: I) -> Self {
        let tenths: u64 = items
            .into_iter()
            .map(|r| {
                ConfidenceLevel::ALL.into_iter().filter(|&l| r.get(l)).map(ConfidenceLevel::weight_tenths).sum::<u64>()
            })
            .sum();
        WrsScore(tenths as f64 / 10.0)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; exactly zero for constant samples.
fn variance(xs: &[f64]) -> f64 {
    if xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::SampleTooSmall(s.len()));
        }
    }
    Ok(())
}

/// `(mean(a) - mean(b)) / sqrt(s_a^2/n_a + s_b^2/n_b)`.
///
/// When both samples are constant the statistic is `0` for equal values and
/// `±inf` (perfect separation) otherwise.
pub fn t_value(sample_a: &[f64], sample_b: &[f64]) -> Result<f64, StatsError> {
    check_sizes(sample_a, sample_b)?;
    let (va, vb) = (variance(sample_a), variance(sample_b));
    let gap = mean(sample_a) - mean(sample_b);
    if va == 0.0 && vb == 0.0 {
        return Ok(if gap == 0.0 { 0.0 } else { f64::INFINITY.copysign(gap) });
    }
    let se = (va / sample_a.len() as f64 + vb / sample_b.len() as f64).sqrt();
    Ok(gap / se)
}

/// `min(n_a, n_b) - 1`.
pub fn degrees_of_freedom(sample_a: &[f64], sample_b: &[f64]) -> Result<u64, StatsError> {
    check_sizes(sample_a, sample_b)?;
    Ok(sample_a.len().min(sample_b.len()) as u64 - 1)
}

/// Two-tailed critical value at confidence `ci`.
pub fn t_critical(ci: f64, dof: u64) -> Result<f64, StatsError> {
    let level = ConfidenceLevel::try_from(ci)?;
    if dof == 0 {
        return Err(StatsError::SampleTooSmall(1));
    }
    Ok(tdist::quantile(1.0 - (1.0 - level.value()) / 2.0, dof as f64))
}

pub fn t_test(sample_a: &[f64], sample_b: &[f64]) -> Result<TTestResult, StatsError> {
    let t = t_value(sample_a, sample_b)?;
    TTestResult::from_t(t, degrees_of_freedom(sample_a, sample_b)?)
}

pub fn weighted_rejection_score(tests: &[TTestResult]) -> WrsScore {
    WrsScore::from_rejections(tests.iter().map(|t| t.rejections))
}

/// How records are split into protected-attribute classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeSelector {
    Gender,
    Race,
    RaceGender,
}

impl AttributeSelector {
    /// Class label of a record, or `None` when the attribute is unspecified.
    pub fn class_of(self, record: &SentenceRecord) -> Option<String> {
        let g = (record.person.gender != GenderClass::Unspecified).then(|| record.person.gender.to_string());
        let r = (record.person.race != RaceClass::Unspecified).then(|| record.person.race.to_string());
        match self {
            AttributeSelector::Gender => g,
            AttributeSelector::Race => r,
            AttributeSelector::RaceGender => Some(format!("{}/{}", r?, g?)),
        }
    }

    /// Suffix used in section labels (`Group-3_R`, ...).
    pub fn suffix(self) -> &'static str {
        match self {
            AttributeSelector::Gender => "G",
            AttributeSelector::Race => "R",
            AttributeSelector::RaceGender => "RG",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub class_a: String,
    pub class_b: String,
    pub test: TTestResult,
}

/// All pairwise tests of one dataset. A confidence level counts as rejected
/// for the dataset if any pair rejects there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetTest {
    pub dataset_id: String,
    pub class_sizes: BTreeMap<String, usize>,
    pub pairs: Vec<PairTest>,
    pub rejections: Rejections,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStatResult {
    pub attribute: AttributeSelector,
    pub wrs: WrsScore,
    pub per_dataset: Vec<DatasetTest>,
}

/// Tests `(Sentiment | attribute)` across classes in each dataset and sums
/// the dataset-level rejections into a WRS. Records whose attribute is
/// unspecified are left out of the comparison.
pub fn group_statistical_bias(
    datasets: &[Dataset],
    scores: &ScoreMap,
    attribute: AttributeSelector,
) -> Result<GroupStatResult, StatsError> {
    let mut per_dataset = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let mut classes: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &ds.records {
            let score = *scores.get(&r.record_id).ok_or_else(|| StatsError::MissingScore(r.record_id.clone()))?;
            if let Some(class) = attribute.class_of(r) {
                classes.entry(class).or_default().push(score);
            }
        }
        if classes.len() < 2 {
            return Err(StatsError::DegenerateClass {
                dataset: ds.dataset_id.clone(),
                reason: format!("{attribute:?} has {} class(es) with data, need 2", classes.len()),
            });
        }
        if let Some((class, xs)) = classes.iter().find(|(_, xs)| xs.len() < 2) {
            return Err(StatsError::DegenerateClass {
                dataset: ds.dataset_id.clone(),
                reason: format!("class {class} has {} score(s), need 2", xs.len()),
            });
        }
        let keys: Vec<&String> = classes.keys().collect();
        let mut pairs = Vec::new();
        let mut rejections = Rejections::default();
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                let test = t_test(&classes[keys[i]], &classes[keys[j]])?;
                rejections = rejections.any_of(test.rejections);
                pairs.push(PairTest { class_a: keys[i].clone(), class_b: keys[j].clone(), test });
            }
        }
        per_dataset.push(DatasetTest {
            dataset_id: ds.dataset_id.clone(),
            class_sizes: classes.iter().map(|(k, v)| (k.clone(), v.len())).collect(),
            pairs,
            rejections,
        });
    }
    let wrs = WrsScore::from_rejections(per_dataset.iter().map(|d| d.rejections));
    Ok(GroupStatResult { attribute, wrs, per_dataset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identical_constant_samples_give_zero() {
        assert_eq!(t_value(&[0.5, 0.5, 0.5], &[0.5, 0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn perfect_separation_is_infinite() {
        assert_eq!(t_value(&[1.0, 1.0], &[-1.0, -1.0]).unwrap(), f64::INFINITY);
        assert_eq!(t_value(&[-1.0, -1.0], &[1.0, 1.0]).unwrap(), f64::NEG_INFINITY);
        let r = TTestResult::from_t(f64::INFINITY, 1).unwrap();
        assert!(r.rejections.p95 && r.rejections.p70 && r.rejections.p60);
    }

    #[test]
    fn hand_computed_t() {
        // gap -1, s^2 = 5/3 for both, se = sqrt(2 * (5/3) / 4)
        let expected = -1.0 / (2.0 * (5.0 / 3.0) / 4.0_f64).sqrt();
        let t = t_value(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_relative_eq!(t, expected, epsilon = 1e-15);
        assert_relative_eq!(t, -1.095_445_115_010_332, epsilon = 1e-12);
    }

    #[test]
    fn small_samples_are_rejected() {
        assert_eq!(t_value(&[1.0], &[1.0, 2.0]), Err(StatsError::SampleTooSmall(1)));
        assert_eq!(degrees_of_freedom(&[1.0, 2.0], &[]), Err(StatsError::SampleTooSmall(0)));
    }

    #[test]
    fn dof_is_min_minus_one() {
        let s = |n| vec![0.0; n];
        assert_eq!(degrees_of_freedom(&s(10), &s(10)).unwrap(), 9);
        assert_eq!(degrees_of_freedom(&s(5), &s(9)).unwrap(), 4);
        assert_eq!(degrees_of_freedom(&s(2), &s(2)).unwrap(), 1);
    }

    #[test]
    fn critical_values_match_tables() {
        assert_relative_eq!(t_critical(0.95, 10).unwrap(), 2.228_138_851_986_273_4, epsilon = 1e-6);
        assert_relative_eq!(t_critical(0.95, 1).unwrap(), 12.706_204_736_174_7, epsilon = 1e-6);
        assert_relative_eq!(t_critical(0.60, 100_000).unwrap(), 0.841_621_233_572_914, epsilon = 1e-3);
        assert_eq!(t_critical(0.90, 5), Err(StatsError::UnsupportedCI(0.90)));
    }

    #[test]
    fn wrs_examples() {
        let all = Rejections { p95: true, p70: true, p60: true };
        assert_eq!(WrsScore::from_rejections([all]).value(), 2.4);
        assert_eq!(WrsScore::from_rejections([Rejections::default(); 4]).value(), 0.0);
        assert_eq!(WrsScore::from_rejections([all; 10]).value(), 24.0);
        let t = TTestResult::from_t(f64::INFINITY, 9).unwrap();
        assert_eq!(weighted_rejection_score(&[t]).value(), 2.4);
    }

    #[test]
    fn confidence_levels_round_trip() {
        for l in ConfidenceLevel::ALL {
            assert_eq!(ConfidenceLevel::try_from(l.value()).unwrap(), l);
        }
        let json = serde_json::to_string(&TTestResult::from_t(f64::NEG_INFINITY, 3).unwrap()).unwrap();
        assert!(json.contains("\"-inf\""), "{json}");
        let back: TTestResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.t, f64::NEG_INFINITY);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 2..40)
    }

    proptest! {
        #[test]
        fn antisymmetric(a in sample(), b in sample()) {
            let ab = t_value(&a, &b).unwrap();
            let ba = t_value(&b, &a).unwrap();
            prop_assert!(ab == -ba || (ab.is_nan() && ba.is_nan()));
        }

        #[test]
        fn scale_invariant(a in sample(), b in sample(), c in 0.01f64..100.0) {
            let t = t_value(&a, &b).unwrap();
            let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
            let ts = t_value(&sa, &sb).unwrap();
            if t.is_finite() {
                prop_assert!((t - ts).abs() <= 1e-9 * (1.0 + t.abs()));
            } else {
                prop_assert_eq!(t, ts);
            }
        }

        #[test]
        fn rejections_nest(t in -20.0f64..20.0, dof in 1u64..500) {
            let r = TTestResult::from_t(t, dof).unwrap().rejections;
            prop_assert!(!r.p95 || r.p70);
            prop_assert!(!r.p70 || r.p60);
        }

        #[test]
        fn critical_value_decreases_with_dof(dof in 1u64..2000) {
            for l in ConfidenceLevel::ALL {
                prop_assert!(t_critical(l.value(), dof + 1).unwrap() < t_critical(l.value(), dof).unwrap());
            }
        }

        #[test]
        fn wrs_is_additive(xs in prop::collection::vec(any::<(bool, bool, bool)>(), 0..20),
                           ys in prop::collection::vec(any::<(bool, bool, bool)>(), 0..20)) {
            let to = |v: &Vec<(bool, bool, bool)>| v.iter().map(|&(p95, p70, p60)| Rejections { p95, p70, p60 }).collect::<Vec<_>>();
            let (a, b) = (to(&xs), to(&ys));
            let both: Vec<_> = a.iter().chain(b.iter()).copied().collect();
            let sum = WrsScore::from_rejections(a).value() + WrsScore::from_rejections(b).value();
            prop_assert!((WrsScore::from_rejections(both).value() - sum).abs() < 1e-9);
        }
    }
}
