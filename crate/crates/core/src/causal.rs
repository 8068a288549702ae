//! Empirical backdoor adjustment and the Deconfounding Impact Estimate.
//!
//! The input variable is the emotion word's polarity, the outcome is the
//! sentiment score and the adjustment set is the (possibly combined)
//! protected-attribute class. Because the estimand is an expectation,
//! averaging scores per `(x, z)` cell and weighting by the empirical `P(z)`
//! equals summing `P(y | x, z) P(z)` over the observed score values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::Dataset;
use crate::domain::{Polarity, ProtectedAttribute, ScoreMap, SentenceRecord};
use crate::rating::RawScore;

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CausalError {
    #[error("no observations with emotion polarity {0}")]
    EmptyCondition(Polarity),
    #[error("positivity violated: no observations for polarity {x} in confounder class {z}")]
    PositivityViolation { x: Polarity, z: String },
    #[error("record {0} has no emotion word")]
    MissingEmotion(String),
    #[error("no score for record {0}")]
    MissingScore(String),
    #[error("no datasets given")]
    NoDatasets,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub count: u64,
    pub sum_scores: f64,
}

/// Counts and score sums per `(polarity, confounder class)` cell plus the
/// confounder marginal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionalTable {
    cells: BTreeMap<(Polarity, String), Cell>,
    marginal_z: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct CellRepr {
    x: Polarity,
    z: String,
    count: u64,
    sum_scores: f64,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    cells: Vec<CellRepr>,
    marginal_z: BTreeMap<String, u64>,
}

impl Serialize for ConditionalTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TableRepr {
            cells: self
                .cells
                .iter()
                .map(|((x, z), c)| CellRepr { x: *x, z: z.clone(), count: c.count, sum_scores: c.sum_scores })
                .collect(),
            marginal_z: self.marginal_z.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConditionalTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TableRepr::deserialize(d)?;
        let mut table = ConditionalTable::default();
        for c in repr.cells {
            table.cells.insert((c.x, c.z), Cell { count: c.count, sum_scores: c.sum_scores });
        }
        table.marginal_z = repr.marginal_z;
        let mut implied: BTreeMap<String, u64> = BTreeMap::new();
        for ((_, z), c) in &table.cells {
            *implied.entry(z.clone()).or_default() += c.count;
        }
        implied.retain(|_, n| *n > 0);
        let mut declared = table.marginal_z.clone();
        declared.retain(|_, n| *n > 0);
        if implied != declared {
            return Err(serde::de::Error::custom("marginal_z is inconsistent with the cell counts"));
        }
        Ok(table)
    }
}

impl ConditionalTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: Polarity, z: &str, score: f64) {
        let cell = self.cells.entry((x, z.to_string())).or_default();
        cell.count += 1;
        cell.sum_scores += score;
        *self.marginal_z.entry(z.to_string()).or_default() += 1;
    }

    pub fn from_observations<'a, I>(obs: I) -> Self
    where
        I: IntoIterator<Item = (Polarity, &'a str, f64)>,
    {
        let mut t = Self::new();
        for (x, z, y) in obs {
            t.add(x, z, y);
        }
        t
    }

    /// Builds the table for one dataset, using the combined class of
    /// `confounders` as `z`.
    pub fn from_dataset(
        ds: &Dataset,
        scores: &ScoreMap,
        confounders: &BTreeSet<ProtectedAttribute>,
    ) -> Result<Self, CausalError> {
        let mut t = Self::new();
        for r in &ds.records {
            let x = r.emotion.as_ref().ok_or_else(|| CausalError::MissingEmotion(r.record_id.clone()))?.polarity;
            let y = *scores.get(&r.record_id).ok_or_else(|| CausalError::MissingScore(r.record_id.clone()))?;
            t.add(x, &confounder_class(r, confounders), y);
        }
        Ok(t)
    }

    pub fn cell(&self, x: Polarity, z: &str) -> Cell {
        self.cells.get(&(x, z.to_string())).copied().unwrap_or_default()
    }

    pub fn marginal_z(&self) -> &BTreeMap<String, u64> {
        &self.marginal_z
    }

    pub fn total(&self) -> u64 {
        self.marginal_z.values().sum()
    }

    fn count_x(&self, x: Polarity) -> (u64, f64) {
        self.cells
            .iter()
            .filter(|((cx, _), _)| *cx == x)
            .fold((0, 0.0), |(n, s), (_, c)| (n + c.count, s + c.sum_scores))
    }
}

/// `z` label of a record: its protected-attribute values joined with `/`,
/// or `"all"` when there are no confounders.
pub fn confounder_class(record: &SentenceRecord, confounders: &BTreeSet<ProtectedAttribute>) -> String {
    if confounders.is_empty() {
        return "all".to_string();
    }
    confounders
        .iter()
        .map(|c| match c {
            ProtectedAttribute::Gender => record.person.gender.to_string(),
            ProtectedAttribute::Race => record.person.race.to_string(),
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// Observational `E[Y | X = x]`.
pub fn expectation_given(table: &ConditionalTable, x: Polarity) -> Result<f64, CausalError> {
    let (n, sum) = table.count_x(x);
    if n == 0 {
        return Err(CausalError::EmptyCondition(x));
    }
    Ok(sum / n as f64)
}

/// Interventional `E[Y | do(X = x)] = sum_z E[Y | x, z] P(z)`.
pub fn backdoor_expectation(table: &ConditionalTable, x: Polarity) -> Result<f64, CausalError> {
    let total = table.total();
    if total == 0 {
        return Err(CausalError::EmptyCondition(x));
    }
    let mut acc = 0.0;
    for (z, &m) in &table.marginal_z {
        if m == 0 {
            continue;
        }
        let cell = table.cell(x, z);
        if cell.count == 0 {
            return Err(CausalError::PositivityViolation { x, z: z.clone() });
        }
        acc += (cell.sum_scores / cell.count as f64) * (m as f64 / total as f64);
    }
    Ok(acc)
}

/// A DIE percentage, or `Undefined` when the observational expectation is
/// (numerically) zero. `Undefined` dominates every finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DieValue {
    Value(f64),
    Undefined,
}

impl DieValue {
    pub fn max(self, other: DieValue) -> DieValue {
        match (self, other) {
            (DieValue::Value(a), DieValue::Value(b)) => DieValue::Value(a.max(b)),
            _ => DieValue::Undefined,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            DieValue::Value(v) => Some(v),
            DieValue::Undefined => None,
        }
    }
}

impl Serialize for DieValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DieValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map_or(DieValue::Undefined, DieValue::Value))
    }
}

/// `|E[Y|do(x)] - E[Y|x]| / |E[Y|x]| * 100`.
pub fn die_percent(table: &ConditionalTable, x: Polarity, zero_tol: f64) -> Result<DieValue, CausalError> {
    let observed = expectation_given(table, x)?;
    if observed.abs() <= zero_tol {
        return Ok(DieValue::Undefined);
    }
    let adjusted = backdoor_expectation(table, x)?;
    Ok(DieValue::Value((adjusted - observed).abs() / observed.abs() * 100.0))
}

/// `(DIE | x = negative, DIE | x = positive)` for one dataset and its max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DieResult {
    pub per_polarity: BTreeMap<Polarity, DieValue>,
    pub group_max: DieValue,
}

impl DieResult {
    pub fn compute(table: &ConditionalTable, zero_tol: f64) -> Result<Self, CausalError> {
        let mut per_polarity = BTreeMap::new();
        for x in Polarity::ALL {
            per_polarity.insert(x, die_percent(table, x, zero_tol)?);
        }
        let group_max = per_polarity.values().copied().reduce(DieValue::max).expect("two polarities");
        Ok(Self { per_polarity, group_max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDie {
    pub dataset_id: String,
    pub table: ConditionalTable,
    pub die: DieResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDieResult {
    pub confounders: BTreeSet<ProtectedAttribute>,
    pub raw: RawScore,
    pub per_dataset: Vec<DatasetDie>,
}

/// Worst-case DIE over the polarity tuple of each dataset, then over
/// datasets. Any undefined component makes the whole score undefined.
pub fn group_die(
    datasets: &[Dataset],
    scores: &ScoreMap,
    confounders: &BTreeSet<ProtectedAttribute>,
    zero_tol: f64,
) -> Result<GroupDieResult, CausalError> {
    if datasets.is_empty() {
        return Err(CausalError::NoDatasets);
    }
    let per_dataset = datasets
        .iter()
        .map(|ds| {
            let table = ConditionalTable::from_dataset(ds, scores, confounders)?;
            let die = DieResult::compute(&table, zero_tol)?;
            Ok(DatasetDie { dataset_id: ds.dataset_id.clone(), table, die })
        })
        .collect::<Result<Vec<_>, CausalError>>()?;
    let worst = per_dataset.iter().map(|d| d.die.group_max).reduce(DieValue::max).expect("nonempty");
    let raw = match worst {
        DieValue::Value(v) => RawScore::Die(v),
        DieValue::Undefined => RawScore::Undefined,
    };
    Ok(GroupDieResult { confounders: confounders.clone(), raw, per_dataset })
}

/// Whether observational and interventional expectations differ by more
/// than `eps`, per polarity.
pub fn confounding_verdict(table: &ConditionalTable, eps: f64) -> Result<BTreeMap<Polarity, bool>, CausalError> {
    Polarity::ALL
        .into_iter()
        .map(|x| {
            let gap = (expectation_given(table, x)? - backdoor_expectation(table, x)?).abs();
            Ok((x, gap > eps))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use Polarity::{Negative as N, Positive as P};

    fn table(obs: &[(Polarity, &str, f64, usize)]) -> ConditionalTable {
        let mut t = ConditionalTable::new();
        for &(x, z, y, n) in obs {
            for _ in 0..n {
                t.add(x, z, y);
            }
        }
        t
    }

    /// Enumerates every (y, z) outcome of the empirical joint and sums
    /// `y * P(y | x, z) * P(z)`.
    fn brute_force(obs: &[(Polarity, &str, f64, usize)], x: Polarity) -> f64 {
        let total: usize = obs.iter().map(|o| o.3).sum();
        let zs: BTreeSet<&str> = obs.iter().map(|o| o.1).collect();
        let mut acc = 0.0;
        for z in zs {
            let p_z = obs.iter().filter(|o| o.1 == z).map(|o| o.3).sum::<usize>() as f64 / total as f64;
            let n_xz: usize = obs.iter().filter(|o| o.0 == x && o.1 == z).map(|o| o.3).sum();
            let ys: BTreeSet<u64> = obs.iter().filter(|o| o.0 == x && o.1 == z).map(|o| o.2.to_bits()).collect();
            for yb in ys {
                let y = f64::from_bits(yb);
                let n_y: usize = obs.iter().filter(|o| o.0 == x && o.1 == z && o.2.to_bits() == yb).map(|o| o.3).sum();
                acc += y * (n_y as f64 / n_xz as f64) * p_z;
            }
        }
        acc
    }

    #[test]
    fn observational_expectations() {
        assert_eq!(expectation_given(&table(&[(P, "m", 1.0, 5)]), P).unwrap(), 1.0);
        assert_eq!(expectation_given(&table(&[(P, "m", 1.0, 3), (P, "f", -1.0, 3)]), P).unwrap(), 0.0);
        assert_relative_eq!(
            expectation_given(&table(&[(P, "m", 1.0, 90), (P, "f", -1.0, 10)]), P).unwrap(),
            0.8,
            epsilon = 1e-15
        );
        assert_eq!(expectation_given(&table(&[(P, "m", 1.0, 1)]), N), Err(CausalError::EmptyCondition(N)));
    }

    #[test]
    fn independent_confounder_changes_nothing() {
        let t = table(&[(N, "m", -0.5, 2), (N, "f", -0.1, 2), (P, "m", 0.9, 4), (P, "f", 0.3, 4)]);
        for x in Polarity::ALL {
            assert_relative_eq!(
                backdoor_expectation(&t, x).unwrap(),
                expectation_given(&t, x).unwrap(),
                epsilon = 1e-15
            );
            assert_relative_eq!(die_percent(&t, x, DEFAULT_ZERO_TOL).unwrap().value().unwrap(), 0.0, epsilon = 1e-12);
        }
        let single = table(&[(N, "all", -0.5, 3), (P, "all", 0.7, 2)]);
        assert_eq!(backdoor_expectation(&single, P).unwrap(), expectation_given(&single, P).unwrap());
    }

    #[test]
    fn toy_table_matches_enumeration() {
        // counts 9/1/1/9, score determined by z
        let obs = [(N, "m", 1.0, 9), (N, "f", -1.0, 1), (P, "m", 1.0, 1), (P, "f", -1.0, 9)];
        let t = table(&obs);
        for x in Polarity::ALL {
            assert_relative_eq!(backdoor_expectation(&t, x).unwrap(), brute_force(&obs, x), epsilon = 1e-12);
        }
        // E[Y|N] = 0.8, E[Y|do(N)] = 0: DIE = 100%
        assert_relative_eq!(die_percent(&t, N, DEFAULT_ZERO_TOL).unwrap().value().unwrap(), 100.0, epsilon = 1e-12);
    }

    #[test]
    fn positivity_violation_names_cell() {
        let t = table(&[(N, "m", 1.0, 2), (P, "f", 1.0, 2), (P, "m", 0.0, 1)]);
        assert_eq!(backdoor_expectation(&t, N), Err(CausalError::PositivityViolation { x: N, z: "f".into() }));
    }

    #[test]
    fn zero_observational_expectation_is_undefined() {
        let t = table(&[(N, "m", 1.0, 1), (N, "f", -1.0, 1), (P, "m", 0.5, 1), (P, "f", 0.5, 1)]);
        assert_eq!(die_percent(&t, N, DEFAULT_ZERO_TOL).unwrap(), DieValue::Undefined);
    }

    #[test]
    fn die_max_rules() {
        let v = DieValue::Value;
        let group =
            |tuples: &[(DieValue, DieValue)]| tuples.iter().map(|&(a, b)| a.max(b)).reduce(DieValue::max).unwrap();
        assert_eq!(group(&[(v(0.0), v(0.0))]), v(0.0));
        assert_eq!(group(&[(v(10.0), v(40.0)), (v(20.0), v(5.0))]), v(40.0));
        assert_eq!(group(&[(v(10.0), DieValue::Undefined)]), DieValue::Undefined);
    }

    #[test]
    fn verdict_uses_strict_inequality() {
        let same = table(&[(N, "m", -0.5, 2), (N, "f", -0.5, 2), (P, "m", 0.5, 2), (P, "f", 0.5, 2)]);
        assert!(confounding_verdict(&same, DEFAULT_EPS).unwrap().values().all(|&b| !b));
        let toy = table(&[(N, "m", 1.0, 9), (N, "f", -1.0, 1), (P, "m", 1.0, 1), (P, "f", -1.0, 9)]);
        assert!(confounding_verdict(&toy, 0.01).unwrap()[&N]);
        // gap is exactly 0.8 for the toy table
        let gap = (expectation_given(&toy, N).unwrap() - backdoor_expectation(&toy, N).unwrap()).abs();
        assert!(!confounding_verdict(&toy, gap).unwrap()[&N]);
    }

    #[test]
    fn table_json_round_trip_checks_marginals() {
        let t = table(&[(N, "m", 1.0, 2), (P, "f", 0.25, 3)]);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<ConditionalTable>(&json).unwrap(), t);
        let broken = json.replace("\"m\":2", "\"m\":7");
        assert!(serde_json::from_str::<ConditionalTable>(&broken).is_err());
    }

    fn obs_strategy() -> impl Strategy<Value = Vec<(bool, u8, i8)>> {
        prop::collection::vec((any::<bool>(), 0u8..3, -4i8..=4), 1..80)
    }

    fn build(raw: &[(bool, u8, i8)], relabel: impl Fn(u8) -> String) -> Option<ConditionalTable> {
        let mut t = ConditionalTable::new();
        for &(pos, z, y) in raw {
            t.add(if pos { P } else { N }, &relabel(z), y as f64 / 4.0);
        }
        // keep only tables where positivity holds
        for z in t.marginal_z().keys() {
            for x in Polarity::ALL {
                if t.cell(x, z).count == 0 {
                    return None;
                }
            }
        }
        Some(t)
    }

    proptest! {
        #[test]
        fn marginal_sums_to_total(raw in obs_strategy()) {
            let t = build(&raw, |z| z.to_string()).unwrap_or_else(|| {
                let mut t = ConditionalTable::new();
                for &(pos, z, y) in &raw { t.add(if pos { P } else { N }, &z.to_string(), y as f64); }
                t
            });
            let p: f64 = t.marginal_z().values().map(|&m| m as f64 / t.total() as f64).sum();
            prop_assert!((p - 1.0).abs() < 1e-12);
        }

        #[test]
        fn die_invariant_under_relabeling(raw in obs_strategy()) {
            if let (Some(a), Some(b)) = (build(&raw, |z| format!("z{z}")), build(&raw, |z| format!("w{}", 9 - z))) {
                for x in Polarity::ALL {
                    let da = die_percent(&a, x, DEFAULT_ZERO_TOL).unwrap();
                    let db = die_percent(&b, x, DEFAULT_ZERO_TOL).unwrap();
                    match (da, db) {
                        (DieValue::Value(p), DieValue::Value(q)) => prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs())),
                        (p, q) => prop_assert_eq!(p, q),
                    }
                }
            }
        }
    }
}
