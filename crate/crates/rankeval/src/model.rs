//! Shared domain types: queries, documents, impressions, clicks, and the
//! logged dataset, plus dataset validation and Kendall rank correlation.
//!
//! All types are immutable after construction and all operations here are
//! pure, so everything is safe to share across threads. Rank indices are
//! 1-based everywhere in this crate (rank 1 is the top of the list).

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("sequences must have equal length, got {0} and {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least two elements, got {0}")]
    TooShort(usize),
}

/// Opaque query identifier, stable across dataset splits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub String);

impl QueryId {
    pub fn new(id: impl Into<String>) -> Self {
        QueryId(id.into())
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for QueryId {
    fn from(s: &str) -> Self {
        QueryId(s.to_string())
    }
}

/// Document identifier, unique within one query's candidate pool.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct DocId(pub u32);

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense real-valued feature vector of a (query, document) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// An ordered top-K list of documents shown for a query. Position index is
/// 1-based: `docs[0]` sits at rank 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Impression {
    pub query: QueryId,
    pub docs: Vec<DocId>,
}

impl Impression {
    pub fn new(query: QueryId, docs: Vec<DocId>) -> Self {
        Impression { query, docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Document at 1-based rank `k`.
    pub fn doc_at_rank(&self, k: usize) -> Option<DocId> {
        if k == 0 {
            return None;
        }
        self.docs.get(k - 1).copied()
    }
}

/// 0/1 click indicators aligned with an impression's ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClickVector(pub Vec<u8>);

impl ClickVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Click indicator at 1-based rank `k`, if in range.
    pub fn at_rank(&self, k: usize) -> Option<u8> {
        if k == 0 {
            return None;
        }
        self.0.get(k - 1).copied()
    }
}

/// One logged (query, impression, clicks) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRecord {
    pub query: QueryId,
    pub impression: Impression,
    pub clicks: ClickVector,
}

/// Feature store mapping (query, document) pairs to feature vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureStore {
    map: HashMap<QueryId, HashMap<DocId, FeatureVector>>,
    dim: usize,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            map: HashMap::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, query: QueryId, doc: DocId, features: FeatureVector) {
        self.map.entry(query).or_default().insert(doc, features);
    }

    pub fn get(&self, query: &QueryId, doc: DocId) -> Option<&FeatureVector> {
        self.map.get(query).and_then(|docs| docs.get(&doc))
    }
}

/// The logged dataset D: the records produced by the observation ranker,
/// a feature store covering every (query, document) that appears in them,
/// and the dataset-level list length K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedDataset {
    pub records: Vec<LoggedRecord>,
    pub features: FeatureStore,
    pub k: usize,
}

impl LoggedDataset {
    pub fn new(records: Vec<LoggedRecord>, features: FeatureStore, k: usize) -> Self {
        LoggedDataset {
            records,
            features,
            k,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Impressions produced by the measurement ranker, optionally paired with
/// held-out click vectors used only for ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub impressions: Vec<Impression>,
    pub clicks: Option<Vec<ClickVector>>,
}

impl MeasurementSet {
    pub fn new(impressions: Vec<Impression>) -> Self {
        MeasurementSet {
            impressions,
            clicks: None,
        }
    }

    pub fn with_clicks(impressions: Vec<Impression>, clicks: Vec<ClickVector>) -> Self {
        MeasurementSet {
            impressions,
            clicks: Some(clicks),
        }
    }

    /// First impression per query. The estimators treat the measurement
    /// ranker as deterministic, so one impression per query is the contract.
    pub fn by_query(&self) -> HashMap<&QueryId, &Impression> {
        let mut out = HashMap::new();
        for imp in &self.impressions {
            out.entry(&imp.query).or_insert(imp);
        }
        out
    }
}

/// A single validation failure, naming the record it occurred in (when there
/// is one) and the rule that was broken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub record_index: Option<usize>,
    pub rule: ViolationRule,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationRule {
    EmptyQueryId,
    QueryMismatch,
    DuplicateDoc,
    LengthMismatch,
    ClickLengthMismatch,
    ClickNotBinary,
    MissingFeature,
    FeatureDimMismatch,
    NonFiniteFeature,
}

impl fmt::Display for ViolationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ViolationRule::EmptyQueryId => "empty query id",
            ViolationRule::QueryMismatch => "query mismatch",
            ViolationRule::DuplicateDoc => "duplicate doc",
            ViolationRule::LengthMismatch => "length mismatch",
            ViolationRule::ClickLengthMismatch => "click length mismatch",
            ViolationRule::ClickNotBinary => "click not binary",
            ViolationRule::MissingFeature => "missing feature",
            ViolationRule::FeatureDimMismatch => "feature dim mismatch",
            ViolationRule::NonFiniteFeature => "non-finite feature",
        };
        f.write_str(name)
    }
}

/// Result of [`validate_dataset`]: empty iff every invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every type invariant of a logged dataset and reports the failures
/// instead of erroring, so callers can surface all problems at once.
pub fn validate_dataset(ds: &LoggedDataset) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |record_index, rule, detail: String| {
        violations.push(Violation {
            record_index,
            rule,
            detail,
        });
    };

    for (idx, rec) in ds.records.iter().enumerate() {
        let i = Some(idx);
        if rec.query.0.is_empty() {
            push(i, ViolationRule::EmptyQueryId, "query id is empty".into());
        }
        if rec.impression.query != rec.query {
            push(
                i,
                ViolationRule::QueryMismatch,
                format!(
                    "record query {} != impression query {}",
                    rec.query, rec.impression.query
                ),
            );
        }
        if rec.impression.len() != ds.k {
            push(
                i,
                ViolationRule::LengthMismatch,
                format!("impression length {} != K={}", rec.impression.len(), ds.k),
            );
        }
        let mut seen = HashSet::new();
        for doc in &rec.impression.docs {
            if !seen.insert(*doc) {
                push(
                    i,
                    ViolationRule::DuplicateDoc,
                    format!("doc {doc} appears more than once"),
                );
            }
        }
        if rec.clicks.len() != rec.impression.len() {
            push(
                i,
                ViolationRule::ClickLengthMismatch,
                format!(
                    "click vector length {} != impression length {}",
                    rec.clicks.len(),
                    rec.impression.len()
                ),
            );
        }
        for (k0, c) in rec.clicks.0.iter().enumerate() {
            if *c > 1 {
                push(
                    i,
                    ViolationRule::ClickNotBinary,
                    format!("click {} at rank {} is not 0/1", c, k0 + 1),
                );
            }
        }
        for doc in &rec.impression.docs {
            match ds.features.get(&rec.query, *doc) {
                None => push(
                    i,
                    ViolationRule::MissingFeature,
                    format!("no feature vector for ({}, {doc})", rec.query),
                ),
                Some(fv) => {
                    if fv.dim() != ds.features.dim() {
                        push(
                            i,
                            ViolationRule::FeatureDimMismatch,
                            format!(
                                "feature vector for ({}, {doc}) has dim {} != {}",
                                rec.query,
                                fv.dim(),
                                ds.features.dim()
                            ),
                        );
                    }
                    if fv.0.iter().any(|v| !v.is_finite()) {
                        push(
                            i,
                            ViolationRule::NonFiniteFeature,
                            format!("feature vector for ({}, {doc}) has non-finite entry", rec.query),
                        );
                    }
                }
            }
        }
    }

    ValidationReport { violations }
}

/// Kendall rank correlation between two equal-length sequences, with ties
/// handled by the tau-b correction so the result stays in [-1, 1].
///
/// Returns 1 for identical orderings and -1 for exact reversals.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64, ModelError> {
    if a.len() != b.len() {
        return Err(ModelError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(ModelError::TooShort(a.len()));
    }

    let n = a.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_a = 0i64;
    let mut ties_b = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            let tie_a = da == 0.0;
            let tie_b = db == 0.0;
            if tie_a && tie_b {
                // Tied in both: counts toward neither denominator term.
            } else if tie_a {
                ties_a += 1;
            } else if tie_b {
                ties_b += 1;
            } else if da * db > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }

    let nc_nd = (concordant - discordant) as f64;
    let denom_a = (concordant + discordant + ties_a) as f64;
    let denom_b = (concordant + discordant + ties_b) as f64;
    let denom = (denom_a * denom_b).sqrt();
    if denom == 0.0 {
        // Every pair tied in at least one sequence: no ordering signal.
        return Ok(0.0);
    }
    Ok(nc_nd / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector(values.to_vec())
    }

    fn well_formed_dataset() -> LoggedDataset {
        let q = QueryId::from("q1");
        let mut features = FeatureStore::new(2);
        for d in 0..3u32 {
            features.insert(q.clone(), DocId(d), fv(&[d as f64, 1.0]));
        }
        let records = vec![
            LoggedRecord {
                query: q.clone(),
                impression: Impression::new(q.clone(), vec![DocId(0), DocId(1)]),
                clicks: ClickVector(vec![1, 0]),
            },
            LoggedRecord {
                query: q.clone(),
                impression: Impression::new(q.clone(), vec![DocId(2), DocId(0)]),
                clicks: ClickVector(vec![0, 1]),
            },
        ];
        LoggedDataset::new(records, features, 2)
    }

    #[test]
    fn validate_accepts_well_formed_dataset() {
        let report = validate_dataset(&well_formed_dataset());
        assert!(report.is_clean(), "unexpected violations: {report:?}");
    }

    #[test]
    fn validate_flags_duplicate_doc() {
        let mut ds = well_formed_dataset();
        ds.records[0].impression.docs = vec![DocId(1), DocId(1)];
        let report = validate_dataset(&ds);
        let dup: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.rule == ViolationRule::DuplicateDoc)
            .collect();
        assert_eq!(dup.len(), 1);
        assert_eq!(dup[0].record_index, Some(0));
    }

    #[test]
    fn validate_flags_length_mismatch() {
        let mut ds = well_formed_dataset();
        ds.records[1].impression.docs = vec![DocId(0)];
        ds.records[1].clicks = ClickVector(vec![0]);
        let report = validate_dataset(&ds);
        let bad: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.rule == ViolationRule::LengthMismatch)
            .collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].record_index, Some(1));
    }

    #[test]
    fn validate_flags_missing_feature() {
        let mut ds = well_formed_dataset();
        ds.records[0].impression.docs = vec![DocId(0), DocId(9)];
        let report = validate_dataset(&ds);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == ViolationRule::MissingFeature));
    }

    #[test]
    fn validate_is_pure() {
        let ds = well_formed_dataset();
        assert_eq!(validate_dataset(&ds), validate_dataset(&ds));
    }

    #[test]
    fn kendall_identical_order_is_one() {
        let tau = kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert!((tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_reversed_order_is_minus_one() {
        let tau = kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((tau + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_single_swap_of_four() {
        // Six pairs, one discordant: (5 - 1) / 6 = 2/3.
        let tau = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((tau - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_rejects_bad_inputs() {
        assert_eq!(
            kendall_tau(&[1.0], &[1.0, 2.0]),
            Err(ModelError::LengthMismatch(1, 2))
        );
        assert_eq!(kendall_tau(&[1.0], &[1.0]), Err(ModelError::TooShort(1)));
    }

    #[test]
    fn kendall_matching_ties_give_one() {
        let tau = kendall_tau(&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0]).unwrap();
        assert!((tau - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kendall_self_correlation_is_one(v in proptest::collection::vec(-1e3..1e3f64, 2..20)) {
            // Keep the vector tie-free.
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
            let tau = kendall_tau(&v, &v).unwrap();
            prop_assert!((tau - 1.0).abs() < 1e-12);
        }

        #[test]
        fn kendall_is_symmetric(
            pairs in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 2..20),
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let ab = kendall_tau(&a, &b).unwrap();
            let ba = kendall_tau(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn kendall_invariant_under_monotone_transform(
            pairs in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..20),
        ) {
            let v: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let w: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let base = kendall_tau(&v, &w).unwrap();
            // exp is strictly increasing; apply to the first argument.
            let transformed: Vec<f64> = v.iter().map(|x| x.exp()).collect();
            let tau = kendall_tau(&transformed, &w).unwrap();
            prop_assert!((base - tau).abs() < 1e-9);
        }
    }
}
