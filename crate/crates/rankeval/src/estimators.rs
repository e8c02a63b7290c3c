//! Impression-level metrics, ground truth, and the estimator families:
//! naive exact-list matching, list-level IPW, and item+position IPW with
//! either empirical or parametric (rank-distribution) propensities, plus
//! optional inverse-propensity-weight truncation.
//!
//! All estimators are pure folds over the logged dataset in record order,
//! so results are deterministic.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClickVector, DocId, LoggedDataset, MeasurementSet, QueryId};
use crate::rankdist::ParametricPropensities;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("measurement set is empty")]
    EmptyMeasurement,

    #[error("measurement set has no clicks for ground truth")]
    MissingClicks,

    #[error("propensity must lie in (0, 1], got {0}")]
    BadPropensity(f64),

    #[error("truncation constant must be positive, got {0}")]
    BadTruncation(f64),

    #[error("no propensity available for ({query}, rank {rank})")]
    MissingPropensity { query: String, rank: usize },
}

/// Which impression metric to compute. The reciprocal-rank metric carries a
/// flag for the 1/K normalization in its list form; the sum form is used by
/// the tables in this crate's outputs when the flag is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Number of clicks on the list.
    NoC,
    /// Sum of `c_k / k`, divided by K when `normalize` is set.
    Mrr { normalize: bool },
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::NoC => "NoC",
            MetricKind::Mrr { .. } => "MRR",
        }
    }

    /// Per-rank contribution m(c_k, k) for a list of length `k_total`.
    fn term(&self, click: u8, rank: usize, k_total: usize) -> f64 {
        let c = f64::from(click);
        match self {
            MetricKind::NoC => c,
            MetricKind::Mrr { normalize } => {
                let base = c / rank as f64;
                if *normalize {
                    base / k_total as f64
                } else {
                    base
                }
            }
        }
    }
}

/// Additive impression metric over one click vector.
pub fn impression_metric(clicks: &ClickVector, kind: MetricKind) -> f64 {
    let k_total = clicks.len();
    clicks
        .0
        .iter()
        .enumerate()
        .map(|(i, &c)| kind.term(c, i + 1, k_total))
        .sum()
}

/// Mean impression metric over the measurement set's held-out clicks: the
/// ground-truth value of the measurement ranker.
pub fn ground_truth_value(ms: &MeasurementSet, kind: MetricKind) -> Result<f64, EstimatorError> {
    if ms.impressions.is_empty() {
        return Err(EstimatorError::EmptyMeasurement);
    }
    let clicks = ms.clicks.as_ref().ok_or(EstimatorError::MissingClicks)?;
    if clicks.len() != ms.impressions.len() {
        return Err(EstimatorError::MissingClicks);
    }
    let sum: f64 = clicks.iter().map(|c| impression_metric(c, kind)).sum();
    Ok(sum / ms.impressions.len() as f64)
}

/// One estimator's output plus matching/weight diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: String,
    pub metric: String,
    pub value: f64,
    pub matched_terms: usize,
    pub max_weight: f64,
    pub effective_sample_size: f64,
}

impl EstimatorReport {
    pub const CSV_HEADER: &'static str = "estimator,metric,value,matchedTerms,maxWeight,ess";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{},{:.6},{:.6}",
            self.estimator,
            self.metric,
            self.value,
            self.matched_terms,
            self.max_weight,
            self.effective_sample_size
        )
    }
}

/// Running weight diagnostics for a fold over matched terms.
#[derive(Default)]
struct WeightStats {
    matched: usize,
    max_weight: f64,
    weight_sum: f64,
    weight_sq_sum: f64,
}

impl WeightStats {
    fn push(&mut self, w: f64) {
        self.matched += 1;
        self.max_weight = self.max_weight.max(w);
        self.weight_sum += w;
        self.weight_sq_sum += w * w;
    }

    fn ess(&self) -> f64 {
        if self.weight_sq_sum == 0.0 {
            0.0
        } else {
            self.weight_sum * self.weight_sum / self.weight_sq_sum
        }
    }
}

/// Caps an inverse propensity weight: `min(1/p, m)`. Pass `f64::INFINITY`
/// to recover the untruncated weight.
pub fn truncate_weight(p: f64, m: f64) -> Result<f64, EstimatorError> {
    if p <= 0.0 || p > 1.0 || !p.is_finite() {
        return Err(EstimatorError::BadPropensity(p));
    }
    if m <= 0.0 || m.is_nan() {
        return Err(EstimatorError::BadTruncation(m));
    }
    Ok((1.0 / p).min(m))
}

/// Naive matched estimator: average metric over logged records whose full
/// impression equals the measurement impression for the same query.
pub fn estimate_naive(
    ds: &LoggedDataset,
    measurement: &MeasurementSet,
    kind: MetricKind,
) -> EstimatorReport {
    let by_query = measurement.by_query();
    let mut sum = 0.0;
    let mut stats = WeightStats::default();
    for rec in &ds.records {
        let Some(mu_imp) = by_query.get(&rec.query) else {
            continue;
        };
        if mu_imp.docs == rec.impression.docs {
            sum += impression_metric(&rec.clicks, kind);
            stats.push(1.0);
        }
    }
    let n = ds.records.len().max(1);
    EstimatorReport {
        estimator: "Naive".into(),
        metric: kind.name().into(),
        value: sum / n as f64,
        matched_terms: stats.matched,
        max_weight: stats.max_weight,
        effective_sample_size: stats.ess(),
    }
}

/// List-level IPW: as the naive estimator, with each matched term divided by
/// the empirical within-query frequency of the logged impression.
pub fn estimate_list_ipw(
    ds: &LoggedDataset,
    measurement: &MeasurementSet,
    kind: MetricKind,
) -> EstimatorReport {
    // Empirical list propensities per query.
    let mut totals: HashMap<&QueryId, usize> = HashMap::new();
    let mut list_counts: HashMap<(&QueryId, &[DocId]), usize> = HashMap::new();
    for rec in &ds.records {
        *totals.entry(&rec.query).or_default() += 1;
        *list_counts
            .entry((&rec.query, rec.impression.docs.as_slice()))
            .or_default() += 1;
    }

    let by_query = measurement.by_query();
    let mut sum = 0.0;
    let mut stats = WeightStats::default();
    for rec in &ds.records {
        let Some(mu_imp) = by_query.get(&rec.query) else {
            continue;
        };
        if mu_imp.docs == rec.impression.docs {
            let count = list_counts[&(&rec.query, rec.impression.docs.as_slice())];
            let total = totals[&rec.query];
            // A match implies this list was logged at least once.
            let p_hat = count as f64 / total as f64;
            let w = 1.0 / p_hat;
            sum += w * impression_metric(&rec.clicks, kind);
            stats.push(w);
        }
    }
    let n = ds.records.len().max(1);
    EstimatorReport {
        estimator: "List".into(),
        metric: kind.name().into(),
        value: sum / n as f64,
        matched_terms: stats.matched,
        max_weight: stats.max_weight,
        effective_sample_size: stats.ess(),
    }
}

/// Empirical (document, rank) propensities per query: the fraction of the
/// query's records that show document d at rank k.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropensityTable {
    per_query: HashMap<QueryId, QueryCounts>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct QueryCounts {
    total: usize,
    counts: HashMap<(DocId, usize), usize>,
}

impl PropensityTable {
    /// Propensity of document `d` at 1-based rank `k` for query `q`, if the
    /// pair was ever logged.
    pub fn get(&self, query: &QueryId, doc: DocId, rank: usize) -> Option<f64> {
        let q = self.per_query.get(query)?;
        let count = *q.counts.get(&(doc, rank))?;
        Some(count as f64 / q.total as f64)
    }

    /// Number of logged records for the query.
    pub fn record_count(&self, query: &QueryId) -> usize {
        self.per_query.get(query).map_or(0, |q| q.total)
    }
}

/// Builds the empirical propensity table from the logged dataset.
pub fn empirical_propensities(ds: &LoggedDataset) -> PropensityTable {
    let mut per_query: HashMap<QueryId, QueryCounts> = HashMap::new();
    for rec in &ds.records {
        let entry = per_query.entry(rec.query.clone()).or_default();
        entry.total += 1;
        for (i, doc) in rec.impression.docs.iter().enumerate() {
            *entry.counts.entry((*doc, i + 1)).or_default() += 1;
        }
    }
    PropensityTable { per_query }
}

/// Where the item+position estimator takes its propensities from.
#[derive(Debug, Clone, Copy)]
pub enum PropensitySource<'a> {
    /// Empirical frequencies from the logged dataset.
    Empirical(&'a PropensityTable),
    /// Parametric rank-distribution propensities bound to imitation scores
    /// and an inferred sigma.
    Parametric(&'a ParametricPropensities),
}

impl PropensitySource<'_> {
    fn estimator_name(&self, truncation: f64) -> String {
        let base = match self {
            PropensitySource::Empirical(_) => "EP",
            PropensitySource::Parametric(_) => "IR",
        };
        if truncation.is_finite() {
            format!("{base}(T)")
        } else {
            base.to_string()
        }
    }
}

/// Item+position IPW: every rank where the measurement impression shows the
/// same document as the logged record contributes its (truncated) inverse
/// propensity weight times the per-rank metric term.
pub fn estimate_item_ipw(
    ds: &LoggedDataset,
    measurement: &MeasurementSet,
    source: PropensitySource<'_>,
    kind: MetricKind,
    truncation: f64,
) -> Result<EstimatorReport, EstimatorError> {
    if truncation <= 0.0 || truncation.is_nan() {
        return Err(EstimatorError::BadTruncation(truncation));
    }
    let by_query = measurement.by_query();
    let mut sum = 0.0;
    let mut stats = WeightStats::default();
    for rec in &ds.records {
        let Some(mu_imp) = by_query.get(&rec.query) else {
            continue;
        };
        let k_total = rec.impression.len();
        for rank in 1..=k_total {
            let logged_doc = rec.impression.doc_at_rank(rank);
            let mu_doc = mu_imp.doc_at_rank(rank);
            let (Some(logged_doc), Some(mu_doc)) = (logged_doc, mu_doc) else {
                continue;
            };
            if logged_doc != mu_doc {
                continue;
            }
            let p = match source {
                PropensitySource::Empirical(table) => {
                    table.get(&rec.query, mu_doc, rank).ok_or_else(|| {
                        EstimatorError::MissingPropensity {
                            query: rec.query.to_string(),
                            rank,
                        }
                    })?
                }
                PropensitySource::Parametric(pp) => pp.get(&rec.query, rank).ok_or_else(|| {
                    EstimatorError::MissingPropensity {
                        query: rec.query.to_string(),
                        rank,
                    }
                })?,
            };
            let w = truncate_weight(p, truncation)?;
            let click = rec.clicks.at_rank(rank).unwrap_or(0);
            sum += w * kind.term(click, rank, k_total);
            stats.push(w);
        }
    }
    let n = ds.records.len().max(1);
    Ok(EstimatorReport {
        estimator: source.estimator_name(truncation),
        metric: kind.name().into(),
        value: sum / n as f64,
        matched_terms: stats.matched,
        max_weight: stats.max_weight,
        effective_sample_size: stats.ess(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureStore, Impression, LoggedRecord};

    fn imp(q: &str, docs: &[u32]) -> Impression {
        Impression::new(QueryId::from(q), docs.iter().map(|&d| DocId(d)).collect())
    }

    fn rec(q: &str, docs: &[u32], clicks: &[u8]) -> LoggedRecord {
        LoggedRecord {
            query: QueryId::from(q),
            impression: imp(q, docs),
            clicks: ClickVector(clicks.to_vec()),
        }
    }

    /// The two-ordering fixture: five records of [A B C] with a click at
    /// rank 2 and five of [B A C] with a click at rank 1 (A=0, B=1, C=2).
    fn two_ordering_dataset() -> LoggedDataset {
        let mut records = Vec::new();
        for _ in 0..5 {
            records.push(rec("q", &[0, 1, 2], &[0, 1, 0]));
        }
        for _ in 0..5 {
            records.push(rec("q", &[1, 0, 2], &[1, 0, 0]));
        }
        LoggedDataset::new(records, FeatureStore::new(1), 3)
    }

    #[test]
    fn noc_counts_clicks() {
        assert_eq!(impression_metric(&ClickVector(vec![1, 0, 1]), MetricKind::NoC), 2.0);
        assert_eq!(impression_metric(&ClickVector(vec![0, 0, 0]), MetricKind::NoC), 0.0);
    }

    #[test]
    fn mrr_normalized_matches_hand_value() {
        // clicks [1, 0, 1], K = 3: (1 + 1/3) / 3 = 4/9.
        let v = impression_metric(
            &ClickVector(vec![1, 0, 1]),
            MetricKind::Mrr { normalize: true },
        );
        assert!((v - 4.0 / 9.0).abs() < 1e-12);
        let unnorm = impression_metric(
            &ClickVector(vec![1, 0, 1]),
            MetricKind::Mrr { normalize: false },
        );
        assert!((unnorm - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_is_mean_over_impressions() {
        let ms = MeasurementSet::with_clicks(
            vec![imp("a", &[0, 1, 2]), imp("b", &[0, 1, 2])],
            vec![ClickVector(vec![1, 0, 0]), ClickVector(vec![1, 1, 1])],
        );
        assert_eq!(ground_truth_value(&ms, MetricKind::NoC).unwrap(), 2.0);
    }

    #[test]
    fn ground_truth_single_impression() {
        let ms = MeasurementSet::with_clicks(
            vec![imp("a", &[0, 1, 2])],
            vec![ClickVector(vec![1, 1, 0])],
        );
        assert_eq!(ground_truth_value(&ms, MetricKind::NoC).unwrap(), 2.0);
    }

    #[test]
    fn ground_truth_rejects_empty_or_clickless_sets() {
        let empty = MeasurementSet::new(vec![]);
        assert_eq!(
            ground_truth_value(&empty, MetricKind::NoC),
            Err(EstimatorError::EmptyMeasurement)
        );
        let no_clicks = MeasurementSet::new(vec![imp("a", &[0])]);
        assert_eq!(
            ground_truth_value(&no_clicks, MetricKind::NoC),
            Err(EstimatorError::MissingClicks)
        );
    }

    #[test]
    fn naive_all_match_equals_logged_mean() {
        let ds = LoggedDataset::new(
            vec![rec("a", &[0, 1], &[1, 0]), rec("b", &[2, 3], &[1, 1])],
            FeatureStore::new(1),
            2,
        );
        let ms = MeasurementSet::new(vec![imp("a", &[0, 1]), imp("b", &[2, 3])]);
        let report = estimate_naive(&ds, &ms, MetricKind::NoC);
        assert_eq!(report.value, 1.5);
        assert_eq!(report.matched_terms, 2);
    }

    #[test]
    fn naive_no_match_is_zero() {
        let ds = two_ordering_dataset();
        let ms = MeasurementSet::new(vec![imp("q", &[1, 2, 0])]);
        let report = estimate_naive(&ds, &ms, MetricKind::NoC);
        assert_eq!(report.value, 0.0);
        assert_eq!(report.matched_terms, 0);
        assert_eq!(report.effective_sample_size, 0.0);
    }

    #[test]
    fn naive_half_matched_hand_value() {
        // Two records, one matching with metric 2: (1/2) * 2 = 1.
        let ds = LoggedDataset::new(
            vec![rec("a", &[0, 1], &[1, 1]), rec("b", &[2, 3], &[1, 1])],
            FeatureStore::new(1),
            2,
        );
        let ms = MeasurementSet::new(vec![imp("a", &[0, 1]), imp("b", &[3, 2])]);
        let report = estimate_naive(&ds, &ms, MetricKind::NoC);
        assert_eq!(report.value, 1.0);
    }

    #[test]
    fn list_ipw_reweights_by_list_frequency() {
        // mu(q) = [B A C]: five matching records, each with frequency 0.5,
        // metric 1 -> (1/10) * 5 * (1/0.5) * 1 = 1.0.
        let ds = two_ordering_dataset();
        let ms = MeasurementSet::new(vec![imp("q", &[1, 0, 2])]);
        let report = estimate_list_ipw(&ds, &ms, MetricKind::NoC);
        assert!((report.value - 1.0).abs() < 1e-12);
        assert_eq!(report.matched_terms, 5);
        assert!((report.max_weight - 2.0).abs() < 1e-12);
    }

    #[test]
    fn list_ipw_no_match_is_zero() {
        let ds = two_ordering_dataset();
        let ms = MeasurementSet::new(vec![imp("q", &[1, 2, 0])]);
        let report = estimate_list_ipw(&ds, &ms, MetricKind::NoC);
        assert_eq!(report.value, 0.0);
        assert_eq!(report.matched_terms, 0);
    }

    #[test]
    fn list_ipw_equals_naive_for_deterministic_logs() {
        // One distinct list per query: every list frequency is 1.
        let ds = LoggedDataset::new(
            vec![
                rec("a", &[0, 1], &[1, 0]),
                rec("a", &[0, 1], &[0, 1]),
                rec("b", &[2, 3], &[1, 1]),
            ],
            FeatureStore::new(1),
            2,
        );
        let ms = MeasurementSet::new(vec![imp("a", &[0, 1]), imp("b", &[2, 3])]);
        let naive = estimate_naive(&ds, &ms, MetricKind::NoC);
        let list = estimate_list_ipw(&ds, &ms, MetricKind::NoC);
        assert_eq!(naive.value, list.value);
    }

    #[test]
    fn empirical_propensities_match_frequencies() {
        let mut records = vec![rec("q", &[1, 0, 2], &[0, 0, 0])];
        for _ in 0..9 {
            records.push(rec("q", &[0, 1, 2], &[0, 0, 0]));
        }
        let ds = LoggedDataset::new(records, FeatureStore::new(1), 3);
        let table = empirical_propensities(&ds);
        let q = QueryId::from("q");
        // B (doc 1) at rank 1 in exactly one of ten records.
        assert_eq!(table.get(&q, DocId(1), 1), Some(0.1));
        assert_eq!(table.get(&q, DocId(0), 1), Some(0.9));
        assert_eq!(table.get(&q, DocId(2), 3), Some(1.0));
        assert_eq!(table.get(&q, DocId(2), 1), None);
        assert_eq!(table.record_count(&q), 10);
    }

    #[test]
    fn empirical_propensities_columns_sum_to_one() {
        let ds = two_ordering_dataset();
        let table = empirical_propensities(&ds);
        let q = QueryId::from("q");
        for rank in 1..=3 {
            let sum: f64 = (0..3)
                .filter_map(|d| table.get(&q, DocId(d), rank))
                .sum();
            assert!((sum - 1.0).abs() < 1e-12, "rank {rank}: {sum}");
        }
    }

    #[test]
    fn truncate_weight_examples() {
        assert_eq!(truncate_weight(0.001, 100.0).unwrap(), 100.0);
        assert_eq!(truncate_weight(0.5, 100.0).unwrap(), 2.0);
        assert_eq!(truncate_weight(0.001, f64::INFINITY).unwrap(), 1000.0);
        assert_eq!(
            truncate_weight(0.0, 100.0),
            Err(EstimatorError::BadPropensity(0.0))
        );
    }

    #[test]
    fn item_ipw_reproduces_rare_pair_fixture() {
        // mu(q) = [B C A]: only rank-1 B matches, in the five [B A C]
        // records; p(B,1|q) = 0.5, so NoC = (1/10) * 5 * 2 * 1 = 1.0.
        let ds = two_ordering_dataset();
        let ms = MeasurementSet::new(vec![imp("q", &[1, 2, 0])]);
        let table = empirical_propensities(&ds);
        let report = estimate_item_ipw(
            &ds,
            &ms,
            PropensitySource::Empirical(&table),
            MetricKind::NoC,
            f64::INFINITY,
        )
        .unwrap();
        assert!((report.value - 1.0).abs() < 1e-12);
        assert_eq!(report.matched_terms, 5);
        assert!((report.max_weight - 2.0).abs() < 1e-12);
    }

    #[test]
    fn item_ipw_truncation_caps_the_fixture() {
        let ds = two_ordering_dataset();
        let ms = MeasurementSet::new(vec![imp("q", &[1, 2, 0])]);
        let table = empirical_propensities(&ds);
        let report = estimate_item_ipw(
            &ds,
            &ms,
            PropensitySource::Empirical(&table),
            MetricKind::NoC,
            1.0,
        )
        .unwrap();
        assert!((report.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn item_ipw_with_unit_propensities_is_match_restricted_mean() {
        // Deterministic logs and mu = pi: every propensity is 1 and the
        // estimate equals the mean logged metric.
        let ds = LoggedDataset::new(
            vec![
                rec("a", &[0, 1], &[1, 0]),
                rec("a", &[0, 1], &[1, 1]),
                rec("b", &[2, 3], &[0, 1]),
            ],
            FeatureStore::new(1),
            2,
        );
        let ms = MeasurementSet::new(vec![imp("a", &[0, 1]), imp("b", &[2, 3])]);
        let table = empirical_propensities(&ds);
        let report = estimate_item_ipw(
            &ds,
            &ms,
            PropensitySource::Empirical(&table),
            MetricKind::NoC,
            f64::INFINITY,
        )
        .unwrap();
        assert!((report.value - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.max_weight, 1.0);
        assert_eq!(report.matched_terms, 6);
        assert!((report.effective_sample_size - 6.0).abs() < 1e-12);
    }

    #[test]
    fn item_ipw_zero_overlap_gives_zero() {
        let ds = two_ordering_dataset();
        // mu shows docs at ranks never seen in the logs: C A B.
        let ms = MeasurementSet::new(vec![imp("q", &[2, 0, 1])]);
        let table = empirical_propensities(&ds);
        let report = estimate_item_ipw(
            &ds,
            &ms,
            PropensitySource::Empirical(&table),
            MetricKind::NoC,
            f64::INFINITY,
        )
        .unwrap();
        // Rank 2: [A B C] logs show B; [B A C] logs show A; mu shows A, so
        // the [B A C] records match at rank 2 with p = 0.5, click 0.
        assert_eq!(report.value, 0.0);
    }

    #[test]
    fn item_ipw_estimate_is_monotone_in_truncation() {
        let ds = two_ordering_dataset();
        let ms = MeasurementSet::new(vec![imp("q", &[1, 2, 0])]);
        let table = empirical_propensities(&ds);
        let mut last = 0.0;
        for m in [1.0, 1.5, 2.0, 10.0, f64::INFINITY] {
            let report = estimate_item_ipw(
                &ds,
                &ms,
                PropensitySource::Empirical(&table),
                MetricKind::NoC,
                m,
            )
            .unwrap();
            assert!(report.value >= last - 1e-12, "not monotone at M={m}");
            last = report.value;
        }
    }

    #[test]
    fn naive_never_exceeds_list_ipw() {
        // Termwise the list weight is >= 1, so the list estimate dominates.
        let ds = two_ordering_dataset();
        for target in [[0u32, 1, 2], [1, 0, 2], [1, 2, 0]] {
            let ms = MeasurementSet::new(vec![imp("q", &target)]);
            let naive = estimate_naive(&ds, &ms, MetricKind::NoC);
            let list = estimate_list_ipw(&ds, &ms, MetricKind::NoC);
            assert!(naive.value <= list.value + 1e-12);
        }
    }

    #[test]
    fn parametric_source_uses_rank_distribution_diagonal() {
        use crate::rankdist::ParametricPropensities;
        let ds = LoggedDataset::new(
            vec![rec("q", &[0, 1], &[1, 0]), rec("q", &[0, 1], &[1, 1])],
            FeatureStore::new(1),
            2,
        );
        let mu_imp = imp("q", &[0, 1]);
        let ms = MeasurementSet::new(vec![mu_imp.clone()]);
        // Equal scores: both diagonal propensities are 0.5, every logged
        // rank matches, weights are 2.
        let pp = ParametricPropensities::compute(&[mu_imp], |_, _| Some(0.0), 1.0).unwrap();
        let report = estimate_item_ipw(
            &ds,
            &ms,
            PropensitySource::Parametric(&pp),
            MetricKind::NoC,
            f64::INFINITY,
        )
        .unwrap();
        // (1/2) * (2*1 + 2*0 + 2*1 + 2*1) = 3.
        assert!((report.value - 3.0).abs() < 1e-9);
        assert_eq!(report.estimator, "IR");
        let truncated = estimate_item_ipw(
            &ds,
            &ms,
            PropensitySource::Parametric(&pp),
            MetricKind::NoC,
            100.0,
        )
        .unwrap();
        assert_eq!(truncated.estimator, "IR(T)");
    }

    #[test]
    fn parametric_source_missing_query_errors() {
        use crate::rankdist::ParametricPropensities;
        let ds = two_ordering_dataset();
        let ms = MeasurementSet::new(vec![imp("q", &[0, 1, 2])]);
        let pp = ParametricPropensities::compute(&[], |_, _| Some(0.0), 1.0).unwrap();
        let err = estimate_item_ipw(
            &ds,
            &ms,
            PropensitySource::Parametric(&pp),
            MetricKind::NoC,
            f64::INFINITY,
        )
        .unwrap_err();
        assert!(matches!(err, EstimatorError::MissingPropensity { .. }));
    }

    #[test]
    fn csv_row_shape() {
        let report = EstimatorReport {
            estimator: "EP".into(),
            metric: "NoC".into(),
            value: 1.25,
            matched_terms: 7,
            max_weight: 4.0,
            effective_sample_size: 3.5,
        };
        assert_eq!(report.csv_row(), "EP,NoC,1.250000,7,4.000000,3.500000");
        assert_eq!(
            EstimatorReport::CSV_HEADER,
            "estimator,metric,value,matchedTerms,maxWeight,ess"
        );
    }
}
