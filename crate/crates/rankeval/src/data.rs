//! Data ingestion and preparation: LETOR-format parsing/serialization, a
//! seeded synthetic pool generator with known ground truth, query-level
//! splitting, and the bootstrapped observation-query multiset.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{DocId, FeatureVector, QueryId};

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("split fractions must each lie in (0, 1) and sum to 1")]
    BadSplitSpec,

    #[error("too few queries ({0}) to populate all splits")]
    TooFewQueries(usize),

    #[error("no query has a relevant document; cannot build observation multiset")]
    NoRelevantDocs,

    #[error("invalid synthetic config: {0}")]
    BadSyntheticConfig(String),
}

/// One candidate document of a query: identifier, features, and an integer
/// relevance grade (binarized later for training and click simulation).
#[derive(Debug, Clone, PartialEq)]
pub struct PoolDoc {
    pub id: DocId,
    pub features: FeatureVector,
    pub label: i32,
}

/// A query with its labeled candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolQuery {
    pub id: QueryId,
    pub docs: Vec<PoolDoc>,
}

/// A labeled ranking pool: the in-memory form of a LETOR file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPool {
    pub queries: Vec<PoolQuery>,
    pub feature_dim: usize,
}

impl LabeledPool {
    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn query(&self, id: &QueryId) -> Option<&PoolQuery> {
        self.queries.iter().find(|q| &q.id == id)
    }
}

/// Configuration of the synthetic pool generator. `hidden_dim` controls how
/// much of the label signal is carried by features that are *not* exported,
/// and `relevance_noise` flips a grade by one level with the given
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_queries: usize,
    pub candidates_per_query: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub relevance_noise: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), DataError> {
        if self.num_queries == 0 {
            return Err(DataError::BadSyntheticConfig("num_queries must be > 0".into()));
        }
        if self.candidates_per_query == 0 {
            return Err(DataError::BadSyntheticConfig(
                "candidates_per_query must be > 0".into(),
            ));
        }
        if self.feature_dim == 0 {
            return Err(DataError::BadSyntheticConfig("feature_dim must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.relevance_noise) {
            return Err(DataError::BadSyntheticConfig(
                "relevance_noise must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Query-level train/validate/test split fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validate: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    fn validate(&self) -> Result<(), DataError> {
        let fractions = [self.train, self.validate, self.test];
        if fractions.iter().any(|f| *f <= 0.0 || *f >= 1.0) {
            return Err(DataError::BadSplitSpec);
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::BadSplitSpec);
        }
        Ok(())
    }
}

/// Parses LETOR/LibSVM ranking text: one line per document,
/// `<label> qid:<id> <featIdx>:<value> ... [# comment]`, feature indices
/// 1-based and sparse. Lines are grouped by qid in order of first
/// appearance; missing indices read as 0.0; the feature dimension is the
/// global maximum index.
pub fn parse_letor<R: BufRead>(reader: R) -> Result<LabeledPool, DataError> {
    let mut queries: Vec<PoolQuery> = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut row_of: Vec<(usize, usize)> = Vec::new(); // (query idx, doc idx)
    let mut max_index = 0usize;

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| DataError::Malformed {
            line: line_no,
            reason: format!("io error: {e}"),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();

        let label_tok = tokens.next().ok_or_else(|| DataError::Malformed {
            line: line_no,
            reason: "missing label".into(),
        })?;
        let label: i32 = label_tok.parse().map_err(|_| DataError::Malformed {
            line: line_no,
            reason: format!("bad label '{label_tok}'"),
        })?;

        let qid_tok = tokens.next().ok_or_else(|| DataError::Malformed {
            line: line_no,
            reason: "missing qid field".into(),
        })?;
        let qid = qid_tok
            .strip_prefix("qid:")
            .filter(|s| !s.is_empty())
            .ok_or_else(|| DataError::Malformed {
                line: line_no,
                reason: format!("expected qid:<id>, got '{qid_tok}'"),
            })?;

        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DataError::Malformed {
                line: line_no,
                reason: format!("expected <index>:<value>, got '{tok}'"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DataError::Malformed {
                line: line_no,
                reason: format!("bad feature index '{idx}'"),
            })?;
            if idx == 0 {
                return Err(DataError::Malformed {
                    line: line_no,
                    reason: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| DataError::Malformed {
                line: line_no,
                reason: format!("bad feature value '{val}'"),
            })?;
            max_index = max_index.max(idx);
            row.push((idx, val));
        }

        let query_id = QueryId::new(qid);
        let qidx = match queries.iter().position(|q| q.id == query_id) {
            Some(i) => i,
            None => {
                queries.push(PoolQuery {
                    id: query_id,
                    docs: Vec::new(),
                });
                queries.len() - 1
            }
        };
        let doc_idx = queries[qidx].docs.len();
        queries[qidx].docs.push(PoolDoc {
            id: DocId(doc_idx as u32),
            features: FeatureVector(Vec::new()), // filled below once dim is known
            label,
        });
        row_of.push((qidx, doc_idx));
        sparse_rows.push(row);
    }

    for (row, (qidx, didx)) in sparse_rows.into_iter().zip(row_of) {
        let mut dense = vec![0.0; max_index];
        for (idx, val) in row {
            dense[idx - 1] = val;
        }
        queries[qidx].docs[didx].features = FeatureVector(dense);
    }

    Ok(LabeledPool {
        queries,
        feature_dim: max_index,
    })
}

/// Writes a pool in the format accepted by [`parse_letor`]. Features are
/// written densely so that the parse/serialize round trip is the identity.
pub fn serialize_letor<W: Write>(pool: &LabeledPool, writer: &mut W) -> std::io::Result<()> {
    for query in &pool.queries {
        for doc in &query.docs {
            write!(writer, "{} qid:{}", doc.label, query.id)?;
            for (i, v) in doc.features.0.iter().enumerate() {
                write!(writer, " {}:{}", i + 1, v)?;
            }
            writeln!(writer)?;
        }
    }
    Ok(())
}

/// Maps integer grades to binary relevance: 1 when `label >= threshold`.
pub fn binarize_labels(pool: &LabeledPool, threshold: i32) -> LabeledPool {
    let mut out = pool.clone();
    for query in &mut out.queries {
        for doc in &mut query.docs {
            doc.label = i32::from(doc.label >= threshold);
        }
    }
    out
}

/// Dimensions of the fixed random scoring network behind the synthetic
/// generator.
const LATENT_HIDDEN: usize = 16;

/// Generates a labeled pool with a known latent structure. Features are
/// standard Gaussian; a fixed random two-layer tanh network of the
/// concatenated (exported, hidden) features yields a utility per document;
/// grades 0..=3 are the within-query quartile of that utility, with
/// `relevance_noise` flipping a grade one level. Identical seeds produce
/// bit-identical pools.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<LabeledPool, DataError> {
    Ok(generate_synthetic_with_utilities(cfg)?.0)
}

/// As [`generate_synthetic`], also returning the latent per-document
/// utilities (outer Vec per query), which tests use as an oracle.
pub fn generate_synthetic_with_utilities(
    cfg: &SyntheticConfig,
) -> Result<(LabeledPool, Vec<Vec<f64>>), DataError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total_dim = cfg.feature_dim + cfg.hidden_dim;

    // Fixed latent scorer, drawn once per pool.
    let w1: Vec<f64> = (0..LATENT_HIDDEN * total_dim)
        .map(|_| gaussian(&mut rng) / (total_dim as f64).sqrt())
        .collect();
    let b1: Vec<f64> = (0..LATENT_HIDDEN).map(|_| 0.1 * gaussian(&mut rng)).collect();
    let w2: Vec<f64> = (0..LATENT_HIDDEN)
        .map(|_| gaussian(&mut rng) / (LATENT_HIDDEN as f64).sqrt())
        .collect();

    let utility = |x: &[f64]| -> f64 {
        let mut out = 0.0;
        for h in 0..LATENT_HIDDEN {
            let mut z = b1[h];
            for (j, xj) in x.iter().enumerate() {
                z += w1[h * total_dim + j] * xj;
            }
            out += w2[h] * z.tanh();
        }
        out
    };

    let mut queries = Vec::with_capacity(cfg.num_queries);
    let mut utilities = Vec::with_capacity(cfg.num_queries);
    for qi in 0..cfg.num_queries {
        let n = cfg.candidates_per_query;
        let mut docs = Vec::with_capacity(n);
        let mut utils = Vec::with_capacity(n);
        for di in 0..n {
            let full: Vec<f64> = (0..total_dim).map(|_| gaussian(&mut rng)).collect();
            let u = utility(&full);
            utils.push(u);
            docs.push(PoolDoc {
                id: DocId(di as u32),
                features: FeatureVector(full[..cfg.feature_dim].to_vec()),
                label: 0,
            });
        }

        // Within-query quartile grades: top quarter of utilities gets 3.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| utils[b].total_cmp(&utils[a]).then(a.cmp(&b)));
        for (pos, &di) in order.iter().enumerate() {
            docs[di].label = 3 - (4 * pos / n) as i32;
        }

        for doc in &mut docs {
            if cfg.relevance_noise > 0.0 && rng.gen::<f64>() < cfg.relevance_noise {
                let up = rng.gen::<bool>();
                doc.label = (doc.label + if up { 1 } else { -1 }).clamp(0, 3);
            }
        }

        queries.push(PoolQuery {
            id: QueryId::new(format!("{}", qi + 1)),
            docs,
        });
        utilities.push(utils);
    }

    Ok((
        LabeledPool {
            queries,
            feature_dim: cfg.feature_dim,
        },
        utilities,
    ))
}

/// Box-Muller transform; two uniforms per draw keeps the stream layout
/// independent of rejection behaviour.
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Splits a pool into disjoint (train, validate, test) pools at the query
/// level with a seeded shuffle. The union of the three outputs is the input.
pub fn split_pool(
    pool: &LabeledPool,
    spec: &SplitSpec,
) -> Result<(LabeledPool, LabeledPool, LabeledPool), DataError> {
    spec.validate()?;
    let n = pool.num_queries();
    let n_train = (spec.train * n as f64).round() as usize;
    let n_validate = (spec.validate * n as f64).round() as usize;
    if n_train == 0 || n_validate == 0 || n_train + n_validate >= n {
        return Err(DataError::TooFewQueries(n));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffle(&mut order, &mut rng);

    let pick = |indices: &[usize]| -> LabeledPool {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable(); // keep the original query order within a split
        LabeledPool {
            queries: sorted.iter().map(|&i| pool.queries[i].clone()).collect(),
            feature_dim: pool.feature_dim,
        }
    };

    let train = pick(&order[..n_train]);
    let validate = pick(&order[n_train..n_train + n_validate]);
    let test = pick(&order[n_train + n_validate..]);
    Ok((train, validate, test))
}

/// Fisher-Yates with draws taken from the given stream.
pub(crate) fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Samples `target_count` query ids with replacement, each query weighted by
/// its number of relevant (binary label 1) documents. Queries with no
/// relevant documents are never sampled.
pub fn build_observation_queries(
    pool: &LabeledPool,
    target_count: usize,
    seed: u64,
) -> Result<Vec<QueryId>, DataError> {
    let weights: Vec<f64> = pool
        .queries
        .iter()
        .map(|q| q.docs.iter().filter(|d| d.label > 0).count() as f64)
        .collect();
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(DataError::NoRelevantDocs);
    }

    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(target_count);
    for _ in 0..target_count {
        let u = rng.gen::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= u).min(weights.len() - 1);
        out.push(pool.queries[idx].id.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;
    use std::io::Cursor;

    #[test]
    fn parse_single_sparse_line() {
        let pool = parse_letor(Cursor::new("1 qid:7 1:0.5 3:-0.2")).unwrap();
        assert_eq!(pool.num_queries(), 1);
        assert_eq!(pool.feature_dim, 3);
        let q = &pool.queries[0];
        assert_eq!(q.id, QueryId::from("7"));
        assert_eq!(q.docs.len(), 1);
        assert_eq!(q.docs[0].label, 1);
        assert_eq!(q.docs[0].features.0, vec![0.5, 0.0, -0.2]);
    }

    #[test]
    fn parse_groups_lines_by_qid() {
        let text = "0 qid:7 1:1.0\n2 qid:7 1:2.0\n1 qid:8 1:3.0\n";
        let pool = parse_letor(Cursor::new(text)).unwrap();
        assert_eq!(pool.num_queries(), 2);
        assert_eq!(pool.queries[0].docs.len(), 2);
        assert_eq!(pool.queries[1].docs.len(), 1);
    }

    #[test]
    fn parse_reports_bad_label_with_line_number() {
        let err = parse_letor(Cursor::new("x qid:7 1:0.5")).unwrap_err();
        match err {
            DataError::Malformed { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let text = "# header\n\n1 qid:1 1:1.0 # trailing note\n";
        let pool = parse_letor(Cursor::new(text)).unwrap();
        assert_eq!(pool.num_queries(), 1);
    }

    #[test]
    fn letor_round_trip_is_identity() {
        let cfg = SyntheticConfig {
            num_queries: 5,
            candidates_per_query: 4,
            feature_dim: 3,
            hidden_dim: 0,
            relevance_noise: 0.2,
            seed: 9,
        };
        let pool = generate_synthetic(&cfg).unwrap();
        let mut buf = Vec::new();
        serialize_letor(&pool, &mut buf).unwrap();
        let parsed = parse_letor(Cursor::new(buf)).unwrap();
        assert_eq!(parsed, pool);
    }

    #[test]
    fn binarize_thresholds_at_three() {
        let pool = parse_letor(Cursor::new(
            "0 qid:1 1:0\n1 qid:1 1:0\n2 qid:1 1:0\n3 qid:1 1:0\n4 qid:1 1:0\n",
        ))
        .unwrap();
        let bin = binarize_labels(&pool, 3);
        let labels: Vec<i32> = bin.queries[0].docs.iter().map(|d| d.label).collect();
        assert_eq!(labels, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn binarize_zero_labels_stay_zero() {
        let pool = parse_letor(Cursor::new("0 qid:1 1:0\n0 qid:1 2:1\n")).unwrap();
        let bin = binarize_labels(&pool, 3);
        assert!(bin.queries[0].docs.iter().all(|d| d.label == 0));
    }

    #[test]
    fn binarize_threshold_one_is_boundary() {
        let pool = parse_letor(Cursor::new("0 qid:1 1:0\n1 qid:1 1:1\n")).unwrap();
        let bin = binarize_labels(&pool, 1);
        let labels: Vec<i32> = bin.queries[0].docs.iter().map(|d| d.label).collect();
        assert_eq!(labels, vec![0, 1]);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let cfg = SyntheticConfig {
            num_queries: 8,
            candidates_per_query: 6,
            feature_dim: 4,
            hidden_dim: 2,
            relevance_noise: 0.3,
            seed: 1,
        };
        assert_eq!(
            generate_synthetic(&cfg).unwrap(),
            generate_synthetic(&cfg).unwrap()
        );
    }

    #[test]
    fn synthetic_noise_free_grades_follow_utility() {
        let cfg = SyntheticConfig {
            num_queries: 10,
            candidates_per_query: 12,
            feature_dim: 5,
            hidden_dim: 0,
            relevance_noise: 0.0,
            seed: 3,
        };
        let (pool, utilities) = generate_synthetic_with_utilities(&cfg).unwrap();
        for (query, utils) in pool.queries.iter().zip(&utilities) {
            let mut order: Vec<usize> = (0..utils.len()).collect();
            order.sort_by(|&a, &b| utils[b].total_cmp(&utils[a]));
            let grades: Vec<i32> = order.iter().map(|&i| query.docs[i].label).collect();
            assert!(
                grades.windows(2).all(|w| w[0] >= w[1]),
                "grades not monotone in utility: {grades:?}"
            );
        }
    }

    #[test]
    fn synthetic_hidden_features_are_not_exported() {
        let cfg = SyntheticConfig {
            num_queries: 2,
            candidates_per_query: 3,
            feature_dim: 4,
            hidden_dim: 5,
            relevance_noise: 0.0,
            seed: 3,
        };
        let pool = generate_synthetic(&cfg).unwrap();
        assert_eq!(pool.feature_dim, 4);
        assert!(pool
            .queries
            .iter()
            .flat_map(|q| &q.docs)
            .all(|d| d.features.dim() == 4));
    }

    #[test]
    fn split_counts_follow_fractions() {
        let cfg = SyntheticConfig {
            num_queries: 10,
            candidates_per_query: 3,
            feature_dim: 2,
            hidden_dim: 0,
            relevance_noise: 0.0,
            seed: 5,
        };
        let pool = generate_synthetic(&cfg).unwrap();
        let spec = SplitSpec {
            train: 0.5,
            validate: 0.2,
            test: 0.3,
            seed: 11,
        };
        let (train, val, test) = split_pool(&pool, &spec).unwrap();
        assert_eq!(train.num_queries(), 5);
        assert_eq!(val.num_queries(), 2);
        assert_eq!(test.num_queries(), 3);
    }

    #[test]
    fn split_is_deterministic() {
        let cfg = SyntheticConfig {
            num_queries: 12,
            candidates_per_query: 3,
            feature_dim: 2,
            hidden_dim: 0,
            relevance_noise: 0.0,
            seed: 5,
        };
        let pool = generate_synthetic(&cfg).unwrap();
        let spec = SplitSpec {
            train: 0.5,
            validate: 0.25,
            test: 0.25,
            seed: 11,
        };
        assert_eq!(split_pool(&pool, &spec).unwrap(), split_pool(&pool, &spec).unwrap());
    }

    #[test]
    fn split_rejects_too_few_queries() {
        let cfg = SyntheticConfig {
            num_queries: 2,
            candidates_per_query: 3,
            feature_dim: 2,
            hidden_dim: 0,
            relevance_noise: 0.0,
            seed: 5,
        };
        let pool = generate_synthetic(&cfg).unwrap();
        let spec = SplitSpec {
            train: 0.4,
            validate: 0.3,
            test: 0.3,
            seed: 11,
        };
        assert_eq!(split_pool(&pool, &spec), Err(DataError::TooFewQueries(2)));
    }

    fn two_query_pool(rel_counts: &[usize]) -> LabeledPool {
        let queries = rel_counts
            .iter()
            .enumerate()
            .map(|(qi, &rel)| PoolQuery {
                id: QueryId::new(format!("{}", qi + 1)),
                docs: (0..4)
                    .map(|di| PoolDoc {
                        id: DocId(di as u32),
                        features: FeatureVector(vec![0.0]),
                        label: i32::from(di < rel),
                    })
                    .collect(),
            })
            .collect();
        LabeledPool {
            queries,
            feature_dim: 1,
        }
    }

    #[test]
    fn observation_sampling_is_proportional() {
        // Weights 1 and 3 give sampling probabilities 0.25 / 0.75.
        let pool = two_query_pool(&[1, 3]);
        let sample = build_observation_queries(&pool, 50_000, 7).unwrap();
        assert_eq!(sample.len(), 50_000);
        let mut counts: HashMap<&QueryId, usize> = HashMap::new();
        for q in &sample {
            *counts.entry(q).or_default() += 1;
        }
        let f1 = *counts.get(&QueryId::from("1")).unwrap() as f64 / 50_000.0;
        let f2 = *counts.get(&QueryId::from("2")).unwrap() as f64 / 50_000.0;
        assert!((f1 - 0.25).abs() < 0.01, "got {f1}");
        assert!((f2 - 0.75).abs() < 0.01, "got {f2}");
    }

    #[test]
    fn observation_sampling_single_eligible_query() {
        let pool = two_query_pool(&[0, 2]);
        let sample = build_observation_queries(&pool, 100, 7).unwrap();
        assert!(sample.iter().all(|q| q == &QueryId::from("2")));
        assert_eq!(sample.len(), 100);
    }

    #[test]
    fn observation_sampling_is_deterministic() {
        let pool = two_query_pool(&[1, 3]);
        assert_eq!(
            build_observation_queries(&pool, 500, 42).unwrap(),
            build_observation_queries(&pool, 500, 42).unwrap()
        );
    }

    #[test]
    fn observation_sampling_rejects_all_irrelevant() {
        let pool = two_query_pool(&[0, 0]);
        assert_eq!(
            build_observation_queries(&pool, 10, 7),
            Err(DataError::NoRelevantDocs)
        );
    }

    proptest! {
        #[test]
        fn split_partitions_queries(n in 4usize..40, seed in 0u64..1000) {
            let cfg = SyntheticConfig {
                num_queries: n,
                candidates_per_query: 2,
                feature_dim: 2,
                hidden_dim: 0,
                relevance_noise: 0.0,
                seed,
            };
            let pool = generate_synthetic(&cfg).unwrap();
            let spec = SplitSpec { train: 0.5, validate: 0.25, test: 0.25, seed };
            if let Ok((train, val, test)) = split_pool(&pool, &spec) {
                let mut ids: Vec<&QueryId> = train
                    .queries
                    .iter()
                    .chain(&val.queries)
                    .chain(&test.queries)
                    .map(|q| &q.id)
                    .collect();
                let total = ids.len();
                prop_assert_eq!(total, n);
                ids.sort();
                ids.dedup();
                prop_assert_eq!(ids.len(), n, "splits overlap");
            }
        }
    }
}
