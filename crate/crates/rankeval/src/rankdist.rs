//! Smooth (document, rank) propensities from imitation-ranker scores.
//!
//! Scores are treated as Gaussian with a shared standard deviation σ. The
//! probability that document d outranks document z is then
//! `Φ((s_d - s_z) / (σ·√2))`. σ itself is inferred by maximizing the
//! log-likelihood of the logged orderings. For one impression's K scores,
//! a per-document recursion turns the pairwise contest probabilities into a
//! K×K matrix of rank-occupancy masses, which Sinkhorn iteration then makes
//! doubly stochastic: rows are distributions over ranks, columns over
//! documents. The (document, rank) entries of that matrix are the
//! propensities used by the item+position IPW estimator.
//!
//! Everything here is pure; per-impression computations are independent and
//! may run in parallel. σ inference is a single deterministic fit per logged
//! dataset.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{DocId, Impression, LoggedDataset, QueryId};

/// Search bounds for `ln σ` in [`infer_sigma`].
pub const SIGMA_LOG_BOUNDS: (f64, f64) = (-10.0, 3.0);
/// Points in the coarse grid scanned before the golden-section refinement.
const SIGMA_GRID_POINTS: usize = 27;
/// Golden-section tolerance on `ln σ`.
const SIGMA_TOL: f64 = 1e-6;
/// Floor applied to matrix entries before Sinkhorn normalization so that
/// near-permutation matrices cannot stall on zero rows or columns.
pub const ENTRY_FLOOR: f64 = 1e-12;
/// Default Sinkhorn convergence tolerance on row/column sums.
pub const SINKHORN_TOL: f64 = 1e-8;
/// Default Sinkhorn iteration cap.
pub const SINKHORN_MAX_ITER: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum RankDistError {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("scores must be finite")]
    NonFiniteScore,

    #[error("no ranked pairs to fit sigma on")]
    NoPairs,

    #[error("missing imitation score for ({query}, {doc})")]
    MissingScore { query: String, doc: u32 },

    #[error("rank {rank} out of range for K={k}")]
    RankOutOfRange { rank: usize, k: usize },

    #[error("empty score sequence")]
    EmptyScores,

    #[error("Sinkhorn did not converge in {iterations} iterations (residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("matrix has a non-positive row or column sum")]
    DegenerateMatrix,
}

/// Standard normal CDF.
fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Probability that a document with mean score `s_d` beats one with mean
/// score `s_z` when both scores carry Gaussian uncertainty σ:
/// `Φ((s_d - s_z) / (σ·√2))`.
pub fn contest_probability(s_d: f64, s_z: f64, sigma: f64) -> Result<f64, RankDistError> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(RankDistError::NonPositiveSigma(sigma));
    }
    if !s_d.is_finite() || !s_z.is_finite() {
        return Err(RankDistError::NonFiniteScore);
    }
    Ok(normal_cdf((s_d - s_z) / (sigma * std::f64::consts::SQRT_2)))
}

/// Pairwise contest matrix over one impression's scores: `W[d][z]` is the
/// probability that document d outranks document z; the diagonal is 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct ContestMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl ContestMatrix {
    pub fn from_scores(scores: &[f64], sigma: f64) -> Result<ContestMatrix, RankDistError> {
        let k = scores.len();
        if k == 0 {
            return Err(RankDistError::EmptyScores);
        }
        let mut entries = vec![0.5; k * k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    entries[i * k + j] = contest_probability(scores[i], scores[j], sigma)?;
                }
            }
        }
        Ok(ContestMatrix { k, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, d: usize, z: usize) -> f64 {
        self.entries[d * self.k + z]
    }
}

/// Result of the σ maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    pub log_likelihood: f64,
    /// Search bounds on `ln σ`.
    pub search_bounds: (f64, f64),
}

/// Log-likelihood of the logged pairwise orderings at a given σ:
/// the sum over impressions and ordered pairs of `ln Φ(Δ / (σ·√2))`.
fn sigma_log_likelihood(diffs: &[f64], sigma: f64) -> f64 {
    let scale = sigma * std::f64::consts::SQRT_2;
    diffs.iter().map(|d| normal_cdf(d / scale).ln()).sum()
}

/// Infers the score uncertainty σ by maximizing the likelihood of the logged
/// orderings under the given score function, searching `ln σ` over
/// [`SIGMA_LOG_BOUNDS`]. A 27-point grid brackets the optimum,
/// golden-section search refines it, and the bounds are kept as candidates
/// so monotone likelihoods resolve exactly to a bound.
pub fn infer_sigma<F>(ds: &LoggedDataset, score: F) -> Result<SigmaEstimate, RankDistError>
where
    F: Fn(&QueryId, DocId) -> Option<f64>,
{
    infer_sigma_with_bounds(ds, score, SIGMA_LOG_BOUNDS.0, SIGMA_LOG_BOUNDS.1)
}

/// [`infer_sigma`] with explicit `ln σ` search bounds.
pub fn infer_sigma_with_bounds<F>(
    ds: &LoggedDataset,
    score: F,
    log_lo: f64,
    log_hi: f64,
) -> Result<SigmaEstimate, RankDistError>
where
    F: Fn(&QueryId, DocId) -> Option<f64>,
{
    let mut diffs = Vec::new();
    let mut scores = Vec::new();
    for rec in &ds.records {
        scores.clear();
        for doc in &rec.impression.docs {
            let s = score(&rec.query, *doc).ok_or_else(|| RankDistError::MissingScore {
                query: rec.query.to_string(),
                doc: doc.0,
            })?;
            if !s.is_finite() {
                return Err(RankDistError::NonFiniteScore);
            }
            scores.push(s);
        }
        for i in 0..scores.len() {
            for j in (i + 1)..scores.len() {
                diffs.push(scores[i] - scores[j]);
            }
        }
    }
    if diffs.is_empty() {
        return Err(RankDistError::NoPairs);
    }

    let (lo, hi) = (log_lo, log_hi);
    let objective = |log_sigma: f64| sigma_log_likelihood(&diffs, log_sigma.exp());

    // Coarse grid scan.
    let step = (hi - lo) / (SIGMA_GRID_POINTS - 1) as f64;
    let mut best_idx = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut grid_vals = [0.0f64; SIGMA_GRID_POINTS];
    for (i, v) in grid_vals.iter_mut().enumerate() {
        *v = objective(lo + step * i as f64);
        if *v > best_val {
            best_val = *v;
            best_idx = i;
        }
    }

    // Golden-section refinement inside the bracketing grid cells.
    let mut a = lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = lo + step * (best_idx + 1).min(SIGMA_GRID_POINTS - 1) as f64;
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    while b - a > SIGMA_TOL {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
    }
    let mid = 0.5 * (a + b);

    // Keep the global bounds as candidates: a monotone likelihood must
    // return the bound itself, not a point one golden step inside it. Ties
    // resolve to the bound (the likelihood saturates flat near a bound when
    // every contest probability has hit 0.5 or 1).
    let mut best_log = mid;
    let mut best_ll = objective(mid);
    for cand in [lo, hi] {
        let ll = objective(cand);
        if ll >= best_ll {
            best_ll = ll;
            best_log = cand;
        }
    }

    Ok(SigmaEstimate {
        sigma: best_log.exp(),
        log_likelihood: best_ll,
        search_bounds: (lo, hi),
    })
}

/// A normalized K×K rank distribution: rows follow the input score order
/// (one per document), columns are ranks 1..K.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution {
    k: usize,
    entries: Vec<f64>,
}

impl RankDistribution {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Entry for the document at row `doc` (0-based input order) occupying
    /// 1-based rank `k`.
    pub fn entry(&self, doc: usize, rank: usize) -> Option<f64> {
        if doc >= self.k || rank == 0 || rank > self.k {
            return None;
        }
        Some(self.entries[doc * self.k + rank - 1])
    }

    pub fn row(&self, doc: usize) -> &[f64] {
        &self.entries[doc * self.k..(doc + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

/// The pre-normalization recursion: for each anchor document, start with all
/// mass at rank 1 and fold in every competitor in impression order; the
/// anchor keeps its rank with the probability it beats the competitor and
/// drops one rank otherwise. Rows each sum to 1. Row-major K×K output.
pub fn rank_distribution_unnormalized(
    scores: &[f64],
    sigma: f64,
) -> Result<Vec<f64>, RankDistError> {
    let k = scores.len();
    if k == 0 {
        return Err(RankDistError::EmptyScores);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(RankDistError::NonFiniteScore);
    }
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(RankDistError::NonPositiveSigma(sigma));
    }

    let mut out = vec![0.0; k * k];
    for anchor in 0..k {
        let row = &mut out[anchor * k..(anchor + 1) * k];
        row[0] = 1.0;
        for competitor in 0..k {
            if competitor == anchor {
                continue;
            }
            let p_beat = contest_probability(scores[anchor], scores[competitor], sigma)?;
            // In-place update from the bottom: mass[r] <- (1-p)*mass[r-1] + p*mass[r].
            for r in (0..k).rev() {
                let from_above = if r > 0 { row[r - 1] } else { 0.0 };
                row[r] = (1.0 - p_beat) * from_above + p_beat * row[r];
            }
        }
    }
    Ok(out)
}

/// Full rank distribution for one impression's scores: the recursion output,
/// floored at [`ENTRY_FLOOR`], then Sinkhorn-normalized to doubly stochastic.
pub fn rank_distribution(scores: &[f64], sigma: f64) -> Result<RankDistribution, RankDistError> {
    let k = scores.len();
    let mut matrix = rank_distribution_unnormalized(scores, sigma)?;
    for v in &mut matrix {
        if *v < ENTRY_FLOOR {
            *v = ENTRY_FLOOR;
        }
    }
    sinkhorn_normalize(&mut matrix, k, SINKHORN_TOL, SINKHORN_MAX_ITER)?;
    Ok(RankDistribution { k, entries: matrix })
}

/// Makes a nonnegative K×K matrix doubly stochastic by diagonal row/column
/// scaling: plain alternate rescaling of rows then columns, escalating to a
/// Newton step on the log scaling vectors when the alternation's residual
/// stalls (matrices whose scaling limit sits near the boundary make plain
/// alternation tail off sublinearly). The output is always an exact
/// `diag(u) * input * diag(v)`. Returns the number of iterations used,
/// counting each Newton step as one iteration.
pub fn sinkhorn_normalize(
    matrix: &mut [f64],
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<usize, RankDistError> {
    assert_eq!(matrix.len(), k * k, "matrix must be K*K");
    if matrix.iter().any(|v| *v < 0.0) {
        return Err(RankDistError::DegenerateMatrix);
    }

    let residual_of = |m: &[f64]| -> f64 {
        let mut res = 0.0f64;
        for r in 0..k {
            let sum: f64 = m[r * k..(r + 1) * k].iter().sum();
            res = res.max((sum - 1.0).abs());
        }
        for c in 0..k {
            let sum: f64 = (0..k).map(|r| m[r * k + c]).sum();
            res = res.max((sum - 1.0).abs());
        }
        res
    };

    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;

    // Phase 1: alternate row/column rescaling while it makes progress.
    let mut stalled = 0usize;
    while iterations < max_iter {
        iterations += 1;
        for r in 0..k {
            let row = &mut matrix[r * k..(r + 1) * k];
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(RankDistError::DegenerateMatrix);
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        for c in 0..k {
            let sum: f64 = (0..k).map(|r| matrix[r * k + c]).sum();
            if sum <= 0.0 {
                return Err(RankDistError::DegenerateMatrix);
            }
            for r in 0..k {
                matrix[r * k + c] /= sum;
            }
        }
        let next = residual_of(matrix);
        if next < tol {
            return Ok(iterations);
        }
        stalled = if next > 0.5 * residual { stalled + 1 } else { 0 };
        residual = next;
        if stalled >= 5 {
            break;
        }
    }

    // Phase 2: Newton steps on (log u, log v) with the gauge fixed by
    // pinning the last column scale. Backtracking keeps the residual
    // non-increasing; a failed step falls back to one plain sweep.
    let n = 2 * k - 1;
    let mut jac = vec![0.0f64; n * n];
    let mut rhs = vec![0.0f64; n];
    while iterations < max_iter {
        iterations += 1;

        let row_sums: Vec<f64> = (0..k)
            .map(|r| matrix[r * k..(r + 1) * k].iter().sum())
            .collect();
        let col_sums: Vec<f64> = (0..k).map(|c| (0..k).map(|r| matrix[r * k + c]).sum()).collect();

        jac.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..k {
            jac[r * n + r] = row_sums[r];
            rhs[r] = 1.0 - row_sums[r];
            for c in 0..k - 1 {
                jac[r * n + (k + c)] = matrix[r * k + c];
            }
        }
        for c in 0..k - 1 {
            let i = k + c;
            jac[i * n + i] = col_sums[c];
            rhs[i] = 1.0 - col_sums[c];
            for r in 0..k {
                jac[i * n + r] = matrix[r * k + c];
            }
        }

        let Some(step) = solve_dense(&mut jac, &mut rhs, n) else {
            // Singular system: fall back to one plain sweep.
            plain_sweep(matrix, k)?;
            residual = residual_of(matrix);
            if residual < tol {
                return Ok(iterations);
            }
            continue;
        };

        let mut scale = 1.0f64;
        let mut accepted = false;
        for _ in 0..6 {
            let mut candidate = matrix.to_vec();
            for r in 0..k {
                let fu = (scale * step[r].clamp(-5.0, 5.0)).exp();
                for c in 0..k {
                    let fv = if c < k - 1 {
                        (scale * step[k + c].clamp(-5.0, 5.0)).exp()
                    } else {
                        1.0
                    };
                    candidate[r * k + c] *= fu * fv;
                }
            }
            let cand_res = residual_of(&candidate);
            if cand_res < residual {
                matrix.copy_from_slice(&candidate);
                residual = cand_res;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            plain_sweep(matrix, k)?;
            residual = residual_of(matrix);
        }
        if residual < tol {
            return Ok(iterations);
        }
    }

    Err(RankDistError::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

fn plain_sweep(matrix: &mut [f64], k: usize) -> Result<(), RankDistError> {
    for r in 0..k {
        let row = &mut matrix[r * k..(r + 1) * k];
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(RankDistError::DegenerateMatrix);
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    for c in 0..k {
        let sum: f64 = (0..k).map(|r| matrix[r * k + c]).sum();
        if sum <= 0.0 {
            return Err(RankDistError::DegenerateMatrix);
        }
        for r in 0..k {
            matrix[r * k + c] /= sum;
        }
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting on an n×n system; `a` and `b`
/// are clobbered. Returns None when the pivot underflows.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for r in (col + 1)..n {
            let factor = a[r * n + col] * inv;
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in (col + 1)..n {
            acc -= a[col * n + c] * x[c];
        }
        x[col] = acc / a[col * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Propensity of the document shown at 1-based rank `k` of the measurement
/// impression, from the normalized rank distribution computed over exactly
/// that impression's K documents.
pub fn propensity<F>(
    impression: &Impression,
    rank: usize,
    score: F,
    sigma: f64,
) -> Result<f64, RankDistError>
where
    F: Fn(&QueryId, DocId) -> Option<f64>,
{
    let k = impression.len();
    if rank == 0 || rank > k {
        return Err(RankDistError::RankOutOfRange { rank, k });
    }
    let scores = impression_scores(impression, &score)?;
    let dist = rank_distribution(&scores, sigma)?;
    // Row index equals rank-1 because rows follow the impression order.
    Ok(dist.entry(rank - 1, rank).expect("checked range"))
}

fn impression_scores<F>(impression: &Impression, score: &F) -> Result<Vec<f64>, RankDistError>
where
    F: Fn(&QueryId, DocId) -> Option<f64>,
{
    impression
        .docs
        .iter()
        .map(|doc| {
            score(&impression.query, *doc).ok_or_else(|| RankDistError::MissingScore {
                query: impression.query.to_string(),
                doc: doc.0,
            })
        })
        .collect()
}

/// Precomputed parametric propensities for a set of measurement impressions:
/// for each query, the diagonal of the normalized rank distribution over its
/// impression (the propensity of the shown document at each rank).
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricPropensities {
    per_query: HashMap<QueryId, Vec<f64>>,
}

impl ParametricPropensities {
    /// Computes the per-rank propensities for every impression. One rank
    /// distribution per impression; later duplicates of the same query are
    /// ignored (the measurement ranker is deterministic).
    pub fn compute<F>(
        impressions: &[Impression],
        score: F,
        sigma: f64,
    ) -> Result<ParametricPropensities, RankDistError>
    where
        F: Fn(&QueryId, DocId) -> Option<f64>,
    {
        let mut per_query = HashMap::new();
        for imp in impressions {
            if per_query.contains_key(&imp.query) {
                continue;
            }
            let scores = impression_scores(imp, &score)?;
            let dist = rank_distribution(&scores, sigma)?;
            let diag: Vec<f64> = (1..=imp.len())
                .map(|rank| dist.entry(rank - 1, rank).expect("diagonal in range"))
                .collect();
            per_query.insert(imp.query.clone(), diag);
        }
        Ok(ParametricPropensities { per_query })
    }

    /// Propensity of the measurement document at 1-based rank `k` for this
    /// query, if the query was covered.
    pub fn get(&self, query: &QueryId, rank: usize) -> Option<f64> {
        self.per_query
            .get(query)
            .and_then(|diag| diag.get(rank.checked_sub(1)?))
            .copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClickVector, FeatureStore, LoggedRecord};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logged_dataset_from_orders(orders: &[Vec<u32>]) -> LoggedDataset {
        let query = QueryId::from("q");
        let k = orders[0].len();
        let records = orders
            .iter()
            .map(|docs| LoggedRecord {
                query: query.clone(),
                impression: Impression::new(query.clone(), docs.iter().map(|&d| DocId(d)).collect()),
                clicks: ClickVector(vec![0; k]),
            })
            .collect();
        LoggedDataset::new(records, FeatureStore::new(1), k)
    }

    #[test]
    fn contest_probability_of_equal_scores_is_half() {
        for sigma in [1e-6, 0.3, 5.0] {
            assert_eq!(contest_probability(1.2, 1.2, sigma).unwrap(), 0.5);
        }
    }

    #[test]
    fn contest_probability_matches_worked_example() {
        // s_d = 0.76, s_z = 0.73, sigma = e^-2.5 gives 0.602.
        let p = contest_probability(0.76, 0.73, (-2.5f64).exp()).unwrap();
        assert!((p - 0.602).abs() < 1e-3, "got {p}");
    }

    #[test]
    fn contest_probability_saturates_for_tiny_sigma() {
        let p = contest_probability(1.0, 0.0, 1e-12).unwrap();
        assert!(p > 1.0 - 1e-12);
    }

    #[test]
    fn contest_probability_rejects_bad_sigma() {
        assert_eq!(
            contest_probability(0.0, 0.0, 0.0),
            Err(RankDistError::NonPositiveSigma(0.0))
        );
        assert_eq!(
            contest_probability(0.0, 0.0, -1.0),
            Err(RankDistError::NonPositiveSigma(-1.0))
        );
    }

    #[test]
    fn contest_matrix_has_half_diagonal_and_complementary_pairs() {
        let m = ContestMatrix::from_scores(&[0.3, -0.1, 0.9], 0.5).unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.5);
            for j in 0..3 {
                let sum = m.get(i, j) + m.get(j, i);
                assert!((sum - 1.0).abs() < 1e-15, "sum {sum}");
            }
        }
    }

    #[test]
    fn sigma_fit_hits_lower_bound_when_scores_agree() {
        // Logged order [0,1,2] with strictly descending scores: likelihood
        // increases monotonically as sigma shrinks.
        let ds = logged_dataset_from_orders(&[vec![0, 1, 2], vec![0, 1, 2]]);
        let scores = [3.0, 2.0, 1.0];
        let est = infer_sigma(&ds, |_, d| Some(scores[d.0 as usize])).unwrap();
        assert!(
            (est.sigma.ln() - SIGMA_LOG_BOUNDS.0).abs() < 1e-9,
            "ln sigma {}",
            est.sigma.ln()
        );
    }

    #[test]
    fn sigma_fit_hits_upper_bound_for_contradictory_orders() {
        // Both orderings logged equally often: the optimum pushes every
        // contest toward 0.5, attained as sigma grows without bound.
        let ds = logged_dataset_from_orders(&[vec![0, 1], vec![1, 0]]);
        let scores = [1.0, 0.0];
        let est = infer_sigma(&ds, |_, d| Some(scores[d.0 as usize])).unwrap();
        assert!(
            (est.sigma.ln() - SIGMA_LOG_BOUNDS.1).abs() < 1e-9,
            "ln sigma {}",
            est.sigma.ln()
        );
    }

    #[test]
    fn sigma_fit_is_shift_invariant() {
        let ds = logged_dataset_from_orders(&[
            vec![0, 1, 2],
            vec![1, 0, 2],
            vec![0, 2, 1],
        ]);
        let scores = [0.9, 0.5, 0.1];
        let est = infer_sigma(&ds, |_, d| Some(scores[d.0 as usize])).unwrap();
        let shifted = infer_sigma(&ds, |_, d| Some(scores[d.0 as usize] + 123.0)).unwrap();
        assert!((est.sigma - shifted.sigma).abs() < 1e-12);
    }

    #[test]
    fn sigma_fit_finds_interior_optimum() {
        // Mix of agreeing and contradicting pairs lands strictly inside the
        // bounds.
        let ds = logged_dataset_from_orders(&[
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![1, 0, 2],
        ]);
        let scores = [1.0, 0.5, -0.5];
        let est = infer_sigma(&ds, |_, d| Some(scores[d.0 as usize])).unwrap();
        let ln = est.sigma.ln();
        assert!(ln > SIGMA_LOG_BOUNDS.0 + 0.1 && ln < SIGMA_LOG_BOUNDS.1 - 0.1, "ln sigma {ln}");
    }

    #[test]
    fn sigma_fit_requires_pairs() {
        let ds = logged_dataset_from_orders(&[vec![0]]);
        assert_eq!(
            infer_sigma(&ds, |_, _| Some(0.0)),
            Err(RankDistError::NoPairs)
        );
    }

    #[test]
    fn recursion_reproduces_worked_example_row() {
        // Scores (B, A, C) = (0.76, 0.73, 0.45) with sigma^2 = e^-5: the row
        // for B is approximately [0.602, 0.398, 0.000] before normalization.
        let sigma = (-2.5f64).exp();
        let raw = rank_distribution_unnormalized(&[0.76, 0.73, 0.45], sigma).unwrap();
        let row_b = &raw[0..3];
        assert!((row_b[0] - 0.602).abs() < 5e-3, "row {row_b:?}");
        assert!((row_b[1] - 0.398).abs() < 5e-3, "row {row_b:?}");
        assert!(row_b[2] < 5e-3, "row {row_b:?}");
    }

    #[test]
    fn recursion_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let k = rng.gen_range(1..=10);
            let scores: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sigma = rng.gen_range(0.001..1.0);
            let raw = rank_distribution_unnormalized(&scores, sigma).unwrap();
            for r in 0..k {
                let sum: f64 = raw[r * k..(r + 1) * k].iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "row sum {sum}");
            }
        }
    }

    #[test]
    fn tiny_sigma_gives_permutation_matrix() {
        let scores = [0.3, 0.9, -0.4, 0.1];
        let min_gap = 0.2; // smallest score gap
        let dist = rank_distribution(&scores, 1e-9 * min_gap).unwrap();
        // Descending score order: doc 1, doc 0, doc 3, doc 2.
        let expected_rank = [2, 1, 4, 3];
        for (doc, &rank) in expected_rank.iter().enumerate() {
            for r in 1..=4 {
                let want = if r == rank { 1.0 } else { 0.0 };
                let got = dist.entry(doc, r).unwrap();
                assert!((got - want).abs() < 1e-9, "doc {doc} rank {r}: {got}");
            }
        }
    }

    #[test]
    fn single_doc_distribution_is_one() {
        let dist = rank_distribution(&[0.42], 0.3).unwrap();
        assert_eq!(dist.entry(0, 1), Some(1.0));
    }

    #[test]
    fn sinkhorn_keeps_permutation_fixed() {
        let mut m = vec![
            ENTRY_FLOOR, 1.0, ENTRY_FLOOR,
            1.0, ENTRY_FLOOR, ENTRY_FLOOR,
            ENTRY_FLOOR, ENTRY_FLOOR, 1.0,
        ];
        sinkhorn_normalize(&mut m, 3, 1e-10, 1000).unwrap();
        assert!((m[1] - 1.0).abs() < 1e-6);
        assert!((m[3] - 1.0).abs() < 1e-6);
        assert!((m[8] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sinkhorn_rescales_diagonal() {
        let mut m = vec![2.0, ENTRY_FLOOR, ENTRY_FLOOR, 2.0];
        sinkhorn_normalize(&mut m, 2, 1e-10, 1000).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-6);
        assert!((m[3] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sinkhorn_uniformizes_all_ones() {
        let mut m = vec![1.0; 16];
        let iters = sinkhorn_normalize(&mut m, 4, 1e-10, 1000).unwrap();
        assert!(m.iter().all(|v| (v - 0.25).abs() < 1e-12));
        assert_eq!(iters, 1);
    }

    #[test]
    fn sinkhorn_rejects_zero_row() {
        let mut m = vec![0.0, 0.0, 1.0, 1.0];
        assert_eq!(
            sinkhorn_normalize(&mut m, 2, 1e-8, 100),
            Err(RankDistError::DegenerateMatrix)
        );
    }

    #[test]
    fn propensity_is_diagonal_of_distribution() {
        let imp = Impression::new(QueryId::from("q"), vec![DocId(0), DocId(1), DocId(2)]);
        let scores = [0.76, 0.73, 0.45];
        let lookup = |_: &QueryId, d: DocId| Some(scores[d.0 as usize]);
        let sigma = (-2.5f64).exp();
        let p = propensity(&imp, 1, lookup, sigma).unwrap();
        // Matches the worked example after normalization: close to 0.6.
        assert!((p - 0.6).abs() < 0.05, "got {p}");
        let dist = rank_distribution(&scores, sigma).unwrap();
        assert_eq!(p, dist.entry(0, 1).unwrap());
    }

    #[test]
    fn propensity_under_tiny_sigma_is_one_for_sorted_impression() {
        let imp = Impression::new(QueryId::from("q"), vec![DocId(0), DocId(1), DocId(2)]);
        let scores = [3.0, 2.0, 1.0];
        for rank in 1..=3 {
            let p = propensity(&imp, rank, |_, d| Some(scores[d.0 as usize]), 1e-9).unwrap();
            assert!((p - 1.0).abs() < 1e-6, "rank {rank}: {p}");
        }
    }

    #[test]
    fn propensity_of_equal_scores_is_half_for_two_docs() {
        let imp = Impression::new(QueryId::from("q"), vec![DocId(0), DocId(1)]);
        for rank in 1..=2 {
            let p = propensity(&imp, rank, |_, _| Some(1.0), 0.7).unwrap();
            assert!((p - 0.5).abs() < 1e-9, "rank {rank}: {p}");
        }
    }

    #[test]
    fn propensity_errors_on_missing_score() {
        let imp = Impression::new(QueryId::from("q"), vec![DocId(0), DocId(1)]);
        let err = propensity(&imp, 1, |_, d| (d.0 == 0).then_some(1.0), 0.5).unwrap_err();
        assert!(matches!(err, RankDistError::MissingScore { .. }));
    }

    #[test]
    fn parametric_propensities_match_single_calls() {
        let imp = Impression::new(QueryId::from("q"), vec![DocId(0), DocId(1), DocId(2)]);
        let scores = [0.2, 0.8, 0.5];
        let lookup = |_: &QueryId, d: DocId| Some(scores[d.0 as usize]);
        let table = ParametricPropensities::compute(std::slice::from_ref(&imp), lookup, 0.4).unwrap();
        for rank in 1..=3 {
            let single = propensity(&imp, rank, lookup, 0.4).unwrap();
            assert_eq!(table.get(&imp.query, rank), Some(single));
        }
        assert_eq!(table.get(&QueryId::from("other"), 1), None);
    }

    #[test]
    fn raising_a_score_never_lowers_its_top_rank_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let k = rng.gen_range(2..=8);
            let mut scores: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sigma = rng.gen_range(0.05..1.0);
            let target = rng.gen_range(0..k);
            let before = rank_distribution_unnormalized(&scores, sigma).unwrap();
            scores[target] += 0.5;
            let after = rank_distribution_unnormalized(&scores, sigma).unwrap();
            assert!(
                after[target * k] >= before[target * k] - 1e-12,
                "rank-1 mass decreased"
            );
        }
    }

    proptest! {
        #[test]
        fn contest_symmetry_sums_to_one(
            a in -50.0f64..50.0,
            b in -50.0f64..50.0,
            ln_sigma in -6.0f64..2.0,
        ) {
            let sigma = ln_sigma.exp();
            let p_ab = contest_probability(a, b, sigma).unwrap();
            let p_ba = contest_probability(b, a, sigma).unwrap();
            prop_assert!((p_ab + p_ba - 1.0).abs() < 1e-15);
        }

        #[test]
        fn normalized_distribution_is_doubly_stochastic(
            scores in proptest::collection::vec(-3.0f64..3.0, 2..10),
            ln_sigma in -6.0f64..0.0,
        ) {
            let k = scores.len();
            let dist = rank_distribution(&scores, ln_sigma.exp()).unwrap();
            for r in 0..k {
                let sum: f64 = dist.row(r).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-6);
            }
            for c in 1..=k {
                let sum: f64 = (0..k).map(|r| dist.entry(r, c).unwrap()).sum();
                prop_assert!((sum - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn recursion_is_permutation_equivariant(
            scores in proptest::collection::vec(-2.0f64..2.0, 2..7),
            rotation in 1usize..6,
        ) {
            let k = scores.len();
            let rot = rotation % k;
            let mut permuted = scores.clone();
            permuted.rotate_left(rot);
            let base = rank_distribution_unnormalized(&scores, 0.3).unwrap();
            let perm = rank_distribution_unnormalized(&permuted, 0.3).unwrap();
            // Row for document i in the original appears at its new index.
            for i in 0..k {
                let j = (i + k - rot) % k;
                let row_a = &base[i * k..(i + 1) * k];
                let row_b = &perm[j * k..(j + 1) * k];
                for (x, y) in row_a.iter().zip(row_b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}
