//! Reproducibility metrics: set overlap, rank correlation, top-weighted
//! list similarity, exact-match accounting, score stability, and
//! embedding-level drift.
//!
//! All functions are pure and safe to call concurrently. Distributions use
//! population (not sample) standard deviation throughout: the runs being
//! compared are the entire population of interest.

use crate::core::{DocId, EmbeddingMatrix, QueryId, ResultList, RunRecord};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Agreement between two ranked lists for one query.
///
/// `kendall_tau` and `tau_p_value` are `None` when fewer than two documents
/// are common to both lists; such queries are excluded from distributions
/// (and counted) rather than scored as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementScores {
    pub overlap_count: usize,
    pub overlap_coefficient: f64,
    pub jaccard: f64,
    pub rbo: f64,
    pub kendall_tau: Option<f64>,
    pub tau_p_value: Option<f64>,
}

/// Summary of per-query metric values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDistribution {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub n_queries: usize,
}

/// Jaccard similarity of two id sets: |A ∩ B| / |A ∪ B|. Two empty sets
/// are defined to agree perfectly (1.0).
pub fn jaccard(a: &HashSet<DocId>, b: &HashSet<DocId>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Jaccard over the ids of two result lists.
pub fn jaccard_lists(a: &ResultList, b: &ResultList) -> f64 {
    let sa: HashSet<DocId> = a.ids().cloned().collect();
    let sb: HashSet<DocId> = b.ids().cloned().collect();
    jaccard(&sa, &sb)
}

/// Overlap count and coefficient: how much of the `v1` ("before") list is
/// still present in `v2`. Asymmetric — normalized by |v1|.
pub fn overlap_coefficient(v1: &ResultList, v2: &ResultList) -> Result<(usize, f64)> {
    if v1.is_empty() {
        return Err(Error::EmptyInput("overlap_coefficient v1 list".into()));
    }
    let sb: HashSet<&DocId> = v2.ids().collect();
    let count = v1.ids().filter(|id| sb.contains(id)).count();
    Ok((count, count as f64 / v1.len() as f64))
}

/// Kendall rank correlation on the common-id subset of two lists, plus a
/// two-sided p-value under the null of random ranking.
///
/// Both lists are restricted to the documents they share, preserving each
/// list's order; tau is (C - D) / (n(n-1)/2) over all pairs of common
/// documents. Fewer than two common documents leaves both values undefined.
///
/// The p-value is exact (full enumeration of the null distribution of the
/// concordance statistic) for n <= 10 and uses the normal approximation
/// z = 3·tau·sqrt(n(n-1)) / sqrt(2(2n+5)) above that.
pub fn kendall_tau(a: &ResultList, b: &ResultList) -> (Option<f64>, Option<f64>) {
    let in_b: HashSet<&DocId> = b.ids().collect();
    let common_a: Vec<&DocId> = a.ids().filter(|id| in_b.contains(*id)).collect();
    let n = common_a.len();
    if n < 2 {
        return (None, None);
    }
    let in_common: HashSet<&DocId> = common_a.iter().copied().collect();
    let rank_in_b: std::collections::HashMap<&DocId, usize> = b
        .ids()
        .filter(|id| in_common.contains(*id))
        .enumerate()
        .map(|(pos, id)| (id, pos))
        .collect();
    let mut ranks: Vec<usize> = common_a.iter().map(|id| rank_in_b[*id]).collect();

    let discordant = count_inversions(&mut ranks);
    let total_pairs = n * (n - 1) / 2;
    let s = total_pairs as i64 - 2 * discordant as i64;
    let tau = s as f64 / total_pairs as f64;

    let p = if n <= 10 {
        exact_tau_p_value(n, s)
    } else {
        let nf = n as f64;
        let z = 3.0 * tau * (nf * (nf - 1.0)).sqrt() / (2.0 * (2.0 * nf + 5.0)).sqrt();
        erfc(z.abs() / std::f64::consts::SQRT_2)
    };
    (Some(tau), Some(p))
}

/// Inversion count by merge sort; the slice is left sorted.
fn count_inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mut buf = vec![0usize; n];
    merge_count(v, &mut buf)
}

fn merge_count(v: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = v.split_at_mut(mid);
        merge_count(left, &mut buf[..mid]) + merge_count(right, &mut buf[mid..])
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            j += 1;
            inv += (mid - i) as u64;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    buf[k + (mid - i)..].copy_from_slice(&v[j..]);
    v.copy_from_slice(buf);
    inv
}

/// Exact two-sided p-value for the concordance statistic S = C - D with n
/// distinct ranks: P(|S| >= |s_obs|) over all n! permutations, computed
/// from the inversion-count recurrence.
fn exact_tau_p_value(n: usize, s_obs: i64) -> f64 {
    let max_inv = n * (n - 1) / 2;
    // counts[k] = number of permutations of n elements with k inversions
    let mut counts = vec![0u64; max_inv + 1];
    counts[0] = 1;
    for m in 2..=n {
        let mut next = vec![0u64; max_inv + 1];
        let mut window = 0u64;
        for k in 0..=max_inv {
            window += counts[k];
            if k >= m {
                window -= counts[k - m];
            }
            next[k] = window;
        }
        counts = next;
    }
    let total: u64 = counts.iter().sum();
    let target = s_obs.unsigned_abs();
    let hits: u64 = counts
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let s = max_inv as i64 - 2 * *k as i64;
            s.unsigned_abs() >= target
        })
        .map(|(_, &c)| c)
        .sum();
    hits as f64 / total as f64
}

/// Complementary error function (Chebyshev fit; fractional error < 1.2e-7,
/// plenty for significance thresholds).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t * (-z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587
                                    + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Extrapolated rank-biased overlap of two ranked lists.
///
/// RBO_ext = (1-p) Σ_{d=1..depth} p^(d-1) A_d  +  A_depth p^depth, where
/// A_d is the agreement |top-d(a) ∩ top-d(b)| / d. The extrapolated form
/// scores identical finite lists at exactly 1. `depth` is truncated to the
/// shorter list; persistence p must lie strictly inside (0, 1).
pub fn rbo(a: &ResultList, b: &ResultList, p: f64, depth: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rbo persistence must be in (0,1), got {p}"
        )));
    }
    let depth = depth.min(a.len()).min(b.len());
    if depth == 0 {
        // Degenerate lists: two empty lists agree perfectly, an empty list
        // against a non-empty one not at all.
        return Ok(if a.is_empty() && b.is_empty() { 1.0 } else { 0.0 });
    }
    let mut seen_a: HashSet<&DocId> = HashSet::new();
    let mut seen_b: HashSet<&DocId> = HashSet::new();
    let mut overlap = 0usize;
    let mut weighted_sum = 0.0;
    let mut weight = 1.0; // p^(d-1)
    let mut last_agreement = 0.0;
    for d in 1..=depth {
        let x = &a.entries[d - 1].doc_id;
        let y = &b.entries[d - 1].doc_id;
        if x == y {
            overlap += 1;
        } else {
            if seen_b.contains(x) {
                overlap += 1;
            }
            if seen_a.contains(y) {
                overlap += 1;
            }
            seen_a.insert(x);
            seen_b.insert(y);
        }
        last_agreement = overlap as f64 / d as f64;
        weighted_sum += weight * last_agreement;
        weight *= p;
    }
    // weight is now p^depth
    Ok((1.0 - p) * weighted_sum + last_agreement * weight)
}

/// Fraction of queries whose ranked lists are identical across every run:
/// same documents, same order, scores equal (tolerance zero).
pub fn exact_match_rate(runs: &[RunRecord]) -> Result<f64> {
    let aligned = align_runs(runs)?;
    let n_queries = aligned[0].len();
    let mut matches = 0usize;
    for q in 0..n_queries {
        let first = aligned[0][q];
        let all_equal = aligned[1..].iter().all(|run| lists_identical(first, run[q]));
        if all_equal {
            matches += 1;
        }
    }
    Ok(matches as f64 / n_queries as f64)
}

fn lists_identical(a: &ResultList, b: &ResultList) -> bool {
    a.entries.len() == b.entries.len()
        && a.entries
            .iter()
            .zip(&b.entries)
            .all(|(x, y)| x.doc_id == y.doc_id && x.score == y.score)
}

/// Per-query score stability: for each query, the mean over ranks of the
/// population standard deviation of the rank-r score across runs.
/// Zero means the ranking function produced numerically identical scores
/// in every run.
pub fn score_stability(runs: &[RunRecord]) -> Result<Vec<(QueryId, f64)>> {
    let aligned = align_runs(runs)?;
    let n_queries = aligned[0].len();
    let mut out = Vec::with_capacity(n_queries);
    for q in 0..n_queries {
        let len = aligned[0][q].entries.len();
        if aligned.iter().any(|run| run[q].entries.len() != len) {
            return Err(Error::ShapeMismatch(format!(
                "runs disagree on result length for query {:?}",
                aligned[0][q].query_id.0
            )));
        }
        let mut rank_std_sum = 0.0;
        for r in 0..len {
            let scores: Vec<f64> = aligned.iter().map(|run| run[q].entries[r].score as f64).collect();
            rank_std_sum += population_std(&scores);
        }
        let value = if len == 0 { 0.0 } else { rank_std_sum / len as f64 };
        out.push((aligned[0][q].query_id.clone(), value));
    }
    Ok(out)
}

/// Validate >= 2 runs over the same query ids and return per-run lists
/// aligned to the first run's query order.
fn align_runs(runs: &[RunRecord]) -> Result<Vec<Vec<&ResultList>>> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 runs to compare".into(),
        ));
    }
    let reference: Vec<&QueryId> = runs[0].results.iter().map(|r| &r.query_id).collect();
    let mut aligned = Vec::with_capacity(runs.len());
    aligned.push(runs[0].results.iter().collect::<Vec<_>>());
    for run in &runs[1..] {
        let by_id: std::collections::HashMap<&QueryId, &ResultList> =
            run.results.iter().map(|r| (&r.query_id, r)).collect();
        if by_id.len() != reference.len() {
            return Err(Error::ShapeMismatch(
                "runs cover different query sets".into(),
            ));
        }
        let lists: Option<Vec<&ResultList>> =
            reference.iter().map(|id| by_id.get(id).copied()).collect();
        match lists {
            Some(lists) => aligned.push(lists),
            None => {
                return Err(Error::ShapeMismatch(
                    "runs cover different query sets".into(),
                ))
            }
        }
    }
    Ok(aligned)
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Euclidean distance between two vectors.
pub fn vector_l2(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "vector dims {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let sum: f64 = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

/// Cosine of the angle between two vectors. Bitwise-identical vectors score
/// exactly 1 and bitwise-negated vectors exactly -1 — the agreement cases
/// the drift tables pivot on must not pick up rounding noise.
pub fn vector_cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "vector dims {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let norm_sq = |x: &[f32]| x.iter().map(|&a| (a as f64) * (a as f64)).sum::<f64>();
    let (nu, nv) = (norm_sq(u), norm_sq(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidArgument(
            "cosine undefined for zero vector".into(),
        ));
    }
    if u == v {
        return Ok(1.0);
    }
    if u.iter().zip(v).all(|(&a, &b)| a == -b) {
        return Ok(-1.0);
    }
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| (a as f64) * (b as f64)).sum();
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Mean row-wise L2 distance and cosine similarity between two matrices of
/// the same shape.
pub fn embedding_drift(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<(f64, f64)> {
    if a.rows() != b.rows() || a.dims() != b.dims() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.dims(),
            b.rows(),
            b.dims()
        )));
    }
    if a.rows() == 0 {
        return Err(Error::EmptyInput("embedding_drift on empty matrices".into()));
    }
    let mut sum_l2 = 0.0;
    let mut sum_cos = 0.0;
    for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
        sum_l2 += vector_l2(ra, rb)?;
        sum_cos += vector_cosine(ra, rb)?;
    }
    let n = a.rows() as f64;
    Ok((sum_l2 / n, sum_cos / n))
}

/// Summarize per-query values into mean / median / min / max / population
/// std.
pub fn summarize(values: &[f64]) -> Result<MetricDistribution> {
    if values.is_empty() {
        return Err(Error::EmptyInput("summarize".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(MetricDistribution {
        mean: values.iter().sum::<f64>() / n as f64,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        std: population_std(values),
        n_queries: n,
    })
}

/// All agreement scores between two ranked lists for one query.
pub fn compute_agreement(
    a: &ResultList,
    b: &ResultList,
    rbo_p: f64,
    rbo_depth: usize,
) -> Result<AgreementScores> {
    let (overlap_count, overlap_coeff) = overlap_coefficient(a, b)?;
    let (tau, p_value) = kendall_tau(a, b);
    Ok(AgreementScores {
        overlap_count,
        overlap_coefficient: overlap_coeff,
        jaccard: jaccard_lists(a, b),
        rbo: rbo(a, b, rbo_p, rbo_depth)?,
        kendall_tau: tau,
        tau_p_value: p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::ResultEntry;
    use crate::rng::SplitMix64;
    use approx::assert_abs_diff_eq;

    fn list(ids: &[&str]) -> ResultList {
        ResultList {
            query_id: QueryId("q".into()),
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, id)| ResultEntry {
                    doc_id: DocId(id.to_string()),
                    score: i as f32,
                })
                .collect(),
        }
    }

    fn id_set(ids: &[&str]) -> HashSet<DocId> {
        ids.iter().map(|s| DocId(s.to_string())).collect()
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&id_set(&["a", "b", "c"]), &id_set(&["a", "b", "c"])), 1.0);
        assert_eq!(jaccard(&id_set(&["a", "b", "c"]), &id_set(&["a", "b", "d"])), 0.5);
        assert_eq!(jaccard(&id_set(&["a"]), &id_set(&["b"])), 0.0);
        assert_eq!(jaccard(&id_set(&[]), &id_set(&[])), 1.0);
    }

    #[test]
    fn jaccard_symmetric() {
        let a = id_set(&["a", "b", "c", "d"]);
        let b = id_set(&["c", "d", "e"]);
        assert_eq!(jaccard(&a, &b), jaccard(&b, &a));
    }

    #[test]
    fn overlap_examples() {
        let v1 = list(&["a", "b", "c", "d", "e"]);
        let v2 = list(&["a", "b", "c", "x", "y"]);
        assert_eq!(overlap_coefficient(&v1, &v2).unwrap(), (3, 0.6));
        assert_eq!(overlap_coefficient(&v1, &v1).unwrap(), (5, 1.0));
        assert!(overlap_coefficient(&list(&[]), &v2).is_err());
    }

    #[test]
    fn overlap_count_bounded_by_shorter_list() {
        let v1 = list(&["a", "b", "c", "d"]);
        let v2 = list(&["a", "b"]);
        let (count, _) = overlap_coefficient(&v1, &v2).unwrap();
        assert!(count <= v1.len().min(v2.len()));
    }

    // Direct O(n^2) pair-counting oracle over the common-id subset.
    fn tau_oracle(a: &ResultList, b: &ResultList) -> Option<f64> {
        let in_b: HashSet<&DocId> = b.ids().collect();
        let common: Vec<&DocId> = a.ids().filter(|id| in_b.contains(*id)).collect();
        let n = common.len();
        if n < 2 {
            return None;
        }
        let pos = |l: &ResultList, id: &DocId| l.ids().position(|x| x == id).unwrap();
        let mut concordant = 0i64;
        let mut discordant = 0i64;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ai, aj) = (pos(a, common[i]), pos(a, common[j]));
                let (bi, bj) = (pos(b, common[i]), pos(b, common[j]));
                let same = (ai < aj) == (bi < bj);
                if same {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
        Some((concordant - discordant) as f64 / (n * (n - 1) / 2) as f64)
    }

    #[test]
    fn tau_examples() {
        let (tau, _) = kendall_tau(&list(&["a", "b", "c"]), &list(&["a", "b", "c"]));
        assert_eq!(tau, Some(1.0));
        let (tau, _) = kendall_tau(&list(&["a", "b", "c"]), &list(&["c", "b", "a"]));
        assert_eq!(tau, Some(-1.0));
        let (tau, _) = kendall_tau(&list(&["a", "b", "c", "d"]), &list(&["a", "c", "b", "d"]));
        assert_abs_diff_eq!(tau.unwrap(), 4.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn tau_undefined_below_two_common() {
        let (tau, p) = kendall_tau(&list(&["a", "b"]), &list(&["c", "d"]));
        assert_eq!((tau, p), (None, None));
        let (tau, _) = kendall_tau(&list(&["a", "b"]), &list(&["a", "x"]));
        assert_eq!(tau, None);
    }

    #[test]
    fn tau_matches_oracle_on_all_permutations_of_5() {
        let ids = ["a", "b", "c", "d", "e"];
        let a = list(&ids);
        let mut perm = ids;
        let mut count = 0;
        permute(&mut perm, 5, &mut |p| {
            let b = list(p);
            let (tau, _) = kendall_tau(&a, &b);
            assert_eq!(tau, tau_oracle(&a, &b));
            count += 1;
        });
        assert_eq!(count, 120);
    }

    fn permute<T: Clone, F: FnMut(&[T])>(items: &mut [T], n: usize, visit: &mut F) {
        if n == 1 {
            visit(items);
            return;
        }
        for i in 0..n {
            permute(items, n - 1, visit);
            if n % 2 == 0 {
                items.swap(i, n - 1);
            } else {
                items.swap(0, n - 1);
            }
        }
    }

    #[test]
    fn tau_matches_oracle_on_random_partial_overlaps() {
        let mut rng = SplitMix64::new(31);
        let universe: Vec<String> = (0..60).map(|i| format!("doc{i:03}")).collect();
        for _ in 0..300 {
            let mut pool: Vec<&str> = universe.iter().map(|s| s.as_str()).collect();
            rng.shuffle(&mut pool);
            let la = list(&pool[..30]);
            rng.shuffle(&mut pool);
            let lb = list(&pool[..30]);
            let (tau, _) = kendall_tau(&la, &lb);
            let oracle = tau_oracle(&la, &lb);
            match (tau, oracle) {
                (Some(t), Some(o)) => assert_abs_diff_eq!(t, o, epsilon = 1e-12),
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn exact_p_value_properties() {
        // n = 3: S values over 6 permutations: 3, 1, 1, -1, -1, -3.
        assert_abs_diff_eq!(exact_tau_p_value(3, 3), 2.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_tau_p_value(3, 1), 1.0, epsilon = 1e-15);
        // Perfect agreement on 10 elements is rare under the null.
        let p = exact_tau_p_value(10, 45);
        assert_abs_diff_eq!(p, 2.0 / 3_628_800.0, epsilon = 1e-18);
    }

    #[test]
    fn p_value_small_for_identical_long_lists() {
        let ids: Vec<String> = (0..50).map(|i| format!("d{i:02}")).collect();
        let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let (tau, p) = kendall_tau(&list(&refs), &list(&refs));
        assert_eq!(tau, Some(1.0));
        assert!(p.unwrap() < 1e-10);
    }

    #[test]
    fn erfc_reference_values() {
        assert_abs_diff_eq!(erfc(0.0), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(erfc(0.5), 0.4795001221869535, epsilon = 1e-7);
        assert_abs_diff_eq!(erfc(1.0), 0.15729920705028513, epsilon = 1e-7);
        assert_abs_diff_eq!(erfc(2.0), 0.004677734981063127, epsilon = 1e-8);
        assert_abs_diff_eq!(erfc(-1.0), 2.0 - 0.15729920705028513, epsilon = 1e-7);
        // two-sided p at the 5% critical point
        let p = erfc(1.959963984540054 / std::f64::consts::SQRT_2);
        assert_abs_diff_eq!(p, 0.05, epsilon = 1e-6);
    }

    // Direct-summation oracle over the extrapolated-RBO formula, sets
    // rebuilt from scratch at every depth.
    fn rbo_oracle(a: &ResultList, b: &ResultList, p: f64, depth: usize) -> f64 {
        let depth = depth.min(a.len()).min(b.len());
        if depth == 0 {
            return if a.is_empty() && b.is_empty() { 1.0 } else { 0.0 };
        }
        let agreement = |d: usize| {
            let sa: HashSet<&DocId> = a.entries[..d].iter().map(|e| &e.doc_id).collect();
            let sb: HashSet<&DocId> = b.entries[..d].iter().map(|e| &e.doc_id).collect();
            sa.intersection(&sb).count() as f64 / d as f64
        };
        let sum: f64 = (1..=depth).map(|d| p.powi(d as i32 - 1) * agreement(d)).sum();
        (1.0 - p) * sum + agreement(depth) * p.powi(depth as i32)
    }

    #[test]
    fn rbo_examples() {
        let a = list(&["x", "y", "z"]);
        assert_eq!(rbo(&a, &a, 0.9, 3).unwrap(), 1.0);
        let disjoint = list(&["p", "q", "r"]);
        assert_eq!(rbo(&a, &disjoint, 0.9, 3).unwrap(), 0.0);
        let swapped = list(&["x", "z", "y"]);
        assert_abs_diff_eq!(rbo(&a, &swapped, 0.9, 3).unwrap(), 0.955, epsilon = 1e-12);
    }

    #[test]
    fn rbo_rejects_bad_persistence() {
        let a = list(&["x"]);
        assert!(rbo(&a, &a, 0.0, 1).is_err());
        assert!(rbo(&a, &a, 1.0, 1).is_err());
        assert!(rbo(&a, &a, -0.5, 1).is_err());
    }

    #[test]
    fn rbo_matches_oracle_on_random_lists() {
        let mut rng = SplitMix64::new(77);
        let universe: Vec<String> = (0..40).map(|i| format!("doc{i:02}")).collect();
        for _ in 0..500 {
            let mut pool: Vec<&str> = universe.iter().map(|s| s.as_str()).collect();
            rng.shuffle(&mut pool);
            let len_a = 1 + rng.next_range(20) as usize;
            let la = list(&pool[..len_a]);
            rng.shuffle(&mut pool);
            let len_b = 1 + rng.next_range(20) as usize;
            let lb = list(&pool[..len_b]);
            let p = 0.5 + 0.4 * rng.next_f64();
            let depth = 1 + rng.next_range(25) as usize;
            let got = rbo(&la, &lb, p, depth).unwrap();
            let want = rbo_oracle(&la, &lb, p, depth);
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&got));
        }
    }

    fn record(lists: Vec<ResultList>) -> RunRecord {
        RunRecord {
            config_fingerprint: "test".into(),
            effective_seed: 0,
            results: lists,
            timings: Default::default(),
        }
    }

    fn qlist(q: &str, ids: &[&str], scores: &[f32]) -> ResultList {
        ResultList {
            query_id: QueryId(q.into()),
            entries: ids
                .iter()
                .zip(scores)
                .map(|(id, &s)| ResultEntry {
                    doc_id: DocId(id.to_string()),
                    score: s,
                })
                .collect(),
        }
    }

    #[test]
    fn emr_identical_runs() {
        let run = || record(vec![qlist("q0", &["a", "b"], &[0.1, 0.2])]);
        let runs = vec![run(), run(), run(), run(), run()];
        assert_eq!(exact_match_rate(&runs).unwrap(), 1.0);
    }

    #[test]
    fn emr_counts_differing_queries() {
        let base: Vec<ResultList> = (0..100)
            .map(|i| qlist(&format!("q{i}"), &["a", "b"], &[0.1, 0.2]))
            .collect();
        let mut other = base.clone();
        for list in other.iter_mut().take(20) {
            list.entries[0].doc_id = DocId("z".into());
        }
        let runs = vec![record(base), record(other)];
        assert_abs_diff_eq!(exact_match_rate(&runs).unwrap(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn emr_score_difference_breaks_match() {
        let a = record(vec![qlist("q0", &["a"], &[0.1])]);
        let b = record(vec![qlist("q0", &["a"], &[0.1 + 1e-7])]);
        assert_eq!(exact_match_rate(&[a, b]).unwrap(), 0.0);
    }

    #[test]
    fn emr_rejects_mismatched_query_sets() {
        let a = record(vec![qlist("q0", &["a"], &[0.1])]);
        let b = record(vec![qlist("q1", &["a"], &[0.1])]);
        assert!(exact_match_rate(&[a, b]).is_err());
    }

    #[test]
    fn score_stability_zero_for_identical() {
        let run = || record(vec![qlist("q0", &["a", "b"], &[0.25, 0.5])]);
        let values = score_stability(&[run(), run(), run()]).unwrap();
        assert_eq!(values[0].1, 0.0);
    }

    #[test]
    fn score_stability_two_point_example() {
        let a = record(vec![qlist("q0", &["a"], &[0.3])]);
        let b = record(vec![qlist("q0", &["a"], &[0.5])]);
        let values = score_stability(&[a, b]).unwrap();
        // scores are stored f32; 0.3 carries ~6e-9 representation error
        assert_abs_diff_eq!(values[0].1, 0.1, epsilon = 1e-7);
    }

    #[test]
    fn score_stability_rejects_differing_k() {
        let a = record(vec![qlist("q0", &["a", "b"], &[0.1, 0.2])]);
        let b = record(vec![qlist("q0", &["a"], &[0.1])]);
        assert!(score_stability(&[a, b]).is_err());
    }

    #[test]
    fn vector_metric_examples() {
        let u = [1.0f32, 0.0];
        let v = [0.0f32, 1.0];
        assert_eq!(vector_l2(&u, &u).unwrap(), 0.0);
        assert_eq!(vector_cosine(&u, &u).unwrap(), 1.0);
        assert_abs_diff_eq!(vector_l2(&u, &v).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(vector_cosine(&u, &v).unwrap(), 0.0);
        assert_eq!(vector_l2(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(vector_cosine(&[3.0, 4.0], &[0.0, 0.0]).is_err());
        assert!(vector_l2(&u, &[1.0]).is_err());
    }

    #[test]
    fn drift_identity_and_antipodal() {
        let m = EmbeddingMatrix::new(
            2,
            2,
            vec![0.6, 0.8, 1.0, 0.0],
            crate::core::PrecisionTag::FP32,
        )
        .unwrap();
        assert_eq!(embedding_drift(&m, &m).unwrap(), (0.0, 1.0));
        let neg = EmbeddingMatrix::new(
            2,
            2,
            m.data().iter().map(|v| -v).collect(),
            crate::core::PrecisionTag::FP32,
        )
        .unwrap();
        let (l2, cos) = embedding_drift(&m, &neg).unwrap();
        assert_eq!(cos, -1.0);
        // each row is unit length, so the mean distance is 2
        assert_abs_diff_eq!(l2, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn summarize_examples() {
        let d = summarize(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((d.mean, d.std, d.n_queries), (1.0, 0.0, 3));
        let d = summarize(&[0.0, 1.0]).unwrap();
        assert_eq!((d.mean, d.median, d.std), (0.5, 0.5, 0.5));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summarize_order_invariant() {
        let mut values: Vec<f64> = (0..101).map(|i| (i as f64) / 100.0).collect();
        let d1 = summarize(&values).unwrap();
        let mut rng = SplitMix64::new(3);
        rng.shuffle(&mut values);
        let d2 = summarize(&values).unwrap();
        assert_eq!(d1, d2);
        assert!(d1.min <= d1.median && d1.median <= d1.max);
    }
}
