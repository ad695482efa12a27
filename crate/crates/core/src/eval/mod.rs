//! Ranking metrics and the per-run metrics report.
//!
//! AUC is the probability that a uniformly random positive outranks a
//! uniformly random negative, with ties worth half credit; it is computed
//! from average ranks (Mann-Whitney). AP walks the descending-score ranking
//! and averages precision at each positive's rank; score ties are broken by
//! ascending node index, which makes the value deterministic.

mod sweep;

pub use sweep::*;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve, ties counted half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::validation("scores and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::validation(
            "AUC needs at least one positive and one negative label",
        ));
    }
    // Average ranks over score ties, then the Mann-Whitney identity.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied block [i, j] shares the average rank.
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: mean of precision at each positive's rank in
/// descending-score order, ties broken by ascending index.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::validation("scores and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::validation("AP needs at least one positive label"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if labels[idx] {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Fraction of exact class matches.
pub fn accuracy(predicted: &[usize], actual: &[usize]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    hits as f64 / predicted.len() as f64
}

/// One-vs-rest macro average of a binary metric over K classes;
/// `scores_per_class[v]` holds the K class scores for node v.
pub fn macro_ovr(
    scores_per_class: &[Vec<f64>],
    labels: &[usize],
    metric: impl Fn(&[f64], &[bool]) -> Result<f64>,
) -> Result<f64> {
    let k = scores_per_class
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::validation("macro metric on empty input"))?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for class in 0..k {
        let scores: Vec<f64> = scores_per_class.iter().map(|row| row[class]).collect();
        let binary: Vec<bool> = labels.iter().map(|&l| l == class).collect();
        match metric(&scores, &binary) {
            Ok(v) => {
                sum += v;
                used += 1;
            }
            // Classes absent from this node set contribute nothing.
            Err(_) => continue,
        }
    }
    if used == 0 {
        return Err(Error::validation(
            "no class had both members and non-members",
        ));
    }
    Ok(sum / used as f64)
}

/// Metrics and provenance for one trained run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub ap: f64,
    pub accuracy: f64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub config_hash: String,
    pub seed: u64,
    /// Timing only; excluded from byte-determinism comparisons.
    pub wall_clock_seconds: f64,
}

/// FNV-1a over the canonical JSON encoding of a config, as a stable,
/// dependency-free fingerprint.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).unwrap_or_default();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in json.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation_gives_one() {
        let scores = [0.9, 0.8, 0.3, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn interleaved_example_gives_three_quarters() {
        // Pairs (pos, neg): 4 total, 3 correctly ordered.
        let scores = [0.9, 0.8, 0.6, 0.2];
        let labels = [true, false, true, false];
        assert!((auc(&scores, &labels).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn all_ties_give_half() {
        let scores = [0.4, 0.4, 0.4, 0.4];
        let labels = [true, false, true, false];
        assert!((auc(&scores, &labels).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_an_error() {
        let err = auc(&[0.1, 0.2], &[true, true]).unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn perfect_ranking_ap_is_one() {
        let scores = [0.9, 0.8, 0.3, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(average_precision(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn ap_worked_example_five_sixths() {
        let scores = [0.9, 0.8, 0.6, 0.2];
        let labels = [true, false, true, false];
        let expect = (1.0 + 2.0 / 3.0) / 2.0;
        assert!((average_precision(&scores, &labels).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn lone_positive_ranked_last_gives_one_over_n() {
        let scores = [0.9, 0.8, 0.7, 0.1];
        let labels = [false, false, false, true];
        assert!((average_precision(&scores, &labels).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn no_positives_is_an_error() {
        assert!(average_precision(&[0.5, 0.4], &[false, false]).is_err());
    }

    #[test]
    fn accuracy_counts_matches() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]), 0.75);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        #[derive(Serialize)]
        struct C {
            a: u32,
        }
        assert_eq!(config_hash(&C { a: 1 }), config_hash(&C { a: 1 }));
        assert_ne!(config_hash(&C { a: 1 }), config_hash(&C { a: 2 }));
    }
}
