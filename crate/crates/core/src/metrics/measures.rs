//! Per-ranking measures. Inputs are in ranked order (rank 1 first).

use super::MetricError;

/// Clip bound for probabilities in [`cross_entropy`].
pub const PROB_EPSILON: f64 = 1e-12;

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

fn dcg(gains: impl Iterator<Item = f64>, k: usize) -> f64 {
    gains.take(k).enumerate().map(|(i, g)| g * discount(i + 1)).sum()
}

/// DCG over the top `k` with a `1/log2(rank+1)` discount, normalized by the
/// DCG of the same gains sorted descending. Negative gains count as 0.
/// Returns 1.0 when the ideal DCG is 0.
pub fn ndcg_at_k(gains: &[f64], k: usize) -> f64 {
    let clamped: Vec<f64> = gains.iter().map(|g| g.max(0.0)).collect();
    let mut ideal = clamped.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal.into_iter(), k);
    if idcg == 0.0 {
        return 1.0;
    }
    dcg(clamped.into_iter(), k) / idcg
}

/// Fraction of the top `min(k, n)` entries that are nonzero.
pub fn density_at_k(values: &[f64], k: usize) -> f64 {
    let depth = k.min(values.len());
    if depth == 0 {
        return 0.0;
    }
    let hits = values[..depth].iter().filter(|v| **v != 0.0).count();
    hits as f64 / depth as f64
}

/// Mean of the top `min(k, n)` values.
pub fn mean_at_k(values: &[f64], k: usize) -> f64 {
    let depth = k.min(values.len());
    if depth == 0 {
        return 0.0;
    }
    values[..depth].iter().sum::<f64>() / depth as f64
}

/// Binary cross-entropy with natural log, probabilities clipped to
/// `[PROB_EPSILON, 1 - PROB_EPSILON]`.
pub fn cross_entropy(labels: &[f64], probs: &[f64]) -> Result<f64, MetricError> {
    if labels.len() != probs.len() {
        return Err(MetricError::LengthMismatch { labels: labels.len(), probs: probs.len() });
    }
    if labels.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let total: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&r, &p)| {
            let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
            r * p.ln() + (1.0 - r) * (1.0 - p).ln()
        })
        .sum();
    Ok(-total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking_is_one() {
        assert_eq!(ndcg_at_k(&[3.0, 2.0, 1.0, 0.0], 8), 1.0);
        assert_eq!(ndcg_at_k(&[0.9, 0.5, 0.5], 2), 1.0);
    }

    #[test]
    fn inverted_pair() {
        // DCG = 1/log2(3), IDCG = 1
        let v = ndcg_at_k(&[0.0, 1.0], 2);
        assert!((v - 0.630_929_753_571_457_4).abs() < 1e-12);
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn zero_gains_are_perfect() {
        assert_eq!(ndcg_at_k(&[0.0, 0.0, 0.0], 8), 1.0);
        assert_eq!(ndcg_at_k(&[-1.0, 0.0], 8), 1.0);
        assert_eq!(ndcg_at_k(&[], 8), 1.0);
    }

    #[test]
    fn only_top_k_counts() {
        assert_eq!(ndcg_at_k(&[0.0, 0.0, 5.0], 2), 0.0);
        assert_eq!(ndcg_at_k(&[1.0, 0.0, 5.0], 1), 0.2);
    }

    #[test]
    fn density() {
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        v[3] = 1.0;
        v[7] = 1.0;
        v[9] = 1.0;
        assert_eq!(density_at_k(&v, 8), 0.375);
        assert_eq!(density_at_k(&[0.0; 10], 8), 0.0);
        assert_eq!(density_at_k(&[1.0; 5], 8), 1.0);
        assert_eq!(density_at_k(&[1.0, 0.0, 0.0, 0.0, 0.0], 8), 0.2);
    }

    #[test]
    fn cross_entropy_values() {
        assert!(cross_entropy(&[1.0], &[1.0]).unwrap() < 1e-10);
        let v = cross_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        let v = cross_entropy(&[1.0], &[0.0]).unwrap();
        assert!((v - 27.631_021_115_928_547).abs() < 1e-6);
        assert!((v + PROB_EPSILON.ln()).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_errors() {
        assert!(matches!(cross_entropy(&[1.0], &[0.5, 0.5]), Err(MetricError::LengthMismatch { .. })));
        assert!(matches!(cross_entropy(&[], &[]), Err(MetricError::EmptyInput)));
    }

    #[test]
    fn mean_over_top_k() {
        assert_eq!(mean_at_k(&[1.0, 3.0, 100.0], 2), 2.0);
        assert_eq!(mean_at_k(&[4.0], 8), 4.0);
    }
}
