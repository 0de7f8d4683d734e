//! Binary-relevance retrieval metrics over a ranked list.
//!
//! `relevant[i]` is the relevance of the item at rank `i + 1`; `total_relevant`
//! is the number of relevant items in the whole database.

/// Relevant items among the first `k`, divided by `k`.
pub fn precision_at_k(relevant: &[bool], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    relevant.iter().take(k).filter(|&&r| r).count() as f64 / k as f64
}

/// Sum of `Prec@i` over relevant ranks `i <= k`, divided by `min(k, R)`.
/// `None` when the database holds no relevant item.
pub fn ap_at_k(relevant: &[bool], total_relevant: usize, k: usize) -> Option<f64> {
    if total_relevant == 0 || k == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().take(k).enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / k.min(total_relevant) as f64)
}

/// Binary-gain NDCG with a `log2(i + 1)` discount at 1-indexed rank `i`.
/// `None` when the database holds no relevant item.
pub fn ndcg_at_k(relevant: &[bool], total_relevant: usize, k: usize) -> Option<f64> {
    if total_relevant == 0 || k == 0 {
        return None;
    }
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = relevant
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| discount(i))
        .sum();
    let idcg: f64 = (0..k.min(total_relevant)).map(discount).sum();
    Some(dcg / idcg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATTERN: [bool; 3] = [true, false, true];

    #[test]
    fn worked_values() {
        assert!((precision_at_k(&PATTERN, 3) - 2.0 / 3.0).abs() < 1e-15);
        assert!((ap_at_k(&PATTERN, 2, 3).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        let expected = 1.5 / (1.0 + 1.0 / 3f64.log2());
        assert!((ndcg_at_k(&PATTERN, 2, 3).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.9197).abs() < 1e-4);
    }

    #[test]
    fn ideal_and_empty_rankings() {
        let ideal = [true, true, true, false];
        assert_eq!(precision_at_k(&ideal, 3), 1.0);
        assert_eq!(ap_at_k(&ideal, 3, 3), Some(1.0));
        assert_eq!(ndcg_at_k(&ideal, 3, 3), Some(1.0));
        // fewer relevant items than k: ideal prefix still scores 1 for AP and NDCG
        assert_eq!(ap_at_k(&ideal, 3, 4), Some(1.0));
        assert_eq!(ndcg_at_k(&ideal, 3, 4), Some(1.0));
        let none = [false; 5];
        assert_eq!(precision_at_k(&none, 5), 0.0);
        assert_eq!(ap_at_k(&none, 2, 5), Some(0.0));
        assert_eq!(ndcg_at_k(&none, 2, 5), Some(0.0));
    }

    #[test]
    fn single_hit_at_rank_k() {
        for k in 1..12 {
            let mut rel = vec![false; k];
            rel[k - 1] = true;
            let v = ndcg_at_k(&rel, 1, k).unwrap();
            assert!((v - 1.0 / ((k + 1) as f64).log2()).abs() < 1e-15);
        }
    }

    #[test]
    fn unanswerable_queries_yield_none() {
        assert_eq!(ap_at_k(&[false, false], 0, 2), None);
        assert_eq!(ndcg_at_k(&[false, false], 0, 2), None);
    }
}
