use super::{NumericsError, Result};

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1..=j).sum::<usize>() as f64 / (j - i) as f64;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of two equal-length slices.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 {
        return Err(NumericsError::ZeroVariance("first"));
    }
    if var_y == 0.0 {
        return Err(NumericsError::ZeroVariance("second"));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(NumericsError::Dimension(format!(
            "sequences of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(NumericsError::Dimension(
            "spearman needs at least 3 observations".into(),
        ));
    }
    pearson(&rank_average(a), &rank_average(b))
}

/// Average precision of `scores` against binary `gold`.
///
/// Items are ranked by descending score with ties broken by ascending index;
/// AP is the mean of precision-at-rank over the positive items.
pub fn average_precision(gold: &[u8], scores: &[f64]) -> Result<f64> {
    if gold.len() != scores.len() {
        return Err(NumericsError::Dimension(format!(
            "gold length {} vs scores length {}",
            gold.len(),
            scores.len()
        )));
    }
    let num_pos = gold.iter().filter(|&&g| g == 1).count();
    if num_pos == 0 {
        return Err(NumericsError::NoPositives);
    }

    let mut order: Vec<usize> = (0..gold.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if gold[idx] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / num_pos as f64)
}

/// Min-max scaling to [0, 1]; a constant input maps to all zeros.
pub fn minmax_scale(v: &[f64]) -> Vec<f64> {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max - min).is_normal() {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - min) / (max - min)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_identical_is_one() {
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_reversed_is_minus_one() {
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_with_ties_matches_rank_then_pearson_oracle() {
        let a = [1.0, 2.0, 2.0, 3.0];
        let b = [2.0, 1.0, 3.0, 3.0];
        // Oracle: rank both sequences by hand, then Pearson on the ranks.
        // ranks(a) = (1, 2.5, 2.5, 4); ranks(b) = (2, 1, 3.5, 3.5).
        let oracle = pearson(&[1.0, 2.5, 2.5, 4.0], &[2.0, 1.0, 3.5, 3.5]).unwrap();
        let got = spearman_rho(&a, &b).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_is_zero_variance() {
        assert_eq!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(NumericsError::ZeroVariance("first"))
        );
    }

    #[test]
    fn spearman_symmetric_and_monotone_invariant() {
        let a = [0.3, -1.2, 2.5, 0.9, 0.3, 7.0];
        let b = [1.0, 4.0, 2.0, 2.0, -3.0, 0.5];
        let ab = spearman_rho(&a, &b).unwrap();
        let ba = spearman_rho(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        // Strictly increasing transform of a correlates perfectly with a.
        let g: Vec<f64> = a.iter().map(|x| x.exp() + 3.0 * x).collect();
        assert!((spearman_rho(&a, &g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_perfect_ranking() {
        assert!((average_precision(&[1, 1, 0], &[0.9, 0.8, 0.1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_interleaved() {
        // Ranking: idx0 (pos), idx1 (neg), idx2 (pos) -> (1/1 + 2/3)/2.
        let got = average_precision(&[1, 0, 1], &[0.9, 0.8, 0.7]).unwrap();
        assert!((got - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ap_no_positives_is_error() {
        assert_eq!(
            average_precision(&[0, 0, 0], &[0.5, 0.1, 0.9]),
            Err(NumericsError::NoPositives)
        );
    }

    #[test]
    fn ap_monotone_transform_invariant() {
        let gold = [0u8, 1, 0, 1, 1, 0, 0, 1];
        let scores = [0.1, 0.7, 0.3, 0.9, 0.2, 0.8, 0.05, 0.6];
        let base = average_precision(&gold, &scores).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (5.0 * s).tanh()).collect();
        let shifted: Vec<f64> = scores.iter().map(|s| 100.0 * s + 7.0).collect();
        assert!((average_precision(&gold, &squashed).unwrap() - base).abs() < 1e-12);
        assert!((average_precision(&gold, &shifted).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn minmax_basic_and_constant() {
        assert_eq!(minmax_scale(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_scale(&[7.0, 7.0, 7.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn minmax_hits_zero_and_one() {
        let mut state = 42u64;
        for _ in 0..20 {
            let v: Vec<f64> = (0..12)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (state >> 11) as f64 / (1u64 << 53) as f64 * 10.0 - 5.0
                })
                .collect();
            let s = minmax_scale(&v);
            let min = s.iter().copied().fold(f64::INFINITY, f64::min);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(min, 0.0);
            assert_eq!(max, 1.0);
        }
    }
}
