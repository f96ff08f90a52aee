use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::{squared_distance, Matrix};
use super::{NumericsError, Result};

const MAX_ITER: usize = 300;

/// Lloyd's algorithm from k-means++ initialization.
///
/// Runs until the assignment reaches a fixpoint or 300 iterations; empty
/// clusters are re-seeded to the point farthest from its assigned centroid.
/// Deterministic given the seed.
pub fn kmeans(data: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    kmeans_with_trace(data, k, seed).map(|(assignment, _)| assignment)
}

/// Same as [`kmeans`] but also returns the inertia after every Lloyd
/// iteration.
pub(crate) fn kmeans_with_trace(
    data: &Matrix,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = data.rows();
    if k < 1 || k > n {
        return Err(NumericsError::Dimension(format!(
            "k={k} outside [1, {n}]"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let mut assignment = vec![0usize; n];
    let mut trace = Vec::new();

    for _ in 0..MAX_ITER {
        let next: Vec<usize> = data
            .iter_rows()
            .map(|row| nearest_centroid(row, &centroids))
            .collect();
        let converged = next == assignment;
        assignment = next;

        // Recompute centroids; an empty cluster takes the farthest point.
        let dim = data.cols();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (row, &c) in data.iter_rows().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(row) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = farthest_point(data, &centroids, &assignment);
                centroids[c] = data.row(far).to_vec();
                assignment[far] = c;
            } else {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
        }
        trace.push(
            data.iter_rows()
                .zip(&assignment)
                .map(|(row, &c)| squared_distance(row, &centroids[c]))
                .sum(),
        );
        if converged {
            break;
        }
    }
    Ok((assignment, trace))
}

fn nearest_centroid(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = squared_distance(row, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(row, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn farthest_point(data: &Matrix, centroids: &[Vec<f64>], assignment: &[usize]) -> usize {
    let mut far = 0;
    let mut far_d = -1.0;
    for (i, row) in data.iter_rows().enumerate() {
        let d = squared_distance(row, &centroids[assignment[i]]);
        if d > far_d {
            far_d = d;
            far = i;
        }
    }
    far
}

/// k-means++ seeding: first centroid uniform, the rest by D² sampling.
fn plus_plus_init(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(data.row(rng.gen_range(0..n)).to_vec());

    let mut dist: Vec<f64> = data
        .iter_rows()
        .map(|row| squared_distance(row, &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            // All points coincide with a centroid; take the first free index.
            dist.iter().position(|&d| d <= 0.0).unwrap_or(0)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(data.row(next).to_vec());
        for (i, row) in data.iter_rows().enumerate() {
            let d = squared_distance(row, centroids.last().unwrap());
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    centroids
}

/// Sum of squared distances from each point to its assigned centroid,
/// with centroids recomputed as cluster means. Test helper.
#[cfg(test)]
fn inertia(data: &Matrix, assignment: &[usize], k: usize) -> f64 {
    let dim = data.cols();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in data.iter_rows().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
        }
    }
    data.iter_rows()
        .zip(assignment)
        .map(|(row, &c)| squared_distance(row, &sums[c]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_clusters_have_zero_inertia() {
        let data = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![5.0, 0.0],
            vec![0.0, 5.0],
            vec![5.0, 5.0],
        ])
        .unwrap();
        let assignment = kmeans(&data, 4, 13).unwrap();
        let mut seen = assignment.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 4);
        assert_eq!(inertia(&data, &assignment, 4), 0.0);
    }

    #[test]
    fn k1_centroid_is_mean() {
        let data = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![6.0]]).unwrap();
        let assignment = kmeans(&data, 1, 7).unwrap();
        assert_eq!(assignment, vec![0, 0, 0]);
        // Inertia around the mean (3.0): 4 + 1 + 9.
        assert!((inertia(&data, &assignment, 1) - 14.0).abs() < 1e-12);
    }

    #[test]
    fn two_blobs_recovered() {
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..40 {
            rows.push(vec![rng.gen::<f64>() * 0.5, rng.gen::<f64>() * 0.5]);
        }
        for _ in 0..40 {
            rows.push(vec![10.0 + rng.gen::<f64>() * 0.5, 10.0 + rng.gen::<f64>() * 0.5]);
        }
        let data = Matrix::from_rows(&rows).unwrap();
        let assignment = kmeans(&data, 2, 21).unwrap();
        // Nearest-true-mean oracle: first 40 rows one blob, rest the other.
        let first = assignment[0];
        assert!(assignment[..40].iter().all(|&c| c == first));
        assert!(assignment[40..].iter().all(|&c| c != first));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = Matrix::from_rows(&[
            vec![0.1, 0.2],
            vec![3.0, 3.1],
            vec![0.2, 0.1],
            vec![2.9, 3.0],
            vec![6.0, 6.0],
        ])
        .unwrap();
        assert_eq!(kmeans(&data, 3, 5).unwrap(), kmeans(&data, 3, 5).unwrap());
    }

    #[test]
    fn k_out_of_range() {
        let data = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(kmeans(&data, 3, 1).is_err());
        assert!(kmeans(&data, 0, 1).is_err());
    }

    #[test]
    fn inertia_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen::<f64>() * 8.0, rng.gen::<f64>() * 8.0])
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        for seed in 0..5 {
            let (_, trace) = kmeans_with_trace(&data, 4, seed).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "inertia rose: {} -> {}", w[0], w[1]);
            }
        }
    }
}
