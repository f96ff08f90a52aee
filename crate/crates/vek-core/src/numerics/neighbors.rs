use super::matrix::{squared_distance, Matrix};
use super::{NumericsError, Result};

/// Euclidean 1-nearest-neighbour classification; ties resolve to the lowest
/// reference index.
pub fn nn1_classify(
    reference: &Matrix,
    reference_labels: &[usize],
    queries: &Matrix,
) -> Result<Vec<usize>> {
    if reference.rows() == 0 {
        return Err(NumericsError::EmptyReference);
    }
    if reference_labels.len() != reference.rows() {
        return Err(NumericsError::Dimension(
            "label count does not match reference rows".into(),
        ));
    }
    if reference.cols() != queries.cols() {
        return Err(NumericsError::Dimension(format!(
            "reference has {} features, queries have {}",
            reference.cols(),
            queries.cols()
        )));
    }

    Ok(queries
        .iter_rows()
        .map(|q| {
            let mut best = 0;
            let mut best_d = squared_distance(q, reference.row(0));
            for (i, r) in reference.iter_rows().enumerate().skip(1) {
                let d = squared_distance(q, r);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            reference_labels[best]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_match_takes_that_label() {
        let reference = Matrix::from_rows(&[vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let queries = Matrix::from_rows(&[vec![5.0, 5.0]]).unwrap();
        assert_eq!(nn1_classify(&reference, &[3, 9], &queries).unwrap(), vec![9]);
    }

    #[test]
    fn single_reference_forces_label() {
        let reference = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let queries = Matrix::from_rows(&[vec![-100.0], vec![0.0], vec![42.0]]).unwrap();
        assert_eq!(
            nn1_classify(&reference, &[7], &queries).unwrap(),
            vec![7, 7, 7]
        );
    }

    #[test]
    fn matches_exhaustive_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ref_rows: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let labels: Vec<usize> = (0..20).map(|_| rng.gen_range(0..4)).collect();
        let query_rows: Vec<Vec<f64>> = (0..15)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let reference = Matrix::from_rows(&ref_rows).unwrap();
        let queries = Matrix::from_rows(&query_rows).unwrap();

        let got = nn1_classify(&reference, &labels, &queries).unwrap();
        for (q, &label) in query_rows.iter().zip(&got) {
            let mut best = 0;
            for i in 1..ref_rows.len() {
                let d_i: f64 = ref_rows[i].iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
                let d_b: f64 = ref_rows[best].iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
                if d_i < d_b {
                    best = i;
                }
            }
            assert_eq!(label, labels[best]);
        }
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let reference = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let queries = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(nn1_classify(&reference, &[5, 6], &queries).unwrap(), vec![5]);
    }

    #[test]
    fn empty_reference_is_error() {
        let reference = Matrix::zeros(0, 2);
        let queries = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(
            nn1_classify(&reference, &[], &queries),
            Err(NumericsError::EmptyReference)
        );
    }
}
