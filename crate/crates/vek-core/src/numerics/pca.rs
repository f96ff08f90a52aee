use super::matrix::Matrix;
use super::{NumericsError, Result};

/// Orthonormal principal-component basis of a dataset.
///
/// `components` is p×d with basis vectors in the columns, eigenvalues are
/// sorted non-increasing, and `mean` is subtracted before projection. The
/// sign convention makes the largest-magnitude entry of each column
/// non-negative so bases are reproducible across platforms.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.components.cols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.rows()
    }

    /// Projects rows of `data` onto the basis: `(X - mean) · C`.
    pub fn project(&self, data: &Matrix) -> Result<Matrix> {
        data.sub_row_vector(&self.mean)?.matmul(&self.components)
    }
}

/// Fits the top-`d` principal components of `data` (sample covariance,
/// divisor n−1) with a cyclic Jacobi eigensolver.
pub fn pca_fit(data: &Matrix, d: usize) -> Result<Subspace> {
    let n = data.rows();
    let p = data.cols();
    if n < 2 {
        return Err(NumericsError::Dimension(
            "pca needs at least 2 rows".into(),
        ));
    }
    if d < 1 || d > (n - 1).min(p) {
        return Err(NumericsError::Dimension(format!(
            "d={d} outside [1, min(rows-1, cols)] = [1, {}]",
            (n - 1).min(p)
        )));
    }

    let mean = data.col_means();
    let centered = data.sub_row_vector(&mean)?;

    // Sample covariance, divisor n-1.
    let mut cov = Matrix::zeros(p, p);
    for row in centered.iter_rows() {
        for i in 0..p {
            for j in i..p {
                let v = cov.get(i, j) + row[i] * row[j];
                cov.set(i, j, v);
            }
        }
    }
    let scale = 1.0 / (n as f64 - 1.0);
    for i in 0..p {
        for j in i..p {
            let v = cov.get(i, j) * scale;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    let (eigenvalues, vectors) = jacobi_eigen(&cov);

    // Rank of the covariance relative to its largest eigenvalue.
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let tol = (lambda_max * 1e-10).max(1e-12);
    let rank = eigenvalues.iter().filter(|&&v| v > tol).count();
    if rank < d {
        return Err(NumericsError::DegenerateData { requested: d, rank });
    }

    let mut components = Matrix::zeros(p, d);
    for c in 0..d {
        for r in 0..p {
            components.set(r, c, vectors.get(r, c));
        }
    }
    sign_normalize(&mut components);

    Ok(Subspace {
        components,
        eigenvalues: eigenvalues[..d].to_vec(),
        mean,
    })
}

/// Makes the largest-magnitude entry of each column non-negative,
/// ties resolved to the lowest row index.
fn sign_normalize(components: &mut Matrix) {
    for c in 0..components.cols() {
        let mut pivot = 0;
        for r in 1..components.rows() {
            if components.get(r, c).abs() > components.get(pivot, c).abs() {
                pivot = r;
            }
        }
        if components.get(pivot, c) < 0.0 {
            for r in 0..components.rows() {
                components.set(r, c, -components.get(r, c));
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted non-increasing with the matching eigenvectors
/// in the columns of the returned matrix.
fn jacobi_eigen(sym: &Matrix) -> (Vec<f64>, Matrix) {
    let p = sym.rows();
    let mut a = sym.clone();
    let mut v = Matrix::identity(p);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += a.get(i, j).abs();
            }
        }
        if off < 1e-14 {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = a.get(i, j);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(i, i);
                let aqq = a.get(j, j);
                let theta = (aqq - app) / (2.0 * apq);
                // Smaller-angle root keeps the rotation stable.
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..p {
                    let aik = a.get(i, k);
                    let ajk = a.get(j, k);
                    a.set(i, k, c * aik - s * ajk);
                    a.set(j, k, s * aik + c * ajk);
                }
                for k in 0..p {
                    let aki = a.get(k, i);
                    let akj = a.get(k, j);
                    a.set(k, i, c * aki - s * akj);
                    a.set(k, j, s * aki + c * akj);
                }
                for k in 0..p {
                    let vki = v.get(k, i);
                    let vkj = v.get(k, j);
                    v.set(k, i, c * vki - s * vkj);
                    v.set(k, j, s * vki + c * vkj);
                }
            }
        }
    }

    // Sort by eigenvalue, non-increasing; ties keep the lower original index.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| {
        a.get(y, y)
            .partial_cmp(&a.get(x, x))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(p, p);
    for (c, &i) in order.iter().enumerate() {
        for r in 0..p {
            vectors.set(r, c, v.get(r, i));
        }
    }
    (eigenvalues, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form eigendecomposition of a 2x2 symmetric matrix, used as an
    /// independent oracle for the Jacobi path.
    fn analytic_2x2(a: f64, b: f64, c: f64) -> (f64, f64, [f64; 2]) {
        let tr = a + c;
        let det = a * c - b * b;
        let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
        let l1 = tr / 2.0 + disc;
        let l2 = tr / 2.0 - disc;
        // Eigenvector for l1.
        let v = if b.abs() > 1e-15 {
            [l1 - c, b]
        } else if a >= c {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        (l1, l2, [v[0] / norm, v[1] / norm])
    }

    #[test]
    fn single_axis_data() {
        let data = Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let sub = pca_fit(&data, 1).unwrap();
        assert!((sub.components.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(sub.components.get(1, 0).abs() < 1e-12);
        assert!((sub.eigenvalues[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_orthonormality() {
        let data = Matrix::from_rows(&[
            vec![1.0, 0.2, -0.3],
            vec![-0.5, 1.1, 0.4],
            vec![0.3, -0.7, 1.2],
            vec![2.0, 0.5, -1.0],
            vec![-1.1, 0.9, 0.1],
        ])
        .unwrap();
        let sub = pca_fit(&data, 3).unwrap();
        let gram = sub
            .components
            .transpose()
            .matmul(&sub.components)
            .unwrap();
        assert!(gram.max_abs_diff(&Matrix::identity(3)) <= 1e-8);
    }

    #[test]
    fn correlated_cloud_matches_analytic_eigensolver() {
        // Deterministic correlated 2-D cloud.
        let mut rows = Vec::new();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for _ in 0..400 {
            let u = next() * 4.0;
            let v = next();
            rows.push(vec![u, 0.8 * u + v]);
        }
        let data = Matrix::from_rows(&rows).unwrap();
        let mean = data.col_means();
        let centered = data.sub_row_vector(&mean).unwrap();
        let n = centered.rows() as f64;
        let mut cxx = 0.0;
        let mut cxy = 0.0;
        let mut cyy = 0.0;
        for r in centered.iter_rows() {
            cxx += r[0] * r[0];
            cxy += r[0] * r[1];
            cyy += r[1] * r[1];
        }
        cxx /= n - 1.0;
        cxy /= n - 1.0;
        cyy /= n - 1.0;

        let (l1, _l2, v1) = analytic_2x2(cxx, cxy, cyy);
        let sub = pca_fit(&data, 1).unwrap();
        assert!((sub.eigenvalues[0] - l1).abs() <= 1e-8 * l1.max(1.0));
        // Match up to the shared sign convention.
        let got = [sub.components.get(0, 0), sub.components.get(1, 0)];
        let want = if v1[0].abs() >= v1[1].abs() {
            if v1[0] < 0.0 { [-v1[0], -v1[1]] } else { v1 }
        } else if v1[1] < 0.0 {
            [-v1[0], -v1[1]]
        } else {
            v1
        };
        assert!((got[0] - want[0]).abs() <= 1e-8);
        assert!((got[1] - want[1]).abs() <= 1e-8);
    }

    #[test]
    fn d_out_of_range_is_dimension_error() {
        let data = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            pca_fit(&data, 2),
            Err(NumericsError::Dimension(_))
        ));
        assert!(matches!(
            pca_fit(&data, 0),
            Err(NumericsError::Dimension(_))
        ));
    }

    #[test]
    fn rank_deficient_reports_achievable_rank() {
        // Three collinear points: rank 1 in 2-D.
        let data =
            Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        match pca_fit(&data, 2) {
            Err(NumericsError::DegenerateData { requested, rank }) => {
                assert_eq!(requested, 2);
                assert_eq!(rank, 1);
            }
            other => panic!("expected DegenerateData, got {other:?}"),
        }
    }

    #[test]
    fn projection_variance_equals_eigenvalues() {
        let data = Matrix::from_rows(&[
            vec![2.1, 0.3, 1.0],
            vec![-1.4, 0.8, -0.2],
            vec![0.7, -1.9, 0.4],
            vec![1.2, 1.4, -1.1],
            vec![-2.3, 0.2, 0.8],
            vec![0.4, -0.6, -0.9],
        ])
        .unwrap();
        let sub = pca_fit(&data, 2).unwrap();
        let scores = sub.project(&data).unwrap();
        let n = scores.rows() as f64;
        for c in 0..2 {
            let mean: f64 = (0..scores.rows()).map(|r| scores.get(r, c)).sum::<f64>() / n;
            let var: f64 = (0..scores.rows())
                .map(|r| {
                    let d = scores.get(r, c) - mean;
                    d * d
                })
                .sum::<f64>()
                / (n - 1.0);
            let rel = (var - sub.eigenvalues[c]).abs() / sub.eigenvalues[c].max(1e-12);
            assert!(rel <= 1e-6, "component {c}: var {var} vs {}", sub.eigenvalues[c]);
        }
    }
}
