//! Two-dimensional PCA export of an embedding.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::autodiff::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectionError {
    #[error("projection needs at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("projection needs at least one row")]
    Empty,
}

/// Projects the centred rows of `points` onto the two leading principal axes.
///
/// Each axis is oriented so its largest-magnitude loading is positive, and an
/// axis whose variance is negligible next to the leading one yields zeros.
pub fn pca_2d(points: &Matrix) -> Result<Matrix, ProjectionError> {
    let (n, d) = points.shape();
    if d < 2 {
        return Err(ProjectionError::TooFewColumns(d));
    }
    if n == 0 {
        return Err(ProjectionError::Empty);
    }
    let x = DMatrix::from_row_slice(n, d, points.as_slice());
    let mean = x.row_mean();
    let mut centred = x;
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let cov = centred.transpose() * &centred / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut out = Matrix::zeros(n, 2);
    for (k, &idx) in order.iter().take(2).enumerate() {
        if eig.eigenvalues[idx] <= 1e-12 * top.max(f64::MIN_POSITIVE) {
            continue;
        }
        let mut axis = eig.eigenvectors.column(idx).into_owned();
        let lead = axis.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            axis = -axis;
        }
        let proj = &centred * axis;
        for i in 0..n {
            out.set(i, k, proj[i]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(m: &Matrix, i: usize, j: usize) -> f64 {
        m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn planar_input_keeps_distances() {
        let pts = Matrix::from_rows(&[[0.0, 0.0], [3.0, 1.0], [-1.0, 2.0], [4.0, -2.0], [0.5, 0.5]]);
        let p = pca_2d(&pts).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((dist(&pts, i, j) - dist(&p, i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_one_second_axis_is_zero() {
        let pts = Matrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [-1.0, -2.0, -3.0]]);
        let p = pca_2d(&pts).unwrap();
        assert!((0..3).all(|i| p.get(i, 1) == 0.0));
        assert!((dist(&pts, 0, 1) - dist(&p, 0, 1)).abs() < 1e-10);
    }

    #[test]
    fn plane_in_three_dimensions() {
        // points on x + y + z = 1
        let pts = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [2.0, -1.0, 0.0]]);
        let p = pca_2d(&pts).unwrap();
        // two components retain all pairwise distances, so the residual is zero
        for i in 0..5 {
            for j in 0..5 {
                assert!((dist(&pts, i, j) - dist(&p, i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_narrow_input() {
        assert_eq!(pca_2d(&Matrix::zeros(3, 1)), Err(ProjectionError::TooFewColumns(1)));
    }
}
