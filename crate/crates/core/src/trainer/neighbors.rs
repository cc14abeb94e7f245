use super::TrainError;
use crate::autodiff::Matrix;
use crate::config::ConfigError;

/// The `n_omega` most cosine-similar other rows of `q` for every row.
///
/// Equal similarities go to the lower index. Zero rows are treated as
/// orthogonal to everything.
pub fn build_neighbor_sets(q: &Matrix, n_omega: usize) -> Result<Vec<Vec<usize>>, TrainError> {
    let n = q.rows();
    if n_omega >= n {
        return Err(ConfigError::Invalid {
            key: "n_omega",
            reason: format!("{n_omega} neighbors requested among {n} samples"),
        }
        .into());
    }
    if n_omega == 0 {
        return Ok(vec![Vec::new(); n]);
    }
    let mut unit = q.clone();
    for i in 0..n {
        let norm = unit.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            unit.row_mut(i).iter_mut().for_each(|x| *x /= norm);
        }
    }
    let mut sims = Matrix::zeros(n, n);
    crate::autodiff::gemm(1.0, &unit, false, &unit, true, 0.0, &mut sims);
    Ok((0..n)
        .map(|i| {
            let row = sims.row(i);
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let key = |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then(a.cmp(b));
            others.select_nth_unstable_by(n_omega - 1, key);
            let mut chosen = others[..n_omega].to_vec();
            chosen.sort_by(key);
            chosen
        })
        .collect())
}
