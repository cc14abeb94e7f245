use serde::{Deserialize, Serialize};

use super::ViewSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeMode {
    MinMax,
    ZScore,
    None,
}

/// Per-view, per-column scaling using statistics of present samples only.
///
/// Constant columns map to 0 and hidden entries stay 0.
pub fn normalize(data: &ViewSet, mode: NormalizeMode) -> ViewSet {
    if mode == NormalizeMode::None {
        return data.clone();
    }
    let mut views = data.views().to_vec();
    for (v, m) in views.iter_mut().enumerate() {
        let present = data.present(v);
        let rows: Vec<usize> = (0..m.rows()).filter(|&i| present[i]).collect();
        for c in 0..m.cols() {
            let col: Vec<f64> = rows.iter().map(|&i| m.get(i, c)).collect();
            let (shift, scale) = match mode {
                NormalizeMode::MinMax => {
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
                NormalizeMode::ZScore => {
                    let n = col.len() as f64;
                    let mean = col.iter().sum::<f64>() / n;
                    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    let sd = var.sqrt();
                    // rounding leaves a tiny spread on constant columns
                    let sd = if sd <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { sd };
                    (mean, sd)
                }
                NormalizeMode::None => unreachable!(),
            };
            for i in 0..m.rows() {
                let x = m.get(i, c);
                let y = if !present[i] || !(scale > 0.0) {
                    0.0
                } else {
                    (x - shift) / scale
                };
                m.set(i, c, y);
            }
        }
    }
    ViewSet::from_parts_unchecked(
        data.name.clone(),
        views,
        data.labels().map(<[usize]>::to_vec),
        (0..data.n_views())
            .map(|v| data.present(v).to_vec())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;

    fn single(col: &[f64], present: Option<Vec<bool>>) -> ViewSet {
        let m = Matrix::column(col.to_vec());
        let other = Matrix::column(vec![1.0; col.len()]);
        let mask = present.map(|p| vec![p, vec![true; col.len()]]);
        ViewSet::new("t", vec![m, other], None, mask).unwrap()
    }

    #[test]
    fn minmax_endpoints() {
        let out = normalize(&single(&[0.0, 5.0, 10.0], None), NormalizeMode::MinMax);
        assert_eq!(out.view(0).as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let data = single(&[3.0, 3.0, 3.0], None);
        assert_eq!(
            normalize(&data, NormalizeMode::ZScore).view(0).as_slice(),
            &[0.0; 3]
        );
        assert_eq!(
            normalize(&data, NormalizeMode::MinMax).view(0).as_slice(),
            &[0.0; 3]
        );
    }

    #[test]
    fn hidden_samples_are_excluded_from_statistics() {
        // present values 2, 4, 9: mean 5, population std sqrt(26/3)
        let data = single(&[2.0, 0.0, 4.0, 9.0], Some(vec![true, false, true, true]));
        let z = normalize(&data, NormalizeMode::ZScore);
        let sd = (26.0f64 / 3.0).sqrt();
        let expected = [(2.0 - 5.0) / sd, 0.0, (4.0 - 5.0) / sd, (9.0 - 5.0) / sd];
        for (a, e) in z.view(0).as_slice().iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        let mm = normalize(&data, NormalizeMode::MinMax);
        assert_eq!(mm.view(0).as_slice(), &[0.0, 0.0, 2.0 / 7.0, 1.0]);
    }
}
