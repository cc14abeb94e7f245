use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, ViewSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingSpec {
    /// Fraction of samples made incomplete, in `[0, 1)`.
    pub ratio: f64,
    pub seed: u64,
}

/// Hides views of `floor(ratio * N)` randomly chosen samples.
///
/// Each chosen sample loses a uniformly drawn number of its present views,
/// between one and all but one; hidden entries are zero-filled. Samples that
/// already have a single present view are never chosen.
pub fn apply_missing(data: &ViewSet, spec: MissingSpec) -> Result<ViewSet, DataError> {
    if data.n_views() < 2 {
        return Err(DataError::Protocol(
            "hiding views needs at least two views".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.ratio) {
        return Err(DataError::Protocol(format!(
            "missing ratio {} outside [0, 1)",
            spec.ratio
        )));
    }
    let n = data.n_samples();
    let target = (spec.ratio * n as f64).floor() as usize;
    if target == 0 {
        return Ok(data.clone());
    }
    let present_views = |i: usize| -> Vec<usize> {
        (0..data.n_views())
            .filter(|&v| data.is_present(i, v))
            .collect()
    };
    let mut candidates: Vec<usize> = (0..n).filter(|&i| present_views(i).len() >= 2).collect();
    if candidates.len() < target {
        return Err(DataError::Protocol(format!(
            "{target} samples requested but only {} have two or more views",
            candidates.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    candidates.shuffle(&mut rng);
    let mut views: Vec<_> = data.views().to_vec();
    let mut present: Vec<Vec<bool>> = (0..data.n_views())
        .map(|v| data.present(v).to_vec())
        .collect();
    for &i in &candidates[..target] {
        let avail = present_views(i);
        let hide = rng.random_range(1..avail.len());
        for pick in index::sample(&mut rng, avail.len(), hide) {
            let v = avail[pick];
            present[v][i] = false;
            views[v].row_mut(i).iter_mut().for_each(|x| *x = 0.0);
        }
    }
    ViewSet::new(
        data.name.clone(),
        views,
        data.labels().map(<[usize]>::to_vec),
        Some(present),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;
    use proptest::prelude::*;

    fn dataset(n: usize, v: usize) -> ViewSet {
        let views = (0..v)
            .map(|j| Matrix::filled(n, 2, 1.0 + j as f64))
            .collect();
        ViewSet::new("t", views, None, None).unwrap()
    }

    #[test]
    fn zero_ratio_is_identity() {
        let d = dataset(10, 3);
        assert_eq!(
            apply_missing(
                &d,
                MissingSpec {
                    ratio: 0.0,
                    seed: 5
                }
            )
            .unwrap(),
            d
        );
    }

    #[test]
    fn half_of_hundred() {
        let out = apply_missing(
            &dataset(100, 3),
            MissingSpec {
                ratio: 0.5,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(out.incomplete_count(), 50);
        for i in 0..100 {
            assert!((0..3).any(|v| out.is_present(i, v)));
            for v in 0..3 {
                if !out.is_present(i, v) {
                    assert!(out.view(v).row(i).iter().all(|x| *x == 0.0));
                }
            }
        }
    }

    #[test]
    fn seeded_masks() {
        let d = dataset(40, 4);
        let s = MissingSpec {
            ratio: 0.3,
            seed: 9,
        };
        assert_eq!(apply_missing(&d, s).unwrap(), apply_missing(&d, s).unwrap());
    }

    #[test]
    fn single_view_is_a_protocol_error() {
        assert!(matches!(
            apply_missing(
                &dataset(5, 1),
                MissingSpec {
                    ratio: 0.5,
                    seed: 0
                }
            ),
            Err(DataError::Protocol(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn every_sample_keeps_a_view(ratio in 0.0f64..0.999, seed in any::<u64>(), v in 2usize..6, n in 1usize..40) {
            let out = apply_missing(&dataset(n, v), MissingSpec { ratio, seed }).unwrap();
            prop_assert_eq!(out.incomplete_count(), (ratio * n as f64).floor() as usize);
            for i in 0..n {
                prop_assert!((0..v).any(|j| out.is_present(i, j)));
            }
        }
    }
}
