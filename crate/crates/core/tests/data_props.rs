use mvdis::autodiff::Matrix;
use mvdis::data::{
    apply_missing, generate_synthetic, load_viewset, normalize, save_viewset, MissingSpec, NormalizeMode,
    SyntheticSpec, ViewSet,
};
use proptest::prelude::*;

fn viewset(n: usize, dims: &[usize], values: &[f64]) -> ViewSet {
    let mut it = values.iter().cycle().copied();
    let views = dims
        .iter()
        .map(|&d| Matrix::new(n, d, (0..n * d).map(|_| it.next().unwrap()).collect()).unwrap())
        .collect();
    let labels = (0..n).map(|i| i % 2).collect();
    ViewSet::new("prop", views, Some(labels), None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        n in 2usize..12,
        dims in proptest::collection::vec(1usize..5, 1..4),
        values in proptest::collection::vec(-1e6f64..1e6, 1..40),
        ratio in 0.0f64..0.6,
        seed in any::<u64>(),
    ) {
        let mut data = viewset(n, &dims, &values);
        if dims.len() > 1 && ratio > 0.0 {
            data = match apply_missing(&data, MissingSpec { ratio, seed }) {
                Ok(d) => d,
                Err(_) => data,
            };
        }
        let dir = tempfile::tempdir().unwrap();
        save_viewset(&data, dir.path()).unwrap();
        let back = load_viewset(dir.path()).unwrap();
        prop_assert_eq!(back.views(), data.views());
        prop_assert_eq!(back.labels(), data.labels());
        for v in 0..data.n_views() {
            prop_assert_eq!(back.present(v), data.present(v));
        }
    }

    #[test]
    fn minmax_is_idempotent_and_bounded(
        n in 2usize..20,
        dims in proptest::collection::vec(1usize..5, 1..4),
        values in proptest::collection::vec(-50.0f64..50.0, 1..60),
    ) {
        let data = viewset(n, &dims, &values);
        let once = normalize(&data, NormalizeMode::MinMax);
        let twice = normalize(&once, NormalizeMode::MinMax);
        for (a, b) in once.views().iter().zip(twice.views()) {
            prop_assert!(a.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zscore_columns_are_standardized(
        n in 3usize..20,
        values in proptest::collection::vec(-50.0f64..50.0, 3..60),
    ) {
        let data = viewset(n, &[3], &values);
        let z = normalize(&data, NormalizeMode::ZScore);
        let m = z.view(0);
        for c in 0..m.cols() {
            let col: Vec<f64> = (0..n).map(|r| m.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-9);
            let var = col.iter().map(|x| x * x).sum::<f64>() / n as f64;
            prop_assert!(var < 1e-18 || (var - 1.0).abs() < 1e-9, "variance {}", var);
        }
    }
}

#[test]
fn synthetic_generation_is_seeded_and_balanced() {
    let spec = SyntheticSpec { samples: 2000, ..SyntheticSpec::default() };
    let a = generate_synthetic(&spec, 7);
    assert_eq!(a, generate_synthetic(&spec, 7));
    assert_ne!(a.views(), generate_synthetic(&spec, 8).views());
    let mut counts = [0usize; 3];
    for &l in a.labels().unwrap() {
        counts[l] += 1;
    }
    assert_eq!(counts, [667, 667, 666]);
}
