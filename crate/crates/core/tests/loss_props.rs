use mvdis::autodiff::Matrix;
use mvdis::losses::{loss_cor, loss_ent, loss_rec, similarity_m};
use proptest::prelude::*;

fn mat(rows: usize, cols: usize, values: &[f64]) -> Matrix {
    let mut it = values.iter().cycle().copied();
    Matrix::new(rows, cols, (0..rows * cols).map(|_| it.next().unwrap()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn similarity_stays_between_inverse_e_and_e(
        a in proptest::collection::vec(-10.0f64..10.0, 1..8),
        b in proptest::collection::vec(-10.0f64..10.0, 1..8),
    ) {
        let d = a.len().min(b.len());
        let (a, b) = (&a[..d], &b[..d]);
        prop_assume!(a.iter().any(|x| x.abs() > 1e-6) && b.iter().any(|x| x.abs() > 1e-6));
        let m = similarity_m(a, b).unwrap();
        let e = std::f64::consts::E;
        prop_assert!((1.0 / e..=e).contains(&m), "{}", m);
        prop_assert!((similarity_m(a, a).unwrap() - e).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        prop_assert!((similarity_m(a, &neg).unwrap() - 1.0 / e).abs() < 1e-12);
    }

    #[test]
    fn cor_ignores_per_sample_shifts_of_c(
        n in 1usize..6,
        dz in 1usize..4,
        dc in 1usize..5,
        values in proptest::collection::vec(-5.0f64..5.0, 4..30),
        shifts in proptest::collection::vec(-20.0f64..20.0, 6),
    ) {
        let z = mat(n, dz, &values);
        let c = mat(n, dc, &values[1..]);
        let mut shifted = c.clone();
        for r in 0..n {
            for x in shifted.row_mut(r) {
                *x += shifts[r];
            }
        }
        let a = loss_cor(&z, &c).unwrap();
        let b = loss_cor(&z, &shifted).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn rec_is_nonnegative_and_zero_on_identity(
        n in 1usize..6,
        d in 1usize..4,
        values in proptest::collection::vec(-5.0f64..5.0, 2..30),
    ) {
        let x = mat(n, d, &values);
        let y = mat(n, d, &values[1..]);
        prop_assert_eq!(loss_rec(&x, &x, None).unwrap(), 0.0);
        prop_assert!(loss_rec(&x, &y, None).unwrap() >= 0.0);
    }

    #[test]
    fn ent_is_invariant_to_row_scaling(
        values in proptest::collection::vec(0.1f64..5.0, 12),
        scales in proptest::collection::vec(0.1f64..10.0, 6),
    ) {
        let q = mat(6, 2, &values);
        let mut scaled = q.clone();
        for r in 0..6 {
            for x in scaled.row_mut(r) {
                *x *= scales[r];
            }
        }
        let positives: Vec<Vec<usize>> = (0..6).map(|i| vec![(i + 1) % 6]).collect();
        let a = loss_ent(&q, &positives).unwrap();
        let b = loss_ent(&scaled, &positives).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}
