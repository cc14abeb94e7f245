use super::*;
use proptest::prelude::*;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force_accuracy(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|(p, t)| perm[**p] == **t).count())
        .max()
        .unwrap() as f64
        * 100.0
        / pred.len() as f64
}

#[test]
fn accuracy_examples() {
    assert_eq!(hungarian_accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 100.0);
    assert_eq!(hungarian_accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 100.0);
    assert!(hungarian_accuracy(&[0], &[0, 1]).is_err());
    // more predicted clusters than classes
    assert_eq!(hungarian_accuracy(&[0, 1, 2, 2], &[0, 0, 1, 1]).unwrap(), 75.0);
}

#[test]
fn accuracy_matches_permutations_k4() {
    let pred = [0, 1, 2, 3, 0, 1, 2, 3, 3, 2, 1, 0];
    let truth = [1, 1, 0, 2, 3, 0, 0, 2, 3, 3, 1, 1];
    assert_eq!(hungarian_accuracy(&pred, &truth).unwrap(), brute_force_accuracy(&pred, &truth, 4));
}

#[test]
fn nmi_examples() {
    assert_eq!(nmi(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]).unwrap(), 100.0);
    let pred: Vec<usize> = (0..16).map(|i| i / 4).collect();
    let truth: Vec<usize> = (0..16).map(|i| i % 4).collect();
    assert!(nmi(&pred, &truth).unwrap().abs() < 1e-12);
    // pred [0,0,1,1], truth [0,1,1,1]: H(p)=ln2, H(t)=-(1/4 ln 1/4 + 3/4 ln 3/4),
    // I = H(t) - H(t|p) = H(t) - (1/2) ln 2
    let ht = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
    let expected = 100.0 * (ht - 0.5 * 2f64.ln()) / (2f64.ln() * ht).sqrt();
    assert!((nmi(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap() - expected).abs() < 1e-10);
    assert_eq!(nmi(&[0, 0, 0], &[0, 0, 0]).unwrap(), 100.0);
    assert_eq!(nmi(&[0, 0, 0], &[0, 1, 0]).unwrap(), 0.0);
}

#[test]
fn purity_examples() {
    assert_eq!(purity(&[0, 1, 1], &[0, 1, 1]).unwrap(), 100.0);
    assert_eq!(purity(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 50.0);
    assert_eq!(purity(&[0, 0, 0, 1], &[0, 1, 0, 1]).unwrap(), 75.0);
    assert!(purity(&[0], &[]).is_err());
}

#[test]
fn assignment_solver_small() {
    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    let a = min_cost_assignment(&cost);
    let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    assert_eq!(total, 5.0);
}

#[test]
fn kmeans_single_cluster_is_column_mean() {
    let pts = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, -1.0]]);
    let out = kmeans(&pts, 1, 0, 300, 3).unwrap();
    assert_eq!(out.assignments, vec![0, 0, 0]);
    assert_eq!(out.centroids.as_slice(), &[2.0, 1.0]);
}

#[test]
fn kmeans_matches_exhaustive_two_partition() {
    let pts = Matrix::from_rows(&[
        [0.0, 0.0],
        [0.3, 0.1],
        [-0.2, 0.25],
        [0.1, -0.3],
        [10.0, 10.0],
        [10.2, 9.8],
        [9.7, 10.1],
        [10.1, 10.3],
    ]);
    let out = kmeans(&pts, 2, 42, 300, 10).unwrap();
    let blob: Vec<usize> = (0..8).map(|i| i / 4).collect();
    assert_eq!(hungarian_accuracy(&out.assignments, &blob).unwrap(), 100.0);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << 8) - 1 {
        let mut cost = 0.0;
        for side in [true, false] {
            let idx: Vec<usize> = (0..8).filter(|i| (mask >> i & 1 == 1) == side).collect();
            let sub = pts.select_rows(&idx);
            let mean: Vec<f64> = (0..2).map(|c| (0..idx.len()).map(|r| sub.get(r, c)).sum::<f64>() / idx.len() as f64).collect();
            cost += (0..idx.len()).map(|r| sub.row(r).iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>();
        }
        best = best.min(cost);
    }
    assert!((out.inertia - best).abs() < 1e-9, "{} vs {best}", out.inertia);
}

#[test]
fn kmeans_duplicates_share_clusters() {
    let pts = Matrix::from_rows(&[[0.0], [0.0], [5.0], [5.0], [9.0], [9.0], [1.0], [1.0]]);
    let out = kmeans(&pts, 3, 7, 300, 5).unwrap();
    for i in (0..8).step_by(2) {
        assert_eq!(out.assignments[i], out.assignments[i + 1]);
    }
    assert!(matches!(kmeans(&pts, 9, 0, 10, 1), Err(MetricsError::TooManyClusters { .. })));
    assert!(matches!(kmeans(&pts, 0, 0, 10, 1), Err(MetricsError::NoClusters)));
}

#[test]
fn kmeans_reseeds_empty_clusters() {
    // only two distinct locations, so some restart must handle an empty cluster
    let pts = Matrix::from_rows(&[[0.0], [0.0], [0.0], [1.0]]);
    let out = kmeans(&pts, 3, 1, 50, 4).unwrap();
    assert!(out.assignments.iter().all(|&a| a < 3));
    assert_eq!(out.inertia, 0.0);
}

fn labels(k: usize, n: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..k, n)
}

/// Relabels to dense ids in order of first appearance.
fn densify(l: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    l.iter()
        .map(|x| {
            let next = map.len();
            *map.entry(*x).or_insert(next)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn accuracy_equals_brute_force(
        (pred, truth) in (1usize..=6, 1usize..60).prop_flat_map(|(k, n)| (labels(k, n), labels(k, n)))
    ) {
        let (pred, truth) = (densify(&pred), densify(&truth));
        let kk = pred.iter().chain(&truth).max().unwrap() + 1;
        let acc = hungarian_accuracy(&pred, &truth).unwrap();
        prop_assert!((acc - brute_force_accuracy(&pred, &truth, kk)).abs() < 1e-9);
        let pur = purity(&pred, &truth).unwrap();
        prop_assert!(pur + 1e-9 >= acc);
        let a = nmi(&pred, &truth).unwrap();
        let b = nmi(&truth, &pred).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&a));
        prop_assert!((0.0..=100.0).contains(&acc) && (0.0..=100.0).contains(&pur));
    }

    #[test]
    fn accuracy_ignores_relabeling(pred in labels(4, 30), truth in labels(4, 30), shift in 0usize..4) {
        let (pred, truth) = (densify(&pred), densify(&truth));
        let kp = pred.iter().max().unwrap() + 1;
        let kt = truth.iter().max().unwrap() + 1;
        let p2: Vec<usize> = pred.iter().map(|x| (x + shift) % kp).collect();
        let t2: Vec<usize> = truth.iter().map(|x| (kt - 1) - x).collect();
        let base = hungarian_accuracy(&pred, &truth).unwrap();
        prop_assert_eq!(base, hungarian_accuracy(&p2, &t2).unwrap());
    }

    #[test]
    fn inertia_never_increases(raw in proptest::collection::vec(-5.0f64..5.0, 20..80), k in 1usize..5, seed in any::<u64>()) {
        let pts = Matrix::new(raw.len() / 2, 2, raw[..raw.len() / 2 * 2].to_vec()).unwrap();
        let out = kmeans(&pts, k, seed, 300, 1).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert!(out.assignments.iter().all(|&a| a < k));
    }
}
