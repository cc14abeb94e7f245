//! Reverse-mode gradients against central differences on randomized small instances.

mod common;

use common::{check_losses, check_mlp, check_primitives, whole_model_worst_error, Worst, ACTIVATIONS, TOL};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn primitive_ops(r in 1usize..5, c in 1usize..5, k in 1usize..5, seed in any::<u64>()) {
        let mut w = Worst::default();
        check_primitives(&mut w, r, c, k, seed);
        prop_assert!(w.error < TOL, "{}: {}", w.label, w.error);
    }

    #[test]
    fn loss_terms(n in 4usize..9, dz in 1usize..5, dc in 2usize..5, seed in any::<u64>()) {
        let mut w = Worst::default();
        check_losses(&mut w, n, dz, dc, seed);
        prop_assert!(w.error < TOL, "{}: {}", w.label, w.error);
    }

    #[test]
    fn mlp_forward(widths in proptest::collection::vec(1usize..5, 2..5), act in 0usize..3, out_act in 0usize..4, seed in any::<u64>()) {
        let mut w = Worst::default();
        check_mlp(&mut w, &widths, ACTIVATIONS[act], (out_act < 3).then(|| ACTIVATIONS[out_act]), seed);
        prop_assert!(w.error < TOL, "{}: {}", w.label, w.error);
    }
}

#[test]
fn whole_model_objective() {
    for seed in 0..5u64 {
        let worst = whole_model_worst_error(seed);
        assert!(worst < TOL, "seed {seed}: worst relative error {worst}");
    }
}
