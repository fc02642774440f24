//! Brute-force cross-checks of shape propagation and accounting on small
//! random architectures.

#[path = "support/oracle.rs"]
mod support;

use dse_core::arch::{analyze, AnalysisConfig, Architecture, LayerOp, LayerSpec, TensorShape};
use proptest::prelude::*;
use support::{arch_strategy, slide};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn accounting_matches_enumeration((batch, built) in arch_strategy()) {
        let report = analyze(&built.arch, &AnalysisConfig::new(batch)).unwrap();
        for (row, shape) in report.rows.iter().zip(&built.shapes) {
            let got = row.output_shape;
            prop_assert_eq!(
                (got.batch, got.channels, got.height, got.width),
                (shape.b, shape.c, shape.h, shape.w),
                "layer {}", row.name
            );
        }
        prop_assert_eq!(report.totals.param_bytes, built.counts.params * 4);
        prop_assert_eq!(report.totals.forward_flops, built.counts.flops);
        prop_assert_eq!(report.totals.activation_bytes, built.counts.activations);
    }

    #[test]
    fn totals_are_row_sums((batch, built) in arch_strategy()) {
        let r = analyze(&built.arch, &AnalysisConfig::new(batch)).unwrap();
        let params: u128 = r.rows.iter().map(|x| x.param_bytes).sum();
        let flops: u128 = r.rows.iter().map(|x| x.forward_flops).sum();
        let acts: u128 = r.rows.iter().filter(|x| x.in_totals).map(|x| x.activation_bytes).sum();
        prop_assert_eq!(r.totals.param_bytes, params);
        prop_assert_eq!(r.totals.forward_flops, flops);
        prop_assert_eq!(r.totals.activation_bytes, acts);
        prop_assert_eq!(r.train_flops_per_batch, 3 * r.totals.forward_flops);
    }

    #[test]
    fn linear_in_batch((_, built) in arch_strategy(), k in 2u64..=64) {
        let one = analyze(&built.arch, &AnalysisConfig::new(1)).unwrap();
        let many = analyze(&built.arch, &AnalysisConfig::new(k)).unwrap();
        prop_assert_eq!(many.totals.param_bytes, one.totals.param_bytes);
        prop_assert_eq!(many.totals.forward_flops, one.totals.forward_flops * k as u128);
        prop_assert_eq!(many.totals.activation_bytes, one.totals.activation_bytes * k as u128);
        let again = analyze(&built.arch, &AnalysisConfig::new(k)).unwrap();
        prop_assert_eq!(many, again);
    }

    #[test]
    fn same_padding_preserves_spatial_size(
        half in 0u64..=3, hw in 1u64..=64, c in 1u64..=16, f in 1u64..=16,
    ) {
        let filter = 2 * half + 1;
        let arch = Architecture::new(
            "same",
            TensorShape::new(1, c, hw, hw).unwrap(),
            vec![LayerSpec::input("data"), LayerSpec::conv("c", "data", f, filter, 1, half)],
        );
        let r = analyze(&arch, &AnalysisConfig::new(1)).unwrap();
        let out = r.rows[1].output_shape;
        prop_assert_eq!((out.height, out.width), (hw, hw));
    }

    #[test]
    fn concat_branch_order_does_not_change_totals(
        hw in 1u64..=8, a in 1u64..=8, b in 1u64..=8,
    ) {
        let make = |order: [&str; 2]| {
            Architecture::new(
                "branches",
                TensorShape::new(1, 3, hw, hw).unwrap(),
                vec![
                    LayerSpec::input("data"),
                    LayerSpec::conv("a", "data", a, 1, 1, 0),
                    LayerSpec::conv("b", "data", b, 1, 1, 0),
                    LayerSpec::new("cat", LayerOp::Concat, &order),
                    LayerSpec::conv("after", "cat", 4, 1, 1, 0),
                ],
            )
        };
        let x = analyze(&make(["a", "b"]), &AnalysisConfig::new(2)).unwrap();
        let y = analyze(&make(["b", "a"]), &AnalysisConfig::new(2)).unwrap();
        prop_assert_eq!(x.totals, y.totals);
    }
}

#[test]
fn slide_reference_matches_known_cases() {
    assert_eq!(slide(50, 0, 3, 2, true), Some(25));
    assert_eq!(slide(50, 0, 3, 2, false), Some(24));
    assert_eq!(slide(55, 0, 3, 2, true), Some(27));
    assert_eq!(slide(13, 0, 3, 2, true), Some(6));
    assert_eq!(slide(454, 0, 11, 4, false), Some(111));
    assert_eq!(slide(2, 0, 3, 1, false), None);
}
