use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use l0bnb::io::{format_instance, parse_instance, Metadata};
use l0bnb::{Error, Instance};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3..1e3f64,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 3.0),
    ]
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(finite(), m * n),
            prop::collection::vec(finite(), m),
            1e-9..1e6f64,
            1e-6..1e6f64,
        )
            .prop_map(move |(a, y, lambda, big_m)| {
                Instance::new(DMatrix::from_vec(m, n, a), DVector::from_vec(y), lambda, big_m).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn format_then_parse_is_bit_exact(inst in instance(), key in "[a-z_]{1,8}", value in "[ -~]{0,20}") {
        let mut meta = Metadata::new();
        meta.insert(key, value);
        let text = format_instance(&inst, &meta).unwrap();
        let (back, back_meta) = parse_instance(&text).unwrap();
        let bits = |s: &[f64]| s.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(inst.a().as_slice()), bits(back.a().as_slice()));
        prop_assert_eq!(bits(inst.y().as_slice()), bits(back.y().as_slice()));
        prop_assert_eq!(inst.lambda().to_bits(), back.lambda().to_bits());
        prop_assert_eq!(inst.big_m().to_bits(), back.big_m().to_bits());
        prop_assert_eq!(meta, back_meta);
    }

    #[test]
    fn garbage_is_rejected_with_a_location(text in "[0-9a-z .\\-#=\n]{0,200}") {
        match parse_instance(&text) {
            Ok(_) => {}
            Err(Error::Parse { line, column, .. }) => {
                prop_assert!(line >= 1 && column >= 1);
                prop_assert!(line <= text.lines().count() + 1);
            }
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }
}
