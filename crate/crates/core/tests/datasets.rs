use cgd::dataset::{GroupDataset, SplitKind};
use cgd::synth::Setting;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), which in 0usize..3, ratio in prop::option::of(1.0..2000.0f64)) {
        let setting = Setting::ALL[which];
        let ds = setting.generate(seed, ratio).unwrap();
        let text = ds.to_csv_string();
        let back = GroupDataset::from_csv_str(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), which in 0usize..3) {
        let setting = Setting::ALL[which];
        prop_assert_eq!(setting.generate(seed, None).unwrap(), setting.generate(seed, None).unwrap());
    }
}

#[test]
fn evaluation_splits_are_balanced() {
    for setting in Setting::ALL {
        let ds = setting.generate(3, None).unwrap();
        for kind in [SplitKind::Val, SplitKind::Test] {
            let counts = ds.split(kind).counts();
            assert!(
                counts.iter().all(|&n| n == counts[0]),
                "{setting} {kind:?}: {counts:?}"
            );
        }
        assert_eq!(ds.group_counts(), ds.train.counts());
    }
}

#[test]
fn different_seeds_differ() {
    let a = Setting::RotationSimple.generate(0, None).unwrap();
    let b = Setting::RotationSimple.generate(1, None).unwrap();
    assert_ne!(a, b);
}
