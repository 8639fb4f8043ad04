mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn forward_propagation_is_sound_and_resumable(seed in any::<u64>()) {
        common::check_propagation(seed).map_err(TestCaseError::fail)?;
    }
}
