//! Moment behaviour of the Fixed Pivot solver on random smooth densities.

mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CONSERVATION_CASES))]

    #[test]
    fn aggregation_keeps_mass_and_loses_number(b in bumps(), q in mild_kernels()) {
        check_pivot_aggregation(&b, q)?;
    }

    #[test]
    fn breakage_keeps_mass_and_gains_number(b in bumps(), k in 0i32..3, g in 0.1f64..2.0) {
        check_pivot_breakage(&b, k, g)?;
    }
}
