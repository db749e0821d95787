//! Invariants of sequential thresholded least squares on random systems.

mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(STLS_CASES))]

    #[test]
    fn surviving_coefficients_reach_lambda(s in systems()) {
        check_stls_bound(&s)?;
    }

    #[test]
    fn rerun_on_support_is_idempotent(s in systems()) {
        check_stls_idempotent(&s)?;
    }

    #[test]
    fn zero_lambda_is_least_squares(s in systems()) {
        check_stls_zero_lambda(&s)?;
    }

    #[test]
    fn support_only_shrinks(s in systems()) {
        check_stls_monotone(&s)?;
    }
}
