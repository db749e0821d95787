//! Closed-form oracles for every default column, quadrature balances and
//! scaling in the density.

mod common;

use common::*;
use proptest::prelude::*;

#[test]
fn every_default_column_matches_its_oracle_on_exponential() {
    let errors = operator_oracle_errors();
    assert_eq!(errors.len(), 41);
    let bad: Vec<_> = errors.iter().filter(|(_, e)| *e > QUADRATURE_TOL).collect();
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn oracle_integrals_agree_with_each_other() {
    for b in 0..4 {
        let closed = gamma_segment(b, 0.7, XJ);
        let numeric = simpson(|y| y.powi(b) * (-y).exp(), 0.7, XJ, 20_000);
        assert!((closed - numeric).abs() < 1e-12 * closed.abs().max(1.0), "b = {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CONSERVATION_CASES))]

    #[test]
    fn aggregation_conserves_mass(b in bumps(), q in kernels()) {
        check_aggregation_mass(&b, q)?;
    }

    #[test]
    fn aggregation_number_integrals(b in bumps()) {
        check_aggregation_number(&b)?;
    }

    #[test]
    fn breakage_conserves_mass(b in bumps(), k in 0i32..3, g in 0.1f64..2.0) {
        check_breakage_mass(&b, k, g)?;
    }

    #[test]
    fn columns_scale_with_the_density(b in bumps()) {
        check_bilinearity(&b, 2.0)?;
    }
}
