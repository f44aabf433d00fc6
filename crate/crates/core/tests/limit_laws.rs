//! Structural properties of the limit CDFs.

use crossing_core::limits::{gumbel_cdf, LimitLaw as GenericLaw, NormalizationParams as GenericParams};
use crossing_core::LimitLaw;
use proptest::prelude::*;

fn laws() -> Vec<LimitLaw> {
    vec![
        LimitLaw::ProductGumbel,
        LimitLaw::StrongMixtureR1 { gamma: 0.7, d: 2 },
        LimitLaw::StrongMixtureRd { gamma: 1.5, d: 3 },
        LimitLaw::FullyMixed,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn joint_cdf_is_monotone_and_within_frechet_bounds(
        x in -4.0f64..4.0, y in -4.0f64..4.0, dx in 0.0f64..2.0, dy in 0.0f64..2.0,
    ) {
        for law in laws() {
            let f = law.joint_cdf(x, y).unwrap();
            prop_assert!(law.joint_cdf(x + dx, y).unwrap() >= f - 1e-7);
            prop_assert!(law.joint_cdf(x, y + dy).unwrap() >= f - 1e-7);
            let (fx, fy) = (law.marginal_cdf(x).unwrap(), law.marginal_cdf(y).unwrap());
            prop_assert!(f <= fx.min(fy) + 1e-7, "{}: {f} above upper bound", law.name());
            prop_assert!(f >= fx + fy - 1.0 - 1e-7, "{}: {f} below lower bound", law.name());
        }
    }

    #[test]
    fn joint_cdf_is_symmetric(x in -4.0f64..4.0, y in -4.0f64..4.0) {
        for law in laws() {
            let a = law.joint_cdf(x, y).unwrap();
            let b = law.joint_cdf(y, x).unwrap();
            prop_assert!((a - b).abs() < 1e-7, "{}: {a} vs {b}", law.name());
        }
    }

    #[test]
    fn strong_mixture_dominates_product(x in -3.0f64..3.0, y in -3.0f64..3.0, gamma in 0.2f64..3.0) {
        // mixing over a common factor induces positive dependence
        let law = LimitLaw::StrongMixtureR1 { gamma, d: 1 };
        let f = law.joint_cdf(x, y).unwrap();
        let product = law.marginal_cdf(x).unwrap() * law.marginal_cdf(y).unwrap();
        prop_assert!(f >= product - 1e-7);
    }
}

#[test]
fn analytic_layers_run_in_single_precision() {
    let params = GenericParams::<f32>::weak(0.01, 2, 1).unwrap();
    let x = params.normalize_time(params.u_of_x(0.5));
    assert!((x - 0.5).abs() < 1e-3);
    let law: GenericLaw<f32> = params.limit_law();
    let f = law.joint_cdf(0.5, 0.5).unwrap();
    assert!((f - gumbel_cdf(0.5f32).powi(2)).abs() < 1e-6);
    let strong = GenericLaw::<f32>::StrongMixtureR1 { gamma: 1.0, d: 2 };
    let g = strong.joint_cdf(0.0, 1.0).unwrap();
    let g64 = LimitLaw::StrongMixtureR1 { gamma: 1.0, d: 2 }.joint_cdf(0.0, 1.0).unwrap();
    assert!((f64::from(g) - g64).abs() < 1e-4);
}
