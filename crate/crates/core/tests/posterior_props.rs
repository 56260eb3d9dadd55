use proptest::prelude::*;

use vislab_core::lab::families;
use vislab_core::posterior::{
    boundary_limits, dilate, posterior_derivatives, update_failure, update_success, variance_forms,
};
use vislab_core::sign_test::visibility_partials;
use vislab_core::{Belief, LikelihoodPair, NumericSettings, OutcomeTech, PosteriorSplit, ValueFunction};

/// Bayes' rule written out directly.
fn bayes(pi: f64, like_h: f64, like_l: f64) -> f64 {
    like_h * pi / (like_h * pi + like_l * (1.0 - pi))
}

fn arm() -> impl Strategy<Value = (f64, f64)> {
    (0.02f64..0.96, 0.01f64..0.97)
        .prop_map(|(lo, gap)| (lo, (lo + gap).min(0.98)))
        .prop_filter("distinct", |(lo, hi)| hi - lo > 1e-3)
        .prop_map(|(lo, hi)| (hi, lo))
}

proptest! {
    #[test]
    fn updates_follow_bayes_rule((ph, pl) in arm(), pi in 0.001f64..0.999) {
        let lr = LikelihoodPair::from_probs(ph, pl).unwrap();
        let b = Belief::new(pi).unwrap();
        let up = update_success(b, lr).value();
        let down = update_failure(b, lr).value();
        prop_assert!((up - bayes(pi, ph, pl)).abs() < 1e-12);
        prop_assert!((down - bayes(pi, 1.0 - ph, 1.0 - pl)).abs() < 1e-12);
        prop_assert!(down < pi && pi < up);
    }

    #[test]
    fn expected_posterior_is_the_prior((ph, pl) in arm(), pi in 0.001f64..0.999) {
        let tech = OutcomeTech::new(ph, pl).unwrap();
        let s = PosteriorSplit::of_tech(Belief::new(pi).unwrap(), &tech).unwrap();
        prop_assert!(s.martingale_gap().abs() < 1e-12);
        let p = pi * ph + (1.0 - pi) * pl;
        let mean = p * bayes(pi, ph, pl) + (1.0 - p) * bayes(pi, 1.0 - ph, 1.0 - pl);
        prop_assert!((mean - pi).abs() < 1e-12);
    }

    #[test]
    fn variance_forms_agree_with_direct_variance((ph, pl) in arm(), pi in 0.001f64..0.999) {
        let tech = OutcomeTech::new(ph, pl).unwrap();
        let v = variance_forms(Belief::new(pi).unwrap(), &tech).unwrap();
        let p = pi * ph + (1.0 - pi) * pl;
        let (a, b) = (bayes(pi, ph, pl), bayes(pi, 1.0 - ph, 1.0 - pl));
        let direct = p * (a - pi).powi(2) + (1.0 - p) * (b - pi).powi(2);
        for form in [v.gap_form, v.moment_form, v.product_form, v.closed_form] {
            prop_assert!((form - direct).abs() < 1e-12, "{form} vs {direct}");
        }
    }

    #[test]
    fn sequential_updates_multiply_odds(
        (ph, pl) in arm(),
        pi in 0.01f64..0.99,
        outcomes in proptest::collection::vec(any::<bool>(), 1..12),
    ) {
        let lr = LikelihoodPair::from_probs(ph, pl).unwrap();
        let mut b = Belief::new(pi).unwrap();
        let mut log_odds = (pi / (1.0 - pi)).ln();
        for &s in &outcomes {
            b = if s { update_success(b, lr) } else { update_failure(b, lr) };
            log_odds += if s { lr.lambda.ln() } else { lr.phi.ln() };
        }
        let expected = 1.0 / (1.0 + (-log_odds).exp());
        prop_assert!((b.value() - expected).abs() < 1e-10);
    }

    #[test]
    fn posterior_slopes_match_finite_differences((ph, pl) in arm(), pi in 0.01f64..0.99) {
        let h = 1e-6;
        let d = posterior_derivatives(Belief::interior(pi).unwrap(), LikelihoodPair::from_probs(ph, pl).unwrap()).unwrap();
        let fd = |f: &dyn Fn(f64) -> f64| (f(pi + h) - f(pi - h)) / (2.0 * h);
        let plus = fd(&|x| bayes(x, ph, pl));
        let minus = fd(&|x| bayes(x, 1.0 - ph, 1.0 - pl));
        prop_assert!((d.dpi_plus - plus).abs() < 1e-6 * plus.abs().max(1.0));
        prop_assert!((d.dpi_minus - minus).abs() < 1e-6 * minus.abs().max(1.0));
        let curv = |like_h: f64, like_l: f64| {
            (bayes(pi + h * 100.0, like_h, like_l) - 2.0 * bayes(pi, like_h, like_l) + bayes(pi - h * 100.0, like_h, like_l))
                / (1e-4 * 1e-4)
        };
        let c = curv(ph, pl);
        prop_assert!((d.d2pi_plus - c).abs() < 1e-3 * c.abs().max(1.0), "{} vs {c}", d.d2pi_plus);
    }

    #[test]
    fn boundary_slopes_are_the_ratios((ph, pl) in arm()) {
        let lr = LikelihoodPair::from_probs(ph, pl).unwrap();
        let b = boundary_limits(lr);
        prop_assert!((b.dpi_plus_at0 - ph / pl).abs() < 1e-12 * (ph / pl));
        prop_assert!((b.dpi_plus_at1 - pl / ph).abs() < 1e-12);
        prop_assert!((b.dpi_minus_at0 - (1.0 - ph) / (1.0 - pl)).abs() < 1e-12);
        prop_assert!((b.dpi_minus_at1 - (1.0 - pl) / (1.0 - ph)).abs() < 1e-12 * (1.0 - pl) / (1.0 - ph));
    }

    #[test]
    fn dilation_interpolates_to_uninformative((ph, pl) in arm(), tau in 0.0f64..=1.0, pi in 0.01f64..0.99) {
        let lr = LikelihoodPair::from_probs(ph, pl).unwrap();
        prop_assert_eq!(dilate(lr, 1.0).unwrap(), lr);
        prop_assert!(dilate(lr, 0.0).unwrap().is_uninformative());
        let b = Belief::new(pi).unwrap();
        let jump = |t: f64| update_success(b, dilate(lr, t).unwrap()).value() - pi;
        prop_assert!(jump(tau) <= jump(1.0) + 1e-15);
        prop_assert!(jump(tau) >= -1e-15);
    }

    #[test]
    fn linear_value_reform_band((ph, pl) in arm(), pi in 0.01f64..0.99) {
        // With V(x) = x the failure-visibility partial lies between the
        // failure probabilities of the two types.
        let mut s = families::band()[0].clone();
        s.risky = vislab_core::Arm::new(ph, pl).unwrap();
        s.value = ValueFunction::identity();
        let p = visibility_partials(Belief::interior(pi).unwrap(), &s).unwrap();
        prop_assert!(p.d_dsigma0 >= 1.0 - ph - 1e-9 && p.d_dsigma0 <= 1.0 - pl + 1e-9, "{}", p.d_dsigma0);
        prop_assert!(p.d_dsigma1 >= pl - 1e-9 && p.d_dsigma1 <= ph + 1e-9, "{}", p.d_dsigma1);
    }

    #[test]
    fn no_conservatism_under_linear_symmetric_visibility(
        (ph, pl) in arm(),
        sigma in 0.05f64..=1.0,
        pi in 0.01f64..0.99,
    ) {
        let s = families::symmetric(ph, pl, sigma, ValueFunction::Linear { a: 0.3, b: 2.0 }).unwrap();
        let b = Belief::interior(pi).unwrap();
        prop_assert!(s.delta(b).unwrap().abs() < 1e-12);
        prop_assert!(s.delta_prime_exact(b, &NumericSettings::default()).unwrap().abs() < 1e-12);
    }
}
