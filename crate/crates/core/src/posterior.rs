//! Closed-form Bayesian updating for a two-type, two-outcome experiment.
//!
//! Beliefs are the probability that the expert is the high type. A success
//! multiplies the odds by `lambda = p_H / p_L`, a failure by
//! `phi = (1 - p_H) / (1 - p_L)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OutcomeTech;

/// A public belief in `[0, 1]`.
///
/// Construction accepts the closed interval; operations that divide by
/// `pi (1 - pi)` check for the open interval themselves.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Belief(f64);

impl Belief {
    pub fn new(pi: f64) -> Result<Self> {
        if pi.is_finite() && (0.0..=1.0).contains(&pi) {
            Ok(Belief(pi))
        } else {
            Err(Error::domain("pi", pi, "[0, 1]"))
        }
    }

    /// A belief strictly inside `(0, 1)`.
    pub fn interior(pi: f64) -> Result<Self> {
        let b = Self::new(pi)?;
        b.require_interior()?;
        Ok(b)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_interior(self) -> bool {
        self.0 > 0.0 && self.0 < 1.0
    }

    pub fn require_interior(self) -> Result<f64> {
        if self.is_interior() {
            Ok(self.0)
        } else {
            Err(Error::domain("pi", self.0, "(0, 1)"))
        }
    }

    /// Odds `pi / (1 - pi)`.
    pub fn odds(self) -> Result<f64> {
        let pi = self.require_interior()?;
        Ok(pi / (1.0 - pi))
    }

    pub fn log_odds(self) -> Result<f64> {
        Ok(self.odds()?.ln())
    }
}

impl TryFrom<f64> for Belief {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Belief::new(value)
    }
}

impl From<Belief> for f64 {
    fn from(b: Belief) -> f64 {
        b.0
    }
}

/// Success and failure likelihood ratios of an arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodPair {
    pub lambda: f64,
    pub phi: f64,
}

impl LikelihoodPair {
    pub fn new(lambda: f64, phi: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain("lambda", lambda, "(0, inf)"));
        }
        if !(phi.is_finite() && phi > 0.0) {
            return Err(Error::domain("phi", phi, "(0, inf)"));
        }
        Ok(Self { lambda, phi })
    }

    pub fn uninformative() -> Self {
        Self { lambda: 1.0, phi: 1.0 }
    }

    /// Ratios implied by success probabilities `p_high` (type H) and `p_low`.
    pub fn from_probs(p_high: f64, p_low: f64) -> Result<Self> {
        for (what, p) in [("p_high", p_high), ("p_low", p_low)] {
            if !(p.is_finite() && p > 0.0 && p < 1.0) {
                return Err(Error::domain(what, p, "(0, 1)"));
            }
        }
        Self::new(p_high / p_low, (1.0 - p_high) / (1.0 - p_low))
    }

    pub fn is_uninformative(&self) -> bool {
        self.lambda == 1.0 && self.phi == 1.0
    }

    /// `D_lambda(pi) = 1 - pi + lambda pi`.
    pub fn d_lambda(&self, pi: f64) -> f64 {
        1.0 - pi + self.lambda * pi
    }

    /// `D_phi(pi) = 1 - pi + phi pi`.
    pub fn d_phi(&self, pi: f64) -> f64 {
        1.0 - pi + self.phi * pi
    }
}

/// Posteriors after a recorded success or failure, with the success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSplit {
    pub prior: f64,
    pub pi_plus: f64,
    pub pi_minus: f64,
    pub p_success: f64,
}

impl PosteriorSplit {
    /// Split at `pi` with ratios `lr` and success probability `p_success`.
    pub fn new(pi: Belief, lr: LikelihoodPair, p_success: f64) -> Self {
        let prior = pi.value();
        Self {
            prior,
            pi_plus: odds_update(prior, lr.lambda),
            pi_minus: odds_update(prior, lr.phi),
            p_success,
        }
    }

    /// Split of an outcome technology at its own mixture probability.
    pub fn of_tech(pi: Belief, tech: &OutcomeTech) -> Result<Self> {
        let lr = tech.likelihoods()?;
        Ok(Self::new(pi, lr, tech.mixture(pi.value())))
    }

    /// `pi_plus - pi`.
    pub fn jump_plus(&self) -> f64 {
        self.pi_plus - self.prior
    }

    /// `pi - pi_minus`.
    pub fn jump_minus(&self) -> f64 {
        self.prior - self.pi_minus
    }

    /// Violation of `p (pi_plus - pi) = (1 - p)(pi - pi_minus)`.
    pub fn martingale_gap(&self) -> f64 {
        self.p_success * self.jump_plus() - (1.0 - self.p_success) * self.jump_minus()
    }
}

fn odds_update(pi: f64, ratio: f64) -> f64 {
    if pi == 0.0 || pi == 1.0 {
        return pi;
    }
    ratio * pi / (1.0 - pi + ratio * pi)
}

/// Posterior after a recorded success. The endpoints are fixed points.
pub fn update_success(pi: Belief, lr: LikelihoodPair) -> Belief {
    Belief(odds_update(pi.value(), lr.lambda))
}

/// Posterior after a recorded failure. The endpoints are fixed points.
pub fn update_failure(pi: Belief, lr: LikelihoodPair) -> Belief {
    Belief(odds_update(pi.value(), lr.phi))
}

/// First and second derivatives of the posterior maps in the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDerivatives {
    pub dpi_plus: f64,
    pub dpi_minus: f64,
    pub d2pi_plus: f64,
    pub d2pi_minus: f64,
}

pub fn posterior_derivatives(pi: Belief, lr: LikelihoodPair) -> Result<PosteriorDerivatives> {
    let pi = pi.require_interior()?;
    let (l, f) = (lr.lambda, lr.phi);
    let dl = lr.d_lambda(pi);
    let df = lr.d_phi(pi);
    Ok(PosteriorDerivatives {
        dpi_plus: l / (dl * dl),
        dpi_minus: f / (df * df),
        d2pi_plus: -2.0 * l * (l - 1.0) / (dl * dl * dl),
        d2pi_minus: -2.0 * f * (f - 1.0) / (df * df * df),
    })
}

/// The three closed forms of the posterior variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceForms {
    /// `p (1 - p) (pi_plus - pi_minus)^2`
    pub gap_form: f64,
    /// `p jump_plus^2 + (1 - p) jump_minus^2`
    pub moment_form: f64,
    /// `jump_plus * jump_minus`
    pub product_form: f64,
    /// `(lambda - 1)(1 - phi) [pi (1 - pi)]^2 / (D_lambda D_phi)`
    pub closed_form: f64,
}

impl VarianceForms {
    pub fn max_disagreement(&self) -> f64 {
        let v = [self.gap_form, self.moment_form, self.product_form, self.closed_form];
        let mut worst: f64 = 0.0;
        for a in v {
            for b in v {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// All variance forms at `pi` without checking them against each other.
pub fn variance_forms(pi: Belief, tech: &OutcomeTech) -> Result<VarianceForms> {
    let x = pi.require_interior()?;
    let lr = tech.likelihoods()?;
    let s = PosteriorSplit::of_tech(pi, tech)?;
    let p = s.p_success;
    let gap = s.pi_plus - s.pi_minus;
    let v = x * (1.0 - x);
    Ok(VarianceForms {
        gap_form: p * (1.0 - p) * gap * gap,
        moment_form: p * s.jump_plus().powi(2) + (1.0 - p) * s.jump_minus().powi(2),
        product_form: s.jump_plus() * s.jump_minus(),
        closed_form: (lr.lambda - 1.0) * (1.0 - lr.phi) * v * v / (lr.d_lambda(x) * lr.d_phi(x)),
    })
}

/// Variance of the public posterior across the two outcomes.
///
/// Fails with [`Error::Consistency`] if the closed forms disagree by more than
/// `tol`.
pub fn posterior_variance(pi: Belief, tech: &OutcomeTech, tol: f64) -> Result<f64> {
    let forms = variance_forms(pi, tech)?;
    let worst = forms.max_disagreement();
    if worst > tol {
        return Err(Error::Consistency(format!(
            "posterior variance forms disagree by {worst:e} at pi = {}",
            pi.value()
        )));
    }
    Ok(forms.moment_form)
}

/// `pi_plus - pi_minus` from its closed form.
pub fn posterior_gap(pi: Belief, lr: LikelihoodPair) -> Result<f64> {
    let x = pi.require_interior()?;
    Ok((lr.lambda - lr.phi) * x * (1.0 - x) / (lr.d_lambda(x) * lr.d_phi(x)))
}

/// Sensitivity of posteriors and jumps to the likelihood ratios.
///
/// Note `djumpminus_dphi` is negative: a larger `phi` makes failures less
/// informative and shrinks the downward jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformativenessPartials {
    pub dpiplus_dlambda: f64,
    pub dpiminus_dphi: f64,
    pub djumpplus_dlambda: f64,
    pub djumpminus_dphi: f64,
}

/// Partials in `lambda` and `phi`. At `pi` in {0, 1} every partial is zero.
pub fn informativeness_partials(pi: Belief, lr: LikelihoodPair) -> InformativenessPartials {
    let x = pi.value();
    let v = x * (1.0 - x);
    let dl = lr.d_lambda(x);
    let df = lr.d_phi(x);
    let up = v / (dl * dl);
    let down = v / (df * df);
    InformativenessPartials {
        dpiplus_dlambda: up,
        dpiminus_dphi: down,
        djumpplus_dlambda: up,
        djumpminus_dphi: -down,
    }
}

/// Shrink an experiment toward uninformativeness: `lambda(tau) = 1 + tau (lambda - 1)`,
/// `phi(tau) = 1 - tau (1 - phi)`.
pub fn dilate(lr: LikelihoodPair, tau: f64) -> Result<LikelihoodPair> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::domain("tau", tau, "[0, 1]"));
    }
    if tau == 1.0 {
        return Ok(lr);
    }
    LikelihoodPair::new(1.0 + tau * (lr.lambda - 1.0), 1.0 - tau * (1.0 - lr.phi))
}

/// Limits of the posterior-map slopes at the boundaries of the belief space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLimits {
    pub dpi_plus_at0: f64,
    pub dpi_minus_at0: f64,
    pub dpi_plus_at1: f64,
    pub dpi_minus_at1: f64,
}

pub fn boundary_limits(lr: LikelihoodPair) -> BoundaryLimits {
    BoundaryLimits {
        dpi_plus_at0: lr.lambda,
        dpi_minus_at0: lr.phi,
        dpi_plus_at1: 1.0 / lr.lambda,
        dpi_minus_at1: 1.0 / lr.phi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64) -> Belief {
        Belief::interior(x).unwrap()
    }

    /// Bayes' rule on the joint table of (type, outcome).
    fn bayes(prior: f64, p_h: f64, p_l: f64, success: bool) -> f64 {
        let (lh, ll) = if success { (p_h, p_l) } else { (1.0 - p_h, 1.0 - p_l) };
        prior * lh / (prior * lh + (1.0 - prior) * ll)
    }

    #[test]
    fn success_update_matches_bayes_table() {
        let lr = LikelihoodPair::from_probs(0.8, 0.4).unwrap();
        let post = update_success(b(0.5), lr).value();
        assert!((post - bayes(0.5, 0.8, 0.4, true)).abs() < 1e-15);
        assert!((post - 2.0 / 3.0).abs() < 1e-15);
        assert!((post - 0.5 - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn failure_update_matches_bayes_table() {
        let lr = LikelihoodPair::from_probs(0.8, 0.4).unwrap();
        assert!((lr.phi - 1.0 / 3.0).abs() < 1e-15);
        let post = update_failure(b(0.5), lr).value();
        assert!((post - bayes(0.5, 0.8, 0.4, false)).abs() < 1e-15);
        assert!((post - 0.25).abs() < 1e-15);
    }

    #[test]
    fn uninformative_is_identity() {
        let lr = LikelihoodPair::uninformative();
        assert_eq!(update_success(b(0.3), lr).value(), 0.3);
        assert_eq!(update_failure(b(0.3), lr).value(), 0.3);
        let d = posterior_derivatives(b(0.3), lr).unwrap();
        assert_eq!(
            (d.dpi_plus, d.dpi_minus, d.d2pi_plus, d.d2pi_minus),
            (1.0, 1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn endpoints_are_fixed_points() {
        let lr = LikelihoodPair::new(2.0, 1.0 / 3.0).unwrap();
        for x in [0.0, 1.0] {
            let pi = Belief::new(x).unwrap();
            assert_eq!(update_success(pi, lr).value(), x);
            assert_eq!(update_failure(pi, lr).value(), x);
            assert!(posterior_derivatives(pi, lr).is_err());
            let p = informativeness_partials(pi, lr);
            assert_eq!(p.dpiplus_dlambda, 0.0);
            assert_eq!(p.djumpminus_dphi, 0.0);
        }
        assert!(Belief::new(1.2).is_err());
        assert!(Belief::new(f64::NAN).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let lr = LikelihoodPair::new(2.0, 1.0 / 3.0).unwrap();
        let d = posterior_derivatives(b(0.5), lr).unwrap();
        let h = 1e-6;
        let fd_plus = (update_success(b(0.5 + h), lr).value() - update_success(b(0.5 - h), lr).value()) / (2.0 * h);
        let fd_minus = (update_failure(b(0.5 + h), lr).value() - update_failure(b(0.5 - h), lr).value()) / (2.0 * h);
        assert!((d.dpi_plus - 8.0 / 9.0).abs() < 1e-15);
        assert!((d.dpi_minus - 0.75).abs() < 1e-15);
        assert!((fd_plus - d.dpi_plus).abs() < 1e-8);
        assert!((fd_minus - d.dpi_minus).abs() < 1e-8);
    }

    #[test]
    fn slope_near_one_tends_to_inverse_ratio() {
        let lr = LikelihoodPair::new(2.0, 1.0 / 3.0).unwrap();
        let d = posterior_derivatives(b(1.0 - 1e-4), lr).unwrap();
        assert!((d.dpi_plus - 0.5).abs() < 1e-3);
        assert_eq!(boundary_limits(lr).dpi_plus_at1, 0.5);
    }

    #[test]
    fn variance_by_enumeration() {
        let tech = OutcomeTech::new(0.8, 0.4).unwrap();
        let v = posterior_variance(b(0.5), &tech, 1e-12).unwrap();
        // Outcomes: success w.p. 0.6 -> 2/3, failure w.p. 0.4 -> 1/4.
        let mean = 0.6 * (2.0 / 3.0) + 0.4 * 0.25;
        let direct = 0.6 * (2.0f64 / 3.0 - mean).powi(2) + 0.4 * (0.25 - mean).powi(2);
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn variance_vanishes_when_uninformative() {
        let tech = OutcomeTech::new(0.5, 0.5).unwrap();
        assert_eq!(posterior_variance(b(0.4), &tech, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn informativeness_partials_match_finite_differences() {
        let lr = LikelihoodPair::new(2.0, 1.0 / 3.0).unwrap();
        let p = informativeness_partials(b(0.5), lr);
        let h = 1e-6;
        let up = |l: f64| update_success(b(0.5), LikelihoodPair::new(l, lr.phi).unwrap()).value();
        let down = |f: f64| update_failure(b(0.5), LikelihoodPair::new(lr.lambda, f).unwrap()).value();
        let fd_l = (up(2.0 + h) - up(2.0 - h)) / (2.0 * h);
        let fd_f = (down(lr.phi + h) - down(lr.phi - h)) / (2.0 * h);
        assert!((p.dpiplus_dlambda - 0.25 / 2.25).abs() < 1e-15);
        assert!((p.dpiminus_dphi - 0.5625).abs() < 1e-15);
        assert!((fd_l - p.dpiplus_dlambda).abs() < 1e-8);
        assert!((fd_f - p.dpiminus_dphi).abs() < 1e-8);
        // The downward jump pi - pi_minus shrinks as phi grows.
        assert!((p.djumpminus_dphi + fd_f).abs() < 1e-8);
    }

    #[test]
    fn dilation_endpoints_and_midpoint() {
        let lr = LikelihoodPair::new(2.0, 1.0 / 3.0).unwrap();
        assert!(dilate(lr, 0.0).unwrap().is_uninformative());
        assert_eq!(dilate(lr, 1.0).unwrap(), lr);
        let mid = dilate(lr, 0.5).unwrap();
        assert!((mid.lambda - 1.5).abs() < 1e-15);
        assert!((mid.phi - 2.0 / 3.0).abs() < 1e-15);
        assert!(dilate(lr, 1.5).is_err());
    }

    #[test]
    fn dilated_jump_is_first_order_in_tau() {
        let lr = LikelihoodPair::new(2.0, 1.0 / 3.0).unwrap();
        let pi = 0.3;
        let target = (lr.lambda - 1.0) * pi * (1.0 - pi);
        let mut last = f64::INFINITY;
        for tau in [0.1, 0.01, 0.001] {
            let d = dilate(lr, tau).unwrap();
            let jump = update_success(b(pi), d).value() - pi;
            let err = (jump / tau - target).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-3);
    }
}
