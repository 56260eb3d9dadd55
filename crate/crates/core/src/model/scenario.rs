use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{posterior_derivatives, Belief};
use crate::settings::{default_grid, NumericSettings};

use super::{apply_reform, Arm, ReformShift, SignalTech, ValueFunction, VisibilityKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    Risky,
    Safe,
}

/// The expert's signal-contingent choice at a belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    AlwaysRisky,
    RiskyIffGood,
    /// Only possible when a bad signal makes risk more attractive, e.g. when
    /// success is barely visible or the safe arm is informative.
    RiskyIffBad,
    NeverRisky,
}

impl Policy {
    pub fn chooses_risky(self, good_signal: bool) -> bool {
        match self {
            Policy::AlwaysRisky => true,
            Policy::NeverRisky => false,
            Policy::RiskyIffGood => good_signal,
            Policy::RiskyIffBad => !good_signal,
        }
    }

    fn from_choices(good: bool, bad: bool) -> Self {
        match (good, bad) {
            (true, true) => Policy::AlwaysRisky,
            (true, false) => Policy::RiskyIffGood,
            (false, true) => Policy::RiskyIffBad,
            (false, false) => Policy::NeverRisky,
        }
    }
}

/// Policy with the signal-conditional value gaps behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffDecision {
    pub policy: Policy,
    pub delta_good: f64,
    pub delta_bad: f64,
    /// Expert's own belief after a good / bad signal.
    pub private_good: f64,
    pub private_bad: f64,
}

/// All model primitives at once.
///
/// Fields are public for inspection; [`Scenario::new`] is the validating
/// constructor. Building the struct directly skips the global `V' > 0` check,
/// which local analyses use for value functions that are only increasing near
/// the belief of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub risky: Arm,
    pub safe: Arm,
    pub signal: SignalTech,
    pub vis_risky: VisibilityKernel,
    pub vis_safe: VisibilityKernel,
    pub value: ValueFunction,
}

/// Belief derivative of one arm's continuation value.
struct ArmValue {
    slope: f64,
    slope_static: f64,
}

impl Scenario {
    pub fn new(
        risky: Arm,
        safe: Arm,
        signal: SignalTech,
        vis_risky: VisibilityKernel,
        vis_safe: VisibilityKernel,
        value: ValueFunction,
    ) -> Result<Self> {
        let s = Self {
            risky,
            safe,
            signal,
            vis_risky,
            vis_safe,
            value,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.risky.is_uninformative() {
            return Err(Error::Config("the risky arm must be informative".into()));
        }
        self.signal.validate()?;
        self.vis_risky.validate()?;
        self.vis_safe.validate()?;
        self.value.validate(&default_grid())
    }

    pub fn arm(&self, kind: ArmKind) -> (&Arm, &VisibilityKernel) {
        match kind {
            ArmKind::Risky => (&self.risky, &self.vis_risky),
            ArmKind::Safe => (&self.safe, &self.vis_safe),
        }
    }

    /// The scenario after a reform of the risky arm's visibility.
    pub fn reformed(&self, shift: &ReformShift) -> Result<Self> {
        Ok(Self {
            vis_risky: apply_reform(&self.vis_risky, shift)?,
            ..self.clone()
        })
    }

    /// `p sigma(1, pi) V(pi_plus) + (1 - p) sigma(0, pi) V(pi_minus)`.
    ///
    /// `p` defaults to the arm's public mixture; `private_success_prob`
    /// replaces it without changing how the market updates.
    pub fn continuation_value(&self, pi: Belief, kind: ArmKind, private_success_prob: Option<f64>) -> Result<f64> {
        let x = pi.require_interior()?;
        if let Some(p) = private_success_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain("private success probability", p, "[0, 1]"));
            }
        }
        let (arm, kernel) = self.arm(kind);
        let s = arm.split(pi);
        let k = kernel.eval(x);
        let p = private_success_prob.unwrap_or(s.p_success);
        Ok(p * k.sigma1 * self.value.value(s.pi_plus) + (1.0 - p) * k.sigma0 * self.value.value(s.pi_minus))
    }

    /// `U(R | pi) - U(S | pi)`.
    pub fn delta(&self, pi: Belief) -> Result<f64> {
        Ok(self.continuation_value(pi, ArmKind::Risky, None)? - self.continuation_value(pi, ArmKind::Safe, None)?)
    }

    fn arm_value(&self, x: f64, kind: ArmKind) -> Result<ArmValue> {
        let pi = Belief::interior(x)?;
        let (arm, kernel) = self.arm(kind);
        let s = arm.split(pi);
        let d = posterior_derivatives(pi, arm.lr)?;
        let k = kernel.eval(x);
        let m = s.p_success;
        let mp = arm.mixture_slope();
        let v_up = self.value.value(s.pi_plus);
        let v_down = self.value.value(s.pi_minus);
        let slope_static = mp * k.sigma1 * v_up + m * k.sigma1 * self.value.d1(s.pi_plus) * d.dpi_plus
            - mp * k.sigma0 * v_down
            + (1.0 - m) * k.sigma0 * self.value.d1(s.pi_minus) * d.dpi_minus;
        let direct = m * k.dsigma1 * v_up + (1.0 - m) * k.dsigma0 * v_down;
        Ok(ArmValue {
            slope: slope_static + direct,
            slope_static,
        })
    }

    /// Analytic `d Delta / d pi` including reputation slopes of the kernels.
    pub fn delta_prime(&self, pi: Belief) -> Result<f64> {
        let x = pi.require_interior()?;
        Ok(self.arm_value(x, ArmKind::Risky)?.slope - self.arm_value(x, ArmKind::Safe)?.slope)
    }

    /// `d Delta / d pi` with the kernels held at their values at `pi`.
    pub fn delta_prime_static(&self, pi: Belief) -> Result<f64> {
        let x = pi.require_interior()?;
        Ok(self.arm_value(x, ArmKind::Risky)?.slope_static - self.arm_value(x, ArmKind::Safe)?.slope_static)
    }

    /// Central finite difference of [`Scenario::delta`].
    pub fn delta_prime_numeric(&self, pi: Belief, step: f64) -> Result<f64> {
        let x = pi.require_interior()?;
        let lo = Belief::interior(x - step)?;
        let hi = Belief::interior(x + step)?;
        Ok((self.delta(hi)? - self.delta(lo)?) / (2.0 * step))
    }

    /// Analytic `Delta'(pi)`, cross-checked against a finite difference.
    ///
    /// The check is skipped when a kink of a tabulated kernel or piecewise
    /// value function lies inside the difference stencil, or the stencil
    /// leaves `(0, 1)`.
    pub fn delta_prime_exact(&self, pi: Belief, settings: &NumericSettings) -> Result<f64> {
        let analytic = self.delta_prime(pi)?;
        let x = pi.value();
        let h = settings.fd_step;
        if x - h <= 0.0 || x + h >= 1.0 || self.kink_near(x, h) {
            return Ok(analytic);
        }
        let numeric = self.delta_prime_numeric(pi, h)?;
        if !settings.fd_close(analytic, numeric) {
            return Err(Error::Consistency(format!(
                "Delta'({x}): analytic {analytic:e} vs finite difference {numeric:e}"
            )));
        }
        Ok(analytic)
    }

    fn kink_near(&self, x: f64, h: f64) -> bool {
        let (lo, hi) = (x - h, x + h);
        let kernel_kink = self
            .vis_risky
            .kinks()
            .into_iter()
            .chain(self.vis_safe.kinks())
            .any(|k| k >= lo && k <= hi);
        if kernel_kink {
            return true;
        }
        let knots = self.value.kinks();
        if knots.is_empty() {
            return false;
        }
        // V is evaluated at the four posteriors; each moves monotonically in pi.
        let (Ok(a), Ok(b)) = (Belief::interior(lo), Belief::interior(hi)) else {
            return true;
        };
        let mut ranges = Vec::new();
        for arm in [&self.risky, &self.safe] {
            let (sa, sb) = (arm.split(a), arm.split(b));
            ranges.push((sa.pi_plus, sb.pi_plus));
            ranges.push((sa.pi_minus, sb.pi_minus));
        }
        knots
            .iter()
            .any(|&k| ranges.iter().any(|&(l, u)| k >= l.min(u) && k <= l.max(u)))
    }

    /// Signal-contingent choice at public belief `pi`.
    ///
    /// The expert's private success probability comes from its own posterior
    /// after the signal; the market still updates with public ratios. Value
    /// gaps within `tie_band` of zero count as ties and go to risky.
    pub fn cutoff_policy(&self, pi: Belief, settings: &NumericSettings) -> Result<CutoffDecision> {
        let x = pi.require_interior()?;
        let (good_ratio, bad_ratio) = self.signal.ratios();
        let private = |r: f64| r * x / (1.0 - x + r * x);
        let private_good = private(good_ratio);
        let private_bad = private(bad_ratio);
        let gap = |q: f64| -> Result<f64> {
            Ok(
                self.continuation_value(pi, ArmKind::Risky, Some(self.risky.mixture(q)))?
                    - self.continuation_value(pi, ArmKind::Safe, Some(self.safe.mixture(q)))?,
            )
        };
        let delta_good = gap(private_good)?;
        let delta_bad = gap(private_bad)?;
        let take = |d: f64| d >= -settings.tie_band;
        Ok(CutoffDecision {
            policy: Policy::from_choices(take(delta_good), take(delta_bad)),
            delta_good,
            delta_bad,
            private_good,
            private_bad,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KernelKnot;

    fn symmetric(p_h: f64, p_l: f64, sigma: f64, value: ValueFunction) -> Scenario {
        Scenario::new(
            Arm::new(p_h, p_l).unwrap(),
            Arm::uninformative(0.5).unwrap(),
            SignalTech::new(0.7, 0.3).unwrap(),
            VisibilityKernel::symmetric(sigma).unwrap(),
            VisibilityKernel::symmetric(sigma).unwrap(),
            value,
        )
        .unwrap()
    }

    fn b(x: f64) -> Belief {
        Belief::interior(x).unwrap()
    }

    #[test]
    fn safe_value_is_belief_under_identity() {
        let s = symmetric(0.8, 0.4, 1.0, ValueFunction::identity());
        let u = s.continuation_value(b(0.37), ArmKind::Safe, None).unwrap();
        assert!((u - 0.37).abs() < 1e-15);
    }

    #[test]
    fn risky_value_by_enumeration() {
        let s = symmetric(0.8, 0.4, 1.0, ValueFunction::identity());
        let u = s.continuation_value(b(0.5), ArmKind::Risky, None).unwrap();
        assert!((u - (0.6 * 2.0 / 3.0 + 0.4 * 0.25)).abs() < 1e-15);
        let mut s0 = s.clone();
        s0.vis_risky = VisibilityKernel::constant(1.0, 0.0).unwrap();
        let u0 = s0.continuation_value(b(0.5), ArmKind::Risky, None).unwrap();
        assert!((u0 - 0.4).abs() < 1e-15);
        assert!((s0.delta(b(0.5)).unwrap() + 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_arms_have_zero_gap() {
        let mut s = symmetric(0.8, 0.4, 0.7, ValueFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 });
        s.safe = s.risky;
        s.vis_safe = s.vis_risky.clone();
        for x in [0.1, 0.5, 0.9] {
            assert_eq!(s.delta(b(x)).unwrap(), 0.0);
            assert_eq!(s.delta_prime(b(x)).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference_with_sloped_kernel() {
        let mut s = symmetric(0.8, 0.4, 0.8, ValueFunction::Quadratic { a: 0.0, b: 1.0, c: 0.3 });
        s.vis_risky = VisibilityKernel::tabulated(vec![
            KernelKnot {
                pi: 0.0,
                sigma1: 0.9,
                sigma0: 0.1,
            },
            KernelKnot {
                pi: 1.0,
                sigma1: 0.6,
                sigma0: 0.8,
            },
        ])
        .unwrap();
        let settings = NumericSettings::default();
        for x in [0.2, 0.5, 0.8] {
            assert!(s.delta_prime_exact(b(x), &settings).is_ok());
        }
    }

    #[test]
    fn uninformative_signal_never_splits() {
        let mut s = symmetric(0.8, 0.4, 1.0, ValueFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 });
        s.signal = SignalTech::uninformative();
        let settings = NumericSettings::default();
        for x in [0.1, 0.5, 0.9] {
            let d = s.cutoff_policy(b(x), &settings).unwrap();
            assert!(matches!(d.policy, Policy::AlwaysRisky | Policy::NeverRisky));
        }
    }

    #[test]
    fn more_failure_visibility_means_weakly_more_risk() {
        let settings = NumericSettings::default();
        let mut lo = symmetric(0.8, 0.4, 1.0, ValueFunction::identity());
        lo.vis_risky = VisibilityKernel::constant(1.0, 0.0).unwrap();
        let hi = symmetric(0.8, 0.4, 1.0, ValueFunction::identity());
        let dl = lo.cutoff_policy(b(0.5), &settings).unwrap();
        let dh = hi.cutoff_policy(b(0.5), &settings).unwrap();
        for good in [true, false] {
            assert!(!dl.policy.chooses_risky(good) || dh.policy.chooses_risky(good));
        }
        assert!(dh.delta_good >= dl.delta_good && dh.delta_bad >= dl.delta_bad);
    }
}
