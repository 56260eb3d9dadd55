use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{dilate, Belief, LikelihoodPair, PosteriorSplit};

/// Success probabilities of an arm by expert type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeTech {
    pub p_high: f64,
    pub p_low: f64,
}

impl OutcomeTech {
    /// Requires `0 < p_low <= p_high < 1`.
    pub fn new(p_high: f64, p_low: f64) -> Result<Self> {
        let t = Self { p_high, p_low };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [("p_high", self.p_high), ("p_low", self.p_low)] {
            if !(p.is_finite() && p > 0.0 && p < 1.0) {
                return Err(Error::domain(what, p, "(0, 1)"));
            }
        }
        if self.p_low > self.p_high {
            return Err(Error::Config(format!(
                "p_low = {} exceeds p_high = {}",
                self.p_low, self.p_high
            )));
        }
        Ok(())
    }

    pub fn is_informative(&self) -> bool {
        self.p_high > self.p_low
    }

    /// Success probability at belief `pi`: `p_L + (p_H - p_L) pi`.
    pub fn mixture(&self, pi: f64) -> f64 {
        self.p_low + (self.p_high - self.p_low) * pi
    }

    pub fn likelihoods(&self) -> Result<LikelihoodPair> {
        LikelihoodPair::from_probs(self.p_high, self.p_low)
    }
}

/// Private signal precision by type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalTech {
    pub q_high: f64,
    pub q_low: f64,
}

impl SignalTech {
    /// Requires `0 < q_low <= q_high < 1`; equality gives an uninformative signal.
    pub fn new(q_high: f64, q_low: f64) -> Result<Self> {
        let s = Self { q_high, q_low };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, q) in [("q_high", self.q_high), ("q_low", self.q_low)] {
            if !(q.is_finite() && q > 0.0 && q < 1.0) {
                return Err(Error::domain(what, q, "(0, 1)"));
            }
        }
        if self.q_low > self.q_high {
            return Err(Error::Config(format!(
                "q_low = {} exceeds q_high = {}",
                self.q_low, self.q_high
            )));
        }
        Ok(())
    }

    pub fn uninformative() -> Self {
        Self {
            q_high: 0.5,
            q_low: 0.5,
        }
    }

    /// Likelihood ratios of the good and bad signal.
    pub fn ratios(&self) -> (f64, f64) {
        (self.q_high / self.q_low, (1.0 - self.q_high) / (1.0 - self.q_low))
    }
}

/// An action as seen by the market: outcome probabilities plus the likelihood
/// ratios used to update on recorded outcomes.
///
/// Usually the ratios are implied by the probabilities. Arms built with
/// [`Arm::with_ratios`] carry ratios that need not match; the probabilities
/// then only supply the mixture success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmDoc", into = "ArmDoc")]
pub struct Arm {
    pub tech: OutcomeTech,
    pub lr: LikelihoodPair,
    explicit_ratios: bool,
}

impl Arm {
    pub fn from_tech(tech: OutcomeTech) -> Result<Self> {
        tech.validate()?;
        Ok(Self {
            tech,
            lr: tech.likelihoods()?,
            explicit_ratios: false,
        })
    }

    pub fn new(p_high: f64, p_low: f64) -> Result<Self> {
        Self::from_tech(OutcomeTech::new(p_high, p_low)?)
    }

    /// An arm whose market updates use `lr` regardless of `tech`.
    pub fn with_ratios(tech: OutcomeTech, lr: LikelihoodPair) -> Result<Self> {
        tech.validate()?;
        LikelihoodPair::new(lr.lambda, lr.phi)?;
        Ok(Self {
            tech,
            lr,
            explicit_ratios: true,
        })
    }

    /// Uninformative arm with success probability `r`.
    pub fn uninformative(r: f64) -> Result<Self> {
        Self::new(r, r)
    }

    pub fn has_explicit_ratios(&self) -> bool {
        self.explicit_ratios
    }

    pub fn is_uninformative(&self) -> bool {
        self.lr.is_uninformative()
    }

    pub fn mixture(&self, pi: f64) -> f64 {
        self.tech.mixture(pi)
    }

    /// `p_H - p_L`, the slope of the mixture in the belief.
    pub fn mixture_slope(&self) -> f64 {
        self.tech.p_high - self.tech.p_low
    }

    pub fn split(&self, pi: Belief) -> PosteriorSplit {
        PosteriorSplit::new(pi, self.lr, self.mixture(pi.value()))
    }

    /// The arm shrunk toward uninformativeness along the linear path,
    /// keeping `p_low` fixed.
    pub fn dilate(&self, tau: f64) -> Result<Self> {
        let lr = dilate(self.lr, tau)?;
        let tech = OutcomeTech {
            p_high: self.tech.p_low + tau * (self.tech.p_high - self.tech.p_low),
            p_low: self.tech.p_low,
        };
        Ok(Self {
            tech,
            lr,
            explicit_ratios: self.explicit_ratios,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmDoc {
    p_high: f64,
    p_low: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<f64>,
}

impl TryFrom<ArmDoc> for Arm {
    type Error = Error;
    fn try_from(d: ArmDoc) -> Result<Self> {
        let tech = OutcomeTech::new(d.p_high, d.p_low)?;
        match (d.lambda, d.phi) {
            (None, None) => Arm::from_tech(tech),
            (Some(l), Some(f)) => Arm::with_ratios(tech, LikelihoodPair::new(l, f)?),
            _ => Err(Error::Config("an arm needs both `lambda` and `phi` or neither".into())),
        }
    }
}

impl From<Arm> for ArmDoc {
    fn from(a: Arm) -> Self {
        ArmDoc {
            p_high: a.tech.p_high,
            p_low: a.tech.p_low,
            lambda: a.explicit_ratios.then_some(a.lr.lambda),
            phi: a.explicit_ratios.then_some(a.lr.phi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tech_validation() {
        assert!(OutcomeTech::new(0.8, 0.4).is_ok());
        assert!(OutcomeTech::new(0.5, 0.5).is_ok());
        assert!(OutcomeTech::new(0.4, 0.8).is_err());
        assert!(OutcomeTech::new(1.0, 0.4).is_err());
        assert!(SignalTech::new(0.3, 0.7).is_err());
    }

    #[test]
    fn dilated_arm_ratios_match_probabilities() {
        let arm = Arm::new(0.8, 0.4).unwrap();
        let d = arm.dilate(0.5).unwrap();
        let implied = d.tech.likelihoods().unwrap();
        assert!((implied.lambda - d.lr.lambda).abs() < 1e-15);
        assert!((implied.phi - d.lr.phi).abs() < 1e-15);
    }
}
