use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Career value of holding a given reputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueFunction {
    /// `a + b x`
    Linear { a: f64, b: f64 },
    /// `a + b x + c x^2`
    Quadratic { a: f64, b: f64, c: f64 },
    /// Linear interpolation through `[x, v]` knots, extended linearly beyond
    /// the end knots. Curvature is zero inside segments.
    Piecewise { knots: Vec<[f64; 2]> },
}

impl ValueFunction {
    /// `V(x) = x`.
    pub fn identity() -> Self {
        ValueFunction::Linear { a: 0.0, b: 1.0 }
    }

    /// `V(x) = x + (k / 2)(x - x0)^2`: slope 1 and curvature `k` at `x0`.
    pub fn tangent_quadratic(x0: f64, k: f64) -> Self {
        ValueFunction::Quadratic {
            a: 0.5 * k * x0 * x0,
            b: 1.0 - k * x0,
            c: 0.5 * k,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ValueFunction::Linear { a, b } => a + b * x,
            ValueFunction::Quadratic { a, b, c } => a + b * x + c * x * x,
            ValueFunction::Piecewise { knots } => {
                let i = segment(knots, x);
                let s = slope(knots, i);
                knots[i][1] + s * (x - knots[i][0])
            }
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            ValueFunction::Linear { b, .. } => *b,
            ValueFunction::Quadratic { b, c, .. } => b + 2.0 * c * x,
            ValueFunction::Piecewise { knots } => slope(knots, segment(knots, x)),
        }
    }

    pub fn d2(&self, _x: f64) -> f64 {
        match self {
            ValueFunction::Linear { .. } | ValueFunction::Piecewise { .. } => 0.0,
            ValueFunction::Quadratic { c, .. } => 2.0 * c,
        }
    }

    /// `sup |V''|` over `[0, 1]`.
    pub fn curvature_sup(&self) -> f64 {
        self.d2(0.5).abs()
    }

    pub fn kinks(&self) -> Vec<f64> {
        match self {
            ValueFunction::Piecewise { knots } => knots.iter().map(|k| k[0]).collect(),
            _ => Vec::new(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, ValueFunction::Piecewise { .. })
    }

    /// Checks finiteness, knot ordering and `V' > 0` at every probe.
    pub fn validate(&self, probes: &[f64]) -> Result<()> {
        self.validate_shape()?;
        for &x in probes {
            let d = self.d1(x);
            if !(d > 0.0) {
                return Err(Error::Config(format!(
                    "value function must be increasing; V'({x}) = {d}"
                )));
            }
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<()> {
        let finite = match self {
            ValueFunction::Linear { a, b } => a.is_finite() && b.is_finite(),
            ValueFunction::Quadratic { a, b, c } => a.is_finite() && b.is_finite() && c.is_finite(),
            ValueFunction::Piecewise { knots } => {
                if knots.len() < 2 {
                    return Err(Error::Config("a piecewise value function needs two knots".into()));
                }
                if knots.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                    return Err(Error::Config("value knots must have increasing x".into()));
                }
                knots.iter().all(|k| k[0].is_finite() && k[1].is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::Config("value function coefficients must be finite".into()))
        }
    }
}

fn segment(knots: &[[f64; 2]], x: f64) -> usize {
    let n = knots.len();
    knots.partition_point(|k| k[0] <= x).saturating_sub(1).min(n - 2)
}

fn slope(knots: &[[f64; 2]], i: usize) -> f64 {
    (knots[i + 1][1] - knots[i][1]) / (knots[i + 1][0] - knots[i][0])
}
