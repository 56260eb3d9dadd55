use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::settings::default_grid;

/// Survival probabilities of success and failure at a belief, with their
/// slopes in the belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub sigma1: f64,
    pub sigma0: f64,
    pub dsigma1: f64,
    pub dsigma0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelKnot {
    pub pi: f64,
    pub sigma1: f64,
    pub sigma0: f64,
}

/// Probability that a realized outcome stays on the public record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VisibilityKernel {
    Constant {
        sigma1: f64,
        sigma0: f64,
    },
    /// Piecewise-linear in the belief through the knots, flat outside them.
    Tabulated {
        knots: Vec<KernelKnot>,
    },
    /// Failure visibility `kappa + (1 - kappa) delta`: a mandated disclosure
    /// floor `kappa` plus detection `delta` of the undisclosed remainder.
    SecurityFloor {
        kappa: f64,
        delta: f64,
        sigma1: f64,
    },
    /// A base kernel plus a reform increment.
    Shifted {
        base: Box<VisibilityKernel>,
        shift: ReformShift,
    },
}

fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(what, x, "[0, 1]"))
    }
}

impl VisibilityKernel {
    pub fn constant(sigma1: f64, sigma0: f64) -> Result<Self> {
        let k = VisibilityKernel::Constant { sigma1, sigma0 };
        k.validate()?;
        Ok(k)
    }

    /// Same survival probability for both outcomes.
    pub fn symmetric(sigma: f64) -> Result<Self> {
        Self::constant(sigma, sigma)
    }

    pub fn tabulated(mut knots: Vec<KernelKnot>) -> Result<Self> {
        knots.sort_by(|a, b| a.pi.total_cmp(&b.pi));
        let k = VisibilityKernel::Tabulated { knots };
        k.validate()?;
        Ok(k)
    }

    pub fn security_floor(kappa: f64, delta: f64, sigma1: f64) -> Result<Self> {
        let k = VisibilityKernel::SecurityFloor { kappa, delta, sigma1 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VisibilityKernel::Constant { sigma1, sigma0 } => {
                check_unit("sigma1", *sigma1)?;
                check_unit("sigma0", *sigma0)
            }
            VisibilityKernel::Tabulated { knots } => {
                if knots.len() < 2 {
                    return Err(Error::Config("a tabulated kernel needs at least two knots".into()));
                }
                for w in knots.windows(2) {
                    if !(w[0].pi < w[1].pi) {
                        return Err(Error::Config(format!(
                            "kernel knots must have distinct increasing pi (got {} then {})",
                            w[0].pi, w[1].pi
                        )));
                    }
                }
                for k in knots {
                    check_unit("knot pi", k.pi)?;
                    check_unit("knot sigma1", k.sigma1)?;
                    check_unit("knot sigma0", k.sigma0)?;
                }
                Ok(())
            }
            VisibilityKernel::SecurityFloor { kappa, delta, sigma1 } => {
                check_unit("kappa", *kappa)?;
                check_unit("delta", *delta)?;
                check_unit("sigma1", *sigma1)
            }
            VisibilityKernel::Shifted { base, shift } => {
                base.validate()?;
                shift.validate_on(base, &probe_points())
            }
        }
    }

    pub fn eval(&self, pi: f64) -> KernelValue {
        match self {
            VisibilityKernel::Constant { sigma1, sigma0 } => KernelValue {
                sigma1: *sigma1,
                sigma0: *sigma0,
                dsigma1: 0.0,
                dsigma0: 0.0,
            },
            VisibilityKernel::Tabulated { knots } => {
                let (s1, d1) = interpolate(knots, pi, |k| k.sigma1);
                let (s0, d0) = interpolate(knots, pi, |k| k.sigma0);
                KernelValue {
                    sigma1: s1,
                    sigma0: s0,
                    dsigma1: d1,
                    dsigma0: d0,
                }
            }
            VisibilityKernel::SecurityFloor { kappa, delta, sigma1 } => KernelValue {
                sigma1: *sigma1,
                sigma0: kappa + (1.0 - kappa) * delta,
                dsigma1: 0.0,
                dsigma0: 0.0,
            },
            VisibilityKernel::Shifted { base, shift } => {
                let b = base.eval(pi);
                let (s0, d0) = shift.delta0.eval(pi);
                let (s1, d1) = shift.delta1.eval(pi);
                KernelValue {
                    sigma1: b.sigma1 + s1,
                    sigma0: b.sigma0 + s0,
                    dsigma1: b.dsigma1 + d1,
                    dsigma0: b.dsigma0 + d0,
                }
            }
        }
    }

    /// True when every reputation slope is identically zero.
    pub fn is_flat(&self) -> bool {
        match self {
            VisibilityKernel::Constant { .. } | VisibilityKernel::SecurityFloor { .. } => true,
            VisibilityKernel::Tabulated { knots } => knots
                .windows(2)
                .all(|w| w[0].sigma1 == w[1].sigma1 && w[0].sigma0 == w[1].sigma0),
            VisibilityKernel::Shifted { base, shift } => {
                base.is_flat() && shift.delta0.is_flat() && shift.delta1.is_flat()
            }
        }
    }

    /// Constant levels `(sigma1, sigma0)` if the kernel is flat.
    pub fn constant_levels(&self) -> Option<(f64, f64)> {
        self.is_flat().then(|| {
            let v = self.eval(0.5);
            (v.sigma1, v.sigma0)
        })
    }

    /// Belief values where the kernel has a kink.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            VisibilityKernel::Constant { .. } | VisibilityKernel::SecurityFloor { .. } => Vec::new(),
            VisibilityKernel::Tabulated { knots } => knots.iter().map(|k| k.pi).collect(),
            VisibilityKernel::Shifted { base, shift } => {
                let mut out = base.kinks();
                out.extend(shift.delta0.kinks());
                out.extend(shift.delta1.kinks());
                out
            }
        }
    }

    /// The same kernel with each survival level moved by a constant.
    pub fn with_level_offsets(&self, d_sigma1: f64, d_sigma0: f64) -> VisibilityKernel {
        VisibilityKernel::Shifted {
            base: Box::new(self.clone()),
            shift: ReformShift {
                delta0: ShiftProfile::Constant(d_sigma0),
                delta1: ShiftProfile::Constant(d_sigma1),
            },
        }
    }
}

fn probe_points() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(default_grid());
    g.push(1.0);
    g
}

/// Linear interpolation through `(x_i, f(knot_i))`, flat outside the knots.
/// At an interior knot the slope is the average of the adjacent segments,
/// which is what a central difference across the knot returns.
fn interpolate<T>(knots: &[T], x: f64, f: impl Fn(&T) -> f64) -> (f64, f64)
where
    T: HasAbscissa,
{
    let n = knots.len();
    let xs = |i: usize| knots[i].abscissa();
    if x <= xs(0) {
        let slope = if x == xs(0) { 0.5 * seg_slope(knots, 0, &f) } else { 0.0 };
        return (f(&knots[0]), slope);
    }
    if x >= xs(n - 1) {
        let slope = if x == xs(n - 1) {
            0.5 * seg_slope(knots, n - 2, &f)
        } else {
            0.0
        };
        return (f(&knots[n - 1]), slope);
    }
    let i = knots.partition_point(|k| k.abscissa() <= x) - 1;
    let s = seg_slope(knots, i, &f);
    if x == xs(i) && i > 0 {
        let prev = seg_slope(knots, i - 1, &f);
        return (f(&knots[i]), 0.5 * (s + prev));
    }
    (f(&knots[i]) + s * (x - xs(i)), s)
}

fn seg_slope<T: HasAbscissa>(knots: &[T], i: usize, f: &impl Fn(&T) -> f64) -> f64 {
    (f(&knots[i + 1]) - f(&knots[i])) / (knots[i + 1].abscissa() - knots[i].abscissa())
}

trait HasAbscissa {
    fn abscissa(&self) -> f64;
}

impl HasAbscissa for KernelKnot {
    fn abscissa(&self) -> f64 {
        self.pi
    }
}

impl HasAbscissa for [f64; 2] {
    fn abscissa(&self) -> f64 {
        self[0]
    }
}

/// A reform increment as a function of the belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShiftProfile {
    Constant(f64),
    /// Piecewise-linear through `[pi, value]` points, flat outside them.
    Tabulated(Vec<[f64; 2]>),
}

impl Default for ShiftProfile {
    fn default() -> Self {
        ShiftProfile::Constant(0.0)
    }
}

impl ShiftProfile {
    pub fn eval(&self, pi: f64) -> (f64, f64) {
        match self {
            ShiftProfile::Constant(c) => (*c, 0.0),
            ShiftProfile::Tabulated(points) => interpolate(points, pi, |p| p[1]),
        }
    }

    fn is_flat(&self) -> bool {
        match self {
            ShiftProfile::Constant(_) => true,
            ShiftProfile::Tabulated(p) => p.windows(2).all(|w| w[0][1] == w[1][1]),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            ShiftProfile::Constant(_) => Vec::new(),
            ShiftProfile::Tabulated(p) => p.iter().map(|q| q[0]).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ShiftProfile::Constant(c) if !c.is_finite() => Err(Error::Config(format!("shift value {c} is not finite"))),
            ShiftProfile::Tabulated(p) if p.len() < 2 => {
                Err(Error::Config("a tabulated shift needs at least two points".into()))
            }
            ShiftProfile::Tabulated(p) => {
                for w in p.windows(2) {
                    if !(w[0][0] < w[1][0]) {
                        return Err(Error::Config("shift points must have increasing pi".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Visibility increments from a reform: `delta0` on failures, `delta1` on
/// successes, with `delta0 >= delta1 >= 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReformShift {
    #[serde(default)]
    pub delta0: ShiftProfile,
    #[serde(default)]
    pub delta1: ShiftProfile,
}

impl ReformShift {
    pub fn constant(delta0: f64, delta1: f64) -> Self {
        Self {
            delta0: ShiftProfile::Constant(delta0),
            delta1: ShiftProfile::Constant(delta1),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.delta0 == ShiftProfile::Constant(0.0) && self.delta1 == ShiftProfile::Constant(0.0)
    }

    /// Check the shift ordering and that `base + shift` stays in `[0, 1]` on `grid`.
    pub fn validate_on(&self, base: &VisibilityKernel, grid: &[f64]) -> Result<()> {
        self.delta0.validate()?;
        self.delta1.validate()?;
        for &pi in grid {
            let d0 = self.delta0.eval(pi).0;
            let d1 = self.delta1.eval(pi).0;
            if d1 < 0.0 || d0 < d1 {
                return Err(Error::Config(format!(
                    "reform needs delta0 >= delta1 >= 0; at pi = {pi} delta0 = {d0}, delta1 = {d1}"
                )));
            }
            let b = base.eval(pi);
            for (what, v) in [("sigma1", b.sigma1 + d1), ("sigma0", b.sigma0 + d0)] {
                if v > 1.0 {
                    return Err(Error::Config(format!("reformed {what} = {v} exceeds 1 at pi = {pi}")));
                }
            }
        }
        Ok(())
    }
}

/// `sigma_RR(y, pi) = sigma_STD(y, pi) + delta_y(pi)`.
///
/// Constant kernels with constant shifts stay constant; everything else is
/// wrapped in [`VisibilityKernel::Shifted`].
pub fn apply_reform(kernel: &VisibilityKernel, shift: &ReformShift) -> Result<VisibilityKernel> {
    kernel.validate()?;
    shift.validate_on(kernel, &probe_points())?;
    if shift.is_zero() {
        return Ok(kernel.clone());
    }
    match (kernel, &shift.delta0, &shift.delta1) {
        (VisibilityKernel::Constant { sigma1, sigma0 }, ShiftProfile::Constant(d0), ShiftProfile::Constant(d1)) => {
            Ok(VisibilityKernel::Constant {
                sigma1: sigma1 + d1,
                sigma0: sigma0 + d0,
            })
        }
        _ => Ok(VisibilityKernel::Shifted {
            base: Box::new(kernel.clone()),
            shift: shift.clone(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reform_is_identity() {
        let k = VisibilityKernel::constant(0.9, 0.2).unwrap();
        assert_eq!(apply_reform(&k, &ReformShift::constant(0.0, 0.0)).unwrap(), k);
    }

    #[test]
    fn reform_adds_pointwise() {
        let k = VisibilityKernel::constant(1.0, 0.2).unwrap();
        let r = apply_reform(&k, &ReformShift::constant(0.5, 0.0)).unwrap();
        let v = r.eval(0.4);
        assert!((v.sigma0 - 0.7).abs() < 1e-15);
        assert_eq!(v.sigma1, 1.0);
    }

    #[test]
    fn reform_rejects_overflow_and_misordering() {
        let k = VisibilityKernel::constant(0.9, 0.8).unwrap();
        assert!(apply_reform(&k, &ReformShift::constant(0.5, 0.0)).is_err());
        let k = VisibilityKernel::constant(0.5, 0.2).unwrap();
        assert!(apply_reform(&k, &ReformShift::constant(0.1, 0.2)).is_err());
        assert!(apply_reform(&k, &ReformShift::constant(0.1, -0.05)).is_err());
    }

    #[test]
    fn security_floor_raises_failure_visibility() {
        let before = VisibilityKernel::security_floor(0.0, 0.2, 1.0).unwrap().eval(0.5);
        let after = VisibilityKernel::security_floor(0.5, 0.2, 1.0).unwrap().eval(0.5);
        assert!((before.sigma0 - 0.2).abs() < 1e-15);
        assert!((after.sigma0 - 0.6).abs() < 1e-15);
    }

    #[test]
    fn tabulated_interpolates_and_reports_slopes() {
        let k = VisibilityKernel::tabulated(vec![
            KernelKnot {
                pi: 0.0,
                sigma1: 1.0,
                sigma0: 0.0,
            },
            KernelKnot {
                pi: 1.0,
                sigma1: 1.0,
                sigma0: 1.0,
            },
        ])
        .unwrap();
        let v = k.eval(0.5);
        assert_eq!((v.sigma1, v.sigma0, v.dsigma1, v.dsigma0), (1.0, 0.5, 0.0, 1.0));
        assert!(!k.is_flat());
    }

    #[test]
    fn tabulated_kink_slope_is_average() {
        let k = VisibilityKernel::tabulated(vec![
            KernelKnot {
                pi: 0.0,
                sigma1: 0.5,
                sigma0: 0.0,
            },
            KernelKnot {
                pi: 0.5,
                sigma1: 0.5,
                sigma0: 0.5,
            },
            KernelKnot {
                pi: 1.0,
                sigma1: 0.5,
                sigma0: 0.5,
            },
        ])
        .unwrap();
        assert_eq!(k.eval(0.5).dsigma0, 0.5);
        assert_eq!(k.eval(0.75).dsigma0, 0.0);
        assert_eq!(k.eval(0.25).sigma0, 0.25);
    }

    #[test]
    fn tabulated_shift_profile() {
        let k = VisibilityKernel::constant(0.9, 0.2).unwrap();
        let shift = ReformShift {
            delta0: ShiftProfile::Tabulated(vec![[0.0, 0.2], [1.0, 0.6]]),
            delta1: ShiftProfile::Constant(0.05),
        };
        let r = apply_reform(&k, &shift).unwrap();
        let v = r.eval(0.5);
        assert!((v.sigma0 - 0.6).abs() < 1e-15);
        assert!((v.dsigma0 - 0.4).abs() < 1e-15);
        assert!((v.sigma1 - 0.95).abs() < 1e-15);
    }
}
