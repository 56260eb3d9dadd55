//! Numerical verification of the model's identities, limits and bounds.
//!
//! Each claim produces a [`VerificationReport`] with one row per probe. A row
//! carries both sides of the checked relation and its violation; a claim
//! passes when its largest violation is within the claim's tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arm, OutcomeTech, Scenario, SignalTech, ValueFunction, VisibilityKernel};
use crate::posterior::{
    boundary_limits, posterior_derivatives, posterior_gap, update_failure, update_success, variance_forms, Belief,
    LikelihoodPair, PosteriorSplit,
};
use crate::settings::{default_grid, NumericSettings};
use crate::sign_test::{
    cutoff_slope_sign, delta_prime_core, dominance_map, global_curvature_threshold, phi_safe, psi, visibility_partials,
};

/// One probe of a claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub label: String,
    pub pi: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub claim_id: String,
    pub description: String,
    pub grid: Vec<f64>,
    pub tolerance: f64,
    pub max_abs_violation: f64,
    pub passed: bool,
    /// The probe with the largest violation.
    pub worst: Option<ProbeRow>,
    pub notes: Vec<String>,
    pub rows: Vec<ProbeRow>,
}

impl VerificationReport {
    /// `PASS`/`FAIL` line naming the worst probe.
    pub fn summary(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let worst = match &self.worst {
            Some(w) if !self.passed => format!(
                " at {} (pi = {}): lhs = {:.12e}, rhs = {:.12e}",
                w.label, w.pi, w.lhs, w.rhs
            ),
            _ => String::new(),
        };
        format!(
            "{status} {}: max violation {:.3e} (tol {:.1e}){worst}",
            self.claim_id, self.max_abs_violation, self.tolerance
        )
    }
}

struct Builder {
    id: &'static str,
    description: String,
    tolerance: f64,
    grid: Vec<f64>,
    rows: Vec<ProbeRow>,
    notes: Vec<String>,
}

impl Builder {
    fn new(id: &'static str, description: impl Into<String>, tolerance: f64, grid: &[f64]) -> Self {
        Self {
            id,
            description: description.into(),
            tolerance,
            grid: grid.to_vec(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn row(&mut self, label: impl Into<String>, pi: f64, lhs: f64, rhs: f64, violation: f64) {
        self.rows.push(ProbeRow {
            label: label.into(),
            pi,
            lhs,
            rhs,
            violation,
        });
    }

    /// Row for `|lhs - rhs|`.
    fn eq(&mut self, label: impl Into<String>, pi: f64, lhs: f64, rhs: f64) {
        self.row(label, pi, lhs, rhs, (lhs - rhs).abs());
    }

    /// Row for `lo <= x <= hi`.
    fn within(&mut self, label: impl Into<String>, pi: f64, x: f64, lo: f64, hi: f64) {
        let v = (lo - x).max(x - hi).max(0.0);
        let rhs = if x < lo { lo } else { hi };
        self.row(label, pi, x, rhs, v);
    }

    /// Row that fails with unit violation when `ok` is false.
    fn holds(&mut self, label: impl Into<String>, pi: f64, lhs: f64, rhs: f64, ok: bool) {
        self.row(label, pi, lhs, rhs, if ok { 0.0 } else { 1.0 });
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self) -> VerificationReport {
        let mut worst: Option<&ProbeRow> = None;
        let mut max_v: f64 = 0.0;
        let mut nan = false;
        for r in &self.rows {
            if r.violation.is_nan() {
                nan = true;
                worst = Some(r);
                continue;
            }
            if worst.is_none() || r.violation > max_v {
                max_v = max_v.max(r.violation);
                if !nan {
                    worst = Some(r);
                }
            }
        }
        let passed = !nan && !self.rows.is_empty() && max_v <= self.tolerance;
        VerificationReport {
            claim_id: self.id.to_string(),
            description: self.description,
            grid: self.grid,
            tolerance: self.tolerance,
            max_abs_violation: if nan { f64::NAN } else { max_v },
            passed,
            worst: worst.cloned(),
            notes: self.notes,
            rows: self.rows,
        }
    }
}

/// Scenario families used by the default suite.
pub mod families {
    use super::*;

    /// Symmetric constant visibility `sigma` on both arms, uninformative safe.
    pub fn symmetric(p_high: f64, p_low: f64, sigma: f64, value: ValueFunction) -> Result<Scenario> {
        Scenario::new(
            Arm::new(p_high, p_low)?,
            Arm::uninformative(0.5)?,
            SignalTech::new(0.7, 0.3)?,
            VisibilityKernel::symmetric(sigma)?,
            VisibilityKernel::symmetric(sigma)?,
            value,
        )
    }

    /// Linear-value members satisfying the no-conservatism hypotheses.
    pub fn prop1() -> Vec<Scenario> {
        let mut out = Vec::new();
        for (ph, pl) in [(0.8, 0.4), (0.6, 0.3), (0.9, 0.1)] {
            for sigma in [1.0, 0.6] {
                for value in [ValueFunction::identity(), ValueFunction::Linear { a: 2.0, b: 3.0 }] {
                    out.push(symmetric(ph, pl, sigma, value).expect("valid family"));
                }
            }
        }
        out
    }

    /// Constant kernels with failure visibility below one, linear value.
    pub fn band() -> Vec<Scenario> {
        [(0.8, 0.4), (0.6, 0.3), (0.9, 0.2)]
            .into_iter()
            .map(|(ph, pl)| {
                Scenario::new(
                    Arm::new(ph, pl).expect("valid arm"),
                    Arm::uninformative(0.5).expect("valid arm"),
                    SignalTech::new(0.7, 0.3).expect("valid signal"),
                    VisibilityKernel::constant(0.9, 0.5).expect("valid kernel"),
                    VisibilityKernel::symmetric(0.8).expect("valid kernel"),
                    ValueFunction::identity(),
                )
                .expect("valid family")
            })
            .collect()
    }

    /// Safe arm informative only about failures (`lambda_S = 1`).
    pub fn dominance_c1() -> Scenario {
        Scenario::new(
            Arm::new(0.8, 0.4).expect("valid arm"),
            Arm::with_ratios(
                OutcomeTech::new(0.5, 0.5).expect("valid tech"),
                LikelihoodPair::new(1.0, 0.5).expect("valid ratios"),
            )
            .expect("valid arm"),
            SignalTech::new(0.7, 0.3).expect("valid signal"),
            VisibilityKernel::symmetric(0.8).expect("valid kernel"),
            VisibilityKernel::symmetric(0.8).expect("valid kernel"),
            ValueFunction::identity(),
        )
        .expect("valid scenario")
    }

    /// Safe arm more informative on successes and as informative on failures,
    /// with equal kernels; the safe side dominates at every belief.
    pub fn dominance_c2() -> Scenario {
        Scenario::new(
            Arm::new(0.6, 0.3).expect("valid arm"),
            Arm::with_ratios(
                OutcomeTech::new(9.0 / 17.0, 3.0 / 17.0).expect("valid tech"),
                LikelihoodPair::new(3.0, 4.0 / 7.0).expect("valid ratios"),
            )
            .expect("valid arm"),
            SignalTech::new(0.7, 0.3).expect("valid signal"),
            VisibilityKernel::constant(0.9, 0.6).expect("valid kernel"),
            VisibilityKernel::constant(0.9, 0.6).expect("valid kernel"),
            ValueFunction::identity(),
        )
        .expect("valid scenario")
    }
}

fn is_prop1_family(s: &Scenario) -> bool {
    let levels = (s.vis_risky.constant_levels(), s.vis_safe.constant_levels());
    let symmetric = matches!(levels, (Some((a, b)), Some((c, d))) if a == b && b == c && c == d);
    symmetric && !s.safe.tech.is_informative() && s.safe.lr.is_uninformative()
}

/// `Delta = 0` and `Delta' = 0` under linear value, symmetric equal visibility
/// and an uninformative safe arm.
pub fn verify_prop1(family: &[Scenario], grid: &[f64], settings: &NumericSettings) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "prop1",
        "linear V, symmetric equal constant visibility, uninformative safe: Delta and Delta' vanish",
        settings.identity_tol,
        grid,
    );
    for (i, s) in family.iter().enumerate() {
        if !is_prop1_family(s) || s.value.d2(0.5) != 0.0 || !s.value.is_smooth() {
            return Err(Error::Config(format!("family member {i} violates the hypotheses")));
        }
        for &x in grid {
            let pi = Belief::interior(x)?;
            b.eq(format!("member {i}: Delta"), x, s.delta(pi)?, 0.0);
            b.eq(
                format!("member {i}: Delta'"),
                x,
                s.delta_prime_exact(pi, settings)?,
                0.0,
            );
        }
    }
    Ok(b.finish())
}

/// Sign of `Delta'` equals the sign of `V''` at every grid point.
pub fn verify_prop1_sign(
    id: &'static str,
    family: &[Scenario],
    grid: &[f64],
    settings: &NumericSettings,
) -> Result<VerificationReport> {
    let mut b = Builder::new(
        id,
        "quadratic V, symmetric equal constant visibility, uninformative safe: sign(Delta') = sign(V'')",
        0.0,
        grid,
    );
    for (i, s) in family.iter().enumerate() {
        if !is_prop1_family(s) {
            return Err(Error::Config(format!("family member {i} violates the hypotheses")));
        }
        let want = settings.sign(s.value.d2(0.5));
        if want == 0 {
            return Err(Error::Config(format!("family member {i} has zero curvature")));
        }
        let (mut slope_ok, mut level_ok) = (0, 0);
        for &x in grid {
            let pi = Belief::interior(x)?;
            let d = s.delta_prime_exact(pi, settings)?;
            let lvl = s.delta(pi)?;
            let signed = f64::from(want) * d;
            slope_ok += usize::from(settings.sign(d) == want);
            level_ok += usize::from(settings.sign(lvl) == want);
            b.row(
                format!("member {i}: Delta'"),
                x,
                d,
                0.0,
                if settings.sign(d) == want {
                    0.0
                } else {
                    settings.zero_band - signed
                },
            );
        }
        b.note(format!(
            "member {i}: sign(Delta') matches at {slope_ok}/{n} points, sign(Delta) matches at {level_ok}/{n}",
            n = grid.len()
        ));
    }
    Ok(b.finish())
}

fn random_techs(draws: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![(0.8, 0.4, 0.5)];
    while out.len() < draws {
        let u: f64 = rng.random_range(1e-6..1.0 - 1e-6);
        let v: f64 = rng.random_range(1e-6..1.0 - 1e-6);
        let x: f64 = rng.random_range(1e-6..1.0 - 1e-6);
        if u != v {
            out.push((u.max(v), u.min(v), x));
        }
    }
    out
}

/// `(p_H - p_L)(pi+ - pi-) + p_pi dpi+/dpi + (1 - p_pi) dpi-/dpi = 1` on random draws.
pub fn verify_unity_identity(draws: usize, seed: u64, settings: &NumericSettings) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "unity",
        format!("unity identity on {draws} seeded draws of (p_H, p_L, pi) (seed {seed})"),
        settings.identity_tol,
        &[],
    );
    for (ph, pl, x) in random_techs(draws, seed) {
        let tech = OutcomeTech::new(ph, pl)?;
        let pi = Belief::interior(x)?;
        let s = PosteriorSplit::of_tech(pi, &tech)?;
        let d = posterior_derivatives(pi, tech.likelihoods()?)?;
        let lhs = (ph - pl) * (s.pi_plus - s.pi_minus) + s.p_success * d.dpi_plus + (1.0 - s.p_success) * d.dpi_minus;
        b.eq(format!("p_H={ph}, p_L={pl}"), x, lhs, 1.0);
    }
    Ok(b.finish())
}

/// Variance forms and the gap closed form agree on random draws.
pub fn verify_variance_identities(draws: usize, seed: u64, settings: &NumericSettings) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "variance",
        format!("posterior variance forms and gap formula on {draws} seeded draws (seed {seed})"),
        settings.identity_tol,
        &[],
    );
    for (ph, pl, x) in random_techs(draws, seed) {
        let tech = OutcomeTech::new(ph, pl)?;
        let pi = Belief::interior(x)?;
        let f = variance_forms(pi, &tech)?;
        let s = PosteriorSplit::of_tech(pi, &tech)?;
        let label = format!("p_H={ph}, p_L={pl}");
        b.row(
            format!("{label}: variance forms"),
            x,
            f.moment_form,
            f.product_form,
            f.max_disagreement(),
        );
        b.eq(
            format!("{label}: gap"),
            x,
            s.pi_plus - s.pi_minus,
            posterior_gap(pi, tech.likelihoods()?)?,
        );
    }
    Ok(b.finish())
}

/// `p_pi (pi+ - pi) = (1 - p_pi)(pi - pi-)` on the grid.
pub fn verify_martingale(grid: &[f64], settings: &NumericSettings) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "martingale",
        "posteriors average to the prior",
        settings.identity_tol,
        grid,
    );
    for (ph, pl) in [(0.8, 0.4), (0.6, 0.3), (0.99, 0.01), (0.55, 0.45)] {
        let tech = OutcomeTech::new(ph, pl)?;
        for &x in grid {
            let s = PosteriorSplit::of_tech(Belief::interior(x)?, &tech)?;
            b.eq(
                format!("p_H={ph}, p_L={pl}"),
                x,
                s.p_success * s.jump_plus(),
                (1.0 - s.p_success) * s.jump_minus(),
            );
        }
    }
    Ok(b.finish())
}

/// Analytic posterior slopes match central differences.
pub fn verify_derivatives(grid: &[f64], settings: &NumericSettings) -> Result<VerificationReport> {
    let h = settings.fd_step;
    let mut b = Builder::new(
        "derivatives",
        "posterior-map slopes match central differences (relative error)",
        settings.fd_rel_tol,
        grid,
    );
    for (ph, pl) in [(0.8, 0.4), (0.6, 0.3), (0.9, 0.1)] {
        let lr = LikelihoodPair::from_probs(ph, pl)?;
        for &x in grid {
            let d = posterior_derivatives(Belief::interior(x)?, lr)?;
            let at = |y: f64| Belief::interior(y);
            let fd_up = (update_success(at(x + h)?, lr).value() - update_success(at(x - h)?, lr).value()) / (2.0 * h);
            let fd_down = (update_failure(at(x + h)?, lr).value() - update_failure(at(x - h)?, lr).value()) / (2.0 * h);
            for (label, a, n) in [("dpi+", d.dpi_plus, fd_up), ("dpi-", d.dpi_minus, fd_down)] {
                b.row(format!("p_H={ph}, p_L={pl}: {label}"), x, a, n, (a - n).abs() / a.abs());
            }
        }
    }
    Ok(b.finish())
}

/// Slopes of the posterior maps near the boundaries against their limits.
pub fn verify_boundaries(lr: LikelihoodPair, settings: &NumericSettings) -> Result<VerificationReport> {
    let e = settings.boundary_probe;
    let mut b = Builder::new(
        "boundaries",
        format!(
            "posterior-map slopes at pi = {e} and 1 - {e} against lambda, phi, 1/lambda, 1/phi (lambda = {}, phi = {})",
            lr.lambda, lr.phi
        ),
        settings.limit_tol,
        &[e, 1.0 - e],
    );
    let lim = boundary_limits(lr);
    let lo = posterior_derivatives(Belief::interior(e)?, lr)?;
    let hi = posterior_derivatives(Belief::interior(1.0 - e)?, lr)?;
    b.eq("dpi+ -> lambda", e, lo.dpi_plus, lim.dpi_plus_at0);
    b.eq("dpi- -> phi", e, lo.dpi_minus, lim.dpi_minus_at0);
    b.eq("dpi+ -> 1/lambda", 1.0 - e, hi.dpi_plus, lim.dpi_plus_at1);
    b.eq("dpi- -> 1/phi", 1.0 - e, hi.dpi_minus, lim.dpi_minus_at1);
    Ok(b.finish())
}

/// Central difference of `Delta'` in the risky arm's failure or success level.
fn level_partial(s: &Scenario, pi: Belief, failure: bool, h: f64) -> Result<f64> {
    let bump = |d: f64| -> Result<f64> {
        let mut t = s.clone();
        t.vis_risky = if failure {
            s.vis_risky.with_level_offsets(0.0, d)
        } else {
            s.vis_risky.with_level_offsets(d, 0.0)
        };
        t.delta_prime(pi)
    };
    Ok((bump(h)? - bump(-h)?) / (2.0 * h))
}

const LEVEL_STEP: f64 = 1e-5;

fn require_band_setting(s: &Scenario) -> Result<(f64, f64)> {
    if !s.safe.is_uninformative() || !s.vis_risky.is_flat() || !s.vis_safe.is_flat() {
        return Err(Error::Config(
            "needs an uninformative safe arm and constant kernels".into(),
        ));
    }
    if !matches!(s.value, ValueFunction::Linear { .. }) {
        return Err(Error::Config("needs a linear value function".into()));
    }
    if !s.risky.tech.is_informative() {
        return Err(Error::Config("the risky arm must be informative (p_H > p_L)".into()));
    }
    Ok((s.risky.tech.p_high, s.risky.tech.p_low))
}

/// The failure-visibility effect on `Delta'` stays in `[1 - p_H, 1 - p_L]`.
pub fn verify_reform_band(family: &[Scenario], grid: &[f64]) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "band",
        "finite-difference dDelta'/dsigma0 within [1 - p_H, 1 - p_L] (linear V)",
        1e-6,
        grid,
    );
    for (i, s) in family.iter().enumerate() {
        let (ph, pl) = require_band_setting(s)?;
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid {
            let v = level_partial(s, Belief::interior(x)?, true, LEVEL_STEP)?;
            values.push(v);
            b.within(format!("member {i} (p_H={ph}, p_L={pl})"), x, v, 1.0 - ph, 1.0 - pl);
        }
        let (mn, mx) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), &v| (a.min(v), c.max(v)));
        b.note(format!(
            "member {i}: partial ranges over [{mn:.12}, {mx:.12}] on the grid; band is [{:.12}, {:.12}]",
            1.0 - ph,
            1.0 - pl
        ));
        let steps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let shape = if steps.iter().all(|d| d.abs() <= 1e-9) {
            "constant in pi"
        } else if steps.iter().all(|&d| d >= -1e-9) {
            "non-decreasing in pi"
        } else if steps.iter().all(|&d| d <= 1e-9) {
            "non-increasing in pi"
        } else {
            "not monotone in pi"
        };
        b.note(format!(
            "member {i}: partial is {shape} (steps within 1e-9 count as flat)"
        ));
    }
    Ok(b.finish())
}

/// Boundary limits of the visibility partials against the band edges.
pub fn verify_band_limits(family: &[Scenario], settings: &NumericSettings) -> Result<VerificationReport> {
    let e = settings.boundary_probe;
    let mut b = Builder::new(
        "band-limits",
        "dDelta'/dsigma0 -> 1 - p_L (pi -> 0), 1 - p_H (pi -> 1); dDelta'/dsigma1 -> p_L (pi -> 0), p_H (pi -> 1)",
        settings.limit_tol,
        &[e, 1.0 - e],
    );
    for (i, s) in family.iter().enumerate() {
        let (ph, pl) = require_band_setting(s)?;
        let lo = Belief::interior(e)?;
        let hi = Belief::interior(1.0 - e)?;
        let tag = format!("member {i} (p_H={ph}, p_L={pl})");
        b.eq(
            format!("{tag}: sigma0, pi -> 0"),
            e,
            level_partial(s, lo, true, LEVEL_STEP)?,
            1.0 - pl,
        );
        b.eq(
            format!("{tag}: sigma0, pi -> 1"),
            1.0 - e,
            level_partial(s, hi, true, LEVEL_STEP)?,
            1.0 - ph,
        );
        b.eq(
            format!("{tag}: sigma1, pi -> 0"),
            e,
            level_partial(s, lo, false, LEVEL_STEP)?,
            pl,
        );
        b.eq(
            format!("{tag}: sigma1, pi -> 1"),
            1.0 - e,
            level_partial(s, hi, false, LEVEL_STEP)?,
            ph,
        );
        let vp = visibility_partials(Belief::interior(0.5)?, s)?;
        b.note(format!(
            "{tag}: analytic limits of the partials are sigma0: {:.12} (pi -> 0), {:.12} (pi -> 1); sigma1: {:.12} (pi -> 0), {:.12} (pi -> 1)",
            vp.limit_pi0_sigma0, vp.limit_pi1_sigma0, vp.limit_pi0_sigma1, vp.limit_pi1_sigma1
        ));
    }
    Ok(b.finish())
}

/// Closed-form visibility partials match finite differences in the kernel levels.
pub fn verify_visibility_partials(
    family: &[Scenario],
    grid: &[f64],
    settings: &NumericSettings,
) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "visibility-partials",
        "closed-form dDelta'/dsigma0 and dDelta'/dsigma1 match finite differences (relative error)",
        settings.fd_rel_tol,
        grid,
    );
    for (i, s) in family.iter().enumerate() {
        for &x in grid {
            let pi = Belief::interior(x)?;
            let vp = visibility_partials(pi, s)?;
            for (label, failure, a) in [("sigma0", true, vp.d_dsigma0), ("sigma1", false, vp.d_dsigma1)] {
                let n = level_partial(s, pi, failure, LEVEL_STEP)?;
                b.row(
                    format!("member {i}: {label}"),
                    x,
                    a,
                    n,
                    (a - n).abs() / a.abs().max(1e-300),
                );
            }
        }
    }
    Ok(b.finish())
}

/// The curvature bound guarantees a positive reform effect.
///
/// The value function is tangent to the identity at each probe with constant
/// curvature `k`, so `|V''| = |k|` and the bound compares `k` with `B / K`.
/// Curvatures listed in `local` are probed at `local_pi`; the global
/// threshold `inf B / sup K` is probed at every grid point with
/// `k = +-global_fraction * threshold`.
pub fn verify_curvature(
    base: &Scenario,
    local: &[f64],
    local_pi: f64,
    global_fraction: f64,
    grid: &[f64],
) -> Result<VerificationReport> {
    let (inf_b, sup_k, global) = global_curvature_threshold(base, grid)?;
    let mut b = Builder::new(
        "curvature",
        "|V''| below B/K (pointwise) or inf B / sup K (global) implies dDelta'/dsigma0 > 0",
        0.0,
        grid,
    );
    b.note(format!(
        "inf B = {inf_b:.12}, sup K = {sup_k:.12}, global threshold = {global:?}"
    ));
    let anchored = |x0: f64, k: f64| Scenario {
        value: ValueFunction::tangent_quadratic(x0, k),
        ..base.clone()
    };
    let check = |b: &mut Builder, label: String, x0: f64, k: f64, threshold: Option<f64>| -> Result<()> {
        let s = anchored(x0, k);
        let pi = Belief::interior(x0)?;
        let effect = level_partial(&s, pi, true, LEVEL_STEP)?;
        let applies = threshold.is_none_or(|t| k.abs() < t);
        if applies {
            b.row(
                label,
                x0,
                effect,
                0.0,
                if effect > 0.0 { 0.0 } else { -effect + f64::MIN_POSITIVE },
            );
        }
        Ok(())
    };
    let at = crate::sign_test::curvature_bound(Belief::interior(local_pi)?, base, 0.0)?;
    b.note(format!(
        "pi = {local_pi}: B = {:.12}, K = {:.12}, B/K = {:?}",
        at.b_val, at.k_val, at.threshold
    ));
    for &k in local {
        let cb = crate::sign_test::curvature_bound(Belief::interior(local_pi)?, base, k.abs())?;
        if !cb.verdict {
            b.note(format!(
                "|V''| = {} is not below B/K at pi = {local_pi}; not probed",
                k.abs()
            ));
            continue;
        }
        check(&mut b, format!("local V'' = {k}"), local_pi, k, cb.threshold)?;
    }
    if let Some(g) = global {
        let k = global_fraction * g;
        for &x in grid {
            for kk in [k, -k] {
                check(&mut b, format!("global V'' = {kk:.6}"), x, kk, Some(g))?;
            }
        }
    }
    Ok(b.finish())
}

/// `B(pi)` equals the linear-value failure partial.
pub fn verify_curvature_identity(
    base: &Scenario,
    grid: &[f64],
    settings: &NumericSettings,
) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "curvature-identity",
        "B(pi) equals the linear-V failure-visibility partial",
        settings.identity_tol,
        grid,
    );
    for &x in grid {
        let pi = Belief::interior(x)?;
        let cb = crate::sign_test::curvature_bound(pi, base, 0.0)?;
        let vp = visibility_partials(pi, base)?;
        b.eq("B vs linear partial", x, cb.b_val, vp.linear_dsigma0);
    }
    Ok(b.finish())
}

/// The weight condition holds exactly where `Phi >= Psi`.
pub fn verify_dominance(
    id: &'static str,
    scenario: &Scenario,
    grid: &[f64],
    require_everywhere: bool,
    settings: &NumericSettings,
) -> Result<VerificationReport> {
    let mut b = Builder::new(
        id,
        if require_everywhere {
            "weight condition <=> Phi >= Psi, and the condition holds at every grid point"
        } else {
            "weight condition <=> Phi >= Psi"
        },
        0.0,
        grid,
    );
    let mut holds = 0;
    for &x in grid {
        let pi = Belief::interior(x)?;
        let m = dominance_map(pi, scenario, settings.identity_tol)?;
        let gap = phi_safe(pi, scenario)? - psi(pi, scenario)?;
        let test = gap >= -settings.identity_tol;
        holds += usize::from(m.linear_condition_holds);
        b.holds(
            "condition <=> Phi >= Psi",
            x,
            m.safe_side - m.risky_side,
            gap,
            m.linear_condition_holds == test,
        );
        if require_everywhere {
            b.holds(
                "condition holds",
                x,
                m.safe_side,
                m.risky_side,
                m.linear_condition_holds,
            );
            let r = cutoff_slope_sign(pi, scenario, settings)?;
            b.holds("conservatism", x, r.phi, r.psi, r.conservatism_holds);
        }
    }
    b.note(format!("condition holds at {holds}/{} grid points", grid.len()));
    Ok(b.finish())
}

/// Exact and core `Delta'` are reported side by side and discrepancies flagged.
///
/// Under linear value and symmetric visibility the exact slope is zero while
/// the core expression is not; the report must flag every such point. Along
/// the dilation path both magnitudes must shrink toward zero.
pub fn verify_sign_test_consistency(
    taus: &[f64],
    probes: &[f64],
    settings: &NumericSettings,
) -> Result<VerificationReport> {
    let grid = default_grid();
    let mut b = Builder::new(
        "residual",
        "exact vs core Delta': discrepancies flagged under linear V; both vanish along the dilation path",
        0.0,
        &grid,
    );
    let lin = families::symmetric(0.8, 0.4, 1.0, ValueFunction::identity())?;
    let (mut flagged, mut max_res): (usize, f64) = (0, 0.0);
    for &x in &grid {
        let r = cutoff_slope_sign(Belief::interior(x)?, &lin, settings)?;
        let exact_zero = r.delta_prime_exact.abs() <= settings.identity_tol;
        let core_nonzero = settings.sign(r.delta_prime_core) != 0;
        flagged += usize::from(r.sign_discrepancy);
        max_res = max_res.max(r.residual.abs());
        b.holds(
            "linear V: exact = 0, flagged iff core sign != 0",
            x,
            r.delta_prime_exact,
            r.delta_prime_core,
            exact_zero && r.sign_discrepancy == core_nonzero,
        );
    }
    b.note(format!(
        "linear V: exact Delta' = 0 on the grid, core nonzero and flagged at {flagged}/{} points, max |residual| = {max_res:.6e}",
        grid.len()
    ));
    let values = [
        ("linear V", ValueFunction::identity()),
        ("V = x^2", ValueFunction::Quadratic { a: 0.0, b: 0.0, c: 1.0 }),
    ];
    for (name, value) in values {
        let base = families::symmetric(0.8, 0.4, 1.0, value)?;
        for &x in probes {
            let pi = Belief::interior(x)?;
            let mut prev: Option<(f64, f64)> = None;
            let mut first: Option<(f64, f64)> = None;
            let mut trail = Vec::new();
            for &tau in taus {
                let s = Scenario {
                    risky: base.risky.dilate(tau)?,
                    ..base.clone()
                };
                let exact = s.delta_prime_exact(pi, settings)?;
                let core = delta_prime_core(pi, &s)?;
                trail.push(format!(
                    "tau={tau}: exact={exact:.3e}, core={core:.3e}, residual={:.3e}",
                    exact - core
                ));
                let clean = |v: f64| if v.abs() <= settings.identity_tol { 0.0 } else { v.abs() };
                let cur = (clean(exact), clean(core));
                let shrinking = prev.is_none_or(|(pe, pc)| cur.0 <= pe && cur.1 <= pc);
                b.holds(
                    format!("{name}, tau = {tau}: |exact|, |core| non-increasing"),
                    x,
                    cur.0,
                    cur.1,
                    shrinking,
                );
                prev = Some(cur);
                first.get_or_insert(cur);
            }
            if let (Some(f), Some(l)) = (first, prev) {
                let ok = |a: f64, z: f64| z <= 0.5 * a || a <= settings.identity_tol;
                b.holds(
                    format!("{name}: magnitudes at least halve over the path"),
                    x,
                    l.0,
                    l.1,
                    ok(f.0, l.0) && ok(f.1, l.1),
                );
            }
            b.note(format!("{name}, pi = {x}: {}", trail.join("; ")));
        }
    }
    Ok(b.finish())
}

/// Identifiers of the registered claims, sorted.
pub const CLAIMS: [&str; 18] = [
    "band",
    "band-limits",
    "boundaries",
    "curvature",
    "curvature-identity",
    "derivatives",
    "dominance-c1",
    "dominance-c2",
    "dominance-identical",
    "martingale",
    "prop1",
    "prop1-concave",
    "prop1-convex",
    "residual",
    "unity",
    "variance",
    "variance-informativeness",
    "visibility-partials",
];

/// Runs one registered claim with the default families.
pub fn verify_claim(id: &str, seed: u64, settings: &NumericSettings) -> Result<VerificationReport> {
    let grid = default_grid();
    let quad = |c: f64, b: f64, a: f64| ValueFunction::Quadratic { a, b, c };
    match id {
        "prop1" => verify_prop1(&families::prop1(), &grid, settings),
        "prop1-convex" => verify_prop1_sign(
            "prop1-convex",
            &[families::symmetric(0.8, 0.4, 1.0, quad(1.0, 0.0, 0.0))?],
            &grid,
            settings,
        ),
        "prop1-concave" => verify_prop1_sign(
            "prop1-concave",
            &[families::symmetric(0.8, 0.4, 1.0, quad(-1.0, 2.0, -1.0))?],
            &grid,
            settings,
        ),
        "unity" => verify_unity_identity(10_000, seed, settings),
        "variance" => verify_variance_identities(10_000, seed, settings),
        "variance-informativeness" => verify_variance_informativeness(&grid),
        "martingale" => verify_martingale(&grid, settings),
        "derivatives" => verify_derivatives(&grid, settings),
        "boundaries" => verify_boundaries(LikelihoodPair::from_probs(0.6, 0.4)?, settings),
        "band" => verify_reform_band(&families::band(), &grid),
        "band-limits" => verify_band_limits(&families::band(), settings),
        "visibility-partials" => {
            let mut fam = families::band();
            fam.push(Scenario {
                value: quad(0.5, 1.0, 0.0),
                ..families::band()[0].clone()
            });
            verify_visibility_partials(&fam, &grid, settings)
        }
        "curvature" => verify_curvature(
            &families::symmetric(0.8, 0.4, 1.0, ValueFunction::identity())?,
            &[0.0, 1.0, -1.0],
            0.5,
            0.99,
            &grid,
        ),
        "curvature-identity" => verify_curvature_identity(
            &families::symmetric(0.8, 0.4, 1.0, ValueFunction::identity())?,
            &grid,
            settings,
        ),
        "dominance-c1" => verify_dominance("dominance-c1", &families::dominance_c1(), &grid, false, settings),
        "dominance-c2" => verify_dominance("dominance-c2", &families::dominance_c2(), &grid, true, settings),
        "dominance-identical" => {
            let mut s = families::dominance_c2();
            s.safe = s.risky;
            verify_dominance("dominance-identical", &s, &grid, true, settings)
        }
        "residual" => verify_sign_test_consistency(&[0.2, 0.1, 0.05], &[0.3, 0.5, 0.7], settings),
        other => Err(Error::Config(format!(
            "unknown claim `{other}`; known claims: {}",
            CLAIMS.join(", ")
        ))),
    }
}

/// Posterior variance rises with `lambda` and falls with `phi`.
pub fn verify_variance_informativeness(grid: &[f64]) -> Result<VerificationReport> {
    let mut b = Builder::new(
        "variance-informativeness",
        "posterior variance increases in lambda and decreases in phi",
        0.0,
        grid,
    );
    let lr = LikelihoodPair::new(2.0, 1.0 / 3.0)?;
    let var = |lr: LikelihoodPair, x: f64| -> Result<f64> {
        let v = x * (1.0 - x);
        Ok((lr.lambda - 1.0) * (1.0 - lr.phi) * v * v / (lr.d_lambda(x) * lr.d_phi(x)))
    };
    for &x in grid {
        let base = var(lr, x)?;
        let more_l = var(LikelihoodPair::new(2.5, lr.phi)?, x)?;
        let more_f = var(LikelihoodPair::new(lr.lambda, 0.5)?, x)?;
        b.holds("lambda 2 -> 2.5", x, more_l, base, more_l > base);
        b.holds("phi 1/3 -> 1/2", x, more_f, base, more_f < base);
    }
    Ok(b.finish())
}

/// Runs every registered claim; reports are sorted by claim id.
pub fn verify_all(seed: u64, settings: &NumericSettings) -> Result<Vec<VerificationReport>> {
    let mut out: Vec<VerificationReport> = CLAIMS
        .par_iter()
        .map(|id| verify_claim(id, seed, settings))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claim_list_is_sorted_and_unique() {
        let mut sorted = CLAIMS.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), CLAIMS.len());
    }

    #[test]
    fn unknown_claim_is_an_error() {
        assert!(verify_claim("nope", 1, &NumericSettings::default()).is_err());
    }

    #[test]
    fn prop1_rejects_asymmetric_family() {
        let mut s = families::prop1().remove(0);
        s.vis_risky = VisibilityKernel::constant(1.0, 0.5).unwrap();
        assert!(verify_prop1(&[s], &default_grid(), &NumericSettings::default()).is_err());
    }

    #[test]
    fn band_rejects_degenerate_risky_arm() {
        let mut s = families::band().remove(0);
        s.risky = Arm::uninformative(0.5).unwrap();
        assert!(verify_reform_band(&[s], &default_grid()).is_err());
    }
}
