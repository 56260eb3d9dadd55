//! Numeric tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// Tolerances and step sizes used across the crate.
///
/// Every comparison that is not exact reads its threshold from here, so a run
/// can be tightened or loosened from one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericSettings {
    /// Agreement required between algebraically equal closed forms.
    pub identity_tol: f64,
    /// Step for central finite differences in the belief.
    pub fd_step: f64,
    /// Relative tolerance when analytic and finite-difference values are compared.
    pub fd_rel_tol: f64,
    /// Absolute floor added to `fd_rel_tol` so values near zero compare sanely.
    pub fd_abs_tol: f64,
    /// Values with magnitude below this are classified as sign 0.
    pub zero_band: f64,
    /// Differences in value below this are treated as ties by the cutoff policy.
    pub tie_band: f64,
    /// Distance from 0 and 1 at which boundary limits are probed.
    pub boundary_probe: f64,
    /// Tolerance for limits probed at `boundary_probe`.
    pub limit_tol: f64,
    /// Convergence threshold for iterated demeaning.
    pub within_tol: f64,
    /// Iteration cap for iterated demeaning.
    pub within_max_iter: usize,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            identity_tol: 1e-12,
            fd_step: 1e-6,
            fd_rel_tol: 1e-6,
            fd_abs_tol: 1e-8,
            zero_band: 1e-10,
            tie_band: 1e-12,
            boundary_probe: 1e-4,
            limit_tol: 1e-3,
            within_tol: 1e-10,
            within_max_iter: 1000,
        }
    }
}

impl NumericSettings {
    /// Mixed relative/absolute closeness test used for finite-difference checks.
    pub fn fd_close(&self, analytic: f64, numeric: f64) -> bool {
        let scale = analytic.abs().max(numeric.abs());
        (analytic - numeric).abs() <= self.fd_rel_tol * scale + self.fd_abs_tol
    }

    /// Sign with the configured zero band.
    pub fn sign(&self, x: f64) -> i8 {
        if x.abs() < self.zero_band {
            0
        } else if x > 0.0 {
            1
        } else {
            -1
        }
    }
}

/// The default probe grid `0.01, 0.02, ..., 0.99`.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(0.01, 0.99, 99)
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
///
/// Points are computed as `start + i * step` rounded to 12 decimals so that
/// `0.07` prints as `0.07` rather than `0.07000000000000001`.
pub fn uniform_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    let x = start + step * i as f64;
                    (x * 1e12).round() / 1e12
                })
                .collect()
        }
    }
}
