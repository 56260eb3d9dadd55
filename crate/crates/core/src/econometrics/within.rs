use serde::{Deserialize, Serialize};

use super::frame::dense_ids;
use crate::error::{Error, Result};

/// Demeaned columns with convergence information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinResult {
    pub columns: Vec<Vec<f64>>,
    /// Number of sweeps that subtracted group means.
    pub iterations: usize,
    /// Largest group mean left at exit.
    pub max_residual_mean: f64,
    pub converged: bool,
}

/// One fixed-effect grouping with dense ids and group sizes.
#[derive(Debug, Clone)]
pub(crate) struct Grouping {
    pub ids: Vec<usize>,
    pub counts: Vec<f64>,
}

impl Grouping {
    pub fn new(raw: &[u32]) -> Self {
        let (ids, g) = dense_ids(raw);
        let mut counts = vec![0.0; g];
        for &i in &ids {
            counts[i] += 1.0;
        }
        Self { ids, counts }
    }

    pub fn n_groups(&self) -> usize {
        self.counts.len()
    }

    fn means(&self, col: &[f64], buf: &mut [f64]) {
        buf.iter_mut().for_each(|b| *b = 0.0);
        for (&g, &x) in self.ids.iter().zip(col) {
            buf[g] += x;
        }
        for (b, c) in buf.iter_mut().zip(&self.counts) {
            *b /= c;
        }
    }
}

/// Removes the fixed effects by alternating projections.
///
/// Sweeps subtract group means for each grouping in turn until every group
/// mean is below `tol` or `max_iter` sweeps have run.
pub fn within_transform(
    columns: &[&[f64]],
    fixed_effects: &[&[u32]],
    tol: f64,
    max_iter: usize,
) -> Result<WithinResult> {
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) || fixed_effects.iter().any(|g| g.len() != n) {
        return Err(Error::Config("within transform needs equal-length columns".into()));
    }
    let groupings: Vec<Grouping> = fixed_effects.iter().map(|g| Grouping::new(g)).collect();
    let mut out: Vec<Vec<f64>> = columns.iter().map(|c| c.to_vec()).collect();
    if groupings.is_empty() {
        return Ok(WithinResult {
            columns: out,
            iterations: 0,
            max_residual_mean: 0.0,
            converged: true,
        });
    }
    let mut bufs: Vec<Vec<f64>> = groupings.iter().map(|g| vec![0.0; g.n_groups()]).collect();
    let mut iterations = 0;
    loop {
        let mut worst: f64 = 0.0;
        for col in &out {
            for (g, buf) in groupings.iter().zip(bufs.iter_mut()) {
                g.means(col, buf);
                worst = worst.max(buf.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
        }
        if worst < tol || iterations >= max_iter {
            return Ok(WithinResult {
                columns: out,
                iterations,
                max_residual_mean: worst,
                converged: worst < tol,
            });
        }
        for col in out.iter_mut() {
            for (g, buf) in groupings.iter().zip(bufs.iter_mut()) {
                g.means(col, buf);
                for (x, &id) in col.iter_mut().zip(&g.ids) {
                    *x -= buf[id];
                }
            }
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fixed_effect_takes_one_pass() {
        let y = [1.0, 2.0, 3.0, 10.0, 20.0];
        let g = [0, 0, 0, 1, 1];
        let r = within_transform(&[&y], &[&g], 1e-12, 100).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.columns[0], vec![-1.0, 0.0, 1.0, -5.0, 5.0]);
    }

    #[test]
    fn balanced_two_way_converges_fast() {
        let (mut y, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..6u32 {
            for t in 0..4u32 {
                y.push((i * 3 + t * t) as f64 + ((i * 7 + t * 5) % 3) as f64);
                a.push(i);
                b.push(t);
            }
        }
        let r = within_transform(&[&y], &[&a, &b], 1e-10, 100).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 2);
    }
}
