use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::within::{within_transform, Grouping};
use crate::error::{Error, Result};
use crate::settings::NumericSettings;

/// One estimated coefficient with cluster-robust inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

/// Fixed-effects OLS fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFit {
    pub terms: Vec<Coefficient>,
    pub vcov: DMatrix<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Set when there are fewer than five clusters.
    pub few_clusters: bool,
    /// Fixed-effect degrees of freedom counted in the small-sample scaling.
    pub absorbed_dof: usize,
    pub within_iterations: usize,
}

impl FeFit {
    pub fn coef(&self, term: &str) -> Option<&Coefficient> {
        self.terms.iter().find(|c| c.term == term)
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|c| c.term == term)
    }
}

pub(crate) const MIN_CLUSTERS: usize = 5;

/// Columns of `xtx` that are linearly independent of earlier columns.
pub(crate) fn independent_columns(xtx: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let k = xtx.nrows();
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..k {
        let d = xtx[(j, j)];
        if !(d > 0.0) {
            continue;
        }
        if kept.is_empty() {
            kept.push(j);
            continue;
        }
        let s = xtx.select_rows(&kept).select_columns(&kept);
        let v = DVector::from_iterator(kept.len(), kept.iter().map(|&i| xtx[(i, j)]));
        let Some(chol) = s.cholesky() else { continue };
        let w = chol.solve(&v);
        if d - v.dot(&w) > rel_tol * d {
            kept.push(j);
        }
    }
    kept
}

pub(crate) fn to_matrix(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Checks full column rank and returns `(X'X)^-1`, naming dropped columns.
pub(crate) fn checked_inverse(xtx: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let kept = independent_columns(xtx, 1e-10);
    if kept.len() < names.len() {
        let dropped = (0..names.len())
            .filter(|i| !kept.contains(i))
            .map(|i| names[i].clone())
            .collect();
        return Err(Error::RankDeficient { columns: dropped });
    }
    xtx.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::RankDeficient {
            columns: names.to_vec(),
        })
}

/// Cluster-robust sandwich `c (X'X)^-1 [sum_g X_g' u_g u_g' X_g] (X'X)^-1` with
/// `c = G/(G-1) (N-1)/(N-K)`.
pub(crate) fn cluster_vcov(
    x: &DMatrix<f64>,
    bread: &DMatrix<f64>,
    resid: &[f64],
    cluster: &[u32],
    total_k: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let g = Grouping::new(cluster);
    let n_clusters = g.n_groups();
    let (n, k) = (x.nrows(), x.ncols());
    if n_clusters < 2 {
        return Err(Error::Estimation("need at least two clusters".into()));
    }
    if n <= total_k {
        return Err(Error::Estimation(format!("{n} observations for {total_k} parameters")));
    }
    let mut scores = DMatrix::<f64>::zeros(n_clusters, k);
    for i in 0..n {
        let c = g.ids[i];
        for j in 0..k {
            scores[(c, j)] += x[(i, j)] * resid[i];
        }
    }
    let meat = scores.tr_mul(&scores);
    let gf = n_clusters as f64;
    let scale = gf / (gf - 1.0) * (n as f64 - 1.0) / (n - total_k) as f64;
    Ok((bread * meat * bread * scale, n_clusters))
}

pub(crate) fn inference(names: &[String], beta: &DVector<f64>, vcov: &DMatrix<f64>, df: f64) -> Vec<Coefficient> {
    let t_dist = StudentsT::new(0.0, 1.0, df.max(1.0)).expect("valid t distribution");
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = vcov[(j, j)].max(0.0).sqrt();
            let t = beta[j] / se;
            let p = if t.is_finite() {
                2.0 * (1.0 - t_dist.cdf(t.abs()))
            } else {
                f64::NAN
            };
            Coefficient {
                term: name.clone(),
                estimate: beta[j],
                se,
                t,
                p,
            }
        })
        .collect()
}

/// Fixed-effect degrees of freedom not nested within clusters.
pub(crate) fn absorbed_dof(fixed_effects: &[&[u32]], cluster: &[u32]) -> usize {
    let cl = Grouping::new(cluster);
    fixed_effects
        .iter()
        .map(|fe| {
            let g = Grouping::new(fe);
            let mut home = vec![usize::MAX; g.n_groups()];
            let mut nested = true;
            for (i, &gid) in g.ids.iter().enumerate() {
                if home[gid] == usize::MAX {
                    home[gid] = cl.ids[i];
                } else if home[gid] != cl.ids[i] {
                    nested = false;
                    break;
                }
            }
            if nested {
                0
            } else {
                g.n_groups() - 1
            }
        })
        .sum()
}

/// OLS of `y` on `regressors` after absorbing `fixed_effects`, with standard
/// errors clustered on `cluster`.
pub fn fit_fe(
    y: &[f64],
    regressors: &[(String, Vec<f64>)],
    fixed_effects: &[&[u32]],
    cluster: &[u32],
    settings: &NumericSettings,
) -> Result<FeFit> {
    let mut cols: Vec<&[f64]> = vec![y];
    cols.extend(regressors.iter().map(|(_, v)| v.as_slice()));
    let w = within_transform(&cols, fixed_effects, settings.within_tol, settings.within_max_iter)?;
    if !w.converged {
        return Err(Error::NonConvergence {
            iterations: w.iterations,
            residual: w.max_residual_mean,
        });
    }
    let mut demeaned = w.columns;
    let yd = DVector::from_vec(demeaned.remove(0));
    let names: Vec<String> = regressors.iter().map(|(n, _)| n.clone()).collect();
    let x = to_matrix(&demeaned);
    let xtx = x.tr_mul(&x);
    let bread = checked_inverse(&xtx, &names)?;
    let beta = &bread * x.tr_mul(&yd);
    let resid: Vec<f64> = (&yd - &x * &beta).iter().copied().collect();
    let absorbed = absorbed_dof(fixed_effects, cluster);
    let (vcov, n_clusters) = cluster_vcov(&x, &bread, &resid, cluster, names.len() + absorbed)?;
    let terms = inference(&names, &beta, &vcov, n_clusters as f64 - 1.0);
    Ok(FeFit {
        terms,
        vcov,
        n_obs: y.len(),
        n_clusters,
        few_clusters: n_clusters < MIN_CLUSTERS,
        absorbed_dof: absorbed,
        within_iterations: w.iterations,
    })
}

/// Joint Wald test that the coefficients at `idx` are zero:
/// `F = b' V^-1 b / q` against `F(q, G - 1)`.
pub fn wald_test(fit: &FeFit, idx: &[usize]) -> Result<(f64, f64, f64, f64)> {
    let q = idx.len();
    if q == 0 {
        return Ok((f64::NAN, 0.0, 0.0, f64::NAN));
    }
    let b = DVector::from_iterator(q, idx.iter().map(|&i| fit.terms[i].estimate));
    let v = fit.vcov.select_rows(idx).select_columns(idx);
    let inv = v
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Estimation("singular covariance in Wald test".into()))?;
    let stat = (b.transpose() * inv * &b)[(0, 0)] / q as f64;
    let df2 = (fit.n_clusters as f64 - 1.0).max(1.0);
    let dist = FisherSnedecor::new(q as f64, df2).expect("valid F distribution");
    Ok((stat, q as f64, df2, 1.0 - dist.cdf(stat)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_clusters_give_hc1() {
        let x1: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let x2: Vec<f64> = (0..30).map(|i| ((i * 3) % 5) as f64 + 0.5 * i as f64).collect();
        let y: Vec<f64> = (0..30)
            .map(|i| 1.0 + 0.3 * x1[i] - 0.2 * x2[i] + ((i * 13) % 7) as f64 * 0.1)
            .collect();
        let ones = vec![1.0; 30];
        let regs = vec![("c".into(), ones), ("x1".into(), x1.clone()), ("x2".into(), x2.clone())];
        let cl: Vec<u32> = (0..30).collect();
        let fit = fit_fe(&y, &regs, &[], &cl, &NumericSettings::default()).unwrap();

        // HC1 by hand.
        let x = to_matrix(&regs.iter().map(|r| r.1.clone()).collect::<Vec<_>>());
        let bread = (x.tr_mul(&x)).try_inverse().unwrap();
        let b = &bread * x.tr_mul(&DVector::from_vec(y.clone()));
        let u = DVector::from_vec(y) - &x * &b;
        let mut meat = DMatrix::zeros(3, 3);
        for i in 0..30 {
            let row = x.row(i).transpose();
            meat += &row * row.transpose() * (u[i] * u[i]);
        }
        let hc1 = &bread * meat * &bread * (30.0 / 27.0);
        assert!((fit.vcov - hc1).abs().max() < 1e-12);
    }

    #[test]
    fn collinear_column_is_named() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = a.iter().map(|v| v * 0.5 + (v * 3.0).sin()).collect();
        let regs = vec![("a".into(), a), ("twice_a".into(), b)];
        let cl: Vec<u32> = (0..20).map(|i| i % 5).collect();
        match fit_fe(&y, &regs, &[], &cl, &NumericSettings::default()) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["twice_a".to_string()]),
            other => panic!("expected rank error, got {other:?}"),
        }
    }
}
