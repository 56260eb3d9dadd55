use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::ols::{fit_fe, wald_test, Coefficient, FeFit};
use crate::error::{Error, Result};
use crate::settings::NumericSettings;

fn default_fes() -> Vec<String> {
    vec!["author".into(), "field".into(), "period".into()]
}

/// Event-study regression: outcome on event-time dummies interacted with a
/// reputation column, absorbing fixed effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSpec {
    pub outcome: String,
    /// Column the event-time dummies are interacted with.
    pub interact_with: String,
    pub event_time: String,
    pub fixed_effects: Vec<String>,
    pub cluster: String,
    pub omitted_event_time: i32,
    /// Inclusive window; event times outside are binned into the endpoints.
    pub window: [i32; 2],
    pub controls: Vec<String>,
    /// Also include the event-time dummies on their own. Without them any
    /// level effect of the reform loads onto the interactions.
    pub main_effects: bool,
    /// Optional 0/1 column multiplying the event dummies; rows with zero act
    /// as pure controls (used for stacked cohorts).
    pub treated: Option<String>,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            outcome: "risky_share".into(),
            interact_with: "rep_pre".into(),
            event_time: "event_time".into(),
            fixed_effects: default_fes(),
            cluster: "field".into(),
            omitted_event_time: -1,
            window: [-5, 5],
            controls: Vec::new(),
            main_effects: true,
            treated: None,
        }
    }
}

impl RegressionSpec {
    pub fn for_outcome(outcome: &str) -> Self {
        Self {
            outcome: outcome.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.window;
        if lo >= hi {
            return Err(Error::Config(format!("event window [{lo}, {hi}] is empty")));
        }
        if !(lo..=hi).contains(&self.omitted_event_time) {
            return Err(Error::Config(format!(
                "omitted event time {} outside window [{lo}, {hi}]",
                self.omitted_event_time
            )));
        }
        if self.cluster.is_empty() {
            return Err(Error::Config("cluster column is required".into()));
        }
        Ok(())
    }

    /// Event times that get a coefficient.
    pub fn event_times(&self) -> Vec<i32> {
        (self.window[0]..=self.window[1])
            .filter(|&k| k != self.omitted_event_time)
            .collect()
    }

    fn term(&self, k: i32) -> String {
        format!("event[{k}]:{}", self.interact_with)
    }
}

/// One event-time coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCoefficient {
    pub event_time: i32,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStudyResult {
    pub outcome: String,
    /// Sorted by event time; the omitted period has no entry.
    pub coefficients: Vec<EventCoefficient>,
    /// Event-time main effects and controls.
    pub controls: Vec<Coefficient>,
    /// Wald F over all lead coefficients (k < -1).
    pub pretrend_stat: f64,
    pub pretrend_df: (f64, f64),
    pub pretrend_p: f64,
    /// Mean of the coefficients at k >= 0.
    pub post_avg: f64,
    pub post_avg_se: f64,
    pub post_avg_early: f64,
    pub post_avg_late: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub few_clusters: bool,
    pub within_iterations: usize,
}

impl EventStudyResult {
    pub fn coef(&self, k: i32) -> Option<&EventCoefficient> {
        self.coefficients.iter().find(|c| c.event_time == k)
    }

    /// All coefficients as a flat table, event terms first.
    pub fn table(&self, interact_with: &str) -> Vec<Coefficient> {
        self.coefficients
            .iter()
            .map(|c| Coefficient {
                term: format!("event[{}]:{interact_with}", c.event_time),
                estimate: c.estimate,
                se: c.se,
                t: c.t,
                p: c.p,
            })
            .chain(self.controls.iter().cloned())
            .collect()
    }
}

fn groups<'a>(frame: &'a Frame, names: &[String]) -> Result<Vec<&'a [u32]>> {
    names.iter().map(|n| frame.group(n)).collect()
}

/// Mean of the coefficients in `idx` with its standard error.
fn average(fit: &FeFit, idx: &[usize]) -> (f64, f64) {
    if idx.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let w = 1.0 / idx.len() as f64;
    let est = idx.iter().map(|&i| fit.terms[i].estimate).sum::<f64>() * w;
    let v = fit.vcov.select_rows(idx).select_columns(idx);
    let ones = DVector::from_element(idx.len(), w);
    (est, (ones.transpose() * v * &ones)[(0, 0)].max(0.0).sqrt())
}

pub fn fit_event_study(frame: &Frame, spec: &RegressionSpec, settings: &NumericSettings) -> Result<EventStudyResult> {
    spec.validate()?;
    let mut needed: Vec<&str> = vec![&spec.outcome, &spec.interact_with, &spec.event_time];
    needed.extend(spec.controls.iter().map(String::as_str));
    needed.extend(spec.treated.as_deref());
    let data = frame.complete_cases(&needed)?;
    let cluster = data.group(&spec.cluster)?;
    let fes = groups(&data, &spec.fixed_effects)?;
    let y = data.numeric(&spec.outcome)?;
    let rep = data.numeric(&spec.interact_with)?;
    let treated = match &spec.treated {
        Some(c) => data.numeric(c)?.to_vec(),
        None => vec![1.0; data.len()],
    };
    let [lo, hi] = spec.window;
    let binned: Vec<i32> = data
        .numeric(&spec.event_time)?
        .iter()
        .map(|&e| (e.round() as i32).clamp(lo, hi))
        .collect();

    let times = spec.event_times();
    let mut regs: Vec<(String, Vec<f64>)> = times
        .iter()
        .map(|&k| {
            let col = binned
                .iter()
                .zip(rep.iter().zip(&treated))
                .map(|(&e, (&r, &d))| if e == k { r * d } else { 0.0 })
                .collect();
            (spec.term(k), col)
        })
        .collect();
    if spec.main_effects {
        for &k in &times {
            let col = binned
                .iter()
                .zip(&treated)
                .map(|(&e, &d)| if e == k { d } else { 0.0 })
                .collect();
            regs.push((format!("event[{k}]"), col));
        }
    }
    for c in &spec.controls {
        regs.push((c.clone(), data.numeric(c)?.to_vec()));
    }
    let fit = fit_fe(y, &regs, &fes, cluster, settings)?;

    let idx_where = |f: &dyn Fn(i32) -> bool| -> Vec<usize> {
        times
            .iter()
            .enumerate()
            .filter(|(_, &k)| f(k))
            .map(|(i, _)| i)
            .collect()
    };
    let leads = idx_where(&|k| k < -1);
    let (pretrend_stat, df1, df2, pretrend_p) = wald_test(&fit, &leads)?;
    let (post_avg, post_avg_se) = average(&fit, &idx_where(&|k| k >= 0));
    let (post_avg_early, _) = average(&fit, &idx_where(&|k| (0..=2).contains(&k)));
    let (post_avg_late, _) = average(&fit, &idx_where(&|k| (3..=5).contains(&k)));

    let coefficients = times
        .iter()
        .zip(&fit.terms)
        .map(|(&k, c)| EventCoefficient {
            event_time: k,
            estimate: c.estimate,
            se: c.se,
            t: c.t,
            p: c.p,
        })
        .collect();
    Ok(EventStudyResult {
        outcome: spec.outcome.clone(),
        coefficients,
        controls: fit.terms[times.len()..].to_vec(),
        pretrend_stat,
        pretrend_df: (df1, df2),
        pretrend_p,
        post_avg,
        post_avg_se,
        post_avg_early,
        post_avg_late,
        n_obs: fit.n_obs,
        n_clusters: fit.n_clusters,
        few_clusters: fit.few_clusters,
        within_iterations: fit.within_iterations,
    })
}

/// Pooled difference-in-differences: outcome on `treat x interact_with` plus
/// controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PooledSpec {
    pub outcome: String,
    pub treat: String,
    pub interact_with: String,
    pub controls: Vec<String>,
    pub fixed_effects: Vec<String>,
    pub cluster: String,
}

impl Default for PooledSpec {
    fn default() -> Self {
        Self {
            outcome: "risky_share".into(),
            treat: "post".into(),
            interact_with: "rep_pre".into(),
            controls: vec!["post".into()],
            fixed_effects: default_fes(),
            cluster: "field".into(),
        }
    }
}

impl PooledSpec {
    pub fn term(&self) -> String {
        format!("{}:{}", self.treat, self.interact_with)
    }
}

pub fn fit_pooled(frame: &Frame, spec: &PooledSpec, settings: &NumericSettings) -> Result<FeFit> {
    let mut needed: Vec<&str> = vec![&spec.outcome, &spec.treat, &spec.interact_with];
    needed.extend(spec.controls.iter().map(String::as_str));
    let data = frame.complete_cases(&needed)?;
    let d = data.numeric(&spec.treat)?;
    let r = data.numeric(&spec.interact_with)?;
    let mut regs = vec![(spec.term(), d.iter().zip(r).map(|(a, b)| a * b).collect())];
    for c in &spec.controls {
        regs.push((c.clone(), data.numeric(c)?.to_vec()));
    }
    let fes = groups(&data, &spec.fixed_effects)?;
    fit_fe(
        data.numeric(&spec.outcome)?,
        &regs,
        &fes,
        data.group(&spec.cluster)?,
        settings,
    )
}

/// First stage and second stage of an instrumental-variables fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvResult {
    pub first_stage_coef: f64,
    pub first_stage_se: f64,
    /// Squared cluster t statistic of the excluded instrument.
    pub first_stage_f: f64,
    pub second_stage: BTreeMap<String, (f64, f64)>,
    pub second_stage_table: Vec<Coefficient>,
    pub weak_instrument: bool,
    pub n_obs: usize,
    pub n_clusters: usize,
}

pub const WEAK_INSTRUMENT_F: f64 = 10.0;

/// Field-period regression of `outcome` on `instrument` with fixed effects.
pub fn fit_first_stage(
    frame: &Frame,
    outcome: &str,
    instrument: &str,
    fixed_effects: &[String],
    cluster: &str,
    settings: &NumericSettings,
) -> Result<IvResult> {
    let data = frame.complete_cases(&[outcome, instrument])?;
    let regs = vec![(instrument.to_string(), data.numeric(instrument)?.to_vec())];
    let fes = groups(&data, fixed_effects)?;
    let fit = fit_fe(data.numeric(outcome)?, &regs, &fes, data.group(cluster)?, settings)?;
    let c = &fit.terms[0];
    let f = c.t * c.t;
    Ok(IvResult {
        first_stage_coef: c.estimate,
        first_stage_se: c.se,
        first_stage_f: f,
        second_stage: BTreeMap::new(),
        second_stage_table: Vec::new(),
        weak_instrument: !(f >= WEAK_INSTRUMENT_F),
        n_obs: fit.n_obs,
        n_clusters: fit.n_clusters,
    })
}

/// Just-identified two-stage least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IvSpec {
    pub outcome: String,
    pub endogenous: String,
    pub instrument: String,
    pub exogenous: Vec<String>,
    pub fixed_effects: Vec<String>,
    pub cluster: String,
}

impl Default for IvSpec {
    fn default() -> Self {
        Self {
            outcome: "risky_share".into(),
            endogenous: "null_survive_x_rep".into(),
            instrument: "rr_intensity_x_rep".into(),
            exogenous: Vec::new(),
            fixed_effects: default_fes(),
            cluster: "field".into(),
        }
    }
}

pub fn fit_2sls(frame: &Frame, spec: &IvSpec, settings: &NumericSettings) -> Result<IvResult> {
    use super::ols::{absorbed_dof, checked_inverse, cluster_vcov, inference, to_matrix};
    use super::within::within_transform;

    let mut needed: Vec<&str> = vec![&spec.outcome, &spec.endogenous, &spec.instrument];
    needed.extend(spec.exogenous.iter().map(String::as_str));
    let data = frame.complete_cases(&needed)?;
    let fes = groups(&data, &spec.fixed_effects)?;
    let cluster = data.group(&spec.cluster)?;

    let mut cols: Vec<&[f64]> = vec![
        data.numeric(&spec.outcome)?,
        data.numeric(&spec.endogenous)?,
        data.numeric(&spec.instrument)?,
    ];
    for c in &spec.exogenous {
        cols.push(data.numeric(c)?);
    }
    let w = within_transform(&cols, &fes, settings.within_tol, settings.within_max_iter)?;
    if !w.converged {
        return Err(Error::NonConvergence {
            iterations: w.iterations,
            residual: w.max_residual_mean,
        });
    }
    let mut c = w.columns.into_iter();
    let y = DVector::from_vec(c.next().unwrap());
    let endog = c.next().unwrap();
    let instr = c.next().unwrap();
    let exog: Vec<Vec<f64>> = c.collect();
    let absorbed = absorbed_dof(&fes, cluster);

    // First stage: endogenous on instrument and exogenous controls.
    let mut z_cols = vec![instr];
    z_cols.extend(exog.iter().cloned());
    let mut z_names = vec![spec.instrument.clone()];
    z_names.extend(spec.exogenous.iter().cloned());
    let z = to_matrix(&z_cols);
    let z_bread = checked_inverse(&z.tr_mul(&z), &z_names)?;
    let pi_hat = &z_bread * z.tr_mul(&DVector::from_vec(endog.clone()));
    let fitted = &z * &pi_hat;
    let v: Vec<f64> = (DVector::from_vec(endog.clone()) - &fitted).iter().copied().collect();
    let (z_vcov, n_clusters) = cluster_vcov(&z, &z_bread, &v, cluster, z_names.len() + absorbed)?;
    let first_se = z_vcov[(0, 0)].max(0.0).sqrt();
    let first_f = (pi_hat[0] / first_se).powi(2);

    // Second stage on fitted values; residuals use the actual regressor.
    let mut xhat_cols = vec![fitted.iter().copied().collect::<Vec<f64>>()];
    xhat_cols.extend(exog.iter().cloned());
    let mut x_cols = vec![endog];
    x_cols.extend(exog);
    let mut names = vec![spec.endogenous.clone()];
    names.extend(spec.exogenous.iter().cloned());
    let xhat = to_matrix(&xhat_cols);
    let x = to_matrix(&x_cols);
    let bread = checked_inverse(&xhat.tr_mul(&xhat), &names)?;
    let beta = &bread * xhat.tr_mul(&y);
    let u: Vec<f64> = (&y - &x * &beta).iter().copied().collect();
    let (vcov, _) = cluster_vcov(&xhat, &bread, &u, cluster, names.len() + absorbed)?;
    let table = inference(&names, &beta, &vcov, n_clusters as f64 - 1.0);
    Ok(IvResult {
        first_stage_coef: pi_hat[0],
        first_stage_se: first_se,
        first_stage_f: first_f,
        second_stage: table.iter().map(|c| (c.term.clone(), (c.estimate, c.se))).collect(),
        second_stage_table: table,
        weak_instrument: !(first_f >= WEAK_INSTRUMENT_F),
        n_obs: data.len(),
        n_clusters,
    })
}
