use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::event::{
    fit_2sls, fit_event_study, fit_first_stage, fit_pooled, EventStudyResult, IvResult, IvSpec, PooledSpec,
    RegressionSpec,
};
use super::frame::Frame;
use super::ols::Coefficient;
use crate::error::{Error, Result};
use crate::settings::NumericSettings;
use crate::sim::{aggregate, simulate, AggregateCell, PanelRow, SimConfig};

/// Estimation choices shared by every regression in the panel pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSpec {
    /// `rep_pre` (continuous) or `high_rep` (median split).
    pub interact_with: String,
    pub window: [i32; 2],
    pub omitted_event_time: i32,
    pub fixed_effects: Vec<String>,
    pub cluster: String,
    /// Cells with fewer projects are dropped before estimation.
    pub min_cell: usize,
    /// Re-estimate the event studies on stacked cohorts with not-yet-treated controls.
    pub stacked: bool,
}

impl Default for EstimationSpec {
    fn default() -> Self {
        Self {
            interact_with: "rep_pre".into(),
            window: [-5, 5],
            omitted_event_time: -1,
            fixed_effects: vec!["author".into(), "field".into(), "period".into()],
            cluster: "field".into(),
            min_cell: 1,
            stacked: false,
        }
    }
}

impl EstimationSpec {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.interact_with.as_str(), "rep_pre" | "high_rep") {
            return Err(Error::Config(format!(
                "estimation.interact_with must be rep_pre or high_rep, got `{}`",
                self.interact_with
            )));
        }
        if self.min_cell == 0 {
            return Err(Error::Config("estimation.min_cell must be at least 1".into()));
        }
        self.event_spec("risky_share").validate()
    }

    pub fn event_spec(&self, outcome: &str) -> RegressionSpec {
        RegressionSpec {
            outcome: outcome.into(),
            interact_with: self.interact_with.clone(),
            event_time: "event_time".into(),
            fixed_effects: self.fixed_effects.clone(),
            cluster: self.cluster.clone(),
            omitted_event_time: self.omitted_event_time,
            window: self.window,
            controls: Vec::new(),
            main_effects: true,
            treated: None,
        }
    }

    pub fn pooled_spec(&self, outcome: &str) -> PooledSpec {
        PooledSpec {
            outcome: outcome.into(),
            treat: "post".into(),
            interact_with: self.interact_with.clone(),
            controls: vec!["post".into()],
            fixed_effects: self.fixed_effects.clone(),
            cluster: self.cluster.clone(),
        }
    }

    pub fn iv_spec(&self, outcome: &str) -> IvSpec {
        IvSpec {
            outcome: outcome.into(),
            endogenous: format!("null_survive:{}", self.interact_with),
            instrument: format!("rr_intensity:{}", self.interact_with),
            exogenous: vec!["rr_intensity".into()],
            fixed_effects: self.fixed_effects.clone(),
            cluster: self.cluster.clone(),
        }
    }
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Author-field-period regression frame with the field-level regressors
/// merged in, and the field-period frame.
pub fn build_frames(author_cells: &[AggregateCell], field_cells: &[AggregateCell]) -> Result<(Frame, Frame)> {
    let field_map: BTreeMap<(u32, u32), &AggregateCell> = field_cells
        .iter()
        .map(|c| ((c.key.field_id, c.key.period), c))
        .collect();

    let n = author_cells.len();
    let mut a = Frame::new(n);
    let col = |f: &dyn Fn(&AggregateCell) -> f64| author_cells.iter().map(f).collect::<Vec<f64>>();
    let field_of = |c: &AggregateCell| field_map.get(&(c.key.field_id, c.key.period)).copied();
    a.insert_numeric("risky_share", col(&|c| c.risky_share))?;
    a.insert_numeric("succ_risky", col(&|c| opt(c.succ_risky)))?;
    a.insert_numeric("rep_pre", col(&|c| opt(c.rep_pre)))?;
    a.insert_numeric("high_rep", col(&|c| c.high_rep.map_or(f64::NAN, f64::from)))?;
    a.insert_numeric("event_time", col(&|c| f64::from(c.event_time)))?;
    a.insert_numeric("post", col(&|c| f64::from(u8::from(c.post))))?;
    a.insert_numeric(
        "adoption_period",
        col(&|c| f64::from(c.key.period as i32 - c.event_time)),
    )?;
    let ns = col(&|c| field_of(c).map_or(f64::NAN, |f| opt(f.null_survive)));
    let rr = col(&|c| field_of(c).map_or(f64::NAN, |f| f.rr_intensity));
    for rep in ["rep_pre", "high_rep"] {
        let r = a.numeric(rep)?.to_vec();
        a.insert_numeric(
            &format!("null_survive:{rep}"),
            ns.iter().zip(&r).map(|(x, y)| x * y).collect(),
        )?;
        a.insert_numeric(
            &format!("rr_intensity:{rep}"),
            rr.iter().zip(&r).map(|(x, y)| x * y).collect(),
        )?;
    }
    a.insert_numeric("null_survive", ns)?;
    a.insert_numeric("rr_intensity", rr)?;
    a.insert_group(
        "author",
        author_cells.iter().map(|c| c.key.author_id.unwrap_or(0)).collect(),
    )?;
    a.insert_group("field", author_cells.iter().map(|c| c.key.field_id).collect())?;
    a.insert_group("period", author_cells.iter().map(|c| c.key.period).collect())?;

    let mut f = Frame::new(field_cells.len());
    let fcol = |g: &dyn Fn(&AggregateCell) -> f64| field_cells.iter().map(g).collect::<Vec<f64>>();
    f.insert_numeric("null_survive", fcol(&|c| opt(c.null_survive)))?;
    f.insert_numeric("rr_intensity", fcol(&|c| c.rr_intensity))?;
    f.insert_numeric("event_time", fcol(&|c| f64::from(c.event_time)))?;
    f.insert_numeric("post", fcol(&|c| f64::from(u8::from(c.post))))?;
    f.insert_group("field", field_cells.iter().map(|c| c.key.field_id).collect())?;
    f.insert_group("period", field_cells.iter().map(|c| c.key.period).collect())?;
    Ok((a, f))
}

/// Stacks one sub-panel per adoption cohort: the cohort's own fields plus
/// fields not yet treated by the end of the window, with time re-centred on
/// the cohort's adoption period.
///
/// The returned frame carries a `treated` indicator and cohort-specific
/// `stack_author` / `stack_period` groupings.
pub fn stack_cohorts(frame: &Frame, window: [i32; 2]) -> Result<Frame> {
    let adoption = frame.numeric("adoption_period")?;
    let period = frame.group("period")?;
    let author = frame.group("author")?;
    let mut cohorts: Vec<i32> = adoption.iter().map(|&a| a as i32).collect();
    cohorts.sort_unstable();
    cohorts.dedup();

    let (mut idx, mut treated, mut event, mut s_author, mut s_period) = (vec![], vec![], vec![], vec![], vec![]);
    for (ci, &c) in cohorts.iter().enumerate() {
        let lo = c + window[0];
        let hi = c + window[1];
        let has_controls = adoption.iter().any(|&a| a as i32 > hi);
        if !has_controls {
            continue;
        }
        for i in 0..frame.len() {
            let t = period[i] as i32;
            let a = adoption[i] as i32;
            if t < lo || t > hi || (a != c && a <= hi) {
                continue;
            }
            idx.push(i);
            treated.push(f64::from(u8::from(a == c)));
            event.push(f64::from(t - c));
            s_author.push(ci as u32 * 1_000_000 + author[i]);
            s_period.push(ci as u32 * 1_000 + period[i]);
        }
    }
    if idx.is_empty() {
        return Err(Error::Estimation("no cohort has not-yet-treated controls".into()));
    }
    let mut out = frame.take(&idx);
    out.insert_numeric("treated", treated)?;
    out.insert_numeric("event_time", event)?;
    out.insert_group("stack_author", s_author)?;
    out.insert_group("stack_period", s_period)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledResult {
    pub outcome: String,
    pub coefficients: Vec<Coefficient>,
    pub n_obs: usize,
    pub n_clusters: usize,
}

/// Every regression of the reduced-form and instrumental-variables design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelEstimates {
    pub event_risky: EventStudyResult,
    pub event_success: EventStudyResult,
    pub pooled_risky: PooledResult,
    pub pooled_success: PooledResult,
    pub first_stage: IvResult,
    pub iv_risky: IvResult,
    pub iv_success: IvResult,
    pub stacked_risky: Option<EventStudyResult>,
    pub stacked_success: Option<EventStudyResult>,
}

pub const OUTCOMES: [&str; 2] = ["risky_share", "succ_risky"];

/// One line of the flat coefficient table; `term` is `model/regressor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
}

fn rows_for<'a>(
    model: &str,
    coefs: &'a [Coefficient],
    n_obs: usize,
    n_clusters: usize,
) -> impl Iterator<Item = TableRow> + 'a {
    let model = model.to_string();
    coefs.iter().map(move |c| TableRow {
        term: format!("{model}/{}", c.term),
        estimate: c.estimate,
        se: c.se,
        t: c.t,
        p: c.p,
        n_obs,
        n_clusters,
    })
}

impl PanelEstimates {
    /// Every estimated coefficient, model by model.
    pub fn coefficient_table(&self, interact_with: &str) -> Vec<TableRow> {
        let mut out = Vec::new();
        let mut events = vec![
            ("event_risky", &self.event_risky),
            ("event_success", &self.event_success),
        ];
        if let Some(s) = &self.stacked_risky {
            events.push(("stacked_risky", s));
        }
        if let Some(s) = &self.stacked_success {
            events.push(("stacked_success", s));
        }
        for (name, e) in events {
            let table = e.table(interact_with);
            out.extend(rows_for(name, &table, e.n_obs, e.n_clusters));
        }
        for (name, p) in [
            ("pooled_risky", &self.pooled_risky),
            ("pooled_success", &self.pooled_success),
        ] {
            out.extend(rows_for(name, &p.coefficients, p.n_obs, p.n_clusters));
        }
        let fs = &self.first_stage;
        let t = fs.first_stage_coef / fs.first_stage_se;
        let p = if fs.n_clusters > 1 && t.is_finite() {
            StudentsT::new(0.0, 1.0, (fs.n_clusters - 1) as f64).map_or(f64::NAN, |d| 2.0 * (1.0 - d.cdf(t.abs())))
        } else {
            f64::NAN
        };
        out.push(TableRow {
            term: "first_stage/rr_intensity".into(),
            estimate: fs.first_stage_coef,
            se: fs.first_stage_se,
            t,
            p,
            n_obs: fs.n_obs,
            n_clusters: fs.n_clusters,
        });
        for (name, iv) in [("iv_risky", &self.iv_risky), ("iv_success", &self.iv_success)] {
            out.extend(rows_for(name, &iv.second_stage_table, iv.n_obs, iv.n_clusters));
        }
        out
    }
}

fn pooled(frame: &Frame, spec: &EstimationSpec, outcome: &str, settings: &NumericSettings) -> Result<PooledResult> {
    let fit = fit_pooled(frame, &spec.pooled_spec(outcome), settings)?;
    Ok(PooledResult {
        outcome: outcome.into(),
        coefficients: fit.terms,
        n_obs: fit.n_obs,
        n_clusters: fit.n_clusters,
    })
}

fn stacked(
    frame: &Frame,
    spec: &EstimationSpec,
    outcome: &str,
    settings: &NumericSettings,
) -> Result<EventStudyResult> {
    let stacked = stack_cohorts(frame, spec.window)?;
    let mut es = spec.event_spec(outcome);
    es.fixed_effects = vec!["stack_author".into(), "stack_period".into()];
    es.treated = Some("treated".into());
    fit_event_study(&stacked, &es, settings)
}

/// Aggregates simulated rows and runs the full estimation suite.
pub fn estimate_panel(rows: &[PanelRow], spec: &EstimationSpec, settings: &NumericSettings) -> Result<PanelEstimates> {
    spec.validate()?;
    let (author_cells, field_cells) = aggregate(rows, spec.min_cell);
    let (af, ff) = build_frames(&author_cells, &field_cells)?;
    let field_fes: Vec<String> = spec
        .fixed_effects
        .iter()
        .filter(|f| matches!(f.as_str(), "field" | "period"))
        .cloned()
        .collect();
    let (stacked_risky, stacked_success) = if spec.stacked {
        (
            Some(stacked(&af, spec, OUTCOMES[0], settings)?),
            Some(stacked(&af, spec, OUTCOMES[1], settings)?),
        )
    } else {
        (None, None)
    };
    Ok(PanelEstimates {
        event_risky: fit_event_study(&af, &spec.event_spec(OUTCOMES[0]), settings)?,
        event_success: fit_event_study(&af, &spec.event_spec(OUTCOMES[1]), settings)?,
        pooled_risky: pooled(&af, spec, OUTCOMES[0], settings)?,
        pooled_success: pooled(&af, spec, OUTCOMES[1], settings)?,
        first_stage: fit_first_stage(&ff, "null_survive", "rr_intensity", &field_fes, &spec.cluster, settings)?,
        iv_risky: fit_2sls(&af, &spec.iv_spec(OUTCOMES[0]), settings)?,
        iv_success: fit_2sls(&af, &spec.iv_spec(OUTCOMES[1]), settings)?,
        stacked_risky,
        stacked_success,
    })
}

/// Headline numbers from one simulated replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub risky_post_avg: f64,
    pub success_post_avg: f64,
    pub risky_pretrend_p: f64,
    pub success_pretrend_p: f64,
    pub pooled_risky: f64,
    pub first_stage_coef: f64,
    pub first_stage_f: f64,
    pub iv_lambda: f64,
    pub iv_rho: f64,
}

impl Replication {
    fn from_estimates(seed: u64, e: &PanelEstimates) -> Self {
        let first = |v: &[Coefficient]| v.first().map_or(f64::NAN, |c| c.estimate);
        Self {
            seed,
            risky_post_avg: e.event_risky.post_avg,
            success_post_avg: e.event_success.post_avg,
            risky_pretrend_p: e.event_risky.pretrend_p,
            success_pretrend_p: e.event_success.pretrend_p,
            pooled_risky: first(&e.pooled_risky.coefficients),
            first_stage_coef: e.first_stage.first_stage_coef,
            first_stage_f: e.first_stage.first_stage_f,
            iv_lambda: first(&e.iv_risky.second_stage_table),
            iv_rho: first(&e.iv_success.second_stage_table),
        }
    }
}

/// Rejection and sign frequencies over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub reps: usize,
    pub beta_positive: f64,
    pub theta_negative: f64,
    pub pretrend_reject_risky: f64,
    pub pretrend_reject_success: f64,
    pub first_stage_strong: f64,
    pub lambda_positive: f64,
    pub rho_negative: f64,
    pub mean_pooled_risky: f64,
}

pub const PRETREND_LEVEL: f64 = 0.05;

impl MonteCarloSummary {
    pub fn from_replications(reps: &[Replication]) -> Self {
        let n = reps.len().max(1) as f64;
        let share = |f: &dyn Fn(&Replication) -> bool| reps.iter().filter(|r| f(r)).count() as f64 / n;
        Self {
            reps: reps.len(),
            beta_positive: share(&|r| r.risky_post_avg > 0.0),
            theta_negative: share(&|r| r.success_post_avg < 0.0),
            pretrend_reject_risky: share(&|r| r.risky_pretrend_p < PRETREND_LEVEL),
            pretrend_reject_success: share(&|r| r.success_pretrend_p < PRETREND_LEVEL),
            first_stage_strong: share(&|r| r.first_stage_coef > 0.0 && r.first_stage_f > 10.0),
            lambda_positive: share(&|r| r.iv_lambda > 0.0),
            rho_negative: share(&|r| r.iv_rho < 0.0),
            mean_pooled_risky: reps.iter().map(|r| r.pooled_risky).sum::<f64>() / n,
        }
    }
}

/// Seed of replication `r`.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// Simulates and estimates `reps` panels in parallel; results are in seed order.
pub fn monte_carlo(
    base: &SimConfig,
    spec: &EstimationSpec,
    reps: usize,
    settings: &NumericSettings,
) -> Result<Vec<Replication>> {
    base.validate()?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = replication_seed(base.seed, r);
            let cfg = SimConfig { seed, ..base.clone() };
            let out = simulate(&cfg)?;
            let est = estimate_panel(&out.rows, spec, settings)?;
            Ok(Replication::from_estimates(seed, &est))
        })
        .collect()
}

/// Mean pooled risky-share interaction at each misclassification rate, using
/// the same seeds for every rate.
pub fn attenuation(
    base: &SimConfig,
    spec: &EstimationSpec,
    rates: &[f64],
    reps: usize,
    settings: &NumericSettings,
) -> Result<Vec<(f64, f64)>> {
    rates
        .iter()
        .map(|&eta| {
            let cfg = SimConfig {
                misclassification_rate: eta,
                ..base.clone()
            };
            let runs = monte_carlo(&cfg, spec, reps, settings)?;
            Ok((eta, MonteCarloSummary::from_replications(&runs).mean_pooled_risky))
        })
        .collect()
}
