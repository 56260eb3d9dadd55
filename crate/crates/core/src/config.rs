//! The scenario document: one TOML file with flat sections for the arms,
//! kernels, value function, reform, simulation, estimation and numerics.
//!
//! ```toml
//! [risky]
//! p_high = 0.8
//! p_low = 0.4
//!
//! [vis_risky]
//! kind = "constant"
//! sigma1 = 1.0
//! sigma0 = 0.5
//! ```
//!
//! Missing sections fall back to [`Document::default`]. Dotted overrides such
//! as `simulation.seed=9` or `vis_risky.sigma0=0.3` are applied to the parsed
//! table before it is typed, so they go through the same validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::econometrics::EstimationSpec;
use crate::error::{Error, Result};
use crate::model::{ReformShift, Scenario};
use crate::settings::NumericSettings;
use crate::sim::{staggered_adoption, SimConfig};

/// Simulation knobs as written in the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationDoc {
    pub n_authors: usize,
    pub n_fields: usize,
    pub periods: usize,
    /// Staggered adoption `first + f mod (last - first + 1)` unless
    /// `adoption_times` lists one period per field.
    pub adoption_first: usize,
    pub adoption_last: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adoption_times: Option<Vec<usize>>,
    pub type_prior: f64,
    pub projects_per_period: usize,
    pub type_persistence: f64,
    pub misclassification_rate: f64,
    pub burn_in: usize,
    pub seed: u64,
    /// Default replication count for `vislab montecarlo`.
    pub replications: usize,
}

impl Default for SimulationDoc {
    fn default() -> Self {
        let r = SimConfig::reference(1);
        Self {
            n_authors: r.n_authors,
            n_fields: r.n_fields,
            periods: r.periods,
            adoption_first: *r.adoption_times.iter().min().unwrap_or(&1),
            adoption_last: *r.adoption_times.iter().max().unwrap_or(&1),
            adoption_times: None,
            type_prior: r.type_prior,
            projects_per_period: r.projects_per_period,
            type_persistence: r.type_persistence,
            misclassification_rate: r.misclassification_rate,
            burn_in: r.burn_in,
            seed: r.seed,
            replications: 200,
        }
    }
}

/// A complete scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub risky: crate::model::Arm,
    pub safe: crate::model::Arm,
    pub signal: crate::model::SignalTech,
    pub vis_risky: crate::model::VisibilityKernel,
    pub vis_safe: crate::model::VisibilityKernel,
    pub value: crate::model::ValueFunction,
    #[serde(default)]
    pub reform: ReformShift,
    #[serde(default)]
    pub simulation: SimulationDoc,
    #[serde(default)]
    pub estimation: EstimationSpec,
    #[serde(default)]
    pub numerics: NumericSettings,
}

impl Default for Document {
    fn default() -> Self {
        let r = SimConfig::reference(1);
        Self::from_parts(r.scenario_pre, r.reform, SimulationDoc::default())
    }
}

/// Where a document went wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line and column of the offending text, when known.
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Dotted key such as `risky.p_low`, when it can be recovered.
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if let Some(k) = &self.key {
            write!(f, "key `{k}`: ")?;
        }
        f.write_str(self.message.trim_end())
    }
}

impl std::error::Error for ConfigError {}

impl From<ConfigError> for Error {
    fn from(e: ConfigError) -> Self {
        Error::Config(e.to_string())
    }
}

impl ConfigError {
    fn plain(message: impl Into<String>) -> Self {
        Self {
            line: None,
            column: None,
            key: None,
            message: message.into(),
        }
    }

    fn keyed(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            ..Self::plain(message)
        }
    }

    fn from_toml(e: &toml::de::Error, src: &str) -> Self {
        let mut out = Self::plain(e.message());
        if let Some(span) = e.span() {
            let start = span.start.min(src.len());
            let before = &src[..start];
            let line = before.matches('\n').count() + 1;
            let line_start = before.rfind('\n').map_or(0, |i| i + 1);
            out.line = Some(line);
            out.column = Some(before[line_start..].chars().count() + 1);
            out.key = key_at(src, line);
        }
        out
    }
}

/// `section.key` for the assignment on `line`, or the section name when the
/// line is a table header.
fn key_at(src: &str, line: usize) -> Option<String> {
    let mut section: Option<String> = None;
    for (i, text) in src.lines().enumerate() {
        let t = text.trim();
        if t.starts_with('[') {
            section = Some(t.trim_matches(|c| c == '[' || c == ']').trim().to_string());
        }
        if i + 1 == line {
            if t.starts_with('[') {
                return section;
            }
            let key = t.split('=').next()?.trim();
            if key.is_empty() || key.starts_with('#') {
                return section;
            }
            return Some(match section {
                Some(s) => format!("{s}.{key}"),
                None => key.to_string(),
            });
        }
    }
    section
}

/// Parse an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Set `a.b.c = value` in `table`, creating intermediate tables.
pub fn set_dotted(table: &mut toml::Table, path: &str, raw: &str) -> std::result::Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::keyed(path, "empty key segment in override"));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError::keyed(path, format!("`{p}` is not a table"))),
        };
    }
    cur.insert(last.to_string(), parse_value(raw));
    Ok(())
}

impl Document {
    pub fn from_parts(scenario: Scenario, reform: ReformShift, simulation: SimulationDoc) -> Self {
        Self {
            risky: scenario.risky,
            safe: scenario.safe,
            signal: scenario.signal,
            vis_risky: scenario.vis_risky,
            vis_safe: scenario.vis_safe,
            value: scenario.value,
            reform,
            simulation,
            estimation: EstimationSpec::default(),
            numerics: NumericSettings::default(),
        }
    }

    /// Parse and validate a document.
    pub fn parse(src: &str) -> std::result::Result<Self, ConfigError> {
        Self::parse_with_overrides(src, &[])
    }

    /// Parse, apply `key=value` overrides, then validate.
    pub fn parse_with_overrides(src: &str, overrides: &[String]) -> std::result::Result<Self, ConfigError> {
        let doc: Document = if overrides.is_empty() {
            toml::from_str(src).map_err(|e| ConfigError::from_toml(&e, src))?
        } else {
            let mut table: toml::Table = src.parse().map_err(|e| ConfigError::from_toml(&e, src))?;
            for o in overrides {
                let (k, v) = o
                    .split_once('=')
                    .ok_or_else(|| ConfigError::plain(format!("override `{o}` is not key=value")))?;
                set_dotted(&mut table, k.trim(), v.trim())?;
            }
            // Re-render so spans in any error point into text the user can see.
            let merged = toml::to_string(&table).map_err(|e| ConfigError::plain(e.to_string()))?;
            toml::from_str(&merged).map_err(|e| {
                let mut ce = ConfigError::from_toml(&e, &merged);
                ce.line = None;
                ce.column = None;
                ce.message = format!("{} (after overrides)", ce.message);
                ce
            })?
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path, overrides: &[String]) -> std::result::Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::plain(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_with_overrides(&src, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("document serializes")
    }

    /// Section-level checks that serde cannot express.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        self.scenario()
            .map_err(|e| ConfigError::keyed(scenario_key(&e), e.to_string()))?;
        self.sim_config()
            .and_then(|c| c.validate())
            .map_err(|e| ConfigError::keyed(sim_key(&e), e.to_string()))?;
        self.estimation
            .validate()
            .map_err(|e| ConfigError::keyed("estimation", e.to_string()))?;
        if !(self.numerics.fd_step > 0.0 && self.numerics.within_tol > 0.0) {
            return Err(ConfigError::keyed("numerics", "steps and tolerances must be positive"));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(
            self.risky,
            self.safe,
            self.signal,
            self.vis_risky.clone(),
            self.vis_safe.clone(),
            self.value.clone(),
        )
    }

    /// The simulator configuration; `simulation.seed` is the base seed.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.simulation;
        if s.adoption_first > s.adoption_last {
            return Err(Error::Config(format!(
                "simulation.adoption_first {} exceeds adoption_last {}",
                s.adoption_first, s.adoption_last
            )));
        }
        Ok(SimConfig {
            n_authors: s.n_authors,
            n_fields: s.n_fields,
            periods: s.periods,
            adoption_times: s
                .adoption_times
                .clone()
                .unwrap_or_else(|| staggered_adoption(s.n_fields, s.adoption_first, s.adoption_last)),
            scenario_pre: self.scenario()?,
            reform: self.reform.clone(),
            type_prior: s.type_prior,
            projects_per_period: s.projects_per_period,
            type_persistence: s.type_persistence,
            misclassification_rate: s.misclassification_rate,
            burn_in: s.burn_in,
            seed: s.seed,
        })
    }
}

fn scenario_key(e: &Error) -> &'static str {
    let msg = e.to_string();
    if msg.contains("risky arm") {
        "risky"
    } else if msg.contains("q_") || msg.contains("signal") {
        "signal"
    } else if msg.contains("sigma") || msg.contains("kernel") || msg.contains("knot") || msg.contains("kappa") {
        "vis_risky / vis_safe"
    } else {
        "value"
    }
}

fn sim_key(e: &Error) -> &'static str {
    let msg = e.to_string();
    if msg.contains("reform") || msg.contains("delta0") || msg.contains("reformed") {
        "reform"
    } else {
        "simulation"
    }
}
