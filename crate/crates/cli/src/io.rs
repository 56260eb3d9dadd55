//! CSV formats: the simulated panel, sweeps, coefficient tables and event series.

use std::fs::File;
use std::path::Path;

use vislab_core::econometrics::{EventStudyResult, Replication, TableRow};
use vislab_core::sign_test::SweepRow;
use vislab_core::sim::PanelRow;

use crate::CliError;

pub const PANEL_COLUMNS: [&str; 10] = [
    "author_id",
    "field_id",
    "period",
    "event_time",
    "post",
    "rep_pre",
    "high_rep",
    "risky",
    "success",
    "survived",
];

pub const SWEEP_COLUMNS: [&str; 14] = [
    "pi",
    "psi",
    "phi",
    "gamma",
    "delta_prime_exact",
    "delta_prime_core",
    "residual",
    "sign_exact",
    "sign_core",
    "conservatism",
    "B",
    "K",
    "d_dsigma0",
    "d_dsigma1",
];

pub const TABLE_COLUMNS: [&str; 7] = ["term", "estimate", "se", "t", "p", "n_obs", "n_clusters"];

pub const SERIES_COLUMNS: [&str; 3] = ["event_time", "coef", "se"];

pub const REPLICATION_COLUMNS: [&str; 10] = [
    "seed",
    "risky_post_avg",
    "success_post_avg",
    "risky_pretrend_p",
    "success_pretrend_p",
    "pooled_risky",
    "first_stage_coef",
    "first_stage_f",
    "iv_lambda",
    "iv_rho",
];

/// Shortest representation that parses back to the same bits.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn write_all<I, R>(path: &Path, header: &[&str], records: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    let wrap = |e: csv::Error| CliError::Input(format!("writing {}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for r in records {
        w.write_record(r.into_iter().collect::<Vec<_>>()).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_panel(path: &Path, rows: &[PanelRow]) -> Result<(), CliError> {
    write_all(
        path,
        &PANEL_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.author_id.to_string(),
                r.field_id.to_string(),
                r.period.to_string(),
                r.event_time.to_string(),
                flag(r.post),
                num(r.rep_pre),
                flag(r.high_rep),
                flag(r.risky),
                flag(r.success),
                flag(r.survived),
            ]
        }),
    )
}

fn parse_field<T: std::str::FromStr>(raw: &str, column: &str, line: u64) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("line {line}, column `{column}`: cannot parse `{raw}`")))
}

fn parse_flag(raw: &str, column: &str, line: u64) -> Result<bool, CliError> {
    match raw.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(CliError::Input(format!(
            "line {line}, column `{column}`: expected 0 or 1, got `{raw}`"
        ))),
    }
}

/// Reads a panel CSV; a missing required column is an input error naming it.
pub fn read_panel(path: &Path) -> Result<Vec<PanelRow>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let mut idx = [0usize; 10];
    for (slot, col) in idx.iter_mut().zip(PANEL_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| CliError::Input(format!("{}: missing required column `{col}`", path.display())))?;
    }
    let mut rows = Vec::new();
    let mut project = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        let author_id: u32 = parse_field(get(0), PANEL_COLUMNS[0], line)?;
        let period: u32 = parse_field(get(2), PANEL_COLUMNS[2], line)?;
        let j = project.entry((author_id, period)).or_insert(0u32);
        rows.push(PanelRow {
            author_id,
            field_id: parse_field(get(1), PANEL_COLUMNS[1], line)?,
            period,
            project: *j,
            event_time: parse_field(get(3), PANEL_COLUMNS[3], line)?,
            post: parse_flag(get(4), PANEL_COLUMNS[4], line)?,
            rep_pre: parse_field(get(5), PANEL_COLUMNS[5], line)?,
            high_rep: parse_flag(get(6), PANEL_COLUMNS[6], line)?,
            risky: parse_flag(get(7), PANEL_COLUMNS[7], line)?,
            success: parse_flag(get(8), PANEL_COLUMNS[8], line)?,
            survived: parse_flag(get(9), PANEL_COLUMNS[9], line)?,
            action_true: None,
        });
        *j += 1;
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: panel has no rows", path.display())));
    }
    Ok(rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    write_all(
        path,
        &SWEEP_COLUMNS,
        rows.iter().map(|r| {
            let s = &r.report;
            vec![
                num(s.pi),
                num(s.psi),
                num(s.phi),
                num(s.gamma),
                num(s.delta_prime_exact),
                num(s.delta_prime_core),
                num(s.residual),
                s.cutoff_slope_sign.to_string(),
                s.core_slope_sign.to_string(),
                flag(s.conservatism_holds),
                opt(r.b_val),
                opt(r.k_val),
                num(r.d_dsigma0),
                num(r.d_dsigma1),
            ]
        }),
    )
}

pub fn write_table(path: &Path, rows: &[TableRow]) -> Result<(), CliError> {
    write_all(
        path,
        &TABLE_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.term.clone(),
                num(r.estimate),
                num(r.se),
                num(r.t),
                num(r.p),
                r.n_obs.to_string(),
                r.n_clusters.to_string(),
            ]
        }),
    )
}

pub fn write_series(path: &Path, es: &EventStudyResult) -> Result<(), CliError> {
    write_all(
        path,
        &SERIES_COLUMNS,
        es.coefficients
            .iter()
            .map(|c| vec![c.event_time.to_string(), num(c.estimate), num(c.se)]),
    )
}

pub fn write_replications(path: &Path, reps: &[Replication]) -> Result<(), CliError> {
    write_all(
        path,
        &REPLICATION_COLUMNS,
        reps.iter().map(|r| {
            let mut row = vec![r.seed.to_string()];
            row.extend(
                [
                    r.risky_post_avg,
                    r.success_post_avg,
                    r.risky_pretrend_p,
                    r.success_pretrend_p,
                    r.pooled_risky,
                    r.first_stage_coef,
                    r.first_stage_f,
                    r.iv_lambda,
                    r.iv_rho,
                ]
                .map(num),
            );
            row
        }),
    )
}
