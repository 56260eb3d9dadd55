use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PanelRow;

/// Cell identity: author-field-period cells carry an author id, field-period
/// cells do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub author_id: Option<u32>,
    pub field_id: u32,
    pub period: u32,
}

/// Outcome shares over the projects in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub key: CellKey,
    pub event_time: i32,
    pub post: bool,
    /// Author cells only.
    pub rep_pre: Option<f64>,
    pub high_rep: Option<bool>,
    pub risky_share: f64,
    /// Success rate among risky projects; missing without risky projects.
    pub succ_risky: Option<f64>,
    /// Survival rate among risky failures; missing without risky failures.
    pub null_survive: Option<f64>,
    /// Share of the cell's projects under the reform.
    pub rr_intensity: f64,
    pub cell_count: usize,
}

#[derive(Default)]
struct Acc {
    n: usize,
    risky: usize,
    risky_success: usize,
    risky_fail: usize,
    risky_fail_survived: usize,
    post: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn build(rows: &[PanelRow], by_author: bool, min_cell: usize) -> Vec<AggregateCell> {
    let mut acc: BTreeMap<CellKey, (Acc, &PanelRow)> = BTreeMap::new();
    for r in rows {
        let key = CellKey {
            author_id: by_author.then_some(r.author_id),
            field_id: r.field_id,
            period: r.period,
        };
        let (a, _) = acc.entry(key).or_insert_with(|| (Acc::default(), r));
        a.n += 1;
        a.post += usize::from(r.post);
        if r.risky {
            a.risky += 1;
            if r.success {
                a.risky_success += 1;
            } else {
                a.risky_fail += 1;
                a.risky_fail_survived += usize::from(r.survived);
            }
        }
    }
    acc.into_iter()
        .filter(|(_, (a, _))| a.n >= min_cell)
        .map(|(key, (a, first))| AggregateCell {
            key,
            event_time: first.event_time,
            post: first.post,
            rep_pre: by_author.then_some(first.rep_pre),
            high_rep: by_author.then_some(first.high_rep),
            risky_share: a.risky as f64 / a.n as f64,
            succ_risky: ratio(a.risky_success, a.risky),
            null_survive: ratio(a.risky_fail_survived, a.risky_fail),
            rr_intensity: a.post as f64 / a.n as f64,
            cell_count: a.n,
        })
        .collect()
}

/// Author-field-period cells, dropping cells with fewer than `min_cell` projects.
pub fn aggregate_author_cells(rows: &[PanelRow], min_cell: usize) -> Vec<AggregateCell> {
    build(rows, true, min_cell)
}

/// Field-period cells, dropping cells with fewer than `min_cell` projects.
pub fn aggregate_field_cells(rows: &[PanelRow], min_cell: usize) -> Vec<AggregateCell> {
    build(rows, false, min_cell)
}

/// Both cell levels, sorted by key.
pub fn aggregate(rows: &[PanelRow], min_cell: usize) -> (Vec<AggregateCell>, Vec<AggregateCell>) {
    (
        aggregate_author_cells(rows, min_cell),
        aggregate_field_cells(rows, min_cell),
    )
}
