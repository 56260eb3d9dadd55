use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Column store for regressions: numeric columns and integer group columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    n: usize,
    numeric: BTreeMap<String, Vec<f64>>,
    groups: BTreeMap<String, Vec<u32>>,
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn with_numeric(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.insert_numeric(name, values)?;
        Ok(self)
    }

    pub fn with_group(mut self, name: &str, values: Vec<u32>) -> Result<Self> {
        self.insert_group(name, values)?;
        Ok(self)
    }

    pub fn insert_group(&mut self, name: &str, values: Vec<u32>) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::Config(format!(
                "group column `{name}` has {} rows, frame has {}",
                values.len(),
                self.n
            )));
        }
        self.groups.insert(name.to_string(), values);
        Ok(())
    }

    pub fn insert_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n {
            return Err(Error::Config(format!(
                "column `{name}` has {} rows, frame has {}",
                values.len(),
                self.n
            )));
        }
        self.numeric.insert(name.to_string(), values);
        Ok(())
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn group(&self, name: &str) -> Result<&[u32]> {
        self.groups
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Rows where `keep` is true.
    pub fn filter(&self, keep: &[bool]) -> Frame {
        let pick_f = |v: &Vec<f64>| v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
        let pick_g = |v: &Vec<u32>| v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
        Frame {
            n: keep.iter().filter(|&&k| k).count(),
            numeric: self.numeric.iter().map(|(k, v)| (k.clone(), pick_f(v))).collect(),
            groups: self.groups.iter().map(|(k, v)| (k.clone(), pick_g(v))).collect(),
        }
    }

    /// Rows at `idx`, in that order; indices may repeat.
    pub fn take(&self, idx: &[usize]) -> Frame {
        Frame {
            n: idx.len(),
            numeric: self
                .numeric
                .iter()
                .map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i]).collect()))
                .collect(),
            groups: self
                .groups
                .iter()
                .map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }

    pub fn numeric_names(&self) -> impl Iterator<Item = &str> {
        self.numeric.keys().map(String::as_str)
    }

    pub fn group_names(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    /// Rows where every named numeric column is finite.
    pub fn complete_cases(&self, columns: &[&str]) -> Result<Frame> {
        let mut keep = vec![true; self.n];
        for c in columns {
            for (k, v) in keep.iter_mut().zip(self.numeric(c)?) {
                *k &= v.is_finite();
            }
        }
        Ok(self.filter(&keep))
    }
}

/// Dense `0..g` relabelling of group ids, in order of first appearance.
pub(crate) fn dense_ids(ids: &[u32]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let next = map.len();
        out.push(*map.entry(id).or_insert(next));
    }
    (out, map.len())
}
