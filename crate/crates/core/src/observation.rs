//! The observed part of an unknown matrix: a multiset of fully observed
//! columns plus, for every other column, `s` row samples drawn with
//! replacement.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How row samples are shared between partially observed columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationMode {
    /// One row multiset shared by every partial column.
    Aligned,
    /// A fresh row multiset per partial column.
    Independent,
}

impl fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservationMode::Aligned => "aligned",
            ObservationMode::Independent => "independent",
        })
    }
}

impl FromStr for ObservationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(ObservationMode::Aligned),
            "independent" => Ok(ObservationMode::Independent),
            other => Err(Error::config(format!(
                "unknown observation mode '{other}' (expected aligned|independent)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialColumn {
    pub index: usize,
    /// Observed row indices, with multiplicity.
    pub rows: Vec<usize>,
    /// Values aligned with `rows`.
    pub values: Vec<f64>,
}

/// Observed entries of an `m x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    m: usize,
    n: usize,
    s: usize,
    mode: ObservationMode,
    draws: Vec<usize>,
    full_columns: BTreeMap<usize, DVector<f64>>,
    partial_columns: Vec<PartialColumn>,
}

impl ObservationSet {
    /// Validates and assembles an observation set.
    ///
    /// `draws` is the sequence of fully observed column draws (duplicates
    /// allowed, its length is `d`); `full_columns` holds each drawn column
    /// once.
    pub fn new(
        m: usize,
        n: usize,
        s: usize,
        mode: ObservationMode,
        draws: Vec<usize>,
        full_columns: BTreeMap<usize, DVector<f64>>,
        mut partial_columns: Vec<PartialColumn>,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::dims(format!("empty matrix shape {m}x{n}")));
        }
        if draws.is_empty() {
            return Err(Error::config("observation set has no fully observed column"));
        }
        if s == 0 {
            return Err(Error::config("entries per column s must be at least 1"));
        }
        for &i in &draws {
            if i >= n {
                return Err(Error::dims(format!("drawn column {i} out of range 0..{n}")));
            }
            if !full_columns.contains_key(&i) {
                return Err(Error::config(format!("drawn column {i} has no values")));
            }
        }
        for (&i, col) in &full_columns {
            if !draws.contains(&i) {
                return Err(Error::config(format!(
                    "full column {i} is not among the drawn columns"
                )));
            }
            if col.len() != m {
                return Err(Error::dims(format!(
                    "full column {i} has length {}, expected {m}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("full column {i} has non-finite values")));
            }
        }

        partial_columns.sort_by_key(|p| p.index);
        let mut seen = vec![false; n];
        for p in &partial_columns {
            if p.index >= n {
                return Err(Error::dims(format!(
                    "partial column {} out of range 0..{n}",
                    p.index
                )));
            }
            if full_columns.contains_key(&p.index) {
                return Err(Error::config(format!(
                    "column {} is both fully and partially observed",
                    p.index
                )));
            }
            if seen[p.index] {
                return Err(Error::config(format!(
                    "column {} is listed twice as partial",
                    p.index
                )));
            }
            seen[p.index] = true;
            if p.rows.len() != s || p.values.len() != s {
                return Err(Error::config(format!(
                    "partial column {} has {} rows and {} values, expected s = {s}",
                    p.index,
                    p.rows.len(),
                    p.values.len()
                )));
            }
            if let Some(&r) = p.rows.iter().find(|&&r| r >= m) {
                return Err(Error::dims(format!(
                    "partial column {} observes row {r} out of range 0..{m}",
                    p.index
                )));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!(
                    "partial column {} has non-finite values",
                    p.index
                )));
            }
        }
        for &i in full_columns.keys() {
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|&x| !x) {
            return Err(Error::config(format!("column {missing} is not observed at all")));
        }
        if mode == ObservationMode::Aligned {
            if let Some(first) = partial_columns.first() {
                if let Some(p) = partial_columns.iter().find(|p| p.rows != first.rows) {
                    return Err(Error::config(format!(
                        "aligned observation set but column {} uses different rows",
                        p.index
                    )));
                }
            }
        }

        Ok(Self {
            m,
            n,
            s,
            mode,
            draws,
            full_columns,
            partial_columns,
        })
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Number of fully observed column draws, counting repeats.
    pub fn d(&self) -> usize {
        self.draws.len()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn mode(&self) -> ObservationMode {
        self.mode
    }

    /// Fully observed column draws in draw order.
    pub fn draws(&self) -> &[usize] {
        &self.draws
    }

    /// Distinct fully observed columns.
    pub fn full_columns(&self) -> &BTreeMap<usize, DVector<f64>> {
        &self.full_columns
    }

    /// Partially observed columns, ordered by column index.
    pub fn partial_columns(&self) -> &[PartialColumn] {
        &self.partial_columns
    }

    /// Total number of observed entries, counting each distinct full column
    /// once and each partial sample with multiplicity.
    pub fn observed_entries(&self) -> usize {
        self.full_columns.len() * self.m + self.partial_columns.len() * self.s
    }
}
