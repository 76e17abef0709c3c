//! Rank-frequency tables and the fixed-exponent Zipf fit `f = C / r`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_TOP_N: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankRow {
    pub rank: usize,
    pub surface: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RankFrequencyTable {
    pub rows: Vec<RankRow>,
}

impl RankFrequencyTable {
    /// Builds a table from frequencies already in rank order.
    pub fn from_frequencies(freqs: &[u64]) -> Self {
        RankFrequencyTable {
            rows: freqs
                .iter()
                .enumerate()
                .map(|(i, &f)| RankRow {
                    rank: i + 1,
                    surface: format!("r{}", i + 1),
                    frequency: f,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Sums counts per surface, optionally keeps single-word surfaces only, and
/// ranks by descending frequency with ties broken by surface.
pub fn rank_frequencies<'a, I>(entities: I, top_n: usize, single_word_only: bool) -> RankFrequencyTable
where
    I: IntoIterator<Item = (&'a str, u64)>,
{
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (surface, n) in entities {
        if single_word_only && surface.split_whitespace().count() != 1 {
            continue;
        }
        *counts.entry(surface).or_insert(0) += n;
    }
    let mut rows: Vec<(&str, u64)> = counts.into_iter().filter(|(_, n)| *n > 0).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    rows.truncate(top_n);
    RankFrequencyTable {
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(i, (s, f))| RankRow {
                rank: i + 1,
                surface: s.to_string(),
                frequency: f,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZipfFit {
    pub c: f64,
    pub chi2_norm: f64,
}

/// Least squares in log space with slope fixed at -1, so
/// `ln C = mean(ln f_r + ln r)`; `chi2_norm = sum((f - C/r)^2 / (C/r)) / (N - 1)`.
pub fn fit_zipf(table: &RankFrequencyTable) -> Result<ZipfFit> {
    let n = table.rows.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "Zipf fit needs at least 2 rows, got {n}"
        )));
    }
    if let Some(row) = table.rows.iter().find(|r| r.frequency == 0) {
        return Err(Error::Precondition(format!(
            "non-positive frequency at rank {}",
            row.rank
        )));
    }
    let ln_c = table
        .rows
        .iter()
        .map(|r| (r.frequency as f64).ln() + (r.rank as f64).ln())
        .sum::<f64>()
        / n as f64;
    let c = ln_c.exp();
    Ok(ZipfFit {
        c,
        chi2_norm: chi2_norm(table, c),
    })
}

/// Normalized Pearson chi-square of the table against `C / r`.
pub fn chi2_norm(table: &RankFrequencyTable, c: f64) -> f64 {
    let n = table.rows.len();
    table
        .rows
        .iter()
        .map(|r| {
            let expected = c / r.rank as f64;
            let d = r.frequency as f64 - expected;
            d * d / expected
        })
        .sum::<f64>()
        / (n as f64 - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZipfReport {
    pub c_before: f64,
    pub chi2_before: f64,
    pub c_after: f64,
    pub chi2_after: f64,
    #[serde(skip)]
    pub before: RankFrequencyTable,
    #[serde(skip)]
    pub after: RankFrequencyTable,
}

pub fn zipf_report(before: &RankFrequencyTable, after: &RankFrequencyTable) -> Result<ZipfReport> {
    let b = fit_zipf(before)?;
    let a = fit_zipf(after)?;
    Ok(ZipfReport {
        c_before: b.c,
        chi2_before: b.chi2_norm,
        c_after: a.c,
        chi2_after: a.chi2_norm,
        before: before.clone(),
        after: after.clone(),
    })
}

impl ZipfReport {
    /// Plot points for both tables with the fitted curve, as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["table", "rank", "surface", "frequency", "fitted"])
            .map_err(|e| csv_error(path, e))?;
        for (name, table, c) in [
            ("before", &self.before, self.c_before),
            ("after", &self.after, self.c_after),
        ] {
            for r in &table.rows {
                w.write_record([
                    name.to_string(),
                    r.rank.to_string(),
                    r.surface.clone(),
                    r.frequency.to_string(),
                    format!("{:.6}", c / r.rank as f64),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("csv error on {}: {other:?}", path.display())),
    }
}
