//! Corpus-level alarm counts and the phi correlation matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{AlarmCategory, AlarmReport};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("cannot aggregate an empty corpus")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub apps: Vec<String>,
    /// Number of apps with at least one alarm of each category.
    pub counts: BTreeMap<AlarmCategory, usize>,
    /// Row and column order of `correlation`.
    pub categories: Vec<AlarmCategory>,
    /// Phi coefficients; `None` where a category has no variance.
    pub correlation: Vec<Vec<Option<f64>>>,
}

impl CorpusSummary {
    pub fn coefficient(&self, a: AlarmCategory, b: AlarmCategory) -> Option<f64> {
        let i = self.categories.iter().position(|&c| c == a)?;
        let j = self.categories.iter().position(|&c| c == b)?;
        self.correlation[i][j]
    }
}

/// Pearson correlation of two binary indicator vectors, from the 2x2 table.
fn phi(x: &[bool], y: &[bool]) -> Option<f64> {
    let (mut n11, mut n10, mut n01, mut n00) = (0i64, 0i64, 0i64, 0i64);
    for (&a, &b) in x.iter().zip(y) {
        match (a, b) {
            (true, true) => n11 += 1,
            (true, false) => n10 += 1,
            (false, true) => n01 += 1,
            (false, false) => n00 += 1,
        }
    }
    let denom = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00);
    if denom == 0 {
        return None;
    }
    Some((n11 * n00 - n10 * n01) as f64 / (denom as f64).sqrt())
}

pub fn aggregate_corpus(reports: &[AlarmReport]) -> Result<CorpusSummary, CorpusError> {
    if reports.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut sorted: Vec<&AlarmReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.app.cmp(&b.app));
    let present: Vec<BTreeSet<AlarmCategory>> = sorted
        .iter()
        .map(|r| r.alarms.iter().map(|a| a.category).collect())
        .collect();
    let categories = AlarmCategory::ALL.to_vec();
    let indicators: Vec<Vec<bool>> = categories
        .iter()
        .map(|c| present.iter().map(|p| p.contains(c)).collect())
        .collect();
    let counts = categories
        .iter()
        .zip(&indicators)
        .map(|(&c, ind)| (c, ind.iter().filter(|&&b| b).count()))
        .collect();
    let correlation = indicators
        .iter()
        .map(|x| indicators.iter().map(|y| phi(x, y)).collect())
        .collect();
    Ok(CorpusSummary {
        apps: sorted.iter().map(|r| r.app.clone()).collect(),
        counts,
        categories,
        correlation,
    })
}

/// Three-column text table of per-category app counts.
pub fn render_table(summary: &CorpusSummary) -> String {
    let cells: Vec<(String, usize)> = summary
        .categories
        .iter()
        .map(|c| {
            (
                c.title().to_string(),
                summary.counts.get(c).copied().unwrap_or(0),
            )
        })
        .collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<26}{:>6} | {:<26}{:>6} | {:<26}{:>6}",
        "Alarm", "#Apps", "Alarm", "#Apps", "Alarm", "#Apps"
    );
    for row in cells.chunks(3) {
        let line: Vec<String> = row
            .iter()
            .map(|(name, n)| format!("{name:<26}{n:>6}"))
            .collect();
        let _ = writeln!(out, "{}", line.join(" | "));
    }
    out
}
