//! Design matrices for the nested engagement regressions.
//!
//! Column order: intercept, chapter dummies (lowest chapter number is the
//! reference), `Log-Word-Count`, then the requested blocks in the order
//! current chapter, past chapters, surprise, expectation, uncertainty.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::beliefs::PanelRow;
use crate::features::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    VoteRate,
    CommentRate,
    LogContinueRate,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::VoteRate, Outcome::CommentRate, Outcome::LogContinueRate];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::VoteRate => "vote_rate",
            Outcome::CommentRate => "comment_rate",
            Outcome::LogContinueRate => "log_continue_rate",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::VoteRate => "Vote-to-Read Rate",
            Outcome::CommentRate => "Comment-to-Read Rate",
            Outcome::LogContinueRate => "Log Continue-to-Read Rate",
        }
    }
}

/// Regressor blocks on top of the base (intercept, chapter dummies, log word
/// count). `Actual` adds both the current-chapter values and the mean over
/// preceding chapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Actual,
    Surprise,
    Expectation,
    Uncertainty,
}

impl Block {
    pub const BELIEFS: [Block; 3] = [Block::Surprise, Block::Expectation, Block::Uncertainty];

    pub fn name(self) -> &'static str {
        match self {
            Block::Actual => "actual",
            Block::Surprise => "surprise",
            Block::Expectation => "expectation",
            Block::Uncertainty => "uncertainty",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PastAtFirst {
    /// The past-chapter mean at the first chapter equals its current value.
    Current,
    /// First-chapter rows are left out of every fit.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignOptions {
    /// Floor applied to continue rates before taking logs.
    pub epsilon: f64,
    pub past_at_first: PastAtFirst,
    pub cluster_by_book: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            past_at_first: PastAtFirst::Current,
            cluster_by_book: false,
        }
    }
}

/// Feature dims of `family` used in a block. Theme proportions sum to one, so
/// the last theme is left out wherever the values are proportions.
pub fn block_dims(family: Family, block: Block) -> Vec<usize> {
    let mut dims: Vec<usize> = family.dims().collect();
    if family == Family::Themes && matches!(block, Block::Actual | Block::Expectation) {
        dims.pop();
    }
    dims
}

/// Per-row mean of each actual feature over the preceding rows of the same
/// book (by position). Rows with no preceding value get `None`.
pub fn past_means(rows: &[PanelRow]) -> Vec<Vec<Option<f64>>> {
    let mut by_book: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        by_book.entry(&r.book_id).or_default().push(i);
    }
    let mut out = vec![Vec::new(); rows.len()];
    for idx in by_book.values_mut() {
        idx.sort_by_key(|&i| rows[i].position);
        let d = rows[idx[0]].actual.len();
        let mut sum = vec![0.0; d];
        let mut cnt = vec![0usize; d];
        for &i in idx.iter() {
            out[i] = (0..d).map(|j| (cnt[j] > 0).then(|| sum[j] / cnt[j] as f64)).collect();
            for (j, v) in rows[i].actual.iter().enumerate() {
                if let Some(v) = v {
                    sum[j] += v;
                    cnt[j] += 1;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Panel rows used, in matrix order.
    pub rows: Vec<usize>,
    /// Book of each used row, as a dense index.
    pub clusters: Vec<usize>,
    /// Number of chapter dummy columns (after the intercept).
    pub dummies: usize,
    /// Rows whose continue rate was raised to the floor.
    pub clamped: usize,
}

impl Design {
    pub fn non_dummy_columns(&self) -> std::ops::Range<usize> {
        1 + self.dummies..self.names.len()
    }
}

/// Prepared panel: past means are computed once and shared by every design.
pub struct Panel<'a> {
    pub rows: &'a [PanelRow],
    pub names: &'a [String],
    past: Vec<Vec<Option<f64>>>,
}

impl<'a> Panel<'a> {
    pub fn new(rows: &'a [PanelRow], names: &'a [String]) -> Self {
        Self {
            rows,
            names,
            past: past_means(rows),
        }
    }

    fn outcome_value(&self, i: usize, outcome: Outcome, opts: &DesignOptions) -> Option<f64> {
        let r = &self.rows[i];
        match outcome {
            Outcome::VoteRate => Some(r.vote_rate),
            Outcome::CommentRate => Some(r.comment_rate),
            Outcome::LogContinueRate => r.continue_rate.map(|c| c.max(opts.epsilon).ln()),
        }
    }

    fn past_value(&self, i: usize, dim: usize) -> Option<f64> {
        self.past[i][dim].or(if self.rows[i].position == 1 { self.rows[i].actual[dim] } else { None })
    }

    fn block_values(&self, i: usize, family: Family, block: Block) -> Vec<Option<f64>> {
        let r = &self.rows[i];
        let dims = block_dims(family, block);
        match block {
            Block::Actual => dims
                .iter()
                .map(|&d| r.actual[d])
                .chain(dims.iter().map(|&d| self.past_value(i, d)))
                .collect(),
            Block::Surprise => dims.iter().map(|&d| r.surprise[d]).collect(),
            Block::Expectation => dims.iter().map(|&d| r.expectation[d]).collect(),
            Block::Uncertainty => dims.iter().map(|&d| r.uncertainty[d]).collect(),
        }
    }

    fn block_names(&self, family: Family, block: Block) -> Vec<String> {
        let dims = block_dims(family, block);
        let name = |d: usize, suffix: &str| format!("{}-{suffix}", self.names[d]);
        match block {
            Block::Actual => dims
                .iter()
                .map(|&d| name(d, "CurrentChapter"))
                .chain(dims.iter().map(|&d| name(d, "PastChapters")))
                .collect(),
            Block::Surprise => dims.iter().map(|&d| name(d, "Surprise")).collect(),
            Block::Expectation => dims.iter().map(|&d| name(d, "Expectation")).collect(),
            Block::Uncertainty => dims.iter().map(|&d| name(d, "Uncertainty")).collect(),
        }
    }

    /// Rows with every value the design needs.
    pub fn eligible_rows(&self, outcome: Outcome, family: Family, blocks: &[Block], opts: &DesignOptions) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| {
                let r = &self.rows[i];
                if r.word_count == 0 || self.outcome_value(i, outcome, opts).is_none() {
                    return false;
                }
                if opts.past_at_first == PastAtFirst::Drop && r.position == 1 {
                    return false;
                }
                if blocks.iter().any(|b| *b != Block::Actual) && !r.has_beliefs() {
                    return false;
                }
                blocks
                    .iter()
                    .all(|b| self.block_values(i, family, *b).iter().all(|v| v.is_some_and(f64::is_finite)))
            })
            .collect()
    }

    /// Design over exactly `rows` (which must be eligible for `blocks`).
    pub fn design(
        &self,
        rows: &[usize],
        outcome: Outcome,
        family: Family,
        blocks: &[Block],
        opts: &DesignOptions,
    ) -> Result<Design, AnalysisError> {
        let mut blocks = blocks.to_vec();
        blocks.sort();
        blocks.dedup();
        let levels: Vec<u32> = rows
            .iter()
            .map(|&i| self.rows[i].chapter_index)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let dummy_levels = levels.get(1..).unwrap_or(&[]);
        let mut names = vec!["(Intercept)".to_string()];
        names.extend(dummy_levels.iter().map(|l| format!("Chapter-{l}")));
        names.push("Log-Word-Count".to_string());
        for b in &blocks {
            names.extend(self.block_names(family, *b));
        }

        let k = names.len();
        let n = rows.len();
        let mut x = DMatrix::<f64>::zeros(n, k);
        let mut y = DVector::<f64>::zeros(n);
        let mut book_ids: HashMap<&str, usize> = HashMap::new();
        let mut clusters = Vec::with_capacity(n);
        let mut clamped = 0;
        for (row, &i) in rows.iter().enumerate() {
            let r = &self.rows[i];
            let next = book_ids.len();
            clusters.push(*book_ids.entry(&r.book_id).or_insert(next));
            y[row] = self.outcome_value(i, outcome, opts).ok_or_else(|| AnalysisError::MissingValue {
                row: i,
                column: outcome.name().into(),
            })?;
            if outcome == Outcome::LogContinueRate && r.continue_rate.is_some_and(|c| c < opts.epsilon) {
                clamped += 1;
            }
            x[(row, 0)] = 1.0;
            if let Some(pos) = dummy_levels.iter().position(|l| *l == r.chapter_index) {
                x[(row, 1 + pos)] = 1.0;
            }
            let mut col = 1 + dummy_levels.len();
            x[(row, col)] = (r.word_count as f64).ln();
            col += 1;
            for b in &blocks {
                for v in self.block_values(i, family, *b) {
                    x[(row, col)] = v.ok_or_else(|| AnalysisError::MissingValue {
                        row: i,
                        column: names[col].clone(),
                    })?;
                    col += 1;
                }
            }
        }
        Ok(Design {
            names,
            x,
            y,
            rows: rows.to_vec(),
            clusters,
            dummies: dummy_levels.len(),
            clamped,
        })
    }
}
