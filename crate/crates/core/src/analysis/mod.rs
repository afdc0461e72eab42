//! Nested engagement regressions with chapter fixed effects.

pub mod compare;
pub mod design;
pub mod ols;
pub mod report;

pub use compare::{compare, relative_improvement, Component, ModelComparison};
pub use design::{block_dims, past_means, Block, Design, DesignOptions, Outcome, Panel, PastAtFirst};
pub use ols::{adjusted_r2, collinear_columns, ols, stars, within_fit, FitResult, SeKind};

use crate::beliefs::PanelRow;
use crate::features::Family;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("design is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("too few observations: n = {n} with {k} parameters")]
    Infeasible { n: usize, k: usize },
    #[error("row {row} has no value for {column}")]
    MissingValue { row: usize, column: String },
    #[error("report: {0}")]
    Report(String),
}

/// Every (outcome, family) comparison, in outcome-major order.
pub fn compare_all(rows: &[PanelRow], names: &[String], opts: &DesignOptions, workers: usize) -> Vec<ModelComparison> {
    let panel = Panel::new(rows, names);
    let jobs: Vec<(Outcome, Family)> = Outcome::ALL
        .iter()
        .flat_map(|o| Family::ALL.iter().map(move |f| (*o, *f)))
        .collect();
    crate::util::parallel_map(&jobs, workers, |(o, f)| compare(&panel, *o, *f, opts))
}
