use serde::{Deserialize, Serialize};

use super::{Chapter, ChapterId, CorpusError};

/// Per-chapter engagement outcomes, each normalized by the chapter's reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementRates {
    /// Next chapter's reads over this chapter's reads. Can exceed 1.
    pub continue_rate: Option<f64>,
    pub comment_rate: f64,
    pub vote_rate: f64,
}

/// Rates for `current`, with the continue rate taken from `next` when given.
pub fn compute_rates(
    current: &Chapter,
    next: Option<&Chapter>,
    id: impl FnOnce() -> ChapterId,
) -> Result<EngagementRates, CorpusError> {
    rates_from_counts(current, next.map(|n| n.read_count), id)
}

/// Same as [`compute_rates`] but with the successor's read count supplied
/// directly (as recorded in `Chapter::next_read_count`).
pub fn rates_from_counts(
    current: &Chapter,
    next_reads: Option<u64>,
    id: impl FnOnce() -> ChapterId,
) -> Result<EngagementRates, CorpusError> {
    if current.read_count == 0 {
        return Err(CorpusError::UndefinedRate(id()));
    }
    let reads = current.read_count as f64;
    Ok(EngagementRates {
        continue_rate: next_reads.map(|n| n as f64 / reads),
        comment_rate: current.comment_count as f64 / reads,
        vote_rate: current.vote_count as f64 / reads,
    })
}
