use serde::{Deserialize, Serialize};

use super::design::{Block, DesignOptions, Outcome, Panel};
use super::ols::{ols, FitResult};
use super::AnalysisError;
use crate::features::Family;

/// Gain from adding belief blocks relative to the gain from adding the actual
/// chapter's features. Undefined when the actual features do not help.
pub fn relative_improvement(adj_base: f64, adj_feature: f64, adj_belief: f64) -> Option<f64> {
    let denom = adj_feature - adj_base;
    (denom > 0.0).then(|| (adj_belief - adj_feature) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub block: Block,
    pub adj_r2: Option<f64>,
    pub relative_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub outcome: Outcome,
    pub family: Family,
    pub n: usize,
    pub clamped: usize,
    pub adj_r2_base: Option<f64>,
    pub adj_r2_feature: Option<f64>,
    pub adj_r2_belief: Option<f64>,
    pub r2: [Option<f64>; 3],
    pub relative_improvement: Option<f64>,
    pub components: Vec<Component>,
    pub belief_fit: Option<FitResult>,
    /// Why the comparison could not be computed, if it could not.
    pub note: Option<String>,
}

impl ModelComparison {
    fn unavailable(outcome: Outcome, family: Family, n: usize, note: String) -> Self {
        Self {
            outcome,
            family,
            n,
            clamped: 0,
            adj_r2_base: None,
            adj_r2_feature: None,
            adj_r2_belief: None,
            r2: [None; 3],
            relative_improvement: None,
            components: Block::BELIEFS
                .iter()
                .map(|b| Component { block: *b, adj_r2: None, relative_improvement: None })
                .collect(),
            belief_fit: None,
            note: Some(note),
        }
    }
}

fn fit(
    panel: &Panel<'_>,
    rows: &[usize],
    outcome: Outcome,
    family: Family,
    blocks: &[Block],
    opts: &DesignOptions,
) -> Result<(FitResult, usize), AnalysisError> {
    let d = panel.design(rows, outcome, family, blocks, opts)?;
    let clusters = opts.cluster_by_book.then_some(d.clusters.as_slice());
    Ok((ols(&d.x, &d.y, &d.names, clusters)?, d.clamped))
}

/// Base, base + actual and base + actual + all beliefs on one shared row set,
/// plus base + actual + each single belief block.
pub fn compare(panel: &Panel<'_>, outcome: Outcome, family: Family, opts: &DesignOptions) -> ModelComparison {
    let full = [Block::Actual, Block::Surprise, Block::Expectation, Block::Uncertainty];
    let rows = panel.eligible_rows(outcome, family, &full, opts);
    let n = rows.len();
    let run = || -> Result<ModelComparison, AnalysisError> {
        let (base, clamped) = fit(panel, &rows, outcome, family, &[], opts)?;
        let (feature, _) = fit(panel, &rows, outcome, family, &[Block::Actual], opts)?;
        let (belief, _) = fit(panel, &rows, outcome, family, &full, opts)?;
        let mut components = Vec::new();
        for b in Block::BELIEFS {
            let (f, _) = fit(panel, &rows, outcome, family, &[Block::Actual, b], opts)?;
            components.push(Component {
                block: b,
                adj_r2: Some(f.adj_r2),
                relative_improvement: relative_improvement(base.adj_r2, feature.adj_r2, f.adj_r2),
            });
        }
        Ok(ModelComparison {
            outcome,
            family,
            n,
            clamped,
            adj_r2_base: Some(base.adj_r2),
            adj_r2_feature: Some(feature.adj_r2),
            adj_r2_belief: Some(belief.adj_r2),
            r2: [Some(base.r2), Some(feature.r2), Some(belief.r2)],
            relative_improvement: relative_improvement(base.adj_r2, feature.adj_r2, belief.adj_r2),
            components,
            belief_fit: Some(belief),
            note: None,
        })
    };
    run().unwrap_or_else(|e| ModelComparison::unavailable(outcome, family, n, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::design::tests::{names30, row};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn published_triplets() {
        let cases = [((1.66, 2.44, 2.79), 0.35 / 0.78), ((0.15, 0.33, 0.42), 0.5), ((1.66, 2.77, 2.98), 0.21 / 1.11)];
        for ((b, f, l), want) in cases {
            let got = relative_improvement(b, f, l).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(relative_improvement(1.0, 2.0, 2.0), Some(0.0));
        assert_eq!(relative_improvement(1.0, 1.0, 2.0), None);
        assert_eq!(relative_improvement(1.0, 0.5, 2.0), None);
    }

    #[test]
    fn nested_fits_share_rows_and_r2_is_monotone() {
        let names = names30();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        for b in 0..30 {
            for t in 1..=6 {
                let mut r = row(&format!("b{b}"), t, 0.0);
                for d in 0..30 {
                    r.actual[d] = Some(rng.gen_range(-1.0..1.0));
                    r.expectation[d] = Some(rng.gen_range(-1.0..1.0));
                    r.uncertainty[d] = Some(rng.gen_range(0.0..1.0));
                    r.surprise[d] = Some(rng.gen_range(0.0..1.0));
                }
                r.word_count = rng.gen_range(500..3000);
                r.vote_rate = 0.1 + 0.02 * r.actual[0].unwrap() - 0.018 * r.expectation[0].unwrap()
                    + rng.gen_range(-0.01..0.01);
                rows.push(r);
            }
        }
        rows[5].surprise[1] = None;
        let panel = Panel::new(&rows, &names);
        let c = compare(&panel, Outcome::VoteRate, Family::Emotion, &DesignOptions::default());
        assert!(c.note.is_none(), "{:?}", c.note);
        assert_eq!(c.n, 179);
        let [a, b, l] = c.r2.map(Option::unwrap);
        assert!(a <= b && b <= l);
        assert!(c.relative_improvement.unwrap() > 0.0);
        let fit = c.belief_fit.unwrap();
        let (est, se) = fit.coefficient("Valence-Expectation").unwrap();
        assert!((est + 0.018).abs() < 2.0 * se + 1e-3);
    }

    #[test]
    fn infeasible_comparison_is_reported_not_raised() {
        let names = names30();
        let rows: Vec<PanelRow> = (1..=4).map(|t| row("b", t, t as f64)).collect();
        let panel = Panel::new(&rows, &names);
        let c = compare(&panel, Outcome::VoteRate, Family::Themes, &DesignOptions::default());
        assert!(c.note.is_some());
        assert!(c.adj_r2_base.is_none());
    }

    use crate::beliefs::PanelRow;
}
