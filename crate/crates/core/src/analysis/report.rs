//! CSV tables. Every numeric column comes at full precision alongside a
//! `display_*` column rounded the way a printed table would show it.

use std::io::Write;

use super::compare::ModelComparison;
use super::ols::stars;
use super::AnalysisError;
use crate::features::Family;
use crate::util::fmt_f64;

fn full(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "NA".into())
}

/// Adjusted R² shown in percent with two decimals.
fn pct2(x: Option<f64>) -> String {
    x.map(|v| format!("{:.2}", 100.0 * v)).unwrap_or_else(|| "NA".into())
}

/// Relative improvement shown as a whole percentage.
fn pct0(x: Option<f64>) -> String {
    x.map(|v| format!("{:.0}%", 100.0 * v)).unwrap_or_else(|| "NA".into())
}

fn csv_err(e: csv::Error) -> AnalysisError {
    AnalysisError::Report(e.to_string())
}

pub fn write_table2<W: Write>(w: W, comparisons: &[ModelComparison]) -> Result<(), AnalysisError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "outcome",
        "family",
        "n",
        "adj_r2_base",
        "adj_r2_feature",
        "adj_r2_belief",
        "relative_improvement",
        "display_adj_r2_base",
        "display_adj_r2_feature",
        "display_adj_r2_belief",
        "display_relative_improvement",
        "clamped_rows",
        "note",
    ])
    .map_err(csv_err)?;
    for c in comparisons {
        wtr.write_record([
            c.outcome.name().to_string(),
            c.family.name().to_string(),
            c.n.to_string(),
            full(c.adj_r2_base),
            full(c.adj_r2_feature),
            full(c.adj_r2_belief),
            full(c.relative_improvement),
            pct2(c.adj_r2_base),
            pct2(c.adj_r2_feature),
            pct2(c.adj_r2_belief),
            pct0(c.relative_improvement),
            c.clamped.to_string(),
            c.note.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| AnalysisError::Report(e.to_string()))
}

pub fn write_table3<W: Write>(w: W, comparisons: &[ModelComparison]) -> Result<(), AnalysisError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "outcome",
        "family",
        "component",
        "adj_r2",
        "relative_improvement",
        "display_adj_r2",
        "display_relative_improvement",
    ])
    .map_err(csv_err)?;
    for c in comparisons {
        for comp in &c.components {
            wtr.write_record([
                c.outcome.name().to_string(),
                c.family.name().to_string(),
                comp.block.name().to_string(),
                full(comp.adj_r2),
                full(comp.relative_improvement),
                pct2(comp.adj_r2),
                pct0(comp.relative_improvement),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| AnalysisError::Report(e.to_string()))
}

/// Coefficients of the full belief model for one family, outcome by outcome.
/// Intercept and chapter dummies are summarized by a single fixed-effects row.
pub fn write_table5<W: Write>(w: W, family: Family, comparisons: &[ModelComparison]) -> Result<(), AnalysisError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "outcome",
        "term",
        "estimate",
        "std_error",
        "p_value",
        "stars",
        "display_estimate",
        "display_std_error",
    ])
    .map_err(csv_err)?;
    for c in comparisons.iter().filter(|c| c.family == family) {
        let outcome = c.outcome.name();
        let Some(fit) = &c.belief_fit else {
            wtr.write_record([outcome, "NA", "NA", "NA", "NA", "", "NA", c.note.as_deref().unwrap_or("")])
                .map_err(csv_err)?;
            continue;
        };
        for (i, name) in fit.names.iter().enumerate() {
            if i == 0 || name.starts_with("Chapter-") {
                continue;
            }
            let (b, se, p) = (fit.coefficients[i], fit.std_errors[i], fit.p_values[i]);
            wtr.write_record([
                outcome.to_string(),
                name.clone(),
                fmt_f64(b),
                fmt_f64(se),
                fmt_f64(p),
                stars(p).to_string(),
                format!("{b:.3}{}", stars(p)),
                format!("({se:.3})"),
            ])
            .map_err(csv_err)?;
        }
        for (term, value, display) in [
            ("Chapter Fixed Effects", String::new(), "Yes".to_string()),
            ("Observations", fit.n.to_string(), fit.n.to_string()),
            ("Adjusted R2", fmt_f64(fit.adj_r2), format!("{:.3}", fit.adj_r2)),
        ] {
            wtr.write_record([outcome, term, &value, "", "", "", &display, ""]).map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| AnalysisError::Report(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::compare::Component;
    use crate::analysis::design::{Block, Outcome};

    fn published(b: f64, f: f64, l: f64) -> ModelComparison {
        ModelComparison {
            outcome: Outcome::VoteRate,
            family: Family::Emotion,
            n: 100,
            clamped: 0,
            adj_r2_base: Some(b / 100.0),
            adj_r2_feature: Some(f / 100.0),
            adj_r2_belief: Some(l / 100.0),
            r2: [None; 3],
            relative_improvement: crate::analysis::relative_improvement(b, f, l),
            components: vec![Component { block: Block::Surprise, adj_r2: None, relative_improvement: None }],
            belief_fit: None,
            note: None,
        }
    }

    #[test]
    fn display_columns() {
        let mut buf = Vec::new();
        write_table2(&mut buf, &[published(1.66, 2.44, 2.79)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let line = s.lines().nth(1).unwrap();
        assert!(line.contains(",1.66,2.44,2.79,45%,"), "{line}");

        let mut buf = Vec::new();
        write_table3(&mut buf, &[published(1.0, 2.0, 3.0)]).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("surprise,NA,NA,NA,NA"));

        let mut buf = Vec::new();
        let mut c = published(1.0, 2.0, 3.0);
        c.note = Some("too few rows".into());
        write_table5(&mut buf, Family::Emotion, &[c]).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("too few rows"));
    }
}
