//! Expectation, uncertainty and surprise over imagined-continuation features,
//! and the per-chapter panel that joins them with engagement and the actual
//! chapter's features.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::features::{FeatureVector, N_DIMS};
use crate::util::fmt_f64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeliefError {
    #[error("no samples")]
    Empty,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("panel csv: {0}")]
    Csv(String),
}

/// Share of samples that must carry a dim for its statistics to be computed.
pub const MIN_PRESENT_SHARE: f64 = 0.8;

/// Componentwise mean over samples.
pub fn expectation(samples: &[Vec<f64>]) -> Result<Vec<f64>, BeliefError> {
    let first = samples.first().ok_or(BeliefError::Empty)?;
    let d = first.len();
    let mut acc = vec![0.0; d];
    for s in samples {
        if s.len() != d {
            return Err(BeliefError::DimMismatch(d, s.len()));
        }
        acc.iter_mut().zip(s).for_each(|(a, x)| *a += x);
    }
    let n = samples.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Componentwise population variance (divisor N).
pub fn uncertainty(samples: &[Vec<f64>]) -> Result<Vec<f64>, BeliefError> {
    let mean = expectation(samples)?;
    let mut acc = vec![0.0; mean.len()];
    for s in samples {
        for ((a, x), m) in acc.iter_mut().zip(s).zip(&mean) {
            *a += (x - m) * (x - m);
        }
    }
    let n = samples.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Componentwise squared change in expectation.
pub fn surprise(exp_t: &[f64], exp_prev: &[f64]) -> Result<Vec<f64>, BeliefError> {
    if exp_t.len() != exp_prev.len() {
        return Err(BeliefError::DimMismatch(exp_t.len(), exp_prev.len()));
    }
    Ok(exp_t.iter().zip(exp_prev).map(|(a, b)| (a - b) * (a - b)).collect())
}

/// Expectation and uncertainty per dim over feature vectors that may lack
/// some dims. A dim is computed over the samples that have it, provided they
/// make up at least [`MIN_PRESENT_SHARE`] of all samples; otherwise `None`.
pub fn sample_stats(samples: &[FeatureVector]) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>), BeliefError> {
    if samples.is_empty() {
        return Err(BeliefError::Empty);
    }
    let mut exp = vec![None; N_DIMS];
    let mut unc = vec![None; N_DIMS];
    for dim in 0..N_DIMS {
        let vals: Vec<Vec<f64>> = samples.iter().filter_map(|s| s.get(dim)).map(|v| vec![v]).collect();
        if vals.is_empty() || (vals.len() as f64) < MIN_PRESENT_SHARE * samples.len() as f64 {
            continue;
        }
        exp[dim] = Some(expectation(&vals)?[0]);
        unc[dim] = Some(uncertainty(&vals)?[0]);
    }
    Ok((exp, unc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefFeatures {
    pub book_id: String,
    pub chapter_index: u32,
    /// Position within the cleaned book, 1-based.
    pub position: usize,
    pub n_samples: usize,
    pub expectation: Vec<Option<f64>>,
    pub uncertainty: Vec<Option<f64>>,
    /// Zero at the first chapter, where it is not defined.
    pub surprise: Vec<Option<f64>>,
    pub surprise_defined: bool,
}

/// Input for one chapter: its imagination-feature samples, or `None` if the
/// imagination set is incomplete.
pub struct ChapterSamples<'a> {
    pub chapter_index: u32,
    pub position: usize,
    pub samples: Option<&'a [FeatureVector]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedChapter {
    pub book_id: String,
    pub chapter_index: u32,
    pub reason: String,
}

/// Belief features for each chapter of one book, in order. Chapters without
/// a complete sample set are dropped and reported. Surprise at a chapter whose
/// predecessor was dropped is absent.
pub fn belief_panel(
    book_id: &str,
    chapters: &[ChapterSamples<'_>],
) -> Result<(Vec<BeliefFeatures>, Vec<DroppedChapter>), BeliefError> {
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    let mut prev: Option<(usize, Vec<Option<f64>>)> = None;
    for ch in chapters {
        let Some(samples) = ch.samples.filter(|s| !s.is_empty()) else {
            dropped.push(DroppedChapter {
                book_id: book_id.to_string(),
                chapter_index: ch.chapter_index,
                reason: "incomplete imagination set".into(),
            });
            prev = None;
            continue;
        };
        let (exp, unc) = sample_stats(samples)?;
        let (sur, defined) = if ch.position == 1 {
            (exp.iter().map(|e| e.map(|_| 0.0)).collect(), false)
        } else {
            match &prev {
                Some((p, pe)) if *p + 1 == ch.position => (
                    exp.iter()
                        .zip(pe)
                        .map(|(a, b)| match (a, b) {
                            (Some(a), Some(b)) => Some((a - b) * (a - b)),
                            _ => None,
                        })
                        .collect(),
                    true,
                ),
                _ => (vec![None; N_DIMS], true),
            }
        };
        prev = Some((ch.position, exp.clone()));
        rows.push(BeliefFeatures {
            book_id: book_id.to_string(),
            chapter_index: ch.chapter_index,
            position: ch.position,
            n_samples: samples.len(),
            expectation: exp,
            uncertainty: unc,
            surprise: sur,
            surprise_defined: defined,
        });
    }
    Ok((rows, dropped))
}

/// One regression-panel row: engagement, actual chapter features and beliefs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub book_id: String,
    pub chapter_index: u32,
    pub position: usize,
    pub word_count: usize,
    pub read_count: u64,
    pub continue_rate: Option<f64>,
    pub comment_rate: f64,
    pub vote_rate: f64,
    pub n_samples: usize,
    pub surprise_defined: bool,
    pub actual: Vec<Option<f64>>,
    pub expectation: Vec<Option<f64>>,
    pub uncertainty: Vec<Option<f64>>,
    pub surprise: Vec<Option<f64>>,
}

impl PanelRow {
    pub fn has_beliefs(&self) -> bool {
        self.n_samples > 0
    }
}

const FIXED_COLS: [&str; 10] = [
    "book_id",
    "chapter_index",
    "position",
    "word_count",
    "read_count",
    "continue_rate",
    "comment_rate",
    "vote_rate",
    "n_samples",
    "surprise_defined",
];
const BLOCK_PREFIXES: [&str; 4] = ["actual", "exp", "unc", "sur"];

pub fn panel_header(names: &[String]) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLS.iter().map(|s| s.to_string()).collect();
    for p in BLOCK_PREFIXES {
        h.extend(names.iter().map(|n| format!("{p}_{n}")));
    }
    h
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_panel<W: Write>(w: W, names: &[String], rows: &[PanelRow]) -> Result<(), BeliefError> {
    let err = |e: csv::Error| BeliefError::Csv(e.to_string());
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(panel_header(names)).map_err(err)?;
    for r in rows {
        let mut rec = vec![
            r.book_id.clone(),
            r.chapter_index.to_string(),
            r.position.to_string(),
            r.word_count.to_string(),
            r.read_count.to_string(),
            opt(r.continue_rate),
            fmt_f64(r.comment_rate),
            fmt_f64(r.vote_rate),
            r.n_samples.to_string(),
            r.surprise_defined.to_string(),
        ];
        for block in [&r.actual, &r.expectation, &r.uncertainty, &r.surprise] {
            if block.len() != names.len() {
                return Err(BeliefError::DimMismatch(names.len(), block.len()));
            }
            rec.extend(block.iter().map(|x| opt(*x)));
        }
        wtr.write_record(rec).map_err(err)?;
    }
    wtr.flush().map_err(|e| BeliefError::Csv(e.to_string()))
}

/// Read a panel written by [`write_panel`]; returns the feature names too.
pub fn read_panel<R: Read>(r: R) -> Result<(Vec<String>, Vec<PanelRow>), BeliefError> {
    let err = |e: csv::Error| BeliefError::Csv(e.to_string());
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(err)?.clone();
    let n_feat = header
        .len()
        .checked_sub(FIXED_COLS.len())
        .filter(|n| n % 4 == 0)
        .ok_or_else(|| BeliefError::Csv("unexpected column count".into()))?
        / 4;
    let names: Vec<String> = header
        .iter()
        .skip(FIXED_COLS.len())
        .take(n_feat)
        .map(|h| h.strip_prefix("actual_").unwrap_or(h).to_string())
        .collect();
    if panel_header(&names).iter().map(String::as_str).ne(header.iter()) {
        return Err(BeliefError::Csv("header does not match panel layout".into()));
    }
    let num = |s: &str, col: &str| -> Result<f64, BeliefError> {
        s.parse::<f64>().map_err(|e| BeliefError::Csv(format!("{col}: {e}")))
    };
    let onum = |s: &str, col: &str| -> Result<Option<f64>, BeliefError> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s, col).map(Some)
        }
    };
    let int = |s: &str, col: &str| -> Result<u64, BeliefError> {
        s.parse::<u64>().map_err(|e| BeliefError::Csv(format!("{col}: {e}")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let block = |b: usize| -> Result<Vec<Option<f64>>, BeliefError> {
            (0..n_feat)
                .map(|j| onum(f(FIXED_COLS.len() + b * n_feat + j), &header[FIXED_COLS.len() + b * n_feat + j]))
                .collect()
        };
        rows.push(PanelRow {
            book_id: f(0).to_string(),
            chapter_index: int(f(1), "chapter_index")? as u32,
            position: int(f(2), "position")? as usize,
            word_count: int(f(3), "word_count")? as usize,
            read_count: int(f(4), "read_count")?,
            continue_rate: onum(f(5), "continue_rate")?,
            comment_rate: num(f(6), "comment_rate")?,
            vote_rate: num(f(7), "vote_rate")?,
            n_samples: int(f(8), "n_samples")? as usize,
            surprise_defined: f(9) == "true",
            actual: block(0)?,
            expectation: block(1)?,
            uncertainty: block(2)?,
            surprise: block(3)?,
        });
    }
    Ok((names, rows))
}
