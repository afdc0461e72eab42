//! Story corpus model, JSON-lines IO, Appendix-style cleaning and engagement
//! rates.
//!
//! A corpus is a list of books; each book holds its chapters ordered by a
//! strictly increasing, 1-based `chapter_index`. Engagement counts come
//! straight from the platform and are never modified by cleaning.

mod clean;
mod rates;
mod textclean;

pub use clean::{
    apply_cleaning, classify_explicit, classify_relevance, explicit_prompt, relevance_prompt,
    CleanConfig, CleanEntry, CleanLevel, CleanReport, LevelCounts, EXPLICIT_PROMPT,
    RELEVANCE_PROMPT_TEMPLATE,
};
pub use rates::{compute_rates, rates_from_counts, EngagementRates};
pub use textclean::{english_fraction, strip_author_notes, strip_markup, Wordlist};

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("invalid corpus: {0}")]
    Invalid(String),
    #[error("engagement rate undefined for {0}: read count is zero")]
    UndefinedRate(ChapterId),
    #[error("english wordlist is empty")]
    EmptyWordlist,
    #[error("classifier failed for {chapter}: {reason}")]
    Classifier { chapter: ChapterId, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// `(book_id, chapter_index)`, rendered as `book/3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChapterId {
    pub book_id: String,
    pub chapter_index: u32,
}

impl ChapterId {
    pub fn new(book_id: impl Into<String>, chapter_index: u32) -> Self {
        Self {
            book_id: book_id.into(),
            chapter_index,
        }
    }
}

impl fmt::Display for ChapterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.book_id, self.chapter_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chapter {
    pub chapter_index: u32,
    pub title: String,
    #[serde(default)]
    pub url: Option<String>,
    pub created_at: NaiveDate,
    pub text: String,
    pub read_count: u64,
    pub vote_count: u64,
    pub comment_count: u64,
    /// Explicit rewrite marker from the source platform; overrides the
    /// read-count heuristic when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewritten: Option<bool>,
    /// Read count of the chapter that originally followed this one. Captured
    /// before any removal so continue rates survive cleaning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_read_count: Option<u64>,
}

impl Chapter {
    pub fn word_count(&self) -> usize {
        crate::text::word_count(&self.text)
    }
}

/// Book-level facts frozen the first time a book is cleaned, so that later
/// passes judge the book against its original shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub original_chapter_count: usize,
    pub first_chapter_reads: u64,
    pub word_count_mean: f64,
    pub word_count_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Book {
    pub book_id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub is_mature: bool,
    #[serde(default)]
    pub tags: Vec<String>,
    pub chapters: Vec<Chapter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Book {
    pub fn chapter_id(&self, chapter: &Chapter) -> ChapterId {
        ChapterId::new(self.book_id.clone(), chapter.chapter_index)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut prev = 0u32;
        for ch in &self.chapters {
            if ch.chapter_index == 0 {
                return Err(CorpusError::Invalid(format!(
                    "book {}: chapter_index must be >= 1",
                    self.book_id
                )));
            }
            if ch.chapter_index <= prev {
                return Err(CorpusError::Invalid(format!(
                    "book {}: chapter indices not strictly increasing at {}",
                    self.book_id, ch.chapter_index
                )));
            }
            prev = ch.chapter_index;
        }
        Ok(())
    }

    /// Fill `next_read_count` from list adjacency where it is not yet known.
    pub fn link_successors(&mut self) {
        for i in 0..self.chapters.len().saturating_sub(1) {
            if self.chapters[i].next_read_count.is_none() {
                self.chapters[i].next_read_count = Some(self.chapters[i + 1].read_count);
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub books: Vec<Book>,
}

impl Corpus {
    pub fn chapter_count(&self) -> usize {
        self.books.iter().map(|b| b.chapters.len()).sum()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for b in &self.books {
            if !seen.insert(b.book_id.as_str()) {
                return Err(CorpusError::Invalid(format!("duplicate book_id {}", b.book_id)));
            }
            b.validate()?;
        }
        Ok(())
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut books = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| CorpusError::Io {
                path: "<reader>".into(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let book: Book =
                serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
            books.push(book);
        }
        let corpus = Corpus { books };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let f = std::fs::File::open(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(std::io::BufReader::new(f))
    }

    pub fn to_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for b in &self.books {
            serde_json::to_writer(&mut w, b)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut buf = Vec::new();
        self.to_jsonl(&mut buf).map_err(io_err)?;
        std::fs::write(path, buf).map_err(io_err)
    }

    pub fn book(&self, book_id: &str) -> Option<&Book> {
        self.books.iter().find(|b| b.book_id == book_id)
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::chapter;
    use super::*;

    #[test]
    fn jsonl_roundtrip_and_validation() {
        let book = Book {
            book_id: "b1".into(),
            title: "T".into(),
            description: String::new(),
            language: "English".into(),
            is_mature: false,
            tags: vec!["drama".into()],
            chapters: vec![chapter(1, 10, 100), chapter(2, 10, 90)],
            provenance: None,
        };
        let corpus = Corpus { books: vec![book] };
        let mut buf = Vec::new();
        corpus.to_jsonl(&mut buf).unwrap();
        let back = Corpus::from_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn rejects_non_increasing_indices() {
        let line = r#"{"book_id":"b","title":"t","chapters":[
            {"chapter_index":2,"title":"a","created_at":"2023-01-01","text":"x","read_count":1,"vote_count":0,"comment_count":0},
            {"chapter_index":2,"title":"b","created_at":"2023-01-01","text":"x","read_count":1,"vote_count":0,"comment_count":0}]}"#
            .replace('\n', "");
        let err = Corpus::from_jsonl(line.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Invalid(_)));
    }

    #[test]
    fn successors_linked_once() {
        let mut b = Book {
            book_id: "b".into(),
            title: "t".into(),
            description: String::new(),
            language: String::new(),
            is_mature: false,
            tags: vec![],
            chapters: vec![chapter(1, 5, 100), chapter(2, 5, 80), chapter(3, 5, 70)],
            provenance: None,
        };
        b.link_successors();
        assert_eq!(b.chapters[0].next_read_count, Some(80));
        assert_eq!(b.chapters[1].next_read_count, Some(70));
        assert_eq!(b.chapters[2].next_read_count, None);
        b.chapters.remove(1);
        b.link_successors();
        assert_eq!(b.chapters[0].next_read_count, Some(80));
    }
}
