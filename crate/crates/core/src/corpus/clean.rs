//! Text-, chapter- and book-level cleaning with a per-rule removal ledger.
//!
//! Rules run in a fixed order and each only sees what earlier rules kept.
//! Facts that later passes must not re-derive (original chapter count,
//! first-chapter reads, word-count baseline, successor read counts) are frozen
//! on the first pass, which makes the whole procedure idempotent.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::textclean::{english_fraction, strip_author_notes, strip_markup, Wordlist};
use super::{Book, Chapter, ChapterId, Corpus, CorpusError, Provenance};
use crate::imagination::SYSTEM_PROMPT;
use crate::llm::{CompletionRequest, Gateway, Task};
use crate::text::{word_count, word_tokens};
use crate::util::parallel_map;

pub const RELEVANCE_PROMPT_TEMPLATE: &str = "Please classify the following text and provide a probability score between 0 and 1. The score should be close to 1 if the text is a book chapter, and closer to 0 if the text is a prelude, author's note, Spotify playlist, prologue, or anything else that is not a book chapter. Your response may consist exclusively of a number between 0 and 1. The chapter title is: '{title}'. The chapter url is: '{url}'.";

pub const EXPLICIT_PROMPT: &str = "Evaluate the following text and assist me in determining if it features sexually explicit content. Your response may consist exclusively of a probability score from 0 to 1, where a score close to 1 indicates high confidence that the text contains sexually explicit material.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub relevance_threshold: f64,
    pub explicit_threshold: f64,
    pub english_book_min: f64,
    pub english_chapter_min: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub max_chapters: usize,
    pub min_first_reads: u64,
    pub explicit_book_share: f64,
    pub wordcount_z: f64,
    pub note_markers: Vec<String>,
    pub irrelevant_titles: Vec<String>,
    pub irrelevant_keywords: Vec<String>,
    pub explicit_tags: Vec<String>,
    /// Chapters created after this date are dropped.
    pub max_created_at: Option<NaiveDate>,
    /// Rewrite heuristic: reads jump above `rewrite_ratio` times the previous
    /// chapter's reads while the previous chapter has more than
    /// `rewrite_min_prev_reads`.
    pub rewrite_ratio: f64,
    pub rewrite_min_prev_reads: u64,
    /// Chapter text passed to the classifiers is cut to this many words.
    pub classifier_max_words: usize,
    /// Abort on classifier failure instead of skipping the rule for that chapter.
    pub classifier_hard_fail: bool,
    pub workers: usize,
}

impl Default for CleanConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self {
            relevance_threshold: 0.25,
            explicit_threshold: 0.9,
            english_book_min: 0.73,
            english_chapter_min: 0.50,
            min_words: 400,
            max_words: 10_000,
            max_chapters: 50,
            min_first_reads: 100,
            explicit_book_share: 0.15,
            wordcount_z: 2.0,
            note_markers: s(&["A/N", "Author's Note", "AN:"]),
            irrelevant_titles: s(&["introduction", "prologue", "character"]),
            irrelevant_keywords: s(&["author", "extra"]),
            explicit_tags: s(&["mature", "adultromance", "explicit", "smut", "lemon"]),
            max_created_at: None,
            rewrite_ratio: 3.0,
            rewrite_min_prev_reads: 100,
            classifier_max_words: 3000,
            classifier_hard_fail: false,
            workers: 4,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = [
            ("relevance_threshold", self.relevance_threshold),
            ("explicit_threshold", self.explicit_threshold),
            ("english_book_min", self.english_book_min),
            ("english_chapter_min", self.english_chapter_min),
            ("explicit_book_share", self.explicit_book_share),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.min_words > self.max_words {
            return Err("min_words exceeds max_words".into());
        }
        if !(self.wordcount_z.is_finite() && self.wordcount_z >= 0.0) {
            return Err("wordcount_z must be a nonnegative number".into());
        }
        if self.rewrite_ratio < 1.0 {
            return Err("rewrite_ratio must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CleanLevel {
    Text,
    Chapter,
    Book,
}

impl CleanLevel {
    fn as_str(self) -> &'static str {
        match self {
            CleanLevel::Text => "text",
            CleanLevel::Chapter => "chapter",
            CleanLevel::Book => "book",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanEntry {
    pub rule_id: String,
    pub level: CleanLevel,
    pub entity_id: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub words_before: usize,
    pub words_after: usize,
    pub chapters_before: usize,
    pub chapters_after: usize,
    pub books_before: usize,
    pub books_after: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub entries: Vec<CleanEntry>,
    pub warnings: Vec<String>,
    pub counts: LevelCounts,
}

impl CleanReport {
    fn push(&mut self, rule: &str, level: CleanLevel, entity: impl ToString, detail: impl Into<String>) {
        self.entries.push(CleanEntry {
            rule_id: rule.into(),
            level,
            entity_id: entity.to_string(),
            detail: detail.into(),
        });
    }

    /// Entries that removed a chapter (including chapters of removed books).
    pub fn removed_chapters(&self) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.level == CleanLevel::Chapter)
            .map(|e| e.entity_id.as_str())
            .collect()
    }

    pub fn removed_books(&self) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.level == CleanLevel::Book)
            .map(|e| e.entity_id.as_str())
            .collect()
    }

    /// CSV with columns `rule_id,level,entity_id,detail`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CorpusError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["rule_id", "level", "entity_id", "detail"])?;
        for e in &self.entries {
            wtr.write_record([e.rule_id.as_str(), e.level.as_str(), &e.entity_id, &e.detail])?;
        }
        wtr.flush().map_err(|source| CorpusError::Io {
            path: "<clean report>".into(),
            source,
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), CorpusError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Relevance prompt with `{title}` and `{url}` substituted, followed by the
/// chapter text.
pub fn relevance_prompt(title: &str, url: &str, text: &str) -> String {
    let head = RELEVANCE_PROMPT_TEMPLATE.replace("{title}", title).replace("{url}", url);
    format!("{head}\n\n{text}")
}

pub fn explicit_prompt(text: &str) -> String {
    format!("{EXPLICIT_PROMPT}\n\n{text}")
}

fn parse_score(s: &str) -> Option<f64> {
    let t = s.trim().trim_end_matches('.').trim();
    let v: f64 = t.parse().ok()?;
    v.is_finite().then(|| v.clamp(0.0, 1.0))
}

fn truncate_words(text: &str, max: usize) -> String {
    if max == 0 || word_count(text) <= max {
        return text.to_string();
    }
    text.split_whitespace().take(max).collect::<Vec<_>>().join(" ")
}

/// Send a classifier prompt; an unparseable answer is retried once under a
/// different seed tag.
fn score_prompt(gateway: &Gateway, prompt: &str, chapter: &ChapterId) -> Result<f64, CorpusError> {
    let mut last = String::new();
    for attempt in 0..2 {
        let req = CompletionRequest::new(Task::Classify, SYSTEM_PROMPT, prompt)
            .temperature(0.0)
            .max_output_tokens(8)
            .seed_tag(if attempt == 0 { String::new() } else { format!("reparse={attempt}") });
        let resp = gateway.complete(&req).map_err(|e| CorpusError::Classifier {
            chapter: chapter.clone(),
            reason: e.to_string(),
        })?;
        if let Some(v) = parse_score(&resp.text) {
            return Ok(v);
        }
        last = resp.text;
    }
    Err(CorpusError::Classifier {
        chapter: chapter.clone(),
        reason: format!("unparseable score {last:?}"),
    })
}

/// Probability that the chapter is part of the story, clamped to [0, 1].
pub fn classify_relevance(
    book: &Book,
    chapter: &Chapter,
    gateway: &Gateway,
    max_words: usize,
) -> Result<f64, CorpusError> {
    let prompt = relevance_prompt(
        &chapter.title,
        chapter.url.as_deref().unwrap_or(""),
        &truncate_words(&chapter.text, max_words),
    );
    score_prompt(gateway, &prompt, &book.chapter_id(chapter))
}

/// Probability that the chapter is sexually explicit, clamped to [0, 1].
pub fn classify_explicit(
    book: &Book,
    chapter: &Chapter,
    gateway: &Gateway,
    max_words: usize,
) -> Result<f64, CorpusError> {
    let prompt = explicit_prompt(&truncate_words(&chapter.text, max_words));
    score_prompt(gateway, &prompt, &book.chapter_id(chapter))
}

/// True when some token of `s` is `keyword`, optionally pluralized or
/// possessive.
fn has_keyword(s: &str, keyword: &str) -> bool {
    let kw = keyword.to_lowercase();
    word_tokens(s).iter().any(|t| {
        t.strip_prefix(kw.as_str())
            .is_some_and(|rest| matches!(rest, "" | "s" | "'s" | "s'"))
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct Classifier<'a> {
    gateway: Option<&'a Gateway>,
    config: &'a CleanConfig,
}

enum Kind {
    Relevance,
    Explicit,
}

impl Classifier<'_> {
    /// Scores for every chapter of every book; `None` where the call failed
    /// (recorded as a warning) or no gateway is configured.
    fn score_all(
        &self,
        books: &[Book],
        kind: Kind,
        report: &mut CleanReport,
    ) -> Result<Vec<Vec<Option<f64>>>, CorpusError> {
        let Some(gateway) = self.gateway else {
            return Ok(books.iter().map(|b| vec![None; b.chapters.len()]).collect());
        };
        let jobs: Vec<(usize, usize)> = books
            .iter()
            .enumerate()
            .flat_map(|(bi, b)| (0..b.chapters.len()).map(move |ci| (bi, ci)))
            .collect();
        let max_words = self.config.classifier_max_words;
        let results = parallel_map(&jobs, self.config.workers, |&(bi, ci)| {
            let (b, c) = (&books[bi], &books[bi].chapters[ci]);
            match kind {
                Kind::Relevance => classify_relevance(b, c, gateway, max_words),
                Kind::Explicit => classify_explicit(b, c, gateway, max_words),
            }
        });
        let mut out: Vec<Vec<Option<f64>>> = books.iter().map(|b| vec![None; b.chapters.len()]).collect();
        for (&(bi, ci), r) in jobs.iter().zip(results) {
            match r {
                Ok(v) => out[bi][ci] = Some(v),
                Err(e) if self.config.classifier_hard_fail => return Err(e),
                Err(e) => report.warnings.push(format!("classifier skipped: {e}")),
            }
        }
        Ok(out)
    }
}

/// Run every cleaning rule. Classifier rules are skipped (with a warning)
/// when `gateway` is `None`.
pub fn apply_cleaning(
    corpus: &Corpus,
    config: &CleanConfig,
    wordlist: &Wordlist,
    gateway: Option<&Gateway>,
) -> Result<(Corpus, CleanReport), CorpusError> {
    corpus.validate()?;
    let mut report = CleanReport::default();
    if gateway.is_none() {
        report
            .warnings
            .push("no classifier provider: relevance and explicit rules skipped".into());
    }
    let classifier = Classifier { gateway, config };
    let mut books = corpus.books.clone();
    report.counts.books_before = books.len();
    report.counts.chapters_before = corpus.chapter_count();
    report.counts.words_before = books
        .iter()
        .flat_map(|b| &b.chapters)
        .map(Chapter::word_count)
        .sum();

    // Text level.
    for book in &mut books {
        book.link_successors();
        for ch in &mut book.chapters {
            let id = ChapterId::new(book.book_id.clone(), ch.chapter_index);
            let before = word_count(&ch.text);
            let unmarked = strip_markup(&ch.text);
            if unmarked != ch.text {
                let removed = before.saturating_sub(word_count(&unmarked));
                report.push("strip_markup", CleanLevel::Text, &id, format!("markup removed ({removed} words)"));
            }
            let denoted = strip_author_notes(&unmarked, &config.note_markers);
            if denoted != unmarked {
                let removed = word_count(&unmarked).saturating_sub(word_count(&denoted));
                report.push("strip_author_notes", CleanLevel::Text, &id, format!("{removed} words of notes removed"));
            }
            ch.text = denoted;
        }
        if book.provenance.is_none() {
            let wcs: Vec<f64> = book.chapters.iter().map(|c| c.word_count() as f64).collect();
            let (mean, std) = mean_std(&wcs);
            book.provenance = Some(Provenance {
                original_chapter_count: book.chapters.len(),
                first_chapter_reads: book.chapters.first().map_or(0, |c| c.read_count),
                word_count_mean: mean,
                word_count_std: std,
            });
        }
    }
    report.counts.words_after = books
        .iter()
        .flat_map(|b| &b.chapters)
        .map(Chapter::word_count)
        .sum();

    // Chapter level.
    let drop_where = |books: &mut Vec<Book>,
                      report: &mut CleanReport,
                      rule: &str,
                      pred: &dyn Fn(&Book, &Chapter) -> Option<String>| {
        for book in books.iter_mut() {
            let mut kept = Vec::with_capacity(book.chapters.len());
            for ch in std::mem::take(&mut book.chapters) {
                match pred(book, &ch) {
                    Some(detail) => report.push(rule, CleanLevel::Chapter, book.chapter_id(&ch), detail),
                    None => kept.push(ch),
                }
            }
            book.chapters = kept;
        }
    };

    drop_where(&mut books, &mut report, "irrelevant_title", &|_, ch| {
        let title_hit = config.irrelevant_titles.iter().find(|t| has_keyword(&ch.title, t));
        let kw_hit = config.irrelevant_keywords.iter().find(|k| has_keyword(&ch.title, k));
        title_hit
            .or(kw_hit)
            .map(|k| format!("title {:?} matches {k:?}", ch.title))
    });

    drop_where(&mut books, &mut report, "wordcount_outlier", &|book, ch| {
        let p = book.provenance.as_ref().expect("provenance set above");
        let floor = p.word_count_mean - config.wordcount_z * p.word_count_std;
        let wc = ch.word_count() as f64;
        (wc < floor).then(|| format!("{wc} words < book mean {:.1} - {} sd ({floor:.1})", p.word_count_mean, config.wordcount_z))
    });

    let relevance = classifier.score_all(&books, Kind::Relevance, &mut report)?;
    let relevance: HashMap<ChapterId, f64> = books
        .iter()
        .zip(&relevance)
        .flat_map(|(b, s)| b.chapters.iter().zip(s).filter_map(|(c, s)| s.map(|v| (b.chapter_id(c), v))))
        .collect();
    drop_where(&mut books, &mut report, "relevance_score", &|book, ch| {
        let s = *relevance.get(&book.chapter_id(ch))?;
        (s < config.relevance_threshold).then(|| format!("relevance {s} < {}", config.relevance_threshold))
    });

    let explicit = classifier.score_all(&books, Kind::Explicit, &mut report)?;
    let mut explicit_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut explicit_ids: BTreeMap<ChapterId, f64> = BTreeMap::new();
    for (b, scores) in books.iter().zip(&explicit) {
        for (c, s) in b.chapters.iter().zip(scores) {
            if let Some(s) = s.filter(|s| *s > config.explicit_threshold) {
                explicit_ids.insert(b.chapter_id(c), s);
                *explicit_counts.entry(b.book_id.clone()).or_default() += 1;
            }
        }
    }
    drop_paired(&mut books, &mut report, "explicit_content", "explicit_preceding", |book, ch| {
        explicit_ids
            .get(&book.chapter_id(ch))
            .map(|s| format!("explicit score {s} > {}", config.explicit_threshold))
    });

    drop_paired(&mut books, &mut report, "rewritten", "rewritten_preceding", |book, ch| {
        match ch.rewritten {
            Some(true) => Some("marked rewritten".into()),
            Some(false) => None,
            None => {
                let prev = book.chapters.iter().find(|p| p.chapter_index + 1 == ch.chapter_index)?;
                (prev.read_count > config.rewrite_min_prev_reads
                    && ch.read_count as f64 > config.rewrite_ratio * prev.read_count as f64)
                    .then(|| format!("reads jump {} -> {}", prev.read_count, ch.read_count))
            }
        }
    });

    if let Some(cutoff) = config.max_created_at {
        drop_where(&mut books, &mut report, "created_after_cutoff", &|_, ch| {
            (ch.created_at > cutoff).then(|| format!("created {} after {cutoff}", ch.created_at))
        });
    }

    drop_where(&mut books, &mut report, "final_chapter", &|_, ch| {
        ch.next_read_count.is_none().then(|| "no following chapter".to_string())
    });

    drop_where(&mut books, &mut report, "zero_reads", &|_, ch| {
        (ch.read_count == 0).then(|| "read count is zero".to_string())
    });

    drop_where(&mut books, &mut report, "chapter_too_long", &|_, ch| {
        let wc = ch.word_count();
        (wc > config.max_words).then(|| format!("{wc} words > {}", config.max_words))
    });

    drop_where(&mut books, &mut report, "chapter_non_english", &|_, ch| {
        let f = english_fraction(&ch.text, wordlist);
        (f < config.english_chapter_min).then(|| format!("english fraction {f:.3} < {}", config.english_chapter_min))
    });

    // Book level.
    let explicit_tags: BTreeSet<String> = config.explicit_tags.iter().map(|t| t.to_lowercase()).collect();
    let mut kept_books = Vec::with_capacity(books.len());
    for book in books {
        let verdict = book_verdict(&book, config, wordlist, &explicit_tags, &explicit_counts);
        match verdict {
            Some((rule, detail)) => {
                report.push(rule, CleanLevel::Book, &book.book_id, detail);
                for ch in &book.chapters {
                    report.push("in_removed_book", CleanLevel::Chapter, book.chapter_id(ch), format!("book removed by {rule}"));
                }
            }
            None => kept_books.push(book),
        }
    }

    let out = Corpus { books: kept_books };
    report.counts.books_after = out.books.len();
    report.counts.chapters_after = out.chapter_count();
    Ok((out, report))
}

fn book_verdict(
    book: &Book,
    config: &CleanConfig,
    wordlist: &Wordlist,
    explicit_tags: &BTreeSet<String>,
    explicit_counts: &BTreeMap<String, usize>,
) -> Option<(&'static str, String)> {
    let p = book.provenance.as_ref().expect("provenance set during text cleaning");
    if book.chapters.is_empty() {
        return Some(("empty_book", "no chapters left".into()));
    }
    let n = book.chapters.len() as f64;
    let english = book.chapters.iter().map(|c| english_fraction(&c.text, wordlist)).sum::<f64>() / n;
    if english < config.english_book_min {
        return Some(("book_non_english", format!("mean english fraction {english:.3} < {}", config.english_book_min)));
    }
    if book.is_mature {
        return Some(("mature_tags", "book marked mature".into()));
    }
    if let Some(tag) = book.tags.iter().find(|t| explicit_tags.contains(&t.to_lowercase())) {
        return Some(("mature_tags", format!("explicit tag {tag:?}")));
    }
    let explicit = explicit_counts.get(&book.book_id).copied().unwrap_or(0);
    if p.original_chapter_count > 0 {
        let share = explicit as f64 / p.original_chapter_count as f64;
        if share > config.explicit_book_share {
            return Some(("explicit_share", format!("{explicit}/{} chapters explicit", p.original_chapter_count)));
        }
    }
    // Judged on the book as first seen, like the chapter-count limit.
    let mean_words = p.word_count_mean;
    if mean_words < config.min_words as f64 {
        return Some(("mean_words_below_min", format!("mean {mean_words:.1} words < {}", config.min_words)));
    }
    if mean_words > config.max_words as f64 {
        return Some(("mean_words_above_max", format!("mean {mean_words:.1} words > {}", config.max_words)));
    }
    if p.original_chapter_count > config.max_chapters {
        return Some(("too_many_chapters", format!("{} chapters > {}", p.original_chapter_count, config.max_chapters)));
    }
    if p.first_chapter_reads < config.min_first_reads {
        return Some(("first_chapter_reads", format!("first chapter reads {} < {}", p.first_chapter_reads, config.min_first_reads)));
    }
    None
}

/// Drop flagged chapters and the chapter directly preceding each of them.
fn drop_paired(
    books: &mut [Book],
    report: &mut CleanReport,
    rule: &str,
    preceding_rule: &str,
    flag: impl Fn(&Book, &Chapter) -> Option<String>,
) {
    for book in books.iter_mut() {
        let flagged: BTreeMap<u32, String> = book
            .chapters
            .iter()
            .filter_map(|c| flag(book, c).map(|d| (c.chapter_index, d)))
            .collect();
        if flagged.is_empty() {
            continue;
        }
        let mut kept = Vec::with_capacity(book.chapters.len());
        for ch in std::mem::take(&mut book.chapters) {
            let id = ChapterId::new(book.book_id.clone(), ch.chapter_index);
            if let Some(detail) = flagged.get(&ch.chapter_index) {
                report.push(rule, CleanLevel::Chapter, id, detail.clone());
            } else if flagged.contains_key(&(ch.chapter_index + 1)) {
                report.push(preceding_rule, CleanLevel::Chapter, id, format!("precedes flagged chapter {}", ch.chapter_index + 1));
            } else {
                kept.push(ch);
            }
        }
        book.chapters = kept;
    }
}
