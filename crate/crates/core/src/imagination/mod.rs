//! Recursive chapter summaries and N imagined continuations per chapter.
//!
//! Positions (`t`) are 1-based within the cleaned book. Chapter 1 is imagined
//! from its own text; chapter `t >= 2` from the running summary of chapters
//! `1..t-1` plus the full text of chapter `t`. The running summary is built
//! recursively, one summarizer call per chapter.

mod prompts;
mod store;

pub use prompts::{
    imagine_first_prompt, imagine_next_prompt, summary_first_prompt, summary_next_prompt,
    IMAGINE_FIRST_TEMPLATE, IMAGINE_NEXT_TEMPLATE, SUMMARY_FIRST_PROMPT, SUMMARY_NEXT_PROMPT,
    SYSTEM_PROMPT,
};
pub use store::{load_book, save_book, BookManifest, ChapterManifest};

use serde::{Deserialize, Serialize};

use crate::corpus::{Book, Chapter};
use crate::llm::{CompletionRequest, Gateway, GatewayError, Task};
use crate::text::word_count;
use crate::util::parallel_map;

#[derive(Debug, thiserror::Error)]
pub enum ImaginationError {
    #[error("chapter position {0} out of range")]
    Position(usize),
    #[error("summaries need t >= 2, got {0}")]
    NoPriorChapters(usize),
    #[error("summarizer failed at {book_id}/{chapter_index}: {source}")]
    Summary {
        book_id: String,
        chapter_index: u32,
        source: GatewayError,
    },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed store at {path}: {reason}")]
    Store { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagineConfig {
    /// Continuations per chapter.
    pub n_continuations: usize,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub summary_max_output_tokens: u32,
    /// Word budget for one prompt; chapter text is cut to fit.
    pub max_prompt_words: usize,
    pub workers: usize,
}

impl Default for ImagineConfig {
    fn default() -> Self {
        Self {
            n_continuations: 10,
            temperature: 1.0,
            max_output_tokens: 2048,
            summary_max_output_tokens: 2048,
            max_prompt_words: 12_000,
            workers: 4,
        }
    }
}

/// Summary of chapters `1..=upto_position` of one book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningSummary {
    pub book_id: String,
    pub upto_position: usize,
    pub upto_chapter: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub n: usize,
    pub reason: String,
    /// True when the provider could not be reached (as opposed to refusing).
    pub transport: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImaginationSet {
    pub book_id: String,
    pub chapter_index: u32,
    pub position: usize,
    pub n_requested: usize,
    /// Raw provider outputs, in sample order `n = 1..N`. Failed samples are
    /// absent, so the set is complete only when `len == n_requested`.
    pub continuations: Vec<String>,
    pub failures: Vec<SampleFailure>,
    pub warnings: Vec<String>,
}

impl ImaginationSet {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.continuations.len() == self.n_requested
    }

    /// Bullet text of each continuation, one bullet per line.
    pub fn bullet_texts(&self) -> Vec<String> {
        self.continuations.iter().map(|c| parse_bullets(c).join("\n")).collect()
    }
}

/// Split a continuation into bullets. Recognizes `-`, `•`, `*` and numbered
/// (`1.` / `1)`) markers; unmarked lines continue the previous bullet, and a
/// text with no markers at all is returned line by line.
pub fn parse_bullets(text: &str) -> Vec<String> {
    let mut bullets: Vec<String> = Vec::new();
    let mut any_marker = false;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match strip_marker(line) {
            Some(rest) => {
                any_marker = true;
                bullets.push(rest.to_string());
            }
            None if any_marker => {
                let last = bullets.last_mut().expect("a bullet exists once a marker was seen");
                last.push(' ');
                last.push_str(line);
            }
            None => {}
        }
    }
    if any_marker {
        bullets
    } else {
        text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
    }
}

fn strip_marker(line: &str) -> Option<&str> {
    for m in ["- ", "\u{2022}", "* ", "-"] {
        if let Some(rest) = line.strip_prefix(m) {
            return Some(rest.trim_start());
        }
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return Some(r.trim_start());
        }
    }
    None
}

/// Keep the first `budget` words of `text` (at least one).
fn fit_words(text: &str, budget: usize) -> (String, bool) {
    if word_count(text) <= budget {
        return (text.to_string(), false);
    }
    let cut: Vec<&str> = text.split_whitespace().take(budget.max(1)).collect();
    (cut.join(" "), true)
}

fn chapter_at(book: &Book, t: usize) -> Result<&Chapter, ImaginationError> {
    if t == 0 {
        return Err(ImaginationError::Position(t));
    }
    book.chapters.get(t - 1).ok_or(ImaginationError::Position(t))
}

/// Fold chapter `t` into the running summary of chapters `1..t-1`.
pub fn summarize_step(
    book: &Book,
    t: usize,
    previous: Option<&RunningSummary>,
    config: &ImagineConfig,
    gateway: &Gateway,
) -> Result<(RunningSummary, Vec<String>), ImaginationError> {
    let chapter = chapter_at(book, t)?;
    let mut warnings = Vec::new();
    let prompt = match previous {
        None => {
            let budget = config.max_prompt_words.saturating_sub(word_count(SUMMARY_FIRST_PROMPT));
            let (text, cut) = fit_words(&chapter.text, budget);
            if cut {
                warnings.push(format!("chapter {} truncated to {budget} words for summary", chapter.chapter_index));
            }
            summary_first_prompt(&text)
        }
        Some(prev) => {
            let budget = config
                .max_prompt_words
                .saturating_sub(word_count(SUMMARY_NEXT_PROMPT) + word_count(&prev.text));
            let (text, cut) = fit_words(&chapter.text, budget);
            if cut {
                warnings.push(format!("chapter {} truncated to {budget} words for summary", chapter.chapter_index));
            }
            summary_next_prompt(&prev.text, &text)
        }
    };
    let req = CompletionRequest::new(Task::Summarize, SYSTEM_PROMPT, prompt)
        .temperature(0.0)
        .max_output_tokens(config.summary_max_output_tokens);
    let resp = gateway.complete(&req).map_err(|source| ImaginationError::Summary {
        book_id: book.book_id.clone(),
        chapter_index: chapter.chapter_index,
        source,
    })?;
    Ok((
        RunningSummary {
            book_id: book.book_id.clone(),
            upto_position: t,
            upto_chapter: chapter.chapter_index,
            text: resp.text.trim().to_string(),
        },
        warnings,
    ))
}

/// Running summary of chapters `1..t-1`, built recursively from chapter 1.
pub fn summarize(
    book: &Book,
    t: usize,
    config: &ImagineConfig,
    gateway: &Gateway,
) -> Result<RunningSummary, ImaginationError> {
    if t < 2 {
        return Err(ImaginationError::NoPriorChapters(t));
    }
    chapter_at(book, t - 1)?;
    let mut summary: Option<RunningSummary> = None;
    for pos in 1..t {
        summary = Some(summarize_step(book, pos, summary.as_ref(), config, gateway)?.0);
    }
    Ok(summary.expect("t >= 2 runs at least one step"))
}

/// User prompt for imagining chapter `t` (prompt (a) for `t = 1`, (b) after).
pub fn imagination_prompt(
    book: &Book,
    t: usize,
    summary: Option<&RunningSummary>,
    max_prompt_words: usize,
) -> Result<(String, Option<String>), ImaginationError> {
    let chapter = chapter_at(book, t)?;
    let (prompt, cut_note) = match (t, summary) {
        (1, _) => {
            let budget = max_prompt_words.saturating_sub(prompts::template_words(true));
            let (text, cut) = fit_words(&chapter.text, budget);
            (imagine_first_prompt(&text), cut.then_some(budget))
        }
        (_, Some(s)) => {
            let budget = max_prompt_words.saturating_sub(prompts::template_words(false) + word_count(&s.text));
            let (text, cut) = fit_words(&chapter.text, budget);
            (imagine_next_prompt(&s.text, &text), cut.then_some(budget))
        }
        (_, None) => return Err(ImaginationError::NoPriorChapters(t)),
    };
    let warning = cut_note.map(|b| format!("chapter {} truncated to {b} words for imagination", chapter.chapter_index));
    Ok((prompt, warning))
}

/// N continuations for chapter `t`. A refused sample is re-drawn once under a
/// new seed tag; if that also fails the gap is recorded and the set is
/// incomplete.
pub fn imagine(
    book: &Book,
    t: usize,
    summary: Option<&RunningSummary>,
    config: &ImagineConfig,
    gateway: &Gateway,
) -> Result<ImaginationSet, ImaginationError> {
    let chapter = chapter_at(book, t)?;
    let (prompt, warning) = imagination_prompt(book, t, summary, config.max_prompt_words)?;
    let samples: Vec<usize> = (1..=config.n_continuations).collect();
    let outcomes = parallel_map(&samples, config.workers, |&n| {
        let base = CompletionRequest::new(Task::Imagine, SYSTEM_PROMPT, prompt.clone())
            .temperature(config.temperature)
            .max_output_tokens(config.max_output_tokens);
        match gateway.complete(&base.clone().seed_tag(format!("n={n}"))) {
            Ok(r) => Ok(r.text),
            Err(GatewayError::Policy(_)) => gateway
                .complete(&base.seed_tag(format!("n={n}:resample=1")))
                .map(|r| r.text),
            Err(e) => Err(e),
        }
    });
    let mut set = ImaginationSet {
        book_id: book.book_id.clone(),
        chapter_index: chapter.chapter_index,
        position: t,
        n_requested: config.n_continuations,
        continuations: Vec::new(),
        failures: Vec::new(),
        warnings: warning.into_iter().collect(),
    };
    for (n, out) in samples.into_iter().zip(outcomes) {
        match out {
            Ok(text) => set.continuations.push(text),
            Err(e) => set.failures.push(SampleFailure {
                n,
                transport: matches!(e, GatewayError::Transport { .. }),
                reason: e.to_string(),
            }),
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapterImagination {
    pub summary: Option<RunningSummary>,
    pub set: ImaginationSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookImagination {
    pub book_id: String,
    pub chapters: Vec<ChapterImagination>,
    pub summarizer_calls: usize,
}

impl BookImagination {
    pub fn complete_sets(&self) -> impl Iterator<Item = &ImaginationSet> {
        self.chapters.iter().map(|c| &c.set).filter(|s| s.is_complete())
    }

    pub fn has_transport_failures(&self) -> bool {
        self.chapters.iter().any(|c| c.set.failures.iter().any(|f| f.transport))
    }
}

/// Summaries and imagination sets for every chapter of a cleaned book.
/// Summaries are computed once, in order; a summarizer failure marks the
/// remaining chapters as failed while earlier results are kept.
pub fn run_book(book: &Book, config: &ImagineConfig, gateway: &Gateway) -> BookImagination {
    let mut out = BookImagination {
        book_id: book.book_id.clone(),
        chapters: Vec::with_capacity(book.chapters.len()),
        summarizer_calls: 0,
    };
    let mut summary: Option<RunningSummary> = None;
    let mut broken: Option<(String, bool)> = None;
    for t in 1..=book.chapters.len() {
        if t >= 2 && broken.is_none() {
            match summarize_step(book, t - 1, summary.as_ref(), config, gateway) {
                Ok((s, _)) => {
                    out.summarizer_calls += 1;
                    summary = Some(s);
                }
                Err(e) => {
                    let transport = matches!(
                        e,
                        ImaginationError::Summary { source: GatewayError::Transport { .. }, .. }
                    );
                    broken = Some((e.to_string(), transport));
                }
            }
        }
        let chapter = &book.chapters[t - 1];
        let set = match &broken {
            Some((reason, transport)) => ImaginationSet {
                book_id: book.book_id.clone(),
                chapter_index: chapter.chapter_index,
                position: t,
                n_requested: config.n_continuations,
                continuations: Vec::new(),
                failures: vec![SampleFailure {
                    n: 0,
                    reason: reason.clone(),
                    transport: *transport,
                }],
                warnings: Vec::new(),
            },
            None => imagine(book, t, summary.as_ref(), config, gateway)
                .expect("position is in range and summary present for t >= 2"),
        };
        out.chapters.push(ChapterImagination {
            summary: if t >= 2 && broken.is_none() { summary.clone() } else { None },
            set,
        });
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::test_support::chapter;
    use crate::llm::{Provider, ProviderError, SimulatedProvider};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::{Arc, Mutex};

    pub(crate) fn book(n: u32) -> Book {
        let mut chapters: Vec<Chapter> = (1..=n).map(|i| chapter(i, 50, 100)).collect();
        for (i, c) in chapters.iter_mut().enumerate() {
            c.text = format!("Chapter {} text: Mara was joyful with her friend.", i + 1);
        }
        Book {
            book_id: "b1".into(),
            title: "B".into(),
            description: String::new(),
            language: "English".into(),
            is_mature: false,
            tags: vec![],
            chapters,
            provenance: None,
        }
    }

    /// Records every request; refuses imagination samples whose seed tag is listed.
    struct Recorder {
        inner: SimulatedProvider,
        seen: Mutex<Vec<CompletionRequest>>,
        refuse_tags: Vec<String>,
        summaries: AtomicUsize,
    }

    impl Recorder {
        fn new(refuse: &[&str]) -> Arc<Self> {
            Arc::new(Self {
                inner: SimulatedProvider::new(11),
                seen: Mutex::new(Vec::new()),
                refuse_tags: refuse.iter().map(|s| s.to_string()).collect(),
                summaries: AtomicUsize::new(0),
            })
        }
    }

    impl Provider for Recorder {
        fn name(&self) -> &str {
            "recorder"
        }
        fn generate(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
            self.seen.lock().unwrap().push(req.clone());
            if req.task == Task::Summarize {
                self.summaries.fetch_add(1, Ordering::SeqCst);
            }
            if self.refuse_tags.contains(&req.seed_tag) {
                return Err(ProviderError::Policy("refused".into()));
            }
            self.inner.generate(req)
        }
    }

    #[test]
    fn bullet_parsing_variants() {
        assert_eq!(parse_bullets("- a\n- b"), vec!["a", "b"]);
        assert_eq!(parse_bullets("Here you go:\n1. a\n2) b\n   more\n\u{2022} c"), vec!["a", "b more", "c"]);
        assert_eq!(parse_bullets("plain\nlines"), vec!["plain", "lines"]);
        assert_eq!(parse_bullets("* x\n-y"), vec!["x", "y"]);
    }

    #[test]
    fn prompt_routing_by_position() {
        let b = book(3);
        let gw = Gateway::new(Recorder::new(&[]));
        let cfg = ImagineConfig::default();
        let (p1, _) = imagination_prompt(&b, 1, None, 12_000).unwrap();
        assert!(p1.starts_with("You have read and understood the first chapter"));
        let s2 = summarize(&b, 2, &cfg, &gw).unwrap();
        assert_eq!(s2.upto_position, 1);
        let (p2, _) = imagination_prompt(&b, 2, Some(&s2), 12_000).unwrap();
        assert!(p2.starts_with("You have read and understood the previous chapters"));
        assert!(p2.contains(&s2.text));
        assert!(matches!(summarize(&b, 1, &cfg, &gw), Err(ImaginationError::NoPriorChapters(1))));
        assert!(matches!(imagination_prompt(&b, 2, None, 100), Err(ImaginationError::NoPriorChapters(2))));
    }

    #[test]
    fn summary_recursion_uses_first_then_incremental_prompt() {
        let b = book(3);
        let rec = Recorder::new(&[]);
        let gw = Gateway::new(rec.clone());
        let s3 = summarize(&b, 3, &ImagineConfig::default(), &gw).unwrap();
        let seen = rec.seen.lock().unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0].user_prompt, summary_first_prompt(&b.chapters[0].text));
        let s1 = gw.complete(&seen[0]).unwrap().text;
        assert_eq!(seen[1].user_prompt, summary_next_prompt(s1.trim(), &b.chapters[1].text));
        assert!(seen.iter().all(|r| r.system_prompt == "You are an average book reader." && r.temperature == 0.0));
        assert_eq!(s3.upto_chapter, 2);
    }

    #[test]
    fn n_samples_distinct_tags_and_temperature_one() {
        let b = book(1);
        let rec = Recorder::new(&[]);
        let gw = Gateway::new(rec.clone());
        let set = imagine(&b, 1, None, &ImagineConfig::default(), &gw).unwrap();
        assert_eq!(set.continuations.len(), 10);
        assert!(set.is_complete());
        let seen = rec.seen.lock().unwrap();
        let mut tags: Vec<&str> = seen.iter().map(|r| r.seed_tag.as_str()).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), 10);
        assert!(seen.iter().all(|r| r.temperature == 1.0));
        for i in 0..10 {
            for j in i + 1..10 {
                assert_ne!(set.continuations[i], set.continuations[j]);
            }
        }
    }

    #[test]
    fn single_sample_set() {
        let b = book(1);
        let gw = Gateway::new(Recorder::new(&[]));
        let cfg = ImagineConfig { n_continuations: 1, ..Default::default() };
        let set = imagine(&b, 1, None, &cfg, &gw).unwrap();
        assert_eq!(set.continuations.len(), 1);
        assert!(set.is_complete());
    }

    #[test]
    fn refusal_resamples_once_then_records_gap() {
        let b = book(1);
        let gw = Gateway::new(Recorder::new(&["n=2"]));
        let set = imagine(&b, 1, None, &ImagineConfig::default(), &gw).unwrap();
        assert!(set.is_complete());

        let gw = Gateway::new(Recorder::new(&["n=2", "n=2:resample=1"]));
        let set = imagine(&b, 1, None, &ImagineConfig::default(), &gw).unwrap();
        assert!(!set.is_complete());
        assert_eq!(set.continuations.len(), 9);
        assert_eq!(set.failures.len(), 1);
        assert_eq!(set.failures[0].n, 2);
        assert!(!set.failures[0].transport);
    }

    #[test]
    fn run_book_contract() {
        let b = book(3);
        let rec = Recorder::new(&[]);
        let gw = Gateway::new(rec.clone());
        let out = run_book(&b, &ImagineConfig::default(), &gw);
        assert_eq!(out.chapters.len(), 3);
        assert_eq!(out.summarizer_calls, 2);
        assert_eq!(rec.summaries.load(Ordering::SeqCst), 2);
        assert!(out.chapters[0].summary.is_none());
        assert_eq!(out.chapters[1].summary.as_ref().unwrap().upto_position, 1);
        assert_eq!(out.chapters[2].summary.as_ref().unwrap().upto_position, 2);
        assert_eq!(out.complete_sets().count(), 3);

        // Same inputs, same outputs.
        let again = run_book(&b, &ImagineConfig::default(), &Gateway::new(Recorder::new(&[])));
        assert_eq!(again.chapters, out.chapters);
    }

    #[test]
    fn long_chapter_is_truncated_with_warning() {
        let mut b = book(1);
        b.chapters[0].text = vec!["word"; 500].join(" ");
        let gw = Gateway::new(Recorder::new(&[]));
        let cfg = ImagineConfig { max_prompt_words: 200, n_continuations: 1, ..Default::default() };
        let set = imagine(&b, 1, None, &cfg, &gw).unwrap();
        assert_eq!(set.warnings.len(), 1);
    }
}
