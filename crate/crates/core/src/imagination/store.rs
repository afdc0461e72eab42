//! On-disk layout: `<root>/<book_id>/<chapter_index>/summary.txt`,
//! `<root>/<book_id>/<chapter_index>/n<k>.txt` and `<root>/<book_id>/manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BookImagination, ChapterImagination, ImaginationError, ImaginationSet, RunningSummary, SampleFailure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapterManifest {
    pub chapter_index: u32,
    pub position: usize,
    pub n_requested: usize,
    /// Sample numbers with a stored `n<k>.txt`.
    pub samples: Vec<usize>,
    pub complete: bool,
    pub summary_upto_chapter: Option<u32>,
    pub failures: Vec<SampleFailure>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookManifest {
    pub book_id: String,
    pub summarizer_calls: usize,
    pub complete: bool,
    pub chapters: Vec<ChapterManifest>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImaginationError + '_ {
    move |source| ImaginationError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sample_numbers(set: &ImaginationSet) -> Vec<usize> {
    if set.failures.iter().any(|f| f.n == 0) {
        return Vec::new();
    }
    (1..=set.n_requested)
        .filter(|n| !set.failures.iter().any(|f| f.n == *n))
        .collect()
}

fn book_dir(root: &Path, book_id: &str) -> PathBuf {
    root.join(book_id)
}

pub fn save_book(root: &Path, book: &BookImagination) -> Result<BookManifest, ImaginationError> {
    let dir = book_dir(root, &book.book_id);
    let mut chapters = Vec::with_capacity(book.chapters.len());
    for ch in &book.chapters {
        let cdir = dir.join(ch.set.chapter_index.to_string());
        fs::create_dir_all(&cdir).map_err(io_err(&cdir))?;
        if let Some(s) = &ch.summary {
            let p = cdir.join("summary.txt");
            fs::write(&p, &s.text).map_err(io_err(&p))?;
        }
        let samples = sample_numbers(&ch.set);
        debug_assert_eq!(samples.len(), ch.set.continuations.len());
        for (n, text) in samples.iter().zip(&ch.set.continuations) {
            let p = cdir.join(format!("n{n}.txt"));
            fs::write(&p, text).map_err(io_err(&p))?;
        }
        chapters.push(ChapterManifest {
            chapter_index: ch.set.chapter_index,
            position: ch.set.position,
            n_requested: ch.set.n_requested,
            samples,
            complete: ch.set.is_complete(),
            summary_upto_chapter: ch.summary.as_ref().map(|s| s.upto_chapter),
            failures: ch.set.failures.clone(),
            warnings: ch.set.warnings.clone(),
        });
    }
    let manifest = BookManifest {
        book_id: book.book_id.clone(),
        summarizer_calls: book.summarizer_calls,
        complete: chapters.iter().all(|c| c.complete),
        chapters,
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let p = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&p, json + "\n").map_err(io_err(&p))?;
    Ok(manifest)
}

/// Load a previously saved book; `Ok(None)` if no manifest exists.
pub fn load_book(root: &Path, book_id: &str) -> Result<Option<BookImagination>, ImaginationError> {
    let dir = book_dir(root, book_id);
    let mpath = dir.join("manifest.json");
    if !mpath.exists() {
        return Ok(None);
    }
    let raw = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest: BookManifest = serde_json::from_str(&raw).map_err(|e| ImaginationError::Store {
        path: mpath.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut chapters = Vec::with_capacity(manifest.chapters.len());
    for cm in &manifest.chapters {
        let cdir = dir.join(cm.chapter_index.to_string());
        let summary = match cm.summary_upto_chapter {
            Some(upto) => {
                let p = cdir.join("summary.txt");
                Some(RunningSummary {
                    book_id: book_id.to_string(),
                    upto_position: cm.position - 1,
                    upto_chapter: upto,
                    text: fs::read_to_string(&p).map_err(io_err(&p))?,
                })
            }
            None => None,
        };
        let mut continuations = Vec::with_capacity(cm.samples.len());
        for n in &cm.samples {
            let p = cdir.join(format!("n{n}.txt"));
            continuations.push(fs::read_to_string(&p).map_err(io_err(&p))?);
        }
        chapters.push(ChapterImagination {
            summary,
            set: ImaginationSet {
                book_id: book_id.to_string(),
                chapter_index: cm.chapter_index,
                position: cm.position,
                n_requested: cm.n_requested,
                continuations,
                failures: cm.failures.clone(),
                warnings: cm.warnings.clone(),
            },
        });
    }
    Ok(Some(BookImagination {
        book_id: book_id.to_string(),
        chapters,
        summarizer_calls: manifest.summarizer_calls,
    }))
}
