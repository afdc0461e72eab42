//! Stage runner. Every stage reads its inputs from the output directory and
//! writes its artifacts there, so stages can be rerun independently.
//!
//! ```text
//! <out>/clean/corpus.jsonl, report.csv
//! <out>/imagine/<book_id>/...
//! <out>/extract/theme_model.json, actual.jsonl, imagined.jsonl
//! <out>/beliefs/panel.csv, dropped.csv
//! <out>/reports/table2.csv, table3.csv, table5_<family>.csv
//! <out>/manifest.json, provider_stats.json
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{compare_all, report};
use crate::beliefs::{self, belief_panel, ChapterSamples, DroppedChapter, PanelRow};
use crate::config::{ConfigError, PipelineConfig, ProviderKind};
use crate::corpus::{apply_cleaning, rates_from_counts, Corpus, Wordlist};
use crate::features::{
    feature_names, load_seeds, EmbeddingTable, EmotionScorer, Extractor, FeatureFlags, FeatureVector, Family,
    LexiconScorer, RemoteScorer, ThemeModel, N_DIMS,
};
use crate::imagination::{load_book, run_book, save_book, BookImagination};
use crate::llm::{DiskCache, Gateway, GatewayStats, Provider, RemoteProvider, RetryPolicy, SimulatedProvider, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Clean,
    Imagine,
    Extract,
    Beliefs,
    Regress,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Clean, Stage::Imagine, Stage::Extract, Stage::Beliefs, Stage::Regress];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Clean => "clean",
            Stage::Imagine => "imagine",
            Stage::Extract => "extract",
            Stage::Beliefs => "beliefs",
            Stage::Regress => "regress",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} is missing its inputs: {}", .missing.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Prerequisite { stage: Stage, missing: Vec<PathBuf> },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("provider failure in stage {stage}: {message}")]
    Provider { stage: Stage, message: String },
}

impl PipelineError {
    /// Process exit code: 2 configuration, 3 stage, 4 provider.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Prerequisite { .. } | PipelineError::Stage { .. } => 3,
            PipelineError::Provider { .. } => 4,
        }
    }
}

fn stage_err(stage: Stage) -> impl Fn(&dyn fmt::Display) -> PipelineError {
    move |e| PipelineError::Stage { stage, message: e.to_string() }
}

/// Artifact paths under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn clean_corpus(&self) -> PathBuf {
        self.root.join("clean/corpus.jsonl")
    }
    pub fn clean_report(&self) -> PathBuf {
        self.root.join("clean/report.csv")
    }
    pub fn imagine_dir(&self) -> PathBuf {
        self.root.join("imagine")
    }
    pub fn book_manifest(&self, book_id: &str) -> PathBuf {
        self.imagine_dir().join(book_id).join("manifest.json")
    }
    pub fn theme_model(&self) -> PathBuf {
        self.root.join("extract/theme_model.json")
    }
    pub fn actual_features(&self) -> PathBuf {
        self.root.join("extract/actual.jsonl")
    }
    pub fn imagined_features(&self) -> PathBuf {
        self.root.join("extract/imagined.jsonl")
    }
    pub fn panel(&self) -> PathBuf {
        self.root.join("beliefs/panel.csv")
    }
    pub fn dropped(&self) -> PathBuf {
        self.root.join("beliefs/dropped.csv")
    }
    pub fn table2(&self) -> PathBuf {
        self.root.join("reports/table2.csv")
    }
    pub fn table3(&self) -> PathBuf {
        self.root.join("reports/table3.csv")
    }
    pub fn table5(&self, family: Family) -> PathBuf {
        self.root.join(format!("reports/table5_{}.csv", family.name()))
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn provider_stats(&self) -> PathBuf {
        self.root.join("provider_stats.json")
    }

    /// Files a stage produces, in a fixed order.
    pub fn outputs(&self, stage: Stage) -> Vec<PathBuf> {
        match stage {
            Stage::Clean => vec![self.clean_corpus(), self.clean_report()],
            Stage::Imagine => Vec::new(),
            Stage::Extract => vec![self.theme_model(), self.actual_features(), self.imagined_features()],
            Stage::Beliefs => vec![self.panel(), self.dropped()],
            Stage::Regress => {
                let mut v = vec![self.table2(), self.table3()];
                v.extend(Family::ALL.iter().map(|f| self.table5(*f)));
                v
            }
        }
    }
}

/// One feature vector as stored on disk; absent dims are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub book_id: String,
    pub chapter_index: u32,
    /// Sample number for imagined continuations, absent for chapter text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    pub values: Vec<Option<f64>>,
    pub flags: FeatureFlags,
}

impl FeatureRecord {
    fn new(book_id: &str, chapter_index: u32, sample: Option<usize>, v: &FeatureVector) -> Self {
        Self {
            book_id: book_id.to_string(),
            chapter_index,
            sample,
            values: (0..N_DIMS).map(|d| v.get(d)).collect(),
            flags: v.flags.clone(),
        }
    }

    pub fn to_vector(&self) -> FeatureVector {
        FeatureVector {
            values: self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            present: self.values.iter().map(Option::is_some).collect(),
            flags: self.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    /// Data rows: lines for JSON-lines, records for CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

/// Deterministic record of a run: no timestamps, no call counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_fingerprint: String,
    pub stages: Vec<Stage>,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProviderStats {
    pub provider_calls: u64,
    pub cache_hits: u64,
}

impl From<GatewayStats> for ProviderStats {
    fn from(s: GatewayStats) -> Self {
        Self {
            provider_calls: s.provider_calls,
            cache_hits: s.cache_hits,
        }
    }
}

/// Gateway as described by the provider section: simulated or remote, with
/// the disk cache, retry policy and concurrency cap applied.
pub fn build_gateway(config: &PipelineConfig) -> Gateway {
    let p = &config.provider;
    let mut gw = match p.kind {
        ProviderKind::Simulated => {
            let sim: Arc<dyn Provider> = Arc::new(SimulatedProvider::new(p.seed).with_drift(p.drift));
            Gateway::new(sim)
        }
        ProviderKind::Remote => {
            let mut gw = match &p.remote {
                Some(r) => Gateway::new(Arc::new(RemoteProvider::new(r.clone()))),
                None => Gateway::unrouted(),
            };
            for (task, r) in [(Task::Summarize, &p.summarize), (Task::Imagine, &p.imagine), (Task::Classify, &p.classify)] {
                if let Some(r) = r {
                    gw = gw.route(task, Arc::new(RemoteProvider::new(r.clone())));
                }
            }
            gw
        }
    };
    let (base_delay, max_delay) = config.retry_delays();
    gw = gw
        .with_cache(DiskCache::new(config.cache_dir()))
        .with_retry(RetryPolicy {
            max_attempts: p.max_attempts,
            base_delay,
            max_delay,
        })
        .with_max_concurrency(p.max_concurrency);
    gw
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub layout: Layout,
    gateway: Gateway,
}

fn write_file(path: &Path, bytes: &[u8], stage: Stage) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| stage_err(stage)(&format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| stage_err(stage)(&format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T], stage: Stage) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).expect("record serializes");
        buf.push(b'\n');
    }
    write_file(path, &buf, stage)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> Result<Vec<T>, PipelineError> {
    let f = std::fs::File::open(path).map_err(|e| stage_err(stage)(&format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| stage_err(stage)(&e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| stage_err(stage)(&format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn count_rows(path: &Path) -> Option<usize> {
    let text = std::fs::read_to_string(path).ok()?;
    match path.extension()?.to_str()? {
        "jsonl" => Some(text.lines().filter(|l| !l.trim().is_empty()).count()),
        "csv" => Some(csv::Reader::from_reader(text.as_bytes()).records().count()),
        _ => None,
    }
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let gateway = build_gateway(&config);
        Ok(Self::with_gateway(config, gateway))
    }

    /// Use a caller-supplied gateway (tests, custom providers).
    pub fn with_gateway(config: PipelineConfig, gateway: Gateway) -> Self {
        let layout = Layout::new(config.out_dir.clone());
        Self { config, layout, gateway }
    }

    pub fn stats(&self) -> ProviderStats {
        self.gateway.stats().into()
    }

    /// Inputs a stage needs that do not exist yet.
    pub fn missing_inputs(&self, stage: Stage) -> Vec<PathBuf> {
        let l = &self.layout;
        let mut need = match stage {
            Stage::Clean => Vec::new(),
            Stage::Imagine => vec![l.clean_corpus()],
            Stage::Extract | Stage::Beliefs => {
                let mut v = vec![l.clean_corpus()];
                if let Ok(c) = Corpus::load(&l.clean_corpus()) {
                    v.extend(c.books.iter().map(|b| l.book_manifest(&b.book_id)));
                }
                if stage == Stage::Beliefs {
                    v.extend(l.outputs(Stage::Extract));
                }
                v
            }
            Stage::Regress => vec![l.panel()],
        };
        need.retain(|p| !p.exists());
        need
    }

    pub fn run_stage(&self, stage: Stage) -> Result<(), PipelineError> {
        let missing = self.missing_inputs(stage);
        if !missing.is_empty() {
            return Err(PipelineError::Prerequisite { stage, missing });
        }
        let result = match stage {
            Stage::Clean => self.clean(),
            Stage::Imagine => self.imagine(),
            Stage::Extract => self.extract(),
            Stage::Beliefs => self.beliefs(),
            Stage::Regress => self.regress(),
        };
        self.write_bookkeeping()?;
        result
    }

    /// All stages in order, stopping at the first failure.
    pub fn run_all(&self) -> Result<RunManifest, PipelineError> {
        for s in Stage::ALL {
            self.run_stage(s)?;
        }
        self.manifest()
    }

    fn clean(&self) -> Result<(), PipelineError> {
        let st = Stage::Clean;
        let corpus = Corpus::load(&self.config.corpus).map_err(|e| stage_err(st)(&e))?;
        let wordlist = Wordlist::load(&self.config.cleaning.wordlist).map_err(|e| stage_err(st)(&e))?;
        let (cleaned, report) = apply_cleaning(&corpus, &self.config.cleaning.rules, &wordlist, Some(&self.gateway))
            .map_err(|e| match e {
                crate::corpus::CorpusError::Classifier { .. } => PipelineError::Provider { stage: st, message: e.to_string() },
                other => stage_err(st)(&other),
            })?;
        let mut buf = Vec::new();
        cleaned.to_jsonl(&mut buf).map_err(|e| stage_err(st)(&e))?;
        write_file(&self.layout.clean_corpus(), &buf, st)?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf).map_err(|e| stage_err(st)(&e))?;
        write_file(&self.layout.clean_report(), &buf, st)?;
        for w in &report.warnings {
            log::warn!("clean: {w}");
        }
        log::info!(
            "clean: {} -> {} books, {} -> {} chapters",
            report.counts.books_before,
            report.counts.books_after,
            report.counts.chapters_before,
            report.counts.chapters_after
        );
        Ok(())
    }

    fn cleaned(&self, st: Stage) -> Result<Corpus, PipelineError> {
        Corpus::load(&self.layout.clean_corpus()).map_err(|e| stage_err(st)(&e))
    }

    /// A stored book is reused when it covers the same chapters with the
    /// configured sample count and has no transport failures to retry.
    fn reusable(&self, stored: &BookImagination, book: &crate::corpus::Book) -> bool {
        stored.chapters.len() == book.chapters.len()
            && stored
                .chapters
                .iter()
                .zip(&book.chapters)
                .all(|(s, c)| s.set.chapter_index == c.chapter_index && s.set.n_requested == self.config.imagination.n_continuations)
            && !stored.has_transport_failures()
    }

    fn imagine(&self) -> Result<(), PipelineError> {
        let st = Stage::Imagine;
        let corpus = self.cleaned(st)?;
        let root = self.layout.imagine_dir();
        let results = crate::util::parallel_map(&corpus.books, self.config.workers, |book| {
            if let Ok(Some(stored)) = load_book(&root, &book.book_id) {
                if self.reusable(&stored, book) {
                    return Ok::<_, PipelineError>(stored);
                }
            }
            let dir = root.join(&book.book_id);
            if dir.exists() {
                std::fs::remove_dir_all(&dir).map_err(|e| stage_err(st)(&format!("{}: {e}", dir.display())))?;
            }
            let imagined = run_book(book, &self.config.imagination, &self.gateway);
            save_book(&root, &imagined).map_err(|e| stage_err(st)(&e))?;
            Ok(imagined)
        });
        let mut transport = Vec::new();
        for r in results {
            let b: BookImagination = r?;
            let incomplete = b.chapters.iter().filter(|c| !c.set.is_complete()).count();
            if incomplete > 0 {
                log::warn!("imagine: {} has {incomplete} incomplete chapters", b.book_id);
            }
            if b.has_transport_failures() {
                transport.push(b.book_id);
            }
        }
        if !transport.is_empty() {
            return Err(PipelineError::Provider {
                stage: st,
                message: format!(
                    "transport failures in books {}; rerun to resume",
                    transport.join(", ")
                ),
            });
        }
        Ok(())
    }

    fn load_imaginations(&self, corpus: &Corpus, st: Stage) -> Result<Vec<BookImagination>, PipelineError> {
        corpus
            .books
            .iter()
            .map(|b| {
                load_book(&self.layout.imagine_dir(), &b.book_id)
                    .map_err(|e| stage_err(st)(&e))?
                    .ok_or_else(|| PipelineError::Prerequisite {
                        stage: st,
                        missing: vec![self.layout.book_manifest(&b.book_id)],
                    })
            })
            .collect()
    }

    /// Extractor over the theme model saved by a completed extract stage.
    pub fn load_extractor(&self) -> Result<Extractor, PipelineError> {
        let st = Stage::Extract;
        let path = self.layout.theme_model();
        if !path.exists() {
            return Err(PipelineError::Prerequisite { stage: st, missing: vec![path] });
        }
        let themes = ThemeModel::load(&path).map_err(|e| stage_err(st)(&e))?;
        self.extractor(themes)
    }

    fn extractor(&self, themes: ThemeModel) -> Result<Extractor, PipelineError> {
        let st = Stage::Extract;
        let f = &self.config.features;
        let emotion: Arc<dyn EmotionScorer> = match &f.emotion_endpoint {
            Some(url) => Arc::new(RemoteScorer::new(url.clone(), Duration::from_secs(60))),
            None => Arc::new(LexiconScorer::load(&f.lexicon).map_err(|e| stage_err(st)(&e))?),
        };
        let embeddings = EmbeddingTable::load(&f.embeddings).map_err(|e| stage_err(st)(&e))?;
        Extractor::new(emotion, Arc::new(themes), Arc::new(embeddings), f.path.clone()).map_err(|e| stage_err(st)(&e))
    }

    fn extract(&self) -> Result<(), PipelineError> {
        let st = Stage::Extract;
        let corpus = self.cleaned(st)?;
        let books = self.load_imaginations(&corpus, st)?;

        let chapter_texts: Vec<(String, u32, String)> = corpus
            .books
            .iter()
            .flat_map(|b| b.chapters.iter().map(|c| (b.book_id.clone(), c.chapter_index, c.text.clone())))
            .collect();
        let sample_texts: Vec<(String, u32, usize, String)> = books
            .iter()
            .flat_map(|b| {
                b.chapters.iter().flat_map(move |c| {
                    c.set
                        .bullet_texts()
                        .into_iter()
                        .enumerate()
                        .map(move |(i, t)| (b.book_id.clone(), c.set.chapter_index, i + 1, t))
                })
            })
            .collect();

        let seeds = load_seeds(&self.config.features.seeds).map_err(|e| stage_err(st)(&e))?;
        let fit_texts: Vec<&str> = chapter_texts
            .iter()
            .map(|t| t.2.as_str())
            .chain(sample_texts.iter().map(|t| t.3.as_str()))
            .collect();
        let model = ThemeModel::fit(&fit_texts, &seeds, &self.config.features.themes).map_err(|e| stage_err(st)(&e))?;
        let mpath = self.layout.theme_model();
        if let Some(dir) = mpath.parent() {
            std::fs::create_dir_all(dir).map_err(|e| stage_err(st)(&format!("{}: {e}", dir.display())))?;
        }
        model.save(&mpath).map_err(|e| stage_err(st)(&e))?;
        let extractor = self.extractor(model)?;

        let workers = self.config.workers;
        let texts: Vec<String> = chapter_texts.iter().map(|t| t.2.clone()).collect();
        let actual: Vec<FeatureRecord> = extractor
            .extract_all(&texts, workers)
            .iter()
            .zip(&chapter_texts)
            .map(|(v, (b, c, _))| FeatureRecord::new(b, *c, None, v))
            .collect();
        let texts: Vec<String> = sample_texts.iter().map(|t| t.3.clone()).collect();
        let imagined: Vec<FeatureRecord> = extractor
            .extract_all(&texts, workers)
            .iter()
            .zip(&sample_texts)
            .map(|(v, (b, c, n, _))| FeatureRecord::new(b, *c, Some(*n), v))
            .collect();
        write_jsonl(&self.layout.actual_features(), &actual, st)?;
        write_jsonl(&self.layout.imagined_features(), &imagined, st)
    }

    fn beliefs(&self) -> Result<(), PipelineError> {
        let st = Stage::Beliefs;
        let corpus = self.cleaned(st)?;
        let books = self.load_imaginations(&corpus, st)?;
        let model = ThemeModel::load(&self.layout.theme_model()).map_err(|e| stage_err(st)(&e))?;
        let names = feature_names(model.names());

        let actual: HashMap<(String, u32), FeatureVector> = read_jsonl::<FeatureRecord>(&self.layout.actual_features(), st)?
            .into_iter()
            .map(|r| ((r.book_id.clone(), r.chapter_index), r.to_vector()))
            .collect();
        let mut imagined: HashMap<(String, u32), Vec<FeatureVector>> = HashMap::new();
        for r in read_jsonl::<FeatureRecord>(&self.layout.imagined_features(), st)? {
            imagined.entry((r.book_id.clone(), r.chapter_index)).or_default().push(r.to_vector());
        }

        let mut rows = Vec::new();
        let mut dropped: Vec<DroppedChapter> = Vec::new();
        for (book, imag) in corpus.books.iter().zip(&books) {
            let complete: HashMap<u32, bool> =
                imag.chapters.iter().map(|c| (c.set.chapter_index, c.set.is_complete())).collect();
            let keys: Vec<(String, u32)> = book.chapters.iter().map(|c| (book.book_id.clone(), c.chapter_index)).collect();
            let inputs: Vec<ChapterSamples<'_>> = book
                .chapters
                .iter()
                .zip(&keys)
                .enumerate()
                .map(|(i, (c, k))| ChapterSamples {
                    chapter_index: c.chapter_index,
                    position: i + 1,
                    samples: complete
                        .get(&c.chapter_index)
                        .copied()
                        .unwrap_or(false)
                        .then(|| imagined.get(k).map(Vec::as_slice))
                        .flatten(),
                })
                .collect();
            let (features, d) = belief_panel(&book.book_id, &inputs).map_err(|e| stage_err(st)(&e))?;
            dropped.extend(d);
            for bf in features {
                let ch = book
                    .chapters
                    .iter()
                    .find(|c| c.chapter_index == bf.chapter_index)
                    .expect("belief rows come from the book's chapters");
                let Some(act) = actual.get(&(book.book_id.clone(), ch.chapter_index)) else {
                    dropped.push(DroppedChapter {
                        book_id: book.book_id.clone(),
                        chapter_index: ch.chapter_index,
                        reason: "no chapter features".into(),
                    });
                    continue;
                };
                let rates = rates_from_counts(ch, ch.next_read_count, || book.chapter_id(ch))
                    .map_err(|e| stage_err(st)(&e))?;
                rows.push(PanelRow {
                    book_id: book.book_id.clone(),
                    chapter_index: ch.chapter_index,
                    position: bf.position,
                    word_count: ch.word_count(),
                    read_count: ch.read_count,
                    continue_rate: rates.continue_rate,
                    comment_rate: rates.comment_rate,
                    vote_rate: rates.vote_rate,
                    n_samples: bf.n_samples,
                    surprise_defined: bf.surprise_defined,
                    actual: (0..N_DIMS).map(|d| act.get(d)).collect(),
                    expectation: bf.expectation,
                    uncertainty: bf.uncertainty,
                    surprise: bf.surprise,
                });
            }
        }

        let mut buf = Vec::new();
        beliefs::write_panel(&mut buf, &names, &rows).map_err(|e| stage_err(st)(&e))?;
        write_file(&self.layout.panel(), &buf, st)?;
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["book_id", "chapter_index", "reason"]).map_err(|e| stage_err(st)(&e))?;
        for d in &dropped {
            wtr.write_record([d.book_id.as_str(), &d.chapter_index.to_string(), &d.reason])
                .map_err(|e| stage_err(st)(&e))?;
        }
        let buf = wtr.into_inner().map_err(|e| stage_err(st)(&e))?;
        write_file(&self.layout.dropped(), &buf, st)?;
        log::info!("beliefs: {} panel rows, {} chapters dropped", rows.len(), dropped.len());
        Ok(())
    }

    fn regress(&self) -> Result<(), PipelineError> {
        let st = Stage::Regress;
        let f = std::fs::File::open(self.layout.panel()).map_err(|e| stage_err(st)(&e))?;
        let (names, rows) = beliefs::read_panel(BufReader::new(f)).map_err(|e| stage_err(st)(&e))?;
        let comparisons = compare_all(&rows, &names, &self.config.analysis, self.config.workers);
        for c in comparisons.iter().filter(|c| c.note.is_some()) {
            log::warn!("regress: {} / {}: {}", c.outcome.name(), c.family.name(), c.note.as_deref().unwrap_or(""));
        }
        let mut buf = Vec::new();
        report::write_table2(&mut buf, &comparisons).map_err(|e| stage_err(st)(&e))?;
        write_file(&self.layout.table2(), &buf, st)?;
        let mut buf = Vec::new();
        report::write_table3(&mut buf, &comparisons).map_err(|e| stage_err(st)(&e))?;
        write_file(&self.layout.table3(), &buf, st)?;
        for fam in Family::ALL {
            let mut buf = Vec::new();
            report::write_table5(&mut buf, fam, &comparisons).map_err(|e| stage_err(st)(&e))?;
            write_file(&self.layout.table5(fam), &buf, st)?;
        }
        Ok(())
    }

    /// Manifest over every stage output present on disk.
    pub fn manifest(&self) -> Result<RunManifest, PipelineError> {
        let mut stages = Vec::new();
        let mut outputs = Vec::new();
        for s in Stage::ALL {
            let files = match s {
                Stage::Imagine => self.imagine_manifests(),
                _ => self.layout.outputs(s),
            };
            if files.is_empty() || !files.iter().all(|p| p.exists()) {
                continue;
            }
            stages.push(s);
            for p in files {
                let sha = sha256_file(&p).map_err(|e| stage_err(s)(&e))?;
                let rel = p.strip_prefix(&self.layout.root).unwrap_or(&p);
                outputs.push(OutputEntry {
                    path: rel.to_string_lossy().replace('\\', "/"),
                    sha256: sha,
                    rows: count_rows(&p),
                });
            }
        }
        Ok(RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_fingerprint: self.config.fingerprint(),
            stages,
            outputs,
        })
    }

    fn imagine_manifests(&self) -> Vec<PathBuf> {
        match Corpus::load(&self.layout.clean_corpus()) {
            Ok(c) => c.books.iter().map(|b| self.layout.book_manifest(&b.book_id)).collect(),
            Err(_) => Vec::new(),
        }
    }

    fn write_bookkeeping(&self) -> Result<(), PipelineError> {
        let st = Stage::Regress;
        let manifest = self.manifest()?;
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        write_file(&self.layout.manifest(), json.as_bytes(), st)?;
        let stats = serde_json::to_string_pretty(&self.stats()).expect("stats serialize") + "\n";
        write_file(&self.layout.provider_stats(), stats.as_bytes(), st)
    }
}

/// Sorted `path -> sha256` of every regular file under `dir`.
pub fn tree_digest(dir: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        let Ok(rd) = std::fs::read_dir(dir) else { return };
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if let Ok(h) = sha256_file(&p) {
                out.insert(p.strip_prefix(root).unwrap_or(&p).to_string_lossy().into_owned(), h);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Write a JSON value followed by a newline.
pub fn write_json<T: Serialize, W: Write>(mut w: W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config(out: &Path) -> PipelineConfig {
        let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
        let mut c = PipelineConfig::load(&data.join("config.toml")).unwrap();
        c.out_dir = out.to_path_buf();
        c
    }

    #[test]
    fn stage_names_roundtrip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("fit".parse::<Stage>().is_err());
    }

    #[test]
    fn later_stage_without_inputs_lists_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::new(toy_config(dir.path())).unwrap();
        let err = p.run_stage(Stage::Regress).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("panel.csv"), "{err}");
        let err = p.run_stage(Stage::Imagine).unwrap_err();
        assert!(err.to_string().contains("corpus.jsonl"), "{err}");
    }

    #[test]
    fn feature_record_keeps_absent_dims() {
        let mut v = FeatureVector {
            values: vec![0.5; N_DIMS],
            present: vec![true; N_DIMS],
            flags: FeatureFlags::default(),
        };
        v.present[3] = false;
        v.values[3] = f64::NAN;
        let r = FeatureRecord::new("b", 2, Some(4), &v);
        let json = serde_json::to_string(&r).unwrap();
        let back: FeatureRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.values[3], None);
        let w = back.to_vector();
        assert_eq!(w.present, v.present);
        assert_eq!(w.get(0), Some(0.5));
    }
}
