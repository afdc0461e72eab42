//! Fixed-order 30-dimensional content features of a text.
//!
//! | index  | feature                          |
//! |--------|----------------------------------|
//! | 0      | valence, in [-1, 1]              |
//! | 1      | arousal, in [-1, 1]              |
//! | 2..27  | 25 theme proportions (simplex)   |
//! | 27     | path speed                       |
//! | 28     | path volume                      |
//! | 29     | log path circuitousness          |

pub mod embedding;
pub mod emotion;
pub mod mvee;
pub mod path;
pub mod themes;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use embedding::{embed_windows, EmbeddingTable};
pub use emotion::{EmotionScore, EmotionScorer, LexiconScorer, RemoteScorer};
pub use themes::{load_seeds, parse_seeds, ThemeConfig, ThemeInference, ThemeModel, ThemeSeed};

pub const N_THEMES: usize = 25;
pub const N_DIMS: usize = 2 + N_THEMES + 3;
pub const VALENCE: usize = 0;
pub const AROUSAL: usize = 1;
pub const THEME_START: usize = 2;
pub const SPEED: usize = THEME_START + N_THEMES;
pub const VOLUME: usize = SPEED + 1;
pub const LOG_CIRCUITOUSNESS: usize = SPEED + 2;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad resource: {0}")]
    Resource(String),
    #[error("theme model: {0}")]
    Theme(String),
    #[error("path metrics need at least 2 windows, got {0}")]
    PathUndefined(usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("remote scorer: {0}")]
    Remote(String),
}

impl FeatureError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FeatureError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Emotion,
    Themes,
    Path,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Emotion, Family::Themes, Family::Path];

    pub fn dims(self) -> std::ops::Range<usize> {
        match self {
            Family::Emotion => VALENCE..THEME_START,
            Family::Themes => THEME_START..SPEED,
            Family::Path => SPEED..N_DIMS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Emotion => "emotion",
            Family::Themes => "themes",
            Family::Path => "path",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Dimension names in vector order, given the theme names.
pub fn feature_names(theme_names: &[String]) -> Vec<String> {
    assert_eq!(theme_names.len(), N_THEMES, "exactly {N_THEMES} themes");
    let mut out = vec!["Valence".to_string(), "Arousal".to_string()];
    out.extend(theme_names.iter().map(|n| capitalize(n)));
    out.extend(["Speed", "Volume", "Circuitousness"].map(String::from));
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureFlags {
    /// No token could be scored; valence and arousal are 0.
    pub emotion_unscored: bool,
    /// No in-vocabulary token; themes are uniform.
    pub themes_fallback: bool,
    /// Shortest path came from the heuristic solver.
    pub path_heuristic: bool,
    pub circuitousness_clamped: bool,
    pub volume_degenerate: bool,
    pub windows: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// `N_DIMS` values; entries for absent dims are NaN.
    pub values: Vec<f64>,
    pub present: Vec<bool>,
    pub flags: FeatureFlags,
}

impl FeatureVector {
    pub fn get(&self, dim: usize) -> Option<f64> {
        self.present[dim].then_some(self.values[dim])
    }

    pub fn themes(&self) -> &[f64] {
        &self.values[Family::Themes.dims()]
    }

    pub fn family_present(&self, f: Family) -> bool {
        f.dims().all(|d| self.present[d])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathConfig {
    pub window_size: usize,
    pub mvee_tolerance: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            window_size: 100,
            mvee_tolerance: 1e-4,
        }
    }
}

#[derive(Clone)]
pub struct Extractor {
    pub emotion: Arc<dyn EmotionScorer>,
    pub themes: Arc<ThemeModel>,
    pub embeddings: Arc<EmbeddingTable>,
    pub path: PathConfig,
}

impl Extractor {
    pub fn new(
        emotion: Arc<dyn EmotionScorer>,
        themes: Arc<ThemeModel>,
        embeddings: Arc<EmbeddingTable>,
        path: PathConfig,
    ) -> Result<Self, FeatureError> {
        if themes.k() != N_THEMES {
            return Err(FeatureError::Theme(format!("model has {} topics, need {N_THEMES}", themes.k())));
        }
        if path.window_size == 0 || !(path.mvee_tolerance > 0.0) {
            return Err(FeatureError::Resource("window_size and mvee_tolerance must be positive".into()));
        }
        Ok(Self { emotion, themes, embeddings, path })
    }

    pub fn names(&self) -> Vec<String> {
        feature_names(self.themes.names())
    }

    /// Full feature vector. Component failures leave the affected dims absent
    /// and are noted in the flags rather than failing the text.
    pub fn extract(&self, text: &str) -> FeatureVector {
        let mut values = vec![f64::NAN; N_DIMS];
        let mut present = vec![false; N_DIMS];
        let mut flags = FeatureFlags::default();

        match self.emotion.score(text) {
            Ok(s) => {
                values[VALENCE] = s.valence;
                values[AROUSAL] = s.arousal;
                present[VALENCE] = true;
                present[AROUSAL] = true;
                flags.emotion_unscored = !s.scored;
            }
            Err(e) => flags.notes.push(format!("emotion: {e}")),
        }

        let th = self.themes.infer(text);
        values[Family::Themes.dims()].copy_from_slice(&th.proportions);
        present[Family::Themes.dims()].iter_mut().for_each(|p| *p = true);
        flags.themes_fallback = !th.in_vocabulary;

        let points = embed_windows(text, &self.embeddings, self.path.window_size);
        flags.windows = points.len();
        if points.len() >= 2 {
            let sp = path::speed(&points).expect("two points");
            let c = path::circuitousness(&points).expect("two points");
            values[SPEED] = sp;
            values[LOG_CIRCUITOUSNESS] = c.ratio.ln();
            present[SPEED] = true;
            present[LOG_CIRCUITOUSNESS] = true;
            flags.path_heuristic = !c.exact;
            flags.circuitousness_clamped = c.clamped;
            match path::path_volume(&points, self.path.mvee_tolerance) {
                Ok(v) => {
                    values[VOLUME] = v.volume;
                    present[VOLUME] = true;
                    flags.volume_degenerate = v.degenerate;
                }
                Err(e) => flags.notes.push(format!("volume: {e}")),
            }
        } else {
            flags.notes.push(FeatureError::PathUndefined(points.len()).to_string());
        }
        FeatureVector { values, present, flags }
    }

    pub fn extract_all(&self, texts: &[String], workers: usize) -> Vec<FeatureVector> {
        crate::util::parallel_map(texts, workers, |t| self.extract(t))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::vocab;

    pub(crate) fn toy_extractor() -> Extractor {
        let lex = LexiconScorer::new(
            vocab::EMOTION_WORDS.iter().map(|(w, v, a)| (w.to_string(), (*v, *a))).collect(),
        )
        .unwrap();
        let seeds: Vec<ThemeSeed> = vocab::THEMES
            .iter()
            .map(|(n, w)| ThemeSeed {
                name: n.to_string(),
                words: w.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        let docs: Vec<String> = vocab::THEMES.iter().map(|(_, w)| w.join(" ")).collect();
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        let cfg = ThemeConfig { iterations: 20, infer_iterations: 20, ..Default::default() };
        let model = ThemeModel::fit(&refs, &seeds, &cfg).unwrap();
        let emb = EmbeddingTable::from_entries(
            vocab::all_theme_words()
                .chain(vocab::EMOTION_WORDS.iter().map(|e| e.0))
                .enumerate()
                .map(|(i, w)| (w, vec![(i % 7) as f64, (i % 5) as f64, (i % 3) as f64])),
        )
        .unwrap();
        Extractor::new(Arc::new(lex), Arc::new(model), Arc::new(emb), PathConfig { window_size: 10, ..Default::default() })
            .unwrap()
    }

    #[test]
    fn layout_constants() {
        assert_eq!(N_DIMS, 30);
        assert_eq!((SPEED, VOLUME, LOG_CIRCUITOUSNESS), (27, 28, 29));
        assert_eq!(Family::Themes.dims().len(), 25);
        let names = toy_extractor().names();
        assert_eq!(names.len(), 30);
        assert_eq!(names[2], "Growth");
        assert_eq!(names[29], "Circuitousness");
    }

    #[test]
    fn full_and_short_texts() {
        let ex = toy_extractor();
        let long: String = vocab::all_theme_words().cycle().take(80).collect::<Vec<_>>().join(" ") + " joyful";
        let v = ex.extract(&long);
        assert!(v.present.iter().all(|p| *p));
        assert!((v.themes().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(v.values[LOG_CIRCUITOUSNESS] >= 0.0);
        assert_eq!(ex.extract(&long), v);

        let short = ex.extract("joyful courage brave");
        assert!(short.family_present(Family::Emotion));
        assert!(short.family_present(Family::Themes));
        assert!(!short.present[SPEED] && !short.present[VOLUME] && !short.present[LOG_CIRCUITOUSNESS]);
        assert!(short.get(SPEED).is_none());
    }

    #[test]
    fn empty_text_flags() {
        let v = toy_extractor().extract("");
        assert_eq!(v.get(VALENCE), Some(0.0));
        assert!(v.flags.emotion_unscored);
        assert!(v.flags.themes_fallback);
        assert!(v.themes().iter().all(|t| *t == 0.04));
    }
}
