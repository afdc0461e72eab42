//! Pipeline configuration, read from TOML.
//!
//! Relative paths are resolved against the directory of the config file.
//! Secrets never live in the file: the remote provider reads its token from
//! the environment variable named by `api_key_env`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::DesignOptions;
use crate::corpus::CleanConfig;
use crate::features::{PathConfig, ThemeConfig};
use crate::imagination::ImagineConfig;
use crate::llm::RemoteConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Simulated,
    Remote,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulated" => Ok(ProviderKind::Simulated),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(format!("unknown provider {other:?} (expected simulated or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Seed of the simulated provider.
    pub seed: u64,
    /// Per-sample mood drift of the simulated provider.
    pub drift: f64,
    pub max_concurrency: usize,
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    /// Response cache; defaults to `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Default remote endpoint.
    pub remote: Option<RemoteConfig>,
    /// Optional per-task overrides of `remote`.
    pub summarize: Option<RemoteConfig>,
    pub imagine: Option<RemoteConfig>,
    pub classify: Option<RemoteConfig>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Simulated,
            seed: 0,
            drift: 0.25,
            max_concurrency: 4,
            max_attempts: 5,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
            cache_dir: None,
            remote: None,
            summarize: None,
            imagine: None,
            classify: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningSection {
    /// English wordlist, one word per line.
    pub wordlist: PathBuf,
    #[serde(flatten)]
    pub rules: CleanConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesSection {
    /// CSV `word,valence,arousal`.
    pub lexicon: PathBuf,
    /// Text-format word vectors.
    pub embeddings: PathBuf,
    /// JSON object of 25 theme names to seed words.
    pub seeds: PathBuf,
    /// If set, emotion comes from this scoring service instead of the lexicon.
    #[serde(default)]
    pub emotion_endpoint: Option<String>,
    #[serde(default)]
    pub themes: ThemeConfig,
    #[serde(default)]
    pub path: PathConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub imagination: ImagineConfig,
    pub cleaning: CleaningSection,
    pub features: FeaturesSection,
    #[serde(default)]
    pub analysis: DesignOptions,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    4
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for p in [
            &mut cfg.corpus,
            &mut cfg.out_dir,
            &mut cfg.cleaning.wordlist,
            &mut cfg.features.lexicon,
            &mut cfg.features.embeddings,
            &mut cfg.features.seeds,
        ] {
            resolve(base, p);
        }
        if let Some(c) = cfg.provider.cache_dir.as_mut() {
            resolve(base, c);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.provider.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn retry_delays(&self) -> (Duration, Duration) {
        (
            Duration::from_millis(self.provider.base_delay_ms),
            Duration::from_millis(self.provider.max_delay_ms),
        )
    }

    /// Checks that need no provider: ranges, and that input files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.imagination.n_continuations == 0 {
            return bad("imagination.n_continuations must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.imagination.temperature) {
            return bad("imagination.temperature must lie in [0, 2]".into());
        }
        if self.workers == 0 || self.provider.max_concurrency == 0 || self.provider.max_attempts == 0 {
            return bad("workers, max_concurrency and max_attempts must be positive".into());
        }
        if !(self.provider.drift >= 0.0 && self.provider.drift <= 1.0) {
            return bad("provider.drift must lie in [0, 1]".into());
        }
        self.cleaning.rules.validate().map_err(ConfigError::Invalid)?;
        let t = &self.features.themes;
        if t.k != crate::features::N_THEMES {
            return bad(format!("features.themes.k must be {}", crate::features::N_THEMES));
        }
        if !(t.beta > 0.0 && t.alpha() > 0.0 && t.seed_boost >= 1.0) || t.iterations == 0 || t.infer_iterations == 0 {
            return bad("features.themes: priors must be positive, seed_boost >= 1, iterations >= 1".into());
        }
        if self.features.path.window_size == 0 || !(self.features.path.mvee_tolerance > 0.0) {
            return bad("features.path: window_size and mvee_tolerance must be positive".into());
        }
        if !(self.analysis.epsilon > 0.0 && self.analysis.epsilon < 1.0) {
            return bad("analysis.epsilon must lie in (0, 1)".into());
        }
        if self.provider.kind == ProviderKind::Remote && self.provider.remote.is_none() {
            for (task, r) in [
                ("summarize", &self.provider.summarize),
                ("imagine", &self.provider.imagine),
                ("classify", &self.provider.classify),
            ] {
                if r.is_none() {
                    return bad(format!("remote provider needs [provider.remote] or [provider.{task}]"));
                }
            }
        }
        for (name, p) in [
            ("corpus", &self.corpus),
            ("cleaning.wordlist", &self.cleaning.wordlist),
            ("features.lexicon", &self.features.lexicon),
            ("features.embeddings", &self.features.embeddings),
            ("features.seeds", &self.features.seeds),
        ] {
            if !p.is_file() {
                return bad(format!("{name}: {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the settings that shape
    /// results. Output location and worker counts are left out.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.workers = 0;
        c.provider.cache_dir = None;
        c.provider.max_concurrency = 0;
        c.imagination.workers = 0;
        c.cleaning.rules.workers = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
corpus = "c.jsonl"
[cleaning]
wordlist = "w.txt"
min_words = 300
[features]
lexicon = "l.csv"
embeddings = "e.txt"
seeds = "s.json"
[features.themes]
iterations = 50
"#;

    #[test]
    fn parses_with_defaults_and_resolves_paths() {
        let c = PipelineConfig::from_toml(MIN, Path::new("/data")).unwrap();
        assert_eq!(c.corpus, PathBuf::from("/data/c.jsonl"));
        assert_eq!(c.out_dir, PathBuf::from("/data/out"));
        assert_eq!(c.cache_dir(), PathBuf::from("/data/out/cache"));
        assert_eq!(c.cleaning.rules.min_words, 300);
        assert_eq!(c.cleaning.rules.max_words, 10_000);
        assert_eq!(c.features.themes.iterations, 50);
        assert_eq!(c.features.themes.infer_iterations, 200);
        assert_eq!(c.imagination.n_continuations, 10);
        assert_eq!(c.provider.kind, ProviderKind::Simulated);
    }

    #[test]
    fn zero_continuations_is_invalid() {
        let mut c = PipelineConfig::from_toml(MIN, Path::new("/nonexistent")).unwrap();
        c.imagination.n_continuations = 0;
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(m)) if m.contains("n_continuations")));
    }

    #[test]
    fn missing_files_are_reported() {
        let c = PipelineConfig::from_toml(MIN, Path::new("/nonexistent")).unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(m)) if m.contains("corpus")));
    }

    #[test]
    fn fingerprint_ignores_location_only() {
        let a = PipelineConfig::from_toml(MIN, Path::new("/x")).unwrap();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("/elsewhere");
        b.workers = 9;
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.imagination.n_continuations = 3;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn unknown_provider_name() {
        assert!("simulated".parse::<ProviderKind>().is_ok());
        assert!("gpt".parse::<ProviderKind>().is_err());
    }
}
