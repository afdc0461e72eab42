//! Seed-guided LDA fitted by collapsed Gibbs sampling.
//!
//! Seed words get `seed_boost` times the base topic-word prior in their own
//! topic, and their tokens start out assigned to that topic. New texts are
//! folded in against the fitted topic-word distributions.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::text::{fnv1a, word_tokens};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeSeed {
    pub name: String,
    pub words: Vec<String>,
}

/// Load seeds from a JSON object mapping theme name to a word list. Key order
/// in the file is the theme order.
pub fn load_seeds(path: &Path) -> Result<Vec<ThemeSeed>, FeatureError> {
    let raw = std::fs::read_to_string(path).map_err(|e| FeatureError::io(path, e))?;
    parse_seeds(&raw)
}

pub fn parse_seeds(json: &str) -> Result<Vec<ThemeSeed>, FeatureError> {
    let map: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(json).map_err(|e| FeatureError::Resource(format!("seed file: {e}")))?;
    let mut out = Vec::with_capacity(map.len());
    for (name, words) in map {
        let words: Vec<String> = serde_json::from_value(words)
            .map_err(|e| FeatureError::Resource(format!("seed list for {name}: {e}")))?;
        out.push(ThemeSeed {
            name,
            words: words.iter().map(|w| w.trim().to_lowercase()).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThemeConfig {
    pub k: usize,
    /// Document-topic prior; `None` means 50 / K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed_boost: f64,
    pub iterations: usize,
    pub infer_iterations: usize,
    pub min_df: usize,
    pub seed: u64,
    pub stop_words: Vec<String>,
}

impl Default for ThemeConfig {
    fn default() -> Self {
        Self {
            k: 25,
            alpha: None,
            beta: 0.01,
            seed_boost: 10.0,
            iterations: 1000,
            infer_iterations: 200,
            min_df: 2,
            seed: 0,
            stop_words: crate::vocab::STOP_WORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ThemeConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ThemeModelData {
    names: Vec<String>,
    seeds: Vec<Vec<String>>,
    alpha: f64,
    beta: f64,
    seed_boost: f64,
    infer_iterations: usize,
    seed: u64,
    stop_words: Vec<String>,
    vocab: Vec<String>,
    /// K rows of V probabilities.
    phi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThemeModelData", into = "ThemeModelData")]
pub struct ThemeModel {
    data: ThemeModelData,
    index: HashMap<String, usize>,
    stop: HashSet<String>,
    /// Seed topic of each vocabulary word, if any.
    seed_topic: Vec<Option<usize>>,
}

impl TryFrom<ThemeModelData> for ThemeModel {
    type Error = String;

    fn try_from(data: ThemeModelData) -> Result<Self, String> {
        let k = data.names.len();
        if k == 0 || data.phi.len() != k || data.seeds.len() != k {
            return Err("topic count mismatch".into());
        }
        if data.phi.iter().any(|row| row.len() != data.vocab.len()) {
            return Err("topic-word rows do not match vocabulary".into());
        }
        let index: HashMap<String, usize> =
            data.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let seed_topic = seed_topics(&data.vocab, &data.seeds);
        let stop = data.stop_words.iter().cloned().collect();
        Ok(Self { data, index, stop, seed_topic })
    }
}

impl From<ThemeModel> for ThemeModelData {
    fn from(m: ThemeModel) -> Self {
        m.data
    }
}

fn seed_topics(vocab: &[String], seeds: &[Vec<String>]) -> Vec<Option<usize>> {
    let mut first: HashMap<&str, usize> = HashMap::new();
    for (k, words) in seeds.iter().enumerate() {
        for w in words {
            first.entry(w.as_str()).or_insert(k);
        }
    }
    vocab.iter().map(|w| first.get(w.as_str()).copied()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThemeInference {
    pub proportions: Vec<f64>,
    /// False when the text had no in-vocabulary tokens and the uniform
    /// fallback was returned.
    pub in_vocabulary: bool,
}

/// Index of the largest draw in `weights` scaled by a uniform variate.
fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

impl ThemeModel {
    pub fn k(&self) -> usize {
        self.data.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.data.names
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.data.vocab
    }

    pub fn alpha(&self) -> f64 {
        self.data.alpha
    }

    pub fn topic_word(&self, k: usize) -> &[f64] {
        &self.data.phi[k]
    }

    fn doc_ids(&self, text: &str) -> Vec<usize> {
        word_tokens(text)
            .into_iter()
            .filter(|t| !self.stop.contains(t))
            .filter_map(|t| self.index.get(&t).copied())
            .collect()
    }

    /// Fit on `texts`. Deterministic for a fixed `config.seed`.
    pub fn fit(texts: &[&str], seeds: &[ThemeSeed], config: &ThemeConfig) -> Result<Self, FeatureError> {
        let k = config.k;
        if seeds.len() != k {
            return Err(FeatureError::Resource(format!("expected {k} seed sets, got {}", seeds.len())));
        }
        if texts.iter().all(|t| t.trim().is_empty()) {
            return Err(FeatureError::Theme("no nonempty texts to fit".into()));
        }
        if !(config.beta > 0.0 && config.alpha() > 0.0 && config.seed_boost >= 1.0) {
            return Err(FeatureError::Theme("priors must be positive and seed_boost >= 1".into()));
        }
        let stop: HashSet<String> = config.stop_words.iter().cloned().collect();
        let seed_words: HashSet<&str> = seeds.iter().flat_map(|s| s.words.iter().map(String::as_str)).collect();

        let tokenized: Vec<Vec<String>> = texts
            .iter()
            .map(|t| word_tokens(t).into_iter().filter(|w| !stop.contains(w)).collect())
            .collect();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in &tokenized {
            let uniq: HashSet<&str> = doc.iter().map(String::as_str).collect();
            for w in uniq {
                *df.entry(w).or_default() += 1;
            }
        }
        let mut vocab: Vec<String> = df
            .iter()
            .filter(|(w, n)| **n >= config.min_df || seed_words.contains(*w))
            .map(|(w, _)| w.to_string())
            .collect();
        vocab.sort();
        if vocab.is_empty() {
            return Err(FeatureError::Theme("vocabulary is empty after stop-word removal".into()));
        }
        let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let seed_lists: Vec<Vec<String>> = seeds.iter().map(|s| s.words.clone()).collect();
        let seed_topic = seed_topics(&vocab, &seed_lists);
        let v = vocab.len();

        let alpha = config.alpha();
        // Topic-word prior and its per-topic sum.
        let mut prior = vec![vec![config.beta; v]; k];
        for (t, s) in seeds.iter().enumerate() {
            for word in &s.words {
                if let Some(&w) = index.get(word.as_str()) {
                    prior[t][w] = config.beta * config.seed_boost;
                }
            }
        }
        let prior_sum: Vec<f64> = prior.iter().map(|r| r.iter().sum()).collect();

        let docs: Vec<Vec<usize>> = tokenized
            .iter()
            .map(|d| d.iter().filter_map(|w| index.get(w.as_str()).copied()).collect())
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut n_dk = vec![vec![0u32; k]; docs.len()];
        let mut n_kw = vec![vec![0u32; v]; k];
        let mut n_k = vec![0u32; k];
        let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let zd: Vec<usize> = doc
                .iter()
                .map(|&w| seed_topic[w].unwrap_or_else(|| rng.gen_range(0..k)))
                .collect();
            for (&w, &t) in doc.iter().zip(&zd) {
                n_dk[d][t] += 1;
                n_kw[t][w] += 1;
                n_k[t] += 1;
            }
            z.push(zd);
        }

        let mut p = vec![0.0; k];
        for _ in 0..config.iterations {
            for (d, doc) in docs.iter().enumerate() {
                for (i, &w) in doc.iter().enumerate() {
                    let old = z[d][i];
                    n_dk[d][old] -= 1;
                    n_kw[old][w] -= 1;
                    n_k[old] -= 1;
                    for t in 0..k {
                        p[t] = (f64::from(n_dk[d][t]) + alpha) * (f64::from(n_kw[t][w]) + prior[t][w])
                            / (f64::from(n_k[t]) + prior_sum[t]);
                    }
                    let new = draw(&mut rng, &p);
                    z[d][i] = new;
                    n_dk[d][new] += 1;
                    n_kw[new][w] += 1;
                    n_k[new] += 1;
                }
            }
        }

        let phi: Vec<Vec<f64>> = (0..k)
            .map(|t| {
                let denom = f64::from(n_k[t]) + prior_sum[t];
                (0..v).map(|w| (f64::from(n_kw[t][w]) + prior[t][w]) / denom).collect()
            })
            .collect();

        let data = ThemeModelData {
            names: seeds.iter().map(|s| s.name.clone()).collect(),
            seeds: seed_lists,
            alpha,
            beta: config.beta,
            seed_boost: config.seed_boost,
            infer_iterations: config.infer_iterations,
            seed: config.seed,
            stop_words: config.stop_words.clone(),
            vocab,
            phi,
        };
        Ok(ThemeModel::try_from(data).expect("fitted model is consistent"))
    }

    /// Topic proportions of `text` by fold-in Gibbs sampling with the
    /// topic-word distributions held fixed. The sampler seed is derived from
    /// the text, so equal texts always get equal proportions.
    pub fn infer(&self, text: &str) -> ThemeInference {
        let k = self.k();
        let doc = self.doc_ids(text);
        if doc.is_empty() {
            return ThemeInference {
                proportions: vec![1.0 / k as f64; k],
                in_vocabulary: false,
            };
        }
        let alpha = self.data.alpha;
        let mut rng = ChaCha8Rng::seed_from_u64(self.data.seed ^ fnv1a(text.as_bytes()));
        let mut z: Vec<usize> = doc
            .iter()
            .map(|&w| self.seed_topic[w].unwrap_or_else(|| rng.gen_range(0..k)))
            .collect();
        let mut n_dk = vec![0u32; k];
        for &t in &z {
            n_dk[t] += 1;
        }
        let mut p = vec![0.0; k];
        for _ in 0..self.data.infer_iterations {
            for (i, &w) in doc.iter().enumerate() {
                n_dk[z[i]] -= 1;
                for t in 0..k {
                    p[t] = (f64::from(n_dk[t]) + alpha) * self.data.phi[t][w];
                }
                z[i] = draw(&mut rng, &p);
                n_dk[z[i]] += 1;
            }
        }
        let denom = doc.len() as f64 + k as f64 * alpha;
        let mut proportions: Vec<f64> = n_dk.iter().map(|&n| (f64::from(n) + alpha) / denom).collect();
        // Renormalize so rounding never pushes the sum off 1.
        let s: f64 = proportions.iter().sum();
        proportions.iter_mut().for_each(|x| *x /= s);
        ThemeInference {
            proportions,
            in_vocabulary: true,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        let json = serde_json::to_string(self).expect("model serializes");
        std::fs::write(path, json).map_err(|e| FeatureError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let raw = std::fs::read_to_string(path).map_err(|e| FeatureError::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| FeatureError::Resource(format!("theme model: {e}")))
    }
}
