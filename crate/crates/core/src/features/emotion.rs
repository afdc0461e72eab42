use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::text::word_tokens;

/// Valence and arousal on the [-1, 1] scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionScore {
    pub valence: f64,
    pub arousal: f64,
    /// False when nothing in the text could be scored; the values are then 0.
    pub scored: bool,
}

impl EmotionScore {
    pub const UNSCORED: EmotionScore = EmotionScore {
        valence: 0.0,
        arousal: 0.0,
        scored: false,
    };
}

fn rescale(v: f64) -> f64 {
    2.0 * (v - 0.5)
}

pub trait EmotionScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<EmotionScore, FeatureError>;
}

/// Word-level valence/arousal norms, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconScorer {
    entries: HashMap<String, (f64, f64)>,
}

#[derive(Deserialize)]
struct LexiconRow {
    word: String,
    valence: f64,
    arousal: f64,
}

impl LexiconScorer {
    pub fn new(entries: HashMap<String, (f64, f64)>) -> Result<Self, FeatureError> {
        if entries.is_empty() {
            return Err(FeatureError::Resource("emotion lexicon is empty".into()));
        }
        for (w, (v, a)) in &entries {
            if !(v.is_finite() && a.is_finite() && (0.0..=1.0).contains(v) && (0.0..=1.0).contains(a)) {
                return Err(FeatureError::Resource(format!(
                    "lexicon entry {w:?} has values outside [0, 1]: ({v}, {a})"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// CSV with header `word,valence,arousal`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut entries = HashMap::new();
        for row in rdr.deserialize::<LexiconRow>() {
            let row = row.map_err(|e| FeatureError::Resource(format!("lexicon: {e}")))?;
            entries.insert(row.word.trim().to_lowercase(), (row.valence, row.arousal));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let f = std::fs::File::open(path).map_err(|e| FeatureError::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<(f64, f64)> {
        self.entries.get(word).copied()
    }
}

impl EmotionScorer for LexiconScorer {
    fn score(&self, text: &str) -> Result<EmotionScore, FeatureError> {
        let mut sv = 0.0;
        let mut sa = 0.0;
        let mut n = 0usize;
        for tok in word_tokens(text) {
            if let Some((v, a)) = self.entries.get(&tok) {
                sv += v;
                sa += a;
                n += 1;
            }
        }
        if n == 0 {
            return Ok(EmotionScore::UNSCORED);
        }
        Ok(EmotionScore {
            valence: rescale(sv / n as f64),
            arousal: rescale(sa / n as f64),
            scored: true,
        })
    }
}

/// Client for an external valence/arousal model. The service receives
/// `{"text": ...}` and answers `{"valence": v, "arousal": a}` with both values
/// in [0, 1]; they are rescaled like lexicon scores.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

#[derive(Deserialize)]
struct RemoteAnswer {
    valence: f64,
    arousal: f64,
}

impl EmotionScorer for RemoteScorer {
    fn score(&self, text: &str) -> Result<EmotionScore, FeatureError> {
        if text.trim().is_empty() {
            return Ok(EmotionScore::UNSCORED);
        }
        let resp = self
            .agent
            .post(&self.endpoint)
            .send_json(serde_json::json!({ "text": text }))
            .map_err(|e| FeatureError::Remote(e.to_string()))?;
        let ans: RemoteAnswer = resp.into_json().map_err(|e| FeatureError::Remote(e.to_string()))?;
        if !(0.0..=1.0).contains(&ans.valence) || !(0.0..=1.0).contains(&ans.arousal) {
            return Err(FeatureError::Remote(format!(
                "scores out of range: ({}, {})",
                ans.valence, ans.arousal
            )));
        }
        Ok(EmotionScore {
            valence: rescale(ans.valence),
            arousal: rescale(ans.arousal),
            scored: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> LexiconScorer {
        LexiconScorer::from_reader("word,valence,arousal\njoy,1.0,0.9\nbleak,0.2,0.3\nbright,0.8,0.5\n".as_bytes())
            .unwrap()
    }

    #[test]
    fn constant_valence_words() {
        let s = lex().score("Joy! joy, JOY.").unwrap();
        assert_eq!(s.valence, 1.0);
        assert!((s.arousal - 0.8).abs() < 1e-12);
        assert!(s.scored);
    }

    #[test]
    fn mixed_pair_rescales_to_zero() {
        // mean(0.2, 0.8) = 0.5 -> 2 * (0.5 - 0.5) = 0
        let s = lex().score("bleak bright").unwrap();
        assert!(s.valence.abs() < 1e-12);
        // mean(0.3, 0.5) = 0.4 -> -0.2
        assert!((s.arousal + 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_or_unmatched_is_flagged_zero() {
        assert_eq!(lex().score("").unwrap(), EmotionScore::UNSCORED);
        assert_eq!(lex().score("table chair").unwrap(), EmotionScore::UNSCORED);
    }

    #[test]
    fn rejects_bad_lexicons() {
        assert!(LexiconScorer::from_reader("word,valence,arousal\n".as_bytes()).is_err());
        assert!(LexiconScorer::from_reader("word,valence,arousal\nx,1.5,0.1\n".as_bytes()).is_err());
        assert!(LexiconScorer::from_reader("word,valence,arousal\nx,NaN,0.1\n".as_bytes()).is_err());
    }

    #[test]
    fn remote_scorer_contract() {
        use std::io::{BufRead, BufReader, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let body = r#"{"valence":0.75,"arousal":0.25}"#;
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
        });
        let s = RemoteScorer::new(format!("http://{addr}/score"), Duration::from_secs(5))
            .score("hello")
            .unwrap();
        assert!((s.valence - 0.5).abs() < 1e-12);
        assert!((s.arousal + 0.5).abs() < 1e-12);
    }
}
