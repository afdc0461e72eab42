use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::FeatureError;
use crate::text::window_words;

/// Word vectors of a fixed dimension, read from the usual text layout
/// `word v1 v2 ... vd` (an optional `count dim` header line is skipped).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_entries<I, S>(entries: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self {
            dim: 0,
            index: HashMap::new(),
            data: Vec::new(),
        };
        for (w, v) in entries {
            table.insert(w.into(), v)?;
        }
        table.check()?;
        Ok(table)
    }

    fn insert(&mut self, word: String, v: Vec<f64>) -> Result<(), FeatureError> {
        if self.dim == 0 {
            self.dim = v.len();
        }
        if v.len() != self.dim {
            return Err(FeatureError::Resource(format!(
                "embedding for {word:?} has {} dims, expected {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(FeatureError::Resource(format!("embedding for {word:?} is not finite")));
        }
        // First occurrence wins, as in most pretrained files.
        if !self.index.contains_key(&word) {
            self.index.insert(word, self.data.len() / self.dim);
            self.data.extend(v);
        }
        Ok(())
    }

    fn check(&self) -> Result<(), FeatureError> {
        if self.index.is_empty() {
            return Err(FeatureError::Resource("embedding table is empty".into()));
        }
        if self.dim < 2 {
            return Err(FeatureError::Resource("embedding dimension must be at least 2".into()));
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, FeatureError> {
        let mut table = Self {
            dim: 0,
            index: HashMap::new(),
            data: Vec::new(),
        };
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| FeatureError::Resource(format!("embeddings line {}: {e}", i + 1)))?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
            let v = rest
                .iter()
                .map(|x| x.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| FeatureError::Resource(format!("embeddings line {}: {e}", i + 1)))?;
            table.insert(word.to_lowercase(), v)?;
        }
        table.check()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let f = std::fs::File::open(path).map_err(|e| FeatureError::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }
}

/// One point per non-overlapping `window_size`-word window: the mean vector of
/// the window's in-vocabulary words. Windows without any such word are
/// dropped. The trailing partial window counts like any other.
pub fn embed_windows(text: &str, table: &EmbeddingTable, window_size: usize) -> Vec<Vec<f64>> {
    assert!(window_size >= 1, "window_size must be positive");
    let words = window_words(text);
    let mut points = Vec::new();
    for window in words.chunks(window_size) {
        let mut acc = vec![0.0; table.dim()];
        let mut n = 0usize;
        for w in window {
            if let Some(v) = table.get(w) {
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                n += 1;
            }
        }
        if n > 0 {
            acc.iter_mut().for_each(|a| *a /= n as f64);
            points.push(acc);
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_reader("3 2\ncat 1.0 0.0\ndog 0.0 1.0\nCat 9 9\n".as_bytes()).unwrap()
    }

    #[test]
    fn loads_with_header_and_keeps_first_duplicate() {
        let t = table();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("cat"), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn rejects_ragged_and_tiny_tables() {
        assert!(EmbeddingTable::from_reader("a 1 2\nb 1\n".as_bytes()).is_err());
        assert!(EmbeddingTable::from_reader("a 1\n".as_bytes()).is_err());
        assert!(EmbeddingTable::from_reader("".as_bytes()).is_err());
    }

    #[test]
    fn window_counts_and_means() {
        let t = table();
        let text = vec!["cat"; 200].join(" ");
        let pts = embed_windows(&text, &t, 100);
        assert_eq!(pts, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let pts = embed_windows("cat, dog! zebra", &t, 3);
        assert_eq!(pts, vec![vec![0.5, 0.5]]);
        assert!(embed_windows("zebra yak", &t, 1).is_empty());
        // Dropped windows do not leave gaps.
        assert_eq!(embed_windows("cat yak dog", &t, 1).len(), 2);
    }
}
