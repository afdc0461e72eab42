//! Bundled toy corpus and resources: thirty books of six chapters built from
//! the shared vocabulary, plus the lexicon, embeddings, seed file, English
//! wordlist and a config that runs the whole pipeline offline.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Book, Chapter, Corpus};
use crate::text::fnv1a;
use crate::vocab::{CHARACTERS, EMOTION_WORDS, FILLER, STOP_WORDS, THEMES, VERBS};

pub const BOOKS: usize = 30;
pub const CHAPTERS: usize = 6;
pub const EMBEDDING_DIM: usize = 8;

pub const CONFIG: &str = r#"# Offline run over the bundled toy corpus.
corpus = "corpus.jsonl"
out_dir = "out"
workers = 4

[provider]
kind = "simulated"
seed = 7

[imagination]
n_continuations = 10

[cleaning]
wordlist = "wordlist.txt"

[features]
lexicon = "lexicon.csv"
embeddings = "embeddings.txt"
seeds = "seeds.json"

[features.themes]
iterations = 150
infer_iterations = 50
seed = 1

[features.path]
window_size = 50

[analysis]
epsilon = 0.001
"#;

fn sentence(rng: &mut ChaCha8Rng, themes: &[usize], valence: f64) -> String {
    let name = CHARACTERS.choose(rng).unwrap();
    let other = CHARACTERS.choose(rng).unwrap();
    let t1 = THEMES[*themes.choose(rng).unwrap()].1;
    let t2 = THEMES[*themes.choose(rng).unwrap()].1;
    let weights: Vec<f64> = EMOTION_WORDS.iter().map(|(_, v, _)| (-(v - valence).abs() / 0.1).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut emotion = EMOTION_WORDS[EMOTION_WORDS.len() - 1].0;
    for (e, w) in EMOTION_WORDS.iter().zip(&weights) {
        if u < *w {
            emotion = e.0;
            break;
        }
        u -= w;
    }
    format!(
        "{name} {} the {} {} {} and feels {emotion} {} the {} with {other}.",
        VERBS.choose(rng).unwrap(),
        t1.choose(rng).unwrap(),
        FILLER.choose(rng).unwrap(),
        t2.choose(rng).unwrap(),
        FILLER.choose(rng).unwrap(),
        FILLER[14 + rng.gen_range(0..6)],
    )
}

/// Text of at least `min_words` words, split into paragraphs.
fn chapter_text(rng: &mut ChaCha8Rng, themes: &[usize], valence: f64, min_words: usize) -> String {
    let mut paras: Vec<String> = Vec::new();
    let mut para = String::new();
    let mut words = 0;
    let mut in_para = 0;
    while words < min_words {
        let v = (valence + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0);
        let s = sentence(rng, themes, v);
        words += s.split_whitespace().count();
        if !para.is_empty() {
            para.push(' ');
        }
        para.push_str(&s);
        in_para += 1;
        if in_para == 5 {
            paras.push(std::mem::take(&mut para));
            in_para = 0;
        }
    }
    if !para.is_empty() {
        paras.push(para);
    }
    paras.join("\n\n")
}

pub fn corpus() -> Corpus {
    let mut books = Vec::with_capacity(BOOKS);
    for b in 0..BOOKS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + b as u64);
        let mut themes: Vec<usize> = (0..THEMES.len()).collect();
        themes.shuffle(&mut rng);
        themes.truncate(3);
        let start_mood: f64 = rng.gen_range(0.2..0.8);
        let drift: f64 = rng.gen_range(-0.08..0.08);
        let mut reads: u64 = 1500 + 137 * b as u64;
        let mut chapters = Vec::with_capacity(CHAPTERS);
        for c in 0..CHAPTERS {
            let mood = (start_mood + drift * c as f64).clamp(0.05, 0.95);
            // Evenly spread lengths keep every chapter inside the word-count band.
            let target = 440 + 15 * ((c * 7 + b) % CHAPTERS);
            let theme_word = THEMES[themes[c % 3]].1[0];
            let continue_share: f64 = rng.gen_range(0.82..0.97);
            chapters.push(Chapter {
                chapter_index: c as u32 + 1,
                title: format!("Chapter {}: The {theme_word}", c + 1),
                url: Some(format!("https://stories.example/toy-{b}/chapter-{}", c + 1)),
                created_at: NaiveDate::from_ymd_opt(2023, 1 + (b % 12) as u32, 1 + 3 * c as u32).unwrap(),
                text: chapter_text(&mut rng, &themes, mood, target),
                read_count: reads,
                vote_count: (reads as f64 * (0.04 + 0.06 * mood + rng.gen_range(0.0..0.02))).round() as u64,
                comment_count: (reads as f64 * (0.01 + 0.03 * (1.0 - mood) + rng.gen_range(0.0..0.01))).round() as u64,
                rewritten: None,
                next_read_count: None,
            });
            reads = (reads as f64 * continue_share).round() as u64;
        }
        books.push(Book {
            book_id: format!("toy-{b}"),
            title: format!("Toy Story {}", b + 1),
            description: "A generated story for offline runs.".into(),
            language: "English".into(),
            is_mature: false,
            tags: vec!["drama".into()],
            chapters,
            provenance: None,
        });
    }
    Corpus { books }
}

fn all_words() -> BTreeSet<String> {
    let mut w: BTreeSet<String> = BTreeSet::new();
    w.extend(THEMES.iter().flat_map(|(_, s)| s.iter().map(|x| x.to_string())));
    w.extend(EMOTION_WORDS.iter().map(|e| e.0.to_string()));
    w.extend(CHARACTERS.iter().map(|c| c.to_lowercase()));
    w.extend(VERBS.iter().map(|v| v.to_string()));
    w.extend(FILLER.iter().map(|v| v.to_string()));
    w.extend(STOP_WORDS.iter().map(|v| v.to_string()));
    w.extend(["feels", "chapter"].map(String::from));
    w
}

pub fn wordlist() -> String {
    all_words().into_iter().map(|w| w + "\n").collect()
}

pub fn lexicon() -> String {
    let mut s = String::from("word,valence,arousal\n");
    for (w, v, a) in EMOTION_WORDS {
        writeln!(s, "{w},{v},{a}").unwrap();
    }
    s
}

pub fn seeds() -> String {
    let map: serde_json::Map<String, serde_json::Value> = THEMES
        .iter()
        .map(|(n, w)| (n.to_string(), serde_json::json!(w)))
        .collect();
    serde_json::to_string_pretty(&map).unwrap() + "\n"
}

/// Theme words cluster around a per-theme centre, emotion words around a
/// valence-dependent centre; other words are scattered.
pub fn embeddings() -> String {
    let centre = |tag: &str| -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(fnv1a(tag.as_bytes()));
        (0..EMBEDDING_DIM).map(|_| r.gen_range(-1.0..1.0)).collect()
    };
    let mut s = String::new();
    writeln!(s, "{} {EMBEDDING_DIM}", all_words().len()).unwrap();
    for w in all_words() {
        let base = if let Some((name, _)) = THEMES.iter().find(|(_, ws)| ws.contains(&w.as_str())) {
            centre(name)
        } else if let Some((_, v, _)) = EMOTION_WORDS.iter().find(|e| e.0 == w) {
            let pos = centre("positive");
            let neg = centre("negative");
            pos.iter().zip(&neg).map(|(p, n)| v * p + (1.0 - v) * n).collect()
        } else {
            vec![0.0; EMBEDDING_DIM]
        };
        let mut r = ChaCha8Rng::seed_from_u64(fnv1a(w.as_bytes()));
        let vals: Vec<String> = base
            .iter()
            .map(|b| format!("{:.6}", b + r.gen_range(-0.3..0.3)))
            .collect();
        writeln!(s, "{w} {}", vals.join(" ")).unwrap();
    }
    s
}

pub fn corpus_jsonl() -> String {
    let mut buf = Vec::new();
    corpus().to_jsonl(&mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

/// Every toy file as (relative name, contents).
pub fn files() -> Vec<(&'static str, String)> {
    vec![
        ("config.toml", CONFIG.to_string()),
        ("corpus.jsonl", corpus_jsonl()),
        ("wordlist.txt", wordlist()),
        ("lexicon.csv", lexicon()),
        ("seeds.json", seeds()),
        ("embeddings.txt", embeddings()),
    ]
}

pub fn write_toy(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in files() {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{english_fraction, Wordlist};

    #[test]
    fn bundled_copy_matches_generator() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
        for (name, contents) in files() {
            let on_disk = std::fs::read_to_string(dir.join(name)).unwrap_or_default();
            assert!(on_disk == contents, "data/toy/{name} is stale; regenerate with --init-toy");
        }
    }

    #[test]
    fn shape_and_cleaning_preconditions() {
        let c = corpus();
        assert_eq!(c.books.len(), BOOKS);
        let wl = Wordlist::new(wordlist().lines().map(String::from)).unwrap();
        for b in &c.books {
            assert_eq!(b.chapters.len(), CHAPTERS);
            for ch in &b.chapters {
                assert!(ch.word_count() >= 400);
                assert!(english_fraction(&ch.text, &wl) > 0.95);
            }
        }
    }
}
