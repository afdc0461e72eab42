//! Built-in vocabulary shared by the simulated provider and the bundled toy
//! resources. Every word the simulator emits is covered by the toy lexicon,
//! embeddings, seed file and English wordlist, so all extractors see signal.

/// Theme names and their seed words (25 themes).
pub const THEMES: [(&str, [&str; 6]); 25] = [
    ("growth", ["growth", "learn", "mature", "develop", "progress", "evolve"]),
    ("resilience", ["resilience", "endure", "persist", "recover", "withstand", "rebound"]),
    ("friendship", ["friendship", "friend", "companion", "ally", "buddy", "loyal"]),
    ("love", ["love", "romance", "kiss", "heart", "adore", "beloved"]),
    ("family", ["family", "mother", "father", "sister", "brother", "home"]),
    ("courage", ["courage", "brave", "bold", "fearless", "daring", "valor"]),
    ("wisdom", ["wisdom", "wise", "insight", "knowledge", "sage", "understand"]),
    ("kindness", ["kindness", "kind", "gentle", "generous", "caring", "compassion"]),
    ("justice", ["justice", "fair", "law", "court", "judge", "rights"]),
    ("leadership", ["leadership", "leader", "command", "guide", "captain", "rule"]),
    ("forgiveness", ["forgiveness", "forgive", "pardon", "mercy", "reconcile", "amends"]),
    ("humility", ["humility", "humble", "modest", "meek", "simple", "grounded"]),
    ("prudence", ["prudence", "careful", "caution", "plan", "prudent", "deliberate"]),
    ("selfcontrol", ["discipline", "restraint", "control", "patience", "calm", "steady"]),
    ("gratitude", ["gratitude", "grateful", "thankful", "thanks", "appreciate", "blessing"]),
    ("hope", ["hope", "dream", "future", "wish", "optimism", "promise"]),
    ("humor", ["humor", "joke", "laugh", "funny", "jest", "wit"]),
    ("spirituality", ["spirit", "faith", "prayer", "soul", "sacred", "divine"]),
    ("creativity", ["creativity", "create", "art", "invent", "imagine", "paint"]),
    ("curiosity", ["curiosity", "curious", "explore", "wonder", "question", "discover"]),
    ("honesty", ["honesty", "honest", "truth", "sincere", "confess", "candid"]),
    ("perseverance", ["perseverance", "effort", "struggle", "climb", "strive", "grind"]),
    ("zest", ["zest", "energy", "vigor", "lively", "eager", "thrill"]),
    ("teamwork", ["teamwork", "team", "together", "crew", "cooperate", "unite"]),
    ("beauty", ["beauty", "beautiful", "grace", "elegant", "lovely", "radiant"]),
];

/// Emotion-bearing words: (word, valence, arousal), both in [0, 1].
pub const EMOTION_WORDS: [(&str, f64, f64); 24] = [
    ("joyful", 0.95, 0.75),
    ("happy", 0.90, 0.60),
    ("delighted", 0.92, 0.70),
    ("cheerful", 0.88, 0.55),
    ("peaceful", 0.85, 0.15),
    ("content", 0.80, 0.25),
    ("relieved", 0.78, 0.30),
    ("hopeful", 0.82, 0.45),
    ("excited", 0.85, 0.92),
    ("thrilled", 0.90, 0.95),
    ("proud", 0.83, 0.62),
    ("tender", 0.80, 0.30),
    ("sad", 0.12, 0.30),
    ("gloomy", 0.15, 0.20),
    ("lonely", 0.15, 0.25),
    ("grieving", 0.08, 0.40),
    ("bored", 0.30, 0.05),
    ("tired", 0.30, 0.10),
    ("angry", 0.12, 0.90),
    ("furious", 0.05, 0.97),
    ("terrified", 0.05, 0.95),
    ("anxious", 0.20, 0.80),
    ("jealous", 0.18, 0.70),
    ("betrayed", 0.06, 0.75),
];

pub const CHARACTERS: [&str; 8] = [
    "Mara", "Ellis", "Jonah", "Priya", "Tobias", "Lena", "Rafael", "Ingrid",
];

pub const VERBS: [&str; 12] = [
    "finds", "seeks", "faces", "meets", "remembers", "loses", "chooses", "builds", "hides",
    "reveals", "follows", "protects",
];

/// Neutral connective words; present in the wordlist but in no seed set and
/// without emotion norms.
pub const FILLER: [&str; 20] = [
    "the", "a", "and", "with", "of", "in", "at", "to", "from", "after", "before", "while",
    "during", "near", "city", "night", "road", "door", "letter", "storm",
];

/// Function words that the topic model treats as stop words.
pub const STOP_WORDS: [&str; 40] = [
    "a", "an", "the", "and", "or", "but", "if", "of", "in", "on", "at", "to", "from", "by", "for",
    "with", "as", "is", "are", "was", "were", "be", "been", "it", "its", "this", "that", "he",
    "she", "they", "his", "her", "their", "we", "you", "i", "not", "no", "after", "before",
];

pub fn all_theme_words() -> impl Iterator<Item = &'static str> + Clone {
    THEMES.iter().flat_map(|(_, w)| w.iter().copied())
}

pub fn valence_of(word: &str) -> Option<f64> {
    EMOTION_WORDS.iter().find(|(w, _, _)| *w == word).map(|(_, v, _)| *v)
}
