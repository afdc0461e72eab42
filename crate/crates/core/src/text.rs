//! Tokenization shared by the cleaning rules and the feature extractors.

/// Whitespace-delimited word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercased alphabetic word tokens. Apostrophes inside a word are kept
/// ("don't"), everything else splits.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_alphabetic() {
            cur.extend(c.to_lowercase());
        } else if (c == '\'' || c == '\u{2019}')
            && !cur.is_empty()
            && chars.peek().is_some_and(|n| n.is_alphabetic())
        {
            cur.push('\'');
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Whitespace tokens lowercased with surrounding punctuation trimmed. Used for
/// fixed-size word windows, where positions must follow the raw word count.
pub fn window_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .collect()
}

/// Stable 64-bit FNV-1a hash; used to derive per-text PRNG seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_split_on_punctuation() {
        assert_eq!(word_tokens("The cat, sat!"), vec!["the", "cat", "sat"]);
        assert_eq!(word_tokens("Don’t go"), vec!["don't", "go"]);
        assert_eq!(word_tokens("rock 'n' roll"), vec!["rock", "n", "roll"]);
        assert!(word_tokens("123 ...").is_empty());
    }

    #[test]
    fn word_count_is_whitespace_based() {
        assert_eq!(word_count("  a  b\n\nc-d "), 3);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn window_words_keep_positions() {
        assert_eq!(window_words("Hello, world ... x"), vec!["hello", "world", "", "x"]);
    }
}
