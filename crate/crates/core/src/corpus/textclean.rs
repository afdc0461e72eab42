use std::collections::HashSet;
use std::path::Path;

use super::CorpusError;
use crate::text::word_tokens;

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul", "ol", "blockquote", "tr",
    "hr", "section", "article", "header", "footer", "pre", "table", "td", "th",
];
const SKIP_CONTENT_TAGS: &[&str] = &["script", "style"];

/// Remove HTML tags, attributes, comments and script/style bodies, decode
/// the common entities, and normalize paragraph whitespace.
pub fn strip_markup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut skip_until: Option<&'static str> = None;
    while i < text.len() {
        let rest = &text[i..];
        if let Some(close) = skip_until {
            match find_ci(rest, close) {
                Some(pos) => {
                    i += pos;
                    skip_until = None;
                }
                None => break,
            }
            continue;
        }
        if rest.starts_with("<!--") {
            i += rest.find("-->").map_or(rest.len(), |p| p + 3);
            continue;
        }
        if bytes[i] == b'<' && looks_like_tag(&rest[1..]) {
            let end = tag_end(rest);
            let (name, closing) = tag_name(&rest[1..end.saturating_sub(1).max(1)]);
            if BLOCK_TAGS.contains(&name.as_str()) {
                out.push_str(if name == "br" { "\n" } else { "\n\n" });
            }
            if !closing {
                if let Some(t) = SKIP_CONTENT_TAGS.iter().find(|t| **t == name) {
                    skip_until = Some(if *t == "script" { "</script" } else { "</style" });
                }
            }
            i += end;
            continue;
        }
        if bytes[i] == b'&' {
            if let Some((decoded, len)) = decode_entity(rest) {
                out.push(decoded);
                i += len;
                continue;
            }
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    normalize_whitespace(&out)
}

fn looks_like_tag(after_lt: &str) -> bool {
    after_lt
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?')
}

/// Byte length of the tag starting at `s[0] == '<'`, honoring quoted
/// attribute values.
fn tag_end(s: &str) -> usize {
    let mut quote: Option<char> = None;
    for (i, c) in s.char_indices().skip(1) {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '>' => return i + 1,
            None => {}
        }
    }
    s.len()
}

fn tag_name(inner: &str) -> (String, bool) {
    let inner = inner.trim_start();
    let (closing, inner) = match inner.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, inner),
    };
    let name: String = inner
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    (name, closing)
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    (0..h.len().saturating_sub(n.len() - 1)).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn decode_entity(s: &str) -> Option<(char, usize)> {
    let semi = s[..s.len().min(12)].find(';')?;
    let body = &s[1..semi];
    let c = match body {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        "mdash" => '\u{2014}',
        "ndash" => '\u{2013}',
        "hellip" => '\u{2026}',
        "rsquo" => '\u{2019}',
        "lsquo" => '\u{2018}',
        "rdquo" => '\u{201d}',
        "ldquo" => '\u{201c}',
        _ => {
            let num = body.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)?
        }
    };
    Some((c, semi + 1))
}

/// Trim each line, drop trailing spaces, collapse runs of blank lines to a
/// single blank line, trim the whole text.
fn normalize_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut blank_run = 0usize;
    for line in s.lines() {
        let line = line.trim();
        if line.is_empty() {
            blank_run += 1;
            continue;
        }
        if !out.is_empty() {
            out.push_str(if blank_run > 0 { "\n\n" } else { "\n" });
        }
        out.push_str(line);
        blank_run = 0;
    }
    out
}

/// Remove writer notes addressed to readers at the start or end of a chapter.
///
/// A leading note runs from a marker line to the end of its paragraph; a
/// trailing note runs from the first marker line of the last paragraph to the
/// end. Interior text is returned byte-for-byte.
pub fn strip_author_notes(text: &str, markers: &[String]) -> String {
    let mut body = text;
    loop {
        let trimmed = body.trim_start();
        let first_line = trimmed.lines().next().unwrap_or("");
        if trimmed.is_empty() || !is_note_line(first_line, markers) {
            break;
        }
        let para_end = paragraph_end(trimmed);
        let rest = &trimmed[para_end..];
        if rest.trim().is_empty() {
            // The whole text is one paragraph: drop just the marker line.
            let after_line = trimmed.find('\n').map_or(trimmed.len(), |p| p + 1);
            if trimmed[after_line..].trim().is_empty() {
                return String::new();
            }
            body = &trimmed[after_line..];
        } else {
            body = rest;
        }
    }
    loop {
        let trimmed = body.trim_end();
        let last_para_start = last_paragraph_start(trimmed);
        let para = &trimmed[last_para_start..];
        let mut offset = last_para_start;
        let mut cut = None;
        for line in para.split_inclusive('\n') {
            if is_note_line(line, markers) {
                cut = Some(offset);
                break;
            }
            offset += line.len();
        }
        match cut {
            Some(c) if trimmed[..c].trim().is_empty() => break,
            Some(c) => body = &trimmed[..c],
            None => break,
        }
    }
    body.trim().to_string()
}

fn is_note_line(line: &str, markers: &[String]) -> bool {
    let l = line
        .trim_start_matches(|c: char| c.is_whitespace() || "*_([{-~#>".contains(c))
        .replace('\u{2019}', "'");
    let lower = l.to_lowercase();
    markers.iter().any(|m| lower.starts_with(&m.to_lowercase()))
}

/// Byte offset just past the first blank-line separator (or end of text).
fn paragraph_end(s: &str) -> usize {
    let mut offset = 0;
    let mut seen_content = false;
    for line in s.split_inclusive('\n') {
        if line.trim().is_empty() {
            if seen_content {
                return offset;
            }
        } else {
            seen_content = true;
        }
        offset += line.len();
    }
    s.len()
}

fn last_paragraph_start(s: &str) -> usize {
    let mut start = 0;
    let mut offset = 0;
    let mut prev_blank = false;
    for line in s.split_inclusive('\n') {
        let blank = line.trim().is_empty();
        if !blank && prev_blank {
            start = offset;
        }
        prev_blank = blank;
        offset += line.len();
    }
    start
}

/// Lowercase English word set.
#[derive(Debug, Clone)]
pub struct Wordlist {
    words: HashSet<String>,
}

impl Wordlist {
    pub fn new<I, S>(words: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(CorpusError::EmptyWordlist);
        }
        Ok(Self { words })
    }

    /// Newline-delimited file, one word per line.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let s = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::new(s.lines())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Share of word tokens found in `wordlist`; 0 for text without tokens.
pub fn english_fraction(text: &str, wordlist: &Wordlist) -> f64 {
    let tokens = word_tokens(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens.iter().filter(|t| wordlist.contains(t)).count();
    hits as f64 / tokens.len() as f64
}
