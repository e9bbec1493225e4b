//! Case-insensitive phrase matching at word boundaries.
//!
//! Shared by the lexicon scan and vocabulary entity extraction. Offsets are
//! character offsets into the original text.

/// Lowercase, trim, and collapse internal whitespace runs to one space.
pub fn canonical_phrase(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Text folded to lowercase one character at a time, so that character
/// offsets line up with the original string.
pub(crate) struct FoldedText {
    chars: Vec<char>,
}

impl FoldedText {
    pub(crate) fn new(text: &str) -> Self {
        Self {
            chars: text.chars().map(fold_char).collect(),
        }
    }
}

/// A canonical phrase split into words of folded characters.
pub(crate) struct Phrase {
    words: Vec<Vec<char>>,
}

impl Phrase {
    pub(crate) fn new(canonical: &str) -> Self {
        Self {
            words: canonical
                .split_whitespace()
                .map(|w| w.chars().map(fold_char).collect())
                .collect(),
        }
    }

    /// Every `(start, end)` char range where the phrase occurs. Words of the
    /// phrase may be separated by any run of whitespace in the text.
    pub(crate) fn occurrences(&self, text: &FoldedText) -> Vec<(usize, usize)> {
        let chars = &text.chars;
        let mut hits = Vec::new();
        if self.words.is_empty() {
            return hits;
        }
        for start in 0..chars.len() {
            if start > 0 && is_word_char(chars[start - 1]) && is_word_char(chars[start]) {
                continue;
            }
            if let Some(end) = self.match_at(chars, start) {
                let boundary_after = end == chars.len()
                    || !(is_word_char(chars[end]) && is_word_char(chars[end - 1]));
                if boundary_after {
                    hits.push((start, end));
                }
            }
        }
        hits
    }

    fn match_at(&self, chars: &[char], start: usize) -> Option<usize> {
        let mut pos = start;
        for (i, word) in self.words.iter().enumerate() {
            if i > 0 {
                let ws_start = pos;
                while pos < chars.len() && chars[pos].is_whitespace() {
                    pos += 1;
                }
                if pos == ws_start {
                    return None;
                }
            }
            let end = pos + word.len();
            if end > chars.len() || chars[pos..end] != word[..] {
                return None;
            }
            pos = end;
        }
        Some(pos)
    }
}
