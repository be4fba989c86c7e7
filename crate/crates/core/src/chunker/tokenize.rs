use std::ops::Range;

use crate::corpus::ABBREVIATIONS;

/// A token surface with its byte range in the sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub span: Range<usize>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn keeps_period(core: &str) -> bool {
    let with_period = format!("{core}.");
    if ABBREVIATIONS.contains(&with_period.as_str()) {
        return true;
    }
    let mut chars = core.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

/// Splits a sentence on whitespace, then peels leading and trailing
/// punctuation off each chunk as one-character tokens.
///
/// Word-internal punctuation stays put, so `I'm`, `5-4` and `J._Howard`
/// are single tokens. A period is kept on initials and listed abbreviations.
pub fn tokenize(sentence: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut offset = 0;
    for piece in sentence.split(char::is_whitespace) {
        let base = offset;
        offset += piece.len() + 1;
        if piece.is_empty() {
            continue;
        }
        push_piece(piece, base, &mut tokens);
    }
    tokens
}

fn push_piece(piece: &str, base: usize, out: &mut Vec<Token>) {
    let Some(first_word) = piece.find(is_word_char) else {
        for (i, c) in piece.char_indices() {
            out.push(Token {
                surface: c.to_string(),
                span: base + i..base + i + c.len_utf8(),
            });
        }
        return;
    };
    let last_word = piece
        .char_indices()
        .rev()
        .find(|&(_, c)| is_word_char(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(piece.len());

    let mut core_end = last_word;
    let tail = &piece[last_word..];
    if tail.starts_with('.') && keeps_period(&piece[first_word..last_word]) {
        core_end += 1;
    } else if tail.starts_with('\'') && piece[..last_word].ends_with('s') {
        // plural possessive: "petitioners'"
        core_end += 1;
    }

    for (i, c) in piece[..first_word].char_indices() {
        out.push(Token {
            surface: c.to_string(),
            span: base + i..base + i + c.len_utf8(),
        });
    }
    out.push(Token {
        surface: piece[first_word..core_end].to_string(),
        span: base + first_word..base + core_end,
    });
    for (i, c) in piece[core_end..].char_indices() {
        let start = base + core_end + i;
        out.push(Token {
            surface: c.to_string(),
            span: start..start + c.len_utf8(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn whitespace_and_final_period() {
        assert_eq!(surfaces("they do not clash."), ["they", "do", "not", "clash", "."]);
    }

    #[test]
    fn underscore_is_not_a_separator() {
        assert_eq!(surfaces("J._Howard intended"), ["J._Howard", "intended"]);
    }

    #[test]
    fn empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn contractions_stay_attached() {
        assert_eq!(surfaces("I'm sure you've seen it"), ["I'm", "sure", "you've", "seen", "it"]);
    }

    #[test]
    fn wrapping_punctuation() {
        assert_eq!(
            surfaces("(at best.) \"stop,\" he said"),
            ["(", "at", "best", ".", ")", "\"", "stop", ",", "\"", "he", "said"]
        );
    }

    #[test]
    fn initials_and_abbreviations_keep_their_period() {
        assert_eq!(surfaces("J. Howard met Mr. Smith."), ["J.", "Howard", "met", "Mr.", "Smith", "."]);
        assert_eq!(surfaces("the U.S. agrees"), ["the", "U.S.", "agrees"]);
    }

    #[test]
    fn spans_index_the_sentence() {
        let s = "For 124 years, as state_power  over alcohol.";
        for t in tokenize(s) {
            assert_eq!(&s[t.span.clone()], t.surface);
        }
    }

    proptest! {
        #[test]
        fn spans_are_ordered_and_exact(s in "[A-Za-z0-9_ .,'\"()!?-]{0,60}") {
            let tokens = tokenize(&s);
            let mut prev_end = 0;
            for t in &tokens {
                prop_assert!(t.span.start >= prev_end);
                prop_assert!(t.span.start < t.span.end);
                prop_assert_eq!(&s[t.span.clone()], t.surface.as_str());
                prev_end = t.span.end;
            }
            let rebuilt: String = tokens.iter().map(|t| t.surface.as_str()).collect();
            let visible: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(rebuilt, visible);
        }
    }
}
