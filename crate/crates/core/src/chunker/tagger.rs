use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::tag::PosTag;
use super::tokenize::Token;

const CLOSED_CLASS: &str = include_str!("../../data/closed_class.tsv");
const CONTENT: &str = include_str!("../../data/content.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{source_name}:{line}: expected `surface<TAB>TAG`, got {text:?}")]
    BadLine {
        source_name: String,
        line: usize,
        text: String,
    },
    #[error("cannot read lexicon {path}: {message}")]
    Io { path: String, message: String },
}

/// Word → tag table. Lookups try the exact surface, then its lowercase form,
/// so `Justice` and `justice` can carry different tags.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, PosTag>,
}

impl Lexicon {
    pub fn parse(source_name: &str, text: &str) -> Result<Lexicon, LexiconError> {
        let mut entries = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || LexiconError::BadLine {
                source_name: source_name.to_string(),
                line: i + 1,
                text: raw.to_string(),
            };
            let (surface, tag) = line.split_once('\t').ok_or_else(bad)?;
            let tag = tag.trim().parse::<PosTag>().map_err(|_| bad())?;
            if surface.is_empty() || surface.contains(char::is_whitespace) {
                return Err(bad());
            }
            entries.insert(surface.to_string(), tag);
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        let text = fs::read_to_string(path).map_err(|e| LexiconError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Lexicon::parse(&path.display().to_string(), &text)
    }

    pub fn closed_class() -> Lexicon {
        Lexicon::parse("closed_class.tsv", CLOSED_CLASS).expect("bundled closed-class lexicon")
    }

    pub fn content() -> Lexicon {
        Lexicon::parse("content.tsv", CONTENT).expect("bundled content lexicon")
    }

    /// Adds every entry of `other`, replacing existing ones.
    pub fn extend(&mut self, other: Lexicon) {
        self.entries.extend(other.entries);
    }

    pub fn lookup(&self, surface: &str) -> Option<PosTag> {
        self.entries
            .get(surface)
            .or_else(|| self.entries.get(&surface.to_lowercase()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Assigns exactly one tag to each token of a sentence.
pub trait Tagger: Send + Sync {
    fn tag(&self, tokens: &[Token]) -> Vec<PosTag>;
}

const SUFFIX_RULES: &[(&str, PosTag)] = &[
    ("tion", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("able", PosTag::Adj),
    ("ous", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("al", PosTag::Adj),
    ("ly", PosTag::Other),
    ("ing", PosTag::Verb),
    ("ed", PosTag::Verb),
];

/// Lexicon-and-rules tagger.
///
/// Precedence: punctuation and numerals, pre-joined `a_b` compounds, the
/// closed-class lexicon, mid-sentence capitalization (PROPN), the content
/// lexicon, suffix rules, and finally NOUN.
#[derive(Debug, Clone)]
pub struct RuleTagger {
    closed: Lexicon,
    content: Lexicon,
}

impl Default for RuleTagger {
    fn default() -> Self {
        RuleTagger {
            closed: Lexicon::closed_class(),
            content: Lexicon::content(),
        }
    }
}

impl RuleTagger {
    pub fn new(closed: Lexicon, content: Lexicon) -> Self {
        RuleTagger { closed, content }
    }

    /// Default tagger whose content lexicon is extended by `user` entries.
    pub fn with_user_lexicon(user: Lexicon) -> Self {
        let mut tagger = RuleTagger::default();
        tagger.content.extend(user);
        tagger
    }

    fn tag_word(&self, word: &str, sentence_initial: bool) -> PosTag {
        if !word.chars().any(char::is_alphanumeric) {
            return PosTag::Punct;
        }
        if is_numeral(word) {
            return PosTag::Num;
        }
        if word.contains('_') {
            let head = word.rsplit('_').find(|s| !s.is_empty()).unwrap_or(word);
            return if starts_upper(head) {
                PosTag::Propn
            } else {
                PosTag::Noun
            };
        }
        if let Some(tag) = self.closed.lookup(word) {
            return tag;
        }
        if !sentence_initial && starts_upper(word) {
            return PosTag::Propn;
        }
        if let Some(tag) = self.content.lookup(word) {
            return tag;
        }
        let lower = word.to_lowercase();
        for &(suffix, tag) in SUFFIX_RULES {
            if lower.len() >= suffix.len() + 3 && lower.ends_with(suffix) {
                return tag;
            }
        }
        PosTag::Noun
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

fn is_numeral(word: &str) -> bool {
    word.starts_with(|c: char| c.is_ascii_digit())
        && word
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '/'))
}

impl Tagger for RuleTagger {
    fn tag(&self, tokens: &[Token]) -> Vec<PosTag> {
        let first_word = tokens
            .iter()
            .position(|t| t.surface.chars().any(char::is_alphanumeric));
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| self.tag_word(&t.surface, Some(i) == first_word))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::tokenize;

    fn tags(s: &str) -> Vec<PosTag> {
        RuleTagger::default().tag(&tokenize(s))
    }

    #[test]
    fn core_value_phrase() {
        use PosTag::*;
        assert_eq!(
            tags("the core value of the two clauses"),
            [Det, Noun, Noun, Adp, Det, Num, Noun]
        );
    }

    #[test]
    fn capitalized_mid_sentence_is_proper() {
        assert_eq!(
            tags("by the Criminal Justice Foundation")[2..],
            [PosTag::Propn, PosTag::Propn, PosTag::Propn]
        );
    }

    #[test]
    fn suffix_rules() {
        assert_eq!(tags("safely"), [PosTag::Other]);
        assert_eq!(tags("a fragmentation"), [PosTag::Det, PosTag::Noun]);
        assert_eq!(tags("so ponderous"), [PosTag::Other, PosTag::Adj]);
        assert_eq!(tags("it was shipped"), [PosTag::Pron, PosTag::Verb, PosTag::Verb]);
        assert_eq!(tags("zorb"), [PosTag::Noun]);
    }

    #[test]
    fn compounds_and_numbers() {
        assert_eq!(tags("her catchall_trust"), [PosTag::Pron, PosTag::Noun]);
        assert_eq!(tags("J._Howard said"), [PosTag::Propn, PosTag::Verb]);
        assert_eq!(tags("in 1983 , 5-4"), [PosTag::Adp, PosTag::Num, PosTag::Punct, PosTag::Num]);
    }

    #[test]
    fn user_lexicon_overrides() {
        let user = Lexicon::parse("user", "zorb\tVERB\n# comment\n").unwrap();
        let tagger = RuleTagger::with_user_lexicon(user);
        assert_eq!(tagger.tag(&tokenize("zorb")), [PosTag::Verb]);
    }

    #[test]
    fn bad_lexicon_line() {
        assert!(Lexicon::parse("x", "word NOUN").is_err());
        assert!(Lexicon::parse("x", "word\tNOPE").is_err());
    }

    #[test]
    fn bundled_lexicons_load() {
        assert!(Lexicon::closed_class().len() > 150);
        assert!(Lexicon::content().len() > 500);
    }
}
