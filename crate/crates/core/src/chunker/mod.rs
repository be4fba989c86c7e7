//! Tokenization, tagging and adjective–noun chunking.
//!
//! Noun phrases are maximal matches of `(ADJ | NOUN | PROPN)* (NOUN | PROPN)`
//! over the tagged tokens, rendered with `_` between surfaces
//! (`catchall_trust`, `Criminal_Justice_Foundation`). Determiners and
//! pronouns never enter a chunk.

mod tag;
mod tagger;
mod tokenize;

use std::ops::Range;

pub use tag::{PosTag, UnknownTag};
pub use tagger::{Lexicon, LexiconError, RuleTagger, Tagger};
pub use tokenize::{tokenize, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: PosTag,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounPhrase {
    /// Token index range within the sentence.
    pub tokens: Range<usize>,
    pub canonical: String,
    /// Byte range within the sentence text.
    pub span: Range<usize>,
}

impl NounPhrase {
    /// Tag of the last token.
    pub fn head_tag(&self, tokens: &[TaggedToken]) -> PosTag {
        tokens[self.tokens.end - 1].tag
    }
}

/// A sentence after tagging and chunking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzedSentence {
    pub text: String,
    pub tokens: Vec<TaggedToken>,
    pub chunks: Vec<NounPhrase>,
}

pub fn pos_tag(tokens: Vec<Token>, tagger: &dyn Tagger) -> Vec<TaggedToken> {
    let tags = tagger.tag(&tokens);
    debug_assert_eq!(tags.len(), tokens.len());
    tokens
        .into_iter()
        .zip(tags)
        .map(|(t, tag)| TaggedToken {
            surface: t.surface,
            tag,
            span: t.span,
        })
        .collect()
}

pub fn chunk(tagged: &[TaggedToken]) -> Vec<NounPhrase> {
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < tagged.len() {
        if !tagged[i].tag.is_phrasal() {
            i += 1;
            continue;
        }
        let start = i;
        while i < tagged.len() && tagged[i].tag.is_phrasal() {
            i += 1;
        }
        // trailing adjectives of a run cannot end a phrase
        if let Some(last_nominal) = (start..i).rev().find(|&k| tagged[k].tag.is_nominal()) {
            let range = start..last_nominal + 1;
            phrases.push(NounPhrase {
                canonical: tagged[range.clone()]
                    .iter()
                    .map(|t| t.surface.as_str())
                    .collect::<Vec<_>>()
                    .join("_"),
                span: tagged[start].span.start..tagged[last_nominal].span.end,
                tokens: range,
            });
        }
    }
    phrases
}

/// Runs tokenization, tagging and chunking for one sentence.
pub fn analyze(sentence: &str, tagger: &dyn Tagger) -> AnalyzedSentence {
    let tokens = pos_tag(tokenize(sentence), tagger);
    let chunks = chunk(&tokens);
    AnalyzedSentence {
        text: sentence.to_string(),
        tokens,
        chunks,
    }
}

/// Builds an analyzed sentence from externally tagged tokens; surfaces are
/// joined with single spaces to form the sentence text.
pub fn analyze_pretagged(tokens: &[(String, PosTag)]) -> AnalyzedSentence {
    let mut text = String::new();
    let mut tagged = Vec::with_capacity(tokens.len());
    for (surface, tag) in tokens {
        if !text.is_empty() {
            text.push(' ');
        }
        let start = text.len();
        text.push_str(surface);
        tagged.push(TaggedToken {
            surface: surface.clone(),
            tag: *tag,
            span: start..text.len(),
        });
    }
    let chunks = chunk(&tagged);
    AnalyzedSentence {
        text,
        tokens: tagged,
        chunks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phrases(s: &str) -> Vec<String> {
        analyze(s, &RuleTagger::default())
            .chunks
            .into_iter()
            .map(|c| c.canonical)
            .collect()
    }

    #[test]
    fn determiner_is_dropped() {
        assert_eq!(phrases("give her a catchall trust"), ["catchall_trust"]);
    }

    #[test]
    fn proper_noun_run() {
        assert_eq!(
            phrases("proposed by the Criminal Justice Foundation"),
            ["Criminal_Justice_Foundation"]
        );
    }

    #[test]
    fn no_nouns_no_chunks() {
        assert!(phrases("do not clash").is_empty());
    }

    #[test]
    fn noun_noun_compound() {
        assert_eq!(
            phrases("the manufacturing process allows it"),
            ["manufacturing_process"]
        );
    }

    #[test]
    fn trailing_adjective_stays_out() {
        assert_eq!(phrases("found the defendant guilty on three counts"), ["defendant", "counts"]);
    }

    #[test]
    fn possessive_pronoun_excluded() {
        assert_eq!(phrases("upon your own authority"), ["own_authority"]);
    }

    #[test]
    fn pretagged_path() {
        let s = analyze_pretagged(&[
            ("state".into(), PosTag::Noun),
            ("power".into(), PosTag::Noun),
            ("over".into(), PosTag::Adp),
            ("alcohol".into(), PosTag::Noun),
        ]);
        assert_eq!(s.text, "state power over alcohol");
        let names: Vec<_> = s.chunks.iter().map(|c| c.canonical.as_str()).collect();
        assert_eq!(names, ["state_power", "alcohol"]);
    }

    fn arb_tags() -> impl Strategy<Value = Vec<PosTag>> {
        proptest::collection::vec(proptest::sample::select(PosTag::ALL.to_vec()), 0..30)
    }

    fn tokens_for(tags: &[PosTag]) -> Vec<TaggedToken> {
        tags.iter()
            .enumerate()
            .map(|(i, &tag)| TaggedToken {
                surface: format!("w{i}"),
                tag,
                span: i * 4..i * 4 + 2,
            })
            .collect()
    }

    proptest! {
        #[test]
        fn chunks_are_ordered_disjoint_and_maximal(tags in arb_tags()) {
            let toks = tokens_for(&tags);
            let chunks = chunk(&toks);
            let mut prev_end = 0;
            for c in &chunks {
                prop_assert!(c.tokens.start >= prev_end);
                prev_end = c.tokens.end;
                let inside = &tags[c.tokens.clone()];
                prop_assert!(inside.iter().all(|t| t.is_phrasal()));
                prop_assert!(inside.last().unwrap().is_nominal());
                prop_assert_eq!(c.canonical.matches('_').count(), c.tokens.len() - 1);
                prop_assert!(!c.canonical.contains(char::is_whitespace));
                // cannot grow left: the previous token is outside the grammar
                if c.tokens.start > 0 {
                    prop_assert!(!tags[c.tokens.start - 1].is_phrasal());
                }
                // cannot grow right while still ending on a nominal
                let mut k = c.tokens.end;
                while k < tags.len() && tags[k].is_phrasal() {
                    prop_assert!(!tags[k].is_nominal());
                    k += 1;
                }
            }
            // every nominal token is covered by some chunk
            for (i, t) in tags.iter().enumerate() {
                if t.is_nominal() {
                    prop_assert!(chunks.iter().any(|c| c.tokens.contains(&i)));
                }
            }
        }

        #[test]
        fn tagger_is_total(s in "\\PC{0,60}") {
            let a = analyze(&s, &RuleTagger::default());
            let b = analyze(&s, &RuleTagger::default());
            prop_assert_eq!(a, b);
        }
    }
}
