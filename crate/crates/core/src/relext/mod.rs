//! Pattern-driven relation extraction between noun phrases of one sentence.

mod pattern;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::chunker::{analyze, analyze_pretagged, AnalyzedSentence, PosTag, Tagger};
use crate::corpus::{Corpus, UttRef, Utterance};

pub use pattern::{
    compile, Element, PatternError, PatternSet, RelationType, Slot, SurfacePattern,
    TemplateElement, MAX_GAP,
};

/// Words that link coordinated right-hand phrases.
const CONJUNCTS: &[&str] = &["and", "or", ","];
/// Tokens that may sit between a conjunction and the next conjunct.
const COORD_BUDGET: usize = 5;

/// One relation found in a sentence, before provenance is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub relation: RelationType,
    pub left: String,
    pub right: String,
    pub pattern_id: String,
    pub priority: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationInstance {
    pub case_id: String,
    pub utterance_index: usize,
    pub sentence_index: usize,
    pub relation: RelationType,
    pub left: String,
    pub right: String,
    pub pattern_id: String,
}

impl RelationInstance {
    pub fn triple(&self) -> (RelationType, &str, &str) {
        (self.relation, &self.left, &self.right)
    }
}

#[derive(Debug)]
enum UnitKind {
    Phrase(usize),
    Word,
}

/// A matching position: a whole noun phrase or one token outside any phrase.
#[derive(Debug)]
struct Unit {
    kind: UnitKind,
    lower: String,
    tag: PosTag,
}

impl Unit {
    fn is_phrase(&self) -> bool {
        matches!(self.kind, UnitKind::Phrase(_))
    }

    fn is_sentence_final(&self) -> bool {
        matches!(self.lower.as_str(), "." | "!" | "?")
    }
}

fn units(sentence: &AnalyzedSentence) -> Vec<Unit> {
    let mut out = Vec::with_capacity(sentence.tokens.len());
    let mut chunks = sentence.chunks.iter().enumerate().peekable();
    let mut i = 0;
    while i < sentence.tokens.len() {
        if let Some(&(ci, c)) = chunks.peek() {
            if c.tokens.start == i {
                out.push(Unit {
                    kind: UnitKind::Phrase(ci),
                    lower: c.canonical.to_lowercase(),
                    tag: c.head_tag(&sentence.tokens),
                });
                i = c.tokens.end;
                chunks.next();
                continue;
            }
        }
        let t = &sentence.tokens[i];
        out.push(Unit {
            kind: UnitKind::Word,
            lower: t.surface.to_lowercase(),
            tag: t.tag,
        });
        i += 1;
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Binding {
    left: Option<usize>,
    right: Option<usize>,
}

/// Collects every way `template[el..]` matches starting at `pos`.
/// Each hit records the bound phrase units and the unit index after the match.
fn match_at(
    template: &[Element],
    el: usize,
    units: &[Unit],
    pos: usize,
    binding: Binding,
    hits: &mut Vec<(Binding, usize)>,
) {
    let Some(element) = template.get(el) else {
        hits.push((binding, pos));
        return;
    };
    if let Element::Gap(k) = element {
        let mut p = pos;
        for skipped in 0..=*k as usize {
            if skipped > 0 {
                match units.get(p) {
                    Some(u) if !u.is_phrase() && !u.is_sentence_final() => p += 1,
                    _ => break,
                }
            }
            match_at(template, el + 1, units, p, binding, hits);
        }
        return;
    }
    let Some(unit) = units.get(pos) else {
        return;
    };
    let mut next = binding;
    let ok = match element {
        Element::Literal(w) => unit.lower == *w,
        Element::Tag(t) => unit.tag == *t,
        Element::Slot(slot) => {
            if !unit.is_phrase() {
                false
            } else {
                match slot {
                    Slot::Left => next.left = Some(pos),
                    Slot::Right => next.right = Some(pos),
                }
                true
            }
        }
        Element::Gap(_) => unreachable!(),
    };
    if ok {
        match_at(template, el + 1, units, pos + 1, next, hits);
    }
}

/// Further conjuncts after a right-hand phrase at `right`: "X by A and by B".
fn conjuncts(units: &[Unit], right: usize) -> Vec<usize> {
    let mut found = Vec::new();
    let mut pos = right + 1;
    loop {
        match units.get(pos) {
            Some(u) if !u.is_phrase() && CONJUNCTS.contains(&u.lower.as_str()) => {}
            _ => break,
        }
        let mut p = pos + 1;
        let mut used = 1;
        while let Some(u) = units.get(p) {
            let skippable = !u.is_phrase()
                && (matches!(u.tag, PosTag::Adp | PosTag::Det | PosTag::Num)
                    || CONJUNCTS.contains(&u.lower.as_str()));
            if !skippable || used >= COORD_BUDGET {
                break;
            }
            used += 1;
            p += 1;
        }
        match units.get(p) {
            Some(u) if u.is_phrase() => {
                found.push(p);
                pos = p + 1;
            }
            _ => break,
        }
    }
    found
}

/// Runs every pattern against a sentence.
///
/// Triples found by several patterns are reported once, under the
/// highest-priority pattern. The result is ordered by that priority, then by
/// phrase position.
pub fn extract(sentence: &AnalyzedSentence, patterns: &PatternSet) -> Vec<Extraction> {
    if sentence.chunks.len() < 2 {
        return Vec::new();
    }
    let units = units(sentence);
    let phrase_name = |u: usize| match units[u].kind {
        UnitKind::Phrase(ci) => sentence.chunks[ci].canonical.as_str(),
        UnitKind::Word => unreachable!("slots bind phrases only"),
    };

    // (relation, left unit, right unit) -> best (priority, pattern index)
    let mut best: HashMap<(RelationType, &str, &str), (i64, usize, usize, usize)> = HashMap::new();
    for (pi, pattern) in patterns.patterns().iter().enumerate() {
        for variant in pattern.variants() {
            let right_is_last = variant.last() == Some(&Element::Slot(Slot::Right));
            let mut hits = Vec::new();
            for start in 0..units.len() {
                match_at(
                    variant,
                    0,
                    &units,
                    start,
                    Binding {
                        left: None,
                        right: None,
                    },
                    &mut hits,
                );
            }
            for (b, _) in hits {
                let (Some(l), Some(r)) = (b.left, b.right) else {
                    continue;
                };
                let mut rights = vec![r];
                if right_is_last {
                    rights.extend(conjuncts(&units, r));
                }
                for r in rights {
                    let (left, right) = (phrase_name(l), phrase_name(r));
                    if left == right {
                        continue;
                    }
                    let key = (pattern.relation, left, right);
                    let candidate = (pattern.priority, pi, l, r);
                    best.entry(key)
                        .and_modify(|cur| {
                            if (candidate.0, candidate.1) < (cur.0, cur.1) {
                                *cur = candidate;
                            }
                        })
                        .or_insert(candidate);
                }
            }
        }
    }

    let mut found: Vec<_> = best.into_iter().collect();
    found.sort_by_key(|&((rel, _, _), (prio, pi, l, r))| (prio, pi, l, r, rel));
    found
        .into_iter()
        .map(|((relation, left, right), (priority, pi, _, _))| Extraction {
            relation,
            left: left.to_string(),
            right: right.to_string(),
            pattern_id: patterns.patterns()[pi].pattern_id.clone(),
            priority,
        })
        .collect()
}

/// Tags and chunks every sentence of an utterance.
pub fn analyze_utterance(u: &Utterance, tagger: &dyn Tagger) -> Vec<AnalyzedSentence> {
    match &u.pretagged {
        Some(tagged) => tagged.iter().map(|s| analyze_pretagged(s)).collect(),
        None => u.sentences.iter().map(|s| analyze(s, tagger)).collect(),
    }
}

pub fn extract_utterance(u: &Utterance, patterns: &PatternSet, tagger: &dyn Tagger) -> Vec<RelationInstance> {
    analyze_utterance(u, tagger)
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            extract(s, patterns).into_iter().map(move |e| RelationInstance {
                case_id: u.case_id.clone(),
                utterance_index: u.utterance_index,
                sentence_index: si,
                relation: e.relation,
                left: e.left,
                right: e.right,
                pattern_id: e.pattern_id,
            })
        })
        .collect()
}

/// Extracts from every utterance of a pool, in pool order.
pub fn extract_corpus(
    corpus: &Corpus,
    pool: &[UttRef],
    patterns: &PatternSet,
    tagger: &dyn Tagger,
) -> Vec<RelationInstance> {
    pool.par_iter()
        .filter_map(|r| corpus.get(r))
        .map(|u| extract_utterance(u, patterns, tagger))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
