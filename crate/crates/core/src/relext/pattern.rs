//! The surface-pattern language.
//!
//! One pattern per line:
//!
//! ```text
//! # comment
//! PartOf : NP(L) "of" TAG(DET)? TAG(NUM)? NP(R)
//! IsA/such-as@2 : NP(R) "such" "as" NP(L)
//! ```
//!
//! The header is a relation name, optionally followed by `/id` and
//! `@priority`. Elements are `NP(L)`, `NP(R)`, `"literal"`, `TAG(X)` and
//! `GAP(k)` with `0 <= k <= 10`; a trailing `?` makes an element optional.
//! Without an explicit id a pattern is named `<Relation>-<n>`; without an
//! explicit priority it takes its position in the file. Lower priority
//! values win when two patterns find the same triple.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::chunker::PosTag;

pub const MAX_GAP: u8 = 10;
const MAX_OPTIONALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationType {
    IsA,
    PartOf,
    UsedBy,
    UsedFor,
    UsedIn,
    UsedOver,
    UsedWith,
}

impl RelationType {
    pub const ALL: [RelationType; 7] = [
        RelationType::IsA,
        RelationType::PartOf,
        RelationType::UsedBy,
        RelationType::UsedFor,
        RelationType::UsedIn,
        RelationType::UsedOver,
        RelationType::UsedWith,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::IsA => "IsA",
            RelationType::PartOf => "PartOf",
            RelationType::UsedBy => "UsedBy",
            RelationType::UsedFor => "UsedFor",
            RelationType::UsedIn => "UsedIn",
            RelationType::UsedOver => "UsedOver",
            RelationType::UsedWith => "UsedWith",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationType::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    /// Lowercased word; matched case-insensitively.
    Literal(String),
    Tag(PosTag),
    Slot(Slot),
    Gap(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateElement {
    pub element: Element,
    pub optional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfacePattern {
    pub pattern_id: String,
    pub relation: RelationType,
    pub template: Vec<TemplateElement>,
    pub priority: i64,
    variants: Vec<Vec<Element>>,
}

impl SurfacePattern {
    /// Every concrete template obtained by keeping or dropping each optional element.
    pub fn variants(&self) -> &[Vec<Element>] {
        &self.variants
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("line {line}, column {column}: {message}")]
    PatternSyntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate pattern id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: pattern has no {slot} noun-phrase slot")]
    MissingSlot { line: usize, slot: &'static str },
    #[error("cannot read pattern file {path}: {message}")]
    Io { path: String, message: String },
}

const DEFAULT_PACK: &str = include_str!("../../data/default.patterns");

/// A compiled, priority-sorted pattern list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternSet {
    patterns: Vec<SurfacePattern>,
}

impl PatternSet {
    pub fn default_pack() -> PatternSet {
        compile(DEFAULT_PACK).expect("bundled pattern pack compiles")
    }

    pub fn default_pack_source() -> &'static str {
        DEFAULT_PACK
    }

    pub fn load(path: &std::path::Path) -> Result<PatternSet, PatternError> {
        let source = std::fs::read_to_string(path).map_err(|e| PatternError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        compile(&source)
    }

    pub fn patterns(&self) -> &[SurfacePattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn from_patterns(mut patterns: Vec<SurfacePattern>) -> PatternSet {
        patterns.sort_by_key(|p| p.priority);
        PatternSet { patterns }
    }
}

struct LineParser<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, at: usize, message: impl Into<String>) -> PatternError {
        PatternError::PatternSyntax {
            line: self.line,
            column: self.text[..at].chars().count() + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let rest = self.rest();
        let n = rest.find(|c: char| !f(c)).unwrap_or(rest.len());
        self.pos += n;
        &rest[..n]
    }

    fn paren_arg(&mut self, what: &str) -> Result<&'a str, PatternError> {
        let open = self.pos;
        if !self.eat("(") {
            return Err(self.err(open, format!("expected `(` after {what}")));
        }
        let arg = self.take_while(|c| c != ')' && !c.is_whitespace());
        if !self.eat(")") {
            return Err(self.err(self.pos, format!("expected `)` to close {what}")));
        }
        Ok(arg)
    }

    fn element(&mut self) -> Result<TemplateElement, PatternError> {
        let start = self.pos;
        let element = if self.eat("\"") {
            let word = self.take_while(|c| c != '"');
            if !self.eat("\"") {
                return Err(self.err(start, "unterminated literal"));
            }
            if word.is_empty() || word.contains(char::is_whitespace) {
                return Err(self.err(start, "literals must be a single non-empty word"));
            }
            Element::Literal(word.to_lowercase())
        } else {
            let name = self.take_while(|c| c.is_ascii_alphabetic());
            match name {
                "NP" => match self.paren_arg("NP")? {
                    "L" => Element::Slot(Slot::Left),
                    "R" => Element::Slot(Slot::Right),
                    other => return Err(self.err(start, format!("NP slot must be L or R, got {other:?}"))),
                },
                "TAG" => {
                    let arg = self.paren_arg("TAG")?;
                    Element::Tag(arg.parse().map_err(|e: crate::chunker::UnknownTag| self.err(start, e.to_string()))?)
                }
                "GAP" => {
                    let arg = self.paren_arg("GAP")?;
                    let k: u8 = arg
                        .parse()
                        .map_err(|_| self.err(start, format!("GAP bound must be an integer, got {arg:?}")))?;
                    if k > MAX_GAP {
                        return Err(self.err(start, format!("GAP bound {k} exceeds {MAX_GAP}")));
                    }
                    Element::Gap(k)
                }
                "" => return Err(self.err(start, "expected a pattern element")),
                other => return Err(self.err(start, format!("unknown element {other:?}"))),
            }
        };
        let optional = self.eat("?");
        if optional && matches!(element, Element::Slot(_) | Element::Gap(_)) {
            return Err(self.err(start, "noun-phrase slots and gaps cannot be optional"));
        }
        if let Some(c) = self.rest().chars().next() {
            if !c.is_whitespace() {
                return Err(self.err(self.pos, format!("unexpected {c:?} after element")));
            }
        }
        Ok(TemplateElement { element, optional })
    }
}

struct Header {
    relation: RelationType,
    id: Option<String>,
    priority: Option<i64>,
}

fn parse_header(p: &mut LineParser) -> Result<Header, PatternError> {
    let start = p.pos;
    let name = p.take_while(|c| c.is_ascii_alphabetic());
    let relation = name
        .parse::<RelationType>()
        .map_err(|m| p.err(start, m))?;
    let id = if p.eat("/") {
        let id_start = p.pos;
        let id = p.take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if id.is_empty() {
            return Err(p.err(id_start, "empty pattern id"));
        }
        Some(id.to_string())
    } else {
        None
    };
    let priority = if p.eat("@") {
        let at = p.pos;
        let digits = p.take_while(|c| c.is_ascii_digit() || c == '-');
        Some(
            digits
                .parse()
                .map_err(|_| p.err(at, format!("bad priority {digits:?}")))?,
        )
    } else {
        None
    };
    p.skip_ws();
    if !p.eat(":") {
        return Err(p.err(p.pos, "expected `:` after the relation name"));
    }
    Ok(Header {
        relation,
        id,
        priority,
    })
}

fn expand(template: &[TemplateElement]) -> Vec<Vec<Element>> {
    let mut variants: Vec<Vec<Element>> = vec![Vec::new()];
    for el in template {
        if el.optional {
            let mut with = variants.clone();
            for v in &mut with {
                v.push(el.element.clone());
            }
            variants.extend(with);
        } else {
            for v in &mut variants {
                v.push(el.element.clone());
            }
        }
    }
    // dropping different optionals can yield the same sequence
    let mut seen = HashSet::new();
    variants.retain(|v| seen.insert(v.clone()));
    variants
}

/// Compiles pattern source text into a priority-sorted set.
pub fn compile(source: &str) -> Result<PatternSet, PatternError> {
    let mut patterns = Vec::new();
    let mut ids = HashSet::new();
    let mut per_relation = [0usize; 7];

    for (i, raw) in source.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut p = LineParser {
            line: line_no,
            text: raw,
            pos: raw.len() - raw.trim_start().len(),
        };
        let header = parse_header(&mut p)?;
        let mut template = Vec::new();
        loop {
            p.skip_ws();
            if p.rest().is_empty() || p.rest().starts_with('#') {
                break;
            }
            template.push(p.element()?);
        }

        for (slot, name) in [(Slot::Left, "left"), (Slot::Right, "right")] {
            let count = template
                .iter()
                .filter(|e| e.element == Element::Slot(slot))
                .count();
            if count == 0 {
                return Err(PatternError::MissingSlot {
                    line: line_no,
                    slot: name,
                });
            }
            if count > 1 {
                return Err(p.err(0, format!("more than one {name} noun-phrase slot")));
            }
        }
        if template.iter().filter(|e| e.optional).count() > MAX_OPTIONALS {
            return Err(p.err(0, format!("at most {MAX_OPTIONALS} optional elements per pattern")));
        }

        per_relation[header.relation.index()] += 1;
        let pattern_id = header
            .id
            .unwrap_or_else(|| format!("{}-{}", header.relation, per_relation[header.relation.index()]));
        if !ids.insert(pattern_id.clone()) {
            return Err(PatternError::DuplicateId {
                line: line_no,
                id: pattern_id,
            });
        }
        let priority = header.priority.unwrap_or(patterns.len() as i64);
        let variants = expand(&template);
        patterns.push(SurfacePattern {
            pattern_id,
            relation: header.relation,
            template,
            priority,
            variants,
        });
    }
    Ok(PatternSet::from_patterns(patterns))
}
