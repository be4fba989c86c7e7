//! Corpus data model and the line-delimited record format.
//!
//! Each input line is one JSON object. `kind = "case"` lines carry the
//! lawsuit outcome and every Justice's final vote; `kind = "utt"` lines carry
//! one speaker turn. Lines starting with `#` and blank lines are skipped.

mod sentence;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::chunker::PosTag;

pub use sentence::{sentence_split, ABBREVIATIONS};

/// One side of a lawsuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Petitioner,
    Respondent,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Petitioner => Side::Respondent,
            Side::Respondent => Side::Petitioner,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Petitioner => "petitioner",
            Side::Respondent => "respondent",
        }
    }

    fn parse(s: &str) -> Option<Side> {
        match s {
            "petitioner" => Some(Side::Petitioner),
            "respondent" => Some(Side::Respondent),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseMeta {
    pub case_id: String,
    pub winner: Side,
    pub justice_votes: BTreeMap<String, Side>,
}

/// Who is speaking, with the side information that goes with the role.
///
/// A Justice's addressee may be recorded as unknown (`"addr": null`); such
/// turns load fine but are left out of every conversation group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speaker {
    Justice { addressee: Option<Side> },
    Lawyer { side: Side },
}

impl Speaker {
    pub fn is_justice(&self) -> bool {
        matches!(self, Speaker::Justice { .. })
    }
}

/// A sentence that arrived already tokenized and tagged.
pub type PretaggedSentence = Vec<(String, PosTag)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub case_id: String,
    pub utterance_index: usize,
    pub speaker_id: String,
    pub speaker: Speaker,
    pub text: String,
    pub sentences: Vec<String>,
    /// Set when the record carried its own tags; bypasses the tagger.
    pub pretagged: Option<Vec<PretaggedSentence>>,
}

impl Utterance {
    pub fn reference(&self) -> UttRef {
        UttRef {
            case_id: self.case_id.clone(),
            utterance_index: self.utterance_index,
        }
    }
}

/// Stable address of an utterance inside a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UttRef {
    pub case_id: String,
    pub utterance_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Case(CaseMeta),
    Utterance(Utterance),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub cases: BTreeMap<String, CaseMeta>,
    /// Sorted by `(case_id, utterance_index)`.
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadDiagnostics {
    pub cases: usize,
    pub utterances: usize,
    pub justice_utterances: usize,
    pub lawyer_utterances: usize,
    /// One utterance is counted as one conversational exchange.
    pub exchanges: usize,
}

impl Corpus {
    pub fn diagnostics(&self) -> LoadDiagnostics {
        let justice = self
            .utterances
            .iter()
            .filter(|u| u.speaker.is_justice())
            .count();
        LoadDiagnostics {
            cases: self.cases.len(),
            utterances: self.utterances.len(),
            justice_utterances: justice,
            lawyer_utterances: self.utterances.len() - justice,
            exchanges: self.utterances.len(),
        }
    }

    pub fn get(&self, r: &UttRef) -> Option<&Utterance> {
        self.utterances
            .binary_search_by(|u| {
                (u.case_id.as_str(), u.utterance_index).cmp(&(r.case_id.as_str(), r.utterance_index))
            })
            .ok()
            .map(|i| &self.utterances[i])
    }

    /// Builds a corpus from already-typed records, enforcing every load-time invariant.
    pub fn from_records(records: Vec<Record>) -> Result<Corpus, CorpusError> {
        let mut cases = BTreeMap::new();
        let mut utterances = Vec::new();
        for record in records {
            match record {
                Record::Case(meta) => {
                    if cases.contains_key(&meta.case_id) {
                        return Err(CorpusError::DuplicateCase(meta.case_id));
                    }
                    cases.insert(meta.case_id.clone(), meta);
                }
                Record::Utterance(u) => utterances.push(u),
            }
        }
        utterances.sort_by(|a: &Utterance, b: &Utterance| {
            (a.case_id.as_str(), a.utterance_index).cmp(&(b.case_id.as_str(), b.utterance_index))
        });

        let mut expected_next: BTreeMap<&str, usize> = BTreeMap::new();
        for u in &utterances {
            let meta = cases
                .get(&u.case_id)
                .ok_or_else(|| CorpusError::DanglingCase(u.case_id.clone()))?;
            if u.speaker.is_justice() && !meta.justice_votes.contains_key(&u.speaker_id) {
                return Err(CorpusError::MissingVote {
                    case_id: u.case_id.clone(),
                    justice_id: u.speaker_id.clone(),
                });
            }
            let next = expected_next.entry(u.case_id.as_str()).or_insert(0);
            if u.utterance_index != *next {
                return Err(CorpusError::IndexGap {
                    case_id: u.case_id.clone(),
                    expected: *next,
                    found: u.utterance_index,
                });
            }
            *next += 1;
        }

        Ok(Corpus { cases, utterances })
    }

    /// Serializes the corpus back to record lines, cases first.
    pub fn to_record_lines(&self) -> Vec<String> {
        self.cases
            .values()
            .map(|c| serialize_record(&Record::Case(c.clone())))
            .chain(
                self.utterances
                    .iter()
                    .map(|u| serialize_record(&Record::Utterance(u.clone()))),
            )
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("utterance references unknown case {0:?}")]
    DanglingCase(String),
    #[error("case {case_id:?}: justice {justice_id:?} speaks but has no recorded vote")]
    MissingVote { case_id: String, justice_id: String },
    #[error("case {0:?} is defined more than once")]
    DuplicateCase(String),
    #[error("case {case_id:?}: expected utterance index {expected}, found {found}")]
    IndexGap {
        case_id: String,
        expected: usize,
        found: usize,
    },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn malformed(line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRecord {
        line,
        reason: reason.into(),
    }
}

fn required_str<'a>(obj: &'a Map<String, Value>, key: &str, line: usize) -> Result<&'a str, CorpusError> {
    match obj.get(key) {
        None => Err(malformed(line, format!("missing {key:?}"))),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(malformed(line, format!("{key:?} must be a string"))),
    }
}

fn side_value(v: &Value, key: &str, line: usize) -> Result<Side, CorpusError> {
    v.as_str()
        .and_then(Side::parse)
        .ok_or_else(|| malformed(line, format!("{key:?} must be \"petitioner\" or \"respondent\", got {v}")))
}

/// Parses one record line. `line_no` is only used for error locations.
pub fn parse_record(line: &str, line_no: usize) -> Result<Record, CorpusError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| malformed(line_no, format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed(line_no, "record must be a JSON object"))?;

    match required_str(obj, "kind", line_no)? {
        "case" => {
            let case_id = required_str(obj, "case", line_no)?.to_string();
            let winner = side_value(
                obj.get("winner").ok_or_else(|| malformed(line_no, "missing \"winner\""))?,
                "winner",
                line_no,
            )?;
            let votes = obj
                .get("votes")
                .ok_or_else(|| malformed(line_no, "missing \"votes\""))?
                .as_object()
                .ok_or_else(|| malformed(line_no, "\"votes\" must be an object"))?;
            let mut justice_votes = BTreeMap::new();
            for (justice, side) in votes {
                justice_votes.insert(justice.clone(), side_value(side, "votes", line_no)?);
            }
            Ok(Record::Case(CaseMeta {
                case_id,
                winner,
                justice_votes,
            }))
        }
        "utt" => {
            let case_id = required_str(obj, "case", line_no)?.to_string();
            let utterance_index = match obj.get("idx") {
                None => return Err(malformed(line_no, "missing \"idx\"")),
                Some(v) => v
                    .as_u64()
                    .ok_or_else(|| malformed(line_no, format!("\"idx\" must be a non-negative integer, got {v}")))?
                    as usize,
            };
            let speaker_id = required_str(obj, "speaker", line_no)?.to_string();
            let speaker = match required_str(obj, "sk", line_no)? {
                "justice" => {
                    if obj.contains_key("side") {
                        return Err(malformed(line_no, "justice records carry \"addr\", not \"side\""));
                    }
                    let addressee = match obj.get("addr") {
                        None => return Err(malformed(line_no, "missing \"addr\"")),
                        Some(Value::Null) => None,
                        Some(v) => Some(side_value(v, "addr", line_no)?),
                    };
                    Speaker::Justice { addressee }
                }
                "lawyer" => {
                    if obj.contains_key("addr") {
                        return Err(malformed(line_no, "lawyer records carry \"side\", not \"addr\""));
                    }
                    let side = side_value(
                        obj.get("side").ok_or_else(|| malformed(line_no, "missing \"side\""))?,
                        "side",
                        line_no,
                    )?;
                    Speaker::Lawyer { side }
                }
                other => {
                    return Err(malformed(
                        line_no,
                        format!("\"sk\" must be \"justice\" or \"lawyer\", got {other:?}"),
                    ))
                }
            };
            let text = required_str(obj, "text", line_no)?.to_string();
            let pretagged = match obj.get("tagged") {
                None | Some(Value::Null) => None,
                Some(v) => Some(parse_pretagged(v, line_no)?),
            };
            let sentences = match &pretagged {
                Some(tagged) => tagged
                    .iter()
                    .map(|s| s.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" "))
                    .collect(),
                None => sentence_split(&text),
            };
            Ok(Record::Utterance(Utterance {
                case_id,
                utterance_index,
                speaker_id,
                speaker,
                text,
                sentences,
                pretagged,
            }))
        }
        other => Err(malformed(line_no, format!("unknown record kind {other:?}"))),
    }
}

fn parse_pretagged(v: &Value, line_no: usize) -> Result<Vec<PretaggedSentence>, CorpusError> {
    let bad = || malformed(line_no, "\"tagged\" must be a list of sentences of [surface, TAG] pairs");
    let sentences = v.as_array().ok_or_else(bad)?;
    sentences
        .iter()
        .map(|s| {
            s.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|pair| {
                    let pair = pair.as_array().filter(|p| p.len() == 2).ok_or_else(bad)?;
                    let surface = pair[0].as_str().filter(|s| !s.is_empty()).ok_or_else(bad)?;
                    let tag = pair[1]
                        .as_str()
                        .and_then(|t| t.parse::<PosTag>().ok())
                        .ok_or_else(|| malformed(line_no, format!("unknown tag {}", pair[1])))?;
                    if surface.chars().any(char::is_whitespace) {
                        return Err(malformed(line_no, "pretagged tokens may not contain whitespace"));
                    }
                    Ok((surface.to_string(), tag))
                })
                .collect()
        })
        .collect()
}

/// Renders a record in the canonical line format. Keys come out sorted.
pub fn serialize_record(record: &Record) -> String {
    let mut obj = Map::new();
    match record {
        Record::Case(c) => {
            obj.insert("kind".into(), "case".into());
            obj.insert("case".into(), c.case_id.clone().into());
            obj.insert("winner".into(), c.winner.as_str().into());
            let votes: Map<String, Value> = c
                .justice_votes
                .iter()
                .map(|(j, s)| (j.clone(), Value::from(s.as_str())))
                .collect();
            obj.insert("votes".into(), Value::Object(votes));
        }
        Record::Utterance(u) => {
            obj.insert("kind".into(), "utt".into());
            obj.insert("case".into(), u.case_id.clone().into());
            obj.insert("idx".into(), u.utterance_index.into());
            obj.insert("speaker".into(), u.speaker_id.clone().into());
            match u.speaker {
                Speaker::Justice { addressee } => {
                    obj.insert("sk".into(), "justice".into());
                    obj.insert(
                        "addr".into(),
                        addressee.map_or(Value::Null, |s| s.as_str().into()),
                    );
                }
                Speaker::Lawyer { side } => {
                    obj.insert("sk".into(), "lawyer".into());
                    obj.insert("side".into(), side.as_str().into());
                }
            }
            obj.insert("text".into(), u.text.clone().into());
            if let Some(tagged) = &u.pretagged {
                let v: Vec<Value> = tagged
                    .iter()
                    .map(|s| {
                        Value::Array(
                            s.iter()
                                .map(|(w, t)| Value::Array(vec![w.clone().into(), t.as_str().into()]))
                                .collect(),
                        )
                    })
                    .collect();
                obj.insert("tagged".into(), Value::Array(v));
            }
        }
    }
    Value::Object(obj).to_string()
}

/// Parses record text (the content of a corpus file).
pub fn parse_corpus_str(content: &str) -> Result<Corpus, CorpusError> {
    let lines: Vec<(usize, &str)> = content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    // Parsing is independent per line; assembly below sorts, so the result
    // does not depend on scheduling.
    let records = lines
        .par_iter()
        .map(|(no, l)| parse_record(l, *no))
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::from_records(records)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let content = fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let corpus = parse_corpus_str(&content)?;
    let d = corpus.diagnostics();
    log::info!(
        "loaded {} cases, {} utterances ({} justice, {} lawyer); exchanges counted as utterances",
        d.cases,
        d.utterances,
        d.justice_utterances,
        d.lawyer_utterances
    );
    Ok(corpus)
}

/// Distinct case ids referenced by a set of utterance references.
pub fn distinct_cases<'a>(refs: impl IntoIterator<Item = &'a UttRef>) -> usize {
    refs.into_iter()
        .map(|r| r.case_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_justice_utterance() {
        let line = r#"{"kind":"utt","case":"c1","idx":0,"speaker":"J7","sk":"justice","addr":"petitioner","text":"Why?"}"#;
        let Record::Utterance(u) = parse_record(line, 1).unwrap() else {
            panic!("expected utterance");
        };
        assert_eq!(u.case_id, "c1");
        assert_eq!(u.utterance_index, 0);
        assert_eq!(u.speaker_id, "J7");
        assert_eq!(
            u.speaker,
            Speaker::Justice {
                addressee: Some(Side::Petitioner)
            }
        );
        assert_eq!(u.sentences, vec!["Why?"]);
    }

    #[test]
    fn parses_case_record() {
        let line = r#"{"kind":"case","case":"c1","winner":"respondent","votes":{"J7":"petitioner"}}"#;
        let Record::Case(c) = parse_record(line, 1).unwrap() else {
            panic!("expected case");
        };
        assert_eq!(c.winner, Side::Respondent);
        assert_eq!(c.justice_votes["J7"], Side::Petitioner);
    }

    #[test]
    fn missing_idx_is_malformed() {
        let err = parse_record(r#"{"kind":"utt","case":"c1"}"#, 4).unwrap_err();
        match err {
            CorpusError::MalformedRecord { line, reason } => {
                assert_eq!(line, 4);
                assert!(reason.contains("\"idx\""), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_enums_and_indices() {
        let bad = [
            r#"{"kind":"case","case":"c1","winner":"nobody","votes":{}}"#,
            r#"{"kind":"utt","case":"c1","idx":-1,"speaker":"a","sk":"lawyer","side":"petitioner","text":""}"#,
            r#"{"kind":"utt","case":"c1","idx":"0","speaker":"a","sk":"lawyer","side":"petitioner","text":""}"#,
            r#"{"kind":"utt","case":"c1","idx":0,"speaker":"a","sk":"clerk","text":""}"#,
            r#"{"kind":"utt","case":"c1","idx":0,"speaker":"a","sk":"lawyer","addr":"petitioner","text":""}"#,
            r#"{"kind":"utt","case":"c1","idx":0,"speaker":"a","sk":"justice","text":""}"#,
            r#"{"kind":"verdict"}"#,
            r#"not json"#,
        ];
        for line in bad {
            assert!(
                matches!(parse_record(line, 1), Err(CorpusError::MalformedRecord { .. })),
                "{line}"
            );
        }
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let line = r#"{"kind":"case","case":"c1","winner":"petitioner","votes":{},"docket":"04-1350"}"#;
        assert!(parse_record(line, 1).is_ok());
    }

    #[test]
    fn null_addressee_is_kept_as_unknown() {
        let line = r#"{"kind":"utt","case":"c1","idx":0,"speaker":"J1","sk":"justice","addr":null,"text":"Hm."}"#;
        let Record::Utterance(u) = parse_record(line, 1).unwrap() else {
            panic!()
        };
        assert_eq!(u.speaker, Speaker::Justice { addressee: None });
    }

    #[test]
    fn pretagged_sentences_bypass_splitting() {
        let line = r#"{"kind":"utt","case":"c1","idx":0,"speaker":"L","sk":"lawyer","side":"respondent","text":"ignored. text.","tagged":[[["state","NOUN"],["power","NOUN"]]]}"#;
        let Record::Utterance(u) = parse_record(line, 1).unwrap() else {
            panic!()
        };
        assert_eq!(u.sentences, vec!["state power"]);
        assert_eq!(u.pretagged.unwrap()[0][1], ("power".to_string(), PosTag::Noun));
    }

    const TWO_CASES: &str = r#"
# two cases, six utterances
{"kind":"case","case":"c1","winner":"petitioner","votes":{"J1":"petitioner"}}
{"kind":"utt","case":"c1","idx":1,"speaker":"L1","sk":"lawyer","side":"petitioner","text":"Yes."}
{"kind":"utt","case":"c1","idx":0,"speaker":"J1","sk":"justice","addr":"petitioner","text":"Why?"}
{"kind":"utt","case":"c2","idx":0,"speaker":"J2","sk":"justice","addr":"respondent","text":"Go on."}
{"kind":"case","case":"c2","winner":"respondent","votes":{"J2":"respondent"}}
{"kind":"utt","case":"c2","idx":1,"speaker":"L2","sk":"lawyer","side":"respondent","text":"Thank you."}
{"kind":"utt","case":"c1","idx":2,"speaker":"J1","sk":"justice","addr":"respondent","text":"And you?"}
{"kind":"utt","case":"c2","idx":2,"speaker":"L2","sk":"lawyer","side":"respondent","text":"Indeed."}
"#;

    #[test]
    fn loads_counts() {
        let c = parse_corpus_str(TWO_CASES).unwrap();
        assert_eq!(c.cases.len(), 2);
        assert_eq!(c.utterances.len(), 6);
        let d = c.diagnostics();
        assert_eq!((d.justice_utterances, d.lawyer_utterances), (3, 3));
        assert_eq!(c.utterances[0].utterance_index, 0);
        assert_eq!(c.utterances[0].case_id, "c1");
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let c = parse_corpus_str("").unwrap();
        assert!(c.cases.is_empty() && c.utterances.is_empty());
    }

    #[test]
    fn dangling_case() {
        let src = r#"{"kind":"utt","case":"c9","idx":0,"speaker":"L","sk":"lawyer","side":"petitioner","text":"x"}"#;
        assert_eq!(
            parse_corpus_str(src).unwrap_err(),
            CorpusError::DanglingCase("c9".into())
        );
    }

    #[test]
    fn missing_vote() {
        let src = r#"{"kind":"case","case":"c1","winner":"petitioner","votes":{}}
{"kind":"utt","case":"c1","idx":0,"speaker":"J3","sk":"justice","addr":"petitioner","text":"x"}"#;
        assert!(matches!(
            parse_corpus_str(src),
            Err(CorpusError::MissingVote { .. })
        ));
    }

    #[test]
    fn index_gaps_and_duplicates() {
        let gap = r#"{"kind":"case","case":"c1","winner":"petitioner","votes":{}}
{"kind":"utt","case":"c1","idx":1,"speaker":"L","sk":"lawyer","side":"petitioner","text":"x"}"#;
        assert!(matches!(parse_corpus_str(gap), Err(CorpusError::IndexGap { .. })));
        let dup = r#"{"kind":"case","case":"c1","winner":"petitioner","votes":{}}
{"kind":"utt","case":"c1","idx":0,"speaker":"L","sk":"lawyer","side":"petitioner","text":"x"}
{"kind":"utt","case":"c1","idx":0,"speaker":"L","sk":"lawyer","side":"petitioner","text":"y"}"#;
        assert!(matches!(parse_corpus_str(dup), Err(CorpusError::IndexGap { .. })));
    }

    #[test]
    fn malformed_line_numbers_count_comments() {
        let src = "# header\n\n{\"kind\":\"utt\"}";
        assert!(matches!(
            parse_corpus_str(src),
            Err(CorpusError::MalformedRecord { line: 3, .. })
        ));
    }

    #[test]
    fn lookup_by_reference() {
        let c = parse_corpus_str(TWO_CASES).unwrap();
        let r = UttRef {
            case_id: "c2".into(),
            utterance_index: 1,
        };
        assert_eq!(c.get(&r).unwrap().text, "Thank you.");
    }
}
