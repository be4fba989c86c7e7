//! Synthetic corpora with planted relation counts.
//!
//! Every relation is rendered from a fixed sentence template that the default
//! pattern pack matches exactly once, and speaker metadata is chosen so the
//! utterance lands in the requested pools. The expected contingency table
//! is therefore known before the pipeline runs.

use std::collections::BTreeMap;
use std::io::Read;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CaseMeta, Corpus, Record, Side, Speaker, Utterance};
use crate::grouping::{Kappa, Outcome};
use crate::relext::RelationType;
use crate::stats::ContingencyTable;

const NOUNS: &[&str] = &[
    "statute", "claim", "trust", "clause", "test", "program", "contract", "policy", "remedy",
    "record", "agency", "employer", "tax", "fee", "doctrine", "warrant", "license", "tariff",
    "treaty", "deadline", "budget", "county", "district", "union", "board", "market", "bank",
    "patent", "vehicle", "property", "hearing", "lease", "mortgage", "pension", "charter",
];

const FILLERS: &[&str] = &["Thank you.", "I see.", "Go on.", "Yes."];

fn template(relation: RelationType, left: &str, right: &str) -> String {
    match relation {
        RelationType::IsA => format!("The {left} is a {right}."),
        RelationType::PartOf => format!("It is the {left} of the {right}."),
        RelationType::UsedBy => format!("We rejected the {left} proposed by the {right}."),
        RelationType::UsedFor => format!("They need a {left} for the {right}."),
        RelationType::UsedIn => format!("The {left} used in the {right} was clear."),
        RelationType::UsedOver => format!("The {left} over the {right} has ebbed."),
        RelationType::UsedWith => format!("The {left} complied with the {right}."),
    }
}

/// Where a planted relation is spoken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Placement {
    /// A Justice turn, counted in exactly one pool.
    Justice(Kappa),
    /// A lawyer turn, counted in A and C on a win or in B and D on a loss.
    Lawyer(Outcome),
}

impl Placement {
    pub fn kappas(self) -> Vec<Kappa> {
        match self {
            Placement::Justice(k) => vec![k],
            Placement::Lawyer(Outcome::Win) => vec![Kappa::A, Kappa::C],
            Placement::Lawyer(Outcome::Lose) => vec![Kappa::B, Kappa::D],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthEntry {
    pub relation: RelationType,
    pub placement: Placement,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SynthSpec {
    pub entries: Vec<SynthEntry>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("row {row}: pools {pools:?} cannot be produced by one utterance")]
    InfeasibleSpec { row: usize, pools: String },
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("spec file: {0}")]
    Csv(#[from] csv::Error),
}

/// Resolves a pool label: one letter for a Justice turn, `AC`/`BD` (any order) for a lawyer turn.
pub fn placement_for(pools: &str) -> Option<Placement> {
    let mut letters: Vec<Kappa> = pools
        .chars()
        .map(|c| c.to_string().parse().ok())
        .collect::<Option<_>>()?;
    letters.sort();
    match letters.as_slice() {
        [k] => Some(Placement::Justice(*k)),
        [Kappa::A, Kappa::C] => Some(Placement::Lawyer(Outcome::Win)),
        [Kappa::B, Kappa::D] => Some(Placement::Lawyer(Outcome::Lose)),
        _ => None,
    }
}

impl SynthSpec {
    /// Reads `relation,kappa,count` rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<SynthSpec, SynthError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            if rec.len() != 3 {
                return Err(SynthError::BadRow {
                    row,
                    message: "expected relation,kappa,count".into(),
                });
            }
            let relation = rec[0]
                .parse()
                .map_err(|message| SynthError::BadRow { row, message })?;
            let placement = placement_for(&rec[1]).ok_or_else(|| SynthError::InfeasibleSpec {
                row,
                pools: rec[1].to_string(),
            })?;
            let count = rec[2].parse().map_err(|_| SynthError::BadRow {
                row,
                message: format!("count must be a non-negative integer, got {:?}", &rec[2]),
            })?;
            entries.push(SynthEntry {
                relation,
                placement,
                count,
            });
        }
        Ok(SynthSpec { entries })
    }

    pub fn expected_table(&self) -> ContingencyTable {
        let mut t = ContingencyTable::new();
        for e in &self.entries {
            for k in e.placement.kappas() {
                t.add(e.relation, k, e.count);
            }
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub expected: ContingencyTable,
}

struct Turn {
    placement: Placement,
    sentences: Vec<String>,
}

fn speaker_for(placement: Placement, winner: Side) -> (String, Speaker) {
    let loser = winner.opposite();
    let justice = |vote: Side, addr: Side| {
        let id = match vote {
            Side::Petitioner => "J-pe",
            Side::Respondent => "J-re",
        };
        (
            id.to_string(),
            Speaker::Justice {
                addressee: Some(addr),
            },
        )
    };
    let lawyer = |side: Side| {
        let id = match side {
            Side::Petitioner => "L-pe",
            Side::Respondent => "L-re",
        };
        (id.to_string(), Speaker::Lawyer { side })
    };
    match placement {
        Placement::Justice(Kappa::A) => justice(winner, winner),
        Placement::Justice(Kappa::B) => justice(loser, loser),
        Placement::Justice(Kappa::C) => justice(loser, winner),
        Placement::Justice(Kappa::D) => justice(winner, loser),
        Placement::Lawyer(Outcome::Win) => lawyer(winner),
        Placement::Lawyer(Outcome::Lose) => lawyer(loser),
    }
}

/// Generates a corpus realizing `spec`, deterministic for a given seed.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> SynthOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut by_placement: BTreeMap<Placement, Vec<RelationType>> = BTreeMap::new();
    for e in &spec.entries {
        by_placement
            .entry(e.placement)
            .or_default()
            .extend(std::iter::repeat_n(e.relation, e.count as usize));
    }

    let mut turns = Vec::new();
    for (placement, mut relations) in by_placement {
        relations.shuffle(&mut rng);
        let mut rest = relations.as_slice();
        while !rest.is_empty() {
            let take = rng.random_range(1..=3usize).min(rest.len());
            let mut sentences: Vec<String> = rest[..take]
                .iter()
                .map(|&r| {
                    let picked: Vec<&str> = NOUNS.choose_multiple(&mut rng, 2).copied().collect();
                    template(r, picked[0], picked[1])
                })
                .collect();
            if rng.random_bool(0.2) {
                let at = rng.random_range(0..=sentences.len());
                sentences.insert(at, FILLERS.choose(&mut rng).unwrap().to_string());
            }
            turns.push(Turn {
                placement,
                sentences,
            });
            rest = &rest[take..];
        }
    }
    turns.shuffle(&mut rng);

    let case_count = (turns.len() / 4).max(1);
    let winners: Vec<Side> = (0..case_count)
        .map(|_| {
            if rng.random_bool(0.5) {
                Side::Petitioner
            } else {
                Side::Respondent
            }
        })
        .collect();
    let mut records: Vec<Record> = winners
        .iter()
        .enumerate()
        .map(|(i, &winner)| {
            Record::Case(CaseMeta {
                case_id: format!("synth-{i:04}"),
                winner,
                justice_votes: [
                    ("J-pe".to_string(), Side::Petitioner),
                    ("J-re".to_string(), Side::Respondent),
                ]
                .into(),
            })
        })
        .collect();

    let mut next_index = vec![0usize; case_count];
    for turn in turns {
        let case = rng.random_range(0..case_count);
        let (speaker_id, speaker) = speaker_for(turn.placement, winners[case]);
        let text = turn.sentences.join(" ");
        records.push(Record::Utterance(Utterance {
            case_id: format!("synth-{case:04}"),
            utterance_index: next_index[case],
            speaker_id,
            speaker,
            sentences: crate::corpus::sentence_split(&text),
            text,
            pretagged: None,
        }));
        next_index[case] += 1;
    }

    let corpus = if spec.entries.iter().all(|e| e.count == 0) {
        Corpus::default()
    } else {
        Corpus::from_records(records).expect("generated records satisfy corpus invariants")
    };
    SynthOutput {
        corpus,
        expected: spec.expected_table(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placements() {
        assert_eq!(placement_for("A"), Some(Placement::Justice(Kappa::A)));
        assert_eq!(placement_for("CA"), Some(Placement::Lawyer(Outcome::Win)));
        assert_eq!(placement_for("BD"), Some(Placement::Lawyer(Outcome::Lose)));
        assert_eq!(placement_for("AB"), None);
        assert_eq!(placement_for("AD"), None);
        assert_eq!(placement_for(""), None);
        assert_eq!(placement_for("E"), None);
    }

    #[test]
    fn reads_spec_and_rejects_infeasible_rows() {
        let spec = SynthSpec::read_csv("relation,kappa,count\nIsA,A,10\nUsedFor,AC,2\n".as_bytes()).unwrap();
        let t = spec.expected_table();
        assert_eq!(t.get(RelationType::IsA, Kappa::A), 10);
        assert_eq!(t.get(RelationType::UsedFor, Kappa::A), 2);
        assert_eq!(t.get(RelationType::UsedFor, Kappa::C), 2);
        assert_eq!(t.total(), 14);

        let err = SynthSpec::read_csv("relation,kappa,count\nIsA,AB,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SynthError::InfeasibleSpec { row: 2, .. }));
        assert!(SynthSpec::read_csv("relation,kappa,count\nIsA,A,-3\n".as_bytes()).is_err());
        assert!(SynthSpec::read_csv("relation,kappa,count\nIsSame,A,3\n".as_bytes()).is_err());
    }

    #[test]
    fn all_zero_spec_gives_empty_corpus() {
        let spec = SynthSpec {
            entries: vec![SynthEntry {
                relation: RelationType::IsA,
                placement: Placement::Justice(Kappa::A),
                count: 0,
            }],
        };
        let out = synth_corpus(&spec, 1);
        assert!(out.corpus.utterances.is_empty());
        assert_eq!(out.expected.total(), 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::read_csv("relation,kappa,count\nIsA,A,5\nUsedIn,BD,4\n".as_bytes()).unwrap();
        assert_eq!(synth_corpus(&spec, 9).corpus, synth_corpus(&spec, 9).corpus);
        assert_ne!(synth_corpus(&spec, 9).corpus, synth_corpus(&spec, 10).corpus);
    }

    #[test]
    fn templates_split_into_one_sentence_each() {
        for r in RelationType::ALL {
            let s = template(r, "statute", "claim");
            assert_eq!(crate::corpus::sentence_split(&s), vec![s.clone()]);
        }
    }
}
