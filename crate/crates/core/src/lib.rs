//! Relation extraction over oral-argument transcripts and the association
//! between relation types and conversation groups.
//!
//! The pipeline runs in stages: [`corpus`] loads records, [`grouping`]
//! partitions utterances into the four κ pools, [`chunker`] and [`relext`]
//! find relation instances, and [`stats`] scores each relation/pool pair by
//! pointwise mutual information. [`harness`] holds evaluation tooling and
//! [`pipeline`] wires the stages into reproducible run bundles.

pub mod chunker;
pub mod corpus;
pub mod grouping;
pub mod harness;
pub mod pipeline;
pub mod relext;
pub mod report;
pub mod stats;

pub use chunker::{analyze, AnalyzedSentence, Lexicon, NounPhrase, PosTag, RuleTagger, Tagger};
pub use corpus::{load_corpus, CaseMeta, Corpus, CorpusError, Record, Side, Speaker, UttRef, Utterance};
pub use grouping::{partition, Kappa, Membership, Partition, RoleId};
pub use relext::{extract, PatternError, PatternSet, RelationInstance, RelationType, SurfacePattern};
pub use stats::{pmi, pmi_matrix, ContingencyTable, LogBase, PmiConfig, PmiMatrix, StatsError};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError};
