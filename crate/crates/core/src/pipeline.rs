//! Stage wiring and run bundles.
//!
//! A run writes, under the output directory:
//!
//! ```text
//! config.json
//! ingest/summary.csv
//! partition/pools.csv
//! partition/diagnostics.csv
//! extract/relations.csv
//! report/mi.csv
//! report/marginals.csv
//! report/mi.svg
//! MANIFEST.sha256
//! ```
//!
//! Every file except the manifest is listed in it with its SHA-256 digest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunker::{Lexicon, LexiconError, RuleTagger, Tagger};
use crate::corpus::{load_corpus, Corpus, CorpusError, UttRef};
use crate::grouping::{partition, GroupingError, Kappa, Partition};
use crate::relext::{extract_utterance, PatternError, PatternSet, RelationInstance};
use crate::report;
use crate::stats::{pmi_matrix, ContingencyTable, LogBase, PmiConfig, PmiMatrix, StatsError};

/// Utterances analyzed per parallel batch before results are flushed.
const BATCH: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    /// `None` selects the bundled default pack.
    pub pattern_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub smoothing: f64,
    pub log_base: LogBase,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// On-disk form of [`PipelineConfig`]; every key is optional so command-line
/// flags can fill the gaps.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub smoothing: Option<f64>,
    pub log_base: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("ingest: {0}")]
    Ingest(#[from] CorpusError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("patterns: {0}")]
    Patterns(#[from] PatternError),
    #[error("partition: {0}")]
    Partition(#[from] GroupingError),
    #[error("pmi: {0}")]
    Stats(#[from] StatsError),
    #[error("{stage}: {path}: {source}")]
    Output {
        stage: &'static str,
        path: String,
        source: std::io::Error,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl PipelineError {
    /// Process exit code: 2 for input problems, 3 for pattern problems,
    /// 4 for broken internal invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Ingest(_)
            | PipelineError::Lexicon(_)
            | PipelineError::Output { .. } => 2,
            PipelineError::Stats(StatsError::BadSmoothing) => 2,
            PipelineError::Patterns(_) => 3,
            PipelineError::Partition(_) | PipelineError::Stats(_) | PipelineError::Invariant(_) => 4,
        }
    }
}

impl PipelineConfig {
    /// Checks input paths and numeric settings before any stage runs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !self.corpus_path.is_file() {
            return Err(PipelineError::Ingest(CorpusError::Io {
                path: self.corpus_path.display().to_string(),
                message: "no such file".into(),
            }));
        }
        if let Some(p) = &self.pattern_path {
            if !p.is_file() {
                return Err(PipelineError::Patterns(PatternError::Io {
                    path: p.display().to_string(),
                    message: "no such file".into(),
                }));
            }
        }
        if let Some(p) = &self.lexicon_path {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("lexicon {}: no such file", p.display())));
            }
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(PipelineError::Stats(StatsError::BadSmoothing));
        }
        Ok(())
    }

    pub fn pmi_config(&self) -> PmiConfig {
        PmiConfig {
            smoothing: self.smoothing,
            log_base: self.log_base,
        }
    }

    /// Provenance record for the bundle. Thread count and output location are
    /// left out so bundles compare byte for byte across both.
    pub fn to_json(&self, corpus_digest: &str, patterns_digest: &str) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or(serde_json::Value::Null, |p| p.display().to_string().into())
        };
        let v = serde_json::json!({
            "corpus": self.corpus_path.display().to_string(),
            "corpus_sha256": corpus_digest,
            "patterns": path(&self.pattern_path),
            "patterns_sha256": patterns_digest,
            "lexicon": path(&self.lexicon_path),
            "smoothing": self.smoothing,
            "log_base": self.log_base.as_str(),
            "seed": self.seed,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("json values always serialize");
        s.push('\n');
        s
    }
}

/// Sizes the global worker pool. Call once, before any stage runs.
pub fn configure_threads(n: usize) -> Result<(), PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Config(format!("threads: {e}")))
}

pub fn load_patterns(path: Option<&Path>) -> Result<PatternSet, PatternError> {
    match path {
        Some(p) => PatternSet::load(p),
        None => Ok(PatternSet::default_pack()),
    }
}

pub fn load_tagger(lexicon: Option<&Path>) -> Result<RuleTagger, LexiconError> {
    match lexicon {
        Some(p) => Ok(RuleTagger::with_user_lexicon(Lexicon::load(p)?)),
        None => Ok(RuleTagger::default()),
    }
}

/// Utterances in any of the given pools, each once, in corpus order.
pub fn pool_union(p: &Partition, kappas: &[Kappa]) -> Vec<UttRef> {
    let mut refs: Vec<UttRef> = kappas.iter().flat_map(|k| p.pool(*k).iter().cloned()).collect();
    refs.sort();
    refs.dedup();
    refs
}

/// Extracts from `refs` in parallel batches and hands each utterance's
/// instances to `sink` in order, so the output never depends on scheduling.
pub fn stream_extract<F>(
    corpus: &Corpus,
    refs: &[UttRef],
    patterns: &PatternSet,
    tagger: &dyn Tagger,
    mut sink: F,
) -> Result<(), PipelineError>
where
    F: FnMut(&UttRef, &[RelationInstance]) -> Result<(), PipelineError>,
{
    for batch in refs.chunks(BATCH) {
        let results: Vec<Vec<RelationInstance>> = batch
            .par_iter()
            .map(|r| {
                corpus
                    .get(r)
                    .map(|u| extract_utterance(u, patterns, tagger))
                    .ok_or_else(|| PipelineError::Invariant(format!("pool references unknown utterance {r:?}")))
            })
            .collect::<Result<_, _>>()?;
        for (r, instances) in batch.iter().zip(&results) {
            sink(r, instances)?;
        }
    }
    Ok(())
}

/// Extracts from every pooled utterance and counts each instance once per
/// pool its utterance belongs to.
pub fn tabulate<F>(
    corpus: &Corpus,
    part: &Partition,
    patterns: &PatternSet,
    tagger: &dyn Tagger,
    mut sink: F,
) -> Result<ContingencyTable, PipelineError>
where
    F: FnMut(&[RelationInstance]) -> Result<(), PipelineError>,
{
    let memberships = part.memberships();
    let refs = pool_union(part, &Kappa::ALL);
    let mut table = ContingencyTable::new();
    stream_extract(corpus, &refs, patterns, tagger, |r, instances| {
        let kappas = memberships
            .get(r)
            .ok_or_else(|| PipelineError::Invariant(format!("{r:?} has no pool")))?;
        for inst in instances {
            for k in kappas {
                table.add(inst.relation, *k, 1);
            }
        }
        sink(instances)
    })?;
    Ok(table)
}

/// MI for a non-empty table; `None` (with a warning) for an empty one.
pub fn score_table(table: &ContingencyTable, config: PmiConfig) -> Result<Option<PmiMatrix>, PipelineError> {
    if table.total() == 0 {
        log::warn!("no relation instances were counted; MI reports are empty");
        return Ok(None);
    }
    Ok(Some(pmi_matrix(table, config)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files under one directory and remembers what was written.
pub struct Bundle {
    root: PathBuf,
    written: Vec<String>,
}

impl Bundle {
    pub fn create(root: &Path) -> Result<Bundle, PipelineError> {
        fs::create_dir_all(root).map_err(|source| PipelineError::Output {
            stage: "output",
            path: root.display().to_string(),
            source,
        })?;
        Ok(Bundle {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Opens `rel` for writing, runs `f`, and records the file.
    pub fn write_with<F>(&mut self, stage: &'static str, rel: &str, f: F) -> Result<(), PipelineError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), PipelineError>,
    {
        let path = self.root.join(rel);
        let io_err = |source| PipelineError::Output {
            stage,
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        f(&mut w)?;
        w.flush().map_err(io_err)?;
        self.written.push(rel.to_string());
        Ok(())
    }

    pub fn write_bytes(&mut self, stage: &'static str, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        self.write_with(stage, rel, |w| {
            w.write_all(bytes).map_err(|source| PipelineError::Output {
                stage,
                path: path.display().to_string(),
                source,
            })
        })
    }

    /// Writes `MANIFEST.sha256` (`<digest>  <path>` lines, sorted by path).
    pub fn finish(mut self) -> Result<PathBuf, PipelineError> {
        self.written.sort();
        self.written.dedup();
        let mut manifest = String::new();
        for rel in &self.written {
            let path = self.root.join(rel);
            let bytes = fs::read(&path).map_err(|source| PipelineError::Output {
                stage: "manifest",
                path: path.display().to_string(),
                source,
            })?;
            manifest.push_str(&format!("{}  {rel}\n", sha256_hex(&bytes)));
        }
        let path = self.root.join("MANIFEST.sha256");
        fs::write(&path, manifest).map_err(|source| PipelineError::Output {
            stage: "manifest",
            path: path.display().to_string(),
            source,
        })?;
        Ok(self.root)
    }
}

/// Maps an io error raised while writing `rel` inside a bundle.
pub fn out_err<'a>(stage: &'static str, rel: &'a str) -> impl Fn(std::io::Error) -> PipelineError + 'a {
    move |source| PipelineError::Output {
        stage,
        path: rel.to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub table: ContingencyTable,
    pub matrix: Option<PmiMatrix>,
    pub instances: usize,
    pub output_dir: PathBuf,
}

/// load → partition → chunk → extract → count → pmi, writing the full bundle.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let corpus_bytes = fs::read(&config.corpus_path).map_err(|e| {
        PipelineError::Ingest(CorpusError::Io {
            path: config.corpus_path.display().to_string(),
            message: e.to_string(),
        })
    })?;
    let patterns_digest = match &config.pattern_path {
        Some(p) => sha256_hex(&fs::read(p).map_err(|e| {
            PipelineError::Patterns(PatternError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        })?),
        None => sha256_hex(PatternSet::default_pack_source().as_bytes()),
    };
    let patterns = load_patterns(config.pattern_path.as_deref())?;
    let tagger = load_tagger(config.lexicon_path.as_deref())?;
    let corpus = load_corpus(&config.corpus_path)?;
    if corpus.utterances.is_empty() {
        log::warn!("corpus {} has no utterances", config.corpus_path.display());
    }

    let mut bundle = Bundle::create(&config.output_dir)?;
    bundle.write_bytes(
        "config",
        "config.json",
        config.to_json(&sha256_hex(&corpus_bytes), &patterns_digest).as_bytes(),
    )?;
    let diag = corpus.diagnostics();
    bundle.write_with("ingest", "ingest/summary.csv", |w| {
        report::write_ingest_summary(w, &diag).map_err(out_err("ingest", "ingest/summary.csv"))
    })?;

    let part = partition(&corpus)?;
    bundle.write_with("partition", "partition/pools.csv", |w| {
        report::write_pools(w, &part).map_err(out_err("partition", "partition/pools.csv"))
    })?;
    bundle.write_with("partition", "partition/diagnostics.csv", |w| {
        report::write_pool_diagnostics(w, &part).map_err(out_err("partition", "partition/diagnostics.csv"))
    })?;

    let mut table = ContingencyTable::new();
    let mut instances = 0;
    bundle.write_with("extract", "extract/relations.csv", |w| {
        let err = out_err("extract", "extract/relations.csv");
        let mut rows = report::RelationWriter::new(w).map_err(&err)?;
        table = tabulate(&corpus, &part, &patterns, &tagger, |batch| {
            instances += batch.len();
            rows.write(batch).map_err(&err)
        })?;
        rows.finish().map_err(&err)
    })?;
    log::info!("extracted {instances} relation instances; N = {}", table.total());

    let matrix = score_table(&table, config.pmi_config())?;
    bundle.write_with("report", "report/mi.csv", |w| {
        report::write_mi(w, &table, matrix.as_ref()).map_err(out_err("report", "report/mi.csv"))
    })?;
    bundle.write_with("report", "report/marginals.csv", |w| {
        report::write_marginals(w, &table).map_err(out_err("report", "report/marginals.csv"))
    })?;
    if let Some(m) = &matrix {
        bundle.write_bytes("report", "report/mi.svg", report::render_mi_chart(m).as_bytes())?;
    }
    let output_dir = bundle.finish()?;
    Ok(RunSummary {
        table,
        matrix,
        instances,
        output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relext::RelationType;

    const GOLDEN: &str = r#"{"kind":"case","case":"g","winner":"petitioner","votes":{"j1":"petitioner"}}
{"kind":"utt","case":"g","idx":0,"speaker":"j1","sk":"justice","addr":"petitioner","text":"The haulers are required today to comply with the program."}
{"kind":"utt","case":"g","idx":1,"speaker":"c1","sk":"lawyer","side":"respondent","text":"For 124 years, as state_power over alcohol has ebbed and flowed."}
"#;

    fn config(dir: &Path, corpus: &str) -> PipelineConfig {
        let corpus_path = dir.join("corpus.jsonl");
        fs::write(&corpus_path, corpus).unwrap();
        PipelineConfig {
            corpus_path,
            pattern_path: None,
            lexicon_path: None,
            smoothing: 0.0,
            log_base: LogBase::E,
            seed: 1,
            output_dir: dir.join("out"),
        }
    }

    #[test]
    fn writes_a_full_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), GOLDEN);
        let s = run_pipeline(&cfg).unwrap();
        assert_eq!(s.instances, 2);
        assert_eq!(s.table.get(RelationType::UsedWith, Kappa::A), 1);
        // lawyer for the losing side: pools B and D
        assert_eq!(s.table.get(RelationType::UsedOver, Kappa::B), 1);
        assert_eq!(s.table.get(RelationType::UsedOver, Kappa::D), 1);
        assert_eq!(s.table.total(), 3);
        let mi = fs::read_to_string(cfg.output_dir.join("report/mi.csv")).unwrap();
        assert_eq!(mi.lines().count(), 29);
        let manifest = fs::read_to_string(cfg.output_dir.join("MANIFEST.sha256")).unwrap();
        assert_eq!(manifest.lines().count(), 8);
        let svg = fs::read(cfg.output_dir.join("report/mi.svg")).unwrap();
        assert!(manifest.contains(&format!("{}  report/mi.svg", sha256_hex(&svg))));
    }

    #[test]
    fn empty_corpus_gives_empty_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "# nothing here\n");
        let s = run_pipeline(&cfg).unwrap();
        assert!(s.matrix.is_none());
        let mi = fs::read_to_string(cfg.output_dir.join("report/mi.csv")).unwrap();
        assert_eq!(mi, "relation,kappa,count,mi\n");
        assert!(!cfg.output_dir.join("report/mi.svg").exists());
    }

    #[test]
    fn missing_pattern_file_is_a_pattern_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), GOLDEN);
        cfg.pattern_path = Some(dir.path().join("nope.patterns"));
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(!cfg.output_dir.exists());
    }

    #[test]
    fn bad_pattern_file_is_a_pattern_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), GOLDEN);
        let p = dir.path().join("bad.patterns");
        fs::write(&p, "IsA : NP(L) \"is\"\n").unwrap();
        cfg.pattern_path = Some(p);
        assert_eq!(run_pipeline(&cfg).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn malformed_corpus_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "{\"kind\":\"utt\"}\n");
        assert_eq!(run_pipeline(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn config_json_ignores_output_location() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = config(dir.path(), GOLDEN);
        let first = a.to_json("x", "y");
        a.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.to_json("x", "y"), first);
        assert!(!first.contains("output"));
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"corpus":"c.jsonl","smoothing":0.5}"#).is_ok());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"corpus":"c.jsonl","threads":4}"#).is_err());
    }
}
