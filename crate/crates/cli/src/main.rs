use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use courtrel::corpus::{load_corpus, serialize_record, Record};
use courtrel::harness::{read_gold, sample, score, synth_corpus, EvalReport, SampleError, Scores, SynthError, SynthSpec};
use courtrel::pipeline::{
    configure_threads, load_patterns, load_tagger, pool_union, run_pipeline, score_table, sha256_hex, stream_extract,
    tabulate, Bundle, ConfigFile, PipelineConfig, PipelineError,
};
use courtrel::relext::RelationInstance;
use courtrel::report::{self, RelationWriter};
use courtrel::stats::{LogBase, PmiConfig, PmiMatrix};
use courtrel::{partition, Kappa, RelationType};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "courtrel", version, about = "Relation extraction and conversation-group MI for court transcripts")]
struct Cli {
    /// JSON file with default settings (corpus, patterns, lexicon, smoothing, log_base, seed, output_dir).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (for `synth`, the corpus file to write).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Inputs {
    /// Corpus file, one JSON record per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Pattern file; the bundled pack is used when absent.
    #[arg(long)]
    patterns: Option<PathBuf>,
    /// Extra `surface<TAB>tag` lexicon entries.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct Scoring {
    /// Add-ε smoothing applied to every cell; 0 keeps zero cells at -inf.
    #[arg(long)]
    smooth: Option<f64>,
    /// Logarithm base: `e` or `2`.
    #[arg(long)]
    log_base: Option<LogBase>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate a corpus and print summary counts.
    Ingest {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Assign utterances to the four conversation pools.
    Partition {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Extract relation instances from one pool or from all pooled utterances.
    Extract {
        #[command(flatten)]
        inputs: Inputs,
        /// A, B, C, D or all.
        #[arg(long, default_value = "all")]
        pool: String,
    },
    /// Count relations per pool and compute MI.
    Pmi {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        scoring: Scoring,
    },
    /// Score extraction on a seeded sample against gold annotations.
    Eval {
        #[command(flatten)]
        inputs: Inputs,
        /// Gold CSV `case_id,utt,sent,relation,left,right`.
        #[arg(long)]
        gold: PathBuf,
        /// A, B, C, D or all.
        #[arg(long, default_value = "all")]
        pool: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Report the macro average as the headline instead of the micro average.
        #[arg(long = "macro")]
        macro_avg: bool,
    },
    /// Generate a corpus with planted relation counts.
    Synth {
        /// CSV `relation,kappa,count`; kappa is A-D for Justice turns, AC or BD for lawyer turns.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render the MI chart from an `mi.csv`.
    Report {
        /// Table written by `pmi` or `run`.
        #[arg(long)]
        mi: PathBuf,
        #[arg(long)]
        log_base: Option<LogBase>,
    },
    /// Run every stage and write a complete bundle.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Pipeline(e) => e.exit_code() as u8,
            CliError::Input(_) => 2,
        }
    }
}

impl From<SampleError> for CliError {
    fn from(e: SampleError) -> Self {
        CliError::Input(format!("eval: {e}"))
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(format!("synth: {e}"))
    }
}

fn io_input<'a>(what: &str, path: &'a Path) -> impl Fn(io::Error) -> CliError + 'a {
    let what = what.to_string();
    move |e| CliError::Input(format!("{what} {}: {e}", path.display()))
}

fn write_out_err(e: io::Error) -> CliError {
    CliError::Input(format!("writing output: {e}"))
}

/// Settings after merging the config file with command-line flags.
struct Settings {
    file: ConfigFile,
    out: Option<PathBuf>,
}

impl Settings {
    fn load(cli: &Cli) -> Result<Settings, CliError> {
        let file = match &cli.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let out = cli.out.clone().or_else(|| file.output_dir.clone());
        Ok(Settings { file, out })
    }

    fn corpus(&self, i: &Inputs) -> Result<PathBuf, CliError> {
        i.corpus
            .clone()
            .or_else(|| self.file.corpus.clone())
            .ok_or_else(|| CliError::Input("no corpus given (use --corpus or a config file)".into()))
    }

    fn patterns(&self, i: &Inputs) -> Option<PathBuf> {
        i.patterns.clone().or_else(|| self.file.patterns.clone())
    }

    fn lexicon(&self, i: &Inputs) -> Option<PathBuf> {
        i.lexicon.clone().or_else(|| self.file.lexicon.clone())
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.file.seed).unwrap_or(0)
    }

    fn log_base(&self, flag: Option<LogBase>) -> Result<LogBase, CliError> {
        match (flag, &self.file.log_base) {
            (Some(b), _) => Ok(b),
            (None, Some(s)) => s.parse().map_err(|e: String| CliError::Input(format!("config: {e}"))),
            (None, None) => Ok(LogBase::E),
        }
    }

    fn pipeline(&self, i: &Inputs, s: &Scoring, seed: Option<u64>) -> Result<PipelineConfig, CliError> {
        Ok(PipelineConfig {
            corpus_path: self.corpus(i)?,
            pattern_path: self.patterns(i),
            lexicon_path: self.lexicon(i),
            smoothing: s.smooth.or(self.file.smoothing).unwrap_or(0.0),
            log_base: self.log_base(s.log_base)?,
            seed: self.seed(seed),
            output_dir: self.out.clone().unwrap_or_else(|| PathBuf::from("courtrel-out")),
        })
    }

    /// Config for stages that only need inputs; validated like a full run.
    fn partial(&self, i: &Inputs) -> Result<PipelineConfig, CliError> {
        let cfg = self.pipeline(
            i,
            &Scoring {
                smooth: None,
                log_base: None,
            },
            None,
        )?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_pools(s: &str) -> Result<Vec<Kappa>, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Kappa::ALL.to_vec());
    }
    s.parse::<Kappa>()
        .map(|k| vec![k])
        .map_err(|_| CliError::Input(format!("--pool must be A, B, C, D or all, got {s:?}")))
}

/// Opens a bundle under `--out` with the run config recorded, or `None` for stdout output.
fn open_bundle(settings: &Settings, cfg: &PipelineConfig) -> Result<Option<Bundle>, CliError> {
    let Some(dir) = &settings.out else {
        return Ok(None);
    };
    let corpus = fs::read(&cfg.corpus_path).map_err(io_input("corpus", &cfg.corpus_path))?;
    let patterns = match &cfg.pattern_path {
        Some(p) => fs::read(p).map_err(io_input("patterns", p))?,
        None => courtrel::PatternSet::default_pack_source().as_bytes().to_vec(),
    };
    let mut bundle = Bundle::create(dir)?;
    bundle.write_bytes(
        "config",
        "config.json",
        cfg.to_json(&sha256_hex(&corpus), &sha256_hex(&patterns)).as_bytes(),
    )?;
    Ok(Some(bundle))
}

/// Writes `rel` into the bundle, or to stdout when there is none.
fn emit<F>(bundle: &mut Option<Bundle>, stage: &'static str, rel: &str, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match bundle {
        Some(b) => Ok(b.write_with(stage, rel, |w| {
            f(w).map_err(courtrel::pipeline::out_err(stage, rel))
        })?),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(write_out_err)
        }
    }
}

fn finish(bundle: Option<Bundle>) -> Result<(), CliError> {
    if let Some(b) = bundle {
        let dir = b.finish()?;
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_ingest(settings: &Settings, inputs: &Inputs) -> Result<(), CliError> {
    let cfg = settings.partial(inputs)?;
    let corpus = load_corpus(&cfg.corpus_path).map_err(PipelineError::from)?;
    let mut bundle = open_bundle(settings, &cfg)?;
    let d = corpus.diagnostics();
    emit(&mut bundle, "ingest", "ingest/summary.csv", |w| report::write_ingest_summary(w, &d))?;
    finish(bundle)
}

fn cmd_partition(settings: &Settings, inputs: &Inputs) -> Result<(), CliError> {
    let cfg = settings.partial(inputs)?;
    let corpus = load_corpus(&cfg.corpus_path).map_err(PipelineError::from)?;
    let part = partition(&corpus).map_err(PipelineError::from)?;
    let mut bundle = open_bundle(settings, &cfg)?;
    emit(&mut bundle, "partition", "partition/pools.csv", |w| report::write_pools(w, &part))?;
    match &bundle {
        Some(_) => emit(&mut bundle, "partition", "partition/diagnostics.csv", |w| {
            report::write_pool_diagnostics(w, &part)
        })?,
        None => {
            let mut buf = Vec::new();
            report::write_pool_diagnostics(&mut buf, &part).map_err(write_out_err)?;
            eprint!("{}", String::from_utf8_lossy(&buf));
        }
    }
    finish(bundle)
}

fn cmd_extract(settings: &Settings, inputs: &Inputs, pool: &str) -> Result<(), CliError> {
    let kappas = parse_pools(pool)?;
    let cfg = settings.partial(inputs)?;
    let patterns = load_patterns(cfg.pattern_path.as_deref()).map_err(PipelineError::from)?;
    let tagger = load_tagger(cfg.lexicon_path.as_deref()).map_err(PipelineError::from)?;
    let corpus = load_corpus(&cfg.corpus_path).map_err(PipelineError::from)?;
    let part = partition(&corpus).map_err(PipelineError::from)?;
    let refs = pool_union(&part, &kappas);
    let mut bundle = open_bundle(settings, &cfg)?;
    let mut result = Ok(());
    emit(&mut bundle, "extract", "extract/relations.csv", |w| {
        let mut rows = RelationWriter::new(w)?;
        result = stream_extract(&corpus, &refs, &patterns, &tagger, |_, batch| {
            rows.write(batch).map_err(courtrel::pipeline::out_err("extract", "relations"))
        });
        rows.finish()
    })?;
    result?;
    finish(bundle)
}

fn cmd_pmi(settings: &Settings, inputs: &Inputs, scoring: &Scoring) -> Result<(), CliError> {
    let cfg = settings.pipeline(inputs, scoring, None)?;
    cfg.validate()?;
    let patterns = load_patterns(cfg.pattern_path.as_deref()).map_err(PipelineError::from)?;
    let tagger = load_tagger(cfg.lexicon_path.as_deref()).map_err(PipelineError::from)?;
    let corpus = load_corpus(&cfg.corpus_path).map_err(PipelineError::from)?;
    let part = partition(&corpus).map_err(PipelineError::from)?;
    let table = tabulate(&corpus, &part, &patterns, &tagger, |_| Ok(()))?;
    let matrix = score_table(&table, cfg.pmi_config())?;
    let mut bundle = open_bundle(settings, &cfg)?;
    emit(&mut bundle, "report", "report/mi.csv", |w| report::write_mi(w, &table, matrix.as_ref()))?;
    if bundle.is_some() {
        emit(&mut bundle, "report", "report/marginals.csv", |w| report::write_marginals(w, &table))?;
    }
    finish(bundle)
}

fn write_scores<W: Write + ?Sized>(w: &mut W, r: &EvalReport) -> io::Result<()> {
    writeln!(w, "scope,relation,precision,recall,f1,true_positives,predicted,gold")?;
    let mut line = |scope: &str, rel: &str, s: &Scores| {
        writeln!(
            w,
            "{scope},{rel},{:.6},{:.6},{:.6},{},{},{}",
            s.precision, s.recall, s.f1, s.true_positives, s.predicted, s.gold
        )
    };
    line("micro", "all", &r.overall)?;
    line("macro", "all", &r.macro_avg)?;
    for (rel, s) in &r.per_relation {
        line("relation", rel.as_str(), s)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    settings: &Settings,
    inputs: &Inputs,
    gold_path: &Path,
    pool: &str,
    n: usize,
    seed: Option<u64>,
    macro_avg: bool,
) -> Result<(), CliError> {
    let kappas = parse_pools(pool)?;
    let mut cfg = settings.partial(inputs)?;
    cfg.seed = settings.seed(seed);
    let gold_file = fs::File::open(gold_path).map_err(io_input("gold file", gold_path))?;
    let gold = read_gold(gold_file).map_err(|e| CliError::Input(e.to_string()))?;
    let patterns = load_patterns(cfg.pattern_path.as_deref()).map_err(PipelineError::from)?;
    let tagger = load_tagger(cfg.lexicon_path.as_deref()).map_err(PipelineError::from)?;
    let corpus = load_corpus(&cfg.corpus_path).map_err(PipelineError::from)?;
    let part = partition(&corpus).map_err(PipelineError::from)?;

    let mut picked = sample(&pool_union(&part, &kappas), n, cfg.seed)?;
    picked.sort();
    let in_sample: BTreeSet<(String, usize)> =
        picked.iter().map(|r| (r.case_id.clone(), r.utterance_index)).collect();
    let gold: Vec<_> = gold
        .into_iter()
        .filter(|g| in_sample.contains(&(g.provenance.0.clone(), g.provenance.1)))
        .collect();
    let mut predicted: Vec<RelationInstance> = Vec::new();
    stream_extract(&corpus, &picked, &patterns, &tagger, |_, batch| {
        predicted.extend_from_slice(batch);
        Ok(())
    })?;
    let result = score(&predicted, &gold);

    let headline = if macro_avg { ("macro", &result.macro_avg) } else { ("micro", &result.overall) };
    eprintln!(
        "{} precision {:.4} recall {:.4} f1 {:.4} over {} sampled utterances",
        headline.0,
        headline.1.precision,
        headline.1.recall,
        headline.1.f1,
        picked.len()
    );
    let mut bundle = open_bundle(settings, &cfg)?;
    emit(&mut bundle, "eval", "eval/scores.csv", |w| write_scores(w, &result))?;
    if bundle.is_some() {
        emit(&mut bundle, "eval", "eval/sample.csv", |w| {
            writeln!(w, "case_id,utterance_index")?;
            for r in &picked {
                writeln!(w, "{},{}", r.case_id, r.utterance_index)?;
            }
            Ok(())
        })?;
        emit(&mut bundle, "eval", "eval/predicted.csv", |w| {
            let mut rows = RelationWriter::new(w)?;
            rows.write(&predicted)?;
            rows.finish()
        })?;
    }
    finish(bundle)
}

fn cmd_synth(settings: &Settings, spec_path: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let file = fs::File::open(spec_path).map_err(io_input("spec", spec_path))?;
    let spec = SynthSpec::read_csv(file)?;
    let out = synth_corpus(&spec, settings.seed(seed));
    let mut lines: Vec<String> = out
        .corpus
        .cases
        .values()
        .map(|c| serialize_record(&Record::Case(c.clone())))
        .collect();
    lines.extend(out.corpus.utterances.iter().map(|u| serialize_record(&Record::Utterance(u.clone()))));
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    let mut expected = String::from("relation,kappa,count\n");
    for r in RelationType::ALL {
        for k in Kappa::ALL {
            expected.push_str(&format!("{r},{k},{}\n", out.expected.get(r, k)));
        }
    }
    match &settings.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(write_out_err)?;
            }
            fs::write(path, text).map_err(write_out_err)?;
            let mut exp_path = path.clone().into_os_string();
            exp_path.push(".expected.csv");
            fs::write(&exp_path, expected).map_err(write_out_err)?;
            eprintln!(
                "wrote {} ({} utterances) and {}",
                path.display(),
                out.corpus.utterances.len(),
                PathBuf::from(exp_path).display()
            );
        }
        None => io::stdout().write_all(text.as_bytes()).map_err(write_out_err)?,
    }
    Ok(())
}

fn cmd_report(settings: &Settings, mi: &Path, log_base: Option<LogBase>) -> Result<(), CliError> {
    let text = fs::read_to_string(mi).map_err(io_input("mi table", mi))?;
    let (table, values) = report::read_mi(&text).map_err(|e| CliError::Input(format!("{}: {e}", mi.display())))?;
    if table.total() == 0 {
        return Err(CliError::Input(format!("{}: table is empty, nothing to draw", mi.display())));
    }
    let matrix = PmiMatrix {
        values,
        config: PmiConfig {
            smoothing: settings.file.smoothing.unwrap_or(0.0),
            log_base: settings.log_base(log_base)?,
        },
    };
    let svg = report::render_mi_chart(&matrix);
    match &settings.out {
        Some(dir) => {
            let mut b = Bundle::create(dir)?;
            b.write_bytes(
                "report",
                "config.json",
                format!(
                    "{{\n  \"mi\": {:?},\n  \"mi_sha256\": \"{}\",\n  \"log_base\": \"{}\"\n}}\n",
                    mi.display().to_string(),
                    sha256_hex(text.as_bytes()),
                    matrix.config.log_base
                )
                .as_bytes(),
            )?;
            b.write_bytes("report", "report/mi.svg", svg.as_bytes())?;
            finish(Some(b))
        }
        None => io::stdout().write_all(svg.as_bytes()).map_err(write_out_err),
    }
}

fn cmd_run(settings: &Settings, inputs: &Inputs, scoring: &Scoring, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = settings.pipeline(inputs, scoring, seed)?;
    let summary = run_pipeline(&cfg)?;
    eprintln!(
        "{} relation instances, N = {}; bundle in {}",
        summary.instances,
        summary.table.total(),
        summary.output_dir.display()
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        configure_threads(n)?;
    }
    let settings = Settings::load(cli)?;
    match &cli.command {
        Command::Ingest { inputs } => cmd_ingest(&settings, inputs),
        Command::Partition { inputs } => cmd_partition(&settings, inputs),
        Command::Extract { inputs, pool } => cmd_extract(&settings, inputs, pool),
        Command::Pmi { inputs, scoring } => cmd_pmi(&settings, inputs, scoring),
        Command::Eval {
            inputs,
            gold,
            pool,
            n,
            seed,
            macro_avg,
        } => cmd_eval(&settings, inputs, gold, pool, *n, *seed, *macro_avg),
        Command::Synth { spec, seed } => cmd_synth(&settings, spec, *seed),
        Command::Report { mi, log_base } => cmd_report(&settings, mi, *log_base),
        Command::Run { inputs, scoring, seed } => cmd_run(&settings, inputs, scoring, *seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
