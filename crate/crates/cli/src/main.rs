mod tables;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use storykg_core::annotation::{
    convert_fairytaleqa, export_dataset, import_dataset, load_corpus, load_dataset_rows, read_split_map,
    summary_statistics, write_corpus, AnnotationRecord, DatasetRow, RecordStore, Split, SplitMap,
};
use storykg_core::bench::{
    bench_items, reference_responses, run_bench, BenchConfig, DecodeParams, EchoStub, HttpChatEndpoint,
    ModelEndpoint, PromptTemplate, ShuffleStub, Strategy, UnparseableStub, Variant, API_KEY_ENV,
};
use storykg_core::concepts::{apply_roles, extract_candidates, import_pretagged, CandidateConcept, TierLexicon};
use storykg_core::gloss::{FetchMode, GlossCache, GlossProvider, HttpTransport};
use storykg_core::kg::snapshot::{read_snapshot, write_snapshot};
use storykg_core::kg::{build_index, normalize_concept, open_dump, RelationFilter};
use storykg_core::metrics::{rouge_l_multi_ref, Reduction};
use storykg_core::rank::{KnowledgeMatcher, RankingConfig, Recommender};
use storykg_core::validation::{agreement_report, sample_tasks, ValidationStore};
use storykg_server::AppState;

#[derive(Parser)]
#[command(name = "storykg", version, about = "Knowledge-graph guided QA annotation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index snapshot from a ConceptNet assertions dump (plain or gzip).
    Ingest {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One relation per line; defaults to the built-in whitelist.
        #[arg(long)]
        relations: Option<PathBuf>,
    },
    /// Print the ranked triples for a concept.
    Rank {
        #[arg(long, env = "STORYKG_SNAPSHOT")]
        snapshot: PathBuf,
        #[arg(long)]
        concept: String,
        #[arg(long, default_value_t = 6)]
        top_k: usize,
        /// Divide weights by the largest candidate weight before scoring.
        #[arg(long)]
        normalize_weights: bool,
        #[arg(long)]
        json: bool,
    },
    /// List candidate concepts for a section.
    Candidates {
        /// Plain-text section.
        #[arg(long, required_unless_present = "pretagged")]
        section_file: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Pre-tagged sections, one JSON record per line.
        #[arg(long)]
        pretagged: Option<PathBuf>,
    },
    /// Look up short definitions for a word.
    Gloss {
        word: String,
        #[arg(long)]
        offline: bool,
        #[arg(long, env = "STORYKG_GLOSS_CACHE")]
        cache: Option<PathBuf>,
        /// Directory of saved `<word>.json` responses.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        ttl_days: i64,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write the stored records as JSON lines with their splits.
    Export {
        #[arg(long, env = "STORYKG_STORE")]
        store: PathBuf,
        /// Story to split map: JSON object or `story<TAB>split` lines.
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summary statistics for the record store.
    Stats {
        #[arg(long, env = "STORYKG_STORE")]
        store: PathBuf,
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long)]
        split: Option<Split>,
        #[arg(long)]
        json: bool,
    },
    /// Check the record store for invalid records and quarantined lines.
    Audit {
        #[arg(long, env = "STORYKG_STORE")]
        store: PathBuf,
        /// Rewrite the log without quarantined lines.
        #[arg(long)]
        compact: bool,
    },
    /// Cross-validation tasks and agreement.
    Validate {
        #[command(subcommand)]
        command: ValidateCommand,
    },
    /// Rouge-L of candidates against references.
    Score {
        /// One candidate per line.
        #[arg(long)]
        candidate: PathBuf,
        /// One line per candidate; multiple references separated by tabs.
        #[arg(long)]
        refs: PathBuf,
        #[arg(long, default_value = "max")]
        reduction: Reduction,
    },
    /// Dataset statistics, question types and relation distribution.
    DatasetStats {
        /// Export file (JSON lines) or CSV with a header row.
        #[arg(long = "in", num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Question-answer generation benchmark.
    Bench(BenchArgs),
    /// Convert a FairytaleQA story CSV into the corpus format.
    ConvertFairytaleqa {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the file stem.
        #[arg(long)]
        story_id: Option<String>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "STORYKG_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, env = "STORYKG_SNAPSHOT")]
    snapshot: PathBuf,
    /// Corpus sections, one JSON record per line.
    #[arg(long, env = "STORYKG_CORPUS")]
    corpus: PathBuf,
    #[arg(long, env = "STORYKG_STORE")]
    store: PathBuf,
    #[arg(long, env = "STORYKG_VALIDATION_STORE")]
    validation_store: Option<PathBuf>,
    #[arg(long, env = "STORYKG_SPLITS")]
    splits: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, env = "STORYKG_GLOSS_CACHE")]
    gloss_cache: Option<PathBuf>,
    #[arg(long)]
    gloss_fixtures: Option<PathBuf>,
    /// Answer gloss requests from cache and fixtures only.
    #[arg(long)]
    offline: bool,
    #[arg(long, default_value_t = 6)]
    top_k: usize,
}

#[derive(Subcommand)]
enum ValidateCommand {
    /// Sample records and assign them to validators.
    Sample {
        #[arg(long, env = "STORYKG_STORE")]
        store: PathBuf,
        #[arg(long, env = "STORYKG_VALIDATION_STORE")]
        tasks: PathBuf,
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(short = 'n', default_value_t = 50)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        validators: Vec<String>,
    },
    /// Agreement between annotators and validators over completed tasks.
    Report {
        #[arg(long, env = "STORYKG_VALIDATION_STORE")]
        tasks: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EndpointKind {
    Stub,
    Http,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StubKind {
    /// Replies with each section's first reference.
    Echo,
    /// Replies with the second reference, words shuffled.
    Shuffle,
    /// Replies with text that cannot be parsed.
    Unparseable,
}

#[derive(Args)]
struct BenchArgs {
    /// Export file with split-labelled records.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
    #[arg(long, default_value = "qa_with_triple")]
    variant: Variant,
    #[arg(long, default_value = "zero_shot")]
    strategy: Strategy,
    #[arg(long, value_enum, default_value = "stub")]
    endpoint: EndpointKind,
    #[arg(long, value_enum, default_value = "echo")]
    stub: StubKind,
    #[arg(long, env = "STORYKG_LLM_URL")]
    base_url: Option<String>,
    #[arg(long, env = "STORYKG_LLM_MODEL")]
    model: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to 1 for stubs and 3 for live endpoints.
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value = "max")]
    reduction: Reduction,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 256)]
    max_tokens: u32,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Ingest { dump, out: path, relations } => ingest(&dump, &path, relations.as_deref(), &mut out),
        Command::Rank {
            snapshot,
            concept,
            top_k,
            normalize_weights,
            json,
        } => rank(&snapshot, &concept, top_k, normalize_weights, json, &mut out),
        Command::Candidates {
            section_file,
            lexicon,
            pretagged,
        } => candidates(section_file.as_deref(), lexicon.as_deref(), pretagged.as_deref(), &mut out),
        Command::Gloss {
            word,
            offline,
            cache,
            fixtures,
            ttl_days,
        } => gloss(&word, offline, cache.as_deref(), fixtures.as_deref(), ttl_days, &mut out),
        Command::Serve(args) => serve(args),
        Command::Export { store, splits, out: path } => export(&store, &splits, path.as_deref(), &mut out),
        Command::Stats {
            store,
            splits,
            split,
            json,
        } => stats(&store, splits.as_deref(), split, json, &mut out),
        Command::Audit { store, compact } => audit(&store, compact, &mut out),
        Command::Validate { command } => validate(command, &mut out),
        Command::Score {
            candidate,
            refs,
            reduction,
        } => score(&candidate, &refs, reduction, &mut out),
        Command::DatasetStats { input, json } => dataset_stats(&input, json, &mut out),
        Command::Bench(args) => bench(args, &mut out),
        Command::ConvertFairytaleqa { input, out: path, story_id } => {
            convert(&input, &path, story_id.as_deref(), &mut out)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_lexicon(path: Option<&Path>) -> Result<TierLexicon> {
    match path {
        Some(p) => TierLexicon::parse(&read_text(p)?).with_context(|| format!("parsing lexicon {}", p.display())),
        None => Ok(TierLexicon::packaged()),
    }
}

fn load_splits(path: &Path) -> Result<SplitMap> {
    read_split_map(&read_text(path)?).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Store records with splits filled in from an optional split map.
fn store_records(store: &Path, splits: Option<&Path>) -> Result<Vec<AnnotationRecord>> {
    let store = RecordStore::open(store).with_context(|| format!("opening store {}", store.display()))?;
    let mut records = store.records();
    if let Some(path) = splits {
        let map = load_splits(path)?;
        for r in &mut records {
            if let Some(&s) = map.get(&r.story_id) {
                r.split = Some(s);
            }
        }
    }
    Ok(records)
}

fn ingest(dump: &Path, out_path: &Path, relations: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let filter = match relations {
        Some(p) => RelationFilter::parse(&read_text(p)?)?,
        None => RelationFilter::default(),
    };
    let reader = open_dump(dump).with_context(|| format!("opening dump {}", dump.display()))?;
    let (index, report) = build_index(reader.lines(), &filter)?;
    write_snapshot(&index, out_path)?;
    writeln!(out, "lines\t{}", report.lines)?;
    writeln!(out, "accepted\t{}", report.accepted)?;
    writeln!(out, "duplicates\t{}", report.duplicates)?;
    for (reason, n) in &report.skipped {
        writeln!(out, "skipped:{reason:?}\t{n}")?;
    }
    writeln!(out, "malformed\t{}", report.error_count)?;
    writeln!(out, "triples\t{}", index.len())?;
    writeln!(out, "concepts\t{}", index.concept_count())?;
    for (line, err) in report.errors.iter().take(10) {
        tracing::warn!("line {line}: {err}");
    }
    Ok(())
}

fn rank(snapshot: &Path, concept: &str, top_k: usize, normalize: bool, json: bool, out: &mut impl Write) -> Result<()> {
    let index = read_snapshot(snapshot).with_context(|| format!("reading snapshot {}", snapshot.display()))?;
    let mut config = RankingConfig::with_top_k(top_k)?;
    config.normalize_weights = normalize;
    let key = normalize_concept(concept)?;
    let ranked = KnowledgeMatcher::new(Arc::new(index), config).recommend(&key);
    if json {
        serde_json::to_writer_pretty(&mut *out, &ranked)?;
        writeln!(out)?;
        return Ok(());
    }
    if ranked.is_empty() {
        writeln!(out, "no triples for {key:?}")?;
        return Ok(());
    }
    tables::ranked(out, &ranked)?;
    Ok(())
}

fn candidates(section: Option<&Path>, lexicon: Option<&Path>, pretagged: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let lexicon = load_lexicon(lexicon)?;
    let print = |out: &mut dyn Write, label: &str, cands: &[CandidateConcept]| -> Result<()> {
        writeln!(out, "{label}")?;
        tables::candidates(out, cands)?;
        Ok(())
    };
    if let Some(path) = section {
        let text = read_text(path)?;
        print(out, &path.display().to_string(), &extract_candidates(&text, &lexicon))?;
    }
    if let Some(path) = pretagged {
        for (no, line) in read_text(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let section = import_pretagged(line).with_context(|| format!("{} line {}", path.display(), no + 1))?;
            let outcome = apply_roles(&section, &lexicon);
            print(out, &format!("{} #{}", path.display(), no + 1), &outcome.candidates)?;
        }
    }
    Ok(())
}

fn gloss_provider(
    offline: bool,
    cache: Option<&Path>,
    fixtures: Option<&Path>,
    ttl_days: i64,
) -> Result<GlossProvider> {
    let cache = match cache {
        Some(p) => GlossCache::open(p)?,
        None => GlossCache::in_memory(),
    };
    let mut provider = GlossProvider::offline(cache).with_ttl(chrono::Duration::days(ttl_days));
    if !offline {
        provider = provider.with_transport(Arc::new(HttpTransport::new(Duration::from_secs(15))?));
    }
    if let Some(dir) = fixtures {
        provider = provider.with_fixture_dir(dir)?;
    }
    Ok(provider)
}

fn gloss(word: &str, offline: bool, cache: Option<&Path>, fixtures: Option<&Path>, ttl_days: i64, out: &mut impl Write) -> Result<()> {
    let provider = gloss_provider(offline, cache, fixtures, ttl_days)?;
    let mode = if offline { FetchMode::Offline } else { FetchMode::Live };
    let gloss = provider.fetch(&normalize_concept(word)?, mode)?;
    if gloss.definitions.is_empty() {
        writeln!(out, "{}: no definitions", gloss.concept)?;
    }
    for (i, d) in gloss.definitions.iter().enumerate() {
        writeln!(out, "{}. {d}", i + 1)?;
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let index = read_snapshot(&args.snapshot).with_context(|| format!("reading snapshot {}", args.snapshot.display()))?;
    let matcher = KnowledgeMatcher::new(Arc::new(index), RankingConfig::with_top_k(args.top_k)?);
    let sections = load_corpus(&args.corpus)?;
    let records = RecordStore::open(&args.store)?;
    if records.quarantined() > 0 {
        tracing::warn!(lines = records.quarantined(), "store had unreadable lines; see the quarantine file");
    }
    let validation = match &args.validation_store {
        Some(p) => ValidationStore::open(p)?,
        None => ValidationStore::in_memory(),
    };
    // The blocking HTTP client must be built outside the async runtime.
    let gloss = gloss_provider(args.offline, args.gloss_cache.as_deref(), args.gloss_fixtures.as_deref(), 30)?;
    let mode = if args.offline { FetchMode::Offline } else { FetchMode::Live };
    let mut state = AppState::new(sections, Arc::new(matcher), records, validation)
        .with_lexicon(load_lexicon(args.lexicon.as_deref())?)
        .with_gloss(gloss, mode);
    if let Some(p) = &args.splits {
        state = state.with_splits(load_splits(p)?);
    }
    let state = Arc::new(state);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let result = runtime.block_on(async {
        tokio::select! {
            r = storykg_server::serve(state.clone(), args.addr) => r,
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    });
    runtime.shutdown_timeout(Duration::from_secs(5));
    drop(state);
    Ok(result?)
}

fn export(store: &Path, splits: &Path, path: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let map = load_splits(splits)?;
    let records = store_records(store, Some(splits))?;
    let n = match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            let n = export_dataset(&records, &map, &mut w)?;
            w.flush()?;
            n
        }
        None => export_dataset(&records, &map, &mut *out)?,
    };
    tracing::info!(records = n, "exported");
    Ok(())
}

fn stats(store: &Path, splits: Option<&Path>, split: Option<Split>, json: bool, out: &mut impl Write) -> Result<()> {
    let rows: Vec<DatasetRow> = store_records(store, splits)?
        .iter()
        .filter(|r| split.is_none() || r.split == split)
        .map(DatasetRow::from)
        .collect();
    let report = summary_statistics(&rows);
    if json {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)?;
    } else {
        tables::statistics(out, &report)?;
    }
    Ok(())
}

fn audit(store: &Path, compact: bool, out: &mut impl Write) -> Result<()> {
    let records = RecordStore::open(store)?;
    let report = records.audit();
    writeln!(out, "records\t{}", report.records)?;
    writeln!(out, "quarantined_lines\t{}", report.quarantined_lines)?;
    writeln!(out, "invalid\t{}", report.invalid.len())?;
    writeln!(out, "warnings\t{}", report.warnings)?;
    writeln!(out, "duplicate_ids\t{}", report.duplicate_ids.len())?;
    for (id, problems) in &report.invalid {
        writeln!(out, "record {id}: {}", problems.join("; "))?;
    }
    if compact {
        records.compact()?;
        writeln!(out, "compacted")?;
    }
    if !report.is_clean() {
        bail!("store has {} invalid records", report.invalid.len() + report.duplicate_ids.len());
    }
    Ok(())
}

fn validate(command: ValidateCommand, out: &mut impl Write) -> Result<()> {
    match command {
        ValidateCommand::Sample {
            store,
            tasks,
            splits,
            split,
            n,
            seed,
            validators,
        } => {
            let records = store_records(&store, splits.as_deref())?;
            let sampled = sample_tasks(&records, split, n, seed, &validators)?;
            let added = ValidationStore::open(&tasks)?.add_tasks(&sampled)?;
            writeln!(out, "sampled\t{}", sampled.len())?;
            writeln!(out, "added\t{added}")?;
            for t in &sampled {
                writeln!(out, "{}\t{}", t.task_id, t.validator_id)?;
            }
        }
        ValidateCommand::Report { tasks, json } => {
            let store = ValidationStore::open(&tasks)?;
            let report = agreement_report(&store.completed(), None);
            if json {
                serde_json::to_writer_pretty(&mut *out, &report)?;
                writeln!(out)?;
            } else {
                writeln!(out, "tasks\t{}", report.tasks)?;
                writeln!(out, "top3_agreement\t{:.4}", report.top3_agreement)?;
                writeln!(out, "top1_agreement\t{:.4}", report.top1_agreement)?;
                writeln!(out, "mean_rouge_l_f1\t{:.4}", report.mean_rouge_l)?;
            }
        }
    }
    Ok(())
}

fn score(candidates: &Path, refs: &Path, reduction: Reduction, out: &mut impl Write) -> Result<()> {
    let cands: Vec<String> = read_text(candidates)?.lines().map(str::to_string).collect();
    let refs: Vec<Vec<String>> = read_text(refs)?
        .lines()
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect();
    if cands.len() != refs.len() {
        bail!("{} candidates but {} reference lines", cands.len(), refs.len());
    }
    let mut total = 0.0;
    writeln!(out, "line\tprecision\trecall\tf1")?;
    for (i, (c, r)) in cands.iter().zip(&refs).enumerate() {
        let s = rouge_l_multi_ref(c, r, reduction)?;
        total += s.f1;
        writeln!(out, "{}\t{:.4}\t{:.4}\t{:.4}", i + 1, s.precision, s.recall, s.f1)?;
    }
    let mean = if cands.is_empty() { 0.0 } else { total / cands.len() as f64 };
    writeln!(out, "mean_f1\t{mean:.4}")?;
    Ok(())
}

fn dataset_stats(inputs: &[PathBuf], json: bool, out: &mut impl Write) -> Result<()> {
    if inputs.is_empty() {
        bail!("--in needs at least one file");
    }
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(load_dataset_rows(p).with_context(|| format!("loading {}", p.display()))?);
    }
    let report = summary_statistics(&rows);
    if json {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)?;
    } else {
        tables::statistics(out, &report)?;
        writeln!(out)?;
        tables::machine_lines(out, &report)?;
    }
    Ok(())
}

fn bench(args: BenchArgs, out: &mut impl Write) -> Result<()> {
    let template = PromptTemplate::new(args.variant, args.strategy)?;
    let file = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let records = import_dataset(file)?;
    let items = bench_items(&records, args.split);
    if items.is_empty() {
        bail!("no {} records in {}", args.split, args.data.display());
    }
    let pool = bench_items(&records, Split::Val);
    let endpoint: Box<dyn ModelEndpoint> = match args.endpoint {
        EndpointKind::Stub => match args.stub {
            StubKind::Echo => Box::new(EchoStub::new(reference_responses(&items, 0, args.variant))),
            StubKind::Shuffle => Box::new(ShuffleStub::new(reference_responses(&items, 1, args.variant), args.seed)),
            StubKind::Unparseable => Box::new(UnparseableStub),
        },
        EndpointKind::Http => {
            let base = args.base_url.as_deref().context("--base-url (or STORYKG_LLM_URL) is required for http")?;
            let model = args.model.as_deref().context("--model (or STORYKG_LLM_MODEL) is required for http")?;
            Box::new(HttpChatEndpoint::new(base, model, API_KEY_ENV, Duration::from_secs(args.timeout_secs))?)
        }
    };
    let mut config = BenchConfig::new(template, args.seed);
    config.repetitions = args
        .repetitions
        .unwrap_or(if endpoint.is_deterministic() { 1 } else { 3 });
    config.concurrency = args.concurrency;
    config.reduction = args.reduction;
    config.decode = DecodeParams {
        temperature: args.temperature,
        max_tokens: args.max_tokens,
    };
    let report = run_bench(&items, &pool, &config, endpoint.as_ref())?;
    if let Some(path) = &args.out {
        let mut w = BufWriter::new(File::create(path)?);
        report.write_jsonl(&mut w)?;
        w.flush()?;
    }
    let agg = &report.aggregate;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    writeln!(out, "endpoint\t{}", report.endpoint)?;
    writeln!(out, "setting\t{} {}", args.variant_label(), config.template.strategy)?;
    writeln!(out, "items\t{}", agg.items)?;
    writeln!(out, "parsed\t{}", agg.parsed)?;
    writeln!(out, "parse_failure_rate\t{:.4}", agg.parse_failure_rate)?;
    writeln!(out, "endpoint_errors\t{}", agg.endpoint_errors)?;
    writeln!(out, "qa_rouge_l_f1\t{}", fmt(agg.mean_qa_f1))?;
    writeln!(out, "triple_rouge_l_f1\t{}", fmt(agg.mean_triple_f1))?;
    if report.aborted {
        bail!("run aborted: more than half of the requests failed");
    }
    Ok(())
}

impl BenchArgs {
    fn variant_label(&self) -> &'static str {
        match self.variant {
            Variant::QaOnly => "qa_only",
            Variant::QaWithTriple => "qa_with_triple",
        }
    }
}

fn convert(input: &Path, out_path: &Path, story_id: Option<&str>, out: &mut impl Write) -> Result<()> {
    let default_id = story_id
        .map(str::to_string)
        .or_else(|| input.file_stem().map(|s| s.to_string_lossy().replace("-story", "")))
        .unwrap_or_else(|| "story".into());
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let sections = convert_fairytaleqa(BufReader::new(file), &default_id)?;
    let mut w = BufWriter::new(File::create(out_path)?);
    write_corpus(&sections, &mut w)?;
    w.flush()?;
    writeln!(out, "sections\t{}", sections.len())?;
    Ok(())
}
