use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use dpx::backend::{render_answer_block, CompletionBackend, HttpBackend, MockBackend};
use dpx::config::{BackendKind, Config};
use dpx::devicegen::{generate_model_card, generate_sim_script, model_symbols, DeviceKind, Family};
use dpx::eval::{self, EvalSettings, SynthConfig};
use dpx::iro::{parse_condition_pairs, trace_json, ExtractionRequest, IroError};
use dpx::pipeline::{prepare, Corpus, ExtractOptions, Flags, PipelineError};
use dpx::tdr::{resolve_model, MatchCandidate, ModelQuery, ResolveOutcome};

#[derive(Parser)]
#[command(name = "dpx", version, about = "Datasheet parameter extraction and SPICE model generation")]
struct Cli {
    /// Directory of `.dst` datasheets.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// TOML config with [tdr] [iro] [po] [backend] [mapping] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelFormat {
    Spice,
    Pyspice,
}

#[derive(clap::Args)]
struct TechniqueArgs {
    #[arg(long)]
    no_tdr: bool,
    #[arg(long)]
    no_iro: bool,
    #[arg(long)]
    no_po: bool,
}

impl TechniqueArgs {
    fn flags(&self) -> Flags {
        Flags {
            tdr: !self.no_tdr,
            iro: !self.no_iro,
            po: !self.no_po,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the corpus and print index statistics.
    Index,
    /// Resolve a part number against the corpus.
    Find { part: String },
    /// Extract parameters for a part.
    Extract {
        part: String,
        /// Comma-separated symbols, e.g. `h_FE,VTO`.
        #[arg(long, value_delimiter = ',', required = true)]
        symbols: Vec<String>,
        /// Operating conditions, e.g. `I_C=0.1mA, V_CE=10V`.
        #[arg(long)]
        conditions: Option<String>,
        /// Ask for operating conditions when a dynamic device returns ranges.
        #[arg(long)]
        interactive: bool,
        #[command(flatten)]
        techniques: TechniqueArgs,
        /// Write a JSON report with parameters and the iteration trace.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Extract the model parameters and write a SPICE card or PySpice script.
    Genmodel {
        part: String,
        #[arg(long, value_enum, default_value = "spice")]
        format: ModelFormat,
        #[arg(long)]
        conditions: Option<String>,
        /// Output file; defaults to `<part>.lib` or `<part>.py`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the technique ablation on a generated or supplied corpus.
    Eval {
        /// Group list such as `1,5` or `1..5`.
        #[arg(long, default_value = "1..5")]
        groups: String,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Output directory for report.json and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generated documents when no corpus is given.
        #[arg(long, default_value_t = 24)]
        docs: usize,
        #[arg(long, default_value_t = 0.6)]
        distractor_rate: f64,
    },
    /// Write a synthetic corpus with truth.json and queries.json.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        docs: usize,
        #[arg(long, default_value_t = 0.6)]
        distractor_rate: f64,
    },
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn new(code: u8, err: impl Into<anyhow::Error>) -> Failure {
        Failure { code, err: err.into() }
    }
}

const USAGE: u8 = 1;
const INGEST: u8 = 2;
const NOT_FOUND: u8 = 3;
const BACKEND: u8 = 4;
const MISSING_PARAM: u8 = 5;

fn usage(err: impl Into<anyhow::Error>) -> Failure {
    Failure::new(USAGE, err)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(usage)?,
        None => Config::default(),
    };
    match cli.backend {
        Some(BackendArg::Mock) => cfg.backend.kind = BackendKind::Mock,
        Some(BackendArg::Http) => cfg.backend.kind = BackendKind::Http,
        None => {}
    }
    Ok(cfg)
}

fn make_backend(cfg: &Config) -> Result<Box<dyn CompletionBackend>, Failure> {
    Ok(match cfg.backend.kind {
        BackendKind::Mock => Box::new(MockBackend::rule_based()),
        BackendKind::Http => {
            let http = &cfg.backend.http;
            if http.base_url.is_empty() || http.model.is_empty() {
                return Err(usage(anyhow!("the http backend needs [backend] base_url and model")));
            }
            Box::new(HttpBackend::new(http.clone()).map_err(usage)?)
        }
    })
}

fn load_corpus(cli: &Cli, cfg: &Config) -> Result<Corpus, Failure> {
    let dir = cli
        .corpus
        .as_deref()
        .ok_or_else(|| usage(anyhow!("--corpus <dir> is required for this command")))?;
    load_corpus_dir(dir, cfg)
}

fn load_corpus_dir(dir: &Path, cfg: &Config) -> Result<Corpus, Failure> {
    let priorities = cfg.priorities().map_err(usage)?;
    let (corpus, errors) =
        Corpus::load(dir, &priorities, cfg.corpus.chunk_chars).map_err(|e| Failure::new(INGEST, e))?;
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("ingestion error: {e}");
        }
        return Err(Failure::new(INGEST, anyhow!("{} file(s) failed to ingest", errors.len())));
    }
    if corpus.index().is_empty() {
        return Err(Failure::new(INGEST, anyhow!("no .dst files in {}", dir.display())));
    }
    Ok(corpus)
}

fn print_candidates(cands: &[MatchCandidate]) {
    for c in cands {
        println!(
            "  {} (doc {}, distance {}, similarity {:.2})",
            c.matched_alias, c.doc_id, c.edit_distance, c.similarity
        );
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::NotFound { query, recommendations } => {
            if recommendations.is_empty() {
                println!("no match for {query}");
            } else {
                println!("no exact match for {query}; did you mean:");
                print_candidates(&recommendations);
            }
            Failure::new(NOT_FOUND, anyhow!("part number `{query}` not found"))
        }
        PipelineError::Iro(e @ IroError::Backend { .. }) => Failure::new(BACKEND, e),
        PipelineError::Iro(e) => usage(e),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Index => cmd_index(&cli, &cfg),
        Command::Find { part } => cmd_find(&cli, &cfg, part),
        Command::Extract {
            part,
            symbols,
            conditions,
            interactive,
            techniques,
            report,
        } => cmd_extract(
            &cli,
            &cfg,
            part,
            symbols,
            conditions.as_deref(),
            *interactive,
            techniques.flags(),
            report.as_deref(),
        ),
        Command::Genmodel {
            part,
            format,
            conditions,
            out,
        } => cmd_genmodel(&cli, &cfg, part, *format, conditions.as_deref(), out.as_deref()),
        Command::Eval {
            groups,
            trials,
            out,
            docs,
            distractor_rate,
        } => cmd_eval(&cli, &cfg, groups, *trials, out.as_deref(), *docs, *distractor_rate),
        Command::Generate {
            out,
            docs,
            distractor_rate,
        } => {
            let synth = eval::gen_synthetic_corpus(cli.seed, *docs, *distractor_rate);
            synth
                .write_to(out)
                .with_context(|| format!("writing {}", out.display()))
                .map_err(usage)?;
            println!(
                "{} documents, {} queries written to {}",
                synth.files.len(),
                synth.queries.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn cmd_index(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let corpus = load_corpus(cli, cfg)?;
    let idx = corpus.index();
    println!("{} documents indexed", idx.len());
    println!("{} aliases, {} series, {} chunks", idx.alias_count(), idx.series_count(), corpus.chunk_count());
    Ok(())
}

fn cmd_find(cli: &Cli, cfg: &Config, part: &str) -> Result<(), Failure> {
    let corpus = load_corpus(cli, cfg)?;
    let q = ModelQuery::new(part).ok_or_else(|| usage(anyhow!("empty part number")))?;
    match resolve_model(&q, corpus.index(), &cfg.tdr) {
        ResolveOutcome::Exact(doc) => println!("exact: {doc}"),
        ResolveOutcome::SeriesExpansion(c) => {
            println!("series {}:", q.normalized);
            print_candidates(&c);
        }
        ResolveOutcome::Recommendations(c) => {
            println!("no exact match for {part}; did you mean:");
            print_candidates(&c);
            return Err(Failure::new(NOT_FOUND, anyhow!("part number `{part}` not found")));
        }
        ResolveOutcome::NotFound => {
            println!("no match for {part}");
            return Err(Failure::new(NOT_FOUND, anyhow!("part number `{part}` not found")));
        }
    }
    Ok(())
}

fn read_conditions(prompt: &str) -> Vec<(String, String)> {
    println!("{prompt}");
    let _ = io::stdout().flush();
    let mut out = Vec::new();
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            break;
        }
        out.extend(parse_condition_pairs(&line));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_extract(
    cli: &Cli,
    cfg: &Config,
    part: &str,
    symbols: &[String],
    conditions: Option<&str>,
    interactive: bool,
    flags: Flags,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let corpus = load_corpus(cli, cfg)?;
    let backend = make_backend(cfg)?;
    let symbols: Vec<String> = symbols.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    let conds = conditions.map(parse_condition_pairs).unwrap_or_default();
    let req = ExtractionRequest::new(part, symbols, conds).map_err(usage)?;
    let opts = ExtractOptions {
        flags,
        iro: cfg.iro.clone(),
        tdr: cfg.tdr,
        accept_recommendation: false,
    };
    let mut p = prepare(&corpus, backend.as_ref(), &req, &opts).map_err(pipeline_failure)?;
    let mut result = p.session.run().map_err(|e| pipeline_failure(e.into()))?;
    let dynamic = p.class.is_some_and(|c| c.kind == DeviceKind::Dynamic);
    if interactive && dynamic && req.conditions.is_empty() {
        if let Some(prompt) = &result.needs_user_input {
            let supplied = read_conditions(prompt);
            if !supplied.is_empty() {
                p.session.supply_conditions(supplied);
                result = p.session.run().map_err(|e| pipeline_failure(e.into()))?;
            }
        }
    }
    if let Some(doc) = p.doc_ids.first() {
        eprintln!(
            "resolved {} -> {} ({} iteration(s))",
            req.part_number,
            doc,
            result.iterations_used
        );
    }
    if !interactive {
        if let Some(prompt) = &result.needs_user_input {
            eprintln!("note: {prompt}");
        }
    }
    print!("{}", render_answer_block(&result.parameters));
    if let Some(path) = report {
        let json = serde_json::json!({
            "request": p.request,
            "doc_ids": p.doc_ids,
            "class": p.class,
            "resolution": p.resolution,
            "parameters": result.parameters,
            "iterations_used": result.iterations_used,
            "converged": result.converged,
            "trace": serde_json::from_str::<serde_json::Value>(&trace_json(&result.trace)).unwrap_or_default(),
        });
        std::fs::write(path, serde_json::to_string_pretty(&json).unwrap_or_default())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(usage)?;
    }
    Ok(())
}

fn cmd_genmodel(
    cli: &Cli,
    cfg: &Config,
    part: &str,
    format: ModelFormat,
    conditions: Option<&str>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let corpus = load_corpus(cli, cfg)?;
    let backend = make_backend(cfg)?;
    let tdr_opts = ExtractOptions {
        tdr: cfg.tdr,
        iro: cfg.iro.clone(),
        accept_recommendation: false,
        ..ExtractOptions::default()
    };
    // resolve first to learn the family, then extract its model symbols
    let q = ModelQuery::new(part).ok_or_else(|| usage(anyhow!("empty part number")))?;
    let family = match resolve_model(&q, corpus.index(), &cfg.tdr) {
        ResolveOutcome::Exact(doc) => corpus
            .index()
            .doc(&doc)
            .map_or(Family::Unknown, |d| dpx::devicegen::classify_device(d).family),
        ResolveOutcome::SeriesExpansion(_) => Family::Unknown,
        ResolveOutcome::Recommendations(c) => {
            return Err(pipeline_failure(PipelineError::NotFound {
                query: part.into(),
                recommendations: c,
            }))
        }
        ResolveOutcome::NotFound => {
            return Err(pipeline_failure(PipelineError::NotFound {
                query: part.into(),
                recommendations: vec![],
            }))
        }
    };
    let symbols: Vec<String> = model_symbols(family).iter().map(|s| s.to_string()).collect();
    if symbols.is_empty() {
        return Err(Failure::new(MISSING_PARAM, anyhow!("cannot determine a device family for {part}")));
    }
    let conds = conditions.map(parse_condition_pairs).unwrap_or_default();
    let req = ExtractionRequest::new(part, symbols, conds).map_err(usage)?;
    let x = dpx::pipeline::extract(&corpus, backend.as_ref(), &req, &tdr_opts).map_err(pipeline_failure)?;
    let name = x.request.part_number.clone();
    let model = generate_model_card(&x.result.parameters, family, &name, &cfg.mapping_table())
        .map_err(|e| Failure::new(MISSING_PARAM, e))?;
    let (text, ext) = match format {
        ModelFormat::Spice => (model.rendered_card.clone(), "lib"),
        ModelFormat::Pyspice => (generate_sim_script(&model), "py"),
    };
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(format!("{}.{ext}", model.name)));
    std::fs::write(&path, &text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(usage)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_eval(
    cli: &Cli,
    cfg: &Config,
    groups: &str,
    trials: usize,
    out: Option<&Path>,
    docs: usize,
    distractor_rate: f64,
) -> Result<(), Failure> {
    let groups = eval::parse_groups(groups).map_err(usage)?;
    let backend = make_backend(cfg)?;
    let (corpus, truth, queries) = match &cli.corpus {
        Some(dir) => {
            let corpus = load_corpus_dir(dir, cfg)?;
            let read = |name: &str| {
                std::fs::read_to_string(dir.join(name))
                    .with_context(|| format!("{} needs {name} (see `dpx generate`)", dir.display()))
                    .map_err(usage)
            };
            let truth = serde_json::from_str(&read("truth.json")?).map_err(usage)?;
            let queries = serde_json::from_str(&read("queries.json")?).map_err(usage)?;
            (corpus, truth, queries)
        }
        None => {
            let synth = eval::generate(&SynthConfig {
                seed: cli.seed,
                n_docs: docs,
                distractor_rate,
                ..SynthConfig::default()
            });
            let corpus = eval::build_corpus(&synth, cfg.corpus.chunk_chars).map_err(|e| Failure::new(INGEST, e))?;
            (corpus, synth.truth, synth.queries)
        }
    };
    let settings = EvalSettings {
        trials,
        iro: cfg.iro.clone(),
        tdr: cfg.tdr,
        ..EvalSettings::default()
    };
    let report = eval::run_ablation(&corpus, &truth, &queries, &groups, backend.as_ref(), &settings).map_err(|e| match e {
        eval::EvalError::Pipeline(p) => pipeline_failure(p),
        other => usage(other),
    })?;
    let text = report.render_text();
    print!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(dir.join("report.json"), report.to_json()))
            .and_then(|_| std::fs::write(dir.join("report.txt"), &text))
            .with_context(|| format!("writing {}", dir.display()))
            .map_err(usage)?;
    }
    Ok(())
}
