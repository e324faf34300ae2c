use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use nuggetindex::canonicalize::{discover_schema, DEFAULT_MIN_SUPPORT};
use nuggetindex::config::Config;
use nuggetindex::dates::Day;
use nuggetindex::engine::{read_jsonl, Engine};
use nuggetindex::eval::corpus::SyntheticCorpusSpec;
use nuggetindex::eval::{evaluate, EvalConfig, System};
use nuggetindex::extraction::{Document, RuleExtractor};
use nuggetindex::model::View;
use nuggetindex::retrieval::Query;
use nuggetindex::{service, Error, Result};

const DEFAULT_STORE: &str = "nuggetindex.store";

#[derive(Parser)]
#[command(name = "nuggetindex", version, about = "Governed retrieval over time-scoped fact nuggets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config; paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store file, overriding the config.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Predicate schema (JSON array), overriding the config.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Alias table (JSON object), overriding the config.
    #[arg(long, global = true)]
    aliases: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, govern and index documents (JSON array or JSON lines).
    Ingest {
        #[arg(long)]
        docs: PathBuf,
        /// Print a draft schema mined from the documents instead of ingesting.
        #[arg(long)]
        discover_schema: bool,
        #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
        min_support: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Retrieve nuggets valid at a date and print the context block.
    Query {
        #[arg(long)]
        text: String,
        /// Query date, YYYY-MM-DD.
        #[arg(long)]
        at: String,
        #[arg(long, default_value = "active")]
        view: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the synthetic evaluation and write a JSON report.
    Eval {
        /// Corpus spec (JSON); defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Comma-separated system names, or "all".
        #[arg(long, default_value = "all")]
        systems: String,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Serve the HTTP review and query API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write all nugget records as JSON lines.
    Export {
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print a draft schema mined from sample documents.
    DiscoverSchema {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
        min_support: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SchemaMissing(_) => 3,
        Error::Io(_) | Error::Json(_) | Error::InvalidInput(_) | Error::Config(_) => 2,
        _ => 1,
    }
}

fn load_config(c: &Common) -> Result<Config> {
    let mut config = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(p) = &c.store {
        config.storage = Some(p.clone());
    }
    if config.storage.is_none() {
        config.storage = Some(PathBuf::from(DEFAULT_STORE));
    }
    if let Some(p) = &c.schema {
        config.schema = Some(p.clone());
    }
    if let Some(p) = &c.aliases {
        config.aliases = Some(p.clone());
    }
    Ok(config)
}

/// Reads documents from a JSON array or JSON lines file.
fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    } else {
        read_jsonl(path)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn draft_schema(docs: &Path, min_support: usize, common: &Common) -> Result<()> {
    let config = load_config(common)?;
    let documents = read_documents(docs)?;
    let draft = discover_schema(&documents, &RuleExtractor, &config.load_aliases()?, min_support)?;
    print_json(&draft)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            docs,
            discover_schema: true,
            min_support,
            common,
        } => draft_schema(&docs, min_support, &common),
        Command::Ingest { docs, common, .. } => {
            let config = load_config(&common)?;
            let documents = read_documents(&docs)?;
            let engine = Engine::open(&config)?;
            let summary = engine.ingest(documents)?;
            print_json(&summary)
        }
        Command::DiscoverSchema { docs, min_support, common } => draft_schema(&docs, min_support, &common),
        Command::Query { text, at, view, k, common } => {
            let at: Day = at.parse()?;
            let view: View = view.parse()?;
            let config = load_config(&common)?;
            let engine = Engine::open(&config)?;
            let query = Query {
                weights: config.weights,
                ..Query::new(text, at).view(view).k(k)
            };
            let result = engine.retrieve(&query)?;
            print_json(&result)?;
            let context = engine.format_context(&result);
            if !context.is_empty() {
                println!("\n{context}");
            }
            engine.flush()
        }
        Command::Eval { spec, systems, out, k } => {
            let spec: SyntheticCorpusSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?
                }
                None => SyntheticCorpusSpec::default(),
            };
            let systems = System::parse_list(&systems)?;
            let mut config = EvalConfig::default();
            if let Some(k) = k {
                config.k = k;
            }
            let report = evaluate(&spec, &systems, config)?;
            std::fs::write(&out, serde_json::to_vec_pretty(&report)?)?;
            for (name, m) in &report.systems {
                println!(
                    "{name:<20} recall@k {:.3}  tc {:.3}  cr {:.3}  gs {:.3}  tokens {:.0}  p50 {:.2}ms",
                    m.nugget_recall_at_k, m.temporal_correctness, m.conflict_rate, m.governance_score, m.median_context_tokens, m.latency_p50_ms
                );
            }
            println!("report written to {}", out.display());
            Ok(())
        }
        Command::Serve { bind, static_dir, common } => {
            let mut config = load_config(&common)?;
            if let Some(b) = bind {
                config.server.bind = b;
            }
            if static_dir.is_some() {
                config.server.static_dir = static_dir;
            }
            let engine = Arc::new(Engine::open(&config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(engine, &config.server))
        }
        Command::Export { out, common } => {
            let config = load_config(&common)?;
            let engine = Engine::open(&config)?;
            let n = match out {
                Some(p) => {
                    let mut f = io::BufWriter::new(std::fs::File::create(&p)?);
                    let n = engine.export_jsonl(&mut f)?;
                    f.flush()?;
                    n
                }
                None => engine.export_jsonl(&mut io::stdout().lock())?,
            };
            eprintln!("exported {n} records");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
