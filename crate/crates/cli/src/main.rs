//! The `shepherd` command.

mod ask;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use shepherd_core::dsl::parse_and_check;
use shepherd_core::fields::{is_local_path, FieldType};
use shepherd_core::manifest::MANIFEST_FILE_NAME;
use shepherd_core::validators::{deep_validate, sha256_file, DeepOptions, DEFAULT_TIMEOUT_MS};
use shepherd_core::{
    build_manifest, canonical_tree, enumerate_paths, parse_manifest, parse_tree, serialize_manifest, to_dot,
    validate_tree, Clock, DecisionTree, FieldValue, FixedClock, SystemClock, TraversalError, TraversalSession,
};
use shepherd_service::{router, Cors, ServiceConfig, DEFAULT_ADDR, DEFAULT_TTL_SECS};

#[derive(Parser)]
#[command(name = "shepherd", version, about = "Data retrievability questionnaire and manifest tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TreeArg {
    /// Tree definition file; defaults to the built-in tree.
    #[arg(long, value_name = "FILE")]
    tree: Option<PathBuf>,
}

#[derive(Args)]
struct NowArg {
    /// Fixed manifest timestamp (RFC 3339). Intended for reproducible tests.
    #[arg(long, value_name = "TIMESTAMP", value_parser = parse_now)]
    now: Option<chrono::DateTime<chrono::Utc>>,
}

#[derive(Subcommand)]
enum Command {
    /// Walk the questionnaire interactively and write a manifest.
    Ask {
        #[command(flatten)]
        tree: TreeArg,
        #[arg(long, value_name = "FILE", default_value = MANIFEST_FILE_NAME)]
        out: PathBuf,
        #[command(flatten)]
        now: NowArg,
    },
    /// Answer the questionnaire from files and write a manifest.
    Run {
        /// JSON array of answer ids.
        #[arg(long, value_name = "FILE")]
        answers: PathBuf,
        /// JSON object of field values.
        #[arg(long, value_name = "FILE")]
        fields: PathBuf,
        #[command(flatten)]
        tree: TreeArg,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        now: NowArg,
        /// Record SHA-256 digests of local files named in path fields.
        #[arg(long)]
        checksums: bool,
    },
    /// Check a manifest against the tree.
    Validate {
        manifest: PathBuf,
        #[command(flatten)]
        tree: TreeArg,
        /// Check that URLs answer.
        #[arg(long)]
        live: bool,
        /// Check local files and recorded digests.
        #[arg(long)]
        checksums: bool,
        /// Per-URL timeout in milliseconds.
        #[arg(long, value_name = "MS", default_value_t = DEFAULT_TIMEOUT_MS)]
        timeout: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        /// Treat warnings as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Tree definition tooling.
    Tree {
        #[command(subcommand)]
        command: TreeCommand,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        tree: TreeArg,
        #[arg(long, default_value = DEFAULT_ADDR)]
        addr: SocketAddr,
        /// Directory of static files served at `/`.
        #[arg(long = "static", value_name = "DIR")]
        static_dir: Option<PathBuf>,
        /// Allowed browser origin; repeatable. Any origin when omitted.
        #[arg(long, value_name = "ORIGIN")]
        cors_origin: Vec<String>,
        /// Idle session lifetime in seconds.
        #[arg(long, value_name = "SECS", default_value_t = DEFAULT_TTL_SECS)]
        ttl: i64,
    },
}

#[derive(Subcommand)]
enum TreeCommand {
    /// Report structural problems.
    Check { file: PathBuf },
    /// Draw the tree.
    Render {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderFormat::Dot)]
        format: RenderFormat,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// List every root-to-leaf path.
    Paths { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderFormat {
    Dot,
}

fn parse_now(text: &str) -> Result<chrono::DateTime<chrono::Utc>, String> {
    FixedClock::parse(text).map(|c| c.now()).map_err(|e| format!("not an RFC 3339 timestamp: {e}"))
}

/// A failed command: what to print and which exit status to use.
#[derive(Debug)]
pub struct Failure {
    status: u8,
    message: String,
}

impl Failure {
    /// Validation or traversal failure.
    fn rejected(message: impl Into<String>) -> Self {
        Self { status: 1, message: message.into() }
    }

    /// IO or parse failure.
    fn io(message: impl Into<String>) -> Self {
        Self { status: 3, message: message.into() }
    }

    fn aborted() -> Self {
        Self { status: 130, message: "aborted".into() }
    }
}

impl From<TraversalError> for Failure {
    fn from(e: TraversalError) -> Self {
        Failure::rejected(format!("{}: {e}", e.code()))
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ask { tree, out, now } => cmd_ask(tree, &out, now),
        Command::Run { answers, fields, tree, out, now, checksums } => {
            cmd_run(&answers, &fields, tree, &out, now, checksums)
        }
        Command::Validate { manifest, tree, live, checksums, timeout, format, strict } => {
            cmd_validate(&manifest, tree, live, checksums, timeout, format, strict)
        }
        Command::Tree { command } => match command {
            TreeCommand::Check { file } => cmd_tree_check(&file),
            TreeCommand::Render { file, format: RenderFormat::Dot, out } => cmd_tree_render(&file, out.as_deref()),
            TreeCommand::Paths { file } => cmd_tree_paths(&file),
        },
        Command::Serve { tree, addr, static_dir, cors_origin, ttl } => cmd_serve(tree, addr, static_dir, cors_origin, ttl),
    };
    match result {
        Ok(status) => ExitCode::from(status),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.status)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn load_tree(arg: &TreeArg) -> Result<DecisionTree, Failure> {
    match &arg.tree {
        None => Ok(canonical_tree()),
        Some(path) => parse_tree(&read_file(path)?)
            .map_err(|e| Failure::io(format!("{}:{}:{}: {} {}", path.display(), e.line, e.column, e.code, e.message))),
    }
}

fn clock_for(now: NowArg) -> Box<dyn Clock> {
    match now.now {
        Some(at) => Box::new(FixedClock::new(at)),
        None => Box::new(SystemClock),
    }
}

fn cmd_ask(tree: TreeArg, out: &Path, now: NowArg) -> CmdResult {
    let tree = Arc::new(load_tree(&tree)?);
    let clock = clock_for(now);
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    let session = ask::interact(tree, clock.as_ref(), &mut stdin.lock(), &mut stdout)?;
    let manifest = build_manifest(&session, clock.as_ref()).map_err(|e| Failure::rejected(format!("{}: {e}", e.code())))?;
    write_file(out, &serialize_manifest(&manifest))?;
    let leaf = session.current_leaf().expect("complete sessions end at a leaf");
    println!("\nOutcome: {}\n{}", leaf.id, leaf.prescription);
    println!("Manifest written to {}", out.display());
    Ok(0)
}

/// JSON strings are text values; objects of strings are keyvalue maps.
fn json_to_field(id: &str, value: Value) -> Result<FieldValue, TraversalError> {
    let bad = |m: &str| TraversalError::FieldSyntax { field: id.to_string(), message: m.to_string() };
    match value {
        Value::String(s) => Ok(FieldValue::Text(s)),
        Value::Object(map) => map
            .into_iter()
            .map(|(k, v)| match v {
                Value::String(s) => Ok((k, s)),
                _ => Err(bad("keyvalue entries must be strings")),
            })
            .collect::<Result<BTreeMap<_, _>, _>>()
            .map(FieldValue::Map),
        _ => Err(bad("value must be a string or an object of strings")),
    }
}

fn cmd_run(answers: &Path, fields: &Path, tree: TreeArg, out: &Path, now: NowArg, checksums: bool) -> CmdResult {
    let tree = Arc::new(load_tree(&tree)?);
    let answers: Vec<String> = serde_json::from_str(&read_file(answers)?)
        .map_err(|e| Failure::io(format!("{}: expected a JSON array of answer ids: {e}", answers.display())))?;
    let fields: serde_json::Map<String, Value> = serde_json::from_str(&read_file(fields)?)
        .map_err(|e| Failure::io(format!("{}: expected a JSON object: {e}", fields.display())))?;
    let clock = clock_for(now);

    let mut session = TraversalSession::start(tree, clock.as_ref())?;
    for answer in &answers {
        session.apply_answer(answer)?;
    }
    if session.current_leaf().is_none() {
        return Err(Failure::rejected(format!(
            "E_INCOMPLETE: answers stop at question {}",
            session.current()
        )));
    }
    let mut errors = Vec::new();
    let mut entries = Vec::new();
    for (id, value) in fields {
        match json_to_field(&id, value) {
            Ok(v) => entries.push((id, v)),
            Err(e) => errors.push(e),
        }
    }
    if let Err(mut rejected) = session.set_fields(entries) {
        errors.append(&mut rejected);
    }
    if !errors.is_empty() {
        let lines: Vec<String> = errors.iter().map(|e| format!("{}: {e}", e.code())).collect();
        return Err(Failure::rejected(lines.join("\n")));
    }
    let mut manifest = build_manifest(&session, clock.as_ref()).map_err(|e| Failure::rejected(format!("{}: {e}", e.code())))?;
    if checksums {
        let leaf = session.current_leaf().expect("at a leaf");
        for req in leaf.fields.iter().filter(|f| f.field_type == FieldType::Path) {
            if let Some(path) = manifest.fields.get(&req.id).and_then(FieldValue::as_text).filter(|p| is_local_path(p)) {
                let digest = sha256_file(Path::new(path)).map_err(|e| Failure::io(e.to_string()))?;
                manifest.checksums.insert(path.to_string(), digest);
            }
        }
    }
    write_file(out, &serialize_manifest(&manifest))?;
    println!("{} -> {}", manifest.outcome, out.display());
    Ok(0)
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Runtime::new().map_err(|e| Failure::io(format!("cannot start runtime: {e}")))
}

fn cmd_validate(
    path: &Path,
    tree: TreeArg,
    live: bool,
    checksums: bool,
    timeout: u64,
    format: ReportFormat,
    strict: bool,
) -> CmdResult {
    let tree = load_tree(&tree)?;
    let manifest = parse_manifest(&read_file(path)?)
        .map_err(|e| Failure::io(format!("{}: {}: {e}", path.display(), e.code())))?;
    let options = DeepOptions {
        live,
        checksums,
        timeout_ms: timeout,
        base_dir: path.parent().map(Path::to_path_buf),
        ..DeepOptions::default()
    };
    let report = runtime()?.block_on(deep_validate(&manifest, &tree, &options));
    let failed = !report.is_clean() || (strict && report.has_warnings());
    match format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        ReportFormat::Text => {
            for finding in &report.findings {
                println!("{finding}");
            }
            if !failed {
                println!("OK");
            }
        }
    }
    Ok(if failed { 1 } else { 0 })
}

fn cmd_tree_check(file: &Path) -> CmdResult {
    let source = read_file(file)?;
    let (tree, problems) = parse_and_check(&source)
        .map_err(|e| Failure::io(format!("{}:{}:{}: {} {}", file.display(), e.line, e.column, e.code, e.message)))?;
    for p in &problems {
        println!("{}:{}:{}: {} {}", file.display(), p.line, p.column, p.code, p.message);
    }
    if !problems.is_empty() {
        return Ok(1);
    }
    println!(
        "OK: {} questions, {} leaves, {} edges",
        tree.questions().count(),
        tree.leaves().count(),
        tree.edge_count()
    );
    Ok(0)
}

/// Parses a tree file for commands that need a valid tree: syntax errors are
/// parse failures, structural findings are rejections.
fn load_valid_tree(file: &Path) -> Result<DecisionTree, Failure> {
    let source = read_file(file)?;
    let (tree, problems) = parse_and_check(&source)
        .map_err(|e| Failure::io(format!("{}:{}:{}: {} {}", file.display(), e.line, e.column, e.code, e.message)))?;
    match problems.first() {
        Some(p) => Err(Failure::rejected(format!("{}:{}:{}: {} {}", file.display(), p.line, p.column, p.code, p.message))),
        None => Ok(tree),
    }
}

fn cmd_tree_render(file: &Path, out: Option<&Path>) -> CmdResult {
    let tree = load_valid_tree(file)?;
    let dot = to_dot(&tree).map_err(|e| Failure::rejected(format!("{}: {e}", e.code())))?;
    match out {
        Some(path) => write_file(path, &dot)?,
        None => print!("{dot}"),
    }
    Ok(0)
}

fn cmd_tree_paths(file: &Path) -> CmdResult {
    let tree = load_valid_tree(file)?;
    let paths = enumerate_paths(&tree).map_err(|e| Failure::rejected(format!("{}: {e}", e.code())))?;
    let mut stdout = io::stdout().lock();
    for path in paths {
        let answers: Vec<&str> = path.answers().collect();
        writeln!(stdout, "{} -> {}", answers.join(","), path.leaf).map_err(|e| Failure::io(e.to_string()))?;
    }
    Ok(0)
}

fn cmd_serve(tree: TreeArg, addr: SocketAddr, static_dir: Option<PathBuf>, origins: Vec<String>, ttl: i64) -> CmdResult {
    let tree = load_tree(&tree)?;
    let report = validate_tree(&tree);
    if !report.is_clean() {
        return Err(Failure::io(format!("tree is not valid: {}", report.codes().join(", "))));
    }
    if let Some(dir) = &static_dir {
        if !dir.is_dir() {
            return Err(Failure::io(format!("{} is not a directory", dir.display())));
        }
    }
    let cors = if origins.is_empty() {
        Cors::Any
    } else {
        let parsed = origins
            .iter()
            .map(|o| o.parse().map_err(|_| Failure::io(format!("invalid origin {o:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Cors::Origins(parsed)
    };
    let mut config = ServiceConfig::new(Some(tree));
    config.ttl = chrono::Duration::seconds(ttl);
    config.cors = cors;
    config.static_dir = static_dir;

    tracing_subscriber::fmt()
        .with_max_level(tracing_subscriber::filter::LevelFilter::INFO)
        .with_writer(io::stderr)
        .with_ansi(io::stderr().is_terminal())
        .init();
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::io(format!("cannot bind {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(|e| Failure::io(e.to_string()))?;
        println!("serving on http://{bound}");
        let _ = io::stdout().flush();
        axum::serve(listener, router(config))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::io(format!("server error: {e}")))?;
        Ok(0)
    })
}
