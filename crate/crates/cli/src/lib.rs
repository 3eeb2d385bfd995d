//! `aigc` command-line interface.
//!
//! Exit codes: 0 on success, 1 on operational failure (including any
//! envelope that fails verification), 2 on usage errors.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

/// Version tag carried by every `--json` document.
pub const SCHEMA_VERSION: &str = "aigc-cli/1";

const ENV_HELP: &str = "\
Environment variables (overridden by flags, override the config file):
  AIGC_CONFIG, AIGC_STORE_DIR, AIGC_KEY_FILE, AIGC_DID_DIR, AIGC_OFFLINE,
  AIGC_INSECURE_HTTP, AIGC_ENDPOINT, AIGC_API_KEY, AIGC_MODEL, AIGC_MOCK,
  AIGC_JUDGE_ENDPOINT, AIGC_JUDGE_MODEL, AIGC_JUDGE_MOCK, AIGC_ISSUER_NAME,
  AIGC_CONCURRENCY, AIGC_SEED, AIGC_DID

Config file: --config <path>, or ./aigc.toml when present.

Exit codes: 0 success, 1 operational failure, 2 usage error.";

#[derive(Debug, Parser)]
#[command(name = "aigc", version, about = "Issue, verify and curate provenance envelopes for AI-generated content", after_help = ENV_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file (default: ./aigc.toml if it exists).
    #[arg(long, global = true, env = "AIGC_CONFIG")]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Envelope store directory [default: store].
    #[arg(long, global = true, env = "AIGC_STORE_DIR")]
    pub store: Option<PathBuf>,
    /// Key file [default: aigc-key.json].
    #[arg(long, global = true, env = "AIGC_KEY_FILE")]
    pub key: Option<PathBuf>,
    /// Directory of DID documents named `<did with ':' as '_'>.json`.
    #[arg(long, global = true, env = "AIGC_DID_DIR")]
    pub did_dir: Option<PathBuf>,
    /// Resolve DIDs only from --did-dir, never over the network.
    #[arg(long, global = true, env = "AIGC_OFFLINE")]
    pub offline: bool,
    /// Allow plain-HTTP DID resolution (testing only).
    #[arg(long, global = true, env = "AIGC_INSECURE_HTTP")]
    pub insecure_http: bool,
    /// OpenAI-compatible generation endpoint base URL.
    #[arg(long, global = true, env = "AIGC_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Bearer token for the endpoints.
    #[arg(long, global = true, env = "AIGC_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    /// Generation model as `label` or `label=iri`; repeat for several.
    #[arg(long, global = true, env = "AIGC_MODEL", value_delimiter = ',')]
    pub model: Vec<String>,
    /// JSONL replay file used instead of the generation endpoint.
    #[arg(long, global = true, env = "AIGC_MOCK")]
    pub mock: Option<PathBuf>,
    /// Judge endpoint base URL [default: --endpoint].
    #[arg(long, global = true, env = "AIGC_JUDGE_ENDPOINT")]
    pub judge_endpoint: Option<String>,
    /// Judge model name.
    #[arg(long, global = true, env = "AIGC_JUDGE_MODEL")]
    pub judge_model: Option<String>,
    /// JSONL replay file used instead of the judge endpoint.
    #[arg(long, global = true, env = "AIGC_JUDGE_MOCK")]
    pub judge_mock: Option<PathBuf>,
    /// Issuer display name for new envelopes.
    #[arg(long, global = true, env = "AIGC_ISSUER_NAME")]
    pub issuer_name: Option<String>,
    /// Maximum parallel work items [default: CPU count, at most 8].
    #[arg(long, global = true, env = "AIGC_CONCURRENCY")]
    pub concurrency: Option<usize>,
    /// Seed for every random choice (UUIDs, random selection).
    #[arg(long, global = true, env = "AIGC_SEED")]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an Ed25519 key file for a did:web issuer.
    Keygen(KeygenArgs),
    /// DID document helpers.
    #[command(name = "did-doc", subcommand)]
    DidDoc(DidDocCommand),
    /// Render a prompt main file to Markdown.
    Render(RenderArgs),
    /// Split a plain prompt into modules.
    Decompose(DecomposeArgs),
    /// Generate an output for a prompt and print it.
    Generate(GenerateArgs),
    /// Generate (or read), build, sign and store envelopes.
    Issue(IssueArgs),
    /// Verify envelope files (default: the whole store).
    Verify(VerifyArgs),
    /// Judge, select and score candidates per prompt.
    Curate(CurateArgs),
    /// Export the selected outputs of a curation report as JSONL.
    #[command(name = "export-ft")]
    ExportFt(ExportArgs),
    /// Print RFR/FRFR of a curation report.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// Issuer DID, e.g. did:web:example.com.
    #[arg(long, env = "AIGC_DID")]
    pub did: String,
    /// Verification-method fragment.
    #[arg(long, default_value = "key-1")]
    pub fragment: String,
    /// 32-byte seed as hex (deterministic key).
    #[arg(long)]
    pub seed_hex: Option<String>,
    /// Output path [default: the configured key file].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DidDocCommand {
    /// Emit a DID document for the key file.
    Init(DidDocInitArgs),
}

#[derive(Debug, Args)]
pub struct DidDocInitArgs {
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write into --did-dir under the fixture file name.
    #[arg(long)]
    pub into_did_dir: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Prompt main file (`<poml>` root).
    pub main: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecomposeMode {
    Auto,
    Headings,
    Sentences,
    /// Ask the generation model.
    Model,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Plain prompt text file, or `-` for stdin.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = DecomposeMode::Auto)]
    pub mode: DecomposeMode,
    /// Write one module file per kind plus main.poml here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_tokens: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub main: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct IssueArgs {
    /// Prompt main files; each is issued once per model.
    #[arg(required = true)]
    pub mains: Vec<PathBuf>,
    /// Use this text as the output instead of generating (one prompt, one model).
    #[arg(long)]
    pub content_file: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// validFrom timestamp (RFC 3339) [default: now].
    #[arg(long)]
    pub valid_from: Option<String>,
    /// Proof creation timestamp (RFC 3339) [default: validFrom].
    #[arg(long)]
    pub created: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Envelope files [default: every envelope in the store].
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JudgeChoice {
    /// Machine checks only.
    Rule,
    /// The judge model for every question.
    External,
    /// Machine check when present, judge model otherwise.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectChoice {
    Best,
    Random,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Envelope files [default: every envelope in the store].
    pub files: Vec<PathBuf>,
    /// Questions JSONL; prompts not listed get questions from their Requirements.
    #[arg(long)]
    pub questions: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = JudgeChoice::Mixed)]
    pub judge: JudgeChoice,
    /// Selection policy; `random` uses --seed (default 0).
    #[arg(long, value_enum, default_value_t = SelectChoice::Best)]
    pub select: SelectChoice,
    /// Write the JSON curation report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Envelope files [default: every envelope in the store].
    pub files: Vec<PathBuf>,
    /// Curation report naming the selected envelopes.
    #[arg(long)]
    pub report: PathBuf,
    /// Write the JSONL here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Curation report JSON.
    pub report: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Operational(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn op(msg: impl std::fmt::Display) -> Self {
        CliError::Operational(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Operational(_) => 1,
        }
    }
}

/// Result of a subcommand: human text, JSON body and whether any item failed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub text: String,
    pub json: Value,
    pub failed: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Keygen(_) => "keygen",
            Command::DidDoc(_) => "did-doc init",
            Command::Render(_) => "render",
            Command::Decompose(_) => "decompose",
            Command::Generate(_) => "generate",
            Command::Issue(_) => "issue",
            Command::Verify(_) => "verify",
            Command::Curate(_) => "curate",
            Command::ExportFt(_) => "export-ft",
            Command::Metrics(_) => "metrics",
        }
    }
}

fn envelope_json(command: &str, body: Value) -> Value {
    let mut doc = json!({"schema_version": SCHEMA_VERSION, "command": command});
    if let (Value::Object(target), Value::Object(fields)) = (&mut doc, body) {
        target.extend(fields);
    }
    doc
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_target(false)
        .format_timestamp(None)
        .try_init();
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.global.verbose);
    let name = cli.command.name();
    let json_mode = cli.global.json;
    let result =
        config::Settings::resolve(&cli.global).and_then(|settings| commands::dispatch(&cli.command, &settings));
    let mut stdout = std::io::stdout().lock();
    match result {
        Ok(outcome) => {
            if json_mode {
                let doc = envelope_json(name, outcome.json);
                let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).expect("JSON values serialize"));
            } else {
                let _ = write!(stdout, "{}", outcome.text);
            }
            i32::from(outcome.failed)
        }
        Err(e) => {
            if json_mode {
                let kind = match e {
                    CliError::Usage(_) => "usage",
                    CliError::Operational(_) => "operational",
                };
                let doc = envelope_json(name, json!({"error": {"kind": kind, "message": e.to_string()}}));
                let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).expect("JSON values serialize"));
            }
            eprintln!("aigc {name}: {e}");
            e.exit_code()
        }
    }
}
