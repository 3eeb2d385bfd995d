//! Settings resolution: flags, then `AIGC_*` environment variables (both
//! handled by clap), then the config file, then defaults.
//!
//! The config file is TOML with these optional top-level keys:
//!
//! ```toml
//! store_dir = "store"
//! key_file = "aigc-key.json"
//! did_dir = "dids"
//! offline = true
//! insecure_http = false
//! endpoint = "https://api.example.com/v1"
//! models = ["openai/gpt-oss-20b"]
//! mock = "mock.jsonl"
//! judge_endpoint = "https://api.example.com/v1"
//! judge_model = "judge-model"
//! judge_mock = "judge.jsonl"
//! issuer_name = "Example Lab"
//! concurrency = 4
//! seed = 7
//! ```
//!
//! Relative paths in the file are taken relative to the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::{CliError, GlobalArgs};

pub const DEFAULT_CONFIG_FILE: &str = "aigc.toml";

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store_dir: Option<PathBuf>,
    pub key_file: Option<PathBuf>,
    pub did_dir: Option<PathBuf>,
    pub offline: Option<bool>,
    pub insecure_http: Option<bool>,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub models: Option<Vec<String>>,
    pub mock: Option<PathBuf>,
    pub judge_endpoint: Option<String>,
    pub judge_model: Option<String>,
    pub judge_mock: Option<PathBuf>,
    pub issuer_name: Option<String>,
    pub concurrency: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let mut config: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in
            [&mut config.store_dir, &mut config.key_file, &mut config.did_dir, &mut config.mock, &mut config.judge_mock]
                .into_iter()
                .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// Effective settings after precedence is applied.
#[derive(Debug, Clone)]
pub struct Settings {
    pub json: bool,
    pub store_dir: PathBuf,
    pub key_file: PathBuf,
    pub did_dir: Option<PathBuf>,
    pub offline: bool,
    pub insecure_http: bool,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub models: Vec<String>,
    pub mock: Option<PathBuf>,
    pub judge_endpoint: Option<String>,
    pub judge_model: Option<String>,
    pub judge_mock: Option<PathBuf>,
    pub issuer_name: Option<String>,
    pub concurrency: usize,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None if Path::new(DEFAULT_CONFIG_FILE).is_file() => FileConfig::load(Path::new(DEFAULT_CONFIG_FILE))?,
            None => FileConfig::default(),
        };
        let concurrency = args
            .concurrency
            .or(file.concurrency)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()).min(8));
        if concurrency == 0 {
            return Err(CliError::usage("concurrency must be at least 1"));
        }
        Ok(Self {
            json: args.json,
            store_dir: args.store.clone().or(file.store_dir).unwrap_or_else(|| "store".into()),
            key_file: args.key.clone().or(file.key_file).unwrap_or_else(|| "aigc-key.json".into()),
            did_dir: args.did_dir.clone().or(file.did_dir),
            offline: args.offline || file.offline.unwrap_or(false),
            insecure_http: args.insecure_http || file.insecure_http.unwrap_or(false),
            endpoint: args.endpoint.clone().or(file.endpoint),
            api_key: args.api_key.clone().or(file.api_key),
            models: if args.model.is_empty() { file.models.unwrap_or_default() } else { args.model.clone() },
            mock: args.mock.clone().or(file.mock),
            judge_endpoint: args.judge_endpoint.clone().or(file.judge_endpoint),
            judge_model: args.judge_model.clone().or(file.judge_model),
            judge_mock: args.judge_mock.clone().or(file.judge_mock),
            issuer_name: args.issuer_name.clone().or(file.issuer_name),
            concurrency,
            seed: args.seed.or(file.seed),
        })
    }
}
