use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use uuid::Uuid;

use aigc_core::client::{ChatClient, HttpChatClient, MockChatClient};
use aigc_core::curation::{
    compute_metrics, curate, export_finetune, group_by_prompt, metrics_table, parse_questions_jsonl, prompt_id,
    CandidateScore, CurationReport, ExternalJudge, Judge, MixedJudge, RuleJudge, SelectionPolicy,
};
use aigc_core::did::{DidDocument, DidResolver, DirectorySource, HttpSource};
use aigc_core::envelope::{
    build_envelope_with_rng, format_timestamp, parse_timestamp, AigcEnvelope, GeneratedContent, HyperParameters,
    IssuerRef, ModelRef,
};
use aigc_core::generation::{extract_thought, generate};
use aigc_core::par::parallel_map;
use aigc_core::prompt::{
    decompose_plain_prompt, main_file_with_includes, module_to_markup, parse_main_file, prompt_to_markup, FsResolver,
    ModelExtractor, PromptExtractor, RuleExtractor, RuleMode, StructuredPrompt,
};
use aigc_core::proof::{keygen, sign_envelope, split_did_url, KeyFile, KeyPair};
use aigc_core::store::{read_envelope_file, verify_entry, EnvelopeStore, StoreError, VerifyEntry};

use crate::config::Settings;
use crate::{
    CliError, Command, CurateArgs, DecomposeArgs, DecomposeMode, DidDocCommand, DidDocInitArgs, ExportArgs,
    GenerateArgs, HyperArgs, IssueArgs, JudgeChoice, KeygenArgs, MetricsArgs, Outcome, RenderArgs, SelectChoice,
    VerifyArgs,
};

const DEFAULT_IRI_BASE: &str = "https://huggingface.co/";
const DEFAULT_JUDGE_MODEL: &str = "judge";

pub fn dispatch(command: &Command, settings: &Settings) -> Result<Outcome, CliError> {
    match command {
        Command::Keygen(a) => keygen_cmd(a, settings),
        Command::DidDoc(DidDocCommand::Init(a)) => did_doc_init(a, settings),
        Command::Render(a) => render(a),
        Command::Decompose(a) => decompose(a, settings),
        Command::Generate(a) => generate_cmd(a, settings),
        Command::Issue(a) => issue(a, settings),
        Command::Verify(a) => verify(a, settings),
        Command::Curate(a) => curate_cmd(a, settings),
        Command::ExportFt(a) => export_ft(a, settings),
        Command::Metrics(a) => metrics(a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::op(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::op(format!("{}: {e}", path.display())))
}

fn load_key(settings: &Settings) -> Result<KeyFile, CliError> {
    KeyFile::load(&settings.key_file).map_err(|e| {
        CliError::op(format!(
            "cannot load key file {}: {e} (create one with `aigc keygen`)",
            settings.key_file.display()
        ))
    })
}

fn load_prompt(main: &Path) -> Result<StructuredPrompt, CliError> {
    let text = read_text(main)?;
    parse_main_file(&text, &FsResolver::for_main_file(main))
        .map_err(|e| CliError::op(format!("{}: {e}", main.display())))
}

/// `label` or `label=iri`; a bare label maps to a Hugging Face model page.
pub fn parse_model_spec(spec: &str) -> Result<ModelRef, CliError> {
    let (label, iri) = match spec.split_once('=') {
        Some((label, iri)) => (label.trim(), iri.trim().to_string()),
        None => (spec.trim(), format!("{DEFAULT_IRI_BASE}{}", spec.trim())),
    };
    if label.is_empty() {
        return Err(CliError::usage(format!("model {spec:?} has an empty label")));
    }
    ModelRef::new(iri, label).map_err(|e| CliError::usage(format!("model {spec:?}: {e}")))
}

fn models(settings: &Settings) -> Result<Vec<ModelRef>, CliError> {
    if settings.models.is_empty() {
        return Err(CliError::usage("no model given; use --model or `models` in the config file"));
    }
    settings.models.iter().map(|m| parse_model_spec(m)).collect()
}

fn hyper(args: &HyperArgs) -> Result<HyperParameters, CliError> {
    HyperParameters::new(args.temperature, args.max_tokens).map_err(|e| CliError::usage(e.to_string()))
}

fn make_client(
    mock: Option<&PathBuf>,
    endpoint: Option<&String>,
    api_key: Option<&String>,
    what: &str,
) -> Result<Box<dyn ChatClient>, CliError> {
    if let Some(path) = mock {
        return Ok(Box::new(MockChatClient::from_file(path).map_err(CliError::op)?));
    }
    match endpoint {
        Some(url) => Ok(Box::new(HttpChatClient::new(url.clone(), api_key.cloned()).map_err(CliError::op)?)),
        None => Err(CliError::usage(format!("no {what} endpoint; set --endpoint or --mock"))),
    }
}

fn generation_client(settings: &Settings) -> Result<Box<dyn ChatClient>, CliError> {
    make_client(settings.mock.as_ref(), settings.endpoint.as_ref(), settings.api_key.as_ref(), "generation")
}

fn judge_client(settings: &Settings) -> Result<Box<dyn ChatClient>, CliError> {
    if settings.judge_mock.is_some() || settings.judge_endpoint.is_some() {
        make_client(settings.judge_mock.as_ref(), settings.judge_endpoint.as_ref(), settings.api_key.as_ref(), "judge")
    } else {
        make_client(settings.mock.as_ref(), settings.endpoint.as_ref(), settings.api_key.as_ref(), "judge")
    }
}

pub fn key_resolver(settings: &Settings) -> Result<DidResolver, CliError> {
    if settings.offline {
        let dir = settings.did_dir.as_ref().ok_or_else(|| CliError::usage("--offline needs --did-dir"))?;
        return Ok(DidResolver::new(Box::new(DirectorySource::new(dir))));
    }
    if let Some(dir) = &settings.did_dir {
        return Ok(DidResolver::new(Box::new(DirectorySource::new(dir))));
    }
    Ok(DidResolver::new(Box::new(HttpSource::new().allow_insecure_http(settings.insecure_http))))
}

/// Envelope files named on the command line, or every file in the store.
fn envelope_paths(files: &[PathBuf], settings: &Settings) -> Result<Vec<PathBuf>, CliError> {
    if !files.is_empty() {
        return Ok(files.to_vec());
    }
    let store = EnvelopeStore::open(&settings.store_dir).map_err(CliError::op)?;
    Ok(store.index().map_err(CliError::op)?.into_values().collect())
}

fn read_all(paths: &[PathBuf], concurrency: usize) -> Vec<Result<AigcEnvelope, StoreError>> {
    parallel_map(paths, concurrency, |p| read_envelope_file(p))
}

fn keygen_cmd(args: &KeygenArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let seed = args
        .seed_hex
        .as_deref()
        .map(|s| hex::decode(s.trim()).map_err(|e| CliError::usage(format!("--seed-hex: {e}"))))
        .transpose()?;
    let key = keygen(seed.as_deref()).map_err(|e| CliError::usage(e.to_string()))?;
    if !args.did.starts_with("did:web:") {
        return Err(CliError::usage(format!("{} is not a did:web identifier", args.did)));
    }
    let vm = format!("{}#{}", args.did, args.fragment);
    let out = args.out.clone().unwrap_or_else(|| settings.key_file.clone());
    let public = key.public_multibase();
    KeyFile { id: vm.clone(), key }.save(&out).map_err(CliError::op)?;
    Ok(Outcome {
        text: format!("wrote {}\nverification method: {vm}\npublic key: {public}\n", out.display()),
        json: json!({"key_file": out, "verification_method": vm, "public_key_multibase": public}),
        failed: false,
    })
}

fn did_doc_init(args: &DidDocInitArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let key = load_key(settings)?;
    let (did, fragment) = split_did_url(&key.id)
        .ok_or_else(|| CliError::op(format!("key id {} is not a DID URL with a fragment", key.id)))?;
    let doc = DidDocument::for_key(did, fragment, &key.key.public());
    let text = doc.to_json_pretty();
    let mut written = Vec::new();
    if let Some(out) = &args.out {
        write_text(out, &text)?;
        written.push(out.clone());
    }
    if args.into_did_dir {
        let dir = settings.did_dir.as_ref().ok_or_else(|| CliError::usage("--into-did-dir needs --did-dir"))?;
        fs::create_dir_all(dir).map_err(|e| CliError::op(format!("{}: {e}", dir.display())))?;
        let path = dir.join(DirectorySource::file_name(did));
        write_text(&path, &text)?;
        written.push(path);
    }
    let body: Value = serde_json::from_str(&text).expect("DID document is JSON");
    Ok(Outcome {
        text: if written.is_empty() {
            text
        } else {
            written.iter().map(|p| format!("wrote {}\n", p.display())).collect()
        },
        json: json!({"did": did, "written": written, "document": body}),
        failed: false,
    })
}

fn modules_json(prompt: &StructuredPrompt) -> Value {
    prompt
        .modules()
        .iter()
        .map(|m| json!({"kind": m.kind().type_name(), "value": m.value(), "source": m.source_id()}))
        .collect()
}

fn render(args: &RenderArgs) -> Result<Outcome, CliError> {
    let prompt = load_prompt(&args.main)?;
    let markdown = prompt.rendered().to_string();
    Ok(Outcome {
        json: json!({"prompt_id": prompt_id(&prompt), "markdown": markdown, "modules": modules_json(&prompt)}),
        text: format!("{markdown}\n"),
        failed: false,
    })
}

fn decompose(args: &DecomposeArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let text = if args.input.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::op(format!("stdin: {e}")))?;
        s
    } else {
        read_text(&args.input)?
    };
    let client;
    let extractor: Box<dyn PromptExtractor + '_> = match args.mode {
        DecomposeMode::Auto => Box::new(RuleExtractor { mode: RuleMode::Auto }),
        DecomposeMode::Headings => Box::new(RuleExtractor::headings()),
        DecomposeMode::Sentences => Box::new(RuleExtractor::sentences()),
        DecomposeMode::Model => {
            let model = models(settings)?.remove(0);
            client = generation_client(settings)?;
            Box::new(ModelExtractor { client: client.as_ref(), model: model.label().to_string() })
        }
    };
    let prompt = decompose_plain_prompt(&text, extractor.as_ref()).map_err(CliError::op)?;
    let mut written = Vec::new();
    let out_text = match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::op(format!("{}: {e}", dir.display())))?;
            for m in prompt.modules() {
                let path = dir.join(format!("{}.poml", m.kind().tag()));
                write_text(&path, &(module_to_markup(m) + "\n"))?;
                written.push(path);
            }
            let main = dir.join("main.poml");
            write_text(&main, &main_file_with_includes(&prompt))?;
            written.push(main);
            written.iter().map(|p| format!("wrote {}\n", p.display())).collect()
        }
        None => prompt_to_markup(&prompt),
    };
    Ok(Outcome {
        json: json!({
            "prompt_id": prompt_id(&prompt),
            "modules": modules_json(&prompt),
            "markup": prompt_to_markup(&prompt),
            "written": written,
        }),
        text: out_text,
        failed: false,
    })
}

fn generate_cmd(args: &GenerateArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let prompt = load_prompt(&args.main)?;
    let model = models(settings)?.remove(0);
    let hyper = hyper(&args.hyper)?;
    let client = generation_client(settings)?;
    let result = generate(prompt.rendered(), &model, &hyper, client.as_ref()).map_err(CliError::op)?;
    let confidence = result.confidence().map_err(CliError::op)?;
    let (thought, content) = extract_thought(&result.text);
    Ok(Outcome {
        json: json!({
            "model": model.label(),
            "text": result.text,
            "content": content,
            "thought": thought.as_ref().map(|t| t.value()),
            "confidence": confidence.map(|c| json!({
                "mean": c.mean(), "min": c.min(), "max": c.max(), "count": c.count(), "perplexity": c.perplexity()
            })),
        }),
        text: format!("{content}\n"),
        failed: false,
    })
}

struct IssueTask {
    index: usize,
    main: PathBuf,
    prompt: StructuredPrompt,
    model: ModelRef,
}

struct IssueContext<'a> {
    settings: &'a Settings,
    hyper: HyperParameters,
    key: KeyPair,
    vm: String,
    issuer: IssuerRef,
    valid_from: DateTime<Utc>,
    created: DateTime<Utc>,
    content_override: Option<String>,
    client: Option<Box<dyn ChatClient>>,
    store: EnvelopeStore,
}

fn issue_one(ctx: &IssueContext<'_>, task: &IssueTask) -> Result<(Uuid, PathBuf), String> {
    let content = match &ctx.content_override {
        Some(text) => {
            let (thought, _) = extract_thought(text);
            GeneratedContent::new(text.clone(), task.prompt.clone(), task.model.clone(), ctx.hyper.clone())
                .with_thought(thought)
        }
        None => {
            let client = ctx.client.as_ref().expect("client exists without --content-file");
            generate(task.prompt.rendered(), &task.model, &ctx.hyper, client.as_ref())
                .and_then(|r| r.into_content(task.prompt.clone()))
                .map_err(|e| e.to_string())?
        }
    };
    let mut rng = match ctx.settings.seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(task.index as u64);
            rng
        }
        None => ChaCha8Rng::from_entropy(),
    };
    let env = build_envelope_with_rng(content, ctx.issuer.clone(), ctx.valid_from, None, &mut rng)
        .map_err(|e| e.to_string())?;
    let signed = sign_envelope(&env, &ctx.key, &ctx.vm, ctx.created).map_err(|e| e.to_string())?;
    let path = ctx.store.save(&signed).map_err(|e| e.to_string())?;
    Ok((signed.id, path))
}

fn issue(args: &IssueArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let models = models(settings)?;
    let hyper = hyper(&args.hyper)?;
    let content_override = match &args.content_file {
        Some(path) => {
            if args.mains.len() != 1 || models.len() != 1 {
                return Err(CliError::usage("--content-file needs exactly one prompt and one model"));
            }
            Some(read_text(path)?)
        }
        None => None,
    };
    let key = load_key(settings)?;
    let (did, _) = split_did_url(&key.id)
        .ok_or_else(|| CliError::op(format!("key id {} is not a DID URL with a fragment", key.id)))?;
    let issuer = IssuerRef::new(did, settings.issuer_name.clone().unwrap_or_else(|| did.to_string()));
    let valid_from = match &args.valid_from {
        Some(s) => parse_timestamp("--valid-from", s).map_err(|e| CliError::usage(e.to_string()))?,
        None => Utc::now(),
    };
    let created = match &args.created {
        Some(s) => parse_timestamp("--created", s).map_err(|e| CliError::usage(e.to_string()))?,
        None => valid_from,
    };
    let client = match content_override {
        Some(_) => None,
        None => Some(generation_client(settings)?),
    };
    let mut tasks = Vec::new();
    for main in &args.mains {
        let prompt = load_prompt(main)?;
        for model in &models {
            tasks.push(IssueTask {
                index: tasks.len(),
                main: main.clone(),
                prompt: prompt.clone(),
                model: model.clone(),
            });
        }
    }
    let ctx = IssueContext {
        settings,
        hyper,
        vm: key.id.clone(),
        key: key.key,
        issuer,
        valid_from,
        created,
        content_override,
        client,
        store: EnvelopeStore::open(&settings.store_dir).map_err(CliError::op)?,
    };
    let results = parallel_map(&tasks, settings.concurrency, |t| issue_one(&ctx, t));
    let mut text = String::new();
    let mut items = Vec::new();
    let mut failed = false;
    for (task, result) in tasks.iter().zip(results) {
        let pid = prompt_id(&task.prompt);
        match result {
            Ok((id, path)) => {
                let _ = writeln!(text, "{id}\t{}\t{}\t{}", task.model.label(), task.main.display(), path.display());
                items.push(json!({
                    "prompt_file": task.main, "prompt_id": pid, "model": task.model.label(),
                    "envelope_id": id, "path": path,
                }));
            }
            Err(e) => {
                failed = true;
                log::error!("{} with {}: {e}", task.main.display(), task.model.label());
                let _ = writeln!(text, "FAILED\t{}\t{}\t{e}", task.model.label(), task.main.display());
                items.push(json!({
                    "prompt_file": task.main, "prompt_id": pid, "model": task.model.label(), "error": e,
                }));
            }
        }
    }
    let issued = items.iter().filter(|i| i.get("error").is_none()).count();
    let _ = writeln!(text, "issued {issued} of {} envelopes into {}", tasks.len(), settings.store_dir.display());
    Ok(Outcome {
        json: json!({"issued": issued, "failed": tasks.len() - issued, "envelopes": items,
                     "valid_from": format_timestamp(&valid_from)}),
        text,
        failed,
    })
}

fn verify(args: &VerifyArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let resolver = key_resolver(settings)?;
    let paths = envelope_paths(&args.files, settings)?;
    let entries: Vec<VerifyEntry> =
        parallel_map(&paths, settings.concurrency, |p| verify_entry(p, read_envelope_file(p), &resolver));
    let verified = entries.iter().filter(|e| e.status == "Verified").count();
    let mut text = String::new();
    for e in &entries {
        let _ = write!(text, "{}: {}", e.path.display(), e.status);
        if let Some(d) = &e.detail {
            let _ = write!(text, " ({d})");
        }
        text.push('\n');
    }
    let _ = writeln!(text, "{verified} verified, {} failed", entries.len() - verified);
    Ok(Outcome {
        json: json!({"entries": entries, "verified": verified, "failed": entries.len() - verified}),
        failed: verified != entries.len(),
        text,
    })
}

fn curate_cmd(args: &CurateArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let questions = match &args.questions {
        Some(path) => {
            parse_questions_jsonl(&read_text(path)?).map_err(|e| CliError::op(format!("{}: {e}", path.display())))?
        }
        None => BTreeMap::new(),
    };
    let policy = match args.select {
        SelectChoice::Best => SelectionPolicy::Best,
        SelectChoice::Random => SelectionPolicy::Random { seed: settings.seed.unwrap_or(0) },
    };
    let resolver = key_resolver(settings)?;
    let paths = envelope_paths(&args.files, settings)?;
    let mut envelopes = Vec::new();
    let mut unreadable = Vec::new();
    for (path, parsed) in paths.iter().zip(read_all(&paths, settings.concurrency)) {
        match parsed {
            Ok(env) => envelopes.push(env),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                unreadable.push(json!({"path": path, "reason": e.to_string()}));
            }
        }
    }
    let groups = group_by_prompt(envelopes);
    let client;
    let judge: Box<dyn Judge + '_> = match args.judge {
        JudgeChoice::Rule => Box::new(RuleJudge),
        JudgeChoice::External | JudgeChoice::Mixed => {
            client = judge_client(settings)?;
            let external = ExternalJudge {
                client: client.as_ref(),
                model: settings.judge_model.clone().unwrap_or_else(|| DEFAULT_JUDGE_MODEL.into()),
            };
            if args.judge == JudgeChoice::External {
                Box::new(external)
            } else {
                Box::new(MixedJudge { external })
            }
        }
    };
    let report =
        curate(&groups, &questions, judge.as_ref(), &resolver, policy, settings.concurrency).map_err(CliError::op)?;
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.report {
        write_text(path, &(report_json.clone() + "\n"))?;
    }
    let excluded: usize = report.prompts.values().map(|p| p.exclusions.len()).sum();
    let mut text = format!(
        "{} prompts, {} selected, {excluded} candidates excluded, {} files unreadable\n",
        report.prompts.len(),
        report.selected.len(),
        unreadable.len()
    );
    text.push_str(&metrics_table(&report.metrics));
    if let Some(path) = &args.report {
        let _ = writeln!(text, "report written to {}", path.display());
    }
    Ok(Outcome {
        json: json!({
            "report": serde_json::from_str::<Value>(&report_json).expect("report is JSON"),
            "unreadable": unreadable,
        }),
        text,
        failed: false,
    })
}

fn load_report(path: &Path) -> Result<CurationReport, CliError> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::op(format!("{}: not a curation report: {e}", path.display())))
}

fn export_ft(args: &ExportArgs, settings: &Settings) -> Result<Outcome, CliError> {
    let report = load_report(&args.report)?;
    let resolver = key_resolver(settings)?;
    let paths = envelope_paths(&args.files, settings)?;
    let mut envelopes = BTreeMap::new();
    for (path, parsed) in paths.iter().zip(read_all(&paths, settings.concurrency)) {
        match parsed {
            Ok(env) => {
                envelopes.insert(env.id, env);
            }
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    let jsonl = export_finetune(&report.selected, &envelopes, &resolver).map_err(CliError::op)?;
    let count = jsonl.lines().count();
    let text = match &args.out {
        Some(out) => {
            write_text(out, &jsonl)?;
            format!("wrote {count} examples to {}\n", out.display())
        }
        None => jsonl.clone(),
    };
    Ok(Outcome {
        json: json!({
            "count": count,
            "out": args.out,
            "lines": jsonl.lines().map(|l| serde_json::from_str::<Value>(l).expect("export lines are JSON")).collect::<Vec<_>>(),
        }),
        text,
        failed: false,
    })
}

fn metrics(args: &MetricsArgs) -> Result<Outcome, CliError> {
    let report = load_report(&args.report)?;
    let chosen: Vec<&CandidateScore> = report
        .selected
        .iter()
        .map(|(pid, id)| {
            report
                .prompts
                .get(pid)
                .and_then(|p| p.scores.iter().find(|s| s.envelope_id == *id))
                .ok_or_else(|| CliError::op(format!("report selects {id} for {pid} but has no score for it")))
        })
        .collect::<Result<_, _>>()?;
    let m = compute_metrics(chosen).map_err(CliError::op)?;
    Ok(Outcome {
        text: metrics_table(&m),
        json: json!({
            "rfr": m.rfr, "frfr": m.frfr,
            "rfr_percent": format!("{:.2}", m.rfr * 100.0),
            "frfr_percent": format!("{:.2}", m.frfr * 100.0),
            "metrics": m,
        }),
        failed: false,
    })
}
