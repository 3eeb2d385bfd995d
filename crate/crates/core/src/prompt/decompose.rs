use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{normalize_newlines, ModuleKind, PromptError, PromptModule, StructuredPrompt};
use crate::client::{ChatClient, ChatMessage, ChatRequest};

/// Splits plain prompt text into modules.
pub trait PromptExtractor {
    fn extract(&self, text: &str) -> Result<Vec<PromptModule>, PromptError>;
}

/// Decomposes a plain (or previously rendered) prompt into a [`StructuredPrompt`].
pub fn decompose_plain_prompt(text: &str, extractor: &dyn PromptExtractor) -> Result<StructuredPrompt, PromptError> {
    if text.trim().is_empty() {
        return Err(PromptError::EmptyPrompt);
    }
    let modules = extractor.extract(text)?;
    if modules.is_empty() {
        return Err(PromptError::ExtractionFailed("extractor returned no modules".into()));
    }
    StructuredPrompt::new(modules)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RuleMode {
    /// Headings when the text has at least one module heading, sentences otherwise.
    #[default]
    Auto,
    Headings,
    Sentences,
}

/// Deterministic, model-free extractor.
///
/// Heading mode reads Markdown headings (`#` to `######`) whose text is a
/// module heading, case-insensitively: `Role`, `Background`, `Requirements`,
/// `Example`, `Output Format` or `OutputFormat`. Everything up to the next
/// module heading belongs to that module. Text before the first heading goes
/// to Requirements.
///
/// Sentence mode splits each line into sentences at `.`, `!` or `?` followed
/// by whitespace (a bare list marker such as `1.` or `a)` does not end a
/// sentence) and classifies each sentence by the first matching rule:
///
/// 1. starts with `you are`, `you're`, `act as`, `as a `, `as an `,
///    `imagine you are` or `your role` → Role
/// 2. starts with `background:` or `context:` → Background
/// 3. starts with `for example`, `for instance`, `example:` or `e.g.` → Example
/// 4. contains the word `output`, `format`, `formatted` or `formatting` → OutputFormat
/// 5. anything else → Requirements
///
/// Sentences of one kind are joined in their original order, with a space
/// when they came from the same line and a newline otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleExtractor {
    pub mode: RuleMode,
}

impl RuleExtractor {
    pub fn headings() -> Self {
        Self { mode: RuleMode::Headings }
    }

    pub fn sentences() -> Self {
        Self { mode: RuleMode::Sentences }
    }
}

static HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^#{1,6}[ \t]+(role|background|requirements|example|output[ \t]?format)[ \t]*$").unwrap()
});

static OUTPUT_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(output|format|formatted|formatting)\b").unwrap());

static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(\d+|[A-Za-z]|[ivxIVX]+)[.)]$").unwrap());

fn heading_kind(line: &str) -> Option<ModuleKind> {
    let caps = HEADING.captures(line.trim_end())?;
    let word = caps[1].to_ascii_lowercase();
    Some(match word.as_str() {
        "role" => ModuleKind::Role,
        "background" => ModuleKind::Background,
        "requirements" => ModuleKind::Requirements,
        "example" => ModuleKind::Example,
        _ => ModuleKind::OutputFormat,
    })
}

impl PromptExtractor for RuleExtractor {
    fn extract(&self, text: &str) -> Result<Vec<PromptModule>, PromptError> {
        let text = normalize_newlines(text);
        let use_headings = match self.mode {
            RuleMode::Headings => true,
            RuleMode::Sentences => false,
            RuleMode::Auto => text.lines().any(|l| heading_kind(l).is_some()),
        };
        let sections = if use_headings { by_headings(&text) } else { by_sentences(&text) };
        sections.into_iter().filter(|(_, v)| !v.trim().is_empty()).map(|(k, v)| PromptModule::new(k, v)).collect()
    }
}

fn by_headings(text: &str) -> BTreeMap<ModuleKind, String> {
    let mut sections: BTreeMap<ModuleKind, String> = BTreeMap::new();
    let mut current = ModuleKind::Requirements;
    let mut buf = String::new();
    let mut flush = |kind: ModuleKind, buf: &mut String| {
        let body = buf.trim();
        if !body.is_empty() {
            let entry = sections.entry(kind).or_default();
            if !entry.is_empty() {
                entry.push_str("\n\n");
            }
            entry.push_str(body);
        }
        buf.clear();
    };
    for line in text.lines() {
        if let Some(kind) = heading_kind(line) {
            flush(current, &mut buf);
            current = kind;
        } else {
            buf.push_str(line);
            buf.push('\n');
        }
    }
    flush(current, &mut buf);
    sections
}

fn classify(sentence: &str) -> ModuleKind {
    let lower = sentence.trim().to_lowercase();
    const ROLE: &[&str] = &["you are", "you're", "act as", "as a ", "as an ", "imagine you are", "your role"];
    const BACKGROUND: &[&str] = &["background:", "context:"];
    const EXAMPLE: &[&str] = &["for example", "for instance", "example:", "e.g."];
    if ROLE.iter().any(|p| lower.starts_with(p)) {
        ModuleKind::Role
    } else if BACKGROUND.iter().any(|p| lower.starts_with(p)) {
        ModuleKind::Background
    } else if EXAMPLE.iter().any(|p| lower.starts_with(p)) {
        ModuleKind::Example
    } else if OUTPUT_WORD.is_match(&lower) {
        ModuleKind::OutputFormat
    } else {
        ModuleKind::Requirements
    }
}

fn split_sentences(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_boundary = chars.peek().is_none_or(|(_, n)| n.is_whitespace());
        let end = i + c.len_utf8();
        if at_boundary && !LIST_MARKER.is_match(&line[start..end]) {
            let s = line[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = line[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

fn by_sentences(text: &str) -> BTreeMap<ModuleKind, String> {
    let mut sections: BTreeMap<ModuleKind, (String, usize)> = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        for sentence in split_sentences(line) {
            let kind = classify(sentence);
            let (buf, last_line) = sections.entry(kind).or_insert((String::new(), line_no));
            if !buf.is_empty() {
                buf.push(if *last_line == line_no { ' ' } else { '\n' });
            }
            buf.push_str(sentence);
            *last_line = line_no;
        }
    }
    sections.into_iter().map(|(k, (v, _))| (k, v)).collect()
}

const EXTRACTION_INSTRUCTION: &str = "Split the prompt below into the modules Role, Background, \
Requirements, Example and OutputFormat. Reply with a single JSON object whose keys are those \
module names and whose values are the verbatim prompt text for that module, or null when the \
prompt has no such part. Do not add any other text.\n\nPrompt:\n";

/// Delegates extraction to a chat model that replies with a JSON object keyed
/// by module type name.
pub struct ModelExtractor<'a> {
    pub client: &'a dyn ChatClient,
    pub model: String,
}

impl PromptExtractor for ModelExtractor<'_> {
    fn extract(&self, text: &str) -> Result<Vec<PromptModule>, PromptError> {
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage::user(format!("{EXTRACTION_INSTRUCTION}{text}"))],
            temperature: 0.0,
            max_tokens: 4096,
            logprobs: false,
        };
        let reply = self.client.complete(&request).map_err(|e| PromptError::ExtractionFailed(e.to_string()))?;
        let json = strip_code_fence(&reply.text);
        let object: BTreeMap<String, Option<String>> = serde_json::from_str(json)
            .map_err(|e| PromptError::ExtractionFailed(format!("reply is not a module object: {e}")))?;
        let mut modules = Vec::new();
        for (key, value) in object {
            let kind = ModuleKind::from_type_name(&key)
                .ok_or_else(|| PromptError::ExtractionFailed(format!("unknown module {key:?}")))?;
            if let Some(v) = value.filter(|v| !v.trim().is_empty()) {
                modules.push(PromptModule::new(kind, v)?);
            }
        }
        Ok(modules)
    }
}

fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    match t.strip_prefix("```") {
        Some(inner) => {
            let inner = inner.trim_start_matches("json");
            inner.strip_suffix("```").unwrap_or(inner).trim()
        }
        None => t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{ChatResponse, MockChatClient};
    use crate::prompt::render_markdown;
    use proptest::prelude::*;

    fn values(p: &StructuredPrompt) -> Vec<(ModuleKind, &str)> {
        p.modules().iter().map(|m| (m.kind(), m.value())).collect()
    }

    #[test]
    fn rule_extractor_splits_sentences() {
        let p = decompose_plain_prompt(
            "You are a poet. Write a haiku about rain. Output as JSON.",
            &RuleExtractor::default(),
        )
        .unwrap();
        assert_eq!(
            values(&p),
            vec![
                (ModuleKind::Role, "You are a poet."),
                (ModuleKind::Requirements, "Write a haiku about rain."),
                (ModuleKind::OutputFormat, "Output as JSON."),
            ]
        );
    }

    #[test]
    fn list_markers_do_not_end_sentences() {
        let p = decompose_plain_prompt(
            "Act as an editor.\n1. Keep it under 200 words.\n2. Mention the investor.\nFor example: NEDO funded it.",
            &RuleExtractor::sentences(),
        )
        .unwrap();
        assert_eq!(
            values(&p),
            vec![
                (ModuleKind::Role, "Act as an editor."),
                (ModuleKind::Requirements, "1. Keep it under 200 words.\n2. Mention the investor."),
                (ModuleKind::Example, "For example: NEDO funded it."),
            ]
        );
    }

    #[test]
    fn information_is_not_a_format_keyword() {
        assert_eq!(classify("Include contact information."), ModuleKind::Requirements);
        assert_eq!(classify("Use a table format!"), ModuleKind::OutputFormat);
        assert_eq!(classify("Context: a startup raised money."), ModuleKind::Background);
    }

    #[test]
    fn empty_text_rejected() {
        assert_eq!(decompose_plain_prompt("  \n", &RuleExtractor::default()), Err(PromptError::EmptyPrompt));
    }

    #[test]
    fn rendered_markdown_parses_back() {
        let md = "# Role\n\nYou are an assistant for Practical Writing tasks.\n\n# Requirements\n\n1. ≤200 words\n2. mention the investor\n\n# Output Format\n\nPlain text.\n";
        let p = decompose_plain_prompt(md, &RuleExtractor::default()).unwrap();
        assert_eq!(render_markdown(&p), md);
    }

    #[test]
    fn preamble_before_headings_becomes_requirements() {
        let p = decompose_plain_prompt("Be brief.\n## role\nYou are terse.", &RuleExtractor::headings()).unwrap();
        assert_eq!(values(&p), vec![(ModuleKind::Role, "You are terse."), (ModuleKind::Requirements, "Be brief.")]);
    }

    #[test]
    fn model_extractor_reads_json_reply() {
        let client = MockChatClient::scripted(vec![ChatResponse::text(
            "```json\n{\"Role\": \"You are a poet.\", \"Background\": null, \"Requirements\": \"Write a haiku.\"}\n```",
        )]);
        let ex = ModelExtractor { client: &client, model: "mock".into() };
        let p = decompose_plain_prompt("You are a poet. Write a haiku.", &ex).unwrap();
        assert_eq!(
            values(&p),
            vec![(ModuleKind::Role, "You are a poet."), (ModuleKind::Requirements, "Write a haiku.")]
        );
    }

    #[test]
    fn model_extractor_failures() {
        let bad = MockChatClient::scripted(vec![ChatResponse::text("sorry, cannot")]);
        let ex = ModelExtractor { client: &bad, model: "mock".into() };
        assert!(matches!(decompose_plain_prompt("x", &ex), Err(PromptError::ExtractionFailed(_))));
        let empty = MockChatClient::scripted(vec![ChatResponse::text("{\"Role\": null}")]);
        let ex = ModelExtractor { client: &empty, model: "mock".into() };
        assert!(matches!(decompose_plain_prompt("x", &ex), Err(PromptError::ExtractionFailed(_))));
    }

    fn module_value() -> impl Strategy<Value = String> {
        // Lines never look like module headings; values are already trimmed.
        proptest::collection::vec("[A-Za-z0-9,;:'()≤ -]{1,30}[.!?]?", 1..4)
            .prop_map(|lines| lines.join("\n"))
            .prop_filter("non-blank", |v| !v.trim().is_empty())
            .prop_map(|v| v.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("\n"))
    }

    proptest! {
        #[test]
        fn render_then_decompose_round_trips(
            picks in proptest::collection::btree_map(0usize..5, module_value(), 1..=5)
        ) {
            let modules: Vec<PromptModule> = picks
                .iter()
                .map(|(i, v)| PromptModule::new(ModuleKind::ALL[*i], v).unwrap())
                .collect();
            let prompt = StructuredPrompt::new(modules).unwrap();
            let back = decompose_plain_prompt(&render_markdown(&prompt), &RuleExtractor::headings()).unwrap();
            prop_assert_eq!(back, prompt);
        }
    }
}
