//! Model output capture: generation with per-token log-probabilities,
//! confidence statistics and leading thought-block extraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ChatClient, ChatMessage, ChatRequest, ClientError};
use crate::envelope::{ConfidenceStats, GeneratedContent, HyperParameters, ModelRef, ThoughtTrace};
use crate::prompt::StructuredPrompt;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("cannot compute confidence over an empty token list")]
    EmptyTokenList,
    #[error("token {index} has log-probability {logprob}, expected a finite value <= 0")]
    InvalidLogprob { index: usize, logprob: f64 },
    #[error(transparent)]
    Endpoint(#[from] ClientError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProb {
    pub token: String,
    /// Natural log of the sampled token's probability.
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub text: String,
    pub tokens: Vec<TokenLogProb>,
    pub model: ModelRef,
    pub hyper: HyperParameters,
    /// Set when the endpoint returned no log-probabilities; `tokens` is then empty.
    pub logprobs_unavailable: bool,
}

impl GenerationResult {
    /// Confidence over the captured tokens, absent when none were returned.
    pub fn confidence(&self) -> Result<Option<ConfidenceStats>, GenerationError> {
        if self.tokens.is_empty() {
            Ok(None)
        } else {
            compute_confidence(&self.tokens).map(Some)
        }
    }

    /// Credential subject for this output: the raw text as value, plus
    /// confidence and any leading thought block.
    pub fn into_content(self, prompt: StructuredPrompt) -> Result<GeneratedContent, GenerationError> {
        let confidence = self.confidence()?;
        let (thought, _) = extract_thought(&self.text);
        Ok(GeneratedContent::new(self.text, prompt, self.model, self.hyper)
            .with_confidence(confidence)
            .with_thought(thought))
    }
}

/// Mean, extrema and perplexity of the token log-probabilities.
pub fn compute_confidence(tokens: &[TokenLogProb]) -> Result<ConfidenceStats, GenerationError> {
    if tokens.is_empty() {
        return Err(GenerationError::EmptyTokenList);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    // Neumaier-compensated sum.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (index, t) in tokens.iter().enumerate() {
        let x = t.logprob;
        if !x.is_finite() || x > 0.0 {
            return Err(GenerationError::InvalidLogprob { index, logprob: x });
        }
        min = min.min(x);
        max = max.max(x);
        let s = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - s) + x } else { (x - s) + sum };
        sum = s;
    }
    let count = tokens.len() as u64;
    let mean = ((sum + comp) / count as f64).clamp(min, max);
    Ok(ConfidenceStats::new(mean, min, max, count).expect("statistics satisfy their invariants"))
}

/// Recognizes a leading `<tag>...</tag>` thought block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThoughtExtractor {
    tags: Vec<String>,
}

impl Default for ThoughtExtractor {
    fn default() -> Self {
        Self::new(["think", "thinking", "reasoning"])
    }
}

/// Pieces of an output around its leading thought block.
///
/// [`ThoughtSplit::reassemble`] reproduces the original text exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThoughtSplit {
    /// Whitespace before the opening tag.
    pub leading: String,
    /// Tag name and raw inner text of the block, when one was found.
    pub block: Option<(String, String)>,
    /// Whitespace between the closing tag and the content.
    pub gap: String,
    pub content: String,
}

impl ThoughtSplit {
    pub fn thought(&self) -> Option<ThoughtTrace> {
        let (tag, inner) = self.block.as_ref()?;
        ThoughtTrace::new(inner.trim(), tag.as_str()).ok()
    }

    pub fn reassemble(&self) -> String {
        match &self.block {
            Some((tag, inner)) => format!("{}<{tag}>{inner}</{tag}>{}{}", self.leading, self.gap, self.content),
            None => format!("{}{}", self.leading, self.content),
        }
    }
}

impl ThoughtExtractor {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { tags: tags.into_iter().map(Into::into).collect() }
    }

    pub fn split(&self, text: &str) -> ThoughtSplit {
        let unchanged =
            || ThoughtSplit { leading: String::new(), block: None, gap: String::new(), content: text.to_string() };
        let body = text.trim_start();
        let leading = &text[..text.len() - body.len()];
        for tag in &self.tags {
            let open = format!("<{tag}>");
            let Some(after_open) = body.strip_prefix(open.as_str()) else {
                continue;
            };
            let close = format!("</{tag}>");
            let Some(end) = after_open.find(&close) else {
                return unchanged();
            };
            let inner = &after_open[..end];
            let remainder = &after_open[end + close.len()..];
            let content = remainder.trim_start();
            return ThoughtSplit {
                leading: leading.to_string(),
                block: Some((tag.clone(), inner.to_string())),
                gap: remainder[..remainder.len() - content.len()].to_string(),
                content: content.to_string(),
            };
        }
        unchanged()
    }

    pub fn extract(&self, text: &str) -> (Option<ThoughtTrace>, String) {
        let split = self.split(text);
        (split.thought(), split.content)
    }
}

/// [`ThoughtExtractor::extract`] with the default `think`/`thinking`/`reasoning` tags.
pub fn extract_thought(text: &str) -> (Option<ThoughtTrace>, String) {
    ThoughtExtractor::default().extract(text)
}

/// Sends the rendered prompt as a single user message and captures the
/// output with its token log-probabilities.
pub fn generate(
    prompt_markdown: &str,
    model: &ModelRef,
    hyper: &HyperParameters,
    client: &dyn ChatClient,
) -> Result<GenerationResult, GenerationError> {
    let request = ChatRequest {
        model: model.label().to_string(),
        messages: vec![ChatMessage::user(prompt_markdown)],
        temperature: hyper.temperature(),
        max_tokens: hyper.max_tokens(),
        logprobs: true,
    };
    let response = client.complete(&request)?;
    let (tokens, logprobs_unavailable) = match response.logprobs {
        Some(tokens) if !tokens.is_empty() => (tokens, false),
        _ => (Vec::new(), true),
    };
    if logprobs_unavailable {
        log::warn!("endpoint returned no log-probabilities for {}", model.label());
    }
    Ok(GenerationResult {
        text: response.text,
        tokens,
        model: model.clone(),
        hyper: hyper.clone(),
        logprobs_unavailable,
    })
}
