//! The AIGC envelope: a verifiable credential whose subject is a piece of
//! generated content together with its prompt, model, hyper-parameters,
//! confidence and optional thought trace.

mod jsonld;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, SubsecRound, Utc};
use rand::RngCore;
use thiserror::Error;
use uuid::Uuid;

use crate::prompt::StructuredPrompt;
use crate::proof::Proof;

pub use jsonld::{from_jsonld, to_jsonld, to_jsonld_value};

pub const CREDENTIAL_TYPES: [&str; 2] = ["VerifiableCredential", "AIGCContentCredential"];

/// Longest label, in characters, before the excerpt is truncated.
pub const LABEL_MAX_CHARS: usize = 80;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvelopeError {
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("unrecognized @context entry {0:?}")]
    UnknownContext(String),
    #[error("missing key {0}")]
    MissingKey(String),
    #[error("node {0} is referenced but not present in @graph")]
    DanglingReference(String),
    #[error("document is not JSON: {0}")]
    Json(String),
}

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> EnvelopeError {
    EnvelopeError::InvalidField { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRef {
    pub iri: String,
    pub label: String,
}

impl ModelRef {
    pub fn new(iri: impl Into<String>, label: impl Into<String>) -> Result<Self, EnvelopeError> {
        let m = Self { iri: iri.into(), label: label.into() };
        m.validate()?;
        Ok(m)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn validate(&self) -> Result<(), EnvelopeError> {
        check_absolute_iri("credentialSubject.model", &self.iri)
    }
}

/// Checks that `iri` is absolute and can be written between `<>` in N-Quads.
pub(crate) fn check_absolute_iri(field: &str, iri: &str) -> Result<(), EnvelopeError> {
    if iri.chars().any(|c| c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')) {
        return Err(invalid(field, "IRI contains a character not allowed in IRIs"));
    }
    match url::Url::parse(iri) {
        Ok(_) => Ok(()),
        Err(e) => Err(invalid(field, format!("not an absolute IRI: {e}"))),
    }
}

/// Hyper-parameter value outside the two fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    String(String),
    Integer(i64),
    Float(f64),
    Bool(bool),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::String(s) => f.write_str(s),
            Scalar::Integer(i) => write!(f, "{i}"),
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParameters {
    pub temperature: f64,
    pub max_tokens: u64,
    pub extra: BTreeMap<String, Scalar>,
}

const RESERVED_HYPER_NAMES: &[&str] = &["temperature", "max_tokens"];

impl HyperParameters {
    pub fn new(temperature: f64, max_tokens: u64) -> Result<Self, EnvelopeError> {
        let h = Self { temperature, max_tokens, extra: BTreeMap::new() };
        h.validate()?;
        Ok(h)
    }

    pub fn with_extra(mut self, name: impl Into<String>, value: Scalar) -> Result<Self, EnvelopeError> {
        let name = name.into();
        if self.extra.contains_key(&name) {
            return Err(invalid(format!("hyperParameter.{name}"), "duplicate parameter"));
        }
        self.extra.insert(name, value);
        self.validate()?;
        Ok(self)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn max_tokens(&self) -> u64 {
        self.max_tokens
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid("hyperParameter.temperature", "must be a finite value >= 0"));
        }
        if self.max_tokens == 0 || self.max_tokens > i64::MAX as u64 {
            return Err(invalid("hyperParameter.max_tokens", "must be a positive integer"));
        }
        for (name, value) in &self.extra {
            let field = format!("hyperParameter.{name}");
            let valid_name = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid_name {
                return Err(invalid(field, "name must match [A-Za-z_][A-Za-z0-9_]*"));
            }
            if RESERVED_HYPER_NAMES.contains(&name.as_str()) {
                return Err(invalid(field, "name collides with a fixed parameter"));
            }
            if matches!(value, Scalar::Float(x) if !x.is_finite()) {
                return Err(invalid(field, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Summary of the output's token log-probabilities (natural log).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: u64,
    pub perplexity: f64,
}

impl ConfidenceStats {
    /// Perplexity is derived as `exp(-mean)`.
    pub fn new(mean: f64, min: f64, max: f64, count: u64) -> Result<Self, EnvelopeError> {
        let c = Self { mean, min, max, count, perplexity: (-mean).exp() };
        c.validate()?;
        Ok(c)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
    pub fn min(&self) -> f64 {
        self.min
    }
    pub fn max(&self) -> f64 {
        self.max
    }
    pub fn count(&self) -> u64 {
        self.count
    }
    pub fn perplexity(&self) -> f64 {
        self.perplexity
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        let all_finite = [self.mean, self.min, self.max, self.perplexity].iter().all(|x| x.is_finite());
        if !all_finite {
            return Err(invalid("confidence", "statistics must be finite"));
        }
        if self.count == 0 || self.count > i64::MAX as u64 {
            return Err(invalid("confidence.count", "must be a positive integer"));
        }
        if !(self.min <= self.mean && self.mean <= self.max) {
            return Err(invalid("confidence.mean", "must lie within [min, max]"));
        }
        let expected = (-self.mean).exp();
        if self.perplexity.is_nan() || self.perplexity <= 0.0 || (self.perplexity - expected).abs() > 1e-12 * expected {
            return Err(invalid("confidence.perplexity", "must equal exp(-mean)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThoughtTrace {
    pub value: String,
    pub source_tag: String,
}

impl ThoughtTrace {
    pub fn new(value: impl Into<String>, source_tag: impl Into<String>) -> Result<Self, EnvelopeError> {
        let t = Self { value: value.into(), source_tag: source_tag.into() };
        if t.value.is_empty() {
            return Err(invalid("thought.value", "must not be empty"));
        }
        Ok(t)
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuerRef {
    /// A DID, e.g. `did:web:example.org`.
    pub id: String,
    pub name: String,
}

impl IssuerRef {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Self { id: id.into(), name: name.into() }
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        let mut parts = self.id.splitn(3, ':');
        let well_formed = parts.next() == Some("did")
            && parts
                .next()
                .is_some_and(|m| !m.is_empty() && m.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()))
            && parts.next().is_some_and(|rest| !rest.is_empty());
        if !well_formed {
            return Err(invalid("issuer.id", format!("{:?} is not a DID", self.id)));
        }
        check_absolute_iri("issuer.id", &self.id)
    }
}

/// Short display excerpt: the text itself when it fits in
/// [`LABEL_MAX_CHARS`] characters, otherwise its first 77 characters
/// followed by `...`.
pub fn label_excerpt(value: &str) -> String {
    if value.chars().count() <= LABEL_MAX_CHARS {
        value.to_string()
    } else {
        let mut label: String = value.chars().take(LABEL_MAX_CHARS - 3).collect();
        label.push_str("...");
        label
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedContent {
    /// Full raw model output, including any thought block.
    pub value: String,
    pub label: String,
    pub prompt: StructuredPrompt,
    pub model: ModelRef,
    pub hyper: HyperParameters,
    pub confidence: Option<ConfidenceStats>,
    pub thought: Option<ThoughtTrace>,
}

impl GeneratedContent {
    pub fn new(value: impl Into<String>, prompt: StructuredPrompt, model: ModelRef, hyper: HyperParameters) -> Self {
        let value = value.into();
        Self { label: label_excerpt(&value), value, prompt, model, hyper, confidence: None, thought: None }
    }

    pub fn with_confidence(mut self, confidence: Option<ConfidenceStats>) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn with_thought(mut self, thought: Option<ThoughtTrace>) -> Self {
        self.thought = thought;
        self
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        if self.label != label_excerpt(&self.value) {
            return Err(invalid("credentialSubject.label", "must be the excerpt of value"));
        }
        self.model.validate()?;
        self.hyper.validate()?;
        if let Some(c) = &self.confidence {
            c.validate()?;
        }
        if let Some(t) = &self.thought {
            if t.value.is_empty() {
                return Err(invalid("thought.value", "must not be empty"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AigcEnvelope {
    pub id: Uuid,
    pub issuer: IssuerRef,
    /// Whole-second UTC timestamp.
    pub valid_from: DateTime<Utc>,
    pub subject: GeneratedContent,
    pub proof: Option<Proof>,
}

impl AigcEnvelope {
    pub fn urn(&self) -> String {
        format!("urn:uuid:{}", self.id)
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        self.issuer.validate()?;
        if self.valid_from.timestamp_subsec_nanos() != 0 {
            return Err(invalid("validFrom", "must have whole-second precision"));
        }
        self.subject.validate()
    }

    /// Copy without the proof.
    pub fn unsigned(&self) -> AigcEnvelope {
        AigcEnvelope { proof: None, ..self.clone() }
    }
}

/// Blank-node labels in traversal order: subject, prompt, modules by kind,
/// confidence, hyper-parameters, thought.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabels {
    pub subject: String,
    pub prompt: String,
    pub modules: Vec<String>,
    pub confidence: Option<String>,
    pub hyper: String,
    pub thought: Option<String>,
}

impl NodeLabels {
    pub fn for_content(content: &GeneratedContent) -> Self {
        let mut next = 0usize;
        let mut issue = || {
            let l = format!("b{next}");
            next += 1;
            l
        };
        let subject = issue();
        let prompt = issue();
        let modules = content.prompt.modules().iter().map(|_| issue()).collect();
        let confidence = content.confidence.as_ref().map(|_| issue());
        let hyper = issue();
        let thought = content.thought.as_ref().map(|_| issue());
        Self { subject, prompt, modules, confidence, hyper, thought }
    }
}

/// Timestamps in envelopes and proofs carry whole seconds.
pub fn truncate_to_seconds(t: DateTime<Utc>) -> DateTime<Utc> {
    t.trunc_subsecs(0)
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Parses the `YYYY-MM-DDTHH:MM:SSZ` form.
pub fn parse_timestamp(field: &str, s: &str) -> Result<DateTime<Utc>, EnvelopeError> {
    let t = DateTime::parse_from_rfc3339(s)
        .map_err(|e| invalid(field, format!("not an RFC 3339 timestamp: {e}")))?
        .with_timezone(&Utc);
    if format_timestamp(&t) != s {
        return Err(invalid(field, "expected whole seconds with a Z suffix"));
    }
    Ok(t)
}

/// Fresh random v4 UUID from the given source.
pub fn random_uuid(rng: &mut dyn RngCore) -> Uuid {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    uuid::Builder::from_random_bytes(bytes).into_uuid()
}

/// Assembles an unsigned envelope, validating every field.
pub fn build_envelope(
    content: GeneratedContent,
    issuer: IssuerRef,
    valid_from: DateTime<Utc>,
    id: Option<Uuid>,
) -> Result<AigcEnvelope, EnvelopeError> {
    build_envelope_with_rng(content, issuer, valid_from, id, &mut rand::rngs::OsRng)
}

pub fn build_envelope_with_rng(
    content: GeneratedContent,
    issuer: IssuerRef,
    valid_from: DateTime<Utc>,
    id: Option<Uuid>,
    rng: &mut dyn RngCore,
) -> Result<AigcEnvelope, EnvelopeError> {
    let envelope = AigcEnvelope {
        id: id.unwrap_or_else(|| random_uuid(rng)),
        issuer,
        valid_from: truncate_to_seconds(valid_from),
        subject: content,
        proof: None,
    };
    envelope.validate()?;
    Ok(envelope)
}
