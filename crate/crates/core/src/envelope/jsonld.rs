//! Fixed-shape JSON-LD form of [`AigcEnvelope`].
//!
//! Output is canonical JSON: keys sorted, no insignificant whitespace,
//! shortest round-trip numbers. Blank-node ids are `_:b0`, `_:b1`, ... in
//! [`NodeLabels`] order.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value};
use uuid::Uuid;

use super::{
    format_timestamp, invalid, parse_timestamp, AigcEnvelope, ConfidenceStats, EnvelopeError, GeneratedContent,
    HyperParameters, IssuerRef, ModelRef, NodeLabels, Scalar, ThoughtTrace, CREDENTIAL_TYPES,
};
use crate::prompt::{ModuleKind, PromptModule, StructuredPrompt};
use crate::proof::Proof;
use crate::vocab::{AIGC_V1_CONTEXT, CREDENTIALS_V2_CONTEXT, DATA_INTEGRITY_V1_CONTEXT};

const CONTEXTS: [&str; 3] = [CREDENTIALS_V2_CONTEXT, DATA_INTEGRITY_V1_CONTEXT, AIGC_V1_CONTEXT];

fn node_ref(id: &str) -> Value {
    json!({ "@id": id })
}

fn blank(label: &str) -> String {
    format!("_:{label}")
}

fn scalar_value(s: &Scalar) -> Value {
    match s {
        Scalar::String(v) => Value::String(v.clone()),
        Scalar::Integer(v) => Value::from(*v),
        Scalar::Float(v) => Value::from(*v),
        Scalar::Bool(v) => Value::Bool(*v),
    }
}

pub fn to_jsonld_value(envelope: &AigcEnvelope) -> Value {
    let content = &envelope.subject;
    let labels = NodeLabels::for_content(content);

    let mut subject = Map::new();
    subject.insert("@id".into(), blank(&labels.subject).into());
    subject.insert("@type".into(), "GeneratedContent".into());
    subject.insert("value".into(), content.value.clone().into());
    subject.insert("label".into(), content.label.clone().into());
    subject.insert("model".into(), node_ref(&content.model.iri));
    subject.insert("prompt".into(), node_ref(&blank(&labels.prompt)));
    subject.insert("hyperParameter".into(), node_ref(&blank(&labels.hyper)));
    if let Some(l) = &labels.confidence {
        subject.insert("confidence".into(), node_ref(&blank(l)));
    }
    if let Some(l) = &labels.thought {
        subject.insert("thought".into(), node_ref(&blank(l)));
    }

    let mut graph = Vec::new();
    graph.push(json!({
        "@id": blank(&labels.prompt),
        "@type": "Prompt",
        "contains": labels.modules.iter().map(|l| node_ref(&blank(l))).collect::<Vec<_>>(),
        "value": content.prompt.rendered(),
    }));
    for (module, label) in content.prompt.modules().iter().zip(&labels.modules) {
        let mut node = Map::new();
        node.insert("@id".into(), blank(label).into());
        node.insert("@type".into(), module.kind().type_name().into());
        node.insert("value".into(), module.value().into());
        if let Some(src) = module.source_id() {
            node.insert("source".into(), src.into());
        }
        graph.push(Value::Object(node));
    }
    if let (Some(c), Some(l)) = (&content.confidence, &labels.confidence) {
        graph.push(json!({
            "@id": blank(l),
            "@type": "Confidence",
            "mean": c.mean,
            "min": c.min,
            "max": c.max,
            "count": c.count,
            "perplexity": c.perplexity,
        }));
    }
    let mut hyper = Map::new();
    hyper.insert("@id".into(), blank(&labels.hyper).into());
    hyper.insert("@type".into(), "HyperParameter".into());
    hyper.insert("temperature".into(), Value::from(content.hyper.temperature));
    hyper.insert("max_tokens".into(), Value::from(content.hyper.max_tokens));
    for (name, value) in &content.hyper.extra {
        hyper.insert(name.clone(), scalar_value(value));
    }
    graph.push(Value::Object(hyper));
    if let (Some(t), Some(l)) = (&content.thought, &labels.thought) {
        graph.push(json!({
            "@id": blank(l),
            "@type": "Thought",
            "value": t.value,
            "sourceTag": t.source_tag,
        }));
    }
    graph.push(json!({
        "@id": content.model.iri,
        "@type": "Model",
        "label": content.model.label,
    }));

    let mut doc = Map::new();
    doc.insert("@context".into(), json!(CONTEXTS));
    doc.insert("id".into(), envelope.urn().into());
    doc.insert("type".into(), json!(CREDENTIAL_TYPES));
    doc.insert("issuer".into(), json!({ "id": envelope.issuer.id, "name": envelope.issuer.name }));
    doc.insert("validFrom".into(), format_timestamp(&envelope.valid_from).into());
    doc.insert("credentialSubject".into(), Value::Object(subject));
    doc.insert("@graph".into(), Value::Array(graph));
    if let Some(p) = &envelope.proof {
        doc.insert(
            "proof".into(),
            json!({
                "type": p.proof_type,
                "created": format_timestamp(&p.created),
                "proofPurpose": p.proof_purpose,
                "verificationMethod": p.verification_method,
                "cryptosuite": p.cryptosuite,
                "proofValue": p.proof_value,
            }),
        );
    }
    Value::Object(doc)
}

/// Canonical JSON-LD text of the envelope.
pub fn to_jsonld(envelope: &AigcEnvelope) -> String {
    serde_json::to_string(&to_jsonld_value(envelope)).expect("JSON values always serialize")
}

struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Obj<'a> {
    fn new(path: impl Into<String>, v: &'a Value) -> Result<Self, EnvelopeError> {
        let path = path.into();
        match v.as_object() {
            Some(map) => Ok(Self { path, map }),
            None => Err(invalid(path, "expected an object")),
        }
    }

    fn sub(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn get(&self, key: &str) -> Result<&'a Value, EnvelopeError> {
        self.map.get(key).ok_or_else(|| EnvelopeError::MissingKey(self.sub(key)))
    }

    fn str(&self, key: &str) -> Result<&'a str, EnvelopeError> {
        self.get(key)?.as_str().ok_or_else(|| invalid(self.sub(key), "expected a string"))
    }

    fn f64(&self, key: &str) -> Result<f64, EnvelopeError> {
        self.get(key)?.as_f64().ok_or_else(|| invalid(self.sub(key), "expected a number"))
    }

    fn u64(&self, key: &str) -> Result<u64, EnvelopeError> {
        self.get(key)?.as_u64().ok_or_else(|| invalid(self.sub(key), "expected a non-negative integer"))
    }

    /// `{"@id": ...}` reference.
    fn reference(&self, key: &str) -> Result<&'a str, EnvelopeError> {
        let r = Obj::new(self.sub(key), self.get(key)?)?;
        r.only(&["@id"])?;
        r.str("@id")
    }

    fn expect_str(&self, key: &str, expected: &str) -> Result<(), EnvelopeError> {
        let got = self.str(key)?;
        if got != expected {
            return Err(invalid(self.sub(key), format!("expected {expected:?}, found {got:?}")));
        }
        Ok(())
    }

    fn only(&self, allowed: &[&str]) -> Result<(), EnvelopeError> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(invalid(self.sub(k), "unexpected key")),
            None => Ok(()),
        }
    }
}

fn parse_scalar(path: &str, v: &Value) -> Result<Scalar, EnvelopeError> {
    match v {
        Value::String(s) => Ok(Scalar::String(s.clone())),
        Value::Bool(b) => Ok(Scalar::Bool(*b)),
        Value::Number(n) if n.is_i64() => Ok(Scalar::Integer(n.as_i64().unwrap())),
        Value::Number(n) if n.is_f64() => Ok(Scalar::Float(n.as_f64().unwrap())),
        _ => Err(invalid(path, "expected a string, number or boolean")),
    }
}

/// Parses a document in the envelope profile.
pub fn from_jsonld(text: &str) -> Result<AigcEnvelope, EnvelopeError> {
    let value: Value = serde_json::from_str(text).map_err(|e| EnvelopeError::Json(e.to_string()))?;
    let root = Obj::new("", &value)?;
    root.only(&["@context", "id", "type", "issuer", "validFrom", "credentialSubject", "@graph", "proof"])?;

    let contexts = root.get("@context")?.as_array().ok_or_else(|| invalid("@context", "expected an array"))?;
    for (i, expected) in CONTEXTS.iter().enumerate() {
        match contexts.get(i).and_then(Value::as_str) {
            Some(c) if c == *expected => {}
            Some(c) => return Err(EnvelopeError::UnknownContext(c.to_string())),
            None => return Err(EnvelopeError::UnknownContext(format!("missing {expected}"))),
        }
    }
    if let Some(extra) = contexts.get(CONTEXTS.len()) {
        return Err(EnvelopeError::UnknownContext(extra.to_string()));
    }

    let urn = root.str("id")?;
    let id = urn
        .strip_prefix("urn:uuid:")
        .and_then(|u| Uuid::parse_str(u).ok())
        .filter(|u| format!("urn:uuid:{u}") == urn)
        .ok_or_else(|| invalid("id", "expected a lowercase urn:uuid: URN"))?;

    let types: Vec<&str> =
        root.get("type")?.as_array().map(|a| a.iter().filter_map(Value::as_str).collect()).unwrap_or_default();
    if types != CREDENTIAL_TYPES {
        return Err(invalid("type", format!("expected {CREDENTIAL_TYPES:?}")));
    }

    let issuer_obj = Obj::new("issuer", root.get("issuer")?)?;
    issuer_obj.only(&["id", "name"])?;
    let issuer = IssuerRef::new(issuer_obj.str("id")?, issuer_obj.str("name")?);
    let valid_from = parse_timestamp("validFrom", root.str("validFrom")?)?;

    let graph_items = root.get("@graph")?.as_array().ok_or_else(|| invalid("@graph", "expected an array"))?;
    let mut graph: BTreeMap<&str, Obj> = BTreeMap::new();
    for (i, item) in graph_items.iter().enumerate() {
        let node = Obj::new(format!("@graph[{i}]"), item)?;
        let node_id = node.str("@id")?;
        if graph.insert(node_id, node).is_some() {
            return Err(invalid("@graph", format!("duplicate node {node_id}")));
        }
    }
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let mut take = |node_id: &'_ str| -> Result<&Obj, EnvelopeError> {
        let (key, node) =
            graph.get_key_value(node_id).ok_or_else(|| EnvelopeError::DanglingReference(node_id.to_string()))?;
        used.insert(key);
        Ok(node)
    };

    let subj = Obj::new("credentialSubject", root.get("credentialSubject")?)?;
    subj.only(&["@id", "@type", "value", "label", "model", "prompt", "hyperParameter", "confidence", "thought"])?;
    subj.str("@id")?;
    subj.expect_str("@type", "GeneratedContent")?;

    // Prompt and its modules.
    let prompt_node = take(subj.reference("prompt")?)?;
    prompt_node.only(&["@id", "@type", "contains", "value"])?;
    prompt_node.expect_str("@type", "Prompt")?;
    let refs = prompt_node
        .get("contains")?
        .as_array()
        .ok_or_else(|| invalid(prompt_node.sub("contains"), "expected an array"))?;
    let mut modules = Vec::new();
    for (i, r) in refs.iter().enumerate() {
        let r = Obj::new(format!("{}.contains[{i}]", prompt_node.path), r)?;
        r.only(&["@id"])?;
        let node = take(r.str("@id")?)?;
        node.only(&["@id", "@type", "value", "source"])?;
        let type_name = node.str("@type")?;
        let kind = ModuleKind::from_type_name(type_name)
            .ok_or_else(|| invalid(node.sub("@type"), format!("unknown module type {type_name:?}")))?;
        let value = node.str("value")?;
        let mut module = PromptModule::new(kind, value).map_err(|e| invalid(node.sub("value"), e.to_string()))?;
        if module.value() != value {
            return Err(invalid(node.sub("value"), "module values carry no surrounding whitespace"));
        }
        if let Some(src) = node.opt("source") {
            let src = src.as_str().ok_or_else(|| invalid(node.sub("source"), "expected a string"))?;
            module = module.with_source(src);
        }
        modules.push(module);
    }
    let prompt = StructuredPrompt::new(modules).map_err(|e| invalid(prompt_node.sub("contains"), e.to_string()))?;
    if prompt_node.str("value")? != prompt.rendered() {
        return Err(invalid(prompt_node.sub("value"), "does not match the rendered modules"));
    }
    // Module order in `contains` is by kind; anything else would not re-emit identically.
    let listed: Vec<&str> = refs.iter().filter_map(|r| r["@id"].as_str()).collect();
    let kinds_in_order = listed.iter().map(|id| graph[id].map["@type"].as_str().unwrap_or("")).collect::<Vec<_>>();
    let sorted_kinds: Vec<&str> = prompt.modules().iter().map(|m| m.kind().type_name()).collect();
    if kinds_in_order != sorted_kinds {
        return Err(invalid(prompt_node.sub("contains"), "modules must be listed in kind order"));
    }

    // Model.
    let model_iri = subj.reference("model")?;
    let model_node = take(model_iri)?;
    model_node.only(&["@id", "@type", "label"])?;
    model_node.expect_str("@type", "Model")?;
    let model = ModelRef::new(model_iri, model_node.str("label")?)?;

    // Hyper-parameters.
    let hyper_node = take(subj.reference("hyperParameter")?)?;
    hyper_node.expect_str("@type", "HyperParameter")?;
    let mut hyper = HyperParameters {
        temperature: hyper_node.f64("temperature")?,
        max_tokens: hyper_node.u64("max_tokens")?,
        extra: BTreeMap::new(),
    };
    for (k, v) in hyper_node.map {
        if matches!(k.as_str(), "@id" | "@type" | "temperature" | "max_tokens") {
            continue;
        }
        hyper.extra.insert(k.clone(), parse_scalar(&hyper_node.sub(k), v)?);
    }
    hyper.validate()?;

    let confidence = match subj.opt("confidence") {
        None => None,
        Some(_) => {
            let node = take(subj.reference("confidence")?)?;
            node.only(&["@id", "@type", "mean", "min", "max", "count", "perplexity"])?;
            node.expect_str("@type", "Confidence")?;
            let c = ConfidenceStats {
                mean: node.f64("mean")?,
                min: node.f64("min")?,
                max: node.f64("max")?,
                count: node.u64("count")?,
                perplexity: node.f64("perplexity")?,
            };
            c.validate()?;
            Some(c)
        }
    };

    let thought = match subj.opt("thought") {
        None => None,
        Some(_) => {
            let node = take(subj.reference("thought")?)?;
            node.only(&["@id", "@type", "value", "sourceTag"])?;
            node.expect_str("@type", "Thought")?;
            Some(ThoughtTrace::new(node.str("value")?, node.str("sourceTag")?)?)
        }
    };

    if let Some(orphan) = graph.keys().find(|k| !used.contains(*k)) {
        return Err(invalid("@graph", format!("node {orphan} is not referenced")));
    }

    let content = GeneratedContent {
        value: subj.str("value")?.to_string(),
        label: subj.str("label")?.to_string(),
        prompt,
        model,
        hyper,
        confidence,
        thought,
    };

    let proof = match root.opt("proof") {
        None => None,
        Some(v) => {
            let p = Obj::new("proof", v)?;
            p.only(&["type", "created", "proofPurpose", "verificationMethod", "cryptosuite", "proofValue"])?;
            Some(Proof {
                proof_type: p.str("type")?.to_string(),
                created: parse_timestamp("proof.created", p.str("created")?)?,
                proof_purpose: p.str("proofPurpose")?.to_string(),
                verification_method: p.str("verificationMethod")?.to_string(),
                cryptosuite: p.str("cryptosuite")?.to_string(),
                proof_value: p.str("proofValue")?.to_string(),
            })
        }
    };

    let envelope = AigcEnvelope { id, issuer, valid_from, subject: content, proof };
    envelope.validate()?;
    Ok(envelope)
}
