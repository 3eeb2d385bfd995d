//! Fixed mapping from an envelope to RDF quads.
//!
//! | envelope field                 | subject        | predicate                 | object                          |
//! |--------------------------------|----------------|---------------------------|---------------------------------|
//! | types                          | `<urn:uuid:…>` | `rdf:type`                | `cred:VerifiableCredential`, `aigc:AIGCContentCredential` |
//! | issuer.id                      | `<urn:uuid:…>` | `cred:issuer`             | `<did>`                         |
//! | issuer.name                    | `<did>`        | `schema:name`             | string                          |
//! | valid_from                     | `<urn:uuid:…>` | `cred:validFrom`          | `xsd:dateTime`                  |
//! | subject                        | `<urn:uuid:…>` | `cred:credentialSubject`  | `_:b0`                          |
//! | subject type / value / label   | `_:b0`         | `rdf:type` / `aigc:value` / `aigc:label` | `aigc:GeneratedContent` / string / string |
//! | model                          | `_:b0`         | `aigc:model`              | `<model iri>`                   |
//! | model type / label             | `<model iri>`  | `rdf:type` / `aigc:label` | `aigc:Model` / string           |
//! | prompt                         | `_:b0`         | `aigc:prompt`             | `_:b1`                          |
//! | prompt type / rendered text    | `_:b1`         | `rdf:type` / `aigc:value` | `aigc:Prompt` / string          |
//! | each module                    | `_:b1`         | `aigc:contains`           | `_:bM`                          |
//! | module type / value / source?  | `_:bM`         | `rdf:type` / `aigc:value` / `aigc:source` | `aigc:<Kind>` / string / string |
//! | confidence?                    | `_:b0`         | `aigc:confidence`         | `_:bC`                          |
//! | confidence fields              | `_:bC`         | `rdf:type`, `aigc:mean`/`min`/`max`/`perplexity` (xsd:double), `aigc:count` (xsd:integer) | |
//! | hyper-parameters               | `_:b0`         | `aigc:hyperParameter`     | `_:bH`                          |
//! | hyper fields                   | `_:bH`         | `rdf:type`, `aigc:temperature` (xsd:double), `aigc:max_tokens` (xsd:integer), `aigc:<name>` per extra | |
//! | thought?                       | `_:b0`         | `aigc:thought`            | `_:bT`                          |
//! | thought fields                 | `_:bT`         | `rdf:type` / `aigc:value` / `aigc:sourceTag` | `aigc:Thought` / string / string |
//!
//! Blank-node labels follow [`NodeLabels`]. Doubles use the shortest
//! round-trip decimal form without exponent (always with a fractional part),
//! integers plain decimal, booleans `true`/`false`, timestamps
//! `YYYY-MM-DDTHH:MM:SSZ`.
//!
//! With `include_proof`, the proof sits in a named graph `_:proofgraph` linked
//! by `<urn:uuid:…> sec:proof _:proofgraph`, its node `_:proof` carrying the
//! proof-option quads plus `sec:proofValue`.

use super::{Dataset, Quad, Term};
use crate::envelope::{format_timestamp, AigcEnvelope, NodeLabels, Scalar};
use crate::proof::Proof;
use crate::vocab::*;

/// Shortest round-trip decimal without exponent; integral values keep `.0`.
pub fn format_double(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') || !x.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

struct Builder {
    dataset: Dataset,
    graph: Option<Term>,
}

impl Builder {
    fn add(&mut self, s: Term, p: &str, o: Term) {
        let quad = Quad::new(s, p, o, self.graph.clone()).expect("mapping emits well-formed quads");
        self.dataset.insert(quad);
    }
}

fn double(x: f64) -> Term {
    Term::typed(format_double(x), XSD_DOUBLE)
}

fn integer(i: impl std::fmt::Display) -> Term {
    Term::typed(i.to_string(), XSD_INTEGER)
}

fn scalar(s: &Scalar) -> Term {
    match s {
        Scalar::String(v) => Term::string(v.clone()),
        Scalar::Integer(v) => integer(v),
        Scalar::Float(v) => double(*v),
        Scalar::Bool(v) => Term::typed(v.to_string(), XSD_BOOLEAN),
    }
}

fn security_term(name: &str) -> String {
    if name.contains(':') {
        name.to_string()
    } else {
        format!("https://w3id.org/security#{name}")
    }
}

fn add_proof_options(b: &mut Builder, node: Term, proof: &Proof) {
    let rdf_type = if proof.proof_type == "DataIntegrityProof" {
        SEC_DATA_INTEGRITY_PROOF.to_string()
    } else {
        security_term(&proof.proof_type)
    };
    b.add(node.clone(), RDF_TYPE, Term::iri(rdf_type));
    b.add(node.clone(), DC_CREATED, Term::typed(format_timestamp(&proof.created), XSD_DATE_TIME));
    b.add(node.clone(), SEC_CRYPTOSUITE, Term::typed(proof.cryptosuite.clone(), SEC_CRYPTOSUITE_STRING));
    b.add(node.clone(), SEC_PROOF_PURPOSE, Term::iri(security_term(&proof.proof_purpose)));
    b.add(node, SEC_VERIFICATION_METHOD, Term::iri(proof.verification_method.clone()));
}

/// Quads of the proof options (everything but `proofValue`) in the default graph.
pub fn proof_options_dataset(proof: &Proof) -> Dataset {
    let mut b = Builder { dataset: Dataset::new(), graph: None };
    add_proof_options(&mut b, Term::blank("proof"), proof);
    b.dataset
}

pub fn envelope_to_dataset(envelope: &AigcEnvelope, include_proof: bool) -> Dataset {
    let mut b = Builder { dataset: Dataset::new(), graph: None };
    let content = &envelope.subject;
    let labels = NodeLabels::for_content(content);
    let cred = Term::iri(envelope.urn());
    let issuer = Term::iri(envelope.issuer.id.clone());
    let subject = Term::blank(&labels.subject);
    let model = Term::iri(content.model.iri.clone());
    let prompt = Term::blank(&labels.prompt);
    let hyper = Term::blank(&labels.hyper);

    b.add(cred.clone(), RDF_TYPE, Term::iri(CRED_VERIFIABLE_CREDENTIAL));
    b.add(cred.clone(), RDF_TYPE, Term::iri(aigc("AIGCContentCredential")));
    b.add(cred.clone(), CRED_ISSUER, issuer.clone());
    b.add(issuer, SCHEMA_NAME, Term::string(envelope.issuer.name.clone()));
    b.add(cred.clone(), CRED_VALID_FROM, Term::typed(format_timestamp(&envelope.valid_from), XSD_DATE_TIME));
    b.add(cred.clone(), CRED_SUBJECT, subject.clone());

    b.add(subject.clone(), RDF_TYPE, Term::iri(aigc("GeneratedContent")));
    b.add(subject.clone(), aigc("value"), Term::string(content.value.clone()));
    b.add(subject.clone(), aigc("label"), Term::string(content.label.clone()));

    b.add(subject.clone(), aigc("model"), model.clone());
    b.add(model.clone(), RDF_TYPE, Term::iri(aigc("Model")));
    b.add(model, aigc("label"), Term::string(content.model.label.clone()));

    b.add(subject.clone(), aigc("prompt"), prompt.clone());
    b.add(prompt.clone(), RDF_TYPE, Term::iri(aigc("Prompt")));
    b.add(prompt.clone(), aigc("value"), Term::string(content.prompt.rendered()));
    for (module, label) in content.prompt.modules().iter().zip(&labels.modules) {
        let node = Term::blank(label);
        b.add(prompt.clone(), aigc("contains"), node.clone());
        b.add(node.clone(), RDF_TYPE, Term::iri(aigc(module.kind().type_name())));
        b.add(node.clone(), aigc("value"), Term::string(module.value()));
        if let Some(src) = module.source_id() {
            b.add(node, aigc("source"), Term::string(src));
        }
    }

    if let (Some(c), Some(label)) = (&content.confidence, &labels.confidence) {
        let node = Term::blank(label);
        b.add(subject.clone(), aigc("confidence"), node.clone());
        b.add(node.clone(), RDF_TYPE, Term::iri(aigc("Confidence")));
        b.add(node.clone(), aigc("mean"), double(c.mean));
        b.add(node.clone(), aigc("min"), double(c.min));
        b.add(node.clone(), aigc("max"), double(c.max));
        b.add(node.clone(), aigc("count"), integer(c.count));
        b.add(node, aigc("perplexity"), double(c.perplexity));
    }

    b.add(subject.clone(), aigc("hyperParameter"), hyper.clone());
    b.add(hyper.clone(), RDF_TYPE, Term::iri(aigc("HyperParameter")));
    b.add(hyper.clone(), aigc("temperature"), double(content.hyper.temperature));
    b.add(hyper.clone(), aigc("max_tokens"), integer(content.hyper.max_tokens));
    for (name, value) in &content.hyper.extra {
        b.add(hyper.clone(), &hyper_parameter_iri(name), scalar(value));
    }

    if let (Some(t), Some(label)) = (&content.thought, &labels.thought) {
        let node = Term::blank(label);
        b.add(subject, aigc("thought"), node.clone());
        b.add(node.clone(), RDF_TYPE, Term::iri(aigc("Thought")));
        b.add(node.clone(), aigc("value"), Term::string(t.value.clone()));
        b.add(node, aigc("sourceTag"), Term::string(t.source_tag.clone()));
    }

    if let (true, Some(proof)) = (include_proof, &envelope.proof) {
        let graph = Term::blank("proofgraph");
        b.add(cred, SEC_PROOF, graph.clone());
        b.graph = Some(graph);
        let node = Term::blank("proof");
        add_proof_options(&mut b, node.clone(), proof);
        b.add(node, SEC_PROOF_VALUE, Term::typed(proof.proof_value.clone(), SEC_MULTIBASE));
    }
    b.dataset
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{
        build_envelope, ConfidenceStats, GeneratedContent, HyperParameters, IssuerRef, ModelRef, ThoughtTrace,
    };
    use crate::prompt::{ModuleKind, PromptModule, StructuredPrompt};
    use crate::rdf::to_nquads;
    use chrono::{TimeZone, Utc};
    use uuid::Uuid;

    fn envelope(modules: Vec<PromptModule>, confidence: bool, thought: bool) -> AigcEnvelope {
        let content = GeneratedContent::new(
            "Rain falls softly",
            StructuredPrompt::new(modules).unwrap(),
            ModelRef::new("https://huggingface.co/openai/gpt-oss-20b", "openai/gpt-oss-20b").unwrap(),
            HyperParameters::new(1.0, 2000).unwrap(),
        )
        .with_confidence(confidence.then(|| ConfidenceStats::new(-0.5, -0.7, -0.3, 3).unwrap()))
        .with_thought(thought.then(|| ThoughtTrace::new("plan", "think").unwrap()));
        build_envelope(
            content,
            IssuerRef::new("did:web:issuer.example.org", "Example Issuer"),
            Utc.with_ymd_and_hms(2025, 12, 10, 1, 17, 4).unwrap(),
            Some(Uuid::parse_str("f5c4c481-7915-441e-9c21-672ad62e12f3").unwrap()),
        )
        .unwrap()
    }

    fn role() -> PromptModule {
        PromptModule::new(ModuleKind::Role, "You are an assistant for Practical Writing tasks.").unwrap()
    }

    #[test]
    fn minimal_envelope_quad_count() {
        // Hand count from the mapping table:
        //   credential: 2 types + issuer + issuer name + validFrom + subject = 6
        //   subject: type + value + label                                    = 3
        //   model: link + type + label                                       = 3
        //   prompt: link + type + rendered value                             = 3
        //   Role module: contains + type + value                             = 3
        //   hyper: link + type + temperature + max_tokens                    = 4
        assert_eq!(envelope_to_dataset(&envelope(vec![role()], false, false), false).len(), 22);
        //   confidence: link + type + mean + min + max + count + perplexity  = 7
        assert_eq!(envelope_to_dataset(&envelope(vec![role()], true, false), false).len(), 29);
        //   thought: link + type + value + sourceTag                         = 4
        assert_eq!(envelope_to_dataset(&envelope(vec![role()], true, true), false).len(), 33);
    }

    #[test]
    fn module_order_in_memory_is_irrelevant() {
        let req = PromptModule::new(ModuleKind::Requirements, "Write a haiku.").unwrap();
        let a = envelope(vec![role(), req.clone()], true, false);
        let b = envelope(vec![req, role()], true, false);
        assert_eq!(envelope_to_dataset(&a, false), envelope_to_dataset(&b, false));
    }

    #[test]
    fn proof_quads_follow_the_flag() {
        let mut env = envelope(vec![role()], true, false);
        env.proof = Some(Proof::sample());
        let without = envelope_to_dataset(&env, false);
        assert!(without.iter().all(|q| !PROOF_PREDICATES.contains(&q.predicate())));
        let with = envelope_to_dataset(&env, true);
        assert_eq!(with.len(), without.len() + 7);
        assert!(with.iter().any(|q| q.predicate() == SEC_PROOF_VALUE));
        assert!(with
            .iter()
            .filter(|q| q.predicate() != SEC_PROOF)
            .all(|q| { q.graph().is_some() == (q.subject() == &Term::blank("proof")) }));
    }

    #[test]
    fn literal_forms() {
        assert_eq!(format_double(1.0), "1.0");
        assert_eq!(format_double(-0.4548458994601176), "-0.4548458994601176");
        assert_eq!(format_double(1e-7), "0.0000001");
        assert_eq!(format_double(1e21), "1000000000000000000000.0");
        assert_eq!(format_double(0.1 + 0.2), "0.30000000000000004");
        for x in [0.1, 1.0 / 3.0, 123456.789, -2.5e-300, 1.7976931348623157e308] {
            assert_eq!(format_double(x).parse::<f64>().unwrap(), x);
        }
        let text = to_nquads(&envelope_to_dataset(&envelope(vec![role()], true, false), false));
        assert!(text.contains("\"2025-12-10T01:17:04Z\"^^<http://www.w3.org/2001/XMLSchema#dateTime>"));
        assert!(text.contains("\"2000\"^^<http://www.w3.org/2001/XMLSchema#integer>"));
        assert!(text.contains("\"1.0\"^^<http://www.w3.org/2001/XMLSchema#double>"));
    }

    #[test]
    fn extras_keep_their_types_apart() {
        let mut a = envelope(vec![role()], false, false);
        let mut b = a.clone();
        a.subject.hyper.extra.insert("seed".into(), Scalar::Integer(2));
        b.subject.hyper.extra.insert("seed".into(), Scalar::Float(2.0));
        assert_ne!(envelope_to_dataset(&a, false), envelope_to_dataset(&b, false));
    }
}
