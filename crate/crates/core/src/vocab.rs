//! IRIs used by the envelope profile.
//!
//! Terms owned by this toolkit are read from the bundled context document
//! (`contexts/aigc-v1.jsonld`), which is published as the third `@context`
//! entry of every envelope. Terms defined by the W3C credentials and
//! data-integrity contexts are fixed constants below.

use std::collections::BTreeMap;
use std::sync::LazyLock;

pub const CREDENTIALS_V2_CONTEXT: &str = "https://www.w3.org/ns/credentials/v2";
pub const DATA_INTEGRITY_V1_CONTEXT: &str = "https://w3id.org/security/data-integrity/v1";
pub const AIGC_V1_CONTEXT: &str = "https://w3id.org/aigc/v1";

/// The context document served at [`AIGC_V1_CONTEXT`].
pub const AIGC_V1_CONTEXT_DOCUMENT: &str = include_str!("../contexts/aigc-v1.jsonld");

pub const AIGC_NS: &str = "https://w3id.org/aigc#";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";

pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
pub const XSD_DATE_TIME: &str = "http://www.w3.org/2001/XMLSchema#dateTime";

pub const CRED_VERIFIABLE_CREDENTIAL: &str = "https://www.w3.org/2018/credentials#VerifiableCredential";
pub const CRED_ISSUER: &str = "https://www.w3.org/2018/credentials#issuer";
pub const CRED_VALID_FROM: &str = "https://www.w3.org/2018/credentials#validFrom";
pub const CRED_SUBJECT: &str = "https://www.w3.org/2018/credentials#credentialSubject";
pub const SCHEMA_NAME: &str = "https://schema.org/name";

pub const SEC_PROOF: &str = "https://w3id.org/security#proof";
pub const SEC_DATA_INTEGRITY_PROOF: &str = "https://w3id.org/security#DataIntegrityProof";
pub const SEC_PROOF_PURPOSE: &str = "https://w3id.org/security#proofPurpose";
pub const SEC_ASSERTION_METHOD: &str = "https://w3id.org/security#assertionMethod";
pub const SEC_VERIFICATION_METHOD: &str = "https://w3id.org/security#verificationMethod";
pub const SEC_CRYPTOSUITE: &str = "https://w3id.org/security#cryptosuite";
pub const SEC_CRYPTOSUITE_STRING: &str = "https://w3id.org/security#cryptosuiteString";
pub const SEC_PROOF_VALUE: &str = "https://w3id.org/security#proofValue";
pub const SEC_MULTIBASE: &str = "https://w3id.org/security#multibase";
pub const DC_CREATED: &str = "http://purl.org/dc/terms/created";

/// Predicates that only ever appear in proof quads.
pub const PROOF_PREDICATES: &[&str] =
    &[SEC_PROOF, SEC_PROOF_PURPOSE, SEC_VERIFICATION_METHOD, SEC_CRYPTOSUITE, SEC_PROOF_VALUE, DC_CREATED];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermDefinition {
    pub iri: String,
    /// `xsd:*` datatype for literal-valued terms, `@id` for node references.
    pub type_coercion: Option<String>,
}

/// Term table expanded from the bundled context document.
pub static AIGC_TERMS: LazyLock<BTreeMap<String, TermDefinition>> =
    LazyLock::new(|| load_terms(AIGC_V1_CONTEXT_DOCUMENT));

fn load_terms(document: &str) -> BTreeMap<String, TermDefinition> {
    let doc: serde_json::Value = serde_json::from_str(document).expect("bundled context document is valid JSON");
    let ctx = doc["@context"].as_object().expect("bundled context has an @context object");

    let prefixes: BTreeMap<&str, &str> = ctx
        .iter()
        .filter_map(|(k, v)| {
            let s = v.as_str()?;
            (s.ends_with('#') || s.ends_with('/')).then_some((k.as_str(), s))
        })
        .collect();
    let expand = |curie: &str| -> String {
        match curie.split_once(':') {
            Some((prefix, local)) if prefixes.contains_key(prefix) => {
                format!("{}{}", prefixes[prefix], local)
            }
            _ => curie.to_string(),
        }
    };

    let mut terms = BTreeMap::new();
    for (name, def) in ctx {
        if name.starts_with('@') || prefixes.contains_key(name.as_str()) {
            continue;
        }
        let (iri, coercion) = match def {
            serde_json::Value::String(s) => (expand(s), None),
            serde_json::Value::Object(o) => {
                let iri = o["@id"].as_str().expect("term definition has @id");
                let coercion =
                    o.get("@type").and_then(|t| t.as_str()).map(|t| if t == "@id" { t.to_string() } else { expand(t) });
                (expand(iri), coercion)
            }
            other => panic!("unsupported term definition for {name}: {other}"),
        };
        terms.insert(name.clone(), TermDefinition { iri, type_coercion: coercion });
    }
    terms
}

/// Expanded IRI of a toolkit term.
///
/// Panics on an unknown term; every term the mapping uses is covered by a unit
/// test against the bundled context.
pub fn aigc(term: &str) -> &'static str {
    match AIGC_TERMS.get(term) {
        Some(def) => def.iri.as_str(),
        None => panic!("term {term:?} missing from the bundled aigc context"),
    }
}

/// IRI for a free-form hyper-parameter name (the HyperParameter type-scoped
/// context sets `@vocab` to the aigc namespace).
pub fn hyper_parameter_iri(name: &str) -> String {
    match AIGC_TERMS.get(name) {
        Some(def) => def.iri.clone(),
        None => format!("{AIGC_NS}{name}"),
    }
}
