//! did:web resolution and verification-key lookup.
//!
//! Documents come from a [`DocumentSource`]: HTTPS in production, or a
//! fixture directory of `<did with ':' replaced by '_'>.json` files for
//! offline verification.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::proof::{multibase_decode, split_did_url, KeyResolver, ED25519_PUB_MULTICODEC};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DidError {
    #[error("{0:?} is not a did:web identifier")]
    NotDidWeb(String),
    #[error("{0:?} has an empty host")]
    EmptyHost(String),
    #[error("fetching the DID document failed{}: {message}", .status.map(|s| format!(" ({s})")).unwrap_or_default())]
    FetchFailed { status: Option<u16>, message: String },
    #[error("document id {found:?} does not match the requested {expected:?}")]
    DocumentIdMismatch { expected: String, found: String },
    #[error("malformed DID document: {0}")]
    MalformedDocument(String),
    #[error("verification method {0:?} not found")]
    KeyNotFound(String),
    #[error("verification method {0:?} is not authorized for assertion")]
    NotAuthorizedForAssertion(String),
    #[error("verification method {0:?} is not an Ed25519 multikey: {1}")]
    WrongKeyType(String, String),
}

impl DidError {
    fn fetch(status: Option<u16>, message: impl Into<String>) -> Self {
        DidError::FetchFailed { status, message: message.into() }
    }
}

pub const DID_CONTEXT: &str = "https://www.w3.org/ns/did/v1";
pub const MULTIKEY_CONTEXT: &str = "https://w3id.org/security/multikey/v1";
pub const DEFAULT_CACHE_TTL: Duration = Duration::from_secs(300);

fn percent_decode(s: &str) -> String {
    percent_encoding::percent_decode_str(s).decode_utf8_lossy().into_owned()
}

/// `did:web:host[:path...]` to its `did.json` URL.
pub fn did_web_to_url(did: &str) -> Result<Url, DidError> {
    let rest = did.strip_prefix("did:web:").ok_or_else(|| DidError::NotDidWeb(did.to_string()))?;
    if rest.contains('#') || rest.contains('?') || rest.contains('/') {
        return Err(DidError::NotDidWeb(did.to_string()));
    }
    let mut segments = rest.split(':');
    let host = percent_decode(segments.next().unwrap_or_default());
    if host.is_empty() {
        return Err(DidError::EmptyHost(did.to_string()));
    }
    let path: Vec<&str> = segments.collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(DidError::NotDidWeb(did.to_string()));
    }
    let text = if path.is_empty() {
        format!("https://{host}/.well-known/did.json")
    } else {
        format!("https://{host}/{}/did.json", path.join("/"))
    };
    Url::parse(&text).map_err(|e| DidError::NotDidWeb(format!("{did}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationMethod {
    pub id: String,
    #[serde(rename = "type")]
    pub method_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(rename = "publicKeyMultibase")]
    pub public_key_multibase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodRef {
    Reference(String),
    Embedded(VerificationMethod),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DidDocument {
    #[serde(rename = "@context", default, skip_serializing_if = "Option::is_none")]
    pub context: Option<serde_json::Value>,
    pub id: String,
    #[serde(rename = "verificationMethod", default)]
    pub verification_methods: Vec<VerificationMethod>,
    #[serde(rename = "assertionMethod", default)]
    pub assertion_method: Vec<MethodRef>,
}

/// Relative `#fragment` ids resolve against the document DID.
fn absolute_id(doc_id: &str, id: &str) -> String {
    if id.starts_with('#') {
        format!("{doc_id}{id}")
    } else {
        id.to_string()
    }
}

impl DidDocument {
    pub fn parse(bytes: &[u8]) -> Result<Self, DidError> {
        let mut doc: DidDocument =
            serde_json::from_slice(bytes).map_err(|e| DidError::MalformedDocument(e.to_string()))?;
        let doc_id = doc.id.clone();
        for vm in &mut doc.verification_methods {
            vm.id = absolute_id(&doc_id, &vm.id);
        }
        for r in &mut doc.assertion_method {
            match r {
                MethodRef::Reference(id) => *id = absolute_id(&doc_id, id),
                MethodRef::Embedded(vm) => vm.id = absolute_id(&doc_id, &vm.id),
            }
        }
        doc.validate()?;
        Ok(doc)
    }

    fn validate(&self) -> Result<(), DidError> {
        for r in &self.assertion_method {
            if let MethodRef::Reference(id) = r {
                if !self.verification_methods.iter().any(|vm| &vm.id == id) {
                    return Err(DidError::MalformedDocument(format!(
                        "assertionMethod {id:?} references no verification method"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Document for one Ed25519 key, authorized for assertion.
    pub fn for_key(did: &str, fragment: &str, public: &[u8; 32]) -> Self {
        let id = format!("{did}#{fragment}");
        Self {
            context: Some(serde_json::json!([DID_CONTEXT, MULTIKEY_CONTEXT])),
            id: did.to_string(),
            verification_methods: vec![VerificationMethod {
                id: id.clone(),
                method_type: "Multikey".into(),
                controller: Some(did.to_string()),
                public_key_multibase: crate::proof::public_key_multibase(public),
            }],
            assertion_method: vec![MethodRef::Reference(id)],
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("DID documents serialize") + "\n"
    }
}

/// The 32 raw key bytes of `did_url`, which must be an assertion method.
pub fn find_verification_key(doc: &DidDocument, did_url: &str) -> Result<[u8; 32], DidError> {
    if split_did_url(did_url).is_none() {
        return Err(DidError::KeyNotFound(did_url.to_string()));
    }
    let embedded = doc.assertion_method.iter().find_map(|r| match r {
        MethodRef::Embedded(vm) if vm.id == did_url => Some(vm),
        _ => None,
    });
    let method = match embedded {
        Some(vm) => vm,
        None => {
            let vm = doc
                .verification_methods
                .iter()
                .find(|vm| vm.id == did_url)
                .ok_or_else(|| DidError::KeyNotFound(did_url.to_string()))?;
            let authorized =
                doc.assertion_method.iter().any(|r| matches!(r, MethodRef::Reference(id) if id == did_url));
            if !authorized {
                return Err(DidError::NotAuthorizedForAssertion(did_url.to_string()));
            }
            vm
        }
    };
    let wrong = |why: String| DidError::WrongKeyType(did_url.to_string(), why);
    let bytes = multibase_decode(&method.public_key_multibase).map_err(|e| wrong(e.to_string()))?;
    if bytes.len() != 34 {
        return Err(wrong(format!("decoded length {} (expected 34)", bytes.len())));
    }
    if bytes[..2] != ED25519_PUB_MULTICODEC {
        return Err(wrong(format!("multicodec prefix {:02x}{:02x}", bytes[0], bytes[1])));
    }
    Ok(bytes[2..].try_into().expect("34 - 2 = 32"))
}

/// Retrieves raw DID document bytes. Implementations must tolerate
/// concurrent calls.
pub trait DocumentSource: Send + Sync {
    fn fetch(&self, did: &str, url: &Url) -> Result<Vec<u8>, DidError>;
}

/// Fixture directory: `did:web:example.com` lives in `did_web_example.com.json`.
#[derive(Debug, Clone)]
pub struct DirectorySource {
    dir: PathBuf,
}

impl DirectorySource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn file_name(did: &str) -> String {
        format!("{}.json", did.replace(':', "_"))
    }
}

impl DocumentSource for DirectorySource {
    fn fetch(&self, did: &str, _url: &Url) -> Result<Vec<u8>, DidError> {
        let path = self.dir.join(Self::file_name(did));
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => DidError::fetch(Some(404), format!("{} not found", path.display())),
            _ => DidError::fetch(None, format!("{}: {e}", path.display())),
        })
    }
}

/// HTTPS fetcher; plain HTTP only with `allow_insecure_http`.
pub struct HttpSource {
    client: reqwest::blocking::Client,
    allow_insecure_http: bool,
    /// Replaces scheme and authority of every URL; used to point at a local
    /// test server.
    base_override: Option<Url>,
}

impl HttpSource {
    pub fn new() -> Self {
        Self {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(10))
                .build()
                .expect("HTTP client builds"),
            allow_insecure_http: false,
            base_override: None,
        }
    }

    pub fn allow_insecure_http(mut self, allow: bool) -> Self {
        self.allow_insecure_http = allow;
        self
    }

    pub fn with_base_override(mut self, base: Url) -> Self {
        self.base_override = Some(base);
        self
    }
}

impl Default for HttpSource {
    fn default() -> Self {
        Self::new()
    }
}

impl DocumentSource for HttpSource {
    fn fetch(&self, _did: &str, url: &Url) -> Result<Vec<u8>, DidError> {
        let mut url = url.clone();
        if let Some(base) = &self.base_override {
            url = base.join(url.path().trim_start_matches('/')).map_err(|e| DidError::fetch(None, e.to_string()))?;
        }
        match url.scheme() {
            "https" => {}
            "http" if self.allow_insecure_http => {}
            other => return Err(DidError::fetch(None, format!("refusing {other}:// URL {url}; HTTPS required"))),
        }
        let response = self
            .client
            .get(url.clone())
            .header("Accept", "application/did+json, application/json")
            .send()
            .map_err(|e| DidError::fetch(None, e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(DidError::fetch(Some(status.as_u16()), format!("GET {url}")));
        }
        response.bytes().map(|b| b.to_vec()).map_err(|e| DidError::fetch(None, e.to_string()))
    }
}

/// Fetches and validates the document for `did`.
pub fn resolve(did: &str, source: &dyn DocumentSource) -> Result<DidDocument, DidError> {
    let url = did_web_to_url(did)?;
    let doc = DidDocument::parse(&source.fetch(did, &url)?)?;
    if doc.id != did {
        return Err(DidError::DocumentIdMismatch { expected: did.to_string(), found: doc.id });
    }
    Ok(doc)
}

/// Caching resolver, shareable across threads.
pub struct DidResolver {
    source: Box<dyn DocumentSource>,
    ttl: Duration,
    cache: Mutex<HashMap<String, (Instant, Arc<DidDocument>)>>,
}

impl DidResolver {
    pub fn new(source: Box<dyn DocumentSource>) -> Self {
        Self::with_ttl(source, DEFAULT_CACHE_TTL)
    }

    pub fn with_ttl(source: Box<dyn DocumentSource>, ttl: Duration) -> Self {
        Self { source, ttl, cache: Mutex::new(HashMap::new()) }
    }

    pub fn resolve(&self, did: &str) -> Result<Arc<DidDocument>, DidError> {
        if let Some((at, doc)) = self.cache.lock().expect("cache lock").get(did) {
            if at.elapsed() < self.ttl {
                return Ok(doc.clone());
            }
        }
        // Fetch outside the lock; a concurrent duplicate fetch is harmless.
        let doc = Arc::new(resolve(did, self.source.as_ref())?);
        self.cache.lock().expect("cache lock").insert(did.to_string(), (Instant::now(), doc.clone()));
        Ok(doc)
    }
}

impl KeyResolver for DidResolver {
    fn resolve_key(&self, verification_method: &str) -> Result<[u8; 32], String> {
        let (did, _) =
            split_did_url(verification_method).ok_or_else(|| format!("{verification_method:?} is not a DID URL"))?;
        let doc = self.resolve(did).map_err(|e| e.to_string())?;
        find_verification_key(&doc, verification_method).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::{keygen, multibase_encode};
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn url_mapping() {
        assert_eq!(
            did_web_to_url("did:web:issuer.example.org").unwrap().as_str(),
            "https://issuer.example.org/.well-known/did.json"
        );
        assert_eq!(
            did_web_to_url("did:web:example.com:users:alice").unwrap().as_str(),
            "https://example.com/users/alice/did.json"
        );
        assert_eq!(
            did_web_to_url("did:web:localhost%3A8443").unwrap().as_str(),
            "https://localhost:8443/.well-known/did.json"
        );
        assert!(matches!(did_web_to_url("did:key:z6Mkabc"), Err(DidError::NotDidWeb(_))));
        assert!(matches!(did_web_to_url("did:web:"), Err(DidError::EmptyHost(_))));
        assert!(matches!(did_web_to_url("did:web:a.com#k"), Err(DidError::NotDidWeb(_))));
    }

    fn doc_json(id: &str, key: &str) -> String {
        serde_json::json!({
            "@context": [DID_CONTEXT],
            "id": id,
            "verificationMethod": [{"id": "#key-1", "type": "Multikey", "controller": id, "publicKeyMultibase": key}],
            "assertionMethod": ["#key-1"]
        })
        .to_string()
    }

    struct Fixed(String, AtomicUsize);

    impl DocumentSource for Fixed {
        fn fetch(&self, _did: &str, _url: &Url) -> Result<Vec<u8>, DidError> {
            self.1.fetch_add(1, Ordering::SeqCst);
            Ok(self.0.clone().into_bytes())
        }
    }

    #[test]
    fn key_lookup() {
        let key = keygen(Some(&[5u8; 32])).unwrap();
        let did = "did:web:issuer.example.org";
        let src = Fixed(doc_json(did, &key.public_multibase()), AtomicUsize::new(0));
        let doc = resolve(did, &src).unwrap();
        assert_eq!(find_verification_key(&doc, &format!("{did}#key-1")).unwrap(), key.public());
        assert!(matches!(find_verification_key(&doc, &format!("{did}#key-9")), Err(DidError::KeyNotFound(_))));

        let raw = Fixed(doc_json(did, &multibase_encode(&key.public())), AtomicUsize::new(0));
        let doc = resolve(did, &raw).unwrap();
        assert!(matches!(find_verification_key(&doc, &format!("{did}#key-1")), Err(DidError::WrongKeyType(..))));
    }

    #[test]
    fn unauthorized_method() {
        let key = keygen(Some(&[5u8; 32])).unwrap();
        let mut doc = DidDocument::for_key("did:web:a.example", "key-1", &key.public());
        doc.assertion_method.clear();
        assert!(matches!(
            find_verification_key(&doc, "did:web:a.example#key-1"),
            Err(DidError::NotAuthorizedForAssertion(_))
        ));
    }

    #[test]
    fn embedded_assertion_method() {
        let key = keygen(Some(&[6u8; 32])).unwrap();
        let mut doc = DidDocument::for_key("did:web:a.example", "key-1", &key.public());
        let vm = doc.verification_methods.remove(0);
        doc.assertion_method = vec![MethodRef::Embedded(vm)];
        let parsed = DidDocument::parse(doc.to_json_pretty().as_bytes()).unwrap();
        assert_eq!(find_verification_key(&parsed, "did:web:a.example#key-1").unwrap(), key.public());
    }

    #[test]
    fn id_mismatch_and_malformed() {
        let src = Fixed(doc_json("did:web:other.example", "z"), AtomicUsize::new(0));
        assert!(matches!(resolve("did:web:issuer.example.org", &src), Err(DidError::DocumentIdMismatch { .. })));
        let bad = Fixed("{\"id\": 3}".into(), AtomicUsize::new(0));
        assert!(matches!(resolve("did:web:a.example", &bad), Err(DidError::MalformedDocument(_))));
        let dangling = serde_json::json!({"id": "did:web:a.example", "assertionMethod": ["#nope"]}).to_string();
        assert!(matches!(
            resolve("did:web:a.example", &Fixed(dangling, AtomicUsize::new(0))),
            Err(DidError::MalformedDocument(_))
        ));
    }

    #[test]
    fn cache_respects_ttl() {
        let key = keygen(Some(&[5u8; 32])).unwrap();
        let did = "did:web:a.example";
        let src = Arc::new(Fixed(doc_json(did, &key.public_multibase()), AtomicUsize::new(0)));
        struct Shared(Arc<Fixed>);
        impl DocumentSource for Shared {
            fn fetch(&self, did: &str, url: &Url) -> Result<Vec<u8>, DidError> {
                self.0.fetch(did, url)
            }
        }
        let cached = DidResolver::new(Box::new(Shared(src.clone())));
        assert_eq!(cached.resolve(did).unwrap(), cached.resolve(did).unwrap());
        assert_eq!(src.1.load(Ordering::SeqCst), 1);
        let uncached = DidResolver::with_ttl(Box::new(Shared(src.clone())), Duration::ZERO);
        uncached.resolve(did).unwrap();
        uncached.resolve(did).unwrap();
        assert_eq!(src.1.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn directory_source() {
        let dir = tempfile::tempdir().unwrap();
        let key = keygen(Some(&[5u8; 32])).unwrap();
        let did = "did:web:issuer.example.org";
        let doc = DidDocument::for_key(did, "key-1", &key.public());
        fs::write(dir.path().join("did_web_issuer.example.org.json"), doc.to_json_pretty()).unwrap();
        let resolver = DidResolver::new(Box::new(DirectorySource::new(dir.path())));
        assert_eq!(resolver.resolve_key(&format!("{did}#key-1")).unwrap(), key.public());
        assert!(matches!(
            resolve("did:web:missing.example", &DirectorySource::new(dir.path())),
            Err(DidError::FetchFailed { status: Some(404), .. })
        ));
    }

    #[test]
    fn http_source_refuses_plain_http() {
        let url = Url::parse("http://127.0.0.1:1/.well-known/did.json").unwrap();
        let err = HttpSource::new().fetch("did:web:x", &url).unwrap_err();
        assert!(matches!(err, DidError::FetchFailed { status: None, ref message } if message.contains("HTTPS")));
    }
}
