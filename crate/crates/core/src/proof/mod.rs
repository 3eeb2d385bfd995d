//! Data-integrity proofs with the `eddsa-rdfc-2022` cryptosuite.
//!
//! The signing input is `SHA-256(canonical proof options) || SHA-256(canonical
//! document)`, both canonicalized with RDFC-1.0, and the proof value is the
//! base58btc multibase of the 64-byte Ed25519 signature.

mod keys;
mod multibase;

use std::collections::BTreeMap;
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canon::{canonicalize, CanonError};
use crate::envelope::{truncate_to_seconds, AigcEnvelope, EnvelopeError};
use crate::rdf::{envelope_to_dataset, proof_options_dataset, Dataset};

pub use keys::{keygen, public_key_multibase, verify_signature, KeyError, KeyFile, KeyPair};
pub use multibase::{
    multibase_decode, multibase_encode, MultibaseError, ED25519_PRIV_MULTICODEC, ED25519_PUB_MULTICODEC,
};

pub const PROOF_TYPE: &str = "DataIntegrityProof";
pub const PROOF_PURPOSE: &str = "assertionMethod";
pub const CRYPTOSUITE: &str = "eddsa-rdfc-2022";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub proof_type: String,
    /// Whole-second UTC timestamp.
    pub created: DateTime<Utc>,
    pub proof_purpose: String,
    /// DID URL: the issuer DID plus `#fragment`.
    pub verification_method: String,
    pub cryptosuite: String,
    pub proof_value: String,
}

impl Proof {
    /// Proof options with an empty value, as signed.
    pub fn options(verification_method: impl Into<String>, created: DateTime<Utc>) -> Self {
        Self {
            proof_type: PROOF_TYPE.into(),
            created: truncate_to_seconds(created),
            proof_purpose: PROOF_PURPOSE.into(),
            verification_method: verification_method.into(),
            cryptosuite: CRYPTOSUITE.into(),
            proof_value: String::new(),
        }
    }

    #[cfg(test)]
    pub(crate) fn sample() -> Self {
        Self {
            proof_value: multibase_encode(&[0u8; 64]),
            ..Self::options(
                "did:web:issuer.example.org#key-1",
                crate::envelope::parse_timestamp("created", "2025-01-02T03:04:05Z").unwrap(),
            )
        }
    }
}

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("envelope already carries a proof")]
    AlreadySigned,
    #[error("verification method {method:?} does not belong to issuer {issuer:?}")]
    IssuerMismatch { method: String, issuer: String },
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(#[from] EnvelopeError),
    #[error(transparent)]
    Canonicalization(#[from] CanonError),
}

/// Outcome of [`verify_envelope`]; failures are values, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerificationResult {
    Verified,
    SignatureInvalid,
    KeyNotFound(String),
    UnsupportedCryptosuite(String),
    MalformedProof(String),
}

impl VerificationResult {
    pub fn is_verified(&self) -> bool {
        matches!(self, VerificationResult::Verified)
    }

    /// Variant name, used in per-file status lines.
    pub fn status(&self) -> &'static str {
        match self {
            VerificationResult::Verified => "Verified",
            VerificationResult::SignatureInvalid => "SignatureInvalid",
            VerificationResult::KeyNotFound(_) => "KeyNotFound",
            VerificationResult::UnsupportedCryptosuite(_) => "UnsupportedCryptosuite",
            VerificationResult::MalformedProof(_) => "MalformedProof",
        }
    }

    pub fn detail(&self) -> Option<&str> {
        match self {
            VerificationResult::Verified | VerificationResult::SignatureInvalid => None,
            VerificationResult::KeyNotFound(d)
            | VerificationResult::UnsupportedCryptosuite(d)
            | VerificationResult::MalformedProof(d) => Some(d),
        }
    }
}

impl std::fmt::Display for VerificationResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.detail() {
            Some(d) => write!(f, "{}: {d}", self.status()),
            None => f.write_str(self.status()),
        }
    }
}

/// Maps a verification-method DID URL to a raw Ed25519 public key.
pub trait KeyResolver: Send + Sync {
    fn resolve_key(&self, verification_method: &str) -> Result<[u8; 32], String>;
}

/// In-memory resolver, mainly for tests and local keys.
#[derive(Debug, Default)]
pub struct StaticKeyResolver {
    keys: RwLock<BTreeMap<String, [u8; 32]>>,
}

impl StaticKeyResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(self, verification_method: impl Into<String>, public: [u8; 32]) -> Self {
        self.insert(verification_method, public);
        self
    }

    pub fn insert(&self, verification_method: impl Into<String>, public: [u8; 32]) {
        self.keys.write().expect("key map lock").insert(verification_method.into(), public);
    }
}

impl KeyResolver for StaticKeyResolver {
    fn resolve_key(&self, verification_method: &str) -> Result<[u8; 32], String> {
        self.keys
            .read()
            .expect("key map lock")
            .get(verification_method)
            .copied()
            .ok_or_else(|| format!("no key for {verification_method}"))
    }
}

/// DID part of a DID URL, or `None` without a non-empty fragment.
pub fn split_did_url(did_url: &str) -> Option<(&str, &str)> {
    let (did, fragment) = did_url.split_once('#')?;
    (!did.is_empty() && !fragment.is_empty()).then_some((did, fragment))
}

fn canonical_digest(dataset: &Dataset) -> Result<[u8; 32], CanonError> {
    Ok(Sha256::digest(canonicalize(dataset)?.nquads.as_bytes()).into())
}

/// Signing input from the two datasets; blank-node labels do not matter.
pub fn signing_input_from_datasets(options: &Dataset, document: &Dataset) -> Result<[u8; 64], CanonError> {
    let mut input = [0u8; 64];
    input[..32].copy_from_slice(&canonical_digest(options)?);
    input[32..].copy_from_slice(&canonical_digest(document)?);
    Ok(input)
}

/// The 64 bytes signed for `envelope` under `proof`'s options.
pub fn signing_input(envelope: &AigcEnvelope, proof: &Proof) -> Result<[u8; 64], CanonError> {
    signing_input_from_datasets(&proof_options_dataset(proof), &envelope_to_dataset(envelope, false))
}

pub fn sign_envelope(
    envelope: &AigcEnvelope,
    key: &KeyPair,
    verification_method: &str,
    created: DateTime<Utc>,
) -> Result<AigcEnvelope, ProofError> {
    if envelope.proof.is_some() {
        return Err(ProofError::AlreadySigned);
    }
    envelope.validate()?;
    let mismatch =
        || ProofError::IssuerMismatch { method: verification_method.to_string(), issuer: envelope.issuer.id.clone() };
    let (did, _) = split_did_url(verification_method).ok_or_else(mismatch)?;
    if did != envelope.issuer.id {
        return Err(mismatch());
    }
    let mut proof = Proof::options(verification_method, created);
    let input = signing_input(envelope, &proof)?;
    proof.proof_value = multibase_encode(&key.sign(&input));
    Ok(AigcEnvelope { proof: Some(proof), ..envelope.clone() })
}

pub fn verify_envelope(envelope: &AigcEnvelope, resolver: &dyn KeyResolver) -> VerificationResult {
    use VerificationResult::*;
    let Some(proof) = &envelope.proof else {
        return MalformedProof("envelope has no proof".into());
    };
    if proof.cryptosuite != CRYPTOSUITE {
        return UnsupportedCryptosuite(proof.cryptosuite.clone());
    }
    if proof.proof_type != PROOF_TYPE {
        return MalformedProof(format!("proof type {:?}", proof.proof_type));
    }
    if proof.proof_purpose != PROOF_PURPOSE {
        return MalformedProof(format!("proof purpose {:?}", proof.proof_purpose));
    }
    let signature: [u8; 64] = match multibase_decode(&proof.proof_value) {
        Ok(bytes) => match bytes.try_into() {
            Ok(sig) => sig,
            Err(bytes) => {
                let bytes: Vec<u8> = bytes;
                return MalformedProof(format!("proof value decodes to {} bytes, expected 64", bytes.len()));
            }
        },
        Err(e) => return MalformedProof(format!("proof value: {e}")),
    };
    let Some((did, _)) = split_did_url(&proof.verification_method) else {
        return MalformedProof(format!("verification method {:?} is not a DID URL", proof.verification_method));
    };
    let public = match resolver.resolve_key(&proof.verification_method) {
        Ok(k) => k,
        Err(reason) => return KeyNotFound(reason),
    };
    let input = match signing_input(&envelope.unsigned(), proof) {
        Ok(i) => i,
        Err(e) => return MalformedProof(e.to_string()),
    };
    if !verify_signature(&public, &input, &signature) {
        return SignatureInvalid;
    }
    // A valid signature by a key outside the issuer's DID proves nothing
    // about the issuer.
    if did != envelope.issuer.id {
        return MalformedProof(format!(
            "verification method {:?} does not belong to issuer {:?}",
            proof.verification_method, envelope.issuer.id
        ));
    }
    VerificationResult::Verified
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{build_envelope, parse_timestamp, IssuerRef};
    use crate::rdf::Quad;
    use crate::rdf::Term;

    const VM: &str = "did:web:issuer.example.org#key-1";

    fn ts(s: &str) -> DateTime<Utc> {
        parse_timestamp("t", s).unwrap()
    }

    fn unsigned() -> AigcEnvelope {
        build_envelope(
            crate::envelope::tests::sample_content(),
            IssuerRef::new("did:web:issuer.example.org", "Example"),
            ts("2025-03-01T00:00:00Z"),
            Some(uuid::Uuid::from_u128(0x1234)),
        )
        .unwrap()
    }

    fn key() -> KeyPair {
        keygen(Some(&[9u8; 32])).unwrap()
    }

    fn resolver() -> StaticKeyResolver {
        StaticKeyResolver::new().with(VM, key().public())
    }

    #[test]
    fn sign_is_deterministic_and_verifies() {
        let a = sign_envelope(&unsigned(), &key(), VM, ts("2025-03-01T00:00:01Z")).unwrap();
        let b = sign_envelope(&unsigned(), &key(), VM, ts("2025-03-01T00:00:01Z")).unwrap();
        assert_eq!(a.proof, b.proof);
        let value = &a.proof.as_ref().unwrap().proof_value;
        assert!(value.starts_with('z'));
        assert_eq!(multibase_decode(value).unwrap().len(), 64);
        assert_eq!(verify_envelope(&a, &resolver()), VerificationResult::Verified);
    }

    #[test]
    fn sign_preconditions() {
        let signed = sign_envelope(&unsigned(), &key(), VM, Utc::now()).unwrap();
        assert!(matches!(sign_envelope(&signed, &key(), VM, Utc::now()), Err(ProofError::AlreadySigned)));
        assert!(matches!(
            sign_envelope(&unsigned(), &key(), "did:web:other.example#key-1", Utc::now()),
            Err(ProofError::IssuerMismatch { .. })
        ));
        assert!(matches!(
            sign_envelope(&unsigned(), &key(), "did:web:issuer.example.org", Utc::now()),
            Err(ProofError::IssuerMismatch { .. })
        ));
    }

    #[test]
    fn tampering_and_failures() {
        let signed = sign_envelope(&unsigned(), &key(), VM, ts("2025-03-01T00:00:01Z")).unwrap();

        let mut t = signed.clone();
        t.subject.value.push('!');
        assert_eq!(verify_envelope(&t, &resolver()), VerificationResult::SignatureInvalid);

        let mut t = signed.clone();
        t.proof.as_mut().unwrap().created = ts("2025-03-01T00:00:02Z");
        assert_eq!(verify_envelope(&t, &resolver()), VerificationResult::SignatureInvalid);

        let mut t = signed.clone();
        t.proof.as_mut().unwrap().cryptosuite = "ecdsa-rdfc-2019".into();
        assert!(matches!(verify_envelope(&t, &resolver()), VerificationResult::UnsupportedCryptosuite(_)));

        let mut t = signed.clone();
        t.proof.as_mut().unwrap().proof_value = "U7wKOddv".into();
        assert!(matches!(verify_envelope(&t, &resolver()), VerificationResult::MalformedProof(_)));

        let other = StaticKeyResolver::new().with(VM, keygen(Some(&[8u8; 32])).unwrap().public());
        assert_eq!(verify_envelope(&signed, &other), VerificationResult::SignatureInvalid);
        assert!(matches!(verify_envelope(&signed, &StaticKeyResolver::new()), VerificationResult::KeyNotFound(_)));
        assert!(matches!(verify_envelope(&unsigned(), &resolver()), VerificationResult::MalformedProof(_)));
    }

    #[test]
    fn foreign_key_cannot_vouch_for_issuer() {
        let mut env = unsigned();
        env.issuer.id = "did:web:mallory.example".into();
        let forged = sign_envelope(&env, &key(), "did:web:mallory.example#key-1", Utc::now()).unwrap();
        let mut claimed = forged.clone();
        claimed.issuer.id = "did:web:issuer.example.org".into();
        let r = StaticKeyResolver::new().with("did:web:mallory.example#key-1", key().public());
        // The issuer id is signed, so relabeling it breaks the signature.
        assert_eq!(verify_envelope(&claimed, &r), VerificationResult::SignatureInvalid);
    }

    #[test]
    fn blank_labels_do_not_affect_signing_input() {
        let env = unsigned();
        let proof = Proof::options(VM, ts("2025-03-01T00:00:01Z"));
        let doc = envelope_to_dataset(&env, false);
        let renamed: Dataset =
            doc.iter().map(|q: &Quad| q.map_blanks(|l| Term::blank(format!("renamed{l}x")))).collect();
        assert_eq!(
            signing_input_from_datasets(&proof_options_dataset(&proof), &doc).unwrap(),
            signing_input_from_datasets(&proof_options_dataset(&proof), &renamed).unwrap()
        );
    }
}
