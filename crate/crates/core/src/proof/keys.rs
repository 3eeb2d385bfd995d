//! Ed25519 key pairs and the JSON key file.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::multibase::{multibase_decode, multibase_encode, ED25519_PRIV_MULTICODEC, ED25519_PUB_MULTICODEC};

#[derive(Debug, Error)]
pub enum KeyError {
    #[error("seed must be 32 bytes, got {0}")]
    BadSeedLength(usize),
    #[error("key file {path}: {reason}")]
    BadKeyFile { path: String, reason: String },
    #[error("key file {path} already exists")]
    KeyFileExists { path: String },
    #[error("key file I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("public", &hex::encode(self.public())).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_seed(seed: &[u8]) -> Result<Self, KeyError> {
        let seed: [u8; 32] = seed.try_into().map_err(|_| KeyError::BadSeedLength(seed.len()))?;
        Ok(Self { signing: SigningKey::from_bytes(&seed) })
    }

    pub fn private(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn sign(&self, message: &[u8]) -> [u8; 64] {
        self.signing.sign(message).to_bytes()
    }

    /// `publicKeyMultibase` form: multicodec 0xed01 + key, base58btc.
    pub fn public_multibase(&self) -> String {
        public_key_multibase(&self.public())
    }
}

pub fn public_key_multibase(public: &[u8; 32]) -> String {
    let mut bytes = ED25519_PUB_MULTICODEC.to_vec();
    bytes.extend_from_slice(public);
    multibase_encode(&bytes)
}

/// Random key when `seed` is `None`, deterministic otherwise.
pub fn keygen(seed: Option<&[u8]>) -> Result<KeyPair, KeyError> {
    match seed {
        Some(s) => KeyPair::from_seed(s),
        None => {
            let mut s = [0u8; 32];
            OsRng.fill_bytes(&mut s);
            KeyPair::from_seed(&s)
        }
    }
}

/// Checks a 64-byte Ed25519 signature; malformed keys fail verification.
pub fn verify_signature(public: &[u8; 32], message: &[u8], signature: &[u8; 64]) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(public) else {
        return false;
    };
    key.verify(message, &ed25519_dalek::Signature::from_bytes(signature)).is_ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFileJson {
    id: String,
    public: String,
    private: String,
}

/// A key pair with its verification-method id, as stored on disk.
#[derive(Debug, Clone)]
pub struct KeyFile {
    pub id: String,
    pub key: KeyPair,
}

impl KeyFile {
    pub fn to_json(&self) -> String {
        let mut private = ED25519_PRIV_MULTICODEC.to_vec();
        private.extend_from_slice(&self.key.private());
        let json = KeyFileJson {
            id: self.id.clone(),
            public: self.key.public_multibase(),
            private: multibase_encode(&private),
        };
        serde_json::to_string_pretty(&json).expect("plain strings serialize") + "\n"
    }

    pub fn from_json(path: &str, text: &str) -> Result<Self, KeyError> {
        let bad = |reason: String| KeyError::BadKeyFile { path: path.to_string(), reason };
        let json: KeyFileJson = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let private = multibase_decode(&json.private).map_err(|e| bad(format!("private: {e}")))?;
        let seed = private
            .strip_prefix(&ED25519_PRIV_MULTICODEC[..])
            .ok_or_else(|| bad("private: missing Ed25519 private-key multicodec prefix".into()))?;
        let key = KeyPair::from_seed(seed).map_err(|e| bad(format!("private: {e}")))?;
        if key.public_multibase() != json.public {
            return Err(bad("public key does not match private key".into()));
        }
        Ok(Self { id: json.id, key })
    }

    /// Creates the file with owner-only permissions; refuses to overwrite.
    pub fn save(&self, path: &Path) -> Result<(), KeyError> {
        let mut options = OpenOptions::new();
        options.write(true).create_new(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            options.mode(0o600);
        }
        let mut file = options.open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => KeyError::KeyFileExists { path: path.display().to_string() },
            _ => KeyError::Io(e),
        })?;
        file.write_all(self.to_json().as_bytes())?;
        file.sync_all()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, KeyError> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&path.display().to_string(), &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // RFC 8032 section 7.1, TEST 1 to TEST 3.
    const VECTORS: [(&str, &str, &str, &str); 3] = [
        (
            "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
            "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a",
            "",
            "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b",
        ),
        (
            "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
            "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c",
            "72",
            "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00",
        ),
        (
            "c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7",
            "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025",
            "af82",
            "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac18ff9b538d16f290ae67f760984dc6594a7c15e9716ed28dc027beceea1ec40a",
        ),
    ];

    #[test]
    fn rfc8032_vectors() {
        for (secret, public, message, signature) in VECTORS {
            let key = keygen(Some(&hex::decode(secret).unwrap())).unwrap();
            assert_eq!(hex::encode(key.public()), public);
            let msg = hex::decode(message).unwrap();
            let sig = key.sign(&msg);
            assert_eq!(hex::encode(sig), signature);
            assert!(verify_signature(&key.public(), &msg, &sig));
        }
    }

    #[test]
    fn unseeded_keys_differ() {
        assert_ne!(keygen(None).unwrap().public(), keygen(None).unwrap().public());
    }

    #[test]
    fn bad_seed_length() {
        assert!(matches!(keygen(Some(&[0u8; 16])), Err(KeyError::BadSeedLength(16))));
    }

    #[test]
    fn public_multibase_has_ed25519_prefix() {
        let key = keygen(Some(&[7u8; 32])).unwrap();
        assert!(key.public_multibase().starts_with("z6Mk"));
    }

    #[test]
    fn key_file_round_trip_and_mode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("key.json");
        let kf = KeyFile { id: "did:web:example.com#key-1".into(), key: keygen(Some(&[3u8; 32])).unwrap() };
        kf.save(&path).unwrap();
        let back = KeyFile::load(&path).unwrap();
        assert_eq!(back.id, kf.id);
        assert_eq!(back.key.private(), kf.key.private());
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            assert_eq!(fs::metadata(&path).unwrap().permissions().mode() & 0o777, 0o600);
        }
        assert!(matches!(kf.save(&path), Err(KeyError::KeyFileExists { .. })));
    }

    #[test]
    fn key_file_rejects_mismatched_public() {
        let a = KeyFile { id: "x".into(), key: keygen(Some(&[1u8; 32])).unwrap() };
        let other = keygen(Some(&[2u8; 32])).unwrap().public_multibase();
        let text = a.to_json().replace(&a.key.public_multibase(), &other);
        assert!(KeyFile::from_json("k", &text).is_err());
    }
}
