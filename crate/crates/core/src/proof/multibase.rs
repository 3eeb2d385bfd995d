//! Base58btc multibase (`z` prefix) and the Ed25519 multicodec prefixes.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultibaseError {
    #[error("unsupported multibase prefix {0:?}, expected 'z' (base58btc)")]
    UnknownMultibasePrefix(String),
    #[error("invalid base58btc character {0:?}")]
    InvalidBase58Char(char),
}

/// Multicodec varint for an Ed25519 public key (0xed).
pub const ED25519_PUB_MULTICODEC: [u8; 2] = [0xed, 0x01];
/// Multicodec varint for an Ed25519 private key seed (0x1300).
pub const ED25519_PRIV_MULTICODEC: [u8; 2] = [0x80, 0x26];

pub fn multibase_encode(bytes: &[u8]) -> String {
    format!("z{}", bs58::encode(bytes).into_string())
}

pub fn multibase_decode(text: &str) -> Result<Vec<u8>, MultibaseError> {
    let Some(payload) = text.strip_prefix('z') else {
        return Err(MultibaseError::UnknownMultibasePrefix(text.chars().next().map(String::from).unwrap_or_default()));
    };
    bs58::decode(payload).into_vec().map_err(|e| match e {
        bs58::decode::Error::InvalidCharacter { character, .. } => MultibaseError::InvalidBase58Char(character),
        bs58::decode::Error::NonAsciiCharacter { index } => {
            MultibaseError::InvalidBase58Char(payload[index..].chars().next().unwrap_or('?'))
        }
        other => MultibaseError::InvalidBase58Char(other.to_string().chars().next().unwrap_or('?')),
    })
}
