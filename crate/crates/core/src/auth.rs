//! Per-packet message authentication. The tag is an HMAC-SHA-256 over the
//! protocol version, the cleartext packet-number bits and the transmitted
//! nucleotide sequence, so verification can happen before any extraction.

use std::fmt;

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::codec::{BitString, NucleotideSeq};
use crate::wire::WIRE_VERSION;

type HmacSha256 = Hmac<Sha256>;

pub const TAG_LEN: usize = 32;
pub const MIN_KEY_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuthError {
    #[error("MAC key must be at least {MIN_KEY_LEN} bytes, got {0}")]
    KeyTooShort(usize),
    #[error("tag must be {TAG_LEN} bytes of hex, got {0:?}")]
    BadTagEncoding(String),
}

/// Shared secret key for packet authentication. Never serialized into
/// envelopes; the session file carries it out of band.
#[derive(Clone, PartialEq, Eq)]
pub struct MacKey(Vec<u8>);

impl MacKey {
    pub fn new(key_material: Vec<u8>) -> Result<Self, AuthError> {
        if key_material.len() < MIN_KEY_LEN {
            return Err(AuthError::KeyTooShort(key_material.len()));
        }
        Ok(MacKey(key_material))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

// Keep key material out of debug output.
impl fmt::Debug for MacKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacKey({} bytes)", self.0.len())
    }
}

/// A 32-byte authentication tag, rendered as lowercase hex on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthTag([u8; TAG_LEN]);

impl AuthTag {
    pub fn from_bytes(bytes: [u8; TAG_LEN]) -> Self {
        AuthTag(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; TAG_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Strictly lowercase hex, exactly 64 characters.
    pub fn from_hex(s: &str) -> Result<Self, AuthError> {
        if s.len() != TAG_LEN * 2 || s.chars().any(|c| c.is_ascii_uppercase()) {
            return Err(AuthError::BadTagEncoding(s.to_string()));
        }
        let bytes = hex::decode(s).map_err(|_| AuthError::BadTagEncoding(s.to_string()))?;
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&bytes);
        Ok(AuthTag(tag))
    }
}

impl fmt::Display for AuthTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

/// Tag over `"SPATIAL/1" ':' <seq bits as ASCII 0/1> ':' <sequence as ASCII>`.
pub fn compute_mac(key: &MacKey, seq_bits: &BitString, sequence: &NucleotideSeq) -> AuthTag {
    let mut mac = HmacSha256::new_from_slice(key.as_bytes()).expect("hmac accepts any key length");
    mac.update(WIRE_VERSION.as_bytes());
    mac.update(b":");
    mac.update(seq_bits.to_string().as_bytes());
    mac.update(b":");
    mac.update(&sequence.to_bytes());
    let mut tag = [0u8; TAG_LEN];
    tag.copy_from_slice(&mac.finalize().into_bytes());
    AuthTag(tag)
}

/// Constant-time tag comparison against a fresh computation.
pub fn verify_mac(
    key: &MacKey,
    seq_bits: &BitString,
    sequence: &NucleotideSeq,
    tag: &AuthTag,
) -> bool {
    let expected = compute_mac(key, seq_bits, sequence);
    let mut diff = 0u8;
    for (a, b) in expected.0.iter().zip(tag.0.iter()) {
        diff |= a ^ b;
    }
    diff == 0
}
