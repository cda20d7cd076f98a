//! Hashing, signatures and symmetric sealing shared by the ledger, DHT and
//! simulator.

use std::fmt;
use std::str::FromStr;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid hex: {0}")]
    Hex(String),
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("authenticated decryption failed")]
    Open,
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash(parts: &[&[u8]]) -> Key256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Key256(h.finalize().into())
}

/// A 256-bit identifier. Byte order is big-endian, so the derived `Ord` is
/// numeric order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Key256(pub [u8; 32]);

impl Key256 {
    pub const ZERO: Key256 = Key256([0u8; 32]);

    /// Arbitrary string keys are admitted and hashed into the keyspace.
    pub fn from_name(name: &str) -> Key256 {
        hash(&[name.as_bytes()])
    }

    pub fn xor(&self, other: &Key256) -> Key256 {
        let mut out = [0u8; 32];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        Key256(out)
    }

    pub fn leading_zeros(&self) -> u32 {
        let mut n = 0;
        for b in self.0 {
            if b == 0 {
                n += 8;
            } else {
                return n + b.leading_zeros();
            }
        }
        n
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Key256 {
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b);
        Key256(b)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Key256, CryptoError> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        let v = hex::decode(s).map_err(|e| CryptoError::Hex(e.to_string()))?;
        let arr: [u8; 32] = v
            .as_slice()
            .try_into()
            .map_err(|_| CryptoError::Length { expected: 32, got: v.len() })?;
        Ok(Key256(arr))
    }
}

impl fmt::Debug for Key256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key256({}..)", &self.to_hex()[..12])
    }
}

impl fmt::Display for Key256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Key256 {
    type Err = CryptoError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Key256::from_hex(s)
    }
}

impl Serialize for Key256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Key256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Key256::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Ed25519 verifying key bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<PublicKey, CryptoError> {
        Key256::from_hex(s).map(|k| PublicKey(k.0))
    }

    /// The 256-bit digest used wherever a key is folded into an address.
    pub fn digest(&self) -> Key256 {
        hash(&[&self.0])
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}..)", &self.to_hex()[..12])
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PublicKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..6]))
    }
}

/// Abstract signing interface; ledger code depends only on this and
/// [`verify`].
pub trait Signer {
    fn public_key(&self) -> PublicKey;
    fn sign(&self, msg: &[u8]) -> Signature;
}

/// Returns false for malformed keys as well as bad signatures.
pub fn verify(pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify(msg, &sig).is_ok()
}

/// An Ed25519 signing keypair.
#[derive(Clone)]
pub struct Keypair {
    signing: SigningKey,
}

impl Keypair {
    pub fn from_seed(seed: [u8; 32]) -> Keypair {
        Keypair { signing: SigningKey::from_bytes(&seed) }
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Keypair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Keypair::from_seed(seed)
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    /// Symmetric key for client-side encryption of the owner's records.
    pub fn storage_key(&self) -> [u8; 32] {
        hash(&[b"mpcnet/storage-key", &self.signing.to_bytes()]).0
    }
}

impl fmt::Debug for Keypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Keypair").field("public", &self.public_key()).finish_non_exhaustive()
    }
}

impl Signer for Keypair {
    fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.signing.sign(msg).to_bytes())
    }
}

/// ChaCha20-Poly1305 under `key`; output is `nonce(12) || ciphertext`.
pub fn seal(key: &[u8; 32], nonce: [u8; 12], plaintext: &[u8]) -> Vec<u8> {
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("in-memory encryption cannot fail");
    let mut out = Vec::with_capacity(12 + ct.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&ct);
    out
}

pub fn open(key: &[u8; 32], sealed: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < 12 + 16 {
        return Err(CryptoError::Open);
    }
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    cipher.decrypt(Nonce::from_slice(&sealed[..12]), &sealed[12..]).map_err(|_| CryptoError::Open)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sign_and_verify() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let kp = Keypair::generate(&mut rng);
        let sig = kp.sign(b"hello");
        assert!(verify(&kp.public_key(), b"hello", &sig));
        assert!(!verify(&kp.public_key(), b"hellp", &sig));
        let mut bad = sig;
        bad.0[3] ^= 1;
        assert!(!verify(&kp.public_key(), b"hello", &bad));
    }

    #[test]
    fn seal_roundtrip_and_wrong_key() {
        let ct = seal(&[7u8; 32], [1u8; 12], b"secret");
        assert_eq!(open(&[7u8; 32], &ct).unwrap(), b"secret");
        assert_eq!(open(&[8u8; 32], &ct), Err(CryptoError::Open));
    }

    #[test]
    fn key_hex_and_order() {
        let k = Key256::from_name("abc");
        assert_eq!(Key256::from_hex(&k.to_hex()).unwrap(), k);
        assert_eq!(Key256::from_hex(&format!("0x{}", k.to_hex())).unwrap(), k);
        let mut small = Key256::ZERO;
        small.0[31] = 1;
        let mut big = Key256::ZERO;
        big.0[0] = 1;
        assert!(small < big);
        assert_eq!(big.leading_zeros(), 7);
        assert_eq!(Key256::ZERO.leading_zeros(), 256);
    }
}
