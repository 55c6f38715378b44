//! Hashing, signatures, public-key encryption and virtual identities.
//!
//! Two schemes implement [`Primitives`]:
//!
//! * [`SimScheme`] is a fast, fully deterministic stand-in built from SHA-256.
//!   It honours the round-trip and tamper properties the protocols rely on but
//!   offers no secrecy or unforgeability: anyone holding the public key can
//!   produce a valid signature. It is what large simulations use.
//! * [`SecureScheme`] uses Ed25519 signatures and an ECIES-style construction
//!   (X25519 + SHA-256 KDF + ChaCha20-Poly1305) for encryption.
//!
//! Keys carry a one-byte scheme tag, so the free functions [`sign`],
//! [`verify`], [`encrypt`] and [`decrypt`] dispatch on the key itself and keys
//! of the two schemes never interoperate.

use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::ChaCha20Poly1305;
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::codec::Encoder;

pub const DIGEST_LEN: usize = 32;

const SIM_TAG: u8 = 0x01;
const SECURE_TAG: u8 = 0x02;
const SIM_AUTH_TAG_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("decryption failed: ciphertext does not open under this key")]
    DecryptionFailed,
    #[error("malformed {0}")]
    Malformed(&'static str),
}

/// Fixed-length SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0; DIGEST_LEN]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let mut out = [0u8; DIGEST_LEN];
        hex::decode_to_slice(s, &mut out).map_err(|_| CryptoError::Malformed("digest hex"))?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

macro_rules! byte_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(Vec<u8>);

        impl $name {
            pub fn from_bytes(bytes: Vec<u8>) -> Self {
                $name(bytes)
            }

            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(&self.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                hex::decode(&s).map($name).map_err(serde::de::Error::custom)
            }
        }
    };
}

byte_newtype!(PublicKey);
byte_newtype!(Signature);
byte_newtype!(Ciphertext);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = self.to_hex();
        write!(f, "PublicKey({}..)", &hex[..hex.len().min(12)])
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({} bytes)", self.0.len())
    }
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({} bytes)", self.0.len())
    }
}

/// Secret key material. Never serialized and redacted in debug output.
#[derive(Clone, PartialEq, Eq)]
pub struct PrivateKey(Vec<u8>);

impl PrivateKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub private_key: PrivateKey,
    pub public_key: PublicKey,
}

/// Pseudonym under which a user appears on the ledger: the hash of its public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VirtualIdentity(Digest);

impl VirtualIdentity {
    pub fn from_digest(d: Digest) -> Self {
        VirtualIdentity(d)
    }

    pub fn digest(&self) -> &Digest {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        self.0.as_bytes()
    }
}

impl fmt::Debug for VirtualIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vid({}..)", &self.0.to_hex()[..12])
    }
}

impl fmt::Display for VirtualIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

pub fn derive_vid(public_key: &PublicKey) -> VirtualIdentity {
    VirtualIdentity(Digest::of(public_key.as_bytes()))
}

/// The primitive set every protocol message is built from.
pub trait Primitives {
    fn generate_keypair(&self, seed: u64) -> KeyPair;
    fn sign(&self, private_key: &PrivateKey, message: &[u8]) -> Signature;
    fn verify(&self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool;
    fn encrypt(&self, public_key: &PublicKey, message: &[u8]) -> Result<Ciphertext, CryptoError>;
    fn decrypt(
        &self,
        private_key: &PrivateKey,
        ciphertext: &Ciphertext,
    ) -> Result<Vec<u8>, CryptoError>;
}

/// Runtime scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Sim,
    Secure,
}

impl Scheme {
    pub fn generate_keypair(self, seed: u64) -> KeyPair {
        match self {
            Scheme::Sim => SimScheme.generate_keypair(seed),
            Scheme::Secure => SecureScheme.generate_keypair(seed),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" => Ok(Scheme::Sim),
            "secure" => Ok(Scheme::Secure),
            other => Err(format!(
                "unknown crypto scheme `{other}` (expected sim|secure)"
            )),
        }
    }
}

fn scheme_of(tag: Option<&u8>) -> Option<&'static dyn Primitives> {
    match tag {
        Some(&SIM_TAG) => Some(&SimScheme),
        Some(&SECURE_TAG) => Some(&SecureScheme),
        _ => None,
    }
}

pub fn generate_keypair(scheme: Scheme, seed: u64) -> KeyPair {
    scheme.generate_keypair(seed)
}

pub fn sign(private_key: &PrivateKey, message: &[u8]) -> Signature {
    scheme_of(private_key.0.first())
        .expect("private keys are only built by generate_keypair")
        .sign(private_key, message)
}

pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    match scheme_of(public_key.0.first()) {
        Some(s) => s.verify(public_key, message, signature),
        None => false,
    }
}

pub fn encrypt(public_key: &PublicKey, message: &[u8]) -> Result<Ciphertext, CryptoError> {
    scheme_of(public_key.0.first())
        .ok_or(CryptoError::Malformed("public key"))?
        .encrypt(public_key, message)
}

pub fn decrypt(private_key: &PrivateKey, ciphertext: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    if private_key.0.first() != ciphertext.0.first() {
        return Err(CryptoError::DecryptionFailed);
    }
    scheme_of(private_key.0.first())
        .ok_or(CryptoError::Malformed("private key"))?
        .decrypt(private_key, ciphertext)
}

fn sha256(parts: &Encoder) -> [u8; DIGEST_LEN] {
    Sha256::digest(parts.as_bytes()).into()
}

fn tagged(tag: u8, body: &[&[u8]]) -> Vec<u8> {
    let mut out = vec![tag];
    for part in body {
        out.extend_from_slice(part);
    }
    out
}

/// Deterministic SHA-256 construction for simulation. Not secure.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimScheme;

impl SimScheme {
    fn public_from_private(private_key: &PrivateKey) -> PublicKey {
        let mut enc = Encoder::with_domain("bcdn/sim/public");
        enc.bytes(&private_key.0);
        PublicKey(tagged(SIM_TAG, &[&sha256(&enc)]))
    }

    fn keystream_xor(public_key: &PublicKey, auth_tag: &[u8], data: &mut [u8]) {
        for (counter, chunk) in data.chunks_mut(DIGEST_LEN).enumerate() {
            let mut enc = Encoder::with_domain("bcdn/sim/keystream");
            enc.bytes(&public_key.0).bytes(auth_tag).u64(counter as u64);
            for (b, k) in chunk.iter_mut().zip(sha256(&enc)) {
                *b ^= k;
            }
        }
    }

    fn auth_tag(public_key: &PublicKey, message: &[u8]) -> [u8; SIM_AUTH_TAG_LEN] {
        let mut enc = Encoder::with_domain("bcdn/sim/auth");
        enc.bytes(&public_key.0).bytes(message);
        sha256(&enc)[..SIM_AUTH_TAG_LEN]
            .try_into()
            .expect("16 bytes")
    }

    fn signature(public_key: &PublicKey, message: &[u8]) -> [u8; DIGEST_LEN] {
        let mut enc = Encoder::with_domain("bcdn/sim/signature");
        enc.bytes(&public_key.0).bytes(message);
        sha256(&enc)
    }
}

impl Primitives for SimScheme {
    fn generate_keypair(&self, seed: u64) -> KeyPair {
        let mut enc = Encoder::with_domain("bcdn/sim/private");
        enc.u64(seed);
        let private_key = PrivateKey(tagged(SIM_TAG, &[&sha256(&enc)]));
        let public_key = Self::public_from_private(&private_key);
        KeyPair {
            private_key,
            public_key,
        }
    }

    fn sign(&self, private_key: &PrivateKey, message: &[u8]) -> Signature {
        let public_key = Self::public_from_private(private_key);
        Signature(Self::signature(&public_key, message).to_vec())
    }

    fn verify(&self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        public_key.0.len() == 1 + DIGEST_LEN && signature.0 == Self::signature(public_key, message)
    }

    fn encrypt(&self, public_key: &PublicKey, message: &[u8]) -> Result<Ciphertext, CryptoError> {
        if public_key.0.len() != 1 + DIGEST_LEN {
            return Err(CryptoError::Malformed("public key"));
        }
        let auth = Self::auth_tag(public_key, message);
        let mut body = message.to_vec();
        Self::keystream_xor(public_key, &auth, &mut body);
        Ok(Ciphertext(tagged(SIM_TAG, &[&auth, &body])))
    }

    fn decrypt(
        &self,
        private_key: &PrivateKey,
        ciphertext: &Ciphertext,
    ) -> Result<Vec<u8>, CryptoError> {
        let ct = &ciphertext.0;
        if ct.len() < 1 + SIM_AUTH_TAG_LEN {
            return Err(CryptoError::DecryptionFailed);
        }
        let public_key = Self::public_from_private(private_key);
        let (auth, body) = ct[1..].split_at(SIM_AUTH_TAG_LEN);
        let mut plain = body.to_vec();
        Self::keystream_xor(&public_key, auth, &mut plain);
        if Self::auth_tag(&public_key, &plain) != auth {
            return Err(CryptoError::DecryptionFailed);
        }
        Ok(plain)
    }
}

/// Ed25519 signatures and X25519/ChaCha20-Poly1305 sealed boxes.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecureScheme;

const ED_PUB_LEN: usize = 32;
const X_PUB_LEN: usize = 32;

impl SecureScheme {
    fn seed_bytes(private_key: &PrivateKey) -> Result<&[u8], CryptoError> {
        match private_key.0.as_slice() {
            [SECURE_TAG, rest @ ..] if rest.len() == DIGEST_LEN => Ok(rest),
            _ => Err(CryptoError::Malformed("private key")),
        }
    }

    fn subkey(seed: &[u8], label: &str) -> [u8; 32] {
        let mut enc = Encoder::with_domain(label);
        enc.bytes(seed);
        sha256(&enc)
    }

    fn signing_key(seed: &[u8]) -> SigningKey {
        SigningKey::from_bytes(&Self::subkey(seed, "bcdn/secure/ed25519"))
    }

    fn dh_secret(seed: &[u8]) -> x25519_dalek::StaticSecret {
        x25519_dalek::StaticSecret::from(Self::subkey(seed, "bcdn/secure/x25519"))
    }

    fn split_public(public_key: &PublicKey) -> Result<(&[u8], &[u8]), CryptoError> {
        match public_key.0.as_slice() {
            [SECURE_TAG, rest @ ..] if rest.len() == ED_PUB_LEN + X_PUB_LEN => {
                Ok(rest.split_at(ED_PUB_LEN))
            }
            _ => Err(CryptoError::Malformed("public key")),
        }
    }

    fn aead_key(shared: &[u8], ephemeral: &[u8], recipient: &PublicKey) -> ChaCha20Poly1305 {
        let mut enc = Encoder::with_domain("bcdn/secure/kdf");
        enc.bytes(shared).bytes(ephemeral).bytes(&recipient.0);
        ChaCha20Poly1305::new(&sha256(&enc).into())
    }
}

impl Primitives for SecureScheme {
    fn generate_keypair(&self, seed: u64) -> KeyPair {
        let mut enc = Encoder::with_domain("bcdn/secure/seed");
        enc.u64(seed);
        let seed = sha256(&enc);
        let ed_pub = Self::signing_key(&seed).verifying_key().to_bytes();
        let x_pub = x25519_dalek::PublicKey::from(&Self::dh_secret(&seed));
        KeyPair {
            private_key: PrivateKey(tagged(SECURE_TAG, &[&seed])),
            public_key: PublicKey(tagged(SECURE_TAG, &[&ed_pub, x_pub.as_bytes()])),
        }
    }

    fn sign(&self, private_key: &PrivateKey, message: &[u8]) -> Signature {
        let seed = Self::seed_bytes(private_key).expect("well-formed secure private key");
        Signature(Self::signing_key(seed).sign(message).to_bytes().to_vec())
    }

    fn verify(&self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        let Ok((ed, _)) = Self::split_public(public_key) else {
            return false;
        };
        let Ok(key) = VerifyingKey::from_bytes(ed.try_into().expect("32 bytes")) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(&signature.0) else {
            return false;
        };
        key.verify_strict(message, &sig).is_ok()
    }

    fn encrypt(&self, public_key: &PublicKey, message: &[u8]) -> Result<Ciphertext, CryptoError> {
        let (_, x) = Self::split_public(public_key)?;
        let recipient = x25519_dalek::PublicKey::from(<[u8; 32]>::try_from(x).expect("32 bytes"));
        // Ephemeral secret derived from the inputs keeps runs reproducible.
        let mut enc = Encoder::with_domain("bcdn/secure/ephemeral");
        enc.bytes(&public_key.0).bytes(message);
        let ephemeral = x25519_dalek::StaticSecret::from(sha256(&enc));
        let ephemeral_pub = x25519_dalek::PublicKey::from(&ephemeral);
        let shared = ephemeral.diffie_hellman(&recipient);
        let sealed = Self::aead_key(shared.as_bytes(), ephemeral_pub.as_bytes(), public_key)
            .encrypt(&Default::default(), message)
            .map_err(|_| CryptoError::Malformed("plaintext"))?;
        Ok(Ciphertext(tagged(
            SECURE_TAG,
            &[ephemeral_pub.as_bytes(), &sealed],
        )))
    }

    fn decrypt(
        &self,
        private_key: &PrivateKey,
        ciphertext: &Ciphertext,
    ) -> Result<Vec<u8>, CryptoError> {
        let seed = Self::seed_bytes(private_key)?;
        let ct = &ciphertext.0;
        if ct.len() < 1 + X_PUB_LEN {
            return Err(CryptoError::DecryptionFailed);
        }
        let (ephemeral, sealed) = ct[1..].split_at(X_PUB_LEN);
        let ephemeral_pub =
            x25519_dalek::PublicKey::from(<[u8; 32]>::try_from(ephemeral).expect("32 bytes"));
        let secret = Self::dh_secret(seed);
        let own_public = PublicKey(tagged(
            SECURE_TAG,
            &[
                &Self::signing_key(seed).verifying_key().to_bytes(),
                x25519_dalek::PublicKey::from(&secret).as_bytes(),
            ],
        ));
        let shared = secret.diffie_hellman(&ephemeral_pub);
        Self::aead_key(shared.as_bytes(), ephemeral, &own_public)
            .decrypt(&Default::default(), sealed)
            .map_err(|_| CryptoError::DecryptionFailed)
    }
}
