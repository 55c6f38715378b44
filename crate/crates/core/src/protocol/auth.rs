//! Three-message handshake between a user and a provider. The user proves
//! control of its virtual identity; the provider resolves the identity
//! through the ledger and both sides end up holding each other's keys.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CpAccount, UserAccount};
use crate::codec::{Decoder, Encoder};
use crate::crypto::{self, Ciphertext, PublicKey, Signature, VirtualIdentity, DIGEST_LEN};
use crate::ledger::Chain;

/// 64-bit nonce; all arithmetic wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nonce(pub u64);

impl Nonce {
    pub fn plus(self, k: u64) -> Nonce {
        Nonce(self.0.wrapping_add(k))
    }
}

impl fmt::Display for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthMessage {
    /// Signed by the user over (vid, nonce).
    V1 {
        vid: VirtualIdentity,
        nonce: Nonce,
        signature: Signature,
    },
    /// Encrypted to the user: (vid, nonce+1, provider public key).
    V2 {
        vid: VirtualIdentity,
        nonce_plus_1: Nonce,
        ciphertext: Ciphertext,
    },
    /// Encrypted to the provider: (vid, nonce+2).
    V3 {
        vid: VirtualIdentity,
        nonce_plus_2: Nonce,
        ciphertext: Ciphertext,
    },
}

impl AuthMessage {
    pub fn variant(&self) -> &'static str {
        match self {
            AuthMessage::V1 { .. } => "V1",
            AuthMessage::V2 { .. } => "V2",
            AuthMessage::V3 { .. } => "V3",
        }
    }

    pub fn vid(&self) -> &VirtualIdentity {
        match self {
            AuthMessage::V1 { vid, .. }
            | AuthMessage::V2 { vid, .. }
            | AuthMessage::V3 { vid, .. } => vid,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuthFailure {
    #[error("virtual identity is not registered")]
    UnknownVid,
    #[error("signature does not verify")]
    BadSignature,
    #[error("nonce does not continue the session")]
    BadNonce,
    #[error("ciphertext does not open under the recipient key")]
    BadCiphertext,
    #[error("decrypted identity differs from the session identity")]
    VidMismatch,
    #[error("message not expected in the current session state")]
    UnexpectedMessage,
    #[error("provider is not registered")]
    UnregisteredProvider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AuthState {
    Init,
    V1Sent,
    V2Sent,
    Authenticated,
    Failed(AuthFailure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    User,
    Provider,
}

/// One side of a handshake.
#[derive(Debug, Clone)]
pub struct AuthSession {
    side: Side,
    state: AuthState,
    vid: Option<VirtualIdentity>,
    nonce: Option<Nonce>,
    peer_public_key: Option<PublicKey>,
}

impl AuthSession {
    fn new(side: Side) -> Self {
        AuthSession {
            side,
            state: AuthState::Init,
            vid: None,
            nonce: None,
            peer_public_key: None,
        }
    }

    pub fn user() -> Self {
        Self::new(Side::User)
    }

    pub fn provider() -> Self {
        Self::new(Side::Provider)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn state(&self) -> AuthState {
        self.state
    }

    pub fn is_authenticated(&self) -> bool {
        self.state == AuthState::Authenticated
    }

    pub fn failure(&self) -> Option<AuthFailure> {
        match self.state {
            AuthState::Failed(r) => Some(r),
            _ => None,
        }
    }

    pub fn vid(&self) -> Option<&VirtualIdentity> {
        self.vid.as_ref()
    }

    /// The nonce chosen by the user for this session.
    pub fn nonce(&self) -> Option<Nonce> {
        self.nonce
    }

    /// Provider key (user side) or user key (provider side), once learned.
    pub fn peer_public_key(&self) -> Option<&PublicKey> {
        self.peer_public_key.as_ref()
    }

    fn fail(&mut self, reason: AuthFailure) -> AuthFailure {
        if !matches!(self.state, AuthState::Failed(_)) {
            self.state = AuthState::Failed(reason);
        }
        reason
    }

    fn expect(&mut self, side: Side, state: AuthState) -> Result<(), AuthFailure> {
        if self.side != side || self.state != state {
            return Err(self.fail(AuthFailure::UnexpectedMessage));
        }
        Ok(())
    }
}

pub fn v1_signing_bytes(vid: &VirtualIdentity, nonce: Nonce) -> Vec<u8> {
    let mut enc = Encoder::with_domain("bcdn/auth-v1");
    enc.fixed(vid.as_bytes()).u64(nonce.0);
    enc.finish()
}

fn v2_plaintext(vid: &VirtualIdentity, nonce: Nonce, cp_key: &PublicKey) -> Vec<u8> {
    let mut enc = Encoder::with_domain("bcdn/auth-v2");
    enc.fixed(vid.as_bytes())
        .u64(nonce.0)
        .bytes(cp_key.as_bytes());
    enc.finish()
}

fn v3_plaintext(vid: &VirtualIdentity, nonce: Nonce) -> Vec<u8> {
    let mut enc = Encoder::with_domain("bcdn/auth-v3");
    enc.fixed(vid.as_bytes()).u64(nonce.0);
    enc.finish()
}

fn open_v2(bytes: &[u8]) -> Option<(VirtualIdentity, Nonce, PublicKey)> {
    let mut dec = Decoder::new(bytes);
    dec.expect_domain("bcdn/auth-v2").ok()?;
    let vid = dec.fixed::<DIGEST_LEN>().ok()?;
    let nonce = dec.u64().ok()?;
    let key = dec.bytes().ok()?.to_vec();
    dec.expect_end().ok()?;
    Some((vid_from(vid), Nonce(nonce), PublicKey::from_bytes(key)))
}

fn open_v3(bytes: &[u8]) -> Option<(VirtualIdentity, Nonce)> {
    let mut dec = Decoder::new(bytes);
    dec.expect_domain("bcdn/auth-v3").ok()?;
    let vid = dec.fixed::<DIGEST_LEN>().ok()?;
    let nonce = dec.u64().ok()?;
    dec.expect_end().ok()?;
    Some((vid_from(vid), Nonce(nonce)))
}

fn vid_from(bytes: [u8; DIGEST_LEN]) -> VirtualIdentity {
    VirtualIdentity::from_digest(crypto::Digest::from_bytes(bytes))
}

/// User side, step 1: draw a nonce and sign (vid, nonce).
pub fn auth_initiate<R: Rng + ?Sized>(
    user: &UserAccount,
    rng: &mut R,
) -> (AuthSession, AuthMessage) {
    auth_initiate_with(user, Nonce(rng.gen()))
}

/// As [`auth_initiate`] with a caller-chosen nonce.
pub fn auth_initiate_with(user: &UserAccount, nonce: Nonce) -> (AuthSession, AuthMessage) {
    let mut session = AuthSession::user();
    session.vid = Some(user.vid);
    session.nonce = Some(nonce);
    session.state = AuthState::V1Sent;
    let signature = crypto::sign(
        &user.keypair.private_key,
        &v1_signing_bytes(&user.vid, nonce),
    );
    let v1 = AuthMessage::V1 {
        vid: user.vid,
        nonce,
        signature,
    };
    (session, v1)
}

/// Provider side: resolve the vid on the ledger, check the V1 signature
/// and answer with V2.
pub fn auth_respond(
    session: &mut AuthSession,
    cp: &CpAccount,
    v1: &AuthMessage,
    chain: &Chain,
) -> Result<AuthMessage, AuthFailure> {
    session.expect(Side::Provider, AuthState::Init)?;
    let AuthMessage::V1 {
        vid,
        nonce,
        signature,
    } = v1
    else {
        return Err(session.fail(AuthFailure::UnexpectedMessage));
    };
    if chain
        .lookup_cp(cp.cp_id)
        .is_none_or(|r| r.public_key != cp.keypair.public_key)
    {
        return Err(session.fail(AuthFailure::UnregisteredProvider));
    }
    let Some(user_key) = chain.lookup_vid(vid) else {
        return Err(session.fail(AuthFailure::UnknownVid));
    };
    if !crypto::verify(user_key, &v1_signing_bytes(vid, *nonce), signature) {
        return Err(session.fail(AuthFailure::BadSignature));
    }
    let reply = nonce.plus(1);
    let plaintext = v2_plaintext(vid, reply, &cp.keypair.public_key);
    let ciphertext = crypto::encrypt(user_key, &plaintext)
        .map_err(|_| session.fail(AuthFailure::BadCiphertext))?;
    session.vid = Some(*vid);
    session.nonce = Some(*nonce);
    session.peer_public_key = Some(user_key.clone());
    session.state = AuthState::V2Sent;
    Ok(AuthMessage::V2 {
        vid: *vid,
        nonce_plus_1: reply,
        ciphertext,
    })
}

/// User side: open V2, check identity and nonce+1, learn the provider key
/// and answer with V3.
pub fn auth_confirm(
    session: &mut AuthSession,
    user: &UserAccount,
    v2: &AuthMessage,
) -> Result<AuthMessage, AuthFailure> {
    session.expect(Side::User, AuthState::V1Sent)?;
    let AuthMessage::V2 {
        vid,
        nonce_plus_1,
        ciphertext,
    } = v2
    else {
        return Err(session.fail(AuthFailure::UnexpectedMessage));
    };
    let plaintext = crypto::decrypt(&user.keypair.private_key, ciphertext)
        .map_err(|_| session.fail(AuthFailure::BadCiphertext))?;
    let Some((inner_vid, inner_nonce, cp_key)) = open_v2(&plaintext) else {
        return Err(session.fail(AuthFailure::BadCiphertext));
    };
    let (own_vid, n) = (
        session.vid.expect("set in V1Sent"),
        session.nonce.expect("set in V1Sent"),
    );
    if inner_vid != own_vid || *vid != own_vid {
        return Err(session.fail(AuthFailure::VidMismatch));
    }
    let expected = n.plus(1);
    if inner_nonce != expected || *nonce_plus_1 != expected {
        return Err(session.fail(AuthFailure::BadNonce));
    }
    let reply = n.plus(2);
    let ciphertext = crypto::encrypt(&cp_key, &v3_plaintext(&own_vid, reply))
        .map_err(|_| session.fail(AuthFailure::BadCiphertext))?;
    session.peer_public_key = Some(cp_key);
    session.state = AuthState::Authenticated;
    Ok(AuthMessage::V3 {
        vid: own_vid,
        nonce_plus_2: reply,
        ciphertext,
    })
}

/// Provider side: open V3 with the provider key and check (vid, nonce+2).
pub fn auth_finalize(
    session: &mut AuthSession,
    cp: &CpAccount,
    v3: &AuthMessage,
) -> Result<(), AuthFailure> {
    session.expect(Side::Provider, AuthState::V2Sent)?;
    let AuthMessage::V3 {
        vid,
        nonce_plus_2,
        ciphertext,
    } = v3
    else {
        return Err(session.fail(AuthFailure::UnexpectedMessage));
    };
    let plaintext = crypto::decrypt(&cp.keypair.private_key, ciphertext)
        .map_err(|_| session.fail(AuthFailure::BadCiphertext))?;
    let Some((inner_vid, inner_nonce)) = open_v3(&plaintext) else {
        return Err(session.fail(AuthFailure::BadCiphertext));
    };
    let (own_vid, n) = (
        session.vid.expect("set in V2Sent"),
        session.nonce.expect("set in V2Sent"),
    );
    if inner_vid != own_vid || *vid != own_vid {
        return Err(session.fail(AuthFailure::VidMismatch));
    }
    let expected = n.plus(2);
    if inner_nonce != expected || *nonce_plus_2 != expected {
        return Err(session.fail(AuthFailure::BadNonce));
    }
    session.state = AuthState::Authenticated;
    Ok(())
}
