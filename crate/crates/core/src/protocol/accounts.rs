use crate::codec::Encoder;
use crate::crypto::{derive_vid, Digest, KeyPair, Scheme, VirtualIdentity};
use crate::ids::{CpId, UserId};
use crate::ledger::{HistoryRequest, Transaction};

fn key_seed(domain: &str, seed: u64, id: u64) -> u64 {
    let mut enc = Encoder::with_domain(domain);
    enc.u64(seed).u64(id);
    let d = Digest::of(enc.as_bytes());
    u64::from_be_bytes(d.as_bytes()[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone)]
pub struct CpAccount {
    pub cp_id: CpId,
    pub keypair: KeyPair,
    pub address: String,
    pub public_info: String,
    pub registered: bool,
}

impl CpAccount {
    pub fn new(cp_id: CpId, keypair: KeyPair, address: impl Into<String>) -> Self {
        CpAccount {
            cp_id,
            keypair,
            address: address.into(),
            public_info: String::new(),
            registered: false,
        }
    }

    /// Account with a key derived from `(seed, cp_id)`.
    pub fn generate(cp_id: CpId, scheme: Scheme, seed: u64) -> Self {
        let keypair = scheme.generate_keypair(key_seed("bcdn/cp-key", seed, cp_id.0 as u64));
        Self::new(cp_id, keypair, format!("cp{}.edge.local", cp_id.0))
    }

    pub fn registration_tx(&self) -> Transaction {
        Transaction::CpRegistration {
            cp_id: self.cp_id,
            cp_public_key: self.keypair.public_key.clone(),
            address: self.address.clone(),
            public_info: self.public_info.clone(),
        }
    }

    pub fn history_request(&self) -> HistoryRequest {
        HistoryRequest::new(self.cp_id, &self.address, &self.keypair.private_key)
    }
}

#[derive(Debug, Clone)]
pub struct UserAccount {
    pub user_id: UserId,
    pub keypair: KeyPair,
    pub vid: VirtualIdentity,
    pub registered: bool,
}

impl UserAccount {
    pub fn new(user_id: UserId, keypair: KeyPair) -> Self {
        UserAccount {
            user_id,
            vid: derive_vid(&keypair.public_key),
            keypair,
            registered: false,
        }
    }

    pub fn generate(user_id: UserId, scheme: Scheme, seed: u64) -> Self {
        Self::new(
            user_id,
            scheme.generate_keypair(key_seed("bcdn/user-key", seed, user_id.0 as u64)),
        )
    }
}
