use serde::{Deserialize, Serialize};

use crate::caching::FeatureVector;
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::crypto::{Digest, PublicKey, Signature, VirtualIdentity};
use crate::ids::{ContentId, ContractId, CpId};

/// What the ledger records about a requested content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentMetadata {
    pub content_id: ContentId,
    pub cp_id: CpId,
    pub features: FeatureVector,
}

/// The object of a smart contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Service {
    Content(ContentMetadata),
    /// Flat-rate subscription; carries no per-content metadata.
    Plan {
        tag: String,
    },
}

impl Service {
    pub fn metadata(&self) -> Option<&ContentMetadata> {
        match self {
            Service::Content(m) => Some(m),
            Service::Plan { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transaction {
    /// BCN membership; only valid in the genesis block.
    NodeEnrollment {
        node_id: u32,
        node_public_key: PublicKey,
    },
    CpRegistration {
        cp_id: CpId,
        cp_public_key: PublicKey,
        address: String,
        public_info: String,
    },
    UserRegistration {
        user_public_key: PublicKey,
        vid: VirtualIdentity,
        node_id: u32,
        node_signature: Signature,
    },
    Payment {
        contract_id: ContractId,
        vid: VirtualIdentity,
        cp_id: CpId,
        amount: u64,
    },
    ContractRecord {
        contract_id: ContractId,
        vid: VirtualIdentity,
        cp_id: CpId,
        service: Service,
        timestamp: u64,
    },
}

/// Transaction identifier: the digest of its canonical encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub Digest);

/// Bytes a BCN node signs when vouching for a user registration.
pub fn user_registration_message(user_public_key: &PublicKey, vid: &VirtualIdentity) -> Vec<u8> {
    let mut enc = Encoder::with_domain("bcdn/user-registration");
    enc.bytes(user_public_key.as_bytes()).fixed(vid.as_bytes());
    enc.finish()
}

fn encode_features(enc: &mut Encoder, f: &FeatureVector) {
    let bits: Vec<u8> = f.bits().iter().map(|&b| u8::from(b)).collect();
    enc.bytes(&bits);
}

fn decode_features(dec: &mut Decoder<'_>) -> Result<FeatureVector, DecodeError> {
    let raw = dec.bytes()?;
    raw.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(DecodeError::Invalid(format!("feature bit {other}"))),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(FeatureVector::from_bits)
}

fn decode_vid(dec: &mut Decoder<'_>) -> Result<VirtualIdentity, DecodeError> {
    Ok(VirtualIdentity::from_digest(Digest::from_bytes(
        dec.fixed()?,
    )))
}

impl Transaction {
    pub fn kind(&self) -> &'static str {
        match self {
            Transaction::NodeEnrollment { .. } => "node_enrollment",
            Transaction::CpRegistration { .. } => "cp_registration",
            Transaction::UserRegistration { .. } => "user_registration",
            Transaction::Payment { .. } => "payment",
            Transaction::ContractRecord { .. } => "contract_record",
        }
    }

    pub fn id(&self) -> TxId {
        let mut enc = Encoder::new();
        self.encode(&mut enc);
        TxId(Digest::of(enc.as_bytes()))
    }

    pub fn encode(&self, enc: &mut Encoder) {
        match self {
            Transaction::NodeEnrollment {
                node_id,
                node_public_key,
            } => {
                enc.u8(0).u32(*node_id).bytes(node_public_key.as_bytes());
            }
            Transaction::CpRegistration {
                cp_id,
                cp_public_key,
                address,
                public_info,
            } => {
                enc.u8(1)
                    .u32(cp_id.0)
                    .bytes(cp_public_key.as_bytes())
                    .str(address)
                    .str(public_info);
            }
            Transaction::UserRegistration {
                user_public_key,
                vid,
                node_id,
                node_signature,
            } => {
                enc.u8(2)
                    .bytes(user_public_key.as_bytes())
                    .fixed(vid.as_bytes())
                    .u32(*node_id)
                    .bytes(node_signature.as_bytes());
            }
            Transaction::Payment {
                contract_id,
                vid,
                cp_id,
                amount,
            } => {
                enc.u8(3)
                    .u64(contract_id.0)
                    .fixed(vid.as_bytes())
                    .u32(cp_id.0)
                    .u64(*amount);
            }
            Transaction::ContractRecord {
                contract_id,
                vid,
                cp_id,
                service,
                timestamp,
            } => {
                enc.u8(4)
                    .u64(contract_id.0)
                    .fixed(vid.as_bytes())
                    .u32(cp_id.0);
                match service {
                    Service::Content(m) => {
                        enc.u8(0).u32(m.content_id.0).u32(m.cp_id.0);
                        encode_features(enc, &m.features);
                    }
                    Service::Plan { tag } => {
                        enc.u8(1).str(tag);
                    }
                }
                enc.u64(*timestamp);
            }
        }
    }

    pub fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match dec.tag("transaction kind", 4)? {
            0 => Transaction::NodeEnrollment {
                node_id: dec.u32()?,
                node_public_key: PublicKey::from_bytes(dec.bytes()?),
            },
            1 => Transaction::CpRegistration {
                cp_id: CpId(dec.u32()?),
                cp_public_key: PublicKey::from_bytes(dec.bytes()?),
                address: dec.str()?,
                public_info: dec.str()?,
            },
            2 => Transaction::UserRegistration {
                user_public_key: PublicKey::from_bytes(dec.bytes()?),
                vid: decode_vid(dec)?,
                node_id: dec.u32()?,
                node_signature: Signature::from_bytes(dec.bytes()?),
            },
            3 => Transaction::Payment {
                contract_id: ContractId(dec.u64()?),
                vid: decode_vid(dec)?,
                cp_id: CpId(dec.u32()?),
                amount: dec.u64()?,
            },
            _ => {
                let contract_id = ContractId(dec.u64()?);
                let vid = decode_vid(dec)?;
                let cp_id = CpId(dec.u32()?);
                let service = match dec.tag("service", 1)? {
                    0 => Service::Content(ContentMetadata {
                        content_id: ContentId(dec.u32()?),
                        cp_id: CpId(dec.u32()?),
                        features: decode_features(dec)?,
                    }),
                    _ => Service::Plan { tag: dec.str()? },
                };
                Transaction::ContractRecord {
                    contract_id,
                    vid,
                    cp_id,
                    service,
                    timestamp: dec.u64()?,
                }
            }
        })
    }
}
