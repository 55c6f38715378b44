use serde::{Deserialize, Serialize};

use super::Transaction;
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::crypto::Digest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub prev_digest: Digest,
    /// Simulated tick at which the block was cut.
    pub timestamp: u64,
    pub transactions: Vec<Transaction>,
    pub digest: Digest,
}

impl Block {
    pub fn new(
        index: u64,
        prev_digest: Digest,
        timestamp: u64,
        transactions: Vec<Transaction>,
    ) -> Self {
        let mut block = Block {
            index,
            prev_digest,
            timestamp,
            transactions,
            digest: Digest::ZERO,
        };
        block.digest = block.compute_digest();
        block
    }

    fn encode_body(&self, enc: &mut Encoder) {
        enc.u64(self.index)
            .fixed(self.prev_digest.as_bytes())
            .u64(self.timestamp);
        let count = u32::try_from(self.transactions.len()).expect("block too large");
        enc.u32(count);
        for tx in &self.transactions {
            tx.encode(enc);
        }
    }

    /// Digest over (index, prev_digest, timestamp, transactions).
    pub fn compute_digest(&self) -> Digest {
        let mut enc = Encoder::with_domain("bcdn/block");
        self.encode_body(&mut enc);
        Digest::of(enc.as_bytes())
    }

    pub fn encode(&self, enc: &mut Encoder) {
        self.encode_body(enc);
        enc.fixed(self.digest.as_bytes());
    }

    pub fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let index = dec.u64()?;
        let prev_digest = Digest::from_bytes(dec.fixed()?);
        let timestamp = dec.u64()?;
        let count = dec.u32()?;
        let mut transactions = Vec::new();
        for _ in 0..count {
            transactions.push(Transaction::decode(dec)?);
        }
        let digest = Digest::from_bytes(dec.fixed()?);
        Ok(Block {
            index,
            prev_digest,
            timestamp,
            transactions,
            digest,
        })
    }
}

/// Structural integrity: every digest recomputes and links to its predecessor,
/// indices count up from 0 and the genesis block points at the zero digest.
pub fn verify_blocks(blocks: &[Block]) -> bool {
    let mut prev = Digest::ZERO;
    for (i, block) in blocks.iter().enumerate() {
        if block.index != i as u64
            || block.prev_digest != prev
            || block.compute_digest() != block.digest
        {
            return false;
        }
        prev = block.digest;
    }
    true
}

pub fn encode_blocks(blocks: &[Block]) -> Vec<u8> {
    let mut enc = Encoder::with_domain("bcdn/chain");
    enc.u64(blocks.len() as u64);
    for b in blocks {
        b.encode(&mut enc);
    }
    enc.finish()
}

pub fn decode_blocks(bytes: &[u8]) -> Result<Vec<Block>, DecodeError> {
    let mut dec = Decoder::new(bytes);
    if dec.str()? != "bcdn/chain" {
        return Err(DecodeError::Invalid("chain header".into()));
    }
    let count = dec.u64()?;
    let mut blocks = Vec::new();
    for _ in 0..count {
        blocks.push(Block::decode(&mut dec)?);
    }
    dec.expect_end()?;
    Ok(blocks)
}

/// Decodes a binary chain image and checks it; any decode failure counts as
/// a failed verification.
pub fn verify_encoded(bytes: &[u8]) -> bool {
    decode_blocks(bytes)
        .map(|b| verify_blocks(&b))
        .unwrap_or(false)
}
