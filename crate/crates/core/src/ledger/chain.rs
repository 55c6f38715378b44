use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::block::{encode_blocks, verify_blocks};
use super::{user_registration_message, Block, LedgerError, RejectReason, Service, Transaction};
use crate::codec::Encoder;
use crate::crypto::{self, derive_vid, Digest, PrivateKey, PublicKey, Signature, VirtualIdentity};
use crate::ids::{ContractId, CpId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpRecord {
    pub public_key: PublicKey,
    pub address: String,
    pub public_info: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PaymentRecord {
    vid: VirtualIdentity,
    cp_id: CpId,
    amount: u64,
}

/// Lookup tables derived from the committed blocks.
#[derive(Debug, Clone, Default)]
struct ChainIndex {
    nodes: BTreeMap<u32, PublicKey>,
    vids: HashMap<VirtualIdentity, PublicKey>,
    cps: BTreeMap<CpId, CpRecord>,
    payments: HashMap<ContractId, PaymentRecord>,
    contracts: HashSet<ContractId>,
    spent: HashMap<VirtualIdentity, u64>,
    earned: BTreeMap<CpId, u64>,
    transactions: usize,
}

/// Changes staged by a batch of transactions that has not been applied yet.
#[derive(Debug, Default)]
struct Overlay {
    nodes: BTreeMap<u32, PublicKey>,
    vids: HashMap<VirtualIdentity, PublicKey>,
    cps: BTreeMap<CpId, CpRecord>,
    payments: HashMap<ContractId, PaymentRecord>,
    contracts: HashSet<ContractId>,
    count: usize,
}

impl ChainIndex {
    fn node(&self, overlay: &Overlay, id: u32) -> Option<PublicKey> {
        overlay
            .nodes
            .get(&id)
            .or_else(|| self.nodes.get(&id))
            .cloned()
    }

    fn has_vid(&self, overlay: &Overlay, vid: &VirtualIdentity) -> bool {
        overlay.vids.contains_key(vid) || self.vids.contains_key(vid)
    }

    fn has_cp(&self, overlay: &Overlay, cp: CpId) -> bool {
        overlay.cps.contains_key(&cp) || self.cps.contains_key(&cp)
    }

    fn payment(&self, overlay: &Overlay, id: ContractId) -> Option<PaymentRecord> {
        overlay
            .payments
            .get(&id)
            .or_else(|| self.payments.get(&id))
            .copied()
    }

    fn check(
        &self,
        overlay: &mut Overlay,
        tx: &Transaction,
        genesis: bool,
    ) -> Result<(), RejectReason> {
        match tx {
            Transaction::NodeEnrollment {
                node_id,
                node_public_key,
            } => {
                if !genesis {
                    return Err(RejectReason::EnrollmentOutsideGenesis);
                }
                if self.node(overlay, *node_id).is_some() {
                    return Err(RejectReason::DuplicateNode(*node_id));
                }
                overlay.nodes.insert(*node_id, node_public_key.clone());
            }
            Transaction::CpRegistration {
                cp_id,
                cp_public_key,
                address,
                public_info,
            } => {
                if self.has_cp(overlay, *cp_id) {
                    return Err(RejectReason::DuplicateCp(*cp_id));
                }
                overlay.cps.insert(
                    *cp_id,
                    CpRecord {
                        public_key: cp_public_key.clone(),
                        address: address.clone(),
                        public_info: public_info.clone(),
                    },
                );
            }
            Transaction::UserRegistration {
                user_public_key,
                vid,
                node_id,
                node_signature,
            } => {
                if derive_vid(user_public_key) != *vid {
                    return Err(RejectReason::VidMismatch);
                }
                if self.has_vid(overlay, vid) {
                    return Err(RejectReason::DuplicateVid(*vid));
                }
                let node_key = self
                    .node(overlay, *node_id)
                    .ok_or(RejectReason::UnknownNode(*node_id))?;
                let message = user_registration_message(user_public_key, vid);
                if !crypto::verify(&node_key, &message, node_signature) {
                    return Err(RejectReason::BadNodeSignature);
                }
                overlay.vids.insert(*vid, user_public_key.clone());
            }
            Transaction::Payment {
                contract_id,
                vid,
                cp_id,
                amount,
            } => {
                if !self.has_vid(overlay, vid) {
                    return Err(RejectReason::UnknownVid(*vid));
                }
                if !self.has_cp(overlay, *cp_id) {
                    return Err(RejectReason::UnknownCp(*cp_id));
                }
                if self.payment(overlay, *contract_id).is_some() {
                    return Err(RejectReason::DuplicatePayment(*contract_id));
                }
                overlay.payments.insert(
                    *contract_id,
                    PaymentRecord {
                        vid: *vid,
                        cp_id: *cp_id,
                        amount: *amount,
                    },
                );
            }
            Transaction::ContractRecord {
                contract_id,
                vid,
                cp_id,
                service,
                ..
            } => {
                if !self.has_vid(overlay, vid) {
                    return Err(RejectReason::UnknownVid(*vid));
                }
                if !self.has_cp(overlay, *cp_id) {
                    return Err(RejectReason::UnknownCp(*cp_id));
                }
                if let Service::Content(meta) = service {
                    if meta.cp_id != *cp_id {
                        return Err(RejectReason::ServiceOwner {
                            contract: *contract_id,
                            owner: meta.cp_id,
                        });
                    }
                }
                match self.payment(overlay, *contract_id) {
                    Some(p) if p.vid == *vid && p.cp_id == *cp_id => {}
                    Some(_) => return Err(RejectReason::PaymentMismatch(*contract_id)),
                    None => return Err(RejectReason::MissingPayment(*contract_id)),
                }
                if overlay.contracts.contains(contract_id) || self.contracts.contains(contract_id) {
                    return Err(RejectReason::DuplicateContract(*contract_id));
                }
                overlay.contracts.insert(*contract_id);
            }
        }
        overlay.count += 1;
        Ok(())
    }

    fn apply(&mut self, overlay: Overlay) {
        self.nodes.extend(overlay.nodes);
        self.vids.extend(overlay.vids);
        self.cps.extend(overlay.cps);
        for (id, p) in overlay.payments {
            *self.spent.entry(p.vid).or_default() += p.amount;
            *self.earned.entry(p.cp_id).or_default() += p.amount;
            self.payments.insert(id, p);
        }
        self.contracts.extend(overlay.contracts);
        self.transactions += overlay.count;
    }
}

/// One entry of the public request history: a committed contract as any
/// registered provider may see it. Users appear only by virtual identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistoryEntry {
    pub contract_id: ContractId,
    pub vid: VirtualIdentity,
    pub cp_id: CpId,
    pub service: Service,
    pub timestamp: u64,
}

/// A provider's signed request for the ledger's request history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryRequest {
    pub cp_id: CpId,
    pub address: String,
    pub signature: Signature,
}

impl HistoryRequest {
    pub fn message(cp_id: CpId, address: &str) -> Vec<u8> {
        let mut enc = Encoder::with_domain("bcdn/history-request");
        enc.u32(cp_id.0).str(address);
        enc.finish()
    }

    pub fn new(cp_id: CpId, address: &str, private_key: &PrivateKey) -> Self {
        HistoryRequest {
            cp_id,
            address: address.to_string(),
            signature: crypto::sign(private_key, &Self::message(cp_id, address)),
        }
    }
}

/// Append-only hash-chained block store.
#[derive(Debug, Clone)]
pub struct Chain {
    blocks: Vec<Block>,
    index: ChainIndex,
}

impl Chain {
    /// Creates a chain whose genesis block enrolls the given BCN nodes
    /// (node ids are positions in `node_keys`).
    pub fn genesis(node_keys: &[PublicKey]) -> Self {
        let txs = node_keys
            .iter()
            .enumerate()
            .map(|(i, k)| Transaction::NodeEnrollment {
                node_id: i as u32,
                node_public_key: k.clone(),
            })
            .collect();
        let mut chain = Chain {
            blocks: Vec::new(),
            index: ChainIndex::default(),
        };
        chain
            .append_block(txs, 0)
            .expect("genesis enrollment of distinct node ids is valid");
        chain
    }

    /// Rebuilds a chain from blocks, re-validating structure and every
    /// transaction.
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self, LedgerError> {
        let mut chain = Chain {
            blocks: Vec::with_capacity(blocks.len()),
            index: ChainIndex::default(),
        };
        for block in blocks {
            chain.append(block)?;
        }
        Ok(chain)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn tip_digest(&self) -> Digest {
        self.tip().map(|b| b.digest).unwrap_or(Digest::ZERO)
    }

    pub fn tip_timestamp(&self) -> u64 {
        self.tip().map(|b| b.timestamp).unwrap_or(0)
    }

    pub fn transaction_count(&self) -> usize {
        self.index.transactions
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks.iter().flat_map(|b| b.transactions.iter())
    }

    /// Checks a batch as if it were appended next, without changing anything.
    pub fn validate_transactions(&self, txs: &[Transaction]) -> Result<(), LedgerError> {
        self.stage(txs).map(|_| ())
    }

    fn stage(&self, txs: &[Transaction]) -> Result<Overlay, LedgerError> {
        let genesis = self.blocks.is_empty();
        let mut overlay = Overlay::default();
        for (position, tx) in txs.iter().enumerate() {
            self.index
                .check(&mut overlay, tx, genesis)
                .map_err(|reason| LedgerError::Rejected {
                    position,
                    kind: tx.kind(),
                    reason,
                })?;
        }
        Ok(overlay)
    }

    /// Builds the block that `append_block` would add, without adding it.
    pub fn next_block(&self, transactions: Vec<Transaction>, timestamp: u64) -> Block {
        Block::new(
            self.blocks.len() as u64,
            self.tip_digest(),
            timestamp,
            transactions,
        )
    }

    /// Full validation of a candidate next block (links, digest, timestamp
    /// order and every transaction).
    pub fn validate_block(&self, block: &Block) -> Result<(), LedgerError> {
        self.check_header(block)?;
        self.validate_transactions(&block.transactions)
    }

    fn check_header(&self, block: &Block) -> Result<(), LedgerError> {
        let expected = self.blocks.len() as u64;
        if block.index != expected {
            return Err(LedgerError::BadIndex {
                expected,
                found: block.index,
            });
        }
        if block.prev_digest != self.tip_digest() {
            return Err(LedgerError::BadLink(block.index));
        }
        if block.compute_digest() != block.digest {
            return Err(LedgerError::BadDigest(block.index));
        }
        if block.timestamp < self.tip_timestamp() {
            return Err(LedgerError::TimestampRegression {
                previous: self.tip_timestamp(),
                found: block.timestamp,
            });
        }
        Ok(())
    }

    /// Appends a block holding `transactions`. Nothing changes on error.
    pub fn append_block(
        &mut self,
        transactions: Vec<Transaction>,
        timestamp: u64,
    ) -> Result<&Block, LedgerError> {
        let block = self.next_block(transactions, timestamp);
        self.append(block)
    }

    /// Appends an already-built block (e.g. one decided by consensus).
    pub fn append(&mut self, block: Block) -> Result<&Block, LedgerError> {
        self.check_header(&block)?;
        let overlay = self.stage(&block.transactions)?;
        self.index.apply(overlay);
        self.blocks.push(block);
        Ok(self.blocks.last().expect("just pushed"))
    }

    pub fn verify(&self) -> bool {
        verify_blocks(&self.blocks)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_blocks(&self.blocks)
    }

    pub fn lookup_vid(&self, vid: &VirtualIdentity) -> Option<&PublicKey> {
        self.index.vids.get(vid)
    }

    pub fn lookup_cp(&self, cp_id: CpId) -> Option<&CpRecord> {
        self.index.cps.get(&cp_id)
    }

    pub fn node_key(&self, node_id: u32) -> Option<&PublicKey> {
        self.index.nodes.get(&node_id)
    }

    pub fn registered_users(&self) -> usize {
        self.index.vids.len()
    }

    pub fn has_payment(&self, contract: ContractId) -> bool {
        self.index.payments.contains_key(&contract)
    }

    pub fn has_contract_record(&self, contract: ContractId) -> bool {
        self.index.contracts.contains(&contract)
    }

    pub fn contract_records(&self) -> usize {
        self.index.contracts.len()
    }

    /// Total tokens paid by a user across committed payments.
    pub fn spent_by(&self, vid: &VirtualIdentity) -> u64 {
        self.index.spent.get(vid).copied().unwrap_or(0)
    }

    pub fn earned_by(&self, cp_id: CpId) -> u64 {
        self.index.earned.get(&cp_id).copied().unwrap_or(0)
    }

    /// Every committed contract, in chain order, for an authenticated provider.
    pub fn query_request_history(
        &self,
        request: &HistoryRequest,
    ) -> Result<Vec<HistoryEntry>, LedgerError> {
        let record = self
            .lookup_cp(request.cp_id)
            .ok_or(LedgerError::Unauthorized(request.cp_id))?;
        let message = HistoryRequest::message(request.cp_id, &request.address);
        if record.address != request.address
            || !crypto::verify(&record.public_key, &message, &request.signature)
        {
            return Err(LedgerError::Unauthorized(request.cp_id));
        }
        Ok(self.history_entries().collect())
    }

    pub(crate) fn history_entries(&self) -> impl Iterator<Item = HistoryEntry> + '_ {
        self.transactions().filter_map(|tx| match tx {
            Transaction::ContractRecord {
                contract_id,
                vid,
                cp_id,
                service,
                timestamp,
            } => Some(HistoryEntry {
                contract_id: *contract_id,
                vid: *vid,
                cp_id: *cp_id,
                service: service.clone(),
                timestamp: *timestamp,
            }),
            _ => None,
        })
    }
}
