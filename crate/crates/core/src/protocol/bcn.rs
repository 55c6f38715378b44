use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::auth::{auth_confirm, auth_finalize, auth_initiate, auth_respond};
use super::{
    AuthFailure, AuthSession, BcnError, ContractFailure, ContractFailureReason, ContractState,
    CpAccount, SmartContract, Transcript, UserAccount,
};
use crate::consensus::{Cluster, ConsensusConfig, ValidatorId};
use crate::crypto::VirtualIdentity;
use crate::ids::ContractId;
use crate::ledger::{
    user_registration_message, Chain, HistoryEntry, Mempool, Service, Transaction, TxId,
    DEFAULT_BLOCK_INTERVAL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitMode {
    /// Every block is agreed on by the validator cluster.
    Consensus,
    /// Blocks are appended directly; used for long trace replays.
    Direct,
}

#[derive(Debug, Clone)]
pub struct BcnConfig {
    pub commit_mode: CommitMode,
    pub consensus: ConsensusConfig,
    pub block_interval: u64,
    pub fee: u64,
    pub initial_balance: u64,
    /// Seeds the handshake nonces.
    pub seed: u64,
    pub transcript: bool,
}

impl Default for BcnConfig {
    fn default() -> Self {
        BcnConfig {
            commit_mode: CommitMode::Consensus,
            consensus: ConsensusConfig::default(),
            block_interval: DEFAULT_BLOCK_INTERVAL,
            fee: 1,
            initial_balance: 1_000_000,
            seed: 0,
            transcript: true,
        }
    }
}

/// The blockchain network as seen by providers and users: ledger, mempool,
/// validator cluster and a logical clock.
#[derive(Debug, Clone)]
pub struct Bcn {
    config: BcnConfig,
    chain: Chain,
    mempool: Mempool,
    cluster: Cluster,
    clock: u64,
    rng: ChaCha8Rng,
    next_contract: u64,
    next_session: u64,
    reserved: HashMap<VirtualIdentity, u64>,
    transcript: Transcript,
}

impl Bcn {
    pub fn new(config: BcnConfig) -> Result<Self, BcnError> {
        let cluster = Cluster::new(config.consensus.clone())?;
        let chain = Chain::genesis(cluster.public_keys());
        Ok(Bcn {
            mempool: Mempool::new(config.block_interval),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            transcript: Transcript::new(config.transcript),
            config,
            chain,
            cluster,
            clock: 0,
            next_contract: 0,
            next_session: 0,
            reserved: HashMap::new(),
        })
    }

    pub fn config(&self) -> &BcnConfig {
        &self.config
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    /// Tokens a user can still spend, counting payments not yet committed.
    pub fn balance(&self, vid: &VirtualIdentity) -> u64 {
        let reserved = self.reserved.get(vid).copied().unwrap_or(0);
        self.config
            .initial_balance
            .saturating_sub(self.chain.spent_by(vid))
            .saturating_sub(reserved)
    }

    /// Validates `tx` against the chain plus everything already pending and
    /// queues it.
    pub fn submit(&mut self, tx: Transaction) -> Result<TxId, BcnError> {
        let mut batch = self.mempool.pending().to_vec();
        batch.push(tx.clone());
        self.chain.validate_transactions(&batch)?;
        if let Transaction::Payment { vid, amount, .. } = &tx {
            *self.reserved.entry(*vid).or_default() += amount;
        }
        let id = tx.id();
        self.mempool.push(tx);
        Ok(id)
    }

    /// Moves the clock forward, cutting a block if one is due.
    pub fn advance(&mut self, ticks: u64) -> Result<(), BcnError> {
        self.clock += ticks;
        if self.mempool.is_due(self.clock) {
            self.flush()?;
        }
        Ok(())
    }

    /// Cuts everything pending into one block and commits it. Returns the
    /// index of the new block, or `None` if nothing was pending.
    pub fn flush(&mut self) -> Result<Option<u64>, BcnError> {
        if self.mempool.is_empty() {
            return Ok(None);
        }
        let txs = self.mempool.cut(self.clock);
        let timestamp = self.clock.max(self.chain.tip_timestamp());
        let block = self.chain.next_block(txs.clone(), timestamp);
        let result = match self.config.commit_mode {
            CommitMode::Direct => self.chain.append(block).map(|_| ()).map_err(BcnError::from),
            CommitMode::Consensus => self
                .cluster
                .commit_block(&mut self.chain, block)
                .map(|d| self.clock += d.latency)
                .map_err(BcnError::from),
        };
        match result {
            Ok(()) => {
                self.reserved.clear();
                Ok(Some(self.chain.len() as u64 - 1))
            }
            Err(e) => {
                self.mempool.restore(txs);
                Err(e)
            }
        }
    }

    /// Submits and immediately commits one transaction.
    pub fn commit(&mut self, tx: Transaction) -> Result<TxId, BcnError> {
        let id = self.submit(tx)?;
        self.flush()?;
        Ok(id)
    }

    pub fn register_cp(&mut self, cp: &mut CpAccount) -> Result<TxId, BcnError> {
        let id = self.commit(cp.registration_tx())?;
        cp.registered = true;
        Ok(id)
    }

    /// Registers a user through ledger node `node`, which signs
    /// (public key, vid).
    pub fn register_user(
        &mut self,
        user: &mut UserAccount,
        node: ValidatorId,
    ) -> Result<TxId, BcnError> {
        let tx = self.user_registration(user, node)?;
        let id = self.commit(tx)?;
        user.registered = true;
        Ok(id)
    }

    /// Queues a user registration without committing it.
    pub fn enqueue_user(
        &mut self,
        user: &mut UserAccount,
        node: ValidatorId,
    ) -> Result<TxId, BcnError> {
        let tx = self.user_registration(user, node)?;
        let id = self.submit(tx)?;
        user.registered = true;
        Ok(id)
    }

    fn user_registration(
        &self,
        user: &UserAccount,
        node: ValidatorId,
    ) -> Result<Transaction, BcnError> {
        let message = user_registration_message(&user.keypair.public_key, &user.vid);
        let node_signature = self
            .cluster
            .sign_as(node, &message)
            .ok_or(BcnError::UnknownNode(node))?;
        Ok(Transaction::UserRegistration {
            user_public_key: user.keypair.public_key.clone(),
            vid: user.vid,
            node_id: node.0,
            node_signature,
        })
    }

    pub fn request_history(&self, cp: &CpAccount) -> Result<Vec<HistoryEntry>, BcnError> {
        Ok(self.chain.query_request_history(&cp.history_request())?)
    }

    /// Runs V1, V2 and V3 between a user and a provider. Returns the user
    /// and provider sessions; both are authenticated on success.
    pub fn authenticate(
        &mut self,
        user: &UserAccount,
        cp: &CpAccount,
    ) -> Result<(AuthSession, AuthSession), AuthFailure> {
        let session = self.next_session;
        self.next_session += 1;
        let now = self.clock;
        let (mut user_side, v1) = auth_initiate(user, &mut self.rng);
        let mut cp_side = AuthSession::provider();

        let v2 = auth_respond(&mut cp_side, cp, &v1, &self.chain);
        self.transcript
            .record(now, session, &v1, v2.as_ref().map(|_| ()).map_err(|e| *e));
        let v2 = v2?;
        let v3 = auth_confirm(&mut user_side, user, &v2);
        self.transcript
            .record(now, session, &v2, v3.as_ref().map(|_| ()).map_err(|e| *e));
        let v3 = v3?;
        let done = auth_finalize(&mut cp_side, cp, &v3);
        self.transcript.record(now, session, &v3, done);
        done?;
        Ok((user_side, cp_side))
    }

    fn open_contract(
        &mut self,
        session: &AuthSession,
        cp: &CpAccount,
        service: Service,
    ) -> SmartContract {
        let vid = session
            .vid()
            .copied()
            .unwrap_or_else(|| VirtualIdentity::from_digest(Default::default()));
        let id = ContractId(self.next_contract);
        self.next_contract += 1;
        SmartContract::new(id, vid, cp.cp_id, service, self.config.fee)
    }

    /// Checks done while the contract is `Requested`: an authenticated
    /// session, a registered vid and provider, and a service the provider owns.
    fn check_request(
        &self,
        session: &AuthSession,
        cp: &CpAccount,
        contract: &SmartContract,
    ) -> Result<(), ContractFailureReason> {
        if !session.is_authenticated() {
            return Err(ContractFailureReason::NotAuthenticated);
        }
        if self.chain.lookup_vid(&contract.vid).is_none() {
            return Err(ContractFailureReason::UnknownVid);
        }
        if self.chain.lookup_cp(cp.cp_id).is_none() {
            return Err(ContractFailureReason::UnknownCp(cp.cp_id));
        }
        match contract.service.metadata() {
            Some(meta) if meta.cp_id != cp.cp_id => Err(ContractFailureReason::ServiceOwner {
                cp_id: cp.cp_id,
                owner: meta.cp_id,
            }),
            _ => Ok(()),
        }
    }

    fn check_funds(&self, contract: &SmartContract) -> Result<(), ContractFailureReason> {
        let balance = self.balance(&contract.vid);
        if balance < contract.fee {
            return Err(ContractFailureReason::InsufficientBalance {
                balance,
                fee: contract.fee,
            });
        }
        Ok(())
    }

    /// Carries a contract from `Requested` to `Delivered`, queueing the
    /// payment and the timestamped record. Call [`Bcn::settle`] to commit.
    pub fn request_contract(
        &mut self,
        session: &AuthSession,
        cp: &CpAccount,
        service: Service,
    ) -> Result<SmartContract, ContractFailure> {
        let mut contract = self.open_contract(session, cp, service);
        let step =
            |this: &mut Self, contract: &mut SmartContract| -> Result<(), ContractFailureReason> {
                this.check_request(session, cp, contract)?;
                contract.advance();
                this.check_funds(contract)?;
                this.submit(contract.payment_tx())?;
                contract.advance();
                let timestamp = this.clock;
                this.submit(contract.record_tx(timestamp))?;
                contract.timestamp = Some(timestamp);
                contract.advance();
                Ok(())
            };
        match step(self, &mut contract) {
            Ok(()) => Ok(contract),
            Err(reason) => Err(ContractFailure {
                contract: Box::new(contract),
                reason,
            }),
        }
    }

    /// Commits pending transactions and marks every delivered contract whose
    /// record is now on chain as committed.
    pub fn settle(&mut self, contracts: &mut [SmartContract]) -> Result<(), BcnError> {
        self.flush()?;
        for c in contracts.iter_mut() {
            if c.state == ContractState::Delivered && self.chain.has_contract_record(c.contract_id)
            {
                c.advance();
            }
        }
        Ok(())
    }

    /// The full lifecycle: the payment is committed before the service is
    /// delivered, then the timestamped record is committed.
    pub fn run_contract(
        &mut self,
        session: &AuthSession,
        cp: &CpAccount,
        service: Service,
    ) -> Result<SmartContract, ContractFailure> {
        let mut contract = self.open_contract(session, cp, service);
        let step =
            |this: &mut Self, contract: &mut SmartContract| -> Result<(), ContractFailureReason> {
                this.flush()?;
                this.check_request(session, cp, contract)?;
                contract.advance();
                this.check_funds(contract)?;
                this.commit(contract.payment_tx())?;
                contract.advance();
                contract.advance();
                let timestamp = this.clock;
                this.commit(contract.record_tx(timestamp))?;
                contract.timestamp = Some(timestamp);
                contract.advance();
                Ok(())
            };
        match step(self, &mut contract) {
            Ok(()) => Ok(contract),
            Err(reason) => Err(ContractFailure {
                contract: Box::new(contract),
                reason,
            }),
        }
    }
}
