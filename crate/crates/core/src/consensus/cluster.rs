use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::validator::{Ctx, Output};
use super::{
    Behavior, ConsensusError, ConsensusMessage, NetworkConfig, Phase, SimulatedNetwork, Validator,
    ValidatorId, ValidatorStats,
};
use crate::codec::Encoder;
use crate::crypto::{self, Digest, KeyPair, PublicKey, Scheme, Signature};
use crate::ledger::{Block, Chain};

#[derive(Debug, Clone)]
pub struct ConsensusConfig {
    pub validators: u32,
    /// Ticks a validator waits on a pending sequence before moving to the
    /// next view.
    pub timeout: u64,
    pub network: NetworkConfig,
    pub seed: u64,
    pub scheme: Scheme,
    pub faults: BTreeMap<u32, Behavior>,
    /// `commit_block` gives up after this many ticks without a decision.
    pub stall_after: u64,
    /// Keep the per-message event log. Long replays turn this off.
    pub record_events: bool,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            validators: 4,
            timeout: 50,
            network: NetworkConfig::default(),
            seed: 0,
            scheme: Scheme::Sim,
            faults: BTreeMap::new(),
            stall_after: 1_000,
            record_events: true,
        }
    }
}

impl ConsensusConfig {
    pub fn with_fault(mut self, validator: u32, behavior: Behavior) -> Self {
        self.faults.insert(validator, behavior);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Upper bound on ticks from proposal to commit with at most `f` faults
    /// and no message loss.
    pub fn liveness_bound(&self) -> u64 {
        2 * self.timeout + self.network.max_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventPhase {
    PrePrepare,
    Prepare,
    Commit,
    Committed,
    ViewChange,
}

impl From<Phase> for EventPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::PrePrepare => EventPhase::PrePrepare,
            Phase::Prepare => EventPhase::Prepare,
            Phase::Commit => EventPhase::Commit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsensusEvent {
    pub tick: u64,
    pub validator: ValidatorId,
    pub phase: EventPhase,
    pub view: u64,
    pub sequence: u64,
    pub digest: Option<Digest>,
}

pub fn write_event_log<W: Write>(events: &[ConsensusEvent], out: &mut W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// The first commit of a pending sequence by an honest validator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub sequence: u64,
    pub view: u64,
    pub block: Block,
    pub validator: ValidatorId,
    pub tick: u64,
    /// Ticks since the block was proposed.
    pub latency: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClusterStats {
    pub messages_sent: u64,
    pub messages_dropped: u64,
    pub refused: ValidatorStats,
}

#[derive(Debug, Clone)]
struct Pending {
    block: Block,
    proposed_at: u64,
    decided: bool,
}

/// N = 3f + 1 simulated validators driven by a single-threaded tick loop.
#[derive(Debug, Clone)]
pub struct Cluster {
    config: ConsensusConfig,
    keys: Vec<KeyPair>,
    public_keys: Vec<PublicKey>,
    validators: Vec<Validator>,
    network: SimulatedNetwork,
    tick: u64,
    pending: Option<Pending>,
    events: Vec<ConsensusEvent>,
}

pub(super) fn validator_key_seed(seed: u64, id: u32) -> u64 {
    let mut enc = Encoder::with_domain("bcdn/validator-key");
    enc.u64(seed).u32(id);
    let d = Digest::of(enc.as_bytes());
    u64::from_be_bytes(d.as_bytes()[..8].try_into().expect("8 bytes"))
}

impl Cluster {
    pub fn new(config: ConsensusConfig) -> Result<Self, ConsensusError> {
        let n = config.validators;
        if n == 0 || !(n - 1).is_multiple_of(3) {
            return Err(ConsensusError::BadSize(n));
        }
        if let Some((&id, _)) = config.faults.iter().find(|(id, _)| **id >= n) {
            return Err(ConsensusError::UnknownValidator(id));
        }
        let net = &config.network;
        if net.min_delay == 0
            || net.min_delay > net.max_delay
            || !(0.0..=1.0).contains(&net.drop_probability)
        {
            return Err(ConsensusError::BadNetwork(format!(
                "delay [{}, {}], drop probability {}",
                net.min_delay, net.max_delay, net.drop_probability
            )));
        }
        let f = (n - 1) / 3;
        let quorum = (2 * f + 1) as usize;
        let keys: Vec<KeyPair> = (0..n)
            .map(|i| {
                config
                    .scheme
                    .generate_keypair(validator_key_seed(config.seed, i))
            })
            .collect();
        let validators = keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let behavior = config.faults.get(&(i as u32)).copied().unwrap_or_default();
                Validator::new(
                    ValidatorId(i as u32),
                    n,
                    quorum,
                    k.private_key.clone(),
                    behavior,
                )
            })
            .collect();
        Ok(Cluster {
            public_keys: keys.iter().map(|k| k.public_key.clone()).collect(),
            keys,
            validators,
            network: SimulatedNetwork::new(config.network, config.seed),
            tick: 0,
            pending: None,
            events: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &ConsensusConfig {
        &self.config
    }

    pub fn size(&self) -> u32 {
        self.config.validators
    }

    pub fn fault_tolerance(&self) -> u32 {
        (self.config.validators - 1) / 3
    }

    pub fn quorum(&self) -> usize {
        2 * self.fault_tolerance() as usize + 1
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Validator public keys, in id order, for enrollment in genesis.
    pub fn public_keys(&self) -> &[PublicKey] {
        &self.public_keys
    }

    /// Signs on behalf of a ledger node.
    pub fn sign_as(&self, id: ValidatorId, message: &[u8]) -> Option<Signature> {
        self.keys
            .get(id.index())
            .map(|k| crypto::sign(&k.private_key, message))
    }

    pub fn validators(&self) -> &[Validator] {
        &self.validators
    }

    pub fn validator(&self, id: ValidatorId) -> Option<&Validator> {
        self.validators.get(id.index())
    }

    pub fn network(&self) -> &SimulatedNetwork {
        &self.network
    }

    pub fn events(&self) -> &[ConsensusEvent] {
        &self.events
    }

    /// Highest view reached by an honest validator.
    pub fn current_view(&self) -> u64 {
        let honest = self
            .validators
            .iter()
            .filter(|v| !v.behavior().is_byzantine());
        honest.map(Validator::view).max().unwrap_or_else(|| {
            self.validators
                .iter()
                .map(Validator::view)
                .max()
                .unwrap_or(0)
        })
    }

    pub fn primary_of(&self, view: u64) -> ValidatorId {
        ValidatorId((view % self.config.validators as u64) as u32)
    }

    pub fn primary(&self) -> ValidatorId {
        self.primary_of(self.current_view())
    }

    pub fn pending_sequence(&self) -> Option<u64> {
        self.pending.as_ref().map(|p| p.block.index)
    }

    pub fn stats(&self) -> ClusterStats {
        let mut refused = ValidatorStats::default();
        for v in &self.validators {
            let s = v.stats();
            refused.bad_signature += s.bad_signature;
            refused.mismatched += s.mismatched;
            refused.invalid_block += s.invalid_block;
            refused.stale += s.stale;
        }
        ClusterStats {
            messages_sent: self.network.sent(),
            messages_dropped: self.network.dropped(),
            refused,
        }
    }

    /// True if no two honest validators committed different digests at the
    /// same sequence.
    pub fn is_safe(&self) -> bool {
        let mut seen: BTreeMap<u64, Digest> = BTreeMap::new();
        for v in self
            .validators
            .iter()
            .filter(|v| !v.behavior().is_byzantine())
        {
            for (seq, d) in v.committed() {
                if *seen.entry(*seq).or_insert(*d) != *d {
                    return false;
                }
            }
        }
        true
    }

    /// The current primary proposes `block` as the next sequence.
    pub fn propose(
        &mut self,
        primary: ValidatorId,
        block: Block,
        chain: &Chain,
    ) -> Result<(), ConsensusError> {
        let view = self.current_view();
        let expected = self.primary();
        if primary != expected {
            return Err(ConsensusError::NotPrimary {
                caller: primary,
                view,
                expected,
            });
        }
        if let Some(p) = &self.pending {
            return Err(ConsensusError::Busy(p.block.index));
        }
        chain
            .validate_block(&block)
            .map_err(ConsensusError::InvalidBlock)?;
        for v in &mut self.validators {
            v.on_request(block.index, self.tick);
        }
        let mut out = Vec::new();
        self.validators[primary.index()].lead(&block, &mut out);
        let Cluster {
            network,
            events,
            tick,
            config,
            ..
        } = self;
        let log = config.record_events.then_some(events);
        dispatch(primary, *tick, out, network, log, &mut None);
        self.pending = Some(Pending {
            block,
            proposed_at: self.tick,
            decided: false,
        });
        Ok(())
    }

    /// Advances one tick: delivers every message due now, then runs the
    /// view-change timers. Returns the decision if the pending sequence was
    /// committed by an honest validator during this tick.
    pub fn advance_tick(&mut self, chain: &Chain) -> Option<Decision> {
        self.tick += 1;
        let Cluster {
            validators,
            public_keys,
            network,
            events,
            config,
            tick,
            pending,
            ..
        } = self;
        let now = *tick;
        let pending_block = pending.as_ref().map(|p| p.block.clone());
        let ctx = Ctx {
            now,
            timeout: config.timeout,
            keys: public_keys,
            chain,
            pending: pending_block.as_ref(),
        };
        let mut decision = None;
        for (to, message) in network.pop_due(now) {
            let Some(v) = validators.get_mut(to.index()) else {
                continue;
            };
            let mut out = Vec::new();
            v.handle(message, &ctx, &mut out);
            let log = config.record_events.then_some(&mut *events);
            record(dispatch(to, now, out, network, log, pending), &mut decision);
        }
        for v in validators.iter_mut() {
            let mut out = Vec::new();
            v.tick(&ctx, &mut out);
            let log = config.record_events.then_some(&mut *events);
            record(
                dispatch(v.id(), now, out, network, log, pending),
                &mut decision,
            );
        }
        decision
    }

    /// Marks a sequence as decided on the shared ledger.
    pub fn observe_committed(&mut self, sequence: u64) {
        if self.pending_sequence() == Some(sequence) {
            self.pending = None;
        }
        for v in &mut self.validators {
            v.observe(sequence);
        }
    }

    /// Gives up on the pending proposal.
    pub fn abandon(&mut self) {
        if let Some(p) = self.pending.take() {
            for v in &mut self.validators {
                v.abandon(p.block.index);
            }
        }
    }

    /// Proposes `block` through the current primary, runs ticks until an
    /// honest validator commits, and appends the decided block.
    pub fn commit_block(
        &mut self,
        chain: &mut Chain,
        block: Block,
    ) -> Result<Decision, ConsensusError> {
        let sequence = block.index;
        self.propose(self.primary(), block, chain)?;
        let start = self.tick;
        loop {
            if let Some(d) = self.advance_tick(chain) {
                chain
                    .append(d.block.clone())
                    .map_err(ConsensusError::Ledger)?;
                self.observe_committed(d.sequence);
                return Ok(d);
            }
            if self.tick - start >= self.config.stall_after {
                self.abandon();
                return Err(ConsensusError::Stalled {
                    sequence,
                    ticks: self.tick - start,
                });
            }
        }
    }

    /// Schedules a raw message for delivery at an exact tick.
    pub fn inject(&mut self, to: ValidatorId, message: ConsensusMessage, deliver_at: u64) {
        self.network.send_at(deliver_at, to, message);
    }
}

fn record(found: Option<Decision>, slot: &mut Option<Decision>) {
    if slot.is_none() {
        *slot = found;
    }
}

fn dispatch(
    from: ValidatorId,
    now: u64,
    out: Vec<Output>,
    network: &mut SimulatedNetwork,
    mut events: Option<&mut Vec<ConsensusEvent>>,
    pending: &mut Option<Pending>,
) -> Option<Decision> {
    let mut log = |e: ConsensusEvent| {
        if let Some(events) = events.as_deref_mut() {
            events.push(e);
        }
    };
    let mut decision = None;
    let mut logged: Vec<(Phase, u64, u64, Digest)> = Vec::new();
    for o in out {
        match o {
            Output::Send { to, message } => {
                let key = (
                    message.phase,
                    message.view,
                    message.sequence,
                    message.block_digest,
                );
                if !logged.contains(&key) {
                    logged.push(key);
                    log(ConsensusEvent {
                        tick: now,
                        validator: from,
                        phase: message.phase.into(),
                        view: message.view,
                        sequence: message.sequence,
                        digest: Some(message.block_digest),
                    });
                }
                network.send(now, to, message);
            }
            Output::ViewChange { view } => log(ConsensusEvent {
                tick: now,
                validator: from,
                phase: EventPhase::ViewChange,
                view,
                sequence: pending.as_ref().map_or(0, |p| p.block.index),
                digest: None,
            }),
            Output::Committed {
                sequence,
                view,
                block,
            } => {
                log(ConsensusEvent {
                    tick: now,
                    validator: from,
                    phase: EventPhase::Committed,
                    view,
                    sequence,
                    digest: Some(block.digest),
                });
                if let Some(p) = pending
                    .as_mut()
                    .filter(|p| p.block.index == sequence && !p.decided)
                {
                    p.decided = true;
                    decision = Some(Decision {
                        sequence,
                        view,
                        validator: from,
                        tick: now,
                        latency: now - p.proposed_at,
                        block,
                    });
                }
            }
        }
    }
    decision
}
