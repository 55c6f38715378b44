use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ConsensusMessage, Phase, ValidatorId};
use crate::codec::Encoder;
use crate::crypto::{Digest, PrivateKey, PublicKey};
use crate::ledger::{Block, Chain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Behavior {
    #[default]
    Honest,
    /// Never sends anything.
    Silent,
    /// Sends digest D to even-id peers and a conflicting digest to odd-id
    /// peers, voting Prepare and Commit immediately.
    Equivocating,
}

impl Behavior {
    pub fn is_byzantine(self) -> bool {
        self != Behavior::Honest
    }
}

impl std::str::FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "honest" => Ok(Behavior::Honest),
            "silent" => Ok(Behavior::Silent),
            "equivocating" => Ok(Behavior::Equivocating),
            other => Err(format!("unknown validator behavior `{other}`")),
        }
    }
}

/// Messages a validator refused, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ValidatorStats {
    pub bad_signature: u64,
    pub mismatched: u64,
    pub invalid_block: u64,
    pub stale: u64,
}

pub(crate) struct Ctx<'a> {
    pub now: u64,
    pub timeout: u64,
    pub keys: &'a [PublicKey],
    pub chain: &'a Chain,
    pub pending: Option<&'a Block>,
}

#[derive(Debug)]
pub(crate) enum Output {
    Send {
        to: ValidatorId,
        message: ConsensusMessage,
    },
    Committed {
        sequence: u64,
        view: u64,
        block: Block,
    },
    ViewChange {
        view: u64,
    },
}

type VoteKey = (u64, u64, Phase);

#[derive(Debug, Clone)]
pub struct Validator {
    id: ValidatorId,
    n: u32,
    quorum: usize,
    key: PrivateKey,
    behavior: Behavior,
    view: u64,
    /// (sequence, tick the timer was last started).
    timer: Option<(u64, u64)>,
    accepted: BTreeMap<(u64, u64), Digest>,
    blocks: BTreeMap<Digest, Block>,
    votes: BTreeMap<VoteKey, BTreeMap<ValidatorId, Digest>>,
    sent: BTreeSet<VoteKey>,
    lock: Option<(u64, Digest)>,
    committed: BTreeMap<u64, Digest>,
    closed: BTreeSet<u64>,
    deferred: Vec<ConsensusMessage>,
    stats: ValidatorStats,
}

impl Validator {
    pub(crate) fn new(
        id: ValidatorId,
        n: u32,
        quorum: usize,
        key: PrivateKey,
        behavior: Behavior,
    ) -> Self {
        Validator {
            id,
            n,
            quorum,
            key,
            behavior,
            view: 0,
            timer: None,
            accepted: BTreeMap::new(),
            blocks: BTreeMap::new(),
            votes: BTreeMap::new(),
            sent: BTreeSet::new(),
            lock: None,
            committed: BTreeMap::new(),
            closed: BTreeSet::new(),
            deferred: Vec::new(),
            stats: ValidatorStats::default(),
        }
    }

    pub fn id(&self) -> ValidatorId {
        self.id
    }

    pub fn behavior(&self) -> Behavior {
        self.behavior
    }

    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn committed(&self) -> &BTreeMap<u64, Digest> {
        &self.committed
    }

    pub fn locked(&self) -> Option<(u64, Digest)> {
        self.lock
    }

    pub fn stats(&self) -> ValidatorStats {
        self.stats
    }

    /// Received log entries for one (view, sequence, phase), by sender.
    pub fn votes(
        &self,
        view: u64,
        sequence: u64,
        phase: Phase,
    ) -> Option<&BTreeMap<ValidatorId, Digest>> {
        self.votes.get(&(view, sequence, phase))
    }

    fn primary_of(&self, view: u64) -> ValidatorId {
        ValidatorId((view % self.n as u64) as u32)
    }

    fn is_closed(&self, sequence: u64) -> bool {
        self.closed.contains(&sequence) || self.committed.contains_key(&sequence)
    }

    /// A client request for `sequence` reached this validator: start waiting.
    pub(crate) fn on_request(&mut self, sequence: u64, now: u64) {
        if self.behavior != Behavior::Silent && !self.is_closed(sequence) {
            self.timer = Some((sequence, now));
        }
    }

    /// The sequence was decided on the shared ledger.
    pub(crate) fn observe(&mut self, sequence: u64) {
        self.closed.insert(sequence);
        self.stop_timer(sequence);
    }

    pub(crate) fn abandon(&mut self, sequence: u64) {
        self.stop_timer(sequence);
        self.deferred.retain(|m| m.sequence != sequence);
    }

    fn stop_timer(&mut self, sequence: u64) {
        if self.timer.is_some_and(|(s, _)| s == sequence) {
            self.timer = None;
        }
    }

    fn sign(&self, phase: Phase, view: u64, sequence: u64, digest: Digest) -> ConsensusMessage {
        ConsensusMessage::signed(phase, view, sequence, digest, self.id, &self.key)
    }

    fn peers(&self) -> impl Iterator<Item = ValidatorId> + '_ {
        (0..self.n).map(ValidatorId).filter(move |p| *p != self.id)
    }

    /// Broadcasts the proposal for the current view.
    pub(crate) fn lead(&mut self, block: &Block, out: &mut Vec<Output>) {
        let (view, seq) = (self.view, block.index);
        match self.behavior {
            Behavior::Silent => {}
            Behavior::Honest => {
                let digest = block.digest;
                self.accepted.insert((view, seq), digest);
                self.blocks.insert(digest, block.clone());
                self.sent.insert((view, seq, Phase::PrePrepare));
                let pre = self
                    .sign(Phase::PrePrepare, view, seq, digest)
                    .with_block(block.clone());
                for to in self.peers().collect::<Vec<_>>() {
                    out.push(Output::Send {
                        to,
                        message: pre.clone(),
                    });
                }
                self.vote(Phase::Prepare, view, seq, digest, out);
                self.progress(view, seq, out);
            }
            Behavior::Equivocating => {
                let twin = Block::new(
                    block.index,
                    block.prev_digest,
                    block.timestamp + 1,
                    block.transactions.clone(),
                );
                for to in self.peers().collect::<Vec<_>>() {
                    let b = if to.0 % 2 == 0 { block } else { &twin };
                    for phase in [Phase::PrePrepare, Phase::Prepare, Phase::Commit] {
                        let mut message = self.sign(phase, view, seq, b.digest);
                        if phase == Phase::PrePrepare {
                            message.block = Some(b.clone());
                        }
                        out.push(Output::Send { to, message });
                    }
                }
            }
        }
    }

    pub(crate) fn handle(&mut self, msg: ConsensusMessage, ctx: &Ctx<'_>, out: &mut Vec<Output>) {
        if self.behavior == Behavior::Silent {
            return;
        }
        let verified = ctx
            .keys
            .get(msg.sender.index())
            .is_some_and(|k| msg.verify(k));
        if !verified {
            self.stats.bad_signature += 1;
            return;
        }
        if self.is_closed(msg.sequence) || msg.view < self.view {
            self.stats.stale += 1;
            return;
        }
        match self.behavior {
            Behavior::Equivocating => self.equivocate(msg, ctx, out),
            _ => self.handle_honest(msg, ctx, out),
        }
    }

    fn handle_honest(&mut self, msg: ConsensusMessage, ctx: &Ctx<'_>, out: &mut Vec<Output>) {
        if msg.view > self.view {
            if msg.phase == Phase::PrePrepare {
                self.deferred.push(msg);
            } else {
                self.record_vote(&msg);
            }
            return;
        }
        match msg.phase {
            Phase::PrePrepare => self.on_pre_prepare(msg, ctx, out),
            Phase::Prepare | Phase::Commit => {
                if let Some(d) = self.accepted.get(&(msg.view, msg.sequence)) {
                    if *d != msg.block_digest {
                        self.stats.mismatched += 1;
                        return;
                    }
                }
                self.record_vote(&msg);
                self.progress(msg.view, msg.sequence, out);
            }
        }
    }

    fn on_pre_prepare(&mut self, msg: ConsensusMessage, ctx: &Ctx<'_>, out: &mut Vec<Output>) {
        let (view, seq, digest) = (msg.view, msg.sequence, msg.block_digest);
        if msg.sender != self.primary_of(view) {
            self.stats.mismatched += 1;
            return;
        }
        if let Some(prev) = self.accepted.get(&(view, seq)) {
            if *prev != digest {
                self.stats.mismatched += 1;
            }
            return;
        }
        let Some(block) = msg.block else {
            self.stats.invalid_block += 1;
            return;
        };
        if block.digest != digest || block.index != seq || ctx.chain.validate_block(&block).is_err()
        {
            self.stats.invalid_block += 1;
            return;
        }
        if let Some((locked_seq, locked)) = self.lock {
            if locked_seq == seq && locked != digest {
                self.stats.mismatched += 1;
                return;
            }
        }
        self.accepted.insert((view, seq), digest);
        self.blocks.insert(digest, block);
        if self.timer.is_none() {
            self.timer = Some((seq, ctx.now));
        }
        self.vote(Phase::Prepare, view, seq, digest, out);
        self.progress(view, seq, out);
    }

    fn record_vote(&mut self, msg: &ConsensusMessage) {
        let entry = self
            .votes
            .entry((msg.view, msg.sequence, msg.phase))
            .or_default();
        match entry.get(&msg.sender) {
            Some(prev) if *prev != msg.block_digest => self.stats.mismatched += 1,
            Some(_) => {}
            None => {
                entry.insert(msg.sender, msg.block_digest);
            }
        }
    }

    fn count(&self, view: u64, seq: u64, phase: Phase, digest: &Digest) -> usize {
        self.votes
            .get(&(view, seq, phase))
            .map_or(0, |m| m.values().filter(|d| *d == digest).count())
    }

    fn vote(&mut self, phase: Phase, view: u64, seq: u64, digest: Digest, out: &mut Vec<Output>) {
        if !self.sent.insert((view, seq, phase)) {
            return;
        }
        self.votes
            .entry((view, seq, phase))
            .or_default()
            .insert(self.id, digest);
        let message = self.sign(phase, view, seq, digest);
        for to in self.peers().collect::<Vec<_>>() {
            out.push(Output::Send {
                to,
                message: message.clone(),
            });
        }
    }

    fn progress(&mut self, view: u64, seq: u64, out: &mut Vec<Output>) {
        if view != self.view || self.is_closed(seq) {
            return;
        }
        let Some(digest) = self.accepted.get(&(view, seq)).copied() else {
            return;
        };
        if !self.sent.contains(&(view, seq, Phase::Commit))
            && self.count(view, seq, Phase::Prepare, &digest) >= self.quorum
        {
            self.lock = Some((seq, digest));
            self.vote(Phase::Commit, view, seq, digest, out);
        }
        if self.sent.contains(&(view, seq, Phase::Commit))
            && self.count(view, seq, Phase::Commit, &digest) >= self.quorum
        {
            self.committed.insert(seq, digest);
            self.stop_timer(seq);
            let block = self.blocks[&digest].clone();
            out.push(Output::Committed {
                sequence: seq,
                view,
                block,
            });
        }
    }

    fn equivocate(&mut self, msg: ConsensusMessage, ctx: &Ctx<'_>, out: &mut Vec<Output>) {
        if msg.phase != Phase::PrePrepare
            || !self.sent.insert((msg.view, msg.sequence, Phase::Prepare))
        {
            return;
        }
        if self.timer.is_none() {
            self.timer = Some((msg.sequence, ctx.now));
        }
        let real = msg.block_digest;
        let mut enc = Encoder::with_domain("bcdn/fork");
        enc.u32(self.id.0).fixed(real.as_bytes());
        let fork = Digest::of(enc.as_bytes());
        for to in self.peers().collect::<Vec<_>>() {
            let digest = if to.0 % 2 == 0 { real } else { fork };
            for phase in [Phase::Prepare, Phase::Commit] {
                out.push(Output::Send {
                    to,
                    message: self.sign(phase, msg.view, msg.sequence, digest),
                });
            }
        }
    }

    /// Fires the view-change timer if it has run for `timeout` ticks.
    pub(crate) fn tick(&mut self, ctx: &Ctx<'_>, out: &mut Vec<Output>) {
        if self.behavior == Behavior::Silent {
            return;
        }
        let Some((seq, started)) = self.timer else {
            return;
        };
        if self.is_closed(seq) {
            self.timer = None;
            return;
        }
        if ctx.now.saturating_sub(started) < ctx.timeout {
            return;
        }
        self.view += 1;
        self.timer = Some((seq, ctx.now));
        out.push(Output::ViewChange { view: self.view });

        if self.primary_of(self.view) == self.id {
            let locked = match self.lock {
                Some((s, d)) if s == seq => self.blocks.get(&d).cloned(),
                _ => None,
            };
            let proposal = locked.or_else(|| ctx.pending.filter(|b| b.index == seq).cloned());
            if let Some(block) = proposal {
                self.lead(&block, out);
            }
        }

        let view = self.view;
        let (now, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.deferred)
            .into_iter()
            .filter(|m| m.view >= view)
            .partition(|m| m.view == view);
        self.deferred = later;
        for m in now {
            self.handle(m, ctx, out);
        }
        self.progress(view, seq, out);
    }
}
