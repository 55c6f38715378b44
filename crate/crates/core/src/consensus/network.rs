use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ConsensusMessage, ValidatorId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub min_delay: u64,
    pub max_delay: u64,
    pub drop_probability: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            min_delay: 1,
            max_delay: 5,
            drop_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct InFlight {
    deliver_at: u64,
    id: u64,
    to: ValidatorId,
    message: ConsensusMessage,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        (self.deliver_at, self.id) == (other.deliver_at, other.id)
    }
}

impl Eq for InFlight {}

impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InFlight {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.deliver_at, self.id).cmp(&(other.deliver_at, other.id))
    }
}

/// Seeded point-to-point message queue. Messages due at the same tick come
/// out in the order they were sent.
#[derive(Debug, Clone)]
pub struct SimulatedNetwork {
    config: NetworkConfig,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<InFlight>>,
    next_id: u64,
    sent: u64,
    dropped: u64,
}

impl SimulatedNetwork {
    pub fn new(config: NetworkConfig, seed: u64) -> Self {
        SimulatedNetwork {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: BinaryHeap::new(),
            next_id: 0,
            sent: 0,
            dropped: 0,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Sends at tick `now`; returns the delivery tick, or `None` if dropped.
    pub fn send(&mut self, now: u64, to: ValidatorId, message: ConsensusMessage) -> Option<u64> {
        self.sent += 1;
        if self.config.drop_probability > 0.0 && self.rng.gen_bool(self.config.drop_probability) {
            self.dropped += 1;
            return None;
        }
        let delay = self
            .rng
            .gen_range(self.config.min_delay..=self.config.max_delay);
        let at = now + delay;
        self.send_at(at, to, message);
        Some(at)
    }

    /// Schedules a delivery at an exact tick, bypassing delay and loss.
    pub fn send_at(&mut self, deliver_at: u64, to: ValidatorId, message: ConsensusMessage) {
        let id = self.next_id;
        self.next_id += 1;
        self.queue.push(Reverse(InFlight {
            deliver_at,
            id,
            to,
            message,
        }));
    }

    /// Removes every message due at or before `now`, in delivery order.
    pub fn pop_due(&mut self, now: u64) -> Vec<(ValidatorId, ConsensusMessage)> {
        let mut due = Vec::new();
        while self
            .queue
            .peek()
            .is_some_and(|Reverse(m)| m.deliver_at <= now)
        {
            let Reverse(m) = self.queue.pop().expect("peeked");
            due.push((m.to, m.message));
        }
        due
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    /// (delivery tick, tiebreak id, recipient) of everything queued, sorted.
    pub fn schedule(&self) -> Vec<(u64, u64, ValidatorId)> {
        let mut v: Vec<_> = self
            .queue
            .iter()
            .map(|Reverse(m)| (m.deliver_at, m.id, m.to))
            .collect();
        v.sort();
        v
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
