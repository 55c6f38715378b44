use super::Transaction;

pub const DEFAULT_BLOCK_INTERVAL: u64 = 10;

/// Pending transactions, cut into a block once per interval of ticks.
#[derive(Debug, Clone)]
pub struct Mempool {
    pending: Vec<Transaction>,
    interval: u64,
    last_cut: u64,
}

impl Default for Mempool {
    fn default() -> Self {
        Self::new(DEFAULT_BLOCK_INTERVAL)
    }
}

impl Mempool {
    pub fn new(interval: u64) -> Self {
        Self {
            pending: Vec::new(),
            interval: interval.max(1),
            last_cut: 0,
        }
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }

    pub fn push(&mut self, tx: Transaction) {
        self.pending.push(tx);
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// First tick at which the next block may be cut.
    pub fn next_cut(&self) -> u64 {
        self.last_cut + self.interval
    }

    pub fn is_due(&self, now: u64) -> bool {
        !self.pending.is_empty() && now >= self.next_cut()
    }

    pub fn cut(&mut self, now: u64) -> Vec<Transaction> {
        self.last_cut = now;
        std::mem::take(&mut self.pending)
    }

    /// Puts transactions back at the front, e.g. after a failed commit.
    pub fn restore(&mut self, mut txs: Vec<Transaction>) {
        txs.append(&mut self.pending);
        self.pending = txs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::PublicKey;

    fn tx(n: u32) -> Transaction {
        Transaction::NodeEnrollment {
            node_id: n,
            node_public_key: PublicKey::from_bytes(vec![]),
        }
    }

    #[test]
    fn cuts_on_interval_boundaries() {
        let mut pool = Mempool::new(10);
        assert!(!pool.is_due(100), "empty pool is never due");
        pool.push(tx(1));
        assert!(!pool.is_due(9));
        assert!(pool.is_due(10));
        assert_eq!(pool.cut(10).len(), 1);
        pool.push(tx(2));
        assert!(!pool.is_due(19));
        assert!(pool.is_due(20));
    }

    #[test]
    fn restore_keeps_order() {
        let mut pool = Mempool::new(1);
        pool.push(tx(1));
        pool.push(tx(2));
        let taken = pool.cut(1);
        pool.push(tx(3));
        pool.restore(taken);
        assert_eq!(pool.pending(), &[tx(1), tx(2), tx(3)]);
    }
}
