//! Blockchain-assisted content delivery: a permissioned ledger shared by
//! content providers, PBFT ordering among ledger nodes, anonymous user
//! authentication, and cache prefetching driven by the recorded request
//! history of every provider.

pub mod caching;
pub mod codec;
pub mod consensus;
pub mod crypto;
pub mod ids;
pub mod ledger;
pub mod protocol;
pub mod sim;
pub mod trace;
