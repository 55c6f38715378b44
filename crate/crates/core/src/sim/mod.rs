//! End-to-end scenario runner: replays a trace through registration,
//! authentication and contracts on the ledger, prefetches each provider's
//! cache per its architecture and measures cache hit ratio and delivery
//! time over a sweep of cache sizes.

mod config;
mod metrics;
mod report;
mod scenario;

use std::path::Path;

use thiserror::Error;

use crate::caching::CachingError;
use crate::ids::CpId;
use crate::protocol::{AuthFailure, BcnError};
use crate::trace::TraceError;

pub use config::{parse_arms, parse_z_sweep, Architecture, Arm, DataSource, ScenarioConfig};
pub use metrics::{
    compute_chr, compute_norm_delivery_time, summarize, MetricsReport, MetricsRow, SummaryRow,
};
pub use report::{
    emit_report, emit_summary, write_metrics, write_plot, write_summary, CHR_PLOT_FILE,
    DELAY_PLOT_FILE, METRICS_FILE,
};
pub use scenario::{
    load_dataset, run_scenario, run_scenario_on, run_seeds, Dataset, ProviderRun, ScenarioRun,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config{}: {message}", .line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        message: String,
    },
    #[error("{hits} hits counted for {requests} requests")]
    Accounting { hits: u64, requests: u64 },
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Caching(#[from] CachingError),
    #[error(transparent)]
    Bcn(#[from] BcnError),
    #[error("authentication of user {user} at {cp} failed: {reason}")]
    Auth {
        user: u32,
        cp: CpId,
        reason: AuthFailure,
    },
    #[error("contract failed: {0}")]
    Contract(String),
    #[error("ledger path: {0}")]
    Integrity(String),
}

impl SimError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[cfg(test)]
mod tests;
