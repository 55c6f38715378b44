use serde::Serialize;

use super::{Architecture, SimError};
use crate::ids::CpId;

/// Fraction of requests served from the edge cache; 0 for no requests.
pub fn compute_chr(hits: u64, requests: u64) -> Result<f64, SimError> {
    if hits > requests {
        return Err(SimError::Accounting { hits, requests });
    }
    if requests == 0 {
        return Ok(0.0);
    }
    Ok(hits as f64 / requests as f64)
}

/// Mean delivery time in units of the access delay: a hit costs 1, a miss
/// costs `1 + tau_ratio`.
pub fn compute_norm_delivery_time(chr: f64, tau_ratio: f64) -> Result<f64, SimError> {
    if !(0.0..=1.0).contains(&chr) {
        return Err(SimError::Domain(format!("chr {chr} outside [0, 1]")));
    }
    if !(tau_ratio > 0.0 && tau_ratio.is_finite()) {
        return Err(SimError::Domain(format!(
            "tau_ratio {tau_ratio} must be positive"
        )));
    }
    Ok(1.0 + (1.0 - chr) * tau_ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub cp: CpId,
    pub architecture: Architecture,
    pub z: usize,
    pub chr: f64,
    pub norm_delivery_time: f64,
    pub requests: u64,
    pub hits: u64,
}

impl MetricsRow {
    pub fn new(
        cp: CpId,
        architecture: Architecture,
        z: usize,
        hits: u64,
        requests: u64,
        tau_ratio: f64,
    ) -> Result<Self, SimError> {
        let chr = compute_chr(hits, requests)?;
        Ok(MetricsRow {
            cp,
            architecture,
            z,
            chr,
            norm_delivery_time: compute_norm_delivery_time(chr, tau_ratio)?,
            requests,
            hits,
        })
    }
}

/// Rows sorted by provider, architecture and cache size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tau_ratio: f64,
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn new(tau_ratio: f64, mut rows: Vec<MetricsRow>) -> Self {
        rows.sort_by_key(|r| (r.cp, r.architecture, r.z));
        MetricsReport { tau_ratio, rows }
    }

    pub fn row(&self, cp: CpId, architecture: Architecture, z: usize) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.cp == cp && r.architecture == architecture && r.z == z)
    }

    /// Rows of one provider and architecture in increasing `z`.
    pub fn series(&self, cp: CpId, architecture: Architecture) -> Vec<&MetricsRow> {
        self.rows
            .iter()
            .filter(|r| r.cp == cp && r.architecture == architecture)
            .collect()
    }

    /// Distinct (provider, architecture) pairs in row order.
    pub fn curves(&self) -> Vec<(CpId, Architecture)> {
        let mut out: Vec<(CpId, Architecture)> =
            self.rows.iter().map(|r| (r.cp, r.architecture)).collect();
        out.dedup();
        out
    }

    pub fn z_values(&self) -> Vec<usize> {
        let mut zs: Vec<usize> = self.rows.iter().map(|r| r.z).collect();
        zs.sort_unstable();
        zs.dedup();
        zs
    }
}

/// Mean of one (provider, architecture, z) cell over several runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub cp: CpId,
    pub architecture: Architecture,
    pub z: usize,
    pub mean_chr: f64,
    pub mean_norm_delivery_time: f64,
    pub runs: usize,
}

/// Averages matching cells across reports. Cells missing from some report
/// are averaged over the reports that have them.
pub fn summarize<'a, I: IntoIterator<Item = &'a MetricsReport>>(reports: I) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<(CpId, Architecture, usize), (f64, f64, usize)> = BTreeMap::new();
    for report in reports {
        for r in &report.rows {
            let e = acc.entry((r.cp, r.architecture, r.z)).or_default();
            e.0 += r.chr;
            e.1 += r.norm_delivery_time;
            e.2 += 1;
        }
    }
    acc.into_iter()
        .map(|((cp, architecture, z), (chr, ndt, n))| SummaryRow {
            cp,
            architecture,
            z,
            mean_chr: chr / n as f64,
            mean_norm_delivery_time: ndt / n as f64,
            runs: n,
        })
        .collect()
}
