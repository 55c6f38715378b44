use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{MetricsReport, ScenarioRun, SimError, SummaryRow};
use crate::caching::write_correlation_dump;
use crate::consensus::write_event_log;
use crate::ledger::io::write_chain;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHR_PLOT_FILE: &str = "fig_chr.dat";
pub const DELAY_PLOT_FILE: &str = "fig_delivery_time.dat";

fn create(path: &Path) -> Result<BufWriter<File>, SimError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| SimError::io(path, e))
}

fn write_file<F>(path: &Path, body: F) -> Result<PathBuf, SimError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = create(path)?;
    body(&mut out)
        .and_then(|()| out.flush())
        .map_err(|e| SimError::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn write_metrics<W: Write>(report: &MetricsReport, out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "cp,architecture,z,chr,norm_delivery_time,requests,hits"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.cp.0, r.architecture, r.z, r.chr, r.norm_delivery_time, r.requests, r.hits
        )?;
    }
    Ok(())
}

/// Whitespace-separated plot data: one line per `z`, one column per
/// (provider, architecture) curve.
pub fn write_plot<W: Write>(
    report: &MetricsReport,
    delivery_time: bool,
    out: &mut W,
) -> std::io::Result<()> {
    let curves = report.curves();
    write!(out, "# z")?;
    for (cp, arch) in &curves {
        write!(out, "\t{cp}_{arch}")?;
    }
    writeln!(out)?;
    for z in report.z_values() {
        write!(out, "{z}")?;
        for &(cp, arch) in &curves {
            match report.row(cp, arch, z) {
                Some(r) if delivery_time => write!(out, "\t{}", r.norm_delivery_time)?,
                Some(r) => write!(out, "\t{}", r.chr)?,
                None => write!(out, "\tnan")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes the metrics table and both plot-data files into `dir`.
pub fn emit_report(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    Ok(vec![
        write_file(&dir.join(METRICS_FILE), |o| write_metrics(report, o))?,
        write_file(&dir.join(CHR_PLOT_FILE), |o| write_plot(report, false, o))?,
        write_file(&dir.join(DELAY_PLOT_FILE), |o| write_plot(report, true, o))?,
    ])
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "cp,architecture,z,mean_chr,mean_norm_delivery_time,runs"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.cp.0, r.architecture, r.z, r.mean_chr, r.mean_norm_delivery_time, r.runs
        )?;
    }
    Ok(())
}

pub fn emit_summary(rows: &[SummaryRow], path: &Path) -> Result<PathBuf, SimError> {
    write_file(path, |o| write_summary(rows, o))
}

impl ScenarioRun {
    /// Report tables plus correlation dumps, the handshake transcript and,
    /// when enabled, the ledger and the consensus event log.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
        let mut written = emit_report(&self.report, dir)?;
        let dump_z = self.config.dump_z.unwrap_or(self.config.half_library());
        for p in &self.providers {
            for (arch, scores) in &p.correlations {
                let cache = p
                    .cache(*arch, dump_z)
                    .expect("scored architectures have an order");
                let path = dir.join(format!("correlation_cp{}_{}.tsv", p.cp.0, arch));
                written.push(write_file(&path, |o| {
                    write_correlation_dump(o, scores, &cache)
                })?);
            }
        }
        let transcript = self.bcn.transcript();
        written.push(write_file(&dir.join("transcript.tsv"), |o| {
            transcript.write(o)
        })?);
        if self.config.dump_ledger {
            let path = dir.join("ledger.jsonl");
            let mut out = create(&path)?;
            write_chain(self.bcn.chain(), &mut out)
                .map_err(|e| SimError::Integrity(e.to_string()))?;
            out.flush().map_err(|e| SimError::io(&path, e))?;
            written.push(path);
        }
        if self.config.dump_events {
            let events = self.bcn.cluster().events();
            written.push(write_file(&dir.join("consensus_events.jsonl"), |o| {
                write_event_log(events, o)
            })?);
        }
        Ok(written)
    }
}
