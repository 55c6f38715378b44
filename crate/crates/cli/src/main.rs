use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bcdn::consensus::{write_event_log, Behavior, Cluster, ConsensusConfig};
use bcdn::crypto::Scheme;
use bcdn::ids::CpId;
use bcdn::ledger::io::read_chain;
use bcdn::ledger::Chain;
use bcdn::protocol::CpAccount;
use bcdn::sim::{
    emit_summary, parse_arms, parse_z_sweep, run_seeds, summarize, DataSource, ScenarioConfig,
};
use clap::{Args, Parser, Subcommand};

/// `println!` that stops quietly when stdout is closed (e.g. piped to `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "bcdn", version, about = "Blockchain-assisted CDN simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trace and write CHR / delivery-time tables.
    Run(RunArgs),
    /// Replay a dumped ledger and check every block.
    VerifyChain {
        /// `ledger.jsonl` written by `run`.
        path: PathBuf,
    },
    /// Commit a few blocks through the PBFT cluster with injected faults.
    ConsensusDemo(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` scenario file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding movies.csv and ratings.csv.
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// Use the synthetic Zipf trace instead of MovieLens.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    zipf_s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at --seed; more than one adds a
    /// summary table of means.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Cache sizes, e.g. `20,40,60` or `20..200/20`.
    #[arg(long)]
    z_sweep: Option<String>,
    #[arg(long)]
    tau_ratio: Option<f64>,
    /// Comma list of bcdn, conventional, own_history, random.
    #[arg(long)]
    arch: Option<String>,
    /// Direct ledger appends and batched contracts instead of consensus.
    #[arg(long)]
    fast: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 4)]
    validators: u32,
    /// Validator ids that never send anything.
    #[arg(long, value_delimiter = ',')]
    silent: Vec<u32>,
    /// Validator ids that send conflicting messages.
    #[arg(long, value_delimiter = ',')]
    equivocating: Vec<u32>,
    #[arg(long, default_value_t = 5)]
    blocks: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    timeout: u64,
    /// Write the JSONL event log here.
    #[arg(long)]
    events: Option<PathBuf>,
}

fn scenario(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::parse(&text).with_context(|| path.display().to_string())?
        }
        None => ScenarioConfig::default(),
    };
    if args.synthetic {
        if !matches!(cfg.source, DataSource::Synthetic { .. }) {
            cfg.source = ScenarioConfig::synthetic(1_000, 100_000, 0.8).source;
        }
    } else if let Some(dir) = &args.dataset_dir {
        cfg.source = DataSource::MovieLens { dir: dir.clone() };
    }
    if let Some(s) = args.zipf_s {
        match &mut cfg.source {
            DataSource::Synthetic { zipf_s, .. } => *zipf_s = s,
            DataSource::MovieLens { .. } => bail!("--zipf-s only applies to --synthetic"),
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(z) = &args.z_sweep {
        cfg.z_sweep = parse_z_sweep(z).map_err(anyhow::Error::msg)?;
    }
    if let Some(t) = args.tau_ratio {
        cfg.tau_ratio = t;
    }
    if let Some(a) = &args.arch {
        cfg.arms = parse_arms(a).map_err(anyhow::Error::msg)?;
    }
    cfg.fast |= args.fast;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = scenario(&args)?;
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + args.seeds).collect();
    let runs = run_seeds(&cfg, &seeds)?;
    for run in &runs {
        let dir = if runs.len() == 1 {
            args.out_dir.clone()
        } else {
            args.out_dir.join(format!("seed_{}", run.config.seed))
        };
        let files = run.write_artifacts(&dir)?;
        say!(
            "seed {}: {} warmup + {} evaluation requests, {} blocks, {} files in {}",
            run.config.seed,
            run.warmup_requests,
            run.evaluation_requests,
            run.bcn.chain().len(),
            files.len(),
            dir.display()
        );
    }
    if runs.len() > 1 {
        let path = args.out_dir.join("summary.csv");
        emit_summary(&summarize(runs.iter().map(|r| &r.report)), &path)?;
        say!("summary: {}", path.display());
    }
    if let [run] = runs.as_slice() {
        for r in &run.report.rows {
            say!(
                "{}\t{}\tz={}\tchr={:.4}\tdelay={:.4}",
                r.cp,
                r.architecture,
                r.z,
                r.chr,
                r.norm_delivery_time
            );
        }
    }
    Ok(())
}

fn verify_chain(path: PathBuf) -> Result<()> {
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let chain = read_chain(BufReader::new(file))
        .with_context(|| format!("{} does not verify", path.display()))?;
    say!(
        "ok: {} blocks, {} transactions, {} contract records, tip {}",
        chain.len(),
        chain.transaction_count(),
        chain.contract_records(),
        chain.tip_digest().to_hex()
    );
    Ok(())
}

fn consensus_demo(args: DemoArgs) -> Result<bool> {
    let mut config = ConsensusConfig {
        validators: args.validators,
        timeout: args.timeout,
        seed: args.seed,
        ..ConsensusConfig::default()
    };
    for &id in &args.silent {
        config.faults.insert(id, Behavior::Silent);
    }
    for &id in &args.equivocating {
        if config.faults.insert(id, Behavior::Equivocating).is_some() {
            bail!("validator {id} listed as both silent and equivocating");
        }
    }
    let mut cluster = Cluster::new(config)?;
    let mut chain = Chain::genesis(cluster.public_keys());
    say!(
        "{} validators, f = {}, quorum {}, liveness bound {} ticks",
        cluster.size(),
        cluster.fault_tolerance(),
        cluster.quorum(),
        cluster.config().liveness_bound()
    );
    let mut stalled = false;
    for i in 0..args.blocks {
        let tx = CpAccount::generate(CpId(i), Scheme::Sim, args.seed).registration_tx();
        let block = chain.next_block(vec![tx], cluster.tick());
        match cluster.commit_block(&mut chain, block) {
            Ok(d) => say!(
                "seq {} committed in view {} by {} at tick {} ({} ticks) {}",
                d.sequence,
                d.view,
                d.validator,
                d.tick,
                d.latency,
                d.block.digest.to_hex()
            ),
            Err(e) => {
                say!("seq {}: {e}", chain.len());
                stalled = true;
                break;
            }
        }
    }
    let stats = cluster.stats();
    say!(
        "messages sent {}, dropped {}, safety {}",
        stats.messages_sent,
        stats.messages_dropped,
        if cluster.is_safe() {
            "held"
        } else {
            "VIOLATED"
        }
    );
    if let Some(path) = args.events {
        let mut out =
            File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_event_log(cluster.events(), &mut out)?;
    }
    Ok(cluster.is_safe() && !stalled)
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(args) => run(args).map(|()| true),
        Command::VerifyChain { path } => verify_chain(path).map(|()| true),
        Command::ConsensusDemo(args) => consensus_demo(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
