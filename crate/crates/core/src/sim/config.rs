use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use super::SimError;
use crate::crypto::Scheme;

/// How a provider fills its edge cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Architecture {
    /// Feature popularity over the whole shared ledger.
    BCdn,
    /// Feature popularity over the provider's own contracts only.
    ConventionalOwnHistory,
    /// Uniform random subset of the library.
    ConventionalRandom,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::BCdn => "bcdn",
            Architecture::ConventionalOwnHistory => "conventional_own_history",
            Architecture::ConventionalRandom => "conventional_random",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "bcdn" => Ok(Architecture::BCdn),
            "own_history" | "conventional_own_history" => Ok(Architecture::ConventionalOwnHistory),
            "random" | "conventional_random" => Ok(Architecture::ConventionalRandom),
            other => Err(format!("unknown architecture `{other}`")),
        }
    }
}

/// A system-wide configuration compared in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Arm {
    /// Every provider uses the shared ledger.
    BCdn,
    /// Launched providers use their own history, new ones cache at random.
    Conventional,
    /// Every provider uses one fixed architecture.
    All(Architecture),
}

impl Arm {
    pub fn architecture_for(self, cp_index: usize, warm_cps: usize) -> Architecture {
        match self {
            Arm::BCdn => Architecture::BCdn,
            Arm::Conventional if cp_index < warm_cps => Architecture::ConventionalOwnHistory,
            Arm::Conventional => Architecture::ConventionalRandom,
            Arm::All(a) => a,
        }
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "bcdn" => Ok(Arm::BCdn),
            "conventional" => Ok(Arm::Conventional),
            other => other.parse::<Architecture>().map(Arm::All).map_err(|_| {
                format!("unknown architecture `{other}` (bcdn|conventional|own_history|random)")
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Directory holding `movies.csv` and `ratings.csv`.
    MovieLens { dir: PathBuf },
    Synthetic {
        contents: usize,
        requests: usize,
        zipf_s: f64,
        users: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub source: DataSource,
    pub window_start: u64,
    pub window_end: u64,
    pub providers: usize,
    pub per_cp: usize,
    pub z_sweep: Vec<usize>,
    /// Backhaul to access delay ratio.
    pub tau_ratio: f64,
    pub seed: u64,
    /// Number of providers already running before the evaluation period.
    pub warm_cps: usize,
    pub warmup_fraction: f64,
    pub arms: Vec<Arm>,
    /// Direct ledger appends and batched contracts instead of consensus.
    pub fast: bool,
    pub block_interval: u64,
    pub fee: u64,
    pub initial_balance: u64,
    /// Re-estimate feature-based caches every this many evaluation requests.
    pub refresh_every: Option<usize>,
    pub scheme: Scheme,
    pub validators: u32,
    pub consensus_timeout: u64,
    /// Cache size whose residency is marked in the correlation dumps;
    /// defaults to half a library.
    pub dump_z: Option<usize>,
    pub dump_ledger: bool,
    /// Keep and write the consensus event log (large on long traces).
    pub dump_events: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            source: DataSource::MovieLens {
                dir: PathBuf::from("data/ml-100k"),
            },
            window_start: 0,
            window_end: u64::MAX,
            providers: 3,
            per_cp: 200,
            z_sweep: (1..=10).map(|k| 20 * k).collect(),
            tau_ratio: 4.0,
            seed: 0,
            warm_cps: 1,
            warmup_fraction: 0.5,
            arms: vec![Arm::BCdn, Arm::Conventional],
            fast: false,
            block_interval: 10,
            fee: 1,
            initial_balance: 1_000_000,
            refresh_every: None,
            scheme: Scheme::Sim,
            validators: 4,
            consensus_timeout: 50,
            dump_z: None,
            dump_ledger: true,
            dump_events: false,
        }
    }
}

impl ScenarioConfig {
    pub fn synthetic(contents: usize, requests: usize, zipf_s: f64) -> Self {
        ScenarioConfig {
            source: DataSource::Synthetic {
                contents,
                requests,
                zipf_s,
                users: 500,
            },
            ..ScenarioConfig::default()
        }
    }

    pub fn movielens(dir: impl Into<PathBuf>) -> Self {
        ScenarioConfig {
            source: DataSource::MovieLens { dir: dir.into() },
            ..ScenarioConfig::default()
        }
    }

    /// Architectures needed for provider `cp_index`, in a fixed order.
    pub fn architectures_for(&self, cp_index: usize) -> Vec<Architecture> {
        let set: BTreeSet<Architecture> = self
            .arms
            .iter()
            .map(|a| a.architecture_for(cp_index, self.warm_cps))
            .collect();
        set.into_iter().collect()
    }

    pub fn half_library(&self) -> usize {
        self.per_cp / 2
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| {
            Err(SimError::Config {
                line: None,
                message: m,
            })
        };
        if self.providers == 0 {
            return fail("providers must be at least 1".into());
        }
        if self.per_cp == 0 {
            return fail("per_cp must be at least 1".into());
        }
        if let Some(z) = self.z_sweep.iter().find(|&&z| z > self.per_cp) {
            return fail(format!(
                "cache size {z} exceeds the library size {}",
                self.per_cp
            ));
        }
        let mut seen = BTreeSet::new();
        if let Some(z) = self.z_sweep.iter().find(|&&z| !seen.insert(z)) {
            return fail(format!("cache size {z} listed twice"));
        }
        if !(self.tau_ratio > 0.0 && self.tau_ratio.is_finite()) {
            return fail(format!(
                "tau_ratio must be positive, got {}",
                self.tau_ratio
            ));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return fail(format!(
                "warmup_fraction must be in (0, 1), got {}",
                self.warmup_fraction
            ));
        }
        if self.warm_cps > self.providers {
            return fail(format!(
                "warm_cps {} exceeds providers {}",
                self.warm_cps, self.providers
            ));
        }
        if self.window_start >= self.window_end {
            return fail("window_start must precede window_end".into());
        }
        if self.arms.is_empty() {
            return fail("at least one architecture is required".into());
        }
        if self.refresh_every == Some(0) {
            return fail("refresh_every must be positive".into());
        }
        if self.fee == 0 {
            return fail("fee must be positive".into());
        }
        if let DataSource::Synthetic {
            zipf_s, contents, ..
        } = &self.source
        {
            if !(*zipf_s >= 0.0 && zipf_s.is_finite()) {
                return fail(format!("zipf_s must be >= 0, got {zipf_s}"));
            }
            if *contents < self.providers * self.per_cp {
                return fail(format!(
                    "synthetic catalog of {contents} cannot hold {} x {}",
                    self.providers, self.per_cp
                ));
            }
        }
        Ok(())
    }

    /// Parses flat `key = value` text. Blank lines and `#` comments are
    /// ignored; keys not listed here are errors.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut cfg = ScenarioConfig::default();
        let mut data: Option<String> = None;
        let mut dir: Option<PathBuf> = None;
        let (mut contents, mut requests, mut zipf_s, mut users) =
            (600usize, 50_000usize, 0.8f64, 500u32);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| SimError::Config {
                line: Some(line_no),
                message: m,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            fn num<T: FromStr>(v: &str, key: &str) -> Result<T, String> {
                v.parse()
                    .map_err(|_| format!("invalid value `{v}` for {key}"))
            }
            let parsed: Result<(), String> = (|| {
                match key {
                    "data" => data = Some(value.to_string()),
                    "dataset_dir" => dir = Some(PathBuf::from(value)),
                    "synthetic_contents" => contents = num(value, key)?,
                    "synthetic_requests" => requests = num(value, key)?,
                    "zipf_s" => zipf_s = num(value, key)?,
                    "synthetic_users" => users = num(value, key)?,
                    "window_start" => cfg.window_start = num(value, key)?,
                    "window_end" => cfg.window_end = num(value, key)?,
                    "providers" => cfg.providers = num(value, key)?,
                    "per_cp" => cfg.per_cp = num(value, key)?,
                    "z_sweep" => cfg.z_sweep = parse_list(value, key)?,
                    "tau_ratio" => cfg.tau_ratio = num(value, key)?,
                    "seed" => cfg.seed = num(value, key)?,
                    "warm_cps" => cfg.warm_cps = num(value, key)?,
                    "warmup_fraction" => cfg.warmup_fraction = num(value, key)?,
                    "arms" => cfg.arms = parse_list(value, key)?,
                    "fast" => cfg.fast = num(value, key)?,
                    "block_interval" => cfg.block_interval = num(value, key)?,
                    "fee" => cfg.fee = num(value, key)?,
                    "initial_balance" => cfg.initial_balance = num(value, key)?,
                    "refresh_every" => {
                        cfg.refresh_every = match value {
                            "off" | "none" | "0" => None,
                            v => Some(num(v, key)?),
                        }
                    }
                    "crypto" => cfg.scheme = value.parse()?,
                    "validators" => cfg.validators = num(value, key)?,
                    "consensus_timeout" => cfg.consensus_timeout = num(value, key)?,
                    "dump_z" => cfg.dump_z = Some(num(value, key)?),
                    "dump_ledger" => cfg.dump_ledger = num(value, key)?,
                    "dump_events" => cfg.dump_events = num(value, key)?,
                    other => return Err(format!("unknown key `{other}`")),
                }
                Ok(())
            })();
            parsed.map_err(err)?;
        }
        cfg.source = match data.as_deref() {
            None | Some("movielens") => DataSource::MovieLens {
                dir: dir.unwrap_or_else(|| PathBuf::from("data/ml-100k")),
            },
            Some("synthetic") => DataSource::Synthetic {
                contents,
                requests,
                zipf_s,
                users,
            },
            Some(other) => {
                return Err(SimError::Config {
                    line: None,
                    message: format!("unknown data source `{other}` (movielens|synthetic)"),
                })
            }
        };
        Ok(cfg)
    }
}

/// Comma-separated list; `a..b/step` expands to an inclusive range.
fn parse_list<T: FromStr>(value: &str, key: &str) -> Result<Vec<T>, String> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((range, step)) = item.split_once('/') {
            let (a, b) = range
                .split_once("..")
                .ok_or_else(|| format!("invalid range `{item}` for {key}"))?;
            let bad = || format!("invalid range `{item}` for {key}");
            let (a, b, step): (usize, usize, usize) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
                step.trim().parse().map_err(|_| bad())?,
            );
            if step == 0 {
                return Err(bad());
            }
            for v in (a..=b).step_by(step) {
                out.push(v.to_string().parse().map_err(|_| bad())?);
            }
        } else {
            out.push(
                item.parse()
                    .map_err(|_| format!("invalid value `{item}` for {key}"))?,
            );
        }
    }
    Ok(out)
}

/// Parses a comma list of cache sizes (`20,40` or `20..200/20`).
pub fn parse_z_sweep(value: &str) -> Result<Vec<usize>, String> {
    parse_list(value, "z_sweep")
}

pub fn parse_arms(value: &str) -> Result<Vec<Arm>, String> {
    parse_list(value, "arms")
}
