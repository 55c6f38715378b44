use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Architecture, DataSource, MetricsReport, MetricsRow, ScenarioConfig, SimError};
use crate::caching::{
    cache_lookup, extract_feature_popularity, random_order, score_library, CacheState,
    ContentLibrary, CorrelationVector, FeatureVector, Lookup,
};
use crate::consensus::{ConsensusConfig, ValidatorId};
use crate::ids::{ContentId, CpId, UserId};
use crate::ledger::{ContentMetadata, HistoryEntry, Service};
use crate::protocol::{
    AuthSession, Bcn, BcnConfig, CommitMode, ContractState, CpAccount, SmartContract, UserAccount,
};
use crate::trace::{
    load_movies, load_ratings, partition_libraries, route_requests, synth_trace_with, MovieRecord,
    RoutedRequest, SynthOptions, TraceWindow, GENRE_COUNT,
};

/// Catalog and request window a scenario replays.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: Vec<MovieRecord>,
    pub window: TraceWindow,
}

/// Loads MovieLens CSVs or generates the synthetic trace for `config.seed`.
pub fn load_dataset(config: &ScenarioConfig) -> Result<Dataset, SimError> {
    match &config.source {
        DataSource::MovieLens { dir } => Ok(Dataset {
            catalog: load_movies(&dir.join("movies.csv"))?,
            window: load_ratings(
                &dir.join("ratings.csv"),
                config.window_start,
                config.window_end,
            )?,
        }),
        DataSource::Synthetic {
            contents,
            requests,
            zipf_s,
            users,
        } => {
            let options = SynthOptions {
                users: *users,
                ..SynthOptions::default()
            };
            let (catalog, mut window) =
                synth_trace_with(*contents, *requests, *zipf_s, config.seed, options)?;
            window
                .events
                .retain(|e| e.timestamp >= config.window_start && e.timestamp < config.window_end);
            window.start = config.window_start;
            window.end = config.window_end;
            Ok(Dataset { catalog, window })
        }
    }
}

/// Everything one provider saw and did during a run.
#[derive(Debug, Clone)]
pub struct ProviderRun {
    pub cp: CpId,
    /// Launched before the evaluation period.
    pub warm: bool,
    pub library: ContentLibrary,
    pub architectures: Vec<Architecture>,
    /// Prefetch order per architecture at the start of evaluation; the
    /// Z-cache is its first Z entries.
    pub orders: BTreeMap<Architecture, Vec<ContentId>>,
    /// Correlation scores behind the feature-based orders.
    pub correlations: BTreeMap<Architecture, CorrelationVector>,
    pub requests: u64,
    /// Evaluation request indices that hit, per (architecture, z).
    pub hits: BTreeMap<(Architecture, usize), Vec<usize>>,
}

impl ProviderRun {
    pub fn cache(&self, architecture: Architecture, z: usize) -> Option<CacheState> {
        self.orders
            .get(&architecture)
            .map(|order| CacheState::from_order(&self.library, order, z))
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub report: MetricsReport,
    pub providers: Vec<ProviderRun>,
    pub warmup_requests: usize,
    pub evaluation_requests: usize,
    /// Contract records on chain from the evaluation period, per provider.
    pub committed_evaluation: BTreeMap<CpId, u64>,
    pub bcn: Bcn,
}

impl ScenarioRun {
    pub fn provider(&self, cp: CpId) -> Option<&ProviderRun> {
        self.providers.iter().find(|p| p.cp == cp)
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, SimError> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    run_scenario_on(config, &dataset)
}

/// Runs one seed per entry of `seeds` in parallel. MovieLens data is loaded
/// once and shared; synthetic traces are regenerated per seed.
pub fn run_seeds(config: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<ScenarioRun>, SimError> {
    config.validate()?;
    let shared = match config.source {
        DataSource::MovieLens { .. } => Some(load_dataset(config)?),
        DataSource::Synthetic { .. } => None,
    };
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = ScenarioConfig {
                seed,
                ..config.clone()
            };
            match &shared {
                Some(data) => run_scenario_on(&cfg, data),
                None => run_scenario(&cfg),
            }
        })
        .collect()
}

/// Drives users and contracts through the protocol layer.
struct Driver<'a> {
    config: &'a ScenarioConfig,
    bcn: Bcn,
    features: HashMap<ContentId, FeatureVector>,
    users: HashMap<u32, UserAccount>,
    sessions: HashMap<(u32, CpId), AuthSession>,
    delivered: Vec<SmartContract>,
}

impl Driver<'_> {
    fn serve(&mut self, request: &RoutedRequest, cp: &CpAccount) -> Result<(), SimError> {
        let uid = request.user_id;
        if !self.users.contains_key(&uid) {
            let mut user = UserAccount::generate(UserId(uid), self.config.scheme, self.config.seed);
            let node = ValidatorId(uid % self.config.validators);
            self.bcn.register_user(&mut user, node)?;
            self.users.insert(uid, user);
        }
        let key = (uid, request.cp_id);
        if !self.sessions.contains_key(&key) {
            let (_, cp_side) = self
                .bcn
                .authenticate(&self.users[&uid], cp)
                .map_err(|reason| SimError::Auth {
                    user: uid,
                    cp: request.cp_id,
                    reason,
                })?;
            self.sessions.insert(key, cp_side);
        }
        let session = &self.sessions[&key];
        let service = Service::Content(ContentMetadata {
            content_id: request.content,
            cp_id: request.cp_id,
            features: self.features[&request.content].clone(),
        });
        let contract = if self.config.fast {
            self.bcn.request_contract(session, cp, service)
        } else {
            self.bcn.run_contract(session, cp, service)
        }
        .map_err(|f| SimError::Contract(f.reason.to_string()))?;
        if self.config.fast {
            self.delivered.push(contract);
        } else if contract.state != ContractState::Committed {
            return Err(SimError::Integrity(format!(
                "{} ended in {:?}",
                contract.contract_id, contract.state
            )));
        }
        self.bcn.advance(1)?;
        Ok(())
    }

    /// Commits everything queued and checks each delivered contract landed.
    fn settle(&mut self) -> Result<(), SimError> {
        self.bcn.settle(&mut self.delivered)?;
        if let Some(c) = self
            .delivered
            .iter()
            .find(|c| c.state != ContractState::Committed)
        {
            return Err(SimError::Integrity(format!(
                "{} not committed after settlement",
                c.contract_id
            )));
        }
        self.delivered.clear();
        Ok(())
    }
}

fn feature_order(
    library: &ContentLibrary,
    history: &[HistoryEntry],
    own_only: bool,
) -> Result<(Vec<ContentId>, CorrelationVector), SimError> {
    let features = history
        .iter()
        .filter(|e| !own_only || e.cp_id == library.cp_id())
        .filter_map(|e| e.service.metadata().map(|m| &m.features));
    let popularity = extract_feature_popularity(features, GENRE_COUNT)?;
    let correlations = score_library(library, &popularity)?;
    Ok((correlations.ranking(), correlations))
}

fn random_cache_order(library: &ContentLibrary, seed: u64) -> Vec<ContentId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + u64::from(library.cp_id().0));
    random_order(library, &mut rng)
}

/// Rebuilds the prefetch orders of `provider` from `history`. Random orders
/// are drawn once and kept.
fn prefetch(
    provider: &mut ProviderRun,
    history: &[HistoryEntry],
    seed: u64,
) -> Result<(), SimError> {
    for &arch in &provider.architectures {
        match arch {
            Architecture::BCdn | Architecture::ConventionalOwnHistory => {
                let own = arch == Architecture::ConventionalOwnHistory;
                let (order, scores) = feature_order(&provider.library, history, own)?;
                provider.orders.insert(arch, order);
                provider.correlations.insert(arch, scores);
            }
            Architecture::ConventionalRandom => {
                if !provider.orders.contains_key(&arch) {
                    provider
                        .orders
                        .insert(arch, random_cache_order(&provider.library, seed));
                }
            }
        }
    }
    Ok(())
}

fn build_caches(
    provider: &ProviderRun,
    z_sweep: &[usize],
) -> Vec<(Architecture, usize, CacheState)> {
    provider
        .architectures
        .iter()
        .flat_map(|&arch| z_sweep.iter().map(move |&z| (arch, z)))
        .map(|(arch, z)| {
            (
                arch,
                z,
                provider
                    .cache(arch, z)
                    .expect("order built for every architecture"),
            )
        })
        .collect()
}

/// Warmup, prefetch and evaluation over an already loaded dataset.
pub fn run_scenario_on(
    config: &ScenarioConfig,
    dataset: &Dataset,
) -> Result<ScenarioRun, SimError> {
    config.validate()?;
    let assignment = partition_libraries(
        &dataset.catalog,
        config.providers,
        config.per_cp,
        config.seed,
    )?;
    let libraries = assignment.content_libraries(&dataset.catalog);
    let (warm_events, eval_events) = dataset.window.split(config.warmup_fraction);
    let warm_requests = route_requests(warm_events, &assignment);
    let eval_requests = route_requests(eval_events, &assignment);

    let bcn = Bcn::new(BcnConfig {
        commit_mode: if config.fast {
            CommitMode::Direct
        } else {
            CommitMode::Consensus
        },
        consensus: ConsensusConfig {
            validators: config.validators,
            timeout: config.consensus_timeout,
            seed: config.seed,
            scheme: config.scheme,
            record_events: config.dump_events,
            ..ConsensusConfig::default()
        },
        block_interval: config.block_interval,
        fee: config.fee,
        initial_balance: config.initial_balance,
        seed: config.seed,
        transcript: true,
    })?;
    let mut driver = Driver {
        config,
        bcn,
        features: libraries
            .iter()
            .flat_map(|l| l.contents().iter().cloned())
            .collect(),
        users: HashMap::new(),
        sessions: HashMap::new(),
        delivered: Vec::new(),
    };
    let mut accounts: Vec<CpAccount> = (0..config.providers)
        .map(|i| CpAccount::generate(CpId(i as u32), config.scheme, config.seed))
        .collect();
    let is_warm = |cp: CpId| (cp.0 as usize) < config.warm_cps;

    // Warmup: only providers already in service sell contracts.
    for account in accounts.iter_mut().filter(|a| is_warm(a.cp_id)) {
        driver.bcn.register_cp(account)?;
    }
    let mut warmup_served = 0;
    for request in warm_requests.iter().filter(|r| is_warm(r.cp_id)) {
        driver.serve(request, &accounts[request.cp_id.0 as usize])?;
        warmup_served += 1;
    }
    driver.settle()?;
    for account in accounts.iter_mut().filter(|a| !is_warm(a.cp_id)) {
        driver.bcn.register_cp(account)?;
    }

    // Prefetch from the ledger as each provider is allowed to read it.
    let mut providers: Vec<ProviderRun> = libraries
        .into_iter()
        .enumerate()
        .map(|(i, library)| ProviderRun {
            cp: library.cp_id(),
            warm: i < config.warm_cps,
            architectures: config.architectures_for(i),
            library,
            orders: BTreeMap::new(),
            correlations: BTreeMap::new(),
            requests: 0,
            hits: BTreeMap::new(),
        })
        .collect();
    for (provider, account) in providers.iter_mut().zip(&accounts) {
        let history = driver.bcn.request_history(account)?;
        prefetch(provider, &history, config.seed)?;
    }
    let mut caches: Vec<_> = providers
        .iter()
        .map(|p| build_caches(p, &config.z_sweep))
        .collect();
    let eval_start = driver.bcn.now();

    for (index, request) in eval_requests.iter().enumerate() {
        let slot = request.cp_id.0 as usize;
        driver.serve(request, &accounts[slot])?;
        let provider = &mut providers[slot];
        provider.requests += 1;
        for (arch, z, cache) in &caches[slot] {
            let hits = provider.hits.entry((*arch, *z)).or_default();
            if cache_lookup(cache, request.content)? == Lookup::Hit {
                hits.push(index);
            }
        }
        if config.refresh_every.is_some_and(|k| (index + 1) % k == 0) {
            driver.settle()?;
            for (i, (provider, account)) in providers.iter_mut().zip(&accounts).enumerate() {
                let history = driver.bcn.request_history(account)?;
                prefetch(provider, &history, config.seed)?;
                caches[i] = build_caches(provider, &config.z_sweep);
            }
        }
    }
    driver.settle()?;

    let history = driver.bcn.request_history(&accounts[0])?;
    if history.len() != warmup_served + eval_requests.len() {
        return Err(SimError::Integrity(format!(
            "{} contract records on chain for {} served requests",
            history.len(),
            warmup_served + eval_requests.len()
        )));
    }
    let mut committed_evaluation: BTreeMap<CpId, u64> =
        providers.iter().map(|p| (p.cp, 0)).collect();
    for entry in history.iter().filter(|e| e.timestamp >= eval_start) {
        *committed_evaluation.entry(entry.cp_id).or_default() += 1;
    }
    if let Some(p) = providers
        .iter()
        .find(|p| committed_evaluation[&p.cp] != p.requests)
    {
        return Err(SimError::Integrity(format!(
            "{} served {} evaluation requests but {} are on chain",
            p.cp, p.requests, committed_evaluation[&p.cp]
        )));
    }

    let mut rows = Vec::new();
    for p in &providers {
        for &arch in &p.architectures {
            for &z in &config.z_sweep {
                let hits = p.hits.get(&(arch, z)).map_or(0, Vec::len) as u64;
                rows.push(MetricsRow::new(
                    p.cp,
                    arch,
                    z,
                    hits,
                    p.requests,
                    config.tau_ratio,
                )?);
            }
        }
    }
    Ok(ScenarioRun {
        config: config.clone(),
        report: MetricsReport::new(config.tau_ratio, rows),
        providers,
        warmup_requests: warmup_served,
        evaluation_requests: eval_requests.len(),
        committed_evaluation,
        bcn: driver.bcn,
    })
}
