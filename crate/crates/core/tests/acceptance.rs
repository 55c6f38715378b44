//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line
//! straight to stdout (bypassing the test harness capture) and then asserts.
//!
//! The MovieLens criteria read `BCDN_MOVIELENS_DIR`, falling back to
//! `data/ml-100k` at the workspace root.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use bcdn::caching::{
    content_correlation, extract_feature_popularity, rank_and_prefetch, ContentLibrary,
    FeatureVector,
};
use bcdn::codec::Encoder;
use bcdn::consensus::ValidatorId;
use bcdn::consensus::{Behavior, Cluster, ConsensusConfig, ConsensusError};
use bcdn::crypto::{self, Scheme};
use bcdn::ids::{ContentId, CpId, UserId};
use bcdn::ledger::{verify_encoded, Chain, ContentMetadata, Service};
use bcdn::protocol::{
    auth_confirm, auth_finalize, auth_initiate_with, auth_respond, AuthFailure, AuthMessage,
    AuthSession, AuthState, Bcn, BcnConfig, CommitMode, CpAccount, Nonce, UserAccount,
};
use bcdn::sim::{run_scenario, run_seeds, Architecture, Arm, ScenarioConfig, ScenarioRun};
use bcdn::trace::synth_trace;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, ok: bool, detail: impl Display) {
    let line = format!(
        "criterion {n}: {} | {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {n} failed: {detail}");
}

fn movielens_dir() -> PathBuf {
    std::env::var_os("BCDN_MOVIELENS_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k"))
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const PER_SEED_BUDGET: Duration = Duration::from_secs(120);

fn desk_config() -> ScenarioConfig {
    ScenarioConfig {
        fast: true,
        providers: 3,
        per_cp: 200,
        z_sweep: (1..=10).map(|k| 20 * k).collect(),
        warmup_fraction: 0.5,
        warm_cps: 1,
        tau_ratio: 4.0,
        arms: vec![Arm::BCdn, Arm::Conventional],
        ..ScenarioConfig::movielens(movielens_dir())
    }
}

struct DeskRuns {
    runs: Vec<ScenarioRun>,
    elapsed: Duration,
}

/// The five-seed MovieLens sweep shared by criteria 1, 2 and 5.
fn desk_runs() -> &'static Result<DeskRuns, String> {
    static RUNS: OnceLock<Result<DeskRuns, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let runs = run_seeds(&desk_config(), &SEEDS)
            .map_err(|e| format!("{} : {e}", movielens_dir().display()))?;
        Ok(DeskRuns {
            runs,
            elapsed: start.elapsed(),
        })
    })
}

fn cold_cps(runs: &[ScenarioRun]) -> Vec<CpId> {
    runs[0]
        .providers
        .iter()
        .filter(|p| !p.warm)
        .map(|p| p.cp)
        .collect()
}

/// Mean over seeds of a metric for one (cp, architecture, z) cell.
fn seed_mean(
    runs: &[ScenarioRun],
    cp: CpId,
    arch: Architecture,
    z: usize,
    metric: fn(&bcdn::sim::MetricsRow) -> f64,
) -> f64 {
    runs.iter()
        .map(|r| metric(r.report.row(cp, arch, z).expect("row present")))
        .sum::<f64>()
        / runs.len() as f64
}

#[test]
fn criterion_01_cold_provider_hit_ratio() {
    let desk = match desk_runs() {
        Ok(d) => d,
        Err(e) => return verdict(1, false, format!("scenario did not run: {e}")),
    };
    let runs = &desk.runs;
    let cfg = desk_config();
    let cold = cold_cps(runs);
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut per_seed_violations = 0;
    for &cp in &cold {
        for &z in &cfg.z_sweep {
            let b = seed_mean(runs, cp, Architecture::BCdn, z, |r| r.chr);
            let r = seed_mean(runs, cp, Architecture::ConventionalRandom, z, |r| r.chr);
            if z < cfg.per_cp {
                min_margin = min_margin.min(b - r);
                if b <= r {
                    failures.push(format!("{cp} z={z}: {b:.4} <= {r:.4}"));
                }
            } else if b != 1.0 || r != 1.0 {
                failures.push(format!("{cp} z={z}: full cache gives {b} / {r}"));
            }
            for run in runs.iter().filter(|_| z < cfg.per_cp) {
                let rb = run.report.row(cp, Architecture::BCdn, z).unwrap().chr;
                let rr = run
                    .report
                    .row(cp, Architecture::ConventionalRandom, z)
                    .unwrap()
                    .chr;
                per_seed_violations += usize::from(rb <= rr);
            }
        }
    }
    let half = cfg.half_library();
    let gains: Vec<f64> = cold
        .iter()
        .flat_map(|&cp| {
            runs.iter().map(move |run| {
                run.report.row(cp, Architecture::BCdn, half).unwrap().chr
                    - run
                        .report
                        .row(cp, Architecture::ConventionalRandom, half)
                        .unwrap()
                        .chr
            })
        })
        .collect();
    let improvement = gains.iter().sum::<f64>() / gains.len() as f64;
    let ok_trend = failures.is_empty();
    let ok_gain = improvement >= 0.10;
    let ok_time = desk.elapsed < PER_SEED_BUDGET;
    verdict(
        1,
        ok_trend && ok_gain && ok_time,
        format!(
            "trend {} (min margin {:.4}, per-seed ties/inversions {}), mean gain at z={half} {:.2} pp (need >= 10.00), \
             {:.2?} for {} seeds{}",
            if ok_trend { "ok" } else { "broken" },
            min_margin,
            per_seed_violations,
            improvement * 100.0,
            desk.elapsed,
            SEEDS.len(),
            if failures.is_empty() { String::new() } else { format!(" | {}", failures.join("; ")) },
        ),
    );
}

#[test]
fn criterion_02_cold_provider_delivery_time() {
    let desk = match desk_runs() {
        Ok(d) => d,
        Err(e) => return verdict(2, false, format!("scenario did not run: {e}")),
    };
    let runs = &desk.runs;
    let cfg = desk_config();
    let mut failures = Vec::new();
    for &cp in &cold_cps(runs) {
        for &z in &cfg.z_sweep {
            let b = seed_mean(runs, cp, Architecture::BCdn, z, |r| r.norm_delivery_time);
            let r = seed_mean(runs, cp, Architecture::ConventionalRandom, z, |r| {
                r.norm_delivery_time
            });
            let ok = if z < cfg.per_cp {
                b < r
            } else {
                b == 1.0 && r == 1.0
            };
            if !ok {
                failures.push(format!("{cp} z={z}: {b:.4} vs {r:.4}"));
            }
        }
    }
    let mut worst = 0.0f64;
    let mut rows = 0;
    for run in runs {
        for r in &run.report.rows {
            worst = worst.max((r.norm_delivery_time - (1.0 + (1.0 - r.chr) * cfg.tau_ratio)).abs());
            rows += 1;
        }
    }
    let ok = failures.is_empty() && worst <= 1e-12;
    verdict(
        2,
        ok,
        format!(
            "BCdn below random at every z<{}: {}; identity max error {worst:e} over {rows} rows{}",
            cfg.per_cp,
            failures.is_empty(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(" | {}", failures.join("; "))
            }
        ),
    );
}

/// Brute-force cosine of a 0/1 vector with a weight vector.
fn cosine_oracle(f: &[bool], q: &[f64]) -> f64 {
    let fx: Vec<f64> = f.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let dot: f64 = fx.iter().zip(q).map(|(a, b)| a * b).sum();
    let nf = fx.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nq = q.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nf == 0.0 || nq == 0.0 {
        0.0
    } else {
        dot / (nf * nq)
    }
}

#[test]
fn criterion_03_correlation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut special_failures = Vec::new();
    for i in 0..1000 {
        let l = if i % 2 == 0 { 3 } else { 18 };
        let f: Vec<bool> = (0..l).map(|_| rng.gen_bool(0.4)).collect();
        let q: Vec<f64> = (0..l)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let got = content_correlation(&FeatureVector::from_bits(f.clone()), &q).unwrap();
        worst = worst.max((got - cosine_oracle(&f, &q)).abs());

        // Parallel: q is a positive multiple of a nonzero f.
        let mut fp = f.clone();
        fp[rng.gen_range(0..l)] = true;
        let c = rng.gen_range(0.01..10.0);
        let qp: Vec<f64> = fp.iter().map(|&b| if b { c } else { 0.0 }).collect();
        let par = content_correlation(&FeatureVector::from_bits(fp.clone()), &qp).unwrap();
        // Orthogonal: q lives on the complement of f.
        let mut fo = f.clone();
        let free = rng.gen_range(0..l);
        fo[free] = false;
        let qo: Vec<f64> = fo
            .iter()
            .enumerate()
            .map(|(j, &b)| if b || j != free { 0.0 } else { c })
            .collect();
        let orth = content_correlation(&FeatureVector::from_bits(fo), &qo).unwrap();
        let zero_f = content_correlation(&FeatureVector::zeros(l), &q).unwrap();
        let zero_q = content_correlation(&FeatureVector::from_bits(fp), &vec![0.0; l]).unwrap();
        if par != 1.0 || orth != 0.0 || zero_f != 0.0 || zero_q != 0.0 {
            special_failures.push(format!(
                "pair {i}: parallel {par} orthogonal {orth} zero {zero_f}/{zero_q}"
            ));
        }
    }
    let ok = worst <= 1e-9 && special_failures.is_empty();
    verdict(
        3,
        ok,
        format!(
            "1000 pairs, max |error| {worst:e}, exact special cases {}{}",
            special_failures.is_empty(),
            special_failures
                .first()
                .map(|s| format!(" | {s}"))
                .unwrap_or_default()
        ),
    );
}

/// Top-z by exact comparison of d/sqrt(k) with integer feature counts
/// (compares d_a^2 k_b against d_b^2 k_a), lower id first on ties.
fn prefetch_oracle(contents: &[(u32, Vec<usize>)], counts: &[u64], z: usize) -> BTreeSet<u32> {
    let key = |idx: &Vec<usize>| -> (u128, u128) {
        let d: u64 = idx.iter().map(|&l| counts[l]).sum();
        (u128::from(d), idx.len() as u128)
    };
    let mut order: Vec<&(u32, Vec<usize>)> = contents.iter().collect();
    order.sort_by(|a, b| {
        let ((da, ka), (db, kb)) = (key(&a.1), key(&b.1));
        // Score zero when either side is empty.
        let sa = if ka == 0 { (0, 1) } else { (da * da, ka) };
        let sb = if kb == 0 { (0, 1) } else { (db * db, kb) };
        (sb.0 * sa.1).cmp(&(sa.0 * sb.1)).then(a.0.cmp(&b.0))
    });
    order.into_iter().take(z).map(|c| c.0).collect()
}

#[test]
fn criterion_04_prefetch_oracle() {
    const L: usize = 18;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = Vec::new();
    let mut checks = 0;
    for lib in 0..100 {
        let n = rng.gen_range(1..=50);
        // A small pool of feature sets makes exact ties common.
        let pool: Vec<Vec<usize>> = (0..rng.gen_range(1..=12))
            .map(|_| (0..L).filter(|_| rng.gen_bool(0.2)).collect())
            .collect();
        let mut ids: Vec<u32> = (0..1000).collect();
        ids.shuffle(&mut rng);
        let contents: Vec<(u32, Vec<usize>)> = ids[..n]
            .iter()
            .map(|&id| (id, pool[rng.gen_range(0..pool.len())].clone()))
            .collect();
        let library = ContentLibrary::new(
            CpId(0),
            contents
                .iter()
                .map(|(id, idx)| (ContentId(*id), FeatureVector::from_indices(L, idx).unwrap()))
                .collect(),
        )
        .unwrap();
        let history: Vec<FeatureVector> = (0..if lib % 10 == 0 {
            0
        } else {
            rng.gen_range(1..200)
        })
            .map(|_| {
                let idx: Vec<usize> = (0..L).filter(|_| rng.gen_bool(0.15)).collect();
                FeatureVector::from_indices(L, &idx).unwrap()
            })
            .collect();
        let mut counts = vec![0u64; L];
        for h in &history {
            for l in h.indices() {
                counts[l] += 1;
            }
        }
        let popularity = extract_feature_popularity(&history, L).unwrap();
        for z in [0, 1, n / 2, n] {
            let got: BTreeSet<u32> = rank_and_prefetch(&library, &popularity, z)
                .unwrap()
                .resident()
                .iter()
                .map(|c| c.0)
                .collect();
            let want = prefetch_oracle(&contents, &counts, z);
            checks += 1;
            if got != want {
                mismatches.push(format!("library {lib} n={n} z={z}"));
            }
        }
    }
    verdict(
        4,
        mismatches.is_empty(),
        format!(
            "{checks} (library, z) checks, {} mismatches{}",
            mismatches.len(),
            mismatches
                .first()
                .map(|s| format!(" | first: {s}"))
                .unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_05_monotone_hit_ratio() {
    let desk = match desk_runs() {
        Ok(d) => d,
        Err(e) => return verdict(5, false, format!("scenario did not run: {e}")),
    };
    let cfg = desk_config();
    let mut failures = Vec::new();
    let mut curves = 0;
    for run in &desk.runs {
        for p in &run.providers {
            for &arch in &p.architectures {
                curves += 1;
                for w in cfg.z_sweep.windows(2) {
                    let (lo, hi) = (&p.hits[&(arch, w[0])], &p.hits[&(arch, w[1])]);
                    let lo_chr = run.report.row(p.cp, arch, w[0]).unwrap().chr;
                    let hi_chr = run.report.row(p.cp, arch, w[1]).unwrap().chr;
                    let hi_set: BTreeSet<&usize> = hi.iter().collect();
                    if lo_chr > hi_chr || !lo.iter().all(|i| hi_set.contains(i)) {
                        failures.push(format!(
                            "seed {} {} {arch} z={}->{}",
                            run.config.seed, p.cp, w[0], w[1]
                        ));
                    }
                }
            }
        }
    }
    verdict(
        5,
        failures.is_empty(),
        format!(
            "{curves} curves over {} seeds{}",
            desk.runs.len(),
            failures
                .first()
                .map(|s| format!(" | {s}"))
                .unwrap_or_default()
        ),
    );
}

/// A chain of exactly `blocks` blocks with registrations and contracts.
fn random_chain(rng: &mut ChaCha8Rng, blocks: usize) -> Chain {
    let mut bcn = Bcn::new(BcnConfig {
        commit_mode: CommitMode::Direct,
        seed: rng.gen(),
        transcript: false,
        ..BcnConfig::default()
    })
    .unwrap();
    let mut cps: Vec<CpAccount> = Vec::new();
    let mut users: Vec<UserAccount> = Vec::new();
    while bcn.chain().len() < blocks {
        let room = blocks - bcn.chain().len();
        match rng.gen_range(0..3) {
            0 => {
                let mut cp = CpAccount::generate(CpId(cps.len() as u32), Scheme::Sim, 9);
                bcn.register_cp(&mut cp).unwrap();
                cps.push(cp);
            }
            1 => {
                let mut u = UserAccount::generate(UserId(users.len() as u32), Scheme::Sim, 9);
                bcn.register_user(&mut u, ValidatorId(rng.gen_range(0..4)))
                    .unwrap();
                users.push(u);
            }
            _ if room >= 2 && !cps.is_empty() && !users.is_empty() => {
                let cp = cps.choose(rng).unwrap().clone();
                let user = users.choose(rng).unwrap().clone();
                let (_, session) = bcn.authenticate(&user, &cp).unwrap();
                let content = rng.gen_range(0..500);
                let service = Service::Content(ContentMetadata {
                    content_id: ContentId(content),
                    cp_id: cp.cp_id,
                    features: FeatureVector::from_indices(18, &[content as usize % 18]).unwrap(),
                });
                bcn.run_contract(&session, &cp, service).unwrap();
            }
            _ => {}
        }
    }
    bcn.chain().clone()
}

#[test]
fn criterion_06_tamper_evidence() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut undetected = Vec::new();
    let mut clean_failures = 0;
    let mut mutations = 0;
    for c in 0..50 {
        let n = rng.gen_range(1..=20);
        let chain = random_chain(&mut rng, n);
        let bytes = chain.to_bytes();
        if !verify_encoded(&bytes) || !chain.verify() {
            clean_failures += 1;
        }
        for _ in 0..20 {
            let offset = rng.gen_range(0..bytes.len());
            let mut bad = bytes.clone();
            bad[offset] ^= rng.gen_range(1..=255u8);
            mutations += 1;
            if verify_encoded(&bad) {
                undetected.push(format!("chain {c} ({n} blocks) offset {offset}"));
            }
        }
    }
    verdict(
        6,
        undetected.is_empty() && clean_failures == 0,
        format!(
            "50 chains, {mutations} single-byte mutations, {} undetected, {clean_failures} clean chains rejected{}",
            undetected.len(),
            undetected.first().map(|s| format!(" | {s}")).unwrap_or_default()
        ),
    );
}

struct PbftOutcome {
    safe: bool,
    decided: usize,
    worst_latency: u64,
    stalled: bool,
}

fn pbft_run(seed: u64, faults: &[(u32, Behavior)], blocks: u32) -> PbftOutcome {
    let mut config = ConsensusConfig::default().with_seed(seed);
    for &(id, b) in faults {
        config = config.with_fault(id, b);
    }
    let mut cluster = Cluster::new(config).unwrap();
    let mut chain = Chain::genesis(cluster.public_keys());
    let mut out = PbftOutcome {
        safe: true,
        decided: 0,
        worst_latency: 0,
        stalled: false,
    };
    for i in 0..blocks {
        let tx = CpAccount::generate(CpId(i), Scheme::Sim, seed).registration_tx();
        let block = chain.next_block(vec![tx], cluster.tick());
        match cluster.commit_block(&mut chain, block) {
            Ok(d) => {
                out.decided += 1;
                out.worst_latency = out.worst_latency.max(d.latency);
            }
            Err(ConsensusError::Stalled { .. }) => {
                out.stalled = true;
                break;
            }
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    out.safe = cluster.is_safe();
    out
}

#[test]
fn criterion_07_pbft_safety_and_liveness() {
    const BLOCKS: u32 = 3;
    let bound = ConsensusConfig::default().liveness_bound();
    let mut failures = Vec::new();
    let mut worst = 0;
    for (name, behavior) in [
        ("honest", None),
        ("silent", Some(Behavior::Silent)),
        ("equivocating", Some(Behavior::Equivocating)),
    ] {
        for seed in 0..100u64 {
            let faults: Vec<(u32, Behavior)> = behavior
                .map(|b| ((seed % 4) as u32, b))
                .into_iter()
                .collect();
            let o = pbft_run(seed, &faults, BLOCKS);
            worst = worst.max(o.worst_latency);
            if !o.safe {
                failures.push(format!("{name} seed {seed}: safety violated"));
            }
            if o.decided != BLOCKS as usize || o.worst_latency > bound {
                failures.push(format!(
                    "{name} seed {seed}: {} of {BLOCKS} decided, latency {}",
                    o.decided, o.worst_latency
                ));
            }
        }
    }
    let mut two_fault_stalls = 0;
    let kinds = [Behavior::Silent, Behavior::Equivocating];
    for seed in 0..100u64 {
        let a = (seed % 4) as u32;
        let b = ((seed / 4 + 1 + u64::from(a)) % 4) as u32;
        let b = if b == a { (a + 1) % 4 } else { b };
        let faults = [
            (a, kinds[(seed % 2) as usize]),
            (b, kinds[((seed / 2) % 2) as usize]),
        ];
        let o = pbft_run(seed, &faults, BLOCKS);
        two_fault_stalls += usize::from(o.stalled);
        if !o.safe {
            failures.push(format!("two faults seed {seed}: safety violated"));
        }
    }
    verdict(
        7,
        failures.is_empty(),
        format!(
            "300 runs with <= 1 fault, worst latency {worst} (bound {bound}); 100 runs with 2 faults safe, {two_fault_stalls} stalled{}",
            failures.first().map(|s| format!(" | {s}")).unwrap_or_default()
        ),
    );
}

struct HandshakeWorld {
    bcn: Bcn,
    cps: Vec<CpAccount>,
    users: Vec<UserAccount>,
    strangers: Vec<UserAccount>,
}

fn handshake_world(scheme: Scheme) -> HandshakeWorld {
    let mut bcn = Bcn::new(BcnConfig {
        commit_mode: CommitMode::Direct,
        ..BcnConfig::default()
    })
    .unwrap();
    let mut cps: Vec<_> = (0..3)
        .map(|i| CpAccount::generate(CpId(i), scheme, 8))
        .collect();
    let mut users: Vec<_> = (0..20)
        .map(|i| UserAccount::generate(UserId(i), scheme, 8))
        .collect();
    for cp in &mut cps {
        bcn.register_cp(cp).unwrap();
    }
    for u in &mut users {
        bcn.register_user(u, ValidatorId(u.user_id.0 % 4)).unwrap();
    }
    let strangers = (100..105)
        .map(|i| UserAccount::generate(UserId(i), scheme, 8))
        .collect();
    HandshakeWorld {
        bcn,
        cps,
        users,
        strangers,
    }
}

fn v2_plaintext(user: &UserAccount, nonce: Nonce, cp: &CpAccount) -> Vec<u8> {
    let mut enc = Encoder::with_domain("bcdn/auth-v2");
    enc.fixed(user.vid.as_bytes())
        .u64(nonce.0)
        .bytes(cp.keypair.public_key.as_bytes());
    enc.finish()
}

#[test]
fn criterion_08_handshake_properties() {
    let worlds = [
        handshake_world(Scheme::Sim),
        handshake_world(Scheme::Secure),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    for i in 0..1000 {
        let w = &worlds[i % 2];
        let chain = w.bcn.chain();
        let ui = rng.gen_range(0..w.users.len());
        let (user, cp) = (&w.users[ui], &w.cps[rng.gen_range(0..w.cps.len())]);
        let n = if i % 50 == 0 {
            u64::MAX - (i as u64 % 3)
        } else {
            rng.gen()
        };

        // Happy path.
        let (mut us, v1) = auth_initiate_with(user, Nonce(n));
        let mut cs = AuthSession::provider();
        let happy = auth_respond(&mut cs, cp, &v1, chain).and_then(|v2| {
            let v3 = auth_confirm(&mut us, user, &v2)?;
            auth_finalize(&mut cs, cp, &v3)?;
            Ok((v2, v3))
        });
        match happy {
            Ok((AuthMessage::V2 { nonce_plus_1, .. }, AuthMessage::V3 { nonce_plus_2, .. })) => {
                check(
                    us.state() == AuthState::Authenticated
                        && cs.state() == AuthState::Authenticated
                        && matches!(v1, AuthMessage::V1 { nonce, .. } if nonce == Nonce(n))
                        && nonce_plus_1 == Nonce(n.wrapping_add(1))
                        && nonce_plus_2 == Nonce(n.wrapping_add(2)),
                    format!("session {i}: happy path state or nonce chain"),
                )
            }
            other => check(
                false,
                format!("session {i}: happy path failed: {:?}", other.err()),
            ),
        }

        // Unknown vid.
        let stranger = &w.strangers[i % w.strangers.len()];
        let (_, v1) = auth_initiate_with(stranger, Nonce(n));
        let mut cs = AuthSession::provider();
        let r = auth_respond(&mut cs, cp, &v1, chain);
        check(
            r.err() == Some(AuthFailure::UnknownVid)
                && cs.state() == AuthState::Failed(AuthFailure::UnknownVid),
            format!("session {i}: unknown vid"),
        );

        // Bad signature: V1 signed by a different registered user.
        let other = &w.users[(ui + 1) % w.users.len()];
        let (_, forged_src) = auth_initiate_with(other, Nonce(n));
        let AuthMessage::V1 { signature, .. } = forged_src else {
            unreachable!()
        };
        let forged = AuthMessage::V1 {
            vid: user.vid,
            nonce: Nonce(n),
            signature,
        };
        let mut cs = AuthSession::provider();
        let r = auth_respond(&mut cs, cp, &forged, chain);
        check(
            r.err() == Some(AuthFailure::BadSignature) && !cs.is_authenticated(),
            format!("session {i}: bad signature"),
        );

        // Stale nonce: a V2 answering an earlier challenge.
        let old = n.wrapping_add(rng.gen_range(3..1000));
        let (_, old_v1) = auth_initiate_with(user, Nonce(old));
        let stale_v2 = auth_respond(&mut AuthSession::provider(), cp, &old_v1, chain).unwrap();
        let (mut us, _) = auth_initiate_with(user, Nonce(n));
        let r = auth_confirm(&mut us, user, &stale_v2);
        check(
            r.err() == Some(AuthFailure::BadNonce)
                && us.state() == AuthState::Failed(AuthFailure::BadNonce),
            format!("session {i}: stale nonce"),
        );

        // Wrong-key ciphertext: a well-formed V2 sealed for someone else.
        let (mut us, v1) = auth_initiate_with(user, Nonce(n));
        let mut cs = AuthSession::provider();
        auth_respond(&mut cs, cp, &v1, chain).unwrap();
        let sealed = crypto::encrypt(
            &other.keypair.public_key,
            &v2_plaintext(user, Nonce(n).plus(1), cp),
        )
        .unwrap();
        let wrong = AuthMessage::V2 {
            vid: user.vid,
            nonce_plus_1: Nonce(n).plus(1),
            ciphertext: sealed,
        };
        let r = auth_confirm(&mut us, user, &wrong);
        check(
            r.err() == Some(AuthFailure::BadCiphertext) && !us.is_authenticated(),
            format!("session {i}: wrong-key ciphertext"),
        );
    }
    let reasons: std::collections::HashSet<AuthFailure> = [
        AuthFailure::UnknownVid,
        AuthFailure::BadSignature,
        AuthFailure::BadNonce,
        AuthFailure::BadCiphertext,
    ]
    .into();
    verdict(
        8,
        failures.is_empty() && reasons.len() == 4,
        format!(
            "1000 sessions x (happy + 4 fault classes), {} failures{}",
            failures.len(),
            failures
                .first()
                .map(|s| format!(" | {s}"))
                .unwrap_or_default()
        ),
    );
}

fn artifact_bytes(run: &ScenarioRun) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    run.write_artifacts(dir.path())
        .unwrap()
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn criterion_09_determinism() {
    let synthetic = ScenarioConfig {
        per_cp: 40,
        z_sweep: vec![0, 10, 20, 40],
        seed: 11,
        dump_events: true,
        ..ScenarioConfig::synthetic(200, 1_500, 0.9)
    };
    let movielens = ScenarioConfig {
        seed: 3,
        ..desk_config()
    };
    let mut details = Vec::new();
    let mut ok = true;
    for (name, cfg) in [
        ("synthetic/consensus", synthetic),
        ("movielens/fast", movielens),
    ] {
        let outcome = run_scenario(&cfg).and_then(|a| Ok((a, run_scenario(&cfg)?)));
        match outcome {
            Ok((a, b)) => {
                let (fa, fb) = (artifact_bytes(&a), artifact_bytes(&b));
                let same = fa == fb;
                ok &= same;
                let bytes: usize = fa.values().map(Vec::len).sum();
                details.push(format!(
                    "{name}: {} files, {bytes} bytes, identical {same}",
                    fa.len()
                ));
            }
            Err(e) => {
                ok = false;
                details.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(9, ok, details.join("; "));
}

#[test]
fn criterion_10_zipf_rank_one_frequency() {
    let harmonic: f64 = (1..=100).map(|k| 1.0 / k as f64).sum();
    let expected = 1.0 / harmonic;
    let (_, window) = synth_trace(100, 100_000, 1.0, 10).unwrap();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for e in &window.events {
        *counts.entry(e.movie_id).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let freq = top as f64 / window.events.len() as f64;
    verdict(
        10,
        window.events.len() == 100_000 && (freq - expected).abs() <= 0.01,
        format!("rank-1 frequency {freq:.4}, expected {expected:.4} +/- 0.01"),
    );
}
