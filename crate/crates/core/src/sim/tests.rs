use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::ids::CpId;

fn small(per_cp: usize, z_sweep: Vec<usize>) -> ScenarioConfig {
    ScenarioConfig {
        per_cp,
        z_sweep,
        fast: true,
        ..ScenarioConfig::synthetic(150, 3_000, 0.8)
    }
}

#[test]
fn chr_examples() {
    assert_eq!(compute_chr(0, 100).unwrap(), 0.0);
    assert_eq!(compute_chr(100, 100).unwrap(), 1.0);
    assert_eq!(compute_chr(37, 100).unwrap(), 0.37);
    assert_eq!(compute_chr(0, 0).unwrap(), 0.0);
    assert!(matches!(
        compute_chr(5, 3),
        Err(SimError::Accounting {
            hits: 5,
            requests: 3
        })
    ));
}

#[test]
fn delivery_time_matches_per_request_average() {
    assert_eq!(compute_norm_delivery_time(1.0, 4.0).unwrap(), 1.0);
    assert_eq!(compute_norm_delivery_time(0.0, 4.0).unwrap(), 5.0);
    // 10 requests, 6 hits at cost 1 and 4 misses at cost 1 + 2.
    let costs: Vec<f64> = (0..10).map(|i| if i < 6 { 1.0 } else { 3.0 }).collect();
    let oracle = costs.iter().sum::<f64>() / costs.len() as f64;
    assert!((compute_norm_delivery_time(0.6, 2.0).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn delivery_time_rejects_bad_domain() {
    for (chr, tau) in [
        (-0.1, 1.0),
        (1.1, 1.0),
        (0.5, 0.0),
        (0.5, -2.0),
        (f64::NAN, 1.0),
        (0.5, f64::INFINITY),
    ] {
        assert!(
            matches!(
                compute_norm_delivery_time(chr, tau),
                Err(SimError::Domain(_))
            ),
            "{chr} {tau}"
        );
    }
}

proptest! {
    #[test]
    fn affine_link_holds(requests in 0u64..10_000, frac in 0.0f64..=1.0, tau in 0.01f64..100.0) {
        let hits = (requests as f64 * frac).floor() as u64;
        let row = MetricsRow::new(CpId(0), Architecture::BCdn, 1, hits, requests, tau).unwrap();
        let expected = if requests == 0 { 0.0 } else { hits as f64 / requests as f64 };
        prop_assert_eq!(row.chr, expected);
        prop_assert!((row.norm_delivery_time - 1.0 - (1.0 - row.chr) * tau).abs() < 1e-12);
        prop_assert!(row.norm_delivery_time >= 1.0);
    }
}

#[test]
fn zero_cache_always_misses() {
    let run = run_scenario(&small(30, vec![0])).unwrap();
    assert!(!run.report.rows.is_empty());
    for r in &run.report.rows {
        assert_eq!(r.hits, 0);
        assert_eq!(r.chr, 0.0);
        assert_eq!(r.norm_delivery_time, 1.0 + run.config.tau_ratio);
    }
}

#[test]
fn full_cache_always_hits() {
    let run = run_scenario(&small(30, vec![30])).unwrap();
    for r in &run.report.rows {
        assert!(r.requests > 0);
        assert_eq!(r.hits, r.requests);
        assert_eq!(r.norm_delivery_time, 1.0);
    }
}

#[test]
fn chr_is_monotone_and_hit_sets_nest() {
    let cfg = ScenarioConfig {
        arms: vec![
            Arm::BCdn,
            Arm::Conventional,
            Arm::All(Architecture::ConventionalOwnHistory),
        ],
        ..small(30, vec![0, 5, 10, 15, 20, 25, 30])
    };
    let run = run_scenario(&cfg).unwrap();
    for (cp, arch) in run.report.curves() {
        let series = run.report.series(cp, arch);
        for w in series.windows(2) {
            assert!(w[0].chr <= w[1].chr, "{cp} {arch}");
            assert!(w[0].norm_delivery_time >= w[1].norm_delivery_time);
        }
        let p = run.provider(cp).unwrap();
        for w in cfg.z_sweep.windows(2) {
            let lo: BTreeSet<_> = p.hits[&(arch, w[0])].iter().collect();
            let hi: BTreeSet<_> = p.hits[&(arch, w[1])].iter().collect();
            assert!(lo.is_subset(&hi));
        }
    }
}

#[test]
fn conventional_arm_maps_warm_and_cold_providers() {
    let run = run_scenario(&small(30, vec![10])).unwrap();
    let archs: Vec<Vec<Architecture>> = run
        .providers
        .iter()
        .map(|p| p.architectures.clone())
        .collect();
    assert_eq!(
        archs[0],
        vec![Architecture::BCdn, Architecture::ConventionalOwnHistory]
    );
    assert_eq!(
        archs[1],
        vec![Architecture::BCdn, Architecture::ConventionalRandom]
    );
    assert_eq!(archs[2], archs[1]);
    assert!(run.providers[0].warm && !run.providers[1].warm);
}

#[test]
fn single_provider_bcdn_equals_own_history() {
    let cfg = ScenarioConfig {
        providers: 1,
        arms: vec![Arm::BCdn, Arm::All(Architecture::ConventionalOwnHistory)],
        ..small(40, vec![0, 10, 20, 40])
    };
    let run = run_scenario(&cfg).unwrap();
    let p = &run.providers[0];
    for &z in &cfg.z_sweep {
        let a = p.cache(Architecture::BCdn, z).unwrap();
        let b = p.cache(Architecture::ConventionalOwnHistory, z).unwrap();
        assert_eq!(a.resident(), b.resident());
        assert_eq!(
            run.report.row(p.cp, Architecture::BCdn, z).unwrap().hits,
            run.report
                .row(p.cp, Architecture::ConventionalOwnHistory, z)
                .unwrap()
                .hits
        );
    }
}

#[test]
fn cold_providers_see_only_the_warm_history() {
    let run = run_scenario(&small(30, vec![10])).unwrap();
    let history = run
        .bcn
        .request_history(&crate::protocol::CpAccount::generate(
            CpId(1),
            run.config.scheme,
            run.config.seed,
        ))
        .unwrap();
    let warm: Vec<_> = history.iter().take(run.warmup_requests).collect();
    assert!(!warm.is_empty());
    assert!(warm.iter().all(|e| e.cp_id == CpId(0)));
    // A cold provider's own-history ranking would be empty: BCdn borrowed CP0's.
    let scores = &run.providers[1].correlations[&Architecture::BCdn];
    assert!(scores.iter().any(|(_, s)| s > 0.0));
}

#[test]
fn every_evaluation_request_is_a_committed_contract() {
    let run = run_scenario(&small(30, vec![10])).unwrap();
    let on_chain: u64 = run.committed_evaluation.values().sum();
    assert_eq!(on_chain as usize, run.evaluation_requests);
    for p in &run.providers {
        assert_eq!(run.committed_evaluation[&p.cp], p.requests);
    }
    assert_eq!(
        run.bcn.chain().contract_records(),
        run.warmup_requests + run.evaluation_requests
    );
    assert!(run.bcn.chain().verify());
}

#[test]
fn consensus_path_gives_the_same_metrics_as_fast_path() {
    let base = ScenarioConfig {
        dump_events: true,
        ..ScenarioConfig::synthetic(60, 240, 0.8)
    };
    let fast = ScenarioConfig {
        fast: true,
        per_cp: 20,
        z_sweep: vec![0, 5, 10, 20],
        ..base.clone()
    };
    let full = ScenarioConfig {
        fast: false,
        ..fast.clone()
    };
    let a = run_scenario(&fast).unwrap();
    let b = run_scenario(&full).unwrap();
    assert_eq!(a.report, b.report);
    assert!(!b.bcn.cluster().events().is_empty());
    assert!(b.bcn.chain().verify());
    assert!(b.bcn.cluster().is_safe());
}

#[test]
fn refresh_keeps_hit_sets_nested() {
    let cfg = ScenarioConfig {
        refresh_every: Some(100),
        ..small(30, vec![5, 10, 20])
    };
    let run = run_scenario(&cfg).unwrap();
    for (cp, arch) in run.report.curves() {
        let s = run.report.series(cp, arch);
        assert!(s.windows(2).all(|w| w[0].hits <= w[1].hits));
    }
}

#[test]
fn report_cardinality_is_providers_times_sizes_times_architectures() {
    let cfg = ScenarioConfig {
        arms: vec![Arm::BCdn, Arm::All(Architecture::ConventionalRandom)],
        ..small(30, vec![6, 12, 18, 24, 30])
    };
    let run = run_scenario(&cfg).unwrap();
    assert_eq!(run.report.rows.len(), 30);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&run.report, dir.path()).unwrap();
    let table = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(table.lines().count(), 31);
    assert_eq!(
        table.lines().next().unwrap(),
        "cp,architecture,z,chr,norm_delivery_time,requests,hits"
    );
    let plot = std::fs::read_to_string(dir.path().join(CHR_PLOT_FILE)).unwrap();
    assert_eq!(plot.lines().count(), 6);
    assert_eq!(plot.lines().next().unwrap().split('\t').count(), 7);
}

#[test]
fn empty_sweep_gives_header_only_table() {
    let run = run_scenario(&small(30, vec![])).unwrap();
    assert!(run.report.rows.is_empty());
    let mut out = Vec::new();
    write_metrics(&run.report, &mut out).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "cp,architecture,z,chr,norm_delivery_time,requests,hits\n"
    );
}

#[test]
fn rerun_writes_identical_files() {
    let cfg = small(30, vec![5, 15, 30]);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = run_scenario(&cfg)
        .unwrap()
        .write_artifacts(a.path())
        .unwrap();
    run_scenario(&cfg)
        .unwrap()
        .write_artifacts(b.path())
        .unwrap();
    assert!(files_a.len() >= 6);
    for f in files_a {
        let name = f.file_name().unwrap();
        assert_eq!(
            std::fs::read(&f).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn different_seeds_draw_different_libraries() {
    let a = run_scenario(&small(30, vec![10])).unwrap();
    let b = run_scenario(&ScenarioConfig {
        seed: 9,
        ..small(30, vec![10])
    })
    .unwrap();
    assert_ne!(a.providers[0].library, b.providers[0].library);
}

#[test]
fn run_seeds_matches_sequential_runs() {
    let cfg = small(30, vec![10, 20]);
    let runs = run_seeds(&cfg, &[0, 1]).unwrap();
    assert_eq!(
        runs[1].report,
        run_scenario(&ScenarioConfig {
            seed: 1,
            ..cfg.clone()
        })
        .unwrap()
        .report
    );
    let summary = summarize(runs.iter().map(|r| &r.report));
    assert_eq!(summary.len(), runs[0].report.rows.len());
    let cell = &summary[0];
    let mean = (runs[0].report.rows[0].chr + runs[1].report.rows[0].chr) / 2.0;
    assert!((cell.mean_chr - mean).abs() < 1e-15);
    assert_eq!(cell.runs, 2);
}

#[test]
fn invalid_configs_fail_before_any_work() {
    let bad = [
        ScenarioConfig {
            z_sweep: vec![10, 31],
            ..small(30, vec![])
        },
        ScenarioConfig {
            z_sweep: vec![10, 10],
            ..small(30, vec![])
        },
        ScenarioConfig {
            tau_ratio: 0.0,
            ..small(30, vec![])
        },
        ScenarioConfig {
            warmup_fraction: 1.0,
            ..small(30, vec![])
        },
        ScenarioConfig {
            warmup_fraction: 0.0,
            ..small(30, vec![])
        },
        ScenarioConfig {
            warm_cps: 4,
            ..small(30, vec![])
        },
        ScenarioConfig {
            arms: vec![],
            ..small(30, vec![])
        },
        ScenarioConfig {
            per_cp: 60,
            ..small(30, vec![])
        },
        ScenarioConfig::movielens("/nonexistent/dataset"),
    ];
    for (i, cfg) in bad.iter().enumerate() {
        let err = run_scenario(cfg).unwrap_err();
        if i + 1 < bad.len() {
            assert!(matches!(err, SimError::Config { .. }), "{i}: {err}");
        } else {
            assert!(matches!(err, SimError::Trace(_)), "{err}");
        }
    }
}

#[test]
fn config_file_parses_every_field() {
    let text = "\
# desk run
data = synthetic
synthetic_contents = 300
synthetic_requests = 5000
zipf_s = 1.1
synthetic_users = 80
window_start = 10
window_end = 4000
providers = 2
per_cp = 50
z_sweep = 10..50/10
tau_ratio = 2.5
seed = 7
warm_cps = 1
warmup_fraction = 0.4
arms = bcdn, conventional, random
fast = true
block_interval = 5
fee = 3
initial_balance = 900
refresh_every = 250
crypto = secure
validators = 7
consensus_timeout = 40
dump_z = 25
dump_ledger = false
dump_events = true
";
    let cfg = ScenarioConfig::parse(text).unwrap();
    assert_eq!(
        cfg.source,
        DataSource::Synthetic {
            contents: 300,
            requests: 5000,
            zipf_s: 1.1,
            users: 80
        }
    );
    assert_eq!(cfg.z_sweep, vec![10, 20, 30, 40, 50]);
    assert_eq!(
        cfg.arms,
        vec![
            Arm::BCdn,
            Arm::Conventional,
            Arm::All(Architecture::ConventionalRandom)
        ]
    );
    assert_eq!(
        (cfg.window_start, cfg.window_end, cfg.providers, cfg.per_cp),
        (10, 4000, 2, 50)
    );
    assert_eq!(
        (cfg.tau_ratio, cfg.seed, cfg.warm_cps, cfg.warmup_fraction),
        (2.5, 7, 1, 0.4)
    );
    assert!(cfg.fast && !cfg.dump_ledger && cfg.dump_events);
    assert_eq!(
        (cfg.block_interval, cfg.fee, cfg.initial_balance),
        (5, 3, 900)
    );
    assert_eq!(cfg.refresh_every, Some(250));
    assert_eq!(cfg.scheme, crate::crypto::Scheme::Secure);
    assert_eq!(
        (cfg.validators, cfg.consensus_timeout, cfg.dump_z),
        (7, 40, Some(25))
    );
    cfg.validate().unwrap();
}

#[test]
fn config_errors_carry_line_numbers() {
    let err = ScenarioConfig::parse("seed = 1\n\nper_cp = many\n").unwrap_err();
    assert!(
        matches!(err, SimError::Config { line: Some(3), .. }),
        "{err}"
    );
    let err = ScenarioConfig::parse("seed = 1\ncolour = blue\n").unwrap_err();
    assert!(matches!(err, SimError::Config { line: Some(2), .. }));
    assert!(err.to_string().contains("line 2"));
    let err = ScenarioConfig::parse("no equals sign").unwrap_err();
    assert!(matches!(err, SimError::Config { line: Some(1), .. }));
    assert!(ScenarioConfig::parse("arms = bcdn, lru").is_err());
    assert!(ScenarioConfig::parse("data = s3").is_err());
}

#[test]
fn architecture_names_round_trip() {
    for a in [
        Architecture::BCdn,
        Architecture::ConventionalOwnHistory,
        Architecture::ConventionalRandom,
    ] {
        assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
    }
    assert_eq!(parse_z_sweep("20..200/20").unwrap().len(), 10);
    assert_eq!(parse_z_sweep("").unwrap(), Vec::<usize>::new());
}
