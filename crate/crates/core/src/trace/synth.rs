use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Gumbel};

use super::genre::GENRE_COUNT;
use super::{MovieRecord, RatingEvent, TraceError, TraceWindow};
use crate::caching::{content_correlation, FeatureVector};

/// Knobs of the synthetic trace beyond the core arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub users: u32,
    /// Spread of the random perturbation applied to taste affinity when
    /// ranking contents; larger values decouple popularity from features.
    pub noise: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            users: 500,
            noise: 0.1,
        }
    }
}

/// Random catalog plus a Zipf request trace with the default options.
pub fn synth_trace(
    n_contents: usize,
    n_requests: usize,
    zipf_s: f64,
    seed: u64,
) -> Result<(Vec<MovieRecord>, TraceWindow), TraceError> {
    synth_trace_with(
        n_contents,
        n_requests,
        zipf_s,
        seed,
        SynthOptions::default(),
    )
}

/// Contents get 1 to 3 random genres. A seeded taste vector over genres
/// ranks contents by affinity plus Gumbel noise; requests then pick the
/// content at rank `r` with probability proportional to `r^-zipf_s`.
/// Request `i` has timestamp `i`.
pub fn synth_trace_with(
    n_contents: usize,
    n_requests: usize,
    zipf_s: f64,
    seed: u64,
    options: SynthOptions,
) -> Result<(Vec<MovieRecord>, TraceWindow), TraceError> {
    if !(zipf_s >= 0.0 && zipf_s.is_finite()) {
        return Err(TraceError::Synth(format!(
            "zipf exponent {zipf_s} must be finite and >= 0"
        )));
    }
    if n_requests > 0 && n_contents == 0 {
        return Err(TraceError::Synth(
            "requests need at least one content".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let catalog: Vec<MovieRecord> = (0..n_contents)
        .map(|i| {
            let k = rng.gen_range(1..=3);
            let mut f = FeatureVector::zeros(GENRE_COUNT);
            for l in rand::seq::index::sample(&mut rng, GENRE_COUNT, k) {
                f.set(l);
            }
            MovieRecord {
                movie_id: i as u32 + 1,
                title: format!("Synthetic {}", i + 1),
                features: f,
            }
        })
        .collect();

    let taste: Vec<f64> = (0..GENRE_COUNT)
        .map(|_| {
            let w: f64 = Exp1.sample(&mut rng);
            w * w
        })
        .collect();
    let gumbel = Gumbel::new(0.0, options.noise.max(f64::MIN_POSITIVE)).expect("positive scale");
    let mut scored: Vec<(f64, usize)> = catalog
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let affinity = content_correlation(&m.features, &taste).expect("same length");
            (affinity + gumbel.sample(&mut rng), i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let ranking: Vec<usize> = scored.into_iter().map(|(_, i)| i).collect();

    let mut window = TraceWindow::unbounded();
    if n_requests > 0 {
        let weights: Vec<f64> = (1..=n_contents).map(|r| (r as f64).powf(-zipf_s)).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| TraceError::Synth(e.to_string()))?;
        window.events = (0..n_requests)
            .map(|t| RatingEvent {
                user_id: rng.gen_range(1..=options.users.max(1)),
                movie_id: catalog[ranking[pick.sample(&mut rng)]].movie_id,
                timestamp: t as u64,
            })
            .collect();
    }
    Ok((catalog, window))
}
