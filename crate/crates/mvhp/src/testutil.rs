//! Shared helpers for seeded randomized tests.

use crate::events::EventStreams;
use crate::model::{KernelSpec, MvhpModel};
use rand::rngs::StdRng;
use rand::Rng;

/// Number of randomized instances in the smaller oracle sweeps.
pub(crate) const SMALL_INSTANCES: usize = 25;

/// Random strictly-subcritical model with positive base rates.
pub(crate) fn random_feasible_model(rng: &mut StdRng, p: usize) -> MvhpModel {
    let base: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..1.0)).collect();
    // Keep each row sum of a/beta below 0.9/P so the spectral radius stays
    // well under 1 regardless of structure.
    let beta = rng.random_range(0.5..2.0);
    let excitation: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            (0..p)
                .map(|_| rng.random_range(0.0..0.9 * beta / p as f64))
                .collect()
        })
        .collect();
    MvhpModel::new(base, excitation, KernelSpec::new(beta).unwrap()).unwrap()
}

/// Random sorted streams over `[0, horizon]`, at most `max_events` in total,
/// with occasional duplicated timestamps across processes to exercise the
/// tie-grouping path.
pub(crate) fn random_streams(
    rng: &mut StdRng,
    p: usize,
    horizon: f64,
    max_events: usize,
) -> EventStreams {
    let total = rng.random_range(max_events / 2..=max_events);
    let mut streams: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut last_time = 0.0;
    for _ in 0..total {
        let t = rng.random_range(0.0..horizon);
        let proc = rng.random_range(0..p);
        // ~5% of draws reuse the previous timestamp on another process.
        if rng.random_bool(0.05) && last_time > 0.0 {
            streams[rng.random_range(0..p)].push(last_time);
        }
        streams[proc].push(t);
        last_time = t;
    }
    for s in &mut streams {
        s.sort_by(|a, b| a.total_cmp(b));
        s.dedup(); // strict ascending within a process
    }
    EventStreams::new(streams, 0.0, horizon).unwrap()
}
