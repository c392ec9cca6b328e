//! Two independent samplers for the model: Ogata-style thinning and a
//! cluster (immigrant/offspring) construction. Having both lets every
//! simulation-dependent result be cross-checked against an algorithm with a
//! completely different failure surface.
//!
//! Both samplers require a strictly subcritical model (spectral radius of
//! `a / beta` below one); supercritical inputs are rejected up front rather
//! than allowed to blow up mid-run.

use crate::error::{Error, Result};
use crate::events::EventStreams;
use crate::linalg;
use crate::model::{DecayState, MvhpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use std::collections::VecDeque;

/// Simulation controls. The seed fully determines the output: a given
/// `(model, config)` pair reproduces the same streams byte for byte. Each
/// sampler consumes a single ChaCha8 stream seeded with `seed`; sweeps that
/// need independent replicates should vary the seed, not reuse it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Simulate on `[0, horizon]` hours.
    pub horizon: f64,
    /// RNG seed.
    pub seed: u64,
    /// Abort with [`Error::MaxEventsExceeded`] past this many events,
    /// guarding against near-critical runaways.
    pub max_events: usize,
}

impl SimConfig {
    pub fn new(horizon: f64, seed: u64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self {
            horizon,
            seed,
            max_events: 10_000_000,
        })
    }

    pub fn with_max_events(mut self, cap: usize) -> Self {
        self.max_events = cap;
        self
    }
}

/// Spectral radius of the branching matrix `a / beta`: the expected total
/// number of direct offspring spawned by one event, in the worst direction.
/// Values below one mean the process is stationary and cluster sizes are
/// finite.
pub fn spectral_radius(model: &MvhpModel) -> f64 {
    linalg::spectral_radius_nonneg(&model.branching_matrix())
}

/// Long-run mean intensity `(I - a/beta)^-1 b` of a subcritical model.
pub fn stationary_mean_intensity(model: &MvhpModel) -> Result<Vec<f64>> {
    let rho = spectral_radius(model);
    if rho >= 1.0 {
        return Err(Error::UnstableModel { rho });
    }
    let p = model.num_processes();
    let k = model.branching_matrix();
    let mut m = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            m[i][j] = if i == j { 1.0 - k[i][j] } else { -k[i][j] };
        }
    }
    linalg::solve(m, model.base().to_vec())
}

fn check_stable(model: &MvhpModel) -> Result<()> {
    let rho = spectral_radius(model);
    if rho >= 1.0 {
        return Err(Error::UnstableModel { rho });
    }
    Ok(())
}

/// Sample one realization by thinning: propose candidate times from an
/// exponential clock running at an upper bound of the total intensity, then
/// accept and route each candidate with probability proportional to the true
/// per-process intensities at its left limit. The bound is the total
/// intensity just after the most recent event, valid because every kernel
/// term only decays until the next event arrives.
pub fn simulate_thinning(model: &MvhpModel, config: SimConfig) -> Result<EventStreams> {
    check_stable(model)?;
    let p = model.num_processes();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut streams: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut state = DecayState::new(p, model.kernel(), 0.0);
    let mut total = 0usize;

    let total_intensity = |state: &DecayState| -> f64 {
        (0..p)
            .map(|i| {
                model.base_rate(i)
                    + model
                        .excitation_row(i)
                        .iter()
                        .zip(state.source_sums())
                        .map(|(a, s)| a * s)
                        .sum::<f64>()
            })
            .sum()
    };

    let mut t = 0.0;
    loop {
        let bound = total_intensity(&state);
        if bound <= 0.0 {
            break; // nothing can ever fire again
        }
        let wait = Exp::new(bound).expect("bound is positive").sample(&mut rng);
        t += wait;
        if t >= config.horizon {
            break;
        }
        state.advance_to(t);
        // Left-limit intensities at the candidate time (no event is recorded
        // at t yet, so the decayed sums are exactly the left limit).
        let u: f64 = rng.random_range(0.0..bound);
        let mut acc = 0.0;
        let mut accepted = None;
        for i in 0..p {
            let lambda_i = model.base_rate(i)
                + model
                    .excitation_row(i)
                    .iter()
                    .zip(state.source_sums())
                    .map(|(a, s)| a * s)
                    .sum::<f64>();
            acc += lambda_i;
            if u < acc {
                accepted = Some(i);
                break;
            }
        }
        if let Some(i) = accepted {
            streams[i].push(t);
            state.observe_event(i);
            total += 1;
            if total > config.max_events {
                return Err(Error::MaxEventsExceeded {
                    cap: config.max_events,
                });
            }
        }
        // Rejected candidates still advance the clock; the next bound is
        // recomputed from the decayed state, so it only tightens.
    }

    EventStreams::new(streams, 0.0, config.horizon)
}

/// Sample one realization by the cluster construction: immigrants arrive as
/// independent Poisson processes at the base rates, and every event at time
/// `s` independently spawns Poisson-many direct offspring on each target
/// process with mean `a[i][j] * (1 - exp(-beta (H - s))) / beta`, placed by
/// inverting the truncated-exponential CDF. Offspring are processed
/// breadth-first until the queue drains.
pub fn simulate_branching(model: &MvhpModel, config: SimConfig) -> Result<EventStreams> {
    check_stable(model)?;
    let p = model.num_processes();
    let beta = model.kernel().beta();
    let h = config.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut streams: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut queue: VecDeque<(f64, usize)> = VecDeque::new();
    let mut total = 0usize;

    let push = |streams: &mut Vec<Vec<f64>>,
                queue: &mut VecDeque<(f64, usize)>,
                total: &mut usize,
                t: f64,
                i: usize|
     -> Result<()> {
        streams[i].push(t);
        queue.push_back((t, i));
        *total += 1;
        if *total > config.max_events {
            return Err(Error::MaxEventsExceeded {
                cap: config.max_events,
            });
        }
        Ok(())
    };

    for i in 0..p {
        let mean = model.base_rate(i) * h;
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean)
            .expect("mean is positive")
            .sample(&mut rng) as usize;
        for _ in 0..n {
            push(
                &mut streams,
                &mut queue,
                &mut total,
                rng.random_range(0.0..h),
                i,
            )?;
        }
    }

    while let Some((s, j)) = queue.pop_front() {
        let remaining = h - s;
        // Kernel mass inside the horizon for a parent at s.
        let mass = (1.0 - (-beta * remaining).exp()) / beta;
        for i in 0..p {
            let mean = model.excite(i, j) * mass;
            if mean <= 0.0 {
                continue;
            }
            let n = Poisson::new(mean)
                .expect("mean is positive")
                .sample(&mut rng) as usize;
            for _ in 0..n {
                // Inverse CDF of the exponential kernel truncated to
                // [0, remaining]: x = -ln(1 - U (1 - e^{-beta L})) / beta.
                let u: f64 = rng.random_range(0.0..1.0);
                let x = -(1.0 - u * (1.0 - (-beta * remaining).exp())).ln() / beta;
                push(&mut streams, &mut queue, &mut total, s + x, i)?;
            }
        }
    }

    for s in &mut streams {
        s.sort_by(|a, b| a.total_cmp(b));
        // Exact floating-point collisions within a process are vanishingly
        // rare but would violate the strict-ordering invariant; nudge them.
        for k in 1..s.len() {
            if s[k] <= s[k - 1] {
                s[k] = next_after(s[k - 1]);
            }
        }
        while s.last().is_some_and(|&t| t >= h) {
            s.pop();
        }
    }

    EventStreams::new(streams, 0.0, config.horizon)
}

/// Smallest f64 strictly greater than `x` (for nonnegative finite `x`).
fn next_after(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}
