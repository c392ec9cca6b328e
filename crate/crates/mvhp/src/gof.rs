//! Goodness-of-fit via the time-rescaling transform.
//!
//! For target process `i`, each observed inter-arrival is mapped to its
//! expected event count under the model,
//! `tau_k = integral_{t_{k-1}}^{t_k} lambda_i(s) ds`, with the first interval
//! measured from the window start. Under a correctly specified model the
//! `tau_k` are i.i.d. unit exponentials; probability-probability points and a
//! one-sample Kolmogorov-Smirnov test against Exp(1) quantify the distance.
//!
//! Note the first-interval convention: sliding windows discard pre-window
//! history, so the clock for `tau_1` starts at the window origin rather than
//! at a previous event. This yields n rescaled values for n events and
//! differs from whole-trajectory analyses that drop the first interval.

use crate::error::{Error, Result};
use crate::events::EventStreams;
use crate::model::MvhpModel;
use serde::{Deserialize, Serialize};

/// One-sample Kolmogorov-Smirnov test result against Exp(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Exact KS statistic `D = max_k max(k/n - F_(k), F_(k) - (k-1)/n)`.
    pub statistic: f64,
    /// Asymptotic p-value with the small-sample-corrected argument
    /// `(sqrt(n) + 0.12 + 0.11/sqrt(n)) * D`.
    pub p_value: f64,
    pub n: usize,
}

/// Full goodness-of-fit report for one window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofReport {
    /// Rescaled inter-arrivals per process; empty for processes with fewer
    /// than two events, which are excluded from the diagnostic.
    pub rescaled: Vec<Vec<f64>>,
    /// Per-process KS tests; `null` where a process has fewer than five
    /// rescaled values.
    pub per_process: Vec<Option<KsResult>>,
    /// KS test over all processes' rescaled values pooled together — the
    /// scalar the automated gate screens on.
    pub pooled: KsResult,
    /// `max |u_emp - u_model|` over the pooled pp points. Differs from the
    /// exact KS statistic by exactly `0.5/n` because the empirical
    /// coordinate is evaluated at midpoints `(k - 0.5)/n`.
    pub pp_max_abs_deviation: f64,
    /// Pooled pp-plot pairs `(u_empirical, u_model)`, sorted in the
    /// empirical coordinate.
    pub pp: Vec<(f64, f64)>,
    /// Rejection threshold the gate was evaluated at.
    pub alpha: f64,
    /// `pooled.p_value >= alpha`.
    pub passed: bool,
}

impl GofReport {
    /// Pooled pp points as 2-column CSV for external plotting.
    pub fn pp_csv(&self) -> String {
        let mut out = String::from("u_empirical,u_model\n");
        for &(ue, um) in &self.pp {
            out.push_str(&format!("{ue:.9},{um:.9}\n"));
        }
        out
    }
}

/// Rescaled inter-arrivals of process `i` under `model`: the compensator of
/// each interval between consecutive events of `i` (first interval from the
/// window start). Runs in one pass over the merged streams by carrying the
/// decayed excitation mass forward.
pub fn rescale(model: &MvhpModel, streams: &EventStreams, i: usize) -> Result<Vec<f64>> {
    let p = streams.num_processes();
    if model.num_processes() != p {
        return Err(Error::DimensionMismatch(format!(
            "model has P = {}, streams have P = {}",
            model.num_processes(),
            p
        )));
    }
    if i >= p {
        return Err(Error::ProcessIndexOutOfRange { index: i, p });
    }
    let target = streams.events(i)?;
    if target.len() < 2 {
        return Err(Error::InsufficientEvents {
            needed: 2,
            got: target.len(),
        });
    }

    let beta = model.kernel().beta();
    let b = model.base_rate(i);
    let a_row = model.excitation_row(i);
    let merged = streams.merged();

    let mut taus = Vec::with_capacity(target.len());
    let mut prev = streams.t_start();
    // w = sum_j a[i][j] * sum_{t_l^j <= prev} exp(-beta (prev - t_l^j)):
    // the excitation mass already alive at the start of the interval.
    let mut w = 0.0;
    let mut pos = 0;
    for &t_k in target {
        let delta = t_k - prev;
        let decay = (-beta * delta).exp();
        let mut tau = b * delta + w / beta * (1.0 - decay);
        let mut arrived = 0.0;
        while pos < merged.len() && merged[pos].0 < t_k {
            let (s, j) = merged[pos];
            // Events at exactly `prev` were already folded into `w`.
            tau += a_row[j] / beta * (1.0 - (-beta * (t_k - s)).exp());
            arrived += a_row[j] * (-beta * (t_k - s)).exp();
            pos += 1;
        }
        w = w * decay + arrived;
        // Events at exactly t_k (the target event itself plus any ties)
        // carry full weight into the next interval but contribute nothing
        // to this one.
        while pos < merged.len() && merged[pos].0 == t_k {
            w += a_row[merged[pos].1];
            pos += 1;
        }
        taus.push(tau);
        prev = t_k;
    }
    Ok(taus)
}

/// Probability-probability pairs for rescaled inter-arrivals: order
/// statistics mapped through the Exp(1) CDF against empirical midpoints
/// `(k - 0.5)/n`.
pub fn pp_points(rescaled: &[f64]) -> Result<Vec<(f64, f64)>> {
    if rescaled.is_empty() {
        return Err(Error::InsufficientEvents { needed: 1, got: 0 });
    }
    let mut sorted = rescaled.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(k, &tau)| ((k as f64 + 0.5) / n, -(-tau).exp_m1()))
        .collect())
}

/// One-sample KS test of the rescaled values against Exp(1).
pub fn ks_statistic(rescaled: &[f64]) -> Result<KsResult> {
    let n = rescaled.len();
    if n < 5 {
        return Err(Error::InsufficientEvents { needed: 5, got: n });
    }
    let mut sorted = rescaled.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (k, &tau) in sorted.iter().enumerate() {
        let f = -(-tau).exp_m1(); // 1 - exp(-tau)
        let upper = (k as f64 + 1.0) / nf - f;
        let lower = f - k as f64 / nf;
        d = d.max(upper).max(lower);
    }
    let z = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(z),
        n,
    })
}

/// Kolmogorov distribution survival function
/// `Q(z) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 z^2)`, clamped to [0, 1].
fn kolmogorov_survival(z: f64) -> f64 {
    if z < 1e-6 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * z * z).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Goodness-of-fit over all processes: rescale each process with at least
/// two events, pool the values for the headline KS test, and gate on
/// `p >= alpha`. Errors if fewer than five rescaled values exist in total.
pub fn pooled_gof(model: &MvhpModel, streams: &EventStreams, alpha: f64) -> Result<GofReport> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let p = streams.num_processes();
    let mut rescaled: Vec<Vec<f64>> = Vec::with_capacity(p);
    for i in 0..p {
        if streams.events(i)?.len() < 2 {
            rescaled.push(Vec::new());
        } else {
            rescaled.push(rescale(model, streams, i)?);
        }
    }
    let per_process: Vec<Option<KsResult>> = rescaled
        .iter()
        .map(|taus| ks_statistic(taus).ok())
        .collect();
    let pooled_taus: Vec<f64> = rescaled.iter().flatten().copied().collect();
    let pooled = ks_statistic(&pooled_taus)?;
    let pp = pp_points(&pooled_taus)?;
    let pp_max_abs_deviation = pp
        .iter()
        .map(|&(ue, um)| (ue - um).abs())
        .fold(0.0, f64::max);
    Ok(GofReport {
        rescaled,
        per_process,
        pp_max_abs_deviation,
        pp,
        alpha,
        passed: pooled.p_value >= alpha,
        pooled,
    })
}
