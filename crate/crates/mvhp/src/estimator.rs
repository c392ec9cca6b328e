//! Maximum-likelihood fitting.
//!
//! The log-likelihood decomposes over target rows, so the full fit is `P`
//! independent concave problems in `(b_i, a[i][.])`, each solved by a
//! projected Newton method: coordinates pinned at the lower floor with an
//! outward-pointing gradient are frozen, the Newton system is solved on the
//! free coordinates, and an Armijo backtracking line search keeps every
//! accepted step an improvement. Rows are fitted in parallel; [`fit_mle`] is
//! exactly the concatenation of the per-row results.
//!
//! All parameters are kept at or above a small positive floor. For the base
//! rate this keeps every event intensity strictly positive (so the objective
//! stays finite); for excitation entries the floor is the "off"
//! value an entry is driven to when the data provide no support for it.

use crate::error::{Error, Result};
use crate::events::EventStreams;
use crate::exec;
use crate::likelihood::{dot, WindowFeatures};
use crate::linalg;
use crate::model::{KernelSpec, MvhpModel};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Fitting controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Ridge weight on the excitation entries (never on the base rate):
    /// subtracts `ridge * sum_j a[i][j]^2` from each row objective.
    pub ridge: f64,
    /// Newton iteration cap per row.
    pub max_iterations: usize,
    /// Convergence threshold on the max-norm of the projected gradient.
    pub tolerance: f64,
    /// Lower bound for every parameter.
    pub floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            max_iterations: 500,
            tolerance: 1e-6,
            floor: 1e-10,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.ridge < 0.0 || !self.ridge.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ridge must be nonnegative and finite, got {}",
                self.ridge
            )));
        }
        if !self.tolerance.is_finite()
            || self.tolerance <= 0.0
            || !self.floor.is_finite()
            || self.floor <= 0.0
        {
            return Err(Error::InvalidParameter(
                "tolerance and floor must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// One fitted row: the parameters governing who excites process `row`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFit {
    pub row: usize,
    pub base: f64,
    pub excitation: Vec<f64>,
    /// Unpenalized row log-likelihood at the fitted parameters.
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Result of a full fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelFile,
    /// Total unpenalized log-likelihood at the fitted parameters.
    pub loglik: f64,
    /// True only if every row converged.
    pub converged: bool,
    /// Newton iterations summed over rows.
    pub iterations: usize,
    /// Fit wall time in seconds. Excluded from serialized output so reruns
    /// of the same inputs produce identical bytes.
    #[serde(skip)]
    pub wall_time: f64,
}

impl FitReport {
    /// Reconstruct the fitted model (validates parameters on the way).
    pub fn model(&self) -> Result<MvhpModel> {
        self.model.to_model()
    }
}

/// On-disk model representation. Serializes as
/// `{"P": ..., "beta": ..., "b": [...], "a": [[...]], "meta": {...}}`,
/// with `meta` omitted when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "P")]
    pub p: usize,
    pub beta: f64,
    pub b: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta: Option<ModelMeta>,
}

/// Optional provenance block accompanying a stored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    /// Observation window `[t_start, t_end]` the model was fitted on.
    pub window: [f64; 2],
    pub loglik: f64,
    pub converged: bool,
}

impl ModelFile {
    pub fn from_model(model: &MvhpModel, meta: Option<ModelMeta>) -> Self {
        Self {
            p: model.num_processes(),
            beta: model.kernel().beta(),
            b: model.base().to_vec(),
            a: model.excitation().to_vec(),
            meta,
        }
    }

    pub fn to_model(&self) -> Result<MvhpModel> {
        if self.b.len() != self.p || self.a.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "model file claims P = {} but has {} base rates and {} excitation rows",
                self.p,
                self.b.len(),
                self.a.len()
            )));
        }
        MvhpModel::new(self.b.clone(), self.a.clone(), KernelSpec::new(self.beta)?)
    }
}

/// Fit one row on prebuilt features. Shared verbatim by [`fit_row`] and
/// [`fit_mle`], so the two entry points produce bit-identical parameters.
fn fit_row_on_features(features: &WindowFeatures, row: usize, config: &FitConfig) -> RowFit {
    let p = features.num_processes();
    let span = features.span();
    let n = features.count(row);
    let dim = p + 1; // theta = (b, a_1 .. a_P)
    let floor = config.floor;
    let w = config.ridge;

    // Excitation entries with zero kernel mass cannot affect the likelihood;
    // pin them at the floor (the minimum-norm member of the optimum set).
    let frozen: Vec<bool> = features
        .kernel_integral()
        .iter()
        .map(|&g| g == 0.0)
        .collect();

    let mut theta = vec![0.0; dim];
    theta[0] = (n as f64 / span).max(floor);
    for j in 0..p {
        theta[1 + j] = if frozen[j] { floor } else { 0.1 };
    }

    // Penalized row objective.
    let objective = |theta: &[f64]| -> f64 {
        let penalty: f64 = theta[1..].iter().map(|a| w * a * a).sum();
        features.row_log_likelihood(row, theta[0], &theta[1..]) - penalty
    };

    // Gradient of the penalized objective; intensities are strictly positive
    // because b >= floor > 0.
    let gradient = |theta: &[f64]| -> Vec<f64> {
        let (gb, ga) = features
            .row_gradient(row, theta[0], &theta[1..])
            .expect("intensity is floored above zero");
        let mut g = Vec::with_capacity(dim);
        g.push(gb);
        for (j, gaj) in ga.into_iter().enumerate() {
            g.push(gaj - 2.0 * w * theta[1 + j]);
        }
        g
    };

    let projected_gradient_norm = |theta: &[f64], g: &[f64]| -> f64 {
        let mut norm: f64 = 0.0;
        for u in 0..dim {
            let pg = if theta[u] <= floor {
                g[u].max(0.0)
            } else {
                g[u]
            };
            if !(u > 0 && frozen[u - 1]) {
                norm = norm.max(pg.abs());
            }
        }
        norm
    };

    let mut f = objective(&theta);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_iterations {
        let g = gradient(&theta);
        if projected_gradient_norm(&theta, &g) <= config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        // Free set: coordinates not pinned at the floor by a gradient that
        // points further down, and not permanently frozen.
        let free: Vec<usize> = (0..dim)
            .filter(|&u| !(u > 0 && frozen[u - 1]) && !(theta[u] <= floor && g[u] < 0.0))
            .collect();

        let direction =
            newton_direction(features, row, &theta, &g, &free, w).unwrap_or_else(|| {
                // Singular curvature (e.g. a source active at no event with
                // zero ridge): fall back to a plain gradient step.
                let mut d = vec![0.0; dim];
                for &u in &free {
                    d[u] = g[u];
                }
                d
            });

        // Backtracking Armijo search on the projected step.
        let mut alpha = 1.0;
        let mut stepped = false;
        while alpha > 1e-14 {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&direction)
                .map(|(&t, &d)| (t + alpha * d).max(floor))
                .collect();
            let predicted: f64 = g
                .iter()
                .zip(candidate.iter().zip(&theta))
                .map(|(&gu, (&cu, &tu))| gu * (cu - tu))
                .sum();
            let f_candidate = objective(&candidate);
            if predicted > 0.0 && f_candidate >= f + 1e-4 * predicted {
                theta = candidate;
                f = f_candidate;
                stepped = true;
                break;
            }
            alpha *= 0.5;
        }
        if !stepped {
            // No admissible step: report convergence state as-is.
            converged = projected_gradient_norm(&theta, &gradient(&theta)) <= config.tolerance;
            break;
        }
    }
    if !converged {
        let g = gradient(&theta);
        converged = projected_gradient_norm(&theta, &g) <= config.tolerance;
    }

    let loglik = features.row_log_likelihood(row, theta[0], &theta[1..]);
    RowFit {
        row,
        base: theta[0],
        excitation: theta[1..].to_vec(),
        loglik,
        converged,
        iterations,
    }
}

/// Newton ascent direction restricted to the free coordinates, or `None`
/// when the curvature matrix is singular.
fn newton_direction(
    features: &WindowFeatures,
    row: usize,
    theta: &[f64],
    g: &[f64],
    free: &[usize],
    ridge: f64,
) -> Option<Vec<f64>> {
    if free.is_empty() {
        return Some(vec![0.0; theta.len()]);
    }
    let m = free.len();
    // Hessian of the penalized objective over the free coordinates:
    // H[u][v] = -sum_k x_u x_v / lambda_k^2, minus 2*ridge on excitation
    // diagonal entries, with x = (1, features) augmented for the base rate.
    let mut h = vec![vec![0.0; m]; m];
    for k in 0..features.count(row) {
        let feat = features.event_features(row, k);
        let lambda = theta[0] + dot(&theta[1..], feat);
        let inv2 = 1.0 / (lambda * lambda);
        for (r, &u) in free.iter().enumerate() {
            let xu = if u == 0 { 1.0 } else { feat[u - 1] };
            if xu == 0.0 {
                continue;
            }
            for (c, &v) in free.iter().enumerate() {
                let xv = if v == 0 { 1.0 } else { feat[v - 1] };
                h[r][c] -= xu * xv * inv2;
            }
        }
    }
    for (r, &u) in free.iter().enumerate() {
        if u > 0 {
            h[r][r] -= 2.0 * ridge;
        }
    }
    let rhs: Vec<f64> = free.iter().map(|&u| -g[u]).collect();
    let d_free = linalg::solve(h, rhs).ok()?;
    let mut d = vec![0.0; theta.len()];
    for (r, &u) in free.iter().enumerate() {
        d[u] = d_free[r];
    }
    Some(d)
}

/// Fit the parameters of a single target row, holding everything else out of
/// the problem (the row objective touches only `(b_i, a[i][.])`).
pub fn fit_row(
    streams: &EventStreams,
    kernel: KernelSpec,
    row: usize,
    config: &FitConfig,
) -> Result<RowFit> {
    config.validate()?;
    let p = streams.num_processes();
    if row >= p {
        return Err(Error::ProcessIndexOutOfRange { index: row, p });
    }
    let features = WindowFeatures::build(streams, kernel);
    Ok(fit_row_on_features(&features, row, config))
}

/// Fit all rows by maximum likelihood. Rows are independent problems and run
/// in parallel; the result is exactly what `P` calls to [`fit_row`] produce.
pub fn fit_mle(
    streams: &EventStreams,
    kernel: KernelSpec,
    config: &FitConfig,
) -> Result<FitReport> {
    config.validate()?;
    let start = Instant::now();
    let p = streams.num_processes();
    let features = WindowFeatures::build(streams, kernel);
    let rows = exec::map_indexed(p, |i| fit_row_on_features(&features, i, config));

    let base: Vec<f64> = rows.iter().map(|r| r.base).collect();
    let excitation: Vec<Vec<f64>> = rows.iter().map(|r| r.excitation.clone()).collect();
    let loglik: f64 = rows.iter().map(|r| r.loglik).sum();
    let converged = rows.iter().all(|r| r.converged);
    let iterations = rows.iter().map(|r| r.iterations).sum();

    let model = MvhpModel::new(base, excitation, kernel)?;
    let meta = ModelMeta {
        window: [streams.t_start(), streams.t_end()],
        loglik,
        converged,
    };
    Ok(FitReport {
        model: ModelFile::from_model(&model, Some(meta)),
        loglik,
        converged,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
