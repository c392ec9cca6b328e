//! Model parameters: exponential memory kernel, base rates, and the
//! excitation matrix.
//!
//! The conditional intensity of target process `i` is
//!
//! ```text
//! lambda_i(t | H) = b_i + sum_j a[i][j] * sum_{t_l^j < t} exp(-beta * (t - t_l^j))
//! ```
//!
//! with `b_i >= 0`, `a[i][j] >= 0` and `beta > 0`. `a[i][j]` is the
//! excitation that an event of *source* process `j` exerts on *target*
//! process `i`. Events strictly before `t` count (left limit), so an event
//! never excites itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponential memory kernel `phi(tau) = exp(-beta * tau)` for `tau >= 0`,
/// zero for `tau < 0`. The decay rate is per hour and is a fixed
/// hyperparameter, never estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    beta: f64,
}

impl KernelSpec {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel decay rate must be finite and positive, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Kernel value `phi(tau)`.
    pub fn phi(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            0.0
        } else {
            (-self.beta * tau).exp()
        }
    }

    /// `integral_0^tau phi(s) ds = (1 - exp(-beta * tau)) / beta` for `tau >= 0`.
    pub fn phi_integral(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else {
            (-(-self.beta * tau).exp_m1()) / self.beta
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

/// Parameters of a multivariate Hawkes process: base rates `b` (events/hour),
/// non-negative excitation matrix `a` (row = target, column = source), and
/// the shared exponential kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MvhpModel {
    base: Vec<f64>,
    excitation: Vec<Vec<f64>>,
    kernel: KernelSpec,
}

impl MvhpModel {
    pub fn new(base: Vec<f64>, excitation: Vec<Vec<f64>>, kernel: KernelSpec) -> Result<Self> {
        let p = base.len();
        if p == 0 {
            return Err(Error::InvalidParameter("P must be >= 1".into()));
        }
        if excitation.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "excitation matrix has {} rows, expected {p}",
                excitation.len()
            )));
        }
        for (i, &b) in base.iter().enumerate() {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "base rate b[{i}] must be finite and >= 0, got {b}"
                )));
            }
        }
        for (i, row) in excitation.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "excitation row {i} has {} columns, expected {p}",
                    row.len()
                )));
            }
            for (j, &a) in row.iter().enumerate() {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "excitation a[{i}][{j}] must be finite and >= 0, got {a}"
                    )));
                }
            }
        }
        Ok(Self {
            base,
            excitation,
            kernel,
        })
    }

    pub fn num_processes(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn base_rate(&self, i: usize) -> f64 {
        self.base[i]
    }

    pub fn excitation(&self) -> &[Vec<f64>] {
        &self.excitation
    }

    /// Excitation of target `i` by source `j`.
    pub fn excite(&self, i: usize, j: usize) -> f64 {
        self.excitation[i][j]
    }

    pub fn excitation_row(&self, i: usize) -> &[f64] {
        &self.excitation[i]
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    /// Branching matrix `a[i][j] / beta`: expected offspring in target `i`
    /// per source-`j` event.
    pub fn branching_matrix(&self) -> Vec<Vec<f64>> {
        let beta = self.kernel.beta();
        self.excitation
            .iter()
            .map(|row| row.iter().map(|&a| a / beta).collect())
            .collect()
    }
}

/// Running kernel sums, advanced exactly in closed form.
///
/// Conceptually this is the P x P matrix `S[i][j](t) = sum_{t_l^j < t}
/// phi(t - t_l^j)` from the intensity formula. Because the kernel is
/// process-independent the rows of the conceptual P x P view coincide, so
/// only the per-source vector `S[j](t)` is stored.
///
/// Invariant: advancing time by `dt` without events multiplies every entry
/// by `exp(-beta * dt)`, exactly (no time stepping).
#[derive(Debug, Clone)]
pub struct DecayState {
    beta: f64,
    sums: Vec<f64>,
    time: f64,
}

impl DecayState {
    /// Fresh state at `time` with no history.
    pub fn new(p: usize, kernel: KernelSpec, time: f64) -> Self {
        Self {
            beta: kernel.beta(),
            sums: vec![0.0; p],
            time,
        }
    }

    /// Decay all sums forward to `t >= self.time`.
    pub fn advance_to(&mut self, t: f64) {
        debug_assert!(t >= self.time);
        if t > self.time {
            let decay = (-self.beta * (t - self.time)).exp();
            for s in &mut self.sums {
                *s *= decay;
            }
            self.time = t;
        }
    }

    /// Record an event of source process `j` at the current time. The event
    /// contributes `phi(0) = 1` from now on; because of the left-limit
    /// convention callers must read sums *before* observing simultaneous
    /// events.
    pub fn observe_event(&mut self, j: usize) {
        self.sums[j] += 1.0;
    }

    /// Per-source kernel sums at the current time.
    pub fn source_sums(&self) -> &[f64] {
        &self.sums
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_rejects_nonpositive_beta() {
        assert!(KernelSpec::new(0.0).is_err());
        assert!(KernelSpec::new(-1.0).is_err());
        assert!(KernelSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn kernel_is_causal() {
        let k = KernelSpec::default();
        assert_eq!(k.phi(-0.5), 0.0);
        assert!((k.phi(1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn model_rejects_negative_parameters() {
        let k = KernelSpec::default();
        assert!(MvhpModel::new(vec![-0.1], vec![vec![0.0]], k).is_err());
        assert!(MvhpModel::new(vec![0.1], vec![vec![-0.5]], k).is_err());
        assert!(MvhpModel::new(vec![0.1], vec![vec![0.0, 0.0]], k).is_err());
    }

    #[test]
    fn decay_state_decays_exactly() {
        let k = KernelSpec::new(2.0).unwrap();
        let mut s = DecayState::new(2, k, 0.0);
        s.observe_event(0);
        s.observe_event(0);
        s.observe_event(1);
        s.advance_to(0.75);
        let d = (-2.0_f64 * 0.75).exp();
        assert!((s.source_sums()[0] - 2.0 * d).abs() < 1e-15);
        assert!((s.source_sums()[1] - d).abs() < 1e-15);
    }
}
