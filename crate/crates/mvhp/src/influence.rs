//! Event attribution and process-influence measures.
//!
//! At an event of process `i` the intensity is an additive mixture of the
//! background rate and one excitation term per source process, so each
//! component divided by the total is the probability that the event was
//! caused by that source:
//!
//! ```text
//! p(background) = b_i / lambda_i(t)
//! p(source j)   = a[i][j] * S_j(t) / lambda_i(t)
//! ```
//!
//! The influence measure `pim[i][j]` is the frequency with which source `j`
//! was the *most likely* cause over all events of process `i`. The
//! background competes in that argmax as source 0 (preventing a process from
//! taking credit for events that are overwhelmingly exogenous); the pure
//! process-to-process view is recoverable with [`PimMatrix::process_view`],
//! which renormalizes over the process columns.
//!
//! Ties in the argmax break toward the background, then toward the lowest
//! process index, making every attribution deterministic.

use crate::error::{Error, Result};
use crate::events::EventStreams;
use crate::exec;
use crate::likelihood::{dot, WindowFeatures};
use crate::model::MvhpModel;
use serde::{Deserialize, Serialize};

/// Cause probabilities for one event. `probabilities[0]` is the background
/// share; `probabilities[j + 1]` is the share of source process `j`. The
/// entries are an exact decomposition of the event's intensity, so they sum
/// to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    /// Target process whose event is being attributed.
    pub target: usize,
    /// Event index within the target's stream.
    pub index: usize,
    pub time: f64,
    /// Length `P + 1`; entry 0 = background.
    pub probabilities: Vec<f64>,
    /// Argmax over `probabilities` under the documented tie-break:
    /// 0 = background, `j + 1` = source process `j`.
    pub source: usize,
}

/// Influence-strength bands over a measure value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfluenceClass {
    /// `[0, 0.2]`
    Weak,
    /// `(0.2, 0.6]`
    Significant,
    /// `(0.6, 0.99]`
    Strong,
    /// `(0.99, 1]`
    Decisive,
}

impl std::fmt::Display for InfluenceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InfluenceClass::Weak => "weak",
            InfluenceClass::Significant => "significant",
            InfluenceClass::Strong => "strong",
            InfluenceClass::Decisive => "decisive",
        };
        f.write_str(s)
    }
}

/// Band an influence value. Boundaries are half-open exactly as documented
/// on [`InfluenceClass`]: 0.2 is still weak, the next float above it is
/// significant, and so on.
pub fn classify(value: f64) -> Result<InfluenceClass> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter(format!(
            "influence value must lie in [0, 1], got {value}"
        )));
    }
    Ok(if value <= 0.2 {
        InfluenceClass::Weak
    } else if value <= 0.6 {
        InfluenceClass::Significant
    } else if value <= 0.99 {
        InfluenceClass::Strong
    } else {
        InfluenceClass::Decisive
    })
}

/// Estimated influence matrix for one window: `rows[i][j]` is the frequency
/// with which source `j` (0 = background) was the most likely cause of
/// process `i`'s events. Rows of processes with no events are undefined and
/// serialize as `null`, never as zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimMatrix {
    /// Per-target frequency rows of length `P + 1`, or `None` for targets
    /// with no events.
    pub rows: Vec<Option<Vec<f64>>>,
    /// Events per target process.
    pub counts: Vec<usize>,
    /// The window `[t_start, t_end]` the estimate belongs to.
    pub window: [f64; 2],
}

impl PimMatrix {
    pub fn num_processes(&self) -> usize {
        self.counts.len()
    }

    /// `rows[i][j]`, or `None` when row `i` is undefined.
    pub fn entry(&self, i: usize, j: usize) -> Option<f64> {
        self.rows.get(i)?.as_ref().map(|row| row[j])
    }

    /// Process-to-process view: background column dropped and each defined
    /// row renormalized over the process columns. Rows whose events are all
    /// background-attributed have nothing to renormalize and stay undefined.
    pub fn process_view(&self) -> Vec<Option<Vec<f64>>> {
        self.rows
            .iter()
            .map(|row| {
                let row = row.as_ref()?;
                let mass: f64 = row[1..].iter().sum();
                if mass <= 0.0 {
                    return None;
                }
                Some(row[1..].iter().map(|v| v / mass).collect())
            })
            .collect()
    }

    /// CSV rendering: header = source labels (background first), one row per
    /// target. Undefined rows render as empty cells.
    pub fn to_csv(&self, labels: &[String]) -> Result<String> {
        let p = self.num_processes();
        if labels.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {p} processes",
                labels.len()
            )));
        }
        let mut out = String::from("target,background");
        for label in labels {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&labels[i]);
            match row {
                Some(values) => {
                    for v in values {
                        out.push_str(&format!(",{v:.9}"));
                    }
                }
                None => out.push_str(&",".repeat(p + 1)),
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// A directed excitation edge `source -> target` read off the fitted matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerEdge {
    pub source: usize,
    pub target: usize,
    /// The excitation entry `a[target][source]`.
    pub weight: f64,
    pub self_loop: bool,
}

fn argmax_with_tie_break(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = j;
        }
    }
    best
}

fn record_from_features(
    features: &WindowFeatures,
    model: &MvhpModel,
    i: usize,
    k: usize,
    time: f64,
) -> Result<AttributionRecord> {
    let a_row = model.excitation_row(i);
    let feat = features.event_features(i, k);
    let lambda = model.base_rate(i) + dot(a_row, feat);
    if lambda <= 0.0 {
        return Err(Error::ZeroIntensityEvent {
            process: i,
            index: k,
        });
    }
    let mut probabilities = Vec::with_capacity(a_row.len() + 1);
    probabilities.push(model.base_rate(i) / lambda);
    for (aj, sj) in a_row.iter().zip(feat) {
        probabilities.push(aj * sj / lambda);
    }
    let source = argmax_with_tie_break(&probabilities);
    Ok(AttributionRecord {
        target: i,
        index: k,
        time,
        probabilities,
        source,
    })
}

fn check_dims(model: &MvhpModel, streams: &EventStreams) -> Result<()> {
    if model.num_processes() != streams.num_processes() {
        return Err(Error::DimensionMismatch(format!(
            "model has P = {}, streams have P = {}",
            model.num_processes(),
            streams.num_processes()
        )));
    }
    Ok(())
}

/// Attribute a single event of process `i`.
pub fn attribute_event(
    model: &MvhpModel,
    streams: &EventStreams,
    i: usize,
    k: usize,
) -> Result<AttributionRecord> {
    check_dims(model, streams)?;
    let events = streams.events(i)?;
    if k >= events.len() {
        return Err(Error::EventIndexOutOfRange {
            process: i,
            index: k,
            count: events.len(),
        });
    }
    let features = WindowFeatures::build(streams, model.kernel());
    record_from_features(&features, model, i, k, events[k])
}

/// Attribute every event in the window. Returns one vector per target
/// process, ordered by event index; targets are processed in parallel.
pub fn attribute_window(
    model: &MvhpModel,
    streams: &EventStreams,
) -> Result<Vec<Vec<AttributionRecord>>> {
    check_dims(model, streams)?;
    let features = WindowFeatures::build(streams, model.kernel());
    let p = streams.num_processes();
    let per_target: Vec<Result<Vec<AttributionRecord>>> = exec::map_indexed(p, |i| {
        let events = streams.events(i)?;
        events
            .iter()
            .enumerate()
            .map(|(k, &t)| record_from_features(&features, model, i, k, t))
            .collect()
    });
    per_target.into_iter().collect()
}

/// Estimate the influence matrix: per target process, the frequency with
/// which each source won the attribution argmax.
pub fn pim_estimate(model: &MvhpModel, streams: &EventStreams) -> Result<PimMatrix> {
    let attributions = attribute_window(model, streams)?;
    let p = streams.num_processes();
    let mut rows = Vec::with_capacity(p);
    let mut counts = Vec::with_capacity(p);
    for records in &attributions {
        counts.push(records.len());
        if records.is_empty() {
            rows.push(None);
            continue;
        }
        let mut freq = vec![0.0; p + 1];
        for record in records {
            freq[record.source] += 1.0;
        }
        let n = records.len() as f64;
        for f in &mut freq {
            *f /= n;
        }
        rows.push(Some(freq));
    }
    Ok(PimMatrix {
        rows,
        counts,
        window: [streams.t_start(), streams.t_end()],
    })
}

/// All directed edges `source -> target` with `a[target][source] > epsilon`,
/// in (target, source) order. `epsilon` should sit at or above the fitting
/// floor so entries pinned "off" are not reported as edges.
pub fn granger_edges(model: &MvhpModel, epsilon: f64) -> Result<Vec<GrangerEdge>> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let p = model.num_processes();
    let mut edges = Vec::new();
    for target in 0..p {
        for source in 0..p {
            let weight = model.excite(target, source);
            if weight > epsilon {
                edges.push(GrangerEdge {
                    source,
                    target,
                    weight,
                    self_loop: source == target,
                });
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{fit_mle, FitConfig};
    use crate::model::KernelSpec;
    use crate::simulate::{simulate_thinning, SimConfig};
    use crate::testutil::{random_feasible_model, random_streams};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn kernel() -> KernelSpec {
        KernelSpec::default()
    }

    /// From-scratch O(N^2) attribution, recomputing every kernel sum by a
    /// direct scan over all earlier events. Mirrors the documented tie-break.
    fn brute_force_pim(model: &MvhpModel, streams: &EventStreams) -> Vec<Option<Vec<f64>>> {
        let p = streams.num_processes();
        let beta = model.kernel().beta();
        let mut rows = Vec::with_capacity(p);
        for i in 0..p {
            let events = streams.events(i).unwrap();
            if events.is_empty() {
                rows.push(None);
                continue;
            }
            let mut freq = vec![0.0; p + 1];
            for &t in events {
                let mut probs = vec![model.base_rate(i)];
                for j in 0..p {
                    let s: f64 = streams
                        .events(j)
                        .unwrap()
                        .iter()
                        .filter(|&&u| u < t)
                        .map(|&u| (-beta * (t - u)).exp())
                        .sum();
                    probs.push(model.excite(i, j) * s);
                }
                let total: f64 = probs.iter().sum();
                for q in &mut probs {
                    *q /= total;
                }
                let mut best = 0;
                for (j, &q) in probs.iter().enumerate().skip(1) {
                    if q > probs[best] {
                        best = j;
                    }
                }
                freq[best] += 1.0;
            }
            let n = events.len() as f64;
            for f in &mut freq {
                *f /= n;
            }
            rows.push(Some(freq));
        }
        rows
    }

    #[test]
    fn no_excitation_attributes_everything_to_background() {
        let model = MvhpModel::new(
            vec![0.5, 0.8],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            kernel(),
        )
        .unwrap();
        let streams = EventStreams::new(vec![vec![1.0, 2.0], vec![1.5]], 0.0, 3.0).unwrap();
        for records in attribute_window(&model, &streams).unwrap() {
            for r in records {
                assert_eq!(r.probabilities[0], 1.0);
                assert_eq!(r.source, 0);
                assert!(r.probabilities[1..].iter().all(|&q| q == 0.0));
            }
        }
        let pim = pim_estimate(&model, &streams).unwrap();
        assert_eq!(pim.entry(0, 0), Some(1.0));
        assert_eq!(pim.entry(1, 0), Some(1.0));
    }

    #[test]
    fn hand_computed_two_event_attribution() {
        // b=0.5, a=1, beta=1, events {1, 2}: at t=2 the self share is
        // e^{-1}/(0.5 + e^{-1}) and the background the complement.
        let model = MvhpModel::new(vec![0.5], vec![vec![1.0]], kernel()).unwrap();
        let streams = EventStreams::new(vec![vec![1.0, 2.0]], 0.0, 3.0).unwrap();
        let record = attribute_event(&model, &streams, 0, 1).unwrap();
        let e = (-1.0_f64).exp();
        assert!((record.probabilities[1] - e / (0.5 + e)).abs() < 1e-12);
        assert!((record.probabilities[0] - 0.5 / (0.5 + e)).abs() < 1e-12);
        assert!((record.probabilities[1] - 0.42388).abs() < 1e-5);
        assert!((record.probabilities[0] - 0.57612).abs() < 1e-5);
        assert_eq!(record.source, 0); // background is the larger share
    }

    #[test]
    fn attribution_vectors_sum_to_one() {
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..10 {
            let p = rng.random_range(1..4);
            let model = random_feasible_model(&mut rng, p);
            let streams = random_streams(&mut rng, p, 40.0, 120);
            for records in attribute_window(&model, &streams).unwrap() {
                for r in records {
                    let sum: f64 = r.probabilities.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    assert!(r.probabilities.iter().all(|&q| (0.0..=1.0).contains(&q)));
                }
            }
        }
    }

    #[test]
    fn zero_intensity_event_is_an_error() {
        let model = MvhpModel::new(vec![0.0], vec![vec![0.5]], kernel()).unwrap();
        let streams = EventStreams::new(vec![vec![1.0]], 0.0, 2.0).unwrap();
        assert!(matches!(
            attribute_event(&model, &streams, 0, 0).unwrap_err(),
            Error::ZeroIntensityEvent {
                process: 0,
                index: 0
            }
        ));
    }

    #[test]
    fn event_index_bounds_are_checked() {
        let model = MvhpModel::new(vec![1.0], vec![vec![0.0]], kernel()).unwrap();
        let streams = EventStreams::new(vec![vec![1.0]], 0.0, 2.0).unwrap();
        assert!(matches!(
            attribute_event(&model, &streams, 0, 1).unwrap_err(),
            Error::EventIndexOutOfRange {
                process: 0,
                index: 1,
                count: 1
            }
        ));
    }

    #[test]
    fn pim_matches_brute_force_oracle_exactly() {
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..20 {
            let p = rng.random_range(1..4);
            let model = random_feasible_model(&mut rng, p);
            let streams = random_streams(&mut rng, p, 50.0, 200);
            let fast = pim_estimate(&model, &streams).unwrap();
            let brute = brute_force_pim(&model, &streams);
            assert_eq!(fast.rows, brute);
        }
    }

    #[test]
    fn pim_rows_sum_to_one_or_are_undefined() {
        let mut rng = StdRng::seed_from_u64(43);
        let p = 3;
        let model = random_feasible_model(&mut rng, p);
        let streams = random_streams(&mut rng, p, 30.0, 90);
        let pim = pim_estimate(&model, &streams).unwrap();
        for (i, row) in pim.rows.iter().enumerate() {
            match row {
                Some(values) => {
                    assert_eq!(values.len(), p + 1);
                    let sum: f64 = values.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    assert!(pim.counts[i] > 0);
                }
                None => assert_eq!(pim.counts[i], 0),
            }
        }
    }

    #[test]
    fn undefined_rows_serialize_as_null() {
        let model = MvhpModel::new(
            vec![1.0, 1.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            kernel(),
        )
        .unwrap();
        let streams = EventStreams::new(vec![vec![], vec![1.0]], 0.0, 2.0).unwrap();
        let pim = pim_estimate(&model, &streams).unwrap();
        let json = serde_json::to_string(&pim).unwrap();
        assert!(json.contains("[null,[1.0,0.0,0.0]]"), "{json}");
    }

    #[test]
    fn row_scaling_leaves_attributions_bitwise_unchanged() {
        // Scaling (b_i, a[i][.]) by a power of two is exact in floating
        // point, so the shares must be bit-identical.
        let streams =
            EventStreams::new(vec![vec![0.5, 1.25, 2.0], vec![0.75, 1.5]], 0.0, 3.0).unwrap();
        let base = MvhpModel::new(
            vec![0.3, 0.4],
            vec![vec![0.2, 0.1], vec![0.05, 0.3]],
            kernel(),
        )
        .unwrap();
        let scaled = MvhpModel::new(
            vec![0.3 * 4.0, 0.4],
            vec![vec![0.2 * 4.0, 0.1 * 4.0], vec![0.05, 0.3]],
            kernel(),
        )
        .unwrap();
        let a = attribute_window(&base, &streams).unwrap();
        let b = attribute_window(&scaled, &streams).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_ties_prefer_background_then_lowest_index() {
        // Background tie: choose b = a * S with the identical float
        // expression, so the two shares are bit-equal.
        let s = (-0.7_f64).exp();
        let model = MvhpModel::new(vec![0.5 * s], vec![vec![0.5]], kernel()).unwrap();
        let streams = EventStreams::new(vec![vec![0.0, 0.7]], 0.0, 1.0).unwrap();
        let record = attribute_event(&model, &streams, 0, 1).unwrap();
        assert_eq!(record.probabilities[0], record.probabilities[1]);
        assert_eq!(record.source, 0);

        // Cross-source tie: identical event times and equal weights make the
        // two source shares bit-equal; the lower process index wins.
        let model = MvhpModel::new(
            vec![0.1, 0.1, 0.1],
            vec![
                vec![0.0, 0.5, 0.5],
                vec![0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0],
            ],
            kernel(),
        )
        .unwrap();
        let streams = EventStreams::new(vec![vec![2.0], vec![1.0], vec![1.0]], 0.0, 3.0).unwrap();
        let record = attribute_event(&model, &streams, 0, 0).unwrap();
        assert_eq!(record.probabilities[2], record.probabilities[3]);
        assert_eq!(record.source, 2); // source process 1, not 2
    }

    #[test]
    fn classification_boundaries_are_exact() {
        use InfluenceClass::*;
        let ulp = |x: f64| f64::from_bits(x.to_bits() + 1);
        assert_eq!(classify(0.0).unwrap(), Weak);
        assert_eq!(classify(0.2).unwrap(), Weak);
        assert_eq!(classify(ulp(0.2)).unwrap(), Significant);
        assert_eq!(classify(0.200001).unwrap(), Significant);
        assert_eq!(classify(0.6).unwrap(), Significant);
        assert_eq!(classify(ulp(0.6)).unwrap(), Strong);
        assert_eq!(classify(0.99).unwrap(), Strong);
        assert_eq!(classify(ulp(0.99)).unwrap(), Decisive);
        assert_eq!(classify(0.991).unwrap(), Decisive);
        assert_eq!(classify(1.0).unwrap(), Decisive);
        assert!(classify(-0.1).is_err());
        assert!(classify(1.1).is_err());
        assert!(classify(f64::NAN).is_err());
    }

    #[test]
    fn classification_is_monotone() {
        let mut last = InfluenceClass::Weak;
        for k in 0..=1000 {
            let class = classify(k as f64 / 1000.0).unwrap();
            assert!(class >= last);
            last = class;
        }
    }

    #[test]
    fn granger_edges_read_off_the_matrix() {
        let empty = MvhpModel::new(
            vec![0.1, 0.1],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            kernel(),
        )
        .unwrap();
        assert!(granger_edges(&empty, 1e-6).unwrap().is_empty());

        let model = MvhpModel::new(
            vec![0.1, 0.1],
            vec![vec![0.5, 0.0], vec![0.3, 0.0]],
            kernel(),
        )
        .unwrap();
        let edges = granger_edges(&model, 1e-6).unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!((edges[0].source, edges[0].target), (0, 0));
        assert!(edges[0].self_loop);
        assert_eq!((edges[1].source, edges[1].target), (0, 1));
        assert!(!edges[1].self_loop);
        assert!(granger_edges(&model, 0.0).is_err());
    }

    #[test]
    fn granger_support_recovery_across_seeds() {
        let truth = MvhpModel::new(
            vec![0.2, 0.3],
            vec![vec![0.5, 0.3], vec![0.0, 0.6]],
            kernel(),
        )
        .unwrap();
        let expected: Vec<(usize, usize)> = vec![(0, 0), (1, 0), (1, 1)];
        let mut hits = 0;
        for seed in 0..10 {
            let streams =
                simulate_thinning(&truth, SimConfig::new(1000.0, 500 + seed).unwrap()).unwrap();
            let report = fit_mle(&streams, kernel(), &FitConfig::default()).unwrap();
            let fitted = report.model().unwrap();
            let edges: Vec<(usize, usize)> = granger_edges(&fitted, 0.05)
                .unwrap()
                .iter()
                .map(|e| (e.source, e.target))
                .collect();
            if edges == expected {
                hits += 1;
            }
        }
        assert!(hits >= 9, "support recovered in only {hits}/10 seeds");
    }

    #[test]
    fn process_view_renormalizes_over_sources() {
        let pim = PimMatrix {
            rows: vec![Some(vec![0.5, 0.3, 0.2]), Some(vec![1.0, 0.0, 0.0]), None],
            counts: vec![10, 4, 0],
            window: [0.0, 48.0],
        };
        let view = pim.process_view();
        let row0 = view[0].as_ref().unwrap();
        assert!((row0[0] - 0.6).abs() < 1e-12);
        assert!((row0[1] - 0.4).abs() < 1e-12);
        assert!(view[1].is_none()); // all-background row has no process view
        assert!(view[2].is_none());
    }

    #[test]
    fn pim_csv_layout() {
        let pim = PimMatrix {
            rows: vec![Some(vec![0.5, 0.25, 0.25]), None],
            counts: vec![4, 0],
            window: [0.0, 48.0],
        };
        let labels = vec!["alpha".to_string(), "beta".to_string()];
        let csv = pim.to_csv(&labels).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "target,background,alpha,beta");
        assert!(lines[1].starts_with("alpha,0.5"));
        assert_eq!(lines[2], "beta,,,");
        assert!(pim.to_csv(&labels[..1]).is_err());
    }

    #[test]
    fn pim_is_invariant_to_consistent_time_rescaling() {
        let model = MvhpModel::new(
            vec![0.3, 0.2],
            vec![vec![0.4, 0.2], vec![0.1, 0.3]],
            kernel(),
        )
        .unwrap();
        let streams = simulate_thinning(&model, SimConfig::new(200.0, 9).unwrap()).unwrap();
        let scaled_streams = EventStreams::new(
            streams
                .streams()
                .iter()
                .map(|s| s.iter().map(|t| t * 60.0).collect())
                .collect(),
            0.0,
            200.0 * 60.0,
        )
        .unwrap();
        let scaled_model = MvhpModel::new(
            vec![0.3 / 60.0, 0.2 / 60.0],
            vec![vec![0.4 / 60.0, 0.2 / 60.0], vec![0.1 / 60.0, 0.3 / 60.0]],
            KernelSpec::new(1.0 / 60.0).unwrap(),
        )
        .unwrap();
        let a = pim_estimate(&model, &streams).unwrap();
        let b = pim_estimate(&scaled_model, &scaled_streams).unwrap();
        assert_eq!(a.rows, b.rows);
    }
}
