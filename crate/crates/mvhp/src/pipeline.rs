//! Sliding-window orchestration: plan overlapping windows over a span, fit a
//! model per window on that window's events only, gate each window on
//! goodness of fit, estimate influence, and assemble a cross-process
//! influence timeline.
//!
//! Windows are half-open `[start, end)` so events on a shared boundary of
//! overlapping windows are counted once. Pre-window history is truncated —
//! each window is fitted as if the world started at its left edge — which is
//! a deliberate boundary effect to be aware of near window starts. Windows
//! run independently (and in parallel); per-window failures are recorded in
//! the result rather than aborting the batch.

use crate::error::{Error, Result};
use crate::estimator::{fit_mle, FitConfig, FitReport};
use crate::events::EventStreams;
use crate::exec;
use crate::gof::{pooled_gof, GofReport};
use crate::influence::{classify, pim_estimate, InfluenceClass, PimMatrix};
use crate::model::KernelSpec;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// A resolved window schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub length: f64,
    pub stride: f64,
    pub span: [f64; 2],
    /// Half-open `[start, end)` intervals, in chronological order.
    pub windows: Vec<[f64; 2]>,
}

/// Lay out `floor((span - length) / stride) + 1` windows of `length` hours
/// every `stride` hours, starting at the span origin.
pub fn plan_windows(span: [f64; 2], length: f64, stride: f64) -> Result<WindowPlan> {
    let [t0, t1] = span;
    if !length.is_finite() || length <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "window length must be positive, got {length}"
        )));
    }
    if !stride.is_finite() || stride <= 0.0 || stride > length {
        return Err(Error::InvalidParameter(format!(
            "stride must satisfy 0 < stride <= length, got stride {stride} for length {length}"
        )));
    }
    if !t0.is_finite() || !t1.is_finite() || t1 - t0 < length {
        return Err(Error::SpanTooShort { t0, t1, length });
    }
    let count = ((t1 - t0 - length) / stride).floor() as usize + 1;
    let windows = (0..count)
        .map(|k| {
            let start = t0 + k as f64 * stride;
            [start, start + length]
        })
        .collect();
    Ok(WindowPlan {
        length,
        stride,
        span,
        windows,
    })
}

/// Pipeline controls: the fixed kernel decay, per-window fit settings, the
/// GOF gate threshold, and the timeline filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Kernel decay rate (per hour) used for every window fit.
    pub beta: f64,
    pub fit: FitConfig,
    /// A window passes the gate when its pooled KS p-value is at least this.
    pub alpha: f64,
    /// Timeline keeps cross-process influences strictly above this value.
    pub min_pim: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            fit: FitConfig::default(),
            alpha: 0.01,
            min_pim: 0.2,
        }
    }
}

/// Everything produced for one window. `fit`/`gof`/`pim` are `None` when the
/// corresponding stage could not run; the first failure is recorded in
/// `error`. The influence estimate is only computed from converged fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowResult {
    /// Absolute window interval (half-open).
    pub window: [f64; 2],
    /// Events per process inside the window.
    pub counts: Vec<usize>,
    pub fit: Option<FitReport>,
    pub gof: Option<GofReport>,
    pub pim: Option<PimMatrix>,
    pub gate_passed: bool,
    pub error: Option<String>,
}

/// One noteworthy cross-process influence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub window: [f64; 2],
    /// Source process index (background never appears in the timeline).
    pub source: usize,
    pub target: usize,
    pub pim: f64,
    pub class: InfluenceClass,
}

/// Filtered influence timeline: self-influences and weak values removed,
/// ordered by window start and then by descending influence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineReport {
    pub min_pim: f64,
    pub entries: Vec<TimelineEntry>,
}

impl TimelineReport {
    /// Human-readable markdown table, with process indices replaced by the
    /// given labels.
    pub fn to_markdown(&self, labels: &[String]) -> Result<String> {
        let mut out = String::from(
            "| window start (h) | window end (h) | source | target | influence | class |\n\
             |---|---|---|---|---|---|\n",
        );
        for e in &self.entries {
            let name = |i: usize| -> Result<&str> {
                labels
                    .get(i)
                    .map(|s| s.as_str())
                    .ok_or(Error::ProcessIndexOutOfRange {
                        index: i,
                        p: labels.len(),
                    })
            };
            out.push_str(&format!(
                "| {:.1} | {:.1} | {} | {} | {:.3} | {} |\n",
                e.window[0],
                e.window[1],
                name(e.source)?,
                name(e.target)?,
                e.pim,
                e.class
            ));
        }
        Ok(out)
    }
}

/// Full pipeline output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineResult {
    pub plan: WindowPlan,
    pub config: PipelineConfig,
    pub windows: Vec<WindowResult>,
    pub timeline: TimelineReport,
}

fn run_window(
    streams: &EventStreams,
    window: [f64; 2],
    kernel: KernelSpec,
    config: &PipelineConfig,
) -> WindowResult {
    let [start, end] = window;
    let local = match streams.restrict_shifted(start, end) {
        Ok(local) => local,
        Err(e) => {
            return WindowResult {
                window,
                counts: Vec::new(),
                fit: None,
                gof: None,
                pim: None,
                gate_passed: false,
                error: Some(e.to_string()),
            }
        }
    };
    let counts = local.counts();
    let report = match fit_mle(&local, kernel, &config.fit) {
        Ok(report) => report,
        Err(e) => {
            return WindowResult {
                window,
                counts,
                fit: None,
                gof: None,
                pim: None,
                gate_passed: false,
                error: Some(e.to_string()),
            }
        }
    };
    let model = match report.model() {
        Ok(model) => model,
        Err(e) => {
            return WindowResult {
                window,
                counts,
                fit: Some(report),
                gof: None,
                pim: None,
                gate_passed: false,
                error: Some(e.to_string()),
            }
        }
    };
    let gof = pooled_gof(&model, &local, config.alpha);
    let gate_passed = gof.as_ref().map(|g| g.passed).unwrap_or(false);
    let mut error = gof.as_ref().err().map(|e| e.to_string());
    let pim = if report.converged {
        match pim_estimate(&model, &local) {
            Ok(mut pim) => {
                pim.window = window; // identify by the absolute interval
                Some(pim)
            }
            Err(e) => {
                error.get_or_insert_with(|| e.to_string());
                None
            }
        }
    } else {
        None
    };
    WindowResult {
        window,
        counts,
        fit: Some(report),
        gof: gof.ok(),
        pim,
        gate_passed,
        error,
    }
}

/// Run fit + GOF + influence on every planned window (in parallel, collected
/// in plan order) and build the timeline.
pub fn run_pipeline(
    streams: &EventStreams,
    plan: &WindowPlan,
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    if plan.span[0] < streams.t_start() || plan.span[1] > streams.t_end() {
        return Err(Error::TimeOutsideWindow {
            t: plan.span[0].min(plan.span[1]),
            t_start: streams.t_start(),
            t_end: streams.t_end(),
        });
    }
    let kernel = KernelSpec::new(config.beta)?;
    let windows = exec::map_indexed(plan.windows.len(), |w| {
        run_window(streams, plan.windows[w], kernel, config)
    });
    let timeline = build_timeline(&windows, config.min_pim)?;
    Ok(PipelineResult {
        plan: plan.clone(),
        config: *config,
        windows,
        timeline,
    })
}

/// Extract noteworthy cross-process influences from gate-passed windows:
/// entries with influence strictly above `min_pim`, self-influences and the
/// background source excluded, ordered by window start then descending
/// influence.
pub fn build_timeline(windows: &[WindowResult], min_pim: f64) -> Result<TimelineReport> {
    if !(0.0..=1.0).contains(&min_pim) {
        return Err(Error::InvalidParameter(format!(
            "min_pim must lie in [0, 1], got {min_pim}"
        )));
    }
    let mut entries = Vec::new();
    for result in windows {
        if !result.gate_passed {
            continue;
        }
        let Some(pim) = &result.pim else { continue };
        for (target, row) in pim.rows.iter().enumerate() {
            let Some(row) = row else { continue };
            for source in 0..pim.num_processes() {
                if source == target {
                    continue;
                }
                let value = row[source + 1];
                if value > min_pim {
                    entries.push(TimelineEntry {
                        window: result.window,
                        source,
                        target,
                        pim: value,
                        class: classify(value)?,
                    });
                }
            }
        }
    }
    entries.sort_by(|a, b| {
        a.window[0]
            .total_cmp(&b.window[0])
            .then(b.pim.total_cmp(&a.pim))
            .then(a.target.cmp(&b.target))
            .then(a.source.cmp(&b.source))
    });
    Ok(TimelineReport { min_pim, entries })
}

/// Write a stable results directory:
///
/// ```text
/// dir/
///   index.json            span, plan, config, per-window summary + file map
///   timeline.json
///   timeline.md
///   windows/window_NNN.json
///   windows/pim_NNN.csv       (windows with a defined influence estimate)
///   windows/heatmap_NNN.svg   (same)
/// ```
///
/// JSON outputs are deterministic: rerunning on identical inputs reproduces
/// identical bytes.
pub fn write_results(dir: &Path, result: &PipelineResult, labels: &[String]) -> Result<()> {
    #[derive(Serialize)]
    struct IndexEntry<'a> {
        window: [f64; 2],
        counts: &'a [usize],
        gate_passed: bool,
        converged: Option<bool>,
        error: &'a Option<String>,
        file: String,
    }
    #[derive(Serialize)]
    struct IndexFile<'a> {
        labels: &'a [String],
        plan: &'a WindowPlan,
        config: &'a PipelineConfig,
        windows: Vec<IndexEntry<'a>>,
    }

    let windows_dir = dir.join("windows");
    fs::create_dir_all(&windows_dir)?;

    let mut index_entries = Vec::with_capacity(result.windows.len());
    for (w, window) in result.windows.iter().enumerate() {
        let file = format!("windows/window_{w:03}.json");
        fs::write(dir.join(&file), serde_json::to_string_pretty(window)?)?;
        if let Some(pim) = &window.pim {
            fs::write(
                windows_dir.join(format!("pim_{w:03}.csv")),
                pim.to_csv(labels)?,
            )?;
            fs::write(
                windows_dir.join(format!("heatmap_{w:03}.svg")),
                crate::heatmap::render_heatmap_svg(pim, labels)?,
            )?;
        }
        index_entries.push(IndexEntry {
            window: window.window,
            counts: &window.counts,
            gate_passed: window.gate_passed,
            converged: window.fit.as_ref().map(|f| f.converged),
            error: &window.error,
            file,
        });
    }

    let index = IndexFile {
        labels,
        plan: &result.plan,
        config: &result.config,
        windows: index_entries,
    };
    fs::write(
        dir.join("index.json"),
        serde_json::to_string_pretty(&index)?,
    )?;
    fs::write(
        dir.join("timeline.json"),
        serde_json::to_string_pretty(&result.timeline)?,
    )?;
    fs::write(
        dir.join("timeline.md"),
        result.timeline.to_markdown(labels)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MvhpModel;
    use crate::simulate::{simulate_thinning, SimConfig};

    #[test]
    fn three_overlapping_windows_over_96_hours() {
        let plan = plan_windows([0.0, 96.0], 48.0, 24.0).unwrap();
        assert_eq!(plan.windows, vec![[0.0, 48.0], [24.0, 72.0], [48.0, 96.0]]);
    }

    #[test]
    fn stride_equal_to_length_tiles_disjointly() {
        let plan = plan_windows([0.0, 96.0], 48.0, 48.0).unwrap();
        assert_eq!(plan.windows, vec![[0.0, 48.0], [48.0, 96.0]]);
    }

    #[test]
    fn thirty_eight_day_span_produces_37_windows() {
        // floor((912 - 48) / 24) + 1 = 37; last window is [864, 912].
        let plan = plan_windows([0.0, 912.0], 48.0, 24.0).unwrap();
        assert_eq!(plan.windows.len(), 37);
        assert_eq!(plan.windows[0], [0.0, 48.0]);
        assert_eq!(*plan.windows.last().unwrap(), [864.0, 912.0]);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        assert!(matches!(
            plan_windows([0.0, 40.0], 48.0, 24.0).unwrap_err(),
            Error::SpanTooShort { .. }
        ));
        assert!(plan_windows([0.0, 96.0], 0.0, 24.0).is_err());
        assert!(plan_windows([0.0, 96.0], 48.0, 0.0).is_err());
        assert!(plan_windows([0.0, 96.0], 24.0, 48.0).is_err()); // stride > length
    }

    fn stationary_streams(horizon: f64, seed: u64) -> EventStreams {
        let model = MvhpModel::new(vec![1.0], vec![vec![0.2]], KernelSpec::default()).unwrap();
        simulate_thinning(&model, SimConfig::new(horizon, seed).unwrap()).unwrap()
    }

    #[test]
    fn boundary_events_belong_to_the_later_window() {
        let streams = EventStreams::new(vec![vec![1.0, 24.0, 30.0]], 0.0, 48.0).unwrap();
        let plan = plan_windows([0.0, 48.0], 24.0, 24.0).unwrap();
        let result = run_pipeline(&streams, &plan, &PipelineConfig::default()).unwrap();
        assert_eq!(result.windows[0].counts, vec![1]); // event at 24.0 excluded
        assert_eq!(result.windows[1].counts, vec![2]); // and included here
    }

    #[test]
    fn empty_window_fails_gate_gracefully() {
        let streams = EventStreams::new(vec![vec![]], 0.0, 96.0).unwrap();
        let plan = plan_windows([0.0, 96.0], 48.0, 24.0).unwrap();
        let result = run_pipeline(&streams, &plan, &PipelineConfig::default()).unwrap();
        assert_eq!(result.windows.len(), 3);
        for window in &result.windows {
            assert!(!window.gate_passed);
            assert!(window.error.is_some());
            // The fit degenerates to the floors but the influence rows stay
            // undefined: no events means nothing to attribute.
            let pim = window.pim.as_ref().unwrap();
            assert!(pim.rows.iter().all(|r| r.is_none()));
        }
        assert!(result.timeline.entries.is_empty());
    }

    #[test]
    fn plan_outside_the_streams_is_rejected() {
        let streams = EventStreams::new(vec![vec![]], 0.0, 50.0).unwrap();
        let plan = plan_windows([0.0, 96.0], 48.0, 24.0).unwrap();
        assert!(run_pipeline(&streams, &plan, &PipelineConfig::default()).is_err());
    }

    #[test]
    fn identical_window_contents_give_identical_results() {
        // Events repeat with period 5 so the two half-open windows [0, 10)
        // and [5, 15) see bitwise-identical shifted streams.
        let events = vec![1.0, 2.0, 3.5, 6.0, 7.0, 8.5, 11.0, 12.0, 13.5];
        let streams = EventStreams::new(vec![events], 0.0, 15.0).unwrap();
        let plan = plan_windows([0.0, 15.0], 10.0, 5.0).unwrap();
        let result = run_pipeline(&streams, &plan, &PipelineConfig::default()).unwrap();
        let (a, b) = (&result.windows[0], &result.windows[1]);
        assert_eq!(a.counts, b.counts);
        let (fa, fb) = (a.fit.as_ref().unwrap(), b.fit.as_ref().unwrap());
        assert_eq!(fa.model.b, fb.model.b);
        assert_eq!(fa.model.a, fb.model.a);
        assert_eq!(
            a.gof.as_ref().map(|g| g.pooled.statistic),
            b.gof.as_ref().map(|g| g.pooled.statistic)
        );
        assert_eq!(
            a.pim.as_ref().map(|p| &p.rows),
            b.pim.as_ref().map(|p| &p.rows)
        );
    }

    #[test]
    fn rerun_is_byte_identical() {
        let streams = stationary_streams(240.0, 11);
        let plan = plan_windows([0.0, 240.0], 48.0, 24.0).unwrap();
        let config = PipelineConfig::default();
        let a = run_pipeline(&streams, &plan, &config).unwrap();
        let b = run_pipeline(&streams, &plan, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn stationary_base_rate_is_stable_across_windows() {
        let streams = stationary_streams(480.0, 13);
        let plan = plan_windows([0.0, 480.0], 48.0, 24.0).unwrap();
        let result = run_pipeline(&streams, &plan, &PipelineConfig::default()).unwrap();
        let fitted: Vec<f64> = result
            .windows
            .iter()
            .filter_map(|w| w.fit.as_ref())
            .filter(|f| f.converged)
            .map(|f| f.model.b[0])
            .collect();
        assert!(
            fitted.len() >= 15,
            "only {} converged windows",
            fitted.len()
        );
        let mean = fitted.iter().sum::<f64>() / fitted.len() as f64;
        let var = fitted.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / fitted.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.3, "coefficient of variation {cv}");
    }

    #[test]
    fn origin_shift_leaves_fits_invariant() {
        // Dyadic event times and a power-of-two shift keep every intermediate
        // subtraction exact, so the fits must agree bit for bit.
        let quantize = |t: f64| (t * 1024.0).round() / 1024.0;
        let raw = stationary_streams(96.0, 17);
        let mut events: Vec<f64> = raw
            .events(0)
            .unwrap()
            .iter()
            .map(|&t| quantize(t))
            .collect();
        events.dedup();
        let shifted: Vec<f64> = events.iter().map(|t| t + 1024.0).collect();
        let streams = EventStreams::new(vec![events], 0.0, 96.0).unwrap();
        let streams_shifted = EventStreams::new(vec![shifted], 1024.0, 1120.0).unwrap();
        let plan = plan_windows([0.0, 96.0], 48.0, 24.0).unwrap();
        let plan_shifted = plan_windows([1024.0, 1120.0], 48.0, 24.0).unwrap();
        let config = PipelineConfig::default();
        let a = run_pipeline(&streams, &plan, &config).unwrap();
        let b = run_pipeline(&streams_shifted, &plan_shifted, &config).unwrap();
        for (wa, wb) in a.windows.iter().zip(&b.windows) {
            let (fa, fb) = (wa.fit.as_ref().unwrap(), wb.fit.as_ref().unwrap());
            assert_eq!(fa.model.b, fb.model.b);
            assert_eq!(fa.model.a, fb.model.a);
        }
    }

    #[test]
    fn self_driving_data_yields_an_empty_timeline() {
        let model = MvhpModel::new(vec![0.3], vec![vec![0.7]], KernelSpec::default()).unwrap();
        let streams = simulate_thinning(&model, SimConfig::new(240.0, 19).unwrap()).unwrap();
        let plan = plan_windows([0.0, 240.0], 48.0, 24.0).unwrap();
        let result = run_pipeline(&streams, &plan, &PipelineConfig::default()).unwrap();
        // Only self-influence exists with a single process, and the timeline
        // omits self-influences of any kind.
        assert!(result.timeline.entries.is_empty());
    }

    #[test]
    fn timeline_filtering_is_monotone_and_strict() {
        let pim = PimMatrix {
            rows: vec![
                Some(vec![0.2, 0.3, 0.5, 0.0]),
                Some(vec![0.1, 0.65, 0.05, 0.2]),
                None,
            ],
            counts: vec![10, 20, 0],
            window: [0.0, 48.0],
        };
        let window = WindowResult {
            window: [0.0, 48.0],
            counts: vec![10, 20, 0],
            fit: None,
            gof: None,
            pim: Some(pim),
            gate_passed: true,
            error: None,
        };
        let loose = build_timeline(std::slice::from_ref(&window), 0.2).unwrap();
        let tight = build_timeline(std::slice::from_ref(&window), 0.5).unwrap();
        // Cross entries above 0.2: (source 1 -> target 0, 0.5) and
        // (source 0 -> target 1, 0.65). Self and background entries excluded.
        assert_eq!(loose.entries.len(), 2);
        assert!(loose.entries.iter().all(|e| e.source != e.target));
        assert!(loose.entries.iter().all(|e| e.pim > 0.2));
        assert!(loose
            .entries
            .iter()
            .all(|e| e.class >= InfluenceClass::Significant));
        // Ordered by descending influence within the window.
        assert!(loose.entries[0].pim >= loose.entries[1].pim);
        // Raising the threshold only removes entries.
        assert_eq!(tight.entries.len(), 1);
        assert!(tight.entries.iter().all(|t| loose.entries.contains(t)));
        // min_pim = 1.0 keeps nothing (strict inequality).
        let none = build_timeline(std::slice::from_ref(&window), 1.0).unwrap();
        assert!(none.entries.is_empty());
        // Gate-failed windows contribute nothing.
        let failed = WindowResult {
            gate_passed: false,
            ..window.clone()
        };
        let empty = build_timeline(&[failed], 0.2).unwrap();
        assert!(empty.entries.is_empty());
    }

    #[test]
    fn results_directory_layout_and_rerun_bytes() {
        let streams = stationary_streams(144.0, 23);
        let plan = plan_windows([0.0, 144.0], 48.0, 24.0).unwrap();
        let config = PipelineConfig::default();
        let result = run_pipeline(&streams, &plan, &config).unwrap();
        let labels = vec!["p0".to_string()];
        let dir = tempfile::tempdir().unwrap();
        write_results(dir.path(), &result, &labels).unwrap();
        for name in ["index.json", "timeline.json", "timeline.md"] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        for (w, window) in result.windows.iter().enumerate() {
            assert!(dir
                .path()
                .join(format!("windows/window_{w:03}.json"))
                .exists());
            if window.pim.is_some() {
                assert!(dir.path().join(format!("windows/pim_{w:03}.csv")).exists());
                assert!(dir
                    .path()
                    .join(format!("windows/heatmap_{w:03}.svg"))
                    .exists());
            }
        }
        let index_a = fs::read(dir.path().join("index.json")).unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let rerun = run_pipeline(&streams, &plan, &config).unwrap();
        write_results(dir_b.path(), &rerun, &labels).unwrap();
        let index_b = fs::read(dir_b.path().join("index.json")).unwrap();
        assert_eq!(index_a, index_b);
        assert_eq!(
            fs::read(dir.path().join("windows/window_000.json")).unwrap(),
            fs::read(dir_b.path().join("windows/window_000.json")).unwrap()
        );
    }
}
