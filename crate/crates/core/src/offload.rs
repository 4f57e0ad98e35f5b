//! Sequential offloading of old data and the effect of a faster data flow.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curves::{equivalent_size, role, Experiment, InversionOrder, LearningCurveFit};
use crate::density::SamplingDensity;
use crate::error::{Error, Result};
use crate::net::Window;
use crate::numeric::{derive_seed, serde_float};
use crate::substitution::{equivalent_time, substitution_sizes};

pub const MAX_ITERATIONS: usize = 64;
pub const MIN_CUT_FRACTION: f64 = 1e-6;

/// Size ratio a substitution gain must beat for a cut to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `n_prev / n_new`, the reciprocal of the retained fraction.
    #[default]
    RetainedFraction,
    /// `n_prev / (n_prev - n_new)`, size over deleted size.
    DeletedFraction,
}

impl ThresholdRule {
    fn threshold(self, n_prev: u64, n_new: u64) -> f64 {
        match self {
            ThresholdRule::RetainedFraction => n_prev as f64 / n_new as f64,
            ThresholdRule::DeletedFraction => n_prev as f64 / (n_prev - n_new) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadOptions {
    pub threshold: ThresholdRule,
    pub max_iterations: usize,
    /// Cuts narrower than this fraction of the original window end are
    /// treated as no cut.
    pub min_cut_fraction: f64,
    pub order: InversionOrder,
}

impl Default for OffloadOptions {
    fn default() -> Self {
        Self {
            threshold: ThresholdRule::default(),
            max_iterations: MAX_ITERATIONS,
            min_cut_fraction: MIN_CUT_FRACTION,
            order: InversionOrder::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadStep {
    pub iteration: usize,
    pub t_prev: f64,
    /// Proposed cut: the equivalent time of the window `[0, t_prev]`.
    pub t_new: f64,
    /// Equivalent time of the truncated window `[0, t_new]`.
    pub t_truncated: f64,
    pub n_prev: u64,
    pub n_new: u64,
    pub n_deleted: u64,
    #[serde(with = "serde_float")]
    pub gain_ratio: f64,
    #[serde(with = "serde_float")]
    pub threshold: f64,
    pub accepted: bool,
    pub equiv_size_before: Option<f64>,
    pub equiv_size_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadTrace {
    pub steps: Vec<OffloadStep>,
    pub final_window: (f64, f64),
    pub final_size: u64,
    pub final_equivalent_time: f64,
}

impl OffloadTrace {
    pub fn accepted_steps(&self) -> impl Iterator<Item = &OffloadStep> {
        self.steps.iter().filter(|s| s.accepted)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.steps)?)
    }

    /// CSV `iteration,t_prev,t_new,n_prev,n_new,gain_ratio,threshold,accepted`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "t_prev",
            "t_new",
            "n_prev",
            "n_new",
            "gain_ratio",
            "threshold",
            "accepted",
        ])?;
        for s in &self.steps {
            w.write_record([
                s.iteration.to_string(),
                s.t_prev.to_string(),
                s.t_new.to_string(),
                s.n_prev.to_string(),
                s.n_new.to_string(),
                s.gain_ratio.to_string(),
                s.threshold.to_string(),
                s.accepted.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn window_equivalent(
    exp: &Experiment,
    density: &SamplingDensity,
    n: u64,
    fit: &LearningCurveFit,
    order: InversionOrder,
) -> Option<f64> {
    if n == 0 {
        return Some(0.0);
    }
    equivalent_size(exp, density, n, fit, order)
        .ok()
        .map(|r| r.equivalent_size)
}

/// Greedy offloading of the oldest data.
///
/// Each iteration proposes cutting the window `[0, t_prev]` at its
/// equivalent time `t*`, which leaves `n_new = n_prev · Λ(t*)` samples with
/// equivalent time `t**`. The cut is kept when
/// `f_{n_new}(t**, t*)` exceeds the threshold; the loop stops at the first
/// rejected cut. Monte Carlo gains use fresh streams on every iteration.
pub fn sequential_offload(
    exp: &Experiment,
    density: &SamplingDensity,
    window: Window,
    n: u64,
    fit: &LearningCurveFit,
    opts: &OffloadOptions,
) -> Result<OffloadTrace> {
    if n < 2 {
        return Err(Error::InvalidArgument("offloading needs n >= 2".into()));
    }
    if window.lo != 0.0 {
        return Err(Error::InvalidArgument("offload windows start at time 0".into()));
    }
    let min_cut = opts.min_cut_fraction * window.hi;
    let mut current = density.clone();
    let mut t_prev = window.hi;
    let mut n_prev = n;
    let mut steps = Vec::new();
    let mut final_time = None;

    for iteration in 0..opts.max_iterations.max(1) {
        let et = equivalent_time(exp.path, &current, Window::new(0.0, t_prev)?)?;
        let t_new = et.t_star;
        final_time.get_or_insert(t_new);
        let kept = current.cdf(t_new).clamp(0.0, 1.0);
        let n_new = ((n_prev as f64 * kept).round() as u64).min(n_prev);
        let step_exp = Experiment {
            seed: derive_seed(exp.seed, &[role::OFFLOAD, iteration as u64]),
            ..*exp
        };
        let before = window_equivalent(&step_exp, &current, n_prev, fit, opts.order);
        let mut step = OffloadStep {
            iteration,
            t_prev,
            t_new,
            t_truncated: t_new,
            n_prev,
            n_new,
            n_deleted: n_prev - n_new,
            gain_ratio: 0.0,
            threshold: f64::INFINITY,
            accepted: false,
            equiv_size_before: before,
            equiv_size_after: None,
        };
        if n_new == 0 {
            step.equiv_size_after = Some(0.0);
            steps.push(step);
            break;
        }
        let truncated = current.truncated(t_new)?;
        step.equiv_size_after = window_equivalent(&step_exp, &truncated, n_new, fit, opts.order);
        step.threshold = if n_new == n_prev {
            1.0
        } else {
            opts.threshold.threshold(n_prev, n_new)
        };
        if t_prev - t_new < min_cut {
            step.gain_ratio = 1.0;
            steps.push(step);
            break;
        }
        let t_star2 = equivalent_time(exp.path, &truncated, Window::new(0.0, t_new)?)?.t_star;
        step.t_truncated = t_star2;
        step.gain_ratio = if t_star2 == t_new {
            1.0
        } else {
            substitution_sizes(&step_exp, t_star2, t_new, &[n_new], fit, opts.order)?[0]
        };
        step.accepted = step.gain_ratio > step.threshold;
        let accepted = step.accepted;
        steps.push(step);
        if !accepted {
            break;
        }
        current = truncated;
        t_prev = t_new;
        n_prev = n_new;
        final_time = Some(t_star2);
    }
    Ok(OffloadTrace {
        steps,
        final_window: (0.0, t_prev),
        final_size: n_prev,
        final_equivalent_time: final_time.unwrap_or(0.0),
    })
}

/// A collection rate `ψ_L` and its scaled copy `ψ_H = α ψ_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowScenario {
    pub base_rate: SamplingDensity,
    pub multiplier: f64,
    pub horizon: f64,
}

impl FlowScenario {
    pub fn new(base_rate: SamplingDensity, multiplier: f64, horizon: f64) -> Result<Self> {
        if base_rate.flow_volume().is_none() {
            return Err(Error::InvalidDensity("flow scenario needs a flow density".into()));
        }
        if !(multiplier.is_finite() && multiplier >= 1.0) {
            return Err(Error::InvalidArgument(format!("multiplier {multiplier} must be >= 1")));
        }
        Ok(Self {
            base_rate,
            multiplier,
            horizon,
        })
    }

    pub fn high_rate(&self) -> Result<SamplingDensity> {
        self.base_rate.scaled_flow(self.multiplier)
    }

    /// Dataset sizes `∫ψ_L` and `∫ψ_H`, rounded.
    pub fn sizes(&self) -> (u64, u64) {
        let v = self.base_rate.flow_volume().unwrap_or(0.0);
        (v.round() as u64, (v * self.multiplier).round() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowComparison {
    pub multiplier: f64,
    pub low: OffloadTrace,
    pub high: OffloadTrace,
    pub low_equivalent_time: f64,
    pub high_equivalent_time: f64,
    /// Every iteration accepted under `ψ_L` is also accepted under `ψ_H`.
    pub accepted_subset: bool,
    /// `t*_H <= t*_L`.
    pub high_is_closer: bool,
}

/// Runs the offloading loop under both rates of `scenario` with the same
/// seed and compares the outcomes.
pub fn flow_scaling_analysis(
    exp: &Experiment,
    scenario: &FlowScenario,
    fit: &LearningCurveFit,
    opts: &OffloadOptions,
) -> Result<FlowComparison> {
    let (n_low, n_high) = scenario.sizes();
    let window = Window::new(0.0, scenario.horizon)?;
    let low = sequential_offload(exp, &scenario.base_rate, window, n_low, fit, opts)?;
    let high = sequential_offload(exp, &scenario.high_rate()?, window, n_high, fit, opts)?;
    let accepted_subset = low
        .steps
        .iter()
        .filter(|s| s.accepted)
        .all(|s| high.steps.get(s.iteration).is_some_and(|h| h.accepted));
    Ok(FlowComparison {
        multiplier: scenario.multiplier,
        low_equivalent_time: low.final_equivalent_time,
        high_equivalent_time: high.final_equivalent_time,
        accepted_subset,
        high_is_closer: high.final_equivalent_time <= low.final_equivalent_time,
        low,
        high,
    })
}
