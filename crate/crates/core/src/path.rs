//! Time-indexed families of categorical distributions.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distribution::{kl_divergence, CategoricalDistribution, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::numeric::stream_rng;

const HORIZON_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// Piecewise-linear interpolation between anchors, constant outside them.
    Linear,
    /// Seeded Gaussian random walk in log space around the first anchor,
    /// linearly interpolated between knots and renormalized.
    RandomWalk,
    /// First anchor with new elements gaining mass along linear ramps.
    Birth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub t: f64,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthSpec {
    pub element: u32,
    pub t: f64,
    pub mass: f64,
    #[serde(default)]
    pub ramp: f64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

/// Serialized form of a [`DriftPath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPathSpec {
    pub kind: PathKind,
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    pub anchors: Vec<AnchorSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volatility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub births: Vec<BirthSpec>,
}

#[derive(Debug, Clone)]
enum Shape {
    Linear,
    Walk { knots: Vec<f64>, logs: Vec<Vec<f64>> },
    Birth,
}

/// The family `{P_t}` for `t` in `[0, horizon]`.
///
/// Evaluation is deterministic given the spec (including its seed) and
/// continuous in `t`, so `t ↦ KL(P_0 ‖ P_t)` is continuous as well.
#[derive(Debug, Clone)]
pub struct DriftPath {
    spec: DriftPathSpec,
    anchors: Vec<(f64, CategoricalDistribution)>,
    shape: Shape,
}

impl DriftPath {
    pub fn from_spec(spec: DriftPathSpec) -> Result<Self> {
        let invalid = |m: String| Error::InvalidPath(m);
        if !(spec.horizon.is_finite() && spec.horizon > 0.0) {
            return Err(invalid(format!("horizon {} must be positive", spec.horizon)));
        }
        if spec.anchors.is_empty() {
            return Err(invalid("at least one anchor is required".into()));
        }
        let dim = spec.anchors[0].probs.len();
        let mut anchors = Vec::with_capacity(spec.anchors.len());
        let mut last_t = f64::NEG_INFINITY;
        for a in &spec.anchors {
            if !(a.t >= 0.0 && a.t <= spec.horizon) {
                return Err(invalid(format!("anchor time {} outside [0, horizon]", a.t)));
            }
            if a.t <= last_t {
                return Err(invalid("anchor times must be strictly increasing".into()));
            }
            if a.probs.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: a.probs.len(),
                });
            }
            last_t = a.t;
            anchors.push((a.t, CategoricalDistribution::smoothed(&a.probs, spec.delta)?));
        }
        let shape = match spec.kind {
            PathKind::Linear => Shape::Linear,
            PathKind::RandomWalk => {
                let steps = spec.steps.unwrap_or(64);
                let vol = spec.volatility.unwrap_or(0.1);
                if steps == 0 || !(vol.is_finite() && vol >= 0.0) {
                    return Err(invalid("random walk needs steps >= 1 and volatility >= 0".into()));
                }
                let mut rng = stream_rng(spec.seed, &[0x7761_6c6b]);
                let dt = spec.horizon / steps as f64;
                let knots: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
                let base: Vec<f64> = anchors[0].1.probs().iter().map(|p| p.ln()).collect();
                let mut logs = vec![base.clone()];
                let mut walk = vec![0.0; dim];
                for _ in 0..steps {
                    for w in walk.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *w += vol * dt.sqrt() * z;
                    }
                    logs.push(base.iter().zip(&walk).map(|(b, w)| b + w).collect());
                }
                Shape::Walk { knots, logs }
            }
            PathKind::Birth => {
                let mut total = 0.0;
                for b in &spec.births {
                    if b.element as usize >= dim {
                        return Err(invalid(format!("birth element {} out of range", b.element)));
                    }
                    if !(0.0..=spec.horizon).contains(&b.t) || b.ramp.is_nan() || b.ramp < 0.0 {
                        return Err(invalid("birth time must lie in [0, horizon], ramp >= 0".into()));
                    }
                    if b.mass.is_nan() || b.mass < 0.0 {
                        return Err(invalid("birth mass must be non-negative".into()));
                    }
                    total += b.mass;
                }
                if total >= 1.0 {
                    return Err(invalid(format!("birth masses sum to {total} >= 1")));
                }
                Shape::Birth
            }
        };
        Ok(Self {
            spec,
            anchors,
            shape,
        })
    }

    /// Two-anchor linear path over `[0, horizon]`.
    pub fn linear(start: &CategoricalDistribution, end: &CategoricalDistribution, horizon: f64) -> Result<Self> {
        Self::from_spec(DriftPathSpec {
            kind: PathKind::Linear,
            seed: 0,
            horizon,
            anchors: vec![
                AnchorSpec { t: 0.0, probs: start.probs().to_vec() },
                AnchorSpec { t: horizon, probs: end.probs().to_vec() },
            ],
            delta: DEFAULT_DELTA,
            volatility: None,
            steps: None,
            births: Vec::new(),
        })
    }

    /// Linear path through `(t, distribution)` anchors.
    pub fn piecewise_linear(anchors: &[(f64, &CategoricalDistribution)], horizon: f64) -> Result<Self> {
        Self::from_spec(DriftPathSpec {
            kind: PathKind::Linear,
            seed: 0,
            horizon,
            anchors: anchors
                .iter()
                .map(|(t, p)| AnchorSpec { t: *t, probs: p.probs().to_vec() })
                .collect(),
            delta: DEFAULT_DELTA,
            volatility: None,
            steps: None,
            births: Vec::new(),
        })
    }

    /// The same distribution at every time.
    pub fn constant(p: &CategoricalDistribution, horizon: f64) -> Result<Self> {
        Self::piecewise_linear(&[(0.0, p)], horizon)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }

    pub fn spec(&self) -> &DriftPathSpec {
        &self.spec
    }

    pub fn kind(&self) -> PathKind {
        self.spec.kind
    }

    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].1.len()
    }

    /// Times where the path may have a kink; quadrature splits there.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = match &self.shape {
            Shape::Linear => self.anchors.iter().map(|(t, _)| *t).collect(),
            Shape::Walk { knots, .. } => knots.clone(),
            Shape::Birth => self
                .spec
                .births
                .iter()
                .flat_map(|b| [b.t, b.t + b.ramp])
                .collect(),
        };
        pts.retain(|t| *t >= 0.0 && *t <= self.spec.horizon);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= -HORIZON_SLACK && t <= self.spec.horizon + HORIZON_SLACK) {
            return Err(Error::OutsideHorizon {
                t,
                horizon: self.spec.horizon,
            });
        }
        Ok(())
    }

    /// `P_t`.
    pub fn at(&self, t: f64) -> Result<CategoricalDistribution> {
        self.check_time(t)?;
        let t = t.clamp(0.0, self.spec.horizon);
        Ok(match &self.shape {
            Shape::Linear => self.linear_at(t),
            Shape::Walk { knots, logs } => {
                let dt = knots[1] - knots[0];
                let j = ((t / dt).floor() as usize).min(knots.len() - 2);
                let w = ((t - knots[j]) / dt).clamp(0.0, 1.0);
                let mixed: Vec<f64> = logs[j]
                    .iter()
                    .zip(&logs[j + 1])
                    .map(|(a, b)| (1.0 - w) * a + w * b)
                    .collect();
                softmax(&mixed, self.spec.delta)
            }
            Shape::Birth => {
                let base = &self.anchors[0].1;
                let mut born = vec![0.0; base.len()];
                let mut total = 0.0;
                for b in &self.spec.births {
                    let frac = if t < b.t {
                        0.0
                    } else if b.ramp == 0.0 {
                        1.0
                    } else {
                        ((t - b.t) / b.ramp).min(1.0)
                    };
                    born[b.element as usize] += b.mass * frac;
                    total += b.mass * frac;
                }
                let probs = base
                    .probs()
                    .iter()
                    .zip(&born)
                    .map(|(p, m)| (1.0 - total) * p + m)
                    .collect();
                CategoricalDistribution::from_parts_unchecked(probs, base.smoothing_delta())
            }
        })
    }

    fn linear_at(&self, t: f64) -> CategoricalDistribution {
        let first = &self.anchors[0];
        if t <= first.0 {
            return first.1.clone();
        }
        let last = &self.anchors[self.anchors.len() - 1];
        if t >= last.0 {
            return last.1.clone();
        }
        let k = self.anchors.partition_point(|(at, _)| *at <= t);
        let (t0, p0) = &self.anchors[k - 1];
        let (t1, p1) = &self.anchors[k];
        let w = (t - t0) / (t1 - t0);
        p0.mix(p1, w).expect("anchors share a dimension")
    }

    /// `KL(P_0 ‖ P_t)`.
    pub fn kl_from_origin(&self, t: f64) -> Result<f64> {
        kl_divergence(&self.at(0.0)?, &self.at(t)?)
    }
}

fn softmax(logits: &[f64], delta: f64) -> CategoricalDistribution {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = crate::numeric::pairwise_sum(&exps);
    let probs: Vec<f64> = exps.iter().map(|e| (e / total).max(f64::MIN_POSITIVE)).collect();
    CategoricalDistribution::from_parts_unchecked(probs, delta)
}
