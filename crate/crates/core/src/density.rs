//! Sampling densities `λ_t` over collection time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of sample times within a collection window.
///
/// `Piecewise` is a piecewise-linear density through `(t, weight)` knots;
/// `Flow` is a piecewise-constant collection rate `ψ_t` whose normalized
/// shape is the density. Weights and rates are relative: only their shape
/// matters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingDensity {
    Point { t: f64 },
    Uniform { t1: f64, t2: f64 },
    Piecewise { knots: Vec<(f64, f64)> },
    Flow { edges: Vec<f64>, rates: Vec<f64> },
}

impl SamplingDensity {
    pub fn point(t: f64) -> Self {
        SamplingDensity::Point { t }
    }

    pub fn uniform(t1: f64, t2: f64) -> Result<Self> {
        let d = SamplingDensity::Uniform { t1, t2 };
        d.validate()?;
        Ok(d)
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        let d = SamplingDensity::Piecewise { knots };
        d.validate()?;
        Ok(d)
    }

    pub fn flow(edges: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let d = SamplingDensity::Flow { edges, rates };
        d.validate()?;
        Ok(d)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SamplingDensity::Point { .. } => "point",
            SamplingDensity::Uniform { .. } => "uniform",
            SamplingDensity::Piecewise { .. } => "piecewise",
            SamplingDensity::Flow { .. } => "flow",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidDensity(m.to_string()));
        match self {
            SamplingDensity::Point { t } => {
                if !t.is_finite() {
                    return bad("point time must be finite");
                }
            }
            SamplingDensity::Uniform { t1, t2 } => {
                if !(t1.is_finite() && t2.is_finite() && t1 < t2) {
                    return bad("uniform density needs t1 < t2");
                }
            }
            SamplingDensity::Piecewise { knots } => {
                if knots.len() < 2 {
                    return bad("piecewise density needs at least two knots");
                }
                if knots.windows(2).any(|w| w[0].0.partial_cmp(&w[1].0) != Some(std::cmp::Ordering::Less)) {
                    return bad("knot times must be strictly increasing");
                }
                if knots.iter().any(|(t, w)| !(t.is_finite() && w.is_finite() && *w >= 0.0)) {
                    return bad("knot weights must be finite and non-negative");
                }
                if self.raw_area() <= 0.0 {
                    return bad("piecewise density has zero area");
                }
            }
            SamplingDensity::Flow { edges, rates } => {
                if edges.len() != rates.len() + 1 || rates.is_empty() {
                    return bad("flow needs one more edge than rates");
                }
                if edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) || edges.iter().any(|e| !e.is_finite()) {
                    return bad("flow edges must be finite and strictly increasing");
                }
                if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return bad("flow rates must be finite and non-negative");
                }
                if self.raw_area() <= 0.0 {
                    return bad("flow has zero volume");
                }
            }
        }
        Ok(())
    }

    /// Unnormalized area under the weights; the data volume for a flow.
    fn raw_area(&self) -> f64 {
        match self {
            SamplingDensity::Point { .. } | SamplingDensity::Uniform { .. } => 1.0,
            SamplingDensity::Piecewise { knots } => knots
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                .sum(),
            SamplingDensity::Flow { edges, rates } => edges
                .windows(2)
                .zip(rates)
                .map(|(e, r)| (e[1] - e[0]) * r)
                .sum(),
        }
    }

    /// Total collected volume `∫ψ` of a flow; `None` for other kinds.
    pub fn flow_volume(&self) -> Option<f64> {
        match self {
            SamplingDensity::Flow { .. } => Some(self.raw_area()),
            _ => None,
        }
    }

    /// Smallest interval holding all the mass.
    pub fn support(&self) -> (f64, f64) {
        match self {
            SamplingDensity::Point { t } => (*t, *t),
            SamplingDensity::Uniform { t1, t2 } => (*t1, *t2),
            SamplingDensity::Piecewise { knots } => (knots[0].0, knots[knots.len() - 1].0),
            SamplingDensity::Flow { edges, .. } => (edges[0], edges[edges.len() - 1]),
        }
    }

    pub fn point_time(&self) -> Option<f64> {
        match self {
            SamplingDensity::Point { t } => Some(*t),
            _ => None,
        }
    }

    /// Times where the density has a kink or a jump, including the support ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SamplingDensity::Point { t } => vec![*t],
            SamplingDensity::Uniform { t1, t2 } => vec![*t1, *t2],
            SamplingDensity::Piecewise { knots } => knots.iter().map(|k| k.0).collect(),
            SamplingDensity::Flow { edges, .. } => edges.clone(),
        }
    }

    /// Density value at `t`; zero for a point mass.
    pub fn pdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t < lo || t > hi {
            return 0.0;
        }
        match self {
            SamplingDensity::Point { .. } => 0.0,
            SamplingDensity::Uniform { t1, t2 } => 1.0 / (t2 - t1),
            SamplingDensity::Piecewise { knots } => {
                let k = knots.partition_point(|(kt, _)| *kt <= t).clamp(1, knots.len() - 1);
                let (a, wa) = knots[k - 1];
                let (b, wb) = knots[k];
                (wa + (wb - wa) * (t - a) / (b - a)) / self.raw_area()
            }
            SamplingDensity::Flow { edges, rates } => {
                let k = edges.partition_point(|e| *e <= t).clamp(1, rates.len());
                rates[k - 1] / self.raw_area()
            }
        }
    }

    /// Mass on `(-∞, t]`.
    pub fn cdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if t < lo {
            return 0.0;
        }
        if t >= hi {
            return 1.0;
        }
        match self {
            SamplingDensity::Point { .. } => 1.0,
            SamplingDensity::Uniform { t1, t2 } => (t - t1) / (t2 - t1),
            SamplingDensity::Piecewise { knots } => {
                let mut area = 0.0;
                for w in knots.windows(2) {
                    let ((a, wa), (b, wb)) = (w[0], w[1]);
                    if t >= b {
                        area += 0.5 * (b - a) * (wa + wb);
                    } else {
                        let wt = wa + (wb - wa) * (t - a) / (b - a);
                        area += 0.5 * (t - a) * (wa + wt);
                        break;
                    }
                }
                (area / self.raw_area()).clamp(0.0, 1.0)
            }
            SamplingDensity::Flow { edges, rates } => {
                let mut area = 0.0;
                for (e, r) in edges.windows(2).zip(rates) {
                    if t >= e[1] {
                        area += (e[1] - e[0]) * r;
                    } else {
                        area += (t - e[0]) * r;
                        break;
                    }
                }
                (area / self.raw_area()).clamp(0.0, 1.0)
            }
        }
    }

    /// Mass on `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if let SamplingDensity::Point { t } = self {
            return if *t >= a && *t <= b { 1.0 } else { 0.0 };
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// Smallest `t` with `cdf(t) >= u`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            SamplingDensity::Point { t } => *t,
            SamplingDensity::Uniform { t1, t2 } => t1 + u * (t2 - t1),
            SamplingDensity::Piecewise { knots } => {
                let mut target = u * self.raw_area();
                for w in knots.windows(2) {
                    let ((a, wa), (b, wb)) = (w[0], w[1]);
                    let seg = 0.5 * (b - a) * (wa + wb);
                    if target <= seg && seg > 0.0 {
                        let slope = (wb - wa) / (b - a);
                        let disc = (wa * wa + 2.0 * slope * target).max(0.0);
                        let denom = wa + disc.sqrt();
                        let d = if denom > 0.0 { 2.0 * target / denom } else { 0.0 };
                        return (a + d).min(b);
                    }
                    target -= seg;
                }
                knots[knots.len() - 1].0
            }
            SamplingDensity::Flow { edges, rates } => {
                let mut target = u * self.raw_area();
                for (e, r) in edges.windows(2).zip(rates) {
                    let seg = (e[1] - e[0]) * r;
                    if target <= seg && seg > 0.0 {
                        return (e[0] + target / r).min(e[1]);
                    }
                    target -= seg;
                }
                edges[edges.len() - 1]
            }
        }
    }

    pub fn sample_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SamplingDensity::Point { t } => *t,
            _ => self.inverse_cdf(rng.random::<f64>()),
        }
    }

    /// The density conditioned on `t <= upper`.
    pub fn truncated(&self, upper: f64) -> Result<Self> {
        let (lo, hi) = self.support();
        if upper >= hi {
            return Ok(self.clone());
        }
        let empty = || Error::InvalidDensity(format!("no mass at or below {upper}"));
        let out = match self {
            SamplingDensity::Point { t } => {
                if *t <= upper {
                    self.clone()
                } else {
                    return Err(empty());
                }
            }
            SamplingDensity::Uniform { t1, .. } => {
                if upper <= *t1 {
                    return Err(empty());
                }
                SamplingDensity::Uniform { t1: *t1, t2: upper }
            }
            SamplingDensity::Piecewise { knots } => {
                if upper <= lo {
                    return Err(empty());
                }
                let mut kept: Vec<(f64, f64)> = knots.iter().copied().filter(|k| k.0 < upper).collect();
                let w = self.pdf(upper) * self.raw_area();
                kept.push((upper, w));
                SamplingDensity::Piecewise { knots: kept }
            }
            SamplingDensity::Flow { edges, rates } => {
                if upper <= lo {
                    return Err(empty());
                }
                let mut e: Vec<f64> = edges.iter().copied().filter(|x| *x < upper).collect();
                let r: Vec<f64> = rates[..e.len()].to_vec();
                e.push(upper);
                SamplingDensity::Flow { edges: e, rates: r }
            }
        };
        out.validate().map_err(|_| empty())?;
        Ok(out)
    }

    /// The same shape with every rate multiplied by `factor`.
    pub fn scaled_flow(&self, factor: f64) -> Result<Self> {
        match self {
            SamplingDensity::Flow { edges, rates } => Self::flow(
                edges.clone(),
                rates.iter().map(|r| r * factor).collect(),
            ),
            _ => Err(Error::InvalidDensity("only a flow can be scaled".into())),
        }
    }
}
