//! Categorical distributions over a finite element set and the
//! information quantities used throughout the crate. All logs are natural,
//! so every loss is in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Total infinitesimal mass shared by elements a raw distribution leaves
/// unsupported.
pub const DEFAULT_DELTA: f64 = 1e-9;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Unit a loss value is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossUnit {
    #[default]
    Nats,
    Bits,
}

impl LossUnit {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "nats" | "nat" => Ok(LossUnit::Nats),
            "bits" | "bit" => Ok(LossUnit::Bits),
            other => Err(Error::UnknownUnit(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossUnit::Nats => "nats",
            LossUnit::Bits => "bits",
        }
    }

    pub fn to_nats(self, v: f64) -> f64 {
        match self {
            LossUnit::Nats => v,
            LossUnit::Bits => v * std::f64::consts::LN_2,
        }
    }

    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            LossUnit::Nats => v,
            LossUnit::Bits => v / std::f64::consts::LN_2,
        }
    }
}

/// Dense index into the element set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

impl ElementId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Strictly positive probability vector that sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDistribution {
    probs: Vec<f64>,
    delta: f64,
}

impl CategoricalDistribution {
    /// Wraps an already smoothed probability vector.
    ///
    /// Every entry must be positive and finite and the total must be within
    /// `1e-9` of one; the vector is rescaled to unit mass when it is off by
    /// more than [`MASS_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no elements".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "entry {bad} is not strictly positive"
            )));
        }
        let total = pairwise_sum(&probs);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        let mut probs = probs;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        Ok(Self { probs, delta: 0.0 })
    }

    /// Builds a distribution from raw non-negative weights.
    ///
    /// Supported elements receive `(1 - delta) * p`, where `p` is the
    /// normalized raw weight; unsupported elements share `delta` equally.
    /// When every element is supported the weights are only normalized.
    pub fn smoothed(raw: &[f64], delta: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidDistribution("no elements".into()));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidDistribution(format!(
                "smoothing mass {delta} outside [0, 1)"
            )));
        }
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "raw weights must be finite and non-negative".into(),
            ));
        }
        let total = pairwise_sum(raw);
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("raw weights sum to zero".into()));
        }
        let unsupported = raw.iter().filter(|w| **w == 0.0).count();
        if unsupported == 0 {
            let probs = raw.iter().map(|w| w / total).collect();
            return Ok(Self { probs, delta: 0.0 });
        }
        let per_element = delta / unsupported as f64;
        let scale = (1.0 - delta) / total;
        let probs = raw
            .iter()
            .map(|w| if *w == 0.0 { per_element } else { w * scale })
            .collect();
        Ok(Self {
            probs,
            delta: per_element,
        })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::smoothed(&vec![1.0; len], 0.0)
    }

    /// Point mass at `element`, smoothed with `delta` over the rest.
    pub fn point_mass(len: usize, element: ElementId, delta: f64) -> Result<Self> {
        let mut raw = vec![0.0; len];
        *raw.get_mut(element.index()).ok_or_else(|| {
            Error::InvalidDistribution(format!("element {} out of range", element.0))
        })? = 1.0;
        Self::smoothed(&raw, delta)
    }

    /// Convex combination `(1 - w) * self + w * other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        check_dims(self, other)?;
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        Ok(Self {
            probs,
            delta: self.delta.max(other.delta),
        })
    }

    /// Zipf law `p_k ∝ (k + 1)^-exponent` over `len` elements.
    pub fn zipf(len: usize, exponent: f64) -> Result<Self> {
        let raw: Vec<f64> = (0..len).map(|k| ((k + 1) as f64).powf(-exponent)).collect();
        Self::smoothed(&raw, 0.0)
    }

    /// The same probabilities assigned to elements in reverse order.
    pub fn reversed(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        Self {
            probs,
            delta: self.delta,
        }
    }

    pub(crate) fn from_parts_unchecked(probs: Vec<f64>, delta: f64) -> Self {
        Self { probs, delta }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Mass carried by each smoothed (unsupported) element, zero if none.
    pub fn smoothing_delta(&self) -> f64 {
        self.delta
    }

    pub fn prob(&self, element: ElementId) -> f64 {
        self.probs[element.index()]
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }
}

fn check_dims(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// Shannon entropy `-Σ p ln p`.
pub fn entropy(p: &CategoricalDistribution) -> f64 {
    let terms: Vec<f64> = p
        .probs
        .iter()
        .map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 })
        .collect();
    pairwise_sum(&terms).max(0.0)
}

/// `KL(p ‖ q) = Σ p ln(p / q)`.
pub fn kl_divergence(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    check_dims(p, q)?;
    let terms: Vec<f64> = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| if a > 0.0 { a * (a.ln() - b.ln()) } else { 0.0 })
        .collect();
    Ok(pairwise_sum(&terms).max(0.0))
}

/// Expected log loss of `model` on data drawn from `p_test`, `-Σ p ln m`.
///
/// Equals `entropy(p_test) + kl_divergence(p_test, model)`.
pub fn expected_cross_entropy(
    p_test: &CategoricalDistribution,
    model: &CategoricalDistribution,
) -> Result<f64> {
    check_dims(p_test, model)?;
    let terms: Vec<f64> = p_test
        .probs
        .iter()
        .zip(&model.probs)
        .map(|(&a, &m)| if a > 0.0 { -a * m.ln() } else { 0.0 })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `Σ p(ω) (1 - q(ω)) / q(ω)`: scaled variance of the second-order term in
/// the expected KL between `p` and a frequency estimate of `q`.
///
/// For `n` draws from `q`, `E[KL(p ‖ q̂)] ≈ KL(p ‖ q) + estimation_spread(p, q) / (2n)`;
/// with `p = q` this is `(K - 1) / (2n)`.
pub fn estimation_spread(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    check_dims(p, q)?;
    let terms: Vec<f64> = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| a * (1.0 - b) / b)
        .collect();
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(p: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&d(&[0.5, 0.5])), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(entropy(&d(&[0.9, 0.1])), 0.325083, epsilon = 1e-6);
        let point = CategoricalDistribution::point_mass(2, ElementId(0), 1e-15).unwrap();
        assert!(entropy(&point) < 1e-12);
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(kl_divergence(&p, &d(&[0.9, 0.1])).unwrap(), 0.510826, epsilon = 1e-6);
        assert_abs_diff_eq!(kl_divergence(&p, &d(&[0.1, 0.9])).unwrap(), 0.510826, epsilon = 1e-6);
    }

    #[test]
    fn cross_entropy_examples() {
        let p = d(&[0.5, 0.5]);
        assert_abs_diff_eq!(expected_cross_entropy(&p, &p).unwrap(), 0.693147, epsilon = 1e-6);
        assert_abs_diff_eq!(
            expected_cross_entropy(&p, &d(&[0.9, 0.1])).unwrap(),
            1.203972,
            epsilon = 1e-6
        );
        let tiny = d(&[1.0 - 1e-14, 1e-14]);
        assert!(expected_cross_entropy(&tiny, &tiny).unwrap() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = kl_divergence(&d(&[0.5, 0.5]), &d(&[0.2, 0.3, 0.5])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { left: 2, right: 3 }));
        assert!(expected_cross_entropy(&d(&[1.0]), &d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn smoothing_gives_unsupported_elements_delta() {
        let p = CategoricalDistribution::smoothed(&[3.0, 0.0, 1.0, 0.0], 1e-9).unwrap();
        assert_abs_diff_eq!(p.probs()[1], 5e-10, epsilon = 1e-24);
        assert_abs_diff_eq!(p.probs()[0], 0.75 * (1.0 - 1e-9), epsilon = 1e-16);
        assert_abs_diff_eq!(p.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(p.smoothing_delta(), 5e-10);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(CategoricalDistribution::new(vec![0.5, 0.0, 0.5]).is_err());
        assert!(CategoricalDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(CategoricalDistribution::smoothed(&[0.0, 0.0], 1e-9).is_err());
        assert!(CategoricalDistribution::smoothed(&[1.0, -1.0], 1e-9).is_err());
    }

    #[test]
    fn zipf_and_reversal() {
        let z = CategoricalDistribution::zipf(3, 1.0).unwrap();
        assert_abs_diff_eq!(z.probs()[0], 6.0 / 11.0, epsilon = 1e-15);
        assert_eq!(z.reversed().probs()[2], z.probs()[0]);
        assert!(CategoricalDistribution::zipf(0, 1.0).is_err());
    }

    #[test]
    fn spread_at_identity_is_support_minus_one() {
        let p = d(&[0.1, 0.2, 0.3, 0.4]);
        assert_abs_diff_eq!(estimation_spread(&p, &p).unwrap(), 3.0, epsilon = 1e-12);
    }
}
