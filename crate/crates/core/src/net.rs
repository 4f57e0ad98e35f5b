//! Net distribution of a dataset collected over a window: the
//! `λ`-weighted mixture `∫ P_s λ_s ds`.

use crate::density::SamplingDensity;
use crate::distribution::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::path::DriftPath;

pub const DEFAULT_QUADRATURE_STEPS: usize = 1024;
const MIN_STEPS_PER_SEGMENT: usize = 4;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Collection window `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Quadrature nodes and weights for `∫ g(s) λ_s ds` over the density's
/// support: trapezoid rule on each smooth piece, `steps` nodes in total.
pub(crate) fn quadrature(path: &DriftPath, density: &SamplingDensity, steps: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = density.support();
    let mut cuts: Vec<f64> = density
        .breakpoints()
        .into_iter()
        .chain(path.breakpoints())
        .filter(|t| *t >= lo && *t <= hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let width = hi - lo;
    let mut nodes = Vec::new();
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let m = ((steps as f64 * (b - a) / width).round() as usize).max(MIN_STEPS_PER_SEGMENT);
        let h = (b - a) / m as f64;
        let pdf = segment_pdf(density, a, b);
        for j in 0..=m {
            let s = if j == m { b } else { a + j as f64 * h };
            let w = if j == 0 || j == m { 0.5 * h } else { h };
            let weight = w * pdf(s);
            if weight > 0.0 {
                nodes.push((s, weight));
            }
        }
    }
    nodes
}

/// The density restricted to the open piece `(a, b)`, extended continuously
/// to both ends.
fn segment_pdf(density: &SamplingDensity, a: f64, b: f64) -> Box<dyn Fn(f64) -> f64 + '_> {
    let mid = 0.5 * (a + b);
    match density {
        SamplingDensity::Piecewise { knots } => {
            let k = knots.partition_point(|(t, _)| *t <= mid).clamp(1, knots.len() - 1);
            let (t0, _) = knots[k - 1];
            let (t1, _) = knots[k];
            let (p0, p1) = (density.pdf(t0), density.pdf_left(t1));
            Box::new(move |s| p0 + (p1 - p0) * (s - t0) / (t1 - t0))
        }
        _ => {
            let value = density.pdf(mid);
            Box::new(move |_| value)
        }
    }
}

impl SamplingDensity {
    /// Left limit of the density at `t`.
    pub(crate) fn pdf_left(&self, t: f64) -> f64 {
        match self {
            SamplingDensity::Piecewise { knots } => {
                let k = knots.partition_point(|(kt, _)| *kt < t).clamp(1, knots.len() - 1);
                let (a, wa) = knots[k - 1];
                let (b, wb) = knots[k];
                let area: f64 = knots
                    .windows(2)
                    .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                    .sum();
                (wa + (wb - wa) * (t - a) / (b - a)) / area
            }
            _ => self.pdf(t),
        }
    }
}

/// `∫ P_s λ_s ds` over `window`.
///
/// The density must put all of its mass inside the window (within
/// [`NORMALIZATION_TOLERANCE`]) and the window must lie inside the path's
/// horizon. A point density returns the path evaluated at that time.
pub fn net_distribution(
    path: &DriftPath,
    density: &SamplingDensity,
    window: Window,
) -> Result<CategoricalDistribution> {
    net_distribution_with_steps(path, density, window, DEFAULT_QUADRATURE_STEPS)
}

pub fn net_distribution_with_steps(
    path: &DriftPath,
    density: &SamplingDensity,
    window: Window,
    steps: usize,
) -> Result<CategoricalDistribution> {
    density.validate()?;
    path.check_time(window.lo)?;
    path.check_time(window.hi)?;
    let mass = density.mass_between(window.lo, window.hi);
    if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::DensityNotNormalized {
            lo: window.lo,
            hi: window.hi,
            mass,
        });
    }
    if let Some(t) = density.point_time() {
        return path.at(t);
    }
    let nodes = quadrature(path, density, steps.max(1));
    let mut acc = vec![0.0; path.dim()];
    let mut total = 0.0;
    for (s, w) in nodes {
        let p = path.at(s)?;
        for (a, x) in acc.iter_mut().zip(p.probs()) {
            *a += w * x;
        }
        total += w;
    }
    acc.iter_mut().for_each(|a| *a /= total);
    CategoricalDistribution::new(acc)
}

/// Quadrature nodes of the density's support, for scans over `P_s`.
pub fn quadrature_nodes(path: &DriftPath, density: &SamplingDensity) -> Vec<f64> {
    if let Some(t) = density.point_time() {
        return vec![t];
    }
    quadrature(path, density, DEFAULT_QUADRATURE_STEPS)
        .into_iter()
        .map(|(s, _)| s)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::kl_divergence;
    use approx::assert_abs_diff_eq;

    fn two(a: f64) -> CategoricalDistribution {
        CategoricalDistribution::new(vec![a, 1.0 - a]).unwrap()
    }

    #[test]
    fn point_density_returns_path_value() {
        let path = DriftPath::linear(&two(0.8), &two(0.3), 1.0).unwrap();
        let net = net_distribution(&path, &SamplingDensity::point(0.4), Window::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(net, path.at(0.4).unwrap());
    }

    #[test]
    fn equal_mixture_of_opposite_anchors() {
        let a = CategoricalDistribution::smoothed(&[1.0, 0.0], 1e-9).unwrap();
        let b = CategoricalDistribution::smoothed(&[0.0, 1.0], 1e-9).unwrap();
        let path = DriftPath::linear(&a, &b, 1.0).unwrap();
        let density = SamplingDensity::uniform(0.0, 1.0).unwrap();
        let net = net_distribution(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(net.probs()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn linear_path_uniform_density_is_midpoint() {
        let path = DriftPath::linear(&two(0.9), &two(0.2), 1.0).unwrap();
        let density = SamplingDensity::uniform(0.0, 1.0).unwrap();
        let net = net_distribution(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        let mid = path.at(0.5).unwrap();
        assert_abs_diff_eq!(net.probs()[0], mid.probs()[0], epsilon = 1e-14);
    }

    #[test]
    fn concentrated_density_approaches_point_value() {
        let path = DriftPath::linear(&two(0.9), &two(0.2), 1.0).unwrap();
        let density = SamplingDensity::uniform(0.3 - 1e-9, 0.3 + 1e-9).unwrap();
        let net = net_distribution(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(net.probs()[0], path.at(0.3).unwrap().probs()[0], epsilon = 1e-8);
    }

    #[test]
    fn mass_outside_window_is_rejected() {
        let path = DriftPath::linear(&two(0.9), &two(0.2), 1.0).unwrap();
        let density = SamplingDensity::uniform(0.0, 1.0).unwrap();
        let err = net_distribution(&path, &density, Window::new(0.0, 0.5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::DensityNotNormalized { .. }));
        let beyond = SamplingDensity::uniform(0.0, 2.0).unwrap();
        assert!(net_distribution(&path, &beyond, Window::new(0.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn flow_density_with_jump_integrates_exactly_on_linear_path() {
        let path = DriftPath::linear(&two(0.9), &two(0.1), 1.0).unwrap();
        let density = SamplingDensity::flow(vec![0.0, 0.5, 1.0], vec![1.0, 3.0]).unwrap();
        let net = net_distribution(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        // mean time = 0.25 * 0.25 + 0.75 * 0.75 = 0.625
        assert_abs_diff_eq!(net.probs()[0], path.at(0.625).unwrap().probs()[0], epsilon = 1e-13);
    }

    #[test]
    fn jensen_bound_on_mixture() {
        let path = DriftPath::linear(&two(0.95), &two(0.05), 1.0).unwrap();
        let density = SamplingDensity::piecewise(vec![(0.0, 0.2), (0.6, 2.0), (1.0, 0.1)]).unwrap();
        let net = net_distribution(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        let p0 = path.at(0.0).unwrap();
        let kl_net = kl_divergence(&p0, &net).unwrap();
        let max_kl = quadrature_nodes(&path, &density)
            .into_iter()
            .map(|s| path.kl_from_origin(s).unwrap())
            .fold(0.0, f64::max);
        assert!(kl_net <= max_kl);
    }
}
