//! Substitution ratios between datasets of different ages, their
//! large-sample frontier, and the equivalent time of a collection window.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{
    invert_curve, invert_losses, replicate_losses, role, Evaluation, Experiment, InversionOrder,
    LearningCurveFit,
};
use crate::density::SamplingDensity;
use crate::distribution::{entropy, expected_cross_entropy, kl_divergence};
use crate::error::{Error, Result};
use crate::net::{net_distribution, Window};
use crate::numeric::serde_float;
use crate::path::DriftPath;

pub const KL_TOLERANCE: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 200;
const SCAN_POINTS: usize = 2048;

/// `G^{-1}` with arguments at or below the irreducible loss mapped to `+∞`.
fn invert_or_infinite(fit: &LearningCurveFit, loss: f64) -> Result<f64> {
    match invert_curve(fit, loss) {
        Ok(v) => Ok(v),
        Err(Error::BeyondIrreducible { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    match (num.is_infinite(), den.is_infinite()) {
        (true, true) => 1.0,
        (true, false) => f64::INFINITY,
        (false, true) => 0.0,
        (false, false) => num / den,
    }
}

/// `lim_{n→∞} f_n(t1, t2)`: ratio of `G^{-1}(H(P_test) + KL(P_test ‖ P_t))`
/// at `t1` and `t2`.
///
/// An argument at or below the fit's gamma counts as an infinite equivalent
/// size: an infinite numerator gives `+∞`, an infinite denominator gives 0,
/// and both infinite give 1.
pub fn substitution_frontier(
    path: &DriftPath,
    test_time: f64,
    t1: f64,
    t2: f64,
    fit: &LearningCurveFit,
) -> Result<f64> {
    path.check_time(t1)?;
    path.check_time(t2)?;
    if t1 == t2 {
        return Ok(1.0);
    }
    let p = path.at(test_time)?;
    let h = entropy(&p);
    let num = invert_or_infinite(fit, h + kl_divergence(&p, &path.at(t1)?)?)?;
    let den = invert_or_infinite(fit, h + kl_divergence(&p, &path.at(t2)?)?)?;
    Ok(ratio(num, den))
}

/// `f_n(t1, t2)` for every `n` in `sizes` (strictly increasing).
///
/// Monte Carlo mode inverts replicate losses and divides the averaged
/// equivalent sizes; numerator and denominator use independent streams. The
/// limit mode returns the frontier.
pub fn substitution_sizes(
    exp: &Experiment,
    t1: f64,
    t2: f64,
    sizes: &[u64],
    fit: &LearningCurveFit,
    order: InversionOrder,
) -> Result<Vec<f64>> {
    if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sizes must be positive and strictly increasing".into()));
    }
    if let Evaluation::Limit = exp.evaluation {
        let f = substitution_frontier(exp.path, exp.test_time, t1, t2, fit)?;
        return Ok(vec![f; sizes.len()]);
    }
    let p = exp.path.at(exp.test_time)?;
    let q1 = exp.path.at(t1)?;
    let q2 = exp.path.at(t2)?;
    let num = replicate_losses(&q1, &p, sizes, exp.evaluation, exp.seed, &[role::NUMERATOR])?;
    let den = replicate_losses(&q2, &p, sizes, exp.evaluation, exp.seed, &[role::DENOMINATOR])?;
    let analytic = matches!(exp.evaluation, Evaluation::Analytic);
    num.iter()
        .zip(&den)
        .map(|(ln, ld)| {
            let (a, ma, _) = invert_losses(fit, ln, order)?;
            let (b, _, _) = invert_losses(fit, ld, order)?;
            match (a, b, analytic) {
                (Some(a), Some(b), _) => Ok(a / b),
                (a, b, true) => Ok(ratio(a.unwrap_or(f64::INFINITY), b.unwrap_or(f64::INFINITY))),
                (_, None, false) => Err(Error::ReferenceUndefined),
                (None, _, false) => Err(Error::BeyondIrreducible {
                    loss: ma,
                    gamma: fit.gamma,
                }),
            }
        })
        .collect()
}

/// `f_n(t1, t2) = n̄(D_{n,t1}) / n̄(D_{n,t2})`.
pub fn substitution(
    exp: &Experiment,
    t1: f64,
    t2: f64,
    n: u64,
    fit: &LearningCurveFit,
) -> Result<f64> {
    Ok(substitution_sizes(exp, t1, t2, &[n], fit, InversionOrder::PerReplicate)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionPoint {
    pub t1: f64,
    pub n: u64,
    #[serde(with = "serde_float")]
    pub f_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub t1: f64,
    #[serde(with = "serde_float")]
    pub f_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionCurve {
    pub t2: f64,
    pub grid: Vec<SubstitutionPoint>,
    pub frontier: Vec<FrontierPoint>,
}

/// Tabulates `f_n(t1, t2)` over `t1s × sizes` plus the frontier at each `t1`.
pub fn substitution_curve(
    exp: &Experiment,
    t2: f64,
    t1s: &[f64],
    sizes: &[u64],
    fit: &LearningCurveFit,
) -> Result<SubstitutionCurve> {
    let rows: Vec<Result<(Vec<SubstitutionPoint>, FrontierPoint)>> = t1s
        .par_iter()
        .map(|&t1| {
            let fs = substitution_sizes(exp, t1, t2, sizes, fit, InversionOrder::PerReplicate)?;
            let grid = sizes
                .iter()
                .zip(fs)
                .map(|(n, f_value)| SubstitutionPoint { t1, n: *n, f_value })
                .collect();
            let f_value = substitution_frontier(exp.path, exp.test_time, t1, t2, fit)?;
            Ok((grid, FrontierPoint { t1, f_value }))
        })
        .collect();
    let mut curve = SubstitutionCurve {
        t2,
        grid: Vec::new(),
        frontier: Vec::new(),
    };
    for row in rows {
        let (g, f) = row?;
        curve.grid.extend(g);
        curve.frontier.push(f);
    }
    Ok(curve)
}

impl SubstitutionCurve {
    /// Consecutive sizes `(t1, n)` where `f_n` steps away from its frontier
    /// instead of toward it. Monotone approach is only guaranteed for large
    /// `n`, so these are reported rather than assumed away.
    pub fn monotonicity_violations(&self) -> Vec<(f64, u64)> {
        let mut out = Vec::new();
        for fp in &self.frontier {
            let row: Vec<&SubstitutionPoint> = self.grid.iter().filter(|p| p.t1 == fp.t1).collect();
            for w in row.windows(2) {
                let step = w[1].f_value - w[0].f_value;
                let away = if fp.f_value > 1.0 {
                    step < 0.0
                } else if fp.f_value < 1.0 {
                    step > 0.0
                } else {
                    false
                };
                if away {
                    out.push((fp.t1, w[1].n));
                }
            }
        }
        out
    }

    /// CSV `t1,t2,n,f_value,is_frontier`; frontier rows carry `n = inf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t1", "t2", "n", "f_value", "is_frontier"])?;
        for p in &self.grid {
            w.write_record([
                p.t1.to_string(),
                self.t2.to_string(),
                p.n.to_string(),
                p.f_value.to_string(),
                "false".into(),
            ])?;
        }
        for p in &self.frontier {
            w.write_record([
                p.t1.to_string(),
                self.t2.to_string(),
                "inf".into(),
                p.f_value.to_string(),
                "true".into(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Root of `KL(P_0 ‖ P_s) = KL(P_0 ‖ net)` on `[0, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalentTimeResult {
    pub t: f64,
    pub density_kind: String,
    pub t_star: f64,
    pub kl_net: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    /// Number of sign changes found on the scan grid; above 1 the drift is
    /// not monotone and `t_star` is the smallest root.
    pub multiplicity: usize,
}

impl EquivalentTimeResult {
    /// JSON `{t, density_kind, t_star, kl_net, multiplicity}`.
    pub fn to_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "t": self.t,
            "density_kind": self.density_kind,
            "t_star": self.t_star,
            "kl_net": self.kl_net,
            "multiplicity": self.multiplicity,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Equivalent time of data collected under `density` over `window = [0, t]`.
///
/// Scans `[0, t]` for the first crossing of the target KL and bisects it
/// down to [`KL_TOLERANCE`].
pub fn equivalent_time(
    path: &DriftPath,
    density: &SamplingDensity,
    window: Window,
) -> Result<EquivalentTimeResult> {
    let net = net_distribution(path, density, window)?;
    let p0 = path.at(0.0)?;
    let target = kl_divergence(&p0, &net)?;
    let t = window.hi;
    let result = |t_star: f64, bracket: (f64, f64), residual: f64, multiplicity: usize| EquivalentTimeResult {
        t,
        density_kind: density.kind_name().to_string(),
        t_star,
        kl_net: target,
        bracket,
        residual,
        multiplicity,
    };
    if target <= KL_TOLERANCE {
        return Ok(result(0.0, (0.0, 0.0), target, 1));
    }
    let g = |s: f64| -> Result<f64> { Ok(path.kl_from_origin(s)? - target) };

    let mut scan: Vec<f64> = (0..=SCAN_POINTS)
        .map(|j| t * j as f64 / SCAN_POINTS as f64)
        .chain(path.breakpoints().into_iter().filter(|b| *b > 0.0 && *b < t))
        .collect();
    scan.sort_by(f64::total_cmp);
    scan.dedup();
    let values = scan
        .par_iter()
        .map(|s| g(*s))
        .collect::<Result<Vec<f64>>>()?;

    let mut first = None;
    let mut crossings = 0;
    let mut sign = -1i8;
    for (i, v) in values.iter().enumerate() {
        let s = if *v > 0.0 {
            1
        } else if *v < 0.0 {
            -1
        } else {
            0
        };
        if s == 0 {
            if first.is_none() {
                return Ok(result(scan[i], (scan[i], scan[i]), 0.0, 1));
            }
            continue;
        }
        if s != sign {
            crossings += 1;
            if first.is_none() {
                first = Some(i);
            }
            sign = s;
        }
    }
    let Some(i) = first else {
        return Err(Error::NoSignChange { t, target });
    };
    let (mut lo, mut hi) = (scan[i - 1], scan[i]);
    let (mut glo, mut ghi) = (values[i - 1], values[i]);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if gm < 0.0 {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
        if gm.abs() <= KL_TOLERANCE && hi - lo <= 1e-13 * t.max(1.0) {
            break;
        }
    }
    let (t_star, residual) = if glo.abs() <= ghi.abs() { (lo, glo.abs()) } else { (hi, ghi.abs()) };
    Ok(result(t_star, (lo, hi), residual, crossings))
}

/// Loss of the frontier's numerator: `H(P_test) + KL(P_test ‖ P_t)`.
pub fn limit_loss(path: &DriftPath, test_time: f64, t: f64) -> Result<f64> {
    let p = path.at(test_time)?;
    expected_cross_entropy(&p, &path.at(t)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::CategoricalDistribution;
    use approx::assert_abs_diff_eq;

    fn two(a: f64) -> CategoricalDistribution {
        CategoricalDistribution::new(vec![a, 1.0 - a]).unwrap()
    }

    fn fit() -> LearningCurveFit {
        LearningCurveFit {
            test_time: 0.0,
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.5,
            r2: 1.0,
            n_min: 1.0,
            n_max: 1e6,
        }
    }

    #[test]
    fn frontier_conventions() {
        let path = DriftPath::linear(&two(0.5), &two(0.9), 1.0).unwrap();
        let f = fit();
        assert_eq!(substitution_frontier(&path, 0.0, 0.4, 0.4, &f).unwrap(), 1.0);
        let low = LearningCurveFit { gamma: 0.6, ..f };
        let x = substitution_frontier(&path, 0.0, 0.0, 1.0, &low).unwrap();
        assert!(x > 1.0 && x.is_finite());
        let high = LearningCurveFit { gamma: 0.7, ..f };
        assert_eq!(substitution_frontier(&path, 0.0, 0.0, 1.0, &high).unwrap(), f64::INFINITY);
        assert_eq!(substitution_frontier(&path, 0.0, 1.0, 0.0, &high).unwrap(), 0.0);
    }

    #[test]
    fn limit_substitution_is_the_frontier() {
        let path = DriftPath::linear(&two(0.5), &two(0.9), 1.0).unwrap();
        let exp = Experiment {
            path: &path,
            test_time: 0.0,
            evaluation: Evaluation::Limit,
            seed: 1,
        };
        let a = substitution(&exp, 0.2, 0.8, 100, &fit()).unwrap();
        let b = substitution_frontier(&path, 0.0, 0.2, 0.8, &fit()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_uniform_equivalent_time_is_midpoint() {
        let path = DriftPath::linear(&two(0.5), &two(0.9), 1.0).unwrap();
        let density = SamplingDensity::uniform(0.0, 1.0).unwrap();
        let r = equivalent_time(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.t_star, 0.5, epsilon = 1e-9);
        assert_eq!(r.multiplicity, 1);
        assert!(r.residual <= 1e-8);
    }

    #[test]
    fn point_density_equivalent_time_is_the_point() {
        let path = DriftPath::linear(&two(0.5), &two(0.9), 1.0).unwrap();
        let r = equivalent_time(&path, &SamplingDensity::point(0.37), Window::new(0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.t_star, 0.37, epsilon = 1e-9);
    }

    #[test]
    fn zero_drift_gives_time_zero() {
        let path = DriftPath::constant(&two(0.3), 1.0).unwrap();
        let density = SamplingDensity::uniform(0.0, 1.0).unwrap();
        let r = equivalent_time(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.t_star, 0.0);
    }

    #[test]
    fn steps_away_from_the_frontier_are_flagged() {
        let pt = |t1, n, f_value| SubstitutionPoint { t1, n, f_value };
        let curve = SubstitutionCurve {
            t2: 1.0,
            grid: vec![pt(0.0, 1, 1.0), pt(0.0, 2, 1.5), pt(0.0, 4, 1.4), pt(0.5, 1, 1.0), pt(0.5, 2, 0.8)],
            frontier: vec![FrontierPoint { t1: 0.0, f_value: 3.0 }, FrontierPoint { t1: 0.5, f_value: 0.5 }],
        };
        assert_eq!(curve.monotonicity_violations(), vec![(0.0, 4)]);
    }

    #[test]
    fn non_monotone_drift_reports_smallest_root() {
        let a = two(0.5);
        let b = two(0.9);
        let path = DriftPath::piecewise_linear(&[(0.0, &a), (0.5, &b), (1.0, &a)], 1.0).unwrap();
        let density = SamplingDensity::uniform(0.0, 1.0).unwrap();
        let r = equivalent_time(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        assert!(r.t_star < 0.5);
        assert_eq!(r.multiplicity, 2);
    }

    #[test]
    fn truncating_the_tail_moves_equivalent_time_closer() {
        let path = DriftPath::linear(&two(0.5), &two(0.95), 1.0).unwrap();
        let density = SamplingDensity::uniform(0.0, 1.0).unwrap();
        let full = equivalent_time(&path, &density, Window::new(0.0, 1.0).unwrap()).unwrap();
        let cut = density.truncated(full.t_star).unwrap();
        let part = equivalent_time(&path, &cut, Window::new(0.0, full.t_star).unwrap()).unwrap();
        assert!(part.t_star <= full.t_star);
    }

    #[test]
    fn equivalent_time_json_keys() {
        let path = DriftPath::linear(&two(0.5), &two(0.9), 1.0).unwrap();
        let r = equivalent_time(&path, &SamplingDensity::point(0.2), Window::new(0.0, 1.0).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["density_kind", "kl_net", "multiplicity", "t", "t_star"]);
    }

    #[test]
    fn curve_csv_marks_frontier_rows() {
        let curve = SubstitutionCurve {
            t2: 1.0,
            grid: vec![SubstitutionPoint { t1: 0.0, n: 8, f_value: 1.5 }],
            frontier: vec![FrontierPoint { t1: 0.0, f_value: f64::INFINITY }],
        };
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t1,t2,n,f_value,is_frontier\n0,1,8,1.5,false\n0,1,inf,inf,true\n"
        );
    }
}
