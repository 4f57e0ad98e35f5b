//! Cross-evaluation loss tables: ingestion, per-period curve fits and
//! equivalent-size reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{
    fit_power_law, invert_losses, InversionOrder, LearningCurveFit, LearningCurvePoint,
};
use crate::distribution::LossUnit;
use crate::error::{Error, Result};
use crate::numeric::mean;

pub const TABLE_HEADER: [&str; 6] = ["train_period", "test_period", "train_size", "loss", "unit", "replicate"];
pub const REPORT_HEADER: [&str; 6] = [
    "train_period",
    "test_period",
    "train_size",
    "equiv_size",
    "effectiveness",
    "clamped_fraction",
];
const MIN_DIAGONAL_SIZES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub train_period: String,
    pub test_period: String,
    pub train_size: f64,
    /// Always in nats.
    pub loss: f64,
    pub replicate: u32,
}

/// Validated loss table with its periods in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    rows: Vec<LossRow>,
    periods: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    train_period: String,
    test_period: String,
    train_size: f64,
    loss: f64,
    unit: String,
    replicate: u32,
}

/// Reads a `period,period_index` sidecar giving the chronological order.
pub fn read_period_order<R: Read>(input: R) -> Result<HashMap<String, i64>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    for col in ["period", "period_index"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    #[derive(Deserialize)]
    struct Entry {
        period: String,
        period_index: i64,
    }
    let mut out = HashMap::new();
    for rec in rdr.deserialize::<Entry>() {
        let e = rec?;
        out.insert(e.period, e.period_index);
    }
    Ok(out)
}

impl LossTable {
    /// Builds a table from rows already in nats; periods are ordered by
    /// `order` where given and lexically otherwise.
    pub fn new(rows: Vec<LossRow>, order: Option<&HashMap<String, i64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::MalformedTable("no rows".into()));
        }
        if let Some(r) = rows.iter().find(|r| !(r.loss.is_finite() && r.loss > 0.0)) {
            return Err(Error::MalformedTable(format!(
                "loss {} for ({}, {}) is not positive",
                r.loss, r.train_period, r.test_period
            )));
        }
        if let Some(r) = rows.iter().find(|r| !(r.train_size.is_finite() && r.train_size > 0.0)) {
            return Err(Error::MalformedTable(format!("train_size {} is not positive", r.train_size)));
        }
        let set: BTreeSet<&str> = rows
            .iter()
            .flat_map(|r| [r.train_period.as_str(), r.test_period.as_str()])
            .collect();
        let mut periods: Vec<String> = set.into_iter().map(String::from).collect();
        if let Some(order) = order {
            if let Some(p) = periods.iter().find(|p| !order.contains_key(*p)) {
                return Err(Error::MalformedTable(format!("period `{p}` has no period_index")));
            }
            periods.sort_by(|a, b| order[a].cmp(&order[b]).then_with(|| a.cmp(b)));
        }
        let tests: BTreeSet<&str> = rows.iter().map(|r| r.test_period.as_str()).collect();
        let missing: Vec<String> = periods
            .iter()
            .filter(|p| tests.contains(p.as_str()))
            .filter(|p| {
                let sizes: BTreeSet<u64> = rows
                    .iter()
                    .filter(|r| &r.train_period == *p && &r.test_period == *p)
                    .map(|r| r.train_size.to_bits())
                    .collect();
                sizes.len() < MIN_DIAGONAL_SIZES
            })
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingDiagonal(missing));
        }
        Ok(Self { rows, periods })
    }

    pub fn rows(&self) -> &[LossRow] {
        &self.rows
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn period_index(&self, p: &str) -> Option<usize> {
        self.periods.iter().position(|x| x == p)
    }

    /// Periods that appear as a test period, in chronological order.
    pub fn test_periods(&self) -> Vec<String> {
        let tests: BTreeSet<&str> = self.rows.iter().map(|r| r.test_period.as_str()).collect();
        self.periods
            .iter()
            .filter(|p| tests.contains(p.as_str()))
            .cloned()
            .collect()
    }

    /// Replicate losses grouped by `(train, test, size)`, in row order of
    /// first appearance.
    fn groups(&self) -> Vec<((String, String, f64), Vec<f64>)> {
        let mut index: HashMap<(String, String, u64), usize> = HashMap::new();
        let mut out: Vec<((String, String, f64), Vec<f64>)> = Vec::new();
        for r in &self.rows {
            let key = (r.train_period.clone(), r.test_period.clone(), r.train_size.to_bits());
            let i = *index.entry(key).or_insert_with(|| {
                out.push(((r.train_period.clone(), r.test_period.clone(), r.train_size), Vec::new()));
                out.len() - 1
            });
            out[i].1.push(r.loss);
        }
        out
    }

    /// Mean diagonal losses of `period` as learning-curve points.
    pub fn diagonal_points(&self, period: &str) -> Vec<LearningCurvePoint> {
        let mut by_size: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.train_period == period && r.test_period == period) {
            by_size
                .entry(r.train_size.to_bits())
                .or_insert_with(|| (r.train_size, Vec::new()))
                .1
                .push(r.loss);
        }
        let mut pts: Vec<LearningCurvePoint> = by_size
            .into_values()
            .map(|(n, l)| LearningCurvePoint::from_losses(n, &l))
            .collect();
        pts.sort_by(|a, b| a.n.total_cmp(&b.n));
        pts
    }

    /// Writes the table back in the input schema with losses in `unit`.
    pub fn write_csv<W: Write>(&self, unit: LossUnit, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TABLE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.train_period.clone(),
                r.test_period.clone(),
                r.train_size.to_string(),
                unit.from_nats(r.loss).to_string(),
                unit.name().to_string(),
                r.replicate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses a loss table with header `train_period,test_period,train_size,loss,unit,replicate`.
/// Losses given in bits are converted to nats.
pub fn ingest<R: Read>(input: R, order: Option<&HashMap<String, i64>>) -> Result<LossTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if let Some(col) = TABLE_HEADER.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(Error::MissingColumn(col.to_string()));
    }
    if headers.iter().ne(TABLE_HEADER.iter().copied()) {
        return Err(Error::MalformedTable(format!(
            "header must be exactly `{}`",
            TABLE_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<RawRow>() {
        let raw = rec?;
        let unit = LossUnit::parse(&raw.unit)?;
        rows.push(LossRow {
            train_period: raw.train_period,
            test_period: raw.test_period,
            train_size: raw.train_size,
            loss: unit.to_nats(raw.loss),
            replicate: raw.replicate,
        });
    }
    LossTable::new(rows, order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodFit {
    pub period: String,
    #[serde(flatten)]
    pub fit: LearningCurveFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub train_period: String,
    pub test_period: String,
    pub train_size: f64,
    pub mean_loss: f64,
    /// `None` when every replicate sits at or below the fitted gamma.
    pub equiv_size: Option<f64>,
    pub effectiveness: Option<f64>,
    pub clamped_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reports {
    pub fits: Vec<PeriodFit>,
    pub reports: Vec<PeriodReport>,
}

/// Fits each test period's own curve and inverts every cross-evaluation
/// through it.
///
/// Replicate losses are averaged before inversion unless `order` asks for
/// per-replicate inversion and the group has at least 3 replicates.
/// Effectiveness divides by the same-period equivalent size at the same
/// training size, or by the size itself when that row is absent.
pub fn build_reports(table: &LossTable, order: InversionOrder) -> Result<Reports> {
    let tests = table.test_periods();
    let fits: Vec<PeriodFit> = tests
        .par_iter()
        .map(|p| {
            let idx = table.period_index(p).unwrap_or(0) as f64;
            let fit = fit_power_law(&table.diagonal_points(p))
                .map_err(|e| Error::CurveNotPowerLaw(format!("period `{p}`: {e}")))?;
            Ok(PeriodFit {
                period: p.clone(),
                fit: fit.with_test_time(idx),
            })
        })
        .collect::<Result<_>>()?;
    let fit_of: HashMap<&str, &LearningCurveFit> = fits.iter().map(|f| (f.period.as_str(), &f.fit)).collect();
    let invert = |fit: &LearningCurveFit, losses: &[f64]| {
        let o = if losses.len() >= 3 { order } else { InversionOrder::OfMean };
        invert_losses(fit, losses, o)
    };

    let groups = table.groups();
    let mut diagonal: HashMap<(String, u64), Option<f64>> = HashMap::new();
    for ((tr, te, n), losses) in &groups {
        if tr == te {
            let (size, _, _) = invert(fit_of[te.as_str()], losses)?;
            diagonal.insert((te.clone(), n.to_bits()), size);
        }
    }
    let mut reports = Vec::with_capacity(groups.len());
    for ((tr, te, n), losses) in groups {
        let fit = fit_of[te.as_str()];
        let (size, mean_loss, clamped) = invert(fit, &losses)?;
        let reference = match diagonal.get(&(te.clone(), n.to_bits())) {
            Some(r) => *r,
            None => Some(n),
        };
        let effectiveness = match (size, reference) {
            (Some(s), Some(r)) => Some(s / r),
            _ => None,
        };
        reports.push(PeriodReport {
            train_period: tr,
            test_period: te,
            train_size: n,
            mean_loss,
            equiv_size: size,
            effectiveness,
            clamped_fraction: clamped,
        });
    }
    let rank = |p: &str| table.period_index(p).unwrap_or(usize::MAX);
    reports.sort_by(|a, b| {
        rank(&a.test_period)
            .cmp(&rank(&b.test_period))
            .then(rank(&a.train_period).cmp(&rank(&b.train_period)))
            .then(a.train_size.total_cmp(&b.train_size))
    });
    Ok(Reports { fits, reports })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Reports {
    /// `reports.csv` with header `train_period,test_period,train_size,equiv_size,effectiveness,clamped_fraction`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        for r in &self.reports {
            w.write_record([
                r.train_period.clone(),
                r.test_period.clone(),
                r.train_size.to_string(),
                opt(r.equiv_size),
                opt(r.effectiveness),
                r.clamped_fraction.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn fits_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.fits)?)
    }

    pub fn get(&self, train: &str, test: &str, size: f64) -> Option<&PeriodReport> {
        self.reports
            .iter()
            .find(|r| r.train_period == train && r.test_period == test && r.train_size == size)
    }

    /// Mean effectiveness by elapsed periods (test index minus train index,
    /// non-negative only) for one training size.
    pub fn effectiveness_by_elapsed(&self, table: &LossTable, size: f64) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in self.reports.iter().filter(|r| r.train_size == size) {
            let (Some(i), Some(j), Some(e)) = (
                table.period_index(&r.train_period),
                table.period_index(&r.test_period),
                r.effectiveness,
            ) else {
                continue;
            };
            if j >= i {
                acc.entry(j - i).or_default().push(e);
            }
        }
        acc.into_iter().map(|(k, v)| (k, mean(&v))).collect()
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const HEADER: &str = "train_period,test_period,train_size,loss,unit,replicate\n";

    fn diagonal_csv(period: &str, unit: &str, scale: f64) -> String {
        [1e3, 4e3, 16e3, 64e3]
            .iter()
            .map(|n: &f64| format!("{period},{period},{n},{},{unit},0\n", scale * (2.0 + 10.0 / n.sqrt())))
            .collect()
    }

    #[test]
    fn bits_are_converted() {
        let text = format!("{HEADER}{}a,a,100,1.0,bits,0\n", diagonal_csv("a", "nats", 1.0));
        let t = ingest(text.as_bytes(), None).unwrap();
        assert_abs_diff_eq!(t.rows().last().unwrap().loss, 0.693147, epsilon = 1e-6);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "train_period,test_period,train_size,loss,replicate\na,a,1,1,0\n";
        match ingest(text.as_bytes(), None) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "unit"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_unit_and_missing_diagonal() {
        let text = format!("{HEADER}{}", diagonal_csv("a", "furlongs", 1.0));
        assert!(matches!(ingest(text.as_bytes(), None), Err(Error::UnknownUnit(_))));
        let text = format!("{HEADER}{}b,a,100,3.0,nats,0\nb,b,100,3.0,nats,0\n", diagonal_csv("a", "nats", 1.0));
        match ingest(text.as_bytes(), None) {
            Err(Error::MissingDiagonal(p)) => assert_eq!(p, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sidecar_overrides_lexical_order() {
        let text = format!("{HEADER}{}{}", diagonal_csv("jan", "nats", 1.0), diagonal_csv("feb", "nats", 1.0));
        let lexical = ingest(text.as_bytes(), None).unwrap();
        assert_eq!(lexical.periods(), ["feb", "jan"]);
        let order = read_period_order("period,period_index\njan,0\nfeb,1\n".as_bytes()).unwrap();
        let t = ingest(text.as_bytes(), Some(&order)).unwrap();
        assert_eq!(t.periods(), ["jan", "feb"]);
    }

    #[test]
    fn diagonal_only_table_has_unit_effectiveness() {
        let text = format!("{HEADER}{}{}", diagonal_csv("a", "nats", 1.0), diagonal_csv("b", "nats", 1.1));
        let t = ingest(text.as_bytes(), None).unwrap();
        let r = build_reports(&t, InversionOrder::OfMean).unwrap();
        assert_eq!(r.reports.len(), 8);
        assert!(r.reports.iter().all(|x| x.effectiveness == Some(1.0)));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("train_period,test_period,train_size,equiv_size,effectiveness,clamped_fraction\n"));
    }
}
