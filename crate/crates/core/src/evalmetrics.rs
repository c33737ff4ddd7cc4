//! Regression metrics, affinity-binned MAE, and their CSV exports.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

fn check_pair(preds: &[f64], labels: &[f64], min_len: usize, what: &str) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{what}: {} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.len() < min_len {
        return Err(Error::Contract(format!(
            "{what} needs at least {min_len} samples, got {}",
            preds.len()
        )));
    }
    Ok(())
}

pub fn rmse(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels, 1, "rmse")?;
    let sse: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((sse / preds.len() as f64).sqrt())
}

pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels, 1, "mae")?;
    let sae: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum();
    Ok(sae / preds.len() as f64)
}

/// Product-moment correlation. Zero variance in either input is an
/// [`Error::UndefinedCorrelation`].
pub fn pearson(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels, 2, "pearson")?;
    let n = preds.len() as f64;
    let mp = preds.iter().sum::<f64>() / n;
    let ml = labels.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, y) in preds.iter().zip(labels) {
        let (dp, dy) = (p - mp, y - ml);
        sxy += dp * dy;
        sxx += dp * dp;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(format!(
            "zero variance in {}",
            if sxx == 0.0 { "predictions" } else { "labels" }
        )));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(preds, labels, 2, "spearman")?;
    pearson(&average_ranks(preds), &average_ranks(labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinRow {
    pub low: f64,
    pub high: f64,
    /// `None` when no test sample falls in the bin.
    pub mae: Option<f64>,
    pub n_test: usize,
    pub n_train: usize,
}

/// MAE per label bin `[e_k, e_{k+1})`, with the training-label count of each
/// bin alongside.
pub fn binned_mae(preds: &[f64], labels: &[f64], train_labels: &[f64], edges: &[f64]) -> Result<Vec<BinRow>> {
    check_pair(preds, labels, 0, "binned_mae")?;
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Contract("bin edges must be strictly increasing with at least 2 entries".into()));
    }
    let bin_of = |v: f64| (0..edges.len() - 1).find(|&k| edges[k] <= v && v < edges[k + 1]);
    let nb = edges.len() - 1;
    let mut abs_sum = vec![0.0; nb];
    let mut n_test = vec![0usize; nb];
    let mut n_train = vec![0usize; nb];
    for (p, y) in preds.iter().zip(labels) {
        if let Some(k) = bin_of(*y) {
            abs_sum[k] += (p - y).abs();
            n_test[k] += 1;
        }
    }
    for &y in train_labels {
        if let Some(k) = bin_of(y) {
            n_train[k] += 1;
        }
    }
    Ok((0..nb)
        .map(|k| BinRow {
            low: edges[k],
            high: edges[k + 1],
            mae: (n_test[k] > 0).then(|| abs_sum[k] / n_test[k] as f64),
            n_test: n_test[k],
            n_train: n_train[k],
        })
        .collect())
}

/// Unit-wide bins on integer pK values covering every value given.
pub fn default_bin_edges(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return vec![0.0, 1.0];
    }
    let (lo, hi) = (lo.floor() as i64, hi.floor() as i64 + 1);
    (lo..=hi).map(|e| e as f64).collect()
}

/// A correlation value, or the reason it is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined(f64),
    Undefined,
}

impl Correlation {
    fn from_result(r: Result<f64>) -> Result<Self> {
        match r {
            Ok(v) => Ok(Correlation::Defined(v)),
            Err(Error::UndefinedCorrelation(_)) => Ok(Correlation::Undefined),
            Err(e) => Err(e),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(v) => Some(v),
            Correlation::Undefined => None,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Defined(v) => write!(f, "{v:.6}"),
            Correlation::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub target_id: String,
    pub label: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub pearson: Correlation,
    pub spearman: Correlation,
    pub n: usize,
    pub binned: Vec<BinRow>,
    pub residuals: Vec<Residual>,
}

impl MetricsReport {
    /// `bin_edges` defaults to integer edges spanning test and train labels.
    pub fn compute(residuals: Vec<Residual>, train_labels: &[f64], bin_edges: Option<&[f64]>) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::Contract("cannot score an empty prediction set".into()));
        }
        let preds: Vec<f64> = residuals.iter().map(|r| r.prediction).collect();
        let labels: Vec<f64> = residuals.iter().map(|r| r.label).collect();
        let edges = match bin_edges {
            Some(e) => e.to_vec(),
            None => default_bin_edges(&[labels.as_slice(), train_labels].concat()),
        };
        let (pearson, spearman) = if preds.len() < 2 {
            (Correlation::Undefined, Correlation::Undefined)
        } else {
            (
                Correlation::from_result(pearson(&preds, &labels))?,
                Correlation::from_result(spearman(&preds, &labels))?,
            )
        };
        Ok(Self {
            rmse: rmse(&preds, &labels)?,
            pearson,
            spearman,
            n: preds.len(),
            binned: binned_mae(&preds, &labels, train_labels, &edges)?,
            residuals,
        })
    }

    /// One parseable line for standard output.
    pub fn summary_line(&self) -> String {
        format!(
            "rmse={:.6} pearson={} spearman={} n={}",
            self.rmse, self.pearson, self.spearman, self.n
        )
    }

    /// Writes `metrics.csv`, `binned_mae.csv` and `residuals.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let metrics = vec![
            vec!["rmse".into(), "pearson".into(), "spearman".into(), "n".into()],
            vec![
                format!("{:.6}", self.rmse),
                self.pearson.to_string(),
                self.spearman.to_string(),
                self.n.to_string(),
            ],
        ];
        write_csv(&dir.join("metrics.csv"), &metrics)?;

        let mut binned = vec![vec![
            "bin_low".to_string(),
            "bin_high".into(),
            "mae".into(),
            "n_test".into(),
            "n_train".into(),
        ]];
        for b in &self.binned {
            binned.push(vec![
                format!("{:.6}", b.low),
                format!("{:.6}", b.high),
                b.mae.map_or_else(String::new, |m| format!("{m:.6}")),
                b.n_test.to_string(),
                b.n_train.to_string(),
            ]);
        }
        write_csv(&dir.join("binned_mae.csv"), &binned)?;

        let mut res = vec![vec![
            "target_id".to_string(),
            "label".into(),
            "prediction".into(),
            "residual".into(),
        ]];
        for r in &self.residuals {
            res.push(vec![
                r.target_id.clone(),
                format!("{:.6}", r.label),
                format!("{:.6}", r.prediction),
                format!("{:.6}", r.prediction - r.label),
            ]);
        }
        write_csv(&dir.join("residuals.csv"), &res)
    }
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
