//! Wilcoxon signed-rank test and Pearson effect size for paired model
//! results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::eval::METRIC_NAMES;

/// Largest tie-free non-zero count for which the p-value is enumerated
/// exactly.
pub const EXACT_MAX_N: usize = 12;

/// Absolute differences closer than this (relative to the larger) share a
/// rank.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSamples {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Input(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
        }
        if a.is_empty() {
            return Err(Error::Input("paired samples are empty".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Input("paired samples contain non-finite values".into()));
        }
        Ok(Self { a, b })
    }

    pub fn n_total(&self) -> usize {
        self.a.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CohenLabel {
    Negligible,
    Low,
    Medium,
    Large,
}

impl fmt::Display for CohenLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Negligible => "negligible",
            Self::Low => "low",
            Self::Medium => "medium",
            Self::Large => "large",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Normal,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Normal => "normal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W⁺, W⁻)`.
    pub w_statistic: f64,
    /// Normal-approximation z with continuity correction, clamped at 0.
    pub z_score: f64,
    /// Normal-approximation p regardless of `method`.
    pub p_normal: f64,
    pub p_two_tailed: f64,
    pub effect_r: f64,
    pub cohen_label: CohenLabel,
    pub significant: bool,
    pub alpha: f64,
    pub n_nonzero: usize,
    pub n_total: usize,
    pub ties: bool,
    pub method: Method,
}

impl WilcoxonResult {
    pub fn verdict(&self) -> &'static str {
        if self.significant {
            "Yes"
        } else {
            "No"
        }
    }
}

fn same_magnitude(x: f64, y: f64) -> bool {
    (x - y).abs() <= TIE_TOLERANCE * x.abs().max(y.abs())
}

/// Average ranks (1-based) of `values`, plus the tie-group sizes.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && same_magnitude(values[order[end]], values[order[start]]) {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        groups.push(end - start);
        start = end;
    }
    (ranks, groups)
}

/// Two-tailed exact p: the share of the `2^n` sign assignments of ranks
/// `1..=n` whose smaller rank sum is at most `u`.
pub fn exact_p(n: usize, u: f64) -> f64 {
    let max_sum = n * (n + 1) / 2;
    // counts[s] = number of subsets of {1..n} with sum s
    let mut counts = vec![0u64; max_sum + 1];
    counts[0] = 1;
    for r in 1..=n {
        for s in (r..=max_sum).rev() {
            counts[s] += counts[s - r];
        }
    }
    let hits: u64 = (0..=max_sum)
        .filter(|&s| (s.min(max_sum - s) as f64) <= u + 1e-9)
        .map(|s| counts[s])
        .sum();
    (hits as f64 / 2f64.powi(n as i32)).min(1.0)
}

pub fn wilcoxon(samples: &PairedSamples, alpha: f64) -> Result<WilcoxonResult> {
    let n_total = samples.n_total();
    if n_total == 0 {
        return Err(Error::Input("paired samples are empty".into()));
    }
    let diffs: Vec<f64> = samples.a.iter().zip(&samples.b).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        let (effect_r, cohen_label) = effect_r(0.0, n_total);
        return Ok(WilcoxonResult {
            w_plus: 0.0,
            w_minus: 0.0,
            w_statistic: 0.0,
            z_score: 0.0,
            p_normal: 1.0,
            p_two_tailed: 1.0,
            effect_r,
            cohen_label,
            significant: 1.0 < alpha,
            alpha,
            n_nonzero: 0,
            n_total,
            ties: false,
            method: Method::Exact,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, groups) = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();
    let u = w_plus.min(w_minus);

    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let tie_correction: f64 = groups.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction;
    let z = if variance > 0.0 { ((u - mu).abs() - 0.5).max(0.0) / variance.sqrt() } else { 0.0 };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_normal = (2.0 * (1.0 - normal.cdf(z))).min(1.0);

    let ties = groups.iter().any(|&t| t > 1);
    let (p, method) = if n <= EXACT_MAX_N && !ties { (exact_p(n, u), Method::Exact) } else { (p_normal, Method::Normal) };
    let (r, label) = effect_r(z, n_total);
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        w_statistic: u,
        z_score: z,
        p_normal,
        p_two_tailed: p,
        effect_r: r,
        cohen_label: label,
        significant: p < alpha,
        alpha,
        n_nonzero: n,
        n_total,
        ties,
        method,
    })
}

/// Pearson effect size `|z| / √(2·n_total)` and its Cohen band.
pub fn effect_r(z: f64, n_total: usize) -> (f64, CohenLabel) {
    let r = if n_total == 0 { 0.0 } else { z.abs() / (2.0 * n_total as f64).sqrt() };
    let label = if r < 0.05 {
        CohenLabel::Negligible
    } else if r < 0.2 {
        CohenLabel::Low
    } else if r < 0.4 {
        CohenLabel::Medium
    } else {
        CohenLabel::Large
    };
    (r, label)
}

// ---------------------------------------------------------------------------
// Results tables
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct Row {
    dataset: String,
    metric: String,
    value: f64,
}

fn metric_rank(metric: &str) -> usize {
    METRIC_NAMES.iter().position(|m| *m == metric).unwrap_or(METRIC_NAMES.len())
}

/// Key ordering: dataset, then metric in reporting order (unknown metrics
/// last, alphabetically).
fn key(dataset: &str, metric: &str) -> (String, usize, String) {
    (dataset.to_string(), metric_rank(metric), metric.to_string())
}

/// Reads a `dataset,metric,value` results table.
pub fn read_results_table(path: impl AsRef<Path>) -> Result<BTreeMap<(String, usize, String), f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = BTreeMap::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse { path: path.into(), line, reason: e.to_string() })?;
        if !row.value.is_finite() {
            return Err(Error::Parse { path: path.into(), line, reason: "non-finite value".into() });
        }
        let metric = row.metric.to_ascii_lowercase();
        if out.insert(key(&row.dataset, &metric), row.value).is_some() {
            return Err(Error::Parse {
                path: path.into(),
                line,
                reason: format!("duplicate key ({}, {})", row.dataset, metric),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Data { path: path.into(), reason: "no data rows".into() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableComparison {
    pub result: WilcoxonResult,
    /// `(dataset, metric, a, b)` in canonical order.
    pub pairs: Vec<(String, String, f64, f64)>,
}

impl TableComparison {
    pub fn verdict_line(&self) -> String {
        format!("Sig. Diff.: {}", self.result.verdict())
    }
}

/// Pairs the values of two results tables over their shared keys and runs
/// [`wilcoxon`]. The key sets must match exactly.
pub fn compare_tables(a: impl AsRef<Path>, b: impl AsRef<Path>, alpha: f64) -> Result<TableComparison> {
    let ta = read_results_table(a)?;
    let tb = read_results_table(b)?;
    let ka: BTreeSet<_> = ta.keys().collect();
    let kb: BTreeSet<_> = tb.keys().collect();
    if ka != kb {
        let fmt_keys = |keys: Vec<&&(String, usize, String)>| {
            keys.iter().map(|(d, _, m)| format!("{d}/{m}")).collect::<Vec<_>>().join(", ")
        };
        let only_a = fmt_keys(ka.difference(&kb).collect());
        let only_b = fmt_keys(kb.difference(&ka).collect());
        return Err(Error::Input(format!(
            "results tables do not share the same keys; missing from second: [{only_a}]; missing from first: [{only_b}]"
        )));
    }
    let pairs: Vec<(String, String, f64, f64)> =
        ta.iter().map(|(k, &va)| (k.0.clone(), k.2.clone(), va, tb[k])).collect();
    let samples = PairedSamples::new(pairs.iter().map(|p| p.2).collect(), pairs.iter().map(|p| p.3).collect())?;
    Ok(TableComparison { result: wilcoxon(&samples, alpha)?, pairs })
}
