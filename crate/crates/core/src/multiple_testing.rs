//! Multiple-testing corrections and error-rate summaries.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn check_pvalues(pvals: &[f64]) -> Result<()> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(invalid(format!("p-value {p} outside [0, 1]")));
    }
    Ok(())
}

/// Step-up rule at any positive level; levels ≥ 1 reject everything.
fn step_up(pvals: &[f64], level: f64) -> Vec<bool> {
    let m = pvals.len();
    let mut sorted: Vec<f64> = pvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutoff = (1..=m)
        .rev()
        .find(|&k| sorted[k - 1] <= k as f64 * level / m as f64)
        .map(|k| sorted[k - 1]);
    match cutoff {
        Some(c) => pvals.iter().map(|&p| p <= c).collect(),
        None => vec![false; m],
    }
}

/// Benjamini–Hochberg: reject every p-value at or below `p_(k*)`,
/// `k* = max{k : p_(k) ≤ kα/m}`.
pub fn benjamini_hochberg(pvals: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("level {alpha} outside (0, 1)")));
    }
    check_pvalues(pvals)?;
    Ok(step_up(pvals, alpha))
}

pub const DEFAULT_STOREY_LAMBDA: f64 = 0.5;

/// `π̂₀ = min(1, #{p > λ} / ((1-λ) m))`.
pub fn storey_pi0(pvals: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("Storey λ = {lambda} outside (0, 1)")));
    }
    check_pvalues(pvals)?;
    if pvals.is_empty() {
        return Err(Error::EmptyInput("no p-values"));
    }
    let above = pvals.iter().filter(|&&p| p > lambda).count() as f64;
    Ok((above / ((1.0 - lambda) * pvals.len() as f64)).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreyOutcome {
    pub pi0: f64,
    pub rejected: Vec<bool>,
}

/// BH at level `α / π̂₀`; `π̂₀ = 0` rejects everything.
pub fn storey_bh(pvals: &[f64], alpha: f64, lambda: f64) -> Result<StoreyOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("level {alpha} outside (0, 1)")));
    }
    let pi0 = storey_pi0(pvals, lambda)?;
    let rejected = if pi0 == 0.0 {
        vec![true; pvals.len()]
    } else {
        step_up(pvals, alpha / pi0)
    };
    Ok(StoreyOutcome { pi0, rejected })
}

/// How raw p-values become rejections.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    /// Reject `p ≤ α`.
    None,
    Bh,
    Storey {
        lambda: f64,
    },
}

impl Correction {
    pub fn name(&self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::Bh => "bh",
            Correction::Storey { .. } => "storey",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "bh" => Ok(Correction::Bh),
            "storey" => Ok(Correction::Storey {
                lambda: DEFAULT_STOREY_LAMBDA,
            }),
            other => Err(invalid(format!(
                "unknown correction {other:?} (none | bh | storey)"
            ))),
        }
    }

    pub fn apply(&self, pvals: &[f64], alpha: f64) -> Result<Vec<bool>> {
        match self {
            Correction::None => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(invalid(format!("level {alpha} outside (0, 1)")));
                }
                check_pvalues(pvals)?;
                Ok(pvals.iter().map(|&p| p <= alpha).collect())
            }
            Correction::Bh => benjamini_hochberg(pvals, alpha),
            Correction::Storey { lambda } => Ok(storey_bh(pvals, alpha, *lambda)?.rejected),
        }
    }
}

/// Area under the ROC curve of `scores` for `labels` (true = anomalous),
/// via the rank-sum statistic with tied ranks averaged. `None` when a class is empty.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mean_rank;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(Some(u / (pos as f64 * neg as f64)))
}

/// Settings recorded alongside a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Procedure {
    pub alpha: f64,
    pub method: String,
    pub correction: Correction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportItem {
    pub id: Option<String>,
    pub score: f64,
    pub pvalue: f64,
    pub rejected: bool,
    pub label: Option<bool>,
}

/// Counts and rates; the rates need labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub items: usize,
    pub rejections: usize,
    pub positives: Option<usize>,
    pub negatives: Option<usize>,
    pub true_rejections: Option<usize>,
    pub false_rejections: Option<usize>,
    /// `false rejections / max(1, rejections)`.
    pub fdr: Option<f64>,
    /// `false rejections / negatives`.
    pub fpr: Option<f64>,
    /// `true rejections / positives`.
    pub power: Option<f64>,
    pub auroc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub procedure: Procedure,
    pub items: Vec<ReportItem>,
    pub summary: Summary,
}

/// Assembles per-item rows and the summary.
pub fn evaluate(
    scores: &[f64],
    pvals: &[f64],
    rejected: &[bool],
    labels: Option<&[bool]>,
    procedure: Procedure,
) -> Result<TestReport> {
    let n = scores.len();
    if pvals.len() != n || rejected.len() != n || labels.is_some_and(|l| l.len() != n) {
        return Err(Error::ShapeMismatch(
            "scores, p-values, rejections and labels must align".into(),
        ));
    }
    check_pvalues(pvals)?;
    let rejections = rejected.iter().filter(|&&r| r).count();
    let mut summary = Summary {
        items: n,
        rejections,
        positives: None,
        negatives: None,
        true_rejections: None,
        false_rejections: None,
        fdr: None,
        fpr: None,
        power: None,
        auroc: None,
    };
    if let Some(labels) = labels {
        let positives = labels.iter().filter(|&&l| l).count();
        let negatives = n - positives;
        let true_rej = rejected
            .iter()
            .zip(labels)
            .filter(|(&r, &l)| r && l)
            .count();
        let false_rej = rejections - true_rej;
        summary.positives = Some(positives);
        summary.negatives = Some(negatives);
        summary.true_rejections = Some(true_rej);
        summary.false_rejections = Some(false_rej);
        summary.fdr = Some(false_rej as f64 / rejections.max(1) as f64);
        summary.fpr = (negatives > 0).then(|| false_rej as f64 / negatives as f64);
        summary.power = Some(if positives > 0 {
            true_rej as f64 / positives as f64
        } else {
            0.0
        });
        summary.auroc = auroc(scores, labels)?;
    }
    let items = (0..n)
        .map(|i| ReportItem {
            id: None,
            score: scores[i],
            pvalue: pvals[i],
            rejected: rejected[i],
            label: labels.map(|l| l[i]),
        })
        .collect();
    Ok(TestReport {
        procedure,
        items,
        summary,
    })
}

impl TestReport {
    pub fn with_ids(mut self, ids: &[Option<String>]) -> Result<Self> {
        if ids.len() != self.items.len() {
            return Err(Error::ShapeMismatch("one id per item is required".into()));
        }
        for (item, id) in self.items.iter_mut().zip(ids) {
            item.id = id.clone();
        }
        Ok(self)
    }
}
