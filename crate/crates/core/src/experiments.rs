//! Synthetic benchmark protocols: spike sweep, researcher FDR/FPR study,
//! TAMSD scaling, p-value calibration tables and a smooth CVaR descent.

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvar::{default_half_width, smooth_cvar_descent, CvarSurrogateSpec, DescentStep};
use crate::datasets::{
    path_rng, simulate_bm, simulate_spiked_bm, spike_epsilon_grid, SpikeConfig, SpikeEnvelope,
};
use crate::error::{invalid, Error, Result};
use crate::multiple_testing::{auroc, Correction};
use crate::pipeline::{Detector, PValueMethod, StatisticKind};
use crate::signature::{apply_transforms, signatures, PathStream, Transform};
use crate::statistics::{tamsd, ExpectedSignatureModel};
use crate::tails::DEFAULT_TAIL_FRACTION;
use crate::tensor::{pairing, TruncatedTensor, Word};

/// Independent 64-bit seed for sub-experiment `tag`.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    path_rng(seed, tag).next_u64()
}

fn mix(tags: &[u64]) -> u64 {
    tags.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &t| {
        (h ^ t).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn brownian(n: usize, steps: usize, horizon: f64, seed: u64) -> Result<Vec<PathStream>> {
    simulate_bm(n, steps, &DMatrix::identity(1, 1), horizon, seed)
}

fn spiked(
    eps: f64,
    envelope: SpikeEnvelope,
    n: usize,
    steps: usize,
    horizon: f64,
    seed: u64,
) -> Result<Vec<PathStream>> {
    let cfg = SpikeConfig {
        epsilon: eps,
        horizon,
        steps,
        envelope,
        ..SpikeConfig::default()
    };
    simulate_spiked_bm(&cfg, n, seed)
}

/// Ranks with ties sharing their mean rank (1-based).
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::ShapeMismatch(
            "Spearman needs two aligned samples of length ≥ 2".into(),
        ));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    Ok(sxy / (sxx * syy).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::ShapeMismatch(
            "slope needs two aligned samples of length ≥ 2".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log slope needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

// ---------------------------------------------------------------------------
// Spike sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeSweepConfig {
    pub epsilons: Vec<f64>,
    pub n_reference: usize,
    pub n_normal: usize,
    pub n_spiked: usize,
    pub level: usize,
    pub steps: usize,
    pub horizon: f64,
    pub envelope: SpikeEnvelope,
    pub transforms: Vec<Transform>,
    pub statistics: Vec<StatisticKind>,
    /// TAMSD lags compared alongside the signature statistics.
    pub tamsd_lags: Vec<usize>,
    pub seed: u64,
}

impl Default for SpikeSweepConfig {
    fn default() -> Self {
        SpikeSweepConfig {
            epsilons: spike_epsilon_grid(),
            n_reference: 1000,
            n_normal: 500,
            n_spiked: 500,
            level: 4,
            steps: 200,
            horizon: 2.0,
            envelope: SpikeEnvelope::default(),
            transforms: vec![Transform::Time],
            statistics: vec![StatisticKind::Distance],
            tamsd_lags: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub statistic: String,
    pub epsilon: f64,
    pub auroc: f64,
    pub mean_score_normal: f64,
    pub mean_score_spiked: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeSweep {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

impl SpikeSweep {
    /// `(ε, AUROC)` pairs of one statistic, in grid order.
    pub fn curve(&self, statistic: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.statistic == statistic)
            .map(|r| (r.epsilon, r.auroc))
            .collect()
    }

    pub fn spearman(&self, statistic: &str) -> Result<f64> {
        let (e, a): (Vec<f64>, Vec<f64>) = self.curve(statistic).into_iter().unzip();
        spearman(&e, &a)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sweep_row(statistic: String, epsilon: f64, normal: &[f64], spiked: &[f64]) -> Result<SweepRow> {
    let scores: Vec<f64> = normal.iter().chain(spiked).copied().collect();
    let labels: Vec<bool> = (0..scores.len()).map(|i| i >= normal.len()).collect();
    Ok(SweepRow {
        statistic,
        epsilon,
        auroc: auroc(&scores, &labels)?
            .ok_or(Error::EmptyInput("spike sweep needs both classes"))?,
        mean_score_normal: mean(normal),
        mean_score_spiked: mean(spiked),
    })
}

/// AUROC of each statistic for BM against spiked BM, per spike intensity.
/// Lags with `τ ≥ L` are skipped and reported in `warnings`.
pub fn spike_sweep(cfg: &SpikeSweepConfig) -> Result<SpikeSweep> {
    if cfg.n_normal == 0 || cfg.n_spiked == 0 {
        return Err(Error::EmptyInput(
            "spike sweep needs normal and spiked paths",
        ));
    }
    let reference = brownian(
        cfg.n_reference,
        cfg.steps,
        cfg.horizon,
        sub_seed(cfg.seed, 0),
    )?;
    let detectors = cfg
        .statistics
        .iter()
        .map(|k| Detector::fit(k, &reference, cfg.level, &cfg.transforms))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let lags: Vec<usize> = cfg
        .tamsd_lags
        .iter()
        .copied()
        .filter(|&tau| {
            let ok = tau >= 1 && tau < cfg.steps;
            if !ok {
                warnings.push(format!(
                    "TAMSD lag {tau} skipped: needs 1 ≤ τ < L = {}",
                    cfg.steps
                ));
            }
            ok
        })
        .collect();
    let mut rows = Vec::new();
    for (k, &eps) in cfg.epsilons.iter().enumerate() {
        let k = k as u64;
        let normal = brownian(
            cfg.n_normal,
            cfg.steps,
            cfg.horizon,
            sub_seed(cfg.seed, 1 + 2 * k),
        )?;
        let spike = spiked(
            eps,
            cfg.envelope,
            cfg.n_spiked,
            cfg.steps,
            cfg.horizon,
            sub_seed(cfg.seed, 2 + 2 * k),
        )?;
        for (kind, det) in cfg.statistics.iter().zip(&detectors) {
            let (a, b) = (det.score(&normal)?, det.score(&spike)?);
            rows.push(sweep_row(kind.name().to_owned(), eps, &a, &b)?);
        }
        for &tau in &lags {
            let score = |ps: &[PathStream]| {
                ps.par_iter()
                    .map(|p| tamsd(p, tau))
                    .collect::<Result<Vec<f64>>>()
            };
            rows.push(sweep_row(
                format!("tamsd_{tau}"),
                eps,
                &score(&normal)?,
                &score(&spike)?,
            )?);
        }
    }
    Ok(SpikeSweep { rows, warnings })
}

// ---------------------------------------------------------------------------
// Researcher protocol
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResearcherConfig {
    pub researchers: usize,
    /// Reference paths used to fit the statistic.
    pub n_fit: usize,
    /// Reference paths used for empirical p-values.
    pub n_calibration: usize,
    /// Extra reference paths scored for the tail fit; 0 disables the Weibull method.
    pub n_tail: usize,
    pub tail_fraction: f64,
    pub test_sets: usize,
    pub test_size: usize,
    pub outlier_fraction: f64,
    pub epsilon: f64,
    pub envelope: SpikeEnvelope,
    pub level: usize,
    pub steps: usize,
    pub horizon: f64,
    pub transforms: Vec<Transform>,
    pub statistic: StatisticKind,
    /// Level of the corrected procedure.
    pub fdr_alpha: f64,
    /// Threshold on raw p-values.
    pub fpr_alpha: f64,
    pub correction: Correction,
    pub seed: u64,
}

impl Default for ResearcherConfig {
    fn default() -> Self {
        ResearcherConfig {
            researchers: 100,
            n_fit: 1000,
            n_calibration: 1000,
            n_tail: 0,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            test_sets: 50,
            test_size: 1000,
            outlier_fraction: 0.1,
            epsilon: 4.0,
            envelope: SpikeEnvelope::default(),
            level: 4,
            steps: 200,
            horizon: 2.0,
            transforms: vec![Transform::Time],
            statistic: StatisticKind::Distance,
            fdr_alpha: 0.1,
            fpr_alpha: 0.01,
            correction: Correction::Bh,
            seed: 0,
        }
    }
}

impl ResearcherConfig {
    pub fn outliers_per_set(&self) -> usize {
        (self.outlier_fraction * self.test_size as f64).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.researchers == 0 || self.test_sets == 0 || self.test_size == 0 {
            return Err(invalid(
                "researchers, test sets and test size must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(invalid("outlier fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<PValueMethod> {
        let mut m = vec![PValueMethod::Empirical];
        if self.n_tail > 0 {
            m.push(PValueMethod::Weibull);
        }
        m
    }
}

/// Labeled test set `l` of researcher `j`: BM first, spiked paths last.
pub fn researcher_test_set(
    cfg: &ResearcherConfig,
    j: usize,
    l: usize,
) -> Result<(Vec<PathStream>, Vec<bool>)> {
    let n_out = cfg.outliers_per_set();
    let n_in = cfg.test_size - n_out;
    let (j, l) = (j as u64, l as u64);
    let mut paths = brownian(
        n_in,
        cfg.steps,
        cfg.horizon,
        sub_seed(cfg.seed, mix(&[j, l, 3])),
    )?;
    let out = spiked(
        cfg.epsilon,
        cfg.envelope,
        n_out,
        cfg.steps,
        cfg.horizon,
        sub_seed(cfg.seed, mix(&[j, l, 4])),
    )?;
    for (i, p) in out.into_iter().enumerate() {
        paths.push(p.with_id(format!("r{j}-t{l}-spike-{i}")));
    }
    for (i, p) in paths.iter_mut().take(n_in).enumerate() {
        *p = p.clone().with_id(format!("r{j}-t{l}-bm-{i}"));
    }
    let labels = (0..cfg.test_size).map(|i| i >= n_in).collect();
    Ok((paths, labels))
}

/// Reference paths of researcher `j`: `(fit, calibration, tail)`.
pub fn researcher_reference(
    cfg: &ResearcherConfig,
    j: usize,
) -> Result<(Vec<PathStream>, Vec<PathStream>, Vec<PathStream>)> {
    let j = j as u64;
    let s = |k| sub_seed(cfg.seed, mix(&[j, u64::MAX, k]));
    Ok((
        brownian(cfg.n_fit, cfg.steps, cfg.horizon, s(0))?,
        brownian(cfg.n_calibration, cfg.steps, cfg.horizon, s(1))?,
        brownian(cfg.n_tail, cfg.steps, cfg.horizon, s(2))?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResearcherRow {
    pub researcher: usize,
    pub test_set: usize,
    pub method: String,
    pub rejections: usize,
    pub false_rejections: usize,
    /// False discovery proportion of the corrected procedure.
    pub fdp: f64,
    /// Power of the corrected procedure.
    pub power: f64,
    /// False positive rate of raw p-values at `fpr_alpha`.
    pub fpr: f64,
    /// Power of raw p-values at `fpr_alpha`.
    pub power_raw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Mean FDP over all researchers and test sets.
    pub fdr: f64,
    pub power: f64,
    pub fpr: f64,
    pub power_raw: f64,
    /// Share of researchers whose mean FDP is at most `fdr_alpha`.
    pub conditional_fdr_controlled: f64,
    /// Share of researchers whose mean FPR is at most `fpr_alpha`.
    pub conditional_fpr_controlled: f64,
    /// Standard deviation across researchers of the mean FPR.
    pub fpr_sd_across_researchers: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResearcherStudy {
    pub rows: Vec<ResearcherRow>,
    pub summaries: Vec<MethodSummary>,
}

fn researcher_rows(cfg: &ResearcherConfig, j: usize) -> Result<Vec<ResearcherRow>> {
    let (fit, cal, tail) = researcher_reference(cfg, j)?;
    let mut det = Detector::fit(&cfg.statistic, &fit, cfg.level, &cfg.transforms)?;
    det.calibrate(&cal)?;
    if cfg.n_tail > 0 {
        let scores = det.score(&tail)?;
        det.fit_tail(&scores, cfg.tail_fraction)?;
    }
    let mut rows = Vec::new();
    for l in 0..cfg.test_sets {
        let (paths, labels) = researcher_test_set(cfg, j, l)?;
        let scores = det.score(&paths)?;
        for method in cfg.methods() {
            let p = det.pvalues(&scores, method)?;
            let rejected = cfg.correction.apply(&p, cfg.fdr_alpha)?;
            let raw: Vec<bool> = p.iter().map(|&x| x <= cfg.fpr_alpha).collect();
            let count = |mask: &[bool], label: bool| {
                mask.iter()
                    .zip(&labels)
                    .filter(|(&r, &y)| r && y == label)
                    .count()
            };
            let pos = labels.iter().filter(|&&y| y).count();
            let neg = labels.len() - pos;
            let rejections = rejected.iter().filter(|&&r| r).count();
            let false_rejections = count(&rejected, false);
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            rows.push(ResearcherRow {
                researcher: j,
                test_set: l,
                method: method.name().to_owned(),
                rejections,
                false_rejections,
                fdp: false_rejections as f64 / rejections.max(1) as f64,
                power: ratio(count(&rejected, true), pos),
                fpr: ratio(count(&raw, false), neg),
                power_raw: ratio(count(&raw, true), pos),
            });
        }
    }
    Ok(rows)
}

fn summarize(
    cfg: &ResearcherConfig,
    rows: &[ResearcherRow],
    method: PValueMethod,
) -> MethodSummary {
    let mine: Vec<&ResearcherRow> = rows.iter().filter(|r| r.method == method.name()).collect();
    let avg = |f: &dyn Fn(&ResearcherRow) -> f64| {
        mine.iter().map(|r| f(r)).sum::<f64>() / mine.len() as f64
    };
    let per_researcher = |f: &dyn Fn(&ResearcherRow) -> f64| -> Vec<f64> {
        (0..cfg.researchers)
            .map(|j| {
                let v: Vec<f64> = mine
                    .iter()
                    .filter(|r| r.researcher == j)
                    .map(|r| f(r))
                    .collect();
                mean(&v)
            })
            .collect()
    };
    let fdp_j = per_researcher(&|r| r.fdp);
    let fpr_j = per_researcher(&|r| r.fpr);
    let share = |v: &[f64], a: f64| v.iter().filter(|&&x| x <= a).count() as f64 / v.len() as f64;
    let m = mean(&fpr_j);
    let sd = if fpr_j.len() > 1 {
        (fpr_j.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (fpr_j.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    MethodSummary {
        method: method.name().to_owned(),
        fdr: avg(&|r| r.fdp),
        power: avg(&|r| r.power),
        fpr: avg(&|r| r.fpr),
        power_raw: avg(&|r| r.power_raw),
        conditional_fdr_controlled: share(&fdp_j, cfg.fdr_alpha),
        conditional_fpr_controlled: share(&fpr_j, cfg.fpr_alpha),
        fpr_sd_across_researchers: sd,
    }
}

/// Independent researchers, each with its own reference data and labeled test sets.
pub fn researcher_protocol(cfg: &ResearcherConfig) -> Result<ResearcherStudy> {
    cfg.validate()?;
    let per: Vec<Vec<ResearcherRow>> = (0..cfg.researchers)
        .into_par_iter()
        .map(|j| researcher_rows(cfg, j))
        .collect::<Result<_>>()?;
    let rows: Vec<ResearcherRow> = per.into_iter().flatten().collect();
    let summaries = cfg
        .methods()
        .into_iter()
        .map(|m| summarize(cfg, &rows, m))
        .collect();
    Ok(ResearcherStudy { rows, summaries })
}

// ---------------------------------------------------------------------------
// TAMSD scaling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TamsdRow {
    pub process: String,
    pub tau: usize,
    pub mean_tamsd: f64,
    pub paths: usize,
}

/// Ensemble-mean TAMSD per lag. Lags outside `1..L` are skipped with a warning.
pub fn tamsd_table(
    process: &str,
    paths: &[PathStream],
    lags: &[usize],
) -> Result<(Vec<TamsdRow>, Vec<String>)> {
    let nodes = paths
        .first()
        .ok_or(Error::EmptyInput("no paths"))?
        .num_nodes();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &tau in lags {
        if tau == 0 || tau >= nodes - 1 {
            warnings.push(format!(
                "TAMSD lag {tau} skipped for {process}: needs 1 ≤ τ < L = {}",
                nodes - 1
            ));
            continue;
        }
        let v = paths
            .par_iter()
            .map(|p| tamsd(p, tau))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(TamsdRow {
            process: process.to_owned(),
            tau,
            mean_tamsd: mean(&v),
            paths: paths.len(),
        });
    }
    Ok((rows, warnings))
}

/// Log-log slope of mean TAMSD against lag.
pub fn tamsd_slope(rows: &[TamsdRow]) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.tau as f64, r.mean_tamsd)).unzip();
    loglog_slope(&x, &y)
}

// ---------------------------------------------------------------------------
// p-value calibration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub method: String,
    pub threshold: f64,
    /// Fraction of null p-values at or below the threshold.
    pub rejection_rate: f64,
    /// Monte-Carlo standard error of the rate at the nominal level.
    pub standard_error: f64,
}

/// `P(p ≤ t)` for null p-values at each threshold.
pub fn calibration_table(method: &str, pvals: &[f64], thresholds: &[f64]) -> Vec<CalibrationRow> {
    let n = pvals.len() as f64;
    thresholds
        .iter()
        .map(|&t| CalibrationRow {
            method: method.to_owned(),
            threshold: t,
            rejection_rate: pvals.iter().filter(|&&p| p <= t).count() as f64 / n,
            standard_error: (t * (1.0 - t) / n).sqrt(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub score: f64,
    pub empirical_survival: f64,
    pub fitted_survival: f64,
}

/// Rank survival `i/(n+1)` of the top scores next to the fitted tail model.
pub fn tail_table(scores: &[f64], det: &Detector, top: usize) -> Result<Vec<TailRow>> {
    let tail = det
        .tail
        .as_ref()
        .ok_or_else(|| invalid("detector has no tail model"))?;
    let mut desc = scores.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let n = desc.len() as f64;
    Ok(desc
        .iter()
        .take(top)
        .enumerate()
        .map(|(i, &s)| TailRow {
            score: s,
            empirical_survival: (i + 1) as f64 / (n + 1.0),
            fitted_survival: tail.survival(s),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Smooth CVaR descent
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvarDemoConfig {
    pub n_paths: usize,
    /// Level of the functional `w`.
    pub level: usize,
    /// Degree of the surrogate for `max(x, 0)`.
    pub degree: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub step: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for CvarDemoConfig {
    fn default() -> Self {
        CvarDemoConfig {
            n_paths: 1000,
            level: 2,
            degree: 4,
            alpha: 0.9,
            lambda: 1.0,
            step: 0.05,
            iterations: 20,
            seed: 0,
        }
    }
}

/// Gradient descent on the regularized smooth CVaR of time-augmented BM,
/// starting from the increment functional of the space channel.
pub fn cvar_descent_demo(cfg: &CvarDemoConfig) -> Result<Vec<DescentStep>> {
    let paths: Vec<PathStream> = brownian(cfg.n_paths, 200, 2.0, sub_seed(cfg.seed, 0))?
        .iter()
        .map(|p| apply_transforms(p, &[Transform::Time]))
        .collect();
    let es_level = cfg.degree * cfg.level;
    let sigs = signatures(&paths, es_level)?;
    let es = ExpectedSignatureModel::from_signatures(&sigs, false)?.mean;
    let w0 = TruncatedTensor::from_word(2, cfg.level, &Word::new(vec![2]), 1.0)?;
    let scores = sigs
        .iter()
        .map(|s| pairing(&w0, &s.tensor().truncated(cfg.level)))
        .collect::<Result<Vec<f64>>>()?;
    let spec = CvarSurrogateSpec::fitted(cfg.degree, default_half_width(&scores), cfg.alpha)?;
    Ok(smooth_cvar_descent(&w0, &es, &spec, cfg.lambda, cfg.step, cfg.iterations)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 0.7).abs() < 1e-12);
        assert!(loglog_slope(&[0.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn small_sweep_runs_and_warns() {
        let cfg = SpikeSweepConfig {
            epsilons: vec![0.0, 6.0],
            n_reference: 100,
            n_normal: 50,
            n_spiked: 50,
            level: 3,
            steps: 50,
            tamsd_lags: vec![1, 512],
            ..SpikeSweepConfig::default()
        };
        let s = spike_sweep(&cfg).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("512"));
        assert_eq!(s, spike_sweep(&cfg).unwrap());
    }

    #[test]
    fn small_researcher_study() {
        let cfg = ResearcherConfig {
            researchers: 2,
            n_fit: 50,
            n_calibration: 100,
            n_tail: 200,
            test_sets: 2,
            test_size: 40,
            level: 3,
            steps: 40,
            ..ResearcherConfig::default()
        };
        let s = researcher_protocol(&cfg).unwrap();
        assert_eq!(s.rows.len(), 2 * 2 * 2);
        assert_eq!(s.summaries.len(), 2);
        let (paths, labels) = researcher_test_set(&cfg, 1, 1).unwrap();
        assert_eq!(labels.iter().filter(|&&l| l).count(), 4);
        assert_eq!(paths.len(), 40);
        assert_eq!(s, researcher_protocol(&cfg).unwrap());
    }

    #[test]
    fn cvar_demo_descends() {
        let cfg = CvarDemoConfig {
            n_paths: 200,
            iterations: 5,
            ..CvarDemoConfig::default()
        };
        let trace = cvar_descent_demo(&cfg).unwrap();
        assert_eq!(trace.len(), 6);
        assert!(trace[5].objective < trace[0].objective);
    }

    #[test]
    fn calibration_table_counts() {
        let rows = calibration_table("x", &[0.01, 0.2, 0.5, 1.0], &[0.01, 0.5]);
        assert_eq!(rows[0].rejection_rate, 0.25);
        assert_eq!(rows[1].rejection_rate, 0.75);
    }
}
