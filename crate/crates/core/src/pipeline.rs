//! Fitted detectors: path transforms, a score model and calibration data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::multiple_testing::{evaluate, Correction, Procedure, TestReport};
use crate::signature::{apply_transforms, signatures, PathStream, Signature, Transform};
use crate::statistics::{ConformanceModel, ExpectedSignatureModel, OcsvmModel, ScoreModel};
use crate::tails::{parametric_pvalue, weibull_tail_fit, EmpiricalCalibration, TailModelWeibull};

pub const DEFAULT_OCSVM_NU: f64 = 0.1;

/// Which statistic to fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticKind {
    Distance,
    Conformance { ridge: Option<f64> },
    Ocsvm { nu: f64 },
}

impl StatisticKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dist" | "distance" => Ok(StatisticKind::Distance),
            "conf" | "conformance" => Ok(StatisticKind::Conformance { ridge: None }),
            "ocsvm" => Ok(StatisticKind::Ocsvm {
                nu: DEFAULT_OCSVM_NU,
            }),
            other => Err(invalid(format!(
                "unknown statistic {other:?} (dist | conf | ocsvm)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StatisticKind::Distance => "dist",
            StatisticKind::Conformance { .. } => "conf",
            StatisticKind::Ocsvm { .. } => "ocsvm",
        }
    }

    pub fn fit(&self, sigs: &[Signature]) -> Result<ScoreModel> {
        Ok(match self {
            StatisticKind::Distance => {
                ScoreModel::Distance(ExpectedSignatureModel::from_signatures(sigs, false)?)
            }
            StatisticKind::Conformance { ridge } => {
                ScoreModel::Conformance(ConformanceModel::from_signatures(sigs, *ridge)?)
            }
            StatisticKind::Ocsvm { nu } => {
                ScoreModel::Ocsvm(OcsvmModel::from_signatures(sigs, *nu)?)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Conformal p-values against calibration scores.
    Empirical,
    /// Survival of the fitted tail model.
    Weibull,
}

impl PValueMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(PValueMethod::Empirical),
            "weibull" => Ok(PValueMethod::Weibull),
            other => Err(invalid(format!(
                "unknown p-value method {other:?} (empirical | weibull)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PValueMethod::Empirical => "empirical",
            PValueMethod::Weibull => "weibull",
        }
    }
}

/// Everything needed to turn raw paths into scores and p-values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Detector {
    pub transforms: Vec<Transform>,
    pub model: ScoreModel,
    #[serde(default)]
    pub calibration: Option<EmpiricalCalibration>,
    #[serde(default)]
    pub tail: Option<TailModelWeibull>,
}

fn check_paths(paths: &[PathStream]) -> Result<()> {
    let first = paths.first().ok_or(Error::EmptyInput("no paths"))?;
    if paths.iter().any(|p| p.dim() != first.dim()) {
        return Err(Error::ShapeMismatch(
            "paths have different dimensions".into(),
        ));
    }
    Ok(())
}

impl Detector {
    pub fn fit(
        kind: &StatisticKind,
        paths: &[PathStream],
        level: usize,
        transforms: &[Transform],
    ) -> Result<Self> {
        check_paths(paths)?;
        if level == 0 {
            return Err(invalid("signature level must be at least 1"));
        }
        let prepared: Vec<PathStream> = paths
            .par_iter()
            .map(|p| apply_transforms(p, transforms))
            .collect();
        let model = kind.fit(&signatures(&prepared, level)?)?;
        Ok(Detector {
            transforms: transforms.to_vec(),
            model,
            calibration: None,
            tail: None,
        })
    }

    /// Novelty scores in input order.
    pub fn score(&self, paths: &[PathStream]) -> Result<Vec<f64>> {
        paths
            .par_iter()
            .map(|p| {
                let x = apply_transforms(p, &self.transforms);
                if x.dim() != self.model.dim() {
                    return Err(Error::ShapeMismatch(format!(
                        "model expects transformed dimension {}, path {} has {}",
                        self.model.dim(),
                        p.id().unwrap_or("?"),
                        x.dim()
                    )));
                }
                self.model.novelty(&x)
            })
            .collect()
    }

    /// Scores `paths` and keeps them as calibration sample; returns the scores.
    pub fn calibrate(&mut self, paths: &[PathStream]) -> Result<Vec<f64>> {
        check_paths(paths)?;
        let scores = self.score(paths)?;
        self.calibration = Some(EmpiricalCalibration::new(&scores)?);
        Ok(scores)
    }

    pub fn fit_tail(&mut self, scores: &[f64], tail_fraction: f64) -> Result<&TailModelWeibull> {
        Ok(self
            .tail
            .insert(weibull_tail_fit(scores, self.model.level(), tail_fraction)?))
    }

    pub fn pvalues(&self, scores: &[f64], method: PValueMethod) -> Result<Vec<f64>> {
        match method {
            PValueMethod::Empirical => {
                let cal = self
                    .calibration
                    .as_ref()
                    .ok_or_else(|| invalid("empirical p-values need calibration scores"))?;
                Ok(scores.iter().map(|&s| cal.pvalue(s)).collect())
            }
            PValueMethod::Weibull => {
                let tail = self
                    .tail
                    .as_ref()
                    .ok_or_else(|| invalid("weibull p-values need a fitted tail model"))?;
                Ok(scores.iter().map(|&s| parametric_pvalue(s, tail)).collect())
            }
        }
    }

    /// Scores, p-values, corrected rejections and the summary for one batch.
    pub fn test(
        &self,
        paths: &[PathStream],
        labels: Option<&[bool]>,
        alpha: f64,
        method: PValueMethod,
        correction: Correction,
    ) -> Result<TestReport> {
        let scores = self.score(paths)?;
        let pvals = self.pvalues(&scores, method)?;
        let rejected = correction.apply(&pvals, alpha)?;
        let procedure = Procedure {
            alpha,
            method: method.name().to_owned(),
            correction,
        };
        let ids: Vec<Option<String>> = paths.iter().map(|p| p.id().map(str::to_owned)).collect();
        evaluate(&scores, &pvals, &rejected, labels, procedure)?.with_ids(&ids)
    }
}
