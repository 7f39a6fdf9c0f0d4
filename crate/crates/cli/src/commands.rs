//! Subcommand bodies. Each reads its inputs, calls the library and writes
//! outputs plus a manifest of the resolved configuration.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use sigtest::datasets::{
    simulate_bm, simulate_fbm, simulate_spiked_bm_with_theta, DatasetManifest, SpikeConfig,
};
use sigtest::experiments::{
    calibration_table, cvar_descent_demo, researcher_protocol, researcher_reference,
    researcher_test_set, spike_sweep, sub_seed, tail_table, tamsd_slope, tamsd_table,
    CvarDemoConfig, MethodSummary, ResearcherConfig, SpikeSweepConfig,
};
use sigtest::multiple_testing::{Correction, TestReport};
use sigtest::pipeline::{Detector, PValueMethod, StatisticKind};
use sigtest::PathStream;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{
    read_labels, read_paths, read_text, write_json, write_labels, write_paths, write_rows,
    write_text,
};

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn sigma(cfg: &RunConfig) -> CliResult<DMatrix<f64>> {
    let d = cfg.dim.unwrap_or(1);
    match &cfg.sigma {
        None => Ok(DMatrix::identity(d, d)),
        Some(v) if v.len() == d * d => Ok(DMatrix::from_row_slice(d, d, v)),
        Some(v) => Err(CliError::Config(format!(
            "--sigma has {} entries, expected {}",
            v.len(),
            d * d
        ))),
    }
}

fn researcher_config(cfg: &RunConfig) -> CliResult<ResearcherConfig> {
    let d = ResearcherConfig::default();
    let refs = cfg.ref_size.unwrap_or(d.n_fit + d.n_calibration);
    Ok(ResearcherConfig {
        researchers: cfg.researchers.unwrap_or(d.researchers),
        n_fit: refs / 2,
        n_calibration: refs - refs / 2,
        n_tail: 0,
        test_sets: cfg.test_sets.unwrap_or(d.test_sets),
        test_size: cfg.test_size.unwrap_or(d.test_size),
        outlier_fraction: cfg.outlier_fraction.unwrap_or(d.outlier_fraction),
        epsilon: cfg.epsilon.unwrap_or(d.epsilon),
        envelope: cfg.envelope()?,
        level: cfg.level()?,
        steps: cfg.steps(),
        horizon: cfg.horizon(),
        transforms: cfg.transforms()?,
        statistic: cfg.statistic()?,
        seed: cfg.seed(),
        ..d
    })
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require_output()?;
    let generator = cfg.generator.as_deref().unwrap_or("bm");
    let (n, steps, horizon, seed) = (cfg.n_paths(), cfg.steps(), cfg.horizon(), cfg.seed());
    let dataset = |dim: usize, params: serde_json::Value| {
        DatasetManifest::new(generator, seed, n, steps, horizon, dim, params)
    };
    let data_manifest = match generator {
        "bm" => {
            let s = sigma(cfg)?;
            let paths = simulate_bm(n, steps, &s, horizon, seed)?;
            write_paths(&out.join("paths.csv"), &paths)?;
            dataset(s.nrows(), serde_json::json!({ "sigma": cfg.sigma }))
        }
        "spike" => {
            let spike = SpikeConfig {
                epsilon: cfg.epsilon.unwrap_or(0.0),
                horizon,
                steps,
                envelope: cfg.envelope()?,
                ..SpikeConfig::default()
            };
            let drawn = simulate_spiked_bm_with_theta(&spike, n, seed)?;
            let (paths, thetas): (Vec<PathStream>, Vec<f64>) = drawn.into_iter().unzip();
            write_paths(&out.join("paths.csv"), &paths)?;
            let rows: Vec<ThetaRow> = paths
                .iter()
                .zip(&thetas)
                .map(|(p, &theta)| ThetaRow {
                    path_id: p.id().unwrap_or_default().to_owned(),
                    theta,
                })
                .collect();
            write_rows(&out.join("spike_times.csv"), &rows)?;
            dataset(
                1,
                serde_json::to_value(&spike).map_err(|e| CliError::Config(e.to_string()))?,
            )
        }
        "fbm" => {
            let h = cfg
                .hurst
                .ok_or_else(|| CliError::Config("fbm needs --hurst".into()))?;
            let paths = simulate_fbm(h, n, steps, horizon, seed)?;
            write_paths(&out.join("paths.csv"), &paths)?;
            dataset(1, serde_json::json!({ "hurst": h }))
        }
        "researchers" => {
            let rc = researcher_config(cfg)?;
            for j in 0..rc.researchers {
                let dir = out.join(format!("researcher_{j:03}"));
                let (fit, cal, _) = researcher_reference(&rc, j)?;
                let reference: Vec<PathStream> = fit
                    .into_iter()
                    .chain(cal)
                    .enumerate()
                    .map(|(i, p)| p.with_id(format!("r{j}-ref-{i}")))
                    .collect();
                write_paths(&dir.join("reference.csv"), &reference)?;
                for l in 0..rc.test_sets {
                    let (paths, labels) = researcher_test_set(&rc, j, l)?;
                    write_paths(&dir.join(format!("test_{l:03}.csv")), &paths)?;
                    write_labels(
                        &dir.join(format!("test_{l:03}.labels.csv")),
                        &paths,
                        &labels,
                    )?;
                }
            }
            DatasetManifest::new(
                generator,
                seed,
                rc.n_fit + rc.n_calibration,
                steps,
                horizon,
                1,
                serde_json::to_value(&rc).map_err(|e| CliError::Config(e.to_string()))?,
            )
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown generator {other:?} (bm | spike | fbm | researchers)"
            )))
        }
    };
    write_json(&out.join("dataset.json"), &data_manifest)?;
    write_text(&out.join("manifest.json"), &cfg.manifest()?)
}

#[derive(Serialize)]
struct ThetaRow {
    path_id: String,
    theta: f64,
}

// ---------------------------------------------------------------------------
// fit / score
// ---------------------------------------------------------------------------

/// Model file written by `fit`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: String,
    pub statistic: StatisticKind,
    pub level: usize,
    pub detector: Detector,
}

pub fn read_model(path: &Path) -> CliResult<ModelFile> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn fit(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require_output()?;
    let mut paths = read_paths(cfg.require_input()?)?;
    let mut calibration = match &cfg.calibration {
        Some(p) => Some(read_paths(p)?),
        None => None,
    };
    if let Some(k) = cfg.fit_size {
        if calibration.is_some() {
            return Err(CliError::Config(
                "--fit-size and --calibration are exclusive".into(),
            ));
        }
        if k == 0 || k >= paths.len() {
            return Err(CliError::Config(format!(
                "--fit-size {k} must leave paths on both sides of {}",
                paths.len()
            )));
        }
        calibration = Some(paths.split_off(k));
    }
    let kind = cfg.statistic()?;
    let level = cfg.level()?;
    let mut det = Detector::fit(&kind, &paths, level, &cfg.transforms()?)?;
    let cal_scores = match &calibration {
        Some(c) => Some(det.calibrate(c)?),
        None => None,
    };
    match cfg.tail.as_deref().unwrap_or("none") {
        "none" => {}
        "weibull" => {
            let scores = cal_scores
                .as_ref()
                .ok_or_else(|| CliError::Config("--tail weibull needs calibration paths".into()))?;
            det.fit_tail(scores, cfg.tail_fraction())?;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown tail model {other:?} (none | weibull)"
            )))
        }
    }
    let model = ModelFile {
        format: "sigtest-model".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        statistic: kind,
        level,
        detector: det,
    };
    write_json(out, &model)?;
    write_text(&manifest_path(out), &cfg.manifest()?)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreRow {
    pub path_id: String,
    pub score: f64,
}

pub fn score(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require_output()?;
    let model = read_model(cfg.require_model()?)?;
    let paths = read_paths(cfg.require_input()?)?;
    let scores = model.detector.score(&paths)?;
    let rows: Vec<ScoreRow> = paths
        .iter()
        .zip(scores)
        .map(|(p, score)| ScoreRow {
            path_id: p.id().unwrap_or_default().to_owned(),
            score,
        })
        .collect();
    write_rows(out, &rows)?;
    write_text(&manifest_path(out), &cfg.manifest()?)
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ItemRow<'a> {
    path_id: &'a str,
    score: f64,
    pvalue: f64,
    rejected: u8,
    label: Option<u8>,
}

#[derive(Serialize)]
struct MetricRow {
    metric: &'static str,
    value: Option<f64>,
}

fn summary_rows(r: &TestReport) -> Vec<MetricRow> {
    let s = &r.summary;
    let n = |v: Option<usize>| v.map(|x| x as f64);
    vec![
        MetricRow {
            metric: "alpha",
            value: Some(r.procedure.alpha),
        },
        MetricRow {
            metric: "items",
            value: Some(s.items as f64),
        },
        MetricRow {
            metric: "rejections",
            value: Some(s.rejections as f64),
        },
        MetricRow {
            metric: "positives",
            value: n(s.positives),
        },
        MetricRow {
            metric: "negatives",
            value: n(s.negatives),
        },
        MetricRow {
            metric: "true_rejections",
            value: n(s.true_rejections),
        },
        MetricRow {
            metric: "false_rejections",
            value: n(s.false_rejections),
        },
        MetricRow {
            metric: "fdr",
            value: s.fdr,
        },
        MetricRow {
            metric: "fpr",
            value: s.fpr,
        },
        MetricRow {
            metric: "power",
            value: s.power,
        },
        MetricRow {
            metric: "auroc",
            value: s.auroc,
        },
    ]
}

pub fn test(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require_output()?;
    let mut det = read_model(cfg.require_model()?)?.detector;
    if let Some(c) = &cfg.calibration {
        det.calibrate(&read_paths(c)?)?;
    }
    let paths = read_paths(cfg.require_input()?)?;
    let labels = match &cfg.labels {
        Some(l) => Some(read_labels(l, &paths)?),
        None => None,
    };
    let method = cfg.pvalue_method()?;
    let correction: Correction = cfg.correction()?;
    let report = det.test(&paths, labels.as_deref(), cfg.alpha()?, method, correction)?;
    let items: Vec<ItemRow> = report
        .items
        .iter()
        .map(|i| ItemRow {
            path_id: i.id.as_deref().unwrap_or_default(),
            score: i.score,
            pvalue: i.pvalue,
            rejected: u8::from(i.rejected),
            label: i.label.map(u8::from),
        })
        .collect();
    write_rows(&out.join("items.csv"), &items)?;
    write_rows(&out.join("summary.csv"), &summary_rows(&report))?;
    write_json(&out.join("report.json"), &report)?;
    write_text(&out.join("manifest.json"), &cfg.manifest()?)
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

const PANELS: [&str; 5] = ["spike", "researchers", "tamsd", "pvalues", "cvar"];
const TAMSD_LAGS: [usize; 5] = [1, 2, 4, 16, 512];

/// Sizes of the benchmark panels.
#[derive(Clone, Debug, Serialize)]
pub struct BenchScale {
    pub researchers: ResearcherConfig,
    pub tamsd_paths: usize,
    pub tamsd_steps: usize,
    pub pvalue_fit: usize,
    pub pvalue_calibration: usize,
    pub pvalue_tail: usize,
    pub pvalue_null: usize,
}

impl BenchScale {
    pub fn named(name: &str) -> CliResult<Self> {
        match name {
            "desk" => Ok(BenchScale {
                researchers: ResearcherConfig {
                    researchers: 20,
                    n_fit: 200,
                    n_calibration: 200,
                    n_tail: 2000,
                    test_sets: 10,
                    test_size: 200,
                    ..ResearcherConfig::default()
                },
                tamsd_paths: 1000,
                tamsd_steps: 2048,
                pvalue_fit: 1000,
                pvalue_calibration: 1000,
                pvalue_tail: 10_000,
                pvalue_null: 10_000,
            }),
            "full" => Ok(BenchScale {
                researchers: ResearcherConfig {
                    n_tail: 100_000,
                    ..ResearcherConfig::default()
                },
                tamsd_paths: 1000,
                tamsd_steps: 2048,
                pvalue_fit: 1000,
                pvalue_calibration: 1000,
                pvalue_tail: 100_000,
                pvalue_null: 100_000,
            }),
            other => Err(CliError::Config(format!(
                "unknown scale {other:?} (desk | full)"
            ))),
        }
    }
}

#[derive(Serialize)]
struct SpearmanRow {
    statistic: String,
    spearman: Option<f64>,
}

#[derive(Serialize)]
struct SlopeRow {
    process: String,
    slope: f64,
}

#[derive(Default, Serialize)]
struct BenchSummary {
    spike_spearman: Vec<SpearmanRow>,
    researchers: Vec<MethodSummary>,
    tamsd_slopes: Vec<SlopeRow>,
    warnings: Vec<String>,
}

pub fn bench(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require_output()?;
    let panels: Vec<String> = cfg
        .suite
        .clone()
        .unwrap_or_else(|| PANELS.iter().map(|s| s.to_string()).collect());
    if let Some(p) = panels.iter().find(|p| !PANELS.contains(&p.as_str())) {
        return Err(CliError::Config(format!("unknown bench panel {p:?}")));
    }
    let has = |name: &str| panels.iter().any(|p| p == name);
    let scale = BenchScale::named(cfg.scale.as_deref().unwrap_or("desk"))?;
    let (seed, level, transforms, envelope) =
        (cfg.seed(), cfg.level()?, cfg.transforms()?, cfg.envelope()?);
    let mut summary = BenchSummary::default();

    if has("spike") {
        let sweep_cfg = SpikeSweepConfig {
            level,
            envelope,
            transforms: transforms.clone(),
            statistics: vec![
                StatisticKind::Distance,
                StatisticKind::Conformance { ridge: cfg.ridge },
                StatisticKind::Ocsvm {
                    nu: cfg.nu.unwrap_or(sigtest::pipeline::DEFAULT_OCSVM_NU),
                },
            ],
            tamsd_lags: TAMSD_LAGS.to_vec(),
            seed: sub_seed(seed, 1),
            ..SpikeSweepConfig::default()
        };
        let sweep = spike_sweep(&sweep_cfg)?;
        write_rows(&out.join("spike_sweep.csv"), &sweep.rows)?;
        let mut names: Vec<String> = Vec::new();
        for r in &sweep.rows {
            if !names.contains(&r.statistic) {
                names.push(r.statistic.clone());
            }
        }
        summary.spike_spearman = names
            .into_iter()
            .map(|s| SpearmanRow {
                spearman: sweep.spearman(&s).ok().filter(|v| v.is_finite()),
                statistic: s,
            })
            .collect();
        summary.warnings.extend(sweep.warnings);
    }

    if has("researchers") {
        let rc = ResearcherConfig {
            level,
            envelope,
            transforms: transforms.clone(),
            statistic: cfg.statistic()?,
            fdr_alpha: cfg.alpha.unwrap_or(0.1),
            correction: cfg.correction()?,
            seed: sub_seed(seed, 2),
            ..scale.researchers.clone()
        };
        let study = researcher_protocol(&rc)?;
        write_rows(&out.join("researchers.csv"), &study.rows)?;
        write_rows(&out.join("researchers_summary.csv"), &study.summaries)?;
        summary.researchers = study.summaries;
    }

    if has("tamsd") {
        let bm = simulate_bm(
            scale.tamsd_paths,
            scale.tamsd_steps,
            &DMatrix::identity(1, 1),
            1.0,
            sub_seed(seed, 3),
        )?;
        let fbm = simulate_fbm(
            0.25,
            scale.tamsd_paths,
            scale.tamsd_steps,
            1.0,
            sub_seed(seed, 4),
        )?;
        let mut rows = Vec::new();
        for (name, paths) in [("bm", &bm), ("fbm_h0.25", &fbm)] {
            let (r, w) = tamsd_table(name, paths, &TAMSD_LAGS)?;
            summary.tamsd_slopes.push(SlopeRow {
                process: name.to_owned(),
                slope: tamsd_slope(&r)?,
            });
            rows.extend(r);
            summary.warnings.extend(w);
        }
        write_rows(&out.join("tamsd.csv"), &rows)?;
    }

    if has("pvalues") {
        let bm = |n, k| simulate_bm(n, 200, &DMatrix::identity(1, 1), 2.0, sub_seed(seed, k));
        let mut det = Detector::fit(
            &cfg.statistic()?,
            &bm(scale.pvalue_fit, 5)?,
            level,
            &transforms,
        )?;
        det.calibrate(&bm(scale.pvalue_calibration, 6)?)?;
        let tail_scores = det.score(&bm(scale.pvalue_tail, 7)?)?;
        det.fit_tail(&tail_scores, cfg.tail_fraction())?;
        let null_scores = det.score(&bm(scale.pvalue_null, 8)?)?;
        let thresholds = [0.001, 0.01, 0.05, 0.1, 0.2];
        let mut rows = Vec::new();
        for m in [PValueMethod::Empirical, PValueMethod::Weibull] {
            rows.extend(calibration_table(
                m.name(),
                &det.pvalues(&null_scores, m)?,
                &thresholds,
            ));
        }
        write_rows(&out.join("pvalue_calibration.csv"), &rows)?;
        write_rows(
            &out.join("weibull_tail.csv"),
            &tail_table(&tail_scores, &det, 500)?,
        )?;
    }

    if has("cvar") {
        let demo = CvarDemoConfig {
            seed: sub_seed(seed, 9),
            ..CvarDemoConfig::default()
        };
        write_rows(&out.join("cvar_descent.csv"), &cvar_descent_demo(&demo)?)?;
    }

    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&out.join("summary.json"), &summary)?;
    write_text(&out.join("manifest.json"), &cfg.manifest()?)
}
