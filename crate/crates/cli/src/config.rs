//! Flat run configuration shared by all subcommands.
//!
//! Values come from an optional config file (TOML, or a JSON run manifest)
//! and are overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use sigtest::datasets::SpikeEnvelope;
use sigtest::multiple_testing::Correction;
use sigtest::pipeline::{PValueMethod, StatisticKind};
use sigtest::Transform;

use crate::error::{CliError, CliResult};

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand recorded in manifests.
    #[arg(skip)]
    pub command: Option<String>,
    /// Tool version recorded in manifests.
    #[arg(skip)]
    pub version: Option<String>,

    /// Flat TOML file, or a JSON run manifest, supplying defaults for any flag.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input path CSV (path_id,t,x1,...,xd).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file (fit, score) or directory (simulate, test, bench).
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Calibration path CSV.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Label CSV (path_id,label) with 1 marking anomalies.
    #[arg(long)]
    pub labels: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,
    /// Signature truncation level N.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// dist | conf | ocsvm
    #[arg(long)]
    pub stat: Option<String>,
    /// empirical | weibull
    #[arg(long)]
    pub pvalue_method: Option<String>,
    /// none | bh | storey
    #[arg(long)]
    pub correction: Option<String>,
    #[arg(long)]
    pub storey_lambda: Option<f64>,
    /// Comma-separated transforms applied in order (time, invisibility); `none` for raw paths.
    #[arg(long, value_delimiter = ',')]
    pub transforms: Option<Vec<String>>,
    /// One-class SVM ν.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Covariance ridge for the conformance score.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Number of leading input paths used for fitting; the rest calibrate.
    #[arg(long)]
    pub fit_size: Option<usize>,
    /// none | weibull
    #[arg(long)]
    pub tail: Option<String>,
    #[arg(long)]
    pub tail_fraction: Option<f64>,

    /// bm | spike | fbm | researchers
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Row-major d×d covariance, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sigma: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// scaled | capped
    #[arg(long)]
    pub envelope: Option<String>,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub researchers: Option<usize>,
    #[arg(long)]
    pub ref_size: Option<usize>,
    #[arg(long)]
    pub test_sets: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub outlier_fraction: Option<f64>,

    /// Bench panels: spike, researchers, tamsd, pvalues, cvar.
    #[arg(long, value_delimiter = ',')]
    pub suite: Option<Vec<String>>,
    /// desk | full
    #[arg(long)]
    pub scale: Option<String>,
}

fn to_map(cfg: &RunConfig) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))? {
        Value::Object(m) => Ok(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        _ => unreachable!("RunConfig serializes to an object"),
    }
}

fn read_file(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Overlays flags on the config file, if any.
    pub fn resolve(flags: RunConfig, command: &str) -> CliResult<RunConfig> {
        let mut merged = match &flags.config {
            Some(path) => {
                let file = read_file(path)?;
                if let Some(c) = &file.command {
                    if c != command {
                        return Err(CliError::Config(format!(
                            "config {} was written by `{c}`, not `{command}`",
                            path.display()
                        )));
                    }
                }
                to_map(&file)?
            }
            None => Map::new(),
        };
        merged.extend(to_map(&flags)?);
        merged.insert("command".into(), Value::from(command));
        merged.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        let mut cfg: RunConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.config = flags.config;
        cfg.output = flags.output;
        cfg.alpha()?;
        cfg.level()?;
        cfg.fill_defaults(command)?;
        Ok(cfg)
    }

    /// Writes the effective value of every key the command reads.
    fn fill_defaults(&mut self, command: &str) -> CliResult<()> {
        fn set<T>(slot: &mut Option<T>, v: T) {
            if slot.is_none() {
                *slot = Some(v);
            }
        }
        let transforms = self
            .transforms()?
            .iter()
            .map(|t| t.name().to_owned())
            .collect();
        let (steps, horizon, n_paths, tail_fraction) = (
            self.steps(),
            self.horizon(),
            self.n_paths(),
            self.tail_fraction(),
        );
        match command {
            "simulate" => {
                set(&mut self.generator, "bm".into());
                set(&mut self.seed, 0);
                set(&mut self.steps, steps);
                set(&mut self.horizon, horizon);
                match self.generator.as_deref() {
                    Some("bm") => {
                        set(&mut self.n_paths, n_paths);
                        set(&mut self.dim, 1);
                    }
                    Some("spike") => {
                        set(&mut self.n_paths, n_paths);
                        set(&mut self.epsilon, 0.0);
                        set(&mut self.envelope, "scaled".into());
                    }
                    Some("fbm") => set(&mut self.n_paths, n_paths),
                    Some("researchers") => {
                        set(&mut self.envelope, "scaled".into());
                        set(&mut self.researchers, 100);
                        set(&mut self.ref_size, 2000);
                        set(&mut self.test_sets, 50);
                        set(&mut self.test_size, 1000);
                        set(&mut self.outlier_fraction, 0.1);
                        set(&mut self.epsilon, 4.0);
                    }
                    _ => {}
                }
            }
            "fit" => {
                set(&mut self.stat, "dist".into());
                set(&mut self.level, 4);
                set(&mut self.transforms, transforms);
                set(&mut self.tail, "none".into());
                if self.stat.as_deref() == Some("ocsvm") {
                    set(&mut self.nu, sigtest::pipeline::DEFAULT_OCSVM_NU);
                }
                if self.tail.as_deref() == Some("weibull") {
                    set(&mut self.tail_fraction, tail_fraction);
                }
            }
            "test" => {
                set(&mut self.alpha, 0.1);
                set(&mut self.pvalue_method, "empirical".into());
                set(&mut self.correction, "bh".into());
                if self.correction.as_deref() == Some("storey") {
                    set(
                        &mut self.storey_lambda,
                        sigtest::multiple_testing::DEFAULT_STOREY_LAMBDA,
                    );
                }
            }
            "bench" => {
                set(&mut self.seed, 0);
                set(&mut self.scale, "desk".into());
                set(&mut self.level, 4);
                set(&mut self.transforms, transforms);
                set(&mut self.envelope, "scaled".into());
                set(&mut self.stat, "dist".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Manifest text: every set value except the output location, keys sorted.
    pub fn manifest(&self) -> CliResult<String> {
        let map = to_map(self)?;
        let mut s = serde_json::to_string_pretty(&Value::Object(map))
            .map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn require_input(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Config("--input is required".into()))
    }

    pub fn require_output(&self) -> CliResult<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Config("--output is required".into()))
    }

    pub fn require_model(&self) -> CliResult<&Path> {
        self.model
            .as_deref()
            .ok_or_else(|| CliError::Config("--model is required".into()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn level(&self) -> CliResult<usize> {
        match self.level.unwrap_or(4) {
            0 => Err(CliError::Config("--level must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn alpha(&self) -> CliResult<f64> {
        let a = self.alpha.unwrap_or(0.1);
        if a > 0.0 && a < 1.0 {
            Ok(a)
        } else {
            Err(CliError::Config(format!("--alpha {a} outside (0, 1)")))
        }
    }

    pub fn statistic(&self) -> CliResult<StatisticKind> {
        let kind = StatisticKind::parse(self.stat.as_deref().unwrap_or("dist"))?;
        Ok(match kind {
            StatisticKind::Conformance { .. } => StatisticKind::Conformance { ridge: self.ridge },
            StatisticKind::Ocsvm { nu } => StatisticKind::Ocsvm {
                nu: self.nu.unwrap_or(nu),
            },
            k => k,
        })
    }

    pub fn pvalue_method(&self) -> CliResult<PValueMethod> {
        Ok(PValueMethod::parse(
            self.pvalue_method.as_deref().unwrap_or("empirical"),
        )?)
    }

    pub fn correction(&self) -> CliResult<Correction> {
        Ok(
            match Correction::parse(self.correction.as_deref().unwrap_or("bh"))? {
                Correction::Storey { lambda } => Correction::Storey {
                    lambda: self.storey_lambda.unwrap_or(lambda),
                },
                c => c,
            },
        )
    }

    pub fn transforms(&self) -> CliResult<Vec<Transform>> {
        match &self.transforms {
            None => Ok(vec![Transform::Time]),
            Some(list) => list
                .iter()
                .map(|s| s.trim())
                .filter(|s| !s.is_empty() && *s != "none")
                .map(|s| Transform::parse(s).map_err(CliError::from))
                .collect(),
        }
    }

    pub fn envelope(&self) -> CliResult<SpikeEnvelope> {
        Ok(SpikeEnvelope::parse(
            self.envelope.as_deref().unwrap_or("scaled"),
        )?)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(200)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(2.0)
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths.unwrap_or(100)
    }

    pub fn tail_fraction(&self) -> f64 {
        self.tail_fraction
            .unwrap_or(sigtest::tails::DEFAULT_TAIL_FRACTION)
    }
}
