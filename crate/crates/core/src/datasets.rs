//! Synthetic path generators and stream embeddings.
//!
//! Every generator draws path `i` from its own ChaCha8 stream
//! (`seed`, stream `i`), so output is independent of thread scheduling.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signature::PathStream;

/// Generator for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform_times(steps: usize, horizon: f64) -> Vec<f64> {
    (0..=steps)
        .map(|k| horizon * k as f64 / steps as f64)
        .collect()
}

/// Square-root factor `A` with `A Aᵀ = Σ` for a symmetric PSD `Σ`.
fn covariance_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(Error::ShapeMismatch(
            "covariance must be square and nonempty".into(),
        ));
    }
    let scale = sigma.amax().max(1.0);
    if (sigma - sigma.transpose()).amax() > 1e-12 * scale {
        return Err(invalid("covariance is not symmetric"));
    }
    if sigma.nrows() == 1 {
        let v = sigma[(0, 0)];
        if v < 0.0 {
            return Err(Error::NotPsd { min_eigenvalue: v });
        }
        return Ok(DMatrix::from_element(1, 1, v.sqrt()));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -1e-10 * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Positions `0, A z_1 √dt, ...` of a Brownian motion; consumes `steps · d` normals.
fn brownian_values(rng: &mut ChaCha8Rng, steps: usize, factor: &DMatrix<f64>, dt: f64) -> Vec<f64> {
    let d = factor.nrows();
    let sd = dt.sqrt();
    let mut values = vec![0.0; (steps + 1) * d];
    let mut z = vec![0.0; d];
    for k in 0..steps {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let inc: f64 = (0..d).map(|j| factor[(i, j)] * z[j]).sum();
            values[(k + 1) * d + i] = values[k * d + i] + sd * inc;
        }
    }
    values
}

/// Brownian paths with increment covariance `Σ · T/L` on a uniform grid of `L` steps.
pub fn simulate_bm(
    n_paths: usize,
    steps: usize,
    sigma: &DMatrix<f64>,
    horizon: f64,
    seed: u64,
) -> Result<Vec<PathStream>> {
    if steps == 0 {
        return Err(invalid("at least one step is required"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon {horizon} must be positive")));
    }
    let factor = covariance_factor(sigma)?;
    let times = uniform_times(steps, horizon);
    let dt = horizon / steps as f64;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let values = brownian_values(&mut rng, steps, &factor, dt);
            Ok(
                PathStream::from_flat(times.clone(), factor.nrows(), values)?
                    .with_id(format!("bm-{i}")),
            )
        })
        .collect()
}

/// Shape of the spike added to the Brownian path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeEnvelope {
    /// `min(ε √[t-θ]⁺, 1)`.
    Capped,
    /// `ε · min(√[t-θ]⁺, 1) = ε √([t-θ]⁺ ∧ 1)`.
    #[default]
    Scaled,
}

impl SpikeEnvelope {
    pub fn eval(&self, epsilon: f64, t: f64, theta: f64) -> f64 {
        let root = (t - theta).max(0.0).sqrt();
        match self {
            SpikeEnvelope::Capped => (epsilon * root).min(1.0),
            SpikeEnvelope::Scaled => epsilon * root.min(1.0),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "capped" => Ok(SpikeEnvelope::Capped),
            "scaled" => Ok(SpikeEnvelope::Scaled),
            other => Err(invalid(format!(
                "unknown spike envelope {other:?} (capped | scaled)"
            ))),
        }
    }
}

/// Brownian motion on `[0, T]` plus a spike starting at `θ ~ U[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeConfig {
    pub epsilon: f64,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default)]
    pub envelope: SpikeEnvelope,
    /// Forces `θ` instead of drawing it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Drops the Brownian component, leaving only the spike.
    #[serde(default)]
    pub zero_noise: bool,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig {
            epsilon: 0.0,
            horizon: 2.0,
            steps: 200,
            envelope: SpikeEnvelope::default(),
            theta: None,
            zero_noise: false,
        }
    }
}

impl SpikeConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SpikeConfig {
            epsilon,
            ..SpikeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!(
                "spike magnitude {} must be nonnegative",
                self.epsilon
            )));
        }
        if self.steps < 2 {
            return Err(invalid("spike paths need at least 2 steps"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon {} must be positive",
                self.horizon
            )));
        }
        if let Some(t) = self.theta {
            if !t.is_finite() {
                return Err(invalid("forced spike time must be finite"));
            }
        }
        Ok(())
    }
}

/// The spike grid used by the benchmark, including the critical value `√8`.
pub fn spike_epsilon_grid() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 8f64.sqrt(), 4.0, 6.0]
}

/// Spiked paths. The Brownian normals are drawn before `θ`, so `ε = 0`
/// reproduces [`simulate_bm`] with `d = 1`, `Σ = 1` and the same seed.
pub fn simulate_spiked_bm(cfg: &SpikeConfig, n_paths: usize, seed: u64) -> Result<Vec<PathStream>> {
    Ok(simulate_spiked_bm_with_theta(cfg, n_paths, seed)?
        .into_iter()
        .map(|(p, _)| p)
        .collect())
}

/// As [`simulate_spiked_bm`], also returning each path's spike time.
pub fn simulate_spiked_bm_with_theta(
    cfg: &SpikeConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<(PathStream, f64)>> {
    cfg.validate()?;
    let factor = DMatrix::from_element(1, 1, 1.0);
    let times = uniform_times(cfg.steps, cfg.horizon);
    let dt = cfg.horizon / cfg.steps as f64;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let mut values = brownian_values(&mut rng, cfg.steps, &factor, dt);
            let theta = match cfg.theta {
                Some(t) => t,
                None => rng.random_range(0.0..1.0),
            };
            if cfg.zero_noise {
                values.iter_mut().for_each(|v| *v = 0.0);
            }
            if cfg.epsilon > 0.0 {
                for (v, &t) in values.iter_mut().zip(&times) {
                    *v += cfg.envelope.eval(cfg.epsilon, t, theta);
                }
            }
            let path =
                PathStream::from_flat(times.clone(), 1, values)?.with_id(format!("spike-{i}"));
            Ok((path, theta))
        })
        .collect()
}

/// `½(t^{2H} + s^{2H} - |t-s|^{2H})` on the grid `t_k = kT/L`, `k = 1..=L`.
pub fn fbm_covariance(hurst: f64, steps: usize, horizon: f64) -> Result<DMatrix<f64>> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(invalid(format!("Hurst index {hurst} outside (0, 1)")));
    }
    if steps == 0 || !(horizon > 0.0) {
        return Err(invalid("need at least one step and a positive horizon"));
    }
    let h2 = 2.0 * hurst;
    let t: Vec<f64> = (1..=steps)
        .map(|k| horizon * k as f64 / steps as f64)
        .collect();
    Ok(DMatrix::from_fn(steps, steps, |i, j| {
        0.5 * (t[i].powf(h2) + t[j].powf(h2) - (t[i] - t[j]).abs().powf(h2))
    }))
}

/// Fractional Brownian paths by Cholesky factorization of the exact covariance.
pub fn simulate_fbm(
    hurst: f64,
    n_paths: usize,
    steps: usize,
    horizon: f64,
    seed: u64,
) -> Result<Vec<PathStream>> {
    let cov = fbm_covariance(hurst, steps, horizon)?;
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("fBM covariance is not positive definite".into()))?;
    let l = chol.l();
    let times = uniform_times(steps, horizon);
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let z: Vec<f64> = (0..steps).map(|_| rng.sample(StandardNormal)).collect();
            let mut values = Vec::with_capacity(steps + 1);
            values.push(0.0);
            for r in 0..steps {
                values.push((0..=r).map(|c| l[(r, c)] * z[c]).sum());
            }
            Ok(PathStream::from_flat(times.clone(), 1, values)?.with_id(format!("fbm-{i}")))
        })
        .collect()
}

fn pad_stream(stream: &[Vec<f64>], pad_to: usize) -> Result<Vec<Vec<f64>>> {
    let last = stream.last().ok_or(Error::EmptyInput("empty stream"))?;
    let d = last.len();
    if d == 0 || stream.iter().any(|x| x.len() != d) {
        return Err(Error::ShapeMismatch(
            "stream observations must share a positive dimension".into(),
        ));
    }
    if pad_to < stream.len() {
        return Err(invalid(format!(
            "cannot pad a stream of length {} to {pad_to}",
            stream.len()
        )));
    }
    let mut out = stream.to_vec();
    out.resize(pad_to, last.clone());
    Ok(out)
}

/// Scaled partial sums `W(k/L) = L^{-1/2} Σ_{j≤k} x_j` after padding to length `L`
/// with the last observation, linearly interpolated on `[0, 1]`.
pub fn donsker_embed(stream: &[Vec<f64>], pad_to: usize) -> Result<PathStream> {
    let padded = pad_stream(stream, pad_to)?;
    let l = padded.len();
    let d = padded[0].len();
    let scale = 1.0 / (l as f64).sqrt();
    let mut values = vec![0.0; d];
    for (k, x) in padded.iter().enumerate() {
        for c in 0..d {
            let prev = values[k * d + c];
            values.push(prev + scale * x[c]);
        }
    }
    let times = (0..=l).map(|k| k as f64 / l as f64).collect();
    PathStream::from_flat(times, d, values)
}

/// The stream read as positions: node `k` at time `k/(L-1)` equals `x_{k+1}`,
/// after padding to length `L`. Padding only appends constant pieces.
pub fn stream_as_path(stream: &[Vec<f64>], pad_to: usize) -> Result<PathStream> {
    let padded = pad_stream(stream, pad_to.max(2))?;
    let l = padded.len();
    let d = padded[0].len();
    let times = (0..l).map(|k| k as f64 / (l - 1) as f64).collect();
    PathStream::from_flat(times, d, padded.into_iter().flatten().collect())
}

/// Record written next to every generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator: String,
    pub seed: u64,
    pub n_paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub dim: usize,
    /// Generator-specific parameters.
    pub params: serde_json::Value,
    pub version: String,
}

impl DatasetManifest {
    pub fn new(
        generator: &str,
        seed: u64,
        n_paths: usize,
        steps: usize,
        horizon: f64,
        dim: usize,
        params: serde_json::Value,
    ) -> Self {
        DatasetManifest {
            generator: generator.to_owned(),
            seed,
            n_paths,
            steps,
            horizon,
            dim,
            params,
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}
