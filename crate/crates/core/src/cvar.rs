//! Empirical VaR/CVaR and smooth CVaR surrogates expressed through expected signatures.
//!
//! With `Q_n(x) = Σ a_i x^i` standing in for `max(x, 0)` on `[-K, K]`, the
//! smooth objective `ρ + E[Q_n(⟨w,S(X)⟩ - ρ)]/(1-α)` is a polynomial
//! `Σ b_m ρ^m` whose coefficients are pairings of shuffle powers of `w` with
//! the expected signature.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{
    l2_norm, polynomial_shuffle, shuffle, shuffle_powers, LevelCap, Polynomial, SparseTensor,
    TruncatedTensor, Word,
};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(invalid(format!("confidence level {alpha} outside [0, 1)")));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples"));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(invalid("samples contain NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Zero-based index of the `⌈αn⌉`-th order statistic.
fn var_index(n: usize, alpha: f64) -> usize {
    // tolerate representation error in α·n, e.g. 0.95 * 100
    let k = (alpha * n as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(n) - 1
}

/// `inf{r : F_n(r) ≥ α}`, the `⌈αn⌉`-th order statistic.
pub fn empirical_var(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v = sorted(samples)?;
    Ok(v[var_index(v.len(), alpha)])
}

/// `min_η η + E[(Z - η)⁺]/(1-α)` under the empirical law.
///
/// The objective is convex and piecewise linear with kinks at the samples,
/// so it is evaluated at every sample value.
pub fn empirical_cvar(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let v = sorted(samples)?;
    let n = v.len();
    let scale = 1.0 / (n as f64 * (1.0 - alpha));
    // suffix sums of the sorted sample
    let mut tail = vec![0.0; n + 1];
    for i in (0..n).rev() {
        tail[i] = tail[i + 1] + v[i];
    }
    let mut best = f64::INFINITY;
    for (i, &eta) in v.iter().enumerate() {
        // samples strictly above index i contribute (z - eta)
        let excess = tail[i + 1] - (n - i - 1) as f64 * eta;
        best = best.min(eta + excess * scale);
    }
    Ok(best)
}

/// Least-squares polynomial approximation of `max(x, 0)` on `[-K, K]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxSurrogate {
    pub polynomial: Polynomial,
    pub half_width: f64,
    /// `max |Q(x) - max(x,0)|` over a uniform grid of 10001 points on `[-K, K]`.
    pub sup_error: f64,
}

/// Degree-`n` least-squares fit of `max(x, 0)` at `4n` Chebyshev nodes of `[-K, K]`.
pub fn fit_max_surrogate(n: usize, k: f64) -> Result<MaxSurrogate> {
    if n == 0 {
        return Err(invalid("surrogate degree must be at least 1"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid(format!("half-width {k} must be positive")));
    }
    let m = 4 * n;
    let nodes: Vec<f64> = (0..m)
        .map(|j| (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * m) as f64).cos())
        .collect();
    // fit in u = x / K to keep the design matrix well conditioned
    let design = DMatrix::from_fn(m, n + 1, |r, c| nodes[r].powi(c as i32));
    let target = DVector::from_iterator(m, nodes.iter().map(|&u| (k * u).max(0.0)));
    let svd = design.svd(true, true);
    let c = svd
        .solve(&target, 1e-14)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let coeffs: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(i, ci)| ci / k.powi(i as i32))
        .collect();
    let polynomial = Polynomial::new(coeffs)?;
    let grid = 10_000;
    let sup_error = (0..=grid)
        .map(|j| {
            let x = -k + 2.0 * k * j as f64 / grid as f64;
            (polynomial.eval(x) - x.max(0.0)).abs()
        })
        .fold(0.0, f64::max);
    Ok(MaxSurrogate {
        polynomial,
        half_width: k,
        sup_error,
    })
}

/// Default half-width `2 · max |score|`, or 1 when every score is zero.
pub fn default_half_width(scores: &[f64]) -> f64 {
    let m = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if m > 0.0 && m.is_finite() {
        2.0 * m
    } else {
        1.0
    }
}

/// Surrogate polynomial, its domain and the confidence level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvarSurrogateSpec {
    surrogate: Polynomial,
    half_width: f64,
    alpha: f64,
}

impl CvarSurrogateSpec {
    pub fn new(surrogate: Polynomial, half_width: f64, alpha: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid(format!("half-width {half_width} must be positive")));
        }
        check_alpha(alpha)?;
        Ok(CvarSurrogateSpec {
            surrogate,
            half_width,
            alpha,
        })
    }

    /// Uses [`fit_max_surrogate`] for the polynomial.
    pub fn fitted(degree: usize, half_width: f64, alpha: f64) -> Result<Self> {
        let s = fit_max_surrogate(degree, half_width)?;
        Self::new(s.polynomial, half_width, alpha)
    }

    pub fn surrogate(&self) -> &Polynomial {
        &self.surrogate
    }

    pub fn degree(&self) -> usize {
        self.surrogate.degree()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `Σ b_m ρ^m` together with the inputs it was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothCvarPolynomial {
    pub coefficients: Polynomial,
    pub spec: CvarSurrogateSpec,
    pub functional: TruncatedTensor,
    /// Level of the expected signature used.
    pub es_level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub es_label: Option<String>,
}

impl SmoothCvarPolynomial {
    pub fn eval(&self, rho: f64) -> f64 {
        self.coefficients.eval(rho)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `b_m = δ_{m=1} + 1/(1-α) Σ_{i=m}^{n} a_i C(i,m) (-1)^m ⟨w^{⧢(i-m)}, ES⟩`.
pub fn smooth_cvar_coefficients(
    w: &TruncatedTensor,
    es: &TruncatedTensor,
    spec: &CvarSurrogateSpec,
) -> Result<SmoothCvarPolynomial> {
    smooth_cvar_coefficients_with_cap(w, es, spec, LevelCap::default())
}

pub fn smooth_cvar_coefficients_with_cap(
    w: &TruncatedTensor,
    es: &TruncatedTensor,
    spec: &CvarSurrogateSpec,
    cap: LevelCap,
) -> Result<SmoothCvarPolynomial> {
    let n = spec.degree();
    let pairings = shuffle_pairings(w, es, n, cap)?;
    let a = spec.surrogate.coeffs();
    let scale = 1.0 / (1.0 - spec.alpha);
    let b: Vec<f64> = (0..=n)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let sum: f64 = (m..=n)
                .map(|i| a[i] * binomial(i, m) * sign * pairings[i - m])
                .sum();
            f64::from(u8::from(m == 1)) + scale * sum
        })
        .collect();
    // a degree-0 surrogate still carries the linear ρ term
    let b = if b.len() < 2 { vec![b[0], 1.0] } else { b };
    Ok(SmoothCvarPolynomial {
        coefficients: Polynomial::new(b)?,
        spec: spec.clone(),
        functional: w.clone(),
        es_level: es.level(),
        es_label: None,
    })
}

/// `⟨w^{⧢k}, ES⟩` for `k = 0..=n`.
fn shuffle_pairings(
    w: &TruncatedTensor,
    es: &TruncatedTensor,
    n: usize,
    cap: LevelCap,
) -> Result<Vec<f64>> {
    if w.dim() != es.dim() {
        return Err(Error::AlphabetMismatch {
            left: w.dim(),
            right: es.dim(),
        });
    }
    let required = n * w.level();
    if required > cap.0 {
        return Err(Error::LevelCapExceeded {
            required,
            cap: cap.0,
        });
    }
    if es.level() < required {
        return Err(Error::InsufficientLevel {
            required,
            available: es.level(),
        });
    }
    let unit = es.coeffs()[0];
    if (unit - 1.0).abs() > 1e-12 {
        return Err(invalid(format!(
            "expected signature has level-0 coefficient {unit}, expected 1"
        )));
    }
    shuffle_powers(&w.to_sparse(), n, required)
        .iter()
        .map(|p| p.pair_dense(es))
        .collect()
}

/// Sample version `ρ + mean_i Q(z_i - ρ)/(1-α)` of the smooth objective.
pub fn smooth_cvar_sample_objective(
    scores: &[f64],
    rho: f64,
    spec: &CvarSurrogateSpec,
) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores"));
    }
    let mean = scores
        .iter()
        .map(|z| spec.surrogate.eval(z - rho))
        .sum::<f64>()
        / scores.len() as f64;
    Ok(rho + mean / (1.0 - spec.alpha))
}

/// Minimiser and minimum of a smooth CVaR polynomial over `[-K, K]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvarMinimum {
    pub rho: f64,
    pub value: f64,
}

pub fn minimize_cvar_polynomial(p: &SmoothCvarPolynomial) -> CvarMinimum {
    let k = p.spec.half_width;
    minimize_polynomial(&p.coefficients, -k, k)
}

/// Global minimum of `p` on `[lo, hi]` from the endpoints and the real critical points.
pub fn minimize_polynomial(p: &Polynomial, lo: f64, hi: f64) -> CvarMinimum {
    let mut candidates = vec![lo, hi];
    candidates.extend(
        real_roots(&p.derivative())
            .into_iter()
            .filter(|r| (lo..=hi).contains(r)),
    );
    candidates
        .into_iter()
        .map(|x| CvarMinimum {
            rho: x,
            value: p.eval(x),
        })
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("endpoints are always candidates")
}

/// Real roots via companion-matrix eigenvalues, polished by Newton steps.
fn real_roots(p: &Polynomial) -> Vec<f64> {
    let c = p.coeffs();
    let max = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Vec::new();
    }
    let mut deg = c.len() - 1;
    while deg > 0 && c[deg].abs() <= 1e-14 * max {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let companion = DMatrix::from_fn(deg, deg, |r, col| {
        if col == deg - 1 {
            -c[r] / lead
        } else if r == col + 1 {
            1.0
        } else {
            0.0
        }
    });
    let dp = p.derivative();
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-9)
        .map(|z| {
            let mut x = z.re;
            for _ in 0..3 {
                let d = dp.eval(x);
                if d == 0.0 {
                    break;
                }
                let step = p.eval(x) / d;
                if !step.is_finite() {
                    break;
                }
                x -= step;
            }
            x
        })
        .collect()
}

/// `min_ρ f(ρ; -w) + ½ λ ‖w‖²`, the smooth CVaR training objective.
pub fn cvar_regularized_objective(
    w: &TruncatedTensor,
    es: &TruncatedTensor,
    spec: &CvarSurrogateSpec,
    lambda: f64,
) -> Result<f64> {
    let p = smooth_cvar_coefficients(&w.scaled(-1.0), es, spec)?;
    Ok(minimize_cvar_polynomial(&p).value + 0.5 * lambda * l2_norm(w).powi(2))
}

/// Gradient of [`cvar_regularized_objective`] in the coordinates of `w`.
///
/// At the minimising `ρ*`, the derivative in direction `h` is
/// `-⟨Q'^⧢(-w - ρ*𝟙) ⧢ h, ES⟩/(1-α) + λ⟨w, h⟩`.
pub fn cvar_regularized_gradient(
    w: &TruncatedTensor,
    es: &TruncatedTensor,
    spec: &CvarSurrogateSpec,
    lambda: f64,
) -> Result<TruncatedTensor> {
    let neg = w.scaled(-1.0);
    let p = smooth_cvar_coefficients(&neg, es, spec)?;
    let rho = minimize_cvar_polynomial(&p).rho;
    let n = spec.degree();
    let big_n = w.level();
    let mut shifted = neg.to_sparse();
    let mut base = SparseTensor::unit(w.dim());
    base = base.scaled(-rho);
    shifted.add_scaled(&base, 1.0)?;
    let dq = spec.surrogate.derivative();
    let cap = LevelCap(n.saturating_sub(1).max(1) * big_n.max(1));
    let outer = if n >= 1 {
        polynomial_shuffle(&dq, &shifted, cap)?
    } else {
        SparseTensor::zero(w.dim(), 0)
    };
    let scale = 1.0 / (1.0 - spec.alpha);
    let mut grad = w.scaled(lambda);
    let words: Vec<(Word, f64)> = w.iter().collect();
    for (idx, (word, _)) in words.into_iter().enumerate() {
        let h = SparseTensor::from_terms(w.dim(), big_n, [(word, 1.0)])?;
        let prod = shuffle(&outer, &h, n * big_n)?;
        grad.coeffs_mut()[idx] -= scale * prod.pair_dense(es)?;
    }
    Ok(grad)
}

/// Directional derivative `⟨∇F(w), h⟩`.
pub fn cvar_regularized_directional_derivative(
    w: &TruncatedTensor,
    h: &TruncatedTensor,
    es: &TruncatedTensor,
    spec: &CvarSurrogateSpec,
    lambda: f64,
) -> Result<f64> {
    w.check_same_shape(h)?;
    let g = cvar_regularized_gradient(w, es, spec, lambda)?;
    Ok(g.coeffs().iter().zip(h.coeffs()).map(|(a, b)| a * b).sum())
}

/// One record of [`smooth_cvar_descent`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
}

/// Fixed-step gradient descent on the smooth CVaR objective, starting from `w0`.
pub fn smooth_cvar_descent(
    w0: &TruncatedTensor,
    es: &TruncatedTensor,
    spec: &CvarSurrogateSpec,
    lambda: f64,
    step: f64,
    iterations: usize,
) -> Result<(TruncatedTensor, Vec<DescentStep>)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("step size {step} must be positive")));
    }
    let mut w = w0.clone();
    let mut trace = Vec::with_capacity(iterations + 1);
    for it in 0..=iterations {
        let objective = cvar_regularized_objective(&w, es, spec, lambda)?;
        let g = cvar_regularized_gradient(&w, es, spec, lambda)?;
        trace.push(DescentStep {
            iteration: it,
            objective,
            gradient_norm: l2_norm(&g),
        });
        if it < iterations {
            w.add_scaled(&g, -step)?;
        }
    }
    Ok((w, trace))
}
