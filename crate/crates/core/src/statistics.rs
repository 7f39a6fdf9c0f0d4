//! Signature test statistics.
//!
//! Three fitted score models are provided, all operating on truncated
//! signatures: distance to the expected signature, the variance-norm
//! conformance to a reference corpus, and a one-class SVM on the truncated
//! signature kernel. The TAMSD baseline works directly on node values.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signature::{signature, signatures, sup_distance, PathStream, Signature};
use crate::tensor::{l2_norm, pairing, TruncatedTensor};

fn check_compatible(t: &TruncatedTensor, dim: usize, level: usize) -> Result<()> {
    if t.dim() != dim {
        return Err(Error::AlphabetMismatch {
            left: t.dim(),
            right: dim,
        });
    }
    if t.level() != level {
        return Err(Error::ShapeMismatch(format!(
            "signature level {} does not match model level {level}",
            t.level()
        )));
    }
    Ok(())
}

fn common_shape(sigs: &[Signature]) -> Result<(usize, usize)> {
    let first = sigs
        .first()
        .ok_or(Error::EmptyInput("no reference paths"))?;
    let (dim, level) = (first.dim(), first.level());
    if sigs.iter().any(|s| s.dim() != dim || s.level() != level) {
        return Err(Error::ShapeMismatch(
            "reference paths have mixed dimensions".into(),
        ));
    }
    Ok((dim, level))
}

// ---------------------------------------------------------------------------
// Distance to the expected signature
// ---------------------------------------------------------------------------

/// Empirical expected signature of a reference sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSignatureModel {
    pub mean: TruncatedTensor,
    pub level: usize,
    pub dim: usize,
    pub sample_count: usize,
    /// `‖mean‖²`, precomputed.
    pub mean_norm_sq: f64,
    /// Reference signatures, kept only when the kernel form is wanted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<Vec<TruncatedTensor>>,
}

impl ExpectedSignatureModel {
    pub fn from_signatures(sigs: &[Signature], retain_corpus: bool) -> Result<Self> {
        let (dim, level) = common_shape(sigs)?;
        let mut mean = TruncatedTensor::zeros(dim, level);
        for s in sigs {
            mean.add_scaled(s.tensor(), 1.0)?;
        }
        let mean = mean.scaled(1.0 / sigs.len() as f64);
        let mean_norm_sq = l2_norm(&mean).powi(2);
        Ok(ExpectedSignatureModel {
            mean,
            level,
            dim,
            sample_count: sigs.len(),
            mean_norm_sq,
            corpus: retain_corpus.then(|| sigs.iter().map(|s| s.tensor().clone()).collect()),
        })
    }

    /// `‖S_N(x) - mean‖₂` for a precomputed signature.
    pub fn score_signature(&self, s: &TruncatedTensor) -> Result<f64> {
        check_compatible(s, self.dim, self.level)?;
        Ok(l2_norm(&s.sub(&self.mean)?))
    }

    /// Kernel form `sqrt(κ(x,x) - 2 avg κ(X_i,x) + avg κ(X_i,X_j))`, evaluated
    /// against the retained corpus.
    pub fn score_signature_kernel(&self, s: &TruncatedTensor) -> Result<f64> {
        check_compatible(s, self.dim, self.level)?;
        let corpus = self
            .corpus
            .as_ref()
            .ok_or_else(|| invalid("the kernel form needs a model fitted with its corpus"))?;
        let n = corpus.len() as f64;
        let kxx = pairing(s, s)?;
        let mut cross = 0.0;
        for y in corpus {
            cross += pairing(y, s)?;
        }
        let mut gram = 0.0;
        for a in corpus {
            for b in corpus {
                gram += pairing(a, b)?;
            }
        }
        Ok((kxx - 2.0 * cross / n + gram / (n * n)).max(0.0).sqrt())
    }
}

pub fn fit_expected_signature(
    paths: &[PathStream],
    level: usize,
) -> Result<ExpectedSignatureModel> {
    check_paths(paths)?;
    ExpectedSignatureModel::from_signatures(&signatures(paths, level)?, false)
}

/// As [`fit_expected_signature`], keeping the reference signatures.
pub fn fit_expected_signature_with_corpus(
    paths: &[PathStream],
    level: usize,
) -> Result<ExpectedSignatureModel> {
    check_paths(paths)?;
    ExpectedSignatureModel::from_signatures(&signatures(paths, level)?, true)
}

fn check_paths(paths: &[PathStream]) -> Result<()> {
    let first = paths
        .first()
        .ok_or(Error::EmptyInput("no reference paths"))?;
    if paths.iter().any(|p| p.dim() != first.dim()) {
        return Err(Error::ShapeMismatch(
            "reference paths have mixed dimensions".into(),
        ));
    }
    Ok(())
}

pub fn distance_to_mean(x: &PathStream, m: &ExpectedSignatureModel) -> Result<f64> {
    m.score_signature(signature(x, m.level)?.tensor())
}

pub fn distance_to_mean_kernel(x: &PathStream, m: &ExpectedSignatureModel) -> Result<f64> {
    m.score_signature_kernel(signature(x, m.level)?.tensor())
}

// ---------------------------------------------------------------------------
// Variance norm and conformance
// ---------------------------------------------------------------------------

/// Mahalanobis-type norm `sqrt(vᵀ (Σ + εI)⁺ v)` of a symmetric PSD covariance.
#[derive(Clone, Debug)]
pub struct VarianceNorm {
    eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    eigenvectors: DMatrix<f64>,
    ridge: f64,
    cutoff: f64,
}

impl VarianceNorm {
    pub fn new(cov: &DMatrix<f64>, ridge: f64) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::ShapeMismatch("covariance must be square".into()));
        }
        if ridge < 0.0 || !ridge.is_finite() {
            return Err(invalid(format!(
                "ridge {ridge} must be a finite nonnegative number"
            )));
        }
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if (cov - cov.transpose()).amax() > 1e-10 * scale {
            return Err(invalid("covariance is not symmetric"));
        }
        let eig = SymmetricEigen::new(cov.clone());
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
        let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        Ok(VarianceNorm {
            eigenvalues: eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect(),
            eigenvectors: eig.eigenvectors,
            ridge,
            cutoff: 1e-12 * max.max(f64::MIN_POSITIVE),
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Splits `v` into its whitened coordinates and the part of `v` lying in
    /// the null space of `Σ + εI`.
    fn whiten(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut white = Vec::with_capacity(self.dim());
        let mut null = Vec::new();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let proj: f64 = self
                .eigenvectors
                .column(k)
                .iter()
                .zip(v)
                .map(|(u, x)| u * x)
                .sum();
            let denom = lam + self.ridge;
            if denom > self.cutoff {
                white.push(proj / denom.sqrt());
            } else {
                null.push(proj);
            }
        }
        (white, null)
    }

    /// Infinite when `v` leaves the range of an unregularized covariance.
    pub fn norm(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim(), "vector length must match covariance");
        let (white, null) = self.whiten(v);
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        if null.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-9 * scale {
            return f64::INFINITY;
        }
        white.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Corpus of reference signatures with the variance norm of their empirical covariance.
///
/// Coordinates are the words of length `1..=N`; the level-0 slot of a
/// signature is constant and carries no variance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ConformanceRaw", into = "ConformanceRaw")]
pub struct ConformanceModel {
    level: usize,
    dim: usize,
    corpus: Vec<TruncatedTensor>,
    corpus_ids: Vec<Option<String>>,
    covariance: DMatrix<f64>,
    ridge: f64,
    norm: VarianceNorm,
    whitened: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct ConformanceRaw {
    level: usize,
    dim: usize,
    ridge: f64,
    corpus_ids: Vec<Option<String>>,
    corpus: Vec<TruncatedTensor>,
    covariance: Vec<Vec<f64>>,
}

impl From<ConformanceModel> for ConformanceRaw {
    fn from(m: ConformanceModel) -> Self {
        let covariance = m
            .covariance
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        ConformanceRaw {
            level: m.level,
            dim: m.dim,
            ridge: m.ridge,
            corpus_ids: m.corpus_ids,
            corpus: m.corpus,
            covariance,
        }
    }
}

impl TryFrom<ConformanceRaw> for ConformanceModel {
    type Error = Error;

    fn try_from(raw: ConformanceRaw) -> Result<Self> {
        let n = raw.covariance.len();
        if raw.covariance.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch(
                "covariance rows have unequal length".into(),
            ));
        }
        let cov = DMatrix::from_row_iterator(n, n, raw.covariance.into_iter().flatten());
        ConformanceModel::build(
            raw.corpus,
            raw.corpus_ids,
            cov,
            raw.ridge,
            raw.dim,
            raw.level,
        )
    }
}

fn feature(t: &TruncatedTensor) -> &[f64] {
    &t.coeffs()[1..]
}

impl ConformanceModel {
    /// Fits from reference signatures; `ridge = None` selects `1e-8 · trace / dim`.
    pub fn from_signatures(sigs: &[Signature], ridge: Option<f64>) -> Result<Self> {
        let (dim, level) = common_shape(sigs)?;
        let corpus: Vec<TruncatedTensor> = sigs.iter().map(|s| s.tensor().clone()).collect();
        let p = corpus[0].coeffs().len() - 1;
        let n = corpus.len() as f64;
        let mut mean = vec![0.0; p];
        for t in &corpus {
            for (m, v) in mean.iter_mut().zip(feature(t)) {
                *m += v / n;
            }
        }
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for t in &corpus {
            let c: Vec<f64> = feature(t).iter().zip(&mean).map(|(v, m)| v - m).collect();
            for i in 0..p {
                for j in 0..p {
                    cov[(i, j)] += c[i] * c[j] / n;
                }
            }
        }
        let ridge = ridge.unwrap_or_else(|| 1e-8 * cov.trace() / p as f64);
        let ids = sigs
            .iter()
            .map(|s| s.path_id().map(str::to_owned))
            .collect();
        Self::build(corpus, ids, cov, ridge, dim, level)
    }

    /// Uses a caller-supplied covariance over the words of length `1..=N`.
    pub fn with_covariance(
        sigs: &[Signature],
        covariance: DMatrix<f64>,
        ridge: f64,
    ) -> Result<Self> {
        let (dim, level) = common_shape(sigs)?;
        let corpus = sigs.iter().map(|s| s.tensor().clone()).collect();
        let ids = sigs
            .iter()
            .map(|s| s.path_id().map(str::to_owned))
            .collect();
        Self::build(corpus, ids, covariance, ridge, dim, level)
    }

    fn build(
        corpus: Vec<TruncatedTensor>,
        corpus_ids: Vec<Option<String>>,
        covariance: DMatrix<f64>,
        ridge: f64,
        dim: usize,
        level: usize,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyInput("empty conformance corpus"));
        }
        for t in &corpus {
            check_compatible(t, dim, level)?;
        }
        if covariance.nrows() != corpus[0].coeffs().len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "covariance is {}x{}, expected {} coordinates",
                covariance.nrows(),
                covariance.ncols(),
                corpus[0].coeffs().len() - 1
            )));
        }
        let norm = VarianceNorm::new(&covariance, ridge)?;
        let whitened = corpus.iter().map(|t| norm.whiten(feature(t))).collect();
        Ok(ConformanceModel {
            level,
            dim,
            corpus,
            corpus_ids,
            covariance,
            ridge,
            norm,
            whitened,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn corpus(&self) -> &[TruncatedTensor] {
        &self.corpus
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn variance_norm(&self) -> &VarianceNorm {
        &self.norm
    }

    /// Minimum variance-norm distance of `s` to the corpus.
    pub fn score_signature(&self, s: &TruncatedTensor) -> Result<f64> {
        check_compatible(s, self.dim, self.level)?;
        let v = feature(s);
        let (white, null) = self.norm.whiten(v);
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        let best = self
            .whitened
            .iter()
            .map(|(wy, ny)| {
                let off: f64 = null.iter().zip(ny).map(|(a, b)| (a - b) * (a - b)).sum();
                if off.sqrt() > 1e-9 * scale {
                    f64::INFINITY
                } else {
                    white
                        .iter()
                        .zip(wy)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                }
            })
            .fold(f64::INFINITY, f64::min);
        Ok(best)
    }
}

pub fn fit_conformance(
    paths: &[PathStream],
    level: usize,
    ridge: Option<f64>,
) -> Result<ConformanceModel> {
    check_paths(paths)?;
    ConformanceModel::from_signatures(&signatures(paths, level)?, ridge)
}

/// Variance norm of `v` (coordinates of words of length `1..=N`) under the model covariance.
pub fn variance_norm(v: &TruncatedTensor, c: &ConformanceModel) -> Result<f64> {
    check_compatible(v, c.dim, c.level)?;
    Ok(c.norm.norm(feature(v)))
}

pub fn conformance_score(x: &PathStream, c: &ConformanceModel) -> Result<f64> {
    c.score_signature(signature(x, c.level)?.tensor())
}

/// Spectral norm of a symmetric PSD matrix, via its eigenvalues.
pub fn spectral_norm_psd(sigma: &DMatrix<f64>) -> Result<f64> {
    if !sigma.is_square() {
        return Err(Error::ShapeMismatch("covariance must be square".into()));
    }
    let scale = sigma.amax().max(1.0);
    if (sigma - sigma.transpose()).amax() > 1e-10 * scale {
        return Err(invalid("covariance is not symmetric"));
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
    Ok(eig.eigenvalues.iter().copied().fold(0.0, f64::max))
}

/// `‖Σ_γ‖_op^{1/2} · min_{y ∈ corpus} ‖x - y‖_∞` with the sup norm taken on `[0, 1]`.
pub fn variance_adjusted_conformance(
    x: &PathStream,
    corpus: &[PathStream],
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("empty conformance corpus"));
    }
    if sigma.nrows() != x.dim() {
        return Err(Error::ShapeMismatch(format!(
            "covariance is {}x{} for paths of dimension {}",
            sigma.nrows(),
            sigma.ncols(),
            x.dim()
        )));
    }
    let op = spectral_norm_psd(sigma)?;
    let mut best = f64::INFINITY;
    for y in corpus {
        best = best.min(sup_distance(x, y)?);
    }
    Ok(op.sqrt() * best)
}

// ---------------------------------------------------------------------------
// One-class SVM
// ---------------------------------------------------------------------------

/// Solver settings for [`ocsvm_fit`].
#[derive(Clone, Copy, Debug)]
pub struct SmoParams {
    /// Stop once the maximal KKT violation is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            tolerance: 1e-6,
            max_iterations: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OcsvmSolution {
    pub alphas: Vec<f64>,
    pub rho: f64,
    /// `½ αᵀKα` at the solution.
    pub objective: f64,
    /// Maximal KKT violation `max_{α_j>0} g_j - min_{α_i<C} g_i`, clipped at 0.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// `g = Kα`; the decision value of training point `i` is `g_i - ρ`.
    pub gradient: Vec<f64>,
}

/// Upper bound `1 / (ν n)` of the dual box.
pub fn ocsvm_upper_bound(n: usize, nu: f64) -> f64 {
    1.0 / (nu * n as f64)
}

/// Solves `min ½αᵀKα` s.t. `0 ≤ α_i ≤ 1/(νn)`, `Σα_i = 1` by pairwise (SMO) descent.
pub fn ocsvm_fit(k: &DMatrix<f64>, nu: f64) -> Result<OcsvmSolution> {
    ocsvm_fit_with(k, nu, SmoParams::default())
}

pub fn ocsvm_fit_with(k: &DMatrix<f64>, nu: f64, params: SmoParams) -> Result<OcsvmSolution> {
    let n = k.nrows();
    if n == 0 || !k.is_square() {
        return Err(Error::ShapeMismatch(
            "Gram matrix must be square and nonempty".into(),
        ));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(invalid(format!("ν = {nu} outside (0, 1]")));
    }
    if nu * (n as f64) < 1.0 {
        return Err(Error::Infeasible(format!(
            "ν·n = {} < 1: the box 0 ≤ α ≤ 1/(νn) cannot sum to one",
            nu * n as f64
        )));
    }
    let scale = k.amax().max(f64::MIN_POSITIVE);
    if (k - k.transpose()).amax() > 1e-10 * scale {
        return Err(invalid("Gram matrix is not symmetric"));
    }
    let min_eig = SymmetricEigen::new(k.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-8 * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: min_eig,
        });
    }

    let c = ocsvm_upper_bound(n, nu);
    let snap = 1e-14 * c;
    // fill the first ⌊νn⌋ slots at the bound, the remainder goes to the next
    let mut alphas = vec![0.0; n];
    let mut left: f64 = 1.0;
    for a in alphas.iter_mut() {
        let take = left.min(c);
        *a = take;
        left -= take;
        if left <= snap {
            break;
        }
    }
    let mut g: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)] * alphas[j]).sum())
        .collect();

    let mut iterations = 0;
    let mut residual = violation(&alphas, &g, c).0;
    while residual > params.tolerance && iterations < params.max_iterations {
        let (_, i, j) = violation(&alphas, &g, c);
        let eta = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
        let cap = (c - alphas[i]).min(alphas[j]);
        let mut t = if eta > 1e-12 * scale {
            (g[j] - g[i]) / eta
        } else {
            cap
        };
        t = t.min(cap);
        alphas[i] += t;
        alphas[j] -= t;
        if c - alphas[i] <= snap {
            alphas[i] = c;
        }
        if alphas[j] <= snap {
            alphas[j] = 0.0;
        }
        for (r, gr) in g.iter_mut().enumerate() {
            *gr += t * (k[(r, i)] - k[(r, j)]);
        }
        iterations += 1;
        residual = violation(&alphas, &g, c).0;
    }
    if residual > params.tolerance {
        return Err(Error::Numerical(format!(
            "SMO did not converge in {iterations} iterations (KKT residual {residual:e})"
        )));
    }
    // recompute the gradient from scratch to shed accumulated drift
    let g: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)] * alphas[j]).sum())
        .collect();
    let rho = offset(&alphas, &g, c);
    let objective = 0.5 * alphas.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
    Ok(OcsvmSolution {
        kkt_residual: violation(&alphas, &g, c).0,
        alphas,
        rho,
        objective,
        iterations,
        gradient: g,
    })
}

/// Returns (violation, i, j) for the maximal violating pair: `i` may grow, `j` may shrink.
fn violation(alphas: &[f64], g: &[f64], c: f64) -> (f64, usize, usize) {
    let (mut i, mut j) = (usize::MAX, usize::MAX);
    let (mut gi, mut gj) = (f64::INFINITY, f64::NEG_INFINITY);
    for (r, (&a, &gr)) in alphas.iter().zip(g).enumerate() {
        if a < c && gr < gi {
            gi = gr;
            i = r;
        }
        if a > 0.0 && gr > gj {
            gj = gr;
            j = r;
        }
    }
    if i == usize::MAX || j == usize::MAX {
        return (0.0, 0, 0);
    }
    ((gj - gi).max(0.0), i, j)
}

fn offset(alphas: &[f64], g: &[f64], c: f64) -> f64 {
    let free: Vec<f64> = alphas
        .iter()
        .zip(g)
        .filter(|(&a, _)| a > 0.0 && a < c)
        .map(|(_, &gr)| gr)
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let lower = alphas
        .iter()
        .zip(g)
        .filter(|(&a, _)| a >= c)
        .map(|(_, &gr)| gr)
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = alphas
        .iter()
        .zip(g)
        .filter(|(&a, _)| a <= 0.0)
        .map(|(_, &gr)| gr)
        .fold(f64::INFINITY, f64::min);
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// Gram matrix `K_ij = <S_i, S_j>`.
pub fn gram_matrix(sigs: &[TruncatedTensor]) -> Result<DMatrix<f64>> {
    let n = sigs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| pairing(&sigs[i], &sigs[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Fitted one-class SVM on the truncated signature kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub level: usize,
    pub dim: usize,
    pub nu: f64,
    pub rho: f64,
    /// Nonzero dual weights, aligned with `support`.
    pub alphas: Vec<f64>,
    pub support: Vec<TruncatedTensor>,
    pub support_ids: Vec<Option<String>>,
    /// `w = Σ α_i S_N(x_i)`.
    pub primal: TruncatedTensor,
}

impl OcsvmModel {
    pub fn from_signatures(sigs: &[Signature], nu: f64) -> Result<Self> {
        let (dim, level) = common_shape(sigs)?;
        let tensors: Vec<TruncatedTensor> = sigs.iter().map(|s| s.tensor().clone()).collect();
        let sol = ocsvm_fit(&gram_matrix(&tensors)?, nu)?;
        let mut primal = TruncatedTensor::zeros(dim, level);
        let (mut alphas, mut support, mut support_ids) = (Vec::new(), Vec::new(), Vec::new());
        for ((a, t), s) in sol.alphas.iter().zip(tensors).zip(sigs) {
            if *a > 0.0 {
                primal.add_scaled(&t, *a)?;
                alphas.push(*a);
                support.push(t);
                support_ids.push(s.path_id().map(str::to_owned));
            }
        }
        Ok(OcsvmModel {
            level,
            dim,
            nu,
            rho: sol.rho,
            alphas,
            support,
            support_ids,
            primal,
        })
    }

    /// Decision value `<w, S> - ρ`; negative values flag novelties.
    pub fn decision_signature(&self, s: &TruncatedTensor) -> Result<f64> {
        check_compatible(s, self.dim, self.level)?;
        Ok(pairing(&self.primal, s)? - self.rho)
    }

    /// Decision value through the dual expansion `Σ α_i κ(x_i, x) - ρ`.
    pub fn decision_signature_dual(&self, s: &TruncatedTensor) -> Result<f64> {
        check_compatible(s, self.dim, self.level)?;
        let mut acc = 0.0;
        for (a, t) in self.alphas.iter().zip(&self.support) {
            acc += a * pairing(t, s)?;
        }
        Ok(acc - self.rho)
    }
}

pub fn fit_ocsvm(paths: &[PathStream], level: usize, nu: f64) -> Result<OcsvmModel> {
    check_paths(paths)?;
    OcsvmModel::from_signatures(&signatures(paths, level)?, nu)
}

pub fn ocsvm_score(x: &PathStream, m: &OcsvmModel) -> Result<f64> {
    m.decision_signature(signature(x, m.level)?.tensor())
}

// ---------------------------------------------------------------------------
// Unified score model
// ---------------------------------------------------------------------------

/// Any fitted statistic, oriented so that larger scores are more anomalous.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreModel {
    Distance(ExpectedSignatureModel),
    Conformance(ConformanceModel),
    Ocsvm(OcsvmModel),
}

impl ScoreModel {
    pub fn level(&self) -> usize {
        match self {
            ScoreModel::Distance(m) => m.level,
            ScoreModel::Conformance(m) => m.level,
            ScoreModel::Ocsvm(m) => m.level,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ScoreModel::Distance(m) => m.dim,
            ScoreModel::Conformance(m) => m.dim,
            ScoreModel::Ocsvm(m) => m.dim,
        }
    }

    /// Novelty score; for the one-class SVM this is the negated decision value.
    pub fn novelty_signature(&self, s: &TruncatedTensor) -> Result<f64> {
        match self {
            ScoreModel::Distance(m) => m.score_signature(s),
            ScoreModel::Conformance(m) => m.score_signature(s),
            ScoreModel::Ocsvm(m) => Ok(-m.decision_signature(s)?),
        }
    }

    pub fn novelty(&self, x: &PathStream) -> Result<f64> {
        self.novelty_signature(signature(x, self.level())?.tensor())
    }

    /// Scores many paths in parallel; output order matches input.
    pub fn novelty_batch(&self, paths: &[PathStream]) -> Result<Vec<f64>> {
        paths.par_iter().map(|p| self.novelty(p)).collect()
    }
}

// ---------------------------------------------------------------------------
// TAMSD
// ---------------------------------------------------------------------------

/// Time-averaged mean square displacement at lag `tau` (in nodes):
/// `1/(n - τ) Σ_j |X(j+τ) - X(j)|²`.
pub fn tamsd(x: &PathStream, tau: usize) -> Result<f64> {
    let n = x.num_nodes();
    if tau == 0 || tau >= n {
        return Err(invalid(format!("lag {tau} must lie in 1..{n}")));
    }
    let sum: f64 = (0..n - tau)
        .map(|j| {
            x.point(j + tau)
                .iter()
                .zip(x.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    Ok(sum / (n - tau) as f64)
}
