//! Tail bounds, rejection thresholds and p-values for signature statistics.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};

/// Deviation function `a` of a transportation-cost inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviationKind {
    /// `a(t) = t²`.
    Quadratic,
    /// `a(t) = min(t², t^{2q})`.
    Rde { q: f64 },
    /// Piecewise-linear through `(0, 0)` and the given strictly increasing
    /// points, extended linearly past the last point.
    Table { points: Vec<(f64, f64)> },
}

impl DeviationKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            DeviationKind::Quadratic => Ok(()),
            DeviationKind::Rde { q } => {
                if *q > 0.0 && q.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("rde exponent q = {q} must be positive")))
                }
            }
            DeviationKind::Table { points } => {
                if points.is_empty() {
                    return Err(invalid("deviation table is empty"));
                }
                let mut prev = (0.0, 0.0);
                for &(t, a) in points {
                    if !(t > prev.0 && a > prev.1 && t.is_finite() && a.is_finite()) {
                        return Err(invalid(
                            "deviation table must be strictly increasing from (0, 0)",
                        ));
                    }
                    prev = (t, a);
                }
                Ok(())
            }
        }
    }

    fn knots(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
        std::iter::once((0.0, 0.0))
            .chain(points.iter().copied())
            .collect()
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64, swap: bool) -> f64 {
    let get = |k: &(f64, f64)| if swap { (k.1, k.0) } else { *k };
    let n = knots.len();
    let seg = (1..n).find(|&i| x <= get(&knots[i]).0).unwrap_or(n - 1);
    let (x0, y0) = get(&knots[seg - 1]);
    let (x1, y1) = get(&knots[seg]);
    y0 + (x - x0) * (y1 - y0) / (x1 - x0)
}

fn check_nonneg(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("argument {x} must be nonnegative")))
    }
}

pub fn deviation(kind: &DeviationKind, t: f64) -> Result<f64> {
    check_nonneg(t)?;
    kind.validate()?;
    Ok(match kind {
        DeviationKind::Quadratic => t * t,
        DeviationKind::Rde { q } => (t * t).min(t.powf(2.0 * q)),
        DeviationKind::Table { points } => interpolate(&DeviationKind::knots(points), t, false),
    })
}

/// Inverse of [`deviation`]; infinite input maps to infinity.
pub fn deviation_inverse(kind: &DeviationKind, s: f64) -> Result<f64> {
    check_nonneg(s)?;
    kind.validate()?;
    if s.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(match kind {
        DeviationKind::Quadratic => s.sqrt(),
        DeviationKind::Rde { q } => s.sqrt().max(s.powf(1.0 / (2.0 * q))),
        DeviationKind::Table { points } => interpolate(&DeviationKind::knots(points), s, true),
    })
}

/// Growth constant `C(N)` of the pathwise signature estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthConstant {
    /// `(1 + ρ̂)^{N/2}`.
    Geometric { rho_hat: f64 },
    /// A fixed value, independent of `N`.
    Fixed { value: f64 },
}

impl Default for GrowthConstant {
    fn default() -> Self {
        GrowthConstant::Geometric { rho_hat: 1.0 }
    }
}

impl GrowthConstant {
    pub fn value(&self, level: usize) -> f64 {
        match self {
            GrowthConstant::Geometric { rho_hat } => (1.0 + rho_hat).powf(level as f64 / 2.0),
            GrowthConstant::Fixed { value } => *value,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            GrowthConstant::Geometric { rho_hat } => *rho_hat > -1.0 && rho_hat.is_finite(),
            GrowthConstant::Fixed { value } => *value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid growth constant {self:?}")))
        }
    }
}

/// Constants of a transportation-cost inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TciParams {
    pub p: f64,
    pub gamma: f64,
    pub deviation: DeviationKind,
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub growth: GrowthConstant,
}

impl Default for TciParams {
    fn default() -> Self {
        TciParams {
            p: 1.0,
            gamma: 0.4,
            deviation: DeviationKind::Quadratic,
            c1: 1.0,
            c2: 1.0,
            growth: GrowthConstant::default(),
        }
    }
}

impl TciParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid(format!("p = {} outside (0, 1]", self.p)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("γ = {} outside (0, 1)", self.gamma)));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(invalid(format!("C₁ = {} must be positive", self.c1)));
        }
        if !(self.c2 >= 1.0 && self.c2.is_finite()) {
            return Err(invalid(format!("C₂ = {} must be at least 1", self.c2)));
        }
        self.deviation.validate()?;
        self.growth.validate()
    }
}

fn scale_factor(level: usize, dim: usize, w_norm: f64, tci: &TciParams) -> Result<f64> {
    if level == 0 || dim == 0 {
        return Err(invalid("signature level and dimension must be at least 1"));
    }
    if !(w_norm >= 0.0 && w_norm.is_finite()) {
        return Err(invalid(format!(
            "‖w‖ = {w_norm} must be finite and nonnegative"
        )));
    }
    tci.validate()?;
    Ok(w_norm * (level as f64).sqrt() * (dim as f64).powi(level as i32) * tci.growth.value(level))
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "significance level {alpha} outside (0, 1)"
        )))
    }
}

/// Rejection threshold
/// `r* = ‖w‖ √N d^N C(N) max{L^{1/(2p)}, L^{N/(2p)}}`, `L = (2/C₁) log(C₂/α)`.
///
/// Returns 0 when `α ≥ C₂`.
pub fn type1_threshold(
    alpha: f64,
    level: usize,
    dim: usize,
    w_norm: f64,
    tci: &TciParams,
) -> Result<f64> {
    check_alpha_open(alpha)?;
    let scale = scale_factor(level, dim, w_norm, tci)?;
    let l = (2.0 / tci.c1) * (tci.c2 / alpha).ln();
    if l <= 0.0 {
        return Ok(0.0);
    }
    let p = tci.p;
    let n = level as f64;
    Ok(scale * l.powf(1.0 / (2.0 * p)).max(l.powf(n / (2.0 * p))))
}

/// Upper bound `C₂ exp{-(C₁²/2) (s^{2p} ∨ s^{2p/N})}` on `μ(⟨w, S_N(X)⟩ > r)`,
/// with `s = r / (√N d^N C(N) ‖w‖)`. Not clipped; see [`type1_bound_clipped`].
pub fn type1_bound(r: f64, level: usize, dim: usize, w_norm: f64, tci: &TciParams) -> Result<f64> {
    check_nonneg(r)?;
    let scale = scale_factor(level, dim, w_norm, tci)?;
    let s = if scale == 0.0 {
        if r > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        r / scale
    };
    let p = tci.p;
    let e = s.powf(2.0 * p).max(s.powf(2.0 * p / level as f64));
    Ok(tci.c2 * (-(tci.c1 * tci.c1 / 2.0) * e).exp())
}

pub fn type1_bound_clipped(
    r: f64,
    level: usize,
    dim: usize,
    w_norm: f64,
    tci: &TciParams,
) -> Result<f64> {
    Ok(type1_bound(r, level, dim, w_norm, tci)?.clamp(0.0, 1.0))
}

/// Smallest `r` with [`type1_bound`]`(r) ≤ α`:
/// `√N d^N C(N) ‖w‖ min{L'^{1/(2p)}, L'^{N/(2p)}}`, `L' = (2/C₁²) log(C₂/α)`.
pub fn type1_bound_inverse(
    alpha: f64,
    level: usize,
    dim: usize,
    w_norm: f64,
    tci: &TciParams,
) -> Result<f64> {
    check_alpha_open(alpha)?;
    let scale = scale_factor(level, dim, w_norm, tci)?;
    let l = (2.0 / (tci.c1 * tci.c1)) * (tci.c2 / alpha).ln();
    if l <= 0.0 {
        return Ok(0.0);
    }
    let p = tci.p;
    let n = level as f64;
    Ok(scale * l.powf(1.0 / (2.0 * p)).min(l.powf(n / (2.0 * p))))
}

/// Power of `N` in the type-II bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NExponent {
    /// `N^{p/(2N)}`, as derived line by line.
    #[default]
    Derived,
    /// `N^{1/(2Np)}`, as printed in the statement.
    Stated,
}

/// Inputs of [`type2_lower_bound`] besides `r` and the TCI constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Type2Params {
    pub level: usize,
    pub dim: usize,
    pub w_norm: f64,
    /// `H(ν | μ)`; may be infinite.
    pub relative_entropy: f64,
    /// `E_μ ‖X‖^p_γ`.
    pub holder_moment: f64,
    pub constant: f64,
    #[serde(default)]
    pub exponent: NExponent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Type2Case {
    /// `a⁻¹(H) + E_μ‖X‖^p ≤ 1`.
    Small,
    Large,
    /// Infinite relative entropy; the bound is vacuous.
    Uninformative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Type2Bound {
    /// `max(0, raw)`.
    pub value: f64,
    pub raw: f64,
    pub case: Type2Case,
}

impl Type2Bound {
    pub fn informative(&self) -> bool {
        self.case != Type2Case::Uninformative
    }
}

/// Lower bound on the type-II error probability of `⟨w, S_N(X)⟩ > r`.
///
/// `1 - (‖w‖/r)^{p/N} C d^p N^{e} F`, where with `T = a⁻¹(H) + E_μ‖X‖^p`,
/// `F = 1 - 1/N + T/N` if `T ≤ 1` and `F = T` otherwise.
pub fn type2_lower_bound(r: f64, params: &Type2Params, tci: &TciParams) -> Result<Type2Bound> {
    if !(r > 0.0) {
        return Err(invalid(format!("threshold r = {r} must be positive")));
    }
    tci.validate()?;
    let Type2Params {
        level,
        dim,
        w_norm,
        relative_entropy,
        holder_moment,
        constant,
        exponent,
    } = *params;
    if level == 0 || dim == 0 {
        return Err(invalid("signature level and dimension must be at least 1"));
    }
    if relative_entropy.is_nan() || relative_entropy < 0.0 {
        return Err(invalid(format!(
            "relative entropy {relative_entropy} must be nonnegative"
        )));
    }
    if !(holder_moment >= 0.0) || !(constant > 0.0) || !(w_norm >= 0.0) {
        return Err(invalid(
            "moment, constant and ‖w‖ must be nonnegative (constant positive)",
        ));
    }
    if relative_entropy.is_infinite() {
        return Ok(Type2Bound {
            value: 0.0,
            raw: f64::NEG_INFINITY,
            case: Type2Case::Uninformative,
        });
    }
    let p = tci.p;
    let n = level as f64;
    let t = deviation_inverse(&tci.deviation, relative_entropy)? + holder_moment;
    let (factor, case) = if t <= 1.0 {
        (1.0 - 1.0 / n + t / n, Type2Case::Small)
    } else {
        (t, Type2Case::Large)
    };
    let n_pow = match exponent {
        NExponent::Derived => n.powf(p / (2.0 * n)),
        NExponent::Stated => n.powf(1.0 / (2.0 * n * p)),
    };
    let raw = 1.0 - (w_norm / r).powf(p / n) * constant * (dim as f64).powf(p) * n_pow * factor;
    Ok(Type2Bound {
        value: raw.max(0.0),
        raw,
        case,
    })
}

/// Normal-tail and exponential forms of the isoperimetric bound at `ĉ + r/K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsbBound {
    pub argument: f64,
    /// `Φ̄(ĉ + r/K)`.
    pub normal_tail: f64,
    /// `exp(-(ĉ + r/K)²/2)`.
    pub exponential: f64,
    /// Whether the exponential form dominates, i.e. the argument is nonnegative.
    pub exponential_valid: bool,
}

pub fn standard_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn tsb_bound(r: f64, c_hat: f64, k_embed: f64) -> Result<TsbBound> {
    check_nonneg(r)?;
    if !(k_embed > 0.0) {
        return Err(invalid(format!(
            "embedding constant {k_embed} must be positive"
        )));
    }
    let argument = c_hat + r / k_embed;
    Ok(TsbBound {
        argument,
        normal_tail: standard_normal_sf(argument),
        exponential: (-argument * argument / 2.0).exp(),
        exponential_valid: argument >= 0.0,
    })
}

/// Plug-in estimates of the TCI constants from reference Hölder norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PluginConstants {
    pub c1: f64,
    pub c2: f64,
}

/// `C₁ = (2(mean ‖X‖^p + C))^{-1/2}`, `C₂ = mean exp((C₁²/2) ‖X‖^{2p})`.
pub fn plugin_tci_constants(
    holder_norms: &[f64],
    p: f64,
    constant: f64,
) -> Result<PluginConstants> {
    if holder_norms.is_empty() {
        return Err(Error::EmptyInput("no Hölder norms"));
    }
    if holder_norms.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
        return Err(invalid("Hölder norms must be finite and nonnegative"));
    }
    if !(p > 0.0 && p <= 1.0) || !(constant >= 0.0) {
        return Err(invalid("need p in (0, 1] and a nonnegative constant"));
    }
    let n = holder_norms.len() as f64;
    let moment = holder_norms.iter().map(|h| h.powf(p)).sum::<f64>() / n;
    let denom = 2.0 * (moment + constant);
    if denom <= 0.0 {
        return Err(Error::Degenerate(
            "all Hölder norms vanish and the constant is zero".into(),
        ));
    }
    let c1 = denom.powf(-0.5);
    let c2 = holder_norms
        .iter()
        .map(|h| (c1 * c1 / 2.0 * h.powf(2.0 * p)).exp())
        .sum::<f64>()
        / n;
    Ok(PluginConstants {
        c1,
        c2: c2.max(1.0),
    })
}

/// Survival model `A exp(-B r^{2/N})` fitted to the upper tail of reference scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailModelWeibull {
    pub a: f64,
    pub b: f64,
    pub level: usize,
    pub fit_min: f64,
    pub fit_max: f64,
    pub sample_size: usize,
    pub tail_points: usize,
}

impl TailModelWeibull {
    pub fn survival(&self, score: f64) -> f64 {
        self.a * (-self.b * score.max(0.0).powf(2.0 / self.level as f64)).exp()
    }
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

/// Least squares of `log Ŝ(r) = log A - B r^{2/N}` over the top `tail_fraction` of scores,
/// with `Ŝ` the rank estimate `i/(n+1)` for the `i`-th largest score.
pub fn weibull_tail_fit(
    scores: &[f64],
    level: usize,
    tail_fraction: f64,
) -> Result<TailModelWeibull> {
    if level == 0 {
        return Err(invalid("signature level must be at least 1"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(invalid(format!(
            "tail fraction {tail_fraction} outside (0, 0.5]"
        )));
    }
    if scores.len() < 100 {
        return Err(Error::EmptyInput(
            "at least 100 scores are needed for a tail fit",
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(invalid("scores must be finite"));
    }
    let n = scores.len();
    let mut desc = scores.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let m = (tail_fraction * n as f64).floor() as usize;
    if m < 10 {
        return Err(Error::EmptyInput("fewer than 10 tail points"));
    }
    let exponent = 2.0 / level as f64;
    let xs: Vec<f64> = desc[..m]
        .iter()
        .map(|r| r.max(0.0).powf(exponent))
        .collect();
    let ys: Vec<f64> = (1..=m).map(|i| (i as f64 / (n + 1) as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-300 || desc[0] == desc[n - 1] {
        return Err(Error::Degenerate("tail scores are constant".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let b = -slope;
    if !(b > 0.0) {
        return Err(Error::Degenerate("fitted tail does not decay".into()));
    }
    let a = (my - slope * mx).exp();
    Ok(TailModelWeibull {
        a,
        b,
        level,
        fit_min: desc[m - 1],
        fit_max: desc[0],
        sample_size: n,
        tail_points: m,
    })
}

/// `min(1, A exp(-B score^{2/N}))`; negative scores count as zero.
pub fn parametric_pvalue(score: f64, m: &TailModelWeibull) -> f64 {
    m.survival(score).min(1.0)
}

/// Conformal p-value `(1 + #{c ≥ score}) / (n + 1)`.
pub fn empirical_pvalue(score: f64, calibration: &[f64]) -> Result<f64> {
    if calibration.is_empty() {
        return Err(Error::EmptyInput("empty calibration sample"));
    }
    let count = calibration.iter().filter(|&&c| c >= score).count();
    Ok((1 + count) as f64 / (calibration.len() + 1) as f64)
}

/// Sorted calibration scores for repeated conformal p-values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCalibration {
    sorted: Vec<f64>,
}

impl EmpiricalCalibration {
    pub fn new(scores: &[f64]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput("empty calibration sample"));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(invalid("calibration scores contain NaN"));
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCalibration { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn pvalue(&self, score: f64) -> f64 {
        let below = self.sorted.partition_point(|&c| c < score);
        (1 + self.sorted.len() - below) as f64 / (self.sorted.len() + 1) as f64
    }
}
