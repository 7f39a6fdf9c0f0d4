//! Piecewise-linear paths, their truncated signatures, and path transforms.
//!
//! Signatures are computed exactly: each linear segment with increment `Δ`
//! contributes the truncated tensor exponential `sum_k Δ^{⊗k}/k!`, and the
//! segments are folded together with Chen's relation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{level_offset, pairing, words_at_level, TruncatedTensor};

/// Timestamped `d`-dimensional piecewise-linear path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStream {
    id: Option<String>,
    times: Vec<f64>,
    dim: usize,
    /// Row-major node values, `times.len() * dim` entries.
    values: Vec<f64>,
}

impl PathStream {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidPath("points have unequal dimensions".into()));
        }
        let values = points.into_iter().flatten().collect();
        Self::from_flat(times, dim, values)
    }

    pub fn from_flat(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be at least 1".into()));
        }
        if times.len() < 2 {
            return Err(Error::InvalidPath("a path needs at least two nodes".into()));
        }
        if values.len() != times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values do not fill {} nodes of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite time or value".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(PathStream {
            id: None,
            times,
            dim,
            values,
        })
    }

    /// Path on the uniform grid `t_j = j * span / (n - 1)`.
    pub fn uniform(span: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        let n = values.len() / dim.max(1);
        if n < 2 {
            return Err(Error::InvalidPath("a path needs at least two nodes".into()));
        }
        let times = (0..n).map(|j| span * j as f64 / (n - 1) as f64).collect();
        Self::from_flat(times, dim, values)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_nodes(&self) -> usize {
        self.times.len()
    }

    pub fn num_segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Node times mapped affinely onto `[0, 1]`.
    pub fn unit_times(&self) -> Vec<f64> {
        let t0 = self.times[0];
        let span = self.times[self.times.len() - 1] - t0;
        self.times.iter().map(|t| (t - t0) / span).collect()
    }

    /// Linear interpolation of the path at time `t`, clamped to the endpoints.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.point(0).to_vec();
        }
        if t >= self.times[n - 1] {
            return self.point(n - 1).to_vec();
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let lam = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        self.point(j)
            .iter()
            .zip(self.point(j + 1))
            .map(|(a, b)| a + lam * (b - a))
            .collect()
    }
}

/// Truncated signature `S_N(x)`: a tensor with level-0 coefficient 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    tensor: TruncatedTensor,
    path_id: Option<String>,
}

impl Signature {
    /// Signature of a constant path.
    pub fn trivial(dim: usize, level: usize) -> Self {
        Signature {
            tensor: TruncatedTensor::unit(dim, level),
            path_id: None,
        }
    }

    pub fn tensor(&self) -> &TruncatedTensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> TruncatedTensor {
        self.tensor
    }

    pub fn path_id(&self) -> Option<&str> {
        self.path_id.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    pub fn level(&self) -> usize {
        self.tensor.level()
    }
}

/// Multiplies `acc` in place by the tensor exponential of `delta`.
fn mul_segment_exp(acc: &mut TruncatedTensor, delta: &[f64], exp_buf: &mut TruncatedTensor) {
    let d = acc.dim();
    let n = acc.level();
    // exp(Δ) level by level: level k = level (k-1) ⊗ Δ / k
    exp_buf.coeffs_mut()[0] = 1.0;
    for k in 1..=n {
        let prev_start = level_offset(d, k - 1);
        let start = level_offset(d, k);
        let coeffs = exp_buf.coeffs_mut();
        for p in 0..words_at_level(d, k - 1) {
            let base = coeffs[prev_start + p] / k as f64;
            for (l, dl) in delta.iter().enumerate() {
                coeffs[start + p * d + l] = base * dl;
            }
        }
    }
    for k in (1..=n).rev() {
        let start = level_offset(d, k);
        for i in 0..words_at_level(d, k) {
            let mut sum = acc.coeffs()[start + i];
            let mut suffix_size = d;
            for j in 1..=k {
                let prefix = i / suffix_size;
                let suffix = i % suffix_size;
                sum += acc.coeffs()[level_offset(d, k - j) + prefix]
                    * exp_buf.coeffs()[level_offset(d, j) + suffix];
                suffix_size *= d;
            }
            acc.coeffs_mut()[start + i] = sum;
        }
    }
}

/// Truncated signature of the piecewise-linear interpolant of `x`.
pub fn signature(x: &PathStream, level: usize) -> Result<Signature> {
    if level == 0 {
        return Err(invalid("signature level must be at least 1"));
    }
    let d = x.dim();
    let mut acc = TruncatedTensor::unit(d, level);
    let mut exp_buf = TruncatedTensor::zeros(d, level);
    let mut delta = vec![0.0; d];
    for j in 0..x.num_segments() {
        for (dl, (a, b)) in delta.iter_mut().zip(x.point(j).iter().zip(x.point(j + 1))) {
            *dl = b - a;
        }
        mul_segment_exp(&mut acc, &delta, &mut exp_buf);
    }
    Ok(Signature {
        tensor: acc,
        path_id: x.id().map(str::to_owned),
    })
}

/// Signatures of many paths, computed in parallel. Output order matches input.
pub fn signatures(paths: &[PathStream], level: usize) -> Result<Vec<Signature>> {
    paths.par_iter().map(|p| signature(p, level)).collect()
}

/// Chen's relation: the signature of `x` followed by `y`.
pub fn chen_concat(s1: &Signature, s2: &Signature) -> Result<Signature> {
    Ok(Signature {
        tensor: s1.tensor.tensor_product(&s2.tensor)?,
        path_id: s1.path_id.clone(),
    })
}

/// Path transforms applied before taking signatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Prepend a channel carrying normalized time.
    Time,
    /// Append a visibility channel and return the path to the origin.
    Invisibility,
}

impl Transform {
    pub fn apply(self, x: &PathStream) -> PathStream {
        match self {
            Transform::Time => time_augment(x),
            Transform::Invisibility => invisibility_reset(x),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "time" | "time_augment" => Ok(Transform::Time),
            "invisibility" | "invisibility_reset" => Ok(Transform::Invisibility),
            other => Err(invalid(format!("unknown transform '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Time => "time",
            Transform::Invisibility => "invisibility",
        }
    }
}

/// Applies `transforms` left to right.
pub fn apply_transforms(x: &PathStream, transforms: &[Transform]) -> PathStream {
    transforms.iter().fold(x.clone(), |p, t| t.apply(&p))
}

/// Adds channel 0 equal to `(t - t_0) / (t_L - t_0)`.
pub fn time_augment(x: &PathStream) -> PathStream {
    let d = x.dim() + 1;
    let mut values = Vec::with_capacity(x.num_nodes() * d);
    for (u, p) in x.unit_times().iter().zip(x.points()) {
        values.push(*u);
        values.extend_from_slice(p);
    }
    PathStream {
        id: x.id.clone(),
        times: x.times.clone(),
        dim: d,
        values,
    }
}

/// Appends a visibility channel (last coordinate) equal to 1 along the path,
/// then two nodes at unit spacing past the end: the first drops visibility to
/// 0, the second moves every original coordinate to 0.
pub fn invisibility_reset(x: &PathStream) -> PathStream {
    let d = x.dim() + 1;
    let n = x.num_nodes();
    let mut values = Vec::with_capacity((n + 2) * d);
    for p in x.points() {
        values.extend_from_slice(p);
        values.push(1.0);
    }
    values.extend_from_slice(x.point(n - 1));
    values.push(0.0);
    values.extend(std::iter::repeat_n(0.0, d));
    let t_end = x.times[n - 1];
    let mut times = x.times.clone();
    times.push(t_end + 1.0);
    times.push(t_end + 2.0);
    PathStream {
        id: x.id.clone(),
        times,
        dim: d,
        values,
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn euclid_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Discrete γ-Hölder norm on `[0, 1]`: `sup |x(t)| + sup |x(t) - x(s)| / |t - s|^γ`
/// with both suprema taken over the nodes (times rescaled affinely to `[0, 1]`).
///
/// For piecewise-linear paths this is a lower bound of the continuum norm; it
/// is exact whenever the suprema are attained at nodes.
pub fn holder_norm(x: &PathStream, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("Hölder exponent {gamma} outside (0, 1)")));
    }
    let t = x.unit_times();
    let sup = x.points().map(euclid).fold(0.0, f64::max);
    let mut ratio: f64 = 0.0;
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let r = euclid_diff(x.point(j), x.point(i)) / (t[j] - t[i]).powf(gamma);
            ratio = ratio.max(r);
        }
    }
    Ok(sup + ratio)
}

/// `κ_N(x, y) = <S_N(x), S_N(y)>`.
pub fn truncated_sig_kernel(x: &PathStream, y: &PathStream, level: usize) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::AlphabetMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let sx = signature(x, level)?;
    let sy = signature(y, level)?;
    pairing(sx.tensor(), sy.tensor())
}

/// Sup-norm distance between two paths after rescaling both to `[0, 1]`.
///
/// The difference of two piecewise-linear functions is piecewise linear on the
/// union of their nodes, so evaluating there is exact.
pub fn sup_distance(x: &PathStream, y: &PathStream) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::AlphabetMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let rx = rescaled(x);
    let ry = rescaled(y);
    let mut grid: Vec<f64> = rx.times.iter().chain(&ry.times).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid
        .iter()
        .map(|&t| euclid_diff(&rx.value_at(t), &ry.value_at(t)))
        .fold(0.0, f64::max))
}

fn rescaled(x: &PathStream) -> PathStream {
    PathStream {
        id: None,
        times: x.unit_times(),
        dim: x.dim,
        values: x.values.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{l2_norm, shuffle, SparseTensor, Word};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_path(rng: &mut ChaCha8Rng, segments: usize, dim: usize) -> PathStream {
        let mut t = 0.0;
        let mut times = vec![0.0];
        for _ in 0..segments {
            t += rng.random_range(0.1..1.0);
            times.push(t);
        }
        let values = (0..(segments + 1) * dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        PathStream::from_flat(times, dim, values).unwrap()
    }

    fn w(v: &[usize]) -> Word {
        Word::new(v.to_vec())
    }

    #[test]
    fn rejects_invalid_paths() {
        assert!(PathStream::new(vec![0.0], vec![vec![1.0]]).is_err());
        assert!(PathStream::new(vec![0.0, 0.0], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(PathStream::new(vec![0.0, 1.0], vec![vec![1.0], vec![2.0, 3.0]]).is_err());
        assert!(PathStream::new(vec![0.0, 1.0], vec![vec![], vec![]]).is_err());
        assert!(PathStream::new(vec![0.0, 1.0], vec![vec![f64::NAN], vec![0.0]]).is_err());
    }

    #[test]
    fn one_dimensional_segment() {
        let x = PathStream::new(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        let s = signature(&x, 3).unwrap();
        let c = s.tensor().coeffs();
        assert_eq!(c[0], 1.0);
        assert_eq!(c[1], 2.0);
        assert_eq!(c[2], 2.0);
        assert!((c[3] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_segment() {
        let x = PathStream::new(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let s = signature(&x, 2).unwrap();
        assert_eq!(s.tensor().get(&w(&[1])), 1.0);
        assert_eq!(s.tensor().get(&w(&[2])), 1.0);
        for word in [[1, 1], [1, 2], [2, 1], [2, 2]] {
            assert_eq!(s.tensor().get(&w(&word)), 0.5);
        }
    }

    #[test]
    fn level_zero_is_rejected() {
        let x = PathStream::new(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        assert!(signature(&x, 0).is_err());
    }

    #[test]
    fn chen_with_trivial_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_path(&mut rng, 4, 2);
        let s = signature(&x, 3).unwrap();
        let t = Signature::trivial(2, 3);
        assert_eq!(chen_concat(&s, &t).unwrap().tensor(), s.tensor());
        assert_eq!(chen_concat(&t, &s).unwrap().tensor(), s.tensor());
    }

    #[test]
    fn chen_of_two_collinear_segments() {
        let (a, b) = (0.7, -1.9);
        let s1 = signature(
            &PathStream::new(vec![0.0, 1.0], vec![vec![0.0], vec![a]]).unwrap(),
            2,
        )
        .unwrap();
        let s2 = signature(
            &PathStream::new(vec![0.0, 1.0], vec![vec![0.0], vec![b]]).unwrap(),
            2,
        )
        .unwrap();
        let s = chen_concat(&s1, &s2).unwrap();
        assert!((s.tensor().coeffs()[1] - (a + b)).abs() < 1e-15);
        assert!((s.tensor().coeffs()[2] - (a + b) * (a + b) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn chen_split_anywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let x = random_path(&mut rng, 6, 3);
            let split = rng.random_range(1..6);
            let left = PathStream::from_flat(
                x.times()[..=split].to_vec(),
                3,
                x.values()[..(split + 1) * 3].to_vec(),
            )
            .unwrap();
            let right = PathStream::from_flat(
                x.times()[split..].to_vec(),
                3,
                x.values()[split * 3..].to_vec(),
            )
            .unwrap();
            let whole = signature(&x, 4).unwrap();
            let joined = chen_concat(
                &signature(&left, 4).unwrap(),
                &signature(&right, 4).unwrap(),
            )
            .unwrap();
            for (a, b) in whole.tensor().coeffs().iter().zip(joined.tensor().coeffs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shuffle_identity_on_random_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random_path(&mut rng, 5, 2);
            let s = signature(&x, 4).unwrap();
            let u =
                SparseTensor::from_terms(2, 2, [(w(&[1, 2]), 0.3), (w(&[2]), -1.2), (w(&[]), 0.5)])
                    .unwrap();
            let v = SparseTensor::from_terms(2, 2, [(w(&[2, 2]), 1.1), (w(&[1]), 0.4)]).unwrap();
            let lhs = u.pair_dense(s.tensor()).unwrap() * v.pair_dense(s.tensor()).unwrap();
            let rhs = shuffle(&u, &v, 4).unwrap().pair_dense(s.tensor()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn subdividing_a_segment_leaves_signature_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_path(&mut rng, 4, 2);
        let mut times = x.times().to_vec();
        let mut values = x.values().to_vec();
        let mid_t = 0.3 * times[1] + 0.7 * times[2];
        let mid = x.value_at(mid_t);
        times.insert(2, mid_t);
        for (k, m) in mid.into_iter().enumerate() {
            values.insert(2 * 2 + k, m);
        }
        let y = PathStream::from_flat(times, 2, values).unwrap();
        let sx = signature(&x, 4).unwrap();
        let sy = signature(&y, 4).unwrap();
        for (a, b) in sx.tensor().coeffs().iter().zip(sy.tensor().coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_values_scales_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_path(&mut rng, 5, 2);
        let lambda = 2.0;
        let y = PathStream::from_flat(
            x.times().to_vec(),
            2,
            x.values().iter().map(|v| v * lambda).collect(),
        )
        .unwrap();
        let sx = signature(&x, 3).unwrap();
        let sy = signature(&y, 3).unwrap();
        for k in 0..=3 {
            let f = lambda.powi(k as i32);
            for (a, b) in sx
                .tensor()
                .level_slice(k)
                .iter()
                .zip(sy.tensor().level_slice(k))
            {
                assert_eq!(a * f, *b);
            }
        }
    }

    #[test]
    fn time_augment_examples() {
        let x = PathStream::new(vec![0.0, 1.0], vec![vec![3.0], vec![3.0]]).unwrap();
        let y = time_augment(&x);
        assert_eq!(y.dim(), 2);
        assert_eq!(y.point(0), &[0.0, 3.0]);
        assert_eq!(y.point(1), &[1.0, 3.0]);

        let z = time_augment(&y);
        assert_eq!(z.dim(), 3);
        assert_eq!(z.point(1), &[1.0, 1.0, 3.0]);

        let x =
            PathStream::new(vec![0.0, 0.5, 2.0], vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = time_augment(&x);
        let channel: Vec<f64> = y.points().map(|p| p[0]).collect();
        assert_eq!(channel, vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn invisibility_reset_examples() {
        let x = PathStream::new(vec![0.0, 1.0], vec![vec![0.0], vec![3.0]]).unwrap();
        let y = invisibility_reset(&x);
        assert_eq!(y.dim(), 2);
        assert_eq!(y.num_nodes(), 4);
        assert_eq!(y.point(1), &[3.0, 1.0]);
        assert_eq!(y.point(2), &[3.0, 0.0]);
        assert_eq!(y.point(3), &[0.0, 0.0]);
        assert_eq!(y.times(), &[0.0, 1.0, 2.0, 3.0]);

        let zero = PathStream::new(vec![0.0, 1.0, 2.0], vec![vec![0.0]; 3]).unwrap();
        let y = invisibility_reset(&zero);
        assert!(y.points().all(|p| p[0] == 0.0));
        assert_eq!(y.point(0)[1], 1.0);
        assert_eq!(y.point(y.num_nodes() - 1)[1], 0.0);
    }

    #[test]
    fn invisibility_reset_closes_original_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let mut x = random_path(&mut rng, 5, 2);
            // start at the origin so the closed loop has zero increment
            let first = x.point(0).to_vec();
            let values = x
                .values()
                .chunks(2)
                .flat_map(|p| [p[0] - first[0], p[1] - first[1]])
                .collect();
            x = PathStream::from_flat(x.times().to_vec(), 2, values).unwrap();
            let s = signature(&invisibility_reset(&x), 2).unwrap();
            assert!(s.tensor().get(&w(&[1])).abs() < 1e-15);
            assert!(s.tensor().get(&w(&[2])).abs() < 1e-15);
            assert_eq!(s.tensor().get(&w(&[3])), -1.0);
        }
    }

    #[test]
    fn holder_norm_examples() {
        let values: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let x = PathStream::uniform(1.0, 1, values).unwrap();
        assert!((holder_norm(&x, 0.5).unwrap() - 2.0).abs() < 1e-15);

        let c = PathStream::uniform(3.0, 1, vec![-2.5; 5]).unwrap();
        assert_eq!(holder_norm(&c, 0.3).unwrap(), 2.5);

        assert!(holder_norm(&x, 0.0).is_err());
        assert!(holder_norm(&x, 1.0).is_err());
    }

    #[test]
    fn holder_norm_is_time_rescaled() {
        let values: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let a = PathStream::uniform(1.0, 1, values.clone()).unwrap();
        let b = PathStream::uniform(7.0, 1, values).unwrap();
        assert_eq!(holder_norm(&a, 0.4).unwrap(), holder_norm(&b, 0.4).unwrap());
    }

    #[test]
    fn kernel_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_path(&mut rng, 5, 2);
        let c = PathStream::uniform(1.0, 2, vec![0.3, 0.3, 0.3, 0.3]).unwrap();
        assert_eq!(truncated_sig_kernel(&x, &c, 3).unwrap(), 1.0);
        let kxx = truncated_sig_kernel(&x, &x, 3).unwrap();
        let n = l2_norm(signature(&x, 3).unwrap().tensor());
        assert!((kxx - n * n).abs() < 1e-12);
        assert!(kxx >= 1.0);
        let y = random_path(&mut rng, 3, 2);
        assert_eq!(
            truncated_sig_kernel(&x, &y, 3).unwrap(),
            truncated_sig_kernel(&y, &x, 3).unwrap()
        );
        let z = random_path(&mut rng, 3, 3);
        assert!(truncated_sig_kernel(&x, &z, 3).is_err());
    }

    #[test]
    fn sup_distance_uses_union_grid() {
        // x(t) = t on [0,1]; y is zero with a node at 0.5
        let x = PathStream::uniform(1.0, 1, vec![0.0, 1.0]).unwrap();
        let y = PathStream::uniform(1.0, 1, vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(sup_distance(&x, &y).unwrap(), 1.0);
        // tent against zero: max at the shared node
        let tent = PathStream::uniform(2.0, 1, vec![0.0, 2.0, 0.0]).unwrap();
        let flat = PathStream::uniform(1.0, 1, vec![0.0, 0.0]).unwrap();
        assert_eq!(sup_distance(&tent, &flat).unwrap(), 2.0);
    }
}
