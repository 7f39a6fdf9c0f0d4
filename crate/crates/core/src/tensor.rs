//! Truncated tensor algebra over the alphabet `{1, ..., d}`.
//!
//! Two storage layouts are provided:
//!
//! * [`TruncatedTensor`] is a dense graded array holding one coefficient per
//!   word of length `0..=level`, laid out length-then-lexicographic. Signatures,
//!   expected signatures and linear functionals of moderate level live here.
//! * [`SparseTensor`] keeps only the words that were touched. Shuffle powers of
//!   a sparse functional populate high levels very unevenly, so the shuffle
//!   routines work on this form.
//!
//! Both serialize to the same JSON shape, `{"d": .., "N": .., "coeffs": [[word, value], ..]}`
//! with words listed in canonical order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A multi-index `(i_1, ..., i_k)` with letters in `1..=d`.
///
/// Words order by length first and lexicographically within a length.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(i: usize) -> Self {
        Word(vec![i])
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks every letter lies in `1..=dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l == 0 || l > dim) {
            Some(&letter) => Err(Error::InvalidLetter { letter, dim }),
            None => Ok(()),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = Vec::with_capacity(self.len() + other.len());
        letters.extend_from_slice(&self.0);
        letters.extend_from_slice(&other.0);
        Word(letters)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

/// All interleavings of `u` and `v`, with their integer multiplicities.
///
/// The multiplicities sum to `binomial(|u| + |v|, |u|)`.
pub fn shuffle_words(u: &Word, v: &Word) -> BTreeMap<Word, u64> {
    let mut out = BTreeMap::new();
    let mut buf = Vec::with_capacity(u.len() + v.len());
    interleave(u.letters(), v.letters(), &mut buf, &mut |w| {
        *out.entry(Word(w.to_vec())).or_insert(0u64) += 1;
    });
    out
}

fn interleave(u: &[usize], v: &[usize], buf: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if u.is_empty() || v.is_empty() {
        let len = buf.len();
        buf.extend_from_slice(u);
        buf.extend_from_slice(v);
        emit(buf);
        buf.truncate(len);
        return;
    }
    buf.push(u[0]);
    interleave(&u[1..], v, buf, emit);
    buf.pop();
    buf.push(v[0]);
    interleave(u, &v[1..], buf, emit);
    buf.pop();
}

/// Number of words of length exactly `k` over `dim` letters.
pub fn words_at_level(dim: usize, k: usize) -> usize {
    dim.pow(k as u32)
}

/// Index of the first word of length `k` in the dense layout.
pub fn level_offset(dim: usize, k: usize) -> usize {
    (0..k).map(|j| words_at_level(dim, j)).sum()
}

/// Number of coefficients of a dense tensor, `sum_{k=0}^{level} dim^k`.
pub fn dense_len(dim: usize, level: usize) -> usize {
    level_offset(dim, level + 1)
}

fn index_within_level(dim: usize, letters: &[usize]) -> usize {
    letters.iter().fold(0, |acc, &l| acc * dim + (l - 1))
}

fn word_from_index(dim: usize, k: usize, mut idx: usize) -> Word {
    let mut letters = vec![0; k];
    for slot in letters.iter_mut().rev() {
        *slot = idx % dim + 1;
        idx /= dim;
    }
    Word(letters)
}

/// Dense graded coefficient array over all words of length at most `level`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    level: usize,
    coeffs: Vec<f64>,
}

impl TruncatedTensor {
    pub fn zeros(dim: usize, level: usize) -> Self {
        assert!(dim >= 1, "alphabet size must be at least 1");
        TruncatedTensor {
            dim,
            level,
            coeffs: vec![0.0; dense_len(dim, level)],
        }
    }

    /// The empty-word functional `1`.
    pub fn unit(dim: usize, level: usize) -> Self {
        let mut t = Self::zeros(dim, level);
        t.coeffs[0] = 1.0;
        t
    }

    pub fn from_coeffs(dim: usize, level: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("alphabet size must be at least 1"));
        }
        let expected = dense_len(dim, level);
        if coeffs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} coefficients for d={dim}, N={level}, got {}",
                coeffs.len()
            )));
        }
        Ok(TruncatedTensor { dim, level, coeffs })
    }

    /// A single word with coefficient `value`.
    pub fn from_word(dim: usize, level: usize, word: &Word, value: f64) -> Result<Self> {
        word.validate(dim)?;
        if word.len() > level {
            return Err(Error::InsufficientLevel {
                required: word.len(),
                available: level,
            });
        }
        let mut t = Self::zeros(dim, level);
        let idx = t.index_of(word);
        t.coeffs[idx] = value;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Dense offset of `word`; the word must be valid for this tensor.
    pub fn index_of(&self, word: &Word) -> usize {
        level_offset(self.dim, word.len()) + index_within_level(self.dim, word.letters())
    }

    /// Coefficient of `word`, zero when the word is longer than the level.
    pub fn get(&self, word: &Word) -> f64 {
        if word.len() > self.level {
            return 0.0;
        }
        self.coeffs[self.index_of(word)]
    }

    pub fn set(&mut self, word: &Word, value: f64) -> Result<()> {
        word.validate(self.dim)?;
        if word.len() > self.level {
            return Err(Error::InsufficientLevel {
                required: word.len(),
                available: self.level,
            });
        }
        let idx = self.index_of(word);
        self.coeffs[idx] = value;
        Ok(())
    }

    /// Coefficients of the words of length exactly `k`.
    pub fn level_slice(&self, k: usize) -> &[f64] {
        let start = level_offset(self.dim, k);
        &self.coeffs[start..start + words_at_level(self.dim, k)]
    }

    pub fn level_slice_mut(&mut self, k: usize) -> &mut [f64] {
        let start = level_offset(self.dim, k);
        let len = words_at_level(self.dim, k);
        &mut self.coeffs[start..start + len]
    }

    /// Iterates `(word, coefficient)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (Word, f64)> + '_ {
        (0..=self.level).flat_map(move |k| {
            self.level_slice(k)
                .iter()
                .enumerate()
                .map(move |(i, &c)| (word_from_index(self.dim, k, i), c))
        })
    }

    /// Drops every level above `level`.
    pub fn truncated(&self, level: usize) -> Self {
        let level = level.min(self.level);
        TruncatedTensor {
            dim: self.dim,
            level,
            coeffs: self.coeffs[..dense_len(self.dim, level)].to_vec(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TruncatedTensor {
            dim: self.dim,
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self + factor * other`, for tensors of identical shape.
    pub fn add_scaled(&mut self, other: &TruncatedTensor, factor: f64) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &TruncatedTensor) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(other, -1.0)?;
        Ok(out)
    }

    pub fn check_same_shape(&self, other: &TruncatedTensor) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::AlphabetMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.level != other.level {
            return Err(Error::ShapeMismatch(format!(
                "levels differ: {} vs {}",
                self.level, other.level
            )));
        }
        Ok(())
    }

    /// Truncated tensor product: `out[w] = sum_{w = u.v} self[u] * other[v]`.
    pub fn tensor_product(&self, other: &TruncatedTensor) -> Result<Self> {
        self.check_same_shape(other)?;
        let d = self.dim;
        let mut out = TruncatedTensor::zeros(d, self.level);
        for k in 0..=self.level {
            let start = level_offset(d, k);
            for i in 0..words_at_level(d, k) {
                let mut acc = 0.0;
                let mut suffix_size = 1;
                for j in 0..=k {
                    // prefix of length k - j, suffix of length j
                    let prefix = i / suffix_size;
                    let suffix = i % suffix_size;
                    acc += self.level_slice(k - j)[prefix] * other.level_slice(j)[suffix];
                    suffix_size *= d;
                }
                out.coeffs[start + i] = acc;
            }
        }
        Ok(out)
    }

    pub fn to_sparse(&self) -> SparseTensor {
        let coeffs = self.iter().filter(|(_, c)| *c != 0.0).collect();
        SparseTensor {
            dim: self.dim,
            level: self.level,
            coeffs,
        }
    }
}

/// `<a, b>` over the words both tensors carry (up to the smaller level).
pub fn pairing(a: &TruncatedTensor, b: &TruncatedTensor) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::AlphabetMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let n = dense_len(a.dim, a.level.min(b.level));
    Ok(a.coeffs[..n]
        .iter()
        .zip(&b.coeffs[..n])
        .map(|(x, y)| x * y)
        .sum())
}

pub fn l2_norm(s: &TruncatedTensor) -> f64 {
    s.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Map-backed tensor; absent words have coefficient zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor {
    dim: usize,
    level: usize,
    coeffs: BTreeMap<Word, f64>,
}

impl SparseTensor {
    pub fn zero(dim: usize, level: usize) -> Self {
        SparseTensor {
            dim,
            level,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn unit(dim: usize) -> Self {
        let mut t = Self::zero(dim, 0);
        t.coeffs.insert(Word::empty(), 1.0);
        t
    }

    /// The functional `e_i` picking out the single-letter word `(i)`.
    pub fn letter(dim: usize, i: usize) -> Result<Self> {
        Self::from_terms(dim, 1, [(Word::letter(i), 1.0)])
    }

    pub fn from_terms(
        dim: usize,
        level: usize,
        terms: impl IntoIterator<Item = (Word, f64)>,
    ) -> Result<Self> {
        let mut t = Self::zero(dim, level);
        for (w, c) in terms {
            w.validate(dim)?;
            if w.len() > level {
                return Err(Error::InsufficientLevel {
                    required: w.len(),
                    available: level,
                });
            }
            *t.coeffs.entry(w).or_insert(0.0) += c;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn get(&self, word: &Word) -> f64 {
        self.coeffs.get(word).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &f64)> {
        self.coeffs.iter()
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    /// Highest word length carrying a stored coefficient.
    pub fn max_word_len(&self) -> usize {
        self.coeffs.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SparseTensor {
            dim: self.dim,
            level: self.level,
            coeffs: self
                .coeffs
                .iter()
                .map(|(w, c)| (w.clone(), c * factor))
                .collect(),
        }
    }

    /// `self += factor * other`; the level grows to cover both.
    pub fn add_scaled(&mut self, other: &SparseTensor, factor: f64) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::AlphabetMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        self.level = self.level.max(other.level);
        for (w, c) in &other.coeffs {
            *self.coeffs.entry(w.clone()).or_insert(0.0) += factor * c;
        }
        Ok(())
    }

    /// Dense copy at `level` (words above it are dropped).
    pub fn to_dense(&self, level: usize) -> TruncatedTensor {
        let mut out = TruncatedTensor::zeros(self.dim, level);
        for (w, &c) in &self.coeffs {
            if w.len() <= level {
                let idx = out.index_of(w);
                out.coeffs[idx] = c;
            }
        }
        out
    }

    /// `<self, dense>` over the words of length at most `dense.level()`.
    pub fn pair_dense(&self, dense: &TruncatedTensor) -> Result<f64> {
        if self.dim != dense.dim() {
            return Err(Error::AlphabetMismatch {
                left: self.dim,
                right: dense.dim(),
            });
        }
        Ok(self
            .coeffs
            .iter()
            .filter(|(w, _)| w.len() <= dense.level())
            .map(|(w, c)| c * dense.coeffs[dense.index_of(w)])
            .sum())
    }
}

impl From<&TruncatedTensor> for SparseTensor {
    fn from(t: &TruncatedTensor) -> Self {
        t.to_sparse()
    }
}

/// Bilinear shuffle of two functionals, dropping words longer than `out_level`.
pub fn shuffle(a: &SparseTensor, b: &SparseTensor, out_level: usize) -> Result<SparseTensor> {
    if a.dim != b.dim {
        return Err(Error::AlphabetMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let mut acc: BTreeMap<Word, f64> = BTreeMap::new();
    for (u, &cu) in &a.coeffs {
        if cu == 0.0 {
            continue;
        }
        for (v, &cv) in &b.coeffs {
            if cv == 0.0 || u.len() + v.len() > out_level {
                continue;
            }
            for (w, mult) in shuffle_words(u, v) {
                *acc.entry(w).or_insert(0.0) += cu * cv * mult as f64;
            }
        }
    }
    Ok(SparseTensor {
        dim: a.dim,
        level: out_level,
        coeffs: acc,
    })
}

/// `w ⧢ w ⧢ ... ⧢ w` (`k` factors); `k = 0` gives the unit.
pub fn shuffle_power(w: &SparseTensor, k: usize, out_level: usize) -> SparseTensor {
    let mut acc = SparseTensor::unit(w.dim);
    acc.level = out_level;
    for _ in 0..k {
        acc = shuffle(&acc, w, out_level).expect("same alphabet");
    }
    acc
}

/// All shuffle powers `w^{⧢0}, ..., w^{⧢n}`, each truncated at `out_level`.
pub fn shuffle_powers(w: &SparseTensor, n: usize, out_level: usize) -> Vec<SparseTensor> {
    let mut powers = Vec::with_capacity(n + 1);
    let mut acc = SparseTensor::unit(w.dim);
    acc.level = out_level;
    powers.push(acc.clone());
    for _ in 0..n {
        acc = shuffle(&acc, w, out_level).expect("same alphabet");
        powers.push(acc.clone());
    }
    powers
}

/// Real polynomial `a_0 + a_1 x + ... + a_n x^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("a polynomial needs at least one coefficient"));
        }
        Ok(Polynomial { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nominal degree (number of coefficients minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial { coeffs: vec![0.0] };
        }
        Polynomial {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &a)| i as f64 * a)
                .collect(),
        }
    }
}

/// Upper bound on tensor levels produced by polynomial shuffles.
///
/// Dense storage at level `L` needs `d^L` coefficients per level; with the
/// default of 12 that is ~1.7e7 coefficients at `d = 4`. For larger alphabets
/// pick the cap so that `d^cap` stays within memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCap(pub usize);

impl Default for LevelCap {
    fn default() -> Self {
        LevelCap(12)
    }
}

/// `Q^⧢(ℓ) = sum_i a_i ℓ^{⧢i}`, truncated at `degree(Q) * level(ℓ)`.
pub fn polynomial_shuffle(
    q: &Polynomial,
    ell: &SparseTensor,
    cap: LevelCap,
) -> Result<SparseTensor> {
    let out_level = q.degree() * ell.level();
    if out_level > cap.0 {
        return Err(Error::LevelCapExceeded {
            required: out_level,
            cap: cap.0,
        });
    }
    let powers = shuffle_powers(ell, q.degree(), out_level);
    let mut out = SparseTensor::zero(ell.dim(), out_level);
    for (a, p) in q.coeffs().iter().zip(&powers) {
        if *a != 0.0 {
            out.add_scaled(p, *a)?;
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    d: usize,
    #[serde(rename = "N")]
    level: usize,
    coeffs: Vec<(Vec<usize>, f64)>,
}

type Terms = (usize, usize, Vec<(Word, f64)>);

impl TensorJson {
    fn into_terms(self) -> Result<Terms> {
        if self.d == 0 {
            return Err(invalid("alphabet size must be at least 1"));
        }
        let terms = self.coeffs.into_iter().map(|(w, c)| (Word(w), c)).collect();
        Ok((self.d, self.level, terms))
    }
}

impl Serialize for TruncatedTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorJson {
            d: self.dim,
            level: self.level,
            coeffs: self.iter().map(|(w, c)| (w.0, c)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TruncatedTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (dim, level, terms) = TensorJson::deserialize(d)?
            .into_terms()
            .map_err(serde::de::Error::custom)?;
        let mut t = TruncatedTensor::zeros(dim, level);
        for (w, c) in terms {
            t.set(&w, c).map_err(serde::de::Error::custom)?;
        }
        Ok(t)
    }
}

impl Serialize for SparseTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorJson {
            d: self.dim,
            level: self.level,
            coeffs: self.coeffs.iter().map(|(w, &c)| (w.0.clone(), c)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (dim, level, terms) = TensorJson::deserialize(d)?
            .into_terms()
            .map_err(serde::de::Error::custom)?;
        SparseTensor::from_terms(dim, level, terms).map_err(serde::de::Error::custom)
    }
}
