//! Weight vectors, the oddball canonical order, and exact distributions of
//! `S = Σ aᵢvᵢ` over independent uniform signs `aᵢ`.

use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mitm;
use crate::rational::Rational;
use crate::real::{Key, Lattice, LatticeVisitor, Real};

/// Largest `n` accepted by full enumeration.
pub const MAX_EXACT_N: usize = 26;
/// Largest `n` accepted by meet-in-the-middle counting.
pub const MAX_MITM_N: usize = 52;

/// A nonnegative weight vector together with its squared norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Weights<T> {
    values: Vec<T>,
    norm_sq: T,
}

impl<T: Real> Weights<T> {
    /// Takes absolute values; sign flips never change the law of `S`.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "weight {} is not finite",
                i + 1
            )));
        }
        let values: Vec<T> = values.iter().map(Real::abs).collect();
        let norm_sq = values
            .iter()
            .fold(T::zero(), |acc, v| acc + v.clone() * v.clone());
        Ok(Weights { values, norm_sq })
    }

    pub fn empty() -> Self {
        Weights {
            values: Vec::new(),
            norm_sq: T::zero(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn norm_sq(&self) -> &T {
        &self.norm_sq
    }

    /// `Σ vᵢ² ≤ 1` (float mode allows 1e-12 relative slack).
    pub fn is_tomaszewski(&self) -> bool {
        self.norm_sq.le_checked(&T::one())
    }

    pub fn to_f64(&self) -> Weights<f64> {
        Weights::new(self.values.iter().map(Real::to_f64).collect()).expect("finite")
    }

    /// Exact rational values of the weights.
    pub fn to_rational(&self) -> Weights<Rational> {
        Weights::new(self.values.iter().map(Real::to_rational).collect()).expect("finite")
    }

    /// Appends `count` zero weights.
    pub fn padded(&self, count: usize) -> Self {
        let mut values = self.values.clone();
        values.extend(std::iter::repeat_n(T::zero(), count));
        Weights {
            values,
            norm_sq: self.norm_sq.clone(),
        }
    }

    /// Whether the weights are in oddball order
    /// `v_n ≥ v_1 ≥ v_{n-1} ≥ v_2 ≥ v_3 ≥ … ≥ v_{n-2}` with `n ≥ 4`.
    pub fn is_canonical(&self) -> bool {
        let v = &self.values;
        let n = v.len();
        if n < 4 {
            return false;
        }
        let chain = std::iter::once(n - 1)
            .chain([0, n - 2])
            .chain(1..n - 2)
            .map(|i| &v[i])
            .collect::<Vec<_>>();
        chain.windows(2).all(|w| w[0] >= w[1])
    }
}

impl<T: Real> fmt::Display for Weights<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// A vector of ±1 signs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SignAssignment(Vec<i8>);

impl SignAssignment {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Domain("signs must be +1 or -1".into()));
        }
        Ok(SignAssignment(signs))
    }

    /// Bit `i` of `mask` set means `aᵢ = +1`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        SignAssignment(
            (0..n)
                .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    /// `Σ aᵢvᵢ` over the first `len` entries.
    pub fn partial_sum<T: Real>(&self, values: &[T], len: usize) -> T {
        self.0
            .iter()
            .zip(values)
            .take(len)
            .fold(T::zero(), |acc, (&a, v)| {
                if a > 0 {
                    acc + v.clone()
                } else {
                    acc - v.clone()
                }
            })
    }
}

/// A probability of the form `count / 2^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probability {
    pub count: u64,
    pub n: u32,
}

impl Probability {
    pub fn to_rational(&self) -> Rational {
        Rational::integer(self.count as i64) * Rational::inverse_pow2(self.n)
    }

    pub fn to_f64(&self) -> f64 {
        self.count as f64 / 2f64.powi(self.n as i32)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_rational())
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Exact law of `S`: sorted distinct values with their multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedSumDistribution<T> {
    atoms: Vec<(T, u64)>,
    n: usize,
}

impl<T: Real> SignedSumDistribution<T> {
    pub fn atoms(&self) -> &[(T, u64)] {
        &self.atoms
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `2^n`.
    pub fn total(&self) -> u64 {
        1u64 << self.n
    }

    /// Multiplicity of the atom at exactly `value` (0 if absent).
    pub fn count_at(&self, value: &T) -> u64 {
        self.atoms
            .binary_search_by(|(v, _)| v.total_cmp(value))
            .map(|i| self.atoms[i].1)
            .unwrap_or(0)
    }

    /// Number of outcomes with `|S| ≤ threshold` (`<` when strict), read off the atoms.
    pub fn count_abs_le(&self, threshold: &T, strict: bool) -> u64 {
        self.atoms
            .iter()
            .filter(|(v, _)| {
                let a = v.abs();
                if strict {
                    a < *threshold
                } else {
                    a <= *threshold
                }
            })
            .map(|(_, c)| c)
            .sum()
    }

    pub fn prob_abs_le(&self, threshold: &T, strict: bool) -> Probability {
        Probability {
            count: self.count_abs_le(threshold, strict),
            n: self.n as u32,
        }
    }

    /// `E(S^k)` computed atom by atom.
    pub fn raw_moment(&self, k: u32) -> T {
        T::atom_moment(&self.atoms, k, self.n as u32)
    }

    /// `E|S|^p` in double precision.
    pub fn abs_moment_f64(&self, p: f64) -> f64 {
        let total = self.total() as f64;
        self.atoms
            .iter()
            .map(|(v, c)| v.to_f64().abs().powf(p) * *c as f64)
            .sum::<f64>()
            / total
    }

    /// CSV with header `value,count,probability`; probabilities are exact fractions.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,count,probability\n");
        for (v, c) in &self.atoms {
            let p = Probability {
                count: *c,
                n: self.n as u32,
            };
            out.push_str(&format!("{v},{c},{p}\n"));
        }
        out
    }
}

impl<T: Real> Serialize for SignedSumDistribution<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SignedSumDistribution", 3)?;
        s.serialize_field("n", &self.n)?;
        s.serialize_field("total", &self.total())?;
        s.serialize_field("atoms", &self.atoms)?;
        s.end()
    }
}

/// Permutation that places the descending-sorted weights `u₁ ≥ u₂ ≥ …` at
/// 1-based positions `n, 1, n−1, 2, 3, …, n−2`; ties keep input order.
fn oddball_positions(n: usize) -> Vec<usize> {
    debug_assert!(n >= 4);
    let mut slots = vec![n - 1, 0, n - 2, 1];
    slots.extend(2..n - 2);
    slots
}

/// Absolute values, zero-padded to length ≥ 4, in oddball order.
pub fn canonicalize<T: Real>(w: &Weights<T>) -> Weights<T> {
    let padded = w.padded(4usize.saturating_sub(w.n()));
    let n = padded.n();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: equal weights keep their original relative order.
    order.sort_by(|&a, &b| padded.values[b].total_cmp(&padded.values[a]));
    let slots = oddball_positions(n);
    let mut values = vec![T::zero(); n];
    for (rank, &src) in order.iter().enumerate() {
        values[slots[rank]] = padded.values[src].clone();
    }
    Weights {
        values,
        norm_sq: padded.norm_sq,
    }
}

struct Distribution {
    n: usize,
}

impl<T: Real> LatticeVisitor<T> for Distribution {
    type Output = SignedSumDistribution<T>;
    fn visit<K: Key>(self, lattice: Lattice<K>, lift: &(dyn Fn(&K) -> T + Sync)) -> Self::Output {
        let atoms = mitm::convolve(&lattice.values)
            .into_iter()
            .map(|(k, c)| (lift(&k), c))
            .collect();
        SignedSumDistribution { atoms, n: self.n }
    }
}

/// Full probability mass function of `S` by direct enumeration.
pub fn exact_distribution<T: Real>(w: &Weights<T>) -> Result<SignedSumDistribution<T>> {
    if w.n() > MAX_EXACT_N {
        return Err(Error::SizeLimit {
            what: "exact_distribution",
            n: w.n(),
            limit: MAX_EXACT_N,
        });
    }
    Ok(T::embed(w.values(), &[], Distribution { n: w.n() }))
}

pub(crate) struct Count {
    pub strict: bool,
}

impl<T: Real> LatticeVisitor<T> for Count {
    type Output = u64;
    /// `extras = [offset, threshold]`.
    fn visit<K: Key>(self, lattice: Lattice<K>, _: &(dyn Fn(&K) -> T + Sync)) -> u64 {
        mitm::count_abs_within(
            &lattice.values,
            &lattice.extras[0],
            &lattice.extras[1],
            self.strict,
        )
    }
}

fn check_threshold<T: Real>(threshold: &T) -> Result<()> {
    if !threshold.is_finite() || *threshold < T::zero() {
        return Err(Error::Domain(format!(
            "threshold must be ≥ 0, got {threshold}"
        )));
    }
    Ok(())
}

/// Sign vectors (out of `2^n`) with `|offset + S| ≤ threshold`, by MITM on the
/// canonicalized weights. Zero padding is divided back out.
fn mitm_count<T: Real>(
    w: &Weights<T>,
    offset: &T,
    threshold: &T,
    strict: bool,
) -> Result<Probability> {
    if w.n() > MAX_MITM_N {
        return Err(Error::SizeLimit {
            what: "meet-in-the-middle count",
            n: w.n(),
            limit: MAX_MITM_N,
        });
    }
    check_threshold(threshold)?;
    let canon = canonicalize(w);
    let pad = canon.n() - w.n();
    let count = T::embed(
        canon.values(),
        &[offset.clone(), threshold.clone()],
        Count { strict },
    );
    Ok(Probability {
        count: count >> pad,
        n: w.n() as u32,
    })
}

/// `Pr[|S| ≤ threshold]`, or `Pr[|S| < threshold]` when `strict`.
pub fn prob_abs_le<T: Real>(w: &Weights<T>, threshold: &T, strict: bool) -> Result<Probability> {
    mitm_count(w, &T::zero(), threshold, strict)
}

/// `Pr[|x + Y| ≤ threshold]` with `Y = Σ aᵢvᵢ`.
pub fn shifted_prob<T: Real>(x: &T, w: &Weights<T>, threshold: &T) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::Domain("shift must be finite".into()));
    }
    mitm_count(w, x, threshold, false)
}
