//! Numeric modes.
//!
//! Every algorithm is generic over [`Real`], implemented by [`Rational`]
//! (exact) and `f64` (raw IEEE comparisons, no tolerance). Heavy enumeration
//! does not run on `Real` values directly: the weights are first embedded in a
//! lattice of [`Key`] values. Rationals are scaled by their common denominator
//! into `i128` (or `BigInt` when the scaled values would overflow), so every
//! comparison stays exact and cheap. Doubles embed as themselves.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::rational::Rational;

/// Relative slack used for float-mode consistency checks (never for |S| ≤ t).
pub const FLOAT_CHECK_TOLERANCE: f64 = 1e-12;

pub trait Real:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Send
    + Sync
    + Serialize
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// `true` for the exact rational mode.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(value: &Rational) -> Self;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact value as a rational (doubles convert to their binary value).
    fn to_rational(&self) -> Rational;
    fn total_cmp(&self, other: &Self) -> Ordering;
    fn is_finite(&self) -> bool;

    /// `self ≤ other`, exactly in rational mode and within
    /// [`FLOAT_CHECK_TOLERANCE`] relative slack in float mode.
    fn le_checked(&self, other: &Self) -> bool;

    /// Embeds `values` and `extras` into a common lattice and runs `visitor` on it.
    fn embed<V: LatticeVisitor<Self>>(values: &[Self], extras: &[Self], visitor: V) -> V::Output;

    /// `Σ count·value^k / 2^n` over distribution atoms.
    fn atom_moment(atoms: &[(Self, u64)], k: u32, n: u32) -> Self;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        Self::from_rational(&Rational::new(numer, denom))
    }
}

/// Element type of an embedded weight lattice.
pub trait Key:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn abs(&self) -> Self;
    fn total_cmp(&self, other: &Self) -> Ordering;
}

impl Key for i128 {
    fn zero() -> Self {
        0
    }
    fn abs(&self) -> Self {
        i128::abs(*self)
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

impl Key for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

impl Key for f64 {
    fn zero() -> Self {
        0.0
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }
}

/// Scaled weights plus auxiliary scalars (thresholds, offsets) in the same lattice.
#[derive(Clone, Debug)]
pub struct Lattice<K> {
    pub values: Vec<K>,
    pub extras: Vec<K>,
}

/// A computation that is generic over the lattice key type.
///
/// `lift` maps a lattice element back to the caller's numeric mode.
pub trait LatticeVisitor<T: Real> {
    type Output;
    fn visit<K: Key>(self, lattice: Lattice<K>, lift: &(dyn Fn(&K) -> T + Sync)) -> Self::Output;
}

impl Real for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Rational::zero()
    }
    fn one() -> Self {
        Rational::one()
    }
    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }
    fn abs(&self) -> Self {
        Rational::abs(self)
    }
    fn to_f64(&self) -> f64 {
        Rational::to_f64(self)
    }
    fn to_rational(&self) -> Rational {
        self.clone()
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn is_finite(&self) -> bool {
        true
    }
    fn le_checked(&self, other: &Self) -> bool {
        self <= other
    }

    fn atom_moment(atoms: &[(Self, u64)], k: u32, n: u32) -> Self {
        // One shared denominator keeps the accumulation in integers.
        let denom = Rational::common_denominator(atoms.iter().map(|(v, _)| v));
        let sum = atoms.iter().fold(<BigInt as Zero>::zero(), |acc, (v, c)| {
            let scaled = v.numer() * (&denom / v.denom());
            acc + num_traits::pow(scaled, k as usize) * BigInt::from(*c)
        });
        Rational::from_bigints(sum, num_traits::pow(denom, k as usize) << n)
    }

    fn embed<V: LatticeVisitor<Self>>(values: &[Self], extras: &[Self], visitor: V) -> V::Output {
        let denom = Rational::common_denominator(values.iter().chain(extras));
        let scale = |r: &Rational| -> BigInt { r.numer() * (&denom / r.denom()) };
        let big_values: Vec<BigInt> = values.iter().map(scale).collect();
        let big_extras: Vec<BigInt> = extras.iter().map(scale).collect();
        // Any signed combination of the lattice elements stays below 2^126.
        let total_bits = big_values
            .iter()
            .chain(&big_extras)
            .fold(<BigInt as Zero>::zero(), |acc, v| acc + Signed::abs(v))
            .bits();
        if total_bits < 126 {
            let narrow = |v: &BigInt| -> i128 { i128::try_from(v).expect("checked bit width") };
            let lattice = Lattice {
                values: big_values.iter().map(narrow).collect(),
                extras: big_extras.iter().map(narrow).collect(),
            };
            let lift = |k: &i128| Rational::from_bigints(BigInt::from(*k), denom.clone());
            visitor.visit(lattice, &lift)
        } else {
            let lattice = Lattice {
                values: big_values,
                extras: big_extras,
            };
            let lift = |k: &BigInt| Rational::from_bigints(k.clone(), denom.clone());
            visitor.visit(lattice, &lift)
        }
    }
}

impl Real for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(value: &Rational) -> Self {
        value.to_f64()
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_rational(&self) -> Rational {
        Rational::from_f64(*self).expect("finite double")
    }
    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn le_checked(&self, other: &Self) -> bool {
        *self <= *other + FLOAT_CHECK_TOLERANCE * f64::abs(*other).max(1.0)
    }

    fn atom_moment(atoms: &[(Self, u64)], k: u32, n: u32) -> Self {
        let sum: f64 = atoms
            .iter()
            .map(|(v, c)| v.powi(k as i32) * *c as f64)
            .sum();
        sum / 2f64.powi(n as i32)
    }

    fn embed<V: LatticeVisitor<Self>>(values: &[Self], extras: &[Self], visitor: V) -> V::Output {
        let lattice = Lattice {
            values: values.to_vec(),
            extras: extras.to_vec(),
        };
        visitor.visit(lattice, &|k: &f64| *k)
    }
}
