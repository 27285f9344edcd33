//! The stopping-time decomposition: prefix sums `M_t`, the spread parameter
//! `K`, the stopping time `T`, and the exact law of `T` with the conditional
//! success probabilities `Pr[|S| ≤ 1 | T = t]`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::{SignAssignment, Weights};
use crate::error::{Error, Result};
use crate::mitm::{self, merge_sorted};
use crate::rational::Rational;
use crate::real::{Key, Lattice, LatticeVisitor, Real};

/// Largest `n` accepted by [`t_profile`].
pub const MAX_PROFILE_N: usize = 40;

/// Smallest `t` with `t = n − 1` or `M_t > 1 − v_{t+1}`, `M_t = Σ_{i≤t} vᵢ`.
pub fn compute_k<T: Real>(w: &Weights<T>) -> Result<usize> {
    if !w.is_canonical() {
        return Err(Error::NotCanonical);
    }
    let v = w.values();
    let n = v.len();
    let mut prefix = T::zero();
    for (t, vt) in v.iter().enumerate() {
        if t == n - 1 || prefix > T::one() - vt.clone() {
            return Ok(t);
        }
        prefix = prefix + vt.clone();
    }
    unreachable!("loop returns at t = n - 1")
}

/// Smallest `t` with `t = n − 1` or `|X_t| > 1 − v_{t+1}`, together with `X_T`.
pub fn compute_t<T: Real>(w: &Weights<T>, signs: &SignAssignment) -> Result<(usize, T)> {
    let v = w.values();
    let n = v.len();
    if signs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: signs.len(),
        });
    }
    if n == 0 {
        return Err(Error::Domain(
            "stopping time needs at least one weight".into(),
        ));
    }
    let mut x = T::zero();
    for (t, &a) in signs.signs().iter().enumerate() {
        if t == n - 1 || x.abs() > T::one() - v[t].clone() {
            return Ok((t, x));
        }
        x = if a > 0 {
            x + v[t].clone()
        } else {
            x - v[t].clone()
        };
    }
    unreachable!("loop returns at t = n - 1")
}

/// The proof case covering stopping time `T` for spread `K` and length `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    /// `T = n − 1`.
    LastStep = 1,
    /// `T = n − 2`.
    SecondToLast = 2,
    /// `K + 1 ≤ T ≤ (3K+2)/2`, `T ≤ n − 3`.
    Rising = 3,
    /// `(3K+2)/2 < T ≤ n − 3`.
    Flat = 4,
    /// `T = K ≤ n − 3`.
    Immediate = 5,
}

impl Case {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl Serialize for Case {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.number())
    }
}

/// Case label for `(T, K, n)`. At `2T = 3K + 2` the rising and flat bounds
/// coincide; that boundary is reported as [`Case::Rising`].
pub fn case_of(t: usize, k: usize, n: usize) -> Result<Case> {
    if t < k {
        return Err(Error::Inconsistent { t, k });
    }
    if t + 1 > n {
        return Err(Error::Domain(format!(
            "T = {t} exceeds n − 1 = {}",
            n as i64 - 1
        )));
    }
    Ok(if t == n - 1 {
        Case::LastStep
    } else if t == n - 2 {
        Case::SecondToLast
    } else if t == k {
        Case::Immediate
    } else if 2 * t <= 3 * k + 2 {
        Case::Rising
    } else {
        Case::Flat
    })
}

/// Exact law of the stopping time and the conditional success probabilities.
#[derive(Clone, Debug, Serialize)]
pub struct StoppingProfile {
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub t_distribution: BTreeMap<usize, Rational>,
    pub conditional_success: BTreeMap<usize, Rational>,
    pub overall: Rational,
    /// Whether `Pr[T = K] = 2^{1−K}`, `Pr[T = K+1] = 0`, and `T = K` exactly
    /// when the first `K` signs agree. `None` unless `K ≤ n − 4`.
    pub dichotomy: Option<bool>,
    /// Number of sign vectors (out of `2^n`) with each stopping time.
    #[serde(skip)]
    pub t_counts: BTreeMap<usize, u64>,
    /// Number of sign vectors with each stopping time and `|S| ≤ 1`.
    #[serde(skip)]
    pub success_counts: BTreeMap<usize, u64>,
}

impl StoppingProfile {
    pub fn prob_t(&self, t: usize) -> Rational {
        self.t_distribution
            .get(&t)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }
}

struct Enumerate {
    k: usize,
}

struct Tally {
    t_counts: BTreeMap<usize, u64>,
    success_counts: BTreeMap<usize, u64>,
    first_signs_ok: Option<bool>,
}

impl<T: Real> LatticeVisitor<T> for Enumerate {
    type Output = Result<Tally>;

    /// `extras = [1]`.
    fn visit<K: Key>(self, lattice: Lattice<K>, _: &(dyn Fn(&K) -> T + Sync)) -> Result<Tally> {
        let v = &lattice.values;
        let one = &lattice.extras[0];
        let n = v.len();

        // Breadth-first over prefixes, merging equal partial sums.
        let mut states = vec![(K::zero(), 1u64)];
        let mut stopped: Vec<(usize, K, u64)> = Vec::new();
        for (t, vt) in v.iter().enumerate() {
            let limit = one.clone() - vt.clone();
            let mut next = Vec::with_capacity(states.len() * 2);
            for (x, m) in states {
                if t == n - 1 || x.abs() > limit {
                    stopped.push((t, x, m));
                } else {
                    next.push((x.clone() - vt.clone(), m));
                    next.push((x + vt.clone(), m));
                }
            }
            next.sort_by(|a, b| a.0.total_cmp(&b.0));
            states = merge_sorted(next);
        }

        for (t, x, _) in &stopped {
            if *t < self.k {
                return Err(Error::Inconsistent { t: *t, k: self.k });
            }
            if x.abs() > *one {
                return Err(Error::InvariantViolated(format!("|X_T| > 1 at T = {t}")));
            }
        }

        let successes: Vec<(usize, u64)> = stopped
            .par_iter()
            .map(|(t, x, m)| (*t, m * mitm::count_abs_within(&v[*t..], x, one, false)))
            .collect();

        let mut t_counts = BTreeMap::new();
        let mut success_counts = BTreeMap::new();
        for ((t, _, m), (_, s)) in stopped.iter().zip(&successes) {
            *t_counts.entry(*t).or_insert(0u64) += m << (n - t);
            *success_counts.entry(*t).or_insert(0u64) += s;
        }

        let first_signs_ok =
            (n >= 4 && self.k + 4 <= n).then(|| first_signs_characterize(v, one, self.k));
        Ok(Tally {
            t_counts,
            success_counts,
            first_signs_ok,
        })
    }
}

/// Over every prefix of `K + 1` signs: the rule trips at `K` iff the first
/// `K` signs agree, never trips before `K`, and never trips at `K + 1`.
fn first_signs_characterize<K: Key>(v: &[K], one: &K, k: usize) -> bool {
    fn walk<K: Key>(
        v: &[K],
        one: &K,
        k: usize,
        t: usize,
        x: K,
        all_equal: bool,
        first: i8,
    ) -> bool {
        let trips = x.abs() > one.clone() - v[t].clone();
        if t < k {
            if trips {
                return false;
            }
            let step = |sign: i8| {
                let next = if sign > 0 {
                    x.clone() + v[t].clone()
                } else {
                    x.clone() - v[t].clone()
                };
                let first = if t == 0 { sign } else { first };
                walk(
                    v,
                    one,
                    k,
                    t + 1,
                    next,
                    all_equal && (t == 0 || sign == first),
                    first,
                )
            };
            return step(1) && step(-1);
        }
        if t == k {
            if trips != all_equal {
                return false;
            }
            if trips {
                return true;
            }
            return walk(v, one, k, t + 1, x.clone() + v[t].clone(), false, first)
                && walk(v, one, k, t + 1, x - v[t].clone(), false, first);
        }
        // t == k + 1
        !trips
    }
    walk(v, one, k, 0, K::zero(), true, 0)
}

/// Exact law of `T` and conditional success probabilities for the
/// canonicalized weights `w`.
pub fn t_profile<T: Real>(w: &Weights<T>) -> Result<StoppingProfile> {
    let n = w.n();
    if n > MAX_PROFILE_N {
        return Err(Error::SizeLimit {
            what: "t_profile",
            n,
            limit: MAX_PROFILE_N,
        });
    }
    let k = compute_k(w)?;
    let tally = T::embed(w.values(), &[T::one()], Enumerate { k })?;

    let total = Rational::inverse_pow2(n as u32);
    let t_distribution = tally
        .t_counts
        .iter()
        .map(|(&t, &c)| (t, Rational::integer(c as i64) * &total))
        .collect();
    let conditional_success = tally
        .t_counts
        .iter()
        .map(|(&t, &c)| (t, Rational::new(tally.success_counts[&t] as i64, c as i64)))
        .collect();
    let overall = Rational::integer(tally.success_counts.values().sum::<u64>() as i64) * &total;

    let dichotomy = tally.first_signs_ok.map(|first_ok| {
        let at_k = tally.t_counts.get(&k).copied().unwrap_or(0);
        let at_k1 = tally.t_counts.get(&(k + 1)).copied().unwrap_or(0);
        first_ok && at_k == 1u64 << (n + 1 - k) && at_k1 == 0
    });

    Ok(StoppingProfile {
        k,
        n,
        t_distribution,
        conditional_success,
        overall,
        dichotomy,
        t_counts: tally.t_counts,
        success_counts: tally.success_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{canonicalize, prob_abs_le};

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn rw(v: &[(i64, i64)]) -> Weights<Rational> {
        Weights::new(v.iter().map(|&(n, d)| q(n, d)).collect()).unwrap()
    }

    fn signs(s: &[i8]) -> SignAssignment {
        SignAssignment::new(s.to_vec()).unwrap()
    }

    #[test]
    fn k_examples() {
        assert_eq!(compute_k(&rw(&[(1, 2); 4])).unwrap(), 2);
        assert_eq!(compute_k(&rw(&[(1, 4); 16])).unwrap(), 4);
        assert_eq!(
            compute_k(&rw(&[(3, 5), (0, 1), (0, 1), (4, 5)])).unwrap(),
            3
        );
    }

    #[test]
    fn k_requires_canonical_order() {
        assert_eq!(
            compute_k(&rw(&[(4, 5), (3, 5), (0, 1), (0, 1)])),
            Err(Error::NotCanonical)
        );
        assert_eq!(compute_k(&rw(&[(1, 2)])), Err(Error::NotCanonical));
    }

    #[test]
    fn k_of_zero_weights_is_last_index() {
        let w = canonicalize(&Weights::<Rational>::empty().padded(6));
        assert_eq!(compute_k(&w).unwrap(), 5);
        let p = t_profile(&w).unwrap();
        assert_eq!(p.prob_t(5), q(1, 1));
        assert_eq!(p.overall, q(1, 1));
    }

    #[test]
    fn t_examples() {
        let w = rw(&[(1, 2); 4]);
        assert_eq!(compute_t(&w, &signs(&[1, 1, 1, 1])).unwrap(), (2, q(1, 1)));
        assert_eq!(compute_t(&w, &signs(&[1, -1, 1, 1])).unwrap(), (3, q(1, 2)));
        let w = rw(&[(3, 5), (0, 1), (0, 1), (4, 5)]);
        for mask in 0..16 {
            let (t, x) = compute_t(&w, &SignAssignment::from_mask(4, mask)).unwrap();
            assert_eq!(t, 3);
            assert_eq!(x.abs(), q(3, 5));
        }
        assert!(matches!(
            compute_t(&w, &signs(&[1, 1])),
            Err(Error::LengthMismatch {
                expected: 4,
                got: 2
            })
        ));
    }

    #[test]
    fn profile_of_four_halves() {
        let p = t_profile(&rw(&[(1, 2); 4])).unwrap();
        assert_eq!(p.k, 2);
        assert_eq!(p.prob_t(2), q(1, 2));
        assert_eq!(p.prob_t(3), q(1, 2));
        assert_eq!(p.conditional_success[&2], q(3, 4));
        assert_eq!(p.conditional_success[&3], q(1, 1));
        assert_eq!(p.overall, q(7, 8));
        assert_eq!(p.dichotomy, None);
    }

    #[test]
    fn profile_of_sixteen_quarters() {
        let p = t_profile(&rw(&[(1, 4); 16])).unwrap();
        assert_eq!(p.k, 4);
        assert_eq!(p.prob_t(4), q(1, 8));
        assert_eq!(p.prob_t(5), q(0, 1));
        assert_eq!(p.dichotomy, Some(true));
        let direct = prob_abs_le(&rw(&[(1, 4); 16]), &q(1, 1), false).unwrap();
        assert_eq!(p.overall, direct.to_rational());
    }

    #[test]
    fn profile_of_single_weight() {
        let w = canonicalize(&rw(&[(1, 1)]));
        assert_eq!(w.values(), &[q(0, 1), q(0, 1), q(0, 1), q(1, 1)]);
        let p = t_profile(&w).unwrap();
        assert_eq!(p.prob_t(3), q(1, 1));
        assert_eq!(p.overall, q(1, 1));
    }

    #[test]
    fn profile_matches_per_vector_enumeration() {
        let w = canonicalize(&rw(&[
            (1, 3),
            (1, 4),
            (1, 5),
            (2, 7),
            (1, 6),
            (1, 9),
            (1, 8),
        ]));
        let n = w.n();
        let k = compute_k(&w).unwrap();
        let mut t_counts = BTreeMap::new();
        let mut success = BTreeMap::new();
        for mask in 0..1u64 << n {
            let s = SignAssignment::from_mask(n, mask);
            let (t, x) = compute_t(&w, &s).unwrap();
            assert!(t >= k);
            assert!(x.abs() <= q(1, 1));
            *t_counts.entry(t).or_insert(0u64) += 1;
            if s.partial_sum(w.values(), n).abs() <= q(1, 1) {
                *success.entry(t).or_insert(0u64) += 1;
            }
        }
        let p = t_profile(&w).unwrap();
        assert_eq!(p.t_counts, t_counts);
        for (t, c) in &t_counts {
            assert_eq!(
                p.success_counts.get(t).copied().unwrap_or(0),
                success.get(t).copied().unwrap_or(0)
            );
            assert!(*c > 0);
        }
    }

    #[test]
    fn case_examples() {
        assert_eq!(case_of(9, 2, 10).unwrap(), Case::LastStep);
        assert_eq!(case_of(8, 2, 10).unwrap(), Case::SecondToLast);
        assert_eq!(case_of(4, 2, 10).unwrap(), Case::Rising);
        assert_eq!(case_of(5, 2, 10).unwrap(), Case::Flat);
        assert_eq!(case_of(2, 2, 10).unwrap(), Case::Immediate);
        assert_eq!(case_of(3, 2, 10).unwrap(), Case::Rising);
        assert_eq!(case_of(1, 2, 10), Err(Error::Inconsistent { t: 1, k: 2 }));
        assert!(case_of(10, 2, 10).is_err());
    }

    #[test]
    fn profile_serializes_with_fraction_strings() {
        let p = t_profile(&rw(&[(1, 2); 4])).unwrap();
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(json["K"], 2);
        assert_eq!(json["t_distribution"]["2"], "1/2");
        assert_eq!(json["conditional_success"]["2"], "3/4");
        assert_eq!(json["overall"], "7/8");
    }
}
