//! Enumeration kernels over an embedded lattice: half-sum tables, the
//! two-pointer window count, and atom-merging convolution.

use crate::real::Key;

/// Above this table size the two half enumerations run on separate threads.
const PARALLEL_HALF: usize = 1 << 12;

/// All `2^len` values `start + Σ ±values[i]`, in a fixed deterministic order.
pub(crate) fn half_sums<K: Key>(start: K, values: &[K]) -> Vec<K> {
    let mut sums = Vec::with_capacity(1 << values.len());
    sums.push(start);
    for v in values {
        let len = sums.len();
        for i in 0..len {
            let s = sums[i].clone();
            sums.push(s.clone() + v.clone());
            sums[i] = s - v.clone();
        }
    }
    sums
}

fn sorted<K: Key>(mut v: Vec<K>) -> Vec<K> {
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    v
}

/// Number of pairs `(l, r)` with `l + r` inside the window.
///
/// `fits_upper(s)` must be monotone (true on a prefix of sorted sums) and
/// `below_lower(s)` likewise; the window is `fits_upper && !below_lower`.
/// Floating-point addition is monotone in each argument, so the sweep stays
/// exact with respect to the computed sums in float mode too.
pub(crate) fn count_window<K: Key>(
    left: &[K],
    right: &[K],
    fits_upper: impl Fn(&K) -> bool,
    below_lower: impl Fn(&K) -> bool,
) -> u64 {
    let mut hi = right.len();
    let mut lo = right.len();
    let mut count = 0u64;
    for l in left {
        while hi > 0 && !fits_upper(&(l.clone() + right[hi - 1].clone())) {
            hi -= 1;
        }
        while lo > 0 && !below_lower(&(l.clone() + right[lo - 1].clone())) {
            lo -= 1;
        }
        count += hi.saturating_sub(lo) as u64;
    }
    count
}

/// Number of sign vectors with `|offset + Σ ±values[i]| ≤ threshold`
/// (`<` when `strict`), by meet-in-the-middle on the first `⌈n/2⌉` values
/// versus the rest.
pub(crate) fn count_abs_within<K: Key>(
    values: &[K],
    offset: &K,
    threshold: &K,
    strict: bool,
) -> u64 {
    let split = values.len().div_ceil(2);
    let (first, rest) = values.split_at(split);
    let build_left = || sorted(half_sums(offset.clone(), first));
    let build_right = || sorted(half_sums(K::zero(), rest));
    let (left, right) = if (1usize << split) >= PARALLEL_HALF {
        rayon::join(build_left, build_right)
    } else {
        (build_left(), build_right())
    };
    let neg = -threshold.clone();
    if strict {
        count_window(&left, &right, |s| *s < *threshold, |s| *s <= neg)
    } else {
        count_window(&left, &right, |s| *s <= *threshold, |s| *s < neg)
    }
}

/// Exact multiset `{Σ ±values[i]}` as sorted `(value, multiplicity)` atoms,
/// summing in index order and merging equal values after each step.
pub(crate) fn convolve<K: Key>(values: &[K]) -> Vec<(K, u64)> {
    let mut atoms = vec![(K::zero(), 1u64)];
    for v in values {
        let mut next = Vec::with_capacity(atoms.len() * 2);
        for (s, c) in &atoms {
            next.push((s.clone() - v.clone(), *c));
            next.push((s.clone() + v.clone(), *c));
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms = merge_sorted(next);
    }
    atoms
}

/// Merges adjacent equal keys of a sorted atom list.
pub(crate) fn merge_sorted<K: Key>(sorted: Vec<(K, u64)>) -> Vec<(K, u64)> {
    let mut out: Vec<(K, u64)> = Vec::with_capacity(sorted.len());
    for (k, c) in sorted {
        match out.last_mut() {
            Some((last, lc)) if last.total_cmp(&k).is_eq() => *lc += c,
            _ => out.push((k, c)),
        }
    }
    out
}
