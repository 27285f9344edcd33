//! Per-instance certified lower bounds on `Pr[|S| ≤ 1]` via the stopping-time
//! case analysis, and the global checks of the 13/32 constant.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::distribution::{canonicalize, prob_abs_le, shifted_prob, Weights, MAX_MITM_N};
use crate::error::{Error, Result};
use crate::moments::{bound_f, bound_g};
use crate::rational::Rational;
use crate::real::Real;
use crate::stopping::{case_of, compute_k, t_profile, Case, MAX_PROFILE_N};

/// Which conditional bound function drives the certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundMode {
    /// `F(c) = ½(1 − 3c²)`, from the fourth moment.
    F,
    /// `G(c) = ½(1 − B_p c^{p/2})`, from the p-th moment. Experimental.
    G { p: f64 },
}

impl BoundMode {
    pub fn eval(&self, c: &Rational) -> Result<BoundValue> {
        match self {
            BoundMode::F => Ok(BoundValue::Exact(bound_f(c))),
            BoundMode::G { p } => Ok(BoundValue::Approx(bound_g(c.to_f64(), *p)?)),
        }
    }

    pub fn is_experimental(&self) -> bool {
        matches!(self, BoundMode::G { .. })
    }
}

impl fmt::Display for BoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundMode::F => write!(f, "F"),
            BoundMode::G { p } => write!(f, "G({p})"),
        }
    }
}

impl Serialize for BoundMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// A bound value: exact in F-mode, a double in G-mode.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundValue {
    Exact(Rational),
    Approx(f64),
}

impl BoundValue {
    pub fn half() -> Self {
        BoundValue::Exact(Rational::new(1, 2))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            BoundValue::Exact(r) => r.to_f64(),
            BoundValue::Approx(x) => *x,
        }
    }

    /// `self ≤ other`; exact when `self` is exact.
    pub fn le(&self, other: &Rational) -> bool {
        match self {
            BoundValue::Exact(r) => r <= other,
            BoundValue::Approx(x) => *x <= other.to_f64(),
        }
    }

    /// `self > other`; exact when `self` is exact.
    pub fn gt(&self, other: &Rational) -> bool {
        !self.le(other)
    }

    fn combine(weight: &Rational, a: &BoundValue, b: &BoundValue) -> BoundValue {
        let rest = Rational::one() - weight;
        match (a, b) {
            (BoundValue::Exact(a), BoundValue::Exact(b)) => {
                BoundValue::Exact(weight * a + &rest * b)
            }
            _ => BoundValue::Approx(weight.to_f64() * a.to_f64() + rest.to_f64() * b.to_f64()),
        }
    }
}

impl fmt::Display for BoundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundValue::Exact(r) => write!(f, "{r}"),
            BoundValue::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for BoundValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BoundValue::Exact(r) => r.serialize(serializer),
            BoundValue::Approx(x) => serializer.serialize_f64(*x),
        }
    }
}

/// Whether `Σvᵢ² ≤ c(1 + |x|)²`.
pub fn lemma_hypothesis<T: Real>(x: &T, w: &Weights<T>, c: &T) -> Result<bool> {
    if x.abs() > T::one() {
        return Err(Error::Domain(format!("|x| must be ≤ 1, got {x}")));
    }
    if *c < T::zero() {
        return Err(Error::Domain(format!("c must be ≥ 0, got {c}")));
    }
    let shifted = T::one() + x.abs();
    Ok(*w.norm_sq() <= c.clone() * shifted.clone() * shifted)
}

/// `c = ((K+1)² − T)/(2K+1)²` on the rising piece, `K/(4K+2)` on the flat piece.
pub fn piece_c(k: usize, t: usize) -> Rational {
    let (k, t) = (k as i64, t as i64);
    if 2 * t <= 3 * k + 2 {
        Rational::new((k + 1) * (k + 1) - t, (2 * k + 1) * (2 * k + 1))
    } else {
        Rational::new(k, 4 * k + 2)
    }
}

/// The two-piece conditional lower bound on `Pr[|S| ≤ 1 | T]`. With `n`
/// supplied, `T ≥ n − 2` yields ½.
pub fn two_piece_bound(
    k: usize,
    t: usize,
    mode: BoundMode,
    n: Option<usize>,
) -> Result<BoundValue> {
    if k < 2 {
        return Err(Error::Domain(format!("K must be ≥ 2, got {k}")));
    }
    if t < k {
        return Err(Error::Inconsistent { t, k });
    }
    if let Some(n) = n {
        if t + 2 >= n {
            return Ok(BoundValue::half());
        }
    }
    mode.eval(&piece_c(k, t))
}

/// `2^{1−K} B(c(K,K)) + (1 − 2^{1−K}) B(c(K,K+2))`.
pub fn weighted_bound(k: usize, mode: BoundMode) -> Result<BoundValue> {
    let weight = Rational::inverse_pow2(k as u32 - 1);
    let at_k = two_piece_bound(k, k, mode, None)?;
    let beyond = two_piece_bound(k, k + 2, mode, None)?;
    Ok(BoundValue::combine(&weight, &at_k, &beyond))
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchBound {
    pub case: Case,
    /// `None` in the last two steps, where the bound is ½ directly.
    pub c: Option<Rational>,
    pub bound: BoundValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCertificate<T> {
    pub instance: Weights<T>,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub branch_bounds: BTreeMap<usize, BranchBound>,
    pub certified: BoundValue,
    pub exact: Option<Rational>,
    pub mode: BoundMode,
    pub experimental: bool,
    /// `certified ≤ exact`, when `exact` was computed.
    pub sound: Option<bool>,
    /// `Σ_t Pr[T = t]·two_piece_bound(K, t)` from the exact law of `T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<BoundValue>,
}

/// Certified lower bound for one instance with `Σvᵢ² ≤ 1`.
pub fn certify_instance<T: Real>(w: &Weights<T>, mode: BoundMode) -> Result<BoundCertificate<T>> {
    if !w.is_tomaszewski() {
        return Err(Error::InvalidWeights(format!(
            "Σv² = {} exceeds 1",
            w.norm_sq()
        )));
    }
    let canon = canonicalize(w);
    let n = canon.n();
    let k = compute_k(&canon)?;

    let mut branch_bounds = BTreeMap::new();
    for t in k..n {
        let case = case_of(t, k, n)?;
        let (c, bound) = match case {
            Case::LastStep | Case::SecondToLast => (None, BoundValue::half()),
            _ if k < 2 => {
                return Err(Error::InvariantViolated(format!(
                    "K = {k} < 2 with Σv² ≤ 1"
                )))
            }
            _ => (Some(piece_c(k, t)), two_piece_bound(k, t, mode, Some(n))?),
        };
        branch_bounds.insert(t, BranchBound { case, c, bound });
    }

    let certified = if k + 2 >= n {
        BoundValue::half()
    } else {
        weighted_bound(k, mode)?
    };

    let exact = if w.n() <= MAX_MITM_N {
        Some(prob_abs_le(w, &T::one(), false)?.to_rational())
    } else {
        None
    };
    let sound = exact.as_ref().map(|e| certified.le(e));

    Ok(BoundCertificate {
        instance: canon,
        k,
        n,
        branch_bounds,
        certified,
        exact,
        mode,
        experimental: mode.is_experimental(),
        sound,
        diagnostic: None,
    })
}

/// [`certify_instance`] plus the sharper average over the exact law of `T`.
pub fn certify_with_diagnostic<T: Real>(
    w: &Weights<T>,
    mode: BoundMode,
) -> Result<BoundCertificate<T>> {
    let mut cert = certify_instance(w, mode)?;
    if cert.n <= MAX_PROFILE_N {
        let profile = t_profile(&cert.instance)?;
        let mut exact_sum = Rational::zero();
        let mut approx_sum = 0.0;
        let mut all_exact = true;
        for (t, p) in &profile.t_distribution {
            match &cert.branch_bounds[t].bound {
                BoundValue::Exact(b) => exact_sum = exact_sum + p * b,
                BoundValue::Approx(b) => {
                    all_exact = false;
                    approx_sum += p.to_f64() * b;
                }
            }
        }
        cert.diagnostic = Some(if all_exact {
            BoundValue::Exact(exact_sum)
        } else {
            BoundValue::Approx(exact_sum.to_f64() + approx_sum)
        });
    }
    Ok(cert)
}

fn display_string<S: Serializer, D: fmt::Display>(
    value: &D,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_str(value)
}

/// One row of the global check for a fixed `K`.
#[derive(Clone, Debug, Serialize)]
pub struct GlobalRow {
    #[serde(rename = "K")]
    pub k: usize,
    /// `64(K² + K)`.
    #[serde(serialize_with = "display_string")]
    pub lhs: BigInt,
    /// `2^{K−1}(40K² + 40K − 15)`.
    #[serde(serialize_with = "display_string")]
    pub rhs: BigInt,
    pub integer_holds: bool,
    pub weighted: Rational,
    /// `weighted − 13/32`.
    pub margin: Rational,
    pub weighted_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlobalReport {
    pub rows: Vec<GlobalRow>,
    /// `K` at which the weighted combination is smallest.
    #[serde(rename = "argmin_K")]
    pub argmin_k: usize,
    pub min_weighted: Rational,
    pub all_hold: bool,
}

/// Checks, for every `K ∈ [2, k_max]`, that the weighted F-combination exceeds
/// 13/32 and that the equivalent integer inequality holds.
pub fn verify_global(k_max: usize) -> Result<GlobalReport> {
    if k_max < 2 {
        return Err(Error::Domain(format!("K_max must be ≥ 2, got {k_max}")));
    }
    let target = Rational::new(13, 32);
    let mut rows = Vec::with_capacity(k_max - 1);
    for k in 2..=k_max {
        let kb = BigInt::from(k);
        let lhs = BigInt::from(64) * (&kb * &kb + &kb);
        let rhs = (BigInt::from(1) << (k - 1))
            * (BigInt::from(40) * &kb * &kb + BigInt::from(40) * &kb - 15);
        let weighted = match weighted_bound(k, BoundMode::F)? {
            BoundValue::Exact(r) => r,
            BoundValue::Approx(_) => unreachable!("F-mode is exact"),
        };
        let margin = &weighted - &target;
        rows.push(GlobalRow {
            k,
            integer_holds: lhs < rhs,
            lhs,
            rhs,
            weighted_holds: !margin.is_negative() && !margin.is_zero(),
            weighted,
            margin,
        });
    }
    let argmin = rows
        .iter()
        .min_by(|a, b| a.weighted.cmp(&b.weighted))
        .expect("k_max ≥ 2");
    Ok(GlobalReport {
        argmin_k: argmin.k,
        min_weighted: argmin.weighted.clone(),
        all_hold: rows.iter().all(|r| r.integer_holds && r.weighted_holds),
        rows,
    })
}

/// `G(1/4)` at exponent `p`.
pub fn improved_constant(p: f64) -> Result<f64> {
    bound_g(0.25, p)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub best_p: f64,
    pub best_value: f64,
    /// `best_value − (13/32 + 9e-6)`.
    pub margin: f64,
    pub grid: Vec<(f64, f64)>,
}

/// The refined-constant target `13/32 + 9·10⁻⁶`.
pub const REFINED_TARGET: f64 = 13.0 / 32.0 + 9e-6;

/// Evaluates `G(1/4)` on `steps + 1` evenly spaced `p ∈ [p_min, p_max]`, then
/// refines the best grid cell by golden-section search.
pub fn scan_improved_constant(p_min: f64, p_max: f64, steps: usize) -> Result<ScanReport> {
    if !(p_min >= 2.0 && p_max >= p_min && steps >= 1) {
        return Err(Error::Domain(format!(
            "bad scan range [{p_min}, {p_max}] with {steps} steps"
        )));
    }
    let h = (p_max - p_min) / steps as f64;
    let grid = (0..=steps)
        .map(|i| {
            let p = p_min + h * i as f64;
            improved_constant(p).map(|g| (p, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let (best_i, _) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");

    let mut lo = grid[best_i.saturating_sub(1)].0;
    let mut hi = grid[(best_i + 1).min(steps)].0;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        if hi - lo < 1e-12 {
            break;
        }
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if improved_constant(a)? >= improved_constant(b)? {
            hi = b;
        } else {
            lo = a;
        }
    }
    let refined = 0.5 * (lo + hi);
    let (mut best_p, mut best_value) = grid[best_i];
    let refined_value = improved_constant(refined)?;
    if refined_value > best_value {
        best_p = refined;
        best_value = refined_value;
    }
    Ok(ScanReport {
        best_p,
        best_value,
        margin: best_value - REFINED_TARGET,
        grid,
    })
}

/// One `(x, Y)` pair for the shifted-sum lemma.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaSample<T> {
    pub x: T,
    pub weights: Weights<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub samples: usize,
    pub bound: BoundValue,
    /// Smallest `Pr[|x + Y| ≤ 1] − bound` observed.
    pub min_slack: f64,
    pub worst_index: Option<usize>,
    /// Samples whose exact probability fell below the bound.
    pub violations: Vec<usize>,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `Pr[|x + Y| ≤ 1] ≥ F(c)` (or `G(c)`) exactly on every sample.
pub fn verify_lemma<T: Real>(
    samples: &[LemmaSample<T>],
    c: &T,
    mode: BoundMode,
) -> Result<LemmaReport> {
    let bound = mode.eval(&c.to_rational())?;
    for (index, s) in samples.iter().enumerate() {
        if !lemma_hypothesis(&s.x, &s.weights, c)? {
            return Err(Error::HypothesisViolated { index });
        }
    }
    let probs = samples
        .par_iter()
        .map(|s| shifted_prob(&s.x, &s.weights, &T::one()).map(|p| p.to_rational()))
        .collect::<Result<Vec<_>>>()?;

    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut worst_index = None;
    for (i, p) in probs.iter().enumerate() {
        if bound.gt(p) {
            violations.push(i);
        }
        let slack = p.to_f64() - bound.to_f64();
        if slack < min_slack {
            min_slack = slack;
            worst_index = Some(i);
        }
    }
    Ok(LemmaReport {
        samples: samples.len(),
        bound,
        min_slack,
        worst_index,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn rw(v: &[(i64, i64)]) -> Weights<Rational> {
        Weights::new(v.iter().map(|&(n, d)| q(n, d)).collect()).unwrap()
    }

    fn exact(b: BoundValue) -> Rational {
        match b {
            BoundValue::Exact(r) => r,
            other => panic!("expected exact, got {other:?}"),
        }
    }

    #[test]
    fn hypothesis_examples() {
        assert!(lemma_hypothesis(&q(0, 1), &rw(&[(1, 2), (1, 2)]), &q(1, 2)).unwrap());
        assert!(lemma_hypothesis(&q(1, 1), &rw(&[(1, 2); 4]), &q(2, 7)).unwrap());
        assert!(!lemma_hypothesis(&q(0, 1), &rw(&[(1, 1)]), &q(2, 7)).unwrap());
        assert!(lemma_hypothesis(&q(1, 1), &rw(&[(4, 5)]), &q(2, 7)).unwrap());
        assert!(lemma_hypothesis(&q(3, 2), &rw(&[(1, 1)]), &q(2, 7)).is_err());
    }

    #[test]
    fn two_piece_examples() {
        assert_eq!(
            exact(two_piece_bound(2, 2, BoundMode::F, None).unwrap()),
            q(239, 625)
        );
        assert_eq!(
            exact(two_piece_bound(2, 4, BoundMode::F, None).unwrap()),
            q(11, 25)
        );
        assert_eq!(
            exact(two_piece_bound(2, 100, BoundMode::F, None).unwrap()),
            q(11, 25)
        );
        assert_eq!(
            exact(two_piece_bound(2, 8, BoundMode::F, Some(10)).unwrap()),
            q(1, 2)
        );
        assert_eq!(
            exact(two_piece_bound(2, 9, BoundMode::F, Some(10)).unwrap()),
            q(1, 2)
        );
        assert!(two_piece_bound(3, 2, BoundMode::F, None).is_err());
        assert!(two_piece_bound(1, 2, BoundMode::F, None).is_err());
    }

    #[test]
    fn pieces_agree_at_the_boundary() {
        for k in (2..40usize).filter(|k| (3 * k + 2) % 2 == 0) {
            let t = (3 * k + 2) / 2;
            let rising = Rational::new(
                ((k + 1) * (k + 1) - t) as i64,
                ((2 * k + 1) * (2 * k + 1)) as i64,
            );
            assert_eq!(rising, Rational::new(k as i64, 4 * k as i64 + 2), "K = {k}");
        }
    }

    #[test]
    fn branch_bounds_nondecreasing_in_t() {
        for k in 2..=30 {
            let mut prev = exact(two_piece_bound(k, k, BoundMode::F, None).unwrap());
            for t in k + 1..=200 {
                let b = exact(two_piece_bound(k, t, BoundMode::F, None).unwrap());
                assert!(b >= prev, "K = {k}, T = {t}");
                prev = b;
            }
        }
    }

    #[test]
    fn certificate_examples() {
        let c = certify_instance(&rw(&[(1, 2); 4]), BoundMode::F).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(exact(c.certified.clone()), q(1, 2));
        assert_eq!(c.exact, Some(q(7, 8)));
        assert_eq!(c.sound, Some(true));

        let c = certify_instance(&rw(&[(1, 1), (0, 1), (0, 1), (0, 1)]), BoundMode::F).unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(exact(c.certified), q(1, 2));
        assert_eq!(c.exact, Some(q(1, 1)));
    }

    #[test]
    fn certificate_for_spread_instance_with_k_two() {
        // M₂ = 4/5 > 1 − v₃ = 7/10, so K = 2 with n = 6.
        let w = rw(&[(2, 5), (2, 5), (3, 10), (3, 10), (2, 5), (2, 5)]);
        assert!(w.is_tomaszewski());
        let c = certify_instance(&w, BoundMode::F).unwrap();
        assert_eq!((c.k, c.n), (2, 6));
        assert_eq!(exact(c.certified.clone()), q(257, 625));
        assert!(c.certified.gt(&q(13, 32)));
        assert_eq!(c.sound, Some(true));
        assert_eq!(c.branch_bounds[&2].case, Case::Immediate);
        assert_eq!(c.branch_bounds[&2].c, Some(q(7, 25)));
    }

    #[test]
    fn diagnostic_is_at_least_the_certificate() {
        let w = rw(&[(2, 5), (2, 5), (3, 10), (3, 10), (2, 5), (2, 5)]);
        let c = certify_with_diagnostic(&w, BoundMode::F).unwrap();
        let d = exact(c.diagnostic.unwrap());
        assert!(d >= exact(c.certified));
        assert!(d <= c.exact.unwrap());
    }

    #[test]
    fn certificate_rejects_large_norm() {
        assert!(matches!(
            certify_instance(&rw(&[(1, 1), (1, 1)]), BoundMode::F),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn global_examples() {
        let r = verify_global(3).unwrap();
        assert_eq!(r.rows[0].lhs, BigInt::from(384));
        assert_eq!(r.rows[0].rhs, BigInt::from(450));
        assert_eq!(r.rows[1].lhs, BigInt::from(768));
        assert_eq!(r.rows[1].rhs, BigInt::from(1860));
        assert_eq!(r.rows[0].weighted, q(257, 625));
        assert_eq!(r.rows[1].weighted, q(143, 343));
        assert!(r.all_hold);
        assert!(verify_global(1).is_err());
    }

    #[test]
    fn improved_constant_examples() {
        assert_eq!(improved_constant(4.0).unwrap(), 13.0 / 32.0);
        assert_eq!(improved_constant(2.0).unwrap(), 3.0 / 8.0);
        assert!(improved_constant(3.95937).unwrap() > REFINED_TARGET);
        let scan = scan_improved_constant(3.5, 4.5, 1000).unwrap();
        assert!((scan.best_p - 3.95937).abs() < 1e-4, "{}", scan.best_p);
        assert!(scan.margin > 0.0);
    }

    #[test]
    fn lemma_examples() {
        let samples = vec![
            LemmaSample {
                x: q(1, 1),
                weights: rw(&[(1, 2); 4]),
            },
            LemmaSample {
                x: q(1, 1),
                weights: rw(&[(4, 5)]),
            },
        ];
        let report = verify_lemma(&samples, &q(2, 7), BoundMode::F).unwrap();
        assert!(report.holds());
        assert_eq!(report.bound, BoundValue::Exact(q(37, 98)));
        let first = shifted_prob(&q(1, 1), &rw(&[(1, 2); 4]), &q(1, 1)).unwrap();
        assert_eq!(first.to_rational(), q(11, 16));

        let empty = vec![LemmaSample {
            x: q(0, 1),
            weights: Weights::empty(),
        }];
        let report = verify_lemma(&empty, &q(0, 1), BoundMode::F).unwrap();
        assert_eq!(report.min_slack, 0.5);

        let bad = vec![
            LemmaSample {
                x: q(0, 1),
                weights: rw(&[(1, 10)]),
            },
            LemmaSample {
                x: q(0, 1),
                weights: rw(&[(1, 1)]),
            },
        ];
        assert_eq!(
            verify_lemma(&bad, &q(2, 7), BoundMode::F).unwrap_err(),
            Error::HypothesisViolated { index: 1 }
        );
    }
}
