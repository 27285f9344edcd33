//! Moments of Rademacher sums, Khintchine constants, the fourth-moment tail
//! bound, and the conditional bound functions `F` and `G`.

use serde::Serialize;

use crate::distribution::{exact_distribution, Weights};
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::real::Real;

/// The exponent used for the refined constant.
pub const REFINED_P: f64 = 3.95937;

/// `E(S⁴) = 3(Σvᵢ²)² − 2Σvᵢ⁴`.
pub fn fourth_moment<T: Real>(w: &Weights<T>) -> T {
    let s2 = w.norm_sq().clone();
    let s4 = w.values().iter().fold(T::zero(), |acc, v| {
        acc + v.clone() * v.clone() * v.clone() * v.clone()
    });
    T::from_ratio(3, 1) * s2.clone() * s2 - T::from_ratio(2, 1) * s4
}

/// `E|S|^p` by full enumeration.
pub fn empirical_p_moment<T: Real>(w: &Weights<T>, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(exact_distribution(w)?.abs_moment_f64(p))
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 2.0 {
        return Err(Error::Domain(format!("p must be ≥ 2, got {p}")));
    }
    Ok(())
}

/// `Γ((p+1)/2)/√π`, exact recursion when `p` is an integer.
fn gamma_ratio(p: f64) -> f64 {
    if p.fract() == 0.0 && p <= 340.0 {
        let p = p as u32;
        if p.is_multiple_of(2) {
            // Γ(m + ½)/√π = (2m−1)!! / 2^m with m = p/2.
            let m = p / 2;
            let double_fact: f64 = (1..=m).map(|i| (2 * i - 1) as f64).product();
            double_fact / 2f64.powi(m as i32)
        } else {
            // Γ(m) = (m−1)! with m = (p+1)/2.
            let m = p.div_ceil(2);
            let fact: f64 = (1..m).map(f64::from).product();
            fact / std::f64::consts::PI.sqrt()
        }
    } else {
        statrs::function::gamma::gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
    }
}

/// Khintchine constant `B_p = 2^{p/2} Γ((p+1)/2) / √π` for `p ≥ 2`.
pub fn khintchine_constant(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(2f64.powf(p / 2.0) * gamma_ratio(p))
}

/// `min(1, E(Y⁴)/t⁴)`, an upper bound on `Pr[|Y| ≥ t]`.
pub fn chebyshev4_tail<T: Real>(w: &Weights<T>, threshold: &T) -> Result<T> {
    if *threshold <= T::zero() {
        return Err(Error::Domain(format!(
            "tail threshold must be > 0, got {threshold}"
        )));
    }
    let t2 = threshold.clone() * threshold.clone();
    let t4 = t2.clone() * t2;
    let bound = fourth_moment(w).to_rational() / t4.to_rational();
    Ok(T::from_rational(&bound.min(Rational::one())))
}

/// `F(c) = ½(1 − 3c²)`.
pub fn bound_f<T: Real>(c: &T) -> T {
    let half = T::from_ratio(1, 2);
    half * (T::one() - T::from_ratio(3, 1) * c.clone() * c.clone())
}

/// `G(c) = ½(1 − B_p c^{p/2})`.
pub fn bound_g(c: f64, p: f64) -> Result<f64> {
    if c.is_nan() || c < 0.0 {
        return Err(Error::Domain(format!("c must be ≥ 0, got {c}")));
    }
    let b = khintchine_constant(p)?;
    Ok(0.5 * (1.0 - b * c.powf(p / 2.0)))
}

/// Second, fourth and p-th moments together with the bounds they imply.
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport<T> {
    pub second_moment: T,
    pub fourth_moment: T,
    pub p: f64,
    pub p_moment: f64,
    #[serde(rename = "khintchine_B")]
    pub khintchine_b: f64,
    pub tail_threshold: T,
    pub tail_bound: T,
}

impl<T: Real> MomentReport<T> {
    pub fn compute(w: &Weights<T>, p: f64, tail_threshold: &T) -> Result<Self> {
        Ok(MomentReport {
            second_moment: w.norm_sq().clone(),
            fourth_moment: fourth_moment(w),
            p,
            p_moment: empirical_p_moment(w, p)?,
            khintchine_b: khintchine_constant(p)?,
            tail_threshold: tail_threshold.clone(),
            tail_bound: chebyshev4_tail(w, tail_threshold)?,
        })
    }

    /// Right-hand side of Khintchine's inequality, `B_p (Σvᵢ²)^{p/2}`.
    pub fn khintchine_rhs(&self) -> f64 {
        self.khintchine_b * self.second_moment.to_f64().powf(self.p / 2.0)
    }

    /// `E|S|^p ≤ B_p (Σvᵢ²)^{p/2}` up to 1e-12 relative rounding slack.
    pub fn khintchine_holds(&self) -> bool {
        self.p_moment <= self.khintchine_rhs() * (1.0 + 1e-12)
    }
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

    #[test]
    fn fourth_moment_examples() {
        assert_eq!(fourth_moment(&rw(&[(1, 1)])), q(1, 1));
        assert_eq!(fourth_moment(&rw(&[(1, 2); 4])), q(5, 2));
        assert_eq!(fourth_moment(&rw(&[(3, 5), (4, 5)])), q(1201, 625));
    }

    #[test]
    fn fourth_moment_matches_atoms() {
        for w in [
            rw(&[(1, 2); 4]),
            rw(&[(3, 5), (4, 5)]),
            rw(&[(1, 3), (1, 7), (2, 9)]),
        ] {
            let d = exact_distribution(&w).unwrap();
            assert_eq!(d.raw_moment(4), fourth_moment(&w));
        }
    }

    #[test]
    fn p_moment_examples() {
        for p in [2.0, 2.5, 3.0, 4.0] {
            assert_eq!(empirical_p_moment(&rw(&[(1, 1)]), p).unwrap(), 1.0);
        }
        assert_eq!(empirical_p_moment(&rw(&[(1, 2); 4]), 3.0).unwrap(), 1.5);
        assert_eq!(empirical_p_moment(&rw(&[(1, 2); 4]), 4.0).unwrap(), 2.5);
        assert!(empirical_p_moment(&rw(&[(1, 1)]), 1.5).is_err());
    }

    #[test]
    fn khintchine_constants() {
        assert_eq!(khintchine_constant(2.0).unwrap(), 1.0);
        assert_eq!(khintchine_constant(4.0).unwrap(), 3.0);
        assert_eq!(khintchine_constant(6.0).unwrap(), 15.0);
        let b3 = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((khintchine_constant(3.0).unwrap() - b3).abs() <= 1e-12 * b3);
        assert!(khintchine_constant(1.99).is_err());
        assert!(khintchine_constant(f64::NAN).is_err());
    }

    #[test]
    fn general_p_agrees_with_exact_recursion_nearby() {
        // Continuity of the Lanczos path across the integer special cases.
        for p in [3.0f64, 4.0, 5.0] {
            let exact = khintchine_constant(p).unwrap();
            let lanczos = 2f64.powf(p / 2.0) * statrs::function::gamma::gamma((p + 1.0) / 2.0)
                / std::f64::consts::PI.sqrt();
            assert!((exact - lanczos).abs() <= 1e-12 * exact, "p = {p}");
        }
    }

    #[test]
    fn tail_examples() {
        assert_eq!(
            chebyshev4_tail(&rw(&[(1, 2); 4]), &q(2, 1)).unwrap(),
            q(5, 32)
        );
        assert_eq!(chebyshev4_tail(&rw(&[(1, 1)]), &q(2, 1)).unwrap(), q(1, 16));
        assert_eq!(chebyshev4_tail(&rw(&[(1, 1)]), &q(1, 2)).unwrap(), q(1, 1));
        assert!(chebyshev4_tail(&rw(&[(1, 1)]), &q(0, 1)).is_err());
    }

    #[test]
    fn tail_under_lemma_hypothesis() {
        let x = q(1, 3);
        let w = rw(&[(1, 3), (1, 3), (1, 4), (1, 5)]);
        let one_plus_x = &Rational::one() + &x;
        assert!(w.norm_sq() <= &(q(2, 7) * one_plus_x.pow(2)));
        assert!(chebyshev4_tail(&w, &one_plus_x).unwrap() <= q(12, 49));
    }

    #[test]
    fn bound_f_examples() {
        assert_eq!(bound_f(&q(0, 1)), q(1, 2));
        assert_eq!(bound_f(&q(2, 7)), q(37, 98));
        assert_eq!(bound_f(&q(1, 5)), q(11, 25));
    }

    #[test]
    fn bound_g_examples() {
        assert_eq!(bound_g(0.0, 3.0).unwrap(), 0.5);
        assert_eq!(bound_g(0.25, 4.0).unwrap(), 13.0 / 32.0);
        assert!(bound_g(0.25, REFINED_P).unwrap() > 13.0 / 32.0 + 9e-6);
        assert!(bound_g(-0.1, 3.0).is_err());
        assert!(bound_g(0.1, 1.0).is_err());
    }

    #[test]
    fn report_serializes_with_listed_field_names() {
        let r = MomentReport::compute(&rw(&[(1, 2); 4]), 4.0, &q(1, 1)).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "second_moment",
            "fourth_moment",
            "p",
            "p_moment",
            "khintchine_B",
            "tail_threshold",
            "tail_bound",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["fourth_moment"], "5/2");
        assert!(r.khintchine_holds());
    }
}
