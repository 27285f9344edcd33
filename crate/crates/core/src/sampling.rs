//! Seeded generators of random rational instances for sweeps and tests.

use num_bigint::BigInt;
use num_integer::Roots;
use num_traits::ToPrimitive;
use rand::Rng;

use crate::certify::LemmaSample;
use crate::distribution::Weights;
use crate::rational::Rational;

/// Smallest `d ≥ 1` with `d² · num ≥ target · den`.
fn min_denominator(target: u128, num: u128, den: u128) -> u128 {
    if target == 0 || num == 0 {
        return 1;
    }
    let need = (target * den).div_ceil(num);
    let mut d = need.sqrt().max(1);
    while d * d < need {
        d += 1;
    }
    d
}

/// Random nonnegative integer numerators in one of several shapes.
fn random_numerators<R: Rng>(rng: &mut R, n: usize) -> Vec<u64> {
    let scale = [3u64, 10, 100, 1000][rng.gen_range(0..4)];
    match rng.gen_range(0..5) {
        0 => (0..n).map(|_| rng.gen_range(1..=scale)).collect(),
        1 => (0..n).map(|_| rng.gen_range(0..=scale)).collect(),
        2 => {
            // A near-equal block.
            let base = scale.max(4);
            (0..n).map(|_| base + rng.gen_range(0..=base / 4)).collect()
        }
        3 => {
            // One or two dominant weights over a small tail.
            let big = rng.gen_range(1..=2).min(n);
            (0..n)
                .map(|i| {
                    if i < big {
                        scale * rng.gen_range(2..=6)
                    } else {
                        rng.gen_range(0..=scale)
                    }
                })
                .collect()
        }
        _ => vec![1; n],
    }
}

fn as_u128(r: &BigInt) -> u128 {
    r.to_u128().expect("small sampling ratio")
}

/// Random rational weights with `1 ≤ n ≤ n_max` and `Σvᵢ² ≤ 1`, usually close to 1.
pub fn random_tomaszewski<R: Rng>(rng: &mut R, n_max: usize) -> Weights<Rational> {
    let n = rng.gen_range(1..=n_max.max(1));
    let nums = random_numerators(rng, n);
    let sum_sq: u128 = nums.iter().map(|&a| (a as u128) * (a as u128)).sum();
    let d = min_denominator(sum_sq, 1, 1);
    let values = nums
        .iter()
        .map(|&a| Rational::from_bigints(BigInt::from(a), BigInt::from(d)))
        .collect();
    Weights::new(values).expect("finite rationals")
}

/// Random `x ∈ [−1, 1]` and weights with `Σvᵢ² ≤ c(1 + |x|)²`, close to equality.
pub fn random_lemma_sample<R: Rng>(
    rng: &mut R,
    c: &Rational,
    n_max: usize,
) -> LemmaSample<Rational> {
    let x = match rng.gen_range(0..6) {
        0 => Rational::one(),
        1 => Rational::zero(),
        2 => -Rational::one(),
        _ => {
            let den = rng.gen_range(1..=24i64);
            Rational::new(rng.gen_range(-den..=den), den)
        }
    };
    let n = rng.gen_range(0..=n_max);
    if c.is_zero() || n == 0 {
        return LemmaSample {
            x,
            weights: Weights::new(vec![Rational::zero(); n]).expect("zeros"),
        };
    }
    let one_plus = Rational::one() + x.abs();
    let budget = c * &(&one_plus * &one_plus);
    let nums = random_numerators(rng, n);
    let sum_sq: u128 = nums.iter().map(|&a| (a as u128) * (a as u128)).sum();
    let d = min_denominator(sum_sq, as_u128(budget.numer()), as_u128(budget.denom()));
    let values = nums
        .iter()
        .map(|&a| Rational::from_bigints(BigInt::from(a), BigInt::from(d)))
        .collect();
    LemmaSample {
        x,
        weights: Weights::new(values).expect("finite rationals"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::lemma_hypothesis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn instances_respect_the_norm_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let w = random_tomaszewski(&mut rng, 20);
            assert!(w.is_tomaszewski());
            assert!((1..=20).contains(&w.n()));
        }
    }

    #[test]
    fn lemma_samples_satisfy_the_hypothesis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for c in [
            Rational::zero(),
            Rational::new(1, 20),
            Rational::new(2, 7),
            Rational::new(1, 2),
        ] {
            for _ in 0..200 {
                let s = random_lemma_sample(&mut rng, &c, 12);
                assert!(lemma_hypothesis(&s.x, &s.weights, &c).unwrap());
            }
        }
    }

    #[test]
    fn min_denominator_is_tight() {
        assert_eq!(min_denominator(25, 1, 1), 5);
        assert_eq!(min_denominator(26, 1, 1), 6);
        // d² ≥ 1 / (8/7) → d = 1.
        assert_eq!(min_denominator(1, 8, 7), 1);
    }
}
