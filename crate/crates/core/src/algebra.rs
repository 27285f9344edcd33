//! Exact checks of the completing-the-square steps behind the conditional
//! bounds, as polynomial identities in `x` and on dense rational grids.

use std::ops::{Add, Mul, Sub};

use crate::rational::Rational;

/// Dense univariate polynomial with rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(Vec<Rational>);

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Rational::is_zero) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn constant(c: Rational) -> Self {
        Poly::new(vec![c])
    }

    /// `a + b·x`.
    pub fn linear(a: Rational, b: Rational) -> Self {
        Poly::new(vec![a, b])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Poly::new(self.0.iter().map(|a| a * c).collect())
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.0
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, a| acc * x + a)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let len = self.0.len().max(rhs.0.len());
        let zero = Rational::zero();
        Poly::new(
            (0..len)
                .map(|i| self.0.get(i).unwrap_or(&zero) + rhs.0.get(i).unwrap_or(&zero))
                .collect(),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(&Rational::integer(-1))
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.0.is_empty() || rhs.0.is_empty() {
            return Poly::new(Vec::new());
        }
        let mut out = vec![Rational::zero(); self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Poly::new(out)
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn square(p: &Poly) -> Poly {
    p * p
}

/// `1 − 2(1−x)² = (2/7)(1+x)² − (1/7)(4x−3)²`, coefficient by coefficient.
pub fn initial_case3_identity() -> bool {
    let one_minus_x = Poly::linear(q(1, 1), q(-1, 1));
    let one_plus_x = Poly::linear(q(1, 1), q(1, 1));
    let lhs = &Poly::constant(q(1, 1)) - &square(&one_minus_x).scale(&q(2, 1));
    let rhs = &square(&one_plus_x).scale(&q(2, 7))
        - &square(&Poly::linear(q(-3, 1), q(4, 1))).scale(&q(1, 7));
    lhs == rhs
}

/// `2 − (K+1)(1−x)² = (K+1)/(2K+1)·(1+x)² − 2/(2K+1)·[(K+1)x − K]²`.
pub fn case3_bracket_identity(k: i64) -> bool {
    let lhs =
        &Poly::constant(q(2, 1)) - &square(&Poly::linear(q(1, 1), q(-1, 1))).scale(&q(k + 1, 1));
    let rhs = &square(&Poly::linear(q(1, 1), q(1, 1))).scale(&q(k + 1, 2 * k + 1))
        - &square(&Poly::linear(q(-k, 1), q(k + 1, 1))).scale(&q(2, 2 * k + 1));
    lhs == rhs
}

/// `x²/K = 1/(K+1) − (1−x)² + [(K+1)x − K]² / (K(K+1))`.
pub fn case5_identity(k: i64) -> bool {
    let lhs = square(&Poly::linear(q(0, 1), q(1, 1))).scale(&q(1, k));
    let rhs = &(&Poly::constant(q(1, k + 1)) - &square(&Poly::linear(q(1, 1), q(-1, 1))))
        + &square(&Poly::linear(q(-k, 1), q(k + 1, 1))).scale(&q(1, k * (k + 1)));
    lhs == rhs
}

/// `x = i/grid` for `i = 0..=grid`.
fn unit_grid(grid: i64) -> impl Iterator<Item = Rational> {
    (0..=grid).map(move |i| q(i, grid))
}

/// `2 − (K+1)(1−x)² ≤ (K+1)/(2K+1)·(1+x)²` on the grid.
pub fn case3_bracket_inequality(k: i64, grid: i64) -> bool {
    unit_grid(grid).all(|x| {
        let one_minus = q(1, 1) - &x;
        let one_plus = q(1, 1) + &x;
        q(2, 1) - q(k + 1, 1) * one_minus.pow(2) <= q(k + 1, 2 * k + 1) * one_plus.pow(2)
    })
}

/// `x²/K ≥ 1/(K+1) − (1−x)²` on the grid.
pub fn case5_inequality(k: i64, grid: i64) -> bool {
    unit_grid(grid).all(|x| x.pow(2) * q(1, k) >= q(1, k + 1) - (q(1, 1) - &x).pow(2))
}

/// `1 − 2(1−x)² ≤ (2/7)(1+x)²` on the grid.
pub fn initial_case3_inequality(grid: i64) -> bool {
    unit_grid(grid)
        .all(|x| q(1, 1) - q(2, 1) * (q(1, 1) - &x).pow(2) <= q(2, 7) * (q(1, 1) + &x).pow(2))
}

/// Named results of every identity and grid check for `K ∈ [2, k_max]`.
pub fn all_checks(k_max: i64, grid: i64) -> Vec<(String, bool)> {
    let mut out = vec![
        (
            "initial case-3 identity".to_string(),
            initial_case3_identity(),
        ),
        (
            "initial case-3 inequality".to_string(),
            initial_case3_inequality(grid),
        ),
    ];
    out.push((
        format!("case-3 bracket identity, K in 2..={k_max}"),
        (2..=k_max).all(case3_bracket_identity),
    ));
    out.push((
        format!("case-3 bracket inequality, K in 2..={k_max}"),
        (2..=k_max).all(|k| case3_bracket_inequality(k, grid)),
    ));
    out.push((
        format!("case-5 identity, K in 2..={k_max}"),
        (2..=k_max).all(case5_identity),
    ));
    out.push((
        format!("case-5 inequality, K in 2..={k_max}"),
        (2..=k_max).all(|k| case5_inequality(k, grid)),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold() {
        assert!(initial_case3_identity());
        for k in 2..=30 {
            assert!(case3_bracket_identity(k), "K = {k}");
            assert!(case5_identity(k), "K = {k}");
        }
    }

    #[test]
    fn perturbed_identity_is_detected() {
        let one_minus_x = Poly::linear(q(1, 1), q(-1, 1));
        let lhs = &Poly::constant(q(1, 1)) - &square(&one_minus_x).scale(&q(2, 1));
        let wrong = &square(&Poly::linear(q(1, 1), q(1, 1))).scale(&q(2, 7))
            - &square(&Poly::linear(q(-3, 1), q(4, 1))).scale(&q(1, 8));
        assert_ne!(lhs, wrong);
    }

    #[test]
    fn inequalities_hold_on_grid() {
        assert!(initial_case3_inequality(1024));
        for k in 2..=30 {
            assert!(case3_bracket_inequality(k, 256), "K = {k}");
            assert!(case5_inequality(k, 256), "K = {k}");
        }
    }

    #[test]
    fn poly_eval() {
        let p = Poly::new(vec![q(1, 1), q(2, 1), q(3, 1)]);
        assert_eq!(p.eval(&q(2, 1)), q(17, 1));
        assert_eq!(Poly::new(vec![q(0, 1), q(0, 1)]).coeffs().len(), 0);
    }
}
