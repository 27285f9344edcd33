//! Derivative-free search for weight vectors minimizing `Pr[|S| ≤ 1]`.
//!
//! The objective is piecewise constant, so only strict improvements are
//! accepted. Inner-loop evaluations run in float mode; reported minima are
//! re-evaluated exactly after snapping the weights to nearby rationals with
//! denominator at most [`SNAP_DENOMINATOR`].

use num_integer::Roots;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::{prob_abs_le, Weights};
use crate::error::{Error, Result};
use crate::rational::Rational;

pub const SNAP_DENOMINATOR: u64 = 1_000_000;
pub const MAX_GRID_N: usize = 9;
pub const MAX_GRID_RESOLUTION: usize = 64;
pub const MAX_PATTERN_N: usize = 24;
const INITIAL_STEP: f64 = 0.25;
const MIN_STEP: f64 = 1.0 / (1u64 << 20) as f64;
/// Grid points re-evaluated exactly after the float pass.
const GRID_CANDIDATES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Grid,
    Pattern,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    pub best_weights: Weights<Rational>,
    pub best_prob: Rational,
    pub evaluations: usize,
    pub method: Method,
    pub seed: u64,
    /// `(evaluation index, float objective)` for every evaluation.
    #[serde(skip)]
    pub trace: Vec<(usize, f64)>,
}

impl SearchResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("evaluation,prob\n");
        for (i, p) in &self.trace {
            out.push_str(&format!("{i},{p}\n"));
        }
        out
    }
}

fn float_objective(values: &[f64]) -> f64 {
    let w = Weights::new(values.to_vec()).expect("finite weights");
    prob_abs_le(&w, &1.0, false)
        .expect("n within limits")
        .to_f64()
}

fn exact_objective(w: &Weights<Rational>) -> Rational {
    prob_abs_le(w, &Rational::one(), false)
        .expect("n within limits")
        .to_rational()
}

/// Square root of a rational when both parts are perfect squares.
fn exact_sqrt(r: &Rational) -> Option<Rational> {
    let n = r.numer().to_u128()?;
    let d = r.denom().to_u128()?;
    let (sn, sd) = (n.sqrt(), d.sqrt());
    (sn * sn == n && sd * sd == d).then(|| Rational::from_bigints(sn.into(), sd.into()))
}

/// Rational weights near `values`, kept inside `Σvᵢ² ≤ 1`. Best approximations
/// are tried first, then truncation to the denominator bound.
pub fn snap_weights(values: &[f64]) -> Weights<Rational> {
    let nearest: Vec<Rational> = values
        .iter()
        .map(|&v| Rational::approximate(v, SNAP_DENOMINATOR).expect("finite weight"))
        .collect();
    let w = Weights::new(nearest).expect("finite");
    if w.is_tomaszewski() {
        return w;
    }
    let truncated = values
        .iter()
        .map(|&v| {
            Rational::new(
                (v.abs() * SNAP_DENOMINATOR as f64).floor() as i64,
                SNAP_DENOMINATOR as i64,
            )
        })
        .collect();
    shrink_to_unit(Weights::new(truncated).expect("finite"))
}

fn shrink_to_unit(mut w: Weights<Rational>) -> Weights<Rational> {
    let factor = Rational::one() - Rational::inverse_pow2(40);
    while !w.is_tomaszewski() {
        w = Weights::new(w.values().iter().map(|v| v * &factor).collect()).expect("finite");
    }
    w
}

/// Descending partitions of `total` into exactly `parts` nonnegative parts,
/// ordered by increasing largest part.
fn partitions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn fill(
        rest: usize,
        slots: usize,
        cap: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if slots == 0 {
            if rest == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        // Remaining slots can absorb at most slots·cap.
        if rest > slots * cap {
            return;
        }
        let lo = rest.div_ceil(slots);
        for part in lo..=cap.min(rest) {
            prefix.push(part);
            fill(rest - part, slots - 1, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        return out;
    }
    let lo = total.div_ceil(parts);
    for first in lo..=total {
        let mut prefix = vec![first];
        fill(total - first, parts - 1, first, &mut prefix, &mut out);
    }
    out
}

/// Exhaustive minimization over weights with `vᵢ² ∈ {k/resolution}`, `Σvᵢ² = 1`,
/// `vᵢ` descending.
pub fn grid_search(n: usize, resolution: usize) -> Result<SearchResult> {
    if n == 0 || n > MAX_GRID_N {
        return Err(Error::SizeLimit {
            what: "grid_search n",
            n,
            limit: MAX_GRID_N,
        });
    }
    if resolution == 0 || resolution > MAX_GRID_RESOLUTION {
        return Err(Error::SizeLimit {
            what: "grid_search resolution",
            n: resolution,
            limit: MAX_GRID_RESOLUTION,
        });
    }
    let points = partitions(resolution, n);
    let probs: Vec<f64> = points
        .par_iter()
        .map(|ks| {
            let values: Vec<f64> = ks
                .iter()
                .map(|&k| (k as f64 / resolution as f64).sqrt())
                .collect();
            float_objective(&values)
        })
        .collect();

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(a.cmp(&b)));
    let mut best: Option<(Rational, usize, Weights<Rational>)> = None;
    for &i in order.iter().take(GRID_CANDIDATES) {
        let w = grid_point_weights(&points[i], resolution);
        let p = exact_objective(&w);
        let better = match &best {
            None => true,
            Some((bp, bi, _)) => p < *bp || (p == *bp && i < *bi),
        };
        if better {
            best = Some((p, i, w));
        }
    }
    let (best_prob, _, best_weights) = best.expect("at least one grid point");
    Ok(SearchResult {
        best_weights,
        best_prob,
        evaluations: points.len(),
        method: Method::Grid,
        seed: 0,
        trace: probs.into_iter().enumerate().collect(),
    })
}

fn grid_point_weights(ks: &[usize], resolution: usize) -> Weights<Rational> {
    let values = ks
        .iter()
        .map(|&k| {
            let sq = Rational::new(k as i64, resolution as i64);
            exact_sqrt(&sq).ok_or_else(|| sq.to_f64().sqrt())
        })
        .collect::<Vec<_>>();
    if values.iter().all(|v| v.is_ok()) {
        return Weights::new(values.into_iter().flatten().collect()).expect("finite");
    }
    let floats: Vec<f64> = values
        .iter()
        .map(|v| v.as_ref().map_or_else(|f| *f, Rational::to_f64))
        .collect();
    snap_weights(&floats)
}

struct Descent {
    squares: Vec<f64>,
    value: f64,
    trace: Vec<f64>,
}

/// Pattern search on the simplex of squared weights from `start`.
fn descend(start: Vec<f64>) -> Descent {
    let n = start.len();
    let eval =
        |sq: &[f64]| float_objective(&sq.iter().map(|q| q.max(0.0).sqrt()).collect::<Vec<_>>());
    let mut squares = start;
    let mut value = eval(&squares);
    let mut trace = vec![value];
    let mut step = INITIAL_STEP;
    while step >= MIN_STEP {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || squares[j] <= 0.0 {
                    continue;
                }
                let delta = step.min(squares[j]);
                let mut trial = squares.clone();
                trial[i] += delta;
                trial[j] -= delta;
                let v = eval(&trial);
                trace.push(v);
                if v < value {
                    squares = trial;
                    value = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Descent {
        squares,
        value,
        trace,
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Random point of the simplex, uniform (Dirichlet(1)).
fn random_simplex_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Multi-start pattern search. Restart 0 starts from equal weights; the
/// others from seeded uniform points on the simplex.
pub fn pattern_search(n: usize, restarts: usize, seed: u64) -> Result<SearchResult> {
    if n == 0 || n > MAX_PATTERN_N {
        return Err(Error::SizeLimit {
            what: "pattern_search",
            n,
            limit: MAX_PATTERN_N,
        });
    }
    let starts: Vec<Vec<f64>> = (0..restarts.max(1))
        .map(|r| match r {
            0 => vec![1.0 / n as f64; n],
            _ => random_simplex_point(&mut restart_rng(seed, r), n),
        })
        .collect();
    pattern_search_from(starts, seed)
}

/// Pattern search from explicit starting points (squared weights summing to 1).
pub fn pattern_search_from(starts: Vec<Vec<f64>>, seed: u64) -> Result<SearchResult> {
    if starts.is_empty() {
        return Err(Error::Domain(
            "at least one starting point is required".into(),
        ));
    }
    let n = starts[0].len();
    if n == 0 || n > MAX_PATTERN_N || starts.iter().any(|s| s.len() != n) {
        return Err(Error::Domain(format!(
            "starting points must share a length in 1..={MAX_PATTERN_N}"
        )));
    }
    let runs: Vec<(Descent, Weights<Rational>, Rational)> = starts
        .into_par_iter()
        .map(|start| {
            let d = descend(start);
            let w = snap_weights(
                &d.squares
                    .iter()
                    .map(|q| q.max(0.0).sqrt())
                    .collect::<Vec<_>>(),
            );
            let p = exact_objective(&w);
            (d, w, p)
        })
        .collect();

    let mut trace = Vec::new();
    for (d, _, _) in &runs {
        for v in &d.trace {
            trace.push((trace.len(), *v));
        }
    }
    let (_, best_weights, best_prob) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.2.cmp(&b.2)
                .then(a.0.value.total_cmp(&b.0.value))
                .then(ia.cmp(ib))
        })
        .map(|(_, r)| r)
        .expect("at least one run");
    Ok(SearchResult {
        best_weights,
        best_prob,
        evaluations: trace.len(),
        method: Method::Pattern,
        seed,
        trace,
    })
}

/// `Pr[|S| ≤ 1]` for `n` equal weights `1/√n`, exact when `n` is a perfect square.
pub fn equal_weights_prob(n: usize) -> Result<Rational> {
    let root = n.sqrt();
    if root * root == n {
        let w = Weights::new(vec![Rational::new(1, root as i64); n])?;
        return Ok(prob_abs_le(&w, &Rational::one(), false)?.to_rational());
    }
    let w = Weights::new(vec![1.0 / (n as f64).sqrt(); n])?;
    Ok(prob_abs_le(&w, &1.0, false)?.to_rational())
}

/// [`equal_weights_prob`] for every `n ∈ [1, n_max]`.
pub fn equal_weights_sweep(n_max: usize) -> Result<Vec<(usize, Rational)>> {
    (1..=n_max)
        .into_par_iter()
        .map(|n| equal_weights_prob(n).map(|p| (n, p)))
        .collect()
}
