//! Exact and float computation of concentration probabilities for Rademacher
//! sums `S = Σ εᵢvᵢ`, together with the moment bounds, stopping-time analysis
//! and certificates that lower-bound `Pr[|S| ≤ 1]` for `Σvᵢ² ≤ 1`.

pub mod algebra;
pub mod certify;
pub mod distribution;
pub mod error;
pub mod io;
mod mitm;
pub mod moments;
pub mod rational;
pub mod real;
pub mod sampling;
pub mod search;
pub mod stopping;

pub use certify::{
    certify_instance, improved_constant, verify_global, verify_lemma, BoundCertificate, BoundMode,
    BoundValue,
};
pub use distribution::{
    canonicalize, exact_distribution, prob_abs_le, shifted_prob, Probability, SignAssignment,
    SignedSumDistribution, Weights,
};
pub use error::{Error, Result};
pub use moments::{bound_f, bound_g, fourth_moment, khintchine_constant, MomentReport, REFINED_P};
pub use rational::Rational;
pub use real::Real;
pub use search::{grid_search, pattern_search, SearchResult};
pub use stopping::{compute_k, compute_t, t_profile, Case, StoppingProfile};
