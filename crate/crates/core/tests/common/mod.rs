#![allow(dead_code)]

pub mod checks;
pub mod ensemble;
pub mod laws;

use detpomdp::measure::{make_belief, Belief};
use detpomdp::Rational;
use num_bigint::BigInt;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// A belief on `n` states with integer weights, zeros dropped.
pub fn belief_from_weights(weights: &[u32]) -> Belief {
    let total: u32 = weights.iter().sum();
    make_belief(
        weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(x, &w)| (x, q(w as i64, total as i64))),
        weights.len(),
    )
    .expect("weights sum to one after scaling")
}
