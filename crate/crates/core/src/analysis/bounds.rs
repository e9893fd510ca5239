//! Cardinality bounds on reachable beliefs and their empirical verification.

use num_bigint::BigUint;
use num_traits::{One, Pow};
use thiserror::Error;

use crate::measure::{Belief, StateSet};
use crate::model::DetPomdpModel;
use crate::reachability::{reachable_layers_with, Branching, ReachError, ReachOptions, DEFAULT_BELIEF_CAP};

use super::separation::{check_separated_dpomdp, SeparationOptions, SeparationVerdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("state {state} of the initial support is missing from the stable set")]
    SupportNotContained { state: usize },
    #[error("f_{t}({x}, {u}) = {y} leaves the stable set")]
    NotStable { t: usize, x: usize, u: usize, y: usize },
    #[error("state {state} is out of range")]
    StateOutOfRange { state: usize },
    #[error(transparent)]
    Reach(#[from] ReachError),
}

/// `(1+|X|)^|X|`.
pub fn bound_littman(model: &DetPomdpModel) -> BigUint {
    let n = model.num_states();
    BigUint::from(n + 1).pow(n)
}

/// The two terms of the general bound and their minimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetPomdpBound {
    /// `(1+|X|)^s`.
    pub term_a: BigUint,
    /// `1 + s·|U|^(T+1)`, absent when `|U| = 1`.
    pub term_b: Option<BigUint>,
    pub min: BigUint,
}

pub fn bound_detpomdp(model: &DetPomdpModel, b0: &Belief) -> DetPomdpBound {
    let s = b0.support_size();
    let term_a = BigUint::from(model.num_states() + 1).pow(s);
    let term_b = (model.num_controls() > 1)
        .then(|| BigUint::one() + BigUint::from(s) * BigUint::from(model.num_controls()).pow(model.horizon + 1));
    let min = match &term_b {
        Some(b) if *b < term_a => b.clone(),
        _ => term_a.clone(),
    };
    DetPomdpBound { term_a, term_b, min }
}

/// `1 + (2^s − s)·m` where `m` is `|A|` for a given stable set and `|X|` otherwise.
pub fn bound_separated(
    model: &DetPomdpModel,
    b0: &Belief,
    stable_set: Option<&StateSet>,
) -> Result<BigUint, BoundsError> {
    let m = match stable_set {
        None => model.num_states(),
        Some(a) => {
            check_stable(model, b0, a)?;
            a.len()
        }
    };
    Ok(separated_formula(b0.support_size(), m))
}

fn separated_formula(s: usize, m: usize) -> BigUint {
    let two_s: BigUint = BigUint::from(2u8).pow(s);
    BigUint::one() + (two_s - BigUint::from(s)) * BigUint::from(m)
}

/// Checks `supp(b₀) ⊆ A` and `f_t(A, U) ⊆ A` for every `t`.
pub fn check_stable(model: &DetPomdpModel, b0: &Belief, a: &StateSet) -> Result<(), BoundsError> {
    if let Some(&state) = a.iter().find(|&&x| x >= model.num_states()) {
        return Err(BoundsError::StateOutOfRange { state });
    }
    if let Some(state) = b0.states().into_iter().find(|x| !a.contains(x)) {
        return Err(BoundsError::SupportNotContained { state });
    }
    for t in 0..model.horizon {
        for &x in a {
            for u in 0..model.num_controls() {
                let y = model.next_state(t, x, u);
                if !a.contains(&y) {
                    return Err(BoundsError::NotStable { t, x, u, y });
                }
            }
        }
    }
    Ok(())
}

/// The smallest set containing `supp(b₀)` and closed under every `f_t(·, u)`.
pub fn stable_set(model: &DetPomdpModel, b0: &Belief) -> StateSet {
    let mut a: StateSet = b0.states().into_iter().collect();
    let mut frontier: Vec<usize> = a.iter().copied().collect();
    let slices = if model.dynamics.len() == 1 { 1 } else { model.horizon };
    while let Some(x) = frontier.pop() {
        for t in 0..slices {
            for u in 0..model.num_controls() {
                let y = model.next_state(t, x, u);
                if a.insert(y) {
                    frontier.push(y);
                }
            }
        }
    }
    a
}

/// Scientific notation with four significant digits, e.g. `3.020e+2`.
pub fn scientific(n: &BigUint) -> String {
    let digits = n.to_string();
    let exp = digits.len() - 1;
    let mantissa: String = digits.chars().take(4).collect();
    let (head, tail) = mantissa.split_at(1);
    let tail = format!("{tail:0<3}");
    format!("{head}.{tail}e+{exp}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOptions {
    pub max_beliefs: usize,
    pub separation: SeparationOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_beliefs: DEFAULT_BELIEF_CAP,
            separation: SeparationOptions::default(),
        }
    }
}

/// One comparison between an empirical count and a bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub bound: BigUint,
    pub empirical: usize,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        BigUint::from(self.empirical) <= self.bound
    }

    pub fn tight(&self) -> bool {
        BigUint::from(self.empirical) == self.bound
    }
}

#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub num_states: usize,
    pub num_controls: usize,
    pub horizon: usize,
    pub support_size: usize,
    pub littman: BigUint,
    pub thm1: DetPomdpBound,
    pub separation: SeparationVerdict,
    /// Present only when the model is classified separated.
    pub thm2: Option<BigUint>,
    pub thm2_stable: Option<BigUint>,
    pub stable_set_size: usize,
    /// `|B^R_[1,T]|` over all controls.
    pub empirical: usize,
    /// `|B^R_[0,T]|` over all controls.
    pub empirical_with_initial: usize,
    /// `|B^R_[1,T]|` branching over admissible controls only.
    pub empirical_admissible: usize,
    pub checks: Vec<BoundCheck>,
}

impl BoundsReport {
    pub fn violations(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| !c.holds())
    }

    pub fn is_sound(&self) -> bool {
        self.checks.iter().all(BoundCheck::holds)
    }

    /// Names of the bounds attained with equality.
    pub fn tight(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| c.tight()).map(|c| c.name).collect()
    }
}

/// Enumerates reachable beliefs up to the horizon and compares the counts with every applicable bound.
pub fn verify_bounds(model: &DetPomdpModel, b0: &Belief, options: &VerifyOptions) -> Result<BoundsReport, BoundsError> {
    let t = model.horizon;
    let reach = |branching| {
        reachable_layers_with(
            model,
            b0,
            t,
            &ReachOptions {
                branching,
                max_beliefs: options.max_beliefs,
            },
        )
    };
    let all = reach(Branching::AllControls)?;
    let admissible = reach(Branching::AdmissibleControls)?;
    let empirical = all.span_size(1, t)?;
    let empirical_with_initial = all.union_size(0, t)?;
    let empirical_admissible = admissible.span_size(1, t)?;

    let littman = bound_littman(model);
    let thm1 = bound_detpomdp(model, b0);
    let separation = check_separated_dpomdp(model, &options.separation);
    let stable = stable_set(model, b0);
    let (thm2, thm2_stable) = if separation.status.is_separated() {
        (
            Some(bound_separated(model, b0, None)?),
            Some(bound_separated(model, b0, Some(&stable))?),
        )
    } else {
        (None, None)
    };

    let mut checks = vec![
        BoundCheck {
            name: "littman",
            bound: littman.clone(),
            empirical: empirical_with_initial,
        },
        BoundCheck {
            name: "thm1",
            bound: thm1.min.clone(),
            empirical,
        },
    ];
    let separated_count = match separation.scope {
        Branching::AllControls => empirical,
        Branching::AdmissibleControls => empirical_admissible,
    };
    if let Some(b) = &thm2 {
        checks.push(BoundCheck {
            name: "thm2",
            bound: b.clone(),
            empirical: separated_count,
        });
    }
    if let Some(b) = &thm2_stable {
        checks.push(BoundCheck {
            name: "thm2_stable",
            bound: b.clone(),
            empirical: separated_count,
        });
    }

    Ok(BoundsReport {
        num_states: model.num_states(),
        num_controls: model.num_controls(),
        horizon: t,
        support_size: b0.support_size(),
        littman,
        thm1,
        separation,
        thm2,
        thm2_stable,
        stable_set_size: stable.len(),
        empirical,
        empirical_with_initial,
        empirical_admissible,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_tank, gen_tight_bound, TankParams};

    #[test]
    fn littman_values() {
        let m = gen_tight_bound(3).unwrap();
        assert_eq!(bound_littman(&m), BigUint::from(64u8));
        let tank = gen_tank(&TankParams::instance_1()).unwrap().model;
        assert_eq!(bound_littman(&tank), BigUint::from(302u32).pow(301u32));
        assert!(scientific(&bound_littman(&tank)).ends_with("e+746"));
    }

    #[test]
    fn scientific_format() {
        assert_eq!(scientific(&BigUint::from(7u8)), "7.000e+0");
        assert_eq!(scientific(&BigUint::from(302u32)), "3.020e+2");
        assert_eq!(scientific(&BigUint::from(123456u32)), "1.234e+5");
    }

    #[test]
    fn detpomdp_bound_tb3() {
        let mut m = gen_tight_bound(3).unwrap();
        m.horizon = 5;
        let b0 = m.initial_belief.clone().unwrap();
        let b = bound_detpomdp(&m, &b0);
        assert_eq!(b.term_a, BigUint::from(16u8));
        assert_eq!(b.term_b, Some(BigUint::from(129u8)));
        assert_eq!(b.min, BigUint::from(16u8));
        let d = bound_detpomdp(&m, &Belief::dirac(0));
        assert_eq!(d.term_a, BigUint::from(4u8));
    }

    #[test]
    fn tank_terms() {
        let tank = gen_tank(&TankParams::instance_1()).unwrap().model;
        let b0 = tank.initial_belief.clone().unwrap();
        let b = bound_detpomdp(&tank, &b0);
        assert_eq!(b.term_a, BigUint::from(302u32).pow(41u32));
        assert_eq!(
            b.term_b.unwrap(),
            BigUint::one() + BigUint::from(41u8) * BigUint::from(10u8).pow(101u32)
        );
        let a = stable_set(&tank, &b0);
        assert_eq!(a, (0..=300).collect());
        assert_eq!(
            bound_separated(&tank, &b0, Some(&a)).unwrap(),
            bound_separated(&tank, &b0, None).unwrap()
        );
    }

    #[test]
    fn separated_bound_values() {
        let m = gen_tight_bound(3).unwrap();
        let b0 = m.initial_belief.clone().unwrap();
        assert_eq!(bound_separated(&m, &b0, None).unwrap(), BigUint::from(7u8));
        assert_eq!(
            bound_separated(&m, &Belief::dirac(1), None).unwrap(),
            BigUint::from(4u8)
        );
        assert_eq!(stable_set(&m, &b0), (0..3).collect());
        let partial: StateSet = [0, 1].into_iter().collect();
        assert!(matches!(
            bound_separated(&m, &b0, Some(&partial)),
            Err(BoundsError::NotStable { .. })
        ));
        let missing: StateSet = [0].into_iter().collect();
        assert!(matches!(
            check_stable(&m, &b0, &missing),
            Err(BoundsError::SupportNotContained { state: 1 })
        ));
    }

    #[test]
    fn identity_dynamics_stable_set_is_support() {
        let mut m = gen_tight_bound(3).unwrap();
        m.dynamics = vec![vec![vec![0, 0], vec![1, 1], vec![2, 2]]];
        let b0 = m.initial_belief.clone().unwrap();
        assert_eq!(stable_set(&m, &b0), [0, 1].into_iter().collect());
    }

    #[test]
    fn verify_tight_bound_family() {
        for n in 3..=6 {
            let m = gen_tight_bound(n).unwrap();
            let b0 = m.initial_belief.clone().unwrap();
            let r = verify_bounds(&m, &b0, &VerifyOptions::default()).unwrap();
            assert_eq!(r.empirical, 2 * n + 1);
            assert_eq!(r.thm2, Some(BigUint::from(2 * n + 1)));
            assert!(r.is_sound());
            assert!(r.tight().contains(&"thm2"));
        }
    }
}
