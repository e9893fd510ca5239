mod common;

use common::checks::{pushforward_equivalence, support_contraction};
use common::ensemble::{bounds_instance, filtering_instance};
use detpomdp::filtering::{belief_step, obs_prob};
use detpomdp::model::gen_tight_bound;
use detpomdp::reachability::reachable_layers;
use detpomdp::Belief;
use num_traits::{One, Zero};

#[test]
fn pushforward_route_on_random_models() {
    for seed in 0..25 {
        pushforward_equivalence(&filtering_instance(seed)).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn pushforward_route_on_tight_bound_reachable_set() {
    let m = gen_tight_bound(3).unwrap();
    assert!(pushforward_equivalence(&m).unwrap() > 0);
}

#[test]
fn support_contracts() {
    for seed in 0..25 {
        support_contraction(&bounds_instance(seed)).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

#[test]
fn observation_probabilities_sum_to_one_and_match_cemetery() {
    for seed in 0..25 {
        let m = filtering_instance(seed);
        let layers = reachable_layers(&m, m.initial_belief.as_ref().unwrap(), m.horizon).unwrap();
        for t in 0..m.horizon {
            for &id in layers.layer(t) {
                let b = layers.belief(id);
                if b.is_cemetery() {
                    continue;
                }
                for u in 0..m.num_controls() {
                    let mut total = detpomdp::Rational::zero();
                    for o in 0..m.num_observations() {
                        let p = obs_prob(&m, t, b, u, o);
                        assert_eq!(p.is_zero(), belief_step(&m, t, b, u, o).is_cemetery());
                        total += p;
                    }
                    assert!(total.is_one(), "seed {seed} t={t} b={b} u={u}");
                }
            }
        }
    }
}

#[test]
fn cemetery_absorbs() {
    for seed in 0..10 {
        let m = filtering_instance(seed);
        for t in 0..m.horizon {
            for u in 0..m.num_controls() {
                for o in 0..m.num_observations() {
                    assert!(belief_step(&m, t, &Belief::cemetery(), u, o).is_cemetery());
                }
            }
        }
    }
}
