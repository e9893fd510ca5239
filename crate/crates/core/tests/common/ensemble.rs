//! Seeded families of small random models.

use detpomdp::model::{gen_random, AdmissibilityMode, RandomOptions, RandomSizes};
use detpomdp::DetPomdpModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn draw(seed: u64, salt: u64, max_x: usize, max_u: usize, max_o: usize, max_t: usize) -> (ChaCha8Rng, RandomSizes) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.rotate_left(32));
    let sizes = RandomSizes {
        states: rng.gen_range(1..=max_x),
        controls: rng.gen_range(1..=max_u),
        observations: rng.gen_range(1..=max_o),
        horizon: rng.gen_range(1..=max_t),
    };
    (rng, sizes)
}

/// `|X| ≤ 6`, `|U|, |O| ≤ 3`, `T ≤ 4`, every control admissible.
pub fn filtering_instance(seed: u64) -> DetPomdpModel {
    let (mut rng, sizes) = draw(seed, 0xF11, 6, 3, 3, 4);
    let options = RandomOptions {
        stationary: rng.gen_bool(0.5),
        ..RandomOptions::default()
    };
    gen_random(seed, sizes, &options).unwrap()
}

/// `|X| ≤ 4`, `|U| ≤ 2`, `|O| ≤ 2`, `T ≤ 3`; a third restrictive, a third with `+∞` costs.
pub fn oracle_instance(seed: u64) -> DetPomdpModel {
    let (mut rng, sizes) = draw(seed, 0x0AC, 4, 2, 2, 3);
    let options = RandomOptions {
        admissibility: match seed % 3 {
            0 => AdmissibilityMode::Restrictive,
            1 => AdmissibilityMode::Random,
            _ => AdmissibilityMode::Full,
        },
        infinite_cost_probability: if seed % 3 == 2 || seed.is_multiple_of(5) {
            0.2
        } else {
            0.0
        },
        stationary: rng.gen_bool(0.3),
        ..RandomOptions::default()
    };
    gen_random(seed, sizes, &options).unwrap()
}

/// Mixed separated and unstructured models: affine, product and plain in turn.
pub fn bounds_instance(seed: u64) -> DetPomdpModel {
    let (mut rng, sizes) = draw(seed, 0xB0D, 6, 3, 3, 4);
    let options = RandomOptions {
        affine: seed.is_multiple_of(3),
        product: seed % 3 == 1,
        admissibility: if rng.gen_bool(0.3) {
            AdmissibilityMode::Random
        } else {
            AdmissibilityMode::Full
        },
        stationary: rng.gen_bool(0.5),
        ..RandomOptions::default()
    };
    gen_random(seed, sizes, &options).unwrap()
}

/// Small enough for exact closure checks: `|X| ≤ 4`, `|U|, |O| ≤ 2`, `T ≤ 4`.
pub fn separation_instance(seed: u64) -> DetPomdpModel {
    let (mut rng, sizes) = draw(seed, 0x5E9, 4, 2, 2, 4);
    let options = RandomOptions {
        affine: seed.is_multiple_of(4),
        product: seed % 4 == 1,
        admissibility: if rng.gen_bool(0.4) {
            AdmissibilityMode::Random
        } else {
            AdmissibilityMode::Full
        },
        stationary: rng.gen_bool(0.5),
        ..RandomOptions::default()
    };
    gen_random(seed, sizes, &options).unwrap()
}
