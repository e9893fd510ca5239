//! Instance generators: the tight-bound family, the water tank and seeded random models.

use num_bigint::BigInt;
use num_traits::One;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DetPomdpModel, ModelError, Structure};
use crate::measure::{make_belief, Belief};
use crate::value::{ExtendedValue, Rational};

fn zero_costs(nx: usize, nu: usize) -> Vec<Vec<ExtendedValue>> {
    vec![vec![ExtendedValue::zero(); nu]; nx]
}

/// The family attaining the separated bound with equality.
///
/// States `x1..xn`, controls `u1, u2`, observations `o1, o2`. Control `u1` keeps
/// the state and reveals `o2` exactly at `xn`; control `u2` rotates the states
/// along a single `n`-cycle. The initial belief is uniform on `{x1, x2}` and the
/// horizon is `2n`.
pub fn gen_tight_bound(n: usize) -> Result<DetPomdpModel, ModelError> {
    if n < 3 {
        return Err(ModelError::Generator(format!(
            "tight-bound family needs n >= 3, got {n}"
        )));
    }
    let dynamics: Vec<Vec<usize>> = (0..n).map(|i| vec![i, (i + 1) % n]).collect();
    let obs: Vec<Vec<usize>> = (0..n).map(|y| vec![usize::from(y == n - 1), 0]).collect();
    let half = Rational::new(BigInt::from(1), BigInt::from(2));
    Ok(DetPomdpModel {
        horizon: 2 * n,
        stationary: true,
        states: (1..=n).map(|i| format!("x{i}")).collect(),
        controls: vec!["u1".into(), "u2".into()],
        observations: vec!["o1".into(), "o2".into()],
        dynamics: vec![dynamics],
        obs0: vec![0; n],
        obs: vec![obs],
        cost: vec![zero_costs(n, 2)],
        final_cost: vec![ExtendedValue::zero(); n],
        admissible: vec![vec![vec![0, 1]; n]],
        initial_belief: Some(make_belief([(0, half.clone()), (1, half)], n)?),
        structure: None,
    })
}

/// Parameters of the tank emptying problem `f(x,u) = x − u`, `L_t = c_t·u`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TankParams {
    pub states: Vec<i64>,
    pub controls: Vec<i64>,
    /// Observation thresholds, ascending. A level `x` observes the largest threshold `≤ x`.
    pub thresholds: Vec<i64>,
    pub horizon: usize,
    /// One price per transition `t ∈ {0,…,T−1}`.
    pub prices: Vec<Rational>,
    /// Inclusive level range for a generic initial belief, if one should be attached.
    pub initial_support: Option<(i64, i64)>,
    pub belief_seed: u64,
}

/// Square wave of period 20 alternating between prices 1 and 3.
pub fn default_tank_prices(horizon: usize) -> Vec<Rational> {
    (0..horizon)
        .map(|t| Rational::from_integer(BigInt::from(if (t / 10) % 2 == 0 { 1 } else { 3 })))
        .collect()
}

impl TankParams {
    /// Levels 0..=300, withdrawals 0..=9, thresholds {0, 1, 20, 40, …, 300}, T = 100.
    pub fn instance_1() -> Self {
        let mut thresholds = vec![0, 1];
        thresholds.extend((20..=300).step_by(20));
        TankParams {
            states: (0..=300).collect(),
            controls: (0..=9).collect(),
            thresholds,
            horizon: 100,
            prices: default_tank_prices(100),
            initial_support: Some((260, 300)),
            belief_seed: 0,
        }
    }

    /// Instance 1 with thresholds {1, 6, 11, 51, 101, 151, 201, 251}.
    pub fn instance_2() -> Self {
        TankParams {
            thresholds: vec![1, 6, 11, 51, 101, 151, 201, 251],
            ..Self::instance_1()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TankInstance {
    pub model: DetPomdpModel,
    pub warnings: Vec<String>,
}

fn strictly_increasing(v: &[i64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Builds the tank model.
///
/// Levels below the smallest threshold observe an extra `floor` observation.
/// Inadmissible withdrawals (`u > x`) are sent to the lowest level so that the
/// dynamics stay total; the admissibility table excludes them.
pub fn gen_tank(params: &TankParams) -> Result<TankInstance, ModelError> {
    let gen_err = |m: String| Err(ModelError::Generator(m));
    let TankParams {
        states,
        controls,
        thresholds,
        horizon,
        prices,
        ..
    } = params;
    if states.is_empty() || controls.is_empty() || thresholds.is_empty() {
        return gen_err("state, control and threshold grids must be nonempty".into());
    }
    for (name, v) in [("states", states), ("controls", controls), ("thresholds", thresholds)] {
        if !strictly_increasing(v) {
            return gen_err(format!("{name} must be strictly increasing"));
        }
        if v[0] < 0 {
            return gen_err(format!("{name} must be nonnegative"));
        }
    }
    if *horizon == 0 {
        return gen_err("horizon must be at least 1".into());
    }
    if prices.len() != *horizon {
        return gen_err(format!("expected {horizon} prices, got {}", prices.len()));
    }
    let max_x = *states.last().unwrap();
    if controls[0] > max_x {
        return gen_err("no control is admissible at any level".into());
    }

    let mut warnings = Vec::new();
    let mut observations: Vec<String> = thresholds.iter().map(i64::to_string).collect();
    if let Some(&o) = thresholds.iter().find(|&&o| o > max_x) {
        warnings.push(format!(
            "threshold {o} exceeds the largest level {max_x} and is never observed"
        ));
    }
    let floor = if thresholds[0] > states[0] {
        warnings.push(format!(
            "levels below {} observe the extra observation \"floor\"",
            thresholds[0]
        ));
        observations.push("floor".into());
        Some(observations.len() - 1)
    } else {
        None
    };

    let index_of = |level: i64| states.binary_search(&level).ok();
    let observe = |level: i64| -> usize {
        match thresholds.partition_point(|&o| o <= level) {
            0 => floor.expect("floor observation exists when a level is below all thresholds"),
            k => k - 1,
        }
    };

    let mut dynamics = Vec::with_capacity(states.len());
    let mut admissible = Vec::with_capacity(states.len());
    for &x in states {
        let mut row = Vec::with_capacity(controls.len());
        let mut allowed = Vec::new();
        for (ui, &u) in controls.iter().enumerate() {
            if u <= x {
                match index_of(x - u) {
                    Some(y) => row.push(y),
                    None => return gen_err(format!("level {x} minus withdrawal {u} is not on the grid")),
                }
                allowed.push(ui);
            } else {
                row.push(0);
            }
        }
        dynamics.push(row);
        admissible.push(allowed);
    }
    let obs_row: Vec<usize> = states.iter().map(|&x| observe(x)).collect();
    let obs: Vec<Vec<usize>> = obs_row.iter().map(|&o| vec![o; controls.len()]).collect();

    let cost_slice = |c: &Rational| -> Vec<Vec<ExtendedValue>> {
        let row: Vec<ExtendedValue> = controls
            .iter()
            .map(|&u| ExtendedValue::Finite(c * Rational::from_integer(BigInt::from(u))))
            .collect();
        vec![row; states.len()]
    };
    let constant_price = prices.iter().all(|c| *c == prices[0]);
    let cost = if constant_price {
        vec![cost_slice(&prices[0])]
    } else {
        prices.iter().map(cost_slice).collect()
    };

    let mut model = DetPomdpModel {
        horizon: *horizon,
        stationary: constant_price,
        states: states.iter().map(i64::to_string).collect(),
        controls: controls.iter().map(i64::to_string).collect(),
        observations,
        dynamics: vec![dynamics],
        obs0: obs_row,
        obs: vec![obs],
        cost,
        final_cost: vec![ExtendedValue::zero(); states.len()],
        admissible: vec![admissible],
        initial_belief: None,
        structure: Some(Structure::Affine {
            offsets: vec![controls
                .iter()
                .map(|&u| Rational::from_integer(BigInt::from(-u)))
                .collect()],
        }),
    };
    if let Some((lo, hi)) = params.initial_support {
        let support: Vec<usize> = (0..states.len()).filter(|&i| (lo..=hi).contains(&states[i])).collect();
        if support.is_empty() {
            return gen_err(format!("no level lies in the initial support [{lo}, {hi}]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.belief_seed);
        model.initial_belief = Some(random_belief(&mut rng, &support));
    }
    Ok(TankInstance { model, warnings })
}

/// A belief on the given states with independent random weights in `1..=1000`.
pub fn random_belief<R: Rng + ?Sized>(rng: &mut R, support: &[usize]) -> Belief {
    assert!(!support.is_empty(), "random belief needs a nonempty support");
    let weights: Vec<i64> = support.iter().map(|_| rng.gen_range(1..=1000)).collect();
    let total: i64 = weights.iter().sum();
    let n = support.iter().max().unwrap() + 1;
    make_belief(
        support
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| (x, Rational::new(BigInt::from(w), BigInt::from(total)))),
        n,
    )
    .expect("weights are positive and sum to one")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSizes {
    pub states: usize,
    pub controls: usize,
    pub observations: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdmissibilityMode {
    /// Every control admissible everywhere.
    #[default]
    Full,
    /// Random nonempty subsets.
    Random,
    /// Random subsets that may be empty.
    Restrictive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomOptions {
    /// Integer labels, `f_t(x,u) = clamp(x + g_t(u))`, annotated as affine.
    pub affine: bool,
    /// Labels `2^k`, `f_t(x,u) = clamp(x · g_t(u))`, annotated as product.
    pub product: bool,
    pub admissibility: AdmissibilityMode,
    /// Probability that a cost entry is `+∞`.
    pub infinite_cost_probability: f64,
    /// Emit one slice per table instead of `T`.
    pub stationary: bool,
    /// Size of the initial belief support; random when absent.
    pub support_size: Option<usize>,
}

impl Default for RandomOptions {
    fn default() -> Self {
        RandomOptions {
            affine: false,
            product: false,
            admissibility: AdmissibilityMode::Full,
            infinite_cost_probability: 0.0,
            stationary: false,
            support_size: None,
        }
    }
}

fn random_cost<R: Rng>(rng: &mut R, p_inf: f64) -> ExtendedValue {
    if p_inf > 0.0 && rng.gen_bool(p_inf) {
        return ExtendedValue::Infinite;
    }
    let num: i64 = rng.gen_range(0..=10);
    let den: i64 = rng.gen_range(1..=3);
    ExtendedValue::Finite(Rational::new(BigInt::from(num), BigInt::from(den)))
}

/// A seeded random model; the same seed, sizes and options give the same model.
pub fn gen_random(seed: u64, sizes: RandomSizes, options: &RandomOptions) -> Result<DetPomdpModel, ModelError> {
    let RandomSizes {
        states: nx,
        controls: nu,
        observations: no,
        horizon,
    } = sizes;
    if nx == 0 || nu == 0 || no == 0 || horizon == 0 {
        return Err(ModelError::Generator("all sizes must be at least 1".into()));
    }
    if options.affine && options.product {
        return Err(ModelError::Generator(
            "affine and product structure are exclusive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slices = if options.stationary { 1 } else { horizon };

    let mut dynamics = Vec::with_capacity(slices);
    let mut structure_rows = Vec::new();
    // Pairs where a structured map had to be clamped; excluded from admissibility.
    let mut clamped = vec![vec![vec![false; nu]; nx]; slices];
    for clamped_slice in clamped.iter_mut() {
        let slice: Vec<Vec<usize>> = if options.affine || options.product {
            let shifts: Vec<i64> = (0..nu).map(|_| rng.gen_range(-2..=2)).collect();
            let slice = (0..nx)
                .map(|x| {
                    shifts
                        .iter()
                        .enumerate()
                        .map(|(u, &g)| {
                            let target = x as i64 + g;
                            let y = target.clamp(0, nx as i64 - 1);
                            clamped_slice[x][u] = y != target;
                            y as usize
                        })
                        .collect()
                })
                .collect();
            structure_rows.push(
                shifts
                    .iter()
                    .map(|&g| {
                        if options.affine {
                            Rational::from_integer(BigInt::from(g))
                        } else if g >= 0 {
                            Rational::from_integer(BigInt::from(1i64 << g))
                        } else {
                            Rational::new(BigInt::one(), BigInt::from(1i64 << -g))
                        }
                    })
                    .collect(),
            );
            slice
        } else {
            (0..nx)
                .map(|_| (0..nu).map(|_| rng.gen_range(0..nx)).collect())
                .collect()
        };
        dynamics.push(slice);
    }
    let obs: Vec<Vec<Vec<usize>>> = (0..slices)
        .map(|_| {
            (0..nx)
                .map(|_| (0..nu).map(|_| rng.gen_range(0..no)).collect())
                .collect()
        })
        .collect();
    let obs0: Vec<usize> = (0..nx).map(|_| rng.gen_range(0..no)).collect();
    let p_inf = options.infinite_cost_probability;
    let cost: Vec<Vec<Vec<ExtendedValue>>> = (0..slices)
        .map(|_| {
            (0..nx)
                .map(|_| (0..nu).map(|_| random_cost(&mut rng, p_inf)).collect())
                .collect()
        })
        .collect();
    let final_cost: Vec<ExtendedValue> = (0..nx).map(|_| random_cost(&mut rng, p_inf)).collect();
    let admissible: Vec<Vec<Vec<usize>>> = (0..slices)
        .map(|s| {
            (0..nx)
                .map(|x| {
                    let mut set: Vec<usize> = match options.admissibility {
                        AdmissibilityMode::Full => (0..nu).collect(),
                        AdmissibilityMode::Random | AdmissibilityMode::Restrictive => {
                            (0..nu).filter(|_| rng.gen_bool(0.5)).collect()
                        }
                    };
                    if set.is_empty() && options.admissibility == AdmissibilityMode::Random {
                        set.push(rng.gen_range(0..nu));
                    }
                    set.retain(|&u| !clamped[s][x][u]);
                    set
                })
                .collect()
        })
        .collect();

    let k = options
        .support_size
        .unwrap_or_else(|| rng.gen_range(1..=nx))
        .clamp(1, nx);
    let mut support: Vec<usize> = sample(&mut rng, nx, k).into_vec();
    support.sort_unstable();
    let weights: Vec<i64> = support.iter().map(|_| rng.gen_range(1..=5)).collect();
    let total: i64 = weights.iter().sum();
    let initial_belief = make_belief(
        support
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| (x, Rational::new(BigInt::from(w), BigInt::from(total)))),
        nx,
    )?;

    let states: Vec<String> = if options.product {
        (0..nx).map(|k| (1u64 << k).to_string()).collect()
    } else if options.affine {
        (0..nx).map(|k| k.to_string()).collect()
    } else {
        (0..nx).map(|k| format!("s{k}")).collect()
    };
    let structure = if options.affine {
        Some(Structure::Affine {
            offsets: structure_rows,
        })
    } else if options.product {
        Some(Structure::Product {
            factors: structure_rows,
        })
    } else {
        None
    };
    Ok(DetPomdpModel {
        horizon,
        stationary: options.stationary,
        states,
        controls: (0..nu).map(|k| format!("a{k}")).collect(),
        observations: (0..no).map(|k| format!("z{k}")).collect(),
        dynamics,
        obs0,
        obs,
        cost,
        final_cost,
        admissible,
        initial_belief: Some(initial_belief),
        structure,
    })
}
