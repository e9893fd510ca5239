//! Checks of the measure algebra, shared by the property suites and the acceptance run.

use std::collections::HashSet;

use detpomdp::measure::{
    backward_restrict, compose_mappings, forward_restrict, pushforward, renormalize, Belief, ExtendedState, Measure,
    StateSet, StepMapping,
};
use detpomdp::Rational;
use num_traits::{One, Zero};
use rand::Rng;

use super::q;

pub type Check = Result<(), String>;

pub fn all_tables(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |y| {
                    let mut t = t.clone();
                    t.push(y);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn all_subsets(n: usize) -> Vec<StateSet> {
    (0..1u32 << n)
        .map(|mask| (0..n).filter(|&x| mask >> x & 1 == 1).collect())
        .collect()
}

/// Every self-map of `X̄` fixing `∂`.
pub fn all_step_mappings(n: usize) -> Vec<StepMapping> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t: Vec<ExtendedState>| {
                (0..=n).map(move |y| {
                    let mut t = t.clone();
                    t.push(if y == n {
                        ExtendedState::Cemetery
                    } else {
                        ExtendedState::State(y)
                    });
                    t
                })
            })
            .collect();
    }
    out.into_iter().map(StepMapping::from_states).collect()
}

fn point(n: usize, i: usize) -> ExtendedState {
    if i == n {
        ExtendedState::Cemetery
    } else {
        ExtendedState::State(i)
    }
}

/// Measures on `X̄` for every nonempty support, with a flat and a skewed weighting.
pub fn sample_measures(n: usize) -> Vec<Measure> {
    let mut out = Vec::new();
    for mask in 1..1u32 << (n + 1) {
        let pts: Vec<usize> = (0..=n).filter(|&i| mask >> i & 1 == 1).collect();
        out.push(Measure::new(pts.iter().map(|&i| (point(n, i), q(1, 2)))).unwrap());
        out.push(Measure::new(pts.iter().enumerate().map(|(k, &i)| (point(n, i), q(k as i64 + 1, 7)))).unwrap());
    }
    out
}

/// Beliefs on `X` for every nonempty support, flat and skewed.
pub fn sample_beliefs(n: usize) -> Vec<Belief> {
    sample_measures(n)
        .into_iter()
        .filter(|m| m.weight(ExtendedState::Cemetery).is_zero())
        .map(|m| renormalize(&m))
        .collect()
}

fn preimage(f: &[usize], ys: &StateSet) -> StateSet {
    (0..f.len()).filter(|&x| ys.contains(&f[x])).collect()
}

pub fn check_bridge(f: &[usize], ys: &StateSet) -> Check {
    let fw = forward_restrict(f, ys);
    let bw = backward_restrict(f, &preimage(f, ys));
    (fw == bw)
        .then_some(())
        .ok_or_else(|| format!("bridge: f={f:?} Y={ys:?}: {fw} vs {bw}"))
}

pub fn check_backward_composition(f: &[usize], ys: &StateSet, f2: &[usize], ys2: &StateSet) -> Check {
    let lhs = compose_mappings(&backward_restrict(f2, ys2), &backward_restrict(f, ys));
    let ff: Vec<usize> = f.iter().map(|&y| f2[y]).collect();
    let dom: StateSet = ys.iter().copied().filter(|&x| ys2.contains(&f[x])).collect();
    let rhs = backward_restrict(&ff, &dom);
    (lhs == rhs)
        .then_some(())
        .ok_or_else(|| format!("backward composition: f={f:?} Y={ys:?} f'={f2:?} Y'={ys2:?}"))
}

pub fn check_composition_pushforward(g: &StepMapping, g2: &StepMapping, b: &Belief) -> Check {
    let two_step = renormalize(&pushforward(g, renormalize(&pushforward(g2, b.measure())).measure()));
    let one_step = renormalize(&pushforward(&compose_mappings(g, g2), b.measure()));
    (two_step == one_step)
        .then_some(())
        .ok_or_else(|| format!("composition pushforward: g={g} g'={g2} b={b}: {two_step} vs {one_step}"))
}

pub fn check_mass(g: &StepMapping, m: &Measure) -> Check {
    (pushforward(g, m).total() == m.total())
        .then_some(())
        .ok_or_else(|| format!("mass: g={g}"))
}

fn normalized(weights: Vec<(usize, Rational)>) -> Belief {
    let total: Rational = weights.iter().map(|(_, w)| w.clone()).sum();
    if total.is_zero() {
        return Belief::cemetery();
    }
    renormalize(&Measure::new(weights.into_iter().map(|(y, w)| (ExtendedState::State(y), w / &total))).unwrap())
}

/// Closed forms of `R ∘ (f_Y)⋆` and `R ∘ (f^Y)⋆` evaluated from their two-branch formulas.
pub fn check_closed_forms(f: &[usize], ys: &StateSet, b: &Belief) -> Check {
    let forward_closed = normalized(
        b.state_weights()
            .filter(|(x, _)| ys.contains(&f[*x]))
            .map(|(x, w)| (f[x], w.clone()))
            .collect(),
    );
    let forward = renormalize(&pushforward(&forward_restrict(f, ys), b.measure()));
    if forward != forward_closed {
        return Err(format!("forward closed form: f={f:?} Y={ys:?} b={b}"));
    }
    let backward_closed = normalized(
        b.state_weights()
            .filter(|(x, _)| ys.contains(x))
            .map(|(x, w)| (f[x], w.clone()))
            .collect(),
    );
    let backward = renormalize(&pushforward(&backward_restrict(f, ys), b.measure()));
    if backward != backward_closed {
        return Err(format!("backward closed form: f={f:?} Y={ys:?} b={b}"));
    }
    Ok(())
}

/// `|{g⋆m : g ∈ J}| ≤ |X̄|^|supp m|`.
pub fn check_counting(family: &[StepMapping], m: &Measure) -> Check {
    let n = family.first().map_or(0, StepMapping::num_states);
    let images: HashSet<Measure> = family.iter().map(|g| pushforward(g, m)).collect();
    let bound = (n as u64 + 1).pow(m.entries().len() as u32);
    (images.len() as u64 <= bound)
        .then_some(())
        .ok_or_else(|| format!("counting: {} images exceed {bound}", images.len()))
}

/// For disjoint `Y_i` (state `y` lies in `Y_{labels[y]}`, label 0 meaning none):
/// `Σ_i |supp((f_{Y_i})⋆ m) ∩ X| ≤ |supp(m restricted to f⁻¹(∪ Y_i))|`.
pub fn check_support_bound(f: &[usize], labels: &[usize], m: &Measure) -> Check {
    let k = labels.iter().copied().max().unwrap_or(0);
    let mut lhs = 0;
    for i in 1..=k {
        let yi: StateSet = (0..f.len()).filter(|&y| labels[y] == i).collect();
        lhs += pushforward(&forward_restrict(f, &yi), m)
            .support()
            .into_iter()
            .filter(|p| !p.is_cemetery())
            .count();
    }
    let rhs = m
        .entries()
        .iter()
        .filter(|(p, _)| p.state().is_some_and(|x| labels[f[x]] > 0))
        .count();
    (lhs <= rhs)
        .then_some(())
        .ok_or_else(|| format!("support bound: f={f:?} labels={labels:?}: {lhs} > {rhs}"))
}

fn all_labelings(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                (0..=n).map(move |l| {
                    let mut t = t.clone();
                    t.push(l);
                    t
                })
            })
            .collect();
    }
    out
}

/// Runs every law over all tables, subsets and sample measures on `n` states.
/// Returns the number of individual checks.
pub fn exhaustive(n: usize) -> Result<usize, String> {
    let tables = all_tables(n);
    let subsets = all_subsets(n);
    let maps = all_step_mappings(n);
    let measures = sample_measures(n);
    let beliefs = sample_beliefs(n);
    let mut count = 0;
    for f in &tables {
        for ys in &subsets {
            check_bridge(f, ys)?;
            count += 1;
            for b in &beliefs {
                check_closed_forms(f, ys, b)?;
                count += 1;
            }
            for f2 in &tables {
                for ys2 in &subsets {
                    check_backward_composition(f, ys, f2, ys2)?;
                    count += 1;
                }
            }
        }
        for labels in all_labelings(n) {
            for m in &measures {
                check_support_bound(f, &labels, m)?;
                count += 1;
            }
        }
    }
    for g in &maps {
        for m in &measures {
            check_mass(g, m)?;
            count += 1;
        }
        for g2 in &maps {
            for b in &beliefs {
                check_composition_pushforward(g, g2, b)?;
                count += 1;
            }
        }
    }
    for m in &measures {
        check_counting(&maps, m)?;
        count += 1;
    }
    if maps.len() <= 16 {
        for mask in 1u32..1 << maps.len() {
            let family: Vec<StepMapping> = (0..maps.len())
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| maps[i].clone())
                .collect();
            for m in &measures {
                check_counting(&family, m)?;
                count += 1;
            }
        }
    }
    Ok(count)
}

pub fn random_table<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

pub fn random_subset<R: Rng>(rng: &mut R, n: usize) -> StateSet {
    (0..n).filter(|_| rng.gen_bool(0.5)).collect()
}

pub fn random_mapping<R: Rng>(rng: &mut R, n: usize) -> StepMapping {
    StepMapping::from_states(
        (0..n)
            .map(|_| {
                let y = rng.gen_range(0..=n);
                point(n, y)
            })
            .collect(),
    )
}

pub fn random_measure<R: Rng>(rng: &mut R, n: usize) -> Measure {
    let m = Measure::new((0..=n).map(|i| (point(n, i), q(rng.gen_range(0..=4), rng.gen_range(1..=5))))).unwrap();
    if m.is_zero() {
        Measure::new([(ExtendedState::State(0), Rational::one())]).unwrap()
    } else {
        m
    }
}

pub fn random_belief<R: Rng>(rng: &mut R, n: usize) -> Belief {
    let m = random_measure(rng, n);
    let b = renormalize(&m);
    if b.is_cemetery() {
        Belief::dirac(0)
    } else {
        b
    }
}

/// One random draw of every law on a state space of size `1..=max_n`.
pub fn random_trial<R: Rng>(rng: &mut R, max_n: usize) -> Check {
    let n = rng.gen_range(1..=max_n);
    let (f, f2) = (random_table(rng, n), random_table(rng, n));
    let (ys, ys2) = (random_subset(rng, n), random_subset(rng, n));
    let (g, g2) = (random_mapping(rng, n), random_mapping(rng, n));
    let b = random_belief(rng, n);
    let m = random_measure(rng, n);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=n)).collect();
    let family: Vec<StepMapping> = (0..rng.gen_range(1..=20)).map(|_| random_mapping(rng, n)).collect();
    check_bridge(&f, &ys)?;
    check_backward_composition(&f, &ys, &f2, &ys2)?;
    check_composition_pushforward(&g, &g2, &b)?;
    check_closed_forms(&f, &ys, &b)?;
    check_mass(&g, &m)?;
    check_counting(&family, &m)?;
    check_support_bound(&f, &labels, &m)
}
