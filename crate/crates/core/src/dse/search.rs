use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use super::{dominates, DseError, Evaluator, SearchSpace, Trial, POPULATION, TOURNAMENT};
use crate::rng::SplitMix64;

/// Evaluates `genomes` concurrently; trial ids follow their order.
pub(super) fn evaluate_all(
    space: &SearchSpace,
    eval: &Evaluator,
    genomes: Vec<Vec<usize>>,
) -> Result<Vec<Trial>, DseError> {
    evaluate_from(space, eval, 0, genomes)
}

fn evaluate_from(
    space: &SearchSpace,
    eval: &Evaluator,
    first_id: usize,
    genomes: Vec<Vec<usize>>,
) -> Result<Vec<Trial>, DseError> {
    genomes
        .into_par_iter()
        .enumerate()
        .map(|(i, g)| {
            let cfg = space.config(&g);
            eval.evaluate(first_id + i, g, cfg)
        })
        .collect()
}

/// Uniform sample of `min(budget, cardinality)` distinct points, in draw
/// order.
pub(super) fn random(space: &SearchSpace, eval: &Evaluator, budget: usize, seed: u64) -> Result<Vec<Trial>, DseError> {
    let n = space.cardinality();
    let k = n.min(budget as u64);
    let mut rng = SplitMix64::new(seed);
    // Partial Fisher-Yates over the virtual sequence 0..n.
    let mut moved: HashMap<u64, u64> = HashMap::new();
    let mut picks = Vec::with_capacity(k as usize);
    for i in 0..k {
        let j = i + rng.below(n - i);
        let at_j = *moved.get(&j).unwrap_or(&j);
        let at_i = *moved.get(&i).unwrap_or(&i);
        moved.insert(j, at_i);
        picks.push(space.genome(at_j));
    }
    evaluate_all(space, eval, picks)
}

fn random_genome(space: &SearchSpace, rng: &mut SplitMix64) -> Vec<usize> {
    space.axes().iter().map(|(_, v)| rng.below(v.len() as u64) as usize).collect()
}

/// Moves one axis that has an alternative to a different value.
fn mutate(space: &SearchSpace, parent: &[usize], rng: &mut SplitMix64) -> Vec<usize> {
    let mut child = parent.to_vec();
    let open: Vec<usize> = space.axes().iter().enumerate().filter(|(_, (_, v))| v.len() > 1).map(|(i, _)| i).collect();
    if open.is_empty() {
        return child;
    }
    let axis = open[rng.below(open.len() as u64) as usize];
    let n = space.axes()[axis].1.len() as u64;
    let shift = 1 + rng.below(n - 1);
    child[axis] = ((child[axis] as u64 + shift) % n) as usize;
    child
}

/// Regularized evolution: a fixed-size population where the oldest member
/// dies each time a tournament winner's mutated child joins.
pub(super) fn evolution(
    space: &SearchSpace,
    eval: &Evaluator,
    budget: usize,
    seed: u64,
) -> Result<Vec<Trial>, DseError> {
    let mut rng = SplitMix64::new(seed);
    let initial: Vec<Vec<usize>> = (0..budget.min(POPULATION)).map(|_| random_genome(space, &mut rng)).collect();
    let mut trials = evaluate_all(space, eval, initial)?;
    let mut population: VecDeque<usize> = (0..trials.len()).collect();
    while trials.len() < budget {
        let contenders: Vec<usize> =
            (0..TOURNAMENT).map(|_| population[rng.below(population.len() as u64) as usize]).collect();
        let winner = *contenders
            .iter()
            .min_by_key(|&&id| fitness(&trials, &population, id))
            .expect("tournament is never empty");
        let child = mutate(space, &trials[winner].genome, &mut rng);
        let id = trials.len();
        trials.extend(evaluate_from(space, eval, id, vec![child])?);
        population.push_back(id);
        if population.len() > POPULATION {
            population.pop_front();
        }
    }
    Ok(trials)
}

/// Lower is fitter: feasible first, then fewer dominating population
/// members, then the smaller LUT-cycle product.
fn fitness(trials: &[Trial], population: &VecDeque<usize>, id: usize) -> (bool, usize, u128, usize) {
    let Some(p) = trials[id].objectives() else {
        return (true, usize::MAX, u128::MAX, id);
    };
    let dominated_by =
        population.iter().filter(|&&o| trials[o].objectives().is_some_and(|q| dominates(q, p))).count();
    (false, dominated_by, p.0 as u128 * p.1 as u128, id)
}
