//! Human-designed reference metaheuristics.
//!
//! Each baseline exists twice: as a canonical program in the IR, and as a
//! hand-coded runner written directly against the problem API without going
//! through the interpreter. Both consume the RNG stream in the same order,
//! so a correct interpreter reproduces the hand-coded best-fitness traces
//! exactly; the runners double as execution oracles in tests and as the
//! comparison baselines in benchmark reports.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::fmath;
use crate::interpreter::{ExecutionReport, Member, RunError, RunParams};
use crate::ir::{Cond, Pointer, Program, Snippet};
use crate::problems::{BitString, Objective};
use crate::seeds;
use crate::vocab::{Component, EventKind};

/// Baseline kinds and their settings.
#[derive(Copy, Clone, PartialEq, Debug)]
pub enum BaselineKind {
    /// Iterated local search: 1-entity neighborhood, restart after three
    /// consecutive non-improving passes.
    Ils,
    /// Simulated annealing: initial acceptance rate 0.8, cooling 0.995.
    Sa,
    /// Tabu search: list capacity 10% of the dimension.
    Ts,
    /// Genetic algorithm: uniform crossover probability `eta_c`, per-bit
    /// flip probability `eta_m`.
    Ga { eta_c: f64, eta_m: f64 },
}

impl BaselineKind {
    pub const fn name(self) -> &'static str {
        match self {
            BaselineKind::Ils => "ils",
            BaselineKind::Sa => "sa",
            BaselineKind::Ts => "ts",
            BaselineKind::Ga { .. } => "ga",
        }
    }
}

/// Fraction that decodes to a 1-entity neighborhood for moderate dimensions.
const ONE_ENTITY_FRAC: f64 = 0.01;

/// Tabu list capacity fraction.
const TABU_FRAC: f64 = 0.10;

fn snippet(component: Component, params: &[f64], pointer: Pointer, condition: Cond) -> Snippet {
    Snippet {
        component,
        params: params.to_vec(),
        pointer,
        condition,
    }
}

/// Canonical IR form of a baseline.
pub fn as_program(kind: BaselineKind) -> Program {
    let fwd = Pointer::Forward;
    let once = Cond::Once;
    let snippets = match kind {
        BaselineKind::Ils => alloc::vec![
            snippet(
                Component::Traverse,
                &[],
                Pointer::Fork(2),
                Cond::Event(EventKind::Stagnation3),
            ),
            snippet(Component::ResetN, &[ONE_ENTITY_FRAC], fwd, once),
            snippet(Component::PairwiseSelect, &[], fwd, once),
            snippet(Component::Reinitialize, &[], fwd, once),
        ],
        BaselineKind::Sa => alloc::vec![
            snippet(Component::Traverse, &[], fwd, once),
            snippet(Component::ResetN, &[ONE_ENTITY_FRAC], fwd, once),
            snippet(Component::SimulatedAnnealingSelect, &[], fwd, once),
        ],
        BaselineKind::Ts => alloc::vec![
            snippet(Component::Traverse, &[], fwd, once),
            snippet(Component::ResetN, &[ONE_ENTITY_FRAC], fwd, once),
            snippet(Component::Tabu, &[TABU_FRAC], fwd, once),
        ],
        BaselineKind::Ga { eta_c, eta_m } => alloc::vec![
            snippet(Component::Tournament, &[], fwd, once),
            snippet(Component::CrossUniform, &[eta_c], fwd, once),
            snippet(Component::ResetRand, &[eta_m], fwd, once),
            snippet(Component::PairwiseSelect, &[], fwd, once),
        ],
    };
    Program::from_snippets(snippets).expect("baseline programs are valid by construction")
}

// ---------------------------------------------------------------------------
// Hand-coded runners
// ---------------------------------------------------------------------------
//
// Everything below deliberately re-implements the search loops; the only
// shared pieces are the bit-string type and FE accounting.

struct Accounting<'a> {
    objective: &'a dyn Objective,
    budget: usize,
    fe_used: usize,
    best: Option<Member>,
}

impl<'a> Accounting<'a> {
    fn exhausted(&self) -> bool {
        self.fe_used >= self.budget
    }

    fn eval(&mut self, x: &BitString) -> f64 {
        let f = self.objective.evaluate(x);
        self.fe_used += 1;
        if self.best.as_ref().map(|(_, bf)| f > *bf).unwrap_or(true) {
            self.best = Some((x.clone(), f));
        }
        f
    }

    fn best_fitness(&self) -> f64 {
        self.best.as_ref().map(|(_, f)| *f).unwrap_or(f64::MIN)
    }
}

fn init_population(acc: &mut Accounting, rng: &mut ChaCha8Rng, pop_size: usize) -> Vec<Member> {
    let d = acc.objective.dim();
    (0..pop_size)
        .map(|_| {
            let x = BitString::random(rng, d);
            let f = acc.eval(&x);
            (x, f)
        })
        .collect()
}

fn population_best(pop: &[Member]) -> f64 {
    pop.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max)
}

/// Offspring by flipping one random position per member; stops at the budget.
fn one_bit_offspring(
    acc: &mut Accounting,
    rng: &mut ChaCha8Rng,
    parents: &[Member],
) -> Vec<Member> {
    let d = acc.objective.dim();
    let mut out = Vec::with_capacity(parents.len());
    for parent in parents {
        if acc.exhausted() {
            break;
        }
        let mut child = parent.0.clone();
        child.flip(rng.random_range(0..d));
        let f = acc.eval(&child);
        out.push((child, f));
    }
    out
}

/// Elementwise better-of; missing offspring keep the incumbent, ties go to
/// the offspring.
fn pairwise_merge(pop: &mut [Member], new: Vec<Member>) {
    for (i, candidate) in new.into_iter().enumerate() {
        if i >= pop.len() {
            break;
        }
        if candidate.1 >= pop[i].1 {
            pop[i] = candidate;
        }
    }
}

fn report(acc: Accounting, trace: Vec<f64>) -> ExecutionReport {
    let (best_solution, best_fitness) = acc.best.expect("population was evaluated");
    ExecutionReport {
        best_fitness,
        best_solution,
        fe_used: acc.fe_used,
        trace,
    }
}

fn run_ils(acc: &mut Accounting, rng: &mut ChaCha8Rng, params: &RunParams) -> Vec<f64> {
    let d = acc.objective.dim();
    let mut pop = init_population(acc, rng, params.pop_size);
    let mut trace = Vec::new();
    loop {
        if acc.exhausted() {
            break;
        }
        let fe_before = acc.fe_used;
        // local-search phase: 1-bit moves until three flat passes
        let mut stagnation = 0u32;
        loop {
            if acc.exhausted() {
                break;
            }
            let best_before = population_best(&pop);
            let chosen = pop.clone();
            let offspring = one_bit_offspring(acc, rng, &chosen);
            pairwise_merge(&mut pop, offspring);
            if population_best(&pop) > best_before {
                stagnation = 0;
            } else {
                stagnation += 1;
            }
            if stagnation >= 3 {
                break;
            }
        }
        // global perturbation: full random restart
        let mut restarted = Vec::with_capacity(pop.len());
        for _ in 0..pop.len() {
            if acc.exhausted() {
                break;
            }
            let x = BitString::random(rng, d);
            let f = acc.eval(&x);
            restarted.push((x, f));
        }
        for (i, member) in restarted.into_iter().enumerate() {
            pop[i] = member;
        }
        if params.trace {
            trace.push(acc.best_fitness());
        }
        if acc.fe_used == fe_before {
            break;
        }
    }
    trace
}

fn run_sa(acc: &mut Accounting, rng: &mut ChaCha8Rng, params: &RunParams) -> Vec<f64> {
    let mut pop = init_population(acc, rng, params.pop_size);
    let mut trace = Vec::new();
    let mut temperature: Option<f64> = None;
    loop {
        if acc.exhausted() {
            break;
        }
        let fe_before = acc.fe_used;
        let chosen = pop.clone();
        let mut offspring = one_bit_offspring(acc, rng, &chosen);
        // align with the population
        offspring.truncate(pop.len());
        let missing = pop.len() - offspring.len();
        offspring.extend(pop[pop.len() - missing..].iter().cloned());
        // first pass fixes the temperature so the observed deteriorations
        // are accepted at a mean rate of 0.8
        if temperature.is_none() {
            let deltas: Vec<f64> = pop
                .iter()
                .zip(&offspring)
                .filter(|(old, new)| new.1 < old.1)
                .map(|(old, new)| old.1 - new.1)
                .collect();
            temperature = Some(initial_temperature(&deltas, 0.8));
        }
        let t = temperature.unwrap();
        for (i, candidate) in offspring.into_iter().enumerate() {
            if candidate.1 >= pop[i].1 {
                pop[i] = candidate;
            } else {
                let delta = pop[i].1 - candidate.1;
                if rng.random::<f64>() < fmath::exp(-delta / t) {
                    pop[i] = candidate;
                }
            }
        }
        temperature = Some(t * 0.995);
        if params.trace {
            trace.push(acc.best_fitness());
        }
        if acc.fe_used == fe_before {
            break;
        }
    }
    trace
}

/// Metropolis temperature reaching `target` mean acceptance on `deltas`.
fn initial_temperature(deltas: &[f64], target: f64) -> f64 {
    if deltas.is_empty() {
        return 1.0;
    }
    let mean_acc = |t: f64| {
        deltas.iter().map(|&d| fmath::exp(-d / t)).sum::<f64>() / deltas.len() as f64
    };
    let mut hi = 1.0;
    let mut guard = 0;
    while mean_acc(hi) < target && guard < 200 {
        hi *= 2.0;
        guard += 1;
    }
    let mut lo = 1e-12;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_acc(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn run_ts(acc: &mut Accounting, rng: &mut ChaCha8Rng, params: &RunParams) -> Vec<f64> {
    let d = acc.objective.dim();
    let capacity = (fmath::round(TABU_FRAC * d as f64) as usize).max(1);
    let mut pop = init_population(acc, rng, params.pop_size);
    let mut trace = Vec::new();
    let mut tabu: Vec<u64> = Vec::new();
    loop {
        if acc.exhausted() {
            break;
        }
        let fe_before = acc.fe_used;
        let record_before_pass = acc.best_fitness();
        let chosen = pop.clone();
        let mut offspring = one_bit_offspring(acc, rng, &chosen);
        offspring.truncate(pop.len());
        let missing = pop.len() - offspring.len();
        offspring.extend(pop[pop.len() - missing..].iter().cloned());
        for (i, candidate) in offspring.into_iter().enumerate() {
            let hash = candidate.0.stable_hash();
            // tabu solutions only pass on aspiration: beating the best seen
            // before this pass
            if tabu.contains(&hash) && candidate.1 <= record_before_pass {
                continue;
            }
            if candidate.1 >= pop[i].1 {
                pop[i] = candidate;
                tabu.push(hash);
                while tabu.len() > capacity {
                    tabu.remove(0);
                }
            }
        }
        if params.trace {
            trace.push(acc.best_fitness());
        }
        if acc.fe_used == fe_before {
            break;
        }
    }
    trace
}

fn run_ga(
    acc: &mut Accounting,
    rng: &mut ChaCha8Rng,
    params: &RunParams,
    eta_c: f64,
    eta_m: f64,
) -> Vec<f64> {
    let d = acc.objective.dim();
    let mut pop = init_population(acc, rng, params.pop_size);
    let mut trace = Vec::new();
    loop {
        if acc.exhausted() {
            break;
        }
        let fe_before = acc.fe_used;
        // mating selection: binary tournaments, ties keep the first draw
        let mut parents = Vec::with_capacity(pop.len());
        for _ in 0..pop.len() {
            let a = rng.random_range(0..pop.len());
            let b = rng.random_range(0..pop.len());
            parents.push(if pop[b].1 > pop[a].1 {
                pop[b].clone()
            } else {
                pop[a].clone()
            });
        }
        // uniform crossover with a distinct mate
        let mut crossed = Vec::with_capacity(parents.len());
        for i in 0..parents.len() {
            if acc.exhausted() {
                break;
            }
            let mate = {
                let j = rng.random_range(0..parents.len() - 1);
                if j >= i {
                    j + 1
                } else {
                    j
                }
            };
            let mut child = parents[i].0.clone();
            for b in 0..d {
                if rng.random::<f64>() < eta_c {
                    child.set(b, parents[mate].0.get(b));
                }
            }
            let f = acc.eval(&child);
            crossed.push((child, f));
        }
        // bit mutation over the crossover offspring
        let mut mutated = Vec::with_capacity(crossed.len());
        for parent in &crossed {
            if acc.exhausted() {
                break;
            }
            let mut child = parent.0.clone();
            for b in 0..d {
                if rng.random::<f64>() < eta_m {
                    child.flip(b);
                }
            }
            let f = acc.eval(&child);
            mutated.push((child, f));
        }
        pairwise_merge(&mut pop, mutated);
        if params.trace {
            trace.push(acc.best_fitness());
        }
        if acc.fe_used == fe_before {
            break;
        }
    }
    trace
}

/// Run a baseline without the interpreter, sharing its RNG discipline.
pub fn run_handcoded(
    kind: BaselineKind,
    objective: &dyn Objective,
    params: &RunParams,
) -> Result<ExecutionReport, RunError> {
    if params.budget < params.pop_size {
        return Err(RunError::BudgetTooSmall {
            budget: params.budget,
            pop_size: params.pop_size,
        });
    }
    let mut acc = Accounting {
        objective,
        budget: params.budget,
        fe_used: 0,
        best: None,
    };
    let mut rng = seeds::rng_from(params.seed);
    let trace = match kind {
        BaselineKind::Ils => run_ils(&mut acc, &mut rng, params),
        BaselineKind::Sa => run_sa(&mut acc, &mut rng, params),
        BaselineKind::Ts => run_ts(&mut acc, &mut rng, params),
        BaselineKind::Ga { eta_c, eta_m } => run_ga(&mut acc, &mut rng, params, eta_c, eta_m),
    };
    Ok(report(acc, trace))
}

// ---------------------------------------------------------------------------
// GA configuration by grid search
// ---------------------------------------------------------------------------

/// Crossover grid for the GA search.
pub const GA_ETA_C_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Mutation grid as multiples of `1/d`.
pub const GA_ETA_M_MULTIPLES: [f64; 3] = [1.0, 2.0, 5.0];

/// Exhaustive 27-config grid search, 5 seeds each; returns the config with
/// the best mean best-fitness (ties keep the earliest config).
pub fn ga_grid_search(
    objective: &dyn Objective,
    budget: usize,
    pop_size: usize,
    base_seed: u64,
) -> BaselineKind {
    let d = objective.dim() as f64;
    let mut best: Option<(f64, BaselineKind)> = None;
    for &eta_c in &GA_ETA_C_GRID {
        for &mult in &GA_ETA_M_MULTIPLES {
            let kind = BaselineKind::Ga {
                eta_c,
                eta_m: mult / d,
            };
            let mut sum = 0.0;
            for rep in 0..5u64 {
                let params = RunParams {
                    budget,
                    pop_size,
                    seed: seeds::derive(base_seed, &[seeds::tag::GRID_SEARCH, rep]),
                    trace: false,
                };
                sum += run_handcoded(kind, objective, &params).unwrap().best_fitness;
            }
            let mean = sum / 5.0;
            if best.as_ref().map(|(bm, _)| mean > *bm).unwrap_or(true) {
                best = Some((mean, kind));
            }
        }
    }
    best.unwrap().1
}
