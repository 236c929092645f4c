//! Program execution as population-based stochastic search.
//!
//! Within a pass the dataflow convention is: a choose component writes the
//! working set, search components chain (each reads the previous working
//! set, or the population when none exists) and evaluate one offspring per
//! parent at one FE each, and a select component merges the working set
//! back into the population. A pass that ends with unconsumed search output
//! commits it as an implicit `always_select`, so programs without select
//! components still have total semantics.
//!
//! Every function here is deterministic given the seed; the run consumes a
//! single RNG stream in a fixed draw order. The hand-coded baselines mirror
//! that order exactly, which is what makes trace-equivalence testing
//! possible.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::fmath;
use crate::ir::{Block, BlockGuard, BlockItem, Program};
use crate::problems::{BitString, Objective};
use crate::seeds;
use crate::vocab::{Component, EventKind};

/// A solution with its cached fitness.
pub type Member = (BitString, f64);

/// Run parameters common to every execution.
#[derive(Clone, Debug)]
pub struct RunParams {
    pub budget: usize,
    pub pop_size: usize,
    pub seed: u64,
    pub trace: bool,
}

/// Result of one run.
#[derive(Clone, Debug)]
pub struct ExecutionReport {
    pub best_fitness: f64,
    pub best_solution: BitString,
    pub fe_used: usize,
    /// Global best after each top-level pass (only when tracing).
    pub trace: Vec<f64>,
}

#[derive(thiserror::Error, Clone, PartialEq, Eq, Debug)]
pub enum RunError {
    #[error("budget {budget} smaller than population size {pop_size}")]
    BudgetTooSmall { budget: usize, pop_size: usize },
    #[error("initial population: {0}")]
    BadInitialPop(alloc::string::String),
}

/// Component roles as used by the execution engine.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum ChooseKind {
    Traverse,
    RouletteWheel,
    Tournament,
    Nich,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum SearchKind {
    ResetN,
    ResetRand,
    ResetCreep,
    CrossN,
    CrossUniform,
    Reinitialize,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum SelectKind {
    Greedy,
    Pairwise,
    RoundRobin,
    SimulatedAnnealing,
    Tabu,
    Always,
}

#[derive(Copy, Clone, PartialEq, Debug)]
pub enum Role {
    Choose(ChooseKind),
    Search(SearchKind),
    Select(SelectKind),
}

pub fn role(c: Component) -> Role {
    match c {
        Component::Traverse => Role::Choose(ChooseKind::Traverse),
        Component::RouletteWheel => Role::Choose(ChooseKind::RouletteWheel),
        Component::Tournament => Role::Choose(ChooseKind::Tournament),
        Component::Nich => Role::Choose(ChooseKind::Nich),
        Component::ResetN => Role::Search(SearchKind::ResetN),
        Component::ResetRand => Role::Search(SearchKind::ResetRand),
        Component::ResetCreep => Role::Search(SearchKind::ResetCreep),
        Component::CrossN => Role::Search(SearchKind::CrossN),
        Component::CrossUniform => Role::Search(SearchKind::CrossUniform),
        Component::Reinitialize => Role::Search(SearchKind::Reinitialize),
        Component::GreedySelect => Role::Select(SelectKind::Greedy),
        Component::PairwiseSelect => Role::Select(SelectKind::Pairwise),
        Component::RoundRobinSelect => Role::Select(SelectKind::RoundRobin),
        Component::SimulatedAnnealingSelect => Role::Select(SelectKind::SimulatedAnnealing),
        Component::Tabu => Role::Select(SelectKind::Tabu),
        Component::AlwaysSelect => Role::Select(SelectKind::Always),
    }
}

/// FE accounting plus global-best tracking. Choose and select are free;
/// every offspring evaluation costs one FE and evaluation stops exactly at
/// the budget.
pub struct EvalCtx<'a> {
    pub objective: &'a dyn Objective,
    pub fe_used: usize,
    pub budget: usize,
    best: Option<Member>,
}

impl<'a> EvalCtx<'a> {
    pub fn new(objective: &'a dyn Objective, budget: usize) -> Self {
        EvalCtx {
            objective,
            fe_used: 0,
            budget,
            best: None,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.fe_used >= self.budget
    }

    fn note_best(&mut self, x: &BitString, f: f64) {
        if self.best.as_ref().map(|(_, bf)| f > *bf).unwrap_or(true) {
            self.best = Some((x.clone(), f));
        }
    }

    /// Evaluate one solution, or `None` when the budget is exhausted.
    pub fn eval(&mut self, x: &BitString) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        let f = self.objective.evaluate(x);
        self.fe_used += 1;
        self.note_best(x, f);
        Some(f)
    }

    pub fn best_fitness(&self) -> f64 {
        self.best.as_ref().map(|(_, f)| *f).unwrap_or(f64::MIN)
    }
}

// ---------------------------------------------------------------------------
// Choose
// ---------------------------------------------------------------------------

/// Number of distinct entities for an n-type fraction.
pub fn decode_n(frac: f64, d: usize) -> usize {
    (fmath::round(frac * d as f64) as usize).max(1).min(d)
}

/// Niche radius used by `nich`.
pub fn nich_radius(d: usize) -> usize {
    d.div_ceil(10)
}

/// Tabu list capacity for a capacity fraction.
pub fn tabu_capacity(frac: f64, d: usize) -> usize {
    (fmath::round(frac * d as f64) as usize).max(1)
}

/// Pick one index by roulette wheel over `weights` (all positive).
fn spin(rng: &mut ChaCha8Rng, cumulative: &[f64], total: f64) -> usize {
    let u = rng.random::<f64>() * total;
    match cumulative.iter().position(|&c| u < c) {
        Some(i) => i,
        None => cumulative.len() - 1,
    }
}

/// Binary tournament over the population; ties keep the first contestant.
fn binary_tournament(rng: &mut ChaCha8Rng, pop: &[Member]) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    if pop[b].1 > pop[a].1 {
        b
    } else {
        a
    }
}

/// Choose the working set from the population. Consumes no FEs.
pub fn choose(kind: ChooseKind, pop: &[Member], d: usize, rng: &mut ChaCha8Rng) -> Vec<Member> {
    match kind {
        ChooseKind::Traverse => pop.to_vec(),
        ChooseKind::RouletteWheel => {
            let f_min = pop.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
            let f_max = pop.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
            let delta = 1e-9 * (f_max - f_min).abs().max(1.0);
            let mut cumulative = Vec::with_capacity(pop.len());
            let mut total = 0.0;
            for m in pop {
                total += m.1 - f_min + delta;
                cumulative.push(total);
            }
            (0..pop.len())
                .map(|_| pop[spin(rng, &cumulative, total)].clone())
                .collect()
        }
        ChooseKind::Tournament => (0..pop.len())
            .map(|_| pop[binary_tournament(rng, pop)].clone())
            .collect(),
        ChooseKind::Nich => {
            let radius = nich_radius(d);
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&a, &b| pop[b].1.partial_cmp(&pop[a].1).unwrap().then(a.cmp(&b)));
            let mut assigned = alloc::vec![false; pop.len()];
            let mut chosen = Vec::new();
            for &i in &order {
                if assigned[i] {
                    continue;
                }
                chosen.push(pop[i].clone());
                for &j in &order {
                    if !assigned[j] && pop[i].0.hamming(&pop[j].0) <= radius {
                        assigned[j] = true;
                    }
                }
            }
            while chosen.len() < pop.len() {
                chosen.push(pop[binary_tournament(rng, pop)].clone());
            }
            chosen
        }
    }
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

/// Flip `n` distinct positions of `x`.
fn flip_distinct(rng: &mut ChaCha8Rng, x: &BitString, n: usize) -> BitString {
    let d = x.len();
    let mut child = x.clone();
    if n == 1 {
        child.flip(rng.random_range(0..d));
        return child;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..n.min(d) {
        let j = rng.random_range(i..d);
        idx.swap(i, j);
        child.flip(idx[i]);
    }
    child
}

/// Pick a mate index distinct from `i` when possible.
fn pick_mate(rng: &mut ChaCha8Rng, len: usize, i: usize) -> usize {
    if len <= 1 {
        return i;
    }
    let j = rng.random_range(0..len - 1);
    if j >= i {
        j + 1
    } else {
        j
    }
}

/// One offspring per parent, evaluated as it is produced; parents beyond
/// the remaining budget yield no offspring.
pub fn search(
    kind: SearchKind,
    param: f64,
    parents: &[Member],
    ctx: &mut EvalCtx,
    rng: &mut ChaCha8Rng,
) -> Vec<Member> {
    let d = ctx.objective.dim();
    let mut out = Vec::with_capacity(parents.len());
    for i in 0..parents.len() {
        if ctx.exhausted() {
            break;
        }
        let child = match kind {
            SearchKind::ResetN => flip_distinct(rng, &parents[i].0, decode_n(param, d)),
            SearchKind::ResetRand | SearchKind::ResetCreep => {
                // creep reduces to a plain flip on binary domains
                let mut child = parents[i].0.clone();
                for b in 0..d {
                    if rng.random::<f64>() < param {
                        child.flip(b);
                    }
                }
                child
            }
            SearchKind::CrossN if d < 2 => parents[i].0.clone(),
            SearchKind::CrossN => {
                let mate = &parents[pick_mate(rng, parents.len(), i)].0;
                let n = decode_n(param, d).min(d - 1).max(1);
                // n distinct cut points in 1..d
                let mut cuts: Vec<usize> = (1..d).collect();
                for c in 0..n {
                    let j = rng.random_range(c..cuts.len());
                    cuts.swap(c, j);
                }
                cuts.truncate(n);
                cuts.sort_unstable();
                let mut child = BitString::zeros(d);
                let mut from_mate = false;
                let mut next_cut = 0usize;
                for b in 0..d {
                    while next_cut < cuts.len() && cuts[next_cut] == b {
                        from_mate = !from_mate;
                        next_cut += 1;
                    }
                    let src = if from_mate { mate } else { &parents[i].0 };
                    if src.get(b) {
                        child.set(b, true);
                    }
                }
                child
            }
            SearchKind::CrossUniform => {
                let mate = &parents[pick_mate(rng, parents.len(), i)].0;
                let mut child = parents[i].0.clone();
                for b in 0..d {
                    if rng.random::<f64>() < param {
                        child.set(b, mate.get(b));
                    }
                }
                child
            }
            SearchKind::Reinitialize => BitString::random(rng, d),
        };
        let f = ctx.eval(&child).expect("budget checked before generation");
        out.push((child, f));
    }
    out
}

// ---------------------------------------------------------------------------
// Select
// ---------------------------------------------------------------------------

/// Mutable selection state carried across a run.
#[derive(Default)]
pub struct SelectState {
    /// Annealing temperature; calibrated on the first invocation.
    pub sa_temperature: Option<f64>,
    /// FIFO of solution hashes.
    pub tabu: Vec<u64>,
}

/// Temperature such that the mean Metropolis acceptance of the observed
/// deteriorations is the target rate.
pub fn calibrate_temperature(deteriorations: &[f64], target: f64) -> f64 {
    if deteriorations.is_empty() {
        return 1.0;
    }
    let mean_acc = |t: f64| {
        deteriorations
            .iter()
            .map(|&delta| fmath::exp(-delta / t))
            .sum::<f64>()
            / deteriorations.len() as f64
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

/// Align the new set with the population for pairwise-style selection:
/// missing entries reuse the old member, extras are dropped.
fn align(pop: &[Member], mut new: Vec<Member>) -> Vec<Member> {
    new.truncate(pop.len());
    let missing = pop.len() - new.len();
    new.extend(pop[pop.len() - missing..].iter().cloned());
    new
}

/// Merge the new set into the population.
///
/// `aspiration_best` is the global best fitness at the start of the
/// enclosing pass; a tabu-listed solution is only accepted when it beats it.
#[allow(clippy::too_many_arguments)]
pub fn select(
    kind: SelectKind,
    param: Option<f64>,
    pop: &mut Vec<Member>,
    new: Vec<Member>,
    state: &mut SelectState,
    aspiration_best: f64,
    d: usize,
    rng: &mut ChaCha8Rng,
) {
    match kind {
        SelectKind::Greedy => {
            let p = pop.len();
            let mut pool = core::mem::take(pop);
            pool.extend(new);
            // stable sort keeps incumbents ahead of equal-fitness offspring
            pool.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            pool.truncate(p);
            *pop = pool;
        }
        SelectKind::Pairwise => {
            let new = align(pop, new);
            for (old, candidate) in pop.iter_mut().zip(new) {
                if candidate.1 >= old.1 {
                    *old = candidate;
                }
            }
        }
        SelectKind::RoundRobin => {
            let p = pop.len();
            let mut pool = core::mem::take(pop);
            pool.extend(new);
            let q = 10;
            let mut scored: Vec<(usize, usize)> = Vec::with_capacity(pool.len());
            for (i, member) in pool.iter().enumerate() {
                let mut wins = 0usize;
                for _ in 0..q {
                    let opp = rng.random_range(0..pool.len());
                    if member.1 >= pool[opp].1 {
                        wins += 1;
                    }
                }
                scored.push((i, wins));
            }
            scored.sort_by(|a, b| {
                b.1.cmp(&a.1)
                    .then(pool[b.0].1.partial_cmp(&pool[a.0].1).unwrap())
                    .then(a.0.cmp(&b.0))
            });
            *pop = scored.into_iter().take(p).map(|(i, _)| pool[i].clone()).collect();
        }
        SelectKind::SimulatedAnnealing => {
            let new = align(pop, new);
            if state.sa_temperature.is_none() {
                let deteriorations: Vec<f64> = pop
                    .iter()
                    .zip(&new)
                    .filter(|(old, cand)| cand.1 < old.1)
                    .map(|(old, cand)| old.1 - cand.1)
                    .collect();
                state.sa_temperature = Some(calibrate_temperature(&deteriorations, 0.8));
            }
            let t = state.sa_temperature.unwrap();
            for (old, candidate) in pop.iter_mut().zip(new) {
                if candidate.1 >= old.1 {
                    *old = candidate;
                } else {
                    let delta = old.1 - candidate.1;
                    if rng.random::<f64>() < fmath::exp(-delta / t) {
                        *old = candidate;
                    }
                }
            }
            state.sa_temperature = Some(t * 0.995);
        }
        SelectKind::Tabu => {
            let capacity = tabu_capacity(param.unwrap_or(0.10), d);
            let new = align(pop, new);
            for (old, candidate) in pop.iter_mut().zip(new) {
                let hash = candidate.0.stable_hash();
                let banned = state.tabu.contains(&hash) && candidate.1 <= aspiration_best;
                if banned {
                    continue;
                }
                if candidate.1 >= old.1 {
                    *old = candidate;
                    state.tabu.push(hash);
                    while state.tabu.len() > capacity {
                        state.tabu.remove(0);
                    }
                }
            }
        }
        SelectKind::Always => {
            let new = align(pop, new);
            *pop = new;
        }
    }
}

// ---------------------------------------------------------------------------
// Conditions
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum BlockStatus {
    Continue,
    Exit,
}

/// Decide whether a block continues after a finished pass.
///
/// A pass that consumed no FEs exits count-guarded and top-level blocks,
/// otherwise they could never terminate.
pub fn eval_condition(
    guard: BlockGuard,
    fe_since_entry: usize,
    budget: usize,
    improved: bool,
    stagnation: u32,
    consumed_this_pass: usize,
) -> BlockStatus {
    match guard {
        BlockGuard::Once => BlockStatus::Exit,
        BlockGuard::UntilBudget => {
            if consumed_this_pass == 0 {
                BlockStatus::Exit
            } else {
                BlockStatus::Continue
            }
        }
        BlockGuard::CountFrac(frac) => {
            if fe_since_entry as f64 >= frac * budget as f64 || consumed_this_pass == 0 {
                BlockStatus::Exit
            } else {
                BlockStatus::Continue
            }
        }
        BlockGuard::Event(EventKind::LocalOptimal) => {
            if improved {
                BlockStatus::Continue
            } else {
                BlockStatus::Exit
            }
        }
        BlockGuard::Event(EventKind::Stagnation3) => {
            if stagnation >= 3 {
                BlockStatus::Exit
            } else {
                BlockStatus::Continue
            }
        }
    }
}

// ---------------------------------------------------------------------------
// The run loop
// ---------------------------------------------------------------------------

struct Machine<'a, 'b> {
    program: &'a Program,
    ctx: &'b mut EvalCtx<'a>,
    rng: ChaCha8Rng,
    pop: Vec<Member>,
    working: Option<(Vec<Member>, bool)>,
    select_state: SelectState,
}

fn pop_best(pop: &[Member]) -> f64 {
    pop.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max)
}

impl<'a, 'b> Machine<'a, 'b> {
    /// Commit unconsumed search output as an implicit always-select.
    fn commit_working(&mut self) {
        if let Some((set, from_search)) = self.working.take() {
            if from_search {
                let d = self.ctx.objective.dim();
                select(
                    SelectKind::Always,
                    None,
                    &mut self.pop,
                    set,
                    &mut self.select_state,
                    self.ctx.best_fitness(),
                    d,
                    &mut self.rng,
                );
            }
        }
    }

    fn exec_snippet(&mut self, index: usize, aspiration_best: f64) {
        let snippet = &self.program.snippets()[index];
        let d = self.ctx.objective.dim();
        let param = snippet.params.first().copied();
        match role(snippet.component) {
            Role::Choose(kind) => {
                let set = choose(kind, &self.pop, d, &mut self.rng);
                self.working = Some((set, false));
            }
            Role::Search(kind) => {
                let parents = match self.working.take() {
                    Some((set, _)) => set,
                    None => self.pop.clone(),
                };
                let offspring = search(
                    kind,
                    param.unwrap_or(0.0),
                    &parents,
                    self.ctx,
                    &mut self.rng,
                );
                self.working = Some((offspring, true));
            }
            Role::Select(kind) => {
                let new = match self.working.take() {
                    Some((set, _)) => set,
                    None => self.pop.clone(),
                };
                select(
                    kind,
                    param,
                    &mut self.pop,
                    new,
                    &mut self.select_state,
                    aspiration_best,
                    d,
                    &mut self.rng,
                );
            }
        }
    }

    fn exec_items(&mut self, items: &[BlockItem], aspiration_best: f64) {
        for item in items {
            match item {
                BlockItem::Snippet(i) => self.exec_snippet(*i, aspiration_best),
                BlockItem::Block(b) => self.exec_block(b),
            }
        }
    }

    fn exec_block(&mut self, block: &Block) {
        let fe_entry = self.ctx.fe_used;
        let mut stagnation = 0u32;
        loop {
            if self.ctx.exhausted() {
                break;
            }
            let fe_before = self.ctx.fe_used;
            let best_before = pop_best(&self.pop);
            let aspiration = self.ctx.best_fitness();
            self.exec_items(&block.items, aspiration);
            self.commit_working();
            let improved = pop_best(&self.pop) > best_before;
            stagnation = if improved { 0 } else { stagnation + 1 };
            let status = eval_condition(
                block.guard,
                self.ctx.fe_used - fe_entry,
                self.ctx.budget,
                improved,
                stagnation,
                self.ctx.fe_used - fe_before,
            );
            if status == BlockStatus::Exit {
                break;
            }
        }
    }
}

/// Execute `program` on `objective` under the FE budget.
///
/// The initial population costs one FE per member unless a pre-evaluated
/// one is supplied. Identical inputs and seed give a bit-identical report.
pub fn run(
    program: &Program,
    objective: &dyn Objective,
    params: &RunParams,
    initial_pop: Option<&[Member]>,
) -> Result<ExecutionReport, RunError> {
    if params.budget < params.pop_size {
        return Err(RunError::BudgetTooSmall {
            budget: params.budget,
            pop_size: params.pop_size,
        });
    }
    let mut ctx = EvalCtx::new(objective, params.budget);
    let mut rng = seeds::rng_from(params.seed);
    let pop: Vec<Member> = match initial_pop {
        Some(init) => {
            if init.len() != params.pop_size {
                return Err(RunError::BadInitialPop(alloc::format!(
                    "expected {} members, got {}",
                    params.pop_size,
                    init.len()
                )));
            }
            for (x, f) in init {
                if x.len() != objective.dim() {
                    return Err(RunError::BadInitialPop(alloc::format!(
                        "member has length {}, dimension is {}",
                        x.len(),
                        objective.dim()
                    )));
                }
                ctx.note_best(x, *f);
            }
            init.to_vec()
        }
        None => (0..params.pop_size)
            .map(|_| {
                let x = BitString::random(&mut rng, objective.dim());
                let f = ctx.eval(&x).expect("budget covers the initial population");
                (x, f)
            })
            .collect(),
    };

    let tree = program.control_flow();
    let mut machine = Machine {
        program,
        ctx: &mut ctx,
        rng,
        pop,
        working: None,
        select_state: SelectState::default(),
    };
    let mut trace = Vec::new();
    loop {
        if machine.ctx.exhausted() {
            break;
        }
        let fe_before = machine.ctx.fe_used;
        let best_before = pop_best(&machine.pop);
        let aspiration = machine.ctx.best_fitness();
        machine.exec_items(&tree.root.items, aspiration);
        machine.commit_working();
        if params.trace {
            trace.push(machine.ctx.best_fitness());
        }
        let improved = pop_best(&machine.pop) > best_before;
        let status = eval_condition(
            BlockGuard::UntilBudget,
            machine.ctx.fe_used,
            machine.ctx.budget,
            improved,
            0,
            machine.ctx.fe_used - fe_before,
        );
        if status == BlockStatus::Exit {
            break;
        }
    }

    let (best_solution, best_fitness) = ctx
        .best
        .clone()
        .expect("at least the initial population was evaluated");
    Ok(ExecutionReport {
        best_fitness,
        best_solution,
        fe_used: ctx.fe_used,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::from_text;
    use crate::problems::{Family, ProblemInstance};
    use alloc::vec;

    fn members(fs: &[f64]) -> Vec<Member> {
        fs.iter()
            .enumerate()
            .map(|(i, &f)| {
                let mut x = BitString::zeros(8);
                x.set(i % 8, true);
                (x, f)
            })
            .collect()
    }

    fn onemax(d: usize) -> ProblemInstance {
        ProblemInstance::new(Family::OneMax, d, vec![], 1).unwrap()
    }

    #[test]
    fn traverse_returns_everything() {
        let pop = members(&[1.0, 2.0, 3.0]);
        let mut rng = seeds::rng_from(1);
        let chosen = choose(ChooseKind::Traverse, &pop, 8, &mut rng);
        assert_eq!(chosen, pop);
    }

    #[test]
    fn roulette_on_flat_fitness_is_uniform() {
        let pop = members(&[5.0, 5.0, 5.0, 5.0]);
        let mut rng = seeds::rng_from(2);
        let mut counts = [0usize; 4];
        let draws = 25_000; // choose returns pop.len() samples each call
        for _ in 0..draws {
            for m in choose(ChooseKind::RouletteWheel, &pop, 8, &mut rng) {
                let idx = (0..4).find(|&i| pop[i].0 == m.0).unwrap();
                counts[idx] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        let expected = total as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();
        // chi-square with 3 degrees of freedom, 0.999 quantile is ~16.3
        assert!(chi2 < 16.3, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn tournament_prefers_better_three_to_one() {
        let pop = members(&[5.0, 1.0]);
        let mut rng = seeds::rng_from(3);
        let mut wins = 0usize;
        let rounds = 50_000;
        for _ in 0..rounds {
            for m in choose(ChooseKind::Tournament, &pop, 8, &mut rng) {
                if m.1 == 5.0 {
                    wins += 1;
                }
            }
        }
        let rate = wins as f64 / (rounds * 2) as f64;
        assert!((rate - 0.75).abs() < 0.01, "rate = {rate}");
    }

    #[test]
    fn nich_keeps_best_per_cluster() {
        // two clusters far apart in Hamming distance; d=30 gives radius 3
        let d = 30;
        let mut a = BitString::zeros(d); // cluster around all-zeros
        let mut a2 = BitString::zeros(d);
        a2.flip(0);
        let b = BitString::ones(d);
        a.flip(5);
        let pop = vec![(a, 3.0), (a2, 4.0), (b.clone(), 1.0)];
        let mut rng = seeds::rng_from(4);
        let chosen = choose(ChooseKind::Nich, &pop, d, &mut rng);
        assert_eq!(chosen.len(), 3);
        // both niche centres present: the 4.0 member and the far member
        assert!(chosen.iter().any(|m| m.1 == 4.0));
        assert!(chosen.iter().any(|m| m.0 == b));
    }

    #[test]
    fn reset_n_flips_exactly_one() {
        let inst = onemax(20);
        let mut ctx = EvalCtx::new(&inst, 100);
        let mut rng = seeds::rng_from(5);
        let parents = vec![(BitString::zeros(20), 0.0); 10];
        let out = search(SearchKind::ResetN, 0.01, &parents, &mut ctx, &mut rng);
        assert_eq!(out.len(), 10);
        for (child, f) in &out {
            assert_eq!(child.hamming(&BitString::zeros(20)), 1);
            assert_eq!(*f, 1.0);
        }
        assert_eq!(ctx.fe_used, 10);
    }

    #[test]
    fn cross_uniform_p1_copies_mate() {
        let inst = onemax(16);
        let mut ctx = EvalCtx::new(&inst, 100);
        let mut rng = seeds::rng_from(6);
        let parents = vec![
            (BitString::zeros(16), 0.0),
            (BitString::ones(16), 16.0),
        ];
        let out = search(SearchKind::CrossUniform, 1.0, &parents, &mut ctx, &mut rng);
        // with two parents the mate is always the other one
        assert_eq!(out[0].0, BitString::ones(16));
        assert_eq!(out[1].0, BitString::zeros(16));
    }

    #[test]
    fn reset_rand_p0_costs_one_fe() {
        let inst = onemax(16);
        let mut ctx = EvalCtx::new(&inst, 100);
        let mut rng = seeds::rng_from(7);
        let parents = vec![(BitString::ones(16), 16.0)];
        let out = search(SearchKind::ResetRand, 0.0, &parents, &mut ctx, &mut rng);
        assert_eq!(out[0].0, BitString::ones(16));
        assert_eq!(ctx.fe_used, 1);
    }

    #[test]
    fn crossover_on_single_bit_degenerates_to_copy() {
        let inst = onemax(1);
        let mut ctx = EvalCtx::new(&inst, 10);
        let mut rng = seeds::rng_from(40);
        let parents = vec![(BitString::ones(1), 1.0), (BitString::zeros(1), 0.0)];
        let out = search(SearchKind::CrossN, 0.45, &parents, &mut ctx, &mut rng);
        assert_eq!(out[0].0, BitString::ones(1));
        assert_eq!(out[1].0, BitString::zeros(1));
    }

    #[test]
    fn search_clips_at_budget() {
        let inst = onemax(16);
        let mut ctx = EvalCtx::new(&inst, 3);
        let mut rng = seeds::rng_from(8);
        let parents = vec![(BitString::zeros(16), 0.0); 10];
        let out = search(SearchKind::Reinitialize, 0.0, &parents, &mut ctx, &mut rng);
        assert_eq!(out.len(), 3);
        assert_eq!(ctx.fe_used, 3);
    }

    #[test]
    fn greedy_takes_top_p() {
        let mut pop = members(&[3.0, 1.0, 2.0]);
        let new = members(&[2.0, 4.0]);
        let mut st = SelectState::default();
        let mut rng = seeds::rng_from(9);
        select(
            SelectKind::Greedy,
            None,
            &mut pop,
            new,
            &mut st,
            f64::MIN,
            8,
            &mut rng,
        );
        let mut fs: Vec<f64> = pop.iter().map(|m| m.1).collect();
        fs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(fs, vec![4.0, 3.0, 2.0]);
    }

    #[test]
    fn pairwise_keeps_better_new_wins_ties() {
        let mut pop = members(&[3.0, 2.0, 2.0]);
        let new = members(&[4.0, 1.0, 2.0]);
        let marker = new[2].0.clone();
        let mut st = SelectState::default();
        let mut rng = seeds::rng_from(10);
        select(
            SelectKind::Pairwise,
            None,
            &mut pop,
            new,
            &mut st,
            f64::MIN,
            8,
            &mut rng,
        );
        assert_eq!(pop[0].1, 4.0);
        assert_eq!(pop[1].1, 2.0);
        assert_eq!(pop[2].0, marker); // tie goes to the new solution
    }

    #[test]
    fn always_select_replaces_population() {
        let mut pop = members(&[9.0, 9.0]);
        let new = members(&[1.0, 0.5]);
        let expect = new.clone();
        let mut st = SelectState::default();
        let mut rng = seeds::rng_from(11);
        select(
            SelectKind::Always,
            None,
            &mut pop,
            new,
            &mut st,
            f64::MIN,
            8,
            &mut rng,
        );
        assert_eq!(pop, expect);
    }

    #[test]
    fn sa_always_accepts_improvements() {
        let mut pop = members(&[1.0, 2.0]);
        let new = members(&[5.0, 6.0]);
        let mut st = SelectState::default();
        let mut rng = seeds::rng_from(12);
        select(
            SelectKind::SimulatedAnnealing,
            None,
            &mut pop,
            new,
            &mut st,
            f64::MIN,
            8,
            &mut rng,
        );
        assert_eq!(pop[0].1, 5.0);
        assert_eq!(pop[1].1, 6.0);
        // no deteriorations observed: neutral initial temperature, then cooled
        assert!((st.sa_temperature.unwrap() - 0.995).abs() < 1e-12);
    }

    #[test]
    fn sa_temperature_hits_target_acceptance() {
        let deltas = vec![1.0, 2.0, 0.5, 3.0];
        let t = calibrate_temperature(&deltas, 0.8);
        let acc: f64 = deltas.iter().map(|&d| fmath::exp(-d / t)).sum::<f64>() / 4.0;
        assert!((acc - 0.8).abs() < 1e-9, "acceptance {acc}");
    }

    #[test]
    fn tabu_rejects_listed_unless_record() {
        let d = 8;
        let old = members(&[5.0]);
        let candidate = {
            let mut x = BitString::zeros(8);
            x.flip(7);
            (x, 6.0)
        };
        let hash = candidate.0.stable_hash();
        let mut st = SelectState::default();
        st.tabu.push(hash);
        let mut rng = seeds::rng_from(13);

        // listed and not a record: rejected
        let mut pop = old.clone();
        select(
            SelectKind::Tabu,
            Some(0.5),
            &mut pop,
            vec![candidate.clone()],
            &mut st,
            10.0,
            d,
            &mut rng,
        );
        assert_eq!(pop[0].1, 5.0);

        // listed but beats the global best: aspiration admits it
        let mut pop = old.clone();
        select(
            SelectKind::Tabu,
            Some(0.5),
            &mut pop,
            vec![candidate.clone()],
            &mut st,
            5.5,
            d,
            &mut rng,
        );
        assert_eq!(pop[0].1, 6.0);
    }

    #[test]
    fn condition_once_exits_after_one_pass() {
        assert_eq!(
            eval_condition(BlockGuard::Once, 10, 100, true, 0, 10),
            BlockStatus::Exit
        );
    }

    #[test]
    fn condition_count_tracks_budget_fraction() {
        // 5% of 5000 = 250 FEs
        assert_eq!(
            eval_condition(BlockGuard::CountFrac(0.05), 249, 5000, true, 0, 50),
            BlockStatus::Continue
        );
        assert_eq!(
            eval_condition(BlockGuard::CountFrac(0.05), 250, 5000, true, 0, 50),
            BlockStatus::Exit
        );
        // a pass that made no progress cannot loop forever
        assert_eq!(
            eval_condition(BlockGuard::CountFrac(0.05), 10, 5000, true, 0, 0),
            BlockStatus::Exit
        );
    }

    #[test]
    fn condition_stagnation_needs_three_flat_passes() {
        let g = BlockGuard::Event(EventKind::Stagnation3);
        assert_eq!(eval_condition(g, 0, 100, true, 0, 5), BlockStatus::Continue);
        assert_eq!(eval_condition(g, 0, 100, false, 2, 5), BlockStatus::Continue);
        assert_eq!(eval_condition(g, 0, 100, false, 3, 5), BlockStatus::Exit);
    }

    #[test]
    fn budget_equal_to_pop_size_initializes_only() {
        let inst = onemax(20);
        let program = from_text("reset_n(0.01) | forward | once").unwrap();
        let params = RunParams {
            budget: 50,
            pop_size: 50,
            seed: 3,
            trace: true,
        };
        let report = run(&program, &inst, &params, None).unwrap();
        assert_eq!(report.fe_used, 50);
        assert!(report.trace.is_empty());
    }

    #[test]
    fn budget_below_pop_size_is_rejected() {
        let inst = onemax(20);
        let program = from_text("reset_n(0.01) | forward | once").unwrap();
        let params = RunParams {
            budget: 10,
            pop_size: 50,
            seed: 3,
            trace: false,
        };
        assert!(matches!(
            run(&program, &inst, &params, None),
            Err(RunError::BudgetTooSmall { .. })
        ));
    }

    /// `reinitialize` alone is uniform random sampling; with a shared seed
    /// the run must equal a direct sampling oracle draw for draw.
    #[test]
    fn reinitialize_program_equals_random_sampling_oracle() {
        let d = 25;
        let inst = onemax(d);
        let program = from_text("reinitialize | forward | once").unwrap();
        let params = RunParams {
            budget: 600,
            pop_size: 50,
            seed: 42,
            trace: false,
        };
        let report = run(&program, &inst, &params, None).unwrap();

        let mut rng = seeds::rng_from(42);
        let mut best = f64::MIN;
        for _ in 0..600 {
            let x = BitString::random(&mut rng, d);
            best = best.max(inst.evaluate(&x));
        }
        assert_eq!(report.best_fitness, best);
        assert_eq!(report.fe_used, 600);
    }

    #[test]
    fn identical_seeds_identical_reports() {
        let inst = onemax(30);
        let program = from_text(
            "roulette_wheel | fork(2) | count(5%FE); reset_n(0.01) | forward | once; \
             pairwise_select | forward | once",
        )
        .unwrap();
        let params = RunParams {
            budget: 800,
            pop_size: 20,
            seed: 9,
            trace: true,
        };
        let a = run(&program, &inst, &params, None).unwrap();
        let b = run(&program, &inst, &params, None).unwrap();
        assert_eq!(a.best_fitness, b.best_fitness);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best_solution, b.best_solution);
        assert_eq!(a.fe_used, b.fe_used);
    }

    #[test]
    fn trace_is_monotone_and_fe_conserved() {
        let inst = onemax(30);
        let program = from_text(
            "tournament | forward | once; cross_uniform(0.7) | forward | once; \
             reset_rand(0.1) | forward | once; pairwise_select | forward | once",
        )
        .unwrap();
        let params = RunParams {
            budget: 1000,
            pop_size: 20,
            seed: 17,
            trace: true,
        };
        let report = run(&program, &inst, &params, None).unwrap();
        // every pass wants more evaluations, so the budget is consumed fully
        assert_eq!(report.fe_used, 1000);
        assert!(report.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn degenerate_programs_terminate() {
        let inst = onemax(20);
        for text in [
            "traverse | forward | once",
            "greedy_select | iterate | count(20%FE)",
            "traverse | fork(1) | count(5%FE); pairwise_select | forward | once",
            "reset_n(0.05) | iterate | count(10%FE)",
        ] {
            let program = from_text(text).unwrap();
            let params = RunParams {
                budget: 300,
                pop_size: 10,
                seed: 5,
                trace: false,
            };
            let report = run(&program, &inst, &params, None).unwrap();
            assert!(report.fe_used <= 300, "{text}");
        }
    }

    #[test]
    fn search_only_program_commits_offspring() {
        // without any select the offspring replace the population each pass
        let inst = onemax(20);
        let program = from_text("reset_n(0.05) | forward | once").unwrap();
        let params = RunParams {
            budget: 200,
            pop_size: 10,
            seed: 6,
            trace: true,
        };
        let report = run(&program, &inst, &params, None).unwrap();
        assert_eq!(report.fe_used, 200);
        assert_eq!(report.trace.len(), 19);
    }

    #[test]
    fn pre_evaluated_population_charges_no_fes() {
        let inst = onemax(20);
        let mut rng = seeds::rng_from(30);
        let init: Vec<Member> = (0..10)
            .map(|_| {
                let x = BitString::random(&mut rng, 20);
                let f = inst.evaluate(&x);
                (x, f)
            })
            .collect();
        let best_init = pop_best(&init);
        let program = from_text("traverse | forward | once").unwrap();
        let params = RunParams {
            budget: 100,
            pop_size: 10,
            seed: 31,
            trace: false,
        };
        let report = run(&program, &inst, &params, Some(&init)).unwrap();
        assert_eq!(report.fe_used, 0);
        assert_eq!(report.best_fitness, best_init);
    }

    /// The three-snippet hill-climber block reaches the OneMax optimum at
    /// d=100 within 5000 FEs for a large majority of seeds.
    #[test]
    fn roulette_hill_climber_solves_onemax_100() {
        let inst = onemax(100);
        let program = from_text(
            "roulette_wheel | fork(2) | count(5%FE); reset_n(0.01) | forward | once; \
             pairwise_select | forward | once",
        )
        .unwrap();
        let mut solved = 0;
        for seed in 0..10 {
            let params = RunParams {
                budget: 5000,
                pop_size: 50,
                seed,
                trace: false,
            };
            let report = run(&program, &inst, &params, None).unwrap();
            if report.best_fitness == 100.0 {
                solved += 1;
            }
        }
        assert!(solved >= 8, "solved {solved}/10");
    }
}
