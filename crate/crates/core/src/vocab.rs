//! Token vocabulary and the sampling grammar.
//!
//! The vocabulary is a fixed, closed set of 54 tokens: 16 algorithm
//! components, two 10-value hyperparameter grids, 3 pointers, 5 fork
//! offsets, 8 conditions and the `begin`/`end` sentinels. The grammar
//! tracks which token kinds may legally follow the current prefix and is
//! used both for masked sampling and for parsing.

use alloc::vec::Vec;
use core::fmt;

/// Total number of tokens.
pub const VOCAB_SIZE: usize = 54;

/// Maximum number of snippets (components) per program.
pub const MAX_SNIPPETS: usize = 6;

/// Largest fork offset; with at most six snippets nothing larger is reachable.
pub const MAX_FORK_OFFSET: u8 = 5;

/// Grid for `n`-type hyperparameters, as fractions of the dimension.
pub const N_GRID: [f64; 10] = [0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45];

/// Grid for `p`-type (probability) hyperparameters.
pub const P_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Count-condition thresholds as fractions of the run's FE budget.
pub const COUNT_FRACTIONS: [f64; 5] = [0.01, 0.05, 0.10, 0.15, 0.20];

/// Index of a token in the vocabulary, in `[0, VOCAB_SIZE)`.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TokenId(pub u16);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Hyperparameter grid selector.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum ParamKind {
    /// Fraction of the dimension, decoded as `max(1, round(frac * d))`.
    NFrac,
    /// Plain probability.
    PFrac,
}

impl ParamKind {
    pub fn grid(self) -> &'static [f64; 10] {
        match self {
            ParamKind::NFrac => &N_GRID,
            ParamKind::PFrac => &P_GRID,
        }
    }
}

/// Component role in a search pass.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Category {
    Choose,
    Search,
    Select,
}

/// The sixteen algorithm components.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub enum Component {
    Traverse,
    RouletteWheel,
    Tournament,
    Nich,
    ResetN,
    ResetRand,
    ResetCreep,
    CrossN,
    CrossUniform,
    Reinitialize,
    GreedySelect,
    PairwiseSelect,
    RoundRobinSelect,
    SimulatedAnnealingSelect,
    Tabu,
    AlwaysSelect,
}

impl Component {
    pub const ALL: [Component; 16] = [
        Component::Traverse,
        Component::RouletteWheel,
        Component::Tournament,
        Component::Nich,
        Component::ResetN,
        Component::ResetRand,
        Component::ResetCreep,
        Component::CrossN,
        Component::CrossUniform,
        Component::Reinitialize,
        Component::GreedySelect,
        Component::PairwiseSelect,
        Component::RoundRobinSelect,
        Component::SimulatedAnnealingSelect,
        Component::Tabu,
        Component::AlwaysSelect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Traverse => "traverse",
            Component::RouletteWheel => "roulette_wheel",
            Component::Tournament => "tournament",
            Component::Nich => "nich",
            Component::ResetN => "reset_n",
            Component::ResetRand => "reset_rand",
            Component::ResetCreep => "reset_creep",
            Component::CrossN => "cross_n",
            Component::CrossUniform => "cross_uniform",
            Component::Reinitialize => "reinitialize",
            Component::GreedySelect => "greedy_select",
            Component::PairwiseSelect => "pairwise_select",
            Component::RoundRobinSelect => "round_robin_select",
            Component::SimulatedAnnealingSelect => "simulated_annealing_select",
            Component::Tabu => "tabu",
            Component::AlwaysSelect => "always_select",
        }
    }

    pub fn from_name(name: &str) -> Option<Component> {
        Component::ALL.iter().copied().find(|c| c.name() == name)
    }

    pub fn category(self) -> Category {
        match self {
            Component::Traverse
            | Component::RouletteWheel
            | Component::Tournament
            | Component::Nich => Category::Choose,
            Component::ResetN
            | Component::ResetRand
            | Component::ResetCreep
            | Component::CrossN
            | Component::CrossUniform
            | Component::Reinitialize => Category::Search,
            Component::GreedySelect
            | Component::PairwiseSelect
            | Component::RoundRobinSelect
            | Component::SimulatedAnnealingSelect
            | Component::Tabu
            | Component::AlwaysSelect => Category::Select,
        }
    }

    /// Hyperparameter kinds, in the order their tokens follow the component.
    pub fn param_kinds(self) -> &'static [ParamKind] {
        match self {
            Component::ResetN | Component::CrossN | Component::Tabu => &[ParamKind::NFrac],
            Component::ResetRand | Component::ResetCreep | Component::CrossUniform => {
                &[ParamKind::PFrac]
            }
            _ => &[],
        }
    }

    pub fn arity(self) -> usize {
        self.param_kinds().len()
    }
}

/// Control-flow pointer kinds.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum PointerKind {
    Forward,
    Iterate,
    Fork,
}

impl PointerKind {
    pub fn name(self) -> &'static str {
        match self {
            PointerKind::Forward => "forward",
            PointerKind::Iterate => "iterate",
            PointerKind::Fork => "fork",
        }
    }
}

/// Loop-exit events.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum EventKind {
    /// Exit when a block pass yields no improvement of the population best.
    LocalOptimal,
    /// Exit after three consecutive non-improving passes.
    Stagnation3,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::LocalOptimal => "local_optimal",
            EventKind::Stagnation3 => "stagnation_3",
        }
    }

    pub fn from_name(name: &str) -> Option<EventKind> {
        match name {
            "local_optimal" => Some(EventKind::LocalOptimal),
            "stagnation_3" => Some(EventKind::Stagnation3),
            _ => None,
        }
    }
}

/// What a token denotes.
#[derive(Copy, Clone, PartialEq, Debug)]
pub enum TokenKind {
    Component(Component),
    /// Index into [`N_GRID`].
    NValue(u8),
    /// Index into [`P_GRID`].
    PValue(u8),
    Pointer(PointerKind),
    /// Fork offset in `[1, MAX_FORK_OFFSET]`.
    ForkOffset(u8),
    CondOnce,
    /// Index into [`COUNT_FRACTIONS`].
    CondCount(u8),
    CondEvent(EventKind),
    Begin,
    End,
}

// Fixed index layout. Tests assert the total and the layout invariants.
const COMPONENT_BASE: u16 = 0;
const N_BASE: u16 = 16;
const P_BASE: u16 = 26;
const POINTER_BASE: u16 = 36;
const FORK_OFFSET_BASE: u16 = 39;
const ONCE_INDEX: u16 = 44;
const COUNT_BASE: u16 = 45;
const EVENT_BASE: u16 = 50;
const BEGIN_INDEX: u16 = 52;
const END_INDEX: u16 = 53;

/// The immutable token table. Cheap to construct, safe to share.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    kinds: Vec<TokenKind>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut kinds = Vec::with_capacity(VOCAB_SIZE);
        for c in Component::ALL {
            kinds.push(TokenKind::Component(c));
        }
        for i in 0..10 {
            kinds.push(TokenKind::NValue(i));
        }
        for i in 0..10 {
            kinds.push(TokenKind::PValue(i));
        }
        kinds.push(TokenKind::Pointer(PointerKind::Forward));
        kinds.push(TokenKind::Pointer(PointerKind::Iterate));
        kinds.push(TokenKind::Pointer(PointerKind::Fork));
        for k in 1..=MAX_FORK_OFFSET {
            kinds.push(TokenKind::ForkOffset(k));
        }
        kinds.push(TokenKind::CondOnce);
        for i in 0..COUNT_FRACTIONS.len() as u8 {
            kinds.push(TokenKind::CondCount(i));
        }
        kinds.push(TokenKind::CondEvent(EventKind::LocalOptimal));
        kinds.push(TokenKind::CondEvent(EventKind::Stagnation3));
        kinds.push(TokenKind::Begin);
        kinds.push(TokenKind::End);
        debug_assert_eq!(kinds.len(), VOCAB_SIZE);
        Vocabulary { kinds }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kind(&self, token: TokenId) -> TokenKind {
        self.kinds[token.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, TokenKind)> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| (TokenId(i as u16), k))
    }

    pub fn component_token(&self, c: Component) -> TokenId {
        let pos = Component::ALL.iter().position(|&x| x == c).unwrap();
        TokenId(COMPONENT_BASE + pos as u16)
    }

    pub fn n_token(&self, grid_index: usize) -> TokenId {
        assert!(grid_index < 10);
        TokenId(N_BASE + grid_index as u16)
    }

    pub fn p_token(&self, grid_index: usize) -> TokenId {
        assert!(grid_index < 10);
        TokenId(P_BASE + grid_index as u16)
    }

    pub fn pointer_token(&self, p: PointerKind) -> TokenId {
        match p {
            PointerKind::Forward => TokenId(POINTER_BASE),
            PointerKind::Iterate => TokenId(POINTER_BASE + 1),
            PointerKind::Fork => TokenId(POINTER_BASE + 2),
        }
    }

    pub fn fork_offset_token(&self, offset: u8) -> TokenId {
        assert!((1..=MAX_FORK_OFFSET).contains(&offset));
        TokenId(FORK_OFFSET_BASE + (offset - 1) as u16)
    }

    pub fn once_token(&self) -> TokenId {
        TokenId(ONCE_INDEX)
    }

    pub fn count_token(&self, frac_index: usize) -> TokenId {
        assert!(frac_index < COUNT_FRACTIONS.len());
        TokenId(COUNT_BASE + frac_index as u16)
    }

    pub fn event_token(&self, e: EventKind) -> TokenId {
        match e {
            EventKind::LocalOptimal => TokenId(EVENT_BASE),
            EventKind::Stagnation3 => TokenId(EVENT_BASE + 1),
        }
    }

    pub fn begin_token(&self) -> TokenId {
        TokenId(BEGIN_INDEX)
    }

    pub fn end_token(&self) -> TokenId {
        TokenId(END_INDEX)
    }

    /// Decode a hyperparameter token for the given kind, if it matches.
    pub fn param_value(&self, token: TokenId, kind: ParamKind) -> Option<f64> {
        match (self.kind(token), kind) {
            (TokenKind::NValue(i), ParamKind::NFrac) => Some(N_GRID[i as usize]),
            (TokenKind::PValue(i), ParamKind::PFrac) => Some(P_GRID[i as usize]),
            _ => None,
        }
    }
}

/// Phase of the token grammar.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Phase {
    ExpectComponent,
    /// Expecting hyperparameter `index` of `component`.
    ExpectParam { component: Component, index: u8 },
    ExpectPointer,
    ExpectForkOffset,
    ExpectCondition,
    Done,
}

/// Grammar cursor over a partially generated sequence.
///
/// Small value type; copy freely. `allow_events` gates event-condition
/// tokens during sampling (they stay parseable either way).
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct GrammarState {
    pub phase: Phase,
    pub components_emitted: u8,
    pub snippets_emitted: u8,
    pub last_pointer: Option<PointerKind>,
    pub allow_events: bool,
}

impl GrammarState {
    /// State right after the `begin` token.
    pub fn new(allow_events: bool) -> Self {
        GrammarState {
            phase: Phase::ExpectComponent,
            components_emitted: 0,
            snippets_emitted: 0,
            last_pointer: None,
            allow_events,
        }
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }
}

/// Allowed/forbidden flags over the vocabulary.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MaskVector {
    allowed: [bool; VOCAB_SIZE],
}

impl MaskVector {
    fn none() -> Self {
        MaskVector {
            allowed: [false; VOCAB_SIZE],
        }
    }

    fn set(&mut self, t: TokenId) {
        self.allowed[t.index()] = true;
    }

    pub fn allows(&self, t: TokenId) -> bool {
        self.allowed[t.index()]
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    pub fn iter_allowed(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.allowed
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| TokenId(i as u16))
    }
}

#[derive(thiserror::Error, Clone, PartialEq, Eq, Debug)]
pub enum GrammarError {
    #[error("grammar already done; no further token expected")]
    AlreadyDone,
    #[error("token {token:?} not allowed in phase {phase}")]
    Disallowed { token: u16, phase: PhaseName },
}

/// Printable phase name used in error messages.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct PhaseName(pub Phase);

impl fmt::Display for PhaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Phase::ExpectComponent => write!(f, "expect-component"),
            Phase::ExpectParam { index, .. } => write!(f, "expect-param({index})"),
            Phase::ExpectPointer => write!(f, "expect-pointer"),
            Phase::ExpectForkOffset => write!(f, "expect-fork-offset"),
            Phase::ExpectCondition => write!(f, "expect-condition"),
            Phase::Done => write!(f, "done"),
        }
    }
}

impl Vocabulary {
    /// Mask of tokens legal in the current state.
    pub fn next_mask(&self, state: &GrammarState) -> Result<MaskVector, GrammarError> {
        let mut mask = MaskVector::none();
        match state.phase {
            Phase::Done => return Err(GrammarError::AlreadyDone),
            Phase::ExpectComponent => {
                if state.components_emitted < MAX_SNIPPETS as u8 {
                    for c in Component::ALL {
                        mask.set(self.component_token(c));
                    }
                }
                if state.snippets_emitted >= 1 {
                    mask.set(self.end_token());
                }
            }
            Phase::ExpectParam { component, index } => {
                match component.param_kinds()[index as usize] {
                    ParamKind::NFrac => {
                        for i in 0..10 {
                            mask.set(self.n_token(i));
                        }
                    }
                    ParamKind::PFrac => {
                        for i in 0..10 {
                            mask.set(self.p_token(i));
                        }
                    }
                }
            }
            Phase::ExpectPointer => {
                mask.set(self.pointer_token(PointerKind::Forward));
                mask.set(self.pointer_token(PointerKind::Iterate));
                mask.set(self.pointer_token(PointerKind::Fork));
            }
            Phase::ExpectForkOffset => {
                for k in 1..=MAX_FORK_OFFSET {
                    mask.set(self.fork_offset_token(k));
                }
            }
            Phase::ExpectCondition => {
                if state.last_pointer == Some(PointerKind::Forward) {
                    // forward means "run once, then continue"; any other
                    // condition would be dead weight.
                    mask.set(self.once_token());
                } else {
                    mask.set(self.once_token());
                    for i in 0..COUNT_FRACTIONS.len() {
                        mask.set(self.count_token(i));
                    }
                    if state.allow_events {
                        mask.set(self.event_token(EventKind::LocalOptimal));
                        mask.set(self.event_token(EventKind::Stagnation3));
                    }
                }
            }
        }
        Ok(mask)
    }

    /// Deterministic successor state after consuming `token`.
    pub fn advance(
        &self,
        state: GrammarState,
        token: TokenId,
    ) -> Result<GrammarState, GrammarError> {
        let mask = self.next_mask(&state)?;
        if !mask.allows(token) {
            return Err(GrammarError::Disallowed {
                token: token.0,
                phase: PhaseName(state.phase),
            });
        }
        let mut next = state;
        match (state.phase, self.kind(token)) {
            (Phase::ExpectComponent, TokenKind::Component(c)) => {
                next.components_emitted += 1;
                next.last_pointer = None;
                next.phase = if c.arity() > 0 {
                    Phase::ExpectParam {
                        component: c,
                        index: 0,
                    }
                } else {
                    Phase::ExpectPointer
                };
            }
            (Phase::ExpectComponent, TokenKind::End) => {
                next.phase = Phase::Done;
            }
            (Phase::ExpectParam { component, index }, TokenKind::NValue(_))
            | (Phase::ExpectParam { component, index }, TokenKind::PValue(_)) => {
                let n = index as usize + 1;
                next.phase = if n < component.arity() {
                    Phase::ExpectParam {
                        component,
                        index: index + 1,
                    }
                } else {
                    Phase::ExpectPointer
                };
            }
            (Phase::ExpectPointer, TokenKind::Pointer(p)) => {
                next.last_pointer = Some(p);
                next.phase = match p {
                    PointerKind::Fork => Phase::ExpectForkOffset,
                    _ => Phase::ExpectCondition,
                };
            }
            (Phase::ExpectForkOffset, TokenKind::ForkOffset(_)) => {
                next.phase = Phase::ExpectCondition;
            }
            (Phase::ExpectCondition, TokenKind::CondOnce)
            | (Phase::ExpectCondition, TokenKind::CondCount(_))
            | (Phase::ExpectCondition, TokenKind::CondEvent(_)) => {
                next.snippets_emitted += 1;
                next.last_pointer = None;
                next.phase = Phase::ExpectComponent;
            }
            _ => unreachable!("mask admitted a token the transition table does not cover"),
        }
        Ok(next)
    }
}
