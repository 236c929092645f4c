//! Validated program representation.
//!
//! A program is a list of snippets; each snippet is a component, its decoded
//! hyperparameters, a pointer and a condition. Programs come from token
//! sequences (the sampler), from the canonical text format, or are built
//! directly. Control flow is resolved into a tree of well-nested loop
//! blocks under an implicit top-level loop that repeats until the FE budget
//! is exhausted.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::vocab::{
    Component, EventKind, GrammarState, ParamKind, PointerKind, TokenId, TokenKind, Vocabulary,
    COUNT_FRACTIONS, MAX_FORK_OFFSET, MAX_SNIPPETS,
};

/// Control-flow pointer of a snippet.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Pointer {
    /// Continue with the next snippet.
    Forward,
    /// Loop over this snippet alone.
    Iterate,
    /// Loop over this snippet and the next `offset` snippets.
    Fork(u8),
}

impl Pointer {
    pub fn kind(self) -> PointerKind {
        match self {
            Pointer::Forward => PointerKind::Forward,
            Pointer::Iterate => PointerKind::Iterate,
            Pointer::Fork(_) => PointerKind::Fork,
        }
    }
}

/// Loop guard of a snippet.
#[derive(Copy, Clone, PartialEq, Debug)]
pub enum Cond {
    /// Single pass.
    Once,
    /// Run until the block consumed `frac` of the total FE budget.
    CountFrac(f64),
    /// Run until the event fires.
    Event(EventKind),
}

/// One component invocation with its control flow.
#[derive(Clone, PartialEq, Debug)]
pub struct Snippet {
    pub component: Component,
    /// Decoded hyperparameter fractions, one per component parameter.
    pub params: Vec<f64>,
    pub pointer: Pointer,
    pub condition: Cond,
}

/// A parsed, structurally valid program.
#[derive(Clone, PartialEq, Debug)]
pub struct Program {
    snippets: Vec<Snippet>,
    source_tokens: Option<Vec<TokenId>>,
}

#[derive(thiserror::Error, Clone, PartialEq, Debug)]
pub enum ParseError {
    #[error("token {index}: {message}")]
    Grammar { index: usize, message: String },
    #[error("sequence ended without `end` token")]
    MissingEnd,
    #[error("`end` at token {index} before any complete snippet")]
    EmptyProgram { index: usize },
    #[error("more than {MAX_SNIPPETS} components")]
    TooManySnippets,
    #[error("snippet violates: {0}")]
    Invariant(String),
    #[error("trailing tokens after `end` at token {index}")]
    TrailingTokens { index: usize },
}

#[derive(thiserror::Error, Clone, PartialEq, Debug)]
#[error("line {line}, column {column}: {message}")]
pub struct TextError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Non-fatal oddities reported by [`Program::validate`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Warning {
    NoSearchComponent,
    NoSelectComponent,
    /// Fork offset at `snippet` runs past the end and is clamped.
    ForkOffsetClamped { snippet: usize },
}

impl core::fmt::Display for Warning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Warning::NoSearchComponent => write!(f, "no search component"),
            Warning::NoSelectComponent => write!(f, "no select component"),
            Warning::ForkOffsetClamped { snippet } => {
                write!(f, "fork offset clamped at snippet {snippet}")
            }
        }
    }
}

impl Program {
    /// Build from snippets, checking program-level invariants.
    pub fn from_snippets(snippets: Vec<Snippet>) -> Result<Program, ParseError> {
        if snippets.is_empty() {
            return Err(ParseError::EmptyProgram { index: 0 });
        }
        if snippets.len() > MAX_SNIPPETS {
            return Err(ParseError::TooManySnippets);
        }
        for (i, s) in snippets.iter().enumerate() {
            if s.params.len() != s.component.arity() {
                return Err(ParseError::Invariant(format!(
                    "snippet {i}: {} expects {} parameter(s), got {}",
                    s.component.name(),
                    s.component.arity(),
                    s.params.len()
                )));
            }
            if matches!(s.pointer, Pointer::Forward) && s.condition != Cond::Once {
                return Err(ParseError::Invariant(format!(
                    "snippet {i}: forward pointer requires condition `once`"
                )));
            }
            if let Pointer::Fork(k) = s.pointer {
                if k == 0 || k > MAX_FORK_OFFSET {
                    return Err(ParseError::Invariant(format!(
                        "snippet {i}: fork offset {k} out of range"
                    )));
                }
            }
        }
        Ok(Program {
            snippets,
            source_tokens: None,
        })
    }

    pub fn snippets(&self) -> &[Snippet] {
        &self.snippets
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Token sequence this program was parsed from, if any.
    pub fn source_tokens(&self) -> Option<&[TokenId]> {
        self.source_tokens.as_deref()
    }

    /// Re-encode into tokens (excluding `begin`, including `end`).
    ///
    /// Returns `None` when a hyperparameter does not lie on its grid.
    pub fn encode_tokens(&self, vocab: &Vocabulary) -> Option<Vec<TokenId>> {
        let mut out = Vec::new();
        for s in &self.snippets {
            out.push(vocab.component_token(s.component));
            for (kind, &value) in s.component.param_kinds().iter().zip(&s.params) {
                let grid = kind.grid();
                let idx = grid.iter().position(|&g| (g - value).abs() < 1e-12)?;
                out.push(match kind {
                    ParamKind::NFrac => vocab.n_token(idx),
                    ParamKind::PFrac => vocab.p_token(idx),
                });
            }
            out.push(vocab.pointer_token(s.pointer.kind()));
            if let Pointer::Fork(k) = s.pointer {
                out.push(vocab.fork_offset_token(k));
            }
            out.push(match s.condition {
                Cond::Once => vocab.once_token(),
                Cond::CountFrac(frac) => {
                    let idx = COUNT_FRACTIONS
                        .iter()
                        .position(|&c| (c - frac).abs() < 1e-12)?;
                    vocab.count_token(idx)
                }
                Cond::Event(e) => vocab.event_token(e),
            });
        }
        out.push(vocab.end_token());
        Some(out)
    }

    /// Census warnings; structural errors are impossible post-parse.
    pub fn validate(&self) -> Vec<Warning> {
        let mut warnings = Vec::new();
        let has = |cat| self.snippets.iter().any(|s| s.component.category() == cat);
        if !has(crate::vocab::Category::Search) {
            warnings.push(Warning::NoSearchComponent);
        }
        if !has(crate::vocab::Category::Select) {
            warnings.push(Warning::NoSelectComponent);
        }
        let (_, clamped) = build_blocks(&self.snippets);
        for snippet in clamped {
            warnings.push(Warning::ForkOffsetClamped { snippet });
        }
        warnings
    }

    /// Resolve control flow into well-nested blocks.
    pub fn control_flow(&self) -> BlockTree {
        let (items, _) = build_blocks(&self.snippets);
        BlockTree {
            root: Block {
                first: 0,
                last: self.snippets.len() - 1,
                guard: BlockGuard::UntilBudget,
                items,
            },
        }
    }
}

/// Parse a token sequence (everything after `begin`, ending with `end`).
///
/// Event conditions are accepted here regardless of the sampling
/// configuration; masking them is a sampling concern only.
pub fn parse_tokens(vocab: &Vocabulary, tokens: &[TokenId]) -> Result<Program, ParseError> {
    let mut state = GrammarState::new(true);
    let mut snippets: Vec<Snippet> = Vec::new();
    let mut current: Option<(Component, Vec<f64>, Option<Pointer>)> = None;
    let mut done = false;

    for (index, &token) in tokens.iter().enumerate() {
        if done {
            return Err(ParseError::TrailingTokens { index });
        }
        let kind = vocab.kind(token);
        state = vocab.advance(state, token).map_err(|e| match e {
            crate::vocab::GrammarError::Disallowed { phase, .. } => ParseError::Grammar {
                index,
                message: format!("unexpected {kind:?} in phase {phase}"),
            },
            crate::vocab::GrammarError::AlreadyDone => ParseError::TrailingTokens { index },
        })?;
        match kind {
            TokenKind::Component(c) => {
                current = Some((c, Vec::new(), None));
            }
            TokenKind::NValue(i) => {
                current
                    .as_mut()
                    .unwrap()
                    .1
                    .push(crate::vocab::N_GRID[i as usize]);
            }
            TokenKind::PValue(i) => {
                current
                    .as_mut()
                    .unwrap()
                    .1
                    .push(crate::vocab::P_GRID[i as usize]);
            }
            TokenKind::Pointer(PointerKind::Forward) => {
                current.as_mut().unwrap().2 = Some(Pointer::Forward);
            }
            TokenKind::Pointer(PointerKind::Iterate) => {
                current.as_mut().unwrap().2 = Some(Pointer::Iterate);
            }
            TokenKind::Pointer(PointerKind::Fork) => {
                // real offset arrives with the next token
                current.as_mut().unwrap().2 = Some(Pointer::Fork(1));
            }
            TokenKind::ForkOffset(k) => {
                current.as_mut().unwrap().2 = Some(Pointer::Fork(k));
            }
            TokenKind::CondOnce | TokenKind::CondCount(_) | TokenKind::CondEvent(_) => {
                let (component, params, pointer) = current.take().unwrap();
                let condition = match kind {
                    TokenKind::CondOnce => Cond::Once,
                    TokenKind::CondCount(i) => Cond::CountFrac(COUNT_FRACTIONS[i as usize]),
                    TokenKind::CondEvent(e) => Cond::Event(e),
                    _ => unreachable!(),
                };
                snippets.push(Snippet {
                    component,
                    params,
                    pointer: pointer.unwrap(),
                    condition,
                });
            }
            TokenKind::End => {
                if snippets.is_empty() {
                    return Err(ParseError::EmptyProgram { index });
                }
                done = true;
            }
            TokenKind::Begin => {
                return Err(ParseError::Grammar {
                    index,
                    message: String::from("`begin` may not appear inside the sequence"),
                })
            }
        }
    }
    if !done {
        return Err(ParseError::MissingEnd);
    }
    let mut program = Program::from_snippets(snippets)?;
    program.source_tokens = Some(tokens.to_vec());
    Ok(program)
}

// ---------------------------------------------------------------------------
// Canonical text format
// ---------------------------------------------------------------------------

/// Render in the canonical text form:
/// `name(params) | pointer | condition; ...`
pub fn to_text(program: &Program) -> String {
    let mut out = String::new();
    for (i, s) in program.snippets().iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(s.component.name());
        if !s.params.is_empty() {
            out.push('(');
            for (j, p) in s.params.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!("{p}"));
            }
            out.push(')');
        }
        out.push_str(" | ");
        match s.pointer {
            Pointer::Forward => out.push_str("forward"),
            Pointer::Iterate => out.push_str("iterate"),
            Pointer::Fork(k) => out.push_str(&format!("fork({k})")),
        }
        out.push_str(" | ");
        match s.condition {
            Cond::Once => out.push_str("once"),
            Cond::CountFrac(frac) => {
                let pct = frac * 100.0;
                if (pct - crate::fmath::round(pct)).abs() < 1e-9 {
                    out.push_str(&format!("count({}%FE)", pct as i64));
                } else {
                    out.push_str(&format!("count({pct}%FE)"));
                }
            }
            Cond::Event(e) => out.push_str(&format!("event({})", e.name())),
        }
    }
    out
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: String) -> TextError {
        let consumed = &self.text[..self.pos];
        let line = consumed.matches('\n').count() + 1;
        let column = consumed
            .rsplit('\n')
            .next()
            .map(|l| l.chars().count())
            .unwrap_or(0)
            + 1;
        TextError {
            line,
            column,
            message,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> Result<(), TextError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", b as char)))
        }
    }

    fn ident(&mut self) -> Result<&'a str, TextError> {
        let start = self.pos;
        while self
            .peek()
            .map(|b| b.is_ascii_alphanumeric() || b == b'_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(String::from("expected identifier")));
        }
        Ok(&self.text[start..self.pos])
    }

    fn number(&mut self) -> Result<f64, TextError> {
        let start = self.pos;
        while self
            .peek()
            .map(|b| {
                b.is_ascii_digit() || b == b'.' || b == b'-' || b == b'e' || b == b'E' || b == b'+'
            })
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        self.text[start..self.pos]
            .parse::<f64>()
            .map_err(|_| self.err(String::from("expected number")))
    }
}

/// Parse the canonical text form.
pub fn from_text(text: &str) -> Result<Program, TextError> {
    let mut cur = Cursor { text, pos: 0 };
    let mut snippets = Vec::new();
    loop {
        cur.skip_ws();
        let name = cur.ident()?;
        let component = Component::from_name(name)
            .ok_or_else(|| cur.err(format!("unknown component `{name}`")))?;
        let mut params = Vec::new();
        cur.skip_ws();
        if cur.peek() == Some(b'(') {
            cur.eat(b'(')?;
            loop {
                cur.skip_ws();
                params.push(cur.number()?);
                cur.skip_ws();
                if cur.peek() == Some(b',') {
                    cur.eat(b',')?;
                } else {
                    break;
                }
            }
            cur.eat(b')')?;
        }
        if params.len() != component.arity() {
            return Err(cur.err(format!(
                "`{}` expects {} parameter(s), got {}",
                component.name(),
                component.arity(),
                params.len()
            )));
        }
        cur.skip_ws();
        cur.eat(b'|')?;
        cur.skip_ws();
        let ptr_name = cur.ident()?;
        let pointer = match ptr_name {
            "forward" => Pointer::Forward,
            "iterate" => Pointer::Iterate,
            "fork" => {
                cur.skip_ws();
                cur.eat(b'(')?;
                cur.skip_ws();
                let k = cur.number()? as i64;
                cur.skip_ws();
                cur.eat(b')')?;
                if !(1..=MAX_FORK_OFFSET as i64).contains(&k) {
                    return Err(cur.err(format!("fork offset {k} out of range 1..=5")));
                }
                Pointer::Fork(k as u8)
            }
            other => return Err(cur.err(format!("unknown pointer `{other}`"))),
        };
        cur.skip_ws();
        cur.eat(b'|')?;
        cur.skip_ws();
        let cond_name = cur.ident()?;
        let condition = match cond_name {
            "once" => Cond::Once,
            "count" => {
                cur.skip_ws();
                cur.eat(b'(')?;
                cur.skip_ws();
                let pct = cur.number()?;
                cur.eat(b'%')?;
                let tail = cur.ident()?;
                if tail != "FE" {
                    return Err(cur.err(String::from("expected `FE` after `%`")));
                }
                cur.skip_ws();
                cur.eat(b')')?;
                Cond::CountFrac(pct / 100.0)
            }
            "event" => {
                cur.skip_ws();
                cur.eat(b'(')?;
                cur.skip_ws();
                let ev = cur.ident()?;
                let event = EventKind::from_name(ev)
                    .ok_or_else(|| cur.err(format!("unknown event `{ev}`")))?;
                cur.skip_ws();
                cur.eat(b')')?;
                Cond::Event(event)
            }
            other => return Err(cur.err(format!("unknown condition `{other}`"))),
        };
        snippets.push(Snippet {
            component,
            params,
            pointer,
            condition,
        });
        cur.skip_ws();
        match cur.peek() {
            Some(b';') => {
                cur.eat(b';')?;
            }
            None => break,
            Some(other) => {
                return Err(cur.err(format!(
                    "expected `;` or end of input, found `{}`",
                    other as char
                )))
            }
        }
    }
    let column_one = TextError {
        line: 1,
        column: 1,
        message: String::new(),
    };
    Program::from_snippets(snippets).map_err(|e| TextError {
        message: format!("{e}"),
        ..column_one
    })
}

// ---------------------------------------------------------------------------
// Control flow
// ---------------------------------------------------------------------------

/// Loop guard of a block.
#[derive(Copy, Clone, PartialEq, Debug)]
pub enum BlockGuard {
    /// Implicit top-level loop: repeat until the FE budget is exhausted.
    UntilBudget,
    Once,
    CountFrac(f64),
    Event(EventKind),
}

impl From<Cond> for BlockGuard {
    fn from(c: Cond) -> BlockGuard {
        match c {
            Cond::Once => BlockGuard::Once,
            Cond::CountFrac(f) => BlockGuard::CountFrac(f),
            Cond::Event(e) => BlockGuard::Event(e),
        }
    }
}

/// A loop block over the snippet range `[first, last]`.
#[derive(Clone, PartialEq, Debug)]
pub struct Block {
    pub first: usize,
    pub last: usize,
    pub guard: BlockGuard,
    pub items: Vec<BlockItem>,
}

#[derive(Clone, PartialEq, Debug)]
pub enum BlockItem {
    /// Plain snippet executed once per enclosing pass.
    Snippet(usize),
    Block(Block),
}

/// Control flow of a whole program: an implicit top-level loop whose items
/// are plain snippets and nested loop blocks.
#[derive(Clone, PartialEq, Debug)]
pub struct BlockTree {
    pub root: Block,
}

/// Build items covering `[start, end]`; forks are clamped to `end` so
/// earlier (outer) blocks always win over later overlapping ones.
fn build_range(
    snippets: &[Snippet],
    start: usize,
    end: usize,
    clamped: &mut Vec<usize>,
) -> Vec<BlockItem> {
    let mut items = Vec::new();
    let mut i = start;
    while i <= end {
        match snippets[i].pointer {
            Pointer::Forward => {
                items.push(BlockItem::Snippet(i));
                i += 1;
            }
            Pointer::Iterate => {
                items.push(BlockItem::Block(Block {
                    first: i,
                    last: i,
                    guard: snippets[i].condition.into(),
                    items: alloc::vec![BlockItem::Snippet(i)],
                }));
                i += 1;
            }
            Pointer::Fork(k) => {
                let wanted = i + k as usize;
                let last = wanted.min(end);
                if wanted > end {
                    clamped.push(i);
                }
                let mut inner = alloc::vec![BlockItem::Snippet(i)];
                if last > i {
                    inner.extend(build_range(snippets, i + 1, last, clamped));
                }
                items.push(BlockItem::Block(Block {
                    first: i,
                    last,
                    guard: snippets[i].condition.into(),
                    items: inner,
                }));
                i = last + 1;
            }
        }
    }
    items
}

fn build_blocks(snippets: &[Snippet]) -> (Vec<BlockItem>, Vec<usize>) {
    let mut clamped = Vec::new();
    let items = build_range(snippets, 0, snippets.len() - 1, &mut clamped);
    (items, clamped)
}
