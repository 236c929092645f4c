//! Pseudo-Boolean benchmark objectives over bit strings.
//!
//! Eight base families plus composable transformation layers (dummy bits,
//! neutrality, epistasis on the bit level; ruggedness on the fitness value).
//! Instances are immutable after construction and evaluation is pure, so
//! they are safe to share across parallel workers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::seeds;

/// Fixed-length bit vector backed by 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: alloc::vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Self::zeros(len);
        for w in &mut b.words {
            *w = u64::MAX;
        }
        b.mask_tail();
        b
    }

    /// Uniform random string; consumes one `u64` draw per word.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut b = Self::zeros(len);
        for w in &mut b.words {
            *w = rng.random::<u64>();
        }
        b.mask_tail();
        b
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut b = Self::zeros(bits.len());
        for (i, &bit) in bits.iter().enumerate() {
            if bit {
                b.set(i, true);
            }
        }
        b
    }

    /// Parse from a string of `0`/`1` characters, e.g. `"1101"`.
    pub fn from_binary_str(s: &str) -> Option<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return None,
            }
        }
        Some(Self::from_bits(&bits))
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn hamming(&self, other: &BitString) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Platform-stable content hash (used by the tabu list).
    pub fn stable_hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ (self.len as u64);
        for &w in &self.words {
            h ^= w;
            h = h.wrapping_mul(0x100_0000_01b3);
            h ^= h >> 29;
        }
        h
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

/// A pseudo-Boolean objective (maximization).
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &BitString) -> f64;
    fn known_optimum(&self) -> Option<f64> {
        None
    }
}

/// Base problem families.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum Family {
    OneMax,
    LeadingOnes,
    Harmonic,
    Labs,
    IsingRing,
    IsingTorus,
    Mivs,
    NQueens,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::OneMax,
        Family::LeadingOnes,
        Family::Harmonic,
        Family::Labs,
        Family::IsingRing,
        Family::IsingTorus,
        Family::Mivs,
        Family::NQueens,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::OneMax => "onemax",
            Family::LeadingOnes => "leadingones",
            Family::Harmonic => "harmonic",
            Family::Labs => "labs",
            Family::IsingRing => "ising_ring",
            Family::IsingTorus => "ising_torus",
            Family::Mivs => "mivs",
            Family::NQueens => "nqueens",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Transformation layers over a base family.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum WModelLayer {
    /// Keep a fixed seeded subset of `m` positions.
    Dummy(usize),
    /// Collapse each `mu`-bit block to its majority bit (ties to 0).
    Neutrality(usize),
    /// Seeded bijection on each `nu`-bit block's values, `nu <= 8`.
    Epistasis(u8),
    /// Swap adjacent fitness values `(2i+1, 2i+2)` for `i < gamma`.
    Ruggedness(usize),
}

impl WModelLayer {
    pub fn name(self) -> &'static str {
        match self {
            WModelLayer::Dummy(_) => "dummy",
            WModelLayer::Neutrality(_) => "neutrality",
            WModelLayer::Epistasis(_) => "epistasis",
            WModelLayer::Ruggedness(_) => "ruggedness",
        }
    }

    pub fn parameter(self) -> usize {
        match self {
            WModelLayer::Dummy(m) => m,
            WModelLayer::Neutrality(mu) => mu,
            WModelLayer::Epistasis(nu) => nu as usize,
            WModelLayer::Ruggedness(g) => g,
        }
    }
}

#[derive(thiserror::Error, Clone, PartialEq, Eq, Debug)]
pub enum ProblemError {
    #[error("{family}: invalid dimension {d}: {reason}")]
    InvalidDimension {
        family: &'static str,
        d: usize,
        reason: String,
    },
    #[error("invalid layer {layer}: {reason}")]
    InvalidLayer { layer: &'static str, reason: String },
    #[error("bad problem key `{0}`")]
    BadKey(String),
    #[error("bit string length {got} does not match dimension {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

// ---------------------------------------------------------------------------
// W-model layer primitives
// ---------------------------------------------------------------------------

/// Seeded choice of `m` distinct positions out of `d`, ascending.
pub fn dummy_positions(d: usize, m: usize, seed: u64) -> Vec<u32> {
    let mut rng = seeds::rng(seed, &[seeds::tag::INSTANCE, 1]);
    let mut idx: Vec<u32> = (0..d as u32).collect();
    for i in 0..m.min(d) {
        let j = rng.random_range(i..d);
        idx.swap(i, j);
    }
    let mut keep = idx[..m.min(d)].to_vec();
    keep.sort_unstable();
    keep
}

/// Reduce to a fixed seeded subset of `m` positions.
pub fn apply_dummy(x: &BitString, m: usize, seed: u64) -> BitString {
    let positions = dummy_positions(x.len(), m, seed);
    select_positions(x, &positions)
}

pub(crate) fn select_positions(x: &BitString, positions: &[u32]) -> BitString {
    let mut out = BitString::zeros(positions.len());
    for (i, &p) in positions.iter().enumerate() {
        if x.get(p as usize) {
            out.set(i, true);
        }
    }
    out
}

/// Majority vote per `mu`-block, ties to 0; remainder bits pass through.
pub fn apply_neutrality(x: &BitString, mu: usize) -> BitString {
    assert!(mu >= 1);
    let blocks = x.len() / mu;
    let rem = x.len() % mu;
    let mut out = BitString::zeros(blocks + rem);
    for b in 0..blocks {
        let ones = (0..mu).filter(|&j| x.get(b * mu + j)).count();
        if ones * 2 > mu {
            out.set(b, true);
        }
    }
    for r in 0..rem {
        if x.get(blocks * mu + r) {
            out.set(blocks + r, true);
        }
    }
    out
}

/// Seeded permutation of the `2^nu` block values.
pub fn epistasis_perm(nu: u8, seed: u64) -> Vec<u16> {
    assert!((1..=8).contains(&nu));
    let size = 1usize << nu;
    let mut rng = seeds::rng(seed, &[seeds::tag::INSTANCE, 2]);
    let mut perm: Vec<u16> = (0..size as u16).collect();
    for i in (1..size).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Apply a fixed seeded bijection to each `nu`-bit block; remainder bits
/// pass through.
pub fn apply_epistasis(x: &BitString, nu: u8, seed: u64) -> BitString {
    let perm = epistasis_perm(nu, seed);
    apply_epistasis_with(x, nu, &perm)
}

pub(crate) fn apply_epistasis_with(x: &BitString, nu: u8, perm: &[u16]) -> BitString {
    let nu = nu as usize;
    let blocks = x.len() / nu;
    let mut out = x.clone();
    for b in 0..blocks {
        let mut v = 0u16;
        for j in 0..nu {
            if x.get(b * nu + j) {
                v |= 1 << j;
            }
        }
        let w = perm[v as usize];
        for j in 0..nu {
            out.set(b * nu + j, (w >> j) & 1 == 1);
        }
    }
    out
}

/// Permute the integer fitness scale by swapping adjacent value pairs
/// `(2i+1, 2i+2)` for `i < gamma`; the optimum `f_max` is never touched.
pub fn apply_ruggedness(f: i64, gamma: usize, f_max: i64) -> i64 {
    if f <= 0 || f >= f_max {
        return f;
    }
    let pair = (f - 1) / 2;
    if (pair as usize) < gamma && f < f_max && (pair * 2 + 2) < f_max {
        if f % 2 == 1 {
            f + 1
        } else {
            f - 1
        }
    } else {
        f
    }
}

#[derive(Clone)]
enum CachedLayer {
    Dummy(Vec<u32>),
    Neutrality(usize),
    Epistasis { nu: u8, perm: Vec<u16> },
    Ruggedness { gamma: usize, f_max: i64 },
}

/// An immutable problem instance: base family, dimension, layers, seed.
#[derive(Clone)]
pub struct ProblemInstance {
    family: Family,
    d: usize,
    layers: Vec<WModelLayer>,
    seed: u64,
    bit_layers: Vec<CachedLayer>,
    rugged: Vec<CachedLayer>,
    /// Adjacency list, `mivs` only.
    graph: Option<Vec<(u32, u32)>>,
    working_len: usize,
    known_optimum: Option<f64>,
}

fn integer_base_optimum(family: Family, len: usize) -> Option<i64> {
    match family {
        Family::OneMax | Family::LeadingOnes | Family::IsingRing => Some(len as i64),
        Family::Harmonic => Some((len as i64) * (len as i64 + 1) / 2),
        Family::IsingTorus => Some(2 * len as i64),
        Family::NQueens => {
            let n = isqrt(len);
            if n >= 4 || n == 1 {
                Some(n as i64)
            } else {
                None
            }
        }
        Family::Labs | Family::Mivs => None,
    }
}

fn isqrt(v: usize) -> usize {
    let mut n = crate::fmath::sqrt(v as f64) as usize;
    while (n + 1) * (n + 1) <= v {
        n += 1;
    }
    while n * n > v {
        n -= 1;
    }
    n
}

impl ProblemInstance {
    pub fn new(
        family: Family,
        d: usize,
        layers: Vec<WModelLayer>,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        if d == 0 {
            return Err(ProblemError::InvalidDimension {
                family: family.name(),
                d,
                reason: String::from("dimension must be positive"),
            });
        }
        // Work out the length seen by the base function and cache layer data.
        let mut bit_layers = Vec::new();
        let mut rugged_params = Vec::new();
        let mut len = d;
        for (i, layer) in layers.iter().enumerate() {
            match *layer {
                WModelLayer::Dummy(m) => {
                    if m == 0 || m > len {
                        return Err(ProblemError::InvalidLayer {
                            layer: "dummy",
                            reason: format!("m={m} out of range 1..={len}"),
                        });
                    }
                    bit_layers.push(CachedLayer::Dummy(dummy_positions(
                        len,
                        m,
                        seeds::derive(seed, &[i as u64]),
                    )));
                    len = m;
                }
                WModelLayer::Neutrality(mu) => {
                    if mu == 0 || mu > len {
                        return Err(ProblemError::InvalidLayer {
                            layer: "neutrality",
                            reason: format!("mu={mu} out of range 1..={len}"),
                        });
                    }
                    bit_layers.push(CachedLayer::Neutrality(mu));
                    len = len / mu + len % mu;
                }
                WModelLayer::Epistasis(nu) => {
                    if nu == 0 || nu > 8 {
                        return Err(ProblemError::InvalidLayer {
                            layer: "epistasis",
                            reason: format!("nu={nu} out of range 1..=8"),
                        });
                    }
                    bit_layers.push(CachedLayer::Epistasis {
                        nu,
                        perm: epistasis_perm(nu, seeds::derive(seed, &[i as u64])),
                    });
                }
                WModelLayer::Ruggedness(gamma) => {
                    rugged_params.push(gamma);
                }
            }
        }
        let working_len = len;

        // Base-family constraints on the working length.
        let dim_err = |reason: String| ProblemError::InvalidDimension {
            family: family.name(),
            d,
            reason,
        };
        match family {
            Family::Labs => {
                if working_len < 2 {
                    return Err(dim_err(String::from("labs needs at least 2 bits")));
                }
            }
            Family::IsingRing => {
                if working_len < 3 {
                    return Err(dim_err(String::from("ring needs at least 3 spins")));
                }
            }
            Family::IsingTorus | Family::NQueens => {
                let n = isqrt(working_len);
                if n * n != working_len {
                    return Err(dim_err(format!(
                        "{} must act on a perfect square, got {working_len}",
                        family.name()
                    )));
                }
                if family == Family::IsingTorus && n < 2 {
                    return Err(dim_err(String::from("torus needs at least a 2x2 grid")));
                }
            }
            _ => {}
        }

        // Ruggedness needs an integer fitness scale with a known optimum.
        let mut rugged = Vec::new();
        if !rugged_params.is_empty() {
            let f_max = integer_base_optimum(family, working_len).ok_or_else(|| {
                ProblemError::InvalidLayer {
                    layer: "ruggedness",
                    reason: format!(
                        "{} has no known integer optimum to preserve",
                        family.name()
                    ),
                }
            })?;
            for gamma in rugged_params {
                let max_gamma = if f_max >= 2 { (f_max - 1) / 2 } else { 0 } as usize;
                rugged.push(CachedLayer::Ruggedness {
                    gamma: gamma.min(max_gamma),
                    f_max,
                });
            }
        }

        let graph = if family == Family::Mivs {
            Some(random_graph(
                working_len,
                seeds::derive(seed, &[seeds::tag::INSTANCE, 3]),
            ))
        } else {
            None
        };

        let known_optimum = integer_base_optimum(family, working_len).map(|v| v as f64);

        Ok(ProblemInstance {
            family,
            d,
            layers,
            seed,
            bit_layers,
            rugged,
            graph,
            working_len,
            known_optimum,
        })
    }

    /// Instance for a `mivs` problem over an explicit edge list (no layers).
    pub fn mivs_with_graph(d: usize, edges: Vec<(u32, u32)>) -> Result<Self, ProblemError> {
        let mut inst = Self::new(Family::Mivs, d, Vec::new(), 0)?;
        inst.graph = Some(edges);
        Ok(inst)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn layers(&self) -> &[WModelLayer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bit length seen by the base function after the bit-level layers.
    pub fn working_len(&self) -> usize {
        self.working_len
    }

    pub fn graph(&self) -> Option<&[(u32, u32)]> {
        self.graph.as_deref()
    }

    /// Registry key, `family[+layerN...]:dim`.
    pub fn key(&self) -> String {
        let mut s = String::from(self.family.name());
        for layer in &self.layers {
            s.push('+');
            s.push_str(layer.name());
            s.push_str(&format!("{}", layer.parameter()));
        }
        s.push_str(&format!(":{}", self.d));
        s
    }

    fn base_fitness(&self, x: &BitString) -> f64 {
        match self.family {
            Family::OneMax => x.count_ones() as f64,
            Family::LeadingOnes => {
                let mut count = 0usize;
                for i in 0..x.len() {
                    if x.get(i) {
                        count += 1;
                    } else {
                        break;
                    }
                }
                count as f64
            }
            Family::Harmonic => {
                let mut sum = 0u64;
                for i in 0..x.len() {
                    if x.get(i) {
                        sum += i as u64 + 1;
                    }
                }
                sum as f64
            }
            Family::Labs => {
                let n = x.len();
                let s: Vec<i64> = (0..n).map(|i| if x.get(i) { 1 } else { -1 }).collect();
                let mut energy = 0i64;
                for k in 1..n {
                    let mut c = 0i64;
                    for i in 0..n - k {
                        c += s[i] * s[i + k];
                    }
                    energy += c * c;
                }
                (n * n) as f64 / (2.0 * energy as f64)
            }
            Family::IsingRing => {
                let n = x.len();
                let mut agree = 0usize;
                for i in 0..n {
                    if x.get(i) == x.get((i + 1) % n) {
                        agree += 1;
                    }
                }
                agree as f64
            }
            Family::IsingTorus => {
                let n = isqrt(x.len());
                let mut agree = 0usize;
                for r in 0..n {
                    for c in 0..n {
                        let here = x.get(r * n + c);
                        if here == x.get(r * n + (c + 1) % n) {
                            agree += 1;
                        }
                        if here == x.get(((r + 1) % n) * n + c) {
                            agree += 1;
                        }
                    }
                }
                agree as f64
            }
            Family::Mivs => {
                let edges = self.graph.as_ref().expect("mivs graph");
                let selected = x.count_ones() as i64;
                let mut conflicts = 0i64;
                for &(u, v) in edges {
                    if x.get(u as usize) && x.get(v as usize) {
                        conflicts += 1;
                    }
                }
                (selected - 2 * conflicts) as f64
            }
            Family::NQueens => {
                let n = isqrt(x.len());
                let queens = x.count_ones() as i64;
                let mut rows = alloc::vec![0i64; n];
                let mut cols = alloc::vec![0i64; n];
                let mut diag = alloc::vec![0i64; 2 * n - 1];
                let mut anti = alloc::vec![0i64; 2 * n - 1];
                for r in 0..n {
                    for c in 0..n {
                        if x.get(r * n + c) {
                            rows[r] += 1;
                            cols[c] += 1;
                            diag[r + n - 1 - c] += 1;
                            anti[r + c] += 1;
                        }
                    }
                }
                let pairs: i64 = rows
                    .iter()
                    .chain(&cols)
                    .chain(&diag)
                    .chain(&anti)
                    .map(|&k| k * (k - 1) / 2)
                    .sum();
                (queens - n as i64 * pairs) as f64
            }
        }
    }
}

impl Objective for ProblemInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn evaluate(&self, x: &BitString) -> f64 {
        assert_eq!(
            x.len(),
            self.d,
            "bit string length {} does not match dimension {}",
            x.len(),
            self.d
        );
        let mut owned;
        let mut current = x;
        for layer in &self.bit_layers {
            owned = match layer {
                CachedLayer::Dummy(positions) => select_positions(current, positions),
                CachedLayer::Neutrality(mu) => apply_neutrality(current, *mu),
                CachedLayer::Epistasis { nu, perm } => apply_epistasis_with(current, *nu, perm),
                CachedLayer::Ruggedness { .. } => unreachable!(),
            };
            current = &owned;
        }
        let mut fitness = self.base_fitness(current);
        for layer in &self.rugged {
            if let CachedLayer::Ruggedness { gamma, f_max } = layer {
                fitness = apply_ruggedness(crate::fmath::round(fitness) as i64, *gamma, *f_max) as f64;
            }
        }
        fitness
    }

    fn known_optimum(&self) -> Option<f64> {
        self.known_optimum
    }
}

/// Seeded Erdős–Rényi-style graph with edge probability `4/n`.
fn random_graph(n: usize, seed: u64) -> Vec<(u32, u32)> {
    let mut rng = seeds::rng_from(seed);
    let p = 4.0 / n as f64;
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

// ---------------------------------------------------------------------------
// Registry keys
// ---------------------------------------------------------------------------

/// Parse `family[+layerN...]` and an optional `:dim` suffix.
pub fn parse_key(key: &str) -> Result<(Family, Vec<WModelLayer>, Option<usize>), ProblemError> {
    let bad = || ProblemError::BadKey(String::from(key));
    let (spec, dim) = match key.split_once(':') {
        Some((s, d)) => {
            let dim: usize = d.parse().map_err(|_| bad())?;
            (s, Some(dim))
        }
        None => (key, None),
    };
    let mut parts = spec.split('+');
    let family = Family::from_name(parts.next().ok_or_else(bad)?).ok_or_else(bad)?;
    let mut layers = Vec::new();
    for part in parts {
        let split = part.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let (name, num) = part.split_at(split);
        let value: usize = num.parse().map_err(|_| bad())?;
        layers.push(match name {
            "dummy" => WModelLayer::Dummy(value),
            "neutrality" => WModelLayer::Neutrality(value),
            "epistasis" => {
                if value > 8 {
                    return Err(bad());
                }
                WModelLayer::Epistasis(value as u8)
            }
            "ruggedness" => WModelLayer::Ruggedness(value),
            _ => return Err(bad()),
        });
    }
    Ok((family, layers, dim))
}

/// Build an instance from a registry key like `onemax:100` or
/// `onemax+neutrality3:120`.
pub fn instance_from_key(key: &str, seed: u64) -> Result<ProblemInstance, ProblemError> {
    let (family, layers, dim) = parse_key(key)?;
    let d = dim.ok_or_else(|| ProblemError::BadKey(String::from(key)))?;
    ProblemInstance::new(family, d, layers, seed)
}
