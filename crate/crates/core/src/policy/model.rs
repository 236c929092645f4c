//! The miniature autoregressive transformer policy.
//!
//! Causal decoder stack: token embedding + sinusoidal positions, an optional
//! problem-factor token at position 0, multi-head self-attention blocks with
//! post-norm residuals and a ReLU feed-forward, and a linear head over the
//! vocabulary. Two forward paths exist: a plain one used for sampling and a
//! taped one used for gradients; a test pins them together.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tape::{masked_log_prob_value, masked_probs_slice, Tape, Var};
use super::tensor::{self, Tensor};
use crate::fmath;
use crate::vocab::{GrammarState, MaskVector, TokenId, Vocabulary};

const LN_EPS: f64 = 1e-5;

/// Model shape.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub struct PolicyHyper {
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_hidden: usize,
    pub vocab: usize,
    pub factor_dim: usize,
    pub max_len: usize,
}

impl Default for PolicyHyper {
    fn default() -> Self {
        PolicyHyper {
            d_model: 32,
            heads: 8,
            blocks: 2,
            ffn_hidden: 128,
            vocab: crate::vocab::VOCAB_SIZE,
            factor_dim: 32,
            max_len: 64,
        }
    }
}

impl PolicyHyper {
    pub fn head_dim(&self) -> usize {
        debug_assert_eq!(self.d_model % self.heads, 0);
        self.d_model / self.heads
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct BlockParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub ffn_w1: Tensor,
    pub ffn_b1: Tensor,
    pub ffn_w2: Tensor,
    pub ffn_b2: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
}

/// All learnable tensors.
#[derive(Clone, PartialEq, Debug)]
pub struct PolicyParams {
    pub hyper: PolicyHyper,
    /// Token embedding, vocab × d.
    pub w_seq: Tensor,
    /// Problem-factor projection, factor_dim × d.
    pub w_probl: Tensor,
    pub blocks: Vec<BlockParams>,
    /// Output head, d × vocab.
    pub w_l: Tensor,
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    // Box-Muller; 1-u keeps the log argument strictly positive
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    sigma * fmath::sqrt(-2.0 * fmath::ln(u1)) * fmath::cos(2.0 * core::f64::consts::PI * u2)
}

fn init_weight(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| gaussian(rng, 0.02))
}

impl PolicyParams {
    pub fn init(hyper: PolicyHyper, seed: u64) -> Self {
        let mut rng = crate::seeds::rng(seed, &[crate::seeds::tag::PARAM_INIT]);
        let d = hyper.d_model;
        let blocks = (0..hyper.blocks)
            .map(|_| BlockParams {
                w_q: init_weight(&mut rng, d, d),
                w_k: init_weight(&mut rng, d, d),
                w_v: init_weight(&mut rng, d, d),
                w_o: init_weight(&mut rng, d, d),
                ln1_gain: Tensor::from_fn(1, d, |_, _| 1.0),
                ln1_bias: Tensor::zeros(1, d),
                ffn_w1: init_weight(&mut rng, d, hyper.ffn_hidden),
                ffn_b1: Tensor::zeros(1, hyper.ffn_hidden),
                ffn_w2: init_weight(&mut rng, hyper.ffn_hidden, d),
                ffn_b2: Tensor::zeros(1, d),
                ln2_gain: Tensor::from_fn(1, d, |_, _| 1.0),
                ln2_bias: Tensor::zeros(1, d),
            })
            .collect();
        PolicyParams {
            hyper,
            w_seq: init_weight(&mut rng, hyper.vocab, d),
            w_probl: init_weight(&mut rng, hyper.factor_dim, d),
            blocks,
            w_l: init_weight(&mut rng, d, hyper.vocab),
        }
    }

    /// Stable name/tensor listing; the order defines optimizer and
    /// checkpoint layouts.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        out.push((String::from("w_seq"), &self.w_seq));
        out.push((String::from("w_probl"), &self.w_probl));
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, t) in [
                ("w_q", &b.w_q),
                ("w_k", &b.w_k),
                ("w_v", &b.w_v),
                ("w_o", &b.w_o),
                ("ln1_gain", &b.ln1_gain),
                ("ln1_bias", &b.ln1_bias),
                ("ffn_w1", &b.ffn_w1),
                ("ffn_b1", &b.ffn_b1),
                ("ffn_w2", &b.ffn_w2),
                ("ffn_b2", &b.ffn_b2),
                ("ln2_gain", &b.ln2_gain),
                ("ln2_bias", &b.ln2_bias),
            ] {
                out.push((alloc::format!("block{i}.{name}"), t));
            }
        }
        out.push((String::from("w_l"), &self.w_l));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        out.push((String::from("w_seq"), &mut self.w_seq));
        out.push((String::from("w_probl"), &mut self.w_probl));
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (name, t) in [
                ("w_q", &mut b.w_q),
                ("w_k", &mut b.w_k),
                ("w_v", &mut b.w_v),
                ("w_o", &mut b.w_o),
                ("ln1_gain", &mut b.ln1_gain),
                ("ln1_bias", &mut b.ln1_bias),
                ("ffn_w1", &mut b.ffn_w1),
                ("ffn_b1", &mut b.ffn_b1),
                ("ffn_w2", &mut b.ffn_w2),
                ("ffn_b2", &mut b.ffn_b2),
                ("ln2_gain", &mut b.ln2_gain),
                ("ln2_bias", &mut b.ln2_bias),
            ] {
                out.push((alloc::format!("block{i}.{name}"), t));
            }
        }
        out.push((String::from("w_l"), &mut self.w_l));
        out
    }
}

/// Sinusoidal positional encoding row.
pub fn positional_row(pos: usize, d: usize) -> Vec<f64> {
    let mut row = alloc::vec![0.0; d];
    for i in 0..d {
        let exponent = (2 * (i / 2)) as f64 / d as f64;
        let angle = pos as f64 / fmath::powf(10_000.0, exponent);
        row[i] = if i % 2 == 0 {
            fmath::sin(angle)
        } else {
            fmath::cos(angle)
        };
    }
    row
}

/// Positional block for a sequence. The factor token, when present, sits at
/// position 0; sequence tokens always start at position 1, so their
/// encodings are identical with and without the factor.
fn positional_block(seq_len: usize, with_factor: bool, d: usize) -> Tensor {
    let rows = seq_len + usize::from(with_factor);
    let mut t = Tensor::zeros(rows, d);
    let mut r = 0;
    if with_factor {
        t.row_mut(r).copy_from_slice(&positional_row(0, d));
        r += 1;
    }
    for j in 0..seq_len {
        t.row_mut(r).copy_from_slice(&positional_row(1 + j, d));
        r += 1;
    }
    t
}

// ---------------------------------------------------------------------------
// Plain forward path (sampling, inference)
// ---------------------------------------------------------------------------

fn embed_plain(
    params: &PolicyParams,
    tokens: &[TokenId],
    factor: Option<&[f64]>,
    use_pe: bool,
) -> Tensor {
    let d = params.hyper.d_model;
    let with_factor = factor.is_some();
    let rows = tokens.len() + usize::from(with_factor);
    assert!(
        rows <= params.hyper.max_len,
        "sequence length {rows} exceeds max_len {}",
        params.hyper.max_len
    );
    let mut x = Tensor::zeros(rows, d);
    let mut r = 0;
    if let Some(fv) = factor {
        assert_eq!(fv.len(), params.hyper.factor_dim);
        let fmat = Tensor::from_rows(&[fv]);
        let projected = tensor::matmul(&fmat, &params.w_probl);
        x.row_mut(r).copy_from_slice(projected.row(0));
        r += 1;
    }
    for &t in tokens {
        x.row_mut(r).copy_from_slice(params.w_seq.row(t.index()));
        r += 1;
    }
    if use_pe {
        x = tensor::add(&x, &positional_block(tokens.len(), with_factor, d));
    }
    x
}

fn attention_plain(
    hyper: &PolicyHyper,
    block: &BlockParams,
    x: &Tensor,
    probes: Option<&mut Vec<Tensor>>,
) -> Tensor {
    let dh = hyper.head_dim();
    let scale = 1.0 / fmath::sqrt(dh as f64);
    let q = tensor::matmul(x, &block.w_q);
    let k = tensor::matmul(x, &block.w_k);
    let v = tensor::matmul(x, &block.w_v);
    let mut ctx: Option<Tensor> = None;
    let mut probe_acc = Vec::new();
    for h in 0..hyper.heads {
        let qh = tensor::slice_cols(&q, h * dh, dh);
        let kh = tensor::slice_cols(&k, h * dh, dh);
        let vh = tensor::slice_cols(&v, h * dh, dh);
        let scores = tensor::scale(&tensor::matmul_nt(&qh, &kh), scale);
        let probs = tensor::causal_softmax(&scores);
        if probes.is_some() {
            probe_acc.push(probs.clone());
        }
        let head_ctx = tensor::matmul(&probs, &vh);
        ctx = Some(match ctx {
            Some(prev) => tensor::concat_cols(&prev, &head_ctx),
            None => head_ctx,
        });
    }
    if let Some(out) = probes {
        *out = probe_acc;
    }
    tensor::matmul(&ctx.unwrap(), &block.w_o)
}

fn block_plain(
    hyper: &PolicyHyper,
    block: &BlockParams,
    x: &Tensor,
    probes: Option<&mut Vec<Tensor>>,
) -> Tensor {
    let attn = attention_plain(hyper, block, x, probes);
    let h1 = tensor::layer_norm(
        &tensor::add(x, &attn),
        &block.ln1_gain,
        &block.ln1_bias,
        LN_EPS,
    );
    let ff_inner = tensor::relu(&tensor::add_row(
        &tensor::matmul(&h1, &block.ffn_w1),
        &block.ffn_b1,
    ));
    let ff = tensor::add_row(&tensor::matmul(&ff_inner, &block.ffn_w2), &block.ffn_b2);
    tensor::layer_norm(
        &tensor::add(&h1, &ff),
        &block.ln2_gain,
        &block.ln2_bias,
        LN_EPS,
    )
}

/// Logits at every position (rows align with the embedded sequence, factor
/// row included when present).
pub fn causal_logits(
    params: &PolicyParams,
    tokens: &[TokenId],
    factor: Option<&[f64]>,
) -> Tensor {
    causal_logits_opts(params, tokens, factor, true)
}

pub fn causal_logits_opts(
    params: &PolicyParams,
    tokens: &[TokenId],
    factor: Option<&[f64]>,
    use_pe: bool,
) -> Tensor {
    let mut x = embed_plain(params, tokens, factor, use_pe);
    for block in &params.blocks {
        x = block_plain(&params.hyper, block, &x, None);
    }
    tensor::matmul(&x, &params.w_l)
}

/// Next-token logits for a prefix that starts with `begin`.
pub fn forward(params: &PolicyParams, prefix: &[TokenId], factor: Option<&[f64]>) -> Vec<f64> {
    forward_opts(params, prefix, factor, true)
}

/// Test hook: same as [`forward`] with positional encoding switchable.
pub fn forward_opts(
    params: &PolicyParams,
    prefix: &[TokenId],
    factor: Option<&[f64]>,
    use_pe: bool,
) -> Vec<f64> {
    let logits = causal_logits_opts(params, prefix, factor, use_pe);
    logits.row(logits.rows - 1).to_vec()
}

/// Attention probabilities per block and head for the given prefix.
pub fn forward_debug(
    params: &PolicyParams,
    prefix: &[TokenId],
    factor: Option<&[f64]>,
    use_pe: bool,
) -> Vec<Vec<Tensor>> {
    let mut x = embed_plain(params, prefix, factor, use_pe);
    let mut all = Vec::new();
    for block in &params.blocks {
        let mut probes = Vec::new();
        x = block_plain(&params.hyper, block, &x, Some(&mut probes));
        all.push(probes);
    }
    all
}

// ---------------------------------------------------------------------------
// Masked sampling
// ---------------------------------------------------------------------------

/// Masked-softmax probabilities over the vocabulary; forbidden tokens have
/// probability exactly zero.
pub fn masked_probs(logits: &[f64], mask: &MaskVector) -> Vec<f64> {
    let flags: Vec<bool> = (0..logits.len())
        .map(|i| mask.allows(TokenId(i as u16)))
        .collect();
    masked_probs_slice(logits, &flags)
}

/// Draw a token from the masked distribution; returns its log-probability.
pub fn masked_sample(
    logits: &[f64],
    mask: &MaskVector,
    rng: &mut ChaCha8Rng,
) -> (TokenId, f64) {
    debug_assert!(mask.allowed_count() >= 1, "all tokens masked");
    let probs = masked_probs(logits, mask);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut picked = None;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            picked = Some(i);
            if u < acc {
                break;
            }
        }
    }
    let index = picked.expect("mask admits at least one token");
    let flags: Vec<bool> = (0..logits.len())
        .map(|i| mask.allows(TokenId(i as u16)))
        .collect();
    let log_prob = masked_log_prob_value(logits, &flags, index);
    (TokenId(index as u16), log_prob)
}

/// Autoregressively sample a complete token sequence (without `begin`,
/// ending with `end`). Positions with a single legal token are emitted
/// directly: they carry probability one and zero log-probability, and no
/// forward pass or RNG draw is spent on them.
pub fn sample_sequence(
    params: &PolicyParams,
    vocab: &Vocabulary,
    factor: Option<&[f64]>,
    allow_events: bool,
    rng: &mut ChaCha8Rng,
) -> (Vec<TokenId>, f64) {
    let mut state = GrammarState::new(allow_events);
    let mut prefix = alloc::vec![vocab.begin_token()];
    let mut tokens = Vec::new();
    let mut total_log_prob = 0.0;
    while !state.is_done() {
        let mask = vocab.next_mask(&state).expect("state not done");
        let token = if mask.allowed_count() == 1 {
            mask.iter_allowed().next().unwrap()
        } else {
            let logits = forward(params, &prefix, factor);
            let (token, log_prob) = masked_sample(&logits, &mask, rng);
            total_log_prob += log_prob;
            token
        };
        state = vocab.advance(state, token).expect("sampled token is legal");
        prefix.push(token);
        tokens.push(token);
    }
    (tokens, total_log_prob)
}

#[derive(thiserror::Error, Clone, PartialEq, Debug)]
pub enum LogProbError {
    #[error("token {index} violates the grammar: {message}")]
    Grammar { index: usize, message: String },
    #[error("sequence does not finish with `end`")]
    Unfinished,
}

/// Grammar masks for each position of `tokens`, replayed exactly as the
/// sampler saw them.
fn replay_masks(
    vocab: &Vocabulary,
    tokens: &[TokenId],
    allow_events: bool,
) -> Result<Vec<MaskVector>, LogProbError> {
    let mut state = GrammarState::new(allow_events);
    let mut masks = Vec::with_capacity(tokens.len());
    for (index, &token) in tokens.iter().enumerate() {
        let mask = vocab
            .next_mask(&state)
            .map_err(|e| LogProbError::Grammar {
                index,
                message: alloc::format!("{e}"),
            })?;
        if !mask.allows(token) {
            return Err(LogProbError::Grammar {
                index,
                message: alloc::format!("token {} not allowed here", token.0),
            });
        }
        masks.push(mask);
        state = vocab.advance(state, token).map_err(|e| LogProbError::Grammar {
            index,
            message: alloc::format!("{e}"),
        })?;
    }
    if !state.is_done() {
        return Err(LogProbError::Unfinished);
    }
    Ok(masks)
}

/// Exact log-probability of a sampled sequence under the current
/// parameters, one causal pass.
pub fn sequence_logprob(
    params: &PolicyParams,
    vocab: &Vocabulary,
    tokens: &[TokenId],
    factor: Option<&[f64]>,
    allow_events: bool,
) -> Result<f64, LogProbError> {
    let masks = replay_masks(vocab, tokens, allow_events)?;
    // the conditional for tokens[j] is read at the row of its predecessor
    let mut input = alloc::vec![vocab.begin_token()];
    input.extend_from_slice(&tokens[..tokens.len() - 1]);
    let logits = causal_logits(params, &input, factor);
    let offset = usize::from(factor.is_some());
    let mut total = 0.0;
    for (j, mask) in masks.iter().enumerate() {
        let flags: Vec<bool> = (0..params.hyper.vocab)
            .map(|i| mask.allows(TokenId(i as u16)))
            .collect();
        total += masked_log_prob_value(logits.row(offset + j), &flags, tokens[j].index());
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Taped forward path (training)
// ---------------------------------------------------------------------------

/// Tape handles to every parameter tensor, in `named_tensors` order.
pub struct ParamVars {
    pub w_seq: Var,
    pub w_probl: Var,
    pub blocks: Vec<BlockVars>,
    pub w_l: Var,
}

pub struct BlockVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
    pub w_o: Var,
    pub ln1_gain: Var,
    pub ln1_bias: Var,
    pub ffn_w1: Var,
    pub ffn_b1: Var,
    pub ffn_w2: Var,
    pub ffn_b2: Var,
    pub ln2_gain: Var,
    pub ln2_bias: Var,
}

impl ParamVars {
    /// Register all parameters as tape leaves.
    pub fn register(tape: &mut Tape, params: &PolicyParams) -> Self {
        ParamVars {
            w_seq: tape.leaf(params.w_seq.clone()),
            w_probl: tape.leaf(params.w_probl.clone()),
            blocks: params
                .blocks
                .iter()
                .map(|b| BlockVars {
                    w_q: tape.leaf(b.w_q.clone()),
                    w_k: tape.leaf(b.w_k.clone()),
                    w_v: tape.leaf(b.w_v.clone()),
                    w_o: tape.leaf(b.w_o.clone()),
                    ln1_gain: tape.leaf(b.ln1_gain.clone()),
                    ln1_bias: tape.leaf(b.ln1_bias.clone()),
                    ffn_w1: tape.leaf(b.ffn_w1.clone()),
                    ffn_b1: tape.leaf(b.ffn_b1.clone()),
                    ffn_w2: tape.leaf(b.ffn_w2.clone()),
                    ffn_b2: tape.leaf(b.ffn_b2.clone()),
                    ln2_gain: tape.leaf(b.ln2_gain.clone()),
                    ln2_bias: tape.leaf(b.ln2_bias.clone()),
                })
                .collect(),
            w_l: tape.leaf(params.w_l.clone()),
        }
    }

    /// Leaf handles in `named_tensors` order.
    pub fn ordered(&self) -> Vec<Var> {
        let mut out = alloc::vec![self.w_seq, self.w_probl];
        for b in &self.blocks {
            out.extend([
                b.w_q, b.w_k, b.w_v, b.w_o, b.ln1_gain, b.ln1_bias, b.ffn_w1, b.ffn_b1,
                b.ffn_w2, b.ffn_b2, b.ln2_gain, b.ln2_bias,
            ]);
        }
        out.push(self.w_l);
        out
    }
}

fn embed_taped(
    tape: &mut Tape,
    pv: &ParamVars,
    hyper: &PolicyHyper,
    token_indices: &[u16],
    factor: Option<&[f64]>,
) -> Var {
    let gathered = tape.gather_rows(pv.w_seq, token_indices);
    let x = if let Some(fv) = factor {
        let fleaf = tape.leaf(Tensor::from_rows(&[fv]));
        let projected = tape.matmul(fleaf, pv.w_probl);
        // prepend the factor row via constant selection matrices so the
        // concatenation stays differentiable
        let l = token_indices.len();
        let one = Tensor::from_fn(l + 1, 1, |r, _| if r == 0 { 1.0 } else { 0.0 });
        let rest = Tensor::from_fn(l + 1, l, |r, c| if r == c + 1 { 1.0 } else { 0.0 });
        let sel_f = tape.leaf(one);
        let sel_t = tape.leaf(rest);
        let lifted_f = tape.matmul(sel_f, projected);
        let lifted_t = tape.matmul(sel_t, gathered);
        tape.add(lifted_f, lifted_t)
    } else {
        gathered
    };
    let pe = positional_block(token_indices.len(), factor.is_some(), hyper.d_model);
    tape.add_const(x, &pe)
}

fn block_taped(tape: &mut Tape, hyper: &PolicyHyper, b: &BlockVars, x: Var) -> Var {
    let dh = hyper.head_dim();
    let scale = 1.0 / fmath::sqrt(dh as f64);
    let q = tape.matmul(x, b.w_q);
    let k = tape.matmul(x, b.w_k);
    let v = tape.matmul(x, b.w_v);
    let mut ctx: Option<Var> = None;
    for h in 0..hyper.heads {
        let qh = tape.slice_cols(q, h * dh, dh);
        let kh = tape.slice_cols(k, h * dh, dh);
        let vh = tape.slice_cols(v, h * dh, dh);
        let scores_raw = tape.matmul_nt(qh, kh);
        let scores = tape.scale(scores_raw, scale);
        let probs = tape.causal_softmax(scores);
        let head_ctx = tape.matmul(probs, vh);
        ctx = Some(match ctx {
            Some(prev) => tape.concat_cols(prev, head_ctx),
            None => head_ctx,
        });
    }
    let attn = tape.matmul(ctx.unwrap(), b.w_o);
    let res1 = tape.add(x, attn);
    let h1 = tape.layer_norm(res1, b.ln1_gain, b.ln1_bias, LN_EPS);
    let ff_lin = tape.matmul(h1, b.ffn_w1);
    let ff_b = tape.add_row(ff_lin, b.ffn_b1);
    let ff_act = tape.relu(ff_b);
    let ff_out_lin = tape.matmul(ff_act, b.ffn_w2);
    let ff_out = tape.add_row(ff_out_lin, b.ffn_b2);
    let res2 = tape.add(h1, ff_out);
    tape.layer_norm(res2, b.ln2_gain, b.ln2_bias, LN_EPS)
}

/// Causal logits on the tape; rows align with [`causal_logits`].
pub fn causal_logits_var(
    tape: &mut Tape,
    pv: &ParamVars,
    hyper: &PolicyHyper,
    token_indices: &[u16],
    factor: Option<&[f64]>,
) -> Var {
    let mut x = embed_taped(tape, pv, hyper, token_indices, factor);
    for b in &pv.blocks {
        x = block_taped(tape, hyper, b, x);
    }
    tape.matmul(x, pv.w_l)
}

/// Taped sequence log-probability with explicit per-position masks.
///
/// `tokens` excludes `begin` (prepended internally); `masks[j]` flags the
/// tokens legal at position `j`.
pub fn sequence_logprob_var(
    tape: &mut Tape,
    pv: &ParamVars,
    hyper: &PolicyHyper,
    begin_index: u16,
    tokens: &[u16],
    masks: &[Vec<bool>],
    factor: Option<&[f64]>,
) -> Var {
    debug_assert_eq!(tokens.len(), masks.len());
    let mut input = alloc::vec![begin_index];
    input.extend_from_slice(&tokens[..tokens.len() - 1]);
    let logits = causal_logits_var(tape, pv, hyper, &input, factor);
    let offset = usize::from(factor.is_some());
    let parts: Vec<Var> = (0..tokens.len())
        .map(|j| tape.masked_log_prob(logits, offset + j, tokens[j] as usize, &masks[j]))
        .collect();
    tape.sum_scalars(&parts)
}

/// Per-position masks of a valid sequence, as plain flag vectors.
pub fn grammar_masks(
    vocab: &Vocabulary,
    tokens: &[TokenId],
    allow_events: bool,
) -> Result<Vec<Vec<bool>>, LogProbError> {
    let masks = replay_masks(vocab, tokens, allow_events)?;
    Ok(masks
        .into_iter()
        .map(|m| {
            (0..vocab.len())
                .map(|i| m.allows(TokenId(i as u16)))
                .collect()
        })
        .collect())
}
