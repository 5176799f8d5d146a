use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser_core::tape::{ParamStore, Tape, Tensor};
use crate::span::Span;
use crate::text::fnv1a;
use crate::tree_codec::{
    AssembleError, Assembler, AssemblerState, DecodeConstraints, Instruction, Vocabulary,
};

/// Hyperparameters for the network and its training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Token embedding width (E).
    pub embed_dim: usize,
    /// Span-label embedding width (S).
    pub span_dim: usize,
    /// Decoder hidden width (H).
    pub hidden_dim: usize,
    /// Encoder layers (L).
    pub layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Maximum utterance width (W); longer inputs keep their last W tokens.
    pub max_width: usize,
    pub token_buckets: usize,
    pub span_buckets: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embed_dim: 48,
            span_dim: 16,
            hidden_dim: 96,
            layers: 2,
            epochs: 12,
            learning_rate: 3e-3,
            batch_size: 16,
            seed: 7,
            max_width: 24,
            token_buckets: 2048,
            span_buckets: 64,
        }
    }
}

impl TrainConfig {
    pub fn model_dim(&self) -> usize {
        self.embed_dim + self.span_dim
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("embed_dim", self.embed_dim),
            ("span_dim", self.span_dim),
            ("hidden_dim", self.hidden_dim),
            ("layers", self.layers),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_width", self.max_width),
            ("token_buckets", self.token_buckets),
            ("span_buckets", self.span_buckets),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F16,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("symbol budget exhausted at token {0}")]
    Truncated(usize),
    #[error("no legal symbol at token {0}")]
    EmptyMask(usize),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
}

#[derive(Debug, Clone)]
struct LayerIds {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct ParamIds {
    tok: usize,
    span: usize,
    pos: usize,
    ctx: usize,
    layers: Vec<LayerIds>,
    lnf_g: usize,
    lnf_b: usize,
    bridge_w: usize,
    bridge_b: usize,
    sym: usize,
    gru_wx: usize,
    gru_bx: usize,
    gru_uzr: usize,
    gru_uh: usize,
    out_w: usize,
    out_b: usize,
}

impl ParamIds {
    fn resolve(p: &ParamStore, layers: usize) -> Option<Self> {
        let id = |n: &str| p.id(n);
        let layer = |l: usize| -> Option<LayerIds> {
            let f = |n: &str| p.id(&format!("enc{l}.{n}"));
            Some(LayerIds {
                ln1_g: f("ln1_g")?,
                ln1_b: f("ln1_b")?,
                wq: f("wq")?,
                wk: f("wk")?,
                wv: f("wv")?,
                wo: f("wo")?,
                ln2_g: f("ln2_g")?,
                ln2_b: f("ln2_b")?,
                w1: f("w1")?,
                b1: f("b1")?,
                w2: f("w2")?,
                b2: f("b2")?,
            })
        };
        Some(ParamIds {
            tok: id("tok_emb")?,
            span: id("span_emb")?,
            pos: id("pos_emb")?,
            ctx: id("ctx_emb")?,
            layers: (0..layers).map(layer).collect::<Option<Vec<_>>>()?,
            lnf_g: id("lnf_g")?,
            lnf_b: id("lnf_b")?,
            bridge_w: id("bridge_w")?,
            bridge_b: id("bridge_b")?,
            sym: id("sym_emb")?,
            gru_wx: id("gru_wx")?,
            gru_bx: id("gru_bx")?,
            gru_uzr: id("gru_uzr")?,
            gru_uh: id("gru_uh")?,
            out_w: id("out_w")?,
            out_b: id("out_b")?,
        })
    }
}

/// Hash buckets for a token: the whole word plus its boundary-marked
/// character trigrams.
pub fn token_buckets(token: &str, buckets: usize) -> Vec<usize> {
    let word = token.to_lowercase();
    let mut out = vec![(fnv1a(format!("w:{word}").as_bytes()) % buckets as u64) as usize];
    let marked: Vec<char> = format!("^{word}$").chars().collect();
    for tri in marked.windows(3) {
        let s: String = tri.iter().collect();
        out.push((fnv1a(format!("t:{s}").as_bytes()) % buckets as u64) as usize);
    }
    out
}

pub fn span_bucket(label: &str, buckets: usize) -> usize {
    (fnv1a(format!("s:{label}").as_bytes()) % buckets as u64) as usize
}

/// The span-label bucket covering each token, if any. The first span in
/// `spans` wins where spans overlap.
pub fn span_bags(n_tokens: usize, spans: &[Span], buckets: usize) -> Vec<Vec<usize>> {
    (0..n_tokens)
        .map(|t| {
            spans
                .iter()
                .find(|s| s.start <= t && t <= s.end)
                .map(|s| vec![span_bucket(&s.label, buckets)])
                .unwrap_or_default()
        })
        .collect()
}

/// Encoder outputs recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// Every encoder position: utterance tokens then context tokens.
    pub outputs: usize,
    /// The utterance rows of `outputs`.
    pub utterance: usize,
    /// Initial decoder state, `1 x H`.
    pub init: usize,
    pub n_tokens: usize,
}

/// Transformer encoder over tokens, span labels and context tokens, feeding a
/// token-synchronous GRU decoder.
#[derive(Debug, Clone)]
pub struct ParserModel {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub context_vocab: Vec<String>,
    pub params: ParamStore,
    pub precision: Precision,
    ctx_index: HashMap<String, usize>,
    ids: ParamIds,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect())
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    uniform(rng, rows, cols, (6.0 / (rows + cols) as f64).sqrt())
}

fn ones(cols: usize) -> Tensor {
    Tensor::from_vec(1, cols, vec![1.0; cols])
}

impl ParserModel {
    /// A freshly initialized model; deterministic in `config.seed`.
    pub fn new(config: TrainConfig, vocab: Vocabulary, context_vocab: Vec<String>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (e, s, h) = (config.embed_dim, config.span_dim, config.hidden_dim);
        let d = config.model_dim();
        let v = vocab.len();
        let mut p = ParamStore::default();
        p.add("tok_emb", uniform(&mut rng, config.token_buckets, e, 0.1));
        p.add("span_emb", uniform(&mut rng, config.span_buckets, s, 0.1));
        p.add("pos_emb", uniform(&mut rng, config.max_width, d, 0.1));
        p.add("ctx_emb", uniform(&mut rng, context_vocab.len() + 1, d, 0.1));
        for l in 0..config.layers {
            let n = |x: &str| format!("enc{l}.{x}");
            p.add(n("ln1_g"), ones(d));
            p.add(n("ln1_b"), Tensor::zeros(1, d));
            p.add(n("wq"), xavier(&mut rng, d, d));
            p.add(n("wk"), xavier(&mut rng, d, d));
            p.add(n("wv"), xavier(&mut rng, d, d));
            p.add(n("wo"), xavier(&mut rng, d, d));
            p.add(n("ln2_g"), ones(d));
            p.add(n("ln2_b"), Tensor::zeros(1, d));
            p.add(n("w1"), xavier(&mut rng, d, 2 * d));
            p.add(n("b1"), Tensor::zeros(1, 2 * d));
            p.add(n("w2"), xavier(&mut rng, 2 * d, d));
            p.add(n("b2"), Tensor::zeros(1, d));
        }
        p.add("lnf_g", ones(d));
        p.add("lnf_b", Tensor::zeros(1, d));
        p.add("bridge_w", xavier(&mut rng, d, h));
        p.add("bridge_b", Tensor::zeros(1, h));
        p.add("sym_emb", uniform(&mut rng, v + 1, e, 0.1));
        p.add("gru_wx", xavier(&mut rng, d + e, 3 * h));
        p.add("gru_bx", Tensor::zeros(1, 3 * h));
        p.add("gru_uzr", xavier(&mut rng, h, 2 * h));
        p.add("gru_uh", xavier(&mut rng, h, h));
        p.add("out_w", xavier(&mut rng, h + d, v));
        p.add("out_b", Tensor::zeros(1, v));
        Self::from_parts(config, vocab, context_vocab, p, Precision::F32)
            .expect("freshly built parameters resolve")
    }

    /// Reassembles a model from stored parts; `None` if a tensor is missing or misshapen.
    pub fn from_parts(
        config: TrainConfig,
        vocab: Vocabulary,
        context_vocab: Vec<String>,
        params: ParamStore,
        precision: Precision,
    ) -> Option<Self> {
        let ids = ParamIds::resolve(&params, config.layers)?;
        let d = config.model_dim();
        let shapes_ok = params.get(ids.out_w).cols == vocab.len()
            && params.get(ids.sym).rows == vocab.len() + 1
            && params.get(ids.ctx).rows == context_vocab.len() + 1
            && params.get(ids.tok).rows == config.token_buckets
            && params.get(ids.span).rows == config.span_buckets
            && params.get(ids.pos).rows == config.max_width
            && params.get(ids.out_w).rows == config.hidden_dim + d
            && params.get(ids.gru_wx).rows == d + config.embed_dim;
        if !shapes_ok {
            return None;
        }
        let ctx_index = context_vocab
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Some(ParserModel {
            config,
            vocab,
            context_vocab,
            params,
            precision,
            ctx_index,
            ids,
        })
    }

    pub fn tape(&self) -> Tape<'_> {
        Tape::new(&self.params).half_precision(self.precision == Precision::F16)
    }

    fn bos(&self) -> usize {
        self.vocab.len()
    }

    fn context_ids(&self, ctx: &[String]) -> Vec<Vec<usize>> {
        let unknown = self.context_vocab.len();
        let none = ["SYS:NONE".to_string()];
        let ctx = if ctx.is_empty() { &none[..] } else { ctx };
        ctx.iter()
            .map(|c| vec![self.ctx_index.get(c).copied().unwrap_or(unknown)])
            .collect()
    }

    /// Encoder input rows (before attention): utterance rows then context rows.
    pub fn encoder_inputs(&self, tape: &mut Tape<'_>, tokens: &[String], spans: &[Span], ctx: &[String]) -> usize {
        let cfg = &self.config;
        let n = tokens.len();
        let tok = tape.embed_bag(
            self.ids.tok,
            tokens.iter().map(|t| token_buckets(t, cfg.token_buckets)).collect(),
        );
        let sp = tape.embed_bag(self.ids.span, span_bags(n, spans, cfg.span_buckets));
        let utt = tape.concat_cols(&[tok, sp]);
        let pos = tape.embed_bag(
            self.ids.pos,
            (0..n).map(|i| vec![i.min(cfg.max_width - 1)]).collect(),
        );
        let utt = tape.add(utt, pos);
        let ctx_rows = tape.embed_bag(self.ids.ctx, self.context_ids(ctx));
        tape.concat_rows(&[utt, ctx_rows])
    }

    pub fn encode(&self, tape: &mut Tape<'_>, tokens: &[String], spans: &[Span], ctx: &[String]) -> Encoded {
        let d = self.config.model_dim();
        let mut x = self.encoder_inputs(tape, tokens, spans, ctx);
        for l in &self.ids.layers {
            let (g, b) = (tape.param(l.ln1_g), tape.param(l.ln1_b));
            let a = tape.layer_norm(x, g, b);
            let wq = tape.param(l.wq);
            let wk = tape.param(l.wk);
            let wv = tape.param(l.wv);
            let wo = tape.param(l.wo);
            let q = tape.matmul(a, wq);
            let k = tape.matmul(a, wk);
            let v = tape.matmul(a, wv);
            let kt = tape.transpose(k);
            let scores = tape.matmul(q, kt);
            let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
            let att = tape.softmax_rows(scores);
            let mixed = tape.matmul(att, v);
            let proj = tape.matmul(mixed, wo);
            x = tape.add(x, proj);
            let (g, b) = (tape.param(l.ln2_g), tape.param(l.ln2_b));
            let a = tape.layer_norm(x, g, b);
            let (w1, b1, w2, b2) = (tape.param(l.w1), tape.param(l.b1), tape.param(l.w2), tape.param(l.b2));
            let f = tape.matmul(a, w1);
            let f = tape.add_row(f, b1);
            let f = tape.relu(f);
            let f = tape.matmul(f, w2);
            let f = tape.add_row(f, b2);
            x = tape.add(x, f);
        }
        let (g, b) = (tape.param(self.ids.lnf_g), tape.param(self.ids.lnf_b));
        let outputs = tape.layer_norm(x, g, b);
        let utterance = tape.slice_rows(outputs, 0, tokens.len());
        let mean = tape.mean_rows(outputs);
        let (bw, bb) = (tape.param(self.ids.bridge_w), tape.param(self.ids.bridge_b));
        let init = tape.matmul(mean, bw);
        let init = tape.add_row(init, bb);
        let init = tape.tanh(init);
        Encoded {
            outputs,
            utterance,
            init,
            n_tokens: tokens.len(),
        }
    }

    /// Input-side gate pre-activations for decoder steps at the given token
    /// positions after the given previous symbols, `n x 3H`.
    fn step_inputs(&self, tape: &mut Tape<'_>, enc: &Encoded, positions: &[usize], prev: &[usize]) -> (usize, usize) {
        let rows = tape.gather_rows(enc.utterance, positions.to_vec());
        let sym = tape.embed_bag(self.ids.sym, prev.iter().map(|p| vec![*p]).collect());
        let x = tape.concat_cols(&[rows, sym]);
        let (wx, bx) = (tape.param(self.ids.gru_wx), tape.param(self.ids.gru_bx));
        let xg = tape.matmul(x, wx);
        (tape.add_row(xg, bx), rows)
    }

    fn gru(&self, tape: &mut Tape<'_>, xg: usize, h: usize) -> usize {
        let hd = self.config.hidden_dim;
        let (uzr, uh) = (tape.param(self.ids.gru_uzr), tape.param(self.ids.gru_uh));
        let hzr = tape.matmul(h, uzr);
        let xz = tape.slice_cols(xg, 0, hd);
        let xr = tape.slice_cols(xg, hd, hd);
        let xh = tape.slice_cols(xg, 2 * hd, hd);
        let hz = tape.slice_cols(hzr, 0, hd);
        let hr = tape.slice_cols(hzr, hd, hd);
        let z = tape.add(xz, hz);
        let z = tape.sigmoid(z);
        let r = tape.add(xr, hr);
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h);
        let cand = tape.matmul(rh, uh);
        let cand = tape.add(xh, cand);
        let cand = tape.tanh(cand);
        let keep = tape.one_minus(z);
        let keep = tape.mul(keep, h);
        let upd = tape.mul(z, cand);
        tape.add(keep, upd)
    }

    fn project(&self, tape: &mut Tape<'_>, hs: usize, enc_rows: usize) -> usize {
        let both = tape.concat_cols(&[hs, enc_rows]);
        let (w, b) = (tape.param(self.ids.out_w), tape.param(self.ids.out_b));
        let logits = tape.matmul(both, w);
        tape.add_row(logits, b)
    }

    /// Logits for every step of a forced symbol sequence, `n x V`.
    pub fn forced_logits(&self, tape: &mut Tape<'_>, enc: &Encoded, positions: &[usize], prev: &[usize]) -> usize {
        let (xg, rows) = self.step_inputs(tape, enc, positions, prev);
        let mut h = enc.init;
        let mut hs = Vec::with_capacity(positions.len());
        for k in 0..positions.len() {
            let xk = tape.slice_rows(xg, k, 1);
            h = self.gru(tape, xk, h);
            hs.push(h);
        }
        let hs = tape.concat_rows(&hs);
        self.project(tape, hs, rows)
    }

    /// One decoder step; returns the new state and the `1 x V` logits.
    pub fn step(&self, tape: &mut Tape<'_>, enc: &Encoded, position: usize, prev: usize, h: usize) -> (usize, usize) {
        let (xg, row) = self.step_inputs(tape, enc, &[position], &[prev]);
        let h = self.gru(tape, xg, h);
        (h, self.project(tape, h, row))
    }

    /// Greedy token-synchronous decoding under `constraints`.
    pub fn decode(
        &self,
        tape: &mut Tape<'_>,
        enc: &Encoded,
        asm: &Assembler<'_>,
        constraints: &dyn DecodeConstraints,
    ) -> Result<(Vec<Instruction>, AssemblerState), DecodeError> {
        let mut state = AssemblerState::default();
        let mut out = Vec::new();
        let mut h = enc.init;
        let mut prev = self.bos();
        let budget = constraints.budget();
        while !state.is_finished() {
            let pos = state.cursor();
            if state.symbols_at_cursor() >= budget {
                return Err(DecodeError::Truncated(pos));
            }
            let mask = constraints.mask(asm, &state, &self.vocab);
            let (h2, logits) = self.step(tape, enc, pos.min(enc.n_tokens.saturating_sub(1)), prev, h);
            h = h2;
            let scores = &tape.value(logits).data;
            let best = (0..self.vocab.len())
                .filter(|&i| mask[i])
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(j) if scores[j] >= scores[i] => Some(j),
                    _ => Some(i),
                })
                .ok_or(DecodeError::EmptyMask(pos))?;
            let ins = self.vocab.symbol(best).clone();
            asm.apply(&mut state, &ins)?;
            out.push(ins);
            prev = best;
        }
        Ok((out, state))
    }

    /// Rounds every weight to the storage precision.
    pub fn round_to_precision(&mut self) {
        let f: fn(f64) -> f64 = match self.precision {
            Precision::F32 => |x| x as f32 as f64,
            Precision::F16 => crate::parser_core::tape::round_f16,
        };
        for id in 0..self.params.len() {
            self.params.get_mut(id).data.iter_mut().for_each(|x| *x = f(*x));
        }
    }

    /// A copy with every weight stored and evaluated in half precision.
    pub fn quantize(&self) -> ParserModel {
        let mut m = self.clone();
        m.precision = Precision::F16;
        m.round_to_precision();
        m
    }
}
