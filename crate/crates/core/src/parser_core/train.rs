use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::context::context_vocabulary;
use crate::corpus::ConversationRecord;
use crate::mr_tree::MrTree;
use crate::parser_core::model::{ParserModel, TrainConfig};
use crate::parser_core::pipeline::{replay_prepared, ParserResources, PreparedInput};
use crate::parser_core::tape::{NodeId, Tape, Tensor};
use crate::span::Span;
use crate::tree_codec::{
    tree_to_instructions, AssembleError, Assembler, AssemblerState, DecodeConstraints, Instruction,
    LinearizeError, Vocabulary,
};

const CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("record {id} cannot be linearized: {source}")]
    Unlinearizable {
        id: String,
        #[source]
        source: LinearizeError,
    },
    #[error("record {id}: symbol `{symbol}` is not in the vocabulary")]
    UnknownSymbol { id: String, symbol: String },
    #[error("record {id}: gold sequence rejected by the assembler: {source}")]
    Rejected {
        id: String,
        #[source]
        source: AssembleError,
    },
}

/// Teacher-forcing targets for one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub spans: Vec<Span>,
    pub context: Vec<String>,
    pub targets: Vec<usize>,
    /// Token position the decoder reads at each step.
    pub positions: Vec<usize>,
    /// Symbol fed in at each step; the first is the start symbol.
    pub prev: Vec<usize>,
    /// Row-major `steps x |vocab|` legality masks, with the target always allowed.
    pub masks: Vec<bool>,
}

impl TrainExample {
    pub fn target_instructions(&self, vocab: &Vocabulary) -> Vec<Instruction> {
        self.targets.iter().map(|&t| vocab.symbol(t).clone()).collect()
    }
}

/// Builds the forced inputs and masks for a gold instruction sequence.
pub fn example_from_instructions(
    id: &str,
    prepared: &PreparedInput,
    gold: &[Instruction],
    vocab: &Vocabulary,
    res: &ParserResources,
) -> Result<TrainExample, TrainError> {
    let asm = Assembler::new(&res.ontology, &prepared.tokens, &prepared.spans, &prepared.donations);
    let mut state = AssemblerState::default();
    let mut ex = TrainExample {
        id: id.to_string(),
        tokens: prepared.tokens.clone(),
        spans: prepared.spans.clone(),
        context: prepared.context.clone(),
        targets: Vec::new(),
        positions: Vec::new(),
        prev: vec![vocab.len()],
        masks: Vec::new(),
    };
    for ins in gold {
        let idx = vocab.index_of(ins).ok_or_else(|| TrainError::UnknownSymbol {
            id: id.to_string(),
            symbol: ins.to_string(),
        })?;
        let mut mask = res.constraints.mask(&asm, &state, vocab);
        mask[idx] = true;
        ex.masks.extend(mask);
        ex.positions.push(state.cursor().min(prepared.tokens.len().saturating_sub(1)));
        ex.targets.push(idx);
        asm.apply(&mut state, ins).map_err(|source| TrainError::Rejected {
            id: id.to_string(),
            source,
        })?;
    }
    ex.prev.extend(&ex.targets[..ex.targets.len().saturating_sub(1)]);
    Ok(ex)
}

pub fn example_from_tree(
    id: &str,
    prepared: &PreparedInput,
    gold: &MrTree,
    vocab: &Vocabulary,
    res: &ParserResources,
) -> Result<TrainExample, TrainError> {
    let instrs = tree_to_instructions(
        &res.ontology,
        gold,
        &prepared.tokens,
        &prepared.spans,
        &prepared.donations,
    )
    .map_err(|source| TrainError::Unlinearizable {
        id: id.to_string(),
        source,
    })?;
    example_from_instructions(id, prepared, &instrs, vocab, res)
}

/// Replays each conversation in context and builds one example per turn.
/// Empty utterances are skipped; they never reach the network.
pub fn corpus_examples(
    records: &[ConversationRecord],
    res: &ParserResources,
    vocab: &Vocabulary,
    max_width: usize,
) -> Result<Vec<TrainExample>, TrainError> {
    replay_prepared(records, res, max_width)
        .into_iter()
        .filter(|(_, p, _)| !p.tokens.is_empty())
        .map(|(id, p, gold)| example_from_tree(&id, &p, &gold, vocab, res))
        .collect()
}

/// Mean masked cross-entropy of the forced sequence.
pub fn example_loss(model: &ParserModel, tape: &mut Tape<'_>, ex: &TrainExample) -> NodeId {
    let enc = model.encode(tape, &ex.tokens, &ex.spans, &ex.context);
    let logits = model.forced_logits(tape, &enc, &ex.positions, &ex.prev);
    tape.masked_cross_entropy(logits, ex.targets.clone(), &ex.masks)
}

/// Loss and parameter gradients summed over `batch`.
pub fn batch_gradients(model: &ParserModel, batch: &[&TrainExample]) -> (f64, Vec<Tensor>) {
    let mut grads = model.params.zeros_like();
    let mut loss = 0.0;
    for ex in batch {
        let mut tape = model.tape();
        let l = example_loss(model, &mut tape, ex);
        loss += tape.value(l).data[0];
        tape.backward(l, &mut grads);
    }
    (loss, grads)
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
    lr: f64,
}

/// Linear warmup over the first 5% of steps, then cosine decay to zero.
pub fn learning_rate_at(base: f64, step: usize, total: usize) -> f64 {
    let warmup = (total / 20).max(1);
    if step < warmup {
        return base * (step + 1) as f64 / warmup as f64;
    }
    let progress = (step - warmup) as f64 / (total - warmup).max(1) as f64;
    base * 0.5 * (1.0 + (std::f64::consts::PI * progress.min(1.0)).cos())
}

impl Adam {
    fn step(&mut self, model: &mut ParserModel, grads: &[Tensor]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for (p, g) in grads.iter().enumerate() {
            let w = model.params.get_mut(p);
            let (m, v) = (&mut self.m[p].data, &mut self.v[p].data);
            for i in 0..g.data.len() {
                let gi = g.data[i];
                m[i] = B1 * m[i] + (1.0 - B1) * gi;
                v[i] = B2 * v[i] + (1.0 - B2) * gi * gi;
                w.data[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + 1e-8);
            }
        }
    }
}

/// Trains a fresh model on prepared examples. Returns the model and the mean
/// loss of every epoch.
pub fn train_examples(
    examples: &[TrainExample],
    vocab: Vocabulary,
    context_vocab: Vec<String>,
    cfg: &TrainConfig,
) -> Result<(ParserModel, Vec<f64>), TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut model = ParserModel::new(cfg.clone(), vocab, context_vocab);
    let mut adam = Adam {
        m: model.params.zeros_like(),
        v: model.params.zeros_like(),
        t: 0,
        lr: cfg.learning_rate,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let total_steps = cfg.epochs * examples.len().div_ceil(cfg.batch_size);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainExample> = chunk.iter().map(|&i| &examples[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, &batch);
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            let norm = grads
                .iter()
                .flat_map(|g| &g.data)
                .map(|x| (x * scale).powi(2))
                .sum::<f64>()
                .sqrt();
            let k = scale * if norm > CLIP_NORM { CLIP_NORM / norm } else { 1.0 };
            grads.iter_mut().for_each(|g| g.data.iter_mut().for_each(|x| *x *= k));
            adam.lr = learning_rate_at(cfg.learning_rate, step, total_steps);
            adam.step(&mut model, &grads);
            step += 1;
        }
        trace.push(total / examples.len() as f64);
    }
    model.round_to_precision();
    Ok((model, trace))
}

/// Replays `records`, builds examples and trains a model over the ontology's
/// symbol vocabulary.
pub fn train(
    records: &[ConversationRecord],
    res: &ParserResources,
    cfg: &TrainConfig,
) -> Result<(ParserModel, Vec<f64>), TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    let vocab = res.ontology.symbol_vocabulary();
    let examples = corpus_examples(records, res, &vocab, cfg.max_width)?;
    train_examples(&examples, vocab, context_vocabulary(&res.ontology), cfg)
}

/// One sampled coordinate of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientProbe {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientProbe {
    pub fn relative_error(&self) -> f64 {
        let denom = self.analytic.abs().max(self.numeric.abs()).max(1e-12);
        (self.analytic - self.numeric).abs() / denom
    }
}

/// Compares backpropagated gradients of the summed loss with central
/// differences at `count` random coordinates whose gradient is nonzero.
pub fn gradient_check(
    model: &ParserModel,
    examples: &[TrainExample],
    count: usize,
    eps: f64,
    seed: u64,
) -> Vec<GradientProbe> {
    let batch: Vec<&TrainExample> = examples.iter().collect();
    let (_, grads) = batch_gradients(model, &batch);
    let candidates: Vec<(usize, usize)> = grads
        .iter()
        .enumerate()
        .flat_map(|(p, g)| {
            g.data
                .iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 1e-6)
                .map(move |(i, _)| (p, i))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_model = model.clone();
    let loss = |m: &ParserModel| batch_gradients_loss(m, &batch);
    (0..count.min(candidates.len()))
        .map(|_| {
            let (p, i) = candidates[rng.gen_range(0..candidates.len())];
            let orig = probe_model.params.get(p).data[i];
            probe_model.params.get_mut(p).data[i] = orig + eps;
            let up = loss(&probe_model);
            probe_model.params.get_mut(p).data[i] = orig - eps;
            let down = loss(&probe_model);
            probe_model.params.get_mut(p).data[i] = orig;
            GradientProbe {
                param: model.params.name(p).to_string(),
                index: i,
                analytic: grads[p].data[i],
                numeric: (up - down) / (2.0 * eps),
            }
        })
        .collect()
}

fn batch_gradients_loss(model: &ParserModel, batch: &[&TrainExample]) -> f64 {
    batch
        .iter()
        .map(|ex| {
            let mut tape = model.tape();
            let l = example_loss(model, &mut tape, ex);
            tape.value(l).data[0]
        })
        .sum()
}
