use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TransformerConfig;
use crate::autodiff::{log_softmax_in_place, Mat, ParamId, ParamStore, Tape, Var};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct AttentionIds {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
}

#[derive(Debug, Clone)]
struct NormIds {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
struct FeedForwardIds {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    norm_attn: NormIds,
    attn: AttentionIds,
    norm_ffn: NormIds,
    ffn: FeedForwardIds,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    norm_self: NormIds,
    self_attn: AttentionIds,
    norm_cross: NormIds,
    cross_attn: AttentionIds,
    norm_ffn: NormIds,
    ffn: FeedForwardIds,
}

#[derive(Debug, Clone)]
struct Layout {
    src_embed: ParamId,
    tgt_embed: ParamId,
    encoder: Vec<EncoderLayer>,
    encoder_norm: NormIds,
    decoder: Vec<DecoderLayer>,
    decoder_norm: NormIds,
    out_w: ParamId,
    out_b: ParamId,
}

/// Pre-norm transformer encoder–decoder with sinusoidal positions and
/// untied embeddings.
#[derive(Debug, Clone)]
pub struct Transformer {
    config: TransformerConfig,
    src_vocab_size: usize,
    tgt_vocab_size: usize,
    params: ParamStore,
    layout: Layout,
    positions: Mat,
}

struct Builder<'a> {
    params: &'a mut ParamStore,
    rng: ChaCha8Rng,
    d: usize,
    ffn: usize,
}

impl Builder<'_> {
    fn uniform(&mut self, name: String, rows: usize, cols: usize, limit: f64) -> ParamId {
        let rng = &mut self.rng;
        let m = Mat::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..limit));
        self.params.add(name, m)
    }

    fn xavier(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        self.uniform(name, rows, cols, limit)
    }

    fn constant(&mut self, name: String, cols: usize, value: f64) -> ParamId {
        self.params.add(name, Mat::from_elem((1, cols), value))
    }

    fn norm(&mut self, prefix: &str) -> NormIds {
        NormIds {
            gain: self.constant(format!("{prefix}.gain"), self.d, 1.0),
            bias: self.constant(format!("{prefix}.bias"), self.d, 0.0),
        }
    }

    fn attention(&mut self, prefix: &str) -> AttentionIds {
        let d = self.d;
        AttentionIds {
            wq: self.xavier(format!("{prefix}.wq"), d, d),
            bq: self.constant(format!("{prefix}.bq"), d, 0.0),
            wk: self.xavier(format!("{prefix}.wk"), d, d),
            bk: self.constant(format!("{prefix}.bk"), d, 0.0),
            wv: self.xavier(format!("{prefix}.wv"), d, d),
            bv: self.constant(format!("{prefix}.bv"), d, 0.0),
            wo: self.xavier(format!("{prefix}.wo"), d, d),
            bo: self.constant(format!("{prefix}.bo"), d, 0.0),
        }
    }

    fn feed_forward(&mut self, prefix: &str) -> FeedForwardIds {
        let (d, f) = (self.d, self.ffn);
        FeedForwardIds {
            w1: self.xavier(format!("{prefix}.w1"), d, f),
            b1: self.constant(format!("{prefix}.b1"), f, 0.0),
            w2: self.xavier(format!("{prefix}.w2"), f, d),
            b2: self.constant(format!("{prefix}.b2"), d, 0.0),
        }
    }
}

fn sinusoidal(len: usize, d: usize) -> Mat {
    Array2::from_shape_fn((len, d), |(pos, i)| {
        let angle = pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Dropout source for one forward pass: `None` disables dropout.
pub type Noise<'a> = Option<&'a mut ChaCha8Rng>;

impl Transformer {
    /// Freshly initialized network. The same `(config, sizes, seed)` always
    /// yields identical parameters.
    pub fn new(config: TransformerConfig, src_vocab_size: usize, tgt_vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if src_vocab_size <= Vocabulary::EOS_ID || tgt_vocab_size <= Vocabulary::EOS_ID {
            return Err(Error::Config("vocabularies must contain the reserved tokens".into()));
        }
        let mut params = ParamStore::new();
        let d = config.embed_dim;
        let mut b = Builder {
            params: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            d,
            ffn: config.ffn_dim,
        };
        let embed_limit = (3.0 / d as f64).sqrt();
        let src_embed = b.uniform("src_embed".into(), src_vocab_size, d, embed_limit);
        let tgt_embed = b.uniform("tgt_embed".into(), tgt_vocab_size, d, embed_limit);
        let encoder = (0..config.layers)
            .map(|l| EncoderLayer {
                norm_attn: b.norm(&format!("enc{l}.norm_attn")),
                attn: b.attention(&format!("enc{l}.attn")),
                norm_ffn: b.norm(&format!("enc{l}.norm_ffn")),
                ffn: b.feed_forward(&format!("enc{l}.ffn")),
            })
            .collect();
        let encoder_norm = b.norm("enc.norm");
        let decoder = (0..config.layers)
            .map(|l| DecoderLayer {
                norm_self: b.norm(&format!("dec{l}.norm_self")),
                self_attn: b.attention(&format!("dec{l}.self_attn")),
                norm_cross: b.norm(&format!("dec{l}.norm_cross")),
                cross_attn: b.attention(&format!("dec{l}.cross_attn")),
                norm_ffn: b.norm(&format!("dec{l}.norm_ffn")),
                ffn: b.feed_forward(&format!("dec{l}.ffn")),
            })
            .collect();
        let decoder_norm = b.norm("dec.norm");
        let out_w = b.xavier("out.w".into(), d, tgt_vocab_size);
        let out_b = b.constant("out.b".into(), tgt_vocab_size, 0.0);
        let layout = Layout {
            src_embed,
            tgt_embed,
            encoder,
            encoder_norm,
            decoder,
            decoder_norm,
            out_w,
            out_b,
        };
        let positions = sinusoidal(config.max_len, d);
        Ok(Transformer {
            config,
            src_vocab_size,
            tgt_vocab_size,
            params,
            layout,
            positions,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn src_vocab_size(&self) -> usize {
        self.src_vocab_size
    }

    pub fn tgt_vocab_size(&self) -> usize {
        self.tgt_vocab_size
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Sets the output projection to zero so every step predicts the
    /// uniform distribution. Used by tests with hand-computable losses.
    pub fn zero_output_layer(&mut self) {
        self.params.get_mut(self.layout.out_w).fill(0.0);
        self.params.get_mut(self.layout.out_b).fill(0.0);
    }

    /// Output bias row, for tests that force specific predictions.
    pub fn output_bias_mut(&mut self) -> &mut Mat {
        self.params.get_mut(self.layout.out_b)
    }

    pub fn check_lengths(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        let max_len = self.config.max_len;
        if src_len > max_len {
            return Err(Error::SequenceTooLong { len: src_len, max_len });
        }
        if tgt_len + 1 > max_len {
            return Err(Error::SequenceTooLong { len: tgt_len + 1, max_len });
        }
        Ok(())
    }

    fn dropout<'p>(&self, tape: &mut Tape<'p>, x: Var, noise: &mut Noise) -> Var {
        match noise {
            Some(rng) => tape.dropout(x, self.config.dropout_rate, *rng),
            None => x,
        }
    }

    fn embed<'p>(&self, tape: &mut Tape<'p>, table: ParamId, ids: &[usize], noise: &mut Noise) -> Var {
        let e = tape.embed(table, ids);
        let e = tape.scale(e, (self.config.embed_dim as f64).sqrt());
        let pos = tape.input(self.positions.slice(ndarray::s![..ids.len(), ..]).to_owned());
        let x = tape.add(e, pos);
        self.dropout(tape, x, noise)
    }

    fn linear<'p>(tape: &mut Tape<'p>, x: Var, w: ParamId, b: ParamId) -> Var {
        let wv = tape.param(w);
        let bv = tape.param(b);
        let h = tape.matmul(x, wv);
        tape.add_row(h, bv)
    }

    fn norm<'p>(tape: &mut Tape<'p>, x: Var, ids: &NormIds) -> Var {
        let g = tape.param(ids.gain);
        let b = tape.param(ids.bias);
        tape.layer_norm(x, g, b)
    }

    fn attend<'p>(&self, tape: &mut Tape<'p>, x: Var, memory: Var, ids: &AttentionIds, causal: bool) -> Var {
        let q = Self::linear(tape, x, ids.wq, ids.bq);
        let k = Self::linear(tape, memory, ids.wk, ids.bk);
        let v = Self::linear(tape, memory, ids.wv, ids.bv);
        let a = tape.attention(q, k, v, self.config.heads, causal);
        Self::linear(tape, a, ids.wo, ids.bo)
    }

    fn feed_forward<'p>(&self, tape: &mut Tape<'p>, x: Var, ids: &FeedForwardIds, noise: &mut Noise) -> Var {
        let h = Self::linear(tape, x, ids.w1, ids.b1);
        let h = tape.relu(h);
        let h = self.dropout(tape, h, noise);
        Self::linear(tape, h, ids.w2, ids.b2)
    }

    /// Encodes source ids into the memory the decoder attends to.
    pub fn encode<'p>(&'p self, tape: &mut Tape<'p>, src: &[usize], noise: &mut Noise) -> Var {
        let mut x = self.embed(tape, self.layout.src_embed, src, noise);
        for layer in &self.layout.encoder {
            let h = Self::norm(tape, x, &layer.norm_attn);
            let h = self.attend(tape, h, h, &layer.attn, false);
            let h = self.dropout(tape, h, noise);
            x = tape.add(x, h);
            let h = Self::norm(tape, x, &layer.norm_ffn);
            let h = self.feed_forward(tape, h, &layer.ffn, noise);
            let h = self.dropout(tape, h, noise);
            x = tape.add(x, h);
        }
        Self::norm(tape, x, &self.layout.encoder_norm)
    }

    /// Decoder logits for every position of `tgt_in` (which starts with BOS).
    pub fn decode<'p>(&'p self, tape: &mut Tape<'p>, memory: Var, tgt_in: &[usize], noise: &mut Noise) -> Var {
        let mut y = self.embed(tape, self.layout.tgt_embed, tgt_in, noise);
        for layer in &self.layout.decoder {
            let h = Self::norm(tape, y, &layer.norm_self);
            let h = self.attend(tape, h, h, &layer.self_attn, true);
            let h = self.dropout(tape, h, noise);
            y = tape.add(y, h);
            let h = Self::norm(tape, y, &layer.norm_cross);
            let h = self.attend(tape, h, memory, &layer.cross_attn, false);
            let h = self.dropout(tape, h, noise);
            y = tape.add(y, h);
            let h = Self::norm(tape, y, &layer.norm_ffn);
            let h = self.feed_forward(tape, h, &layer.ffn, noise);
            let h = self.dropout(tape, h, noise);
            y = tape.add(y, h);
        }
        let y = Self::norm(tape, y, &self.layout.decoder_norm);
        Self::linear(tape, y, self.layout.out_w, self.layout.out_b)
    }

    /// Teacher-forced logits: row `t` scores `target[t]`, with EOS after
    /// the last gloss. Returns the logits node and the target ids.
    pub fn teacher_forced<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        src: &[usize],
        tgt: &[usize],
        noise: &mut Noise,
    ) -> (Var, Vec<usize>) {
        let memory = self.encode(tape, src, noise);
        let mut tgt_in = Vec::with_capacity(tgt.len() + 1);
        tgt_in.push(Vocabulary::BOS_ID);
        tgt_in.extend_from_slice(tgt);
        let mut targets = tgt.to_vec();
        targets.push(Vocabulary::EOS_ID);
        (self.decode(tape, memory, &tgt_in, noise), targets)
    }

    /// Encoder output for deterministic decoding.
    pub fn memory(&self, src: &[usize]) -> Mat {
        let mut tape = Tape::new(&self.params);
        let m = self.encode(&mut tape, src, &mut None);
        tape.value(m).clone()
    }

    /// Next-token log-probabilities after `BOS + prefix`, dropout disabled.
    pub fn next_log_probs(&self, memory: &Mat, prefix: &[usize]) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let m = tape.input(memory.clone());
        let mut tgt_in = Vec::with_capacity(prefix.len() + 1);
        tgt_in.push(Vocabulary::BOS_ID);
        tgt_in.extend_from_slice(prefix);
        let logits = self.decode(&mut tape, m, &tgt_in, &mut None);
        let mut last = tape.value(logits).row(prefix.len()).to_vec();
        log_softmax_in_place(&mut last);
        last
    }
}
