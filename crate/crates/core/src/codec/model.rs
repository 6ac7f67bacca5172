//! Toy-scale Transformer semantic encoder `S_α` and decoder `G_η`.
//!
//! Post-norm blocks: every sublayer is `LayerNorm(x + sublayer(x))`. Encoder
//! blocks are self-attention then feed-forward; decoder blocks are causal
//! self-attention, attention over the received semantic rows, then
//! feed-forward, followed by a projection to vocabulary logits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::vocab::{TokenSequence, BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::nn::{dense, Activation, Binding, Graph, Mat, NodeId};
use crate::nn::{ParameterSet, Role, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub d_model: usize,
    pub encoder_blocks: usize,
    pub decoder_blocks: usize,
    pub heads: usize,
    pub ff_width: usize,
    /// Longest sentence (in words) the encoder accepts.
    pub max_len: usize,
    /// Sentences per training batch.
    pub batch: usize,
    /// Add sinusoidal position codes to embeddings.
    pub positional: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            d_model: 32,
            encoder_blocks: 2,
            decoder_blocks: 2,
            heads: 2,
            ff_width: 64,
            max_len: 16,
            batch: 16,
            positional: true,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.encoder_blocks == 0 || self.decoder_blocks == 0 {
            return Err(Error::Config("block counts must be >= 1".into()));
        }
        if self.ff_width == 0 || self.max_len == 0 || self.batch == 0 {
            return Err(Error::Config("ff width, max length and batch must be >= 1".into()));
        }
        Ok(())
    }

    /// Dims stored in model file headers (vocabulary size first).
    pub fn dims(&self, vocab_size: usize) -> Vec<usize> {
        vec![
            vocab_size,
            self.d_model,
            self.encoder_blocks,
            self.decoder_blocks,
            self.heads,
            self.ff_width,
            self.max_len,
            self.positional as usize,
        ]
    }
}

/// Sinusoidal position code for `len` rows of width `d`.
pub fn positional_encoding(len: usize, d: usize) -> Mat {
    let mut m = Mat::zeros(len, d);
    for pos in 0..len {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            m.data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    m
}

/// Embedding lookup plus (optional) sinusoidal position code.
pub fn embed(seq: &TokenSequence, table: &Tensor, positional: bool) -> Result<Tensor> {
    let (v, d) = table.rows_cols();
    seq.validate(v)?;
    let mut out = Vec::with_capacity(seq.len() * d);
    for &i in &seq.indices {
        out.extend_from_slice(table.row(i));
    }
    if positional {
        let pe = positional_encoding(seq.len(), d);
        out.iter_mut().zip(&pe.data).for_each(|(o, p)| *o += p);
    }
    Tensor::new(vec![seq.len(), d], out)
}

#[derive(Clone, Debug, PartialEq)]
struct AttnIdx {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    bo: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct NormIdx {
    gain: usize,
    bias: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct FfIdx {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct EncBlock {
    attn: AttnIdx,
    ln1: NormIdx,
    ff: FfIdx,
    ln2: NormIdx,
}

#[derive(Clone, Debug, PartialEq)]
struct DecBlock {
    self_attn: AttnIdx,
    ln1: NormIdx,
    cross: AttnIdx,
    ln2: NormIdx,
    ff: FfIdx,
    ln3: NormIdx,
}

#[derive(Clone, Debug, PartialEq)]
struct EncLayout {
    embedding: usize,
    blocks: Vec<EncBlock>,
}

#[derive(Clone, Debug, PartialEq)]
struct DecLayout {
    embedding: usize,
    blocks: Vec<DecBlock>,
    out_w: usize,
    out_b: usize,
}

/// Creates parameters when `rng` is given, otherwise resolves them by name
/// and checks their shapes.
struct Builder<'a, R: Rng + ?Sized> {
    ps: &'a mut ParameterSet,
    rng: Option<&'a mut R>,
}

enum Init {
    Uniform(usize),
    Ones,
    Zeros,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn param(&mut self, name: String, shape: &[usize], init: Init) -> Result<usize> {
        match self.rng.as_deref_mut() {
            Some(rng) => {
                let t = match init {
                    Init::Uniform(fan_in) => Tensor::uniform_init(shape, fan_in, rng),
                    Init::Ones => Tensor::new(shape.to_vec(), vec![1.0; shape.iter().product()])?,
                    Init::Zeros => Tensor::zeros(shape),
                };
                self.ps.insert(name, t)
            }
            None => {
                let idx = self.ps.index_of(&name).ok_or_else(|| {
                    Error::Corrupt(format!("missing parameter {name:?}"))
                })?;
                if self.ps.get(idx).shape() != shape {
                    return Err(Error::DimMismatch {
                        expected: shape.to_vec(),
                        found: self.ps.get(idx).shape().to_vec(),
                    });
                }
                Ok(idx)
            }
        }
    }

    fn attn(&mut self, p: &str, d: usize) -> Result<AttnIdx> {
        Ok(AttnIdx {
            wq: self.param(format!("{p}.wq"), &[d, d], Init::Uniform(d))?,
            wk: self.param(format!("{p}.wk"), &[d, d], Init::Uniform(d))?,
            wv: self.param(format!("{p}.wv"), &[d, d], Init::Uniform(d))?,
            wo: self.param(format!("{p}.wo"), &[d, d], Init::Uniform(d))?,
            bo: self.param(format!("{p}.bo"), &[d], Init::Zeros)?,
        })
    }

    fn norm(&mut self, p: &str, d: usize) -> Result<NormIdx> {
        Ok(NormIdx {
            gain: self.param(format!("{p}.gain"), &[d], Init::Ones)?,
            bias: self.param(format!("{p}.bias"), &[d], Init::Zeros)?,
        })
    }

    fn ff(&mut self, p: &str, d: usize, f: usize) -> Result<FfIdx> {
        Ok(FfIdx {
            w1: self.param(format!("{p}.w1"), &[d, f], Init::Uniform(d))?,
            b1: self.param(format!("{p}.b1"), &[f], Init::Zeros)?,
            w2: self.param(format!("{p}.w2"), &[f, d], Init::Uniform(f))?,
            b2: self.param(format!("{p}.b2"), &[d], Init::Zeros)?,
        })
    }

    fn encoder(&mut self, c: &CodecConfig, vocab: usize) -> Result<EncLayout> {
        let d = c.d_model;
        let embedding = self.param("embedding".into(), &[vocab, d], Init::Uniform(1))?;
        let blocks = (0..c.encoder_blocks)
            .map(|b| {
                Ok(EncBlock {
                    attn: self.attn(&format!("enc{b}.attn"), d)?,
                    ln1: self.norm(&format!("enc{b}.ln1"), d)?,
                    ff: self.ff(&format!("enc{b}.ff"), d, c.ff_width)?,
                    ln2: self.norm(&format!("enc{b}.ln2"), d)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(EncLayout { embedding, blocks })
    }

    fn decoder(&mut self, c: &CodecConfig, vocab: usize) -> Result<DecLayout> {
        let d = c.d_model;
        let embedding = self.param("embedding".into(), &[vocab, d], Init::Uniform(1))?;
        let blocks = (0..c.decoder_blocks)
            .map(|b| {
                Ok(DecBlock {
                    self_attn: self.attn(&format!("dec{b}.self"), d)?,
                    ln1: self.norm(&format!("dec{b}.ln1"), d)?,
                    cross: self.attn(&format!("dec{b}.cross"), d)?,
                    ln2: self.norm(&format!("dec{b}.ln2"), d)?,
                    ff: self.ff(&format!("dec{b}.ff"), d, c.ff_width)?,
                    ln3: self.norm(&format!("dec{b}.ln3"), d)?,
                })
            })
            .collect::<Result<_>>()?;
        let out_w = self.param("out.w".into(), &[d, vocab], Init::Uniform(d))?;
        let out_b = self.param("out.b".into(), &[vocab], Init::Zeros)?;
        Ok(DecLayout {
            embedding,
            blocks,
            out_w,
            out_b,
        })
    }
}

/// Result of greedy decoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    /// Words only; the terminating `EOS` is not included.
    pub sequence: TokenSequence,
    /// Stopped at the length limit without producing `EOS`.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticCodec {
    pub config: CodecConfig,
    pub vocab_size: usize,
    pub encoder: ParameterSet,
    pub decoder: ParameterSet,
    enc: EncLayout,
    dec: DecLayout,
}

impl SemanticCodec {
    pub fn new<R: Rng + ?Sized>(config: CodecConfig, vocab_size: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if vocab_size < 5 {
            return Err(Error::Config(format!("vocabulary size {vocab_size} < 5")));
        }
        let mut encoder = ParameterSet::new(Role::SemanticEncoder);
        let enc = Builder {
            ps: &mut encoder,
            rng: Some(&mut *rng),
        }
        .encoder(&config, vocab_size)?;
        let mut decoder = ParameterSet::new(Role::SemanticDecoder);
        let dec = Builder {
            ps: &mut decoder,
            rng: Some(&mut *rng),
        }
        .decoder(&config, vocab_size)?;
        Ok(SemanticCodec {
            config,
            vocab_size,
            encoder,
            decoder,
            enc,
            dec,
        })
    }

    pub fn from_parts(
        config: CodecConfig,
        vocab_size: usize,
        mut encoder: ParameterSet,
        mut decoder: ParameterSet,
    ) -> Result<Self> {
        config.validate()?;
        for (ps, want) in [
            (&encoder, Role::SemanticEncoder),
            (&decoder, Role::SemanticDecoder),
        ] {
            if ps.role() != want {
                return Err(Error::RoleMismatch {
                    expected: want.name().into(),
                    found: ps.role().name().into(),
                });
            }
        }
        let enc = Builder::<rand_chacha::ChaCha8Rng> {
            ps: &mut encoder,
            rng: None,
        }
        .encoder(&config, vocab_size)?;
        let dec = Builder::<rand_chacha::ChaCha8Rng> {
            ps: &mut decoder,
            rng: None,
        }
        .decoder(&config, vocab_size)?;
        Ok(SemanticCodec {
            config,
            vocab_size,
            encoder,
            decoder,
            enc,
            dec,
        })
    }

    fn attention(
        &self,
        g: &mut Graph,
        p: &Binding,
        a: &AttnIdx,
        query: NodeId,
        memory: NodeId,
        causal: bool,
    ) -> Result<NodeId> {
        let q = g.matmul(query, p[a.wq])?;
        let k = g.matmul(memory, p[a.wk])?;
        let v = g.matmul(memory, p[a.wv])?;
        let heads = self.config.heads;
        let dh = self.config.d_model / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (qh, kh, vh) = if heads == 1 {
                (q, k, v)
            } else {
                (
                    g.slice_cols(q, h * dh, (h + 1) * dh)?,
                    g.slice_cols(k, h * dh, (h + 1) * dh)?,
                    g.slice_cols(v, h * dh, (h + 1) * dh)?,
                )
            };
            let s = g.matmul_bt(qh, kh)?;
            let s = g.scale(s, scale);
            let w = g.softmax(s, causal);
            outs.push(g.matmul(w, vh)?);
        }
        let cat = if heads == 1 { outs[0] } else { g.concat_cols(&outs)? };
        dense(g, cat, p[a.wo], p[a.bo], Activation::Identity)
    }

    fn feed_forward(&self, g: &mut Graph, p: &Binding, f: &FfIdx, x: NodeId) -> Result<NodeId> {
        let h = dense(g, x, p[f.w1], p[f.b1], Activation::Relu)?;
        dense(g, h, p[f.w2], p[f.b2], Activation::Identity)
    }

    fn residual_norm(
        &self,
        g: &mut Graph,
        p: &Binding,
        n: &NormIdx,
        x: NodeId,
        sub: NodeId,
    ) -> Result<NodeId> {
        let s = g.add(x, sub)?;
        g.layer_norm(s, p[n.gain], p[n.bias])
    }

    fn embed_on(&self, g: &mut Graph, table: NodeId, tokens: &[usize]) -> Result<NodeId> {
        let e = g.gather(table, tokens)?;
        if !self.config.positional {
            return Ok(e);
        }
        let pe = g.constant(positional_encoding(tokens.len(), self.config.d_model));
        g.add(e, pe)
    }

    /// `S_α` on a tape: word indices → `L×D` semantic rows.
    pub fn encode_on(&self, g: &mut Graph, p: &Binding, tokens: &[usize]) -> Result<NodeId> {
        if tokens.len() > self.config.max_len {
            return Err(Error::Length {
                len: tokens.len(),
                max: self.config.max_len,
            });
        }
        TokenSequence::new(tokens.to_vec()).validate(self.vocab_size)?;
        let e = self.embed_on(g, p[self.enc.embedding], tokens)?;
        self.encode_rows_on(g, p, e)
    }

    /// Encoder blocks applied to already-embedded rows.
    pub fn encode_rows_on(&self, g: &mut Graph, p: &Binding, e: NodeId) -> Result<NodeId> {
        let mut x = e;
        for b in &self.enc.blocks {
            let a = self.attention(g, p, &b.attn, x, x, false)?;
            x = self.residual_norm(g, p, &b.ln1, x, a)?;
            let f = self.feed_forward(g, p, &b.ff, x)?;
            x = self.residual_norm(g, p, &b.ln2, x, f)?;
        }
        Ok(x)
    }

    /// `G_η` with teacher forcing: `target_in` (starting with `BOS`) and the
    /// received semantic rows → `len(target_in)×V` logits.
    pub fn decode_on(
        &self,
        g: &mut Graph,
        p: &Binding,
        memory: NodeId,
        target_in: &[usize],
    ) -> Result<NodeId> {
        if g.shape(memory)[1] != self.config.d_model {
            return Err(Error::dim("sem_decode", &g.shape(memory), &[self.config.d_model]));
        }
        let mut x = self.embed_on(g, p[self.dec.embedding], target_in)?;
        for b in &self.dec.blocks {
            let a = self.attention(g, p, &b.self_attn, x, x, true)?;
            x = self.residual_norm(g, p, &b.ln1, x, a)?;
            let c = self.attention(g, p, &b.cross, x, memory, false)?;
            x = self.residual_norm(g, p, &b.ln2, x, c)?;
            let f = self.feed_forward(g, p, &b.ff, x)?;
            x = self.residual_norm(g, p, &b.ln3, x, f)?;
        }
        dense(g, x, p[self.dec.out_w], p[self.dec.out_b], Activation::Identity)
    }

    pub fn embedding_table(&self) -> &Tensor {
        self.encoder.get(self.enc.embedding)
    }

    /// Semantic vector `x = S_α(s)` for a sentence.
    pub fn encode(&self, seq: &TokenSequence) -> Result<Mat> {
        let mut g = Graph::new();
        let p = g.bind(&self.encoder, false);
        let x = self.encode_on(&mut g, &p, &seq.indices)?;
        Ok(g.value(x).clone())
    }

    /// Teacher-forced logits for `target_in`.
    pub fn decode_logits(&self, memory: &Mat, target_in: &[usize]) -> Result<Mat> {
        let mut g = Graph::new();
        let p = g.bind(&self.decoder, false);
        let m = g.constant(memory.clone());
        let l = self.decode_on(&mut g, &p, m, target_in)?;
        Ok(g.value(l).clone())
    }

    /// Autoregressive greedy decoding from `BOS`. Stops at `EOS` or after
    /// `max_len` words. `PAD` and `BOS` are never emitted and the first word
    /// is never `EOS`; ties go to the lowest index.
    pub fn greedy_decode(&self, memory: &Mat, max_len: usize) -> Result<Decoded> {
        let mut g = Graph::new();
        let p = g.bind(&self.decoder, false);
        let m = g.constant(memory.clone());
        let mark = g.len();
        let mut prefix = vec![BOS];
        let mut words = Vec::new();
        let mut truncated = true;
        while words.len() < max_len {
            g.truncate(mark);
            let logits = self.decode_on(&mut g, &p, m, &prefix)?;
            let last = g.value(logits).row(prefix.len() - 1);
            // Sentences are nonempty, so EOS cannot come first.
            let skip: &[usize] = if words.is_empty() { &[PAD, BOS, EOS] } else { &[PAD, BOS] };
            let next = argmax_excluding(last, skip);
            if next == EOS {
                truncated = false;
                break;
            }
            words.push(next);
            prefix.push(next);
        }
        Ok(Decoded {
            sequence: TokenSequence::new(words),
            truncated,
        })
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax_excluding(row: &[f64], skip: &[usize]) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in row.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        if best == usize::MAX || v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Functional form of [`SemanticCodec::encode`] over pre-embedded rows.
pub fn sem_encode(e: &Tensor, codec: &SemanticCodec) -> Result<Tensor> {
    let (l, d) = e.rows_cols();
    if d != codec.config.d_model {
        return Err(Error::dim("sem_encode", e.shape(), &[codec.config.d_model]));
    }
    if l > codec.config.max_len {
        return Err(Error::Length {
            len: l,
            max: codec.config.max_len,
        });
    }
    let mut g = Graph::new();
    let p = g.bind(&codec.encoder, false);
    let en = g.constant(Mat::new(l, d, e.data().to_vec()));
    let x = codec.encode_rows_on(&mut g, &p, en)?;
    let v = g.value(x);
    Tensor::new(vec![v.rows, v.cols], v.data.clone())
}

/// Teacher-forced decoder logits, `BOS` prepended to `target` internally
/// (the last target word is not fed back).
pub fn sem_decode_train(x_hat: &Mat, target: &TokenSequence, codec: &SemanticCodec) -> Result<Mat> {
    let mut input = vec![BOS];
    input.extend_from_slice(&target.indices);
    input.pop();
    if input.is_empty() {
        input.push(BOS);
    }
    codec.decode_logits(x_hat, &input)
}

pub fn sem_decode_infer(x_hat: &Mat, codec: &SemanticCodec, max_len: usize) -> Result<Decoded> {
    codec.greedy_decode(x_hat, max_len)
}

/// Decoder target for a sentence: its words followed by `EOS`.
pub fn with_eos(seq: &TokenSequence) -> Vec<usize> {
    let mut t = seq.indices.clone();
    if t.last() != Some(&EOS) {
        t.push(EOS);
    }
    t
}
