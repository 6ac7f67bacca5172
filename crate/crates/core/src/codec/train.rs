use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{through_channel, AutoEncoderModel};
use crate::channel;
use crate::codec::model::{with_eos, CodecConfig, SemanticCodec};
use crate::codec::vocab::{TokenSequence, BOS};
use crate::error::{Error, Result};
use crate::nn::{Binding, Graph, NodeId, Optimizer, OptimizerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemSchedule {
    pub steps: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for SemSchedule {
    fn default() -> Self {
        SemSchedule {
            steps: 3000,
            optimizer: OptimizerConfig::Adam { lr: 2e-3 },
        }
    }
}

/// Summed per-position cross-entropy of one sentence through the full
/// chain `G_η(D_θ(hop(F_β(S_α(s)))))`.
#[allow(clippy::too_many_arguments)]
pub fn sentence_loss<R: Rng + ?Sized>(
    codec: &SemanticCodec,
    ae: &AutoEncoderModel,
    g: &mut Graph,
    p_enc: &Binding,
    p_dec: &Binding,
    p_ae_enc: &Binding,
    p_ae_dec: &Binding,
    seq: &TokenSequence,
    sigma2: Option<f64>,
    rng: &mut R,
) -> Result<NodeId> {
    let x = codec.encode_on(g, p_enc, &seq.indices)?;
    let y = ae.encode_on(g, p_ae_enc, x)?;
    let y_hat = match sigma2 {
        Some(s2) => through_channel(g, y, s2, rng)?,
        None => y,
    };
    let x_hat = ae.decode_on(g, p_ae_dec, y_hat)?;
    let target = with_eos(seq);
    let mut input = vec![BOS];
    input.extend_from_slice(&target[..target.len() - 1]);
    let logits = codec.decode_on(g, p_dec, x_hat, &input)?;
    let ce = g.cross_entropy(logits, &target)?;
    Ok(g.scale(ce, target.len() as f64))
}

/// Fits a fresh semantic encoder/decoder on `corpus` through the frozen
/// auto-encoder pair and a Rayleigh hop at `snr_db` (`None`: noiseless).
///
/// The loss is the batch-averaged, position-summed cross-entropy. Only the
/// semantic parameters are updated; the auto-encoder is checked bit-for-bit
/// before returning.
pub fn train_semantic<R: Rng + ?Sized>(
    corpus: &[TokenSequence],
    vocab_size: usize,
    autoencoder: &AutoEncoderModel,
    snr_db: Option<f64>,
    config: CodecConfig,
    schedule: &SemSchedule,
    rng: &mut R,
) -> Result<(SemanticCodec, Vec<f64>)> {
    if schedule.steps == 0 {
        return Err(Error::Config("training steps must be >= 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Config("empty training corpus".into()));
    }
    if autoencoder.config.d_in != config.d_model {
        return Err(Error::dim(
            "train_semantic",
            &[autoencoder.config.d_in],
            &[config.d_model],
        ));
    }
    for s in corpus {
        s.validate(vocab_size)?;
    }
    let frozen = (
        autoencoder.encoder.fingerprint(),
        autoencoder.decoder.fingerprint(),
    );
    let sigma2 = snr_db.map(|db| {
        channel::noise_variance_for(channel::db_to_linear(db), autoencoder.config.power)
    });

    let mut codec = SemanticCodec::new(config, vocab_size, rng)?;
    let mut opt_enc = Optimizer::new(schedule.optimizer, &codec.encoder);
    let mut opt_dec = Optimizer::new(schedule.optimizer, &codec.decoder);
    let mut trace = Vec::with_capacity(schedule.steps);
    for step in 0..schedule.steps {
        let mut g = Graph::new();
        let p_enc = g.bind(&codec.encoder, true);
        let p_dec = g.bind(&codec.decoder, true);
        let p_ae_enc = g.bind(&autoencoder.encoder, false);
        let p_ae_dec = g.bind(&autoencoder.decoder, false);
        let mut total: Option<NodeId> = None;
        for _ in 0..config.batch {
            let seq = &corpus[rng.random_range(0..corpus.len())];
            let l = sentence_loss(
                &codec, autoencoder, &mut g, &p_enc, &p_dec, &p_ae_enc, &p_ae_dec, seq, sigma2,
                rng,
            )?;
            total = Some(match total {
                None => l,
                Some(t) => g.add(t, l)?,
            });
        }
        let loss = g.scale(total.expect("batch >= 1"), 1.0 / config.batch as f64);
        let value = g.value(loss).scalar();
        if !value.is_finite() {
            return Err(Error::TrainingFailure { step, loss: value });
        }
        g.backward(loss)?;
        codec.encoder.zero_grads();
        codec.decoder.zero_grads();
        g.accumulate_into(&p_enc, &mut codec.encoder)?;
        g.accumulate_into(&p_dec, &mut codec.decoder)?;
        if [&p_ae_enc, &p_ae_dec].iter().any(|b| b.trainable())
            || autoencoder.encoder.has_nonzero_grad()
            || autoencoder.decoder.has_nonzero_grad()
        {
            return Err(Error::Contract("auto-encoder parameters received gradients".into()));
        }
        opt_enc.step(&mut codec.encoder)?;
        opt_dec.step(&mut codec.decoder)?;
        trace.push(value);
    }
    codec.encoder.clear_grads();
    codec.decoder.clear_grads();
    if frozen
        != (
            autoencoder.encoder.fingerprint(),
            autoencoder.decoder.fingerprint(),
        )
    {
        return Err(Error::Contract("auto-encoder parameters changed during training".into()));
    }
    Ok((codec, trace))
}
