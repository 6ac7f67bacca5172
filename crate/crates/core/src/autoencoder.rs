//! Auto-encoder `F_β` / auto-decoder `D_θ`: per-token compression of
//! semantic vectors into complex channel symbols and back.
//!
//! Encoder: `D_in → M → 2N`, hidden activation configurable, linear output,
//! then block power normalisation. Decoder mirrors it: `2N → M → D_in`.
//! Each token row yields `N` complex symbols (consecutive real pairs).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, SymbolBlock};
use crate::error::{Error, Result};
use crate::nn::{dense, Activation, Binding, Graph, Mat, NodeId, Optimizer, OptimizerConfig};
use crate::nn::{ParameterSet, Role, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoEncoderConfig {
    /// Semantic vector dimension per token.
    pub d_in: usize,
    /// First compression layer width.
    pub hidden: usize,
    /// Complex symbols per token; the bottleneck holds `2N` reals.
    pub n_symbols: usize,
    pub activation: Activation,
    /// Mean per-symbol transmit energy.
    pub power: f64,
}

impl Default for AutoEncoderConfig {
    fn default() -> Self {
        AutoEncoderConfig {
            d_in: 32,
            hidden: 24,
            n_symbols: 8,
            activation: Activation::Tanh,
            power: 1.0,
        }
    }
}

impl AutoEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.hidden == 0 || self.n_symbols == 0 {
            return Err(Error::Config(format!(
                "autoencoder dims must be positive: {self:?}"
            )));
        }
        if !(self.power > 0.0) {
            return Err(Error::Config("autoencoder power must be > 0".into()));
        }
        Ok(())
    }

    pub fn bottleneck(&self) -> usize {
        2 * self.n_symbols
    }

    /// Dims stored in model file headers.
    pub fn dims(&self) -> Vec<usize> {
        vec![
            self.d_in,
            self.hidden,
            self.n_symbols,
            self.activation.tag() as usize,
        ]
    }
}

// Parameter order inside each set.
const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const B2: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct AutoEncoderModel {
    pub config: AutoEncoderConfig,
    pub encoder: ParameterSet,
    pub decoder: ParameterSet,
}

fn two_layer<R: Rng + ?Sized>(
    role: Role,
    dims: [usize; 3],
    rng: &mut R,
) -> Result<ParameterSet> {
    let [a, b, c] = dims;
    let mut ps = ParameterSet::new(role);
    ps.insert("w1", Tensor::uniform_init(&[a, b], a, rng))?;
    ps.insert("b1", Tensor::uniform_init(&[b], a, rng))?;
    ps.insert("w2", Tensor::uniform_init(&[b, c], b, rng))?;
    ps.insert("b2", Tensor::uniform_init(&[c], b, rng))?;
    Ok(ps)
}

fn check_two_layer(ps: &ParameterSet, dims: [usize; 3]) -> Result<()> {
    let [a, b, c] = dims;
    let want: [&[usize]; 4] = [&[a, b], &[b], &[b, c], &[c]];
    for (i, shape) in want.iter().enumerate() {
        if ps.len() != 4 || ps.get(i).shape() != *shape {
            return Err(Error::DimMismatch {
                expected: shape.to_vec(),
                found: if ps.len() == 4 {
                    ps.get(i).shape().to_vec()
                } else {
                    vec![ps.len()]
                },
            });
        }
    }
    Ok(())
}

impl AutoEncoderModel {
    pub fn new<R: Rng + ?Sized>(config: AutoEncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (d, m, n2) = (config.d_in, config.hidden, config.bottleneck());
        Ok(AutoEncoderModel {
            config,
            encoder: two_layer(Role::AutoEncoder, [d, m, n2], rng)?,
            decoder: two_layer(Role::AutoDecoder, [n2, m, d], rng)?,
        })
    }

    /// Assembles a model from loaded parameter sets, checking roles and the
    /// mirrored layer dims.
    pub fn from_parts(
        config: AutoEncoderConfig,
        encoder: ParameterSet,
        decoder: ParameterSet,
    ) -> Result<Self> {
        config.validate()?;
        for (ps, want) in [(&encoder, Role::AutoEncoder), (&decoder, Role::AutoDecoder)] {
            if ps.role() != want {
                return Err(Error::RoleMismatch {
                    expected: want.name().into(),
                    found: ps.role().name().into(),
                });
            }
        }
        let (d, m, n2) = (config.d_in, config.hidden, config.bottleneck());
        check_two_layer(&encoder, [d, m, n2])?;
        check_two_layer(&decoder, [n2, m, d])?;
        Ok(AutoEncoderModel {
            config,
            encoder,
            decoder,
        })
    }

    /// `F_β` on a tape: `rows×D_in → rows×2N`, power-normalised over the
    /// whole block.
    pub fn encode_on(&self, g: &mut Graph, p: &Binding, x: NodeId) -> Result<NodeId> {
        let [_, cols] = g.shape(x);
        if cols != self.config.d_in {
            return Err(Error::dim("ae_encode", &g.shape(x), &[self.config.d_in]));
        }
        let h = dense(g, x, p[W1], p[B1], self.config.activation)?;
        let y = dense(g, h, p[W2], p[B2], Activation::Identity)?;
        g.power_normalize(y, self.config.power)
    }

    /// `D_θ` on a tape: `rows×2N → rows×D_in`.
    pub fn decode_on(&self, g: &mut Graph, p: &Binding, y: NodeId) -> Result<NodeId> {
        let [_, cols] = g.shape(y);
        if cols != self.config.bottleneck() {
            return Err(Error::dim("ae_decode", &g.shape(y), &[self.config.bottleneck()]));
        }
        let h = dense(g, y, p[W1], p[B1], self.config.activation)?;
        dense(g, h, p[W2], p[B2], Activation::Identity)
    }

    /// Encodes `L×D_in` semantic rows into `L·N` power-normalised symbols.
    pub fn encode(&self, x: &Mat) -> Result<SymbolBlock> {
        let mut g = Graph::new();
        let p = g.bind(&self.encoder, false);
        let xn = g.constant(x.clone());
        let y = self.encode_on(&mut g, &p, xn)?;
        SymbolBlock::from_reals(&g.value(y).data)
    }

    /// Decodes `L·N` symbols back to `L×D_in` semantic rows.
    pub fn decode(&self, block: &SymbolBlock) -> Result<Mat> {
        let n = self.config.n_symbols;
        if block.is_empty() || !block.len().is_multiple_of(n) {
            return Err(Error::dim("ae_decode", &[block.len()], &[n]));
        }
        let rows = block.len() / n;
        let mut g = Graph::new();
        let p = g.bind(&self.decoder, false);
        let y = g.constant(Mat::new(rows, 2 * n, block.to_reals()));
        let x = self.decode_on(&mut g, &p, y)?;
        Ok(g.value(x).clone())
    }

    /// Largest magnitude of any hidden or output activation for `x`, used
    /// as an explosion detector.
    pub fn max_activation(&self, x: &Mat) -> Result<f64> {
        let mut g = Graph::new();
        let pe = g.bind(&self.encoder, false);
        let pd = g.bind(&self.decoder, false);
        let xn = g.constant(x.clone());
        let start = g.len();
        let y = self.encode_on(&mut g, &pe, xn)?;
        let _ = self.decode_on(&mut g, &pd, y)?;
        Ok((start..g.len())
            .flat_map(|id| g.value(id).data.clone())
            .fold(0.0, |m: f64, v| m.max(v.abs())))
    }
}

/// Tensor wrapper of [`AutoEncoderModel::encode`].
pub fn ae_encode(x: &Tensor, model: &AutoEncoderModel) -> Result<SymbolBlock> {
    let (r, c) = x.rows_cols();
    if c != model.config.d_in {
        return Err(Error::dim("ae_encode", x.shape(), &[model.config.d_in]));
    }
    model.encode(&Mat::new(r, c, x.data().to_vec()))
}

/// Tensor wrapper of [`AutoEncoderModel::decode`].
pub fn ae_decode(block: &SymbolBlock, model: &AutoEncoderModel) -> Result<Tensor> {
    let m = model.decode(block)?;
    Tensor::new(vec![m.rows, m.cols], m.data)
}

/// Step count, batch shape and optimizer for auto-encoder training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeSchedule {
    pub steps: usize,
    /// Blocks per step; each block has its own fading draw.
    pub batch: usize,
    /// Vectors per block (the power-normalisation unit).
    pub block_len: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for AeSchedule {
    fn default() -> Self {
        AeSchedule {
            steps: 5000,
            batch: 16,
            block_len: 8,
            optimizer: OptimizerConfig::Adam { lr: 2e-3 },
        }
    }
}

/// Reconstruction loss of one block through a Rayleigh hop on a tape.
/// `noise` supplies the received-and-equalised symbols given the transmitted
/// ones.
pub fn block_loss<R: Rng + ?Sized>(
    model: &AutoEncoderModel,
    g: &mut Graph,
    pe: &Binding,
    pd: &Binding,
    x: &Mat,
    sigma2: f64,
    rng: &mut R,
) -> Result<NodeId> {
    let xn = g.constant(x.clone());
    let y = model.encode_on(g, pe, xn)?;
    let y_hat = through_channel(g, y, sigma2, rng)?;
    let x_hat = model.decode_on(g, pd, y_hat)?;
    g.mse(x_hat, x)
}

/// Sends the tape value of `y` (rows of consecutive real pairs) through a
/// Rayleigh hop with zero-forcing equalisation; the distortion enters the tape
/// as an additive constant so gradients pass straight through.
pub fn through_channel<R: Rng + ?Sized>(
    g: &mut Graph,
    y: NodeId,
    sigma2: f64,
    rng: &mut R,
) -> Result<NodeId> {
    let yv = g.value(y).clone();
    let ch = channel::sample_realization(rng, sigma2)?;
    let tx = SymbolBlock::from_reals(&yv.data)?;
    let rx = channel::transmit(&tx, &ch, rng)?;
    let distortion: Vec<f64> = rx
        .to_reals()
        .iter()
        .zip(&yv.data)
        .map(|(r, t)| r - t)
        .collect();
    let d = g.constant(Mat::new(yv.rows, yv.cols, distortion));
    g.add(y, d)
}

/// Trains a fresh auto-encoder/decoder pair on uniform `[−2, 2]` vectors
/// sent through a Rayleigh hop at `snr_db`, minimising MSE with the
/// configured optimizer. Returns the model and the per-step loss trace.
pub fn train_autoencoder<R: Rng + ?Sized>(
    config: AutoEncoderConfig,
    snr_db: f64,
    schedule: &AeSchedule,
    rng: &mut R,
) -> Result<(AutoEncoderModel, Vec<f64>)> {
    if schedule.steps == 0 || schedule.batch == 0 || schedule.block_len == 0 {
        return Err(Error::Config("training steps, batch and block length must be >= 1".into()));
    }
    let mut model = AutoEncoderModel::new(config, rng)?;
    let sigma2 = channel::noise_variance_for(channel::db_to_linear(snr_db), config.power);
    let mut opt_e = Optimizer::new(schedule.optimizer, &model.encoder);
    let mut opt_d = Optimizer::new(schedule.optimizer, &model.decoder);
    let mut trace = Vec::with_capacity(schedule.steps);
    for step in 0..schedule.steps {
        let mut g = Graph::new();
        let pe = g.bind(&model.encoder, true);
        let pd = g.bind(&model.decoder, true);
        let mut total = None;
        for _ in 0..schedule.batch {
            let x = random_block(schedule.block_len, config.d_in, rng);
            let l = block_loss(&model, &mut g, &pe, &pd, &x, sigma2, rng)?;
            total = Some(match total {
                None => l,
                Some(t) => g.add(t, l)?,
            });
        }
        let loss = g.scale(total.expect("batch >= 1"), 1.0 / schedule.batch as f64);
        let value = g.value(loss).scalar();
        if !value.is_finite() {
            return Err(Error::TrainingFailure { step, loss: value });
        }
        g.backward(loss)?;
        model.encoder.zero_grads();
        model.decoder.zero_grads();
        g.accumulate_into(&pe, &mut model.encoder)?;
        g.accumulate_into(&pd, &mut model.decoder)?;
        opt_e.step(&mut model.encoder)?;
        opt_d.step(&mut model.decoder)?;
        trace.push(value);
    }
    model.encoder.clear_grads();
    model.decoder.clear_grads();
    Ok((model, trace))
}

/// `rows×cols` values uniform in `[−2, 2]`.
pub fn random_block<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-2.0..=2.0)).collect(),
    )
}

/// Mean reconstruction MSE over `blocks` fresh random blocks at `snr_db`
/// (`None` for a noiseless, unit-gain hop).
pub fn evaluate_mse<R: Rng + ?Sized>(
    model: &AutoEncoderModel,
    snr_db: Option<f64>,
    blocks: usize,
    block_len: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..blocks {
        let x = random_block(block_len, model.config.d_in, rng);
        let y = model.encode(&x)?;
        let y_hat = match snr_db {
            None => y,
            Some(db) => {
                let sigma2 =
                    channel::noise_variance_for(channel::db_to_linear(db), model.config.power);
                let ch = channel::sample_realization(rng, sigma2)?;
                channel::transmit(&y, &ch, rng)?
            }
        };
        let x_hat = model.decode(&y_hat)?;
        total += x
            .data
            .iter()
            .zip(&x_hat.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / x.data.len() as f64;
    }
    Ok(total / blocks as f64)
}
