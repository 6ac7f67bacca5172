//! Complex baseband hop model: block Rayleigh fading, AWGN, zero-forcing
//! equalisation, power normalisation and the relay-placement link budget.
//!
//! A hop maps every symbol `y_i` of a block to `h·y_i + n_i`, with one
//! fading draw `h ~ CN(0, 1)` per block and independent `n_i ~ CN(0, σ²)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fading magnitudes below this are treated as a failed transmission.
pub const DEEP_FADE_THRESHOLD: f64 = 1e-12;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBlock {
    pub symbols: Vec<Complex64>,
}

impl SymbolBlock {
    pub fn new(symbols: Vec<Complex64>) -> Self {
        SymbolBlock { symbols }
    }

    /// Pairs consecutive reals as (in-phase, quadrature). Odd lengths are
    /// rejected.
    pub fn from_reals(reals: &[f64]) -> Result<Self> {
        if !reals.len().is_multiple_of(2) || reals.is_empty() {
            return Err(Error::dim("SymbolBlock::from_reals", &[reals.len()], &[2]));
        }
        Ok(SymbolBlock {
            symbols: reals
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        })
    }

    pub fn to_reals(&self) -> Vec<f64> {
        self.symbols.iter().flat_map(|s| [s.re, s.im]).collect()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Mean per-symbol energy `E[|s|²]`.
    pub fn mean_energy(&self) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.symbols.iter().all(|s| s.re.is_finite() && s.im.is_finite())
    }
}

/// One hop's fading coefficient and noise variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
    pub sigma2: f64,
}

impl ChannelRealization {
    pub fn new(h: Complex64, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::Contract(format!("noise variance must be >= 0, got {sigma2}")));
        }
        if !(h.re.is_finite() && h.im.is_finite()) {
            return Err(Error::Contract("fading coefficient must be finite".into()));
        }
        Ok(ChannelRealization { h, sigma2 })
    }

    /// Noiseless unit-gain hop.
    pub fn ideal() -> Self {
        ChannelRealization {
            h: Complex64::new(1.0, 0.0),
            sigma2: 0.0,
        }
    }
}

/// Draws `h ~ CN(0, 1)` (Rayleigh envelope with `E|h|² = 1`).
pub fn sample_realization<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Result<ChannelRealization> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Contract(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    ChannelRealization::new(Complex64::new(re * s, im * s), sigma2)
}

/// Circularly-symmetric complex Gaussian sample with variance `sigma2`.
pub fn complex_noise<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Complex64 {
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// `ŷ_i = h·y_i + n_i`. Noise is drawn even when `sigma2 == 0` so the stream
/// position never depends on the channel parameters.
pub fn apply_channel<R: Rng + ?Sized>(
    block: &SymbolBlock,
    ch: &ChannelRealization,
    rng: &mut R,
) -> SymbolBlock {
    SymbolBlock {
        symbols: block
            .symbols
            .iter()
            .map(|&y| ch.h * y + complex_noise(rng, ch.sigma2))
            .collect(),
    }
}

/// Zero-forcing equalisation with perfect CSI.
pub fn equalize(block: &SymbolBlock, ch: &ChannelRealization) -> Result<SymbolBlock> {
    let mag = ch.h.norm();
    if mag < DEEP_FADE_THRESHOLD {
        return Err(Error::DeepFade { magnitude: mag });
    }
    Ok(SymbolBlock {
        symbols: block.symbols.iter().map(|&s| s / ch.h).collect(),
    })
}

/// Fading, noise and equalisation for one hop.
pub fn transmit<R: Rng + ?Sized>(
    block: &SymbolBlock,
    ch: &ChannelRealization,
    rng: &mut R,
) -> Result<SymbolBlock> {
    equalize(&apply_channel(block, ch, rng), ch)
}

/// Scales the block so that its mean per-symbol energy equals `power`.
pub fn normalize_power(block: &SymbolBlock, power: f64) -> Result<SymbolBlock> {
    if !(power > 0.0) {
        return Err(Error::Contract(format!("power must be > 0, got {power}")));
    }
    let e = block.mean_energy();
    if e == 0.0 {
        return Err(Error::DegenerateBlock);
    }
    let scale = (power / e).sqrt();
    Ok(SymbolBlock {
        symbols: block.symbols.iter().map(|&s| s * scale).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hop {
    SourceToRelay,
    RelayToDestination,
}

/// Transmit powers, relay position and path loss on a unit-length
/// source–destination segment. Powers are stored linear.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub p1: f64,
    pub p2: f64,
    pub d: f64,
    pub gamma: f64,
    pub sigma2: f64,
}

impl LinkBudget {
    pub fn new(p1: f64, p2: f64, d: f64, gamma: f64, sigma2: f64) -> Result<Self> {
        let b = LinkBudget {
            p1,
            p2,
            d,
            gamma,
            sigma2,
        };
        b.validate()?;
        Ok(b)
    }

    /// Powers given in dB, path-loss exponent 2.
    pub fn from_db(p1_db: f64, p2_db: f64, d: f64, sigma2: f64) -> Result<Self> {
        Self::new(db_to_linear(p1_db), db_to_linear(p2_db), d, 2.0, sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d < 1.0) {
            return Err(Error::Config(format!("relay position d={} not in (0,1)", self.d)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("path-loss exponent {} < 0", self.gamma)));
        }
        if !(self.p1 > 0.0 && self.p2 > 0.0) {
            return Err(Error::Config("transmit powers must be > 0".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Config("noise variance must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(self.p1, self.p2, d, self.gamma, self.sigma2)
    }
}

/// Linear SNR of a hop: `P1·d^(−γ)/σ²` or `P2·(1−d)^(−γ)/σ²`.
pub fn snr_for_hop(budget: &LinkBudget, hop: Hop) -> f64 {
    match hop {
        Hop::SourceToRelay => budget.p1 * budget.d.powf(-budget.gamma) / budget.sigma2,
        Hop::RelayToDestination => {
            budget.p2 * (1.0 - budget.d).powf(-budget.gamma) / budget.sigma2
        }
    }
}

/// Noise variance giving linear `snr` at symbol power `power`.
pub fn noise_variance_for(snr: f64, power: f64) -> f64 {
    power / snr
}
