//! Power normalization and the `y = h·z + n` wireless channel.
//!
//! Noise is circular complex Gaussian with total variance
//! `σ² = 10^(-snr_db / 10)` against unit symbol power, drawn from a ChaCha8
//! stream seeded by the config. Rayleigh fading uses one gain per vector with
//! perfect channel knowledge, so the receiver output is `y / h`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A sequence of complex channel symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector(Vec<Complex64>);

impl SymbolVector {
    pub fn new(symbols: Vec<Complex64>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidParameter("symbol vector must not be empty".into()));
        }
        if symbols.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite channel symbol".into()));
        }
        Ok(SymbolVector(symbols))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// `(1/k) Σ |z_i|²`.
    pub fn mean_power(&self) -> f64 {
        self.energy() / self.0.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(Complex64::norm_sqr).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            other => Err(Error::InvalidParameter(format!("unknown channel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    /// `f64::INFINITY` means a noiseless link.
    pub snr_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        ChannelConfig { kind: ChannelKind::Awgn, snr_db, seed }
    }

    pub fn rayleigh(snr_db: f64, seed: u64) -> Self {
        ChannelConfig { kind: ChannelKind::Rayleigh, snr_db, seed }
    }

    pub fn noiseless() -> Self {
        Self::awgn(f64::INFINITY, 0)
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }
}

pub fn snr_to_noise_power(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Scale to unit mean symbol power. Also returns the applied scale.
pub fn power_normalize_with_scale(z: &SymbolVector) -> Result<(SymbolVector, f64)> {
    let energy = z.energy();
    if energy <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let scale = (z.len() as f64 / energy).sqrt();
    Ok((SymbolVector(z.0.iter().map(|s| s * scale).collect()), scale))
}

pub fn power_normalize(z: &SymbolVector) -> Result<SymbolVector> {
    power_normalize_with_scale(z).map(|(v, _)| v)
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sd, im * sd)
}

/// `len` independent circular complex Gaussian samples at the noise power of
/// `snr_db`, as the AWGN channel would add them.
pub fn noise_samples(len: usize, snr_db: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma2 = snr_to_noise_power(snr_db);
    (0..len).map(|_| complex_gaussian(&mut rng, sigma2)).collect()
}

/// The equalized channel output together with the fading gain that was drawn
/// (`1` for AWGN).
pub fn transmit_with_gain(z: &SymbolVector, cfg: &ChannelConfig) -> (SymbolVector, Complex64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = match cfg.kind {
        ChannelKind::Awgn => Complex64::new(1.0, 0.0),
        ChannelKind::Rayleigh => complex_gaussian(&mut rng, 1.0),
    };
    let sigma2 = if cfg.is_noiseless() { 0.0 } else { snr_to_noise_power(cfg.snr_db) };
    let out = z
        .0
        .iter()
        .map(|&s| {
            let received = if sigma2 > 0.0 { h * s + complex_gaussian(&mut rng, sigma2) } else { h * s };
            match cfg.kind {
                ChannelKind::Awgn => received,
                ChannelKind::Rayleigh => received / h,
            }
        })
        .collect();
    (SymbolVector(out), h)
}

pub fn transmit(z: &SymbolVector, cfg: &ChannelConfig) -> SymbolVector {
    transmit_with_gain(z, cfg).0
}
