//! Motion-gated patch-linear analog codec.
//!
//! Each `P×P` patch is mapped by a shared linear encoder to its share of the
//! `k` complex symbols, scaled by a gate gain `sigmoid(w·coverage + b) + ε`,
//! and the concatenation is normalized to unit mean power. Power therefore
//! flows toward patches with more motion.
//!
//! The receiver gets the symbol layout, gains and normalization scale as side
//! information, divides them back out, and applies the shared linear decoder
//! plus bias. Noise on low-gain patches is amplified accordingly.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::patch::{check_divisible, motion_coverage, patchify, unpatchify, Patches};
use super::even_allocation;
use crate::channel::{power_normalize_with_scale, SymbolVector};
use crate::imaging::io::{read_blob, write_blob};
use crate::{ChronoImage, Error, MotionMask, Result};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gate(coverage: f64, w: f64, b: f64, epsilon: f64) -> f64 {
    sigmoid(w * coverage + b) + epsilon
}

#[derive(Debug, Clone, PartialEq)]
pub struct MastParams {
    pub height: usize,
    pub width: usize,
    pub patch_size: usize,
    pub k: usize,
    /// Row-major `2·k_max × 3P²`; rows `2m, 2m+1` give symbol `m`'s real and
    /// imaginary parts.
    pub encoder: Vec<f64>,
    /// Row-major `3P² × 2·k_max`.
    pub decoder: Vec<f64>,
    pub decoder_bias: Vec<f64>,
    pub w: f64,
    pub b: f64,
    pub epsilon: f64,
    pub alpha: f64,
}

/// Rows of a random matrix with orthonormal rows, scaled.
fn orthonormal_rows(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rows);
    while basis.len() < rows {
        let mut v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut *rng)).collect();
        for u in &basis {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|a| *a /= n);
            basis.push(v);
        }
    }
    basis.iter_mut().for_each(|r| r.iter_mut().for_each(|a| *a *= scale));
    basis
}

impl MastParams {
    /// Fresh parameters: orthonormal encoder rows and decoder columns scaled by
    /// 0.1, zero decoder bias, `w = 2`, `b = 0`, `ε = 0.1`, `alpha = 0.5`.
    pub fn init(height: usize, width: usize, patch_size: usize, k: usize, seed: u64) -> Result<Self> {
        check_divisible(height, width, patch_size)?;
        let n = (height / patch_size) * (width / patch_size);
        if k < n {
            return Err(Error::InvalidParameter(format!("k = {k} is fewer than one symbol per patch ({n} patches)")));
        }
        let dim = 3 * patch_size * patch_size;
        let rows = 2 * k.div_ceil(n);
        if rows > dim {
            return Err(Error::InvalidParameter(format!("{} reals per patch exceed the patch dimension {dim}", rows)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = orthonormal_rows(rows, dim, 0.1, &mut rng).concat();
        let cols = orthonormal_rows(rows, dim, 0.1, &mut rng);
        let mut decoder = vec![0.0; dim * rows];
        for (c, col) in cols.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                decoder[r * rows + c] = v;
            }
        }
        Ok(MastParams {
            height,
            width,
            patch_size,
            k,
            encoder,
            decoder,
            decoder_bias: vec![0.0; dim],
            w: 2.0,
            b: 0.0,
            epsilon: 0.1,
            alpha: 0.5,
        })
    }

    pub fn num_patches(&self) -> usize {
        (self.height / self.patch_size) * (self.width / self.patch_size)
    }

    pub fn patch_dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }

    /// Real rows in the encoder, twice the largest per-patch symbol count.
    pub fn code_rows(&self) -> usize {
        2 * self.k.div_ceil(self.num_patches())
    }

    pub fn validate(&self) -> Result<()> {
        check_divisible(self.height, self.width, self.patch_size)?;
        if self.k < self.num_patches() {
            return Err(Error::InvalidParameter("k must give every patch at least one symbol".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        let (rows, dim) = (self.code_rows(), self.patch_dim());
        if self.encoder.len() != rows * dim || self.decoder.len() != rows * dim || self.decoder_bias.len() != dim {
            return Err(Error::InvalidParameter("parameter arrays do not match the declared shape".into()));
        }
        Ok(())
    }

    pub fn gains(&self, coverage: &[f64]) -> Vec<f64> {
        coverage.iter().map(|&c| gate(c, self.w, self.b, self.epsilon)).collect()
    }

    /// `u = E[..rows] · x`.
    pub(crate) fn encode_patch(&self, x: &[f64], rows: usize, out: &mut Vec<f64>) {
        let dim = self.patch_dim();
        out.clear();
        out.extend(self.encoder[..rows * dim].chunks_exact(dim).map(|r| dot(r, x)));
    }

    /// `x̂ = D[:, ..y.len()] · y + d`.
    pub(crate) fn decode_patch(&self, y: &[f64], out: &mut Vec<f64>) {
        let rows = self.code_rows();
        out.clear();
        out.extend(
            self.decoder
                .chunks_exact(rows)
                .zip(&self.decoder_bias)
                .map(|(r, &bias)| dot(&r[..y.len()], y) + bias),
        );
    }

    pub fn write(&self, w: impl Write) -> Result<()> {
        let header = ParamsHeader {
            format: "mast-params".into(),
            version: 1,
            height: self.height,
            width: self.width,
            patch_size: self.patch_size,
            k: self.k,
            code_rows: self.code_rows(),
            patch_dim: self.patch_dim(),
            w: self.w,
            b: self.b,
            epsilon: self.epsilon,
            alpha: self.alpha,
        };
        let payload: Vec<f64> = [&self.encoder[..], &self.decoder[..], &self.decoder_bias[..]].concat();
        write_blob(w, &header, &payload)
    }

    pub fn read(r: impl Read) -> Result<Self> {
        let (h, payload): (ParamsHeader, Vec<f64>) = read_blob(r)?;
        if h.format != "mast-params" || h.version != 1 {
            return Err(Error::Format(format!("unsupported parameter file {} v{}", h.format, h.version)));
        }
        let n = h.code_rows * h.patch_dim;
        if payload.len() != 2 * n + h.patch_dim {
            return Err(Error::Format(format!("expected {} values, found {}", 2 * n + h.patch_dim, payload.len())));
        }
        let p = MastParams {
            height: h.height,
            width: h.width,
            patch_size: h.patch_size,
            k: h.k,
            encoder: payload[..n].to_vec(),
            decoder: payload[n..2 * n].to_vec(),
            decoder_bias: payload[2 * n..].to_vec(),
            w: h.w,
            b: h.b,
            epsilon: h.epsilon,
            alpha: h.alpha,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsHeader {
    format: String,
    version: u32,
    height: usize,
    width: usize,
    patch_size: usize,
    k: usize,
    code_rows: usize,
    patch_dim: usize,
    w: f64,
    b: f64,
    epsilon: f64,
    alpha: f64,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// What the receiver needs besides the symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideInfo {
    /// Complex symbols per patch, summing to `k`.
    pub allocation: Vec<usize>,
    pub gains: Vec<f64>,
    /// Power normalization factor applied after gating.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MastTransmission {
    pub symbols: SymbolVector,
    pub side: SideInfo,
}

/// Gated symbols before power normalization, with the side information
/// (scale left at 1).
pub fn mast_encode_raw(img: &ChronoImage, mask: &MotionMask, p: &MastParams) -> Result<(SymbolVector, SideInfo)> {
    p.validate()?;
    if img.height() != p.height || img.width() != p.width {
        return Err(Error::dims(format!("{}x{}", p.height, p.width), format!("{}x{}", img.height(), img.width())));
    }
    mask.check_frame(img)?;
    let patches = patchify(img, p.patch_size)?;
    let coverage = motion_coverage(mask, p.patch_size)?;
    let allocation = even_allocation(p.k, &coverage)?;
    let gains = p.gains(&coverage);
    let mut symbols = Vec::with_capacity(p.k);
    let mut u = Vec::new();
    for ((x, &kj), &g) in patches.data.iter().zip(&allocation).zip(&gains) {
        p.encode_patch(x, 2 * kj, &mut u);
        symbols.extend(u.chunks_exact(2).map(|c| Complex64::new(g * c[0], g * c[1])));
    }
    Ok((SymbolVector::new(symbols)?, SideInfo { allocation, gains, scale: 1.0 }))
}

pub fn mast_encode(img: &ChronoImage, mask: &MotionMask, p: &MastParams) -> Result<MastTransmission> {
    let (raw, mut side) = mast_encode_raw(img, mask, p)?;
    let (symbols, scale) = power_normalize_with_scale(&raw)?;
    side.scale = scale;
    Ok(MastTransmission { symbols, side })
}

pub fn mast_decode(zhat: &SymbolVector, side: &SideInfo, p: &MastParams) -> Result<ChronoImage> {
    p.validate()?;
    if zhat.len() != p.k {
        return Err(Error::dims(format!("{} symbols", p.k), zhat.len()));
    }
    if side.allocation.len() != p.num_patches()
        || side.gains.len() != p.num_patches()
        || side.allocation.iter().sum::<usize>() != p.k
    {
        return Err(Error::InvalidParameter("side information does not match the codec".into()));
    }
    let mut data = Vec::with_capacity(p.num_patches());
    let mut offset = 0;
    let (mut y, mut xhat) = (Vec::new(), Vec::new());
    for (&kj, &g) in side.allocation.iter().zip(&side.gains) {
        let inv = 1.0 / (side.scale * g);
        y.clear();
        for s in &zhat.as_slice()[offset..offset + kj] {
            y.push(s.re * inv);
            y.push(s.im * inv);
        }
        offset += kj;
        p.decode_patch(&y, &mut xhat);
        data.push(xhat.iter().map(|v| v.clamp(0.0, 1.0)).collect());
    }
    let ps = p.patch_size;
    unpatchify(&Patches { patch_size: ps, rows: p.height / ps, cols: p.width / ps, data })
}
