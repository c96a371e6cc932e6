//! Learning-free analog baseline: per-patch orthonormal 2D DCT, lowest
//! frequencies first, coefficients sent directly as symbol components.

use serde::{Deserialize, Serialize};

use super::mast::gate;
use super::patch::{motion_coverage, patchify, unpatchify, Patches};
use super::{proportional_allocation, Reception};
use crate::channel::{power_normalize_with_scale, transmit, ChannelConfig, SymbolVector};
use crate::{ChronoImage, Error, MotionMask, Result};
use num_complex::Complex64;

/// Gate used to rank patches for the symbol budget. It only shapes the
/// allocation; coefficients are not scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DctParams {
    pub patch_size: usize,
    pub w: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl Default for DctParams {
    fn default() -> Self {
        DctParams { patch_size: 16, w: 2.0, b: 0.0, epsilon: 0.1 }
    }
}

/// `C[u][x] = a(u) cos(π(2x+1)u / 2P)`, orthonormal.
fn basis(p: usize) -> Vec<f64> {
    let mut c = vec![0.0; p * p];
    for u in 0..p {
        let a = if u == 0 { (1.0 / p as f64).sqrt() } else { (2.0 / p as f64).sqrt() };
        for x in 0..p {
            c[u * p + x] = a * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2 * p) as f64).cos();
        }
    }
    c
}

/// Zig-zag over `(u, v)` with the three channels interleaved at each
/// frequency. Entries are indices into a channel-planar `3·P²` block.
pub(crate) fn zigzag(p: usize) -> Vec<usize> {
    let mut freq: Vec<(usize, usize)> = (0..p).flat_map(|u| (0..p).map(move |v| (u, v))).collect();
    freq.sort_by_key(|&(u, v)| {
        let s = u + v;
        (s, if s % 2 == 0 { p - u } else { u })
    });
    freq.iter().flat_map(|&(u, v)| (0..3).map(move |c| c * p * p + u * p + v)).collect()
}

/// Forward (or inverse when `inverse`) 2D transform of one interleaved
/// patch, returning or consuming channel-planar coefficients.
fn transform(patch: &[f64], c: &[f64], p: usize, inverse: bool) -> Vec<f64> {
    let mut out = vec![0.0; 3 * p * p];
    let mut tmp = vec![0.0; p * p];
    for ch in 0..3 {
        let get = |y: usize, x: usize| if inverse { patch[ch * p * p + y * p + x] } else { patch[(y * p + x) * 3 + ch] };
        // rows: tmp[y][v] = Σ_x src[y][x] M[x][v]
        for y in 0..p {
            for v in 0..p {
                tmp[y * p + v] = (0..p)
                    .map(|x| get(y, x) * if inverse { c[x * p + v] } else { c[v * p + x] })
                    .sum();
            }
        }
        for u in 0..p {
            for v in 0..p {
                let val: f64 = (0..p).map(|y| tmp[y * p + v] * if inverse { c[y * p + u] } else { c[u * p + y] }).sum();
                if inverse {
                    out[(u * p + v) * 3 + ch] = val;
                } else {
                    out[ch * p * p + u * p + v] = val;
                }
            }
        }
    }
    out
}

/// Per-patch complex-symbol budget: proportional to the gate gain, at least
/// one, at most enough to carry every coefficient.
pub fn dct_allocation(mask: &MotionMask, k: usize, params: &DctParams) -> Result<Vec<usize>> {
    let coverage = motion_coverage(mask, params.patch_size)?;
    let gains: Vec<f64> = coverage.iter().map(|&c| gate(c, params.w, params.b, params.epsilon)).collect();
    let cap = (3 * params.patch_size * params.patch_size).div_ceil(2);
    proportional_allocation(k, &gains, cap)
}

/// Encode, send through `cfg`, undo the normalization and invert the DCT.
/// Missing coefficients are zero; the output is clipped to `[0, 1]`.
pub fn dct_analog_transmit(
    img: &ChronoImage,
    mask: &MotionMask,
    k: usize,
    cfg: &ChannelConfig,
    params: &DctParams,
) -> Result<Reception> {
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    mask.check_frame(img)?;
    let p = params.patch_size;
    let patches = patchify(img, p)?;
    let alloc = dct_allocation(mask, k, params)?;
    let c = basis(p);
    let order = zigzag(p);
    let mut symbols = Vec::with_capacity(alloc.iter().sum());
    for (x, &kj) in patches.data.iter().zip(&alloc) {
        let coef = transform(x, &c, p, false);
        let mut kept = order.iter().take(2 * kj).map(|&i| coef[i]);
        for _ in 0..kj {
            let re = kept.next().unwrap_or(0.0);
            let im = kept.next().unwrap_or(0.0);
            symbols.push(Complex64::new(re, im));
        }
    }
    let (normalized, scale) = power_normalize_with_scale(&SymbolVector::new(symbols)?)?;
    let received = transmit(&normalized, cfg);

    let mut offset = 0;
    let mut data = Vec::with_capacity(alloc.len());
    for &kj in &alloc {
        let mut coef = vec![0.0; 3 * p * p];
        let comps = received.as_slice()[offset..offset + kj].iter().flat_map(|z| [z.re / scale, z.im / scale]);
        for (&i, v) in order.iter().zip(comps) {
            coef[i] = v;
        }
        offset += kj;
        data.push(transform(&coef, &c, p, true).into_iter().map(|v| v.clamp(0.0, 1.0)).collect());
    }
    let image = unpatchify(&Patches { patch_size: p, rows: patches.rows, cols: patches.cols, data })?;
    Ok(Reception { image, transmitted: normalized })
}
