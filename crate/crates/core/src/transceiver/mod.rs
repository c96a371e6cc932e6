//! Transmission schemes: the motion-gated patch-linear analog codec, a
//! learning-free DCT analog baseline, and a Hamming(7,4)/BPSK digital chain.

pub mod dct;
pub mod digital;
pub mod mast;
pub mod patch;
pub mod train;

pub use dct::{dct_analog_transmit, DctParams};
pub use digital::{digital_transmit, digital_transmit_over};
pub use mast::{gate, mast_decode, mast_encode, MastParams, MastTransmission, SideInfo};
pub use patch::{motion_coverage, patchify, unpatchify, Patches};
pub use train::{loss_and_gradient, loss_motion_weighted, train_mast, training_loss, Gradient, TrainConfig, Training};

use crate::channel::SymbolVector;
use crate::{ChronoImage, Error, Result};

/// A reconstructed image and the unit-power symbols that were put on the
/// channel to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub image: ChronoImage,
    pub transmitted: SymbolVector,
}

/// Even split of `k` symbols with the remainder going to the highest-coverage
/// patches (row-major order breaks ties).
pub fn even_allocation(k: usize, coverage: &[f64]) -> Result<Vec<usize>> {
    let n = coverage.len();
    if k < n {
        return Err(Error::InvalidParameter(format!("k = {k} is fewer than one symbol per patch ({n} patches)")));
    }
    let mut alloc = vec![k / n; n];
    for &j in ranked(coverage).iter().take(k % n) {
        alloc[j] += 1;
    }
    Ok(alloc)
}

/// Indices ordered by descending weight, ascending index on ties.
pub(crate) fn ranked(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

/// Split `k` symbols in proportion to `weights`, at least one and at most
/// `cap` per patch. Leftovers are handed out one at a time by weight rank.
pub fn proportional_allocation(k: usize, weights: &[f64], cap: usize) -> Result<Vec<usize>> {
    let n = weights.len();
    if k < n || cap == 0 {
        return Err(Error::InvalidParameter(format!("k = {k} is fewer than one symbol per patch ({n} patches)")));
    }
    let k = k.min(n * cap);
    let total: f64 = weights.iter().sum();
    let mut alloc: Vec<usize> = weights
        .iter()
        .map(|&w| ((k as f64 * w / total).floor() as usize).clamp(1, cap))
        .collect();
    let order = ranked(weights);
    let mut used: usize = alloc.iter().sum();
    while used > k {
        // take back from the lowest-ranked patches that can spare a symbol
        let j = *order.iter().rev().find(|&&j| alloc[j] > 1).expect("k >= n");
        alloc[j] -= 1;
        used -= 1;
    }
    while used < k {
        for &j in &order {
            if used == k {
                break;
            }
            if alloc[j] < cap {
                alloc[j] += 1;
                used += 1;
            }
        }
    }
    Ok(alloc)
}
