//! Distortion and bandwidth accounting.

use serde::{Deserialize, Serialize};

use crate::{Frame, MotionMask, Result};

/// Reported in place of infinity for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Channel symbols per source element, `k / (T·H·W·3)`.
pub fn bcr(k: usize, frames: usize, height: usize, width: usize) -> f64 {
    k as f64 / source_elements(frames, height, width) as f64
}

fn source_elements(frames: usize, height: usize, width: usize) -> u64 {
    frames as u64 * height as u64 * width as u64 * 3
}

/// The symbol count whose ratio is closest to `target`.
pub fn symbols_for_bcr(target: f64, frames: usize, height: usize, width: usize) -> usize {
    ((target * source_elements(frames, height, width) as f64).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub k: usize,
    pub source_elements: u64,
    pub bcr: f64,
    /// `1 / bcr`.
    pub reduction_vs_raw: f64,
}

impl BandwidthReport {
    pub fn new(k: usize, frames: usize, height: usize, width: usize) -> Self {
        let source_elements = source_elements(frames, height, width);
        let bcr = k as f64 / source_elements as f64;
        BandwidthReport {
            k,
            source_elements,
            bcr,
            reduction_vs_raw: source_elements as f64 / k as f64,
        }
    }
}

pub fn mse(reference: &Frame, reconstruction: &Frame) -> Result<f64> {
    reference.check_dims(reconstruction)?;
    let n = reference.data().len() as f64;
    Ok(reference
        .data()
        .iter()
        .zip(reconstruction.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

pub fn psnr(reference: &Frame, reconstruction: &Frame) -> Result<f64> {
    mse(reference, reconstruction).map(psnr_from_mse)
}

/// Mean squared error inside and outside the mask. A region with no pixels
/// yields `None` for its component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedMse {
    pub inside: Option<f64>,
    pub outside: Option<f64>,
    pub inside_elements: usize,
    pub outside_elements: usize,
}

pub fn masked_mse_split(reference: &Frame, reconstruction: &Frame, mask: &MotionMask) -> Result<MaskedMse> {
    reference.check_dims(reconstruction)?;
    mask.check_frame(reference)?;
    let (mut sum_in, mut sum_out, mut n_in, mut n_out) = (0.0, 0.0, 0usize, 0usize);
    for ((a, b), &m) in reference
        .data()
        .chunks_exact(3)
        .zip(reconstruction.data().chunks_exact(3))
        .zip(mask.data())
    {
        let se: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        if m {
            sum_in += se;
            n_in += 3;
        } else {
            sum_out += se;
            n_out += 3;
        }
    }
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    Ok(MaskedMse {
        inside: mean(sum_in, n_in),
        outside: mean(sum_out, n_out),
        inside_elements: n_in,
        outside_elements: n_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Frame {
        Frame::from_data(h, w, (0..3 * h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn bcr_reference_rows() {
        assert_eq!(bcr(8 * 4 * 4 * 3, 8, 4, 4), 1.0);
        let chrono = bcr(252, 8, 256, 256);
        assert!((chrono - 1.602e-4).abs() < 5e-8, "{chrono}");
        let full = bcr(2045, 8, 256, 256);
        assert!((full - 1.300e-3).abs() < 5e-7, "{full}");
        let r = BandwidthReport::new(252, 8, 256, 256);
        assert_eq!(r.bcr, chrono);
        assert!((r.reduction_vs_raw * r.bcr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_reference_values() {
        let a = Frame::filled(2, 2, [0.5; 3]);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let zero = Frame::zeros(2, 2);
        let one = Frame::filled(2, 2, [1.0; 3]);
        assert_eq!(psnr(&zero, &one).unwrap(), 0.0);
        let b = Frame::filled(2, 2, [0.6; 3]);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&a, &Frame::zeros(2, 3)).is_err());
    }

    #[test]
    fn masked_split_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_frame(&mut rng, 3, 3);
        let s = masked_mse_split(&a, &a, &MotionMask::empty(3, 3)).unwrap();
        assert_eq!(s.inside, None);
        assert_eq!(s.outside, Some(0.0));
        let b = random_frame(&mut rng, 3, 3);
        let s = masked_mse_split(&a, &b, &MotionMask::full(3, 3)).unwrap();
        assert_eq!(s.outside, None);
        assert!((s.inside.unwrap() - mse(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn masked_split_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (random_frame(&mut rng, 4, 5), random_frame(&mut rng, 4, 5));
        let mask = MotionMask::from_data(4, 5, (0..20).map(|i| i % 3 == 0).collect()).unwrap();
        let s = masked_mse_split(&a, &b, &mask).unwrap();
        let (mut si, mut ni, mut so, mut no) = (0.0, 0.0, 0.0, 0.0);
        for p in 0..20 {
            for c in 0..3 {
                let d = a.data()[3 * p + c] - b.data()[3 * p + c];
                if p % 3 == 0 {
                    si += d * d;
                    ni += 1.0;
                } else {
                    so += d * d;
                    no += 1.0;
                }
            }
        }
        assert!((s.inside.unwrap() - si / ni).abs() < 1e-9);
        assert!((s.outside.unwrap() - so / no).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn split_recombines_to_mse(seed in 0u64..500, bits in proptest::collection::vec(any::<bool>(), 12)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (random_frame(&mut rng, 3, 4), random_frame(&mut rng, 3, 4));
            let mask = MotionMask::from_data(3, 4, bits).unwrap();
            let s = masked_mse_split(&a, &b, &mask).unwrap();
            let total = s.inside.unwrap_or(0.0) * s.inside_elements as f64
                + s.outside.unwrap_or(0.0) * s.outside_elements as f64;
            let combined = total / (s.inside_elements + s.outside_elements) as f64;
            prop_assert!((combined - mse(&a, &b).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn bcr_monotonicity(k in 1usize..10_000, t in 1usize..16, h in 1usize..64, w in 1usize..64) {
            prop_assert!(bcr(k + 1, t, h, w) > bcr(k, t, h, w));
            prop_assert!(bcr(k, t + 1, h, w) < bcr(k, t, h, w));
            prop_assert!(bcr(k, t, h + 1, w) < bcr(k, t, h, w));
            prop_assert!(bcr(k, t, h, w + 1) < bcr(k, t, h, w));
        }
    }
}
