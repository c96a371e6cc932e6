//! Separate source/channel coding baseline: 8-bit samples, Hamming(7,4),
//! BPSK with hard decisions. Correct below one error per block and garbage
//! above, which is where the cliff comes from.

use num_complex::Complex64;

use super::Reception;
use crate::channel::{transmit, ChannelConfig, SymbolVector};
use crate::{ChronoImage, Frame, Result};

/// Codeword layout `p1 p2 d1 p3 d2 d3 d4`.
pub fn hamming_encode(d: [u8; 4]) -> [u8; 7] {
    let p1 = d[0] ^ d[1] ^ d[3];
    let p2 = d[0] ^ d[2] ^ d[3];
    let p3 = d[1] ^ d[2] ^ d[3];
    [p1, p2, d[0], p3, d[1], d[2], d[3]]
}

/// Syndrome decoding, fixing at most one flipped bit.
pub fn hamming_decode(mut c: [u8; 7]) -> [u8; 4] {
    let s1 = c[0] ^ c[2] ^ c[4] ^ c[6];
    let s2 = c[1] ^ c[2] ^ c[5] ^ c[6];
    let s3 = c[3] ^ c[4] ^ c[5] ^ c[6];
    let pos = (s1 | (s2 << 1) | (s3 << 2)) as usize;
    if pos != 0 {
        c[pos - 1] ^= 1;
    }
    [c[2], c[4], c[5], c[6]]
}

fn to_bits(img: &Frame) -> Vec<u8> {
    img.data()
        .iter()
        .flat_map(|&v| {
            let q = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            (0..8).rev().map(move |i| (q >> i) & 1)
        })
        .collect()
}

/// BPSK sequence for the image, `0 → +1`, `1 → −1`.
pub fn digital_encode(img: &ChronoImage) -> Result<SymbolVector> {
    let bits = to_bits(img);
    let symbols = bits
        .chunks(4)
        .flat_map(|d| {
            let mut block = [0u8; 4];
            block[..d.len()].copy_from_slice(d);
            hamming_encode(block)
        })
        .map(|b| Complex64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    SymbolVector::new(symbols)
}

pub fn digital_decode(received: &SymbolVector, height: usize, width: usize) -> Result<ChronoImage> {
    let samples = 3 * height * width;
    let hard: Vec<u8> = received.as_slice().iter().map(|z| u8::from(z.re < 0.0)).collect();
    let bits: Vec<u8> = hard
        .chunks_exact(7)
        .flat_map(|c| hamming_decode(c.try_into().expect("chunk of 7")))
        .collect();
    if bits.len() < 8 * samples {
        return Err(crate::Error::dims(format!("{} bits", 8 * samples), bits.len()));
    }
    let data = bits[..8 * samples]
        .chunks_exact(8)
        .map(|b| b.iter().fold(0u32, |acc, &x| (acc << 1) | x as u32) as f64 / 255.0)
        .collect();
    Frame::from_data(height, width, data)
}

pub fn digital_transmit_over(img: &ChronoImage, cfg: &ChannelConfig) -> Result<Reception> {
    let transmitted = digital_encode(img)?;
    let received = transmit(&transmitted, cfg);
    let image = digital_decode(&received, img.height(), img.width())?;
    Ok(Reception { image, transmitted })
}

/// Over AWGN. Every sample is sent; the symbol count is not a free parameter.
pub fn digital_transmit(img: &ChronoImage, snr_db: f64, seed: u64) -> Result<Reception> {
    digital_transmit_over(img, &ChannelConfig::awgn(snr_db, seed))
}
