//! Motion-weighted loss and gradient descent for the gated codec.
//!
//! The training forward pass mirrors encode → AWGN → decode without the final
//! clip. With `u_j = E x_j`, gain `g_j`, total energy `S = Σ g_j²‖u_j‖²` and
//! receive scale `β_j = sqrt(S/k) / g_j`, the decoder sees
//! `y_j = u_j + β_j n_j`. The gate and normalization parameters therefore only
//! influence the loss through the noise term.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mast::{dot, sigmoid, MastParams};
use super::patch::{motion_coverage, patchify, weight_patches};
use super::even_allocation;
use crate::channel::noise_samples;
use crate::{ChronoImage, Error, MotionMask, Result};

/// `mean((ref - rec)² · (1 + alpha·mask))`, the mask shared by all channels.
pub fn loss_motion_weighted(reference: &ChronoImage, rec: &ChronoImage, mask: &MotionMask, alpha: f64) -> Result<f64> {
    reference.check_dims(rec)?;
    mask.check_frame(reference)?;
    let mut acc = 0.0;
    for ((a, b), &m) in reference.data().chunks_exact(3).zip(rec.data().chunks_exact(3)).zip(mask.data()) {
        let wt = if m { 1.0 + alpha } else { 1.0 };
        acc += wt * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok(acc / reference.data().len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub snr_lo: f64,
    pub snr_hi: f64,
    pub seed: u64,
    /// Batch gradients longer than this are rescaled to it before the step.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 100, batch_size: 8, step_size: 30.0, snr_lo: 0.0, snr_hi: 10.0, seed: 0, clip_norm: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub params: MastParams,
    /// Loss before the first step, then the mean training loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Gradient of the loss with respect to every parameter, same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
    pub decoder_bias: Vec<f64>,
    pub w: f64,
    pub b: f64,
}

impl Gradient {
    fn zeros(p: &MastParams) -> Self {
        Gradient {
            encoder: vec![0.0; p.encoder.len()],
            decoder: vec![0.0; p.decoder.len()],
            decoder_bias: vec![0.0; p.decoder_bias.len()],
            w: 0.0,
            b: 0.0,
        }
    }

    fn add_scaled(&mut self, other: &Gradient, s: f64) {
        let axpy = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        axpy(&mut self.encoder, &other.encoder);
        axpy(&mut self.decoder, &other.decoder);
        axpy(&mut self.decoder_bias, &other.decoder_bias);
        self.w += s * other.w;
        self.b += s * other.b;
    }

    pub fn norm(&self) -> f64 {
        let sq = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
        (sq(&self.encoder) + sq(&self.decoder) + sq(&self.decoder_bias) + self.w * self.w + self.b * self.b).sqrt()
    }
}

/// An image prepared for repeated forward passes.
pub(crate) struct Sample {
    patches: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    coverage: Vec<f64>,
    allocation: Vec<usize>,
    elements: usize,
}

impl Sample {
    pub(crate) fn new(img: &ChronoImage, mask: &MotionMask, p: &MastParams) -> Result<Self> {
        if img.height() != p.height || img.width() != p.width {
            return Err(Error::dims(format!("{}x{}", p.height, p.width), format!("{}x{}", img.height(), img.width())));
        }
        mask.check_frame(img)?;
        let coverage = motion_coverage(mask, p.patch_size)?;
        Ok(Sample {
            patches: patchify(img, p.patch_size)?.data,
            weights: weight_patches(mask, p.patch_size, p.alpha)?,
            allocation: even_allocation(p.k, &coverage)?,
            coverage,
            elements: img.data().len(),
        })
    }

    fn has_energy(&self) -> bool {
        self.patches.iter().any(|x| x.iter().any(|&v| v != 0.0))
    }
}

/// Loss for one image and one noise realization, optionally with gradient.
/// `noise` is the channel noise added to the unit-power symbols.
pub(crate) fn evaluate(p: &MastParams, s: &Sample, noise: &[Complex64], want_grad: bool) -> Result<(f64, Option<Gradient>)> {
    if noise.len() != p.k {
        return Err(Error::dims(format!("{} noise samples", p.k), noise.len()));
    }
    let (dim, rows) = (p.patch_dim(), p.code_rows());
    let n = s.patches.len();
    let mut u = vec![Vec::new(); n];
    let mut gains = vec![0.0; n];
    let mut energy = 0.0;
    for j in 0..n {
        p.encode_patch(&s.patches[j], 2 * s.allocation[j], &mut u[j]);
        gains[j] = sigmoid(p.w * s.coverage[j] + p.b) + p.epsilon;
        energy += gains[j] * gains[j] * u[j].iter().map(|v| v * v).sum::<f64>();
    }
    if energy <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let root = (energy / p.k as f64).sqrt();

    let mut noise_r = vec![Vec::new(); n];
    let mut offset = 0;
    for j in 0..n {
        noise_r[j] = noise[offset..offset + s.allocation[j]].iter().flat_map(|z| [z.re, z.im]).collect();
        offset += s.allocation[j];
    }

    let scale = 2.0 / s.elements as f64;
    let mut loss = 0.0;
    let mut grad = want_grad.then(|| Gradient::zeros(p));
    let mut gammas = vec![Vec::new(); n];
    let mut rhos = vec![0.0; n];
    let mut betas = vec![0.0; n];
    let mut y = Vec::new();
    let mut e = vec![0.0; dim];
    for j in 0..n {
        let r = u[j].len();
        betas[j] = root / gains[j];
        y.clear();
        y.extend(u[j].iter().zip(&noise_r[j]).map(|(a, z)| a + betas[j] * z));
        for q in 0..dim {
            let xhat = dot(&p.decoder[q * rows..q * rows + r], &y) + p.decoder_bias[q];
            let diff = xhat - s.patches[j][q];
            loss += s.weights[j][q] * diff * diff;
            e[q] = scale * s.weights[j][q] * diff;
        }
        if let Some(g) = grad.as_mut() {
            let mut gamma = vec![0.0; r];
            for q in 0..dim {
                let eq = e[q];
                if eq == 0.0 {
                    continue;
                }
                g.decoder_bias[q] += eq;
                let drow = &mut g.decoder[q * rows..q * rows + r];
                drow.iter_mut().zip(&y).for_each(|(d, yv)| *d += eq * yv);
                let prow = &p.decoder[q * rows..q * rows + r];
                gamma.iter_mut().zip(prow).for_each(|(gm, dv)| *gm += eq * dv);
            }
            rhos[j] = dot(&gamma, &noise_r[j]);
            gammas[j] = gamma;
        }
    }
    loss /= s.elements as f64;

    if let Some(g) = grad.as_mut() {
        let lambda: f64 = (0..n).map(|j| rhos[j] * betas[j]).sum::<f64>() / (2.0 * energy);
        for j in 0..n {
            let g2 = gains[j] * gains[j];
            let x = &s.patches[j];
            for (m, (gm, uv)) in gammas[j].iter().zip(&u[j]).enumerate() {
                let coef = gm + 2.0 * lambda * g2 * uv;
                if coef != 0.0 {
                    let erow = &mut g.encoder[m * dim..(m + 1) * dim];
                    erow.iter_mut().zip(x).for_each(|(ev, xv)| *ev += coef * xv);
                }
            }
            let norm2: f64 = u[j].iter().map(|v| v * v).sum();
            let d_gain = -rhos[j] * betas[j] / gains[j] + 2.0 * lambda * gains[j] * norm2;
            let sig = gains[j] - p.epsilon;
            let d_pre = d_gain * sig * (1.0 - sig);
            g.w += d_pre * s.coverage[j];
            g.b += d_pre;
        }
    }
    Ok((loss, grad))
}

/// Unclipped training loss and its analytic gradient for one noise draw.
pub fn loss_and_gradient(p: &MastParams, img: &ChronoImage, mask: &MotionMask, noise: &[Complex64]) -> Result<(f64, Gradient)> {
    p.validate()?;
    let s = Sample::new(img, mask, p)?;
    let (loss, g) = evaluate(p, &s, noise, true)?;
    Ok((loss, g.expect("gradient requested")))
}

pub fn training_loss(p: &MastParams, img: &ChronoImage, mask: &MotionMask, noise: &[Complex64]) -> Result<f64> {
    p.validate()?;
    let s = Sample::new(img, mask, p)?;
    evaluate(p, &s, noise, false).map(|(l, _)| l)
}

fn draw_noise(rng: &mut ChaCha8Rng, k: usize, cfg: &TrainConfig) -> Vec<Complex64> {
    let snr = if cfg.snr_hi > cfg.snr_lo { rng.random_range(cfg.snr_lo..=cfg.snr_hi) } else { cfg.snr_lo };
    noise_samples(k, snr, rng.random())
}

/// Minibatch gradient descent with a fixed step through a randomized-SNR
/// AWGN channel. All-black images carry no power and are skipped.
pub fn train_mast(dataset: &[(ChronoImage, MotionMask)], cfg: &TrainConfig, p0: MastParams) -> Result<Training> {
    p0.validate()?;
    if cfg.snr_lo > cfg.snr_hi || cfg.batch_size == 0 || !(cfg.step_size > 0.0) || !(cfg.clip_norm > 0.0) {
        return Err(Error::InvalidParameter(format!("bad training config {cfg:?}")));
    }
    let samples: Vec<Sample> = dataset
        .iter()
        .map(|(img, mask)| Sample::new(img, mask, &p0))
        .filter(|s| s.as_ref().map_or(true, Sample::has_energy))
        .collect::<Result<_>>()?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("training needs at least one non-black image".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = p0;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);

    let initial: Vec<Vec<Complex64>> = samples.iter().map(|_| draw_noise(&mut rng, params.k, cfg)).collect();
    let start: f64 = samples
        .par_iter()
        .zip(&initial)
        .map(|(s, n)| evaluate(&params, s, n, false).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    trace.push(start / samples.len() as f64);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let noises: Vec<Vec<Complex64>> = batch.iter().map(|_| draw_noise(&mut rng, params.k, cfg)).collect();
            let results = batch
                .par_iter()
                .zip(&noises)
                .map(|(&i, n)| evaluate(&params, &samples[i], n, true))
                .collect::<Result<Vec<_>>>()?;
            let mut total = Gradient::zeros(&params);
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                total.add_scaled(g.as_ref().unwrap(), 1.0 / batch.len() as f64);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { step, loss: batch_loss });
            }
            epoch_loss += batch_loss;
            let norm = total.norm();
            let lr = if norm > cfg.clip_norm { cfg.step_size * cfg.clip_norm / norm } else { cfg.step_size };
            apply(&mut params, &total, lr);
            step += 1;
        }
        let mean = epoch_loss / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { step, loss: mean });
        }
        trace.push(mean);
    }
    Ok(Training { params, loss_trace: trace })
}

fn apply(p: &mut MastParams, g: &Gradient, lr: f64) {
    let step = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x -= lr * y);
    step(&mut p.encoder, &g.encoder);
    step(&mut p.decoder, &g.decoder);
    step(&mut p.decoder_bias, &g.decoder_bias);
    p.w -= lr * g.w;
    p.b -= lr * g.b;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::noise_samples;
    use crate::Frame;

    fn random_image(seed: u64, h: usize, w: usize) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Frame::from_data(h, w, (0..3 * h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn weighted_loss_edges() {
        let a = random_image(1, 4, 4);
        let b = random_image(2, 4, 4);
        let empty = MotionMask::empty(4, 4);
        let full = MotionMask::full(4, 4);
        assert_eq!(loss_motion_weighted(&a, &a, &full, 0.5).unwrap(), 0.0);
        let mse = crate::metrics::mse(&a, &b).unwrap();
        assert!((loss_motion_weighted(&a, &b, &empty, 0.5).unwrap() - mse).abs() < 1e-12);
        assert!((loss_motion_weighted(&a, &b, &full, 0.0).unwrap() - mse).abs() < 1e-12);
        assert!((loss_motion_weighted(&a, &b, &full, 0.5).unwrap() - 1.5 * mse).abs() < 1e-12);
    }

    #[test]
    fn noiseless_training_loss_matches_decoded_image_loss() {
        // with the decoder output in gamut the clip is inactive
        let mut p = MastParams::init(8, 8, 4, 8, 2).unwrap();
        p.decoder_bias.iter_mut().for_each(|b| *b = 0.5);
        let img = random_image(3, 8, 8);
        let mut mask = MotionMask::empty(8, 8);
        mask.set(1, 1, true);
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        let tx = super::super::mast_encode(&img, &mask, &p).unwrap();
        let rec = super::super::mast_decode(&tx.symbols, &tx.side, &p).unwrap();
        let direct = loss_motion_weighted(&img, &rec, &mask, p.alpha).unwrap();
        assert!((training_loss(&p, &img, &mask, &zero).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut p = MastParams::init(4, 4, 2, 8, 11).unwrap();
        p.w = 1.3;
        p.b = -0.4;
        p.decoder_bias.iter_mut().enumerate().for_each(|(i, b)| *b = 0.01 * i as f64);
        let img = random_image(5, 4, 4);
        let mut mask = MotionMask::empty(4, 4);
        mask.set(0, 0, true);
        mask.set(0, 1, true);
        mask.set(3, 2, true);
        let noise = noise_samples(8, 0.0, 17);
        let (_, g) = loss_and_gradient(&p, &img, &mask, &noise).unwrap();

        let h = 1e-5;
        let fd = |p: &MastParams| training_loss(p, &img, &mask, &noise).unwrap();
        let check = |analytic: f64, plus: MastParams, minus: MastParams, what: &str| {
            let numeric = (fd(&plus) - fd(&minus)) / (2.0 * h);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(err < 1e-3, "{what}: analytic {analytic} numeric {numeric}");
        };
        for i in 0..p.encoder.len() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.encoder[i] += h;
            b.encoder[i] -= h;
            check(g.encoder[i], a, b, &format!("encoder[{i}]"));
        }
        for i in 0..p.decoder.len() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.decoder[i] += h;
            b.decoder[i] -= h;
            check(g.decoder[i], a, b, &format!("decoder[{i}]"));
        }
        for i in 0..p.decoder_bias.len() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.decoder_bias[i] += h;
            b.decoder_bias[i] -= h;
            check(g.decoder_bias[i], a, b, &format!("bias[{i}]"));
        }
        let (mut a, mut b) = (p.clone(), p.clone());
        a.w += h;
        b.w -= h;
        check(g.w, a, b, "w");
        let (mut a, mut b) = (p.clone(), p.clone());
        a.b += h;
        b.b -= h;
        check(g.b, a, b, "b");
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let data: Vec<_> = (0..8)
            .map(|s| {
                let mut m = MotionMask::empty(16, 16);
                m.set(s as usize, 3, true);
                (random_image(s, 16, 16), m)
            })
            .collect();
        let p0 = MastParams::init(16, 16, 8, 16, 1).unwrap();
        let cfg = TrainConfig { epochs: 10, ..Default::default() };
        let a = train_mast(&data, &cfg, p0.clone()).unwrap();
        assert_eq!(a.loss_trace.len(), 11);
        assert!(a.loss_trace.last().unwrap() < &a.loss_trace[0]);
        let b = train_mast(&data, &cfg, p0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let data = vec![(random_image(1, 8, 8), MotionMask::empty(8, 8))];
        let p0 = MastParams::init(8, 8, 4, 8, 1).unwrap();
        let cfg = TrainConfig { epochs: 200, step_size: 1e6, clip_norm: f64::INFINITY, ..Default::default() };
        assert!(matches!(train_mast(&data, &cfg, p0), Err(Error::Diverged { .. })));
    }
}
