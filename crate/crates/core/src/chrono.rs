//! Chrono-color stacking: collapse a video into one image whose hue encodes
//! time, together with a binary motion mask.
//!
//! Steps: temporal-mean background, absolute-difference foreground, mask by
//! thresholding the temporal max of the channel-mean foreground, then rotate
//! frame `t` (1-based) by `t / T * theta_max` and keep the element-wise max.
//!
//! Before rotation the foreground chroma is offset along the hue-zero axis in
//! proportion to its luminance (`tint`). A pure rotation leaves achromatic
//! residue gray; the offset gives it a reference hue to rotate. `tint = 0`
//! disables it.

use serde::{Deserialize, Serialize};

use crate::imaging::{rgb_to_yiq_generic, rotate_chroma, yiq_to_rgb_generic, Scalar};
use crate::{ChronoImage, Error, Frame, MotionMask, Result, Video};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackParams {
    /// Hue given to the last frame, in degrees.
    pub theta_max: f64,
    /// Motion threshold on the channel-mean foreground.
    pub tau: f64,
    /// Hue-zero chroma added per unit of foreground luminance.
    pub tint: f64,
}

impl Default for StackParams {
    fn default() -> Self {
        StackParams {
            theta_max: 270.0,
            tau: 0.06,
            tint: 0.5,
        }
    }
}

impl StackParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_max > 0.0 && self.theta_max <= 360.0) {
            return Err(Error::InvalidParameter(format!("theta_max {} outside (0, 360]", self.theta_max)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidParameter(format!("tau {} outside [0, 1]", self.tau)));
        }
        if !(self.tint.is_finite() && self.tint >= 0.0) {
            return Err(Error::InvalidParameter(format!("tint {} must be finite and >= 0", self.tint)));
        }
        Ok(())
    }

    /// Hue angle for 1-based frame index `t` of `frames`.
    pub fn angle(&self, t: usize, frames: usize) -> f64 {
        t as f64 / frames as f64 * self.theta_max
    }

    pub fn angles(&self, frames: usize) -> Vec<f64> {
        (1..=frames).map(|t| self.angle(t, frames)).collect()
    }
}

fn mean_kernel<S: Scalar>(frames: &[&[S]]) -> Vec<S> {
    let n = S::constant(frames.len() as f64);
    (0..frames[0].len())
        .map(|i| {
            let mut acc = S::constant(0.0);
            for f in frames {
                acc = acc + f[i];
            }
            acc / n
        })
        .collect()
}

fn abs_diff_kernel<S: Scalar>(frames: &[&[S]], bg: &[S]) -> Vec<Vec<S>> {
    frames
        .iter()
        .map(|f| f.iter().zip(bg).map(|(&v, &b)| (v - b).abs()).collect())
        .collect()
}

fn mask_kernel<S: Scalar>(fg: &[&[S]], tau: f64) -> Vec<bool> {
    let three = S::constant(3.0);
    let tau = S::constant(tau);
    (0..fg[0].len() / 3)
        .map(|p| {
            let mut peak = S::constant(0.0);
            for f in fg {
                let px = &f[3 * p..3 * p + 3];
                peak = peak.max((px[0] + px[1] + px[2]) / three);
            }
            peak.gt(tau)
        })
        .collect()
}

fn project_kernel<S: Scalar>(fg: &[&[S]], angles: &[f64], tint: f64) -> Vec<S> {
    let zero = S::constant(0.0);
    let one = S::constant(1.0);
    let tint = S::constant(tint);
    let mut out = vec![zero; fg[0].len()];
    for (f, &theta) in fg.iter().zip(angles) {
        let (sin, cos) = theta.to_radians().sin_cos();
        let (sin, cos) = (S::constant(sin), S::constant(cos));
        for (px, acc) in f.chunks_exact(3).zip(out.chunks_exact_mut(3)) {
            let mut yiq = rgb_to_yiq_generic([px[0], px[1], px[2]]);
            yiq[1] = yiq[1] + tint * yiq[0];
            let rgb = yiq_to_rgb_generic(rotate_chroma(yiq, cos, sin));
            for (a, v) in acc.iter_mut().zip(rgb) {
                *a = a.max(v.max(zero).min(one));
            }
        }
    }
    out
}

fn encode_kernel<S: Scalar>(frames: &[&[S]], params: &StackParams) -> (Vec<S>, Vec<bool>) {
    let bg = mean_kernel(frames);
    let fg = abs_diff_kernel(frames, &bg);
    let fg: Vec<&[S]> = fg.iter().map(Vec::as_slice).collect();
    let mask = mask_kernel(&fg, params.tau);
    let image = project_kernel(&fg, &params.angles(frames.len()), params.tint);
    (image, mask)
}

fn frame_slices(video: &Video) -> Vec<&[f64]> {
    video.frames().iter().map(Frame::data).collect()
}

pub fn background_mean(video: &Video) -> Frame {
    let data = mean_kernel(&frame_slices(video));
    Frame::from_data(video.height(), video.width(), data).expect("mean keeps dimensions")
}

pub fn foreground(video: &Video, background: &Frame) -> Result<Video> {
    video.frame(0).check_dims(background)?;
    let fg = abs_diff_kernel(&frame_slices(video), background.data());
    let frames = fg
        .into_iter()
        .map(|d| Frame::from_data(video.height(), video.width(), d))
        .collect::<Result<Vec<_>>>()?;
    Video::new(frames)
}

/// Pixels whose channel-mean foreground ever exceeds `tau` (strictly).
pub fn motion_mask(foreground: &Video, tau: f64) -> MotionMask {
    let data = mask_kernel(&frame_slices(foreground), tau);
    MotionMask::from_data(foreground.height(), foreground.width(), data).expect("mask sized from video")
}

/// Tint, rotate by the given per-frame angles and max-project.
pub fn max_project(foreground: &Video, angles: &[f64], tint: f64) -> Result<ChronoImage> {
    if angles.len() != foreground.len() {
        return Err(Error::dims(format!("{} angles", foreground.len()), angles.len()));
    }
    let data = project_kernel(&frame_slices(foreground), angles, tint);
    Frame::from_data(foreground.height(), foreground.width(), data)
}

pub fn chrono_encode(video: &Video, params: &StackParams) -> Result<(ChronoImage, MotionMask)> {
    params.validate()?;
    let (image, mask) = encode_kernel(&frame_slices(video), params);
    let (h, w) = (video.height(), video.width());
    Ok((Frame::from_data(h, w, image)?, MotionMask::from_data(h, w, mask)?))
}

/// Closed-form arithmetic operation count of [`chrono_encode`].
///
/// Per pixel and frame: 3 mean additions, 6 for subtract-and-abs, 4 for the
/// channel mean and running max of the mask, 44 for the tinted hue rotation
/// (two 3×3 products at 15 each, tint 2, rotation 6, clip 6) and 3 for the
/// max projection. Per pixel: 3 mean divisions and 1 threshold comparison.
pub fn flop_estimate(frames: usize, height: usize, width: usize) -> u64 {
    let pixels = (height * width) as u64;
    60 * frames as u64 * pixels + 4 * pixels
}

/// Run the stacking kernels on an op-counting scalar and report the number of
/// arithmetic operations actually executed.
pub fn count_encode_ops(video: &Video, params: &StackParams) -> Result<u64> {
    params.validate()?;
    let counted: Vec<Vec<Counted>> = video
        .frames()
        .iter()
        .map(|f| f.data().iter().map(|&v| Counted(v)).collect())
        .collect();
    let slices: Vec<&[Counted]> = counted.iter().map(Vec::as_slice).collect();
    OPS.with(|c| c.set(0));
    let _ = encode_kernel(&slices, params);
    Ok(OPS.with(|c| c.get()))
}

thread_local! {
    static OPS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

#[derive(Debug, Clone, Copy)]
struct Counted(f64);

fn tick() {
    OPS.with(|c| c.set(c.get() + 1));
}

macro_rules! counted_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl std::ops::$tr for Counted {
            type Output = Counted;
            fn $m(self, rhs: Counted) -> Counted {
                tick();
                Counted(self.0 $op rhs.0)
            }
        }
    };
}
counted_op!(Add, add, +);
counted_op!(Sub, sub, -);
counted_op!(Mul, mul, *);
counted_op!(Div, div, /);

impl Scalar for Counted {
    fn constant(v: f64) -> Self {
        Counted(v)
    }
    fn value(self) -> f64 {
        self.0
    }
    fn abs(self) -> Self {
        tick();
        Counted(self.0.abs())
    }
    fn max(self, other: Self) -> Self {
        tick();
        Counted(self.0.max(other.0))
    }
    fn min(self, other: Self) -> Self {
        tick();
        Counted(self.0.min(other.0))
    }
    fn gt(self, other: Self) -> bool {
        tick();
        self.0 > other.0
    }
}
