//! Pixel containers and YIQ color math.

mod color;
pub mod io;

pub use color::{hue_rotate, rgb_to_yiq, rotate_chroma, yiq_to_rgb, Scalar, YIQ_FROM_RGB};
pub(crate) use color::{rgb_to_yiq_generic, yiq_to_rgb_generic};

use crate::{Error, Result};

/// An RGB image with interleaved per-pixel triples, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// The stacked output image. Same layout as a [`Frame`].
pub type ChronoImage = Frame;

impl Frame {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, [0.0; 3])
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * height * width);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Frame { height, width, data }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::dims(
                format!("{} values for {height}x{width}x3", 3 * height * width),
                data.len(),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite pixel value {bad}")));
        }
        Ok(Frame { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn check_dims(&self, other: &Frame) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::dims(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ))
        }
    }

    /// Clamp every value into `[0, 1]`.
    pub fn clip(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub fn is_in_gamut(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// An ordered, non-empty sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Vec<Frame>,
}

impl Video {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidParameter("video needs at least one frame".into()))?;
        for f in &frames[1..] {
            first.check_dims(f)?;
        }
        Ok(Video { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Frame {
        &self.frames[t]
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Total number of scalar elements, `T * H * W * 3`.
    pub fn element_count(&self) -> usize {
        self.len() * 3 * self.height() * self.width()
    }
}

/// Binary per-pixel motion map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl MotionMask {
    pub fn empty(height: usize, width: usize) -> Self {
        MotionMask {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        MotionMask {
            height,
            width,
            data: vec![true; height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dims(height * width, data.len()));
        }
        Ok(MotionMask { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, on: bool) {
        self.data[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&m| m)
    }

    pub(crate) fn check_frame(&self, frame: &Frame) -> Result<()> {
        if self.height == frame.height() && self.width == frame.width() {
            Ok(())
        } else {
            Err(Error::dims(
                format!("{}x{}", frame.height(), frame.width()),
                format!("mask {}x{}", self.height, self.width),
            ))
        }
    }

    /// Grow the mask by `radius` pixels in the Chebyshev sense.
    pub fn dilate(&self, radius: usize) -> MotionMask {
        let mut out = MotionMask::empty(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(y, x) {
                    continue;
                }
                let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(self.height - 1));
                let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(self.width - 1));
                for yy in y0..=y1 {
                    for xx in x0..=x1 {
                        out.set(yy, xx, true);
                    }
                }
            }
        }
        out
    }

    pub fn intersects(&self, other: &MotionMask) -> bool {
        self.data.iter().zip(&other.data).any(|(&a, &b)| a && b)
    }

    pub fn union_with(&mut self, other: &MotionMask) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_bad_length() {
        assert!(Frame::from_data(2, 2, vec![0.0; 11]).is_err());
        assert!(Frame::from_data(2, 2, vec![0.0; 12]).is_ok());
    }

    #[test]
    fn frame_rejects_non_finite() {
        let mut data = vec![0.0; 12];
        data[5] = f64::NAN;
        assert!(Frame::from_data(2, 2, data).is_err());
    }

    #[test]
    fn video_requires_uniform_frames() {
        assert!(Video::new(vec![]).is_err());
        assert!(Video::new(vec![Frame::zeros(2, 2), Frame::zeros(2, 3)]).is_err());
        let v = Video::new(vec![Frame::zeros(2, 3); 4]).unwrap();
        assert_eq!(v.element_count(), 4 * 2 * 3 * 3);
    }

    #[test]
    fn dilation_grows_by_radius() {
        let mut m = MotionMask::empty(5, 5);
        m.set(2, 2, true);
        assert_eq!(m.dilate(1).count(), 9);
        assert_eq!(m.dilate(2).count(), 25);
        let mut corner = MotionMask::empty(5, 5);
        corner.set(0, 0, true);
        assert_eq!(corner.dilate(1).count(), 4);
    }
}
