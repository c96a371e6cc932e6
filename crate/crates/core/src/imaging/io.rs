//! PNG and raw float file formats.
//!
//! Raw dumps share one container layout: a little-endian `u32` header length,
//! that many bytes of UTF-8 JSON, then the payload as little-endian `f64`s.
//! Video dumps use the header `{"H","W","C","T"}` and planar `T×C×H×W` order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Frame, MotionMask, Video};
use crate::{Error, Result};

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn frame_to_rgb8(frame: &Frame) -> RgbImage {
    let mut img = RgbImage::new(frame.width() as u32, frame.height() as u32);
    for (i, px) in img.pixels_mut().enumerate() {
        let d = &frame.data()[3 * i..3 * i + 3];
        *px = Rgb([to_u8(d[0]), to_u8(d[1]), to_u8(d[2])]);
    }
    img
}

pub fn frame_from_rgb8(img: &RgbImage) -> Frame {
    let data = img
        .pixels()
        .flat_map(|p| p.0.map(|c| f64::from(c) / 255.0))
        .collect();
    Frame::from_data(img.height() as usize, img.width() as usize, data)
        .expect("8-bit image is always finite and sized")
}

/// Quantize to 8 bits and back.
pub fn quantize_8bit(frame: &Frame) -> Frame {
    frame_from_rgb8(&frame_to_rgb8(frame))
}

pub fn write_png(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    frame_to_rgb8(frame).save(path)?;
    Ok(())
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Frame> {
    let img = image::open(path)?.to_rgb8();
    Ok(frame_from_rgb8(&img))
}

pub fn write_mask_png(mask: &MotionMask, path: impl AsRef<Path>) -> Result<()> {
    let mut img = GrayImage::new(mask.width() as u32, mask.height() as u32);
    for (px, &m) in img.pixels_mut().zip(mask.data()) {
        *px = Luma([if m { 255 } else { 0 }]);
    }
    img.save(path)?;
    Ok(())
}

/// Any pixel at or above mid-gray counts as set.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<MotionMask> {
    let img = image::open(path)?.to_luma8();
    let data = img.pixels().map(|p| p.0[0] >= 128).collect();
    MotionMask::from_data(img.height() as usize, img.width() as usize, data)
}

/// Read `*.png` files from a directory in lexicographic name order.
pub fn read_frame_dir(dir: impl AsRef<Path>) -> Result<Video> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let frames = paths.iter().map(read_png).collect::<Result<Vec<_>>>()?;
    Video::new(frames)
}

pub fn write_frame_dir(video: &Video, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (t, f) in video.frames().iter().enumerate() {
        write_png(f, dir.join(format!("frame_{t:04}.png")))?;
    }
    Ok(())
}

pub fn write_blob<H: Serialize>(mut w: impl Write, header: &H, payload: &[f64]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    let mut bytes = Vec::with_capacity(payload.len() * 8);
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_blob<H: DeserializeOwned>(mut r: impl Read) -> Result<(H, Vec<f64>)> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header = serde_json::from_slice(&json)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.len() % 8 != 0 {
        return Err(Error::Format(format!("payload of {} bytes is not a whole number of f64s", rest.len())));
    }
    let payload = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DumpHeader {
    pub H: usize,
    pub W: usize,
    pub C: usize,
    pub T: usize,
}

pub fn write_raw_dump(video: &Video, mut w: impl Write) -> Result<()> {
    let (h, wd) = (video.height(), video.width());
    let header = DumpHeader { H: h, W: wd, C: 3, T: video.len() };
    let mut planar = Vec::with_capacity(video.element_count());
    for f in video.frames() {
        for c in 0..3 {
            planar.extend(f.data().iter().skip(c).step_by(3));
        }
    }
    write_blob(&mut w, &header, &planar)
}

pub fn read_raw_dump(r: impl Read) -> Result<Video> {
    let (header, planar): (DumpHeader, Vec<f64>) = read_blob(r)?;
    if header.C != 3 {
        return Err(Error::Format(format!("expected 3 channels, got {}", header.C)));
    }
    let plane = header.H * header.W;
    if planar.len() != header.T * 3 * plane {
        return Err(Error::Format(format!(
            "header promises {} values, payload has {}",
            header.T * 3 * plane,
            planar.len()
        )));
    }
    let frames = planar
        .chunks_exact(3 * plane)
        .map(|chunk| {
            let mut data = vec![0.0; 3 * plane];
            for c in 0..3 {
                for i in 0..plane {
                    data[3 * i + c] = chunk[c * plane + i];
                }
            }
            Frame::from_data(header.H, header.W, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Video::new(frames)
}
