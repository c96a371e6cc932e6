use crate::{ChronoImage, Error, Frame, MotionMask, Result};

/// Non-overlapping `P×P` blocks in row-major block order. Each block vector
/// holds its pixels row by row with the three channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Patches {
    pub patch_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl Patches {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }
}

pub(crate) fn check_divisible(height: usize, width: usize, p: usize) -> Result<()> {
    if p == 0 || !height.is_multiple_of(p) || !width.is_multiple_of(p) {
        return Err(Error::InvalidParameter(format!("patch size {p} does not divide {height}x{width}")));
    }
    Ok(())
}

pub fn patchify(img: &ChronoImage, p: usize) -> Result<Patches> {
    check_divisible(img.height(), img.width(), p)?;
    let (rows, cols) = (img.height() / p, img.width() / p);
    let row_len = 3 * img.width();
    let mut data = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let mut v = Vec::with_capacity(3 * p * p);
            for y in br * p..(br + 1) * p {
                let start = y * row_len + 3 * bc * p;
                v.extend_from_slice(&img.data()[start..start + 3 * p]);
            }
            data.push(v);
        }
    }
    Ok(Patches { patch_size: p, rows, cols, data })
}

pub fn unpatchify(patches: &Patches) -> Result<ChronoImage> {
    let p = patches.patch_size;
    if patches.data.len() != patches.rows * patches.cols || patches.data.iter().any(|v| v.len() != 3 * p * p) {
        return Err(Error::InvalidParameter("inconsistent patch matrix".into()));
    }
    let (h, w) = (patches.rows * p, patches.cols * p);
    let mut data = vec![0.0; 3 * h * w];
    for (idx, v) in patches.data.iter().enumerate() {
        let (br, bc) = (idx / patches.cols, idx % patches.cols);
        for (dy, chunk) in v.chunks_exact(3 * p).enumerate() {
            let start = (br * p + dy) * 3 * w + 3 * bc * p;
            data[start..start + 3 * p].copy_from_slice(chunk);
        }
    }
    Frame::from_data(h, w, data)
}

/// Fraction of set mask pixels in each patch.
pub fn motion_coverage(mask: &MotionMask, p: usize) -> Result<Vec<f64>> {
    check_divisible(mask.height(), mask.width(), p)?;
    let (rows, cols) = (mask.height() / p, mask.width() / p);
    let mut out = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let mut n = 0usize;
            for y in br * p..(br + 1) * p {
                for x in bc * p..(bc + 1) * p {
                    n += usize::from(mask.get(y, x));
                }
            }
            out.push(n as f64 / (p * p) as f64);
        }
    }
    Ok(out)
}

/// Per-element loss weights `1 + alpha·mask`, laid out like [`patchify`].
pub(crate) fn weight_patches(mask: &MotionMask, p: usize, alpha: f64) -> Result<Vec<Vec<f64>>> {
    check_divisible(mask.height(), mask.width(), p)?;
    let (rows, cols) = (mask.height() / p, mask.width() / p);
    let mut out = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let mut v = Vec::with_capacity(3 * p * p);
            for y in br * p..(br + 1) * p {
                for x in bc * p..(bc + 1) * p {
                    let wt = 1.0 + alpha * f64::from(u8::from(mask.get(y, x)));
                    v.extend_from_slice(&[wt; 3]);
                }
            }
            out.push(v);
        }
    }
    Ok(out)
}
