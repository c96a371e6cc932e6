use std::ops::{Add, Div, Mul, Sub};
use std::sync::LazyLock;

use super::Frame;

/// NTSC forward matrix, rows give Y, I and Q.
pub const YIQ_FROM_RGB: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.5959, -0.2746, -0.3213],
    [0.2115, -0.5227, 0.3112],
];

static RGB_FROM_YIQ: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&YIQ_FROM_RGB));

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            inv[r][c] = adj[r][c] / det;
        }
    }
    inv
}

/// Arithmetic needed by the pixel kernels.
///
/// Every method except the constant conversions counts as one operation when
/// the kernels are run under the instrumented scalar in [`crate::chrono`].
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn abs(self) -> Self;
    fn max(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
    fn gt(self, other: Self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        f64::max(self, other)
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        f64::min(self, other)
    }
    #[inline]
    fn gt(self, other: Self) -> bool {
        self > other
    }
}

#[inline]
fn mat_vec<S: Scalar>(m: &[[f64; 3]; 3], p: [S; 3]) -> [S; 3] {
    let row = |r: &[f64; 3]| {
        S::constant(r[0]) * p[0] + S::constant(r[1]) * p[1] + S::constant(r[2]) * p[2]
    };
    [row(&m[0]), row(&m[1]), row(&m[2])]
}

#[inline]
pub(crate) fn rgb_to_yiq_generic<S: Scalar>(p: [S; 3]) -> [S; 3] {
    mat_vec(&YIQ_FROM_RGB, p)
}

#[inline]
pub(crate) fn yiq_to_rgb_generic<S: Scalar>(p: [S; 3]) -> [S; 3] {
    mat_vec(&RGB_FROM_YIQ, p)
}

pub fn rgb_to_yiq(p: [f64; 3]) -> [f64; 3] {
    rgb_to_yiq_generic(p)
}

pub fn yiq_to_rgb(p: [f64; 3]) -> [f64; 3] {
    yiq_to_rgb_generic(p)
}

/// Rotate the (I, Q) chroma pair counter-clockwise, leaving Y alone.
#[inline]
pub fn rotate_chroma<S: Scalar>(yiq: [S; 3], cos: S, sin: S) -> [S; 3] {
    [
        yiq[0],
        yiq[1] * cos - yiq[2] * sin,
        yiq[1] * sin + yiq[2] * cos,
    ]
}

/// Rotate every pixel's hue by `theta` degrees about the luminance axis.
///
/// The result is clipped to `[0, 1]` after the final RGB conversion.
pub fn hue_rotate(frame: &Frame, theta: f64) -> Frame {
    let (sin, cos) = theta.to_radians().sin_cos();
    let mut out = frame.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let yiq = rotate_chroma(rgb_to_yiq([px[0], px[1], px[2]]), cos, sin);
        let rgb = yiq_to_rgb(yiq);
        for (dst, v) in px.iter_mut().zip(rgb) {
            *dst = v.clamp(0.0, 1.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rotate_unclipped(p: [f64; 3], theta: f64) -> [f64; 3] {
        let (s, c) = theta.to_radians().sin_cos();
        yiq_to_rgb(rotate_chroma(rgb_to_yiq(p), c, s))
    }

    #[test]
    fn inverse_matrix_residual() {
        let inv = *RGB_FROM_YIQ;
        for r in 0..3 {
            for c in 0..3 {
                let v: f64 = (0..3).map(|k| inv[r][k] * YIQ_FROM_RGB[k][c]).sum();
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "residual at ({r},{c}): {v}");
            }
        }
    }

    #[test]
    fn yiq_reference_points() {
        assert_eq!(rgb_to_yiq([0.0; 3]), [0.0; 3]);
        let g = rgb_to_yiq([0.4; 3]);
        assert_abs_diff_eq!(g[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-12);
        let red = rgb_to_yiq([1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(red[0], 0.299, epsilon = 1e-12);
        assert_abs_diff_eq!(red[1], 0.5959, epsilon = 1e-12);
        assert_abs_diff_eq!(red[2], 0.2115, epsilon = 1e-12);

        let white = yiq_to_rgb([1.0, 0.0, 0.0]);
        for v in white {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
        let back = yiq_to_rgb([0.299, 0.5959, 0.2115]);
        assert_abs_diff_eq!(back[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let f = Frame::from_data(1, 2, vec![0.2, 0.5, 0.9, 0.0, 1.0, 0.3]).unwrap();
        let r = hue_rotate(&f, 0.0);
        for (a, b) in f.data().iter().zip(r.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn gray_is_fixed_point() {
        let f = Frame::filled(3, 3, [0.37; 3]);
        for theta in [13.0, 90.0, 181.0, 270.0, -45.0] {
            let r = hue_rotate(&f, theta);
            for (a, b) in f.data().iter().zip(r.data()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rotate_back_recovers_in_gamut_frame() {
        let f = Frame::from_data(1, 2, vec![0.45, 0.5, 0.55, 0.3, 0.35, 0.3]).unwrap();
        let there = hue_rotate(&f, 37.0);
        // in gamut before clipping, so the inverse rotation is exact
        let unclipped: Vec<f64> = f.pixels().flat_map(|p| rotate_unclipped(p, 37.0)).collect();
        assert!(unclipped.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = hue_rotate(&there, -37.0);
        for (a, b) in f.data().iter().zip(back.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-4);
        }
    }

    proptest! {
        #[test]
        fn yiq_round_trip(r in -2.0f64..2.0, g in -2.0f64..2.0, b in -2.0f64..2.0) {
            let back = yiq_to_rgb(rgb_to_yiq([r, g, b]));
            prop_assert!((back[0] - r).abs() < 1e-6);
            prop_assert!((back[1] - g).abs() < 1e-6);
            prop_assert!((back[2] - b).abs() < 1e-6);
            let fwd = rgb_to_yiq(yiq_to_rgb([r, g, b]));
            prop_assert!((fwd[0] - r).abs() < 1e-6);
        }

        #[test]
        fn rotation_preserves_luminance(r in 0.0f64..1.0, g in 0.0f64..1.0, b in 0.0f64..1.0, theta in -720.0f64..720.0) {
            let (s, c) = theta.to_radians().sin_cos();
            let yiq = rgb_to_yiq([r, g, b]);
            let rotated = rotate_chroma(yiq, c, s);
            prop_assert!((rotated[0] - yiq[0]).abs() < 1e-9);
            let y_after = rgb_to_yiq(yiq_to_rgb(rotated))[0];
            prop_assert!((y_after - yiq[0]).abs() < 1e-9);
        }

        #[test]
        fn rotations_compose(r in 0.0f64..1.0, g in 0.0f64..1.0, b in 0.0f64..1.0, a in -180.0f64..180.0, c in -180.0f64..180.0) {
            let two_steps = rotate_unclipped(rotate_unclipped([r, g, b], a), c);
            let one_step = rotate_unclipped([r, g, b], a + c);
            for k in 0..3 {
                prop_assert!((two_steps[k] - one_step[k]).abs() < 1e-6);
            }
        }
    }
}
