//! Minimal line-chart rasterizer for sweep curves.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PANEL_W: u32 = 480;
const PANEL_H: u32 = 320;
const LEFT: u32 = 56;
const RIGHT: u32 = 16;
const TOP: u32 = 28;
const BOTTOM: u32 = 40;
const SCALE: u32 = 2;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([30, 30, 30]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const PALETTE: [Rgb<u8>; 8] = [
    Rgb([31, 119, 180]),
    Rgb([214, 39, 40]),
    Rgb([44, 160, 44]),
    Rgb([255, 127, 14]),
    Rgb([148, 103, 189]),
    Rgb([140, 86, 75]),
    Rgb([227, 119, 194]),
    Rgb([23, 190, 207]),
];

/// 3×5 glyphs, rows top to bottom. Lowercase letters draw as uppercase.
fn glyph(c: char) -> &'static str {
    match c.to_ascii_uppercase() {
        '0' => "####.##.##.####",
        '1' => ".#.##..#..#.###",
        '2' => "###..#####..###",
        '3' => "###..#.##..####",
        '4' => "#.##.####..#..#",
        '5' => "####..###..####",
        '6' => "####..####.####",
        '7' => "###..#.#..#..#.",
        '8' => "####.#####.####",
        '9' => "####.####..####",
        'A' => ".#.#.#####.##.#",
        'B' => "##.#.###.#.###.",
        'C' => ".###..#..#...##",
        'D' => "##.#.##.##.###.",
        'E' => "####..##.#..###",
        'F' => "####..##.#..#..",
        'G' => ".###..#.##.#.##",
        'H' => "#.##.#####.##.#",
        'I' => "###.#..#..#.###",
        'J' => "..#..#..##.#.#.",
        'K' => "#.##.###.#.##.#",
        'L' => "#..#..#..#..###",
        'M' => "#.########.##.#",
        'N' => "##.#.##.##.##.#",
        'O' => ".#.#.##.##.#.#.",
        'P' => "##.#.###.#..#..",
        'Q' => ".#.#.##.###..##",
        'R' => "##.#.###.#.##.#",
        'S' => ".###...#...###.",
        'T' => "###.#..#..#..#.",
        'U' => "#.##.##.##.####",
        'V' => "#.##.##.##.#.#.",
        'W' => "#.##.########.#",
        'X' => "#.##.#.#.#.##.#",
        'Y' => "#.##.#.#..#..#.",
        'Z' => "###..#.#.#..###",
        '-' => "......###......",
        '.' => ".............#.",
        '+' => "....#.###.#....",
        '(' => ".#.#..#..#...#.",
        ')' => ".#...#..#..#.#.",
        '%' => "#.#..#.#.#..#.#",
        '/' => "..#..#.#.#..#..",
        ':' => "....#.....#....",
        _ => "...............",
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn fill_rect(img: &mut RgbImage, x: i64, y: i64, w: i64, h: i64, c: Rgb<u8>) {
    for yy in y..y + h {
        for xx in x..x + w {
            put(img, xx, yy, c);
        }
    }
}

fn text_width(s: &str) -> i64 {
    (s.chars().count() as i64 * 4 - 1).max(0) * SCALE as i64
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, s: &str, c: Rgb<u8>) {
    let k = SCALE as i64;
    for (i, ch) in s.chars().enumerate() {
        let g = glyph(ch).as_bytes();
        for (j, &b) in g.iter().enumerate().take(15) {
            if b == b'#' {
                let (gx, gy) = ((j % 3) as i64, (j / 3) as i64);
                fill_rect(img, x + (i as i64 * 4 + gx) * k, y + gy * k, k, k, c);
            }
        }
    }
}

fn draw_line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>, thick: i64) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        fill_rect(img, x - thick / 2, y - thick / 2, thick, thick, c);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Round step for about `n` intervals over `span`.
fn nice_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    }
}

fn label(v: f64, step: f64) -> String {
    let digits = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.digits$}");
    if s.starts_with("-0") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    Some(if hi - lo < 1e-9 { (lo - 1.0, hi + 1.0) } else { (lo, hi) })
}

fn draw_panel(img: &mut RgbImage, ox: i64, chart: &Chart) {
    let (pw, ph) = (PANEL_W as i64, PANEL_H as i64);
    let (x0, x1) = (ox + LEFT as i64, ox + pw - RIGHT as i64);
    let (y0, y1) = (TOP as i64, ph - BOTTOM as i64);
    draw_text(img, ox + (pw - text_width(&chart.title)) / 2, 6, &chart.title, INK);

    let pts = || chart.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let Some((xlo, xhi)) = range(pts().map(|p| p.0)) else {
        draw_text(img, x0 + 8, (y0 + y1) / 2, "no data", INK);
        return;
    };
    let (ylo_raw, yhi_raw) = range(pts().map(|p| p.1)).expect("x range implies y range");
    let ystep = nice_step(yhi_raw - ylo_raw, 5.0);
    let (ylo, yhi) = ((ylo_raw / ystep).floor() * ystep, (yhi_raw / ystep).ceil() * ystep);
    let map_x = |x: f64| x0 + ((x - xlo) / (xhi - xlo) * (x1 - x0) as f64).round() as i64;
    let map_y = |y: f64| y1 - ((y - ylo) / (yhi - ylo) * (y1 - y0) as f64).round() as i64;

    let mut v = ylo;
    while v <= yhi + ystep * 1e-6 {
        let y = map_y(v);
        draw_line(img, (x0, y), (x1, y), GRID, 1);
        let s = label(v, ystep);
        draw_text(img, x0 - 6 - text_width(&s), y - 5, &s, INK);
        v += ystep;
    }
    let mut xs: Vec<f64> = pts().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let xstep = nice_step(xhi - xlo, 5.0);
    for &x in &xs {
        let px = map_x(x);
        draw_line(img, (px, y1), (px, y1 + 4), INK, 1);
        let s = label(x, xstep.min(1.0));
        draw_text(img, px - text_width(&s) / 2, y1 + 8, &s, INK);
    }
    draw_line(img, (x0, y0), (x0, y1), INK, 1);
    draw_line(img, (x0, y1), (x1, y1), INK, 1);
    draw_text(img, (x0 + x1 - text_width(&chart.x_label)) / 2, ph - 14, &chart.x_label, INK);
    draw_text(img, ox + 4, y0 - 14, &chart.y_label, INK);

    for (i, s) in chart.series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let mut p: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        p.sort_by(|a, b| a.0.total_cmp(&b.0));
        let px: Vec<(i64, i64)> = p.iter().map(|&(x, y)| (map_x(x), map_y(y))).collect();
        for w in px.windows(2) {
            draw_line(img, w[0], w[1], c, 2);
        }
        for &(x, y) in &px {
            fill_rect(img, x - 3, y - 3, 7, 7, c);
        }
        let ly = y0 + 6 + 14 * i as i64;
        fill_rect(img, x0 + 8, ly, 10, 10, c);
        draw_text(img, x0 + 24, ly, &s.name, INK);
    }
}

/// Charts side by side, one panel each.
pub fn render(charts: &[Chart]) -> RgbImage {
    let n = charts.len().max(1) as u32;
    let mut img = RgbImage::from_pixel(PANEL_W * n, PANEL_H, WHITE);
    for (i, c) in charts.iter().enumerate() {
        draw_panel(&mut img, (i as u32 * PANEL_W) as i64, c);
    }
    img
}

pub fn write_png(path: impl AsRef<Path>, charts: &[Chart]) -> Result<()> {
    render(charts).save(path)?;
    Ok(())
}
