//! Deterministic hue decoder answering motion queries from a chrono image.
//!
//! A pixel's hue angle in the YIQ chroma plane, divided by `theta_max`, gives
//! the time fraction at which it was last lit. This is exact for achromatic
//! movers; colored movers shift every hue on their trail by a constant.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::imaging::rgb_to_yiq;
use crate::scene::SceneTruth;
use crate::{ChronoImage, Error, MotionMask, Result};

pub const CHROMA_FLOOR: f64 = 0.02;
/// Trails with fewer decoded points than this are treated as speckle.
pub const MIN_TRAIL_POINTS: usize = 4;
/// Minimum size of a trail relative to the largest one to take part in answers.
pub const RELATIVE_TRAIL_SIZE: f64 = 0.1;
pub const MOVING_AT_END_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compass {
    East,
    Northeast,
    North,
    Northwest,
    West,
    Southwest,
    South,
    Southeast,
}

impl Compass {
    pub const ALL: [Compass; 8] = [
        Compass::East,
        Compass::Northeast,
        Compass::North,
        Compass::Northwest,
        Compass::West,
        Compass::Southwest,
        Compass::South,
        Compass::Southeast,
    ];

    /// Sector of an image-space vector (`dy` pointing down). Boundaries sit at
    /// odd multiples of 22.5°.
    pub fn from_vector(dx: f64, dy: f64) -> Option<Compass> {
        if dx == 0.0 && dy == 0.0 || !dx.is_finite() || !dy.is_finite() {
            return None;
        }
        let angle = (-dy).atan2(dx).to_degrees().rem_euclid(360.0);
        let sector = ((angle / 45.0).round() as usize) % 8;
        Some(Self::ALL[sector])
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    /// Counter-clockwise by `steps` eighths of a turn.
    pub fn rotate(self, steps: i32) -> Compass {
        Self::ALL[(self.index() as i32 + steps).rem_euclid(8) as usize]
    }

    pub fn label(self) -> &'static str {
        match self {
            Compass::East => "east",
            Compass::Northeast => "northeast",
            Compass::North => "north",
            Compass::Northwest => "northwest",
            Compass::West => "west",
            Compass::Southwest => "southwest",
            Compass::South => "south",
            Compass::Southeast => "southeast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub theta_max: f64,
    pub chroma_floor: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { theta_max: 270.0, chroma_floor: CHROMA_FLOOR }
    }
}

/// Time fraction of a pixel, or `None` when its chroma is below the floor.
pub fn hue_to_time_with_floor(pixel: [f64; 3], theta_max: f64, floor: f64) -> Option<(f64, f64)> {
    let [_, i, q] = rgb_to_yiq(pixel);
    let chroma = i.hypot(q);
    if !(chroma >= floor) {
        return None;
    }
    let mut angle = q.atan2(i).to_degrees().rem_euclid(360.0);
    // hues past the midpoint of the unused arc are read as slightly negative
    if theta_max < 360.0 && angle > theta_max + (360.0 - theta_max) / 2.0 {
        angle -= 360.0;
    }
    Some(((angle / theta_max).clamp(0.0, 1.0), chroma))
}

pub fn hue_to_time(pixel: [f64; 3], theta_max: f64) -> Option<f64> {
    hue_to_time_with_floor(pixel, theta_max, CHROMA_FLOOR).map(|(t, _)| t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailPoint {
    pub x: usize,
    pub y: usize,
    pub t: f64,
    /// Chroma magnitude of the pixel.
    pub confidence: f64,
}

/// One 8-connected mask component and its decodable pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trail {
    pub area: usize,
    pub points: Vec<TrailPoint>,
}

impl Trail {
    pub fn centroid(&self) -> Option<[f64; 2]> {
        centroid(self.points.iter())
    }

    fn sorted_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.points.iter().map(|p| p.t).collect();
        t.sort_by(f64::total_cmp);
        t
    }

    /// Nearest-rank percentile of decoded times.
    pub fn percentile(&self, q: f64) -> Option<f64> {
        let t = self.sorted_times();
        if t.is_empty() {
            return None;
        }
        let rank = ((q * t.len() as f64).ceil() as usize).clamp(1, t.len());
        Some(t[rank - 1])
    }
}

fn centroid<'a>(points: impl Iterator<Item = &'a TrailPoint>) -> Option<[f64; 2]> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        sx += p.x as f64;
        sy += p.y as f64;
        n += 1;
    }
    (n > 0).then(|| [sx / n as f64, sy / n as f64])
}

pub fn extract_trails(img: &ChronoImage, mask: &MotionMask, cfg: &ProbeConfig) -> Result<Vec<Trail>> {
    mask.check_frame(img)?;
    let (h, w) = (mask.height(), mask.width());
    let mut seen = vec![false; h * w];
    let mut trails = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if seen[start] || !mask.data()[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut trail = Trail { area: 0, points: Vec::new() };
        while let Some(i) = queue.pop_front() {
            let (y, x) = (i / w, i % w);
            trail.area += 1;
            if let Some((t, confidence)) = hue_to_time_with_floor(img.pixel(y, x), cfg.theta_max, cfg.chroma_floor) {
                trail.points.push(TrailPoint { x, y, t, confidence });
            }
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (ny, nx) = (y as isize + dy, x as isize + dx);
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && mask.data()[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        trails.push(trail);
    }
    Ok(trails)
}

/// Receiver-side motion support: pixels whose channel mean exceeds `tau`.
pub fn receiver_mask(img: &ChronoImage, tau: f64) -> MotionMask {
    let data = img.pixels().map(|p| (p[0] + p[1] + p[2]) / 3.0 > tau).collect();
    MotionMask::from_data(img.height(), img.width(), data).expect("sized from image")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Query {
    #[serde(rename = "direction-8way")]
    Direction,
    #[serde(rename = "which-moved-last")]
    WhichMovedLast,
    #[serde(rename = "moving-at-end")]
    MovingAtEnd,
}

impl Query {
    pub fn name(self) -> &'static str {
        match self {
            Query::Direction => "direction-8way",
            Query::WhichMovedLast => "which-moved-last",
            Query::MovingAtEnd => "moving-at-end",
        }
    }
}

impl std::str::FromStr for Query {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direction-8way" | "direction" => Ok(Query::Direction),
            "which-moved-last" => Ok(Query::WhichMovedLast),
            "moving-at-end" => Ok(Query::MovingAtEnd),
            other => Err(Error::InvalidParameter(format!("unknown query '{other}'"))),
        }
    }
}

pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAnswer {
    pub query: Query,
    /// A compass label, `trail-<n>`, a count, or `unknown`.
    pub label: String,
    pub confidence: f64,
    /// Centroids of the trails the answer refers to.
    pub locations: Vec<[f64; 2]>,
}

impl ProbeAnswer {
    fn unknown(query: Query) -> Self {
        ProbeAnswer { query, label: UNKNOWN.into(), confidence: 0.0, locations: Vec::new() }
    }

    pub fn is_unknown(&self) -> bool {
        self.label == UNKNOWN
    }
}

/// Indices of trails large enough to answer from, in input order.
fn significant(trails: &[Trail]) -> Vec<usize> {
    let largest = trails.iter().map(|t| t.points.len()).max().unwrap_or(0);
    let floor = MIN_TRAIL_POINTS.max((RELATIVE_TRAIL_SIZE * largest as f64).ceil() as usize);
    (0..trails.len()).filter(|&i| trails[i].points.len() >= floor).collect()
}

/// Heading from a chroma-weighted least-squares fit of position against
/// decoded time. Noise in `t` shrinks both slopes by the same factor, so the
/// heading survives it. Confidence is the fraction of position variance the
/// fit explains.
fn direction_of(trail: &Trail) -> Option<(Compass, f64)> {
    let pts = &trail.points;
    let wsum: f64 = pts.iter().map(|p| p.confidence).sum();
    if pts.len() < 2 || wsum <= 0.0 {
        return None;
    }
    let mean = |f: &dyn Fn(&TrailPoint) -> f64| pts.iter().map(|p| p.confidence * f(p)).sum::<f64>() / wsum;
    let (mt, mx, my) = (mean(&|p| p.t), mean(&|p| p.x as f64), mean(&|p| p.y as f64));
    let (mut stt, mut stx, mut sty, mut sxx) = (0.0, 0.0, 0.0, 0.0);
    for p in pts {
        let (dt, dx, dy) = (p.t - mt, p.x as f64 - mx, p.y as f64 - my);
        stt += p.confidence * dt * dt;
        stx += p.confidence * dt * dx;
        sty += p.confidence * dt * dy;
        sxx += p.confidence * (dx * dx + dy * dy);
    }
    if stt <= 0.0 || sxx <= 0.0 {
        return None;
    }
    let explained = ((stx * stx + sty * sty) / (stt * sxx)).clamp(0.0, 1.0);
    Compass::from_vector(stx, sty).map(|c| (c, explained))
}

/// Answer `query` from trails alone, without access to ground truth.
pub fn answer(query: Query, trails: &[Trail]) -> ProbeAnswer {
    let picked = significant(trails);
    if picked.is_empty() {
        return ProbeAnswer::unknown(query);
    }
    match query {
        Query::Direction => {
            let &best = picked.iter().max_by_key(|&&i| (trails[i].points.len(), std::cmp::Reverse(i))).unwrap();
            match direction_of(&trails[best]) {
                Some((c, conf)) => ProbeAnswer {
                    query,
                    label: c.label().into(),
                    confidence: conf,
                    locations: trails[best].centroid().into_iter().collect(),
                },
                None => ProbeAnswer::unknown(query),
            }
        }
        Query::WhichMovedLast => {
            let late = |i: usize| trails[i].percentile(0.95).unwrap_or(0.0);
            let best = picked.iter().copied().fold(picked[0], |b, i| if late(i) > late(b) { i } else { b });
            let runner_up = picked.iter().copied().filter(|&i| i != best).map(late).fold(0.0, f64::max);
            ProbeAnswer {
                query,
                label: format!("trail-{best}"),
                confidence: (late(best) - runner_up).clamp(0.0, 1.0),
                locations: trails[best].centroid().into_iter().collect(),
            }
        }
        Query::MovingAtEnd => {
            let moving: Vec<usize> = picked
                .iter()
                .copied()
                .filter(|&i| trails[i].percentile(1.0).unwrap_or(0.0) > MOVING_AT_END_THRESHOLD)
                .collect();
            ProbeAnswer {
                query,
                label: moving.len().to_string(),
                confidence: 1.0,
                locations: moving.iter().filter_map(|&i| trails[i].centroid()).collect(),
            }
        }
    }
}

fn nearest_object(truth: &SceneTruth, at: [f64; 2], movers_only: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in truth.objects.iter().enumerate() {
        if movers_only && !o.moving {
            continue;
        }
        for p in o.trajectory.iter().flatten() {
            let d = (p[0] - at[0]).hypot(p[1] - at[1]);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Whether an answer agrees with the scene's ground truth. `unknown` never does.
pub fn is_correct(answer: &ProbeAnswer, truth: &SceneTruth) -> bool {
    if answer.is_unknown() {
        return false;
    }
    match answer.query {
        Query::Direction => {
            let movers: Vec<usize> = (0..truth.objects.len()).filter(|&i| truth.objects[i].moving).collect();
            let target = match movers.as_slice() {
                [only] => Some(*only),
                _ => truth.last_mover,
            };
            target
                .and_then(|i| truth.objects[i].heading)
                .is_some_and(|h| h.label() == answer.label)
        }
        Query::WhichMovedLast => match (answer.locations.first(), truth.last_mover) {
            (Some(&at), Some(last)) => nearest_object(truth, at, false) == Some(last),
            _ => false,
        },
        Query::MovingAtEnd => answer.label.parse::<usize>().is_ok_and(|n| n == truth.moving_at_end),
    }
}
