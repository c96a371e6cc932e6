//! Synthetic moving-object scenes with exact ground truth.
//!
//! Objects are hard-rasterized discs or squares following `p(t) = p0 + v·t`
//! while visible (frames `entry..=exit`, 0-based). Positions are `[x, y]` in
//! pixel units with `y` pointing down.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::probe::Compass;
use crate::{Error, Frame, MotionMask, Result, Video};

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl std::str::FromStr for Difficulty {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::InvalidParameter(format!("unknown difficulty '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Disc,
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub radius: f64,
    pub color: [f64; 3],
    pub p0: [f64; 2],
    pub velocity: [f64; 2],
    pub entry: usize,
    pub exit: usize,
}

impl ObjectSpec {
    pub fn position(&self, t: usize) -> [f64; 2] {
        let t = t as f64;
        [self.p0[0] + self.velocity[0] * t, self.p0[1] + self.velocity[1] * t]
    }

    pub fn visible(&self, t: usize) -> bool {
        (self.entry..=self.exit).contains(&t)
    }

    pub fn is_moving(&self) -> bool {
        self.velocity != [0.0, 0.0]
    }

    fn covers(&self, center: [f64; 2], x: usize, y: usize) -> bool {
        let (dx, dy) = (x as f64 - center[0], y as f64 - center[1]);
        match self.shape {
            Shape::Disc => dx * dx + dy * dy <= self.radius * self.radius,
            Shape::Square => dx.abs() <= self.radius && dy.abs() <= self.radius,
        }
    }

    /// Pixels covered at frame `t`, empty when invisible.
    pub fn support(&self, t: usize, height: usize, width: usize) -> MotionMask {
        let mut m = MotionMask::empty(height, width);
        if !self.visible(t) {
            return m;
        }
        let c = self.position(t);
        let r = self.radius.ceil() as isize;
        let (cx, cy) = (c[0].round() as isize, c[1].round() as isize);
        for y in (cy - r).max(0)..=(cy + r).min(height as isize - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(width as isize - 1) {
                if self.covers(c, x as usize, y as usize) {
                    m.set(y as usize, x as usize, true);
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub background: [f64; 3],
    pub objects: Vec<ObjectSpec>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::InvalidParameter("scene dimensions must be positive".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.entry > o.exit || o.exit >= self.frames {
                return Err(Error::InvalidParameter(format!("object {i}: bad visibility window")));
            }
            for t in o.entry..=o.exit {
                let [x, y] = o.position(t);
                let inside = x - o.radius >= 0.0
                    && y - o.radius >= 0.0
                    && x + o.radius <= (self.width - 1) as f64
                    && y + o.radius <= (self.height - 1) as f64;
                if !inside {
                    return Err(Error::InvalidParameter(format!("object {i} leaves the canvas at frame {t}")));
                }
            }
        }
        Ok(())
    }

    /// Union of an object's supports over all frames.
    pub fn trail_mask(&self, object: usize) -> MotionMask {
        let o = &self.objects[object];
        let mut m = MotionMask::empty(self.height, self.width);
        for t in o.entry..=o.exit {
            m.union_with(&o.support(t, self.height, self.width));
        }
        m
    }

    /// Union of all moving objects' trails.
    pub fn motion_support(&self) -> MotionMask {
        let mut m = MotionMask::empty(self.height, self.width);
        for (i, o) in self.objects.iter().enumerate() {
            if o.is_moving() {
                m.union_with(&self.trail_mask(i));
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTruth {
    /// Position per frame, `None` while invisible.
    pub trajectory: Vec<Option<[f64; 2]>>,
    pub entry: usize,
    pub exit: usize,
    pub moving: bool,
    pub moving_at_end: bool,
    pub heading: Option<Compass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub objects: Vec<ObjectTruth>,
    /// `(a, b)`: moving object `a` was still visible after moving object `b` left.
    pub moved_later: Vec<(usize, usize)>,
    /// The moving object with the strictly latest exit, if unique.
    pub last_mover: Option<usize>,
    pub moving_at_end: usize,
}

impl SceneTruth {
    fn from_spec(spec: &SceneSpec) -> Self {
        let last = spec.frames - 1;
        let objects: Vec<ObjectTruth> = spec
            .objects
            .iter()
            .map(|o| ObjectTruth {
                trajectory: (0..spec.frames).map(|t| o.visible(t).then(|| o.position(t))).collect(),
                entry: o.entry,
                exit: o.exit,
                moving: o.is_moving(),
                moving_at_end: o.is_moving() && o.exit == last,
                heading: o.is_moving().then(|| Compass::from_vector(o.velocity[0], o.velocity[1])).flatten(),
            })
            .collect();
        let movers: Vec<usize> = (0..objects.len()).filter(|&i| objects[i].moving).collect();
        let mut moved_later = Vec::new();
        for &a in &movers {
            for &b in &movers {
                if objects[a].exit > objects[b].exit {
                    moved_later.push((a, b));
                }
            }
        }
        let last_mover = movers
            .iter()
            .copied()
            .find(|&a| movers.iter().all(|&b| a == b || objects[a].exit > objects[b].exit));
        let moving_at_end = objects.iter().filter(|o| o.moving_at_end).count();
        SceneTruth { objects, moved_later, last_mover, moving_at_end }
    }
}

/// Canvas and duration used by [`SceneGenerator::random_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGenerator {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
}

impl Default for SceneGenerator {
    fn default() -> Self {
        SceneGenerator { height: 64, width: 64, frames: 16 }
    }
}

pub fn random_spec(seed: u64, difficulty: Difficulty) -> Result<SceneSpec> {
    SceneGenerator::default().random_spec(seed, difficulty)
}

impl SceneGenerator {
    pub fn random_spec(&self, seed: u64, difficulty: Difficulty) -> Result<SceneSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_ATTEMPTS {
            let candidate = match difficulty {
                Difficulty::Easy => self.try_easy(&mut rng),
                Difficulty::Hard => self.try_hard(&mut rng),
            };
            if let Some(spec) = candidate {
                return Ok(spec);
            }
        }
        Err(Error::RejectionLimit(MAX_ATTEMPTS))
    }

    fn shape(rng: &mut ChaCha8Rng) -> Shape {
        if rng.random_bool(0.5) {
            Shape::Disc
        } else {
            Shape::Square
        }
    }

    /// Pick `p0` so that the object stays inside the canvas while visible.
    fn place(&self, rng: &mut ChaCha8Rng, radius: f64, velocity: [f64; 2], entry: usize, exit: usize) -> Option<[f64; 2]> {
        let mut p0 = [0.0; 2];
        let extent = [self.width, self.height];
        for axis in 0..2 {
            let a = velocity[axis] * entry as f64;
            let b = velocity[axis] * exit as f64;
            let lo = radius - a.min(b);
            let hi = (extent[axis] - 1) as f64 - radius - a.max(b);
            if lo > hi {
                return None;
            }
            p0[axis] = rng.random_range(lo..=hi);
        }
        Some(p0)
    }

    fn try_easy(&self, rng: &mut ChaCha8Rng) -> Option<SceneSpec> {
        let radius = rng.random_range(2.5..=3.5);
        let sector = rng.random_range(0..8) as f64;
        let heading = (45.0 * sector + rng.random_range(-10.0..=10.0f64)).to_radians();
        let speed = rng.random_range(1.8..=2.6);
        // image y grows downwards, compass north is up
        let velocity = [speed * heading.cos(), -speed * heading.sin()];
        let last = self.frames - 1;
        let p0 = self.place(rng, radius, velocity, 0, last)?;
        let gray = rng.random_range(0.5..=0.7);
        let spec = SceneSpec {
            height: self.height,
            width: self.width,
            frames: self.frames,
            background: [0.0; 3],
            objects: vec![ObjectSpec {
                shape: Self::shape(rng),
                radius,
                color: [gray; 3],
                p0,
                velocity,
                entry: 0,
                exit: last,
            }],
        };
        spec.validate().ok()?;
        Some(spec)
    }

    fn try_hard(&self, rng: &mut ChaCha8Rng) -> Option<SceneSpec> {
        let movers = rng.random_range(2..=3);
        let last = self.frames - 1;
        let min_len = (self.frames / 3).max(2);
        let max_len = (self.frames / 2).max(min_len);
        let mut objects = Vec::new();
        for _ in 0..movers {
            let len = rng.random_range(min_len..=max_len);
            let exit = rng.random_range(len - 1..=last);
            let entry = exit + 1 - len;
            let radius = rng.random_range(2.5..=3.5);
            let heading = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(1.8..=2.6);
            let velocity = [speed * heading.cos(), -speed * heading.sin()];
            let p0 = self.place(rng, radius, velocity, entry, exit)?;
            let gray = rng.random_range(0.45..=0.75);
            objects.push(ObjectSpec { shape: Self::shape(rng), radius, color: [gray; 3], p0, velocity, entry, exit });
        }
        let mut exits: Vec<usize> = objects.iter().map(|o| o.exit).collect();
        exits.sort_unstable();
        if exits.windows(2).any(|w| w[1] - w[0] < 3) {
            return None;
        }

        let radius = rng.random_range(3.0..=5.0);
        let hue = rng.random_range(0..6);
        let color = [
            [0.8, 0.15, 0.1],
            [0.1, 0.7, 0.2],
            [0.15, 0.25, 0.85],
            [0.8, 0.75, 0.1],
            [0.7, 0.1, 0.75],
            [0.1, 0.7, 0.75],
        ][hue];
        let p0 = self.place(rng, radius, [0.0, 0.0], 0, last)?;
        objects.push(ObjectSpec { shape: Self::shape(rng), radius, color, p0, velocity: [0.0, 0.0], entry: 0, exit: last });

        let spec = SceneSpec { height: self.height, width: self.width, frames: self.frames, background: [0.0; 3], objects };
        spec.validate().ok()?;
        let zones: Vec<MotionMask> = (0..spec.objects.len()).map(|i| spec.trail_mask(i).dilate(2)).collect();
        for i in 0..zones.len() {
            for j in i + 1..zones.len() {
                if zones[i].intersects(&zones[j]) {
                    return None;
                }
            }
        }
        Some(spec)
    }
}

pub fn render(spec: &SceneSpec) -> Result<(Video, SceneTruth)> {
    spec.validate()?;
    let frames = (0..spec.frames)
        .map(|t| {
            let mut f = Frame::filled(spec.height, spec.width, spec.background);
            for o in &spec.objects {
                let support = o.support(t, spec.height, spec.width);
                for y in 0..spec.height {
                    for x in 0..spec.width {
                        if support.get(y, x) {
                            f.set_pixel(y, x, o.color);
                        }
                    }
                }
            }
            f
        })
        .collect();
    Ok((Video::new(frames)?, SceneTruth::from_spec(spec)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_spec() {
        for d in [Difficulty::Easy, Difficulty::Hard] {
            assert_eq!(random_spec(5, d).unwrap(), random_spec(5, d).unwrap());
        }
        assert_ne!(random_spec(5, Difficulty::Easy).unwrap(), random_spec(6, Difficulty::Easy).unwrap());
    }

    #[test]
    fn easy_has_one_gray_mover_on_black() {
        for seed in 0..50 {
            let s = random_spec(seed, Difficulty::Easy).unwrap();
            assert_eq!(s.objects.len(), 1);
            let c = s.objects[0].color;
            assert!(c[0] == c[1] && c[1] == c[2]);
            assert_eq!(s.background, [0.0; 3]);
            assert!(s.objects[0].is_moving());
        }
    }

    #[test]
    fn hard_trails_are_disjoint_after_dilation() {
        for seed in 0..30 {
            let s = random_spec(seed, Difficulty::Hard).unwrap();
            let movers = s.objects.iter().filter(|o| o.is_moving()).count();
            assert!((2..=3).contains(&movers));
            assert_eq!(s.objects.len() - movers, 1);
            // independent check: per-frame supports, dilated, never touch another object's
            for i in 0..s.objects.len() {
                for j in i + 1..s.objects.len() {
                    for ti in 0..s.frames {
                        let a = s.objects[i].support(ti, s.height, s.width).dilate(2);
                        for tj in 0..s.frames {
                            let b = s.objects[j].support(tj, s.height, s.width);
                            assert!(!a.intersects(&b), "seed {seed}: objects {i},{j} at {ti},{tj}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn empty_and_static_scenes() {
        let mut spec = SceneSpec { height: 8, width: 8, frames: 4, background: [0.2, 0.3, 0.4], objects: vec![] };
        let (v, truth) = render(&spec).unwrap();
        assert!(v.frames().iter().all(|f| *f == Frame::filled(8, 8, [0.2, 0.3, 0.4])));
        assert!(truth.objects.is_empty());
        spec.objects.push(ObjectSpec {
            shape: Shape::Square,
            radius: 1.0,
            color: [1.0, 0.0, 0.0],
            p0: [4.0, 4.0],
            velocity: [0.0, 0.0],
            entry: 0,
            exit: 3,
        });
        let (v, truth) = render(&spec).unwrap();
        assert!(v.frames().windows(2).all(|w| w[0] == w[1]));
        assert!(!truth.objects[0].moving);
        assert_eq!(truth.last_mover, None);
    }

    #[test]
    fn rendered_centroid_tracks_kinematics() {
        for seed in 0..20 {
            let spec = random_spec(seed, Difficulty::Easy).unwrap();
            let (v, _) = render(&spec).unwrap();
            let o = &spec.objects[0];
            for t in 0..spec.frames {
                let f = v.frame(t);
                let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
                for y in 0..spec.height {
                    for x in 0..spec.width {
                        if f.pixel(y, x)[0] > 0.0 {
                            sx += x as f64;
                            sy += y as f64;
                            n += 1.0;
                        }
                    }
                }
                let p = o.position(t);
                assert!((sx / n - p[0]).abs() <= 0.5 && (sy / n - p[1]).abs() <= 0.5, "seed {seed} t {t}");
            }
        }
    }

    #[test]
    fn leaving_canvas_is_invalid() {
        let spec = SceneSpec {
            height: 8,
            width: 8,
            frames: 4,
            background: [0.0; 3],
            objects: vec![ObjectSpec {
                shape: Shape::Disc,
                radius: 1.0,
                color: [1.0; 3],
                p0: [5.0, 4.0],
                velocity: [1.0, 0.0],
                entry: 0,
                exit: 3,
            }],
        };
        assert!(render(&spec).is_err());
    }

    #[test]
    fn ordering_is_antisymmetric_and_follows_exits() {
        for seed in 0..30 {
            let spec = random_spec(seed, Difficulty::Hard).unwrap();
            let (_, truth) = render(&spec).unwrap();
            for &(a, b) in &truth.moved_later {
                assert!(!truth.moved_later.contains(&(b, a)));
                assert!(truth.objects[a].exit > truth.objects[b].exit);
            }
            let last = truth.last_mover.expect("hard scenes have distinct exits");
            assert!(truth.objects.iter().all(|o| !o.moving || o.exit <= truth.objects[last].exit));
        }
    }
}
