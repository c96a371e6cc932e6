//! Temporal-to-chromatic video projection and motion-aware analog transmission.
//!
//! A video is collapsed into one color-coded image whose hue encodes time
//! ([`chrono`]), sent over a simulated wireless link ([`channel`]) by one of
//! several interchangeable transmission schemes ([`scheme`], [`transceiver`]),
//! and finally interrogated by a deterministic hue decoder ([`probe`]) that
//! recovers motion direction and temporal order. [`harness`] runs seeded
//! sweeps over schemes and channel conditions.

pub mod channel;
pub mod chrono;
mod error;
pub mod harness;
pub mod imaging;
pub mod metrics;
pub mod plot;
pub mod probe;
pub mod scene;
pub mod scheme;
pub mod seed;
pub mod transceiver;

pub use error::{Error, Result};
pub use imaging::{ChronoImage, Frame, MotionMask, Video};
