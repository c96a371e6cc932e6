//! Transmission schemes behind one trait, looked up by name at runtime.
//!
//! A scheme decides what image it sends ([`InputKind`]) and how it puts that
//! image on the channel. The registry maps every configured scheme name to a
//! factory, so sweeps and the CLI pick schemes from strings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{transmit, ChannelConfig};
use crate::chrono::{background_mean, chrono_encode, StackParams};
use crate::transceiver::{dct_analog_transmit, digital_transmit_over, mast_decode, mast_encode, DctParams, MastParams, Reception};
use crate::{ChronoImage, Error, MotionMask, Result, Video};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    Chrono,
    AveragedFrame,
    SingleFrame,
}

impl InputKind {
    pub const ALL: [InputKind; 3] = [InputKind::Chrono, InputKind::AveragedFrame, InputKind::SingleFrame];

    pub fn name(self) -> &'static str {
        match self {
            InputKind::Chrono => "chrono",
            InputKind::AveragedFrame => "averaged-frame",
            InputKind::SingleFrame => "single-frame",
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown input kind '{s}'")))
    }
}

/// The image a scheme transmits and the motion mask it may use.
///
/// Single-frame takes frame `T/2` (0-based); both frame baselines report a
/// full mask.
pub fn build_input(kind: InputKind, video: &Video, stack: &StackParams) -> Result<(ChronoImage, MotionMask)> {
    let (h, w) = (video.height(), video.width());
    match kind {
        InputKind::Chrono => chrono_encode(video, stack),
        InputKind::AveragedFrame => Ok((background_mean(video), MotionMask::full(h, w))),
        InputKind::SingleFrame => Ok((video.frame(video.len() / 2).clone(), MotionMask::full(h, w))),
    }
}

pub trait Scheme: Send + Sync {
    fn name(&self) -> &str;

    fn input_kind(&self) -> InputKind;

    fn transmit(&self, img: &ChronoImage, mask: &MotionMask, channel: &ChannelConfig) -> Result<Reception>;
}

/// Everything a factory may need. `mast` must be set for learned schemes.
#[derive(Debug, Clone, Default)]
pub struct SchemeContext {
    pub k: usize,
    pub dct: DctParams,
    pub mast: Option<MastParams>,
}

pub struct MastScheme {
    name: String,
    input: InputKind,
    params: MastParams,
}

impl MastScheme {
    pub fn new(name: impl Into<String>, input: InputKind, params: MastParams) -> Self {
        MastScheme { name: name.into(), input, params }
    }

    pub fn params(&self) -> &MastParams {
        &self.params
    }
}

impl Scheme for MastScheme {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_kind(&self) -> InputKind {
        self.input
    }

    fn transmit(&self, img: &ChronoImage, mask: &MotionMask, channel: &ChannelConfig) -> Result<Reception> {
        let tx = mast_encode(img, mask, &self.params)?;
        let rx = transmit(&tx.symbols, channel);
        let image = mast_decode(&rx, &tx.side, &self.params)?;
        Ok(Reception { image, transmitted: tx.symbols })
    }
}

pub struct DctScheme {
    pub k: usize,
    pub params: DctParams,
}

impl Scheme for DctScheme {
    fn name(&self) -> &str {
        "dct"
    }

    fn input_kind(&self) -> InputKind {
        InputKind::Chrono
    }

    fn transmit(&self, img: &ChronoImage, mask: &MotionMask, channel: &ChannelConfig) -> Result<Reception> {
        dct_analog_transmit(img, mask, self.k, channel, &self.params)
    }
}

pub struct DigitalScheme;

impl Scheme for DigitalScheme {
    fn name(&self) -> &str {
        "digital"
    }

    fn input_kind(&self) -> InputKind {
        InputKind::Chrono
    }

    fn transmit(&self, img: &ChronoImage, _mask: &MotionMask, channel: &ChannelConfig) -> Result<Reception> {
        digital_transmit_over(img, channel)
    }
}

type Factory = Box<dyn Fn(&SchemeContext) -> Result<Box<dyn Scheme>> + Send + Sync>;

struct Entry {
    input: InputKind,
    learned: bool,
    factory: Factory,
}

pub struct SchemeRegistry {
    entries: BTreeMap<String, Entry>,
}

impl Default for SchemeRegistry {
    /// `mast`, `dct`, `digital`, and the two frame baselines, which reuse the
    /// gated codec trained on their own input kind.
    fn default() -> Self {
        let mut r = SchemeRegistry::empty();
        for (name, input) in [
            ("mast", InputKind::Chrono),
            ("averaged-frame", InputKind::AveragedFrame),
            ("single-frame", InputKind::SingleFrame),
        ] {
            r.register(name, input, true, move |ctx| {
                let params = ctx
                    .mast
                    .clone()
                    .ok_or_else(|| Error::InvalidParameter(format!("scheme '{name}' needs trained codec parameters")))?;
                Ok(Box::new(MastScheme::new(name, input, params)))
            });
        }
        r.register("dct", InputKind::Chrono, false, |ctx| Ok(Box::new(DctScheme { k: ctx.k, params: ctx.dct })));
        r.register("digital", InputKind::Chrono, false, |_| Ok(Box::new(DigitalScheme)));
        r
    }
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        SchemeRegistry { entries: BTreeMap::new() }
    }

    /// Adds or replaces a scheme. `learned` schemes get codec parameters
    /// trained on `input` images through [`SchemeContext::mast`].
    pub fn register<F>(&mut self, name: &str, input: InputKind, learned: bool, factory: F)
    where
        F: Fn(&SchemeContext) -> Result<Box<dyn Scheme>> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Entry { input, learned, factory: Box::new(factory) });
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn entry(&self, name: &str) -> Result<&Entry> {
        self.entries.get(name).ok_or_else(|| Error::UnknownScheme(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn input_kind(&self, name: &str) -> Result<InputKind> {
        self.entry(name).map(|e| e.input)
    }

    pub fn is_learned(&self, name: &str) -> Result<bool> {
        self.entry(name).map(|e| e.learned)
    }

    pub fn build(&self, name: &str, ctx: &SchemeContext) -> Result<Box<dyn Scheme>> {
        (self.entry(name)?.factory)(ctx)
    }
}
