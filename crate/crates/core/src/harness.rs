//! Seeded sweeps over schemes, channel SNRs, trials and scenes.
//!
//! Scenes are generated from their configured seed alone, so every scheme
//! sees the same scene and `generate --seed s` reproduces it. Channel noise
//! for a row is seeded by `derive(master, scheme, snr, trial, scene)`; codec
//! training draws from seeds derived from the master seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, ChannelKind};
use crate::chrono::StackParams;
use crate::imaging::io::write_png;
use crate::metrics::{bcr, masked_mse_split, psnr, symbols_for_bcr};
use crate::plot::{self, Chart, Series};
use crate::probe::{answer, extract_trails, is_correct, receiver_mask, ProbeConfig, Query};
use crate::scene::{render, Difficulty, SceneGenerator, SceneTruth};
use crate::scheme::{build_input, InputKind, SchemeContext, SchemeRegistry};
use crate::seed::{derive, str_key};
use crate::transceiver::{train_mast, DctParams, MastParams, TrainConfig, Training};
use crate::{ChronoImage, Error, MotionMask, Result};

/// BCR the default symbol budget is derived from.
pub const DEFAULT_BCR: f64 = 1.3e-3;

pub const CSV_COLUMNS: [&str; 13] = [
    "scheme",
    "snr_db",
    "trial",
    "scene_seed",
    "k",
    "bcr",
    "psnr_db",
    "mse_in_mask",
    "mse_out_mask",
    "query",
    "answer",
    "correct",
    "status",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub schemes: Vec<String>,
    /// `inf` means a noiseless channel.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub scenes: Vec<u64>,
    /// Complex symbols per image; defaults to the count giving BCR 1.3e-3.
    pub k: Option<usize>,
    pub stack: StackParams,
    /// Master seed. Required before running.
    pub seed: Option<u64>,
    pub difficulty: Difficulty,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub patch_size: usize,
    pub query: Query,
    pub channel: ChannelKind,
    pub train: TrainConfig,
    /// Scenes generated for codec training, disjoint from the sweep scenes.
    pub train_scenes: usize,
    pub alpha: f64,
    pub dct: DctParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            schemes: vec!["mast".into(), "dct".into(), "digital".into()],
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            trials: 3,
            scenes: (0..20).collect(),
            k: None,
            stack: StackParams::default(),
            seed: None,
            difficulty: Difficulty::Hard,
            height: 64,
            width: 64,
            frames: 16,
            patch_size: 16,
            query: Query::WhichMovedLast,
            channel: ChannelKind::Awgn,
            train: TrainConfig::default(),
            train_scenes: 32,
            alpha: 0.5,
            dct: DctParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or_else(|| symbols_for_bcr(DEFAULT_BCR, self.frames, self.height, self.width))
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::InvalidParameter("a master seed is required".into()))
    }

    pub fn validate(&self, registry: &SchemeRegistry) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.schemes.is_empty() {
            return bad("schemes must not be empty");
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return bad("snr list must be non-empty and contain numbers or inf");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.scenes.is_empty() {
            return bad("scene list must not be empty");
        }
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return bad("canvas and duration must be positive");
        }
        for s in &self.schemes {
            if !registry.contains(s) {
                return Err(Error::UnknownScheme(s.clone()));
            }
        }
        self.stack.validate()?;
        self.master_seed()?;
        Ok(())
    }

    fn generator(&self) -> SceneGenerator {
        SceneGenerator { height: self.height, width: self.width, frames: self.frames }
    }

    fn dct_params(&self) -> DctParams {
        DctParams { patch_size: self.patch_size, ..self.dct }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scheme: String,
    pub snr_db: f64,
    pub trial: usize,
    pub scene_seed: u64,
    pub k: Option<usize>,
    pub bcr: Option<f64>,
    pub psnr_db: Option<f64>,
    pub mse_in_mask: Option<f64>,
    pub mse_out_mask: Option<f64>,
    pub query: Query,
    pub answer: Option<String>,
    pub correct: Option<bool>,
    pub status: String,
}

impl Row {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(scheme: &str, snr_db: f64, trial: usize, scene_seed: u64, query: Query, err: &str) -> Self {
        Row {
            scheme: scheme.into(),
            snr_db,
            trial,
            scene_seed,
            k: None,
            bcr: None,
            psnr_db: None,
            mse_in_mask: None,
            mse_out_mask: None,
            query,
            answer: None,
            correct: None,
            status: format!("error: {}", err.replace(['\n', '\r'], " ")),
        }
    }

    fn record(&self) -> [String; 13] {
        let opt = |v: Option<f64>, f: fn(f64) -> String| v.map(f).unwrap_or_default();
        [
            self.scheme.clone(),
            format_snr(self.snr_db),
            self.trial.to_string(),
            self.scene_seed.to_string(),
            self.k.map(|k| k.to_string()).unwrap_or_default(),
            opt(self.bcr, |v| format!("{v:.6e}")),
            opt(self.psnr_db, |v| format!("{v:.4}")),
            opt(self.mse_in_mask, |v| format!("{v:.6e}")),
            opt(self.mse_out_mask, |v| format!("{v:.6e}")),
            self.query.name().into(),
            self.answer.clone().unwrap_or_default(),
            self.correct.map(|c| c.to_string()).unwrap_or_default(),
            self.status.clone(),
        ]
    }
}

pub fn format_snr(snr: f64) -> String {
    if snr.is_infinite() {
        if snr > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{snr}")
    }
}

pub fn channel_for(kind: ChannelKind, snr_db: f64, seed: u64) -> ChannelConfig {
    ChannelConfig { kind, snr_db, seed }
}

/// Noise seed of one row.
pub fn row_seed(master: u64, scheme: &str, snr_db: f64, trial: usize, scene: u64) -> u64 {
    derive(master, &[str_key(scheme), snr_db.to_bits(), trial as u64, scene])
}

/// Training images of one input kind, from scenes seeded off the master.
pub fn training_set(cfg: &SweepConfig, kind: InputKind) -> Result<Vec<(ChronoImage, MotionMask)>> {
    let master = cfg.master_seed()?;
    let generator = cfg.generator();
    (0..cfg.train_scenes as u64)
        .into_par_iter()
        .map(|i| {
            let spec = generator.random_spec(derive(master, &[str_key("train-scene"), i]), cfg.difficulty)?;
            let (video, _) = render(&spec)?;
            build_input(kind, &video, &cfg.stack)
        })
        .collect()
}

/// Trains one codec per input kind that a learned scheme in `cfg` needs.
pub fn train_codecs(cfg: &SweepConfig, registry: &SchemeRegistry) -> Result<BTreeMap<InputKind, Result<Training, String>>> {
    let master = cfg.master_seed()?;
    let mut kinds = Vec::new();
    for s in &cfg.schemes {
        if registry.is_learned(s)? {
            let kind = registry.input_kind(s)?;
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
    }
    let mut out = BTreeMap::new();
    for kind in kinds {
        let result = (|| {
            let data = training_set(cfg, kind)?;
            let mut p0 = MastParams::init(cfg.height, cfg.width, cfg.patch_size, cfg.k(), derive(master, &[str_key("init")]))?;
            p0.alpha = cfg.alpha;
            let tc = TrainConfig { seed: derive(master, &[str_key("train"), str_key(kind.name())]), ..cfg.train };
            train_mast(&data, &tc, p0)
        })();
        out.insert(kind, result.map_err(|e| e.to_string()));
    }
    Ok(out)
}

struct SceneInputs {
    truth: SceneTruth,
    inputs: BTreeMap<InputKind, (ChronoImage, MotionMask)>,
}

fn prepare_scene(cfg: &SweepConfig, kinds: &[InputKind], seed: u64) -> Result<SceneInputs> {
    let spec = cfg.generator().random_spec(seed, cfg.difficulty)?;
    let (video, truth) = render(&spec)?;
    let mut inputs = BTreeMap::new();
    for &k in kinds {
        inputs.insert(k, build_input(k, &video, &cfg.stack)?);
    }
    Ok(SceneInputs { truth, inputs })
}

fn evaluate_row(
    cfg: &SweepConfig,
    scheme: &dyn crate::scheme::Scheme,
    scene: &SceneInputs,
    channel: &ChannelConfig,
    dump: Option<&Path>,
    tag: &str,
) -> Result<Row> {
    let (img, mask) = &scene.inputs[&scheme.input_kind()];
    let rx = scheme.transmit(img, mask, channel)?;
    let k = rx.transmitted.len();
    let split = masked_mse_split(img, &rx.image, mask)?;
    let probe_cfg = ProbeConfig { theta_max: cfg.stack.theta_max, ..ProbeConfig::default() };
    let trails = extract_trails(&rx.image, &receiver_mask(&rx.image, cfg.stack.tau), &probe_cfg)?;
    let ans = answer(cfg.query, &trails);
    if let Some(dir) = dump {
        let d = dir.join(scheme.name());
        fs::create_dir_all(&d)?;
        write_png(&rx.image, d.join(format!("{tag}.png")))?;
    }
    Ok(Row {
        scheme: scheme.name().into(),
        snr_db: channel.snr_db,
        trial: 0,
        scene_seed: 0,
        k: Some(k),
        bcr: Some(bcr(k, cfg.frames, cfg.height, cfg.width)),
        psnr_db: Some(psnr(img, &rx.image)?),
        mse_in_mask: split.inside,
        mse_out_mask: split.outside,
        query: cfg.query,
        correct: Some(is_correct(&ans, &scene.truth)),
        answer: Some(ans.label),
        status: "ok".into(),
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<Row>,
    pub training: BTreeMap<InputKind, Result<Training, String>>,
}

/// Every (scheme, snr, trial, scene) row in that nesting order. Stage
/// failures land in the row's status; only configuration errors abort.
pub fn run_sweep(cfg: &SweepConfig, registry: &SchemeRegistry, dump: Option<&Path>) -> Result<SweepOutput> {
    cfg.validate(registry)?;
    let training = train_codecs(cfg, registry)?;
    let rows = run_rows(cfg, registry, &training, dump)?;
    Ok(SweepOutput { rows, training })
}

type Built = Result<Box<dyn crate::scheme::Scheme>, String>;

pub fn run_rows(
    cfg: &SweepConfig,
    registry: &SchemeRegistry,
    training: &BTreeMap<InputKind, Result<Training, String>>,
    dump: Option<&Path>,
) -> Result<Vec<Row>> {
    cfg.validate(registry)?;
    let master = cfg.master_seed()?;
    let mut kinds: Vec<InputKind> = cfg.schemes.iter().map(|s| registry.input_kind(s)).collect::<Result<_>>()?;
    kinds.sort();
    kinds.dedup();

    let scenes: Vec<Result<SceneInputs, String>> = cfg
        .scenes
        .par_iter()
        .map(|&s| prepare_scene(cfg, &kinds, s).map_err(|e| e.to_string()))
        .collect();
    if let Some(dir) = dump {
        for (&seed, scene) in cfg.scenes.iter().zip(&scenes) {
            if let Ok(scene) = scene {
                let d = dir.join("inputs");
                fs::create_dir_all(&d)?;
                for (kind, (img, _)) in &scene.inputs {
                    write_png(img, d.join(format!("scene{seed}_{kind}.png")))?;
                }
            }
        }
    }

    let schemes: Vec<(String, Built)> = cfg
        .schemes
        .iter()
        .map(|name| {
            let built = (|| {
                let mast = if registry.is_learned(name)? {
                    match &training[&registry.input_kind(name)?] {
                        Ok(t) => Some(t.params.clone()),
                        Err(e) => return Err(Error::InvalidParameter(format!("codec training failed: {e}"))),
                    }
                } else {
                    None
                };
                registry.build(name, &SchemeContext { k: cfg.k(), dct: cfg.dct_params(), mast })
            })();
            (name.clone(), built.map_err(|e| e.to_string()))
        })
        .collect();

    let mut jobs = Vec::new();
    for si in 0..schemes.len() {
        for &snr in &cfg.snr_db {
            for trial in 0..cfg.trials {
                for ci in 0..cfg.scenes.len() {
                    jobs.push((si, snr, trial, ci));
                }
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(si, snr, trial, ci)| {
            let (name, scheme) = &schemes[si];
            let seed = cfg.scenes[ci];
            let fail = |e: &str| Row::failed(name, snr, trial, seed, cfg.query, e);
            let (scheme, scene) = match (scheme, &scenes[ci]) {
                (Ok(s), Ok(c)) => (s, c),
                (Err(e), _) | (_, Err(e)) => return fail(e),
            };
            let channel = channel_for(cfg.channel, snr, row_seed(master, name, snr, trial, seed));
            let tag = format!("snr{}_trial{trial}_scene{seed}", format_snr(snr));
            match evaluate_row(cfg, scheme.as_ref(), scene, &channel, dump, &tag) {
                Ok(row) => Row { trial, scene_seed: seed, ..row },
                Err(e) => fail(&e.to_string()),
            }
        })
        .collect();
    Ok(rows)
}

pub fn write_csv(rows: &[Row], w: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(CSV_COLUMNS).map_err(io)?;
    for r in rows {
        out.write_record(r.record()).map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean PSNR and probe accuracy of one (scheme, snr) point over its ok rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub scheme: String,
    pub snr_db: f64,
    pub rows: usize,
    pub mean_psnr_db: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Values are sorted before summing, so the means do not depend on row order.
fn mean(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Points ordered by scheme name, then SNR.
pub fn summarize(rows: &[Row]) -> Vec<CurvePoint> {
    let mut groups: BTreeMap<(String, u64), Vec<&Row>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        // order-preserving key for f64 (no NaN in valid configs)
        let bits = r.snr_db.to_bits();
        let key = if r.snr_db.is_sign_negative() { !bits } else { bits | 1 << 63 };
        groups.entry((r.scheme.clone(), key)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| CurvePoint {
            scheme: g[0].scheme.clone(),
            snr_db: g[0].snr_db,
            rows: g.len(),
            mean_psnr_db: mean(g.iter().filter_map(|r| r.psnr_db).collect()),
            accuracy: mean(g.iter().filter_map(|r| r.correct).map(|c| if c { 1.0 } else { 0.0 }).collect()),
        })
        .collect()
}

pub fn write_curves(points: &[CurvePoint], csv_path: &Path, png_path: &Path) -> Result<()> {
    let mut out = csv::Writer::from_path(csv_path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(["scheme", "snr_db", "rows", "mean_psnr_db", "accuracy"]).map_err(io)?;
    for p in points {
        out.write_record([
            p.scheme.clone(),
            format_snr(p.snr_db),
            p.rows.to_string(),
            p.mean_psnr_db.map(|v| format!("{v:.4}")).unwrap_or_default(),
            p.accuracy.map(|v| format!("{v:.4}")).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    out.flush()?;

    let mut names: Vec<&str> = points.iter().map(|p| p.scheme.as_str()).collect();
    names.dedup();
    let series = |f: fn(&CurvePoint) -> Option<f64>| -> Vec<Series> {
        names
            .iter()
            .map(|&n| Series {
                name: n.into(),
                points: points.iter().filter(|p| p.scheme == n).filter_map(|p| f(p).map(|v| (p.snr_db, v))).collect(),
            })
            .collect()
    };
    let charts = [
        Chart { title: "psnr vs snr".into(), x_label: "snr db".into(), y_label: "psnr db".into(), series: series(|p| p.mean_psnr_db) },
        Chart {
            title: "probe accuracy vs snr".into(),
            x_label: "snr db".into(),
            y_label: "accuracy".into(),
            series: series(|p| p.accuracy),
        },
    ];
    plot::write_png(png_path, &charts)
}

/// Runs the sweep and writes `results.csv`, `curves.csv` and `curves.png`
/// into `out_dir`; reconstructions go under `artifacts` when given.
pub fn run_and_write(cfg: &SweepConfig, registry: &SchemeRegistry, out_dir: &Path, artifacts: Option<&Path>) -> Result<SweepOutput> {
    fs::create_dir_all(out_dir)?;
    let output = run_sweep(cfg, registry, artifacts)?;
    write_csv(&output.rows, fs::File::create(out_dir.join("results.csv"))?)?;
    write_curves(&summarize(&output.rows), &out_dir.join("curves.csv"), &out_dir.join("curves.png"))?;
    Ok(output)
}
