use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use chromacomm::channel::{ChannelConfig, ChannelKind};
use chromacomm::chrono::{chrono_encode, flop_estimate, StackParams};
use chromacomm::harness::{run_and_write, summarize, SweepConfig};
use chromacomm::imaging::io::{read_frame_dir, read_mask_png, read_png, write_frame_dir, write_mask_png, write_png};
use chromacomm::metrics::{masked_mse_split, psnr};
use chromacomm::probe::{answer, extract_trails, is_correct, receiver_mask, ProbeConfig, Query};
use chromacomm::scene::{render, Difficulty, SceneGenerator, SceneSpec, SceneTruth};
use chromacomm::scheme::{build_input, InputKind, SchemeContext, SchemeRegistry};
use chromacomm::transceiver::{train_mast, DctParams, MastParams, TrainConfig};
use chromacomm::MotionMask;

#[derive(Parser)]
#[command(name = "chromacomm", version, about = "Chrono-color stacking and motion-aware analog transmission")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene to a frame directory plus truth.json
    Generate(GenerateArgs),
    /// Stack a frame directory into chrono.png and mask.png
    Stack(StackArgs),
    /// Train the gated codec on generated scenes
    Train(TrainArgs),
    /// Send one image through a scheme and channel
    Transmit(TransmitArgs),
    /// Run a seeded sweep and write results.csv and curves.png
    Sweep(SweepArgs),
    /// Ask a motion question of a (reconstructed) chrono image
    Probe(ProbeArgs),
}

#[derive(Args)]
struct Canvas {
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    frames: usize,
}

impl Canvas {
    fn generator(&self) -> SceneGenerator {
        SceneGenerator { height: self.height, width: self.width, frames: self.frames }
    }
}

#[derive(Args)]
struct StackFlags {
    #[arg(long, default_value_t = 270.0)]
    theta_max: f64,
    #[arg(long, default_value_t = 0.06)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    tint: f64,
}

impl StackFlags {
    fn params(&self) -> StackParams {
        StackParams { theta_max: self.theta_max, tau: self.tau, tint: self.tint }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "easy")]
    difficulty: Difficulty,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    canvas: Canvas,
}

#[derive(Args)]
struct StackArgs {
    /// Directory of frame PNGs, stacked in file-name order
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    stack: StackFlags,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "hard")]
    difficulty: Difficulty,
    /// Number of generated training scenes
    #[arg(long, default_value_t = 32)]
    scenes: u64,
    #[arg(long, default_value = "chrono")]
    input: InputKind,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    params_out: PathBuf,
    /// Optional JSON file for the loss trace
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[command(flatten)]
    canvas: Canvas,
    #[command(flatten)]
    stack: StackFlags,
}

#[derive(Args)]
struct TransmitArgs {
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    image: PathBuf,
    /// Motion mask PNG; no motion if omitted
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Channel SNR in dB; `inf` for a noiseless channel
    #[arg(long)]
    snr: f64,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "awgn")]
    channel: ChannelKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    #[arg(long)]
    params_in: Option<PathBuf>,
    /// Write the codec parameters used (fresh ones when no --params-in)
    #[arg(long)]
    params_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write per-trial reconstructions under --artifacts
    #[arg(long)]
    dump: bool,
    #[arg(long)]
    artifacts: Option<PathBuf>,
    /// Comma-separated scheme names
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Comma-separated SNRs in dB
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Use scene seeds 0..N
    #[arg(long)]
    scenes: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    difficulty: Option<Difficulty>,
    #[arg(long)]
    query: Option<Query>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    image: PathBuf,
    /// Motion mask PNG; thresholded from the image if omitted
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    query: Query,
    /// truth.json from `generate`, to score the answer
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 270.0)]
    theta_max: f64,
    #[arg(long, default_value_t = 0.06)]
    tau: f64,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TruthFile {
    spec: SceneSpec,
    truth: SceneTruth,
}

fn write_json(path: PathBuf, value: &impl serde::Serialize) -> Result<()> {
    fs::write(&path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = a.canvas.generator().random_spec(a.seed, a.difficulty)?;
    let (video, truth) = render(&spec)?;
    write_frame_dir(&video, a.out.join("frames"))?;
    fs::create_dir_all(&a.out)?;
    write_json(a.out.join("truth.json"), &TruthFile { spec, truth })?;
    println!("wrote {} frames to {}", video.len(), a.out.join("frames").display());
    Ok(())
}

fn stack(a: StackArgs) -> Result<()> {
    let video = read_frame_dir(&a.frames)?;
    let params = a.stack.params();
    let start = Instant::now();
    let (img, mask) = chrono_encode(&video, &params)?;
    let elapsed = start.elapsed();
    fs::create_dir_all(&a.out)?;
    write_png(&img, a.out.join("chrono.png"))?;
    write_mask_png(&mask, a.out.join("mask.png"))?;
    let stats = json!({
        "frames": video.len(),
        "height": video.height(),
        "width": video.width(),
        "mask_pixels": mask.count(),
        "flop_estimate": flop_estimate(video.len(), video.height(), video.width()),
        "elapsed_ms": elapsed.as_secs_f64() * 1e3,
        "params": params,
    });
    write_json(a.out.join("stats.json"), &stats)?;
    println!("{stats}");
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let stack = a.stack.params();
    let generator = a.canvas.generator();
    let data = (0..a.scenes)
        .map(|i| {
            let spec = generator.random_spec(chromacomm::seed::derive(a.seed, &[i]), a.difficulty)?;
            let (video, _) = render(&spec)?;
            build_input(a.input, &video, &stack)
        })
        .collect::<chromacomm::Result<Vec<_>>>()?;
    let mut p0 = MastParams::init(a.canvas.height, a.canvas.width, a.patch_size, a.k, a.seed)?;
    p0.alpha = a.alpha;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        step_size: a.step_size.unwrap_or(defaults.step_size),
        seed: a.seed,
        ..defaults
    };
    let t = train_mast(&data, &cfg, p0)?;
    t.params.write(fs::File::create(&a.params_out)?)?;
    if let Some(path) = a.trace_out {
        write_json(path, &t.loss_trace)?;
    }
    println!(
        "loss {:.6} -> {:.6}, wrote {}",
        t.loss_trace[0],
        t.loss_trace.last().copied().unwrap_or(f64::NAN),
        a.params_out.display()
    );
    Ok(())
}

fn transmit(a: TransmitArgs) -> Result<()> {
    let registry = SchemeRegistry::default();
    let img = read_png(&a.image)?;
    let mask = match &a.mask {
        Some(p) => read_mask_png(p)?,
        None => MotionMask::empty(img.height(), img.width()),
    };
    let learned = registry.is_learned(&a.scheme)?;
    let mast = if learned {
        let params = match &a.params_in {
            Some(p) => MastParams::read(fs::File::open(p)?)?,
            None => {
                let k = a.k.context("--k is required without --params-in")?;
                eprintln!("warning: no --params-in, using an untrained codec");
                MastParams::init(img.height(), img.width(), a.patch_size, k, a.seed)?
            }
        };
        if let Some(k) = a.k {
            if k != params.k {
                bail!("--k {k} does not match the codec's k = {}", params.k);
            }
        }
        if let Some(p) = &a.params_out {
            params.write(fs::File::create(p)?)?;
        }
        Some(params)
    } else {
        None
    };
    let k = a.k.or(mast.as_ref().map(|p| p.k)).unwrap_or(0);
    if a.scheme == "dct" && k == 0 {
        bail!("--k is required for dct");
    }
    let ctx = SchemeContext { k, dct: DctParams { patch_size: a.patch_size, ..DctParams::default() }, mast };
    let scheme = registry.build(&a.scheme, &ctx)?;
    let channel = ChannelConfig { kind: a.channel, snr_db: a.snr, seed: a.seed };
    let rx = scheme.transmit(&img, &mask, &channel)?;
    write_png(&rx.image, &a.out)?;
    let split = masked_mse_split(&img, &rx.image, &mask)?;
    println!(
        "{}",
        json!({
            "scheme": a.scheme,
            "symbols": rx.transmitted.len(),
            "mean_power": rx.transmitted.mean_power(),
            "psnr_db": psnr(&img, &rx.image)?,
            "mse_in_mask": split.inside,
            "mse_out_mask": split.outside,
        })
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => SweepConfig::from_toml(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => SweepConfig::default(),
    };
    cfg.seed = Some(a.seed);
    if let Some(v) = a.schemes {
        cfg.schemes = v;
    }
    if let Some(v) = a.snr {
        cfg.snr_db = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(n) = a.scenes {
        cfg.scenes = (0..n).collect();
    }
    if a.k.is_some() {
        cfg.k = a.k;
    }
    if let Some(v) = a.difficulty {
        cfg.difficulty = v;
    }
    if let Some(v) = a.query {
        cfg.query = v;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    let artifacts = match (a.dump, a.artifacts) {
        (true, Some(dir)) => Some(dir),
        (true, None) => Some(a.out.join("artifacts")),
        (false, Some(_)) => bail!("--artifacts needs --dump"),
        (false, None) => None,
    };
    let registry = SchemeRegistry::default();
    let out = run_and_write(&cfg, &registry, &a.out, artifacts.as_deref())?;
    for (kind, t) in &out.training {
        match t {
            Ok(t) => eprintln!(
                "trained {kind}: loss {:.6} -> {:.6}",
                t.loss_trace[0],
                t.loss_trace.last().copied().unwrap_or(f64::NAN)
            ),
            Err(e) => eprintln!("training {kind} failed: {e}"),
        }
    }
    for p in summarize(&out.rows) {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<16} snr {:>6}  psnr {:>8}  acc {:>6}", p.scheme, chromacomm::harness::format_snr(p.snr_db), fmt(p.mean_psnr_db), fmt(p.accuracy));
    }
    let failed = out.rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} rows failed; see the status column");
    }
    println!("wrote {}", a.out.join("results.csv").display());
    Ok(())
}

fn probe(a: ProbeArgs) -> Result<()> {
    let img = read_png(&a.image)?;
    let mask = match &a.mask {
        Some(p) => read_mask_png(p)?,
        None => receiver_mask(&img, a.tau),
    };
    let cfg = ProbeConfig { theta_max: a.theta_max, ..ProbeConfig::default() };
    let trails = extract_trails(&img, &mask, &cfg)?;
    let ans = answer(a.query, &trails);
    let correct = match &a.truth {
        Some(p) => {
            let t: TruthFile = serde_json::from_str(&fs::read_to_string(p)?)?;
            Some(is_correct(&ans, &t.truth))
        }
        None => None,
    };
    println!("{}", json!({ "answer": ans, "trails": trails.len(), "correct": correct }));
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Stack(a) => stack(a),
        Command::Train(a) => train(a),
        Command::Transmit(a) => transmit(a),
        Command::Sweep(a) => sweep(a),
        Command::Probe(a) => probe(a),
    }
}
