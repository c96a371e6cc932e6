//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured value next to its pinned tolerance, then asserts.
//!
//! The tests share one lock so the timing criterion never competes with the
//! heavier ones for cores.

use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use chromacomm::channel::{noise_samples, transmit, ChannelConfig};
use chromacomm::chrono::{chrono_encode, count_encode_ops, flop_estimate, StackParams};
use chromacomm::harness::{run_sweep, summarize, CurvePoint, SweepConfig};
use chromacomm::metrics::{bcr, masked_mse_split, symbols_for_bcr};
use chromacomm::probe::{answer, extract_trails, is_correct, ProbeConfig, Query};
use chromacomm::scene::{render, Difficulty, SceneGenerator};
use chromacomm::scheme::{build_input, InputKind, SchemeRegistry};
use chromacomm::transceiver::{
    dct_analog_transmit, digital_transmit, loss_and_gradient, mast_decode, mast_encode, train_mast, training_loss, DctParams,
    MastParams, TrainConfig,
};
use chromacomm::{Frame, MotionMask, Video};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Frame {
    Frame::from_data(h, w, (0..3 * h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> MotionMask {
    let p = rng.random::<f64>();
    MotionMask::from_data(h, w, (0..h * w).map(|_| rng.random::<f64>() < p).collect()).unwrap()
}

#[test]
fn power_constraint() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mast = MastParams::init(32, 32, 8, 64, 2).unwrap();
    let dct = DctParams { patch_size: 8, ..DctParams::default() };
    let mut worst: f64 = 0.0;
    let mut vectors = 0;
    for i in 0..1000u64 {
        let img = random_image(&mut rng, 32, 32);
        let mask = random_mask(&mut rng, 32, 32);
        let snr = rng.random_range(-10.0..10.0);
        let powers = [
            mast_encode(&img, &mask, &mast).unwrap().symbols.mean_power(),
            dct_analog_transmit(&img, &mask, 64 + (i as usize % 200), &ChannelConfig::awgn(snr, i), &dct)
                .unwrap()
                .transmitted
                .mean_power(),
            digital_transmit(&img, snr, i).unwrap().transmitted.mean_power(),
        ];
        for p in powers {
            worst = worst.max((p - 1.0).abs());
            vectors += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 10.0;
    report(
        "power constraint",
        pass,
        format!("max |P-1| = {worst:.2e} over {vectors} vectors from 1000 images in {secs:.2} s (tol 1e-9, limit 10 s)"),
    );
    assert!(pass);
}

#[test]
fn bcr_arithmetic() {
    let _g = serial();
    let a = bcr(252, 8, 256, 256);
    let b = bcr(2045, 8, 256, 256);
    let sig = |v: f64, digits: i32| {
        let e = v.abs().log10().floor() as i32;
        let s = 10f64.powi(digits - 1 - e);
        (v * s).round() / s
    };
    let pass = sig(a, 4) == 1.602e-4 && sig(b, 4) == 1.300e-3 && sig(a, 2) == 1.6e-4 && sig(b, 2) == 1.3e-3;
    report("bcr arithmetic", pass, format!("bcr(252) = {a:.4e}, bcr(2045) = {b:.4e} (expected 1.602e-4, 1.300e-3 at 4 significant digits)"));
    assert!(pass);
    assert_eq!(symbols_for_bcr(1.602e-4, 8, 256, 256), 252);
}

#[test]
fn gradient_oracle() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = random_image(&mut rng, 4, 4);
    let mut mask = MotionMask::empty(4, 4);
    for (y, x) in [(0, 0), (0, 1), (1, 1), (2, 3), (3, 3)] {
        mask.set(y, x, true);
    }
    let mut p = MastParams::init(4, 4, 2, 8, 5).unwrap();
    p.w = 1.7;
    p.b = -0.3;
    p.decoder_bias.iter_mut().for_each(|d| *d = rng.random_range(-0.1..0.1));
    let noise = noise_samples(8, 3.0, 11);
    let (_, g) = loss_and_gradient(&p, &img, &mask, &noise).unwrap();
    let f = |q: &MastParams| training_loss(q, &img, &mask, &noise).unwrap();
    let h = 1e-6;
    // relative error, guarded against components that are zero analytically
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-7);
    let mut worst = [0.0f64; 5];
    let mut count = 0;
    let mut probe = |slot: usize, analytic: f64, bump: &dyn Fn(&mut MastParams, f64)| {
        let (mut a, mut b) = (p.clone(), p.clone());
        bump(&mut a, h);
        bump(&mut b, -h);
        let numeric = (f(&a) - f(&b)) / (2.0 * h);
        worst[slot] = worst[slot].max(rel(analytic, numeric));
        count += 1;
    };
    for i in 0..p.encoder.len() {
        probe(0, g.encoder[i], &|q, d| q.encoder[i] += d);
    }
    for i in 0..p.decoder.len() {
        probe(1, g.decoder[i], &|q, d| q.decoder[i] += d);
    }
    for i in 0..p.decoder_bias.len() {
        probe(2, g.decoder_bias[i], &|q, d| q.decoder_bias[i] += d);
    }
    probe(3, g.w, &|q, d| q.w += d);
    probe(4, g.b, &|q, d| q.b += d);
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().copied().fold(0.0, f64::max);
    let pass = max < 1e-3 && secs < 60.0;
    report(
        "gradient oracle",
        pass,
        format!(
            "{count} parameters, worst relative error encoder {:.1e} decoder {:.1e} bias {:.1e} w {:.1e} b {:.1e} (tol 1e-3) in {secs:.2} s",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    );
    assert!(pass);
}

fn hard_chrono_set(seeds: std::ops::Range<u64>, gen: SceneGenerator, stack: &StackParams) -> Vec<(Frame, MotionMask)> {
    seeds
        .map(|s| {
            let (video, _) = render(&gen.random_spec(s, Difficulty::Hard).unwrap()).unwrap();
            chrono_encode(&video, stack).unwrap()
        })
        .collect()
}

#[test]
fn motion_weighted_loss_effect() {
    let _g = serial();
    let start = Instant::now();
    let stack = StackParams::default();
    let gen = SceneGenerator::default();
    let train = hard_chrono_set(0..32, gen, &stack);
    let held_out = hard_chrono_set(1000..1032, gen, &stack);
    let cfg = TrainConfig { epochs: 200, seed: 21, ..TrainConfig::default() };
    let run = |alpha: f64| {
        let mut p0 = MastParams::init(64, 64, 16, 256, 4).unwrap();
        p0.alpha = alpha;
        train_mast(&train, &cfg, p0).unwrap().params
    };
    let (weighted, plain) = (run(0.5), run(0.0));
    let masked_mse = |p: &MastParams, set: &[(Frame, MotionMask)]| {
        let mut total = 0.0;
        let mut n = 0;
        for (i, (img, mask)) in set.iter().enumerate() {
            for trial in 0..3u64 {
                let tx = mast_encode(img, mask, p).unwrap();
                let rx = transmit(&tx.symbols, &ChannelConfig::awgn(5.0, 100 * i as u64 + trial));
                let rec = mast_decode(&rx, &tx.side, p).unwrap();
                total += masked_mse_split(img, &rec, mask).unwrap().inside.unwrap();
                n += 1;
            }
        }
        total / n as f64
    };
    let (w_train, p_train) = (masked_mse(&weighted, &train), masked_mse(&plain, &train));
    let (w_held, p_held) = (masked_mse(&weighted, &held_out), masked_mse(&plain, &held_out));
    let secs = start.elapsed().as_secs_f64();
    let pass = w_train < p_train && secs < 600.0;
    report(
        "motion-weighted loss effect",
        pass,
        format!(
            "in-mask MSE at 5 dB on the 32 training images: alpha 0.5 {w_train:.5e}, alpha 0 {p_train:.5e}, ratio {:.4} (need < 1); \
             held-out ratio {:.4}; {secs:.1} s",
            w_train / p_train,
            w_held / p_held
        ),
    );
    assert!(pass);
}

fn point<'a>(points: &'a [CurvePoint], scheme: &str, snr: f64) -> &'a CurvePoint {
    points.iter().find(|p| p.scheme == scheme && p.snr_db == snr).unwrap()
}

#[test]
fn cliff_vs_graceful_degradation() {
    let _g = serial();
    let start = Instant::now();
    let snrs = [-10.0, -5.0, 0.0, 5.0, 10.0];
    let cfg = SweepConfig {
        schemes: vec!["mast".into(), "digital".into()],
        snr_db: snrs.to_vec(),
        trials: 3,
        scenes: (0..20).collect(),
        seed: Some(5),
        difficulty: Difficulty::Hard,
        height: 128,
        width: 128,
        ..SweepConfig::default()
    };
    let out = run_sweep(&cfg, &SchemeRegistry::default(), None).unwrap();
    assert!(out.rows.iter().all(|r| r.is_ok()));
    let pts = summarize(&out.rows);
    let curve = |s: &str| snrs.iter().map(|&x| point(&pts, s, x).mean_psnr_db.unwrap()).collect::<Vec<_>>();
    let (digital, mast) = (curve("digital"), curve("mast"));
    let steps = |c: &[f64]| c.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let digital_max = steps(&digital).into_iter().fold(f64::MIN, f64::max);
    let mast_max = steps(&mast).into_iter().map(f64::abs).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = digital_max > 15.0 && mast_max <= 8.0 && secs < 1200.0;
    let fmt = |c: &[f64]| c.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(" ");
    report(
        "cliff vs graceful degradation",
        pass,
        format!(
            "PSNR over -10..10 dB at 128x128: digital [{}] largest step {digital_max:.1} dB (need > 15); \
             mast [{}] largest step {mast_max:.1} dB (need <= 8); {secs:.1} s",
            fmt(&digital),
            fmt(&mast)
        ),
    );
    assert!(pass);
}

fn direct_accuracy(kind: InputKind, difficulty: Difficulty, query: Query, scenes: std::ops::Range<u64>) -> f64 {
    let gen = SceneGenerator::default();
    let stack = StackParams::default();
    let cfg = ProbeConfig::default();
    let mut ok = 0;
    let n = scenes.end - scenes.start;
    for s in scenes {
        let (video, truth) = render(&gen.random_spec(s, difficulty).unwrap()).unwrap();
        let (img, mask) = build_input(kind, &video, &stack).unwrap();
        let trails = extract_trails(&img, &mask, &cfg).unwrap();
        ok += is_correct(&answer(query, &trails), &truth) as usize;
    }
    ok as f64 / n as f64
}

#[test]
fn probe_soundness() {
    let _g = serial();
    let start = Instant::now();
    let clean = direct_accuracy(InputKind::Chrono, Difficulty::Easy, Query::Direction, 0..100);
    let cfg = SweepConfig {
        schemes: vec!["mast".into()],
        snr_db: vec![0.0, f64::INFINITY],
        trials: 1,
        scenes: (0..100).collect(),
        seed: Some(6),
        difficulty: Difficulty::Easy,
        query: Query::Direction,
        ..SweepConfig::default()
    };
    let out = run_sweep(&cfg, &SchemeRegistry::default(), None).unwrap();
    let pts = summarize(&out.rows);
    let at0 = point(&pts, "mast", 0.0);
    let noiseless = point(&pts, "mast", f64::INFINITY).accuracy.unwrap();
    let acc0 = at0.accuracy.unwrap();
    let k = cfg.k();
    let ratio = bcr(k, cfg.frames, cfg.height, cfg.width);
    let secs = start.elapsed().as_secs_f64();
    let pass = clean == 1.0 && acc0 >= 0.8 && at0.rows == 100 && secs < 900.0;
    report(
        "probe soundness",
        pass,
        format!(
            "easy direction-8way, clean stacked input {:.0}% (need 100%); mast at 0 dB, k = {k} (BCR {ratio:.3e}) {:.0}% (need >= 80%); \
             mast noiseless {:.0}%; {secs:.1} s",
            100.0 * clean,
            100.0 * acc0,
            100.0 * noiseless
        ),
    );
    assert!(pass);
}

#[test]
fn temporal_order_superiority() {
    let _g = serial();
    let start = Instant::now();
    let chrono = direct_accuracy(InputKind::Chrono, Difficulty::Hard, Query::WhichMovedLast, 0..100);
    let averaged = direct_accuracy(InputKind::AveragedFrame, Difficulty::Hard, Query::WhichMovedLast, 0..100);
    let margin = 100.0 * (chrono - averaged);
    let secs = start.elapsed().as_secs_f64();
    let pass = margin >= 30.0 && secs < 600.0;
    report(
        "temporal-order superiority",
        pass,
        format!(
            "which-moved-last over 100 hard scenes, clean: chrono {:.0}%, averaged-frame {:.0}%, margin {margin:.0} pp (need >= 30); {secs:.1} s",
            100.0 * chrono,
            100.0 * averaged
        ),
    );
    assert!(pass);
}

fn random_video(rng: &mut ChaCha8Rng, t: usize, h: usize, w: usize) -> Video {
    Video::new((0..t).map(|_| random_image(rng, h, w)).collect()).unwrap()
}

#[test]
fn complexity_linearity() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = StackParams::default();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut counts_match = true;
    let mut big_ms = f64::NAN;
    for &t in &[4usize, 8, 16] {
        for &s in &[32usize, 64, 96, 128] {
            let v = random_video(&mut rng, t, s, s);
            let best = (0..7)
                .map(|_| {
                    let start = Instant::now();
                    std::hint::black_box(chrono_encode(&v, &params).unwrap());
                    start.elapsed().as_secs_f64()
                })
                .fold(f64::INFINITY, f64::min);
            xs.push((t * s * s) as f64);
            ys.push(best);
            if t == 16 && s == 128 {
                big_ms = best * 1e3;
            }
            if s <= 64 {
                counts_match &= count_encode_ops(&v, &params).unwrap() == flop_estimate(t, s, s);
            }
        }
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    let pass = r2 > 0.98 && big_ms < 100.0 && counts_match;
    report(
        "complexity linearity",
        pass,
        format!(
            "R^2 = {r2:.4} over {} (T,H,W) points (need > 0.98); 16x128x128 in {big_ms:.1} ms (need < 100); \
             flop_estimate equals instrumented count: {counts_match}; flop_estimate(16,128,128) = {}",
            xs.len(),
            flop_estimate(16, 128, 128)
        ),
    );
    assert!(pass);
}

#[test]
fn determinism() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        "schemes = [\"mast\", \"dct\", \"digital\", \"averaged-frame\", \"single-frame\"]\n\
         snr_db = [-5.0, 5.0, inf]\ntrials = 2\nscenes = [0, 1, 2]\nheight = 32\nwidth = 32\nframes = 8\npatch_size = 8\n\
         train_scenes = 8\n[train]\nepochs = 5\n",
    )
    .unwrap();
    let run = |out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_chromacomm"))
            .args(["sweep", "--seed", "42", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(dir.path().join(out).join("results.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
    let pass = a == b && rows == 5 * 3 * 2 * 3;
    report("determinism", pass, format!("two sweep runs, {rows} rows, results.csv byte-identical: {}", a == b));
    assert!(pass);
}
