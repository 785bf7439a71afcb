//! `spinr fit`: train a network on one image, serialize it, and report
//! PSNR/SSIM/CF. Multi-seed sweeps fan the training out across worker
//! threads; every file write stays on the calling thread so artifacts and
//! manifests land in a deterministic order no matter how the workers are
//! scheduled.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde_json::{json, Value};

use spinr_core::image_io::save_ppm;
use spinr_core::metrics::{aggregate, compression_factor, psnr, ssim, SSIM_WINDOW};
use spinr_core::models::{render, ModelSpec};
use spinr_core::stream::format::{deserialize, serialize, to_model, Header};
use spinr_core::train::{default_lr, fit, fit_spinr, StageSchedule, TrainConfig};
use spinr_core::{Image, Model};

use crate::args::{Method, Quant};
use crate::error::{io_err, CliError};
use crate::manifest::{sha256_file, tool_version, write_manifest, RunManifest};
use crate::output::{fmt_mean_std, fmt_metric, json_metric, render_table, write_jsonl};

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Input image (P6 portable pixmap).
    #[arg(long)]
    pub image: PathBuf,

    /// Trainer: joint SIREN, joint Fourier-feature net, or staged SIREN.
    #[arg(long, value_enum, default_value_t = Method::Siren)]
    pub method: Method,

    /// Hidden width h.
    #[arg(long, default_value_t = 128)]
    pub width: usize,

    /// Hidden depth n (layers beyond the first).
    #[arg(long, default_value_t = 4)]
    pub depth: usize,

    /// SIREN frequency scale.
    #[arg(long, default_value_t = spinr_core::models::DEFAULT_OMEGA0)]
    pub omega0: f64,

    /// Fourier feature count m (feature dimension is 2m).
    #[arg(long, default_value_t = spinr_core::models::DEFAULT_FOURIER_M)]
    pub fourier_m: usize,

    /// Fourier feature bandwidth sigma.
    #[arg(long, default_value_t = spinr_core::models::DEFAULT_FOURIER_SIGMA)]
    pub fourier_sigma: f64,

    /// Optimization steps (total across stages for the staged trainer).
    #[arg(long, default_value_t = spinr_core::train::DEFAULT_TOTAL_STEPS)]
    pub steps: usize,

    /// Learning rate; defaults to the family standard (1e-4 SIREN, 1e-3 Fourier).
    #[arg(long)]
    pub lr: Option<f64>,

    /// Bitstream precision.
    #[arg(long, value_enum, default_value_t = Quant::F32)]
    pub quant: Quant,

    /// Seeds to sweep: seed-base, seed-base+1, ...
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,

    /// First seed of the sweep.
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,

    /// Directory all artifacts land in (created if missing).
    #[arg(long, default_value = "runs")]
    pub out_dir: PathBuf,
}

/// Everything one seed produces, computed on a worker and written later.
struct SeedRun {
    seed: u64,
    bitstream: Vec<u8>,
    loss_curve: Vec<f64>,
    /// Stage renders (staged method only), already clamped at save time.
    stage_renders: Vec<Image>,
    /// Render of the model a receiver would decode from the bitstream.
    final_render: Image,
    record: Value,
}

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    if args.width == 0 || args.depth == 0 {
        return Err(CliError::Usage("--width and --depth must be at least 1".into()));
    }
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let lr = args.lr.unwrap_or_else(|| default_lr(args.method.family()));
    if !(lr.is_finite() && lr > 0.0) {
        return Err(CliError::Usage(format!("--lr must be positive and finite, got {lr}")));
    }
    let spec = match args.method {
        Method::Siren | Method::Spinr => ModelSpec::siren(args.width, args.depth, args.omega0),
        Method::Fourier => {
            ModelSpec::fourier(args.width, args.depth, args.fourier_m, args.fourier_sigma)
        }
    };

    let image = spinr_core::image_io::load_ppm(&args.image)
        .map_err(|source| CliError::Image { path: args.image.clone(), source })?;
    let image_hash = sha256_file(&args.image)?;
    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;

    let seeds: Vec<u64> = (args.seed_base..args.seed_base + args.seeds).collect();
    let runs = sweep(args, &spec, lr, &image, &seeds)?;

    // Single-writer phase: everything below happens on this thread, in
    // seed order.
    let dir = &args.out_dir;
    let config = config_json(args, lr);
    let mut inputs = BTreeMap::new();
    inputs.insert(args.image.display().to_string(), image_hash);
    let mut seed_manifests = Vec::new();
    let mut records = Vec::new();

    for run in &runs {
        let stem = format!("fit_s{}", run.seed);
        let mut outputs = Vec::new();

        let stream_name = format!("{stem}.spnr");
        fs::write(dir.join(&stream_name), &run.bitstream).map_err(io_err(dir.join(&stream_name)))?;
        outputs.push(stream_name);

        let render_name = format!("{stem}_render.ppm");
        save_ppm(&dir.join(&render_name), &run.final_render)
            .map_err(|source| CliError::Image { path: dir.join(&render_name), source })?;
        outputs.push(render_name);

        for (i, snap) in run.stage_renders.iter().enumerate() {
            let name = format!("{stem}_stage{}.ppm", i + 1);
            save_ppm(&dir.join(&name), snap)
                .map_err(|source| CliError::Image { path: dir.join(&name), source })?;
            outputs.push(name);
        }

        let loss_name = format!("{stem}_loss.jsonl");
        let loss_records: Vec<Value> = run
            .loss_curve
            .iter()
            .enumerate()
            .map(|(step, loss)| json!({ "step": step, "loss": loss }))
            .collect();
        write_jsonl(&dir.join(&loss_name), &loss_records)?;
        outputs.push(loss_name);

        let manifest_name = format!("{stem}_manifest.json");
        write_manifest(
            &dir.join(&manifest_name),
            &RunManifest {
                tool: tool_version(),
                command: "fit".into(),
                config: config.clone(),
                seed: run.seed,
                inputs: inputs.clone(),
                outputs,
                replay: replay_argv(args, lr, run.seed, 1),
            },
        )?;
        seed_manifests.push(manifest_name);
        records.push(run.record.clone());
    }

    write_jsonl(&dir.join("fit_summary.jsonl"), &records)?;
    let table = summary_table(&runs);
    fs::write(dir.join("fit_table.txt"), &table).map_err(io_err(dir.join("fit_table.txt")))?;
    print!("{table}");

    let mut batch_outputs = vec!["fit_summary.jsonl".to_string(), "fit_table.txt".to_string()];
    batch_outputs.extend(seed_manifests);
    write_manifest(
        &dir.join("fit_manifest.json"),
        &RunManifest {
            tool: tool_version(),
            command: "fit".into(),
            config,
            seed: args.seed_base,
            inputs,
            outputs: batch_outputs,
            replay: replay_argv(args, lr, args.seed_base, args.seeds),
        },
    )?;
    Ok(())
}

/// Run every seed on a small worker pool and hand back the results in
/// seed order. Workers only compute; they never touch the filesystem.
fn sweep(
    args: &FitArgs,
    spec: &ModelSpec,
    lr: f64,
    image: &Image,
    seeds: &[u64],
) -> Result<Vec<SeedRun>, CliError> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(seeds.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(u64, Result<SeedRun, CliError>)>();

    let mut by_seed: BTreeMap<u64, Result<SeedRun, CliError>> = std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let t0 = Instant::now();
                let outcome = run_seed(args, spec, lr, image, seeds[i]);
                if let Ok(run) = &outcome {
                    eprintln!(
                        "fit seed {}: psnr {} dB ({:.0}s)",
                        seeds[i],
                        run.record["psnr"],
                        t0.elapsed().as_secs_f64()
                    );
                }
                if tx.send((seeds[i], outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        rx.iter().collect()
    });

    let mut runs = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let outcome = by_seed.remove(seed).expect("every seed reports exactly once");
        runs.push(outcome?);
    }
    Ok(runs)
}

fn run_seed(
    args: &FitArgs,
    spec: &ModelSpec,
    lr: f64,
    image: &Image,
    seed: u64,
) -> Result<SeedRun, CliError> {
    let cfg = TrainConfig { total_steps: args.steps, lr, seed, eval_every: 0 };
    let wrap = |source| CliError::Train { seed, source };

    let (model, loss_curve, stage_renders, stage_meta): (Model, Vec<f64>, Vec<Image>, Value) =
        if args.method == Method::Spinr {
            let schedule = StageSchedule::equal_split(spec, args.steps);
            let result = fit_spinr(spec, image, &cfg, &schedule).map_err(wrap)?;
            let stage_psnr: Vec<Value> =
                result.stage_renders.iter().map(|r| json_metric(psnr(image, r))).collect();
            let meta = json!({ "stage_ends": result.stage_ends, "stage_psnr": stage_psnr });
            (result.model, result.loss_curve, result.stage_renders, meta)
        } else {
            let result = fit(spec, image, &cfg).map_err(wrap)?;
            (result.model, result.loss_curve, Vec::new(), Value::Null)
        };

    // Score what a receiver would actually decode, not the f64 weights:
    // at u8/u16 the quantization cost belongs in the report.
    let bitstream = serialize(&model, args.quant.mode());
    let header = Header::parse(&bitstream).expect("own serializer writes valid headers");
    let decoded = to_model(&deserialize(&bitstream, false).expect("own stream decodes"))
        .expect("own stream is complete");
    let final_render = render(&decoded, image.height, image.width);

    let quality = psnr(image, &final_render);
    let structural = (image.height >= SSIM_WINDOW && image.width >= SSIM_WINDOW)
        .then(|| ssim(image, &final_render));
    let train_quality = psnr(image, &render(&model, image.height, image.width));
    let cf = compression_factor(image.pixel_count() * 3, header.payload_bytes());

    let mut record = json!({
        "command": "fit",
        "seed": seed,
        "method": args.method.name(),
        "width": args.width,
        "depth": args.depth,
        "steps": args.steps,
        "lr": lr,
        "quant": args.quant.name(),
        "params": spec.param_count(),
        "payload_bytes": header.payload_bytes(),
        "cf": cf,
        "psnr": json_metric(quality),
        "ssim": structural.map(json_metric).unwrap_or(Value::Null),
        "train_psnr": json_metric(train_quality),
        "final_loss": loss_curve.last().copied().expect("curve is never empty"),
    });
    if let Value::Object(meta) = stage_meta {
        record.as_object_mut().expect("record is an object").extend(meta);
    }

    Ok(SeedRun { seed, bitstream, loss_curve, stage_renders, final_render, record })
}

fn summary_table(runs: &[SeedRun]) -> String {
    let headers: Vec<String> =
        ["seed", "psnr (dB)", "ssim", "cf", "final loss"].map(String::from).to_vec();
    let cell = |v: &Value| match v {
        Value::Number(n) => fmt_metric(n.as_f64().expect("metrics are f64")),
        Value::Null => "-".into(),
        other => other.to_string().trim_matches('"').to_string(),
    };
    let mut rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                cell(&r.record["psnr"]),
                cell(&r.record["ssim"]),
                cell(&r.record["cf"]),
                cell(&r.record["final_loss"]),
            ]
        })
        .collect();
    if runs.len() > 1 {
        let metric = |key: &str| -> Vec<f64> {
            runs.iter().filter_map(|r| r.record[key].as_f64()).collect()
        };
        let stat = |key: &str| -> String {
            let values = metric(key);
            if values.is_empty() {
                return "-".into();
            }
            let agg = aggregate(&values);
            fmt_mean_std(agg.mean, agg.std)
        };
        rows.push(vec![
            "mean ± std".into(),
            stat("psnr"),
            stat("ssim"),
            stat("cf"),
            stat("final_loss"),
        ]);
    }
    render_table(&headers, &rows)
}

fn config_json(args: &FitArgs, lr: f64) -> Value {
    json!({
        "image": args.image.display().to_string(),
        "method": args.method.name(),
        "width": args.width,
        "depth": args.depth,
        "omega0": args.omega0,
        "fourier_m": args.fourier_m,
        "fourier_sigma": args.fourier_sigma,
        "steps": args.steps,
        "lr": lr,
        "quant": args.quant.name(),
        "seeds": args.seeds,
        "seed_base": args.seed_base,
        "out_dir": args.out_dir.display().to_string(),
    })
}

fn replay_argv(args: &FitArgs, lr: f64, seed_base: u64, seeds: u64) -> Vec<String> {
    let p = |path: &Path| path.display().to_string();
    vec![
        "fit".into(),
        "--image".into(),
        p(&args.image),
        "--method".into(),
        args.method.name().into(),
        "--width".into(),
        args.width.to_string(),
        "--depth".into(),
        args.depth.to_string(),
        "--omega0".into(),
        args.omega0.to_string(),
        "--fourier-m".into(),
        args.fourier_m.to_string(),
        "--fourier-sigma".into(),
        args.fourier_sigma.to_string(),
        "--steps".into(),
        args.steps.to_string(),
        "--lr".into(),
        lr.to_string(),
        "--quant".into(),
        args.quant.name().into(),
        "--seeds".into(),
        seeds.to_string(),
        "--seed-base".into(),
        seed_base.to_string(),
        "--out-dir".into(),
        p(&args.out_dir),
    ]
}
