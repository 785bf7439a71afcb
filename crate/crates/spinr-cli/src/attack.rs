//! `spinr attack`: decode a bitstream, perturb the model repeatedly, and
//! report how the reconstruction degrades — per-trial records plus a
//! mean ± std table against the clean baseline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use spinr_core::image_io::load_ppm;
use spinr_core::robustness::{hidden_neuron_count, run_trials, AttackKind, AttackSpec};
use spinr_core::stream::format::{deserialize, to_model};
use spinr_core::Model;

use crate::error::{io_err, CliError};
use crate::manifest::{sha256_file, tool_version, write_manifest, RunManifest};
use crate::output::{fmt_metric, json_metric, render_table, write_jsonl};

#[derive(Debug, clap::Args)]
pub struct AttackArgs {
    /// Serialized model to attack.
    #[arg(long)]
    pub bitstream: PathBuf,

    /// Reference image the renders are scored against (P6).
    #[arg(long)]
    pub image: PathBuf,

    /// Neuron-loss attack sizes, e.g. 1,5,10.
    #[arg(long, value_delimiter = ',')]
    pub lose_neurons: Vec<usize>,

    /// Parameter-noise levels (sigma), e.g. 1e-4,1e-3,1e-2.
    #[arg(long, value_delimiter = ',')]
    pub noise_sigma: Vec<f64>,

    /// Dense layers to zero outright, by index.
    #[arg(long, value_delimiter = ',')]
    pub corrupt_layer: Vec<usize>,

    /// Independent perturbation draws per attack row.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    /// Attack RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Directory the report and manifest land in (created if missing).
    #[arg(long, default_value = "runs")]
    pub out_dir: PathBuf,
}

/// One table row: an attack kind plus its strength.
struct Row {
    kind: &'static str,
    value: Value,
    attack: AttackKind,
}

pub fn run(args: &AttackArgs) -> Result<(), CliError> {
    let rows = plan(args)?;
    if rows.is_empty() {
        return Err(CliError::Usage(
            "nothing to do: pass --lose-neurons, --noise-sigma, or --corrupt-layer".into(),
        ));
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }

    let model = load_model(&args.bitstream)?;
    let image = load_ppm(&args.image)
        .map_err(|source| CliError::Image { path: args.image.clone(), source })?;
    validate(args, &model)?;

    let mut records = Vec::new();
    let mut table_rows = Vec::new();
    let mut base_psnr = f64::NAN;
    for row in &rows {
        let spec = AttackSpec { kind: row.attack, trials: args.trials, seed: args.seed };
        let outcome = run_trials(&model, &image, &spec);
        base_psnr = outcome.base_psnr;

        records.push(json!({
            "command": "attack",
            "kind": row.kind,
            "value": row.value,
            "trials": args.trials,
            "seed": args.seed,
            "base_psnr": json_metric(outcome.base_psnr),
            "base_ssim": outcome.base_ssim.map(json_metric).unwrap_or(Value::Null),
            "mean_psnr": json_metric(outcome.psnr_stats.mean),
            "std_psnr": outcome.psnr_stats.std,
            "mean_ssim": outcome.ssim_stats.map(|s| json_metric(s.mean)).unwrap_or(Value::Null),
            "psnr": outcome.psnr.iter().copied().map(json_metric).collect::<Vec<_>>(),
            "ssim": outcome
                .ssim
                .as_ref()
                .map(|v| Value::Array(v.iter().copied().map(json_metric).collect()))
                .unwrap_or(Value::Null),
        }));
        table_rows.push(vec![
            row.kind.to_string(),
            row.value.to_string(),
            fmt_metric(outcome.psnr_stats.mean),
            fmt_metric(outcome.psnr_stats.std),
            fmt_metric(outcome.psnr_stats.mean - outcome.base_psnr),
            outcome
                .ssim_stats
                .map(|s| fmt_metric(s.mean))
                .unwrap_or_else(|| "-".into()),
        ]);
    }

    fs::create_dir_all(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let dir = &args.out_dir;
    write_jsonl(&dir.join("attack_report.jsonl"), &records)?;

    let headers: Vec<String> = ["attack", "value", "mean psnr", "std", "vs base", "mean ssim"]
        .map(String::from)
        .to_vec();
    let mut table = format!("base psnr: {} dB over {} trials per row\n", fmt_metric(base_psnr), args.trials);
    table.push_str(&render_table(&headers, &table_rows));
    fs::write(dir.join("attack_table.txt"), &table).map_err(io_err(dir.join("attack_table.txt")))?;
    print!("{table}");

    let mut inputs = BTreeMap::new();
    inputs.insert(args.bitstream.display().to_string(), sha256_file(&args.bitstream)?);
    inputs.insert(args.image.display().to_string(), sha256_file(&args.image)?);
    write_manifest(
        &dir.join("attack_manifest.json"),
        &RunManifest {
            tool: tool_version(),
            command: "attack".into(),
            config: config_json(args),
            seed: args.seed,
            inputs,
            outputs: vec!["attack_report.jsonl".into(), "attack_table.txt".into()],
            replay: replay_argv(args),
        },
    )?;
    Ok(())
}

fn plan(args: &AttackArgs) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::new();
    for &k in &args.lose_neurons {
        rows.push(Row {
            kind: "lose-neurons",
            value: json!(k),
            attack: AttackKind::LoseNeurons { k },
        });
    }
    for &sigma in &args.noise_sigma {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(CliError::Usage(format!("--noise-sigma must be >= 0, got {sigma}")));
        }
        rows.push(Row {
            kind: "noise-sigma",
            value: json!(sigma),
            attack: AttackKind::ParamNoise { sigma },
        });
    }
    for &layer in &args.corrupt_layer {
        rows.push(Row {
            kind: "corrupt-layer",
            value: json!(layer),
            attack: AttackKind::CorruptLayer { layer },
        });
    }
    Ok(rows)
}

fn validate(args: &AttackArgs, model: &Model) -> Result<(), CliError> {
    let budget = hidden_neuron_count(model);
    for &k in &args.lose_neurons {
        if k > budget {
            return Err(CliError::Usage(format!(
                "--lose-neurons {k} exceeds the {budget} hidden neurons this model has"
            )));
        }
    }
    for &layer in &args.corrupt_layer {
        if layer >= model.layers.len() {
            return Err(CliError::Usage(format!(
                "--corrupt-layer {layer} is out of range (model has layers 0..{})",
                model.layers.len()
            )));
        }
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let wrap = |source| CliError::Format { path: path.to_path_buf(), source };
    let ds = deserialize(&bytes, false).map_err(wrap)?;
    to_model(&ds).map_err(wrap)
}

fn config_json(args: &AttackArgs) -> Value {
    json!({
        "bitstream": args.bitstream.display().to_string(),
        "image": args.image.display().to_string(),
        "lose_neurons": args.lose_neurons,
        "noise_sigma": args.noise_sigma,
        "corrupt_layer": args.corrupt_layer,
        "trials": args.trials,
        "seed": args.seed,
        "out_dir": args.out_dir.display().to_string(),
    })
}

fn replay_argv(args: &AttackArgs) -> Vec<String> {
    let join = |it: &[String]| it.join(",");
    let mut argv = vec![
        "attack".into(),
        "--bitstream".into(),
        args.bitstream.display().to_string(),
        "--image".into(),
        args.image.display().to_string(),
    ];
    if !args.lose_neurons.is_empty() {
        argv.push("--lose-neurons".into());
        argv.push(join(&args.lose_neurons.iter().map(usize::to_string).collect::<Vec<_>>()));
    }
    if !args.noise_sigma.is_empty() {
        argv.push("--noise-sigma".into());
        argv.push(join(&args.noise_sigma.iter().map(f64::to_string).collect::<Vec<_>>()));
    }
    if !args.corrupt_layer.is_empty() {
        argv.push("--corrupt-layer".into());
        argv.push(join(&args.corrupt_layer.iter().map(usize::to_string).collect::<Vec<_>>()));
    }
    argv.extend([
        "--trials".into(),
        args.trials.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--out-dir".into(),
        args.out_dir.display().to_string(),
    ]);
    argv
}
